#include "plangen/bench.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

using namespace plangen;
namespace fs = std::filesystem;

namespace {

domains::IntRange range_of(const std::vector<int> &v, domains::IntRange fallback) {
  if (v.empty()) {
    return fallback;
  }
  return {v[0], v[1]};
}

std::map<std::string, int> limits_of(const std::vector<DatasetRecord> &recs) {
  std::map<std::string, int> limits;
  for (const auto &r : recs) {
    std::map<std::string, int> count;
    for (const auto &o : domains::problem_of(r).objects) {
      ++count[o.type];
    }
    for (const auto &[t, n] : count) {
      limits[t] = std::max(limits[t], n);
    }
  }
  return limits;
}

struct ModelFlags {
  policy::ModelConfig model;
  policy::TrainConfig train;

  void add(CLI::App *app) {
    app->add_option("--layers", model.layers);
    app->add_option("--heads", model.heads);
    app->add_option("--embed", model.embed);
    app->add_option("--ff", model.ff);
    app->add_option("--context", model.context);
    app->add_option("--dropout", model.dropout);
    app->add_option("--lr", train.lr);
    app->add_option("--warmup", train.warmup);
    app->add_option("--epochs", train.epochs);
    app->add_option("--batch", train.batch);
    app->add_option("--weight-decay", train.weight_decay);
    app->add_option("--max-steps", train.max_steps);
  }
};

void print_summary(const std::vector<loop::EvalRecord> &recs) {
  auto s = bench::aggregate(bench::rows_of(recs, "model"));
  std::printf("completion %.1f%%, mean length %.3f +- %.3f", s[0].completion,
              s[0].mean_length, s[0].se_length);
  if (s[0].optimality) {
    std::printf(", optimal %.1f%%", *s[0].optimality);
  }
  std::printf("\n");
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Plan generation with self-improving sequence models"};
  app.require_subcommand(1);

  // generate
  auto *gen = app.add_subcommand("generate", "Generate a problem set");
  domains::GeneratorConfig gcfg;
  std::string domain_name = "blocksworld";
  std::vector<int> blocks, cities, city_size, packages, airplanes, lab_grid,
      sok_grid, boxes, walls;
  std::string out_dir;
  std::size_t n_valid = 0, n_test = 0, oracle_budget = 0;
  bool do_label = false;
  gen->add_option("--domain", domain_name)->required();
  gen->add_option("--count", gcfg.count)->required();
  gen->add_option("--seed", gcfg.seed);
  gen->add_option("--blocks", blocks)->expected(2);
  gen->add_option("--cities", cities)->expected(2);
  gen->add_option("--city-size", city_size)->expected(2);
  gen->add_option("--packages", packages)->expected(2);
  gen->add_option("--airplanes", airplanes)->expected(2);
  gen->add_option("--labyrinth-grid", lab_grid)->expected(2);
  gen->add_option("--sokoban-grid", sok_grid)->expected(2);
  gen->add_option("--boxes", boxes)->expected(2);
  gen->add_option("--walls", walls)->expected(2);
  gen->add_option("--goal-omit", gcfg.goal_omit_prob);
  gen->add_flag("--log-blocks", gcfg.log_block_distribution);
  gen->add_flag("--override-bounds", gcfg.override_bounds);
  gen->add_option("--valid", n_valid, "Size of the validation split");
  gen->add_option("--test", n_test, "Size of the test split");
  gen->add_flag("--label", do_label, "Solve with the baseline solver");
  gen->add_option("--oracle-budget", oracle_budget,
                  "Also record BFS-optimal lengths");
  gen->add_option("--out", out_dir)->required();

  // validate
  auto *val = app.add_subcommand("validate", "Check plans against a problem");
  std::string domain_file, problem_file;
  std::vector<std::string> plan_files;
  val->add_option("--domain", domain_name);
  val->add_option("--domain-file", domain_file);
  val->add_option("problem", problem_file)->required();
  val->add_option("plans", plan_files)->required();

  // solve
  auto *sol = app.add_subcommand("solve", "Solve a problem");
  bool optimal = false;
  std::size_t node_budget = 1000000;
  std::string external;
  sol->add_option("--domain", domain_name)->required();
  sol->add_option("problem", problem_file)->required();
  sol->add_flag("--optimal", optimal, "Breadth-first optimal search");
  sol->add_option("--budget", node_budget);
  sol->add_option("--external", external,
                  "Planner command with {domain} {problem} {plan-out}");

  // pretrain
  auto *pre = app.add_subcommand("pretrain", "Train the initial model");
  ModelFlags flags;
  flags.add(pre);
  std::string train_file, valid_file, ckpt_out;
  std::uint64_t seed = 0;
  pre->add_option("--train", train_file)->required();
  pre->add_option("--valid", valid_file);
  pre->add_option("--seed", seed);
  pre->add_option("--out", ckpt_out)->required();

  // improve
  auto *imp = app.add_subcommand("improve", "Run self-improvement iterations");
  std::string run_dir, pool_file, ckpt_in;
  std::size_t iterations = 15, m = 200, n = 32;
  std::optional<std::size_t> stop_after;
  double temperature = 1.0, ft_lr = 0;
  std::size_t ft_epochs = 30;
  bool resume = false;
  imp->add_option("--run", run_dir)->required();
  imp->add_option("--pool", pool_file)->required();
  imp->add_option("--checkpoint", ckpt_in)->required();
  imp->add_option("--iterations", iterations);
  imp->add_option("--stop-after", stop_after,
                  "Execute at most this many iterations in this call");
  imp->add_option("-m", m);
  imp->add_option("-n", n);
  imp->add_option("--temperature", temperature);
  imp->add_option("--finetune-lr", ft_lr, "Default: pretraining lr / 10");
  imp->add_option("--finetune-epochs", ft_epochs);
  imp->add_option("--seed", seed);
  imp->add_flag("--resume", resume);
  imp->add_option("--domain", domain_name);

  // evaluate
  auto *ev = app.add_subcommand("evaluate", "Best-of-N evaluation");
  std::string test_file, eval_out;
  bool with_bfs = false, greedy = false;
  ev->add_option("--checkpoint", ckpt_in)->required();
  ev->add_option("--test", test_file)->required();
  ev->add_option("--n", n)->required();
  ev->add_flag("--bfs", with_bfs);
  ev->add_flag("--greedy", greedy);
  ev->add_option("--temperature", temperature);
  ev->add_option("--seed", seed);
  ev->add_option("--domain", domain_name);
  ev->add_option("--train", train_file, "Check that test is disjoint from it");
  ev->add_option("--out", eval_out)->required();

  // report
  auto *rep = app.add_subcommand("report", "Summary and convergence tables");
  std::vector<std::string> runs;
  rep->add_option("runs", runs)->required();
  rep->add_option("--out", out_dir)->required();

  // stats
  auto *st = app.add_subcommand("stats", "Paired tests between two evaluations");
  std::string eval_a, eval_b, label;
  std::size_t comparisons = 1;
  bool chi_square = false;
  st->add_option("a", eval_a)->required();
  st->add_option("b", eval_b)->required();
  st->add_option("--comparisons", comparisons);
  st->add_option("--label", label);
  st->add_flag("--chi-square", chi_square);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      gcfg.domain = domains::domain_from_string(domain_name);
      gcfg.blocks = range_of(blocks, gcfg.blocks);
      gcfg.cities = range_of(cities, gcfg.cities);
      gcfg.city_size = range_of(city_size, gcfg.city_size);
      gcfg.packages = range_of(packages, gcfg.packages);
      gcfg.airplanes = range_of(airplanes, gcfg.airplanes);
      gcfg.labyrinth_grid = range_of(lab_grid, gcfg.labyrinth_grid);
      gcfg.sokoban_grid = range_of(sok_grid, gcfg.sokoban_grid);
      gcfg.boxes = range_of(boxes, gcfg.boxes);
      gcfg.walls = range_of(walls, gcfg.walls);
      auto set = domains::generate(gcfg);
      auto parts = domains::split(set, n_valid, n_test);
      fs::create_directories(out_dir);
      domains::LabelOptions lo;
      lo.oracle_budget = oracle_budget;
      for (auto *ps : {&parts.train, &parts.valid, &parts.test}) {
        if (ps->problems.empty()) {
          continue;
        }
        std::vector<DatasetRecord> recs;
        if (do_label) {
          recs = domains::label(*ps, lo);
        } else {
          for (const auto &e : ps->problems) {
            recs.push_back({e.id, domains::to_string(ps->domain),
                            pddl::to_pddl(e.problem), std::nullopt, "", std::nullopt});
          }
        }
        auto path = fs::path(out_dir) / (domains::to_string(ps->split) + ".jsonl");
        write_jsonl(path, recs);
        std::printf("%s: %zu problems\n", path.c_str(), recs.size());
      }
    } else if (*val) {
      pddl::DomainDef dom =
          domain_file.empty()
              ? domains::domain_def(domains::domain_from_string(domain_name))
              : pddl::parse_domain(read_file(domain_file), domain_file);
      auto prob = pddl::parse_problem(read_file(problem_file), dom, problem_file);
      auto task = pddl::ground(dom, prob);
      int bad = 0;
      for (const auto &pf : plan_files) {
        auto compiled = world::validate(task, world::parse_plan_text(task, read_file(pf)));
        std::printf("%s: %s\n", pf.c_str(), world::verdict(task, compiled).c_str());
        bad += !(compiled.valid && compiled.goal_reached);
      }
      return bad ? 1 : 0;
    } else if (*sol) {
      auto kind = domains::domain_from_string(domain_name);
      auto prob = pddl::parse_problem(read_file(problem_file), domains::domain_def(kind),
                                      problem_file);
      auto task = domains::ground(kind, prob);
      std::optional<world::Plan> plan;
      if (optimal) {
        plan = domains::bfs_oracle(task, node_budget);
      } else {
        domains::SolveOptions so;
        so.node_budget = node_budget;
        if (!external.empty()) {
          so.strategy = domains::SolveStrategy::external;
          so.external_command = external;
        }
        plan = domains::baseline_solve(kind, prob, task, so);
      }
      if (!plan) {
        std::fprintf(stderr, "no plan found within budget\n");
        return 2;
      }
      for (const auto &l : world::plan_to_strings(task, *plan)) {
        std::printf("%s\n", l.c_str());
      }
    } else if (*pre) {
      auto train = read_jsonl(train_file);
      std::vector<DatasetRecord> valid;
      if (!valid_file.empty()) {
        valid = read_jsonl(valid_file);
      }
      if (train.empty()) {
        throw UsageError(train_file + " is empty");
      }
      auto all = train;
      all.insert(all.end(), valid.begin(), valid.end());
      auto kind = domains::domain_from_string(train[0].domain);
      auto vocab = tokenizer::build_vocab(domains::domain_def(kind), limits_of(all));
      auto r = loop::pretrain(train, valid, vocab, flags.model, flags.train, seed);
      policy::save_checkpoint(ckpt_out, r.checkpoint);
      policy::write_log_csv(ckpt_out + ".log.csv", r.train.log);
      std::printf("saved %s (step %llu", ckpt_out.c_str(),
                  static_cast<unsigned long long>(r.checkpoint.step));
      if (!r.train.valid_losses.empty()) {
        std::printf(", best validation loss %.4f", r.train.best_valid_loss);
      }
      std::printf(")\n");
    } else if (*imp) {
      auto pool = read_jsonl(pool_file);
      auto pi0 = policy::load_checkpoint(ckpt_in);
      if (pool.empty()) {
        throw UsageError(pool_file + " is empty");
      }
      if (!resume && loop::completed_iterations(run_dir) > 0) {
        throw UsageError(run_dir + " already holds iterations; pass --resume");
      }
      policy::TrainConfig base;
      auto cfg = loop::LoopConfig::for_pretrain(base);
      if (ft_lr > 0) {
        cfg.finetune.lr = ft_lr;
      }
      cfg.finetune.epochs = ft_epochs;
      cfg.n_loop = iterations;
      cfg.m = m;
      cfg.n = n;
      cfg.sampler.temperature = temperature;
      cfg.seed = seed;
      cfg.dir = run_dir;
      auto r = loop::run(cfg, domains::domain_from_string(pool[0].domain), pool, pi0,
                         stop_after);
      for (const auto &it : r.reports) {
        std::printf("iteration %d: valid %.3f, harvested %zu/%zu, cache mean %.3f\n",
                    it.iteration, it.valid_rate, it.problems_harvested,
                    it.problems_sampled, it.mean_cache_length);
      }
    } else if (*ev) {
      auto ck = policy::load_checkpoint(ckpt_in);
      auto test = read_jsonl(test_file);
      if (!train_file.empty()) {
        loop::check_disjoint(read_jsonl(train_file), test);
      }
      policy::SamplerConfig sc;
      sc.temperature = temperature;
      sc.greedy = greedy;
      sc.seed = seed;
      auto kind = test.empty() ? domains::domain_from_string(domain_name)
                               : domains::domain_from_string(test[0].domain);
      auto recs = loop::evaluate(ck, kind, test, n, with_bfs, sc);
      fs::path out = eval_out;
      write_file_atomic(out, loop::eval_csv(recs));
      fs::path lat = out;
      lat.replace_extension(".latency.csv");
      write_file_atomic(lat, loop::latency_csv(recs));
      print_summary(recs);
    } else if (*rep) {
      std::vector<fs::path> dirs(runs.begin(), runs.end());
      auto files = bench::report(dirs, out_dir);
      std::printf("%s\n%s\n%s\n", files.summary.c_str(), files.intersection.c_str(),
                  files.convergence.c_str());
    } else if (*st) {
      auto a = loop::parse_eval_csv(read_file(eval_a));
      auto b = loop::parse_eval_csv(read_file(eval_b));
      std::map<std::string, const loop::EvalRecord *> by_id;
      for (const auto &r : b) {
        by_id[r.id] = &r;
      }
      std::vector<double> la, lb;
      std::vector<bool> ca, cb;
      for (const auto &r : a) {
        auto it = by_id.find(r.id);
        if (it == by_id.end()) {
          continue;
        }
        ca.push_back(r.completed);
        cb.push_back(it->second->completed);
        if (r.completed && it->second->completed) {
          la.push_back(static_cast<double>(*r.length));
          lb.push_back(static_cast<double>(*it->second->length));
        }
      }
      if (ca.empty()) {
        throw UsageError("the two evaluations share no problems");
      }
      std::vector<bench::StatResult> res;
      if (!la.empty()) {
        res.push_back(bench::wilcoxon_signed_rank(la, lb));
      }
      res.push_back(bench::mcnemar(ca, cb, chi_square));
      for (auto &r : res) {
        r.label = label.empty() ? eval_a + " vs " + eval_b : label;
      }
      bench::bonferroni(res, comparisons);
      std::cout << bench::stats_csv(res);
    }
  } catch (const std::exception &e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
