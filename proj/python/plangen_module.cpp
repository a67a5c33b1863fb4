#include "plangen/bench.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace plangen;

namespace {

py::dict record_dict(const DatasetRecord &r) {
  py::dict d;
  d["id"] = r.id;
  d["domain"] = r.domain;
  d["problem"] = r.problem_pddl;
  d["plan"] = r.plan ? py::cast(*r.plan) : py::none();
  d["plan_source"] = r.plan_source;
  d["optimal_length"] = r.optimal_length ? py::cast(*r.optimal_length) : py::none();
  return d;
}

py::dict eval_dict(const loop::EvalRecord &r) {
  py::dict d;
  d["id"] = r.id;
  d["completed"] = r.completed;
  d["length"] = r.length ? py::cast(*r.length) : py::none();
  d["bfs_length"] = r.bfs_length ? py::cast(*r.bfs_length) : py::none();
  d["optimal_length"] = r.optimal_length ? py::cast(*r.optimal_length) : py::none();
  d["valid_candidates"] = r.valid_candidates;
  d["latency"] = r.latency;
  return d;
}

py::dict stat_dict(const bench::StatResult &r) {
  py::dict d;
  d["test"] = r.test;
  d["statistic"] = r.statistic;
  d["p"] = r.p;
  d["n"] = r.n;
  d["degenerate"] = r.degenerate;
  return d;
}

struct Parsed {
  domains::DomainKind kind;
  pddl::ProblemDef problem;
  pddl::GroundedTask task;
};

Parsed parse(const std::string &domain, const std::string &problem) {
  auto kind = domains::domain_from_string(domain);
  auto prob = pddl::parse_problem(problem, domains::domain_def(kind));
  auto task = domains::ground(kind, prob);
  return {kind, std::move(prob), std::move(task)};
}

} // namespace

PYBIND11_MODULE(_plangen, m) {
  m.doc() = "Plan generation with self-improving sequence models";

  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);

  m.def(
      "generate",
      [](const std::string &domain, std::size_t count, std::uint64_t seed,
         std::optional<std::pair<int, int>> blocks, bool label,
         std::size_t oracle_budget) {
        domains::GeneratorConfig g;
        g.domain = domains::domain_from_string(domain);
        g.count = count;
        g.seed = seed;
        if (blocks) {
          g.blocks = {blocks->first, blocks->second};
        }
        auto set = domains::generate(g);
        std::vector<DatasetRecord> recs;
        if (label) {
          domains::LabelOptions lo;
          lo.oracle_budget = oracle_budget;
          recs = domains::label(set, lo);
        } else {
          for (const auto &e : set.problems) {
            recs.push_back({e.id, domain, pddl::to_pddl(e.problem), std::nullopt,
                            "", std::nullopt});
          }
        }
        py::list out;
        for (const auto &r : recs) {
          out.append(record_dict(r));
        }
        return out;
      },
      py::arg("domain"), py::arg("count"), py::arg("seed") = 0,
      py::arg("blocks") = py::none(), py::arg("label") = false,
      py::arg("oracle_budget") = 0);

  m.def(
      "validate",
      [](const std::string &domain, const std::string &problem,
         const std::vector<std::string> &plan) {
        auto p = parse(domain, problem);
        auto c = world::validate(p.task, world::plan_from_strings(p.task, plan));
        py::list states;
        for (const auto &s : c.states) {
          py::list atoms;
          for (auto a : s.atoms()) {
            atoms.append(p.task.atom_name(a));
          }
          states.append(atoms);
        }
        py::dict d;
        d["valid"] = c.valid;
        d["goal_reached"] = c.goal_reached;
        d["failed_at"] = c.failed_at;
        d["states"] = states;
        d["verdict"] = world::verdict(p.task, c);
        return d;
      },
      py::arg("domain"), py::arg("problem"), py::arg("plan"));

  m.def(
      "solve",
      [](const std::string &domain, const std::string &problem, bool optimal,
         std::size_t budget) -> std::optional<std::vector<std::string>> {
        auto p = parse(domain, problem);
        std::optional<world::Plan> plan;
        if (optimal) {
          plan = domains::bfs_oracle(p.task, budget);
        } else {
          domains::SolveOptions so;
          so.node_budget = budget;
          plan = domains::baseline_solve(p.kind, p.problem, p.task, so);
        }
        if (!plan) {
          return std::nullopt;
        }
        return world::plan_to_strings(p.task, *plan);
      },
      py::arg("domain"), py::arg("problem"), py::arg("optimal") = false,
      py::arg("budget") = 1000000);

  m.def(
      "harvest",
      [](const std::string &domain, const std::string &problem,
         const std::vector<std::vector<std::string>> &candidates)
          -> std::optional<std::vector<std::string>> {
        auto p = parse(domain, problem);
        std::vector<world::Plan> plans;
        for (const auto &c : candidates) {
          plans.push_back(world::plan_from_strings(p.task, c));
        }
        auto valid = harvest::compile_and_filter(p.task, plans);
        auto path = harvest::shortest_plan(harvest::build_graph(p.task, valid));
        if (!path) {
          return std::nullopt;
        }
        return world::plan_to_strings(p.task, {*path, ""});
      },
      py::arg("domain"), py::arg("problem"), py::arg("candidates"),
      "Shortest plan in the state graph of the valid candidates.");

  m.def(
      "pretrain",
      [](const std::filesystem::path &train, const std::filesystem::path &valid,
         const std::filesystem::path &out, int layers, int embed, int context,
         double lr, std::size_t epochs, std::uint64_t seed) {
        auto tr = read_jsonl(train);
        std::vector<DatasetRecord> va;
        if (!valid.empty()) {
          va = read_jsonl(valid);
        }
        if (tr.empty()) {
          throw UsageError("empty training set");
        }
        std::map<std::string, int> limits;
        for (const auto *set : {&tr, &va}) {
          for (const auto &r : *set) {
            std::map<std::string, int> count;
            for (const auto &o : domains::problem_of(r).objects) {
              ++count[o.type];
            }
            for (const auto &[t, n] : count) {
              limits[t] = std::max(limits[t], n);
            }
          }
        }
        auto kind = domains::domain_from_string(tr[0].domain);
        auto vocab = tokenizer::build_vocab(domains::domain_def(kind), limits);
        policy::ModelConfig mc;
        mc.layers = layers;
        mc.embed = embed;
        mc.ff = 4 * embed;
        mc.context = context;
        policy::TrainConfig tc;
        tc.lr = lr;
        tc.epochs = epochs;
        py::gil_scoped_release release;
        auto r = loop::pretrain(tr, va, vocab, mc, tc, seed);
        policy::save_checkpoint(out, r.checkpoint);
        return r.train.valid_losses.empty() ? r.train.log.back().loss
                                            : r.train.best_valid_loss;
      },
      py::arg("train"), py::arg("valid"), py::arg("out"), py::arg("layers") = 2,
      py::arg("embed") = 64, py::arg("context") = 256, py::arg("lr") = 1e-3,
      py::arg("epochs") = 20, py::arg("seed") = 0);

  m.def(
      "improve",
      [](const std::filesystem::path &run, const std::filesystem::path &pool,
         const std::filesystem::path &checkpoint, std::size_t iterations,
         std::size_t m_, std::size_t n, double temperature, double finetune_lr,
         std::size_t finetune_epochs, std::uint64_t seed,
         std::optional<std::size_t> stop_after) {
        auto recs = read_jsonl(pool);
        auto pi0 = policy::load_checkpoint(checkpoint);
        auto cfg = loop::LoopConfig::for_pretrain(policy::TrainConfig{});
        cfg.finetune.lr = finetune_lr;
        cfg.finetune.epochs = finetune_epochs;
        cfg.n_loop = iterations;
        cfg.m = m_;
        cfg.n = n;
        cfg.sampler.temperature = temperature;
        cfg.seed = seed;
        cfg.dir = run;
        if (recs.empty()) {
          throw UsageError("empty pool");
        }
        py::gil_scoped_release release;
        auto r = loop::run(cfg, domains::domain_from_string(recs[0].domain), recs,
                           pi0, stop_after);
        return r.reports.size();
      },
      py::arg("run"), py::arg("pool"), py::arg("checkpoint"),
      py::arg("iterations") = 15, py::arg("m") = 200, py::arg("n") = 32,
      py::arg("temperature") = 1.0, py::arg("finetune_lr") = 1e-4,
      py::arg("finetune_epochs") = 30, py::arg("seed") = 0,
      py::arg("stop_after") = py::none());

  m.def(
      "evaluate",
      [](const std::filesystem::path &checkpoint, const std::filesystem::path &test,
         std::size_t n, bool bfs, double temperature, bool greedy,
         std::uint64_t seed) {
        auto ck = policy::load_checkpoint(checkpoint);
        auto recs = read_jsonl(test);
        policy::SamplerConfig sc;
        sc.temperature = temperature;
        sc.greedy = greedy;
        sc.seed = seed;
        std::vector<loop::EvalRecord> out;
        {
          py::gil_scoped_release release;
          auto kind = recs.empty() ? domains::DomainKind::blocksworld
                                   : domains::domain_from_string(recs[0].domain);
          out = loop::evaluate(ck, kind, recs, n, bfs, sc);
        }
        py::list l;
        for (const auto &r : out) {
          l.append(eval_dict(r));
        }
        return l;
      },
      py::arg("checkpoint"), py::arg("test"), py::arg("n"), py::arg("bfs") = false,
      py::arg("temperature") = 1.0, py::arg("greedy") = false, py::arg("seed") = 0);

  m.def("regret", &bench::regret, py::arg("cost"), py::arg("cost_opt"));
  m.def("normalized_length", &bench::normalized_length, py::arg("cost"),
        py::arg("cost_opt"));
  m.def(
      "wilcoxon",
      [](const std::vector<double> &a, const std::vector<double> &b) {
        return stat_dict(bench::wilcoxon_signed_rank(a, b));
      },
      py::arg("a"), py::arg("b"));
  m.def(
      "mcnemar",
      [](const std::vector<bool> &a, const std::vector<bool> &b, bool chi_square) {
        return stat_dict(bench::mcnemar(a, b, chi_square));
      },
      py::arg("a"), py::arg("b"), py::arg("chi_square") = false);
}
