#include "plangen/loop.hpp"

#include <chrono>
#include <cstdio>
#include <iostream>
#include <json.hpp>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace plangen::loop {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

fs::path iter_dir(const fs::path &dir, std::size_t k) {
  return dir / ("iter-" + std::to_string(k));
}

std::vector<world::Plan> to_plans(const std::vector<policy::Sample> &samples,
                                  const pddl::GroundedTask &task,
                                  const std::string &id) {
  std::vector<world::Plan> out;
  for (const auto &s : samples) {
    if (!s.decoded.ok()) {
      continue;
    }
    if (auto p = tokenizer::resolve(s.decoded.actions, task)) {
      p->problem_id = id;
      out.push_back(std::move(*p));
    }
  }
  return out;
}

json train_json(const policy::TrainConfig &c) {
  return {{"lr", c.lr},
          {"min_lr_ratio", c.min_lr_ratio},
          {"warmup", c.warmup},
          {"epochs", c.epochs},
          {"batch", c.batch},
          {"grad_clip", c.grad_clip},
          {"weight_decay", c.weight_decay},
          {"max_steps", c.max_steps},
          {"mask_problem", c.mask_problem}};
}

json config_json(const LoopConfig &c, std::size_t pool) {
  return {{"n_loop", c.n_loop},
          {"m", c.m},
          {"n", c.n},
          {"temperature", c.sampler.temperature},
          {"greedy", c.sampler.greedy},
          {"max_new_tokens", c.sampler.max_new_tokens},
          {"finetune", train_json(c.finetune)},
          {"seed", c.seed},
          {"pool", pool}};
}

} // namespace

LoopConfig LoopConfig::for_pretrain(const policy::TrainConfig &pretrain) {
  LoopConfig c;
  c.finetune = pretrain;
  c.finetune.lr = pretrain.lr / 10;
  c.finetune.epochs = 30;
  c.finetune.max_steps = 0;
  return c;
}

void LoopConfig::check(std::size_t pool_size) const {
  if (m == 0 || n == 0) {
    throw UsageError("m and n must be positive");
  }
  if (m > pool_size) {
    throw UsageError("m = " + std::to_string(m) + " exceeds the pool of " +
                     std::to_string(pool_size) + " problems");
  }
  if (dir.empty()) {
    throw UsageError("loop needs a run directory");
  }
  sampler.check();
}

std::string IterationReport::to_json() const {
  json log = json::array();
  for (const auto &r : finetune_log) {
    log.push_back({r.step, r.loss, r.lr});
  }
  json j{{"iteration", iteration},
         {"problems_sampled", problems_sampled},
         {"candidates", candidates},
         {"valid_candidates", valid_candidates},
         {"valid_rate", valid_rate},
         {"problems_harvested", problems_harvested},
         {"improved", improved},
         {"mean_harvested_length", mean_harvested_length},
         {"mean_cache_length", mean_cache_length},
         {"finetune_examples", finetune_examples},
         {"finetune_skipped", finetune_skipped},
         {"finetune_log", log},
         {"seconds",
          {{"sample", sample_seconds},
           {"harvest", harvest_seconds},
           {"finetune", finetune_seconds}}}};
  return j.dump(2) + "\n";
}

IterationReport IterationReport::from_json(const std::string &text) {
  auto j = json::parse(text);
  IterationReport r;
  r.iteration = j.at("iteration");
  r.problems_sampled = j.at("problems_sampled");
  r.candidates = j.at("candidates");
  r.valid_candidates = j.at("valid_candidates");
  r.valid_rate = j.at("valid_rate");
  r.problems_harvested = j.at("problems_harvested");
  r.improved = j.at("improved");
  r.mean_harvested_length = j.at("mean_harvested_length");
  r.mean_cache_length = j.at("mean_cache_length");
  r.finetune_examples = j.at("finetune_examples");
  r.finetune_skipped = j.at("finetune_skipped");
  for (const auto &row : j.at("finetune_log")) {
    r.finetune_log.push_back({row.at(0), row.at(1), row.at(2)});
  }
  const auto &s = j.at("seconds");
  r.sample_seconds = s.at("sample");
  r.harvest_seconds = s.at("harvest");
  r.finetune_seconds = s.at("finetune");
  return r;
}

std::vector<policy::Example>
examples_of(const std::vector<DatasetRecord> &records,
            const tokenizer::Vocabulary &vocab) {
  std::vector<policy::Example> out;
  out.reserve(records.size());
  for (const auto &r : records) {
    if (!r.plan) {
      throw UsageError("record " + r.id + " has no plan");
    }
    auto seq = tokenizer::encode_example(domains::problem_of(r), *r.plan, vocab);
    out.push_back({std::move(seq.ids), seq.boundary});
  }
  return out;
}

PretrainResult pretrain(const std::vector<DatasetRecord> &train,
                        const std::vector<DatasetRecord> &valid,
                        const tokenizer::Vocabulary &vocab,
                        const policy::ModelConfig &model,
                        const policy::TrainConfig &schedule,
                        std::uint64_t seed) {
  if (train.empty()) {
    throw UsageError("pretraining dataset is empty");
  }
  auto data = examples_of(train, vocab);
  auto vdata = examples_of(valid, vocab);
  auto start = policy::new_checkpoint(model, vocab, derive_seed(seed, 0, 0));
  policy::TrainConfig tc = schedule;
  tc.seed = derive_seed(seed, 0, 1);
  auto r = policy::train(std::move(start), data, vdata.empty() ? nullptr : &vdata,
                         tc);
  PretrainResult out{r.best ? *r.best : r.last, std::move(r)};
  return out;
}

std::size_t completed_iterations(const fs::path &dir) {
  std::size_t k = 0;
  while (fs::exists(iter_dir(dir, k + 1) / "report.json")) {
    ++k;
  }
  return k;
}

LoopResult run(const LoopConfig &cfg, domains::DomainKind domain,
               const std::vector<DatasetRecord> &pool,
               const policy::Checkpoint &pi0,
               std::optional<std::size_t> max_new) {
  cfg.check(pool.size());
  fs::create_directories(cfg.dir);
  const std::string cfg_text = config_json(cfg, pool.size()).dump(2) + "\n";
  const fs::path cfg_path = cfg.dir / "loop.json";
  if (fs::exists(cfg_path)) {
    if (read_file(cfg_path) != cfg_text) {
      throw UsageError(cfg.dir.string() +
                       " holds a run with a different configuration");
    }
  } else {
    write_file_atomic(cfg_path, cfg_text);
  }

  LoopResult result;
  harvest::SolutionCache cache;
  const std::size_t done = std::min(completed_iterations(cfg.dir), cfg.n_loop);
  if (done == 0) {
    result.model = pi0;
    for (const auto &r : pool) {
      if (r.plan) {
        cache.offer(r.id, *r.plan, 0);
      }
    }
  } else {
    result.model = policy::load_checkpoint(iter_dir(cfg.dir, done) / "checkpoint");
    if (!(result.model.vocab == pi0.vocab)) {
      throw UsageError("resumed checkpoint vocabulary differs from the model's");
    }
    cache = harvest::SolutionCache::load(iter_dir(cfg.dir, done) / "cache.jsonl");
    for (std::size_t k = 1; k <= done; ++k) {
      result.reports.push_back(IterationReport::from_json(
          read_file(iter_dir(cfg.dir, k) / "report.json")));
    }
  }
  if (done == 0) {
    cache.save(cfg.dir / "cache.jsonl");
  }

  std::size_t budget = max_new.value_or(cfg.n_loop);
  for (std::size_t it = done + 1; it <= cfg.n_loop && budget > 0; ++it, --budget) {
    IterationReport rep;
    rep.iteration = static_cast<int>(it);
    const fs::path idir = iter_dir(cfg.dir, it);
    fs::create_directories(idir);

    // Uniform subset without replacement.
    std::vector<std::size_t> order(pool.size());
    std::iota(order.begin(), order.end(), 0);
    Rng pick(derive_seed(cfg.seed, it, 0));
    for (std::size_t i = 0; i < cfg.m; ++i) {
      std::size_t j = i + pick.below(pool.size() - i);
      std::swap(order[i], order[j]);
    }
    order.resize(cfg.m);
    rep.problems_sampled = cfg.m;

    auto t0 = std::chrono::steady_clock::now();
    std::vector<pddl::ProblemDef> problems;
    std::vector<pddl::GroundedTask> tasks;
    problems.reserve(cfg.m);
    tasks.reserve(cfg.m);
    std::vector<harvest::ProblemCandidates> pcs;
    policy::SamplerConfig sc = cfg.sampler;
    sc.seed = derive_seed(cfg.seed, it, 1);
    for (std::size_t idx : order) {
      problems.push_back(domains::problem_of(pool[idx]));
      tasks.push_back(domains::ground(domain, problems.back()));
      auto prompt = tokenizer::encode_problem(problems.back(), result.model.vocab);
      auto samples = policy::sample(result.model.model, result.model.vocab,
                                    prompt.ids, cfg.n, sc, idx);
      pcs.push_back({pool[idx].id, &problems.back(), &tasks.back(),
                     to_plans(samples, tasks.back(), pool[idx].id)});
    }
    rep.sample_seconds = seconds_since(t0);

    t0 = std::chrono::steady_clock::now();
    auto h = harvest::harvest(domain, pcs, cache, static_cast<int>(it));
    rep.candidates = cfg.m * cfg.n;
    rep.valid_candidates = h.valid_candidates;
    rep.valid_rate = static_cast<double>(h.valid_candidates) /
                     static_cast<double>(rep.candidates);
    rep.problems_harvested = h.problems_harvested;
    rep.improved = h.improved;
    rep.mean_harvested_length = h.mean_harvested_length;
    rep.mean_cache_length = cache.mean_length();
    rep.finetune_examples = h.dataset.size();
    write_jsonl(idir / "finetune.jsonl", h.dataset);
    rep.harvest_seconds = seconds_since(t0);

    t0 = std::chrono::steady_clock::now();
    if (h.dataset.empty()) {
      std::cerr << "warning: iteration " << it
                << " harvested no plans; finetuning skipped\n";
      rep.finetune_skipped = true;
    } else {
      policy::TrainConfig ft = cfg.finetune;
      ft.seed = derive_seed(cfg.seed, it, 2);
      auto data = examples_of(h.dataset, result.model.vocab);
      auto tr = policy::train(std::move(result.model), data, nullptr, ft);
      result.model = std::move(tr.last);
      rep.finetune_log = std::move(tr.log);
    }
    rep.finetune_seconds = seconds_since(t0);

    policy::save_checkpoint(idir / "checkpoint", result.model);
    policy::write_log_csv(idir / "finetune-log.csv", rep.finetune_log);
    cache.save(idir / "cache.jsonl");
    cache.save(cfg.dir / "cache.jsonl");
    write_file_atomic(idir / "report.json", rep.to_json());
    result.reports.push_back(std::move(rep));
    ++result.executed;
  }
  return result;
}

void check_disjoint(const std::vector<DatasetRecord> &train,
                    const std::vector<DatasetRecord> &test) {
  std::unordered_set<std::uint64_t> seen;
  for (const auto &r : train) {
    seen.insert(domains::structural_hash(domains::problem_of(r)));
  }
  for (const auto &r : test) {
    if (seen.count(domains::structural_hash(domains::problem_of(r)))) {
      throw OverlapError("test problem " + r.id +
                         " also occurs in the training data");
    }
  }
}

std::vector<EvalRecord> evaluate(const policy::Checkpoint &model,
                                 domains::DomainKind domain,
                                 const std::vector<DatasetRecord> &test,
                                 std::size_t n, bool with_bfs,
                                 const policy::SamplerConfig &sampler) {
  std::vector<EvalRecord> out;
  out.reserve(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto &rec = test[i];
    EvalRecord e;
    e.id = rec.id;
    e.optimal_length = rec.optimal_length;
    auto prob = domains::problem_of(rec);
    auto task = domains::ground(domain, prob);
    auto t0 = std::chrono::steady_clock::now();
    auto prompt = tokenizer::encode_problem(prob, model.vocab);
    auto samples =
        policy::sample(model.model, model.vocab, prompt.ids, n, sampler, i);
    auto valid =
        harvest::compile_and_filter(task, to_plans(samples, task, rec.id));
    e.valid_candidates = valid.size();
    if (!valid.empty()) {
      e.completed = true;
      std::size_t best = valid[0].actions.size();
      for (const auto &c : valid) {
        best = std::min(best, c.actions.size());
      }
      e.length = best;
      if (with_bfs) {
        auto path = harvest::shortest_plan(harvest::build_graph(task, valid));
        e.bfs_length = path->size();
      }
    }
    e.latency = seconds_since(t0);
    out.push_back(std::move(e));
  }
  return out;
}

namespace {

std::string opt_str(const std::optional<std::size_t> &v) {
  return v ? std::to_string(*v) : "";
}

} // namespace

std::string eval_csv(const std::vector<EvalRecord> &records) {
  std::string out =
      "id,completed,length,bfs_length,optimal_length,valid_candidates\n";
  for (const auto &r : records) {
    out += r.id + "," + (r.completed ? "1" : "0") + "," + opt_str(r.length) +
           "," + opt_str(r.bfs_length) + "," +
           (r.optimal_length ? std::to_string(*r.optimal_length) : "") + "," +
           std::to_string(r.valid_candidates) + "\n";
  }
  return out;
}

std::vector<EvalRecord> parse_eval_csv(const std::string &text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) ||
      line != "id,completed,length,bfs_length,optimal_length,valid_candidates") {
    throw Error("unexpected evaluation CSV header");
  }
  std::vector<EvalRecord> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) {
      continue;
    }
    std::vector<std::string> f;
    std::size_t pos = 0;
    for (;;) {
      auto c = line.find(',', pos);
      f.push_back(line.substr(pos, c - pos));
      if (c == std::string::npos) {
        break;
      }
      pos = c + 1;
    }
    if (f.size() != 6) {
      throw Error("evaluation CSV line " + std::to_string(line_no) +
                  ": expected 6 fields");
    }
    EvalRecord r;
    r.id = f[0];
    r.completed = f[1] == "1";
    if (!f[2].empty()) {
      r.length = std::stoul(f[2]);
    }
    if (!f[3].empty()) {
      r.bfs_length = std::stoul(f[3]);
    }
    if (!f[4].empty()) {
      r.optimal_length = std::stoi(f[4]);
    }
    r.valid_candidates = std::stoul(f[5]);
    out.push_back(std::move(r));
  }
  return out;
}

std::string latency_csv(const std::vector<EvalRecord> &records) {
  std::string out = "id,latency\n";
  char buf[64];
  for (const auto &r : records) {
    std::snprintf(buf, sizeof buf, "%.6f", r.latency);
    out += r.id + "," + buf + "\n";
  }
  return out;
}

} // namespace plangen::loop
