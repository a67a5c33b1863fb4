#include "plangen/loop.hpp"

#include <doctest.h>

#include <cmath>

using namespace plangen;
namespace fs = std::filesystem;

namespace {

struct Fixture {
  domains::GeneratorConfig gen;
  std::vector<DatasetRecord> train, valid, test;
  tokenizer::Vocabulary vocab;

  explicit Fixture(std::size_t n_train, int max_blocks = 3) {
    gen.blocks = {3, max_blocks};
    gen.count = n_train + 40;
    gen.seed = 21;
    auto sp = domains::split(domains::generate(gen), 20, 20);
    domains::LabelOptions lo;
    lo.oracle_budget = 100000;
    train = domains::label(sp.train, lo);
    valid = domains::label(sp.valid, lo);
    test = domains::label(sp.test, lo);
    vocab = tokenizer::build_vocab(
        domains::domain_def(domains::DomainKind::blocksworld),
        domains::object_limits(gen));
  }
};

policy::ModelConfig small_model() {
  policy::ModelConfig m;
  m.embed = 32;
  m.ff = 64;
  m.context = 96;
  return m;
}

fs::path fresh_dir(const std::string &name) {
  auto d = fs::temp_directory_path() / name;
  fs::remove_all(d);
  return d;
}

} // namespace

TEST_CASE("pretraining") {
  Fixture f(500, 4);
  policy::TrainConfig tc;
  tc.epochs = 20;
  tc.warmup = 50;
  tc.lr = 3e-3;
  auto r = loop::pretrain(f.train, f.valid, f.vocab, small_model(), tc, 1);
  const double uniform = std::log(static_cast<double>(f.vocab.size()));
  CHECK(r.train.best_valid_loss < 0.5 * uniform);
  CHECK(r.train.valid_losses.size() == 20);
  auto examples = loop::examples_of(f.valid, f.vocab);
  CHECK(policy::evaluate_loss(r.checkpoint.model, examples, true) ==
        doctest::Approx(r.train.best_valid_loss));

  CHECK_THROWS_AS(loop::pretrain({}, f.valid, f.vocab, small_model(), tc, 1),
                  UsageError);

  std::vector<DatasetRecord> few(f.train.begin(), f.train.begin() + 30);
  tc.epochs = 2;
  auto a = loop::pretrain(few, f.valid, f.vocab, small_model(), tc, 4);
  auto b = loop::pretrain(few, f.valid, f.vocab, small_model(), tc, 4);
  CHECK(std::equal(a.checkpoint.model.params().begin(),
                   a.checkpoint.model.params().end(),
                   b.checkpoint.model.params().begin()));
}

namespace {

struct SmallRun {
  Fixture f{80, 3};
  policy::Checkpoint pi0;
  loop::LoopConfig cfg;

  SmallRun() {
    policy::TrainConfig tc;
    tc.epochs = 100;
    tc.lr = 3e-3;
    tc.warmup = 20;
    pi0 = loop::pretrain(f.train, f.valid, f.vocab, small_model(), tc, 2)
              .checkpoint;
    cfg = loop::LoopConfig::for_pretrain(tc);
    cfg.finetune.epochs = 2;
    cfg.n_loop = 2;
    cfg.m = 10;
    cfg.n = 8;
    cfg.sampler.temperature = 1.0;
    cfg.seed = 5;
  }
};

} // namespace

TEST_CASE("loop with zero iterations returns the initial model") {
  SmallRun s;
  s.cfg.n_loop = 0;
  s.cfg.dir = fresh_dir("plangen_loop0");
  auto r = loop::run(s.cfg, domains::DomainKind::blocksworld, s.f.train, s.pi0);
  CHECK(r.reports.empty());
  CHECK(std::equal(r.model.model.params().begin(), r.model.model.params().end(),
                   s.pi0.model.params().begin()));
  fs::remove_all(s.cfg.dir);
}

TEST_CASE("loop iterations, cache monotonicity and resume") {
  SmallRun s;
  const auto full_dir = fresh_dir("plangen_loop_full");
  s.cfg.dir = full_dir;
  auto full = loop::run(s.cfg, domains::DomainKind::blocksworld, s.f.train, s.pi0);
  REQUIRE(full.reports.size() == 2);
  CHECK(full.executed == 2);
  double pre_mean = 0;
  for (const auto &r : s.f.train) {
    pre_mean += static_cast<double>(r.plan->size());
  }
  pre_mean /= static_cast<double>(s.f.train.size());
  CHECK(full.reports[1].mean_cache_length <= full.reports[0].mean_cache_length);
  CHECK(full.reports[0].mean_cache_length <= pre_mean);
  for (const auto &r : full.reports) {
    CHECK(r.problems_harvested <= r.problems_sampled);
    CHECK(r.sample_seconds >= 0);
    CHECK(r.finetune_seconds >= 0);
    CHECK(r.valid_rate > 0);
  }
  auto c1 = harvest::SolutionCache::load(s.cfg.dir / "iter-1" / "cache.jsonl");
  auto c2 = harvest::SolutionCache::load(s.cfg.dir / "iter-2" / "cache.jsonl");
  for (const auto &rec : s.f.train) {
    REQUIRE(c1.find(rec.id));
    CHECK(c1.find(rec.id)->length() <= rec.plan->size());
    CHECK(c2.find(rec.id)->length() <= c1.find(rec.id)->length());
  }
  for (int it = 1; it <= 2; ++it) {
    auto data = read_jsonl(s.cfg.dir / ("iter-" + std::to_string(it)) /
                           "finetune.jsonl");
    CHECK(data.size() == full.reports[static_cast<std::size_t>(it) - 1].finetune_examples);
    for (const auto &rec : data) {
      auto task = domains::ground(domains::DomainKind::blocksworld,
                                  domains::problem_of(rec));
      auto c = world::validate(task, world::plan_from_strings(task, *rec.plan));
      CHECK(c.valid);
      CHECK(c.goal_reached);
    }
  }

  auto split_dir = fresh_dir("plangen_loop_split");
  s.cfg.dir = split_dir;
  auto first = loop::run(s.cfg, domains::DomainKind::blocksworld, s.f.train,
                         s.pi0, 1);
  CHECK(first.executed == 1);
  CHECK(loop::completed_iterations(split_dir) == 1);
  auto rest = loop::run(s.cfg, domains::DomainKind::blocksworld, s.f.train,
                        s.pi0);
  CHECK(rest.executed == 1);
  REQUIRE(rest.reports.size() == 2);
  CHECK(read_file(split_dir / "iter-2" / "checkpoint") ==
        read_file(full_dir / "iter-2" / "checkpoint"));
  CHECK(read_file(split_dir / "cache.jsonl") ==
        read_file(full_dir / "cache.jsonl"));

  auto again = loop::run(s.cfg, domains::DomainKind::blocksworld, s.f.train, s.pi0);
  CHECK(again.executed == 0);

  s.cfg.m = 11;
  CHECK_THROWS_AS(loop::run(s.cfg, domains::DomainKind::blocksworld, s.f.train,
                            s.pi0),
                  UsageError);
  s.cfg.m = 1000;
  CHECK_THROWS_AS(loop::run(s.cfg, domains::DomainKind::blocksworld, s.f.train,
                            s.pi0),
                  UsageError);
  fs::remove_all(split_dir);
  fs::remove_all(full_dir);
}

TEST_CASE("evaluation") {
  SmallRun s;
  policy::SamplerConfig sc;
  sc.seed = 3;
  auto recs = loop::evaluate(s.pi0, domains::DomainKind::blocksworld, s.f.test,
                             4, true, sc);
  REQUIRE(recs.size() == s.f.test.size());
  for (const auto &r : recs) {
    CHECK(r.completed == r.length.has_value());
    CHECK(r.completed == r.bfs_length.has_value());
    if (r.completed) {
      CHECK(*r.bfs_length <= *r.length);
      CHECK(static_cast<int>(*r.bfs_length) >= *r.optimal_length);
    }
    CHECK(r.latency >= 0);
  }
  auto again = loop::evaluate(s.pi0, domains::DomainKind::blocksworld,
                              s.f.test, 4, true, sc);
  CHECK(loop::eval_csv(again) == loop::eval_csv(recs));

  // An untrained model does not solve anything.
  auto blank = policy::new_checkpoint(small_model(), s.f.vocab, 0);
  sc.max_new_tokens = 4;
  auto none = loop::evaluate(blank, domains::DomainKind::blocksworld, s.f.test,
                             1, false, sc);
  for (const auto &r : none) {
    CHECK_FALSE(r.completed);
    CHECK_FALSE(r.length);
  }

  CHECK_NOTHROW(loop::check_disjoint(s.f.train, s.f.test));
  CHECK_THROWS_AS(loop::check_disjoint(s.f.train, {s.f.train[3]}),
                  loop::OverlapError);
}

TEST_CASE("greedy evaluation of an overfit model returns its training plan") {
  Fixture f(1);
  std::vector<DatasetRecord> one{f.train[0]};
  policy::TrainConfig tc;
  tc.lr = 3e-3;
  tc.warmup = 20;
  tc.epochs = 300;
  tc.batch = 1;
  tc.weight_decay = 0;
  auto m = small_model();
  m.dropout = 0;
  auto ck = loop::pretrain(one, {}, f.vocab, m, tc, 9).checkpoint;
  policy::SamplerConfig sc;
  sc.greedy = true;
  auto r = loop::evaluate(ck, domains::DomainKind::blocksworld, one, 1, false, sc);
  REQUIRE(r[0].completed);
  CHECK(*r[0].length == one[0].plan->size());
}

TEST_CASE("iteration report json round trip") {
  loop::IterationReport r;
  r.iteration = 3;
  r.problems_sampled = 10;
  r.valid_rate = 0.25;
  r.finetune_log = {{4, 0.5, 1e-4}};
  r.sample_seconds = 1.5;
  auto back = loop::IterationReport::from_json(r.to_json());
  CHECK(back.to_json() == r.to_json());
  CHECK(back.finetune_log[0].step == 4);
}
