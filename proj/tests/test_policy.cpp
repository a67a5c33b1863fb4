#include "plangen/domains.hpp"
#include "plangen/policy.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>

using namespace plangen;
using namespace plangen::policy;

namespace {

ModelConfig tiny(int vocab) {
  ModelConfig c;
  c.layers = 2;
  c.heads = 2;
  c.embed = 8;
  c.ff = 16;
  c.context = 24;
  c.dropout = 0.0;
  c.vocab = vocab;
  return c;
}

std::vector<TokenId> random_ids(std::size_t n, int vocab, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<TokenId> ids(n);
  for (auto &t : ids) {
    t = static_cast<TokenId>(rng.below(static_cast<std::uint64_t>(vocab)));
  }
  return ids;
}

tokenizer::Vocabulary bw_vocab(int blocks) {
  return tokenizer::build_vocab(
      domains::domain_def(domains::DomainKind::blocksworld),
      {{"block", blocks}});
}

} // namespace

TEST_CASE("manifest covers the parameter buffer") {
  Model<float> m(tiny(11));
  std::size_t total = 0;
  for (const auto &t : m.tensors()) {
    CHECK(t.offset == total);
    total += t.size;
  }
  CHECK(total == m.params().size());
  CHECK(m.tensors().size() == 2 + 12 * 2 + 4);
}

TEST_CASE("gradient matches central differences in double precision") {
  auto cfg = tiny(11);
  Model<double> m(cfg);
  m.init(3);
  // Larger weights than the default init so that every path matters.
  Rng jitter(4);
  for (auto &p : m.params()) {
    p += (jitter.uniform() - 0.5) * 0.6;
  }
  auto ids = random_ids(12, cfg.vocab, 5);
  const std::size_t first = 4;
  std::vector<double> grad(m.params().size(), 0.0);
  m.loss(ids, first, grad);

  Rng pick(6);
  std::size_t checked = 0;
  double worst = 0;
  for (const auto &t : m.tensors()) {
    int got = 0;
    for (int attempt = 0; attempt < 200 && got < 3; ++attempt) {
      std::size_t k = t.offset + pick.below(t.size);
      if (std::abs(grad[k]) < 1e-7) {
        continue;
      }
      const double h = 1e-6;
      const double saved = m.params()[k];
      m.params()[k] = saved + h;
      double up = m.loss(ids, first).sum;
      m.params()[k] = saved - h;
      double down = m.loss(ids, first).sum;
      m.params()[k] = saved;
      double numeric = (up - down) / (2 * h);
      double rel = std::abs(numeric - grad[k]) /
                   std::max(std::abs(numeric), std::abs(grad[k]));
      worst = std::max(worst, rel);
      CHECK_MESSAGE(rel < 1e-5, t.name << "[" << k - t.offset << "]");
      ++got;
      ++checked;
    }
    CHECK_MESSAGE(got > 0, "no nonzero gradient found in " << t.name);
  }
  CHECK(checked >= 20);
  MESSAGE("worst relative error " << worst);
}

TEST_CASE("causality: suffix perturbation leaves prefix logits unchanged") {
  auto cfg = tiny(11);
  Model<float> m(cfg);
  m.init(1);
  auto ids = random_ids(16, cfg.vocab, 2);
  auto base = m.forward(ids);
  const auto V = static_cast<std::size_t>(cfg.vocab);
  for (std::size_t t = 0; t < ids.size(); ++t) {
    auto changed = ids;
    changed[t] = (changed[t] + 1) % static_cast<TokenId>(cfg.vocab);
    auto out = m.forward(changed);
    for (std::size_t i = 0; i < t * V; ++i) {
      REQUIRE(out[i] == base[i]);
    }
    bool differs = false;
    for (std::size_t i = t * V; i < out.size(); ++i) {
      differs = differs || out[i] != base[i];
    }
    CHECK(differs);
  }
}

TEST_CASE("zero weights except the output bias") {
  auto cfg = tiny(7);
  Model<float> m(cfg);
  auto b = m.tensor("head.b");
  for (std::size_t i = 0; i < b.size(); ++i) {
    b[i] = static_cast<float>(i) * 0.5f - 1.0f;
  }
  auto logits = m.forward(random_ids(5, cfg.vocab, 1));
  for (std::size_t t = 0; t < 5; ++t) {
    for (std::size_t j = 0; j < 7; ++j) {
      CHECK(logits[t * 7 + j] == b[j]);
    }
  }
  CHECK(m.forward(std::vector<TokenId>{3}).size() == 7);
}

TEST_CASE("loss of uniform and of certain predictions") {
  auto cfg = tiny(9);
  Model<double> m(cfg);
  auto ids = random_ids(10, cfg.vocab, 7);
  CHECK(m.loss(ids, 1).mean() == doctest::Approx(std::log(9.0)).epsilon(1e-12));

  // Constant sequence: a huge bias on that token gives probability ~1.
  std::vector<TokenId> same(10, 4);
  m.tensor("head.b")[4] = 100.0;
  CHECK(m.loss(same, 1).mean() < 1e-30);
  CHECK_THROWS_AS(m.loss(same, 10), UsageError);
}

TEST_CASE("length overflow") {
  Model<float> m(tiny(5));
  CHECK_THROWS_AS(m.forward(random_ids(25, 5, 1)), LengthError);
}

TEST_CASE("kv cache matches full forward") {
  auto cfg = tiny(11);
  Model<float> m(cfg);
  m.init(9);
  auto ids = random_ids(20, cfg.vocab, 3);
  auto full = m.forward(ids);
  auto cache = m.new_cache();
  std::vector<float> step(11);
  for (std::size_t t = 0; t < ids.size(); ++t) {
    m.step(cache, ids[t], step);
    for (std::size_t j = 0; j < 11; ++j) {
      CHECK(step[j] == doctest::Approx(full[t * 11 + j]).epsilon(1e-5));
    }
  }
}

TEST_CASE("softmax and temperature") {
  std::vector<float> logits{1.0f, 3.0f, -2.0f, 0.5f};
  for (double temp : {0.25, 1.0, 2.0, 7.0}) {
    auto p = softmax(logits, temp);
    double sum = 0;
    for (double x : p) {
      sum += x;
    }
    CHECK(std::abs(sum - 1.0) < 1e-9);
    CHECK(std::max_element(p.begin(), p.end()) - p.begin() == 1);
  }
  SamplerConfig bad;
  bad.temperature = 0;
  CHECK_THROWS_AS(bad.check(), UsageError);
}

TEST_CASE("checkpoint round trip is bit-exact") {
  auto v = bw_vocab(4);
  ModelConfig cfg = tiny(0);
  auto ck = new_checkpoint(cfg, v, 12);
  ck.step = 77;
  ck.adam_m[3] = 0.25f;
  ck.adam_v[5] = 1e-9f;
  auto path = std::filesystem::temp_directory_path() / "plangen_test.ckpt";
  save_checkpoint(path, ck);
  auto back = load_checkpoint(path);
  std::filesystem::remove(path);
  CHECK(back.model.config() == ck.model.config());
  CHECK(back.vocab == v);
  CHECK(back.step == 77);
  CHECK(std::equal(back.model.params().begin(), back.model.params().end(),
                   ck.model.params().begin()));
  CHECK(back.adam_m == ck.adam_m);
  CHECK(back.adam_v == ck.adam_v);
  std::vector<TokenId> ids{1, 2, 3, 8, 9};
  CHECK(back.model.forward(ids) == ck.model.forward(ids));
}

namespace {

struct Overfit {
  Checkpoint ckpt;
  Example ex;
  pddl::ProblemDef problem;
  std::vector<std::string> plan;
  std::vector<LogRow> log;
};

Overfit overfit(std::size_t steps) {
  const auto &dom = domains::domain_def(domains::DomainKind::blocksworld);
  auto p = pddl::parse_problem(R"((define (problem s) (:domain blocksworld)
  (:objects block-1 block-2 block-3 - block)
  (:init (ontable block-1) (on block-2 block-1) (on block-3 block-2)
         (clear block-3) (handempty))
  (:goal (and (on block-1 block-3)))))",
                               dom);
  auto task = pddl::ground(dom, p);
  auto plan = domains::baseline_solve(domains::DomainKind::blocksworld, p, task);
  auto lines = world::plan_to_strings(task, *plan);
  auto v = bw_vocab(3);
  auto seq = tokenizer::encode_example(p, lines, v);
  ModelConfig cfg;
  cfg.embed = 32;
  cfg.ff = 64;
  cfg.context = 64;
  cfg.dropout = 0.0;
  auto ck = new_checkpoint(cfg, v, 1);
  TrainConfig tc;
  tc.lr = 3e-3;
  tc.warmup = 20;
  tc.epochs = steps;
  tc.batch = 1;
  tc.weight_decay = 0.0;
  std::vector<Example> data{{seq.ids, seq.boundary}};
  auto r = train(ck, data, nullptr, tc);
  return {r.last, data[0], p, lines, r.log};
}

} // namespace

TEST_CASE("overfitting a single example") {
  auto o = overfit(300);
  CHECK(o.log.size() == 300);
  CHECK(o.log.front().loss > 1.0);
  CHECK(o.log.back().loss < 0.01);
  CHECK(o.log.back().loss < std::log(static_cast<double>(o.ckpt.vocab.size())));

  SamplerConfig sc;
  sc.greedy = true;
  auto prompt = tokenizer::encode_problem(o.problem, o.ckpt.vocab);
  auto a = sample(o.ckpt.model, o.ckpt.vocab, prompt.ids, 2, sc, 0);
  REQUIRE(a[0].decoded.ok());
  std::vector<std::string> got;
  for (const auto &c : a[0].decoded.actions) {
    std::string s = "(" + c.op;
    for (const auto &x : c.args) {
      s += " " + x;
    }
    got.push_back(s + ")");
  }
  CHECK(got == o.plan);
  CHECK(a[0].tokens == a[1].tokens);

  auto u = sample_uncached(o.ckpt.model, o.ckpt.vocab, prompt.ids, 1, sc, 0);
  CHECK(u[0].tokens == a[0].tokens);

  sc.greedy = false;
  sc.temperature = 1.5;
  sc.seed = 4;
  auto cached = sample(o.ckpt.model, o.ckpt.vocab, prompt.ids, 4, sc, 3);
  auto again = sample(o.ckpt.model, o.ckpt.vocab, prompt.ids, 4, sc, 3);
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(cached[k].tokens == again[k].tokens);
  }
  CHECK(sample(o.ckpt.model, o.ckpt.vocab, prompt.ids, 0, sc, 0).empty());
}

TEST_CASE("zero learning rate leaves parameters unchanged") {
  auto v = bw_vocab(3);
  auto ck = new_checkpoint(tiny(0), v, 2);
  TrainConfig tc;
  tc.lr = 0;
  tc.epochs = 3;
  tc.batch = 2;
  std::vector<Example> data{{{1, 2, 3, 4, 5}, 2}, {{1, 3, 3, 6}, 2}};
  auto r = train(ck, data, nullptr, tc);
  CHECK(std::equal(ck.model.params().begin(), ck.model.params().end(),
                   r.last.model.params().begin()));
}

TEST_CASE("training is deterministic and continues the step counter") {
  auto v = bw_vocab(3);
  ModelConfig cfg = tiny(0);
  cfg.dropout = 0.1;
  auto ck = new_checkpoint(cfg, v, 2);
  TrainConfig tc;
  tc.epochs = 2;
  tc.batch = 2;
  tc.warmup = 2;
  tc.seed = 9;
  std::vector<Example> data{{{1, 2, 3, 4, 5}, 2},
                            {{1, 3, 3, 6}, 2},
                            {{1, 8, 9, 6, 6}, 3}};
  std::vector<Example> valid{{{1, 2, 9, 6}, 2}};
  auto a = train(ck, data, &valid, tc);
  auto b = train(ck, data, &valid, tc);
  CHECK(std::equal(a.last.model.params().begin(), a.last.model.params().end(),
                   b.last.model.params().begin()));
  CHECK(a.last.step == 4);
  CHECK(a.valid_losses.size() == 2);
  REQUIRE(a.best);
  TrainConfig fine = tc;
  fine.lr = tc.lr / 10;
  fine.epochs = 1;
  auto c = train(a.last, data, nullptr, fine);
  CHECK(c.last.step == 6);
  CHECK(c.log.front().step == 5);
}

TEST_CASE("learning rate schedule") {
  TrainConfig c;
  c.lr = 1.0;
  c.warmup = 10;
  c.min_lr_ratio = 0.1;
  CHECK(learning_rate(c, 0, 100) == doctest::Approx(0.1));
  CHECK(learning_rate(c, 9, 100) == doctest::Approx(1.0));
  CHECK(learning_rate(c, 10, 100) == doctest::Approx(1.0));
  CHECK(learning_rate(c, 100, 100) == doctest::Approx(0.1));
  CHECK(learning_rate(c, 55, 100) == doctest::Approx(0.55));
}

TEST_CASE("empty dataset is an error") {
  auto ck = new_checkpoint(tiny(0), bw_vocab(3), 0);
  CHECK_THROWS_AS(train(ck, {}, nullptr, {}), UsageError);
}
