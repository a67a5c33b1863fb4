#include "plangen/policy.hpp"

#include <algorithm>
#include <cmath>

namespace plangen::policy {

void SamplerConfig::check() const {
  if (!greedy && !(temperature > 0)) {
    throw UsageError("temperature must be positive");
  }
}

std::vector<double> softmax(std::span<const float> logits,
                            double temperature) {
  std::vector<double> p(logits.size());
  if (logits.empty()) {
    return p;
  }
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp((logits[i] - mx) / temperature);
    sum += p[i];
  }
  for (auto &x : p) {
    x /= sum;
  }
  return p;
}

namespace {

TokenId choose(std::span<const float> logits, const SamplerConfig &c,
               Rng &rng) {
  if (c.greedy) {
    TokenId best = 0;
    for (TokenId i = 1; i < logits.size(); ++i) {
      if (logits[i] > logits[best]) {
        best = i;
      }
    }
    return best;
  }
  auto p = softmax(logits, c.temperature);
  double u = rng.uniform();
  for (TokenId i = 0; i < p.size(); ++i) {
    if (u < p[i]) {
      return i;
    }
    u -= p[i];
  }
  // Rounding left u above the total mass: take the last nonzero entry.
  for (TokenId i = static_cast<TokenId>(p.size()); i-- > 0;) {
    if (p[i] > 0) {
      return i;
    }
  }
  return 0;
}

std::size_t budget(const Model<float> &model, std::size_t prompt,
                   const SamplerConfig &c) {
  const auto ctx = static_cast<std::size_t>(model.config().context);
  if (prompt == 0) {
    throw UsageError("empty prompt");
  }
  if (prompt > ctx) {
    throw LengthError("prompt of " + std::to_string(prompt) +
                      " tokens exceeds context " + std::to_string(ctx));
  }
  return std::min(c.max_new_tokens, ctx - prompt);
}

} // namespace

std::vector<Sample> sample(const Model<float> &model,
                           const tokenizer::Vocabulary &vocab,
                           std::span<const TokenId> prompt, std::size_t n,
                           const SamplerConfig &c, std::uint64_t stream) {
  c.check();
  std::vector<Sample> out;
  if (n == 0) {
    return out;
  }
  const std::size_t max_new = budget(model, prompt.size(), c);
  const auto V = static_cast<std::size_t>(model.config().vocab);
  auto base = model.new_cache();
  std::vector<float> first(V);
  for (auto t : prompt) {
    model.step(base, t, first);
  }
  std::vector<float> logits(V);
  for (std::size_t k = 0; k < n; ++k) {
    Rng rng(derive_seed(c.seed, stream, k));
    Sample s;
    auto cache = base;
    logits = first;
    for (std::size_t i = 0; i < max_new; ++i) {
      TokenId t = choose(logits, c, rng);
      s.tokens.push_back(t);
      if (t == tokenizer::kEndOfPlan || i + 1 == max_new) {
        break;
      }
      model.step(cache, t, logits);
    }
    s.decoded = tokenizer::decode_plan(s.tokens, vocab);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Sample> sample_uncached(const Model<float> &model,
                                    const tokenizer::Vocabulary &vocab,
                                    std::span<const TokenId> prompt,
                                    std::size_t n, const SamplerConfig &c,
                                    std::uint64_t stream) {
  c.check();
  std::vector<Sample> out;
  const std::size_t max_new = budget(model, prompt.size(), c);
  const auto V = static_cast<std::size_t>(model.config().vocab);
  for (std::size_t k = 0; k < n; ++k) {
    Rng rng(derive_seed(c.seed, stream, k));
    Sample s;
    std::vector<TokenId> seq(prompt.begin(), prompt.end());
    for (std::size_t i = 0; i < max_new; ++i) {
      auto all = model.forward(seq);
      std::span<const float> last(all.data() + (seq.size() - 1) * V, V);
      TokenId t = choose(last, c, rng);
      s.tokens.push_back(t);
      seq.push_back(t);
      if (t == tokenizer::kEndOfPlan) {
        break;
      }
    }
    s.decoded = tokenizer::decode_plan(s.tokens, vocab);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<std::vector<Sample>>
sample_plans(const Checkpoint &ckpt,
             const std::vector<pddl::ProblemDef> &problems,
             const SamplerConfig &config, std::size_t n) {
  std::vector<std::vector<Sample>> out;
  out.reserve(problems.size());
  for (std::size_t i = 0; i < problems.size(); ++i) {
    auto prompt = tokenizer::encode_problem(problems[i], ckpt.vocab);
    out.push_back(sample(ckpt.model, ckpt.vocab, prompt.ids, n, config, i));
  }
  return out;
}

} // namespace plangen::policy
