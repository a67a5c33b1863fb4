#pragma once

#include "plangen/common.hpp"
#include "plangen/tokenizer.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace plangen::policy {

using tokenizer::TokenId;

struct ModelConfig {
  int layers = 2;
  int heads = 2;
  int embed = 64;
  int ff = 256;
  int context = 512;
  double dropout = 0.1;
  int vocab = 0;

  void check() const;
  bool operator==(const ModelConfig &) const = default;
};

struct TensorInfo {
  std::string name;
  std::vector<std::size_t> shape;
  std::size_t offset = 0;
  std::size_t size = 0;
  /// Receives decoupled weight decay (matrices and embeddings).
  bool decay = false;
};

/// Parameter tensors in storage order. Matrices are stored [out][in].
std::vector<TensorInfo> manifest(const ModelConfig &config);

class LengthError : public Error {
public:
  using Error::Error;
};

/// Decoder-only transformer with pre-norm blocks, GELU, learned absolute
/// positions and an untied output projection with bias. Instantiated for
/// float (training and sampling) and double (gradient checks).
template <typename T> class Model {
public:
  Model() = default;
  explicit Model(const ModelConfig &config);

  /// GPT-2 style initialisation: N(0, 0.02) weights, residual projections
  /// scaled by 1/sqrt(2 * layers), zero biases, unit gains.
  void init(std::uint64_t seed);

  const ModelConfig &config() const { return config_; }
  const std::vector<TensorInfo> &tensors() const { return tensors_; }
  std::span<T> params() { return params_; }
  std::span<const T> params() const { return params_; }
  std::span<T> tensor(std::string_view name);
  std::span<const T> tensor(std::string_view name) const;

  template <typename U> Model<U> cast() const {
    Model<U> out(config_);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      out.params()[i] = static_cast<U>(params_[i]);
    }
    return out;
  }

  /// Logits [L x vocab] for one sequence, inference mode (no dropout).
  std::vector<T> forward(std::span<const TokenId> ids) const;

  struct Loss {
    double sum = 0;
    std::size_t count = 0;
    double mean() const { return count ? sum / static_cast<double>(count) : 0; }
  };

  /// Cross-entropy summed over targets ids[first_target..L-1]. When `grad`
  /// is non-empty, adds scale * d(sum)/d(params) into it. Dropout is active
  /// only when `dropout_rng` is given.
  Loss loss(std::span<const TokenId> ids, std::size_t first_target,
            std::span<T> grad = {}, T scale = T(1),
            Rng *dropout_rng = nullptr) const;

  /// Key/value cache for incremental decoding.
  struct Cache {
    std::vector<std::vector<T>> k, v; // per layer, [context x embed]
    int pos = 0;
  };
  Cache new_cache() const;
  /// Feeds one token at position cache.pos and writes next-token logits.
  void step(Cache &cache, TokenId token, std::span<T> logits) const;

private:
  struct Acts {
    std::vector<T> x_in, ln1, ln1_m, ln1_r, qkv, att, att_mask, y, ap,
        ap_mask, x_mid, ln2, ln2_m, ln2_r, fc, fcg, fp, fp_mask;
  };
  struct Trace {
    std::vector<Acts> acts;
    std::vector<T> x0, x0_mask, x, lnf, lnf_m, lnf_r, logits;
  };
  /// Full-sequence forward pass keeping activations; logits for rows t0..
  void run(std::span<const TokenId> ids, std::size_t t0, Rng *rng,
           Trace &trace) const;

  struct Layer {
    std::size_t ln1_g, ln1_b, qkv_w, qkv_b, proj_w, proj_b, ln2_g, ln2_b,
        fc_w, fc_b, fcp_w, fcp_b;
  };
  ModelConfig config_;
  std::vector<TensorInfo> tensors_;
  std::vector<T> params_;
  std::size_t wte_ = 0, wpe_ = 0, lnf_g_ = 0, lnf_b_ = 0, head_w_ = 0,
              head_b_ = 0;
  std::vector<Layer> layers_;
};

extern template class Model<float>;
extern template class Model<double>;

/// Model parameters plus everything needed to resume training and to
/// interpret token ids.
struct Checkpoint {
  Model<float> model;
  tokenizer::Vocabulary vocab;
  std::vector<float> adam_m;
  std::vector<float> adam_v;
  std::uint64_t step = 0;
};

Checkpoint new_checkpoint(const ModelConfig &config,
                          const tokenizer::Vocabulary &vocab,
                          std::uint64_t seed);

/// Binary container: "PLGNCKPT", u64 header length, JSON header (config,
/// vocabulary, step, tensor manifest), then little-endian f32 parameters
/// followed by the two Adam moment buffers.
void save_checkpoint(const std::filesystem::path &path, const Checkpoint &c);
Checkpoint load_checkpoint(const std::filesystem::path &path);

struct Example {
  std::vector<TokenId> ids;
  std::size_t boundary = 0;
};

struct TrainConfig {
  double lr = 1e-3;
  /// Cosine decay ends at lr * min_lr_ratio.
  double min_lr_ratio = 0.1;
  std::size_t warmup = 100;
  std::size_t epochs = 20;
  std::size_t batch = 8;
  double grad_clip = 1.0;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Stop after this many optimizer steps (0 = run all epochs).
  std::size_t max_steps = 0;
  /// Compute the loss on plan tokens only.
  bool mask_problem = true;
  std::uint64_t seed = 0;
};

struct LogRow {
  std::uint64_t step = 0;
  double loss = 0;
  double lr = 0;
};

struct TrainResult {
  Checkpoint last;
  /// Lowest-validation-loss checkpoint (evaluated after every epoch) when a
  /// validation set was supplied.
  std::optional<Checkpoint> best;
  double best_valid_loss = 0;
  std::vector<double> valid_losses;
  std::vector<LogRow> log;
};

class DivergenceError : public Error {
public:
  using Error::Error;
};

double learning_rate(const TrainConfig &config, std::size_t local_step,
                     std::size_t total_steps);

/// AdamW with linear warmup and cosine decay. Continues the optimizer step
/// counter of `start`; the schedule itself restarts for each call.
TrainResult train(Checkpoint start, const std::vector<Example> &data,
                  const std::vector<Example> *valid,
                  const TrainConfig &config);

/// Mean per-token loss over a dataset in inference mode.
double evaluate_loss(const Model<float> &model,
                     const std::vector<Example> &data, bool mask_problem);

void write_log_csv(const std::filesystem::path &path,
                   const std::vector<LogRow> &log);

struct SamplerConfig {
  double temperature = 1.0;
  /// Argmax decoding (lowest id wins ties) instead of sampling.
  bool greedy = false;
  std::size_t max_new_tokens = 256;
  std::uint64_t seed = 0;

  void check() const;
};

struct Sample {
  std::vector<TokenId> tokens;
  tokenizer::DecodedPlan decoded;
};

/// Draws n continuations of `prompt`. Stream `stream` selects an
/// independent random stream derived from config.seed.
std::vector<Sample> sample(const Model<float> &model,
                           const tokenizer::Vocabulary &vocab,
                           std::span<const TokenId> prompt, std::size_t n,
                           const SamplerConfig &config, std::uint64_t stream);

/// Same as sample() but recomputes the full forward pass for every token.
std::vector<Sample> sample_uncached(const Model<float> &model,
                                    const tokenizer::Vocabulary &vocab,
                                    std::span<const TokenId> prompt,
                                    std::size_t n, const SamplerConfig &config,
                                    std::uint64_t stream);

/// n candidates per problem; problem i uses stream i.
std::vector<std::vector<Sample>>
sample_plans(const Checkpoint &ckpt,
             const std::vector<pddl::ProblemDef> &problems,
             const SamplerConfig &config, std::size_t n);

/// softmax(logits / temperature) in double precision.
std::vector<double> softmax(std::span<const float> logits, double temperature);

} // namespace plangen::policy
