#include "plangen/dataset.hpp"
#include "plangen/policy.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <numeric>

namespace plangen::policy {

using nlohmann::json;

Checkpoint new_checkpoint(const ModelConfig &config,
                          const tokenizer::Vocabulary &vocab,
                          std::uint64_t seed) {
  ModelConfig c = config;
  c.vocab = static_cast<int>(vocab.size());
  Checkpoint ckpt{Model<float>(c), vocab, {}, {}, 0};
  ckpt.model.init(seed);
  ckpt.adam_m.assign(ckpt.model.params().size(), 0.0f);
  ckpt.adam_v.assign(ckpt.model.params().size(), 0.0f);
  return ckpt;
}

namespace {

constexpr char kMagic[8] = {'P', 'L', 'G', 'N', 'C', 'K', 'P', 'T'};

json config_json(const ModelConfig &c) {
  return {{"layers", c.layers}, {"heads", c.heads},     {"embed", c.embed},
          {"ff", c.ff},         {"context", c.context}, {"dropout", c.dropout},
          {"vocab", c.vocab}};
}

ModelConfig config_from(const json &j) {
  ModelConfig c;
  c.layers = j.at("layers");
  c.heads = j.at("heads");
  c.embed = j.at("embed");
  c.ff = j.at("ff");
  c.context = j.at("context");
  c.dropout = j.at("dropout");
  c.vocab = j.at("vocab");
  return c;
}

void put_floats(std::string &out, std::span<const float> xs) {
  const std::size_t start = out.size();
  out.resize(start + xs.size() * 4);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    auto bits = std::bit_cast<std::uint32_t>(xs[i]);
    for (int b = 0; b < 4; ++b) {
      out[start + i * 4 + static_cast<std::size_t>(b)] =
          static_cast<char>((bits >> (8 * b)) & 0xffu);
    }
  }
}

void get_floats(const std::string &in, std::size_t &pos, std::span<float> xs) {
  if (pos + xs.size() * 4 > in.size()) {
    throw Error("checkpoint is truncated");
  }
  for (std::size_t i = 0; i < xs.size(); ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) {
      bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(
                  in[pos + i * 4 + static_cast<std::size_t>(b)]))
              << (8 * b);
    }
    xs[i] = std::bit_cast<float>(bits);
  }
  pos += xs.size() * 4;
}

} // namespace

void save_checkpoint(const std::filesystem::path &path, const Checkpoint &c) {
  json header;
  header["config"] = config_json(c.model.config());
  header["vocabulary"] = json::parse(c.vocab.to_json());
  header["vocabulary-hash"] = c.vocab.hash();
  header["step"] = c.step;
  header["dtype"] = "f32le";
  json tensors = json::array();
  for (const auto &t : c.model.tensors()) {
    tensors.push_back({{"name", t.name}, {"shape", t.shape},
                       {"offset", t.offset}});
  }
  header["tensors"] = tensors;
  header["sections"] = {"params", "adam_m", "adam_v"};
  const std::string h = header.dump();
  std::string out(kMagic, sizeof kMagic);
  std::uint64_t n = h.size();
  for (int b = 0; b < 8; ++b) {
    out.push_back(static_cast<char>((n >> (8 * b)) & 0xffu));
  }
  out += h;
  put_floats(out, c.model.params());
  put_floats(out, c.adam_m);
  put_floats(out, c.adam_v);
  write_file_atomic(path, out);
}

Checkpoint load_checkpoint(const std::filesystem::path &path) {
  const std::string in = read_file(path);
  if (in.size() < 16 || std::memcmp(in.data(), kMagic, sizeof kMagic) != 0) {
    throw Error(path.string() + ": not a checkpoint file");
  }
  std::uint64_t n = 0;
  for (int b = 0; b < 8; ++b) {
    n |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[8 + b]))
         << (8 * b);
  }
  if (16 + n > in.size()) {
    throw Error(path.string() + ": truncated header");
  }
  json header;
  try {
    header = json::parse(in.substr(16, n));
  } catch (const json::exception &e) {
    throw Error(path.string() + ": bad header: " + e.what());
  }
  Checkpoint c;
  c.vocab = tokenizer::Vocabulary::from_json(header.at("vocabulary").dump());
  if (c.vocab.hash() != header.at("vocabulary-hash").get<std::uint64_t>()) {
    throw Error(path.string() + ": vocabulary hash mismatch");
  }
  c.model = Model<float>(config_from(header.at("config")));
  c.step = header.at("step");
  const auto &ts = header.at("tensors");
  const auto &expect = c.model.tensors();
  if (ts.size() != expect.size()) {
    throw Error(path.string() + ": tensor manifest mismatch");
  }
  for (std::size_t i = 0; i < expect.size(); ++i) {
    if (ts[i].at("name") != expect[i].name ||
        ts[i].at("shape").get<std::vector<std::size_t>>() != expect[i].shape) {
      throw Error(path.string() + ": tensor manifest mismatch at " +
                  expect[i].name);
    }
  }
  std::size_t pos = 16 + n;
  get_floats(in, pos, c.model.params());
  c.adam_m.assign(c.model.params().size(), 0.0f);
  c.adam_v.assign(c.model.params().size(), 0.0f);
  get_floats(in, pos, c.adam_m);
  get_floats(in, pos, c.adam_v);
  if (pos != in.size()) {
    throw Error(path.string() + ": trailing bytes");
  }
  return c;
}

double learning_rate(const TrainConfig &c, std::size_t local_step,
                     std::size_t total_steps) {
  if (c.warmup > 0 && local_step < c.warmup) {
    return c.lr * static_cast<double>(local_step + 1) /
           static_cast<double>(c.warmup);
  }
  const double min_lr = c.lr * c.min_lr_ratio;
  if (total_steps <= c.warmup) {
    return c.lr;
  }
  double progress = static_cast<double>(local_step - c.warmup) /
                    static_cast<double>(total_steps - c.warmup);
  progress = std::min(1.0, std::max(0.0, progress));
  return min_lr + 0.5 * (c.lr - min_lr) * (1.0 + std::cos(M_PI * progress));
}

double evaluate_loss(const Model<float> &model,
                     const std::vector<Example> &data, bool mask_problem) {
  double sum = 0;
  std::size_t count = 0;
  for (const auto &ex : data) {
    auto l = model.loss(ex.ids, mask_problem ? ex.boundary : 1);
    sum += l.sum;
    count += l.count;
  }
  return count ? sum / static_cast<double>(count) : 0.0;
}

TrainResult train(Checkpoint start, const std::vector<Example> &data,
                  const std::vector<Example> *valid,
                  const TrainConfig &config) {
  if (data.empty()) {
    throw UsageError("training set is empty");
  }
  if (config.batch == 0) {
    throw UsageError("batch size must be positive");
  }
  TrainResult result;
  result.last = std::move(start);
  Checkpoint &ck = result.last;
  auto &model = ck.model;
  const std::size_t np = model.params().size();
  if (ck.adam_m.size() != np) {
    ck.adam_m.assign(np, 0.0f);
    ck.adam_v.assign(np, 0.0f);
  }
  std::vector<char> decay(np, 0);
  for (const auto &t : model.tensors()) {
    std::fill(decay.begin() + static_cast<std::ptrdiff_t>(t.offset),
              decay.begin() + static_cast<std::ptrdiff_t>(t.offset + t.size),
              t.decay ? 1 : 0);
  }
  const std::size_t batches = (data.size() + config.batch - 1) / config.batch;
  std::size_t total = batches * config.epochs;
  if (config.max_steps > 0) {
    total = std::min(total, config.max_steps);
  }
  std::vector<float> grad(np);
  std::vector<std::size_t> order(data.size());
  std::size_t local = 0;
  if (valid && !valid->empty()) {
    result.best_valid_loss = std::numeric_limits<double>::infinity();
  }
  for (std::size_t epoch = 0; epoch < config.epochs && local < total;
       ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(derive_seed(config.seed, 1, epoch));
    shuffle_rng.shuffle(order);
    for (std::size_t b = 0; b < batches && local < total; ++b) {
      std::fill(grad.begin(), grad.end(), 0.0f);
      const std::size_t lo = b * config.batch;
      const std::size_t hi = std::min(data.size(), lo + config.batch);
      std::size_t targets = 0;
      for (std::size_t i = lo; i < hi; ++i) {
        const auto &ex = data[order[i]];
        const std::size_t first = config.mask_problem ? ex.boundary : 1;
        targets += ex.ids.size() - std::max<std::size_t>(first, 1);
      }
      if (targets == 0) {
        throw UsageError("batch has no target tokens");
      }
      const float scale = 1.0f / static_cast<float>(targets);
      double loss_sum = 0;
      for (std::size_t i = lo; i < hi; ++i) {
        const auto &ex = data[order[i]];
        Rng drop(derive_seed(config.seed, 2, ck.step, i - lo));
        auto l = model.loss(ex.ids, config.mask_problem ? ex.boundary : 1,
                            grad, scale, &drop);
        loss_sum += l.sum;
      }
      const double loss = loss_sum / static_cast<double>(targets);
      if (!std::isfinite(loss)) {
        throw DivergenceError("training loss became non-finite at step " +
                              std::to_string(ck.step));
      }
      double norm2 = 0;
      for (float g : grad) {
        norm2 += static_cast<double>(g) * g;
      }
      const double norm = std::sqrt(norm2);
      if (!std::isfinite(norm)) {
        throw DivergenceError("gradient became non-finite at step " +
                              std::to_string(ck.step));
      }
      const double clip = config.grad_clip > 0 && norm > config.grad_clip
                              ? config.grad_clip / norm
                              : 1.0;
      const double lr = learning_rate(config, local, total);
      ck.step += 1;
      const double bc1 =
          1.0 - std::pow(config.beta1, static_cast<double>(ck.step));
      const double bc2 =
          1.0 - std::pow(config.beta2, static_cast<double>(ck.step));
      auto params = model.params();
      if (lr != 0.0) {
        const auto b1 = static_cast<float>(config.beta1);
        const auto b2 = static_cast<float>(config.beta2);
        for (std::size_t k = 0; k < np; ++k) {
          const float g = static_cast<float>(grad[k] * clip);
          float &m = ck.adam_m[k];
          float &v = ck.adam_v[k];
          m = b1 * m + (1.0f - b1) * g;
          v = b2 * v + (1.0f - b2) * g * g;
          const double mhat = m / bc1;
          const double vhat = v / bc2;
          double update = mhat / (std::sqrt(vhat) + config.eps);
          if (decay[k]) {
            update += config.weight_decay * params[k];
          }
          params[k] = static_cast<float>(params[k] - lr * update);
        }
      }
      result.log.push_back({ck.step, loss, lr});
      ++local;
    }
    if (valid && !valid->empty()) {
      double vl = evaluate_loss(model, *valid, config.mask_problem);
      result.valid_losses.push_back(vl);
      if (vl < result.best_valid_loss) {
        result.best_valid_loss = vl;
        result.best = ck;
      }
    }
  }
  return result;
}

void write_log_csv(const std::filesystem::path &path,
                   const std::vector<LogRow> &log) {
  std::string out = "step,loss,lr\n";
  char buf[96];
  for (const auto &r : log) {
    std::snprintf(buf, sizeof buf, "%llu,%.9g,%.9g\n",
                  static_cast<unsigned long long>(r.step), r.loss, r.lr);
    out += buf;
  }
  write_file_atomic(path, out);
}

} // namespace plangen::policy
