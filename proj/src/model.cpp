#include "plangen/policy.hpp"

#include <algorithm>
#include <cmath>

namespace plangen::policy {

void ModelConfig::check() const {
  if (layers < 1 || heads < 1 || embed < 1 || ff < 1 || context < 1 ||
      vocab < 1) {
    throw UsageError("model dimensions must be positive");
  }
  if (embed % heads != 0) {
    throw UsageError("embed must be divisible by heads");
  }
  if (dropout < 0 || dropout >= 1) {
    throw UsageError("dropout must lie in [0, 1)");
  }
}

std::vector<TensorInfo> manifest(const ModelConfig &c) {
  std::vector<TensorInfo> out;
  std::size_t offset = 0;
  auto add = [&](std::string name, std::vector<std::size_t> shape,
                 bool decay) {
    std::size_t n = 1;
    for (auto d : shape) {
      n *= d;
    }
    out.push_back({std::move(name), std::move(shape), offset, n, decay});
    offset += n;
  };
  const auto V = static_cast<std::size_t>(c.vocab);
  const auto C = static_cast<std::size_t>(c.embed);
  const auto F = static_cast<std::size_t>(c.ff);
  add("wte", {V, C}, true);
  add("wpe", {static_cast<std::size_t>(c.context), C}, true);
  for (int l = 0; l < c.layers; ++l) {
    const std::string p = "h" + std::to_string(l) + ".";
    add(p + "ln1.g", {C}, false);
    add(p + "ln1.b", {C}, false);
    add(p + "attn.qkv.w", {3 * C, C}, true);
    add(p + "attn.qkv.b", {3 * C}, false);
    add(p + "attn.proj.w", {C, C}, true);
    add(p + "attn.proj.b", {C}, false);
    add(p + "ln2.g", {C}, false);
    add(p + "ln2.b", {C}, false);
    add(p + "mlp.fc.w", {F, C}, true);
    add(p + "mlp.fc.b", {F}, false);
    add(p + "mlp.proj.w", {C, F}, true);
    add(p + "mlp.proj.b", {C}, false);
  }
  add("lnf.g", {C}, false);
  add("lnf.b", {C}, false);
  add("head.w", {V, C}, true);
  add("head.b", {V}, false);
  return out;
}

namespace {

constexpr double kLnEps = 1e-5;

template <typename T>
inline T dot(const T *__restrict a, const T *__restrict b, std::size_t n) {
  T acc = 0;
#pragma omp simd reduction(+ : acc)
  for (std::size_t i = 0; i < n; ++i) {
    acc += a[i] * b[i];
  }
  return acc;
}

template <typename T>
inline void axpy(T *__restrict y, T a, const T *__restrict x, std::size_t n) {
#pragma omp simd
  for (std::size_t i = 0; i < n; ++i) {
    y[i] += a * x[i];
  }
}

// out[L x O] = in[L x I] W^T + b, W stored [O x I].
template <typename T>
void matmul(T *out, const T *in, const T *w, const T *b, std::size_t L,
            std::size_t I, std::size_t O) {
  for (std::size_t t = 0; t < L; ++t) {
    const T *x = in + t * I;
    T *y = out + t * O;
    for (std::size_t o = 0; o < O; ++o) {
      y[o] = b[o] + dot(w + o * I, x, I);
    }
  }
}

template <typename T>
void matmul_backward(T *din, T *dw, T *db, const T *dout, const T *in,
                     const T *w, std::size_t L, std::size_t I, std::size_t O) {
  for (std::size_t t = 0; t < L; ++t) {
    const T *dy = dout + t * O;
    const T *x = in + t * I;
    T *dx = din + t * I;
    for (std::size_t o = 0; o < O; ++o) {
      const T g = dy[o];
      if (g == T(0)) {
        continue;
      }
      axpy(dx, g, w + o * I, I);
      axpy(dw + o * I, g, x, I);
      db[o] += g;
    }
  }
}

template <typename T>
void layernorm(T *out, T *mean, T *rstd, const T *in, const T *g, const T *b,
               std::size_t L, std::size_t C) {
  for (std::size_t t = 0; t < L; ++t) {
    const T *x = in + t * C;
    T m = 0;
    for (std::size_t i = 0; i < C; ++i) {
      m += x[i];
    }
    m /= static_cast<T>(C);
    T var = 0;
    for (std::size_t i = 0; i < C; ++i) {
      var += (x[i] - m) * (x[i] - m);
    }
    var /= static_cast<T>(C);
    const T r = T(1) / std::sqrt(var + static_cast<T>(kLnEps));
    T *y = out + t * C;
    for (std::size_t i = 0; i < C; ++i) {
      y[i] = (x[i] - m) * r * g[i] + b[i];
    }
    mean[t] = m;
    rstd[t] = r;
  }
}

template <typename T>
void layernorm_backward(T *din, T *dg, T *db, const T *dout, const T *in,
                        const T *g, const T *mean, const T *rstd,
                        std::size_t L, std::size_t C) {
  for (std::size_t t = 0; t < L; ++t) {
    const T *dy = dout + t * C;
    const T *x = in + t * C;
    T *dx = din + t * C;
    T dnorm_mean = 0;
    T dnorm_xhat_mean = 0;
    for (std::size_t i = 0; i < C; ++i) {
      const T xhat = (x[i] - mean[t]) * rstd[t];
      const T dnorm = dy[i] * g[i];
      dnorm_mean += dnorm;
      dnorm_xhat_mean += dnorm * xhat;
    }
    dnorm_mean /= static_cast<T>(C);
    dnorm_xhat_mean /= static_cast<T>(C);
    for (std::size_t i = 0; i < C; ++i) {
      const T xhat = (x[i] - mean[t]) * rstd[t];
      const T dnorm = dy[i] * g[i];
      db[i] += dy[i];
      dg[i] += xhat * dy[i];
      dx[i] += (dnorm - dnorm_mean - xhat * dnorm_xhat_mean) * rstd[t];
    }
  }
}

template <typename T> inline T gelu(T x) {
  const T s = static_cast<T>(0.7978845608028654); // sqrt(2/pi)
  return T(0.5) * x * (T(1) + std::tanh(s * (x + T(0.044715) * x * x * x)));
}

template <typename T> inline T gelu_grad(T x) {
  const T s = static_cast<T>(0.7978845608028654);
  const T u = s * (x + T(0.044715) * x * x * x);
  const T th = std::tanh(u);
  const T sech2 = T(1) - th * th;
  return T(0.5) * (T(1) + th) +
         T(0.5) * x * sech2 * s * (T(1) + T(3) * T(0.044715) * x * x);
}

// Inverted dropout. mask holds 0 or 1/(1-p).
template <typename T>
void dropout(T *x, T *mask, std::size_t n, double p, Rng *rng) {
  if (!rng || p <= 0) {
    std::fill(mask, mask + n, T(1));
    return;
  }
  const T keep = static_cast<T>(1.0 / (1.0 - p));
  for (std::size_t i = 0; i < n; ++i) {
    mask[i] = rng->uniform() < p ? T(0) : keep;
    x[i] *= mask[i];
  }
}

} // namespace

template <typename T> Model<T>::Model(const ModelConfig &config)
    : config_(config) {
  config_.check();
  tensors_ = manifest(config_);
  params_.assign(tensors_.back().offset + tensors_.back().size, T(0));
  auto off = [&](const std::string &name) {
    for (const auto &t : tensors_) {
      if (t.name == name) {
        return t.offset;
      }
    }
    throw UsageError("no tensor " + name);
  };
  wte_ = off("wte");
  wpe_ = off("wpe");
  for (int l = 0; l < config_.layers; ++l) {
    const std::string p = "h" + std::to_string(l) + ".";
    layers_.push_back({off(p + "ln1.g"), off(p + "ln1.b"),
                       off(p + "attn.qkv.w"), off(p + "attn.qkv.b"),
                       off(p + "attn.proj.w"), off(p + "attn.proj.b"),
                       off(p + "ln2.g"), off(p + "ln2.b"), off(p + "mlp.fc.w"),
                       off(p + "mlp.fc.b"), off(p + "mlp.proj.w"),
                       off(p + "mlp.proj.b")});
  }
  lnf_g_ = off("lnf.g");
  lnf_b_ = off("lnf.b");
  head_w_ = off("head.w");
  head_b_ = off("head.b");
}

template <typename T> void Model<T>::init(std::uint64_t seed) {
  Rng rng(seed);
  auto normal = [&]() {
    // Box-Muller on the portable generator.
    double u1 = rng.uniform();
    double u2 = rng.uniform();
    if (u1 < 1e-300) {
      u1 = 1e-300;
    }
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  };
  const double resid = 0.02 / std::sqrt(2.0 * config_.layers);
  for (const auto &t : tensors_) {
    const bool gain = t.name.ends_with(".g");
    const bool bias = !gain && t.shape.size() == 1;
    const bool residual = t.name.ends_with("attn.proj.w") ||
                          t.name.ends_with("mlp.proj.w");
    for (std::size_t i = 0; i < t.size; ++i) {
      T &p = params_[t.offset + i];
      if (gain) {
        p = T(1);
      } else if (bias) {
        p = T(0);
      } else {
        p = static_cast<T>(normal() * (residual ? resid : 0.02));
      }
    }
  }
}

template <typename T> std::span<T> Model<T>::tensor(std::string_view name) {
  for (const auto &t : tensors_) {
    if (t.name == name) {
      return std::span<T>(params_).subspan(t.offset, t.size);
    }
  }
  throw UsageError("no tensor " + std::string(name));
}

template <typename T>
std::span<const T> Model<T>::tensor(std::string_view name) const {
  return const_cast<Model *>(this)->tensor(name);
}

template <typename T>
std::vector<T> Model<T>::forward(std::span<const TokenId> ids) const {
  if (ids.empty()) {
    return {};
  }
  Trace tr;
  run(ids, 0, nullptr, tr);
  return std::move(tr.logits);
}

template <typename T>
void Model<T>::run(std::span<const TokenId> ids, std::size_t t0, Rng *rng,
                   Trace &tr) const {
  const std::size_t L = ids.size();
  const auto C = static_cast<std::size_t>(config_.embed);
  const auto F = static_cast<std::size_t>(config_.ff);
  const auto V = static_cast<std::size_t>(config_.vocab);
  const auto NH = static_cast<std::size_t>(config_.heads);
  const std::size_t hs = C / NH;
  const std::size_t NL = layers_.size();
  const double p = rng ? config_.dropout : 0.0;
  if (L > static_cast<std::size_t>(config_.context)) {
    throw LengthError("sequence of length " + std::to_string(L) +
                      " exceeds context " + std::to_string(config_.context));
  }
  for (auto id : ids) {
    if (id >= V) {
      throw UsageError("token id out of range");
    }
  }
  const T *P = params_.data();

  auto &acts = tr.acts;
  acts.assign(NL, {});
  auto &x0 = tr.x0;
  auto &x0_mask = tr.x0_mask;
  x0.assign(L * C, T(0));
  x0_mask.assign(L * C, T(1));
  for (std::size_t t = 0; t < L; ++t) {
    const T *e = P + wte_ + ids[t] * C;
    const T *q = P + wpe_ + t * C;
    for (std::size_t i = 0; i < C; ++i) {
      x0[t * C + i] = e[i] + q[i];
    }
  }
  dropout(x0.data(), x0_mask.data(), L * C, p, rng);

  const T scale_att = T(1) / std::sqrt(static_cast<T>(hs));
  auto &x = tr.x;
  x = x0;
  for (std::size_t l = 0; l < NL; ++l) {
    const Layer &ly = layers_[l];
    Acts &a = acts[l];
    a.x_in = x;
    a.ln1.resize(L * C);
    a.ln1_m.resize(L);
    a.ln1_r.resize(L);
    layernorm(a.ln1.data(), a.ln1_m.data(), a.ln1_r.data(), x.data(),
              P + ly.ln1_g, P + ly.ln1_b, L, C);
    a.qkv.resize(L * 3 * C);
    matmul(a.qkv.data(), a.ln1.data(), P + ly.qkv_w, P + ly.qkv_b, L, C,
           3 * C);
    a.att.assign(NH * L * L, T(0));
    a.att_mask.assign(NH * L * L, T(1));
    a.y.assign(L * C, T(0));
    for (std::size_t h = 0; h < NH; ++h) {
      for (std::size_t t = 0; t < L; ++t) {
        const T *q = a.qkv.data() + t * 3 * C + h * hs;
        T *row = a.att.data() + (h * L + t) * L;
        T mx = -std::numeric_limits<T>::infinity();
        for (std::size_t u = 0; u <= t; ++u) {
          const T *k = a.qkv.data() + u * 3 * C + C + h * hs;
          row[u] = dot(q, k, hs) * scale_att;
          mx = std::max(mx, row[u]);
        }
        T sum = 0;
        for (std::size_t u = 0; u <= t; ++u) {
          row[u] = std::exp(row[u] - mx);
          sum += row[u];
        }
        for (std::size_t u = 0; u <= t; ++u) {
          row[u] /= sum;
        }
        T *mrow = a.att_mask.data() + (h * L + t) * L;
        T *yt = a.y.data() + t * C + h * hs;
        for (std::size_t u = 0; u <= t; ++u) {
          T w = row[u];
          if (p > 0) {
            mrow[u] = rng->uniform() < p ? T(0) : static_cast<T>(1 / (1 - p));
            w *= mrow[u];
          }
          axpy(yt, w, a.qkv.data() + u * 3 * C + 2 * C + h * hs, hs);
        }
      }
    }
    a.ap.resize(L * C);
    matmul(a.ap.data(), a.y.data(), P + ly.proj_w, P + ly.proj_b, L, C, C);
    a.ap_mask.resize(L * C);
    dropout(a.ap.data(), a.ap_mask.data(), L * C, p, rng);
    a.x_mid.resize(L * C);
    for (std::size_t i = 0; i < L * C; ++i) {
      a.x_mid[i] = x[i] + a.ap[i];
    }
    a.ln2.resize(L * C);
    a.ln2_m.resize(L);
    a.ln2_r.resize(L);
    layernorm(a.ln2.data(), a.ln2_m.data(), a.ln2_r.data(), a.x_mid.data(),
              P + ly.ln2_g, P + ly.ln2_b, L, C);
    a.fc.resize(L * F);
    matmul(a.fc.data(), a.ln2.data(), P + ly.fc_w, P + ly.fc_b, L, C, F);
    a.fcg.resize(L * F);
    for (std::size_t i = 0; i < L * F; ++i) {
      a.fcg[i] = gelu(a.fc[i]);
    }
    a.fp.resize(L * C);
    matmul(a.fp.data(), a.fcg.data(), P + ly.fcp_w, P + ly.fcp_b, L, F, C);
    a.fp_mask.resize(L * C);
    dropout(a.fp.data(), a.fp_mask.data(), L * C, p, rng);
    for (std::size_t i = 0; i < L * C; ++i) {
      x[i] = a.x_mid[i] + a.fp[i];
    }
  }
  // Only rows t0.. get logits.
  const std::size_t LT = L - t0;
  tr.lnf.assign(L * C, T(0));
  tr.lnf_m.assign(L, T(0));
  tr.lnf_r.assign(L, T(0));
  layernorm(tr.lnf.data(), tr.lnf_m.data(), tr.lnf_r.data(), x.data(),
            P + lnf_g_, P + lnf_b_, L, C);
  tr.logits.assign(LT * V, T(0));
  matmul(tr.logits.data(), tr.lnf.data() + t0 * C, P + head_w_, P + head_b_,
         LT, C, V);
}

template <typename T>
typename Model<T>::Loss
Model<T>::loss(std::span<const TokenId> ids, std::size_t first_target,
               std::span<T> grad, T scale, Rng *rng) const {
  const std::size_t L = ids.size();
  const auto C = static_cast<std::size_t>(config_.embed);
  const auto F = static_cast<std::size_t>(config_.ff);
  const auto V = static_cast<std::size_t>(config_.vocab);
  const auto NH = static_cast<std::size_t>(config_.heads);
  const std::size_t hs = C / NH;
  const std::size_t NL = layers_.size();
  const bool backward = !grad.empty();
  if (first_target == 0) {
    first_target = 1;
  }
  if (first_target >= L) {
    throw UsageError("no target positions in sequence");
  }
  if (backward && grad.size() != params_.size()) {
    throw UsageError("gradient buffer has the wrong size");
  }
  const std::size_t t0 = first_target - 1;
  const std::size_t LT = L - first_target;
  Trace tr;
  run(ids, t0, rng, tr);
  const T *P = params_.data();
  const T scale_att = T(1) / std::sqrt(static_cast<T>(hs));
  const auto &acts = tr.acts;
  const auto &x = tr.x;
  const auto &x0_mask = tr.x0_mask;
  const auto &logits = tr.logits;
  const auto &lnf = tr.lnf;
  const auto &lnf_m = tr.lnf_m;
  const auto &lnf_r = tr.lnf_r;
  Loss result;
  std::vector<T> dlogits(backward ? LT * V : 0);
  for (std::size_t r = 0; r < LT; ++r) {
    const T *lg = logits.data() + r * V;
    const TokenId target = ids[t0 + r + 1];
    T mx = *std::max_element(lg, lg + V);
    double sum = 0;
    for (std::size_t j = 0; j < V; ++j) {
      sum += std::exp(static_cast<double>(lg[j] - mx));
    }
    const double logz = std::log(sum) + static_cast<double>(mx);
    result.sum += logz - static_cast<double>(lg[target]);
    result.count += 1;
    if (backward) {
      T *dl = dlogits.data() + r * V;
      for (std::size_t j = 0; j < V; ++j) {
        dl[j] = static_cast<T>(std::exp(static_cast<double>(lg[j]) - logz)) *
                scale;
      }
      dl[target] -= scale;
    }
  }
  if (!backward) {
    return result;
  }

  T *G = grad.data();
  std::vector<T> dlnf(L * C, T(0));
  matmul_backward(dlnf.data() + t0 * C, G + head_w_, G + head_b_,
                  dlogits.data(), lnf.data() + t0 * C, P + head_w_, LT, C, V);
  std::vector<T> dx(L * C, T(0));
  layernorm_backward(dx.data(), G + lnf_g_, G + lnf_b_, dlnf.data(), x.data(),
                     P + lnf_g_, lnf_m.data(), lnf_r.data(), L, C);

  std::vector<T> dbuf, dfcg, dfc, dln2, dxmid, dy, dqkv, dln1;
  for (std::size_t l = NL; l-- > 0;) {
    const Layer &ly = layers_[l];
    const auto &a = acts[l];
    // x_out = x_mid + drop(fp)
    dbuf.assign(L * C, T(0));
    for (std::size_t i = 0; i < L * C; ++i) {
      dbuf[i] = dx[i] * a.fp_mask[i];
    }
    dfcg.assign(L * F, T(0));
    matmul_backward(dfcg.data(), G + ly.fcp_w, G + ly.fcp_b, dbuf.data(),
                    a.fcg.data(), P + ly.fcp_w, L, F, C);
    dfc.resize(L * F);
    for (std::size_t i = 0; i < L * F; ++i) {
      dfc[i] = dfcg[i] * gelu_grad(a.fc[i]);
    }
    dln2.assign(L * C, T(0));
    matmul_backward(dln2.data(), G + ly.fc_w, G + ly.fc_b, dfc.data(),
                    a.ln2.data(), P + ly.fc_w, L, C, F);
    dxmid = dx;
    layernorm_backward(dxmid.data(), G + ly.ln2_g, G + ly.ln2_b, dln2.data(),
                       a.x_mid.data(), P + ly.ln2_g, a.ln2_m.data(),
                       a.ln2_r.data(), L, C);
    // x_mid = x_in + drop(ap)
    for (std::size_t i = 0; i < L * C; ++i) {
      dbuf[i] = dxmid[i] * a.ap_mask[i];
    }
    dy.assign(L * C, T(0));
    matmul_backward(dy.data(), G + ly.proj_w, G + ly.proj_b, dbuf.data(),
                    a.y.data(), P + ly.proj_w, L, C, C);
    dqkv.assign(L * 3 * C, T(0));
    std::vector<T> dp(L);
    for (std::size_t h = 0; h < NH; ++h) {
      for (std::size_t t = 0; t < L; ++t) {
        const T *row = a.att.data() + (h * L + t) * L;
        const T *mrow = a.att_mask.data() + (h * L + t) * L;
        const T *dyt = dy.data() + t * C + h * hs;
        T weighted = 0;
        for (std::size_t u = 0; u <= t; ++u) {
          const T *v = a.qkv.data() + u * 3 * C + 2 * C + h * hs;
          T *dv = dqkv.data() + u * 3 * C + 2 * C + h * hs;
          axpy(dv, row[u] * mrow[u], dyt, hs);
          dp[u] = dot(dyt, v, hs) * mrow[u];
          weighted += dp[u] * row[u];
        }
        const T *q = a.qkv.data() + t * 3 * C + h * hs;
        T *dq = dqkv.data() + t * 3 * C + h * hs;
        for (std::size_t u = 0; u <= t; ++u) {
          const T ds = row[u] * (dp[u] - weighted) * scale_att;
          const T *k = a.qkv.data() + u * 3 * C + C + h * hs;
          T *dk = dqkv.data() + u * 3 * C + C + h * hs;
          axpy(dq, ds, k, hs);
          axpy(dk, ds, q, hs);
        }
      }
    }
    dln1.assign(L * C, T(0));
    matmul_backward(dln1.data(), G + ly.qkv_w, G + ly.qkv_b, dqkv.data(),
                    a.ln1.data(), P + ly.qkv_w, L, C, 3 * C);
    dx = dxmid;
    layernorm_backward(dx.data(), G + ly.ln1_g, G + ly.ln1_b, dln1.data(),
                       a.x_in.data(), P + ly.ln1_g, a.ln1_m.data(),
                       a.ln1_r.data(), L, C);
  }
  for (std::size_t t = 0; t < L; ++t) {
    T *gte = G + wte_ + ids[t] * C;
    T *gpe = G + wpe_ + t * C;
    for (std::size_t i = 0; i < C; ++i) {
      const T d = dx[t * C + i] * x0_mask[t * C + i];
      gte[i] += d;
      gpe[i] += d;
    }
  }
  return result;
}

template <typename T> typename Model<T>::Cache Model<T>::new_cache() const {
  Cache c;
  const auto n = static_cast<std::size_t>(config_.context) *
                 static_cast<std::size_t>(config_.embed);
  c.k.assign(layers_.size(), std::vector<T>());
  c.v.assign(layers_.size(), std::vector<T>());
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    c.k[l].reserve(n);
    c.v[l].reserve(n);
  }
  return c;
}

template <typename T>
void Model<T>::step(Cache &cache, TokenId token, std::span<T> logits) const {
  const auto C = static_cast<std::size_t>(config_.embed);
  const auto F = static_cast<std::size_t>(config_.ff);
  const auto V = static_cast<std::size_t>(config_.vocab);
  const auto NH = static_cast<std::size_t>(config_.heads);
  const std::size_t hs = C / NH;
  const auto t = static_cast<std::size_t>(cache.pos);
  if (cache.pos >= config_.context) {
    throw LengthError("context of " + std::to_string(config_.context) +
                      " tokens exhausted");
  }
  if (token >= V) {
    throw UsageError("token id out of range");
  }
  if (logits.size() != V) {
    throw UsageError("logits buffer has the wrong size");
  }
  const T *P = params_.data();
  std::vector<T> x(C), ln(C), qkv(3 * C), y(C), tmp(C), fc(F), m(1), r(1);
  for (std::size_t i = 0; i < C; ++i) {
    x[i] = P[wte_ + token * C + i] + P[wpe_ + t * C + i];
  }
  const T scale_att = T(1) / std::sqrt(static_cast<T>(hs));
  std::vector<T> att(t + 1);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer &ly = layers_[l];
    layernorm(ln.data(), m.data(), r.data(), x.data(), P + ly.ln1_g,
              P + ly.ln1_b, 1, C);
    matmul(qkv.data(), ln.data(), P + ly.qkv_w, P + ly.qkv_b, 1, C, 3 * C);
    auto &K = cache.k[l];
    auto &Vc = cache.v[l];
    K.resize((t + 1) * C);
    Vc.resize((t + 1) * C);
    std::copy(qkv.begin() + C, qkv.begin() + 2 * C, K.begin() + t * C);
    std::copy(qkv.begin() + 2 * C, qkv.end(), Vc.begin() + t * C);
    std::fill(y.begin(), y.end(), T(0));
    for (std::size_t h = 0; h < NH; ++h) {
      const T *q = qkv.data() + h * hs;
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t u = 0; u <= t; ++u) {
        att[u] = dot(q, K.data() + u * C + h * hs, hs) * scale_att;
        mx = std::max(mx, att[u]);
      }
      T sum = 0;
      for (std::size_t u = 0; u <= t; ++u) {
        att[u] = std::exp(att[u] - mx);
        sum += att[u];
      }
      for (std::size_t u = 0; u <= t; ++u) {
        att[u] /= sum;
      }
      for (std::size_t u = 0; u <= t; ++u) {
        axpy(y.data() + h * hs, att[u], Vc.data() + u * C + h * hs, hs);
      }
    }
    matmul(tmp.data(), y.data(), P + ly.proj_w, P + ly.proj_b, 1, C, C);
    for (std::size_t i = 0; i < C; ++i) {
      x[i] += tmp[i];
    }
    layernorm(ln.data(), m.data(), r.data(), x.data(), P + ly.ln2_g,
              P + ly.ln2_b, 1, C);
    matmul(fc.data(), ln.data(), P + ly.fc_w, P + ly.fc_b, 1, C, F);
    for (auto &v : fc) {
      v = gelu(v);
    }
    matmul(tmp.data(), fc.data(), P + ly.fcp_w, P + ly.fcp_b, 1, F, C);
    for (std::size_t i = 0; i < C; ++i) {
      x[i] += tmp[i];
    }
  }
  layernorm(ln.data(), m.data(), r.data(), x.data(), P + lnf_g_, P + lnf_b_,
            1, C);
  matmul(logits.data(), ln.data(), P + head_w_, P + head_b_, 1, C, V);
  cache.pos += 1;
}

template class Model<float>;
template class Model<double>;

} // namespace plangen::policy
