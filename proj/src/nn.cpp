#include "gtrs/nn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "gtrs/kernels.hpp"

namespace gtrs::nn {

Param& ParamStore::add_weights(const std::string& name, std::size_t rows,
                               std::size_t cols, const Rng& init_rng) {
  if (params_.count(name)) throw std::logic_error("ParamStore: duplicate name " + name);
  const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Param p;
  p.shape = {rows, cols};
  p.values.resize(rows * cols);
  Rng r = init_rng.derive(name);
  for (double& v : p.values) v = r.uniform(-a, a);
  return params_.emplace(name, std::move(p)).first->second;
}

Param& ParamStore::add_bias(const std::string& name, std::size_t n) {
  if (params_.count(name)) throw std::logic_error("ParamStore: duplicate name " + name);
  Param p;
  p.shape = {n};
  p.values.assign(n, 0.0);
  return params_.emplace(name, std::move(p)).first->second;
}

Param& ParamStore::add_raw(const std::string& name, std::vector<std::size_t> shape,
                           Vec values) {
  std::size_t expect = 1;
  for (std::size_t d : shape) expect *= d;
  if (expect != values.size()) {
    throw std::invalid_argument("ParamStore: shape/value size mismatch for " + name);
  }
  Param p;
  p.shape = std::move(shape);
  p.values = std::move(values);
  auto [it, inserted] = params_.insert_or_assign(name, std::move(p));
  (void)inserted;
  return it->second;
}

Param& ParamStore::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("ParamStore: missing " + name);
  return it->second;
}

const Param& ParamStore::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("ParamStore: missing " + name);
  return it->second;
}

ParamStore ParamStore::zeros_like() const {
  ParamStore out;
  for (const auto& [name, p] : params_) {
    Param z;
    z.shape = p.shape;
    z.values.assign(p.values.size(), 0.0);
    out.params_.emplace(name, std::move(z));
  }
  return out;
}

void ParamStore::zero_values() {
  for (auto& [name, p] : params_) std::fill(p.values.begin(), p.values.end(), 0.0);
}

std::size_t ParamStore::total_values() const {
  std::size_t n = 0;
  for (const auto& [name, p] : params_) n += p.values.size();
  return n;
}

namespace {

double activate(double x, Act act) {
  return act == Act::kTanh ? std::tanh(x) : std::max(0.0, x);
}

double activate_grad(double pre, Act act) {
  if (act == Act::kTanh) {
    const double t = std::tanh(pre);
    return 1.0 - t * t;
  }
  return pre > 0.0 ? 1.0 : 0.0;
}

}  // namespace

void Mlp::init(ParamStore& ps, const Rng& rng) const {
  if (arch.size() < 2) throw std::invalid_argument("Mlp: need at least input and output widths");
  for (std::size_t i = 0; i + 1 < arch.size(); ++i) {
    const std::string tag = std::to_string(i);
    ps.add_weights(prefix + ".w" + tag, arch[i + 1], arch[i], rng);
    ps.add_bias(prefix + ".b" + tag, arch[i + 1]);
  }
}

Vec Mlp::forward(const ParamStore& ps, const Vec& input, Cache* cache) const {
  if (input.size() != arch.front()) {
    throw std::invalid_argument("Mlp::forward: input width mismatch for " + prefix);
  }
  if (cache) {
    cache->inputs.clear();
    cache->pre.clear();
  }
  Vec x = input;
  const std::size_t n_layers = arch.size() - 1;
  for (std::size_t i = 0; i < n_layers; ++i) {
    const std::string tag = std::to_string(i);
    const Param& w = ps.at(prefix + ".w" + tag);
    const Param& b = ps.at(prefix + ".b" + tag);
    Vec y(arch[i + 1]);
    kernels::gemv(w.values.data(), arch[i + 1], arch[i], x.data(), b.values.data(),
                  y.data());
    if (cache) {
      cache->inputs.push_back(std::move(x));
      cache->pre.push_back(y);
    }
    const bool final_layer = (i + 1 == n_layers);
    if (!final_layer) {
      for (double& v : y) v = activate(v, act);
    }
    x = std::move(y);
  }
  return x;
}

Vec Mlp::backward(const ParamStore& ps, const Cache& cache, const Vec& dout,
                  ParamStore& grads) const {
  const std::size_t n_layers = arch.size() - 1;
  if (cache.inputs.size() != n_layers) {
    throw std::invalid_argument("Mlp::backward: cache does not match architecture");
  }
  Vec d = dout;
  for (std::size_t i = n_layers; i-- > 0;) {
    const std::string tag = std::to_string(i);
    const bool final_layer = (i + 1 == n_layers);
    if (!final_layer) {
      for (std::size_t j = 0; j < d.size(); ++j) d[j] *= activate_grad(cache.pre[i][j], act);
    }
    Param& gw = grads.at(prefix + ".w" + tag);
    Param& gb = grads.at(prefix + ".b" + tag);
    const Param& w = ps.at(prefix + ".w" + tag);
    kernels::rank1_acc(gw.values.data(), arch[i + 1], arch[i], d.data(),
                       cache.inputs[i].data());
    kernels::axpy(1.0, d.data(), gb.values.data(), d.size());
    Vec dx(arch[i], 0.0);
    kernels::gemv_transposed_acc(w.values.data(), arch[i + 1], arch[i], d.data(),
                                 dx.data());
    d = std::move(dx);
  }
  return d;
}

Mlp CrossAttention::token_mlp() const {
  return Mlp{prefix + ".mlp", {width, mlp_hidden, width}, Act::kTanh};
}

void CrossAttention::init(ParamStore& ps, const Rng& rng) const {
  ps.add_weights(prefix + ".wq", width, width, rng);
  ps.add_weights(prefix + ".wk", width, width, rng);
  ps.add_weights(prefix + ".wv", width, width, rng);
  ps.add_weights(prefix + ".wo", width, width, rng);
  token_mlp().init(ps, rng);
}

Matrix CrossAttention::forward(const ParamStore& ps, const Matrix& queries,
                               const Matrix& context, Cache* cache) const {
  if (queries.cols != width || context.cols != width) {
    throw std::invalid_argument("CrossAttention::forward: token width mismatch for " + prefix);
  }
  if (context.rows == 0) {
    throw std::invalid_argument("CrossAttention::forward: empty context for " + prefix);
  }
  const std::size_t n_q = queries.rows;
  const std::size_t n_c = context.rows;
  const Param& wq = ps.at(prefix + ".wq");
  const Param& wk = ps.at(prefix + ".wk");
  const Param& wv = ps.at(prefix + ".wv");
  const Param& wo = ps.at(prefix + ".wo");

  Matrix q(n_q, width), k(n_c, width), v(n_c, width);
  for (std::size_t i = 0; i < n_q; ++i) {
    kernels::gemv(wq.values.data(), width, width, queries.row(i), nullptr, q.row(i));
  }
  for (std::size_t j = 0; j < n_c; ++j) {
    kernels::gemv(wk.values.data(), width, width, context.row(j), nullptr, k.row(j));
    kernels::gemv(wv.values.data(), width, width, context.row(j), nullptr, v.row(j));
  }

  const double scale = 1.0 / std::sqrt(static_cast<double>(width));
  Matrix attn(n_q, n_c);
  Matrix mix(n_q, width);
  for (std::size_t i = 0; i < n_q; ++i) {
    Vec scores(n_c);
    for (std::size_t j = 0; j < n_c; ++j) {
      scores[j] = kernels::dot(q.row(i), k.row(j), width) * scale;
    }
    const Vec w = softmax(scores);
    std::copy(w.begin(), w.end(), attn.row(i));
    for (std::size_t j = 0; j < n_c; ++j) {
      kernels::axpy(w[j], v.row(j), mix.row(i), width);
    }
  }

  Matrix h(n_q, width);
  for (std::size_t i = 0; i < n_q; ++i) {
    kernels::gemv(wo.values.data(), width, width, mix.row(i), nullptr, h.row(i));
    kernels::axpy(1.0, queries.row(i), h.row(i), width);  // residual
  }

  const Mlp mlp = token_mlp();
  Matrix out(n_q, width);
  std::vector<Mlp::Cache> mlp_caches(cache ? n_q : 0);
  for (std::size_t i = 0; i < n_q; ++i) {
    Vec hi(h.row(i), h.row(i) + width);
    Vec yi = mlp.forward(ps, hi, cache ? &mlp_caches[i] : nullptr);
    for (std::size_t c = 0; c < width; ++c) out.at(i, c) = hi[c] + yi[c];
  }

  if (cache) {
    cache->queries = queries;
    cache->context = context;
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->attn_weights = std::move(attn);
    cache->attn_mix = std::move(mix);
    cache->h = std::move(h);
    cache->mlp_caches = std::move(mlp_caches);
  }
  return out;
}

CrossAttention::InputGrads CrossAttention::backward(const ParamStore& ps,
                                                    const Cache& cache, const Matrix& dout,
                                                    ParamStore& grads) const {
  const std::size_t n_q = cache.queries.rows;
  const std::size_t n_c = cache.context.rows;
  if (dout.rows != n_q || dout.cols != width) {
    throw std::invalid_argument("CrossAttention::backward: gradient shape mismatch");
  }
  const Param& wq = ps.at(prefix + ".wq");
  const Param& wk = ps.at(prefix + ".wk");
  const Param& wv = ps.at(prefix + ".wv");
  const Param& wo = ps.at(prefix + ".wo");
  Param& gwq = grads.at(prefix + ".wq");
  Param& gwk = grads.at(prefix + ".wk");
  Param& gwv = grads.at(prefix + ".wv");
  Param& gwo = grads.at(prefix + ".wo");

  const Mlp mlp = token_mlp();
  const double scale = 1.0 / std::sqrt(static_cast<double>(width));

  InputGrads ig;
  ig.dqueries = Matrix(n_q, width);
  ig.dcontext = Matrix(n_c, width);
  Matrix dk_all(n_c, width);
  Matrix dv_all(n_c, width);

  for (std::size_t i = 0; i < n_q; ++i) {
    // out_i = h_i + mlp(h_i)
    Vec dyi(dout.row(i), dout.row(i) + width);
    Vec dhi = mlp.backward(ps, cache.mlp_caches[i], dyi, grads);
    kernels::axpy(1.0, dyi.data(), dhi.data(), width);  // residual path

    // h_i = queries_i + Wo mix_i
    kernels::axpy(1.0, dhi.data(), ig.dqueries.row(i), width);
    kernels::rank1_acc(gwo.values.data(), width, width, dhi.data(), cache.attn_mix.row(i));
    Vec dmix(width, 0.0);
    kernels::gemv_transposed_acc(wo.values.data(), width, width, dhi.data(), dmix.data());

    // mix_i = sum_j a_ij v_j
    Vec da(n_c);
    for (std::size_t j = 0; j < n_c; ++j) {
      da[j] = kernels::dot(dmix.data(), cache.v.row(j), width);
      kernels::axpy(cache.attn_weights.at(i, j), dmix.data(), dv_all.row(j), width);
    }

    // softmax backward: ds_j = a_j * (da_j - sum_k a_k da_k)
    double inner = 0.0;
    for (std::size_t j = 0; j < n_c; ++j) inner += cache.attn_weights.at(i, j) * da[j];
    Vec dscore(n_c);
    for (std::size_t j = 0; j < n_c; ++j) {
      dscore[j] = cache.attn_weights.at(i, j) * (da[j] - inner);
    }

    // score_ij = scale * q_i . k_j
    Vec dqi(width, 0.0);
    for (std::size_t j = 0; j < n_c; ++j) {
      kernels::axpy(dscore[j] * scale, cache.k.row(j), dqi.data(), width);
      kernels::axpy(dscore[j] * scale, cache.q.row(i), dk_all.row(j), width);
    }

    // q_i = Wq queries_i
    kernels::rank1_acc(gwq.values.data(), width, width, dqi.data(), cache.queries.row(i));
    kernels::gemv_transposed_acc(wq.values.data(), width, width, dqi.data(),
                                 ig.dqueries.row(i));
  }

  // k_j = Wk context_j, v_j = Wv context_j
  for (std::size_t j = 0; j < n_c; ++j) {
    kernels::rank1_acc(gwk.values.data(), width, width, dk_all.row(j), cache.context.row(j));
    kernels::gemv_transposed_acc(wk.values.data(), width, width, dk_all.row(j),
                                 ig.dcontext.row(j));
    kernels::rank1_acc(gwv.values.data(), width, width, dv_all.row(j), cache.context.row(j));
    kernels::gemv_transposed_acc(wv.values.data(), width, width, dv_all.row(j),
                                 ig.dcontext.row(j));
  }
  return ig;
}

void Adam::step(ParamStore& params, const ParamStore& grads) {
  ++step_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  for (auto& [name, p] : params.entries()) {
    const Param& g = grads.at(name);
    if (g.values.size() != p.values.size()) {
      throw std::invalid_argument("Adam::step: gradient shape mismatch for " + name);
    }
    Vec& m = m_.try_emplace(name, Vec(p.values.size(), 0.0)).first->second;
    Vec& v = v_.try_emplace(name, Vec(p.values.size(), 0.0)).first->second;
    for (std::size_t i = 0; i < p.values.size(); ++i) {
      const double gi = g.values[i];
      if (!std::isfinite(gi)) {
        throw std::runtime_error("Adam::step: non-finite gradient in " + name);
      }
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * gi;
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * gi * gi;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p.values[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

void Adam::restore(std::int64_t step, std::map<std::string, Vec> m,
                   std::map<std::string, Vec> v) {
  step_ = step;
  m_ = std::move(m);
  v_ = std::move(v);
}

EmaShadow::EmaShadow(const ParamStore& params, double decay)
    : decay_(decay), shadow_(params) {
  if (!(decay >= 0.0 && decay <= 1.0)) {
    throw std::invalid_argument("EmaShadow: decay must lie in [0, 1]");
  }
}

void EmaShadow::update(const ParamStore& params) {
  for (auto& [name, sp] : shadow_.entries()) {
    const Param& p = params.at(name);
    if (p.values.size() != sp.values.size()) {
      throw std::invalid_argument("EmaShadow::update: shape mismatch for " + name);
    }
    for (std::size_t i = 0; i < sp.values.size(); ++i) {
      sp.values[i] = decay_ * sp.values[i] + (1.0 - decay_) * p.values[i];
    }
  }
}

Vec softmax(const Vec& logits) {
  if (logits.empty()) throw std::invalid_argument("softmax: empty input");
  const double mx = *std::max_element(logits.begin(), logits.end());
  Vec out(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - mx);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) {
  if (x > 30.0) return x;
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

double bce_with_logits(double logit, double target) {
  // -target*log(sigmoid) - (1-target)*log(1-sigmoid), rearranged stably
  return softplus(logit) - target * logit;
}

}  // namespace gtrs::nn
