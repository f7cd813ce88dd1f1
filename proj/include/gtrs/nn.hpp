#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "gtrs/rng.hpp"

namespace gtrs::nn {

using Vec = std::vector<double>;

// Row-major dense matrix; rows are tokens when used for attention inputs.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  Vec data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double* row(std::size_t r) { return data.data() + r * cols; }
  const double* row(std::size_t r) const { return data.data() + r * cols; }
  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

struct Param {
  std::vector<std::size_t> shape;  // {rows, cols} for weights, {n} for biases
  Vec values;

  std::size_t size() const { return values.size(); }
};

// Named parameter arrays. std::map keeps iteration order stable by name,
// which makes optimizer sweeps and checkpoints deterministic.
class ParamStore {
 public:
  // Weight matrix, uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)),
  // filled row-major from a substream derived from the parameter name.
  Param& add_weights(const std::string& name, std::size_t rows, std::size_t cols,
                     const Rng& init_rng);
  Param& add_bias(const std::string& name, std::size_t n);  // zeros
  Param& add_raw(const std::string& name, std::vector<std::size_t> shape, Vec values);

  bool has(const std::string& name) const { return params_.count(name) != 0; }
  Param& at(const std::string& name);
  const Param& at(const std::string& name) const;

  const std::map<std::string, Param>& entries() const { return params_; }
  std::map<std::string, Param>& entries() { return params_; }

  // Same names and shapes, all values zero — gradient accumulator.
  ParamStore zeros_like() const;
  void zero_values();
  std::size_t total_values() const;

 private:
  std::map<std::string, Param> params_;
};

enum class Act { kTanh, kRelu };

// Feed-forward stack: affine + activation per hidden layer, final layer
// linear. Parameters live in a shared ParamStore under `prefix.w<i>` /
// `prefix.b<i>` so one optimizer can sweep a whole model.
struct Mlp {
  std::string prefix;
  std::vector<std::size_t> arch;  // layer widths, e.g. {168, 256, 256, 24}
  Act act = Act::kTanh;

  struct Cache {
    std::vector<Vec> inputs;  // input to each affine layer
    std::vector<Vec> pre;     // pre-activation of each layer
  };

  void init(ParamStore& ps, const Rng& rng) const;
  Vec forward(const ParamStore& ps, const Vec& input, Cache* cache = nullptr) const;
  // Accumulates parameter gradients into `grads`, returns d(loss)/d(input).
  Vec backward(const ParamStore& ps, const Cache& cache, const Vec& dout,
               ParamStore& grads) const;
};

// One single-head cross-attention block: queries attend over context tokens
// (scaled dot-product softmax), residual add, then a per-token tanh MLP with
// a second residual. Query tokens never attend to each other, so each row of
// the output depends only on its own query row plus the context.
struct CrossAttention {
  std::string prefix;
  std::size_t width = 64;
  std::size_t mlp_hidden = 64;

  struct Cache {
    Matrix queries, context;   // raw inputs
    Matrix q, k, v;            // projected
    Matrix attn_weights;       // n_q x n_c softmax rows
    Matrix attn_mix;           // n_q x width, sum_j a_ij v_j
    Matrix h;                  // after first residual
    std::vector<Mlp::Cache> mlp_caches;
  };

  void init(ParamStore& ps, const Rng& rng) const;
  Matrix forward(const ParamStore& ps, const Matrix& queries, const Matrix& context,
                 Cache* cache = nullptr) const;
  struct InputGrads {
    Matrix dqueries;
    Matrix dcontext;
  };
  InputGrads backward(const ParamStore& ps, const Cache& cache, const Matrix& dout,
                      ParamStore& grads) const;

 private:
  Mlp token_mlp() const;
};

struct AdamConfig {
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam over every entry of a ParamStore. Moment arrays are
// keyed by parameter name so checkpoint round-trips restore them exactly.
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  void step(ParamStore& params, const ParamStore& grads);

  const AdamConfig& config() const { return cfg_; }
  std::int64_t step_count() const { return step_; }
  std::map<std::string, Vec>& moment1() { return m_; }
  std::map<std::string, Vec>& moment2() { return v_; }
  const std::map<std::string, Vec>& moment1() const { return m_; }
  const std::map<std::string, Vec>& moment2() const { return v_; }
  void restore(std::int64_t step, std::map<std::string, Vec> m, std::map<std::string, Vec> v);

 private:
  AdamConfig cfg_;
  std::map<std::string, Vec> m_, v_;
  std::int64_t step_ = 0;
};

// shadow <- decay * shadow + (1 - decay) * params, applied after each
// optimizer step; the shadow provides the soft teacher signal.
class EmaShadow {
 public:
  EmaShadow() = default;
  EmaShadow(const ParamStore& params, double decay);

  void update(const ParamStore& params);
  const ParamStore& shadow() const { return shadow_; }
  ParamStore& shadow() { return shadow_; }
  double decay() const { return decay_; }

 private:
  double decay_ = 0.999;
  ParamStore shadow_;
};

// Numerically stable helpers shared by the loss heads.
Vec softmax(const Vec& logits);
double sigmoid(double x);
// log(1 + e^x) without overflow; BCE-with-logits is built from it.
double softplus(double x);
double bce_with_logits(double logit, double target);

}  // namespace gtrs::nn
