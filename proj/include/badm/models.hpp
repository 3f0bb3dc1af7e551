#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "badm/dataset.hpp"
#include "badm/errors.hpp"
#include "badm/param_vector.hpp"
#include "badm/rng.hpp"

namespace badm {

enum class ModelKind { linear_regression, logistic, softmax, mlp };
enum class Activation { relu, sigmoid, tanh };

// Differentiable predictor + loss pair with hand-derived gradients.
//
// All kinds are affine layer chains over a flat parameter vector. Layout per
// layer: weight matrix W (out x in, row-major) followed by the bias vector
// (omitted when with_bias is false). Loss heads:
//   linear_regression  ->  l = 1/2 (yhat - y)^2
//   logistic           ->  binary cross-entropy on a sigmoid logit
//   softmax, mlp (C>1) ->  cross-entropy on max-shifted softmax scores
// Hidden activations apply to all but the final layer.
class Model {
 public:
  static Model linear_regression(std::size_t d, bool with_bias = true) {
    Model m;
    m.kind_ = ModelKind::linear_regression;
    m.dims_ = {d, 1};
    m.with_bias_ = with_bias;
    m.finish();
    return m;
  }

  static Model logistic(std::size_t d) {
    Model m;
    m.kind_ = ModelKind::logistic;
    m.dims_ = {d, 1};
    m.finish();
    return m;
  }

  static Model softmax(std::size_t d, int n_classes) {
    detail::require(n_classes >= 2, "softmax: need at least 2 classes");
    Model m;
    m.kind_ = ModelKind::softmax;
    m.dims_ = {d, static_cast<std::size_t>(n_classes)};
    m.finish();
    return m;
  }

  static Model mlp(std::vector<std::size_t> layer_dims, Activation act) {
    detail::require(layer_dims.size() >= 2, "mlp: need input and output dims");
    for (std::size_t d : layer_dims) detail::require(d >= 1, "mlp: layer dims must be positive");
    Model m;
    m.kind_ = ModelKind::mlp;
    m.dims_ = std::move(layer_dims);
    m.act_ = act;
    m.finish();
    return m;
  }

  ModelKind kind() const { return kind_; }
  Activation activation() const { return act_; }
  const std::vector<std::size_t>& layer_dims() const { return dims_; }
  std::size_t n_layers() const { return dims_.size() - 1; }
  std::size_t input_dim() const { return dims_.front(); }
  std::size_t output_dim() const { return dims_.back(); }
  std::size_t param_dim() const { return param_dim_; }
  bool with_bias() const { return with_bias_; }

  bool is_classifier() const {
    if (kind_ == ModelKind::linear_regression) return false;
    if (kind_ == ModelKind::mlp) return output_dim() >= 2;
    return true;
  }

  // Offset of layer j's weight block in the flat parameter vector.
  std::size_t layer_offset(std::size_t j) const { return offsets_[j]; }

 private:
  void finish() {
    offsets_.resize(n_layers());
    std::size_t off = 0;
    for (std::size_t j = 0; j < n_layers(); ++j) {
      offsets_[j] = off;
      off += dims_[j] * dims_[j + 1] + (with_bias_ ? dims_[j + 1] : 0);
    }
    param_dim_ = off;
  }

  ModelKind kind_ = ModelKind::linear_regression;
  Activation act_ = Activation::relu;
  std::vector<std::size_t> dims_;
  std::vector<std::size_t> offsets_;
  std::size_t param_dim_ = 0;
  bool with_bias_ = true;
};

namespace detail {

inline double apply_act(Activation a, double z) {
  switch (a) {
    case Activation::relu:
      return z > 0.0 ? z : 0.0;
    case Activation::sigmoid:
      return 1.0 / (1.0 + std::exp(-z));
    case Activation::tanh:
      return std::tanh(z);
  }
  return z;
}

// Derivative expressed through the post-activation value where possible;
// relu uses the pre-activation sign with subgradient 0 at exactly 0.
inline double act_deriv(Activation a, double z, double out) {
  switch (a) {
    case Activation::relu:
      return z > 0.0 ? 1.0 : 0.0;
    case Activation::sigmoid:
      return out * (1.0 - out);
    case Activation::tanh:
      return 1.0 - out * out;
  }
  return 1.0;
}

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// log(1 + exp(z)) without overflow
inline double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

// Reusable forward/backward buffers; acts[j] holds layer j's output,
// pre[j] the pre-activation values.
struct ModelWorkspace {
  std::vector<std::vector<double>> acts;
  std::vector<std::vector<double>> pre;
  std::vector<double> delta, delta_prev;

  explicit ModelWorkspace(const Model& m) {
    std::size_t L = m.n_layers();
    acts.resize(L);
    pre.resize(L);
    std::size_t widest = 0;
    for (std::size_t j = 0; j < L; ++j) {
      acts[j].resize(m.layer_dims()[j + 1]);
      pre[j].resize(m.layer_dims()[j + 1]);
      widest = std::max(widest, m.layer_dims()[j + 1]);
    }
    delta.resize(widest);
    delta_prev.resize(widest);
  }
};

// Runs the layer chain for one sample; returns the final scores in ws.acts.back().
inline void forward(const Model& m, const ParamVector& w, const double* x, ModelWorkspace& ws) {
  const double* in = x;
  std::size_t L = m.n_layers();
  for (std::size_t j = 0; j < L; ++j) {
    std::size_t nin = m.layer_dims()[j];
    std::size_t nout = m.layer_dims()[j + 1];
    const double* W = &w[m.layer_offset(j)];
    const double* b = m.with_bias() ? W + nin * nout : nullptr;
    for (std::size_t o = 0; o < nout; ++o) {
      const double* row = W + o * nin;
      double z = b ? b[o] : 0.0;
      for (std::size_t k = 0; k < nin; ++k) z += row[k] * in[k];
      ws.pre[j][o] = z;
      ws.acts[j][o] = (j + 1 < L) ? apply_act(m.activation(), z) : z;
    }
    in = ws.acts[j].data();
  }
}

// Loss and d(loss)/d(scores) for one sample. Softmax uses max-shifted
// log-sum-exp; the logistic head uses the softplus form of the BCE.
inline double head_loss_and_delta(const Model& m, const Dataset& data, std::size_t i,
                                  const std::vector<double>& scores, std::vector<double>* dscores) {
  switch (m.kind() == ModelKind::mlp ? (m.output_dim() >= 2 ? ModelKind::softmax
                                                            : ModelKind::linear_regression)
                                     : m.kind()) {
    case ModelKind::linear_regression: {
      double r = scores[0] - data.targets[i];
      if (dscores) (*dscores)[0] = r;
      return 0.5 * r * r;
    }
    case ModelKind::logistic: {
      double z = scores[0];
      double y = static_cast<double>(data.labels[i]);
      if (dscores) (*dscores)[0] = sigmoid(z) - y;
      return softplus(z) - y * z;
    }
    case ModelKind::softmax:
    default: {
      std::size_t C = scores.size();
      double zmax = *std::max_element(scores.begin(), scores.end());
      double sum = 0.0;
      for (double z : scores) sum += std::exp(z - zmax);
      double lse = zmax + std::log(sum);
      int y = data.labels[i];
      if (dscores) {
        for (std::size_t c = 0; c < C; ++c) {
          double p = std::exp(scores[c] - zmax) / sum;
          (*dscores)[c] = p - (static_cast<int>(c) == y ? 1.0 : 0.0);
        }
      }
      return lse - scores[static_cast<std::size_t>(y)];
    }
  }
}

// Backprop for one sample; accumulates d(loss)/d(w) into grad (not scaled).
inline void backward(const Model& m, const ParamVector& w, const double* x,
                     const ModelWorkspace& ws, std::vector<double>& delta,
                     std::vector<double>& delta_prev, ParamVector& grad) {
  std::size_t L = m.n_layers();
  for (std::size_t jj = L; jj-- > 0;) {
    std::size_t nin = m.layer_dims()[jj];
    std::size_t nout = m.layer_dims()[jj + 1];
    const double* in = jj == 0 ? x : ws.acts[jj - 1].data();
    const double* W = &w[m.layer_offset(jj)];
    double* gW = &grad[m.layer_offset(jj)];
    double* gb = m.with_bias() ? gW + nin * nout : nullptr;
    for (std::size_t o = 0; o < nout; ++o) {
      double d = delta[o];
      double* grow = gW + o * nin;
      for (std::size_t k = 0; k < nin; ++k) grow[k] += d * in[k];
      if (gb) gb[o] += d;
    }
    if (jj == 0) break;
    // delta for the previous layer, through the activation
    for (std::size_t k = 0; k < nin; ++k) {
      double s = 0.0;
      for (std::size_t o = 0; o < nout; ++o) s += W[o * nin + k] * delta[o];
      delta_prev[k] = s * act_deriv(m.activation(), ws.pre[jj - 1][k], ws.acts[jj - 1][k]);
    }
    std::swap(delta, delta_prev);
  }
}

inline void check_eval_pre(const Model& m, const ParamVector& w, const Dataset& data,
                           const IndexSet& subset) {
  require(w.dim() == m.param_dim(), "model eval: parameter dimension mismatch");
  require(!subset.idx.empty(), "model eval: empty subset");
  subset.validate(data.n);
  if (m.is_classifier()) {
    require(data.classification(), "model eval: classifier needs a classification dataset");
    require(m.kind() == ModelKind::logistic
                ? data.n_classes == 2
                : static_cast<int>(m.output_dim()) == data.n_classes,
            "model eval: output dim does not match n_classes");
  } else {
    require(!data.classification(), "model eval: regression model needs real targets");
  }
}

}  // namespace detail

// Mean per-sample loss over exactly the given subset.
inline double subset_loss(const Model& m, const ParamVector& w, const Dataset& data,
                          const IndexSet& subset) {
  detail::check_eval_pre(m, w, data, subset);
  detail::ModelWorkspace ws(m);
  double total = 0.0;
  for (std::size_t i : subset.idx) {
    detail::forward(m, w, data.row(i), ws);
    total += detail::head_loss_and_delta(m, data, i, ws.acts.back(), nullptr);
  }
  double loss = total / static_cast<double>(subset.size());
  if (!std::isfinite(loss)) throw NumericError("subset_loss: non-finite loss");
  return loss;
}

// Analytic gradient of subset_loss with respect to w.
inline ParamVector subset_grad(const Model& m, const ParamVector& w, const Dataset& data,
                               const IndexSet& subset) {
  detail::check_eval_pre(m, w, data, subset);
  detail::ModelWorkspace ws(m);
  ParamVector grad(m.param_dim());
  double total = 0.0;
  for (std::size_t i : subset.idx) {
    detail::forward(m, w, data.row(i), ws);
    total += detail::head_loss_and_delta(m, data, i, ws.acts.back(), &ws.delta);
    detail::backward(m, w, data.row(i), ws, ws.delta, ws.delta_prev, grad);
  }
  if (!std::isfinite(total)) throw NumericError("subset_grad: non-finite loss");
  grad *= 1.0 / static_cast<double>(subset.size());
  return grad;
}

inline double sample_loss(const Model& m, const ParamVector& w, const Dataset& data,
                          std::size_t i) {
  return subset_loss(m, w, data, IndexSet{{i}});
}

inline ParamVector sample_grad(const Model& m, const ParamVector& w, const Dataset& data,
                               std::size_t i) {
  return subset_grad(m, w, data, IndexSet{{i}});
}

inline double full_loss(const Model& m, const ParamVector& w, const Dataset& data) {
  return subset_loss(m, w, data, IndexSet::full(data.n));
}

inline ParamVector full_grad(const Model& m, const ParamVector& w, const Dataset& data) {
  return subset_grad(m, w, data, IndexSet::full(data.n));
}

// Fraction of argmax-correct predictions; ties break toward the lowest class id.
inline double accuracy(const Model& m, const ParamVector& w, const Dataset& data) {
  detail::require(m.is_classifier(), "accuracy: classification models only");
  detail::check_eval_pre(m, w, data, IndexSet::full(data.n));
  detail::ModelWorkspace ws(m);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.n; ++i) {
    detail::forward(m, w, data.row(i), ws);
    const auto& scores = ws.acts.back();
    int pred;
    if (m.kind() == ModelKind::logistic) {
      pred = scores[0] > 0.0 ? 1 : 0;
    } else {
      pred = 0;
      for (std::size_t c = 1; c < scores.size(); ++c)
        if (scores[c] > scores[pred]) pred = static_cast<int>(c);
    }
    if (pred == data.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.n);
}

// Glorot-uniform weights, zero biases, drawn layer by layer from one stream.
inline ParamVector glorot_init(const Model& m, Rng& rng) {
  ParamVector w(m.param_dim());
  for (std::size_t j = 0; j < m.n_layers(); ++j) {
    std::size_t nin = m.layer_dims()[j];
    std::size_t nout = m.layer_dims()[j + 1];
    ParamVector block = seeded_init(nin * nout, InitScheme::uniform_scaled, rng, nin, nout);
    std::copy(block.begin(), block.end(), &w[m.layer_offset(j)]);
  }
  return w;
}

inline ParamVector model_init(const Model& m, InitScheme scheme, Rng& rng) {
  if (scheme == InitScheme::zeros) return ParamVector::zeros(m.param_dim());
  return glorot_init(m, rng);
}

inline ParamVector finite_diff_grad(const Model& m, const ParamVector& w, const Dataset& data,
                                    const IndexSet& subset, double h) {
  return finite_diff_grad(
      [&](const ParamVector& p) { return subset_loss(m, p, data, subset); }, w, h);
}

}  // namespace badm
