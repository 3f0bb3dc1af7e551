#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "badm/badm.hpp"
#include "badm/errors.hpp"
#include "badm/models.hpp"
#include "badm/param_vector.hpp"
#include "badm/partition.hpp"
#include "badm/trace.hpp"

namespace badm {

enum class BaselineKind { sgd, sgdm, adagrad, rmsprop, adam, nadam };

inline const char* baseline_name(BaselineKind k) {
  switch (k) {
    case BaselineKind::sgd: return "sgd";
    case BaselineKind::sgdm: return "sgdm";
    case BaselineKind::adagrad: return "adagrad";
    case BaselineKind::rmsprop: return "rmsprop";
    case BaselineKind::adam: return "adam";
    case BaselineKind::nadam: return "nadam";
  }
  return "?";
}

struct BaselineHyper {
  double lr = 0.001;
  double momentum = 0.9;     // sgdm
  double beta1 = 0.9;        // adam, nadam
  double beta2 = 0.999;      // adam, nadam
  double rms_decay = 0.9;    // rmsprop
  double eps = 1e-8;         // adaptive denominators
};

inline bool uses_first_moment(BaselineKind k) {
  return k == BaselineKind::sgdm || k == BaselineKind::adam || k == BaselineKind::nadam;
}
inline bool uses_second_moment(BaselineKind k) {
  return k == BaselineKind::adagrad || k == BaselineKind::rmsprop || k == BaselineKind::adam ||
         k == BaselineKind::nadam;
}

struct BaselineState {
  BaselineKind kind = BaselineKind::sgd;
  ParamVector params;
  ParamVector m;   // velocity / first moment; empty unless the kind uses it
  ParamVector v;   // accumulated/EMA second moment; empty unless used
  std::int64_t t = 0;
  BaselineHyper hyper;
};

inline BaselineState init_baseline_state(BaselineKind kind, ParamVector w0, BaselineHyper hyper) {
  BaselineState st;
  st.kind = kind;
  st.hyper = hyper;
  std::size_t dim = w0.dim();
  st.params = std::move(w0);
  if (uses_first_moment(kind)) st.m = ParamVector::zeros(dim);
  if (uses_second_moment(kind)) st.v = ParamVector::zeros(dim);
  return st;
}

// One canonical update of the tagged optimizer:
//   sgd      w -= lr g
//   sgdm     m = mu m - lr g;            w += m
//   adagrad  v += g^2;                   w -= lr g / (sqrt(v) + eps)
//   rmsprop  v = d v + (1-d) g^2;        w -= lr g / (sqrt(v) + eps)
//   adam     bias-corrected m, v;        w -= lr mhat / (sqrt(vhat) + eps)
//   nadam    adam with the Nesterov look-ahead numerator
//            beta1 m_t/(1-beta1^(t+1)) + (1-beta1) g/(1-beta1^t)
inline void baseline_step(BaselineState& st, const ParamVector& grad) {
  detail::require(grad.dim() == st.params.dim(), "baseline_step: gradient dimension mismatch");
  const BaselineHyper& h = st.hyper;
  st.t += 1;
  double t = static_cast<double>(st.t);
  switch (st.kind) {
    case BaselineKind::sgd:
      st.params.axpy(-h.lr, grad);
      break;
    case BaselineKind::sgdm:
      for (std::size_t i = 0; i < grad.dim(); ++i) {
        st.m[i] = h.momentum * st.m[i] - h.lr * grad[i];
        st.params[i] += st.m[i];
      }
      break;
    case BaselineKind::adagrad:
      for (std::size_t i = 0; i < grad.dim(); ++i) {
        st.v[i] += grad[i] * grad[i];
        st.params[i] -= h.lr * grad[i] / (std::sqrt(st.v[i]) + h.eps);
      }
      break;
    case BaselineKind::rmsprop:
      for (std::size_t i = 0; i < grad.dim(); ++i) {
        st.v[i] = h.rms_decay * st.v[i] + (1.0 - h.rms_decay) * grad[i] * grad[i];
        st.params[i] -= h.lr * grad[i] / (std::sqrt(st.v[i]) + h.eps);
      }
      break;
    case BaselineKind::adam: {
      double c1 = 1.0 - std::pow(h.beta1, t);
      double c2 = 1.0 - std::pow(h.beta2, t);
      for (std::size_t i = 0; i < grad.dim(); ++i) {
        st.m[i] = h.beta1 * st.m[i] + (1.0 - h.beta1) * grad[i];
        st.v[i] = h.beta2 * st.v[i] + (1.0 - h.beta2) * grad[i] * grad[i];
        st.params[i] -= h.lr * (st.m[i] / c1) / (std::sqrt(st.v[i] / c2) + h.eps);
      }
      break;
    }
    case BaselineKind::nadam: {
      double c1_next = 1.0 - std::pow(h.beta1, t + 1.0);
      double c1 = 1.0 - std::pow(h.beta1, t);
      double c2 = 1.0 - std::pow(h.beta2, t);
      for (std::size_t i = 0; i < grad.dim(); ++i) {
        st.m[i] = h.beta1 * st.m[i] + (1.0 - h.beta1) * grad[i];
        st.v[i] = h.beta2 * st.v[i] + (1.0 - h.beta2) * grad[i] * grad[i];
        double lookahead = h.beta1 * st.m[i] / c1_next + (1.0 - h.beta1) * grad[i] / c1;
        st.params[i] -= h.lr * lookahead / (std::sqrt(st.v[i] / c2) + h.eps);
      }
      break;
    }
  }
}

// Runs a baseline over the same B x S sub-batch grid as BADM, one gradient
// step per cell in row-major order, so gradient-evaluation counts match BADM
// exactly and traces land on the same k grid (one record per batch).
inline BadmRunResult run_baseline(BaselineKind kind, const Model& model, const Dataset& data,
                                  const PartitionPlan& plan, const BaselineHyper& hyper,
                                  std::size_t epochs, InitScheme init_scheme, Rng& rng,
                                  std::int64_t trace_stride = 1) {
  ParamVector w0 = model_init(model, init_scheme, rng);
  BaselineState st = init_baseline_state(kind, std::move(w0), hyper);

  BadmRunResult result;
  result.trace.seed = rng.seed();
  result.trace.optimizer = baseline_name(kind);
  result.trace.stride = trace_stride;

  detail::RunClock clock;
  auto record = [&](std::int64_t k, std::size_t epoch, std::size_t batch) {
    TraceRecord r;
    r.k = k;
    r.epoch = static_cast<std::int64_t>(epoch);
    r.batch = static_cast<std::int64_t>(batch);
    r.loss = full_loss(model, st.params, data);
    r.grad_norm_sq = norm_sq(full_grad(model, st.params, data));
    r.lagrangian = r.loss;  // no consensus residuals for baselines
    r.wall_ms = clock.elapsed_ms();
    result.trace.records.push_back(r);
    result.trace.snapshots.push_back(st.params);
  };

  record(0, 0, 0);
  std::int64_t k = 0;
  for (std::size_t ell = 0; ell < epochs; ++ell) {
    for (std::size_t b = 0; b < plan.B; ++b) {
      for (std::size_t s = 0; s < plan.S; ++s) {
        ParamVector grad = subset_grad(model, st.params, data, plan.cell(b, s));
        baseline_step(st, grad);
        result.trace.grad_evals += 1;
      }
      k += 1;
      if (result.trace.wants_record(k)) record(k, ell, b + 1);
    }
  }
  if (k > 0 && result.trace.records.back().k != k)
    record(k, epochs - 1, plan.B);

  result.params = st.params;
  return result;
}

}  // namespace badm
