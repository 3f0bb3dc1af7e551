#pragma once

#include <cassert>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

#include "badm/errors.hpp"
#include "badm/models.hpp"
#include "badm/param_vector.hpp"
#include "badm/partition.hpp"
#include "badm/trace.hpp"

namespace badm {

enum class WeightMode { alpha_s, alpha_bs };

struct BadmConfig {
  double sigma = 0.0;               // consensus penalty / dual step
  double rho = 0.0;                 // proximal weight; 1/(rho+sigma) is the effective step
  std::size_t epochs = 1;
  WeightMode weight_mode = WeightMode::alpha_s;
  std::size_t threads = 1;          // sub-batch fan-out; 0 = hardware concurrency

  void validate() const {
    detail::require(sigma > 0.0 && std::isfinite(sigma), "BadmConfig: sigma must be positive");
    detail::require(rho > 0.0 && std::isfinite(rho), "BadmConfig: rho must be positive");
    detail::require(std::isfinite(1.0 / (rho + sigma)), "BadmConfig: 1/(rho+sigma) must be finite");
  }
};

// Full iterate set: the B x S grids of local parameters w_bs and multipliers
// pi_bs plus the latest global parameter. Row b-1 of the grids always holds
// the predecessor values for batch b; the epoch carry-over is implicit because
// batch 0 reads row B-1 as left by the previous epoch.
struct BadmState {
  std::size_t B = 0, S = 0;
  std::vector<ParamVector> w_local;   // B*S, row-major
  std::vector<ParamVector> pi;        // B*S, row-major
  ParamVector w_global;
  ParamVector w_global_prev;          // z^(k-1), for the descent certificate
  std::size_t epoch = 0;              // 0-based epoch counter (paper's ell)
  std::size_t batch = 0;              // 1-based index of the last processed batch; 0 before any
  std::int64_t k = 0;                 // = epoch * B + batch
  double max_abs_dual = 0.0;          // running max |pi| over the whole run

  ParamVector& local(std::size_t b, std::size_t s) { return w_local[b * S + s]; }
  const ParamVector& local(std::size_t b, std::size_t s) const { return w_local[b * S + s]; }
  ParamVector& dual(std::size_t b, std::size_t s) { return pi[b * S + s]; }
  const ParamVector& dual(std::size_t b, std::size_t s) const { return pi[b * S + s]; }
};

inline BadmState init_badm_state(const Model& model, const PartitionPlan& plan,
                                 const ParamVector& w0) {
  detail::require(w0.dim() == model.param_dim(), "init_badm_state: init dimension mismatch");
  BadmState st;
  st.B = plan.B;
  st.S = plan.S;
  st.w_local.assign(plan.B * plan.S, w0);
  st.pi.assign(plan.B * plan.S, ParamVector::zeros(w0.dim()));
  st.w_global = w0;
  st.w_global_prev = w0;
  return st;
}

// w_b^{l+1} = sum_s weight_s (w_{(b-1)s} + pi_{(b-1)s} / sigma), the closed-form
// solution of the global sub-problem. b is the 0-based batch about to be
// processed; predecessor values live in grid row (b-1+B) mod B. Summation runs
// in fixed s order so results are schedule-independent.
inline ParamVector global_update(const BadmState& state, const PartitionPlan& plan, std::size_t b,
                                 const BadmConfig& cfg) {
  detail::require(b < plan.B, "global_update: batch index out of range");
  std::size_t prev = (b + plan.B - 1) % plan.B;
  double batch_weight = 0.0;
  if (cfg.weight_mode == WeightMode::alpha_bs)
    for (std::size_t s = 0; s < plan.S; ++s) batch_weight += plan.alpha(b, s);
  ParamVector out(state.w_global.dim());
  for (std::size_t s = 0; s < plan.S; ++s) {
    double weight = cfg.weight_mode == WeightMode::alpha_s ? plan.alpha_s[s]
                                                           : plan.alpha(b, s) / batch_weight;
    const ParamVector& w = state.local(prev, s);
    const ParamVector& p = state.dual(prev, s);
    for (std::size_t i = 0; i < out.dim(); ++i) out[i] += weight * (w[i] + p[i] / cfg.sigma);
  }
  return out;
}

// Inexact local step: w_bs = w_b - (grad + pi_prev) / (rho + sigma).
inline ParamVector local_update(const ParamVector& w_b, const ParamVector& grad,
                                const ParamVector& pi_prev, const BadmConfig& cfg) {
  ParamVector out = w_b;
  double inv = 1.0 / (cfg.rho + cfg.sigma);
  detail::require(grad.dim() == w_b.dim() && pi_prev.dim() == w_b.dim(),
                  "local_update: dimension mismatch");
  for (std::size_t i = 0; i < out.dim(); ++i) out[i] -= (grad[i] + pi_prev[i]) * inv;
  return out;
}

// Dual ascent on the consensus residual: pi = pi_prev + sigma (w_bs - w_b).
inline ParamVector dual_update(const ParamVector& pi_prev, const ParamVector& w_bs_new,
                               const ParamVector& w_b_new, const BadmConfig& cfg) {
  ParamVector out = pi_prev;
  detail::require(w_bs_new.dim() == pi_prev.dim() && w_b_new.dim() == pi_prev.dim(),
                  "dual_update: dimension mismatch");
  for (std::size_t i = 0; i < out.dim(); ++i) out[i] += cfg.sigma * (w_bs_new[i] - w_b_new[i]);
  return out;
}

// Substituting the local step into the dual step gives
// pi = (rho pi_prev - sigma grad) / (rho + sigma); used as a debug cross-check
// and by the dual-identity tests.
inline ParamVector dual_update_closed_form(const ParamVector& pi_prev, const ParamVector& grad,
                                           const BadmConfig& cfg) {
  ParamVector out(pi_prev.dim());
  double inv = 1.0 / (cfg.rho + cfg.sigma);
  for (std::size_t i = 0; i < pi_prev.dim(); ++i)
    out[i] = (cfg.rho * pi_prev[i] - cfg.sigma * grad[i]) * inv;
  return out;
}

namespace detail {

inline void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  if (threads == 0) threads = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  threads = std::min(threads, count);
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t)
    pool.emplace_back([=, &fn] {
      for (std::size_t i = t; i < count; i += threads) fn(i);
    });
  for (auto& th : pool) th.join();
}

}  // namespace detail

struct ConsensusStats {
  double lagrangian = 0.0;   // L^k of the consensus augmented Lagrangian
  double resid_term = 0.0;   // sum_s alpha_s ||z_s-z||^2 + ||z-z_prev||^2
};

// Evaluates L^k = sum_s alpha_s ( F_s(z_s) + <v_s, z_s - z> + sigma/2 ||z_s - z||^2 )
// on the batch most recently processed, with F_s taken over the slice D_s.
// slices[s] must equal slice_Ds(plan, s).
inline ConsensusStats consensus_stats(const BadmState& state, const Model& model,
                                      const Dataset& data, const PartitionPlan& plan,
                                      const std::vector<IndexSet>& slices, double sigma) {
  std::size_t b = state.batch == 0 ? plan.B - 1 : state.batch - 1;
  ConsensusStats out;
  const ParamVector& z = state.w_global;
  for (std::size_t s = 0; s < plan.S; ++s) {
    const ParamVector& zs = state.local(b, s);
    const ParamVector& vs = state.dual(b, s);
    ParamVector diff = zs - z;
    double r2 = norm_sq(diff);
    double fs = subset_loss(model, zs, data, slices[s]);
    out.lagrangian += plan.alpha_s[s] * (fs + inner(vs, diff) + 0.5 * sigma * r2);
    out.resid_term += plan.alpha_s[s] * r2;
  }
  out.resid_term += norm_sq(state.w_global - state.w_global_prev);
  return out;
}

inline ConsensusStats consensus_stats(const BadmState& state, const Model& model,
                                      const Dataset& data, const PartitionPlan& plan,
                                      double sigma) {
  std::vector<IndexSet> slices;
  slices.reserve(plan.S);
  for (std::size_t s = 0; s < plan.S; ++s) slices.push_back(slice_Ds(plan, s));
  return consensus_stats(state, model, data, plan, slices, sigma);
}

struct BadmRunResult {
  ParamVector params;
  Trace trace;
  double max_abs_dual = 0.0;
};

namespace detail {

struct RunClock {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double elapsed_ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
        .count();
  }
};

inline void append_badm_record(Trace& trace, const BadmState& state, const Model& model,
                               const Dataset& data, const PartitionPlan& plan,
                               const std::vector<IndexSet>& slices, const BadmConfig& cfg,
                               const RunClock& clock) {
  TraceRecord r;
  r.k = state.k;
  r.epoch = static_cast<std::int64_t>(state.epoch);
  r.batch = static_cast<std::int64_t>(state.batch);
  r.loss = full_loss(model, state.w_global, data);
  r.grad_norm_sq = norm_sq(full_grad(model, state.w_global, data));
  ConsensusStats cs = consensus_stats(state, model, data, plan, slices, cfg.sigma);
  r.lagrangian = cs.lagrangian;
  r.wall_ms = clock.elapsed_ms();
  trace.records.push_back(r);
  trace.resid_terms.push_back(cs.resid_term);
  trace.snapshots.push_back(state.w_global);
}

}  // namespace detail

// One pass over all batches, Algorithm-1 style: per batch, the closed-form
// global aggregate followed by the S independent (gradient, local, dual)
// pipelines. Sub-batch slots may be processed by several threads; every slot
// is written exactly once and the aggregate uses a fixed summation order, so
// results are bitwise identical across schedules.
inline void run_badm_epoch(BadmState& state, const Model& model, const Dataset& data,
                           const PartitionPlan& plan, const BadmConfig& cfg, Trace& trace,
                           const std::vector<IndexSet>& slices, const detail::RunClock& clock) {
  for (std::size_t b = 0; b < plan.B; ++b) {
    std::size_t prev = (b + plan.B - 1) % plan.B;
    ParamVector w_b = global_update(state, plan, b, cfg);
    state.w_global_prev = state.w_global;
    state.w_global = w_b;

    detail::parallel_for(plan.S, cfg.threads, [&](std::size_t s) {
      ParamVector grad = subset_grad(model, w_b, data, plan.cell(b, s));
      const ParamVector& pi_prev = state.dual(prev, s);
      ParamVector w_new = local_update(w_b, grad, pi_prev, cfg);
      ParamVector pi_new = dual_update(pi_prev, w_new, w_b, cfg);
#ifndef NDEBUG
      ParamVector closed = dual_update_closed_form(pi_prev, grad, cfg);
      for (std::size_t i = 0; i < pi_new.dim(); ++i)
        assert(std::abs(pi_new[i] - closed[i]) <= 1e-9 * (1.0 + std::abs(closed[i])));
#endif
      state.local(b, s) = std::move(w_new);
      state.dual(b, s) = std::move(pi_new);
    });

    for (std::size_t s = 0; s < plan.S; ++s)
      state.max_abs_dual = std::max(state.max_abs_dual, max_abs(state.dual(b, s)));

    state.batch = b + 1;
    state.k = static_cast<std::int64_t>(state.epoch * plan.B + b + 1);
    trace.grad_evals += static_cast<std::int64_t>(plan.S);
    if (trace.wants_record(state.k))
      detail::append_badm_record(trace, state, model, data, plan, slices, cfg, clock);
  }
  state.epoch += 1;
  state.batch = 0;
}

inline void run_epoch(BadmState& state, const Model& model, const Dataset& data,
                      const PartitionPlan& plan, const BadmConfig& cfg, Trace& trace) {
  std::vector<IndexSet> slices;
  slices.reserve(plan.S);
  for (std::size_t s = 0; s < plan.S; ++s) slices.push_back(slice_Ds(plan, s));
  detail::RunClock clock;
  run_badm_epoch(state, model, data, plan, cfg, trace, slices, clock);
}

// Full BADM run. All w_bs^0 start from one shared seeded draw with pi_bs^0 = 0,
// so the first global aggregate reproduces the common initializer and the run
// starts exactly where the SGD-family baselines do.
inline BadmRunResult run(const Model& model, const Dataset& data, const PartitionPlan& plan,
                         const BadmConfig& cfg, InitScheme init_scheme, Rng& rng,
                         std::int64_t trace_stride = 1) {
  cfg.validate();
  ParamVector w0 = model_init(model, init_scheme, rng);
  BadmState state = init_badm_state(model, plan, w0);

  BadmRunResult result;
  result.trace.seed = rng.seed();
  result.trace.optimizer = "badm";
  result.trace.stride = trace_stride;

  std::vector<IndexSet> slices;
  slices.reserve(plan.S);
  for (std::size_t s = 0; s < plan.S; ++s) slices.push_back(slice_Ds(plan, s));

  detail::RunClock clock;
  detail::append_badm_record(result.trace, state, model, data, plan, slices, cfg, clock);
  for (std::size_t ell = 0; ell < cfg.epochs; ++ell)
    run_badm_epoch(state, model, data, plan, cfg, result.trace, slices, clock);

  if (result.trace.records.back().k != state.k && state.k > 0) {
    state.batch = plan.B;  // re-point at the last processed batch for stats
    state.epoch -= 1;
    detail::append_badm_record(result.trace, state, model, data, plan, slices, cfg, clock);
    state.epoch += 1;
    state.batch = 0;
  }

  result.params = state.w_global;
  result.max_abs_dual = state.max_abs_dual;
  return result;
}

}  // namespace badm
