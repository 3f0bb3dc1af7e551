#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "badm/errors.hpp"
#include "badm/rng.hpp"

namespace badm {

// Flat 64-bit parameter vector. All optimizer state (w, w_bs, pi_bs, ...) is
// stored in this one representation; arithmetic between vectors requires equal
// dimension.
class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(std::size_t dim, double fill = 0.0) : v_(dim, fill) {}
  explicit ParamVector(std::vector<double> values) : v_(std::move(values)) {}
  ParamVector(std::initializer_list<double> values) : v_(values) {}

  static ParamVector zeros(std::size_t dim) { return ParamVector(dim, 0.0); }

  std::size_t dim() const { return v_.size(); }
  double& operator[](std::size_t i) { return v_[i]; }
  const double& operator[](std::size_t i) const { return v_[i]; }

  std::vector<double>& values() { return v_; }
  const std::vector<double>& values() const { return v_; }

  auto begin() { return v_.begin(); }
  auto end() { return v_.end(); }
  auto begin() const { return v_.begin(); }
  auto end() const { return v_.end(); }

  ParamVector& operator+=(const ParamVector& o) {
    check_same_dim(o);
    for (std::size_t i = 0; i < v_.size(); ++i) v_[i] += o.v_[i];
    return *this;
  }
  ParamVector& operator-=(const ParamVector& o) {
    check_same_dim(o);
    for (std::size_t i = 0; i < v_.size(); ++i) v_[i] -= o.v_[i];
    return *this;
  }
  ParamVector& operator*=(double a) {
    for (double& x : v_) x *= a;
    return *this;
  }

  friend ParamVector operator+(ParamVector a, const ParamVector& b) { return a += b; }
  friend ParamVector operator-(ParamVector a, const ParamVector& b) { return a -= b; }
  friend ParamVector operator*(double a, ParamVector x) { return x *= a; }

  friend bool operator==(const ParamVector& a, const ParamVector& b) { return a.v_ == b.v_; }

  // y += a * x
  void axpy(double a, const ParamVector& x) {
    check_same_dim(x);
    for (std::size_t i = 0; i < v_.size(); ++i) v_[i] += a * x[i];
  }

  bool all_finite() const {
    for (double x : v_)
      if (!std::isfinite(x)) return false;
    return true;
  }

 private:
  void check_same_dim(const ParamVector& o) const {
    detail::require(v_.size() == o.v_.size(),
                    "ParamVector dimension mismatch: " + std::to_string(v_.size()) + " vs " +
                        std::to_string(o.v_.size()));
  }

  std::vector<double> v_;
};

inline double inner(const ParamVector& a, const ParamVector& b) {
  detail::require(a.dim() == b.dim(), "inner: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm_sq(const ParamVector& a) { return inner(a, a); }

inline double max_abs(const ParamVector& a) {
  double m = 0.0;
  for (double x : a) m = std::max(m, std::abs(x));
  return m;
}

enum class InitScheme { zeros, uniform_scaled };

// Deterministic initialization. uniform_scaled draws i.i.d. uniform entries on
// [-a, a] with a = sqrt(6 / (fan_in + fan_out)).
inline ParamVector seeded_init(std::size_t dim, InitScheme scheme, Rng& rng,
                               std::size_t fan_in = 0, std::size_t fan_out = 0) {
  detail::require(dim >= 1, "seeded_init: dim must be >= 1");
  ParamVector w(dim);
  if (scheme == InitScheme::zeros) return w;
  detail::require(fan_in + fan_out > 0, "seeded_init: uniform_scaled needs fan_in/fan_out");
  double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (std::size_t i = 0; i < dim; ++i) w[i] = rng.uniform(-a, a);
  return w;
}

// Central-difference gradient of a scalar function, (f(w + h e_i) - f(w - h e_i)) / 2h.
// Used throughout the tests as the independent oracle for analytic gradients.
template <typename F>
ParamVector finite_diff_grad(F&& f, const ParamVector& w, double h) {
  detail::require(h > 0.0, "finite_diff_grad: h must be positive");
  ParamVector g(w.dim());
  ParamVector probe = w;
  for (std::size_t i = 0; i < w.dim(); ++i) {
    double wi = w[i];
    probe[i] = wi + h;
    double fp = f(probe);
    probe[i] = wi - h;
    double fm = f(probe);
    probe[i] = wi;
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw NumericError("finite_diff_grad: non-finite loss at probe point, coordinate " +
                         std::to_string(i));
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

}  // namespace badm
