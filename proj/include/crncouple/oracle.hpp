#pragma once

// Exact transient expectations used to validate the simulators.
//
//  - Uniformization on a truncated state space: E f(X(t)) for any network
//    whose relevant mass stays inside per-species bounds.
//  - First-moment ODEs for networks whose intensities are affine.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "crncouple/model.hpp"

namespace crncouple {

// States 0 <= x_i <= upper[i], enumerated lexicographically (species 0 most
// significant).
class TruncatedSpace {
 public:
  static constexpr std::size_t kMaxStates = 50'000'000;

  explicit TruncatedSpace(std::vector<Count> upper) : upper_(std::move(upper)) {
    if (upper_.empty()) throw std::invalid_argument("truncated space needs at least one species");
    stride_.assign(upper_.size(), 1);
    std::size_t size = 1;
    for (std::size_t i = upper_.size(); i-- > 0;) {
      if (upper_[i] < 0) throw std::invalid_argument("truncation bounds must be nonnegative");
      stride_[i] = size;
      const auto extent = static_cast<std::size_t>(upper_[i]) + 1;
      if (size > kMaxStates / extent) throw std::length_error("truncated space is too large");
      size *= extent;
    }
    size_ = size;
  }

  std::size_t size() const noexcept { return size_; }
  std::size_t dim() const noexcept { return upper_.size(); }
  std::span<const Count> upper() const noexcept { return upper_; }

  bool contains(std::span<const Count> x) const {
    if (x.size() != upper_.size()) return false;
    for (std::size_t i = 0; i < x.size(); ++i)
      if (x[i] < 0 || x[i] > upper_[i]) return false;
    return true;
  }

  std::size_t index_of(std::span<const Count> x) const {
    std::size_t idx = 0;
    for (std::size_t i = 0; i < x.size(); ++i) idx += static_cast<std::size_t>(x[i]) * stride_[i];
    return idx;
  }

  State state_at(std::size_t index) const {
    State s;
    s.counts.resize(upper_.size());
    for (std::size_t i = 0; i < upper_.size(); ++i) {
      s.counts[i] = static_cast<Count>(index / stride_[i]);
      index %= stride_[i];
    }
    return s;
  }

 private:
  std::vector<Count> upper_;
  std::vector<std::size_t> stride_;
  std::size_t size_ = 0;
};

// Sparse generator in CSR form.  Off-diagonals hold lambda_k(x) for
// x -> x + zeta_k inside the truncation; transitions leaving it are dropped
// along with their diagonal contribution, so every row sums to zero.
struct GeneratorMatrix {
  std::size_t n = 0;
  std::vector<std::size_t> row_start;  // n + 1
  std::vector<std::size_t> col;
  std::vector<double> val;
  std::vector<double> diag;
  std::vector<double> dropped;  // per-state rate of transitions that left the space
  double max_dropped_rate = 0.0;

  double row_sum(std::size_t r) const {
    double s = diag[r];
    for (std::size_t p = row_start[r]; p < row_start[r + 1]; ++p) s += val[p];
    return s;
  }
};

inline GeneratorMatrix build_generator(const Network& net, const TruncatedSpace& space) {
  if (space.dim() != net.dim()) throw std::invalid_argument("truncation dimension does not match network");
  for (std::size_t i = 0; i < net.dim(); ++i) {
    const auto& ic = net.init[i];
    const double needed = ic.kind == InitialCondition::Kind::fixed ? static_cast<double>(ic.count) : ic.mean;
    if (needed > static_cast<double>(space.upper()[i]))
      throw std::invalid_argument("truncation bound for species " + net.species[i] +
                                  " is too small to contain the initial state");
  }
  GeneratorMatrix q;
  q.n = space.size();
  q.row_start.reserve(q.n + 1);
  q.diag.assign(q.n, 0.0);
  q.dropped.assign(q.n, 0.0);
  q.row_start.push_back(0);
  State y;
  for (std::size_t r = 0; r < q.n; ++r) {
    const State x = space.state_at(r);
    double out = 0.0;
    for (const auto& ch : net.channels) {
      if (ch.is_noop()) continue;
      const double rate = intensity(ch, x);
      if (rate <= 0.0) continue;
      y = x;
      for (std::size_t i = 0; i < y.dim(); ++i) y[i] += ch.net_change[i];
      if (!space.contains(y.counts)) {
        q.dropped[r] += rate;
        continue;
      }
      q.col.push_back(space.index_of(y.counts));
      q.val.push_back(rate);
      out += rate;
    }
    q.diag[r] = -out;
    q.max_dropped_rate = std::max(q.max_dropped_rate, q.dropped[r]);
    q.row_start.push_back(q.col.size());
  }
  return q;
}

// Product of per-species initial laws (fixed counts or Poisson means).
inline std::vector<double> initial_distribution(const Network& net, const TruncatedSpace& space) {
  std::vector<std::vector<double>> marg(net.dim());
  for (std::size_t i = 0; i < net.dim(); ++i) {
    const auto& ic = net.init[i];
    marg[i].assign(static_cast<std::size_t>(space.upper()[i]) + 1, 0.0);
    if (ic.kind == InitialCondition::Kind::fixed) {
      marg[i][static_cast<std::size_t>(ic.count)] = 1.0;
    } else {
      for (std::size_t j = 0; j < marg[i].size(); ++j) {
        const double dj = static_cast<double>(j);
        marg[i][j] = ic.mean == 0.0 ? (j == 0 ? 1.0 : 0.0)
                                    : std::exp(-ic.mean + dj * std::log(ic.mean) - std::lgamma(dj + 1.0));
      }
    }
  }
  std::vector<double> p(space.size());
  for (std::size_t r = 0; r < p.size(); ++r) {
    const State x = space.state_at(r);
    double v = 1.0;
    for (std::size_t i = 0; i < x.dim(); ++i) v *= marg[i][static_cast<std::size_t>(x[i])];
    p[r] = v;
  }
  return p;
}

struct TransientResult {
  double value = 0.0;
  // Probability that the untruncated chain would have taken a dropped
  // transition by time t (time integral of the outflow through the boundary).
  double leaked_mass = 0.0;
  std::size_t terms = 0;  // uniformization steps taken
};

inline constexpr double kUniformizationTail = 1e-12;

// E f(X(t)) = sum_j Poisson(Lambda t)_j (p0 P^j) f, with P = I + Q/Lambda.
inline TransientResult transient_expectation(const GeneratorMatrix& q, std::span<const double> init, double t,
                                             std::span<const double> f) {
  if (init.size() != q.n || f.size() != q.n) throw std::invalid_argument("vector size does not match generator");
  if (t < 0.0) throw std::invalid_argument("time must be nonnegative");
  double mass = 0.0;
  for (double p : init) {
    if (p < 0.0) throw std::invalid_argument("initial distribution has negative entries");
    mass += p;
  }
  if (std::abs(mass - 1.0) > 1e-9) throw std::invalid_argument("initial distribution must sum to 1");

  auto dot = [](std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
  };

  double lambda = 0.0;
  for (double d : q.diag) lambda = std::max(lambda, -d);
  TransientResult res;
  if (lambda == 0.0 || t == 0.0) {
    res.value = dot(init, f);
    return res;
  }

  const double a = lambda * t;
  const auto jmax = static_cast<std::size_t>(std::ceil(a + 14.0 * std::sqrt(a) + 40.0));
  std::vector<double> w(jmax + 1);
  for (std::size_t j = 0; j <= jmax; ++j) {
    const double dj = static_cast<double>(j);
    w[j] = std::exp(-a + dj * std::log(a) - std::lgamma(dj + 1.0));
  }
  // tail[j] = P(N > j)
  std::vector<double> tail(jmax + 1, 0.0);
  for (std::size_t j = jmax; j-- > 0;) tail[j] = tail[j + 1] + w[j + 1];
  std::size_t right = 0;
  while (right < jmax && tail[right] >= kUniformizationTail) ++right;

  std::vector<double> v(init.begin(), init.end()), next(q.n);
  for (std::size_t j = 0; j <= right; ++j) {
    res.value += w[j] * dot(v, f);
    res.leaked_mass += tail[j] / lambda * dot(v, q.dropped);
    // next = v P
    for (std::size_t r = 0; r < q.n; ++r) next[r] = v[r] * (1.0 + q.diag[r] / lambda);
    for (std::size_t r = 0; r < q.n; ++r) {
      const double vr = v[r] / lambda;
      if (vr == 0.0) continue;
      for (std::size_t p = q.row_start[r]; p < q.row_start[r + 1]; ++p) next[q.col[p]] += vr * q.val[p];
    }
    v.swap(next);
  }
  res.terms = right + 1;
  return res;
}

// Observable values over the truncated space, e.g. one species count.
inline std::vector<double> observable_over(const TruncatedSpace& space,
                                           const std::function<double(const State&)>& f) {
  std::vector<double> out(space.size());
  for (std::size_t r = 0; r < out.size(); ++r) out[r] = f(space.state_at(r));
  return out;
}

class NonAffineError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline bool is_affine(const Network& net) {
  for (const auto& ch : net.channels)
    if (ch.order() > 1) return false;
  return true;
}

// dm/dt = sum_k zeta_k lambda_k(m), integrated with classical RK4 at step
// <= 1e-3.  Exact first moments when every intensity is affine.
inline std::vector<double> moment_ode_mean(const Network& net, std::span<const double> x0, double t,
                                           double max_step = 1e-3) {
  for (const auto& ch : net.channels)
    if (ch.order() > 1)
      throw NonAffineError("reaction " + ch.id +
                           " has a non-affine intensity; the first-moment equations do not close. "
                           "Use uniformization on a truncated space instead.");
  if (x0.size() != net.dim()) throw std::invalid_argument("initial mean dimension does not match network");
  if (t < 0.0) throw std::invalid_argument("time must be nonnegative");

  const std::size_t d = net.dim();
  auto rhs = [&](const std::vector<double>& m, std::vector<double>& out) {
    std::fill(out.begin(), out.end(), 0.0);
    for (const auto& ch : net.channels) {
      double rate = ch.rate_constant;
      for (std::size_t i = 0; i < d; ++i)
        if (ch.reactants[i] == 1) rate *= m[i];
      for (std::size_t i = 0; i < d; ++i) out[i] += static_cast<double>(ch.net_change[i]) * rate;
    }
  };

  std::vector<double> m(x0.begin(), x0.end());
  if (t == 0.0) return m;
  const auto steps = static_cast<std::size_t>(std::ceil(t / max_step - 1e-9));
  const double h = t / static_cast<double>(steps);
  std::vector<double> k1(d), k2(d), k3(d), k4(d), tmp(d);
  for (std::size_t s = 0; s < steps; ++s) {
    rhs(m, k1);
    for (std::size_t i = 0; i < d; ++i) tmp[i] = m[i] + 0.5 * h * k1[i];
    rhs(tmp, k2);
    for (std::size_t i = 0; i < d; ++i) tmp[i] = m[i] + 0.5 * h * k2[i];
    rhs(tmp, k3);
    for (std::size_t i = 0; i < d; ++i) tmp[i] = m[i] + h * k3[i];
    rhs(tmp, k4);
    for (std::size_t i = 0; i < d; ++i) m[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  }
  return m;
}

// Mean initial condition of a network (fixed count or Poisson mean).
inline std::vector<double> initial_mean(const Network& net) {
  std::vector<double> m(net.dim());
  for (std::size_t i = 0; i < net.dim(); ++i)
    m[i] = net.init[i].kind == InitialCondition::Kind::fixed ? static_cast<double>(net.init[i].count)
                                                             : net.init[i].mean;
  return m;
}

}  // namespace crncouple
