#pragma once

// Monte Carlo drivers over coupled paths.
//
// Paths are simulated in fixed blocks of kBlockPaths consecutive path
// indices.  Each block accumulates its paths in index order and blocks are
// merged in ascending order, so results do not depend on how many workers
// ran the blocks.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "crncouple/couplings.hpp"
#include "crncouple/model.hpp"

namespace crncouple {

// Streaming count/mean/central-moment sums up to order four.  M3 is carried
// because the pairwise merge of M4 needs it.
struct Accumulator {
  double count = 0.0;
  double mean = 0.0;
  double m2 = 0.0;
  double m3 = 0.0;
  double m4 = 0.0;

  void add(double x) {
    const double n1 = count;
    count += 1.0;
    const double n = count;
    const double delta = x - mean;
    const double dn = delta / n;
    const double dn2 = dn * dn;
    const double term1 = delta * dn * n1;
    mean += dn;
    m4 += term1 * dn2 * (n * n - 3.0 * n + 3.0) + 6.0 * dn2 * m2 - 4.0 * dn * m3;
    m3 += term1 * dn * (n - 2.0) - 3.0 * dn * m2;
    m2 += term1;
  }

  double variance() const { return count > 1.0 ? m2 / (count - 1.0) : 0.0; }
  double se_mean() const { return count > 0.0 ? std::sqrt(variance() / count) : 0.0; }

  // sqrt((m4 - s^4 (n-3)/(n-1)) / n), m4 the fourth central sample moment.
  double se_variance() const {
    if (count < 2.0) return 0.0;
    const double n = count;
    const double s2 = variance();
    const double v = (m4 / n - s2 * s2 * (n - 3.0) / (n - 1.0)) / n;
    return v > 0.0 ? std::sqrt(v) : 0.0;
  }
};

inline Accumulator merge(const Accumulator& a, const Accumulator& b) {
  if (a.count == 0.0) return b;
  if (b.count == 0.0) return a;
  Accumulator r;
  const double na = a.count, nb = b.count, n = na + nb;
  const double delta = b.mean - a.mean;
  const double d2 = delta * delta;
  r.count = n;
  r.mean = a.mean + delta * nb / n;
  r.m2 = a.m2 + b.m2 + d2 * na * nb / n;
  r.m3 = a.m3 + b.m3 + d2 * delta * na * nb * (na - nb) / (n * n) + 3.0 * delta * (na * b.m2 - nb * a.m2) / n;
  r.m4 = a.m4 + b.m4 + d2 * d2 * na * nb * (na * na - na * nb + nb * nb) / (n * n * n) +
         6.0 * d2 * (na * na * b.m2 + nb * nb * a.m2) / (n * n) + 4.0 * delta * (na * b.m3 - nb * a.m3) / n;
  return r;
}

inline std::vector<Accumulator> merge(std::span<const Accumulator> a, std::span<const Accumulator> b) {
  if (a.size() != b.size()) throw std::invalid_argument("accumulator shape mismatch");
  std::vector<Accumulator> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = merge(a[i], b[i]);
  return out;
}

// f(x) = sum_i w_i x_i
class Observable {
 public:
  static Observable species(std::size_t dim, std::size_t index) {
    if (index >= dim) throw std::out_of_range("observable species index out of range");
    std::vector<double> w(dim, 0.0);
    w[index] = 1.0;
    return Observable(std::move(w));
  }
  static Observable linear(std::vector<double> weights) { return Observable(std::move(weights)); }

  double operator()(const State& x) const {
    double v = 0.0;
    for (std::size_t i = 0; i < weights_.size(); ++i) v += weights_[i] * static_cast<double>(x[i]);
    return v;
  }

  std::size_t dim() const noexcept { return weights_.size(); }
  std::span<const double> weights() const noexcept { return weights_; }

 private:
  explicit Observable(std::vector<double> w) : weights_(std::move(w)) {}
  std::vector<double> weights_;
};

enum class CouplingKind { independent, crn, crp, local_crp, split };

inline const char* to_string(CouplingKind k) {
  switch (k) {
    case CouplingKind::independent: return "independent";
    case CouplingKind::crn: return "crn";
    case CouplingKind::crp: return "crp";
    case CouplingKind::local_crp: return "local-crp";
    case CouplingKind::split: return "split";
  }
  return "?";
}

inline std::optional<CouplingKind> parse_coupling(std::string_view s) {
  for (auto k : {CouplingKind::independent, CouplingKind::crn, CouplingKind::crp, CouplingKind::local_crp,
                 CouplingKind::split})
    if (s == to_string(k)) return k;
  return std::nullopt;
}

struct CouplingSpec {
  CouplingKind kind = CouplingKind::split;
  std::optional<Partition> partition;  // local_crp only

  static CouplingSpec local_crp(Partition p) { return {CouplingKind::local_crp, std::move(p)}; }
};

template <class Observer>
void run_coupled(const CouplingSpec& spec, const Network& nx, const Network& nz, const State& x0, const State& z0,
                 double t_final, const PathKey& key, Observer& obs, const SimOptions& opt = {}) {
  switch (spec.kind) {
    case CouplingKind::independent: return run_independent(nx, nz, x0, z0, t_final, key, obs, opt);
    case CouplingKind::crn: return run_crn(nx, nz, x0, z0, t_final, key, obs, opt);
    case CouplingKind::crp: return run_crp(nx, nz, x0, z0, t_final, key, obs, opt);
    case CouplingKind::local_crp:
      if (!spec.partition) throw std::invalid_argument("local-crp coupling requires a partition");
      if (spec.partition->t_final() != t_final)
        throw std::invalid_argument("partition must end at the horizon");
      return run_local_crp(nx, nz, x0, z0, *spec.partition, key, obs, opt);
    case CouplingKind::split: return run_split(nx, nz, x0, z0, t_final, key, obs, opt);
  }
}

// Records f(X) and f(Z) at each grid time (right-continuous).
class GridSampler {
 public:
  GridSampler(std::span<const double> grid, const Observable& f) : grid_(grid), f_(f), fx_(grid.size()), fz_(grid.size()) {}

  void start(const State& x, const State& z) {
    next_ = 0;
    cur_x_ = f_(x);
    cur_z_ = f_(z);
  }
  void event(double t, Which, std::uint32_t, const State& x, const State& z) {
    flush_before(t);
    cur_x_ = f_(x);
    cur_z_ = f_(z);
  }
  void finish(double, const State&, const State&) { flush_before(std::numeric_limits<double>::infinity()); }

  std::span<const double> fx() const noexcept { return fx_; }
  std::span<const double> fz() const noexcept { return fz_; }

 private:
  void flush_before(double t) {
    while (next_ < grid_.size() && grid_[next_] < t) {
      fx_[next_] = cur_x_;
      fz_[next_] = cur_z_;
      ++next_;
    }
  }

  std::span<const double> grid_;
  const Observable& f_;
  std::vector<double> fx_, fz_;
  std::size_t next_ = 0;
  double cur_x_ = 0.0, cur_z_ = 0.0;
};

inline std::vector<double> uniform_grid(double t_final, std::size_t points) {
  if (points < 2) throw std::invalid_argument("grid needs at least two points");
  std::vector<double> g(points);
  for (std::size_t i = 0; i < points; ++i)
    g[i] = static_cast<double>(i) * t_final / static_cast<double>(points - 1);
  g.back() = t_final;
  return g;
}

struct Experiment {
  Network net_x;
  Network net_z;
  CouplingSpec coupling;
  InitCoupling init_coupling = InitCoupling::shared;
  double t_final = 1.0;
  std::vector<double> grid;
  std::size_t n_paths = 1000;
  Observable observable = Observable::linear({});
  std::uint64_t master_seed = 0;
  std::size_t workers = 1;
  SimOptions sim;
};

struct Moments {
  double mean = 0.0;
  double var = 0.0;
  double se_mean = 0.0;
  double se_var = 0.0;
};

inline Moments moments_of(const Accumulator& a) {
  return {a.mean, a.variance(), a.se_mean(), a.se_variance()};
}

struct EstimateSeries {
  std::vector<double> t;
  std::vector<double> mean_diff;
  std::vector<double> var_diff;
  std::vector<double> se_mean;
  std::vector<double> se_var;
  std::size_t n_paths = 0;
  // Marginal statistics of f(X) and f(Z) from the same paths.
  std::vector<Moments> x;
  std::vector<Moments> z;

  std::size_t index_of(double time) const {
    for (std::size_t i = 0; i < t.size(); ++i)
      if (t[i] == time) return i;
    throw std::out_of_range("time " + std::to_string(time) + " is not on the estimate grid");
  }
};

inline constexpr std::size_t kBlockPaths = 64;

struct GridAccumulators {
  std::vector<Accumulator> diff, x, z;

  explicit GridAccumulators(std::size_t n = 0) : diff(n), x(n), z(n) {}

  void merge_in(const GridAccumulators& o) {
    diff = merge(diff, o.diff);
    x = merge(x, o.x);
    z = merge(z, o.z);
  }
};

// Runs fn(block_index) for every block on `workers` threads; the first
// exception thrown by any block is rethrown.
template <class Fn>
void for_each_block(std::size_t n_blocks, std::size_t workers, Fn&& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n_blocks));
  if (workers == 1) {
    for (std::size_t b = 0; b < n_blocks; ++b) fn(b);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      while (true) {
        const std::size_t b = next.fetch_add(1);
        if (b >= n_blocks) return;
        try {
          fn(b);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next = n_blocks;
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

inline GridAccumulators accumulate_paths(const Experiment& ex) {
  if (ex.n_paths < 2) throw std::invalid_argument("n_paths must be at least 2");
  if (ex.observable.dim() != ex.net_x.dim()) throw std::invalid_argument("observable dimension mismatch");
  if (ex.grid.empty()) throw std::invalid_argument("empty grid");
  for (std::size_t i = 0; i < ex.grid.size(); ++i) {
    if (ex.grid[i] < 0.0 || ex.grid[i] > ex.t_final) throw std::out_of_range("grid point outside [0, T]");
    if (i > 0 && ex.grid[i] < ex.grid[i - 1]) throw std::invalid_argument("grid must be nondecreasing");
  }
  if (ex.n_paths > std::numeric_limits<std::uint32_t>::max()) throw std::invalid_argument("too many paths");

  const std::size_t n_blocks = (ex.n_paths + kBlockPaths - 1) / kBlockPaths;
  std::vector<GridAccumulators> blocks(n_blocks, GridAccumulators(ex.grid.size()));
  for_each_block(n_blocks, ex.workers, [&](std::size_t b) {
    GridAccumulators& acc = blocks[b];
    GridSampler sampler(ex.grid, ex.observable);
    const std::size_t end = std::min(ex.n_paths, (b + 1) * kBlockPaths);
    for (std::size_t p = b * kBlockPaths; p < end; ++p) {
      const auto idx = static_cast<std::uint32_t>(p);
      const auto [x0, z0] = sample_initial(ex.net_x, ex.init_coupling, ex.master_seed, idx);
      run_coupled(ex.coupling, ex.net_x, ex.net_z, x0, z0, ex.t_final, PathKey{ex.master_seed, idx}, sampler,
                  ex.sim);
      const auto fx = sampler.fx();
      const auto fz = sampler.fz();
      for (std::size_t g = 0; g < fx.size(); ++g) {
        acc.diff[g].add(fx[g] - fz[g]);
        acc.x[g].add(fx[g]);
        acc.z[g].add(fz[g]);
      }
    }
  });
  GridAccumulators total(ex.grid.size());
  for (const auto& b : blocks) total.merge_in(b);
  return total;
}

// Mean and variance of D(t) = f(X(t)) - f(Z(t)) over the grid.
inline EstimateSeries variance_trajectory(const Experiment& ex) {
  const GridAccumulators acc = accumulate_paths(ex);
  EstimateSeries s;
  s.t = ex.grid;
  s.n_paths = ex.n_paths;
  for (std::size_t g = 0; g < ex.grid.size(); ++g) {
    const Moments d = moments_of(acc.diff[g]);
    s.mean_diff.push_back(d.mean);
    s.var_diff.push_back(d.var);
    s.se_mean.push_back(d.se_mean);
    s.se_var.push_back(d.se_var);
    s.x.push_back(moments_of(acc.x[g]));
    s.z.push_back(moments_of(acc.z[g]));
  }
  return s;
}

struct SensitivityEstimate {
  double estimate = 0.0;
  double se = 0.0;
  std::size_t n_paths = 0;
};

// Finite difference (E f(X(T)) - E f(Z(T))) / spread where X runs at the
// upper parameter theta+h1, Z at the lower theta-h2, spread = h1+h2.
inline SensitivityEstimate sensitivity_fd(Experiment ex, double spread) {
  if (!(spread > 0.0) || !std::isfinite(spread))
    throw std::invalid_argument("finite-difference spread h1+h2 must be positive");
  ex.grid = {ex.t_final};
  const GridAccumulators acc = accumulate_paths(ex);
  return {acc.diff[0].mean / spread, acc.diff[0].se_mean() / spread, ex.n_paths};
}

// Probability that the split-coupled linear birth processes A -> 2A with
// intensities theta*x and (theta+h)*x, started together at x0, make their
// first jump together within [0, delta].
inline double alpha_delta(double theta, double h, double x0, double delta) {
  return theta / (theta + h) * (1.0 - std::exp(-(theta + h) * x0 * delta));
}

// Fraction of split-coupled paths whose first event is a joint jump at a time
// <= delta.
inline Moments simultaneous_first_jump_fraction(const Network& nx, const Network& nz, const State& x0,
                                                double delta, std::size_t n_paths, std::uint64_t seed,
                                                std::size_t workers = 1) {
  struct FirstEvent {
    bool seen = false;
    bool joint = false;
    void start(const State&, const State&) { seen = joint = false; }
    void event(double, Which w, std::uint32_t, const State&, const State&) {
      if (!seen) joint = w == Which::both;
      seen = true;
    }
    void finish(double, const State&, const State&) {}
  };
  const std::size_t n_blocks = (n_paths + kBlockPaths - 1) / kBlockPaths;
  std::vector<Accumulator> blocks(n_blocks);
  for_each_block(n_blocks, workers, [&](std::size_t b) {
    FirstEvent obs;
    const std::size_t end = std::min(n_paths, (b + 1) * kBlockPaths);
    for (std::size_t p = b * kBlockPaths; p < end; ++p) {
      run_split(nx, nz, x0, x0, delta, PathKey{seed, static_cast<std::uint32_t>(p)}, obs);
      blocks[b].add(obs.seen && obs.joint ? 1.0 : 0.0);
    }
  });
  Accumulator total;
  for (const auto& b : blocks) total = merge(total, b);
  return moments_of(total);
}

}  // namespace crncouple
