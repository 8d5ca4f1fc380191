#pragma once

// Exact path simulation of a single reaction network and of coupled pairs.
//
// Every coupling except CRN is driven by the random time-change
// representation: a channel with intensity a(t) fires at the epochs of a
// unit-rate Poisson process read at internal time \int a ds.  Engines keep
// one clock (internal time, consumed epoch count, current rate) per stream
// reader and advance all clocks to the earliest firing.
//
// Engines report to an observer instead of building a path, so Monte Carlo
// drivers can sample a grid on the fly.  An observer provides
//   start(x, z)
//   event(t, which, channel, x_after, z_after)
//   finish(t_final, x, z)

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "crncouple/model.hpp"
#include "crncouple/streams.hpp"

namespace crncouple {

class ExplosionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SimOptions {
  std::size_t max_events = 10'000'000;
};

enum class Which : std::uint8_t { x, z, both };

inline const char* to_string(Which w) {
  switch (w) {
    case Which::x: return "X";
    case Which::z: return "Z";
    case Which::both: return "both";
  }
  return "?";
}

// Addresses the streams of one coupled path.
struct PathKey {
  std::uint64_t master_seed = 0;
  std::uint32_t path_index = 0;

  StreamKey stream(StreamRole role, std::uint32_t channel = 0, std::uint32_t partition = 0) const {
    return StreamKey{master_seed, path_index, role, channel, partition};
  }
};

// ---------------------------------------------------------------------------
// Partition

class Partition {
 public:
  explicit Partition(std::vector<double> points) : points_(std::move(points)) {
    if (points_.size() < 2) throw std::invalid_argument("partition needs at least two points");
    if (points_.front() != 0.0) throw std::invalid_argument("partition must start at 0");
    for (std::size_t i = 1; i < points_.size(); ++i)
      if (!(points_[i] > points_[i - 1]))
        throw std::invalid_argument("partition points must be strictly increasing");
  }

  // s_m = m*T/n
  static Partition uniform(double t_final, std::size_t n) {
    if (n < 1) throw std::invalid_argument("partition needs n >= 1 intervals");
    if (!(t_final > 0.0)) throw std::invalid_argument("partition horizon must be positive");
    std::vector<double> pts(n + 1);
    for (std::size_t m = 0; m <= n; ++m)
      pts[m] = static_cast<double>(m) * t_final / static_cast<double>(n);
    pts[n] = t_final;
    return Partition(std::move(pts));
  }

  std::span<const double> points() const noexcept { return points_; }
  std::size_t intervals() const noexcept { return points_.size() - 1; }
  double t_final() const noexcept { return points_.back(); }

  double mesh() const noexcept {
    double m = 0.0;
    for (std::size_t i = 1; i < points_.size(); ++i) m = std::max(m, points_[i] - points_[i - 1]);
    return m;
  }

 private:
  std::vector<double> points_;
};

// ---------------------------------------------------------------------------
// Paths

struct PathEvent {
  double time = 0.0;
  Which which = Which::x;
  std::uint32_t channel = 0;
  State x_after;
  State z_after;
};

struct CoupledPath {
  State x0;
  State z0;
  double t_final = 0.0;
  std::vector<PathEvent> events;

  // N_k(t) of the X (or Z) component at the horizon.
  std::vector<std::size_t> channel_counts(Which component, std::size_t num_channels) const {
    std::vector<std::size_t> n(num_channels, 0);
    for (const auto& e : events)
      if (e.which == Which::both || e.which == component) ++n[e.channel];
    return n;
  }
};

class PathRecorder {
 public:
  explicit PathRecorder(CoupledPath& out) : out_(out) {}

  void start(const State& x, const State& z) {
    out_.x0 = x;
    out_.z0 = z;
    out_.events.clear();
  }
  void event(double t, Which w, std::uint32_t k, const State& x, const State& z) {
    out_.events.push_back(PathEvent{t, w, k, x, z});
  }
  void finish(double t_final, const State&, const State&) { out_.t_final = t_final; }

 private:
  CoupledPath& out_;
};

// Right-continuous evaluation: the value at t is the post-state of the last
// event at time <= t.
inline std::vector<std::pair<State, State>> eval_at_grid(const CoupledPath& path,
                                                         std::span<const double> grid) {
  std::vector<std::pair<State, State>> out;
  out.reserve(grid.size());
  std::size_t e = 0;
  const State* x = &path.x0;
  const State* z = &path.z0;
  double prev = -std::numeric_limits<double>::infinity();
  for (double g : grid) {
    if (g < 0.0 || g > path.t_final)
      throw std::out_of_range("grid point " + std::to_string(g) + " outside [0, T]");
    if (g < prev) throw std::invalid_argument("grid must be nondecreasing");
    prev = g;
    while (e < path.events.size() && path.events[e].time <= g) {
      x = &path.events[e].x_after;
      z = &path.events[e].z_after;
      ++e;
    }
    out.emplace_back(*x, *z);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Split rates and categorical selection

struct SplitRates {
  double r1 = 0.0;  // both processes
  double r2 = 0.0;  // X alone
  double r3 = 0.0;  // Z alone

  friend bool operator==(const SplitRates&, const SplitRates&) = default;
};

inline SplitRates split_rates(double lambda_x, double lambda_z) noexcept {
  const double m = std::min(lambda_x, lambda_z);
  return {m, lambda_x - m, lambda_z - m};
}

// Returns the 0-based k with cum_{k-1}/total <= u < cum_k/total.
inline std::size_t categorical_select(std::span<const double> rates, double u) {
  double total = 0.0;
  for (double r : rates) total += r;
  if (!(total > 0.0)) throw std::invalid_argument("categorical_select: all rates are zero");
  double cum = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t k = 0; k < rates.size(); ++k) {
    if (rates[k] <= 0.0) continue;
    last_positive = k;
    cum += rates[k];
    if (u < cum / total) return k;
  }
  return last_positive;
}

// ---------------------------------------------------------------------------
// Engines

namespace detail {

struct Clock {
  PoissonStream* stream = nullptr;
  double internal = 0.0;
  std::size_t fired = 0;
  double rate = 0.0;

  double wait() const {
    if (rate <= 0.0) return std::numeric_limits<double>::infinity();
    return std::max(0.0, (stream->epoch(fired) - internal) / rate);
  }

  void advance(double dt) { internal += rate * dt; }

  void fire() {
    internal = stream->epoch(fired);
    ++fired;
  }
};

inline void apply_change(State& s, const ReactionChannel& ch) {
  for (std::size_t i = 0; i < s.counts.size(); ++i) {
    s.counts[i] += ch.net_change[i];
    if (s.counts[i] < 0)
      throw std::logic_error("negative count after reaction " + ch.id);
  }
}

inline void check_event_cap(std::size_t n, const SimOptions& opt) {
  if (n > opt.max_events)
    throw ExplosionError("event cap of " + std::to_string(opt.max_events) +
                         " exceeded; the path may be exploding");
}

inline bool before_end(double t, double end, bool inclusive) {
  return inclusive ? t <= end : t < end;
}

inline void check_pair_inputs(const Network& nx, const Network& nz, const State& x0, const State& z0) {
  if (!same_structure(nx, nz))
    throw std::invalid_argument("coupled networks must share species and net-change vectors");
  if (x0.dim() != nx.dim() || z0.dim() != nz.dim())
    throw std::invalid_argument("initial state dimension does not match the network");
  for (std::size_t i = 0; i < x0.dim(); ++i)
    if (x0[i] < 0 || z0[i] < 0) throw std::invalid_argument("initial state has a negative count");
}

// Per-channel clocks for X and Z over one time segment.  Z's clocks may read
// the same streams as X's (CRP) or their own (independent).  With
// run_z == false only X is simulated.
template <class Observer>
void run_channel_segment(const Network& nx, const Network& nz, State& x, State& z,
                         std::span<PoissonStream*> x_streams, std::span<PoissonStream*> z_streams,
                         double t0, double t1, bool inclusive_end, bool run_z, std::size_t& n_events,
                         const SimOptions& opt, Observer& obs) {
  const std::size_t R = nx.num_channels();
  std::vector<Clock> cx(R), cz(run_z ? R : 0);
  for (std::size_t k = 0; k < R; ++k) cx[k].stream = x_streams[k];
  for (std::size_t k = 0; k < cz.size(); ++k) cz[k].stream = z_streams[k];

  auto refresh = [&] {
    for (std::size_t k = 0; k < R; ++k) cx[k].rate = intensity(nx.channels[k], x);
    for (std::size_t k = 0; k < cz.size(); ++k) cz[k].rate = intensity(nz.channels[k], z);
  };
  refresh();

  double t = t0;
  while (true) {
    // Lowest channel first; X before Z within a channel.
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_k = 0;
    bool best_is_x = true;
    for (std::size_t k = 0; k < R; ++k) {
      const double wx = cx[k].wait();
      if (wx < best) best = wx, best_k = k, best_is_x = true;
      if (run_z) {
        const double wz = cz[k].wait();
        if (wz < best) best = wz, best_k = k, best_is_x = false;
      }
    }
    if (!std::isfinite(best)) break;
    const double t_ev = t + best;
    if (!before_end(t_ev, t1, inclusive_end)) break;

    // Z firing the same channel at the same instant merges into one event.
    const bool fire_x = best_is_x;
    const bool fire_z = !best_is_x || (run_z && cz[best_k].wait() == best);
    for (std::size_t k = 0; k < R; ++k) {
      if (!(fire_x && k == best_k)) cx[k].advance(best);
      if (run_z && !(fire_z && k == best_k)) cz[k].advance(best);
    }
    if (fire_x) {
      cx[best_k].fire();
      apply_change(x, nx.channels[best_k]);
    }
    if (fire_z) {
      cz[best_k].fire();
      apply_change(z, nz.channels[best_k]);
    }
    t = t_ev;
    check_event_cap(++n_events, opt);
    obs.event(t, fire_x && fire_z ? Which::both : (fire_x ? Which::x : Which::z),
              static_cast<std::uint32_t>(best_k), x, run_z ? z : x);
    refresh();
  }
}

}  // namespace detail

// Single process; streams[k] drives channel k.  The observer sees x in both
// state slots.
template <class Observer>
void run_single(const Network& net, const State& x0, double t_final, std::span<PoissonStream> streams,
                Observer& obs, const SimOptions& opt = {}) {
  if (!(t_final > 0.0)) throw std::invalid_argument("horizon must be positive");
  if (streams.size() != net.num_channels()) throw std::invalid_argument("one stream per channel required");
  State x = x0;
  obs.start(x, x);
  std::vector<PoissonStream*> ptrs;
  for (auto& s : streams) ptrs.push_back(&s);
  std::size_t n_events = 0;
  State unused;
  detail::run_channel_segment(net, net, x, unused, ptrs, ptrs, 0.0, t_final, true, false, n_events, opt,
                              obs);
  obs.finish(t_final, x, x);
}

inline std::vector<PoissonStream> single_streams(const Network& net, const PathKey& key,
                                                 StreamRole role = StreamRole::single) {
  std::vector<PoissonStream> s;
  s.reserve(net.num_channels());
  for (std::size_t k = 0; k < net.num_channels(); ++k)
    s.emplace_back(key.stream(role, static_cast<std::uint32_t>(k)));
  return s;
}

// The X component of the returned path is the simulated process; Z mirrors it.
inline CoupledPath simulate_single(const Network& net, const State& x0, double t_final,
                                   std::span<PoissonStream> streams, const SimOptions& opt = {}) {
  CoupledPath path;
  PathRecorder rec(path);
  run_single(net, x0, t_final, streams, rec, opt);
  for (auto& e : path.events) e.which = Which::x;
  return path;
}

inline CoupledPath simulate_single(const Network& net, const State& x0, double t_final, const PathKey& key,
                                   const SimOptions& opt = {}) {
  auto streams = single_streams(net, key);
  return simulate_single(net, x0, t_final, streams, opt);
}

// Independent: X reads role `single`, Z reads role `single_z`.
template <class Observer>
void run_independent(const Network& nx, const Network& nz, const State& x0, const State& z0, double t_final,
                     const PathKey& key, Observer& obs, const SimOptions& opt = {}) {
  detail::check_pair_inputs(nx, nz, x0, z0);
  if (!(t_final > 0.0)) throw std::invalid_argument("horizon must be positive");
  auto sx = single_streams(nx, key, StreamRole::single);
  auto sz = single_streams(nz, key, StreamRole::single_z);
  std::vector<PoissonStream*> px, pz;
  for (auto& s : sx) px.push_back(&s);
  for (auto& s : sz) pz.push_back(&s);
  State x = x0, z = z0;
  obs.start(x, z);
  std::size_t n_events = 0;
  detail::run_channel_segment(nx, nz, x, z, px, pz, 0.0, t_final, true, true, n_events, opt, obs);
  obs.finish(t_final, x, z);
}

// Local-CRP: on [s_m, s_{m+1}) both processes read one fresh per-channel
// stream family (role crp_channel, partition_index m) from internal time 0.
// Events exactly at s_m belong to the interval starting there; the last
// interval is closed at T.
template <class Observer>
void run_local_crp(const Network& nx, const Network& nz, const State& x0, const State& z0,
                   const Partition& partition, const PathKey& key, Observer& obs, const SimOptions& opt = {}) {
  detail::check_pair_inputs(nx, nz, x0, z0);
  const auto pts = partition.points();
  State x = x0, z = z0;
  obs.start(x, z);
  std::size_t n_events = 0;
  const std::size_t R = nx.num_channels();
  std::vector<PoissonStream> streams;
  std::vector<PoissonStream*> ptrs(R);
  for (std::size_t m = 0; m + 1 < pts.size(); ++m) {
    streams.clear();
    streams.reserve(R);
    for (std::size_t k = 0; k < R; ++k)
      streams.emplace_back(
          key.stream(StreamRole::crp_channel, static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(m)));
    for (std::size_t k = 0; k < R; ++k) ptrs[k] = &streams[k];
    const bool last = m + 2 == pts.size();
    detail::run_channel_segment(nx, nz, x, z, ptrs, ptrs, pts[m], pts[m + 1], last, true, n_events, opt, obs);
  }
  obs.finish(partition.t_final(), x, z);
}

// CRP is local-CRP over the trivial partition {0, T}.
template <class Observer>
void run_crp(const Network& nx, const Network& nz, const State& x0, const State& z0, double t_final,
             const PathKey& key, Observer& obs, const SimOptions& opt = {}) {
  run_local_crp(nx, nz, x0, z0, Partition({0.0, t_final}), key, obs, opt);
}

// CRN: one shared unit-rate stream Y (role crn_holding) is read by each
// process at its own internal time \int lambda_0 ds, and the i-th jump of
// each process picks its channel with the shared uniform U_i (role
// crn_uniform), i being that process's jump count before the jump.
template <class Observer>
void run_crn(const Network& nx, const Network& nz, const State& x0, const State& z0, double t_final,
             const PathKey& key, Observer& obs, const SimOptions& opt = {}) {
  detail::check_pair_inputs(nx, nz, x0, z0);
  if (!(t_final > 0.0)) throw std::invalid_argument("horizon must be positive");
  PoissonStream holding(key.stream(StreamRole::crn_holding));
  UniformStream select(key.stream(StreamRole::crn_uniform));
  const std::size_t R = nx.num_channels();
  std::vector<double> lx(R), lz(R);
  detail::Clock cx{&holding}, cz{&holding};
  State x = x0, z = z0;
  auto refresh = [&] {
    cx.rate = cz.rate = 0.0;
    for (std::size_t k = 0; k < R; ++k) {
      lx[k] = intensity(nx.channels[k], x);
      lz[k] = intensity(nz.channels[k], z);
      cx.rate += lx[k];
      cz.rate += lz[k];
    }
  };
  obs.start(x, z);
  refresh();
  double t = 0.0;
  std::size_t n_events = 0;
  while (true) {
    const double wx = cx.wait(), wz = cz.wait();
    const double best = std::min(wx, wz);
    if (!std::isfinite(best)) break;
    const double t_ev = t + best;
    if (t_ev > t_final) break;
    std::size_t kx = R, kz = R;
    if (wx == best) kx = categorical_select(lx, select.uniform_at(cx.fired));
    if (wz == best) kz = categorical_select(lz, select.uniform_at(cz.fired));
    // Simultaneous jumps on different channels are reported as two events.
    if (kx != R && kz != R && kx != kz) kz = R;
    const bool fire_x = kx != R, fire_z = kz != R;
    if (fire_x) cx.fire(); else cx.advance(best);
    if (fire_z) cz.fire(); else cz.advance(best);
    if (fire_x) detail::apply_change(x, nx.channels[kx]);
    if (fire_z) detail::apply_change(z, nz.channels[kz]);
    t = t_ev;
    detail::check_event_cap(++n_events, opt);
    obs.event(t, fire_x && fire_z ? Which::both : (fire_x ? Which::x : Which::z),
              static_cast<std::uint32_t>(fire_x ? kx : kz), x, z);
    refresh();
  }
  obs.finish(t_final, x, z);
}

// Single process in the holding-time + embedded-chain representation that
// CRN is built on.
inline CoupledPath simulate_single_embedded(const Network& net, const State& x0, double t_final,
                                            PoissonStream& holding, UniformStream& select,
                                            const SimOptions& opt = {}) {
  CoupledPath path;
  PathRecorder rec(path);
  const std::size_t R = net.num_channels();
  std::vector<double> lam(R);
  detail::Clock c{&holding};
  State x = x0;
  auto refresh = [&] {
    c.rate = 0.0;
    for (std::size_t k = 0; k < R; ++k) c.rate += (lam[k] = intensity(net.channels[k], x));
  };
  rec.start(x, x);
  refresh();
  double t = 0.0;
  std::size_t n_events = 0;
  while (true) {
    const double w = c.wait();
    if (!std::isfinite(w) || t + w > t_final) break;
    const std::size_t k = categorical_select(lam, select.uniform_at(c.fired));
    c.fire();
    detail::apply_change(x, net.channels[k]);
    t += w;
    detail::check_event_cap(++n_events, opt);
    rec.event(t, Which::x, static_cast<std::uint32_t>(k), x, x);
    refresh();
  }
  rec.finish(t_final, x, x);
  return path;
}

// ---------------------------------------------------------------------------
// Split coupling

struct SplitReport {
  // True when every splitter evaluation satisfied r1+r2 = lambda_k(x) and
  // r1+r3 = lambda~_k(z), i.e. both marginals are the intended processes.
  bool marginals_exact = true;
};

// Pair CTMC with 3R channels: for channel k, rate r1 moves both processes by
// zeta_k, r2 moves X alone, r3 moves Z alone.  Each (i, k) reads its own
// stream (roles split_shared / split_x_only / split_z_only).  The splitter is
// called as splitter(k, x, z) after every event and must return nonnegative
// SplitRates.
template <class Splitter, class Observer>
SplitReport run_general_split(const Network& nx, const Network& nz, const State& x0, const State& z0,
                              double t_final, Splitter&& splitter, const PathKey& key, Observer& obs,
                              const SimOptions& opt = {}) {
  detail::check_pair_inputs(nx, nz, x0, z0);
  if (!(t_final > 0.0)) throw std::invalid_argument("horizon must be positive");
  const std::size_t R = nx.num_channels();
  constexpr StreamRole roles[3] = {StreamRole::split_shared, StreamRole::split_x_only,
                                   StreamRole::split_z_only};
  std::vector<PoissonStream> streams;
  streams.reserve(3 * R);
  // clock index 3k + i, i in {shared, x only, z only}
  for (std::size_t k = 0; k < R; ++k)
    for (StreamRole role : roles) streams.emplace_back(key.stream(role, static_cast<std::uint32_t>(k)));
  std::vector<detail::Clock> clocks(3 * R);
  for (std::size_t c = 0; c < clocks.size(); ++c) clocks[c].stream = &streams[c];

  SplitReport report;
  State x = x0, z = z0;
  auto refresh = [&] {
    for (std::size_t k = 0; k < R; ++k) {
      const SplitRates r = splitter(k, std::as_const(x), std::as_const(z));
      if (!(r.r1 >= 0.0) || !(r.r2 >= 0.0) || !(r.r3 >= 0.0))
        throw std::domain_error("rate splitter returned a negative rate for channel " + nx.channels[k].id);
      clocks[3 * k].rate = r.r1;
      clocks[3 * k + 1].rate = r.r2;
      clocks[3 * k + 2].rate = r.r3;
      if (report.marginals_exact) {
        const double lx = intensity(nx.channels[k], x), lz = intensity(nz.channels[k], z);
        const auto close = [](double a, double b) {
          return std::abs(a - b) <= 1e-12 * std::max({1.0, std::abs(a), std::abs(b)});
        };
        if (!close(r.r1 + r.r2, lx) || !close(r.r1 + r.r3, lz)) report.marginals_exact = false;
      }
    }
  };

  obs.start(x, z);
  refresh();
  double t = 0.0;
  std::size_t n_events = 0;
  while (true) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_c = 0;
    for (std::size_t c = 0; c < clocks.size(); ++c) {
      const double w = clocks[c].wait();
      if (w < best) best = w, best_c = c;
    }
    if (!std::isfinite(best)) break;
    const double t_ev = t + best;
    if (t_ev > t_final) break;
    for (std::size_t c = 0; c < clocks.size(); ++c)
      if (c != best_c) clocks[c].advance(best);
    clocks[best_c].fire();
    const std::size_t k = best_c / 3;
    const Which w = best_c % 3 == 0 ? Which::both : (best_c % 3 == 1 ? Which::x : Which::z);
    if (w != Which::z) detail::apply_change(x, nx.channels[k]);
    if (w != Which::x) detail::apply_change(z, nz.channels[k]);
    t = t_ev;
    detail::check_event_cap(++n_events, opt);
    obs.event(t, w, static_cast<std::uint32_t>(k), x, z);
    refresh();
  }
  obs.finish(t_final, x, z);
  return report;
}

template <class Observer>
void run_split(const Network& nx, const Network& nz, const State& x0, const State& z0, double t_final,
               const PathKey& key, Observer& obs, const SimOptions& opt = {}) {
  auto exact = [&](std::size_t k, const State& x, const State& z) {
    return split_rates(intensity(nx.channels[k], x), intensity(nz.channels[k], z));
  };
  run_general_split(nx, nz, x0, z0, t_final, exact, key, obs, opt);
}

// ---------------------------------------------------------------------------
// Path-returning wrappers

inline CoupledPath simulate_independent(const Network& nx, const Network& nz, const State& x0, const State& z0,
                                        double t_final, const PathKey& key, const SimOptions& opt = {}) {
  CoupledPath p;
  PathRecorder rec(p);
  run_independent(nx, nz, x0, z0, t_final, key, rec, opt);
  return p;
}

inline CoupledPath simulate_crn(const Network& nx, const Network& nz, const State& x0, const State& z0,
                                double t_final, const PathKey& key, const SimOptions& opt = {}) {
  CoupledPath p;
  PathRecorder rec(p);
  run_crn(nx, nz, x0, z0, t_final, key, rec, opt);
  return p;
}

inline CoupledPath simulate_crp(const Network& nx, const Network& nz, const State& x0, const State& z0,
                                double t_final, const PathKey& key, const SimOptions& opt = {}) {
  CoupledPath p;
  PathRecorder rec(p);
  run_crp(nx, nz, x0, z0, t_final, key, rec, opt);
  return p;
}

inline CoupledPath simulate_local_crp(const Network& nx, const Network& nz, const State& x0, const State& z0,
                                      const Partition& partition, const PathKey& key,
                                      const SimOptions& opt = {}) {
  CoupledPath p;
  PathRecorder rec(p);
  run_local_crp(nx, nz, x0, z0, partition, key, rec, opt);
  return p;
}

inline CoupledPath simulate_split(const Network& nx, const Network& nz, const State& x0, const State& z0,
                                  double t_final, const PathKey& key, const SimOptions& opt = {}) {
  CoupledPath p;
  PathRecorder rec(p);
  run_split(nx, nz, x0, z0, t_final, key, rec, opt);
  return p;
}

using RateSplitter = std::function<SplitRates(std::size_t, const State&, const State&)>;

struct GeneralSplitResult {
  CoupledPath path;
  SplitReport report;
};

inline GeneralSplitResult simulate_general_split(const Network& nx, const Network& nz, const State& x0,
                                                 const State& z0, double t_final, const RateSplitter& splitter,
                                                 const PathKey& key, const SimOptions& opt = {}) {
  GeneralSplitResult r;
  PathRecorder rec(r.path);
  r.report = run_general_split(nx, nz, x0, z0, t_final, splitter, key, rec, opt);
  return r;
}

}  // namespace crncouple
