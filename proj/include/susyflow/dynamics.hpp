#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <ostream>
#include <random>
#include <thread>
#include <vector>

#include <Eigen/QR>
#include <boost/random/normal_distribution.hpp>

#include "susyflow/gtomap.hpp"
#include "susyflow/mesh.hpp"
#include "susyflow/vfparse.hpp"

namespace susyflow {

using Point = std::array<double, 3>;

enum class InitPolicy { Uniform, Points };

struct TrajectoryConfig {
  FlowSpec flow;
  double dt = 1e-3;
  long steps = 1000;
  int ensemble = 1;
  std::uint64_t seed = 0;
  long burn_in = -1;  ///< steps; negative selects 10% of steps
  long record_every = 1;
  InitPolicy init = InitPolicy::Uniform;
  std::vector<Point> initial_points;
  int threads = 1;

  long burn_in_steps() const { return burn_in < 0 ? steps / 10 : burn_in; }

  void validate() const {
    flow.validate();
    if (!(dt > 0.0)) throw Error(ErrorCode::DomainMismatch, "dt must be positive");
    if (steps < 1) throw Error(ErrorCode::DomainMismatch, "steps must be >= 1");
    if (ensemble < 1) throw Error(ErrorCode::DomainMismatch, "ensemble must be >= 1");
    if (record_every < 1) throw Error(ErrorCode::DomainMismatch, "record_every must be >= 1");
    if (burn_in_steps() > steps) throw Error(ErrorCode::DomainMismatch, "burn-in exceeds steps");
    if (init == InitPolicy::Points && initial_points.empty())
      throw Error(ErrorCode::DomainMismatch, "initial point list is empty");
  }
};

/// splitmix64 finalizer; per-trajectory stream = f(seed, index).
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t index) {
  return std::mt19937_64(splitmix64(splitmix64(seed) ^ (index * 0xD1B54A32D192ED03ull + 1)));
}

inline double wrap_angle(double x) {
  if (x >= 0.0 && x < two_pi) return x;
  if (x >= two_pi && x < 2.0 * two_pi) return x - two_pi;
  if (x < 0.0 && x >= -two_pi) {
    x += two_pi;
    return x < two_pi ? x : 0.0;
  }
  x = std::fmod(x, two_pi);
  return x < 0.0 ? x + two_pi : (x >= two_pi ? x - two_pi : x);
}

/// Runs fn(i) for i in [0, n) on up to `threads` workers.
inline void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
  for (int w = 0; w < threads; ++w)
    pool.emplace_back([&, w] {
      try {
        for (int i = w; i < n; i += threads) fn(i);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline Point initial_point(const TrajectoryConfig& cfg, int index, std::mt19937_64& rng) {
  if (cfg.init == InitPolicy::Points) return cfg.initial_points[static_cast<std::size_t>(index) % cfg.initial_points.size()];
  std::uniform_real_distribution<double> u(0.0, two_pi);
  Point x{0, 0, 0};
  for (int a = 0; a < cfg.flow.dim(); ++a) x[static_cast<std::size_t>(a)] = u(rng);
  return x;
}

/// Observer receives (trajectory, step, t, x) at recorded steps.
using SampleObserver = std::function<void(int, long, double, const Point&)>;

/// Euler-Maruyama for one trajectory; calls obs at steps 0, r, 2r, ...
inline void run_trajectory(const TrajectoryConfig& cfg, int index, const SampleObserver& obs) {
  const int D = cfg.flow.dim();
  auto rng = stream_rng(cfg.seed, static_cast<std::uint64_t>(index));
  boost::random::normal_distribution<double> normal(0.0, 1.0);
  Point x = initial_point(cfg, index, rng);
  const double noise = std::sqrt(cfg.flow.temperature * cfg.dt);
  const double guard = std::numbers::pi / 4.0;
  Point f{0, 0, 0};
  if (obs) obs(index, 0, 0.0, x);
  for (long s = 1; s <= cfg.steps; ++s) {
    const std::span<const double> xs(x.data(), static_cast<std::size_t>(D));
    double f2 = 0.0;
    for (int a = 0; a < D; ++a) {
      f[static_cast<std::size_t>(a)] = cfg.flow.eval(a, xs);
      f2 += f[static_cast<std::size_t>(a)] * f[static_cast<std::size_t>(a)];
    }
    if (std::sqrt(f2) * cfg.dt > guard)
      throw Error(ErrorCode::StepTooLarge, "|F| dt = " + std::to_string(std::sqrt(f2) * cfg.dt) + " > pi/4");
    for (int a = 0; a < D; ++a) {
      const auto A = static_cast<std::size_t>(a);
      double xi = x[A] + f[A] * cfg.dt;
      if (noise > 0.0) xi += noise * cfg.flow.vielbein[A] * normal(rng);
      x[A] = wrap_angle(xi);
    }
    if (obs && s % cfg.record_every == 0) obs(index, s, static_cast<double>(s) * cfg.dt, x);
  }
}

struct Trajectory {
  std::vector<double> t;
  std::vector<Point> x;
};

/// Recorded trajectories, merged by trajectory index.
inline std::vector<Trajectory> integrate_sde(const TrajectoryConfig& cfg) {
  cfg.validate();
  std::vector<Trajectory> out(static_cast<std::size_t>(cfg.ensemble));
  parallel_for(cfg.ensemble, cfg.threads, [&](int i) {
    Trajectory& tr = out[static_cast<std::size_t>(i)];
    run_trajectory(cfg, i, [&tr](int, long, double t, const Point& x) {
      tr.t.push_back(t);
      tr.x.push_back(x);
    });
  });
  return out;
}

struct Histogram {
  int dim = 1;
  int bins = 50;  ///< per axis
  std::vector<long> counts;  ///< axis 0 fastest
  long total = 0;

  double bin_center(int b) const { return (b + 0.5) * two_pi / bins; }
};

struct EnsembleStats {
  Histogram histogram;
  double mean = 0.0;  ///< observable average over all post-burn-in samples
  double std_error = 0.0;  ///< from the spread of per-trajectory means
  long samples = 0;
};

/// Post-burn-in histogram plus the ensemble average of `obs` (if given).
inline EnsembleStats sample_stationary(const TrajectoryConfig& cfg, int bins, const FieldExpr* obs = nullptr) {
  cfg.validate();
  const int D = cfg.flow.dim();
  const long burn = cfg.burn_in_steps();
  std::size_t cells = 1;
  for (int a = 0; a < D; ++a) cells *= static_cast<std::size_t>(bins);
  std::vector<std::vector<long>> per_counts(static_cast<std::size_t>(cfg.ensemble), std::vector<long>(cells, 0));
  std::vector<double> sums(static_cast<std::size_t>(cfg.ensemble), 0.0);
  std::vector<long> ns(static_cast<std::size_t>(cfg.ensemble), 0);
  parallel_for(cfg.ensemble, cfg.threads, [&](int i) {
    auto& counts = per_counts[static_cast<std::size_t>(i)];
    run_trajectory(cfg, i, [&](int, long step, double, const Point& x) {
      if (step <= burn) return;
      std::size_t cell = 0, stride = 1;
      for (int a = 0; a < D; ++a) {
        const int b = std::min(bins - 1, static_cast<int>(x[static_cast<std::size_t>(a)] / two_pi * bins));
        cell += static_cast<std::size_t>(b) * stride;
        stride *= static_cast<std::size_t>(bins);
      }
      ++counts[cell];
      if (obs) sums[static_cast<std::size_t>(i)] += obs->eval(std::span<const double>(x.data(), static_cast<std::size_t>(D)));
      ++ns[static_cast<std::size_t>(i)];
    });
  });
  EnsembleStats st;
  st.histogram.dim = D;
  st.histogram.bins = bins;
  st.histogram.counts.assign(cells, 0);
  for (const auto& c : per_counts)
    for (std::size_t k = 0; k < cells; ++k) st.histogram.counts[k] += c[k];
  st.samples = std::accumulate(ns.begin(), ns.end(), 0L);
  st.histogram.total = st.samples;
  if (obs && st.samples > 0) {
    st.mean = std::accumulate(sums.begin(), sums.end(), 0.0) / static_cast<double>(st.samples);
    if (cfg.ensemble > 1) {
      double var = 0.0;
      for (int i = 0; i < cfg.ensemble; ++i) {
        const double m = sums[static_cast<std::size_t>(i)] / std::max(1L, ns[static_cast<std::size_t>(i)]);
        var += (m - st.mean) * (m - st.mean);
      }
      var /= (cfg.ensemble - 1);
      st.std_error = std::sqrt(var / cfg.ensemble);
    }
  }
  return st;
}

// ---------------------------------------------------------------------------

struct LyapunovConfig {
  TrajectoryConfig traj;  ///< ensemble = number of initial conditions
  int windows = 10;
  long qr_every = 1;
  double fd_step = 1e-6;
  bool common_noise = true;  ///< tangent vectors share the base path's noise
};

struct LyapunovResult {
  std::vector<double> exponents;   ///< descending
  std::vector<double> std_errors;  ///< window-averaging standard errors, floored at machine epsilon
  std::vector<std::vector<double>> per_trajectory;
  long steps = 0;
  double dt = 0.0;
};

namespace detail {

inline Eigen::MatrixXd fd_jacobian(const FlowSpec& f, const Point& x, double h) {
  const int D = f.dim();
  Eigen::MatrixXd j(D, D);
  for (int c = 0; c < D; ++c) {
    Point xp = x, xm = x;
    xp[static_cast<std::size_t>(c)] += h;
    xm[static_cast<std::size_t>(c)] -= h;
    for (int r = 0; r < D; ++r)
      j(r, c) = (f.eval(r, std::span<const double>(xp.data(), static_cast<std::size_t>(D))) -
                 f.eval(r, std::span<const double>(xm.data(), static_cast<std::size_t>(D)))) /
                (2.0 * h);
  }
  return j;
}

/// Accumulates log|R_ii| into window sums; returns per-window rates.
struct QrAccumulator {
  Eigen::MatrixXd q;
  std::vector<std::vector<double>> window_sums;
  std::vector<double> window_time;

  QrAccumulator(int D, int windows)
      : q(Eigen::MatrixXd::Identity(D, D)),
        window_sums(static_cast<std::size_t>(windows), std::vector<double>(static_cast<std::size_t>(D), 0.0)),
        window_time(static_cast<std::size_t>(windows), 0.0) {}

  void reorthonormalize(int window, double elapsed, bool record) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(q);
    const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
    Eigen::MatrixXd qn = qr.householderQ() * Eigen::MatrixXd::Identity(q.rows(), q.cols());
    for (Eigen::Index i = 0; i < q.cols(); ++i) {
      if (r(i, i) < 0.0) qn.col(i) = -qn.col(i);
      if (record) window_sums[static_cast<std::size_t>(window)][static_cast<std::size_t>(i)] += std::log(std::abs(r(i, i)));
    }
    if (record) window_time[static_cast<std::size_t>(window)] += elapsed;
    q = qn;
  }
};

inline void summarize(const std::vector<std::vector<double>>& rates, LyapunovResult& out) {
  const std::size_t D = rates.front().size();
  out.exponents.assign(D, 0.0);
  out.std_errors.assign(D, 0.0);
  for (std::size_t i = 0; i < D; ++i) {
    double m = 0.0;
    for (const auto& r : rates) m += r[i];
    m /= static_cast<double>(rates.size());
    double v = 0.0;
    for (const auto& r : rates) v += (r[i] - m) * (r[i] - m);
    v = rates.size() > 1 ? v / static_cast<double>(rates.size() - 1) : 0.0;
    out.exponents[i] = m;
    out.std_errors[i] = std::max(std::sqrt(v / static_cast<double>(rates.size())),
                                 std::numeric_limits<double>::epsilon());
  }
}

}  // namespace detail

/// Benettin tangent-space QR with finite-difference Jacobians along
/// Euler-Maruyama paths. Windows of every trajectory are pooled for the
/// error bars.
inline LyapunovResult lyapunov_spectrum(const LyapunovConfig& lc) {
  const TrajectoryConfig& cfg = lc.traj;
  cfg.validate();
  if (lc.windows < 1) throw Error(ErrorCode::DomainMismatch, "windows must be >= 1");
  const int D = cfg.flow.dim();
  const long burn = cfg.burn_in_steps();
  const long active = cfg.steps - burn;
  if (active < lc.windows * lc.qr_every) throw Error(ErrorCode::DomainMismatch, "too few post-burn-in steps for windows");
  std::vector<std::vector<std::vector<double>>> rates(static_cast<std::size_t>(cfg.ensemble));
  parallel_for(cfg.ensemble, cfg.threads, [&](int idx) {
    auto rng = stream_rng(cfg.seed, static_cast<std::uint64_t>(idx));
    boost::random::normal_distribution<double> normal(0.0, 1.0);
    Point x = initial_point(cfg, idx, rng);
    const double noise = std::sqrt(cfg.flow.temperature * cfg.dt);
    detail::QrAccumulator acc(D, lc.windows);
    auto rng_tangent = stream_rng(cfg.seed ^ 0xA5A5A5A5ull, static_cast<std::uint64_t>(idx));
    for (long s = 1; s <= cfg.steps; ++s) {
      const Eigen::MatrixXd j = detail::fd_jacobian(cfg.flow, x, lc.fd_step);
      // additive noise leaves the tangent map I + J dt path-independent
      acc.q = (Eigen::MatrixXd::Identity(D, D) + cfg.dt * j) * acc.q;
      Point f{0, 0, 0};
      for (int a = 0; a < D; ++a)
        f[static_cast<std::size_t>(a)] = cfg.flow.eval(a, std::span<const double>(x.data(), static_cast<std::size_t>(D)));
      for (int a = 0; a < D; ++a) {
        const auto A = static_cast<std::size_t>(a);
        double xi = x[A] + f[A] * cfg.dt;
        if (noise > 0.0) xi += noise * cfg.flow.vielbein[A] * (lc.common_noise ? normal(rng) : normal(rng_tangent));
        x[A] = wrap_angle(xi);
      }
      if (s % lc.qr_every == 0) {
        const bool record = s > burn;
        const int window = record ? static_cast<int>(std::min<long>(lc.windows - 1, (s - burn - 1) * lc.windows / active)) : 0;
        acc.reorthonormalize(window, static_cast<double>(lc.qr_every) * cfg.dt, record);
      }
    }
    auto& out = rates[static_cast<std::size_t>(idx)];
    for (int w = 0; w < lc.windows; ++w) {
      std::vector<double> r(static_cast<std::size_t>(D));
      for (int i = 0; i < D; ++i)
        r[static_cast<std::size_t>(i)] = acc.window_sums[static_cast<std::size_t>(w)][static_cast<std::size_t>(i)] /
                                         acc.window_time[static_cast<std::size_t>(w)];
      out.push_back(std::move(r));
    }
  });
  std::vector<std::vector<double>> pooled;
  LyapunovResult res;
  for (const auto& tr : rates) {
    std::vector<double> mean(static_cast<std::size_t>(D), 0.0);
    for (const auto& r : tr) {
      pooled.push_back(r);
      for (int i = 0; i < D; ++i) mean[static_cast<std::size_t>(i)] += r[static_cast<std::size_t>(i)] / static_cast<double>(tr.size());
    }
    res.per_trajectory.push_back(mean);
  }
  detail::summarize(pooled, res);
  res.steps = cfg.steps;
  res.dt = cfg.dt;
  return res;
}

/// Lyapunov spectrum of an affine torus map (tangent map A), per map step.
inline LyapunovResult lyapunov_map(const MapSpec& map, long steps, long burn_in = 50, int windows = 10) {
  validate_map(map);
  if (steps - burn_in < windows) throw Error(ErrorCode::DomainMismatch, "too few steps for windows");
  const int D = map.dim();
  const Eigen::MatrixXd a = map.A.cast<double>();
  detail::QrAccumulator acc(D, windows);
  const long active = steps - burn_in;
  for (long s = 1; s <= steps; ++s) {
    acc.q = a * acc.q;
    const bool record = s > burn_in;
    const int window = record ? static_cast<int>(std::min<long>(windows - 1, (s - burn_in - 1) * windows / active)) : 0;
    acc.reorthonormalize(window, 1.0, record);
  }
  std::vector<std::vector<double>> rates;
  for (int w = 0; w < windows; ++w) {
    std::vector<double> r(static_cast<std::size_t>(D));
    for (int i = 0; i < D; ++i)
      r[static_cast<std::size_t>(i)] = acc.window_sums[static_cast<std::size_t>(w)][static_cast<std::size_t>(i)] /
                                       acc.window_time[static_cast<std::size_t>(w)];
    rates.push_back(std::move(r));
  }
  LyapunovResult res;
  detail::summarize(rates, res);
  res.steps = steps;
  res.dt = 1.0;
  return res;
}

// ---------------------------------------------------------------------------

inline IntMatrix int_power(const IntMatrix& a, int n) {
  IntMatrix p = IntMatrix::Identity(a.rows(), a.cols());
  for (int i = 0; i < n; ++i) p = p * a;
  return p;
}

/// |det(A^n - I)|: number of fixed points of the n-th iterate.
inline long long fixed_point_count(const MapSpec& map, int n) {
  validate_map(map);
  if (n < 1) throw Error(ErrorCode::DomainMismatch, "n must be >= 1");
  const IntMatrix an = int_power(map.A, n);
  const IntMatrix m = an - IntMatrix::Identity(an.rows(), an.cols());
  if (m.isZero()) throw Error(ErrorCode::DegenerateIterate, "A^" + std::to_string(n) + " = I");
  const long long det = integer_determinant(m);
  if (det == 0) throw Error(ErrorCode::DegenerateIterate, "A^" + std::to_string(n) + " - I is singular");
  return det < 0 ? -det : det;
}

/// Brute force: points of the (1/q)-grid fixed by x -> A^n x mod 1, with
/// q = |det(A^n - I)|. The shift b only translates the fixed-point set.
inline std::vector<std::vector<long long>> enumerate_fixed_points(const MapSpec& map, int n) {
  const long long q = fixed_point_count(map, n);
  const int D = map.dim();
  const IntMatrix m = int_power(map.A, n) - IntMatrix::Identity(D, D);
  std::vector<std::vector<long long>> out;
  long long total = 1;
  for (int a = 0; a < D; ++a) total *= q;
  for (long long p = 0; p < total; ++p) {
    std::vector<long long> idx(static_cast<std::size_t>(D));
    long long r = p;
    for (int a = 0; a < D; ++a) {
      idx[static_cast<std::size_t>(a)] = r % q;
      r /= q;
    }
    bool fixed = true;
    for (int i = 0; i < D && fixed; ++i) {
      long long s = 0;
      for (int j = 0; j < D; ++j) s += m(i, j) * idx[static_cast<std::size_t>(j)];
      fixed = (s % q) == 0;
    }
    if (fixed) out.push_back(std::move(idx));
  }
  return out;
}

// ---------------------------------------------------------------------------

inline void write_trajectory_csv(std::ostream& os, const Trajectory& tr, int dim) {
  os << 't';
  for (int a = 0; a < dim; ++a) os << ",x" << a;
  os << '\n';
  os.precision(17);
  for (std::size_t i = 0; i < tr.t.size(); ++i) {
    os << tr.t[i];
    for (int a = 0; a < dim; ++a) os << ',' << tr.x[i][static_cast<std::size_t>(a)];
    os << '\n';
  }
}

inline void write_histogram_csv(std::ostream& os, const Histogram& h) {
  for (int a = 0; a < h.dim; ++a) os << "bin_center" << a << ',';
  os << "count\n";
  os.precision(17);
  for (std::size_t c = 0; c < h.counts.size(); ++c) {
    std::size_t r = c;
    for (int a = 0; a < h.dim; ++a) {
      os << h.bin_center(static_cast<int>(r % static_cast<std::size_t>(h.bins))) << ',';
      r /= static_cast<std::size_t>(h.bins);
    }
    os << h.counts[c] << '\n';
  }
}

}  // namespace susyflow
