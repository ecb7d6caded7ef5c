#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "zigzag/core.hpp"
#include "zigzag/rng.hpp"

namespace zigzag {

// Equally spaced samples along a trajectory. Switch points are never used
// as samples; they are biased towards the tails.
struct SampleSet {
  std::vector<double> times;
  Matrix positions;   // m x d
  Matrix velocities;  // m x d
  std::size_t size() const { return times.size(); }
};

namespace detail {

inline double burn_start(const Skeleton& skel, double burn_in) {
  if (burn_in < 0 || burn_in >= 1)
    throw std::invalid_argument("burn-in fraction must lie in [0, 1)");
  return burn_in * skel.total_time();
}

}  // namespace detail

// m samples at t_i = t0 + i (T - t0)/m, i = 1..m, where t0 is the burn-in
// cut. Exact interpolation of the piecewise linear trajectory.
inline SampleSet sample_trajectory(const Skeleton& skel, long long m, double burn_in = 0.0) {
  if (skel.size() < 2) throw std::invalid_argument("sample_trajectory: empty skeleton");
  if (m < 1) throw std::invalid_argument("sample_trajectory: need m >= 1");
  const double t0 = detail::burn_start(skel, burn_in);
  const double span = skel.total_time() - t0;
  if (!(span > 0)) throw std::invalid_argument("sample_trajectory: empty time window");

  SampleSet out;
  out.times.resize(static_cast<std::size_t>(m));
  out.positions.resize(m, skel.dim());
  out.velocities.resize(m, skel.dim());
  std::size_t seg = 0;
  for (long long i = 1; i <= m; ++i) {
    const double t = (i == m) ? skel.total_time() : t0 + span * static_cast<double>(i) / static_cast<double>(m);
    while (seg + 1 < skel.size() && skel.time(seg + 1) <= t) ++seg;
    const auto row = static_cast<Index>(i - 1);
    out.times[static_cast<std::size_t>(i - 1)] = t;
    out.positions.row(row) =
        (skel.position(seg) + (t - skel.time(seg)) * skel.velocity(seg)).transpose();
    out.velocities.row(row) = skel.velocity(seg).transpose();
  }
  return out;
}

// Memory-light variant: one coordinate only.
inline std::vector<double> sample_coordinate(const Skeleton& skel, Index coord, long long m,
                                             double burn_in = 0.0) {
  if (skel.size() < 2) throw std::invalid_argument("sample_coordinate: empty skeleton");
  if (m < 1) throw std::invalid_argument("sample_coordinate: need m >= 1");
  const double t0 = detail::burn_start(skel, burn_in);
  const double span = skel.total_time() - t0;
  std::vector<double> out(static_cast<std::size_t>(m));
  std::size_t seg = 0;
  for (long long i = 1; i <= m; ++i) {
    const double t = (i == m) ? skel.total_time() : t0 + span * static_cast<double>(i) / static_cast<double>(m);
    while (seg + 1 < skel.size() && skel.time(seg + 1) <= t) ++seg;
    out[static_cast<std::size_t>(i - 1)] =
        skel.position(seg)[coord] + (t - skel.time(seg)) * skel.velocity(seg)[coord];
  }
  return out;
}

namespace detail {

// Exact integral of (xi + theta s)^p over s in [0, dt], theta in {-1,+1}.
inline double segment_moment(double xi, double theta, double dt, int power) {
  if (power == 1) return dt * (xi + 0.5 * theta * dt);
  // theta^2 = 1
  return dt * (xi * xi + theta * xi * dt + dt * dt / 3.0);
}

}  // namespace detail

// Time average (1/T) int xi_i(s)^p ds in closed form, p in {1, 2}.
inline double integrate_moment(const Skeleton& skel, Index coord, int power,
                               double burn_in = 0.0) {
  if (power != 1 && power != 2)
    throw std::invalid_argument("integrate_moment: unsupported power (use sample_trajectory)");
  if (skel.size() < 2) throw std::invalid_argument("integrate_moment: need at least one segment");
  const double t0 = detail::burn_start(skel, burn_in);
  const double total = skel.total_time() - t0;
  if (!(total > 0)) throw std::invalid_argument("integrate_moment: empty time window");

  double acc = 0;
  for (std::size_t k = 0; k + 1 < skel.size(); ++k) {
    const double a = std::max(skel.time(k), t0);
    const double b = skel.time(k + 1);
    if (b <= a) continue;
    const double xi = skel.position(k)[coord] + (a - skel.time(k)) * skel.velocity(k)[coord];
    acc += detail::segment_moment(xi, skel.velocity(k)[coord], b - a, power);
  }
  return acc / total;
}

// Running time averages of xi_coord^p evaluated at each cut time (ascending).
// NaN cut times yield NaN entries.
inline std::vector<double> moment_prefix(const Skeleton& skel, Index coord, int power,
                                         std::span<const double> cut_times) {
  if (power != 1 && power != 2) throw std::invalid_argument("moment_prefix: unsupported power");
  if (skel.size() < 2) throw std::invalid_argument("moment_prefix: need at least one segment");
  std::vector<double> out(cut_times.size(), std::numeric_limits<double>::quiet_NaN());
  double acc = 0;
  std::size_t seg = 0;
  double seg_end_acc = 0;  // integral up to time(seg)
  for (std::size_t c = 0; c < cut_times.size(); ++c) {
    const double t = cut_times[c];
    if (std::isnan(t)) continue;
    if (t < skel.time(0) || t > skel.total_time())
      throw std::domain_error("moment_prefix: cut time outside the trajectory");
    while (seg + 2 < skel.size() && skel.time(seg + 1) <= t) {
      seg_end_acc += detail::segment_moment(skel.position(seg)[coord],
                                            skel.velocity(seg)[coord],
                                            skel.time(seg + 1) - skel.time(seg), power);
      ++seg;
    }
    acc = seg_end_acc + detail::segment_moment(skel.position(seg)[coord],
                                               skel.velocity(seg)[coord], t - skel.time(seg),
                                               power);
    out[c] = t > 0 ? acc / t : std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

// First time the coordinate enters [low, high], exact within segments.
inline std::optional<double> first_passage_time(const Skeleton& skel, Index coord,
                                                double low, double high) {
  if (skel.empty()) return std::nullopt;
  for (std::size_t k = 0; k < skel.size(); ++k) {
    const double p = skel.position(k)[coord];
    if (p >= low && p <= high) return skel.time(k);
    if (k + 1 == skel.size()) break;
    const double v = skel.velocity(k)[coord];
    const double dt = skel.time(k + 1) - skel.time(k);
    const double target = p < low ? low : high;
    if (v != 0) {
      const double hit = (target - p) / v;
      if (hit >= 0 && hit <= dt) return skel.time(k) + hit;
    }
  }
  return std::nullopt;
}

// One reported estimator value with its Monte Carlo uncertainty and cost.
struct MetricRecord {
  std::string name;
  double value = 0;
  double std_error = 0;  // >= 0
  double epochs = 0;
  std::uint64_t seed = 0;
};

struct EssEstimate {
  double ess = std::numeric_limits<double>::quiet_NaN();
  bool defined = false;
};

// Effective sample size by batch means with floor(sqrt(m)) batches:
// ESS = m * Var(series) / (batch size * Var(batch means)), capped at m.
// Undefined (flagged) for degenerate series.
inline EssEstimate ess(std::span<const double> series) {
  const std::size_t m = series.size();
  if (m < 100) throw std::invalid_argument("ess: need at least 100 samples");
  const auto k = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(m))));
  const std::size_t b = m / k;
  const std::size_t used = k * b;

  double mean = 0;
  for (std::size_t i = 0; i < used; ++i) mean += series[i];
  mean /= static_cast<double>(used);

  double s2 = 0;
  for (std::size_t i = 0; i < used; ++i) s2 += (series[i] - mean) * (series[i] - mean);
  s2 /= static_cast<double>(used - 1);
  if (s2 <= 1e-20 * (1.0 + mean * mean)) return {};  // degenerate series

  double s2b = 0;
  for (std::size_t batch = 0; batch < k; ++batch) {
    double bm = 0;
    for (std::size_t i = batch * b; i < (batch + 1) * b; ++i) bm += series[i];
    bm /= static_cast<double>(b);
    s2b += (bm - mean) * (bm - mean);
  }
  s2b /= static_cast<double>(k - 1);
  if (s2b <= 0) return {};

  const double value = static_cast<double>(m) * s2 / (static_cast<double>(b) * s2b);
  return {std::min(value, static_cast<double>(m)), true};
}

inline EssEstimate ess(const SampleSet& samples, Index coord) {
  std::vector<double> series(samples.size());
  for (std::size_t k = 0; k < series.size(); ++k)
    series[k] = samples.positions(static_cast<Index>(k), coord);
  return ess(series);
}

// Discrete-time baselines. Both count per-datum work explicitly: MALA costs
// n units per iteration (proposal + MH ratio in one data sweep), SGLD costs
// batch_size units per iteration.

struct MalaResult {
  Matrix chain;  // (iters - burnin) x d, post burn-in
  double accept_rate = 0;
  double step_final = 0;
  long long per_datum_evals = 0;
  double epochs = 0;
  long long nonfinite_rejects = 0;
};

// Random-walk Langevin proposal xi' = xi - (eps^2/2) grad Psi(xi) + eps Z
// with Metropolis-Hastings correction. During burn-in, the step adapts
// toward acceptance rate 0.574 by Robbins-Monro on log eps.
inline MalaResult mala(const TargetModel& model, double step, long long iters,
                       const Vector& init, std::uint64_t seed, long long burnin = -1) {
  if (iters < 1) throw std::invalid_argument("mala: need iters >= 1");
  if (burnin < 0) burnin = iters / 10;
  if (burnin >= iters) throw std::invalid_argument("mala: burn-in exceeds iterations");
  const Index d = model.dim();
  Rng rng(seed, 0x6d616c61ULL);

  Vector xi = init;
  double psi = model.psi(xi);
  Vector grad = model.full_grad(xi);
  double eps = step;
  long long accepted = 0, counted = 0;
  MalaResult out;
  out.chain.resize(iters - burnin, d);

  for (long long k = 0; k < iters; ++k) {
    Vector z(d);
    for (Index i = 0; i < d; ++i) z[i] = rng.normal();
    const Vector prop = xi - 0.5 * eps * eps * grad + eps * z;

    bool accept = false;
    double psi_p = std::numeric_limits<double>::infinity();
    Vector grad_p;
    if (prop.allFinite()) {
      psi_p = model.psi(prop);
      grad_p = model.full_grad(prop);
      if (std::isfinite(psi_p) && grad_p.allFinite()) {
        const double fwd = (prop - xi + 0.5 * eps * eps * grad).squaredNorm();
        const double bwd = (xi - prop + 0.5 * eps * eps * grad_p).squaredNorm();
        const double log_alpha = psi - psi_p + (fwd - bwd) / (2.0 * eps * eps);
        accept = std::log(rng.uniform()) < log_alpha;
      } else {
        ++out.nonfinite_rejects;
      }
    } else {
      ++out.nonfinite_rejects;
    }

    if (accept) {
      xi = prop;
      psi = psi_p;
      grad = grad_p;
    }
    if (k < burnin) {
      const double gain = 1.0 / std::sqrt(1.0 + static_cast<double>(k));
      eps *= std::exp(gain * ((accept ? 1.0 : 0.0) - 0.574));
    } else {
      accepted += accept ? 1 : 0;
      ++counted;
      out.chain.row(k - burnin) = xi.transpose();
    }
  }

  out.accept_rate = counted > 0 ? static_cast<double>(accepted) / static_cast<double>(counted) : 0.0;
  out.step_final = eps;
  out.per_datum_evals = iters * model.n_data();
  out.epochs = static_cast<double>(iters);
  return out;
}

struct SgldResult {
  Matrix chain;  // iters x d (truncated at divergence)
  bool diverged = false;
  long long per_datum_evals = 0;
  double epochs = 0;
};

// Stochastic gradient Langevin dynamics with fixed step size and no
// Metropolis correction:
//   xi <- xi - (h/2) (1/B) sum_{j in batch} grad Psi^j(xi) + sqrt(h) Z.
// Its stationary distribution is biased; that bias is the point of the
// comparison. A trajectory with ||xi|| > 1e10 is flagged divergent.
inline SgldResult sgld(const TargetModel& model, double step, long long batch_size,
                       long long iters, const Vector& init, std::uint64_t seed) {
  if (iters < 1) throw std::invalid_argument("sgld: need iters >= 1");
  if (batch_size < 1 || batch_size > model.n_data())
    throw std::invalid_argument("sgld: batch size must lie in [1, n]");
  const Index d = model.dim();
  const auto n = static_cast<std::uint64_t>(model.n_data());
  Rng rng(seed, 0x73676c64ULL);

  SgldResult out;
  out.chain.resize(iters, d);
  Vector xi = init;
  const double root_h = std::sqrt(step);
  long long k = 0;
  for (; k < iters; ++k) {
    Vector g = Vector::Zero(d);
    for (long long b = 0; b < batch_size; ++b)
      g += model.estimator_vec(xi, static_cast<long long>(rng.uniform_below(n)));
    g /= static_cast<double>(batch_size);
    for (Index i = 0; i < d; ++i) xi[i] += -0.5 * step * g[i] + root_h * rng.normal();
    out.chain.row(k) = xi.transpose();
    if (!xi.allFinite() || xi.norm() > 1e10) {
      out.diverged = true;
      ++k;
      break;
    }
  }
  out.chain.conservativeResize(k, d);
  out.per_datum_evals = k * batch_size;
  out.epochs = static_cast<double>(out.per_datum_evals) / static_cast<double>(model.n_data());
  return out;
}

}  // namespace zigzag
