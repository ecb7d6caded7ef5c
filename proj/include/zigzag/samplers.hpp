#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "zigzag/core.hpp"
#include "zigzag/poisson.hpp"
#include "zigzag/rng.hpp"

namespace zigzag {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Thrown when a thinning ratio exceeds 1 beyond numerical slack: the
// supplied computational bound failed to dominate the true rate. The run is
// aborted; exactness would otherwise be silently lost.
class BoundViolation : public std::runtime_error {
 public:
  BoundViolation(PhaseState state, Index coord, double time, double rate, double bound)
      : std::runtime_error("bound violation at t=" + std::to_string(time) + ", coordinate " +
                           std::to_string(coord) + ": rate " + std::to_string(rate) +
                           " exceeds bound " + std::to_string(bound)),
        state_(std::move(state)),
        coord_(coord),
        time_(time),
        rate_(rate),
        bound_(bound) {}

  const PhaseState& state() const { return state_; }
  Index coord() const { return coord_; }
  double time() const { return time_; }
  double rate() const { return rate_; }
  double bound() const { return bound_; }

 private:
  PhaseState state_;
  Index coord_;
  double time_, rate_, bound_;
};

// Exactly one stopping criterion per run.
struct StopRule {
  enum class Kind { MaxTime, MaxProposals, MaxEpochs };
  Kind kind = Kind::MaxTime;
  double limit = 1.0;

  static StopRule max_time(double t) {
    if (!(t > 0)) throw std::invalid_argument("max_time must be positive");
    return {Kind::MaxTime, t};
  }
  static StopRule max_proposals(long long n) {
    if (n < 1) throw std::invalid_argument("max_proposals must be >= 1");
    return {Kind::MaxProposals, static_cast<double>(n)};
  }
  static StopRule max_epochs(double e) {
    if (!(e > 0)) throw std::invalid_argument("max_epochs must be positive");
    return {Kind::MaxEpochs, e};
  }
};

struct RunOptions {
  // Raw records every proposal time (switch or not); Switches keeps only
  // velocity changes plus the endpoints. The trajectory is identical.
  enum class Record { Raw, Switches };
  Record record = Record::Raw;
  std::uint64_t stream = 0;    // rng stream id; distinct per concurrent chain
  double bound_slack = 1e-9;   // tolerated relative excess in m/M before aborting
  // Ascending epoch budgets at which to record the process time (for
  // cost-versus-accuracy curves without storing raw skeletons).
  std::vector<double> epoch_marks;
};

struct RunReport {
  Skeleton skeleton;
  long long proposals = 0;
  long long accepted_switches = 0;
  long long bound_refreshes = 0;  // horizon exhaustions (not proposals)
  long long per_datum_evals = 0;
  double epochs = 0;
  double wall_time = 0;  // seconds
  std::vector<double> epoch_mark_times;
};

// Reference point for control variates: any fixed point works; efficiency
// is best near the posterior mode. grad_at_star must equal the full
// gradient of Psi at xi_star.
struct ReferencePoint {
  Vector xi_star;
  Vector grad_at_star;
  bool converged = true;
  double grad_norm = 0;
};

struct CvOptions {
  // Cache d Psi^j(xi*) for all (i,j) when d*n stays below this many
  // entries; otherwise the single needed term is recomputed per proposal
  // (one extra per-datum unit).
  long long cache_threshold = 100000000;
};

// Per-coordinate computational bounds valid along the segment starting at
// the given state: M_i(t) >= lambda_i(xi + theta t, theta) for t >= 0 (or
// up to the bound's horizon).
using BoundsFactory = std::function<std::vector<RateBound>(const PhaseState&)>;

namespace detail {

struct Candidate {
  Index coord = -1;
  double tau = std::numeric_limits<double>::infinity();
  bool horizon = false;
  bool none() const { return coord < 0; }
};

// One uniform per coordinate; ties broken toward the lowest index.
inline Candidate draw_candidate(const std::vector<RateBound>& bounds, Rng& rng) {
  Candidate best;
  for (Index i = 0; i < static_cast<Index>(bounds.size()); ++i) {
    const double u = rng.uniform();
    const FirstEvent ev = first_event_time(bounds[i], u);
    if (ev.kind == FirstEvent::Kind::Never) continue;
    if (best.none() || ev.time < best.tau)
      best = {i, ev.time, ev.kind == FirstEvent::Kind::HorizonExhausted};
  }
  return best;
}

struct MarkTracker {
  const std::vector<double>* marks = nullptr;
  std::vector<double>* times = nullptr;
  std::size_t next = 0;

  void init(const RunOptions& opt, RunReport& rep) {
    marks = &opt.epoch_marks;
    rep.epoch_mark_times.assign(marks->size(), std::numeric_limits<double>::quiet_NaN());
    times = &rep.epoch_mark_times;
  }
  void update(double epochs, double t) {
    while (next < marks->size() && epochs >= (*marks)[next]) (*times)[next++] = t;
  }
};

class WallTimer {
 public:
  WallTimer() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

inline void check_init(const TargetModel& model, const PhaseState& init) {
  if (init.position.size() != model.dim() || init.velocity.size() != model.dim())
    throw std::invalid_argument("initial state dimension does not match the model");
  if (!init.position.allFinite()) throw std::invalid_argument("initial position must be finite");
  if (!is_unit_velocity(init.velocity))
    throw std::invalid_argument("initial velocity entries must be exactly +-1");
}

inline bool stop_before_iteration(const StopRule& stop, const RunReport& rep, double epochs) {
  if (stop.kind == StopRule::Kind::MaxProposals)
    return rep.proposals >= static_cast<long long>(stop.limit);
  if (stop.kind == StopRule::Kind::MaxEpochs) return epochs >= stop.limit;
  return false;
}

}  // namespace detail

// Zig-Zag sampling by Poisson thinning with caller-supplied computational
// bounds, recomputed at every segment start. Each proposal costs one
// gradient component evaluation (n_data per-datum units).
inline RunReport simulate_zz(const TargetModel& model, const BoundsFactory& bounds_for,
                             const PhaseState& init, const StopRule& stop,
                             const RefreshRates& gamma = {}, std::uint64_t seed = 0,
                             const RunOptions& opt = {}) {
  detail::check_init(model, init);
  detail::WallTimer timer;
  ModelEval eval(model);
  Rng rng(seed, opt.stream);

  RunReport rep;
  rep.skeleton = Skeleton(model.dim());
  detail::MarkTracker marks;
  marks.init(opt, rep);

  Vector xi = init.position;
  Vector theta = init.velocity;
  double t = 0;
  rep.skeleton.append(t, xi, theta);

  while (!detail::stop_before_iteration(stop, rep, eval.epochs())) {
    const std::vector<RateBound> bounds = bounds_for(PhaseState{xi, theta});
    if (static_cast<Index>(bounds.size()) != model.dim())
      throw ConfigError("bounds factory returned wrong number of coordinates");
    const auto cand = detail::draw_candidate(bounds, rng);

    if (cand.none()) {
      if (stop.kind == StopRule::Kind::MaxTime) {
        xi += (stop.limit - t) * theta;
        t = stop.limit;
        rep.skeleton.append(t, xi, theta);
        break;
      }
      throw SimulationError("all coordinate rates vanish; the segment never ends");
    }
    if (stop.kind == StopRule::Kind::MaxTime && t + cand.tau >= stop.limit) {
      xi += (stop.limit - t) * theta;
      t = stop.limit;
      rep.skeleton.append(t, xi, theta);
      break;
    }

    t += cand.tau;
    xi += cand.tau * theta;

    if (cand.horizon) {  // re-evaluate local bounds and continue
      ++rep.bound_refreshes;
      if (opt.record == RunOptions::Record::Raw) rep.skeleton.append(t, xi, theta);
      continue;
    }

    const Index i0 = cand.coord;
    const double g = eval.grad_psi(xi, i0);
    if (!std::isfinite(g)) throw SimulationError("non-finite gradient during simulation");
    const double m = pos_part(theta[i0] * g) + gamma(xi, theta, i0);
    const double bound = bound_value(bounds[i0], cand.tau);
    if (m > bound * (1.0 + opt.bound_slack))
      throw BoundViolation({xi, theta}, i0, t, m, bound);

    ++rep.proposals;
    const bool switched = rng.uniform() * bound < m;
    if (switched) {
      theta = flip(theta, i0);
      ++rep.accepted_switches;
    }
    if (opt.record == RunOptions::Record::Raw || switched) rep.skeleton.append(t, xi, theta);
    marks.update(eval.epochs(), t);
  }

  if (opt.record == RunOptions::Record::Switches &&
      rep.skeleton.time(rep.skeleton.size() - 1) < t)
    rep.skeleton.append(t, xi, theta);

  rep.per_datum_evals = eval.per_datum_evals();
  rep.epochs = eval.epochs();
  rep.wall_time = timer.seconds();
  return rep;
}

// Zig-Zag for a negative log density with dominated Hessian: affine bounds
// M_i(t) = (a_i + b_i t)^+ with b_i = sqrt(d) ||Q e_i||_2, a_i tracking an
// upper bound of theta_i d_i Psi that is advanced by b_i tau at every
// proposal and reset to the freshly evaluated derivative on the proposed
// coordinate.
inline RunReport simulate_zz_hessian(const TargetModel& model, const PhaseState& init,
                                     const StopRule& stop, std::uint64_t seed = 0,
                                     const RunOptions& opt = {}) {
  detail::check_init(model, init);
  const auto q = model.hessian_dominator();
  if (!q) throw ConfigError("simulate_zz_hessian requires a Hessian dominator");
  detail::WallTimer timer;
  ModelEval eval(model);
  Rng rng(seed, opt.stream);

  const Index d = model.dim();
  Vector b(d);
  for (Index i = 0; i < d; ++i) b[i] = std::sqrt(static_cast<double>(d)) * q->col(i).norm();

  RunReport rep;
  rep.skeleton = Skeleton(d);
  detail::MarkTracker marks;
  marks.init(opt, rep);

  Vector xi = init.position;
  Vector theta = init.velocity;
  double t = 0;
  rep.skeleton.append(t, xi, theta);

  Vector a = theta.cwiseProduct(eval.full_grad(xi));
  marks.update(eval.epochs(), t);

  while (!detail::stop_before_iteration(stop, rep, eval.epochs())) {
    detail::Candidate cand;
    for (Index i = 0; i < d; ++i) {
      const double u = rng.uniform();
      const FirstEvent ev = first_event_time(AffinePlusRate{a[i], b[i]}, u);
      if (!ev.is_event()) continue;
      if (cand.none() || ev.time < cand.tau) cand = {i, ev.time, false};
    }

    if (cand.none()) {
      if (stop.kind == StopRule::Kind::MaxTime) {
        xi += (stop.limit - t) * theta;
        t = stop.limit;
        rep.skeleton.append(t, xi, theta);
        break;
      }
      throw SimulationError("all coordinate rates vanish; the segment never ends");
    }
    if (stop.kind == StopRule::Kind::MaxTime && t + cand.tau >= stop.limit) {
      xi += (stop.limit - t) * theta;
      t = stop.limit;
      rep.skeleton.append(t, xi, theta);
      break;
    }

    const double tau = cand.tau;
    const Index i0 = cand.coord;
    t += tau;
    xi += tau * theta;
    a += tau * b;

    const double g = eval.grad_psi(xi, i0);
    if (!std::isfinite(g)) throw SimulationError("non-finite gradient during simulation");
    const double m = pos_part(theta[i0] * g);
    const double bound = pos_part(a[i0]);
    if (m > bound * (1.0 + opt.bound_slack))
      throw BoundViolation({xi, theta}, i0, t, m, bound);

    ++rep.proposals;
    const bool switched = rng.uniform() * bound < m;
    if (switched) {
      theta = flip(theta, i0);
      ++rep.accepted_switches;
    }
    a[i0] = theta[i0] * g;  // re-uses the evaluation; exact at segment start
    if (opt.record == RunOptions::Record::Raw || switched) rep.skeleton.append(t, xi, theta);
    marks.update(eval.epochs(), t);
  }

  if (opt.record == RunOptions::Record::Switches &&
      rep.skeleton.time(rep.skeleton.size() - 1) < t)
    rep.skeleton.append(t, xi, theta);

  rep.per_datum_evals = eval.per_datum_evals();
  rep.epochs = eval.epochs();
  rep.wall_time = timer.seconds();
  return rep;
}

namespace detail {

// Horizon-constant bounds from model envelopes: per segment, pick
// h = 1/(total local rate scale) and cap each coordinate's rate by its
// monotone envelope evaluated over [0, h].
template <typename EnvelopeFn>
inline double fill_horizon_bounds(const PhaseState& s, Index d, const EnvelopeFn& envelope,
                                  std::vector<RateBound>& bounds) {
  double scale = 1e-12;
  for (Index i = 0; i < d; ++i) scale += envelope(s, i, 0.0);
  const double h = 1.0 / scale;
  for (Index i = 0; i < d; ++i) bounds[i] = HorizonConstRate{envelope(s, i, h), h};
  return h;
}

}  // namespace detail

// Zig-Zag with sub-sampling: at each proposal a single per-datum estimator
// E_{i0}^J at a uniformly drawn J decides the switch, so a proposal costs
// one per-datum unit. The effective switching rate averages the per-datum
// rates, and the invariant distribution is the exact posterior.
//
// Bounds: M_i = c_i from the model's global bounds when present; otherwise
// segment-local horizon-constant bounds from the model's estimator
// envelopes.
inline RunReport simulate_zz_ss(const TargetModel& model, const PhaseState& init,
                                const StopRule& stop, std::uint64_t seed = 0,
                                const RunOptions& opt = {}) {
  detail::check_init(model, init);
  const Index d = model.dim();
  const long long n = model.n_data();
  const auto global = model.global_bounds();
  if (!global && !model.estimator_envelope(init, 0, 0.0))
    throw ConfigError(
        "simulate_zz_ss requires per-datum global bounds or estimator envelopes");

  detail::WallTimer timer;
  ModelEval eval(model);
  Rng rng(seed, opt.stream);

  RunReport rep;
  rep.skeleton = Skeleton(d);
  detail::MarkTracker marks;
  marks.init(opt, rep);

  Vector xi = init.position;
  Vector theta = init.velocity;
  double t = 0;
  rep.skeleton.append(t, xi, theta);

  std::vector<RateBound> bounds(d);
  if (global)
    for (Index i = 0; i < d; ++i) bounds[i] = ConstantRate{(*global)[i]};
  auto envelope = [&model](const PhaseState& s, Index i, double h) {
    return *model.estimator_envelope(s, i, h);
  };

  while (!detail::stop_before_iteration(stop, rep, eval.epochs())) {
    if (!global) detail::fill_horizon_bounds({xi, theta}, d, envelope, bounds);
    const auto cand = detail::draw_candidate(bounds, rng);

    if (cand.none()) {
      if (stop.kind == StopRule::Kind::MaxTime) {
        xi += (stop.limit - t) * theta;
        t = stop.limit;
        rep.skeleton.append(t, xi, theta);
        break;
      }
      throw SimulationError("all coordinate rates vanish; the segment never ends");
    }
    if (stop.kind == StopRule::Kind::MaxTime && t + cand.tau >= stop.limit) {
      xi += (stop.limit - t) * theta;
      t = stop.limit;
      rep.skeleton.append(t, xi, theta);
      break;
    }

    t += cand.tau;
    xi += cand.tau * theta;

    if (cand.horizon) {
      ++rep.bound_refreshes;
      if (opt.record == RunOptions::Record::Raw) rep.skeleton.append(t, xi, theta);
      continue;
    }

    const Index i0 = cand.coord;
    const auto j = static_cast<long long>(rng.uniform_below(static_cast<std::uint64_t>(n)));
    const double e = eval.estimator(xi, i0, j);
    if (!std::isfinite(e)) throw SimulationError("non-finite estimator during simulation");
    const double m = pos_part(theta[i0] * e);
    const double bound = bound_value(bounds[i0], cand.tau);
    if (m > bound * (1.0 + opt.bound_slack))
      throw BoundViolation({xi, theta}, i0, t, m, bound);

    ++rep.proposals;
    const bool switched = rng.uniform() * bound < m;
    if (switched) {
      theta = flip(theta, i0);
      ++rep.accepted_switches;
    }
    if (opt.record == RunOptions::Record::Raw || switched) rep.skeleton.append(t, xi, theta);
    marks.update(eval.epochs(), t);
  }

  if (opt.record == RunOptions::Record::Switches &&
      rep.skeleton.time(rep.skeleton.size() - 1) < t)
    rep.skeleton.append(t, xi, theta);

  rep.per_datum_evals = eval.per_datum_evals();
  rep.epochs = eval.epochs();
  rep.wall_time = timer.seconds();
  return rep;
}

// Affine control-variate bounds a_i + b_i t with
// a_i = (theta_i d_i Psi(xi*))^+ + C_i ||xi - xi*||_p and b_i = C_i d^{1/p}.
inline std::vector<RateBound> cv_affine_bounds(const TargetModel& model,
                                               const ReferencePoint& ref,
                                               const PhaseState& s) {
  const auto lip = model.lipschitz();
  if (!lip) throw ConfigError("control-variate affine bounds require Lipschitz constants");
  const double dist = lp_norm(s.position - ref.xi_star, lip->p);
  const double dpow = std::isinf(lip->p)
                          ? 1.0
                          : std::pow(static_cast<double>(model.dim()), 1.0 / lip->p);
  std::vector<RateBound> bounds(model.dim());
  for (Index i = 0; i < model.dim(); ++i) {
    const double a = pos_part(s.velocity[i] * ref.grad_at_star[i]) + lip->constants[i] * dist;
    bounds[i] = AffinePlusRate{a, lip->constants[i] * dpow};
  }
  return bounds;
}

// Zig-Zag with control variates: per-datum estimators centred at a fixed
// reference point,
//   E_i^j(xi) = d_i Psi(xi*) + d_i Psi^j(xi) - d_i Psi^j(xi*),
// with bounds recomputed from ||xi - xi*||_p at every segment start. The
// one-off reference pass costs n per-datum units; afterwards each proposal
// costs one unit (two when the reference gradients cannot be cached).
// Exact for any reference point; models without Lipschitz constants fall
// back to horizon-constant bounds from their estimator envelopes.
inline RunReport simulate_zz_cv(const TargetModel& model, const ReferencePoint& ref,
                                const PhaseState& init, const StopRule& stop,
                                std::uint64_t seed = 0, const RunOptions& opt = {},
                                const CvOptions& cv = {}) {
  detail::check_init(model, init);
  if (ref.xi_star.size() != model.dim() || ref.grad_at_star.size() != model.dim())
    throw ConfigError("reference point dimension does not match the model");
  const Index d = model.dim();
  const long long n = model.n_data();
  const auto lip = model.lipschitz();
  if (!lip && !model.estimator_envelope(init, 0, 0.0))
    throw ConfigError(
        "simulate_zz_cv requires Lipschitz constants or estimator envelopes");

  detail::WallTimer timer;
  ModelEval eval(model);
  Rng rng(seed, opt.stream);

  // One-off reference pass (one sweep over the data): cache the per-datum
  // reference gradients when memory permits; always collect the per-datum
  // maxima needed by the envelope bounds.
  const bool cached = static_cast<long long>(d) * n <= cv.cache_threshold;
  Matrix ref_grads;
  Vector ref_env = Vector::Zero(d);
  if (cached || !lip) {
    if (cached) ref_grads.resize(d, n);
    for (long long j = 0; j < n; ++j) {
      const Vector ej = model.estimator_vec(ref.xi_star, j);
      if (cached) ref_grads.col(j) = ej;
      ref_env = ref_env.cwiseMax(ej.cwiseAbs());
    }
    eval.add_units(n);
  }

  RunReport rep;
  rep.skeleton = Skeleton(d);
  detail::MarkTracker marks;
  marks.init(opt, rep);

  Vector xi = init.position;
  Vector theta = init.velocity;
  double t = 0;
  rep.skeleton.append(t, xi, theta);
  marks.update(eval.epochs(), t);

  // |E_i^j| <= |d_i Psi(xi*)| + env_i + max_j |d_i Psi^j(xi*)|
  auto cv_envelope = [&](const PhaseState& s, Index i, double h) {
    return std::abs(ref.grad_at_star[i]) + ref_env[i] + *model.estimator_envelope(s, i, h);
  };

  std::vector<RateBound> bounds(d);
  while (!detail::stop_before_iteration(stop, rep, eval.epochs())) {
    if (lip)
      bounds = cv_affine_bounds(model, ref, {xi, theta});
    else
      detail::fill_horizon_bounds({xi, theta}, d, cv_envelope, bounds);
    const auto cand = detail::draw_candidate(bounds, rng);

    if (cand.none()) {
      if (stop.kind == StopRule::Kind::MaxTime) {
        xi += (stop.limit - t) * theta;
        t = stop.limit;
        rep.skeleton.append(t, xi, theta);
        break;
      }
      throw SimulationError("all coordinate rates vanish; the segment never ends");
    }
    if (stop.kind == StopRule::Kind::MaxTime && t + cand.tau >= stop.limit) {
      xi += (stop.limit - t) * theta;
      t = stop.limit;
      rep.skeleton.append(t, xi, theta);
      break;
    }

    t += cand.tau;
    xi += cand.tau * theta;

    if (cand.horizon) {
      ++rep.bound_refreshes;
      if (opt.record == RunOptions::Record::Raw) rep.skeleton.append(t, xi, theta);
      continue;
    }

    const Index i0 = cand.coord;
    const auto j = static_cast<long long>(rng.uniform_below(static_cast<std::uint64_t>(n)));
    const double at_star = cached ? ref_grads(i0, j) : eval.estimator(ref.xi_star, i0, j);
    const double e = ref.grad_at_star[i0] + eval.estimator(xi, i0, j) - at_star;
    if (!std::isfinite(e)) throw SimulationError("non-finite estimator during simulation");
    const double m = pos_part(theta[i0] * e);
    const double bound = bound_value(bounds[i0], cand.tau);
    if (m > bound * (1.0 + opt.bound_slack))
      throw BoundViolation({xi, theta}, i0, t, m, bound);

    ++rep.proposals;
    const bool switched = rng.uniform() * bound < m;
    if (switched) {
      theta = flip(theta, i0);
      ++rep.accepted_switches;
    }
    if (opt.record == RunOptions::Record::Raw || switched) rep.skeleton.append(t, xi, theta);
    marks.update(eval.epochs(), t);
  }

  if (opt.record == RunOptions::Record::Switches &&
      rep.skeleton.time(rep.skeleton.size() - 1) < t)
    rep.skeleton.append(t, xi, theta);

  rep.per_datum_evals = eval.per_datum_evals();
  rep.epochs = eval.epochs();
  rep.wall_time = timer.seconds();
  return rep;
}

// Builds a reference point at a given location (one full-gradient pass).
inline ReferencePoint make_reference(const TargetModel& model, const Vector& xi_star) {
  ReferencePoint ref;
  ref.xi_star = xi_star;
  ref.grad_at_star = model.full_grad(xi_star);
  ref.grad_norm = ref.grad_at_star.norm();
  return ref;
}

// Approximate mode finding for the control-variate reference point:
// Q-preconditioned descent when a Hessian dominator is available (for
// convex Psi with H <= Q this is a majorization step and converges
// monotonically; exact in one step for quadratics), otherwise gradient
// descent with Armijo backtracking. Pre-processing cost, O(n) per
// iteration; not part of any run's epoch accounting. Non-convergence is
// flagged, not fatal: ZZ-CV remains exact for any reference point.
inline ReferencePoint find_reference(const TargetModel& model, const Vector& init,
                                     double tol = 1e-8, int max_iters = 200) {
  Vector xi = init;
  Vector g = model.full_grad(xi);
  const auto q = model.hessian_dominator();
  Eigen::LDLT<Matrix> ldlt;
  if (q) ldlt.compute(*q);

  int iter = 0;
  for (; iter < max_iters && g.norm() > tol; ++iter) {
    if (q) {
      xi -= ldlt.solve(g);
    } else {
      const double psi0 = model.psi(xi);
      const double g2 = g.squaredNorm();
      double step = 1.0 / std::max(1.0, g.norm());
      Vector trial = xi - step * g;
      for (int k = 0; k < 60 && model.psi(trial) > psi0 - 0.5 * step * g2; ++k) {
        step *= 0.5;
        trial = xi - step * g;
      }
      xi = trial;
    }
    g = model.full_grad(xi);
  }

  ReferencePoint ref;
  ref.xi_star = xi;
  ref.grad_at_star = g;
  ref.grad_norm = g.norm();
  ref.converged = ref.grad_norm <= tol;
  return ref;
}

// ZZ-CV starts at the reference point unless told otherwise.
inline PhaseState cv_default_init(const ReferencePoint& ref) {
  return {ref.xi_star, Vector::Ones(ref.xi_star.size())};
}

// Constant bounds M_i = c_i (+ constant refresh) from global gradient
// bounds; valid whenever |d_i Psi| <= c_i everywhere.
inline BoundsFactory constant_bound_factory(const TargetModel& model,
                                            const RefreshRates& gamma = {}) {
  const auto global = model.global_bounds();
  if (!global) throw ConfigError("model provides no global bounds");
  if (!gamma.is_constant())
    throw ConfigError("built-in factories support constant refresh rates only");
  std::vector<RateBound> bounds(model.dim());
  for (Index i = 0; i < model.dim(); ++i)
    bounds[i] = ConstantRate{(*global)[i] + gamma.constant_part(i)};
  return [bounds](const PhaseState&) { return bounds; };
}

// Segment-local horizon-constant bounds from the model's full-gradient
// envelopes (for targets with unbounded Hessian).
inline BoundsFactory horizon_bound_factory(const TargetModel& model,
                                           const RefreshRates& gamma = {}) {
  if (!gamma.is_constant())
    throw ConfigError("built-in factories support constant refresh rates only");
  Vector gconst(model.dim());
  for (Index i = 0; i < model.dim(); ++i) gconst[i] = gamma.constant_part(i);
  const Index d = model.dim();
  return [&model, gconst, d](const PhaseState& s) {
    std::vector<RateBound> bounds(d);
    double scale = 1e-12;
    for (Index i = 0; i < d; ++i) {
      const auto env = model.grad_envelope(s, i, 0.0);
      if (!env) throw ConfigError("model provides no gradient envelope");
      scale += *env + gconst[i];
    }
    const double h = 1.0 / scale;
    for (Index i = 0; i < d; ++i)
      bounds[i] = HorizonConstRate{*model.grad_envelope(s, i, h) + gconst[i], h};
    return bounds;
  };
}

// Affine bounds a_i = theta_i d_i Psi(xi) + b_i t from a caller-supplied
// closed-form gradient (no per-datum cost) and fixed slopes b_i satisfying
// theta_i d_i Psi(xi + theta t) <= theta_i d_i Psi(xi) + b_i t. Exact for
// Gaussian targets with b_i the Hessian row scale. A constant refresh
// loosens the bound to (a^+ + gamma_i) + b_i t, which still dominates
// (a + b t)^+ + gamma_i.
inline BoundsFactory affine_bound_factory(std::function<Vector(const PhaseState&)> grad_at,
                                          Vector slopes, const RefreshRates& gamma = {}) {
  if (!gamma.is_constant())
    throw ConfigError("built-in factories support constant refresh rates only");
  return [grad_at = std::move(grad_at), slopes = std::move(slopes), gamma](const PhaseState& s) {
    const Vector g = grad_at(s);
    std::vector<RateBound> bounds(static_cast<std::size_t>(slopes.size()));
    for (Index i = 0; i < slopes.size(); ++i) {
      const double a = s.velocity[i] * g[i];
      const double gi = gamma.constant_part(i);
      bounds[static_cast<std::size_t>(i)] =
          gi > 0 ? RateBound(AffinePlusRate{pos_part(a) + gi, slopes[i]})
                 : RateBound(AffinePlusRate{a, slopes[i]});
    }
    return bounds;
  };
}

}  // namespace zigzag
