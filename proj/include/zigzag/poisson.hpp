#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <variant>

namespace zigzag {

// Closed-form rate bounds M(t) for inhomogeneous Poisson first-event
// simulation. Only these four families are supported; each has an exactly
// invertible integrated rate H(t) = \int_0^t M(s) ds.

struct ConstantRate {
  double c;  // M(t) = c, c >= 0
};

struct AffinePlusRate {
  double a;
  double b;  // M(t) = (a + b t)^+, b of either sign
};

struct MinConstAffineRate {
  double c;  // M(t) = min(c, (a + b t)^+), c >= 0
  double a;
  double b;
};

struct HorizonConstRate {
  double c;      // M(t) = c on [0, t_max] only
  double t_max;  // > 0
};

using RateBound =
    std::variant<ConstantRate, AffinePlusRate, MinConstAffineRate, HorizonConstRate>;

// Outcome of inverting H at an exponential draw. A Never means the total
// mass H(inf) is below the draw (the bound rate dies out); an exhausted
// horizon means the caller must re-evaluate local bounds at t_max and
// continue from there.
struct FirstEvent {
  enum class Kind { Event, Never, HorizonExhausted };
  Kind kind = Kind::Never;
  double time = std::numeric_limits<double>::infinity();

  static FirstEvent event(double t) { return {Kind::Event, t}; }
  static FirstEvent never() { return {}; }
  static FirstEvent horizon(double t_max) { return {Kind::HorizonExhausted, t_max}; }
  bool is_event() const { return kind == Kind::Event; }
};

namespace detail {

// Affine rate piece r(t) = r0 + slope * (t - t0) on [t0, t1), with t1 given
// by the next piece (the last piece extends to infinity). All four bound
// families decompose into at most three nonnegative pieces.
struct RatePiece {
  double t0;
  double r0;
  double slope;
};

struct PieceSet {
  std::array<RatePiece, 3> piece{};
  int count = 0;
  double horizon = std::numeric_limits<double>::infinity();

  void push(double t0, double r0, double slope) { piece[count++] = {t0, r0, slope}; }
  double end(int k) const { return k + 1 < count ? piece[k + 1].t0 : horizon; }
};

inline void require_finite(double x, const char* what) {
  if (!std::isfinite(x)) throw std::invalid_argument(std::string("non-finite rate bound parameter: ") + what);
}

inline PieceSet decompose(const RateBound& bound) {
  PieceSet ps;
  if (const auto* r = std::get_if<ConstantRate>(&bound)) {
    require_finite(r->c, "c");
    if (r->c < 0) throw std::invalid_argument("constant rate must be nonnegative");
    ps.push(0, r->c, 0);
  } else if (const auto* r = std::get_if<AffinePlusRate>(&bound)) {
    require_finite(r->a, "a");
    require_finite(r->b, "b");
    const double a = r->a, b = r->b;
    if (b > 0) {
      if (a >= 0) {
        ps.push(0, a, b);
      } else {
        ps.push(0, 0, 0);
        ps.push(-a / b, 0, b);
      }
    } else if (b == 0) {
      ps.push(0, a > 0 ? a : 0.0, 0);
    } else {  // b < 0: decreasing, dies at -a/b
      if (a <= 0) {
        ps.push(0, 0, 0);
      } else {
        ps.push(0, a, b);
        ps.push(a / -b, 0, 0);
      }
    }
  } else if (const auto* r = std::get_if<MinConstAffineRate>(&bound)) {
    require_finite(r->c, "c");
    require_finite(r->a, "a");
    require_finite(r->b, "b");
    if (r->c < 0) throw std::invalid_argument("cap of min(c,(a+bt)+) must be nonnegative");
    const double c = r->c, a = r->a, b = r->b;
    if (c == 0) {
      ps.push(0, 0, 0);
    } else if (b > 0) {
      if (a >= c) {
        ps.push(0, c, 0);
      } else if (a >= 0) {
        ps.push(0, a, b);
        ps.push((c - a) / b, c, 0);
      } else {
        ps.push(0, 0, 0);
        ps.push(-a / b, 0, b);
        ps.push((c - a) / b, c, 0);
      }
    } else if (b == 0) {
      ps.push(0, std::min(c, a > 0 ? a : 0.0), 0);
    } else {  // b < 0
      if (a <= 0) {
        ps.push(0, 0, 0);
      } else if (a <= c) {
        ps.push(0, a, b);
        ps.push(a / -b, 0, 0);
      } else {
        ps.push(0, c, 0);
        ps.push((c - a) / b, c, b);
        ps.push(a / -b, 0, 0);
      }
    }
  } else {
    const auto& hr = std::get<HorizonConstRate>(bound);
    require_finite(hr.c, "c");
    require_finite(hr.t_max, "t_max");
    if (hr.c < 0) throw std::invalid_argument("horizon rate must be nonnegative");
    if (hr.t_max <= 0) throw std::invalid_argument("horizon must be positive");
    ps.push(0, hr.c, 0);
    ps.horizon = hr.t_max;
  }
  return ps;
}

inline double piece_rate(const RatePiece& p, double t) {
  const double r = p.r0 + p.slope * (t - p.t0);
  return r > 0 ? r : 0.0;
}

inline double piece_mass(const RatePiece& p, double dt) {
  return dt * (p.r0 + 0.5 * p.slope * dt);
}

// Solves r0*d + slope*d^2/2 = y for the smallest d >= 0, assuming the rate
// stays nonnegative on the piece. Uses the cancellation-free quadratic form.
inline double invert_piece(const RatePiece& p, double y) {
  if (y <= 0) return 0.0;
  if (p.slope == 0) return y / p.r0;
  double disc = p.r0 * p.r0 + 2.0 * p.slope * y;
  if (disc < 0) disc = 0;  // only at the exact endpoint of a dying piece
  return 2.0 * y / (p.r0 + std::sqrt(disc));
}

}  // namespace detail

// Pointwise evaluation of the bound. Direct formulas, kept independent of
// the piece decomposition used for integration so tests can cross-check.
inline double bound_value(const RateBound& bound, double t) {
  if (t < 0) throw std::domain_error("bound_value: negative time");
  if (const auto* r = std::get_if<ConstantRate>(&bound)) return r->c;
  if (const auto* r = std::get_if<AffinePlusRate>(&bound)) {
    const double v = r->a + r->b * t;
    return v > 0 ? v : 0.0;
  }
  if (const auto* r = std::get_if<MinConstAffineRate>(&bound)) {
    const double v = r->a + r->b * t;
    return std::min(r->c, v > 0 ? v : 0.0);
  }
  const auto& r = std::get<HorizonConstRate>(bound);
  if (t > r.t_max) throw std::domain_error("bound_value: beyond horizon");
  return r.c;
}

// H(t) = \int_0^t M(s) ds, exact. Nondecreasing, H(0) = 0.
inline double integrated_rate(const RateBound& bound, double t) {
  if (t < 0) throw std::domain_error("integrated_rate: negative time");
  const auto ps = detail::decompose(bound);
  if (t > ps.horizon) throw std::domain_error("integrated_rate: beyond horizon");
  double h = 0;
  for (int k = 0; k < ps.count; ++k) {
    const auto& p = ps.piece[k];
    if (t <= p.t0) break;
    const double upto = std::min(t, ps.end(k));
    h += detail::piece_mass(p, upto - p.t0);
  }
  return h;
}

// First event time of a Poisson process with rate M, by CDF inversion:
// returns G(-log u) where G(y) = inf{t : H(t) >= y} and u ~ Uniform(0,1).
inline FirstEvent first_event_time(const RateBound& bound, double u) {
  if (!(u > 0.0 && u < 1.0)) throw std::invalid_argument("first_event_time: u must lie in (0,1)");
  const double y = -std::log(u);
  const auto ps = detail::decompose(bound);
  double h = 0;
  for (int k = 0; k < ps.count; ++k) {
    const auto& p = ps.piece[k];
    const double t1 = ps.end(k);
    const bool unbounded = std::isinf(t1);
    if (unbounded && p.slope == 0 && p.r0 == 0) break;  // no mass left
    const double mass = unbounded ? std::numeric_limits<double>::infinity()
                                  : detail::piece_mass(p, t1 - p.t0);
    if (y <= h + mass) {
      const double t = p.t0 + detail::invert_piece(p, y - h);
      return FirstEvent::event(std::min(t, t1));
    }
    h += mass;
  }
  if (std::isfinite(ps.horizon)) return FirstEvent::horizon(ps.horizon);
  return FirstEvent::never();
}

}  // namespace zigzag
