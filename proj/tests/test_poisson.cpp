#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "zigzag/poisson.hpp"
#include "zigzag/rng.hpp"
#include "zigzag/stats.hpp"

using namespace zigzag;

namespace {

// Independent oracle: adaptive Simpson quadrature of the pointwise bound.
double quadrature_integral(const RateBound& bound, double t) {
  long n = 64;
  double prev = 0;
  for (int refine = 0; refine < 20; ++refine) {
    double acc = 0;
    const double h = t / static_cast<double>(n);
    for (long k = 0; k < n; ++k) {
      const double a = h * static_cast<double>(k);
      acc += h / 6.0 *
             (bound_value(bound, a) + 4.0 * bound_value(bound, a + 0.5 * h) +
              bound_value(bound, a + h));
    }
    if (refine > 2 && std::abs(acc - prev) < 1e-12 * (1.0 + std::abs(acc))) return acc;
    prev = acc;
    n *= 2;
  }
  return prev;
}

// Independent oracle: bisection on H(t) = y using the quadrature integral.
double bisect_inverse(const RateBound& bound, double y, double hi) {
  double lo = 0;
  for (int k = 0; k < 200; ++k) {
    const double mid = 0.5 * (lo + hi);
    if (quadrature_integral(bound, mid) < y)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("bound_value evaluates each family pointwise") {
  CHECK(bound_value(AffinePlusRate{-1, 1}, 0.5) == 0.0);
  CHECK(bound_value(AffinePlusRate{-1, 1}, 3.0) == 2.0);
  CHECK(bound_value(MinConstAffineRate{1, 0, 2}, 3.0) == 1.0);
  CHECK(bound_value(ConstantRate{2.5}, 7.0) == 2.5);
  CHECK(bound_value(HorizonConstRate{2.0, 1.0}, 0.5) == 2.0);
  CHECK_THROWS_AS(bound_value(HorizonConstRate{2.0, 1.0}, 1.5), std::domain_error);
}

TEST_CASE("integrated_rate matches closed forms and quadrature oracle") {
  CHECK(integrated_rate(ConstantRate{2}, 3.0) == Catch::Approx(6.0));
  CHECK(integrated_rate(AffinePlusRate{-1, 1}, 3.0) == Catch::Approx(2.0));
  // quadratic up to t=1, linear afterwards
  CHECK(integrated_rate(MinConstAffineRate{1, 0, 1}, 2.0) == Catch::Approx(1.5));
  CHECK(integrated_rate(AffinePlusRate{3, -2}, 10.0) == Catch::Approx(9.0 / 4.0));

  Rng rng(20240811);
  std::vector<RateBound> families;
  for (int k = 0; k < 40; ++k) {
    const double a = 4.0 * (rng.uniform() - 0.5);
    const double b = 4.0 * (rng.uniform() - 0.5);
    const double c = 2.0 * rng.uniform();
    families.push_back(ConstantRate{c});
    families.push_back(AffinePlusRate{a, b});
    families.push_back(MinConstAffineRate{c, a, b});
    families.push_back(HorizonConstRate{c + 0.01, 1.0 + 3.0 * rng.uniform()});
  }
  for (const auto& bound : families) {
    double t_hi = 5.0;
    if (const auto* h = std::get_if<HorizonConstRate>(&bound)) t_hi = h->t_max;
    for (double frac : {0.1, 0.37, 0.8, 1.0}) {
      const double t = frac * t_hi;
      CHECK(integrated_rate(bound, t) ==
            Catch::Approx(quadrature_integral(bound, t)).margin(1e-9));
    }
  }
}

TEST_CASE("first_event_time inverts the integrated rate exactly") {
  // closed-form spot checks
  const auto e1 = first_event_time(ConstantRate{2}, std::exp(-1.0));
  REQUIRE(e1.is_event());
  CHECK(e1.time == Catch::Approx(0.5));

  const auto e2 = first_event_time(AffinePlusRate{0, 1}, std::exp(-2.0));
  REQUIRE(e2.is_event());
  CHECK(e2.time == Catch::Approx(2.0));

  // dead time until t=1, then quadratic growth; root-finding oracle agrees
  const auto e3 = first_event_time(AffinePlusRate{-1, 1}, std::exp(-2.0));
  REQUIRE(e3.is_event());
  CHECK(e3.time == Catch::Approx(3.0));
  CHECK(e3.time == Catch::Approx(bisect_inverse(AffinePlusRate{-1, 1}, 2.0, 10.0)).margin(1e-8));

  SECTION("inversion consistency over random draws and parameters") {
    Rng rng(777);
    for (int variant = 0; variant < 4; ++variant) {
      int checked = 0;
      while (checked < 1000) {
        const double a = 6.0 * (rng.uniform() - 0.5);
        const double b = 6.0 * (rng.uniform() - 0.5);
        const double c = 3.0 * rng.uniform();
        RateBound bound = ConstantRate{c};
        if (variant == 1) bound = AffinePlusRate{a, b};
        if (variant == 2) bound = MinConstAffineRate{c, a, b};
        if (variant == 3) bound = HorizonConstRate{c, 0.5 + 4.0 * rng.uniform()};
        const double u = rng.uniform();
        const auto ev = first_event_time(bound, u);
        if (!ev.is_event()) continue;
        CHECK(integrated_rate(bound, ev.time) == Catch::Approx(-std::log(u)).margin(1e-10));
        ++checked;
      }
    }
  }
}

TEST_CASE("first_event_time classifies Never and HorizonExhausted") {
  CHECK(first_event_time(ConstantRate{0}, 0.5).kind == FirstEvent::Kind::Never);
  CHECK(first_event_time(AffinePlusRate{-1, 0}, 0.5).kind == FirstEvent::Kind::Never);
  CHECK(first_event_time(AffinePlusRate{-1, -1}, 0.5).kind == FirstEvent::Kind::Never);

  // decreasing rate with finite mass a^2/(2|b|) = 0.5: exhausted for small u
  const auto never = first_event_time(AffinePlusRate{1, -1}, std::exp(-1.0));
  CHECK(never.kind == FirstEvent::Kind::Never);
  const auto ok = first_event_time(AffinePlusRate{1, -1}, std::exp(-0.25));
  REQUIRE(ok.is_event());
  CHECK(integrated_rate(AffinePlusRate{1, -1}, ok.time) == Catch::Approx(0.25).margin(1e-12));

  const auto horizon = first_event_time(HorizonConstRate{1.0, 2.0}, std::exp(-3.0));
  CHECK(horizon.kind == FirstEvent::Kind::HorizonExhausted);
  CHECK(horizon.time == Catch::Approx(2.0));
  const auto inside = first_event_time(HorizonConstRate{1.0, 2.0}, std::exp(-1.5));
  REQUIRE(inside.is_event());
  CHECK(inside.time == Catch::Approx(1.5));

  CHECK_THROWS_AS(first_event_time(ConstantRate{1}, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(first_event_time(ConstantRate{1}, 1.0), std::invalid_argument);
}

TEST_CASE("first event times are monotone in the uniform draw") {
  Rng rng(31415);
  for (int k = 0; k < 500; ++k) {
    const double a = 6.0 * (rng.uniform() - 0.5);
    const double b = 6.0 * (rng.uniform() - 0.5);
    const double c = 3.0 * rng.uniform();
    const int variant = k % 3;
    RateBound bound = ConstantRate{c};
    if (variant == 1) bound = AffinePlusRate{a, b};
    if (variant == 2) bound = MinConstAffineRate{c, a, b};
    double u1 = rng.uniform(), u2 = rng.uniform();
    if (u1 > u2) std::swap(u1, u2);  // u1 < u2 => larger exponential draw for u1
    const auto t1 = first_event_time(bound, u1);
    const auto t2 = first_event_time(bound, u2);
    if (!t2.is_event()) {
      CHECK(!t1.is_event());  // less mass consumed can only push the event later
    } else if (t1.is_event()) {
      CHECK(t1.time >= t2.time);
    }
  }
}

TEST_CASE("simulated exponential event times match the target distribution") {
  const double c = 1.7;
  Rng rng(99);
  std::vector<double> draws;
  draws.reserve(100000);
  for (int k = 0; k < 100000; ++k) {
    const auto ev = first_event_time(ConstantRate{c}, rng.uniform());
    REQUIRE(ev.is_event());
    draws.push_back(ev.time);
  }
  const auto ks = ks_test(std::move(draws), [c](double t) { return 1.0 - std::exp(-c * t); });
  CHECK(ks.statistic < ks_critical(0.001, 100000));
}

TEST_CASE("thinning a dominating bound reproduces the target rate") {
  // target rate m(t) = 0.5 + 0.3 t + 0.2 t^2, dominated by 2 + 2t on [0, 9]
  const auto m = [](double t) { return 0.5 + 0.3 * t + 0.2 * t * t; };
  const auto m_integral = [](double t) {
    return 0.5 * t + 0.15 * t * t + 0.2 * t * t * t / 3.0;
  };
  const double a = 2.0, b = 2.0;  // M(t) = a + b t >= m(t) on [0, 9]

  Rng rng(2718);
  std::vector<double> first_events;
  first_events.reserve(100000);
  while (first_events.size() < 100000) {
    double t = 0;
    for (;;) {
      // bound process restarted at the current time: rate s -> M(t + s)
      const auto ev = first_event_time(AffinePlusRate{a + b * t, b}, rng.uniform());
      REQUIRE(ev.is_event());
      t += ev.time;
      REQUIRE(t < 9.0);  // dominance verified on the region that matters
      const double ratio = m(t) / (a + b * t);
      REQUIRE(ratio <= 1.0);
      if (rng.uniform() < ratio) break;
    }
    first_events.push_back(t);
  }
  const auto ks = ks_test(std::move(first_events),
                          [&](double t) { return 1.0 - std::exp(-m_integral(t)); });
  CHECK(ks.statistic < ks_critical(0.001, 100000));
}
