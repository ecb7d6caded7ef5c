#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "zigzag/analysis.hpp"
#include "zigzag/core.hpp"
#include "zigzag/models.hpp"
#include "zigzag/rng.hpp"
#include "zigzag/samplers.hpp"
#include "zigzag/stats.hpp"

using namespace zigzag;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Index>(xs.size()));
  Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

Skeleton random_skeleton(Index d, int points, Rng& rng) {
  Skeleton skel(d);
  Vector pos = Vector::Zero(d);
  Vector vel(d);
  for (Index i = 0; i < d; ++i) vel[i] = rng.uniform() < 0.5 ? -1.0 : 1.0;
  double t = 0;
  skel.append(t, pos, vel);
  for (int k = 1; k < points; ++k) {
    const double dt = 0.05 + rng.uniform();
    t += dt;
    pos += dt * vel;
    vel = flip(vel, static_cast<Index>(rng.uniform_below(static_cast<std::uint64_t>(d))));
    skel.append(t, pos, vel);
  }
  return skel;
}

// Slopes above the exact Hessian keep the bound valid while forcing some
// rejected proposals, so raw and pruned skeletons genuinely differ.
RunReport gaussian_run(std::uint64_t seed, long long proposals = 20000) {
  ProductGaussianModel model(vec({1.0}));
  Vector slopes(1);
  slopes[0] = 1.4;
  const auto factory = affine_bound_factory(
      [&model](const PhaseState& s) { return model.full_grad(s.position); }, slopes);
  return simulate_zz(model, factory, {vec({0.0}), vec({1.0})},
                     StopRule::max_proposals(proposals), {}, seed);
}

}  // namespace

TEST_CASE("sample_trajectory: equally spaced exact interpolation") {
  Skeleton line(1);
  line.append(0.0, vec({0.0}), vec({1.0}));
  line.append(4.0, vec({4.0}), vec({1.0}));

  const auto two = sample_trajectory(line, 2);
  CHECK(two.times == std::vector<double>{2.0, 4.0});
  CHECK(two.positions(0, 0) == 2.0);
  CHECK(two.positions(1, 0) == 4.0);

  CHECK_THROWS_AS(sample_trajectory(Skeleton(1), 10), std::invalid_argument);
  CHECK_THROWS_AS(sample_trajectory(line, 0), std::invalid_argument);

  SECTION("samples sit on the correct segments of a random skeleton") {
    Rng rng(31);
    const auto skel = random_skeleton(2, 50, rng);
    const auto set = sample_trajectory(skel, 49);
    for (std::size_t k = 0; k < set.size(); ++k) {
      const auto expect = position_at(skel, set.times[k]);
      CHECK((set.positions.row(static_cast<Index>(k)).transpose() - expect.position)
                .cwiseAbs()
                .maxCoeff() < 1e-12);
    }
    const auto coord = sample_coordinate(skel, 1, 49);
    for (std::size_t k = 0; k < coord.size(); ++k)
      CHECK(coord[k] == set.positions(static_cast<Index>(k), 1));
  }
}

TEST_CASE("integrate_moment: closed-form segment integrals") {
  Skeleton seg(1);
  seg.append(0.0, vec({0.0}), vec({1.0}));
  seg.append(2.0, vec({2.0}), vec({1.0}));
  CHECK(integrate_moment(seg, 0, 1) == Catch::Approx(1.0));
  CHECK(integrate_moment(seg, 0, 2) == Catch::Approx(4.0 / 3.0));
  CHECK_THROWS_AS(integrate_moment(seg, 0, 3), std::invalid_argument);

  SECTION("matches a fine Riemann sum on a random skeleton") {
    Rng rng(32);
    const auto skel = random_skeleton(2, 60, rng);
    for (const int p : {1, 2}) {
      for (const Index coord : {Index{0}, Index{1}}) {
        const long long grid = 1000000;
        double riemann = 0;
        const double dt = skel.total_time() / static_cast<double>(grid);
        for (long long k = 0; k < grid; ++k) {
          const double x =
              position_at(skel, (static_cast<double>(k) + 0.5) * dt).position[coord];
          riemann += (p == 1 ? x : x * x) * dt;
        }
        riemann /= skel.total_time();
        CHECK(integrate_moment(skel, coord, p) == Catch::Approx(riemann).margin(1e-6));
      }
    }
  }
}

TEST_CASE("moment_prefix agrees with whole-trajectory integration") {
  Rng rng(33);
  const auto skel = random_skeleton(1, 40, rng);
  const std::vector<double> cuts = {0.3 * skel.total_time(), 0.7 * skel.total_time(),
                                    skel.total_time()};
  for (const int p : {1, 2}) {
    const auto prefix = moment_prefix(skel, 0, p, cuts);
    CHECK(prefix.back() == Catch::Approx(integrate_moment(skel, 0, p)).margin(1e-12));
    // truncated skeletons as oracle for interior cuts
    for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
      Skeleton cut_skel(1);
      for (std::size_t k = 0; k < skel.size() && skel.time(k) < cuts[c]; ++k)
        cut_skel.append(skel.time(k), skel.position(k), skel.velocity(k));
      const auto end = position_at(skel, cuts[c]);
      cut_skel.append(cuts[c], end.position, end.velocity);
      CHECK(prefix[c] == Catch::Approx(integrate_moment(cut_skel, 0, p)).margin(1e-10));
    }
  }
}

TEST_CASE("estimators are invariant to switch pruning") {
  const auto report = gaussian_run(34);
  const auto pruned = prune_switches(report.skeleton);
  CHECK(pruned.size() < report.skeleton.size());
  CHECK(validate_skeleton(pruned).ok);

  for (const int p : {1, 2})
    CHECK(integrate_moment(report.skeleton, 0, p) ==
          Catch::Approx(integrate_moment(pruned, 0, p)).margin(1e-10));

  const auto a = sample_coordinate(report.skeleton, 0, 1000, 0.1);
  const auto b = sample_coordinate(pruned, 0, 1000, 0.1);
  for (std::size_t k = 0; k < a.size(); ++k) CHECK(a[k] == Catch::Approx(b[k]).margin(1e-9));
}

TEST_CASE("time integrals agree with discretized sample averages") {
  const auto report = gaussian_run(35, 50000);
  for (const int p : {1, 2}) {
    const auto samples = sample_coordinate(report.skeleton, 0, 100000);
    std::vector<double> powered(samples.size());
    for (std::size_t k = 0; k < samples.size(); ++k)
      powered[k] = p == 1 ? samples[k] : samples[k] * samples[k];
    const auto e = ess(powered);
    REQUIRE(e.defined);
    const double se = std::sqrt(variance_of(powered) / e.ess);
    CHECK(std::abs(integrate_moment(report.skeleton, 0, p) - mean_of(powered)) <= 4.0 * se);
  }
}

TEST_CASE("ess: iid series, AR(1) series, degenerate series") {
  Rng rng(36);
  std::vector<double> iid(10000);
  for (auto& x : iid) x = rng.normal();
  const auto e_iid = ess(iid);
  REQUIRE(e_iid.defined);
  CHECK(e_iid.ess / 10000.0 > 0.8);
  CHECK(e_iid.ess / 10000.0 <= 1.2);

  // AR(1) with coefficient 0.9: ESS/m should approach (1-0.9)/(1+0.9)
  std::vector<double> ar(100000);
  double x = 0;
  const double coef = 0.9, noise = std::sqrt(1.0 - coef * coef);
  for (auto& v : ar) {
    x = coef * x + noise * rng.normal();
    v = x;
  }
  const auto e_ar = ess(ar);
  REQUIRE(e_ar.defined);
  const double expect = (1.0 - coef) / (1.0 + coef);
  CHECK(e_ar.ess / 100000.0 > expect / 2.0);
  CHECK(e_ar.ess / 100000.0 < expect * 2.0);

  const std::vector<double> constant(500, 3.14);
  CHECK_FALSE(ess(constant).defined);

  const std::vector<double> short_series(50, 1.0);
  CHECK_THROWS_AS(ess(short_series), std::invalid_argument);
}

TEST_CASE("mala: tuned acceptance, conjugate moments, ESS per epoch at most one") {
  const auto model = synth_gaussian(100, 1.0, 1.0, 401);
  const auto result = mala(model, 0.5, 20000, vec({model.posterior_mean()}), 41);
  CHECK(result.accept_rate >= 0.5);
  CHECK(result.accept_rate <= 0.65);
  CHECK(result.epochs == 20000.0);

  std::vector<double> chain(static_cast<std::size_t>(result.chain.rows()));
  for (Index k = 0; k < result.chain.rows(); ++k)
    chain[static_cast<std::size_t>(k)] = result.chain(k, 0);
  const auto e = ess(chain);
  REQUIRE(e.defined);
  CHECK(e.ess / result.epochs <= 1.0);  // one epoch per MH iteration

  const double se = std::sqrt(variance_of(chain) / e.ess);
  CHECK(std::abs(mean_of(chain) - model.posterior_mean()) <= 4.0 * se);
  std::vector<double> squared(chain.size());
  for (std::size_t k = 0; k < chain.size(); ++k) squared[k] = chain[k] * chain[k];
  const auto e2 = ess(squared);
  const double truth2 =
      model.posterior_variance() + model.posterior_mean() * model.posterior_mean();
  CHECK(std::abs(mean_of(squared) - truth2) <=
        4.0 * std::sqrt(variance_of(squared) / e2.ess));
}

TEST_CASE("mala: vanishing step accepts everything") {
  const auto model = synth_gaussian(50, 1.0, 1.0, 402);
  const auto result = mala(model, 1e-6, 2000, vec({0.0}), 42, 0);  // no tuning
  CHECK(result.accept_rate > 0.999);
}

TEST_CASE("sgld: unbiased first moment, biased second moment at fixed step") {
  const auto model = synth_gaussian(100, 1.0, 1.0, 403);
  const double precision = model.precision();
  const double h = 1.0 / precision;  // strong, still stable (hP = 1)

  // exact gradient (batch = n) isolates the discretization bias
  const auto result = sgld(model, h, 100, 200000, vec({model.posterior_mean()}), 43);
  REQUIRE_FALSE(result.diverged);
  CHECK(result.epochs == Catch::Approx(200000.0));

  std::vector<double> chain(static_cast<std::size_t>(result.chain.rows()));
  for (Index k = 0; k < result.chain.rows(); ++k)
    chain[static_cast<std::size_t>(k)] = result.chain(k, 0);
  const auto e = ess(chain);
  REQUIRE(e.defined);
  const double se = std::sqrt(variance_of(chain) / e.ess);
  CHECK(std::abs(mean_of(chain) - model.posterior_mean()) <= 4.0 * se);

  // stationary variance inflates to s^2 / (1 - hP/4); the bias is visible
  double second = 0;
  for (double v : chain) second += v * v;
  second /= static_cast<double>(chain.size());
  const double truth2 =
      model.posterior_variance() + model.posterior_mean() * model.posterior_mean();
  const double expected_bias = model.posterior_variance() / 3.0;
  CHECK(second - truth2 > 0.3 * expected_bias);
}

TEST_CASE("sgld: explosion on the non-identifiable model is flagged") {
  const auto model = synth_nonident(200, vec({-1.0, 0.0}), 404);
  const auto result = sgld(model, 0.5, 10, 20000, vec({-1.0, 0.0}), 44);
  CHECK(result.diverged);
  CHECK(result.chain.rows() < 20000);
}

TEST_CASE("first_passage_time finds segment crossings exactly") {
  Skeleton skel(1);
  skel.append(0.0, vec({5.0}), vec({-1.0}));
  skel.append(4.0, vec({1.0}), vec({1.0}));
  skel.append(6.0, vec({3.0}), vec({1.0}));
  const auto hit = first_passage_time(skel, 0, -2.0, 2.0);
  REQUIRE(hit.has_value());
  CHECK(*hit == Catch::Approx(3.0));
  CHECK_FALSE(first_passage_time(skel, 0, -10.0, -8.0).has_value());
}
