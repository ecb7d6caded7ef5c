#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "zigzag/core.hpp"
#include "zigzag/models.hpp"
#include "zigzag/rng.hpp"

using namespace zigzag;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Index>(xs.size()));
  Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

Vector random_point(Index d, Rng& rng, double scale = 2.0) {
  Vector xi(d);
  for (Index i = 0; i < d; ++i) xi[i] = scale * (rng.uniform() - 0.5);
  return xi;
}

Vector random_velocity(Index d, Rng& rng) {
  Vector theta(d);
  for (Index i = 0; i < d; ++i) theta[i] = rng.uniform() < 0.5 ? -1.0 : 1.0;
  return theta;
}

// Central finite differences of psi.
double fd_gradient(const TargetModel& model, Vector xi, Index i) {
  const double h = 1e-6 * (1.0 + std::abs(xi[i]));
  const double save = xi[i];
  xi[i] = save + h;
  const double up = model.psi(xi);
  xi[i] = save - h;
  const double down = model.psi(xi);
  return (up - down) / (2.0 * h);
}

// Analytic logistic Hessian, written independently of the model internals.
Matrix logistic_hessian(const Matrix& x, const Vector& xi) {
  Matrix h = Matrix::Zero(x.cols(), x.cols());
  for (Index j = 0; j < x.rows(); ++j) {
    const double s = sigmoid(x.row(j).dot(xi));
    h += s * (1.0 - s) * x.row(j).transpose() * x.row(j);
  }
  return h;
}

struct QuadratureMoments {
  double mean, variance;
};

// Simpson quadrature of exp(-(Psi - Psi(center))) over center +- width.
QuadratureMoments quadrature_moments(const TargetModel& model, double center, double width) {
  const double psi0 = model.psi(vec({center}));
  long n = 1 << 12;
  double z = 0, m1 = 0, m2 = 0;
  for (int refine = 0; refine < 4; ++refine) {
    z = m1 = m2 = 0;
    const double h = 2.0 * width / static_cast<double>(n);
    for (long k = 0; k <= n; ++k) {
      const double xi = center - width + h * static_cast<double>(k);
      const double w = (k == 0 || k == n) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
      const double f = w * std::exp(-(model.psi(vec({xi})) - psi0));
      z += f;
      m1 += f * xi;
      m2 += f * xi * xi;
    }
    n *= 2;
  }
  return {m1 / z, m2 / z - (m1 / z) * (m1 / z)};
}

}  // namespace

TEST_CASE("model gradients match central finite differences") {
  Rng rng(21);
  const auto gauss = synth_gaussian(30, 1.0, 1.0, 201);
  ProductGaussianModel product(vec({1.0, 0.5, 2.0}));
  CauchyModel cauchy;
  const auto logistic = synth_logistic(25, 3, vec({1.0, 2.0, -0.5}), 202);
  const auto nonident = synth_nonident(20, vec({-1.0, 0.0}), 203);
  const std::vector<const TargetModel*> models = {&gauss, &product, &cauchy, &logistic,
                                                  &nonident};
  for (const auto* model : models) {
    for (int k = 0; k < 100; ++k) {
      const Vector xi = random_point(model->dim(), rng);
      for (Index i = 0; i < model->dim(); ++i) {
        const double analytic = model->grad_psi(xi, i);
        const double fd = fd_gradient(*model, xi, i);
        CHECK(std::abs(analytic - fd) <= 1e-5 * (1.0 + std::abs(analytic)));
      }
    }
  }
}

TEST_CASE("full_grad and estimator_vec agree with componentwise evaluation") {
  Rng rng(22);
  const auto logistic = synth_logistic(15, 3, vec({1.0, 2.0, -0.5}), 204);
  const auto nonident = synth_nonident(12, vec({-1.0, 0.5}), 205);
  const std::vector<const TargetModel*> models = {&logistic, &nonident};
  for (const auto* model : models) {
    for (int k = 0; k < 20; ++k) {
      const Vector xi = random_point(model->dim(), rng);
      const Vector g = model->full_grad(xi);
      for (Index i = 0; i < model->dim(); ++i)
        CHECK(g[i] == Catch::Approx(model->grad_psi(xi, i)).margin(1e-12));
      const auto j = static_cast<long long>(rng.uniform_below(
          static_cast<std::uint64_t>(model->n_data())));
      const Vector e = model->estimator_vec(xi, j);
      for (Index i = 0; i < model->dim(); ++i)
        CHECK(e[i] == Catch::Approx(model->estimator(xi, i, j)).margin(1e-12));
    }
  }
}

TEST_CASE("logistic Hessian is dominated by Q = X'X/4") {
  Rng rng(23);
  const auto model = synth_logistic(40, 3, vec({1.0, 2.0, -0.5}), 206);
  const Matrix q = *model.hessian_dominator();
  for (int k = 0; k < 1000; ++k) {
    const Vector xi = random_point(3, rng, 6.0);
    const Vector v = random_point(3, rng, 2.0);
    const Matrix h = logistic_hessian(model.covariates(), xi);
    CHECK(v.dot((q - h) * v) >= -1e-9);
  }
}

TEST_CASE("declared Lipschitz constants bound per-datum gradient increments") {
  Rng rng(24);
  const auto gauss = synth_gaussian(20, 1.0, 1.0, 207);
  const auto logistic = synth_logistic(20, 3, vec({1.0, 2.0, -0.5}), 208);
  const std::vector<const TargetModel*> models = {&gauss, &logistic};
  for (const auto* model : models) {
    const auto lip = model->lipschitz();
    REQUIRE(lip.has_value());
    for (int k = 0; k < 1000; ++k) {
      const Vector x1 = random_point(model->dim(), rng, 4.0);
      const Vector x2 = random_point(model->dim(), rng, 4.0);
      const double dist = lp_norm(x1 - x2, lip->p);
      for (long long j = 0; j < model->n_data(); ++j)
        for (Index i = 0; i < model->dim(); ++i)
          CHECK(std::abs(model->estimator(x1, i, j) - model->estimator(x2, i, j)) <=
                lip->constants[i] * dist * (1.0 + 1e-9));
    }
  }
}

TEST_CASE("declared global bounds dominate per-datum estimators") {
  Rng rng(25);
  const auto logistic = synth_logistic(30, 2, vec({1.0, 2.0}), 209);
  CauchyModel cauchy;
  const std::vector<const TargetModel*> models = {&logistic, &cauchy};
  for (const auto* model : models) {
    const auto c = model->global_bounds();
    REQUIRE(c.has_value());
    for (int k = 0; k < 500; ++k) {
      const Vector xi = random_point(model->dim(), rng, 8.0);
      for (long long j = 0; j < model->n_data(); ++j)
        for (Index i = 0; i < model->dim(); ++i)
          CHECK(std::abs(model->estimator(xi, i, j)) <= (*c)[i] * (1.0 + 1e-12));
    }
  }
}

TEST_CASE("monotone envelopes dominate rates along segments") {
  Rng rng(26);
  const auto gauss = synth_gaussian(20, 1.0, 2.0, 210);
  const auto nonident = synth_nonident(15, vec({-1.0, 0.3}), 211);
  const std::vector<const TargetModel*> models = {&gauss, &nonident};
  for (const auto* model : models) {
    for (int k = 0; k < 300; ++k) {
      const PhaseState from{random_point(model->dim(), rng, 4.0),
                            random_velocity(model->dim(), rng)};
      const double h = 2.0 * rng.uniform();
      for (Index i = 0; i < model->dim(); ++i) {
        const double grad_env = *model->grad_envelope(from, i, h);
        const double est_env = *model->estimator_envelope(from, i, h);
        for (double frac : {0.0, 0.33, 0.77, 1.0}) {
          const Vector xi = from.position + frac * h * from.velocity;
          CHECK(std::abs(model->grad_psi(xi, i)) <= grad_env * (1.0 + 1e-12));
          for (int rep = 0; rep < 5; ++rep) {
            const auto j = static_cast<long long>(rng.uniform_below(
                static_cast<std::uint64_t>(model->n_data())));
            CHECK(std::abs(model->estimator(xi, i, j)) <= est_env * (1.0 + 1e-12));
          }
        }
      }
    }
  }
}

TEST_CASE("gaussian conjugate posterior matches quadrature of exp(-Psi)") {
  const auto model = synth_gaussian(100, 1.0, 1.0, 212);
  const double mean = model.posterior_mean();
  const double sd = std::sqrt(model.posterior_variance());
  const auto quad = quadrature_moments(model, mean, 12.0 * sd);
  CHECK(std::abs(quad.mean - mean) <= 1e-8 * (1.0 + std::abs(mean)));
  CHECK(std::abs(quad.variance - model.posterior_variance()) <=
        1e-8 * (1.0 + model.posterior_variance()));
}

TEST_CASE("synthetic gaussian data is reproducible and centred at xi0") {
  const auto model = synth_gaussian(100, 1.0, 1.0, 42);
  const double sample_mean = model.data().mean();
  CHECK(std::abs(sample_mean - 1.0) <= 4.0 / std::sqrt(100.0));

  const auto again = synth_gaussian(100, 1.0, 1.0, 42);
  CHECK(model.data() == again.data());
}

TEST_CASE("synthetic logistic labels track the model probabilities") {
  const auto model = synth_logistic(20000, 2, vec({1.0, 2.0}), 77);
  // Monte Carlo oracle: empirical label frequency vs average probability
  double expected = 0, observed = 0;
  for (Index j = 0; j < model.covariates().rows(); ++j) {
    expected += sigmoid(model.covariates().row(j).dot(vec({1.0, 2.0})));
    observed += model.labels()[j];
  }
  expected /= static_cast<double>(model.n_data());
  observed /= static_cast<double>(model.n_data());
  const double se = std::sqrt(expected * (1.0 - expected) / static_cast<double>(model.n_data()));
  CHECK(std::abs(observed - expected) <= 4.0 * se + 0.01);
  for (Index j = 0; j < 10; ++j) CHECK(model.covariates()(j, 0) == 1.0);  // intercept
}

TEST_CASE("non-identifiable data with negative logit yields mostly zero labels") {
  const auto model = synth_nonident(2000, vec({-1.0, 0.0}), 78);
  long long zeros_at_positive_x = 0, positives = 0;
  for (Index j = 0; j < model.covariates().size(); ++j) {
    if (model.covariates()[j] > 0.5) {
      ++positives;
      zeros_at_positive_x += model.labels()[j] == 0 ? 1 : 0;
    }
  }
  REQUIRE(positives > 100);
  CHECK(static_cast<double>(zeros_at_positive_x) > 0.55 * static_cast<double>(positives));
}
