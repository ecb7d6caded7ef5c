#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>

#include "zigzag/core.hpp"
#include "zigzag/rng.hpp"

namespace zigzag {

inline double sigmoid(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

// log(1 + exp(z)) without overflow.
inline double log1p_exp(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

// Posterior for the mean of N(xi, sigma^2) data under a N(0, 1/rho^2) prior.
// Factorized as Psi^j(xi) = rho^2 xi^2/2 + n (xi - x_j)^2 / (2 sigma^2), so
// the per-datum gradients are exactly Lipschitz with constant rho^2 + n/sigma^2
// (also the exact Hessian). Conjugate: the posterior is Gaussian with
// precision rho^2 + n/sigma^2 and mean (sum x_j / sigma^2) / precision.
class GaussianMeanModel final : public TargetModel {
 public:
  GaussianMeanModel(Vector data, double sigma, double rho)
      : data_(std::move(data)), sigma2_(sigma * sigma), rho2_(rho * rho) {
    if (data_.size() < 1) throw std::invalid_argument("gaussian mean model: empty data");
    if (!(sigma > 0) || !(rho > 0)) throw std::invalid_argument("gaussian mean model: sigma, rho > 0");
    sum_ = data_.sum();
    max_abs_ = data_.cwiseAbs().maxCoeff();
  }

  Index dim() const override { return 1; }
  long long n_data() const override { return data_.size(); }

  double psi(const Vector& xi) const override {
    const double x = xi[0];
    return 0.5 * rho2_ * x * x +
           (data_.array() - x).square().sum() / (2.0 * sigma2_);
  }

  double grad_psi(const Vector& xi, Index) const override {
    const double x = xi[0];
    return rho2_ * x + (static_cast<double>(n_data()) * x - sum_) / sigma2_;
  }

  double estimator(const Vector& xi, Index, long long j) const override {
    const double x = xi[0];
    return rho2_ * x + static_cast<double>(n_data()) * (x - data_[j]) / sigma2_;
  }

  std::optional<Matrix> hessian_dominator() const override {
    Matrix q(1, 1);
    q(0, 0) = precision();
    return q;
  }

  std::optional<LipschitzInfo> lipschitz() const override {
    Vector c(1);
    c[0] = precision();
    return LipschitzInfo{c, 2.0};
  }

  std::optional<double> grad_envelope(const PhaseState& s, Index, double h) const override {
    return precision() * (std::abs(s.position[0]) + h) + std::abs(sum_) / sigma2_;
  }

  std::optional<double> estimator_envelope(const PhaseState& s, Index, double h) const override {
    return precision() * (std::abs(s.position[0]) + h) +
           static_cast<double>(n_data()) * max_abs_ / sigma2_;
  }

  double precision() const { return rho2_ + static_cast<double>(n_data()) / sigma2_; }
  double posterior_mean() const { return (sum_ / sigma2_) / precision(); }
  double posterior_variance() const { return 1.0 / precision(); }

  const Vector& data() const { return data_; }
  double sigma() const { return std::sqrt(sigma2_); }
  double rho() const { return std::sqrt(rho2_); }

 private:
  Vector data_;
  double sigma2_, rho2_, sum_ = 0, max_abs_ = 0;
};

// Product of centred Gaussians with per-coordinate standard deviations.
// Coordinates evolve independently; rates (theta_i xi_i / sigma_i^2)^+ are
// exactly affine along a segment.
class ProductGaussianModel final : public TargetModel {
 public:
  explicit ProductGaussianModel(Vector sigmas) : sigmas_(std::move(sigmas)) {
    if (sigmas_.size() < 1 || (sigmas_.array() <= 0).any())
      throw std::invalid_argument("product gaussian: sigmas must be positive");
    inv_var_ = sigmas_.array().square().inverse();
  }

  static ProductGaussianModel standard(Index d) { return ProductGaussianModel(Vector::Ones(d)); }

  Index dim() const override { return sigmas_.size(); }
  long long n_data() const override { return 1; }

  double psi(const Vector& xi) const override {
    return 0.5 * (xi.array().square() * inv_var_.array()).sum();
  }
  double grad_psi(const Vector& xi, Index i) const override { return xi[i] * inv_var_[i]; }
  Vector full_grad(const Vector& xi) const override { return xi.cwiseProduct(inv_var_); }

  std::optional<Matrix> hessian_dominator() const override {
    return Matrix(inv_var_.asDiagonal());
  }

  std::optional<double> grad_envelope(const PhaseState& s, Index i, double h) const override {
    return (std::abs(s.position[i]) + h) * inv_var_[i];
  }

  const Vector& sigmas() const { return sigmas_; }
  double inv_var(Index i) const { return inv_var_[i]; }

 private:
  Vector sigmas_;
  Vector inv_var_;
};

// Standard Cauchy in one dimension: Psi = log(1 + xi^2). The gradient
// 2 xi / (1 + xi^2) is globally bounded by 1.
class CauchyModel final : public TargetModel {
 public:
  Index dim() const override { return 1; }
  long long n_data() const override { return 1; }
  double psi(const Vector& xi) const override { return std::log1p(xi[0] * xi[0]); }
  double grad_psi(const Vector& xi, Index) const override {
    return 2.0 * xi[0] / (1.0 + xi[0] * xi[0]);
  }
  std::optional<Vector> global_bounds() const override { return Vector::Ones(1); }
};

// Bayesian logistic regression with flat prior. Covariates x^j in R^d with
// x^j_1 = 1, labels y^j in {0,1}, success probability sigmoid(<xi, x^j>).
// With a flat prior, Psi^j = -n log f(y^j | x^j, xi).
class LogisticModel final : public TargetModel {
 public:
  LogisticModel(Matrix covariates, Eigen::VectorXi labels)
      : x_(std::move(covariates)), y_(std::move(labels)) {
    if (x_.rows() != y_.size() || x_.rows() < 1)
      throw std::invalid_argument("logistic model: covariate/label size mismatch");
    if (((y_.array() != 0) && (y_.array() != 1)).any())
      throw std::invalid_argument("logistic model: labels must be 0/1");
    const auto n = static_cast<double>(x_.rows());
    // c_i = n max_j |x^j_i|;  C_i = (n/4) max_j |x^j_i| ||x^j||_2;  Q = X'X/4
    col_max_abs_ = x_.cwiseAbs().colwise().maxCoeff();
    global_ = n * col_max_abs_;
    Vector row_norms = x_.rowwise().norm();
    lipschitz_ = Vector(x_.cols());
    for (Index i = 0; i < x_.cols(); ++i)
      lipschitz_[i] = 0.25 * n * (x_.col(i).cwiseAbs().cwiseProduct(row_norms)).maxCoeff();
    q_ = 0.25 * (x_.transpose() * x_);
  }

  Index dim() const override { return x_.cols(); }
  long long n_data() const override { return x_.rows(); }

  double psi(const Vector& xi) const override {
    double v = 0;
    for (Index j = 0; j < x_.rows(); ++j) {
      const double z = x_.row(j).dot(xi);
      v += log1p_exp(z) - static_cast<double>(y_[j]) * z;
    }
    return v;
  }

  double grad_psi(const Vector& xi, Index i) const override {
    double g = 0;
    for (Index j = 0; j < x_.rows(); ++j)
      g += x_(j, i) * (sigmoid(x_.row(j).dot(xi)) - static_cast<double>(y_[j]));
    return g;
  }

  Vector full_grad(const Vector& xi) const override {
    Vector g = Vector::Zero(dim());
    for (Index j = 0; j < x_.rows(); ++j)
      g += (sigmoid(x_.row(j).dot(xi)) - static_cast<double>(y_[j])) * x_.row(j).transpose();
    return g;
  }

  double estimator(const Vector& xi, Index i, long long j) const override {
    return static_cast<double>(n_data()) * x_(j, i) *
           (sigmoid(x_.row(j).dot(xi)) - static_cast<double>(y_[j]));
  }

  Vector estimator_vec(const Vector& xi, long long j) const override {
    return static_cast<double>(n_data()) *
           (sigmoid(x_.row(j).dot(xi)) - static_cast<double>(y_[j])) * x_.row(j).transpose();
  }

  std::optional<Vector> global_bounds() const override { return global_; }
  std::optional<Matrix> hessian_dominator() const override { return q_; }
  std::optional<LipschitzInfo> lipschitz() const override { return LipschitzInfo{lipschitz_, 2.0}; }

  const Matrix& covariates() const { return x_; }
  const Eigen::VectorXi& labels() const { return y_; }

 private:
  Matrix x_;  // n x d
  Eigen::VectorXi y_;
  Vector col_max_abs_, global_, lipschitz_;
  Matrix q_;
};

// Non-identifiable logistic regression: scalar covariates, success
// probability sigmoid((xi_1 + xi_2^2) x^j) and a standard normal prior on
// (xi_1, xi_2). The factor 2 xi_2 in the gradient makes the Hessian
// unbounded, so no global or Lipschitz bounds exist; the model instead
// supplies monotone envelopes for horizon-constant bounds: along
// xi(t) = xi + theta t, |xi_i(t)| <= |xi_i| + t and |sigma - y| <= 1.
class NonIdentifiableLogisticModel final : public TargetModel {
 public:
  NonIdentifiableLogisticModel(Vector covariates, Eigen::VectorXi labels)
      : x_(std::move(covariates)), y_(std::move(labels)) {
    if (x_.size() != y_.size() || x_.size() < 1)
      throw std::invalid_argument("non-identifiable model: covariate/label size mismatch");
    sum_abs_x_ = x_.cwiseAbs().sum();
    max_abs_x_ = x_.cwiseAbs().maxCoeff();
  }

  Index dim() const override { return 2; }
  long long n_data() const override { return x_.size(); }

  double psi(const Vector& xi) const override {
    const double u = xi[0] + xi[1] * xi[1];
    double v = 0.5 * xi.squaredNorm();
    for (Index j = 0; j < x_.size(); ++j) {
      const double z = u * x_[j];
      v += log1p_exp(z) - static_cast<double>(y_[j]) * z;
    }
    return v;
  }

  double grad_psi(const Vector& xi, Index i) const override {
    const double s = score_sum(xi);
    return i == 0 ? xi[0] + s : xi[1] + 2.0 * xi[1] * s;
  }

  Vector full_grad(const Vector& xi) const override {
    const double s = score_sum(xi);
    Vector g(2);
    g[0] = xi[0] + s;
    g[1] = xi[1] + 2.0 * xi[1] * s;
    return g;
  }

  double estimator(const Vector& xi, Index i, long long j) const override {
    const double u = xi[0] + xi[1] * xi[1];
    const double sj = static_cast<double>(n_data()) * x_[j] *
                      (sigmoid(u * x_[j]) - static_cast<double>(y_[j]));
    return i == 0 ? xi[0] + sj : xi[1] + 2.0 * xi[1] * sj;
  }

  Vector estimator_vec(const Vector& xi, long long j) const override {
    const double u = xi[0] + xi[1] * xi[1];
    const double sj = static_cast<double>(n_data()) * x_[j] *
                      (sigmoid(u * x_[j]) - static_cast<double>(y_[j]));
    Vector e(2);
    e[0] = xi[0] + sj;
    e[1] = xi[1] + 2.0 * xi[1] * sj;
    return e;
  }

  std::optional<double> grad_envelope(const PhaseState& s, Index i, double h) const override {
    const double b = std::abs(s.position[i]) + h;
    return i == 0 ? b + sum_abs_x_ : b * (1.0 + 2.0 * sum_abs_x_);
  }

  std::optional<double> estimator_envelope(const PhaseState& s, Index i, double h) const override {
    const double b = std::abs(s.position[i]) + h;
    const double per_datum = static_cast<double>(n_data()) * max_abs_x_;
    return i == 0 ? b + per_datum : b * (1.0 + 2.0 * per_datum);
  }

  const Vector& covariates() const { return x_; }
  const Eigen::VectorXi& labels() const { return y_; }

 private:
  double score_sum(const Vector& xi) const {
    const double u = xi[0] + xi[1] * xi[1];
    double s = 0;
    for (Index j = 0; j < x_.size(); ++j)
      s += x_[j] * (sigmoid(u * x_[j]) - static_cast<double>(y_[j]));
    return s;
  }

  Vector x_;
  Eigen::VectorXi y_;
  double sum_abs_x_ = 0, max_abs_x_ = 0;
};

// Synthetic data generators; fully determined by (seed, parameters).

inline GaussianMeanModel synth_gaussian(long long n, double xi0, double sigma,
                                        std::uint64_t seed, double rho = 1.0) {
  Rng rng(seed, 0x6761757373ULL);
  Vector x(n);
  for (long long j = 0; j < n; ++j) x[j] = xi0 + sigma * rng.normal();
  return GaussianMeanModel(std::move(x), sigma, rho);
}

inline LogisticModel synth_logistic(long long n, Index d, const Vector& xi_true,
                                    std::uint64_t seed) {
  if (xi_true.size() != d) throw std::invalid_argument("synth_logistic: xi_true size != d");
  Rng rng(seed, 0x6c6f676973ULL);
  Matrix x(n, d);
  Eigen::VectorXi y(n);
  for (long long j = 0; j < n; ++j) {
    x(j, 0) = 1.0;  // intercept column
    for (Index i = 1; i < d; ++i) x(j, i) = rng.normal();
    const double p = sigmoid(x.row(j).dot(xi_true));
    y[j] = rng.uniform() < p ? 1 : 0;
  }
  return LogisticModel(std::move(x), std::move(y));
}

inline NonIdentifiableLogisticModel synth_nonident(long long n, const Vector& xi_true,
                                                   std::uint64_t seed) {
  if (xi_true.size() != 2) throw std::invalid_argument("synth_nonident: xi_true must be 2-d");
  Rng rng(seed, 0x6e6f6e6964ULL);
  const double u = xi_true[0] + xi_true[1] * xi_true[1];
  Vector x(n);
  Eigen::VectorXi y(n);
  for (long long j = 0; j < n; ++j) {
    x[j] = rng.normal();
    y[j] = rng.uniform() < sigmoid(u * x[j]) ? 1 : 0;
  }
  return NonIdentifiableLogisticModel(std::move(x), std::move(y));
}

}  // namespace zigzag
