#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace zigzag {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

inline double pos_part(double x) { return x > 0 ? x : 0.0; }

// Velocities live in {-1,+1}^d.
inline bool is_unit_velocity(const Vector& theta) {
  for (Index i = 0; i < theta.size(); ++i)
    if (theta[i] != 1.0 && theta[i] != -1.0) return false;
  return theta.size() > 0;
}

// F_i[theta]: negate component i. Involution by construction.
inline Vector flip(Vector theta, Index i) {
  if (i < 0 || i >= theta.size()) throw std::out_of_range("flip: coordinate index out of range");
  theta[i] = -theta[i];
  return theta;
}

struct PhaseState {
  Vector position;
  Vector velocity;
  Index dim() const { return position.size(); }
};

inline PhaseState make_state(Vector position, Vector velocity) {
  if (position.size() != velocity.size())
    throw std::invalid_argument("phase state: position/velocity dimension mismatch");
  if (!is_unit_velocity(velocity))
    throw std::invalid_argument("phase state: velocity entries must be exactly +-1");
  return {std::move(position), std::move(velocity)};
}

struct SkeletonPoint {
  double time;
  Vector position;
  Vector velocity;
};

// Ordered skeleton points (T^k, Xi^k, Theta^k) of a piecewise linear
// trajectory: between points the position flows as Xi^k + Theta^k (t - T^k).
// Stored as flat arrays; runs can hold millions of points.
class Skeleton {
 public:
  Skeleton() = default;
  explicit Skeleton(Index dim) : dim_(dim) {}

  Index dim() const { return dim_; }
  std::size_t size() const { return times_.size(); }
  bool empty() const { return times_.empty(); }

  void reserve(std::size_t n) {
    times_.reserve(n);
    positions_.reserve(n * static_cast<std::size_t>(dim_));
    velocities_.reserve(n * static_cast<std::size_t>(dim_));
  }

  void append(double time, const Vector& position, const Vector& velocity) {
    times_.push_back(time);
    positions_.insert(positions_.end(), position.data(), position.data() + dim_);
    velocities_.insert(velocities_.end(), velocity.data(), velocity.data() + dim_);
  }

  double time(std::size_t k) const { return times_[k]; }
  double total_time() const { return times_.empty() ? 0.0 : times_.back(); }

  Eigen::Map<const Vector> position(std::size_t k) const {
    return {positions_.data() + k * static_cast<std::size_t>(dim_), dim_};
  }
  Eigen::Map<const Vector> velocity(std::size_t k) const {
    return {velocities_.data() + k * static_cast<std::size_t>(dim_), dim_};
  }
  SkeletonPoint point(std::size_t k) const { return {times_[k], position(k), velocity(k)}; }

  // Index of the segment containing t: largest k with time(k) <= t.
  std::size_t segment_index(double t) const {
    auto it = std::upper_bound(times_.begin(), times_.end(), t);
    return static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, (it - times_.begin()) - 1));
  }

 private:
  Index dim_ = 0;
  std::vector<double> times_;
  std::vector<double> positions_;
  std::vector<double> velocities_;
};

// (Xi(t), Theta(t)) by linear interpolation; exact at skeleton times.
inline PhaseState position_at(const Skeleton& skel, double t) {
  if (skel.empty()) throw std::domain_error("position_at: empty skeleton");
  if (t < skel.time(0) || t > skel.total_time())
    throw std::domain_error("position_at: time outside the simulated horizon");
  const std::size_t k = skel.segment_index(t);
  Vector pos = skel.position(k);
  if (t > skel.time(k)) pos += (t - skel.time(k)) * skel.velocity(k);
  return {std::move(pos), skel.velocity(k)};
}

struct SkeletonCheck {
  bool ok = true;
  std::string message;
};

// Flow validation: strictly increasing times starting at 0, positions
// consistent with Xi^k = Xi^{k-1} + Theta^{k-1} (T^k - T^{k-1}) to within
// rel_tol, and at most one velocity component flipped per point.
inline SkeletonCheck validate_skeleton(const Skeleton& skel, double rel_tol = 1e-9) {
  auto fail = [](std::string msg) { return SkeletonCheck{false, std::move(msg)}; };
  if (skel.empty()) return fail("empty skeleton");
  if (skel.time(0) != 0.0) return fail("first skeleton time is not 0");
  for (std::size_t k = 0; k < skel.size(); ++k) {
    if (!is_unit_velocity(skel.velocity(k)))
      return fail("velocity entries not +-1 at point " + std::to_string(k));
    if (!skel.position(k).allFinite())
      return fail("non-finite position at point " + std::to_string(k));
  }
  for (std::size_t k = 1; k < skel.size(); ++k) {
    const double dt = skel.time(k) - skel.time(k - 1);
    if (!(dt > 0)) return fail("times not strictly increasing at point " + std::to_string(k));
    const Vector expect = skel.position(k - 1) + dt * skel.velocity(k - 1);
    const double scale = std::max(1.0, expect.cwiseAbs().maxCoeff());
    if ((skel.position(k) - expect).cwiseAbs().maxCoeff() > rel_tol * scale)
      return fail("flow violation at point " + std::to_string(k));
    int flips = 0;
    for (Index i = 0; i < skel.dim(); ++i)
      if (skel.velocity(k)[i] != skel.velocity(k - 1)[i]) ++flips;
    if (flips > 1) return fail("more than one velocity flip at point " + std::to_string(k));
  }
  return {};
}

// Drops proposal points that did not switch the velocity (keeping the first
// and last point). The trajectory is unchanged; estimators are invariant.
inline Skeleton prune_switches(const Skeleton& skel) {
  Skeleton out(skel.dim());
  if (skel.empty()) return out;
  out.append(skel.time(0), skel.position(0), skel.velocity(0));
  for (std::size_t k = 1; k + 1 < skel.size(); ++k) {
    if ((skel.velocity(k).array() != skel.velocity(k - 1).array()).any())
      out.append(skel.time(k), skel.position(k), skel.velocity(k));
  }
  if (skel.size() > 1)
    out.append(skel.time(skel.size() - 1), skel.position(skel.size() - 1),
               skel.velocity(skel.size() - 1));
  return out;
}

// Positions of accepted switches (points where the velocity changed).
inline std::vector<Vector> switch_positions(const Skeleton& skel) {
  std::vector<Vector> out;
  for (std::size_t k = 1; k < skel.size(); ++k)
    if ((skel.velocity(k).array() != skel.velocity(k - 1).array()).any())
      out.push_back(skel.position(k));
  return out;
}

// Per-datum Lipschitz bounds: |d_i Psi^j(x) - d_i Psi^j(y)| <= C_i ||x-y||_p.
struct LipschitzInfo {
  Vector constants;
  double p = 2.0;  // may be infinity
};

inline double lp_norm(const Vector& v, double p) {
  if (std::isinf(p)) return v.cwiseAbs().maxCoeff();
  if (p == 2.0) return v.norm();
  if (p == 1.0) return v.cwiseAbs().sum();
  return std::pow(v.cwiseAbs().array().pow(p).sum(), 1.0 / p);
}

// Target distribution interface. Psi is the negative log density up to an
// additive constant. For factorized targets (n_data > 1) the per-datum
// estimators E_i^j = d_i Psi^j must average to d_i Psi over j.
//
// Models are immutable after construction and shareable across chains;
// evaluation accounting is handled per chain by ModelEval below.
class TargetModel {
 public:
  virtual ~TargetModel() = default;

  virtual Index dim() const = 0;
  virtual long long n_data() const = 0;
  virtual double psi(const Vector& xi) const = 0;
  virtual double grad_psi(const Vector& xi, Index i) const = 0;

  // Full gradient in one pass over the data.
  virtual Vector full_grad(const Vector& xi) const {
    Vector g(dim());
    for (Index i = 0; i < dim(); ++i) g[i] = grad_psi(xi, i);
    return g;
  }

  // E_i^j(xi). Default only valid for non-factorized targets.
  virtual double estimator(const Vector& xi, Index i, long long j) const {
    (void)j;
    if (n_data() != 1)
      throw std::logic_error("factorized model must override estimator()");
    return grad_psi(xi, i);
  }

  // Full per-datum gradient (d Psi^j); one datum touch.
  virtual Vector estimator_vec(const Vector& xi, long long j) const {
    Vector e(dim());
    for (Index i = 0; i < dim(); ++i) e[i] = estimator(xi, i, j);
    return e;
  }

  // Global bounds c_i with |E_i^j| <= c_i everywhere, when available.
  virtual std::optional<Vector> global_bounds() const { return std::nullopt; }

  // Symmetric positive definite Q with H_Psi(xi) <= Q everywhere.
  virtual std::optional<Matrix> hessian_dominator() const { return std::nullopt; }

  virtual std::optional<LipschitzInfo> lipschitz() const { return std::nullopt; }

  // sup_{0<=s<=h} |d_i Psi(xi + theta s)| along the segment, when the model
  // can provide a monotone envelope (used for horizon-constant bounds).
  virtual std::optional<double> grad_envelope(const PhaseState&, Index, double) const {
    return std::nullopt;
  }

  // sup_j sup_{0<=s<=h} |E_i^j(xi + theta s)|.
  virtual std::optional<double> estimator_envelope(const PhaseState&, Index, double) const {
    return std::nullopt;
  }
};

// Excess switching rates gamma_i(xi, theta) >= 0 with the symmetry
// gamma_i(xi, theta) = gamma_i(xi, F_i[theta]). Default is identically
// zero (the canonical process); constant-per-coordinate is built in.
class RefreshRates {
 public:
  using Fn = std::function<double(const Vector&, const Vector&, Index)>;

  RefreshRates() = default;

  static RefreshRates zero() { return {}; }

  static RefreshRates constants(Vector per_coordinate) {
    if ((per_coordinate.array() < 0).any())
      throw std::invalid_argument("refresh rates must be nonnegative");
    RefreshRates g;
    g.constants_ = std::move(per_coordinate);
    return g;
  }

  static RefreshRates general(Fn fn) {
    RefreshRates g;
    g.fn_ = std::move(fn);
    return g;
  }

  double operator()(const Vector& xi, const Vector& theta, Index i) const {
    if (fn_) return fn_(xi, theta, i);
    if (constants_.size() > 0) return constants_[i];
    return 0.0;
  }

  bool is_zero() const { return !fn_ && constants_.size() == 0; }
  bool is_constant() const { return !fn_; }
  double constant_part(Index i) const { return constants_.size() > 0 ? constants_[i] : 0.0; }

 private:
  Vector constants_;
  Fn fn_;
};

// Canonical switching rate lambda_i = (theta_i d_i Psi)^+ + gamma_i.
inline double canonical_rate(const TargetModel& model, const PhaseState& s, Index i,
                             const RefreshRates& gamma = {}) {
  const double g = model.grad_psi(s.position, i);
  if (!std::isfinite(g)) throw std::runtime_error("canonical_rate: non-finite gradient");
  return pos_part(s.velocity[i] * g) + gamma(s.position, s.velocity, i);
}

// Per-chain evaluation accounting. One unit = one datum touch, so a single
// gradient component over all data and a one-pass full gradient both cost
// n_data units; a per-datum estimator costs one. Epochs = units / n_data.
class ModelEval {
 public:
  explicit ModelEval(const TargetModel& model) : model_(&model) {}

  double grad_psi(const Vector& xi, Index i) {
    units_ += model_->n_data();
    return model_->grad_psi(xi, i);
  }
  Vector full_grad(const Vector& xi) {
    units_ += model_->n_data();
    return model_->full_grad(xi);
  }
  double psi(const Vector& xi) {
    units_ += model_->n_data();
    return model_->psi(xi);
  }
  double estimator(const Vector& xi, Index i, long long j) {
    units_ += 1;
    return model_->estimator(xi, i, j);
  }
  Vector estimator_vec(const Vector& xi, long long j) {
    units_ += 1;
    return model_->estimator_vec(xi, j);
  }

  void add_units(long long u) { units_ += u; }
  long long per_datum_evals() const { return units_; }
  double epochs() const { return static_cast<double>(units_) / static_cast<double>(model_->n_data()); }
  const TargetModel& model() const { return *model_; }

 private:
  const TargetModel* model_;
  long long units_ = 0;
};

}  // namespace zigzag
