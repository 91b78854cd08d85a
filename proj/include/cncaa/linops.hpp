#pragma once

// Linear operators for CNC least squares: the measurement operator A, the
// stacked iterate z = (x, v), and the affine forward operator
//
//   P(x, v) = ([1-g g; -g g] (x) A^T A) [x; v] - [A^T y; 0]
//
// together with its exact resolvent (I + mu P)^{-1}.

#include <Eigen/Dense>

#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cncaa {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {

inline void require_size(Index got, Index want, const char* what) {
  if (got != want) {
    throw DimensionError(std::string(what) + ": expected length " + std::to_string(want) +
                         ", got " + std::to_string(got));
  }
}

}  // namespace detail

/// Concatenated iterate (x, v) in R^{2p}. Stored flat so the acceleration
/// layer can treat it as a plain vector.
class StackedPoint {
 public:
  StackedPoint() = default;

  explicit StackedPoint(Index p) : flat_(VectorXd::Zero(2 * p)) {}

  StackedPoint(const VectorXd& x, const VectorXd& v) : flat_(x.size() + v.size()) {
    detail::require_size(v.size(), x.size(), "StackedPoint v-block");
    flat_ << x, v;
  }

  static StackedPoint from_flat(VectorXd flat) {
    if (flat.size() % 2 != 0) {
      throw DimensionError("StackedPoint: flat vector must have even length");
    }
    StackedPoint z;
    z.flat_ = std::move(flat);
    return z;
  }

  Index block_size() const { return flat_.size() / 2; }

  auto x() { return flat_.head(block_size()); }
  auto x() const { return flat_.head(block_size()); }
  auto v() { return flat_.tail(block_size()); }
  auto v() const { return flat_.tail(block_size()); }

  const VectorXd& flat() const { return flat_; }
  VectorXd& flat() { return flat_; }

  double norm() const { return flat_.norm(); }
  bool all_finite() const { return flat_.allFinite(); }

  friend StackedPoint operator+(const StackedPoint& a, const StackedPoint& b) {
    return from_flat(a.flat_ + b.flat_);
  }
  friend StackedPoint operator-(const StackedPoint& a, const StackedPoint& b) {
    return from_flat(a.flat_ - b.flat_);
  }
  friend StackedPoint operator*(double s, const StackedPoint& a) { return from_flat(s * a.flat_); }

 private:
  VectorXd flat_;
};

/// The measurement operator A: either a dense n x p matrix or the orthogonal
/// projection P_Omega onto observed entries of a d1 x d2 matrix (column-major).
class MeasurementOp {
 public:
  enum class Kind { dense, entry_mask };

  static MeasurementOp dense(MatrixXd a) {
    if (a.rows() < 1 || a.cols() < 1) {
      throw std::invalid_argument("MeasurementOp: dense matrix must be at least 1x1");
    }
    if (!a.allFinite()) {
      throw std::invalid_argument("MeasurementOp: dense matrix has non-finite entries");
    }
    MeasurementOp op;
    op.kind_ = Kind::dense;
    op.rows_ = a.rows();
    op.cols_ = a.cols();
    op.dense_ = std::make_shared<const MatrixXd>(std::move(a));
    return op;
  }

  /// Observed entries as 0-based (row, col) pairs.
  static MeasurementOp entry_mask(Index d1, Index d2,
                                  const std::vector<std::pair<Index, Index>>& observed) {
    if (d1 < 1 || d2 < 1) {
      throw std::invalid_argument("MeasurementOp: mask dimensions must be positive");
    }
    VectorXd mask = VectorXd::Zero(d1 * d2);
    for (const auto& [r, c] : observed) {
      if (r < 0 || r >= d1 || c < 0 || c >= d2) {
        throw DimensionError("MeasurementOp: observed entry (" + std::to_string(r) + ", " +
                             std::to_string(c) + ") outside " + std::to_string(d1) + "x" +
                             std::to_string(d2));
      }
      mask(c * d1 + r) = 1.0;
    }
    return from_mask(d1, d2, std::move(mask));
  }

  /// Mask given as a 0/1 vector of length d1*d2 in column-major order.
  static MeasurementOp from_mask(Index d1, Index d2, VectorXd mask) {
    detail::require_size(mask.size(), d1 * d2, "MeasurementOp mask");
    for (Index i = 0; i < mask.size(); ++i) {
      mask(i) = mask(i) != 0.0 ? 1.0 : 0.0;
    }
    if (mask.sum() == 0.0) {
      throw std::invalid_argument("MeasurementOp: observation set is empty");
    }
    MeasurementOp op;
    op.kind_ = Kind::entry_mask;
    op.rows_ = d1 * d2;
    op.cols_ = d1 * d2;
    op.mask_rows_ = d1;
    op.mask_cols_ = d2;
    op.mask_ = std::make_shared<const VectorXd>(std::move(mask));
    return op;
  }

  Kind kind() const { return kind_; }
  bool is_mask() const { return kind_ == Kind::entry_mask; }

  /// Length of Ax.
  Index rows() const { return rows_; }
  /// Length of x.
  Index cols() const { return cols_; }

  Index mask_rows() const { return mask_rows_; }
  Index mask_cols() const { return mask_cols_; }

  const MatrixXd& matrix() const {
    if (kind_ != Kind::dense) throw std::logic_error("MeasurementOp: not a dense operator");
    return *dense_;
  }
  const VectorXd& mask() const {
    if (kind_ != Kind::entry_mask) throw std::logic_error("MeasurementOp: not an entry mask");
    return *mask_;
  }
  Index observed_count() const { return is_mask() ? static_cast<Index>(mask_->sum()) : rows_; }

  VectorXd apply(const VectorXd& x) const {
    detail::require_size(x.size(), cols_, "MeasurementOp::apply");
    if (kind_ == Kind::dense) return (*dense_) * x;
    return mask_->cwiseProduct(x);
  }

  VectorXd apply_adjoint(const VectorXd& r) const {
    detail::require_size(r.size(), rows_, "MeasurementOp::apply_adjoint");
    if (kind_ == Kind::dense) return dense_->transpose() * r;
    return mask_->cwiseProduct(r);
  }

  /// A^T A x
  VectorXd normal(const VectorXd& x) const {
    if (kind_ == Kind::dense) return apply_adjoint(apply(x));
    detail::require_size(x.size(), cols_, "MeasurementOp::normal");
    return mask_->cwiseProduct(x);
  }

  /// Dense A^T A. Only sensible for moderate p.
  MatrixXd gram() const {
    if (kind_ == Kind::dense) return dense_->transpose() * (*dense_);
    return mask_->asDiagonal().toDenseMatrix();
  }

  MatrixXd materialize() const {
    if (kind_ == Kind::dense) return *dense_;
    return mask_->asDiagonal().toDenseMatrix();
  }

 private:
  MeasurementOp() = default;

  Kind kind_ = Kind::dense;
  Index rows_ = 0;
  Index cols_ = 0;
  Index mask_rows_ = 0;
  Index mask_cols_ = 0;
  std::shared_ptr<const MatrixXd> dense_;
  std::shared_ptr<const VectorXd> mask_;
};

struct PowerIterationOptions {
  double tol = 1e-8;
  int max_iter = 1000;
  std::uint64_t seed = 0;
};

struct SpectralNorm {
  double value = 0.0;
  bool converged = true;
  int iterations = 0;
};

/// ||A||_2 by power iteration on A^T A from a seeded random unit vector.
/// Entry masks are projections, so their norm is exactly 1.
inline SpectralNorm spectral_norm(const MeasurementOp& op, const PowerIterationOptions& opts = {}) {
  if (!(opts.tol > 0.0)) throw std::invalid_argument("spectral_norm: tol must be positive");
  if (op.is_mask()) return {1.0, true, 0};

  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  VectorXd u(op.cols());
  for (Index i = 0; i < u.size(); ++i) u(i) = normal(rng);
  u.normalize();

  double rayleigh = 0.0;
  for (int it = 1; it <= opts.max_iter; ++it) {
    VectorXd w = op.normal(u);
    const double next = u.dot(w);
    const double w_norm = w.norm();
    if (w_norm == 0.0) return {0.0, true, it};
    u = w / w_norm;
    // The Rayleigh quotient increases monotonically towards sigma_max^2; its
    // remaining error can exceed the last change when the spectral gap is
    // small, hence the extra factor.
    if (it > 1 && std::abs(next - rayleigh) <= 1e-2 * opts.tol * next) {
      return {std::sqrt(next), true, it};
    }
    rayleigh = next;
  }
  return {std::sqrt(rayleigh), false, opts.max_iter};
}

/// The 2x2 block-mixing matrix [[1-g, g], [-g, g]].
class MixMatrix {
 public:
  explicit MixMatrix(double gamma) : gamma_(gamma) {
    if (!(gamma >= 0.0 && gamma <= 1.0)) {
      throw std::invalid_argument("MixMatrix: gamma must lie in [0, 1], got " +
                                  std::to_string(gamma));
    }
  }

  double gamma() const { return gamma_; }

  Eigen::Matrix2d matrix() const {
    Eigen::Matrix2d m;
    m << 1.0 - gamma_, gamma_, -gamma_, gamma_;
    return m;
  }

 private:
  double gamma_;
};

/// Largest singular value of the mix matrix from the eigenvalues of M^T M:
/// trace (1-g)^2 + 3g^2, determinant det(M)^2 = g^2.
inline double mix_norm(const MixMatrix& mix) {
  const double g = mix.gamma();
  const double trace = (1.0 - g) * (1.0 - g) + 3.0 * g * g;
  const double det = g * g;
  const double disc = std::max(trace * trace - 4.0 * det, 0.0);
  return std::sqrt(0.5 * (trace + std::sqrt(disc)));
}

/// The affine forward operator P. Immutable; copies share the measurement data.
class CncOperator {
 public:
  CncOperator(MeasurementOp measurement, double gamma, VectorXd y,
              const PowerIterationOptions& power = {})
      : measurement_(std::move(measurement)),
        mix_(gamma),
        calls_(std::make_shared<std::atomic<std::uint64_t>>(0)) {
    detail::require_size(y.size(), measurement_.rows(), "CncOperator target y");
    if (!y.allFinite()) throw std::invalid_argument("CncOperator: target has non-finite entries");
    if (measurement_.is_mask()) y = measurement_.mask().cwiseProduct(y);
    aty_ = measurement_.apply_adjoint(y);
    y_ = std::move(y);
    norm_ = spectral_norm(measurement_, power);
  }

  const MeasurementOp& measurement() const { return measurement_; }
  const MixMatrix& mix() const { return mix_; }
  double gamma() const { return mix_.gamma(); }
  const VectorXd& target() const { return y_; }
  const VectorXd& aty() const { return aty_; }
  Index block_size() const { return measurement_.cols(); }

  double a_norm() const { return norm_.value; }
  bool a_norm_converged() const { return norm_.converged; }

  /// P z. Uses A^T A x and A^T A (x - v) so each call costs two normal products.
  StackedPoint forward(const StackedPoint& z) const {
    StackedPoint out = linear(z);
    out.x() -= aty_;
    return out;
  }

  /// The linear part of P (P z + [A^T y; 0]).
  StackedPoint linear(const StackedPoint& z) const {
    detail::require_size(z.block_size(), block_size(), "CncOperator block");
    calls_->fetch_add(1, std::memory_order_relaxed);
    const double g = gamma();
    VectorXd kx = measurement_.normal(z.x());
    StackedPoint out(block_size());
    if (g == 0.0) {
      out.x() = kx;
      return out;
    }
    VectorXd kd = measurement_.normal(z.x() - z.v());
    out.x() = kx - g * kd;
    out.v() = -g * kd;
    return out;
  }

  /// Number of forward/linear evaluations made through this operator and its copies.
  std::uint64_t forward_calls() const { return calls_->load(std::memory_order_relaxed); }
  void reset_forward_calls() const { calls_->store(0, std::memory_order_relaxed); }

  /// Dense 2p x 2p matrix of the linear part, M (x) A^T A.
  MatrixXd materialize_linear() const {
    const MatrixXd k = measurement_.gram();
    const Index p = block_size();
    const double g = gamma();
    MatrixXd out(2 * p, 2 * p);
    out.topLeftCorner(p, p) = (1.0 - g) * k;
    out.topRightCorner(p, p) = g * k;
    out.bottomLeftCorner(p, p) = -g * k;
    out.bottomRightCorner(p, p) = g * k;
    return out;
  }

 private:
  MeasurementOp measurement_;
  MixMatrix mix_;
  VectorXd y_;
  VectorXd aty_;
  SpectralNorm norm_;
  std::shared_ptr<std::atomic<std::uint64_t>> calls_;
};

/// min{1, (1-g)/g} / ||A||^2, with (1-0)/0 taken as +inf.
inline double cocoercivity_beta(const CncOperator& op) {
  const double g = op.gamma();
  // 1/g - 1 rather than (1 - g)/g: exact at g = 0.8, where 1 - g is not.
  const double factor = g == 0.0 ? 1.0 : std::min(1.0, 1.0 / g - 1.0);
  const double a2 = op.a_norm() * op.a_norm();
  if (a2 == 0.0) return std::numeric_limits<double>::infinity();
  return factor / a2;
}

inline double lipschitz_constant(const CncOperator& op) {
  return mix_norm(op.mix()) * op.a_norm() * op.a_norm();
}

class ResolventError : public std::runtime_error {
 public:
  ResolventError(const std::string& what, double condition)
      : std::runtime_error(what), condition_(condition) {}
  double condition_estimate() const { return condition_; }

 private:
  double condition_;
};

struct ResolventOptions {
  /// Largest 2p solved by dense LU; above this a matrix-free CG on the normal
  /// equations is used.
  Index dense_limit = 4000;
  double cg_tol = 1e-10;
  int cg_max_iter = 10000;
};

/// J_{mu P} for a fixed step mu. The factorization is built at construction.
class CncResolvent {
 public:
  CncResolvent(CncOperator op, double mu, const ResolventOptions& opts = {})
      : op_(std::move(op)), mu_(mu), opts_(opts) {
    if (!(mu > 0.0)) throw std::invalid_argument("CncResolvent: mu must be positive");
    const Index n = 2 * op_.block_size();
    if (n <= opts_.dense_limit) {
      MatrixXd system = MatrixXd::Identity(n, n) + mu_ * op_.materialize_linear();
      auto lu = std::make_shared<Eigen::PartialPivLU<MatrixXd>>(system);
      const double rcond = lu->rcond();
      if (!(rcond > 1e-14)) {
        throw ResolventError("CncResolvent: system is numerically singular", 1.0 / rcond);
      }
      lu_ = std::move(lu);
    }
  }

  double mu() const { return mu_; }
  const CncOperator& op() const { return op_; }
  bool is_dense() const { return lu_ != nullptr; }

  /// Solves (I + mu P_lin) z = w + mu [A^T y; 0].
  StackedPoint operator()(const StackedPoint& w) const {
    detail::require_size(w.block_size(), op_.block_size(), "CncResolvent input");
    VectorXd rhs = w.flat();
    rhs.head(op_.block_size()) += mu_ * op_.aty();
    if (lu_) return StackedPoint::from_flat(lu_->solve(rhs));
    return StackedPoint::from_flat(solve_iterative(rhs));
  }

 private:
  VectorXd apply_system(const VectorXd& z) const {
    return z + mu_ * op_.linear(StackedPoint::from_flat(z)).flat();
  }

  VectorXd apply_system_transpose(const VectorXd& z) const {
    // (M (x) K)^T = M^T (x) K, K symmetric.
    const Index p = op_.block_size();
    const double g = op_.gamma();
    const auto& a = op_.measurement();
    VectorXd kx = a.normal(z.head(p));
    VectorXd kv = a.normal(z.tail(p));
    VectorXd out(2 * p);
    out.head(p) = z.head(p) + mu_ * ((1.0 - g) * kx - g * kv);
    out.tail(p) = z.tail(p) + mu_ * (g * kx + g * kv);
    return out;
  }

  // Conjugate gradient on B^T B z = B^T rhs, B = I + mu P_lin.
  VectorXd solve_iterative(const VectorXd& rhs) const {
    VectorXd b = apply_system_transpose(rhs);
    VectorXd z = rhs;
    VectorXd r = b - apply_system_transpose(apply_system(z));
    VectorXd d = r;
    double rr = r.squaredNorm();
    const double stop = opts_.cg_tol * opts_.cg_tol * std::max(b.squaredNorm(), 1e-300);
    for (int it = 0; it < opts_.cg_max_iter && rr > stop; ++it) {
      VectorXd q = apply_system_transpose(apply_system(d));
      const double step = rr / d.dot(q);
      z += step * d;
      r -= step * q;
      const double rr_next = r.squaredNorm();
      d = r + (rr_next / rr) * d;
      rr = rr_next;
    }
    if (rr > stop) {
      throw ResolventError("CncResolvent: conjugate gradient did not converge",
                           std::pow(1.0 + mu_ * lipschitz_constant(op_), 2));
    }
    return z;
  }

  CncOperator op_;
  double mu_;
  ResolventOptions opts_;
  std::shared_ptr<const Eigen::PartialPivLU<MatrixXd>> lu_;
};

inline StackedPoint cnc_forward(const CncOperator& op, const StackedPoint& z) {
  return op.forward(z);
}

inline StackedPoint cnc_resolvent(const CncOperator& op, double mu, const StackedPoint& w) {
  return CncResolvent(op, mu)(w);
}

}  // namespace cncaa
