#pragma once

// Proximal maps of the convex kernels rho and the stacked resolvents
// J_{mu Q}, J_{mu R} built from them.

#include "cncaa/linops.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

namespace cncaa {

namespace kernel {

struct None {};
struct L1 {};
/// l2,1 norm with fixed weights sqrt(p_j) over consecutive groups.
struct Group {
  std::vector<Index> sizes;
};
/// Nuclear norm of the d1 x d2 matrix stored column-major in x.
struct Nuclear {
  Index rows = 0;
  Index cols = 0;
};
/// Indicator of the box [lower, upper]^p.
struct Box {
  double lower = 0.0;
  double upper = 0.0;
};

}  // namespace kernel

using Kernel = std::variant<kernel::None, kernel::L1, kernel::Group, kernel::Nuclear, kernel::Box>;

class Regularizer {
 public:
  Regularizer() = default;
  Regularizer(Kernel k, double strength) : kernel_(std::move(k)), strength_(strength) {
    if (!(strength >= 0.0)) {
      throw std::invalid_argument("Regularizer: strength must be nonnegative");
    }
    if (const auto* g = std::get_if<kernel::Group>(&kernel_)) {
      if (g->sizes.empty()) throw std::invalid_argument("Regularizer: group list is empty");
      for (Index s : g->sizes) {
        if (s < 1) throw std::invalid_argument("Regularizer: group sizes must be positive");
      }
    }
    if (const auto* n = std::get_if<kernel::Nuclear>(&kernel_)) {
      if (n->rows < 1 || n->cols < 1) {
        throw std::invalid_argument("Regularizer: nuclear dimensions must be positive");
      }
    }
    if (const auto* b = std::get_if<kernel::Box>(&kernel_)) {
      if (!(b->lower <= b->upper)) throw std::invalid_argument("Regularizer: box needs a <= b");
    }
  }

  static Regularizer none() { return {kernel::None{}, 0.0}; }
  static Regularizer l1(double lambda) { return {kernel::L1{}, lambda}; }
  static Regularizer group(std::vector<Index> sizes, double lambda) {
    return {kernel::Group{std::move(sizes)}, lambda};
  }
  static Regularizer nuclear(Index d1, Index d2, double lambda) {
    return {kernel::Nuclear{d1, d2}, lambda};
  }
  static Regularizer box(double a, double b) { return {kernel::Box{a, b}, 1.0}; }

  const Kernel& kernel() const { return kernel_; }
  double strength() const { return strength_; }
  Regularizer with_strength(double s) const { return {kernel_, s}; }

  bool is_none() const { return std::holds_alternative<kernel::None>(kernel_); }
  bool is_indicator() const { return std::holds_alternative<kernel::Box>(kernel_); }

  /// Throws unless this kernel is defined on vectors of length p.
  void check_dimension(Index p) const {
    if (const auto* g = std::get_if<kernel::Group>(&kernel_)) {
      const Index total = std::accumulate(g->sizes.begin(), g->sizes.end(), Index{0});
      if (total != p) {
        throw DimensionError("Regularizer: group sizes sum to " + std::to_string(total) +
                             ", expected " + std::to_string(p));
      }
    }
    if (const auto* n = std::get_if<kernel::Nuclear>(&kernel_)) {
      if (n->rows * n->cols != p) {
        throw DimensionError("Regularizer: nuclear shape " + std::to_string(n->rows) + "x" +
                             std::to_string(n->cols) + " does not match length " +
                             std::to_string(p));
      }
    }
  }

  /// Unit-strength kernel value rho_0(x); +inf outside the box for indicators.
  double kernel_value(const VectorXd& x) const;

 private:
  Kernel kernel_ = kernel::None{};
  double strength_ = 0.0;
};

class ProxError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline double soft(double x, double t) {
  const double m = std::abs(x) - t;
  return m > 0.0 ? std::copysign(m, x) : 0.0;
}

template <class F>
void for_each_group(const std::vector<Index>& sizes, F&& f) {
  Index start = 0;
  for (Index s : sizes) {
    f(start, s);
    start += s;
  }
}

inline MatrixXd as_matrix(const VectorXd& x, Index rows, Index cols) {
  return Eigen::Map<const MatrixXd>(x.data(), rows, cols);
}

}  // namespace detail

inline double Regularizer::kernel_value(const VectorXd& x) const {
  check_dimension(x.size());
  return std::visit(
      [&](const auto& k) -> double {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, kernel::None>) {
          return 0.0;
        } else if constexpr (std::is_same_v<K, kernel::L1>) {
          return x.lpNorm<1>();
        } else if constexpr (std::is_same_v<K, kernel::Group>) {
          double total = 0.0;
          detail::for_each_group(k.sizes, [&](Index start, Index size) {
            total += std::sqrt(static_cast<double>(size)) * x.segment(start, size).norm();
          });
          return total;
        } else if constexpr (std::is_same_v<K, kernel::Nuclear>) {
          Eigen::BDCSVD<MatrixXd> svd(detail::as_matrix(x, k.rows, k.cols));
          return svd.singularValues().sum();
        } else {
          const bool inside = (x.array() >= k.lower).all() && (x.array() <= k.upper).all();
          return inside ? 0.0 : std::numeric_limits<double>::infinity();
        }
      },
      kernel_);
}

/// argmin_u t * rho_0(u) + 0.5 ||u - x||^2 for the unit-strength kernel.
/// Box kernels ignore t (projection).
inline VectorXd prox(const Regularizer& reg, double t, const VectorXd& x) {
  if (!(t >= 0.0)) throw ProxError("prox: threshold must be nonnegative");
  reg.check_dimension(x.size());
  return std::visit(
      [&](const auto& k) -> VectorXd {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, kernel::None>) {
          return x;
        } else if constexpr (std::is_same_v<K, kernel::L1>) {
          return x.unaryExpr([t](double xi) { return detail::soft(xi, t); });
        } else if constexpr (std::is_same_v<K, kernel::Group>) {
          VectorXd out(x.size());
          detail::for_each_group(k.sizes, [&](Index start, Index size) {
            const auto block = x.segment(start, size);
            const double norm = block.norm();
            const double thresh = t * std::sqrt(static_cast<double>(size));
            if (norm > thresh) {
              out.segment(start, size) = (1.0 - thresh / norm) * block;
            } else {
              out.segment(start, size).setZero();
            }
          });
          return out;
        } else if constexpr (std::is_same_v<K, kernel::Nuclear>) {
          Eigen::BDCSVD<MatrixXd> svd(detail::as_matrix(x, k.rows, k.cols),
                                      Eigen::ComputeThinU | Eigen::ComputeThinV);
          if (svd.info() != Eigen::Success) throw ProxError("prox: SVD failed");
          VectorXd sigma = svd.singularValues().unaryExpr(
              [t](double s) { return std::max(s - t, 0.0); });
          MatrixXd out = svd.matrixU() * sigma.asDiagonal() * svd.matrixV().transpose();
          return Eigen::Map<const VectorXd>(out.data(), out.size());
        } else {
          return x.cwiseMax(k.lower).cwiseMin(k.upper);
        }
      },
      reg.kernel());
}

/// Number of nonzero groups/entries or retained singular values of a prox output.
inline Index support_size(const Regularizer& reg, const VectorXd& x, double tol = 1e-6) {
  if (const auto* n = std::get_if<kernel::Nuclear>(&reg.kernel())) {
    Eigen::BDCSVD<MatrixXd> svd(detail::as_matrix(x, n->rows, n->cols));
    return (svd.singularValues().array() > tol).count();
  }
  return (x.array().abs() > tol).count();
}

/// J_{mu Q}: prox with threshold mu*lambda on both blocks.
inline StackedPoint resolvent_q(const Regularizer& reg, double mu, const StackedPoint& z) {
  if (!(mu > 0.0)) throw std::invalid_argument("resolvent_q: mu must be positive");
  const double t = mu * reg.strength();
  return StackedPoint(prox(reg, t, z.x()), prox(reg, t, z.v()));
}

/// J_{mu R}. In constraint mode R = [d iota_C(x); 0], so only x is projected.
inline StackedPoint resolvent_r(const Regularizer& reg, double mu, const StackedPoint& z,
                                bool constraint_mode) {
  if (!(mu > 0.0)) throw std::invalid_argument("resolvent_r: mu must be positive");
  if (constraint_mode) {
    StackedPoint out = z;
    out.x() = prox(reg, 0.0, z.x());
    return out;
  }
  return resolvent_q(reg, mu, z);
}

}  // namespace cncaa
