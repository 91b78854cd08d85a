#pragma once

// Regularized, safeguarded type-II Anderson acceleration of a fixed-point map
// F, following the A2OS loop:
//
//   g^k   = z^k - F(z^k)
//   zeta  = (Y^T Y + eta (||S||_F^2 + ||Y||_F^2) I)^+ Y^T g^k
//   alpha = (zeta_0, zeta_1 - zeta_0, ..., 1 - zeta_{m-1})
//   z_AA  = sum_j alpha_j F(z^{k-m+j})
//
// The candidate is adopted only while the residual stays below the decaying
// bound D ||g^0|| (i + 1)^{-1-eps}; otherwise the plain step F(z^k) is taken.

#include "cncaa/linops.hpp"
#include "cncaa/splitting.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <chrono>
#include <cmath>
#include <deque>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cncaa {

struct AAConfig {
  int memory = 10;
  double eta = 1e-2;
  double D = 10.0;
  double epsilon = 1e-6;
  /// Stop when ||g^k|| < (||z^k|| + 1) eps_tol.
  double eps_tol = 1e-5;
  int max_iter = 10000;
  bool record_iterates = false;

  /// Unregularized, never-rejecting AA (eta = 0, D = inf, eps = 0).
  static AAConfig naive(int memory = 1) {
    AAConfig c;
    c.memory = memory;
    c.eta = 0.0;
    c.D = std::numeric_limits<double>::infinity();
    c.epsilon = 0.0;
    return c;
  }

  /// D = 0: every safeguard check fails and the plain iteration is run.
  static AAConfig plain() {
    AAConfig c;
    c.D = 0.0;
    return c;
  }

  bool accelerated() const { return D > 0.0; }

  void validate() const {
    if (memory < 1) throw std::invalid_argument("AAConfig: memory must be >= 1");
    if (!(eta >= 0.0)) throw std::invalid_argument("AAConfig: eta must be >= 0");
    if (!(D >= 0.0)) throw std::invalid_argument("AAConfig: D must be >= 0");
    if (!(epsilon >= 0.0)) throw std::invalid_argument("AAConfig: epsilon must be >= 0");
    if (!(eps_tol >= 0.0)) throw std::invalid_argument("AAConfig: eps_tol must be >= 0");
    if (max_iter < 1) throw std::invalid_argument("AAConfig: max_iter must be >= 1");
  }
};

/// FIFO history: up to M+1 images F(z) and M pairs (y, ||s||^2).
class AAMemory {
 public:
  explicit AAMemory(int memory) : memory_(memory) {}

  void push_image(VectorXd f) {
    images_.push_back(std::move(f));
    if (static_cast<int>(images_.size()) > memory_ + 1) images_.pop_front();
  }

  void push_difference(VectorXd y, double s_sq) {
    ys_.push_back(std::move(y));
    s_sq_.push_back(s_sq);
    if (static_cast<int>(ys_.size()) > memory_) {
      ys_.pop_front();
      s_sq_.pop_front();
    }
  }

  /// M^k, the number of difference columns.
  int size() const { return static_cast<int>(ys_.size()); }
  int image_count() const { return static_cast<int>(images_.size()); }

  MatrixXd y_matrix() const {
    MatrixXd y(ys_.empty() ? 0 : ys_.front().size(), size());
    for (int j = 0; j < size(); ++j) y.col(j) = ys_[static_cast<std::size_t>(j)];
    return y;
  }

  double s_sq_sum() const {
    double total = 0.0;
    for (double s : s_sq_) total += s;
    return total;
  }

  const std::deque<VectorXd>& images() const { return images_; }

  void clear() {
    images_.clear();
    ys_.clear();
    s_sq_.clear();
  }

 private:
  int memory_;
  std::deque<VectorXd> images_;
  std::deque<VectorXd> ys_;
  std::deque<double> s_sq_;
};

struct SafeguardState {
  int accepted = 0;
  double g0_norm = 0.0;
};

struct SolveReport {
  VectorXd z_final;
  std::vector<double> residuals;
  std::vector<bool> aa_accepted;
  /// Iterations where an adopted candidate was non-finite and F(z) was used.
  std::vector<int> fallback_iterations;
  /// z^k per iteration, only when AAConfig::record_iterates is set.
  std::vector<VectorXd> iterates;
  int iterations = 0;
  int aa_accepts = 0;
  bool converged = false;
  double wall_time = 0.0;

  StackedPoint stacked() const { return StackedPoint::from_flat(z_final); }
  double final_residual() const { return residuals.empty() ? 0.0 : residuals.back(); }
};

class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, int iteration)
      : std::runtime_error(what + " at iteration " + std::to_string(iteration)),
        iteration_(iteration) {}
  int iteration() const { return iteration_; }

 private:
  int iteration_;
};

/// Minimum-norm solution of the regularized normal equations for zeta.
inline VectorXd aa_zeta(const MatrixXd& y, double s_sq_sum, const VectorXd& g, double eta) {
  if (y.cols() < 1) throw std::invalid_argument("aa_zeta: empty history");
  detail::require_size(g.size(), y.rows(), "aa_zeta residual");
  MatrixXd gram = y.transpose() * y;
  const double reg = eta * (s_sq_sum + y.squaredNorm());
  gram.diagonal().array() += reg;
  const VectorXd rhs = y.transpose() * g;
  if (reg > 0.0) {
    Eigen::LLT<MatrixXd> llt(gram);
    if (llt.info() == Eigen::Success) return llt.solve(rhs);
  }
  Eigen::JacobiSVD<MatrixXd> svd(gram, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const VectorXd& sigma = svd.singularValues();
  const double cutoff = 1e-12 * (sigma.size() > 0 ? sigma(0) : 0.0);
  VectorXd proj = svd.matrixU().transpose() * rhs;
  for (Index i = 0; i < sigma.size(); ++i) {
    proj(i) = (sigma(i) > cutoff && sigma(i) > 0.0) ? proj(i) / sigma(i) : 0.0;
  }
  return svd.matrixV() * proj;
}

inline VectorXd zeta_to_alpha(const VectorXd& zeta) {
  const Index m = zeta.size();
  if (m < 1) throw std::invalid_argument("zeta_to_alpha: empty zeta");
  VectorXd alpha(m + 1);
  alpha(0) = zeta(0);
  for (Index i = 1; i < m; ++i) alpha(i) = zeta(i) - zeta(i - 1);
  alpha(m) = 1.0 - zeta(m - 1);
  return alpha;
}

template <class Images>
VectorXd aa_candidate(const Images& images, const VectorXd& alpha) {
  const auto count = static_cast<Index>(std::size(images));
  if (count != alpha.size()) {
    throw DimensionError("aa_candidate: " + std::to_string(count) + " images but " +
                         std::to_string(alpha.size()) + " weights");
  }
  if (count == 0) throw std::invalid_argument("aa_candidate: empty history");
  VectorXd out = VectorXd::Zero(std::begin(images)->size());
  Index j = 0;
  for (const auto& f : images) out += alpha(j++) * f;
  return out;
}

/// The per-iteration test of A2OS. FBFS tests the forward-backward residual
/// against half the bound.
inline bool safeguard_pass(Scheme scheme, double g_norm, std::optional<double> g_fbs_norm,
                           const SafeguardState& sg, const AAConfig& cfg) {
  if (cfg.D == 0.0) return false;
  const bool fbfs = scheme == Scheme::fbfs;
  if (fbfs && !g_fbs_norm) {
    throw std::invalid_argument("safeguard_pass: FBFS needs the forward-backward residual");
  }
  if (std::isinf(cfg.D)) return true;
  const double bound =
      cfg.D * sg.g0_norm * std::pow(static_cast<double>(sg.accepted + 1), -1.0 - cfg.epsilon);
  if (fbfs) return *g_fbs_norm <= 0.5 * bound;
  return g_norm <= bound;
}

/// One evaluation of a fixed-point map: F(z), plus ||z - z_fbs|| for FBFS.
struct FixedPointEval {
  VectorXd image;
  std::optional<double> fbs_residual_norm;
};

/// A2OS over an arbitrary fixed-point map on flat vectors. `scheme` selects
/// the safeguard rule.
template <class Map>
SolveReport a2os_iterate(Map&& map, Scheme scheme, VectorXd z, const AAConfig& cfg) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  SolveReport rep;
  SafeguardState sg;
  const auto finish = [&](VectorXd final_point, bool converged) {
    rep.z_final = std::move(final_point);
    rep.aa_accepts = sg.accepted;
    rep.converged = converged;
    rep.iterations = static_cast<int>(rep.residuals.size());
    rep.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rep;
  };
  const auto done = [&](double g_norm, const VectorXd& point) {
    return g_norm < (point.norm() + 1.0) * cfg.eps_tol;
  };

  FixedPointEval first = map(z);
  if (!first.image.allFinite()) throw NumericalError("non-finite fixed-point image", 0);
  VectorXd g_prev = z - first.image;
  sg.g0_norm = g_prev.norm();
  rep.residuals.push_back(sg.g0_norm);
  rep.aa_accepted.push_back(false);
  if (cfg.record_iterates) rep.iterates.push_back(z);
  if (done(sg.g0_norm, z)) return finish(std::move(first.image), true);

  AAMemory memory(cfg.memory);
  const bool accelerate = cfg.accelerated();
  if (accelerate) memory.push_image(first.image);
  VectorXd z_prev = std::move(z);
  z = std::move(first.image);

  for (int k = 1; k < cfg.max_iter; ++k) {
    FixedPointEval ev = map(z);
    if (!ev.image.allFinite()) throw NumericalError("non-finite fixed-point image", k);
    VectorXd g = z - ev.image;
    const double g_norm = g.norm();
    rep.residuals.push_back(g_norm);
    if (cfg.record_iterates) rep.iterates.push_back(z);
    if (done(g_norm, z)) {
      rep.aa_accepted.push_back(false);
      return finish(std::move(ev.image), true);
    }

    bool adopt = false;
    VectorXd next;
    if (accelerate) {
      memory.push_image(ev.image);
      memory.push_difference(g - g_prev, (z - z_prev).squaredNorm());
      if (safeguard_pass(scheme, g_norm, ev.fbs_residual_norm, sg, cfg)) {
        const VectorXd zeta = aa_zeta(memory.y_matrix(), memory.s_sq_sum(), g, cfg.eta);
        next = aa_candidate(memory.images(), zeta_to_alpha(zeta));
        if (next.allFinite()) {
          adopt = true;
          ++sg.accepted;
        } else {
          rep.fallback_iterations.push_back(k);
        }
      }
    }
    rep.aa_accepted.push_back(adopt);
    if (!adopt) next = std::move(ev.image);
    z_prev = std::move(z);
    g_prev = std::move(g);
    z = std::move(next);
  }
  return finish(std::move(z), false);
}

/// Algorithm A2OS applied to a configured splitting.
inline SolveReport a2os_solve(const Splitting& split, const StackedPoint& z0,
                              const AAConfig& cfg) {
  detail::require_size(z0.block_size(), split.p().block_size(), "a2os_solve z0");
  auto map = [&split](const VectorXd& z) {
    StepResult step = split.step(StackedPoint::from_flat(z));
    FixedPointEval ev{std::move(step.z_next.flat()), std::nullopt};
    if (step.g_fbs) ev.fbs_residual_norm = step.g_fbs->norm();
    return ev;
  };
  return a2os_iterate(map, split.scheme(), z0.flat(), cfg);
}

}  // namespace cncaa
