#pragma once

// Problem builders: map a model description onto (P, Q, R), compute lambda_max,
// extract x-hat from a fixed point, and run warm-started solution paths.

#include "cncaa/anderson.hpp"
#include "cncaa/linops.hpp"
#include "cncaa/prox.hpp"
#include "cncaa/splitting.hpp"

#include <chrono>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

namespace cncaa {

namespace model {

/// l1 kernel (GMC penalty).
struct Gmc {};
struct GroupGmc {
  std::vector<Index> group_sizes;
};
struct MatrixRegression {
  Index rows = 0;
  Index cols = 0;
};
/// Observation set comes from the entry-mask measurement operator.
struct MatrixCompletion {
  Index rows = 0;
  Index cols = 0;
};
/// lambda_1 = lambda on the l1 kernel, lambda_2 = alpha * lambda on the group kernel.
struct SparseGroupLasso {
  std::vector<Index> group_sizes;
  double alpha = 1.0 / 19.0;
};

}  // namespace model

using Model = std::variant<model::Gmc, model::GroupGmc, model::MatrixRegression,
                           model::MatrixCompletion, model::SparseGroupLasso>;

inline std::string model_name(const Model& m) {
  return std::visit(
      [](const auto& k) -> std::string {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, model::Gmc>) return "gmc";
        if constexpr (std::is_same_v<K, model::GroupGmc>) return "group_gmc";
        if constexpr (std::is_same_v<K, model::MatrixRegression>) return "matrix_regression";
        if constexpr (std::is_same_v<K, model::MatrixCompletion>) return "matrix_completion";
        if constexpr (std::is_same_v<K, model::SparseGroupLasso>) return "sparse_group_lasso";
      },
      m);
}

inline bool is_matrix_model(const Model& m) {
  return std::holds_alternative<model::MatrixRegression>(m) ||
         std::holds_alternative<model::MatrixCompletion>(m);
}

struct ProblemSpec {
  Model model = model::Gmc{};
  double gamma = 0.8;
  double lambda = 0.0;
  /// Optional box constraint on x, handled as R = [d iota_C(x); 0].
  std::optional<kernel::Box> box;

  void validate() const {
    if (!(gamma >= 0.0 && gamma <= 1.0)) {
      throw std::invalid_argument("ProblemSpec: gamma must lie in [0, 1]");
    }
    if (!(lambda >= 0.0)) throw std::invalid_argument("ProblemSpec: lambda must be >= 0");
    if (const auto* sgl = std::get_if<model::SparseGroupLasso>(&model)) {
      if (!(sgl->alpha > 0.0)) throw std::invalid_argument("ProblemSpec: alpha must be > 0");
      if (box) {
        throw std::invalid_argument(
            "ProblemSpec: sparse group lasso already uses R; a box constraint is not supported");
      }
    }
    if (box && !(box->lower <= box->upper)) {
      throw std::invalid_argument("ProblemSpec: box needs lower <= upper");
    }
  }
};

struct Problem {
  ProblemSpec spec;
  CncOperator p;
  Regularizer q;
  std::optional<Regularizer> r;
  bool constraint_mode = false;

  bool requires_dys() const { return r.has_value(); }
  Index block_size() const { return p.block_size(); }
};

namespace detail {

inline void check_model_operator(const Model& m, const MeasurementOp& a) {
  if (const auto* mc = std::get_if<model::MatrixCompletion>(&m)) {
    if (!a.is_mask()) throw std::invalid_argument("matrix_completion needs an entry-mask operator");
    if (a.mask_rows() != mc->rows || a.mask_cols() != mc->cols) {
      throw DimensionError("matrix_completion: mask shape does not match model shape");
    }
    return;
  }
  if (a.is_mask()) {
    throw std::invalid_argument(model_name(m) + " needs a dense design matrix");
  }
  if (const auto* mr = std::get_if<model::MatrixRegression>(&m)) {
    if (mr->rows * mr->cols != a.cols()) {
      throw DimensionError("matrix_regression: d1*d2 does not match the number of columns of A");
    }
  }
}

}  // namespace detail

/// Q and R penalty operators of a model at penalty level lambda.
inline std::pair<Regularizer, std::optional<Regularizer>> regularizers_for(
    const ProblemSpec& spec, double lambda) {
  std::pair<Regularizer, std::optional<Regularizer>> out = std::visit(
      [lambda](const auto& k) -> std::pair<Regularizer, std::optional<Regularizer>> {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, model::Gmc>) {
          return {Regularizer::l1(lambda), std::nullopt};
        } else if constexpr (std::is_same_v<K, model::GroupGmc>) {
          return {Regularizer::group(k.group_sizes, lambda), std::nullopt};
        } else if constexpr (std::is_same_v<K, model::SparseGroupLasso>) {
          return {Regularizer::l1(lambda), Regularizer::group(k.group_sizes, k.alpha * lambda)};
        } else {
          return {Regularizer::nuclear(k.rows, k.cols, lambda), std::nullopt};
        }
      },
      spec.model);
  if (spec.box) out.second = Regularizer::box(spec.box->lower, spec.box->upper);
  return out;
}

inline Problem build(const ProblemSpec& spec, const MeasurementOp& a, const VectorXd& y,
                     const PowerIterationOptions& power = {}) {
  spec.validate();
  detail::check_model_operator(spec.model, a);
  auto [q, r] = regularizers_for(spec, spec.lambda);
  Problem prob{spec, CncOperator(a, spec.gamma, y, power), std::move(q), std::move(r),
               spec.box.has_value()};
  prob.q.check_dimension(prob.block_size());
  if (prob.r) prob.r->check_dimension(prob.block_size());
  return prob;
}

/// Smallest lambda with an all-zero solution: max_j |a_j^T y| for l1 kernels
/// (also used for sparse group lasso), max_j ||A_(j)^T y|| / sqrt(p_j) for groups.
inline double lambda_max(const ProblemSpec& spec, const MeasurementOp& a, const VectorXd& y) {
  if (is_matrix_model(spec.model)) {
    throw std::invalid_argument("lambda_max: no rule for " + model_name(spec.model) +
                                "; supply an explicit lambda grid");
  }
  detail::check_model_operator(spec.model, a);
  const VectorXd aty = a.apply_adjoint(y);
  if (const auto* grp = std::get_if<model::GroupGmc>(&spec.model)) {
    Regularizer(kernel::Group{grp->group_sizes}, 0.0).check_dimension(aty.size());
    double best = 0.0;
    detail::for_each_group(grp->group_sizes, [&](Index start, Index size) {
      best = std::max(best, aty.segment(start, size).norm() / std::sqrt(static_cast<double>(size)));
    });
    return best;
  }
  return aty.cwiseAbs().maxCoeff();
}

inline Splitting make_splitting(const Problem& prob, Scheme scheme,
                                std::optional<double> mu = std::nullopt) {
  if (prob.requires_dys() && scheme != Scheme::dys) {
    throw std::invalid_argument(std::string(to_string(scheme)) + ": model '" +
                                model_name(prob.spec.model) +
                                (prob.constraint_mode ? "' with a box constraint" : "'") +
                                " has three operators and requires DYS");
  }
  return Splitting(scheme, prob.p, prob.q, prob.r, prob.constraint_mode, mu);
}

/// x-hat, v-hat from a fixed point: z itself for FBS/FBFS, J_{mu P} z for DRS,
/// J_{mu R} z for DYS.
inline StackedPoint extract_solution(const Splitting& split, const StackedPoint& z) {
  switch (split.scheme()) {
    case Scheme::fbs:
    case Scheme::fbfs:
      return z;
    case Scheme::drs:
      return split.resolvent_p(z);
    case Scheme::dys:
      return resolvent_r(split.r() ? *split.r() : Regularizer::none(), split.mu(), z,
                         split.constraint_mode());
  }
  throw std::logic_error("extract_solution: unreachable");
}

/// Saddle value H(x, v); equals the CNC objective h(x) when v maximizes H.
inline double objective_value(const Problem& prob, const StackedPoint& sol) {
  const auto& a = prob.p.measurement();
  const double g = prob.p.gamma();
  const VectorXd resid = prob.p.target() - a.apply(sol.x());
  const VectorXd diff = a.apply(sol.x() - sol.v());
  double h = 0.5 * resid.squaredNorm() - 0.5 * g * diff.squaredNorm();
  const auto add = [&](const Regularizer& reg) {
    if (reg.is_indicator() || reg.is_none()) return;
    h += reg.strength() * (reg.kernel_value(sol.x()) - reg.kernel_value(sol.v()));
  };
  add(prob.q);
  if (prob.r) add(*prob.r);
  return h;
}

namespace detail {

// Distance from u to lambda1 d||.||_1(x) + lambda2 d(sum sqrt(p_j) ||x_j||)(x), one
// value per coordinate (l1 part) or group; returns the largest.
inline double inclusion_distance(const VectorXd& u, const VectorXd& x, double lambda1,
                                 const std::vector<Index>* groups, double lambda2,
                                 double zero_tol) {
  double worst = 0.0;
  const auto coord = [&](Index j, double extra) {
    const double uj = u(j) - extra;
    if (std::abs(x(j)) > zero_tol) return std::abs(uj - lambda1 * (x(j) > 0 ? 1.0 : -1.0));
    return std::max(std::abs(uj) - lambda1, 0.0);
  };
  if (!groups) {
    for (Index j = 0; j < u.size(); ++j) worst = std::max(worst, coord(j, 0.0));
    return worst;
  }
  for_each_group(*groups, [&](Index start, Index size) {
    const double w = lambda2 * std::sqrt(static_cast<double>(size));
    const auto xg = x.segment(start, size);
    const double xn = xg.norm();
    if (xn > zero_tol) {
      for (Index j = start; j < start + size; ++j) {
        worst = std::max(worst, coord(j, w * x(j) / xn));
      }
    } else {
      // Zero block: best l1 subgradient is clamp(u, +-lambda1); the rest must fit in the w-ball.
      double excess = 0.0;
      for (Index j = start; j < start + size; ++j) {
        const double s = soft(u(j), lambda1);
        excess += s * s;
      }
      worst = std::max(worst, std::max(std::sqrt(excess) - w, 0.0));
    }
  });
  return worst;
}

}  // namespace detail

/// Largest violation of the saddle-point optimality inclusions
///   -P_x(x, v) in (lambda d rho)(x),   -P_v(x, v) in (lambda d rho)(v)
/// for l1, group and sparse-group kernels. Coordinates with |x_j| <= zero_tol
/// count as zero.
inline double subgradient_residual(const Problem& prob, const StackedPoint& sol,
                                   double zero_tol = 1e-6) {
  if (prob.constraint_mode) {
    throw std::invalid_argument("subgradient_residual: constrained models are not supported");
  }
  const StackedPoint u = -1.0 * prob.p.forward(sol);
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  const std::vector<Index>* groups = nullptr;
  const auto take = [&](const Regularizer& reg) {
    if (std::holds_alternative<kernel::L1>(reg.kernel())) {
      lambda1 = reg.strength();
    } else if (const auto* g = std::get_if<kernel::Group>(&reg.kernel())) {
      lambda2 = reg.strength();
      groups = &g->sizes;
    } else if (!reg.is_none()) {
      throw std::invalid_argument("subgradient_residual: only l1/group kernels are supported");
    }
  };
  take(prob.q);
  if (prob.r) take(*prob.r);
  const VectorXd ux = u.x();
  const VectorXd uv = u.v();
  return std::max(detail::inclusion_distance(ux, sol.x(), lambda1, groups, lambda2, zero_tol),
                  detail::inclusion_distance(uv, sol.v(), lambda1, groups, lambda2, zero_tol));
}

/// Nonzero count for vector models, retained rank for matrix models.
inline Index solution_support(const Problem& prob, const VectorXd& x, double tol = 1e-6) {
  return support_size(prob.q, x, tol);
}

/// n log(RSS / n) + df log(n), with df = nnz for vector models and
/// r (d1 + d2 - r) for rank-r matrix estimates.
inline double bic(const Problem& prob, const VectorXd& x, double support_tol = 1e-6) {
  const auto& a = prob.p.measurement();
  const double n = static_cast<double>(a.observed_count());
  const double rss = std::max((prob.p.target() - a.apply(x)).squaredNorm(), 1e-300);
  double df = static_cast<double>(solution_support(prob, x, support_tol));
  if (const auto* nuc = std::get_if<kernel::Nuclear>(&prob.q.kernel())) {
    df = df * static_cast<double>(nuc->rows + nuc->cols) - df * df;
  }
  return n * std::log(rss / n) + df * std::log(n);
}

struct PathSpec {
  std::vector<double> lambdas;

  /// n values log-spaced from hi down to lo.
  static PathSpec log_grid(double hi, double lo, int n) {
    if (n < 1) throw std::invalid_argument("PathSpec: need at least one grid point");
    if (!(hi > 0.0 && lo > 0.0)) throw std::invalid_argument("PathSpec: bounds must be positive");
    if (n > 1 && !(hi > lo)) throw std::invalid_argument("PathSpec: need hi > lo");
    PathSpec out;
    out.lambdas.reserve(static_cast<std::size_t>(n));
    const double lh = std::log10(hi);
    const double ll = std::log10(lo);
    for (int i = 0; i < n; ++i) {
      const double t = n == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(n - 1);
      out.lambdas.push_back(std::pow(10.0, lh + t * (ll - lh)));
    }
    out.lambdas.front() = hi;
    if (n > 1) out.lambdas.back() = lo;
    return out;
  }

  void validate() const {
    if (lambdas.empty()) throw std::invalid_argument("PathSpec: empty grid");
    for (std::size_t i = 1; i < lambdas.size(); ++i) {
      if (!(lambdas[i] < lambdas[i - 1])) {
        throw std::invalid_argument("PathSpec: grid must be strictly decreasing");
      }
    }
  }
};

struct PathPoint {
  double lambda = 0.0;
  StackedPoint solution;
  SolveReport report;
  double objective = 0.0;
  Index support = 0;
  std::string error;
};

struct PathResult {
  std::vector<PathPoint> points;
  long total_iterations = 0;
  long total_aa_accepts = 0;
  double total_seconds = 0.0;
};

/// Sequential solves along a decreasing grid, each started from the previous
/// fixed point (the first from z = 0). Per-lambda failures are recorded and
/// the path continues.
inline PathResult solve_path(const ProblemSpec& spec, const MeasurementOp& a, const VectorXd& y,
                             const PathSpec& path, Scheme scheme, const AAConfig& cfg,
                             std::optional<double> mu = std::nullopt,
                             const PowerIterationOptions& power = {}) {
  path.validate();
  ProblemSpec first = spec;
  first.lambda = path.lambdas.front();
  Problem prob = build(first, a, y, power);
  const Splitting base = make_splitting(prob, scheme, mu);

  PathResult out;
  StackedPoint z(prob.block_size());
  for (double lambda : path.lambdas) {
    PathPoint pt;
    pt.lambda = lambda;
    const auto start = std::chrono::steady_clock::now();
    try {
      auto [q, r] = regularizers_for(spec, lambda);
      Splitting split = base.with_regularizers(q, r);
      prob.q = std::move(q);
      prob.r = std::move(r);
      prob.spec.lambda = lambda;
      pt.report = a2os_solve(split, z, cfg);
      z = pt.report.stacked();
      pt.solution = extract_solution(split, z);
      pt.objective = objective_value(prob, pt.solution);
      pt.support = solution_support(prob, pt.solution.x());
    } catch (const std::exception& e) {
      pt.error = e.what();
      pt.report.wall_time =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
    out.total_iterations += pt.report.iterations;
    out.total_aa_accepts += pt.report.aa_accepts;
    out.total_seconds += pt.report.wall_time;
    out.points.push_back(std::move(pt));
  }
  return out;
}

}  // namespace cncaa
