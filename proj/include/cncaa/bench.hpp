#pragma once

// Synthetic data, accuracy metrics, the scalar pathological fixed-point
// example, and the desk-scale experiment drivers used by `bench`.

#include "cncaa/anderson.hpp"
#include "cncaa/linops.hpp"
#include "cncaa/problems.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace cncaa {

struct SyntheticSpec {
  Index n = 200;
  Index p = 500;
  double ar = 0.3;
  /// Leading n_pos coefficients are +1, the next n_neg are -1, the rest 0.
  Index n_pos = 10;
  Index n_neg = 10;
  double snr = 1.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (n < 1 || p < 1) throw std::invalid_argument("SyntheticSpec: n and p must be positive");
    if (!(std::abs(ar) < 1.0)) throw std::invalid_argument("SyntheticSpec: need |ar| < 1");
    if (!(snr > 0.0)) throw std::invalid_argument("SyntheticSpec: snr must be positive");
    if (n_pos < 0 || n_neg < 0 || n_pos + n_neg > p) {
      throw std::invalid_argument("SyntheticSpec: support does not fit in p coefficients");
    }
  }
};

struct Dataset {
  MatrixXd a;
  VectorXd y;
  VectorXd x_true;
  double noise_var = 0.0;
};

/// Sigma_ij = ar^|i-j|.
inline double ar_covariance(double ar, Index i, Index j) {
  return std::pow(ar, static_cast<double>(std::abs(i - j)));
}

/// x^T Sigma x over the nonzeros of x.
inline double ar_quadratic_form(double ar, const VectorXd& x) {
  std::vector<Index> nz;
  for (Index i = 0; i < x.size(); ++i) {
    if (x(i) != 0.0) nz.push_back(i);
  }
  double total = 0.0;
  for (Index i : nz) {
    for (Index j : nz) total += x(i) * x(j) * ar_covariance(ar, i, j);
  }
  return total;
}

inline VectorXd signed_support_signal(Index p, Index n_pos, Index n_neg) {
  VectorXd x = VectorXd::Zero(p);
  x.head(n_pos).setConstant(1.0);
  x.segment(n_pos, n_neg).setConstant(-1.0);
  return x;
}

namespace detail {

// Rows of A ~ N(0, Sigma) with the AR(1) covariance, through the stationary
// recursion x_j = ar x_{j-1} + sqrt(1 - ar^2) e_j (the bidiagonal inverse
// Cholesky factor applied row by row).
inline MatrixXd ar_design(Index n, Index p, double ar, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const double scale = std::sqrt(1.0 - ar * ar);
  MatrixXd a(n, p);
  for (Index i = 0; i < n; ++i) {
    double prev = normal(rng);
    a(i, 0) = prev;
    for (Index j = 1; j < p; ++j) {
      prev = ar * prev + scale * normal(rng);
      a(i, j) = prev;
    }
  }
  return a;
}

}  // namespace detail

/// y = A x* + eps with eps_i ~ N(0, x*^T Sigma x* / snr^2).
inline Dataset gen_regression(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  Dataset d;
  d.a = detail::ar_design(spec.n, spec.p, spec.ar, rng);
  d.x_true = signed_support_signal(spec.p, spec.n_pos, spec.n_neg);
  d.noise_var = ar_quadratic_form(spec.ar, d.x_true) / (spec.snr * spec.snr);
  std::normal_distribution<double> noise(0.0, std::sqrt(d.noise_var));
  d.y = d.a * d.x_true;
  for (Index i = 0; i < spec.n; ++i) d.y(i) += noise(rng);
  return d;
}

/// Consecutive groups of equal size covering p coefficients.
inline std::vector<Index> equal_groups(Index p, Index group_size) {
  if (group_size < 1 || p % group_size != 0) {
    throw std::invalid_argument("equal_groups: group size must divide p");
  }
  return std::vector<Index>(static_cast<std::size_t>(p / group_size), group_size);
}

enum class MatrixShape { cross, checkerboard };

inline MatrixShape parse_matrix_shape(const std::string& s) {
  if (s == "cross") return MatrixShape::cross;
  if (s == "checkerboard") return MatrixShape::checkerboard;
  throw std::invalid_argument("unknown matrix signal '" + s + "'");
}

struct MatrixSignal {
  MatrixShape shape = MatrixShape::cross;
  Index rows = 32;
  Index cols = 32;
  /// Each cell of the base pattern is repeated magnification x magnification times.
  Index magnification = 1;
};

/// Binary pattern: a centered cross (bands of width base/4) or a 4 x 4 board
/// of alternating blocks, on a (rows/mag) x (cols/mag) grid and then magnified.
inline MatrixXd matrix_signal(const MatrixSignal& s) {
  if (s.magnification < 1 || s.rows % s.magnification || s.cols % s.magnification) {
    throw std::invalid_argument("matrix_signal: magnification must divide both dimensions");
  }
  const Index b1 = s.rows / s.magnification;
  const Index b2 = s.cols / s.magnification;
  if (b1 < 4 || b2 < 4) throw std::invalid_argument("matrix_signal: base grid must be >= 4x4");
  MatrixXd base = MatrixXd::Zero(b1, b2);
  for (Index i = 0; i < b1; ++i) {
    for (Index j = 0; j < b2; ++j) {
      if (s.shape == MatrixShape::cross) {
        const bool in_row = std::abs(2 * i + 1 - b1) < b1 / 4 + 1;
        const bool in_col = std::abs(2 * j + 1 - b2) < b2 / 4 + 1;
        base(i, j) = (in_row || in_col) ? 1.0 : 0.0;
      } else {
        base(i, j) = (((4 * i) / b1 + (4 * j) / b2) % 2 == 0) ? 1.0 : 0.0;
      }
    }
  }
  MatrixXd out(s.rows, s.cols);
  for (Index i = 0; i < s.rows; ++i) {
    for (Index j = 0; j < s.cols; ++j) out(i, j) = base(i / s.magnification, j / s.magnification);
  }
  return out;
}

inline VectorXd vec(const MatrixXd& m) { return Eigen::Map<const VectorXd>(m.data(), m.size()); }

struct MatrixDataset {
  MeasurementOp a;
  VectorXd y;
  VectorXd x_true;
  Index rows = 0;
  Index cols = 0;
  double noise_var = 0.0;
};

/// y_i = <X_i, B> + eps_i with iid N(0, 1) covariates and N(0, noise_sd^2) noise.
inline MatrixDataset gen_matrix_regression(const MatrixSignal& sig, Index n, double noise_sd,
                                           std::uint64_t seed) {
  if (n < 1 || !(noise_sd >= 0.0)) {
    throw std::invalid_argument("gen_matrix_regression: bad n/noise_sd");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const VectorXd b = vec(matrix_signal(sig));
  MatrixXd a(n, b.size());
  for (Index j = 0; j < a.cols(); ++j) {
    for (Index i = 0; i < n; ++i) a(i, j) = normal(rng);
  }
  VectorXd y = a * b;
  for (Index i = 0; i < n; ++i) y(i) += noise_sd * normal(rng);
  return {MeasurementOp::dense(std::move(a)), std::move(y), b, sig.rows, sig.cols,
          noise_sd * noise_sd};
}

/// Observe a uniformly random (1 - masked_fraction) share of the entries of B
/// plus N(0, sigma^2) noise, with sigma^2 = Var(entries of B) / snr^2 (the
/// population variance, matching the regression SNR). Unobserved y are 0.
inline MatrixDataset gen_matrix_completion(const MatrixSignal& sig, double masked_fraction,
                                           double snr, std::uint64_t seed) {
  if (!(masked_fraction >= 0.0 && masked_fraction < 1.0) || !(snr > 0.0)) {
    throw std::invalid_argument("gen_matrix_completion: bad masked fraction/snr");
  }
  std::mt19937_64 rng(seed);
  const VectorXd b = vec(matrix_signal(sig));
  const Index total = b.size();
  const auto observed = std::max<Index>(
      1, static_cast<Index>(std::llround((1.0 - masked_fraction) * static_cast<double>(total))));
  std::vector<Index> order(static_cast<std::size_t>(total));
  for (Index i = 0; i < total; ++i) order[static_cast<std::size_t>(i)] = i;
  std::shuffle(order.begin(), order.end(), rng);
  VectorXd mask = VectorXd::Zero(total);
  for (Index i = 0; i < observed; ++i) mask(order[static_cast<std::size_t>(i)]) = 1.0;

  const double centered = (b.array() - b.mean()).matrix().squaredNorm();
  const double var = centered / static_cast<double>(total) / (snr * snr);
  std::normal_distribution<double> noise(0.0, std::sqrt(var));
  VectorXd y = VectorXd::Zero(total);
  for (Index i = 0; i < total; ++i) {
    const double e = noise(rng);
    if (mask(i) != 0.0) y(i) = b(i) + e;
  }
  return {MeasurementOp::from_mask(sig.rows, sig.cols, std::move(mask)), std::move(y), b,
          sig.rows, sig.cols, var};
}

struct Metrics {
  double estimation_error = 0.0;
  double prediction_error = 0.0;
  double f1 = 0.0;
};

/// 2PR / (P + R) on supports {j : |x_j| > tol}. Both supports empty counts as a
/// perfect match; P + R = 0 gives 0.
inline double f1_score(const VectorXd& x_hat, const VectorXd& x_true, double tol = 1e-6) {
  detail::require_size(x_hat.size(), x_true.size(), "f1_score");
  Index tp = 0;
  Index pred = 0;
  Index truth = 0;
  for (Index j = 0; j < x_hat.size(); ++j) {
    const bool a = std::abs(x_hat(j)) > tol;
    const bool b = std::abs(x_true(j)) > tol;
    pred += a;
    truth += b;
    tp += a && b;
  }
  if (pred == 0 && truth == 0) return 1.0;
  if (tp == 0) return 0.0;
  const double precision = static_cast<double>(tp) / static_cast<double>(pred);
  const double recall = static_cast<double>(tp) / static_cast<double>(truth);
  return 2.0 * precision * recall / (precision + recall);
}

inline Metrics metrics(const VectorXd& x_hat, const VectorXd& x_true, const MeasurementOp& a,
                       double tol = 1e-6) {
  detail::require_size(x_hat.size(), a.cols(), "metrics x_hat");
  const VectorXd diff = x_hat - x_true;
  return {diff.norm(), a.apply(diff).norm(), f1_score(x_hat, x_true, tol)};
}

/// corr^2(y_hat, y).
inline double r_squared(const VectorXd& y_hat, const VectorXd& y) {
  detail::require_size(y_hat.size(), y.size(), "r_squared");
  if (y.size() < 2) throw std::invalid_argument("r_squared: need at least two samples");
  const VectorXd a = y_hat.array() - y_hat.mean();
  const VectorXd b = y.array() - y.mean();
  const double va = a.squaredNorm();
  const double vb = b.squaredNorm();
  if (!(va > 0.0) || !(vb > 0.0)) throw std::invalid_argument("r_squared: zero variance");
  const double c = a.dot(b);
  return c * c / (va * vb);
}

// Scalar pathological example: f has a 25-Lipschitz gradient and the FPI
// x <- x - grad f(x) / 25.

inline double patho_gradient(double x) {
  if (x <= -1.0) return x / 10.0 - 24.9;
  if (x >= 1.0) return x / 10.0 + 24.9;
  return 25.0 * x;
}

inline double patho_map(double x) { return x - patho_gradient(x) / 25.0; }

enum class PathoMode { plain, naive_aa, safeguarded };

inline std::string_view to_string(PathoMode m) {
  switch (m) {
    case PathoMode::plain: return "plain";
    case PathoMode::naive_aa: return "naive_aa";
    case PathoMode::safeguarded: return "safeguarded";
  }
  return "?";
}

/// plain: D = 0. naive_aa: M = 1, eta = 0, D = inf, eps = 0.
/// safeguarded: M = 1, D = 1, eps = 1e-6 and eta = 1e-8 (see README).
inline AAConfig patho_config(PathoMode mode, int max_iter = 500) {
  AAConfig cfg;
  switch (mode) {
    case PathoMode::plain: cfg = AAConfig::plain(); break;
    case PathoMode::naive_aa: cfg = AAConfig::naive(1); break;
    case PathoMode::safeguarded:
      cfg.memory = 1;
      cfg.eta = 1e-8;
      cfg.D = 1.0;
      cfg.epsilon = 1e-6;
      break;
  }
  cfg.eps_tol = 1e-8;
  cfg.max_iter = max_iter;
  cfg.record_iterates = true;
  return cfg;
}

inline SolveReport patho_run(const AAConfig& cfg, double x0 = 2.1) {
  auto map = [](const VectorXd& z) {
    VectorXd out(1);
    out(0) = patho_map(z(0));
    return FixedPointEval{std::move(out), std::nullopt};
  };
  VectorXd z0(1);
  z0(0) = x0;
  return a2os_iterate(map, Scheme::fbs, std::move(z0), cfg);
}

inline SolveReport patho_run(PathoMode mode, double x0 = 2.1, int max_iter = 500) {
  return patho_run(patho_config(mode, max_iter), x0);
}

// Experiment drivers.

struct PathComparison {
  PathResult plain;
  PathResult accelerated;
  double iteration_ratio() const {
    return static_cast<double>(accelerated.total_iterations) /
           static_cast<double>(std::max<long>(plain.total_iterations, 1));
  }
  double time_ratio() const {
    return plain.total_seconds / std::max(accelerated.total_seconds, 1e-12);
  }
};

/// The same path with AA off (cfg with D = 0) and on.
inline PathComparison compare_aa_path(const ProblemSpec& spec, const MeasurementOp& a,
                                      const VectorXd& y, const PathSpec& path, Scheme scheme,
                                      AAConfig cfg, std::optional<double> mu = std::nullopt) {
  PathComparison out;
  out.accelerated = solve_path(spec, a, y, path, scheme, cfg, mu);
  cfg.D = 0.0;
  out.plain = solve_path(spec, a, y, path, scheme, cfg, mu);
  return out;
}

/// One estimator in a bench table.
struct BenchRow {
  std::string experiment;
  std::string method;
  std::uint64_t seed = 0;
  double gamma = 0.0;
  double lambda = 0.0;
  Metrics metric;
  Index support = 0;
  long iterations = 0;
  double seconds = 0.0;
};

struct RegressionBenchSpec {
  SyntheticSpec data;
  std::vector<double> gammas{0.8, 0.0};
  int grid_points = 30;
  double grid_ratio = 1e-3;
  Scheme scheme = Scheme::fbs;
  AAConfig cfg;
  /// 0 for the l1 (GMC) kernel, otherwise the group size for group GMC.
  Index group_size = 0;
};

/// Path for each gamma, lambda picked by prediction error on an independent
/// validation draw with the same x* and design distribution.
inline std::vector<BenchRow> run_regression_bench(const RegressionBenchSpec& b) {
  const Dataset train = gen_regression(b.data);
  SyntheticSpec vspec = b.data;
  vspec.seed = b.data.seed ^ 0x9e3779b97f4a7c15ULL;
  const Dataset valid = gen_regression(vspec);
  const MeasurementOp a = MeasurementOp::dense(train.a);

  ProblemSpec ps;
  if (b.group_size > 0) ps.model = model::GroupGmc{equal_groups(b.data.p, b.group_size)};
  const double lmax = lambda_max(ps, a, train.y);
  const PathSpec path = PathSpec::log_grid(lmax, b.grid_ratio * lmax, b.grid_points);

  std::vector<BenchRow> rows;
  for (double gamma : b.gammas) {
    ps.gamma = gamma;
    const PathResult res = solve_path(ps, a, train.y, path, b.scheme, b.cfg);
    const PathPoint* best = nullptr;
    double best_err = std::numeric_limits<double>::infinity();
    for (const auto& pt : res.points) {
      if (!pt.error.empty()) continue;
      const double err = (valid.y - valid.a * pt.solution.x()).norm();
      if (err < best_err) {
        best_err = err;
        best = &pt;
      }
    }
    if (!best) throw std::runtime_error("run_regression_bench: every path point failed");
    BenchRow row;
    row.experiment = b.group_size > 0 ? "group_gmc" : "gmc";
    row.method = gamma > 0.0 ? "cnc" : "convex";
    row.seed = b.data.seed;
    row.gamma = gamma;
    row.lambda = best->lambda;
    row.metric = metrics(best->solution.x(), train.x_true, a);
    row.support = best->support;
    row.iterations = res.total_iterations;
    row.seconds = res.total_seconds;
    rows.push_back(row);
  }
  return rows;
}

/// bic: n log(RSS/n) + df log(n). validation: error on held-out observed
/// entries (completion only). oracle: smallest true prediction error along the
/// path, which compares estimator families rather than tuning rules.
enum class Selection { bic, validation, oracle };

inline std::string_view to_string(Selection s) {
  switch (s) {
    case Selection::bic: return "bic";
    case Selection::validation: return "validation";
    case Selection::oracle: return "oracle";
  }
  return "?";
}

inline Selection parse_selection(const std::string& s) {
  if (s == "bic") return Selection::bic;
  if (s == "validation") return Selection::validation;
  if (s == "oracle") return Selection::oracle;
  throw std::invalid_argument("unknown selection rule '" + s + "'");
}

struct MatrixBenchSpec {
  bool completion = true;
  MatrixSignal signal{MatrixShape::cross, 64, 64, 4};
  /// Completion: share of masked entries and SNR.
  double masked_fraction = 0.8;
  double snr = 1.0;
  /// Regression: number of measurements and noise standard deviation.
  Index n = 700;
  double noise_sd = 1.0;
  std::uint64_t seed = 0;
  std::vector<double> gammas{0.8, 0.0};
  /// Explicit grid, 20 log-spaced values from 1e3 down to 1e-1 by default.
  std::vector<double> lambdas;
  Scheme scheme = Scheme::fbs;
  AAConfig cfg;
  /// Default: BIC for regression, oracle for completion.
  std::optional<Selection> selection;
  /// Completion with validation selection: share of observed entries held out.
  double validation_fraction = 0.25;
};

inline MatrixDataset matrix_bench_data(const MatrixBenchSpec& b) {
  return b.completion ? gen_matrix_completion(b.signal, b.masked_fraction, b.snr, b.seed)
                      : gen_matrix_regression(b.signal, b.n, b.noise_sd, b.seed);
}

/// Splits the observed entries of a completion dataset into a fitting mask and
/// a held-out mask.
inline std::pair<MatrixDataset, MeasurementOp> holdout_split(const MatrixDataset& d,
                                                             double fraction,
                                                             std::uint64_t seed) {
  if (!d.a.is_mask()) throw std::invalid_argument("holdout_split: needs a completion dataset");
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw std::invalid_argument("holdout_split: fraction must lie in (0, 1)");
  }
  std::vector<Index> observed;
  for (Index i = 0; i < d.a.mask().size(); ++i) {
    if (d.a.mask()(i) != 0.0) observed.push_back(i);
  }
  std::mt19937_64 rng(seed ^ 0x5851f42d4c957f2dULL);
  std::shuffle(observed.begin(), observed.end(), rng);
  const auto held = static_cast<std::size_t>(
      std::llround(fraction * static_cast<double>(observed.size())));
  if (held == 0 || held == observed.size()) {
    throw std::invalid_argument("holdout_split: too few observed entries to split");
  }
  VectorXd fit = d.a.mask();
  VectorXd out = VectorXd::Zero(fit.size());
  for (std::size_t i = 0; i < held; ++i) {
    fit(observed[i]) = 0.0;
    out(observed[i]) = 1.0;
  }
  MatrixDataset train = d;
  train.a = MeasurementOp::from_mask(d.rows, d.cols, fit);
  train.y = train.a.mask().cwiseProduct(d.y);
  return {std::move(train), MeasurementOp::from_mask(d.rows, d.cols, std::move(out))};
}

/// Path for each gamma with lambda picked by the selection rule.
/// Metrics are taken on the full observation operator.
inline std::vector<BenchRow> run_matrix_bench(const MatrixBenchSpec& b) {
  const MatrixDataset full = matrix_bench_data(b);
  const Selection sel = b.selection.value_or(b.completion ? Selection::oracle : Selection::bic);
  if (sel == Selection::validation && !b.completion) {
    throw std::invalid_argument("run_matrix_bench: validation selection needs completion data");
  }
  MatrixDataset d = full;
  std::optional<MeasurementOp> held;
  if (sel == Selection::validation) {
    auto split = holdout_split(full, b.validation_fraction, b.seed);
    d = std::move(split.first);
    held = std::move(split.second);
  }

  ProblemSpec ps;
  if (b.completion) {
    ps.model = model::MatrixCompletion{d.rows, d.cols};
  } else {
    ps.model = model::MatrixRegression{d.rows, d.cols};
  }
  const PathSpec path =
      b.lambdas.empty() ? PathSpec::log_grid(1e3, 1e-1, 20) : PathSpec{b.lambdas};

  std::vector<BenchRow> rows;
  for (double gamma : b.gammas) {
    ps.gamma = gamma;
    ps.lambda = path.lambdas.front();
    const Problem prob = build(ps, d.a, d.y);
    const PathResult res = solve_path(ps, d.a, d.y, path, b.scheme, b.cfg);
    const PathPoint* best = nullptr;
    double best_score = std::numeric_limits<double>::infinity();
    for (const auto& pt : res.points) {
      if (!pt.error.empty()) continue;
      double score = 0.0;
      switch (sel) {
        case Selection::bic: score = bic(prob, pt.solution.x()); break;
        case Selection::validation: score = held->apply(full.y - pt.solution.x()).norm(); break;
        case Selection::oracle: score = full.a.apply(pt.solution.x() - full.x_true).norm(); break;
      }
      if (score < best_score) {
        best_score = score;
        best = &pt;
      }
    }
    if (!best) throw std::runtime_error("run_matrix_bench: every path point failed");
    BenchRow row;
    row.experiment = b.completion ? "matrix_completion" : "matrix_regression";
    row.method = gamma > 0.0 ? "cnc" : "convex";
    row.seed = b.seed;
    row.gamma = gamma;
    row.lambda = best->lambda;
    row.metric = metrics(best->solution.x(), full.x_true, full.a);
    row.support = best->support;
    row.iterations = res.total_iterations;
    row.seconds = res.total_seconds;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace cncaa
