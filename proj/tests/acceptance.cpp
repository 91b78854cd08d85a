// End-to-end acceptance checks. One PASS/FAIL line per criterion; exit status
// is nonzero when any criterion fails.

#include "cncaa/anderson.hpp"
#include "cncaa/bench.hpp"
#include "cncaa/linops.hpp"
#include "cncaa/problems.hpp"
#include "cncaa/splitting.hpp"

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

using namespace cncaa;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = true;
  std::string detail;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
};

MatrixXd randn(Index r, Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  MatrixXd m(r, c);
  for (Index j = 0; j < c; ++j)
    for (Index i = 0; i < r; ++i) m(i, j) = normal(rng);
  return m;
}

// A random regression instance with ||A|| = 1 and a sparse +-2 signal.
std::pair<MatrixXd, VectorXd> instance(Index n, Index p, std::mt19937_64& rng) {
  MatrixXd a = randn(n, p, rng);
  a /= Eigen::JacobiSVD<MatrixXd>(a).singularValues()(0);
  VectorXd x = VectorXd::Zero(p);
  for (Index j = 0; j < std::min<Index>(p, 4); ++j) x(j) = j % 2 ? -2.0 : 2.0;
  VectorXd y = a * x + 0.1 * randn(n, 1, rng).col(0);
  return {a, y};
}

AAConfig tight() {
  AAConfig c;
  c.eps_tol = 1e-11;
  c.max_iter = 200000;
  return c;
}

StackedPoint solve_extract(const Problem& prob, Scheme scheme, const AAConfig& cfg,
                           std::optional<double> mu, bool* converged) {
  const Splitting split = make_splitting(prob, scheme, mu);
  const SolveReport rep = a2os_solve(split, StackedPoint(prob.block_size()), cfg);
  if (converged) *converged = *converged && rep.converged;
  return extract_solution(split, rep.stacked());
}

bool near_any(double x, std::initializer_list<double> vals, double tol) {
  for (double v : vals)
    if (std::abs(x - v) <= tol) return true;
  return false;
}

// 1. Scalar example where naive AA cycles.
Outcome pathological() {
  Outcome o;
  const auto t0 = Clock::now();
  const double s = 249.0 * (std::sqrt(5.0) - 2.0);
  const SolveReport naive = patho_run(PathoMode::naive_aa, 2.1, 500);
  for (int k = naive.iterations - 8; k < naive.iterations; ++k) {
    o.require(near_any(naive.residuals[static_cast<std::size_t>(k)], {1.992, 1.231}, 1e-3),
              "naive residual off the 2-cycle at k=" + std::to_string(k));
    o.require(near_any(naive.iterates[static_cast<std::size_t>(k)](0), {249.0, -249.0, s, -s}, 1e-3),
              "naive iterate off the 4-cycle at k=" + std::to_string(k));
  }
  const SolveReport plain = patho_run(PathoMode::plain, 2.1, 500);
  o.require(plain.converged && std::abs(plain.z_final(0)) < 1e-6, "plain did not reach 0");
  const SolveReport safe = patho_run(PathoMode::safeguarded, 2.1, 500);
  o.require(safe.converged && std::abs(safe.z_final(0)) < 1e-6, "safeguarded did not reach 0");
  // Counting x^0 as iteration 1, the first failed check (k = 2) produces iteration 4.
  int first_reject = -1;
  for (int k = 1; k < safe.iterations; ++k) {
    if (!safe.aa_accepted[static_cast<std::size_t>(k)]) {
      first_reject = k;
      break;
    }
  }
  o.require(first_reject + 2 == 4, "first safeguard rejection at k=" + std::to_string(first_reject));
  const double t = seconds_since(t0);
  o.require(t < 1.0, "runtime " + std::to_string(t) + " s");
  char buf[160];
  std::snprintf(buf, sizeof buf, "cycle {%.4f, %.4f}; safeguard escape at iteration %d; %.3f s",
                naive.residuals.back(), naive.residuals[naive.residuals.size() - 2],
                first_reject + 2, t);
  if (o.pass) o.detail = buf;
  return o;
}

// 2. Step-size constants on an operator with ||A|| = 1.
Outcome constants() {
  Outcome o;
  const auto mask = MeasurementOp::entry_mask(4, 4, {{0, 0}, {1, 3}, {2, 2}, {3, 0}});
  const CncOperator p(mask, 0.8, VectorXd::Zero(16));
  o.require(p.a_norm() == 1.0, "||A|| != 1");
  o.require(cocoercivity_beta(p) == 0.25, "beta(0.8) != 0.25");
  o.require(default_step(Scheme::fbs, p) == 0.4975, "FBS step != 0.4975");
  // ||M||_2 for M = [[1-g, g], [-g, g]] from the largest eigenvalue of M^T M.
  const double g = 0.8;
  const double a = (1 - g) * (1 - g) + g * g;
  const double b = (1 - g) * g - g * g;
  const double d = 2 * g * g;
  const double oracle = std::sqrt(0.5 * (a + d) + std::sqrt(0.25 * (a - d) * (a - d) + b * b));
  o.require(std::abs(mix_norm(MixMatrix(g)) - oracle) <= 1e-10, "mix_norm(0.8) vs oracle");
  o.require(default_step(Scheme::fbfs, p) == 0.99 / mix_norm(MixMatrix(g)), "FBFS step != 0.99/L");
  o.require(default_step(Scheme::fbfs, p) > default_step(Scheme::fbs, p), "FBFS <= FBS at 0.8");
  const CncOperator c(mask, 0.0, VectorXd::Zero(16));
  o.require(default_step(Scheme::fbs, c) > default_step(Scheme::fbfs, c), "FBS <= FBFS at 0");
  char buf[160];
  std::snprintf(buf, sizeof buf, "beta=%.17g fbs=%.17g fbfs=%.6f (||M||=%.10f)", cocoercivity_beta(p),
                default_step(Scheme::fbs, p), default_step(Scheme::fbfs, p), oracle);
  if (o.pass) o.detail = buf;
  return o;
}

// 3. Four schemes reach the same stationary point.
Outcome scheme_agreement() {
  Outcome o;
  const auto t0 = Clock::now();
  std::mt19937_64 rng(3);
  double worst_gap = 0.0;
  double worst_res = 0.0;
  bool converged = true;
  const double gammas[] = {0.0, 0.5, 0.8};
  for (int t = 0; t < 20; ++t) {
    const auto [a, y] = instance(40, 20, rng);
    const auto op = MeasurementOp::dense(a);
    ProblemSpec spec;
    spec.gamma = gammas[t % 3];
    spec.lambda = 0.1 * lambda_max(spec, op, y);
    const Problem prob = build(spec, op, y);
    std::vector<StackedPoint> sols;
    for (Scheme s : {Scheme::fbs, Scheme::fbfs, Scheme::drs, Scheme::dys}) {
      sols.push_back(solve_extract(prob, s, tight(), s == Scheme::drs ? std::optional(1.0) : std::nullopt,
                                   &converged));
      worst_res = std::max(worst_res, subgradient_residual(prob, sols.back()));
    }
    for (std::size_t i = 0; i < sols.size(); ++i)
      for (std::size_t j = i + 1; j < sols.size(); ++j)
        worst_gap = std::max(worst_gap, (sols[i].x() - sols[j].x()).norm());
  }
  const double t = seconds_since(t0);
  o.require(converged, "a solve did not converge");
  o.require(worst_gap <= 1e-4, "pairwise gap " + std::to_string(worst_gap));
  o.require(worst_res <= 1e-4, "subgradient residual " + std::to_string(worst_res));
  o.require(t < 30.0, "runtime " + std::to_string(t) + " s");
  char buf[160];
  std::snprintf(buf, sizeof buf, "max pairwise gap %.2e, max inclusion residual %.2e, %.1f s",
                worst_gap, worst_res, t);
  if (o.pass) o.detail = buf;
  return o;
}

// 4. AA weight and H_k algebra.
Outcome aa_algebra() {
  Outcome o;
  std::mt19937_64 rng(4);
  // Weight sums: zeta on a dyadic grid keeps every difference exact.
  std::uniform_int_distribution<int> num(-1 << 20, 1 << 20);
  int inexact = 0;
  for (int t = 0; t < 1000; ++t) {
    const Index m = 1 + t % 20;
    VectorXd zeta(m);
    for (Index i = 0; i < m; ++i) zeta(i) = std::ldexp(num(rng), -16);
    const VectorXd alpha = zeta_to_alpha(zeta);
    double sum = 0.0;
    for (Index i = 0; i < alpha.size(); ++i) sum += alpha(i);
    inexact += sum != 1.0;
  }
  o.require(inexact == 0, std::to_string(inexact) + " weight sums != 1");

  double worst_h = 0.0;
  double worst_update = 0.0;
  double worst_kkt = 0.0;
  for (int t = 0; t < 200; ++t) {
    const int m = 1 + t % 10;
    const Index dim = 12 + t % 8;
    const double eta = std::pow(10.0, -(t % 4) - 1.0);
    std::vector<VectorXd> z, g, f;
    for (int i = 0; i <= m; ++i) {
      z.push_back(randn(dim, 1, rng).col(0));
      g.push_back(randn(dim, 1, rng).col(0));
      f.push_back(z.back() - g.back());
    }
    MatrixXd s(dim, m), y(dim, m);
    for (int i = 0; i < m; ++i) {
      s.col(i) = z[i + 1] - z[i];
      y.col(i) = g[i + 1] - g[i];
    }
    MatrixXd gram = y.transpose() * y;
    gram.diagonal().array() += eta * (s.squaredNorm() + y.squaredNorm());
    const MatrixXd h = MatrixXd::Identity(dim, dim) + (s - y) * gram.inverse() * y.transpose();
    const double hn = Eigen::JacobiSVD<MatrixXd>(h).singularValues()(0);
    worst_h = std::max(worst_h, hn / (1.0 + 2.0 / eta));
    const VectorXd cand = aa_candidate(f, zeta_to_alpha(aa_zeta(y, s.squaredNorm(), g.back(), eta)));
    worst_update = std::max(worst_update, (cand - (z.back() - h * g.back())).norm());

    // Constrained least squares min ||G alpha|| s.t. sum alpha = 1, by KKT.
    MatrixXd gm(dim, m + 1);
    for (int i = 0; i <= m; ++i) gm.col(i) = g[static_cast<std::size_t>(i)];
    MatrixXd kkt = MatrixXd::Zero(m + 2, m + 2);
    kkt.topLeftCorner(m + 1, m + 1) = 2.0 * gm.transpose() * gm;
    kkt.block(0, m + 1, m + 1, 1).setOnes();
    kkt.block(m + 1, 0, 1, m + 1).setOnes();
    VectorXd rhs = VectorXd::Zero(m + 2);
    rhs(m + 1) = 1.0;
    const VectorXd alpha_kkt = kkt.fullPivLu().solve(rhs).head(m + 1);
    const VectorXd c0 = aa_candidate(f, alpha_kkt);
    const VectorXd c1 = aa_candidate(f, zeta_to_alpha(aa_zeta(y, s.squaredNorm(), g.back(), 0.0)));
    worst_kkt = std::max(worst_kkt, (c0 - c1).norm());
  }
  o.require(worst_h <= 1.0, "||H_k|| exceeds 1 + 2/eta");
  o.require(worst_update <= 1e-9, "z - H g mismatch " + std::to_string(worst_update));
  o.require(worst_kkt <= 1e-8, "constrained vs reparameterized gap " + std::to_string(worst_kkt));
  char buf[200];
  std::snprintf(buf, sizeof buf,
                "1000/1000 sums exact; max ||H||/(1+2/eta) %.3f; update gap %.1e; KKT gap %.1e",
                worst_h, worst_update, worst_kkt);
  if (o.pass) o.detail = buf;
  return o;
}

// 5. AA reduces total path iterations.
struct PathCase {
  const char* name;
  ProblemSpec spec;
  Scheme scheme;
};

Outcome acceleration(std::string& note) {
  Outcome o;
  const auto t0 = Clock::now();
  SyntheticSpec sp;
  sp.seed = 1;
  const Dataset d = gen_regression(sp);
  const auto a = MeasurementOp::dense(d.a);
  std::vector<PathCase> cases(3);
  cases[0] = {"gmc", ProblemSpec{}, Scheme::fbs};
  cases[1] = {"group_gmc", ProblemSpec{}, Scheme::fbs};
  cases[1].spec.model = model::GroupGmc{equal_groups(sp.p, 5)};
  cases[2] = {"sgl", ProblemSpec{}, Scheme::dys};
  cases[2].spec.model = model::SparseGroupLasso{equal_groups(sp.p, 5), 1.0 / 19.0};

  AAConfig light;
  light.eta = 1e-8;
  std::string detail = "eta=1e-8:";
  note = "default eta=1e-2 ratios (informational):";
  for (const auto& c : cases) {
    const double lmax = lambda_max(c.spec, a, d.y);
    const PathSpec grid = PathSpec::log_grid(lmax, 1e-3 * lmax, 30);
    const PathResult plain = solve_path(c.spec, a, d.y, grid, c.scheme, AAConfig::plain());
    const PathResult on = solve_path(c.spec, a, d.y, grid, c.scheme, light);
    const PathResult dflt = solve_path(c.spec, a, d.y, grid, c.scheme, AAConfig{});
    const double ratio = static_cast<double>(on.total_iterations) / plain.total_iterations;
    const double rd = static_cast<double>(dflt.total_iterations) / plain.total_iterations;
    o.require(ratio <= 0.6, std::string(c.name) + " ratio " + std::to_string(ratio));
    char buf[120];
    std::snprintf(buf, sizeof buf, " %s %ld/%ld=%.2f", c.name, on.total_iterations,
                  plain.total_iterations, ratio);
    detail += buf;
    std::snprintf(buf, sizeof buf, " %s %.2f", c.name, rd);
    note += buf;
  }
  const double t = seconds_since(t0);
  o.require(t < 300.0, "runtime " + std::to_string(t) + " s");
  char buf[40];
  std::snprintf(buf, sizeof buf, "; %.1f s", t);
  if (o.pass) o.detail = detail + buf;
  return o;
}

// 6. gamma = 0 reduces to the lasso.
Outcome convex_oracle() {
  Outcome o;
  std::mt19937_64 rng(6);
  double worst = 0.0;
  bool converged = true;
  for (int t = 0; t < 10; ++t) {
    const auto [a, y] = instance(50, 30, rng);
    const auto op = MeasurementOp::dense(a);
    ProblemSpec spec;
    spec.gamma = 0.0;
    spec.lambda = 0.1 * lambda_max(spec, op, y);
    const VectorXd x = solve_extract(build(spec, op, y), Scheme::fbs, tight(), std::nullopt, &converged).x();
    // Proximal gradient with 1/L steps, many iterations.
    const MatrixXd ata = a.transpose() * a;
    const VectorXd aty = a.transpose() * y;
    VectorXd w = VectorXd::Zero(30);
    for (int k = 0; k < 50000; ++k) {
      const VectorXd u = w - (ata * w - aty);
      for (Index j = 0; j < 30; ++j) w(j) = std::copysign(std::max(std::abs(u(j)) - spec.lambda, 0.0), u(j));
    }
    worst = std::max(worst, (x - w).norm());
  }
  o.require(converged, "a solve did not converge");
  o.require(worst <= 1e-4, "max gap " + std::to_string(worst));
  char buf[80];
  std::snprintf(buf, sizeof buf, "max ||x - x_lasso|| = %.2e over 10 instances", worst);
  if (o.pass) o.detail = buf;
  return o;
}

// 7. Solving at lambda_max gives zero.
Outcome lambda_max_contract() {
  Outcome o;
  std::mt19937_64 rng(7);
  double worst = 0.0;
  bool converged = true;
  for (int t = 0; t < 10; ++t) {
    const auto [a, y] = instance(60, 40, rng);
    const auto op = MeasurementOp::dense(a);
    ProblemSpec gmc;
    ProblemSpec grp;
    grp.model = model::GroupGmc{equal_groups(40, 4)};
    for (ProblemSpec* s : {&gmc, &grp}) {
      s->lambda = lambda_max(*s, op, y);
      const VectorXd x = solve_extract(build(*s, op, y), Scheme::fbs, AAConfig{}, std::nullopt, &converged).x();
      worst = std::max(worst, x.cwiseAbs().maxCoeff());
    }
  }
  o.require(converged, "a solve did not converge");
  o.require(worst <= 1e-6, "max |x| = " + std::to_string(worst));
  char buf[80];
  std::snprintf(buf, sizeof buf, "max |x| = %.1e (GMC and group GMC, 10 instances each)", worst);
  if (o.pass) o.detail = buf;
  return o;
}

// 8. D = 0 is the plain scheme; DYS with R = none is FBS.
Outcome reductions() {
  Outcome o;
  std::mt19937_64 rng(8);
  int mismatches = 0;
  for (Scheme scheme : {Scheme::drs, Scheme::fbs, Scheme::fbfs, Scheme::dys}) {
    const auto [a, y] = instance(30, 20, rng);
    const auto op = MeasurementOp::dense(a);
    ProblemSpec spec;
    spec.lambda = 0.05 * lambda_max(spec, op, y);
    const Splitting split = make_splitting(build(spec, op, y), scheme,
                                           scheme == Scheme::drs ? std::optional(1.0) : std::nullopt);
    AAConfig cfg = AAConfig::plain();
    cfg.eps_tol = 0.0;
    cfg.max_iter = 300;
    cfg.record_iterates = true;
    const SolveReport rep = a2os_solve(split, StackedPoint(20), cfg);
    StackedPoint z(20);
    for (int k = 0; k < rep.iterations; ++k) {
      const StepResult s = split.step(z);
      mismatches += rep.iterates[static_cast<std::size_t>(k)] != z.flat();
      mismatches += rep.residuals[static_cast<std::size_t>(k)] != s.g.norm();
      z = s.z_next;
    }
    mismatches += rep.z_final != z.flat();
  }
  o.require(mismatches == 0, std::to_string(mismatches) + " trajectory mismatches");

  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const auto [a, y] = instance(25, 15, rng);
    const CncOperator p(MeasurementOp::dense(a), 0.8, y);
    const Regularizer q = Regularizer::l1(0.05);
    const StackedPoint z = StackedPoint::from_flat(randn(30, 1, rng).col(0));
    const double mu = default_step(Scheme::fbs, p);
    const StepResult d = dys_step(p, q, Regularizer::none(), mu, z, false);
    const StepResult f = fbs_step(p, q, mu, z);
    worst = std::max(worst, (d.z_next.flat() - f.z_next.flat()).cwiseAbs().maxCoeff());
  }
  o.require(worst <= 1e-12, "DYS/FBS gap " + std::to_string(worst));
  char buf[120];
  std::snprintf(buf, sizeof buf, "D=0 bitwise over 4 schemes x 300 steps; DYS(R=none)-FBS gap %.1e", worst);
  if (o.pass) o.detail = buf;
  return o;
}

// 9. CNC beats the convex baseline on matrix completion.
Outcome completion_direction() {
  Outcome o;
  const auto t0 = Clock::now();
  int wins = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    MatrixBenchSpec b;
    b.completion = true;
    b.seed = seed;
    b.cfg.eps_tol = 1e-4;
    const auto rows = run_matrix_bench(b);
    wins += rows.at(0).metric.prediction_error < rows.at(1).metric.prediction_error;
  }
  o.require(wins > 5, "CNC wins " + std::to_string(wins) + "/10");
  char buf[120];
  std::snprintf(buf, sizeof buf, "CNC lower prediction error in %d/10 seeds (oracle lambda); %.1f s",
                wins, seconds_since(t0));
  if (o.pass) o.detail = buf;
  return o;
}

}  // namespace

int main() {
  std::string note5;
  const std::vector<std::pair<const char*, std::function<Outcome()>>> checks{
      {"pathological example", pathological},
      {"step-size constants", constants},
      {"scheme cross-agreement", scheme_agreement},
      {"AA algebra", aa_algebra},
      {"acceleration on paths", [&] { return acceleration(note5); }},
      {"convex baseline oracle", convex_oracle},
      {"lambda_max contract", lambda_max_contract},
      {"reduction identities", reductions},
      {"matrix completion direction", completion_direction},
  };
  int failed = 0;
  int id = 1;
  for (const auto& [name, fn] : checks) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failed += !o.pass;
    std::printf("%s %d %s: %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
    if (id == 5 && !note5.empty()) std::printf("NOTE 5 %s\n", note5.c_str());
    std::fflush(stdout);
    ++id;
  }
  return failed == 0 ? 0 : 1;
}
