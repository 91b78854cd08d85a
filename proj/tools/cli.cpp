#include "cli.hpp"

#include "cncaa/anderson.hpp"
#include "cncaa/bench.hpp"
#include "cncaa/io.hpp"
#include "cncaa/linops.hpp"
#include "cncaa/problems.hpp"
#include "cncaa/prox.hpp"
#include "cncaa/splitting.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace cncaa::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

bool is_vector_model(const std::string& m) {
  return m == "gmc" || m == "group_gmc" || m == "sparse_group_lasso";
}

bool is_matrix_model(const std::string& m) {
  return m == "matrix_regression" || m == "matrix_completion";
}

void check_model_name(const std::string& m) {
  if (!is_vector_model(m) && !is_matrix_model(m)) {
    throw std::invalid_argument("unknown model '" + m + "'");
  }
}

struct Data {
  MeasurementOp a;
  VectorXd y;
  std::optional<VectorXd> x_true;
  Index rows = 0;
  Index cols = 0;
  std::string source;
};

Index default_rows(const RunConfig& c) {
  return c.rows.value_or(c.model == "matrix_completion" ? 64 : 32);
}

Index default_cols(const RunConfig& c) {
  return c.cols.value_or(c.model == "matrix_completion" ? 64 : 32);
}

MatrixSignal signal_of(const RunConfig& c) {
  const Index mag = c.magnification.value_or(c.model == "matrix_completion" ? 4 : 1);
  return {parse_matrix_shape(c.signal), default_rows(c), default_cols(c), mag};
}

Data load_data(const RunConfig& c) {
  check_model_name(c.model);
  if (c.model == "matrix_completion") {
    if (!c.triplets_path.empty()) {
      Observations obs = read_triplets_file(c.triplets_path, c.rows.value_or(0), c.cols.value_or(0));
      const Index r = obs.op.mask_rows();
      const Index k = obs.op.mask_cols();
      return {obs.op, obs.y, std::nullopt, r, k, c.triplets_path};
    }
    MatrixDataset d = gen_matrix_completion(signal_of(c), c.mask_fraction, c.snr, c.seed);
    return {d.a, d.y, d.x_true, d.rows, d.cols, "synthetic"};
  }
  if (!c.a_path.empty() || !c.y_path.empty()) {
    if (c.a_path.empty() || c.y_path.empty()) {
      throw std::invalid_argument("--A and --y must be given together");
    }
    MeasurementOp a = MeasurementOp::dense(read_matrix_file(c.a_path));
    VectorXd y = read_vector_file(c.y_path);
    Index r = 0;
    Index k = 0;
    if (c.model == "matrix_regression") {
      if (!c.rows || !c.cols) throw std::invalid_argument("matrix_regression from files needs --rows and --cols");
      r = *c.rows;
      k = *c.cols;
    }
    return {a, y, std::nullopt, r, k, c.a_path};
  }
  if (c.model == "matrix_regression") {
    MatrixDataset d = gen_matrix_regression(signal_of(c), c.matrix_n.value_or(700), c.noise_sd, c.seed);
    return {d.a, d.y, d.x_true, d.rows, d.cols, "synthetic"};
  }
  SyntheticSpec s;
  s.n = c.n;
  s.p = c.p;
  s.ar = c.ar;
  s.snr = c.snr;
  s.n_pos = c.n_pos;
  s.n_neg = c.n_neg;
  s.seed = c.seed;
  Dataset d = gen_regression(s);
  return {MeasurementOp::dense(d.a), d.y, d.x_true, 0, 0, "synthetic"};
}

ProblemSpec make_spec(const RunConfig& c, const Data& d) {
  ProblemSpec s;
  s.gamma = c.gamma;
  const Index p = d.a.cols();
  if (c.model == "gmc") {
    s.model = model::Gmc{};
  } else if (c.model == "group_gmc") {
    s.model = model::GroupGmc{equal_groups(p, c.group_size)};
  } else if (c.model == "sparse_group_lasso") {
    s.model = model::SparseGroupLasso{equal_groups(p, c.group_size), c.alpha};
  } else if (c.model == "matrix_regression") {
    s.model = model::MatrixRegression{d.rows, d.cols};
  } else {
    s.model = model::MatrixCompletion{d.rows, d.cols};
  }
  if (c.box_lower || c.box_upper) {
    s.box = kernel::Box{c.box_lower.value_or(-std::numeric_limits<double>::infinity()),
                        c.box_upper.value_or(std::numeric_limits<double>::infinity())};
  }
  return s;
}

Scheme scheme_of(const RunConfig& c) {
  if (c.scheme) return parse_scheme(*c.scheme);
  const bool three = c.model == "sparse_group_lasso" || c.box_lower || c.box_upper;
  return three ? Scheme::dys : Scheme::fbs;
}

AAConfig aa_config(const RunConfig& c, AAConfig base = {}) {
  if (c.memory) base.memory = *c.memory;
  if (c.eta) base.eta = *c.eta;
  if (c.D) base.D = *c.D;
  if (c.epsilon) base.epsilon = *c.epsilon;
  if (c.tol) base.eps_tol = *c.tol;
  if (c.max_iter) base.max_iter = *c.max_iter;
  if (!c.aa) base.D = 0.0;
  base.validate();
  return base;
}

json aa_json(const AAConfig& a) {
  return {{"enabled", a.accelerated()},
          {"memory", a.memory},
          {"eta", a.eta},
          {"D", std::isinf(a.D) ? json("inf") : json(a.D)},
          {"epsilon", a.epsilon},
          {"eps_tol", a.eps_tol},
          {"max_iter", a.max_iter}};
}

json report_json(const SolveReport& r) {
  return {{"converged", r.converged},
          {"iterations", r.iterations},
          {"aa_accepts", r.aa_accepts},
          {"final_residual", r.final_residual()},
          {"wall_time", r.wall_time},
          {"fallback_iterations", r.fallback_iterations}};
}

json data_json(const Data& d) {
  json j = {{"source", d.source}, {"n", d.a.observed_count()}, {"p", d.a.cols()}};
  if (d.rows > 0) {
    j["rows"] = d.rows;
    j["cols"] = d.cols;
  }
  return j;
}

fs::path prepare_out(const RunConfig& c) {
  fs::path dir(c.out_dir);
  fs::create_directories(dir);
  return dir;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open '" + path.string() + "' for writing");
  out << j.dump(2) << '\n';
}

void write_trajectory(const fs::path& path, const SolveReport& r) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open '" + path.string() + "' for writing");
  const bool with_x = !r.iterates.empty() && r.iterates.front().size() == 1;
  std::vector<std::string> header{"iteration", "residual_norm", "aa_accepted"};
  if (with_x) header.push_back("x");
  CsvWriter csv(out, header);
  for (std::size_t k = 0; k < r.residuals.size(); ++k) {
    std::vector<std::string> row{std::to_string(k), format_double(r.residuals[k]),
                                 r.aa_accepted[k] ? "1" : "0"};
    if (with_x) row.push_back(format_double(r.iterates[k](0)));
    csv.row(row);
  }
}

double resolve_lambda(const RunConfig& c, const ProblemSpec& spec, const Data& d) {
  if (c.lambda) return *c.lambda;
  if (is_matrix_model(c.model)) return 1.0;
  return c.lambda_factor * lambda_max(spec, d.a, d.y);
}

PathSpec resolve_grid(const RunConfig& c, const ProblemSpec& spec, const Data& d) {
  if (is_matrix_model(c.model)) {
    return PathSpec::log_grid(c.lambda_hi.value_or(1e3), c.lambda_lo.value_or(1e-1),
                              c.n_lambda.value_or(20));
  }
  const double hi = c.lambda_hi.value_or(lambda_max(spec, d.a, d.y));
  const double lo = c.lambda_lo.value_or(c.lambda_ratio * hi);
  return PathSpec::log_grid(hi, lo, c.n_lambda.value_or(30));
}

json model_json(const RunConfig& c, const ProblemSpec& spec) {
  json j = {{"name", c.model}, {"gamma", spec.gamma}};
  if (c.model == "group_gmc" || c.model == "sparse_group_lasso") j["group_size"] = c.group_size;
  if (c.model == "sparse_group_lasso") j["alpha"] = c.alpha;
  if (spec.box) j["box"] = {spec.box->lower, spec.box->upper};
  return j;
}

int fail(std::ostream& err, const std::string& cmd, const std::exception& e) {
  err << cmd << ": error: " << e.what() << '\n';
  return 1;
}

}  // namespace

int cmd_solve(const RunConfig& c, std::ostream& out, std::ostream& err) {
  try {
    const Data d = load_data(c);
    ProblemSpec spec = make_spec(c, d);
    spec.lambda = resolve_lambda(c, spec, d);
    const Scheme scheme = scheme_of(c);
    const AAConfig acfg = aa_config(c);
    const Problem prob = build(spec, d.a, d.y);
    const Splitting split = make_splitting(prob, scheme, c.mu);
    if (split.step_warning() && !c.quiet) err << "warning: " << *split.step_warning() << '\n';

    const SolveReport rep = a2os_solve(split, StackedPoint(prob.block_size()), acfg);
    const StackedPoint sol = extract_solution(split, rep.stacked());

    const fs::path dir = prepare_out(c);
    write_vector_file((dir / "solution.txt").string(), sol.x());
    write_trajectory(dir / "trajectory.csv", rep);
    json j = {{"command", "solve"},
              {"model", model_json(c, spec)},
              {"scheme", std::string(to_string(scheme))},
              {"lambda", spec.lambda},
              {"mu", split.mu()},
              {"aa", aa_json(acfg)},
              {"seed", c.seed},
              {"data", data_json(d)},
              {"objective", objective_value(prob, sol)},
              {"support", solution_support(prob, sol.x())},
              {"step_warning", split.step_warning() ? json(*split.step_warning()) : json(nullptr)}};
    j.update(report_json(rep));
    if (d.x_true) {
      const Metrics m = metrics(sol.x(), *d.x_true, d.a);
      j["metrics"] = {{"estimation_error", m.estimation_error},
                      {"prediction_error", m.prediction_error},
                      {"f1", m.f1}};
    }
    write_json(dir / "report.json", j);
    if (!c.quiet) {
      out << "solve: " << (rep.converged ? "converged" : "NOT converged") << " in "
          << rep.iterations << " iterations (" << rep.aa_accepts << " AA steps), residual "
          << rep.final_residual() << ", support " << j["support"] << '\n';
    }
    return 0;
  } catch (const std::exception& e) {
    return fail(err, "solve", e);
  }
}

int cmd_path(const RunConfig& c, std::ostream& out, std::ostream& err) {
  try {
    const Data d = load_data(c);
    const ProblemSpec spec = make_spec(c, d);
    const PathSpec grid = resolve_grid(c, spec, d);
    const Scheme scheme = scheme_of(c);
    const AAConfig acfg = aa_config(c);

    PathResult res;
    std::optional<PathResult> plain;
    if (c.compare_aa) {
      AAConfig on = acfg;
      if (!on.accelerated()) on.D = AAConfig{}.D;
      PathComparison cmp = compare_aa_path(spec, d.a, d.y, grid, scheme, on, c.mu);
      res = std::move(cmp.accelerated);
      plain = std::move(cmp.plain);
    } else {
      res = solve_path(spec, d.a, d.y, grid, scheme, acfg, c.mu);
    }

    const fs::path dir = prepare_out(c);
    std::vector<std::string> header{"lambda", "objective", "support", "iterations", "aa_accepts",
                                    "seconds", "converged"};
    if (plain) {
      header.insert(header.end(), {"plain_iterations", "plain_seconds", "speedup"});
    }
    std::ofstream csv_file(dir / "path.csv");
    if (!csv_file) throw FormatError("cannot write path.csv");
    CsvWriter csv(csv_file, header);
    json points = json::array();
    int failures = 0;
    for (std::size_t i = 0; i < res.points.size(); ++i) {
      const PathPoint& pt = res.points[i];
      failures += !pt.error.empty();
      std::vector<std::string> row{format_double(pt.lambda),        format_double(pt.objective),
                                   std::to_string(pt.support),       std::to_string(pt.report.iterations),
                                   std::to_string(pt.report.aa_accepts), format_double(pt.report.wall_time),
                                   pt.report.converged ? "1" : "0"};
      json pj = {{"lambda", pt.lambda}, {"objective", pt.objective}, {"support", pt.support}};
      pj.update(report_json(pt.report));
      pj["error"] = pt.error.empty() ? json(nullptr) : json(pt.error);
      if (plain) {
        const PathPoint& q = plain->points[i];
        row.push_back(std::to_string(q.report.iterations));
        row.push_back(format_double(q.report.wall_time));
        row.push_back(format_double(q.report.wall_time / std::max(pt.report.wall_time, 1e-12)));
        pj["plain_iterations"] = q.report.iterations;
        pj["plain_seconds"] = q.report.wall_time;
      }
      csv.row(row);
      points.push_back(pj);
    }
    if (!res.points.empty()) {
      write_vector_file((dir / "solution.txt").string(), res.points.back().solution.x());
    }
    json j = {{"command", "path"},
              {"model", model_json(c, spec)},
              {"scheme", std::string(to_string(scheme))},
              {"aa", aa_json(acfg)},
              {"seed", c.seed},
              {"data", data_json(d)},
              {"points", points},
              {"total_iterations", res.total_iterations},
              {"total_aa_accepts", res.total_aa_accepts},
              {"total_seconds", res.total_seconds},
              {"failures", failures}};
    if (plain) {
      j["plain_total_iterations"] = plain->total_iterations;
      j["plain_total_seconds"] = plain->total_seconds;
      j["speedup"] = plain->total_seconds / std::max(res.total_seconds, 1e-12);
    }
    write_json(dir / "report.json", j);
    if (!c.quiet) {
      out << "path: " << res.points.size() << " lambdas, " << res.total_iterations
          << " iterations, " << res.total_seconds << " s";
      if (plain) {
        out << " (plain: " << plain->total_iterations << " iterations, " << plain->total_seconds
            << " s, speedup " << j["speedup"].get<double>() << ")";
      }
      out << '\n';
    }
    if (failures) err << "path: " << failures << " grid point(s) failed; see report.json\n";
    return 0;
  } catch (const std::exception& e) {
    return fail(err, "path", e);
  }
}

int cmd_patho(const RunConfig& c, std::ostream& out, std::ostream& err) {
  try {
    const int max_iter = c.max_iter.value_or(500);
    const fs::path dir = prepare_out(c);
    json modes = json::object();
    for (PathoMode mode : {PathoMode::plain, PathoMode::naive_aa, PathoMode::safeguarded}) {
      AAConfig acfg = patho_config(mode, max_iter);
      if (mode == PathoMode::safeguarded) {
        // Shared AA flags tune the safeguarded run only.
        if (c.memory) acfg.memory = *c.memory;
        if (c.eta) acfg.eta = *c.eta;
        if (c.D) acfg.D = *c.D;
        if (c.epsilon) acfg.epsilon = *c.epsilon;
      }
      if (c.tol) acfg.eps_tol = *c.tol;
      const SolveReport rep = patho_run(acfg, c.x0);
      const std::string name(to_string(mode));
      write_trajectory(dir / ("trajectory_" + name + ".csv"), rep);
      json mj = report_json(rep);
      mj["aa"] = aa_json(acfg);
      mj["final_x"] = rep.z_final(0);
      modes[name] = mj;
      if (!c.quiet) {
        out << name << ": " << (rep.converged ? "converged" : "not converged") << " after "
            << rep.iterations << " iterations, final x = " << rep.z_final(0) << '\n';
      }
    }
    write_json(dir / "report.json",
               {{"command", "patho"}, {"x0", c.x0}, {"max_iter", max_iter}, {"modes", modes}});
    return 0;
  } catch (const std::exception& e) {
    return fail(err, "patho", e);
  }
}

int cmd_bench(const RunConfig& c, std::ostream& out, std::ostream& err) {
  try {
    if (c.replicates < 1) throw std::invalid_argument("--replicates must be >= 1");
    const fs::path dir = prepare_out(c);
    const std::string& ex = c.experiment;
    const bool matrix = ex == "matrix_completion" || ex == "matrix_regression";
    if (!matrix && ex != "gmc" && ex != "group_gmc") {
      throw std::invalid_argument("unknown experiment '" + ex + "'");
    }
    RunConfig mc = c;
    mc.model = matrix ? ex : (ex == "gmc" ? "gmc" : "group_gmc");

    std::vector<BenchRow> rows;
    std::string selection;
    for (int r = 0; r < c.replicates; ++r) {
      const std::uint64_t seed = c.seed + static_cast<std::uint64_t>(r);
      std::vector<BenchRow> got;
      if (matrix) {
        MatrixBenchSpec b;
        b.completion = ex == "matrix_completion";
        b.signal = signal_of(mc);
        b.masked_fraction = c.mask_fraction;
        b.snr = c.snr;
        b.n = c.matrix_n.value_or(700);
        b.noise_sd = c.noise_sd;
        b.seed = seed;
        b.gammas = {c.gamma, 0.0};
        b.lambdas = PathSpec::log_grid(c.lambda_hi.value_or(1e3), c.lambda_lo.value_or(1e-1),
                                       c.n_lambda.value_or(20))
                        .lambdas;
        b.scheme = c.scheme ? parse_scheme(*c.scheme) : Scheme::fbs;
        AAConfig base;
        if (b.completion) base.eps_tol = 1e-4;
        b.cfg = aa_config(c, base);
        if (c.select) b.selection = parse_selection(*c.select);
        selection = to_string(b.selection.value_or(b.completion ? Selection::oracle : Selection::bic));
        if (c.dump_data) {
          const MatrixDataset d = matrix_bench_data(b);
          const std::string tag = "_seed" + std::to_string(seed);
          if (b.completion) {
            write_triplets_file((dir / ("triplets" + tag + ".txt")).string(), d.a, d.y);
          } else {
            write_matrix_file((dir / ("A" + tag + ".txt")).string(), d.a.matrix());
            write_vector_file((dir / ("y" + tag + ".txt")).string(), d.y);
          }
          write_vector_file((dir / ("x_true" + tag + ".txt")).string(), d.x_true);
        }
        got = run_matrix_bench(b);
      } else {
        RegressionBenchSpec b;
        b.data.n = c.n;
        b.data.p = c.p;
        b.data.ar = c.ar;
        b.data.snr = c.snr;
        b.data.n_pos = c.n_pos;
        b.data.n_neg = c.n_neg;
        b.data.seed = seed;
        b.gammas = {c.gamma, 0.0};
        b.grid_points = c.n_lambda.value_or(30);
        b.grid_ratio = c.lambda_ratio;
        b.scheme = c.scheme ? parse_scheme(*c.scheme) : Scheme::fbs;
        b.cfg = aa_config(c);
        b.group_size = ex == "group_gmc" ? c.group_size : 0;
        selection = "validation";
        if (c.dump_data) {
          const Dataset d = gen_regression(b.data);
          const std::string tag = "_seed" + std::to_string(seed);
          write_matrix_file((dir / ("A" + tag + ".txt")).string(), d.a);
          write_vector_file((dir / ("y" + tag + ".txt")).string(), d.y);
          write_vector_file((dir / ("x_true" + tag + ".txt")).string(), d.x_true);
        }
        got = run_regression_bench(b);
      }
      rows.insert(rows.end(), got.begin(), got.end());
    }

    // Timings go to report.json only so that bench.csv is reproducible bit for bit.
    std::ofstream csv_file(dir / "bench.csv");
    if (!csv_file) throw FormatError("cannot write bench.csv");
    CsvWriter csv(csv_file, {"experiment", "method", "seed", "gamma", "lambda", "estimation_error",
                             "prediction_error", "f1", "support", "iterations", "selection"});
    json jrows = json::array();
    std::map<std::string, std::vector<const BenchRow*>> by_method;
    for (const BenchRow& r : rows) {
      csv.row({r.experiment, r.method, std::to_string(r.seed), format_double(r.gamma),
               format_double(r.lambda), format_double(r.metric.estimation_error),
               format_double(r.metric.prediction_error), format_double(r.metric.f1),
               std::to_string(r.support), std::to_string(r.iterations), selection});
      jrows.push_back({{"method", r.method},
                       {"seed", r.seed},
                       {"gamma", r.gamma},
                       {"lambda", r.lambda},
                       {"estimation_error", r.metric.estimation_error},
                       {"prediction_error", r.metric.prediction_error},
                       {"f1", r.metric.f1},
                       {"support", r.support},
                       {"iterations", r.iterations},
                       {"seconds", r.seconds}});
      by_method[r.method].push_back(&r);
    }
    json summary = json::object();
    for (const auto& [method, list] : by_method) {
      double est = 0.0;
      double pred = 0.0;
      double f1 = 0.0;
      for (const BenchRow* r : list) {
        est += r->metric.estimation_error;
        pred += r->metric.prediction_error;
        f1 += r->metric.f1;
      }
      const double k = static_cast<double>(list.size());
      summary[method] = {{"estimation_error", est / k}, {"prediction_error", pred / k}, {"f1", f1 / k}};
    }
    int cnc_wins = 0;
    for (std::size_t i = 0; i + 1 < rows.size(); i += 2) {
      cnc_wins += rows[i].metric.prediction_error < rows[i + 1].metric.prediction_error;
    }
    write_json(dir / "report.json", {{"command", "bench"},
                                     {"experiment", ex},
                                     {"selection", selection},
                                     {"replicates", c.replicates},
                                     {"seed", c.seed},
                                     {"rows", jrows},
                                     {"mean", summary},
                                     {"cnc_prediction_wins", cnc_wins}});
    if (!c.quiet) {
      out << "bench " << ex << " (" << c.replicates << " replicates, selection " << selection << ")\n";
      for (const auto& [method, s] : summary.items()) {
        out << "  " << method << ": estimation " << s["estimation_error"].get<double>()
            << ", prediction " << s["prediction_error"].get<double>() << ", F1 "
            << s["f1"].get<double>() << '\n';
      }
      out << "  CNC prediction error lower in " << cnc_wins << "/" << c.replicates
          << " replicates\n";
    }
    return 0;
  } catch (const std::exception& e) {
    return fail(err, "bench", e);
  }
}

namespace {

/// Reads `key = value` lines (`#` comments, `[section]` headers ignored) and
/// returns them as `--key=value` arguments, dropping keys already on the
/// command line. Underscores in keys map to dashes.
std::vector<std::string> config_args(const std::string& file, const std::vector<std::string>& given) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open config file " + file);
  const auto trim = [](std::string t) {
    const auto b = t.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    const auto e = t.find_last_not_of(" \t\r");
    return t.substr(b, e - b + 1);
  };
  std::vector<std::string> args;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line.substr(0, line.find('#')));
    if (line.empty() || line.front() == '[') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error(file + ":" + std::to_string(lineno) + ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    while (!key.empty() && key.front() == '-') key.erase(0, 1);
    for (char& ch : key) {
      if (ch == '_') ch = '-';
    }
    if (key.empty() || key == "config") continue;
    const std::string flag = "--" + key;
    bool present = false;
    for (const auto& g : given) present = present || g == flag || g.rfind(flag + "=", 0) == 0;
    if (!present) args.push_back(flag + "=" + value);
  }
  return args;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Anderson-accelerated operator splitting for convex-nonconvex regularized least squares"};
  app.require_subcommand(1);

  RunConfig c;
  std::string aa = "on";
  std::string config_path;

  const auto shared = [&](CLI::App* s) {
    s->add_option("--config", config_path, "key = value config file; command-line flags take precedence");
    s->add_option("--model", c.model, "gmc | group_gmc | sparse_group_lasso | matrix_regression | matrix_completion")
        ->capture_default_str();
    s->add_option("--scheme", c.scheme, "drs | fbs | fbfs | dys (default fbs; dys for three-operator models)");
    s->add_option("--gamma", c.gamma, "convexity parameter in [0, 1]")->capture_default_str();
    s->add_option("--lambda", c.lambda, "penalty level");
    s->add_option("--mu", c.mu, "step size (required for drs)");
    s->add_option("--aa", aa, "on | off")->check(CLI::IsMember({"on", "off"}))->capture_default_str();
    s->add_option("--memory", c.memory, "AA memory M (default 10)");
    s->add_option("--eta", c.eta, "AA regularization (default 1e-2)");
    s->add_option("--D", c.D, "safeguard constant (default 10)");
    s->add_option("--epsilon", c.epsilon, "safeguard exponent (default 1e-6)");
    s->add_option("--tol", c.tol, "termination tolerance eps_tol (default 1e-5)");
    s->add_option("--max-iter", c.max_iter, "iteration cap (default 10000)");
    s->add_option("--seed", c.seed, "RNG seed for synthetic data")->capture_default_str();
    s->add_option("--out", c.out_dir, "output directory")->capture_default_str();
    s->add_flag("--quiet", c.quiet, "no summary on stdout");

    s->add_option("--lambda-factor", c.lambda_factor, "solve: lambda = factor * lambda_max when --lambda is absent")
        ->capture_default_str();
    s->add_option("--group-size", c.group_size, "size of consecutive groups")->capture_default_str();
    s->add_option("--alpha", c.alpha, "sparse group lasso: lambda_2 = alpha * lambda")->capture_default_str();
    s->add_option("--box-lower", c.box_lower, "box constraint lower bound (enables constraint mode)");
    s->add_option("--box-upper", c.box_upper, "box constraint upper bound (enables constraint mode)");

    s->add_option("--A", c.a_path, "dense design matrix file ('rows cols' header)");
    s->add_option("--y", c.y_path, "response vector file");
    s->add_option("--triplets", c.triplets_path, "matrix completion observations 'row col value' (1-based)");
    s->add_option("--n", c.n, "synthetic regression: samples")->capture_default_str();
    s->add_option("--p", c.p, "synthetic regression: predictors")->capture_default_str();
    s->add_option("--ar", c.ar, "synthetic regression: AR(1) correlation")->capture_default_str();
    s->add_option("--snr", c.snr, "signal-to-noise ratio")->capture_default_str();
    s->add_option("--n-pos", c.n_pos, "synthetic regression: +1 coefficients")->capture_default_str();
    s->add_option("--n-neg", c.n_neg, "synthetic regression: -1 coefficients")->capture_default_str();
    s->add_option("--signal", c.signal, "matrix signal: cross | checkerboard")->capture_default_str();
    s->add_option("--rows", c.rows, "matrix rows d1");
    s->add_option("--cols", c.cols, "matrix columns d2");
    s->add_option("--mag", c.magnification, "matrix signal magnification");
    s->add_option("--mask-frac", c.mask_fraction, "matrix completion: masked share")->capture_default_str();
    s->add_option("--matrix-n", c.matrix_n, "matrix regression: measurements (default 700)");
    s->add_option("--noise-sd", c.noise_sd, "matrix regression: noise standard deviation")->capture_default_str();

    s->add_option("--n-lambda", c.n_lambda, "grid size (30 vector / 20 matrix)");
    s->add_option("--lambda-ratio", c.lambda_ratio, "vector grid: lowest / highest lambda")->capture_default_str();
    s->add_option("--lambda-hi", c.lambda_hi, "largest lambda (vector default lambda_max, matrix 1e3)");
    s->add_option("--lambda-lo", c.lambda_lo, "smallest lambda (matrix default 1e-1)");
  };

  CLI::App* solve = app.add_subcommand("solve", "one accelerated solve");
  CLI::App* path = app.add_subcommand("path", "warm-started regularization path");
  CLI::App* patho = app.add_subcommand("patho", "scalar example where naive AA cycles");
  CLI::App* bench = app.add_subcommand("bench", "synthetic accuracy benchmarks, CNC vs convex");
  for (CLI::App* s : {solve, path, patho, bench}) shared(s);
  path->add_flag("--compare-aa", c.compare_aa, "also run with AA off and report the speed-up");
  patho->add_option("--x0", c.x0, "starting point")->capture_default_str();
  bench->add_option("--experiment", c.experiment, "gmc | group_gmc | matrix_completion | matrix_regression")
      ->capture_default_str();
  bench->add_option("--replicates", c.replicates, "number of seeds (seed, seed+1, ...)")->capture_default_str();
  bench->add_option("--select", c.select, "lambda selection: bic | validation | oracle (matrix experiments)");
  bench->add_flag("--dump-data", c.dump_data, "write the generated datasets to --out");

  // Config entries go before the command-line flags; flags named on the
  // command line are not repeated.
  std::vector<std::string> args(argv + std::min(argc, 1), argv + argc);
  for (std::size_t i = 0; i < args.size(); ++i) {
    std::string file;
    if (args[i] == "--config" && i + 1 < args.size()) {
      file = args[i + 1];
    } else if (args[i].rfind("--config=", 0) == 0) {
      file = args[i].substr(9);
    } else {
      continue;
    }
    try {
      const auto extra = config_args(file, args);
      args.insert(args.begin() + static_cast<std::ptrdiff_t>(i), extra.begin(), extra.end());
    } catch (const std::exception& e) {
      err << "error: " << e.what() << "\n";
      return 2;
    }
    break;
  }
  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }
  c.aa = aa == "on";
  if (solve->parsed()) {
    c.command = "solve";
    return cmd_solve(c, out, err);
  }
  if (path->parsed()) {
    c.command = "path";
    return cmd_path(c, out, err);
  }
  if (patho->parsed()) {
    c.command = "patho";
    return cmd_patho(c, out, err);
  }
  c.command = "bench";
  return cmd_bench(c, out, err);
}

}  // namespace cncaa::cli
