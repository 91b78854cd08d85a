#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

namespace cncaa::cli {

/// Every field has a default; AA and tolerance fields left empty take the
/// defaults of the subcommand (e.g. patho's safeguarded settings).
struct RunConfig {
  std::string command;

  // model
  std::string model = "gmc";
  double gamma = 0.8;
  std::optional<double> lambda;
  /// solve on vector models without --lambda: lambda = lambda_factor * lambda_max.
  double lambda_factor = 0.1;
  int group_size = 5;
  double alpha = 1.0 / 19.0;
  std::optional<double> box_lower;
  std::optional<double> box_upper;

  // scheme and acceleration
  std::optional<std::string> scheme;
  std::optional<double> mu;
  bool aa = true;
  std::optional<int> memory;
  std::optional<double> eta;
  std::optional<double> D;
  std::optional<double> epsilon;
  std::optional<double> tol;
  std::optional<int> max_iter;

  // data: files, or synthetic generation when none are given
  std::string a_path;
  std::string y_path;
  std::string triplets_path;
  std::uint64_t seed = 0;
  int n = 200;
  int p = 500;
  double ar = 0.3;
  double snr = 1.0;
  int n_pos = 10;
  int n_neg = 10;
  std::string signal = "cross";
  std::optional<int> rows;
  std::optional<int> cols;
  std::optional<int> magnification;
  double mask_fraction = 0.8;
  std::optional<int> matrix_n;
  double noise_sd = 1.0;

  // path
  std::optional<int> n_lambda;
  double lambda_ratio = 1e-3;
  std::optional<double> lambda_hi;
  std::optional<double> lambda_lo;
  bool compare_aa = false;

  // patho
  double x0 = 2.1;

  // bench
  std::string experiment = "gmc";
  int replicates = 10;
  std::optional<std::string> select;
  bool dump_data = false;

  std::string out_dir = "out";
  bool quiet = false;
};

int cmd_solve(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_path(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_patho(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_bench(const RunConfig& cfg, std::ostream& out, std::ostream& err);

/// Parses argv (flags, optional --config file; flags win) and dispatches.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cncaa::cli
