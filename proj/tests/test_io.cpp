#include "cncaa/io.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

using namespace cncaa;

TEST(FormatDouble, RoundTripsExactly) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal(0.0, 1e3);
  for (int i = 0; i < 1000; ++i) {
    const double v = normal(rng) * std::pow(10.0, (i % 41) - 20);
    EXPECT_EQ(detail::parse_double(format_double(v), "t"), v);
  }
  EXPECT_EQ(format_double(0.5), "0.5");
  EXPECT_EQ(format_double(-3.0), "-3");
  EXPECT_EQ(detail::parse_double(format_double(std::numeric_limits<double>::denorm_min()), "t"),
            std::numeric_limits<double>::denorm_min());
}

TEST(Matrix, RoundTrip) {
  std::mt19937_64 rng(2);
  const MatrixXd m = cncaa::testing::random_matrix(4, 3, rng);
  std::stringstream ss;
  write_matrix(ss, m);
  EXPECT_EQ(read_matrix(ss), m);
}

TEST(Matrix, CommentsSeparatorsAndErrors) {
  std::istringstream ok("# header comment\n2 2\n1,2\n\n3\t4\r\n");
  const MatrixXd m = read_matrix(ok);
  EXPECT_EQ(m(1, 0), 3.0);
  EXPECT_EQ(m(0, 1), 2.0);
  std::istringstream rows("3 2\n1 2\n3 4\n");
  EXPECT_THROW(read_matrix(rows), FormatError);
  std::istringstream cols("2 2\n1 2 3\n3 4\n");
  EXPECT_THROW(read_matrix(cols), FormatError);
  std::istringstream bad("1 2\n1 x\n");
  EXPECT_THROW(read_matrix(bad), FormatError);
  std::istringstream header("1\n1\n");
  EXPECT_THROW(read_matrix(header), FormatError);
  std::istringstream empty("# nothing\n");
  EXPECT_THROW(read_matrix(empty), FormatError);
  EXPECT_THROW(read_matrix_file("/nonexistent/file.txt"), FormatError);
}

TEST(Vector, RoundTripAndFlexibleLayout) {
  std::mt19937_64 rng(3);
  const VectorXd v = cncaa::testing::random_vector(7, rng);
  std::stringstream ss;
  write_vector(ss, v);
  EXPECT_EQ(read_vector(ss), v);
  std::istringstream flat("1, 2 3\n4\n");
  EXPECT_EQ(read_vector(flat).size(), 4);
  std::istringstream none("\n");
  EXPECT_THROW(read_vector(none), FormatError);
}

TEST(Triplets, ReadWithHeaderAndInferredShape) {
  std::istringstream with("3 4\n1 1 0.5\n3 4 -2\n2 1 1\n");
  const Observations o = read_triplets(with);
  EXPECT_EQ(o.op.mask_rows(), 3);
  EXPECT_EQ(o.op.mask_cols(), 4);
  EXPECT_EQ(o.op.observed_count(), 3);
  EXPECT_EQ(o.y(0), 0.5);
  EXPECT_EQ(o.y(3 * 3 + 2), -2.0);
  EXPECT_EQ(o.y(1), 1.0);
  EXPECT_EQ(o.y(4), 0.0);

  std::istringstream inferred("2 3 1\n1 1 2\n");
  const Observations p = read_triplets(inferred);
  EXPECT_EQ(p.op.mask_rows(), 2);
  EXPECT_EQ(p.op.mask_cols(), 3);
  std::istringstream given("1 1 2\n");
  EXPECT_EQ(read_triplets(given, 5, 6).op.mask_cols(), 6);
}

TEST(Triplets, Errors) {
  std::istringstream zero("0 1 1\n");
  EXPECT_THROW(read_triplets(zero), FormatError);
  std::istringstream fields("1 1\n1 2 3 4\n");
  EXPECT_THROW(read_triplets(fields), FormatError);
  std::istringstream empty("2 2\n");
  EXPECT_THROW(read_triplets(empty), FormatError);
  std::istringstream outside("2 2\n3 1 1\n");
  EXPECT_THROW(read_triplets(outside), std::invalid_argument);
}

TEST(Triplets, RoundTrip) {
  const auto mask = MeasurementOp::entry_mask(3, 2, {{0, 0}, {2, 1}, {1, 1}});
  VectorXd y = VectorXd::Zero(6);
  y(0) = 1.25;
  y(5) = -3;
  y(4) = 0.1;
  std::stringstream ss;
  write_triplets(ss, mask, y);
  const Observations o = read_triplets(ss);
  EXPECT_EQ(o.y, y);
  EXPECT_EQ(o.op.mask(), mask.mask());
  EXPECT_THROW(write_triplets(ss, MeasurementOp::dense(MatrixXd::Identity(2, 2)), y),
               std::invalid_argument);
}

TEST(Csv, WritesHeaderAndRows) {
  std::ostringstream out;
  CsvWriter csv(out, {"a", "b"});
  csv.row({"1", format_double(0.25)});
  EXPECT_EQ(out.str(), "a,b\n1,0.25\n");
}
