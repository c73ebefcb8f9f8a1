#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "epd/asymptotics.hpp"
#include "epd/data.hpp"
#include "epd/errors.hpp"

using namespace epd;
using doctest::Approx;

namespace {

std::string error_of(const std::string& text) {
  try {
    parse_csv(text, "t.csv");
  } catch (const DataError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("csv parsing") {
  const auto t = parse_csv("\xEF\xBB\xBFx, y\n1,2\n\n  3.5 ,-4e-1\n+7,8\n");
  REQUIRE(t.header.size() == 2);
  CHECK(t.header[1] == "y");
  REQUIRE(t.rows.size() == 3);
  CHECK(t.rows[1][0] == 3.5);
  CHECK(t.rows[1][1] == -0.4);
  CHECK(t.rows[2][0] == 7.0);
  const auto crlf = parse_csv("a\r\n1\r\n2\r\n");
  CHECK(crlf.rows.size() == 2);
}

TEST_CASE("csv errors name the line and column") {
  CHECK(error_of("a,b\n1,2\n3,x\n").find("t.csv:3:3") != std::string::npos);
  CHECK(error_of("a,b\n1,2\n3\n").find("t.csv:3:1") != std::string::npos);
  CHECK(error_of("a\n1\nnan\n").find("t.csv:3:1") != std::string::npos);
  CHECK(error_of("a,,b\n1,2,3\n").find("t.csv:1:") != std::string::npos);
  CHECK_FALSE(error_of("a\n").empty());
  CHECK_FALSE(error_of("").empty());
  CHECK(error_of("a\n1,5\n").find("expected 1 fields") != std::string::npos);
}

TEST_CASE("bundled datasets load and pass their checks") {
  const auto names = bundled_dataset_names();
  CHECK(names.size() == 6);
  for (const auto& n : names) {
    CAPTURE(n);
    const auto rec = load_dataset(n);
    CHECK(rec.bundled);
    CHECK(rec.validated());
    CHECK_FALSE(rec.checks.empty());
    CHECK_FALSE(rec.source_citation.empty());
    for (const auto& c : rec.checks) {
      CHECK(std::abs(c.observed - c.expected) <= c.tolerance * std::abs(c.expected));
    }
  }
  CHECK(load_dataset("newcomb").sample.size() == 66);
  CHECK(load_dataset("darwin").sample.size() == 15);
  CHECK(load_dataset("insulating-fluid").default_model == "exponential");
  const auto star = load_dataset("star-cluster");
  CHECK(star.kind == DatasetKind::regression);
  CHECK(star.regression->n() == 47);
  CHECK(star.regression->column_names.front() == "intercept");
  CHECK((star.regression->design.col(0).array() == 1.0).all());
}

TEST_CASE("unknown dataset") {
  CHECK_THROWS_AS(load_dataset("no-such-dataset"), DataError);
  CHECK_THROWS_AS(bundled_csv("no-such-dataset"), DataError);
}

TEST_CASE("files are read with or without an intercept") {
  const std::string path = "epd_test_reg.csv";
  {
    std::ofstream f(path);
    f << "x,y\n1,2.1\n2,3.9\n3,6.2\n4,7.8\n";
  }
  const auto with = load_dataset(path);
  CHECK_FALSE(with.bundled);
  CHECK(with.validated());
  CHECK(with.regression->p() == 2);
  const auto without = load_dataset(path, {false});
  CHECK(without.regression->p() == 1);
  {
    std::ofstream f(path);
    f << "x,y\n1,1\n1,2\n1,3\n";
  }
  // x duplicates the intercept column
  CHECK_THROWS_AS(load_dataset(path), DataError);
  std::remove(path.c_str());
}

TEST_CASE("weight curve table") {
  const NormalLocationScale normal;
  const std::vector<Triplet> ts = {Triplet::kl(), {-1.0, 0.4, 0.2}};
  const auto t = emit_curve(CurveKind::weight, normal, Vector{{0.0, 1.0}}, ts, {0.5, 0.0, 1.0});
  REQUIRE(t.columns.size() == 3);
  CHECK(t.columns[0] == "t");
  REQUIRE(t.rows.size() == 3);
  CHECK(t.rows[0][0] == 0.0);
  CHECK(t.rows[1][0] == 0.5);
  CHECK(t.rows[2][1] == Approx(1.0));
  CHECK(t.rows[1][2] == weight(0.5, ts[1]));
  CHECK_THROWS_AS(emit_curve(CurveKind::weight, normal, Vector{{0.0, 1.0}}, ts, {-0.1}),
                  DomainError);
}

TEST_CASE("influence curve table") {
  const NormalLocationScale normal;
  const std::vector<Triplet> ts = {Triplet::kl(), Triplet::dpd(0.5)};
  const auto t = emit_curve(CurveKind::influence, normal, Vector{{0.0, 1.0}}, ts,
                            linear_grid(-3.0, 3.0, 7));
  REQUIRE(t.columns.size() == 5);
  CHECK(t.columns[1].rfind("mu ", 0) == 0);
  CHECK(t.columns[2].rfind("sigma2 ", 0) == 0);
  REQUIRE(t.rows.size() == 7);
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& r = t.rows[i];
    CHECK(r[1] == Approx(r[0]).epsilon(1e-9).scale(1.0));
    CHECK(r[3] == -t.rows[t.rows.size() - 1 - i][3]);
  }
  CHECK(t.rows[3][3] == 0.0);
}

TEST_CASE("linear grid") {
  const auto g = linear_grid(0.0, 1.0, 5);
  CHECK(g.size() == 5);
  CHECK(g[2] == 0.5);
  CHECK(g.back() == 1.0);
  CHECK(linear_grid(2.0, 2.0, 1).size() == 1);
  CHECK_THROWS_AS(linear_grid(1.0, 0.0, 3), ParameterError);
  CHECK(curve_kind_from_string("weight") == CurveKind::weight);
  CHECK_THROWS(curve_kind_from_string("density"));
}
