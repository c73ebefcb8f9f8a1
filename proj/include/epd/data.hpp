#pragma once

// Dataset ingestion: a small CSV reader, the bundled datasets with their
// validation checks, and plot-ready curve tables.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "epd/divergence.hpp"
#include "epd/estimation.hpp"
#include "epd/models.hpp"
#include "epd/quadrature.hpp"
#include "epd/regression.hpp"

namespace epd {

/// Comma-separated, '.' decimal, first row is the header. Blank lines and
/// surrounding whitespace in a field are ignored; a UTF-8 byte order mark is
/// skipped.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

/// Throws DataError naming `source`, the 1-based line and column on failure.
CsvTable parse_csv(std::string_view text, const std::string& source = "<input>");

enum class DatasetKind { univariate, regression };

std::string to_string(DatasetKind kind);

struct ValidationCheck {
  std::string statistic;
  double expected = 0.0;
  /// Relative.
  double tolerance = 0.0;
  double observed = 0.0;
  bool passed = false;
};

struct DatasetRecord {
  std::string name;
  DatasetKind kind = DatasetKind::univariate;
  /// Filled for univariate records.
  Sample sample;
  /// Filled for regression records.
  std::optional<RegressionProblem> regression;
  std::string source_citation;
  /// "normal" or "exponential" for bundled univariate data; empty otherwise.
  std::string default_model;
  std::vector<ValidationCheck> checks;
  bool bundled = false;

  /// All checks passed (vacuously true for external files).
  bool validated() const;
};

std::vector<std::string> bundled_dataset_names();

/// Raw CSV text of a bundled dataset; throws DataError for an unknown name.
std::string_view bundled_csv(std::string_view name);

struct LoadOptions {
  /// Prepend an intercept column to regression designs read from files.
  /// Bundled regression data always carry one.
  bool intercept = true;
};

/// A bundled name or a path to a CSV file. One column gives a univariate
/// sample; more columns give a regression whose last column is the response.
/// Bundled records are checked against their published summary statistics
/// and a failed check throws DataError naming the statistic, expected and
/// observed values. Files are checked for finiteness and shape only.
DatasetRecord load_dataset(const std::string& name_or_path, const LoadOptions& options = {});

/// Builds a record from parsed CSV content without any checks.
DatasetRecord record_from_table(const CsvTable& table, const std::string& name,
                                const LoadOptions& options = {});

enum class CurveKind { influence, weight };

std::string to_string(CurveKind kind);
CurveKind curve_kind_from_string(const std::string& s);

/// columns[0] is the abscissa; rows are sorted by it.
struct CurveTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

/// Weight curves: abscissa t (a density value), one column w(t) per triplet.
/// Influence curves: abscissa y, one column per (triplet, parameter component).
/// The grid is sorted and duplicates are kept.
CurveTable emit_curve(CurveKind kind, const Model& model, const Vector& theta,
                      const std::vector<Triplet>& triplets, std::vector<double> grid,
                      const QuadratureOptions& quadrature = {});

/// n equally spaced points from lo to hi inclusive (n >= 2, or n == 1 for {lo}).
std::vector<double> linear_grid(double lo, double hi, int n);

}  // namespace epd
