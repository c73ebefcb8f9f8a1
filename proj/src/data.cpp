#include "epd/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "bundled_data.hpp"
#include "epd/asymptotics.hpp"
#include "epd/errors.hpp"

namespace epd {

namespace {

struct CheckSpec {
  const char* statistic;
  double expected;
};

struct BundledSpec {
  const char* name;
  DatasetKind kind;
  const char* model;
  const char* citation;
  std::vector<CheckSpec> checks;
};

constexpr double kCheckTolerance = 0.005;

const std::vector<BundledSpec>& bundled_specs() {
  static const std::vector<BundledSpec> specs = {
      {"telephone-fault", DatasetKind::univariate, "normal",
       "Welch (1987); also analysed by Simpson (1989)",
       {{"normal mean", 40.3571}, {"normal sd", 311.332}}},
      {"newcomb", DatasetKind::univariate, "normal",
       "Newcomb's 1882 passage times as listed by Stigler (1977)",
       {{"normal mean", 26.2121}, {"normal sd", 10.6636}}},
      {"darwin", DatasetKind::univariate, "normal",
       "Darwin's Zea mays paired height differences, as listed by Spiegelhalter (1985)",
       {{"normal mean", 20.9333}, {"normal sd", 36.4645}}},
      {"insulating-fluid", DatasetKind::univariate, "exponential",
       "Nelson (1972), breakdown times at 34 kV",
       {{"exponential mean", 14.3589}}},
      {"star-cluster", DatasetKind::regression, "",
       "Hertzsprung-Russell data of star cluster CYG OB1, Rousseeuw and Leroy (1987)",
       {{"OLS intercept", 6.7935}, {"OLS slope", -0.4133}, {"OLS residual variance", 0.3188}}},
      {"belgian-calls", DatasetKind::regression, "",
       "Belgian international phone calls 1950-1973, Rousseeuw and Leroy (1987)",
       {{"OLS intercept", -26.006}, {"OLS slope", 0.5041}, {"OLS residual variance", 31.6107}}},
  };
  return specs;
}

const BundledSpec* find_spec(std::string_view name) {
  for (const auto& s : bundled_specs()) {
    if (name == s.name) return &s;
  }
  return nullptr;
}

std::string_view trim(std::string_view s) {
  const auto ws = [](char c) { return c == ' ' || c == '\t' || c == '\r'; };
  while (!s.empty() && ws(s.front())) s.remove_prefix(1);
  while (!s.empty() && ws(s.back())) s.remove_suffix(1);
  return s;
}

[[noreturn]] void parse_fail(const std::string& source, std::size_t line, std::size_t column,
                             const std::string& what) {
  std::ostringstream os;
  os << source << ":" << line << ":" << column << ": " << what;
  throw DataError(os.str());
}

// Fields of one line with their 1-based starting columns.
std::vector<std::pair<std::string_view, std::size_t>> split_fields(std::string_view line) {
  std::vector<std::pair<std::string_view, std::size_t>> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    const std::string_view raw =
        line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    const std::size_t lead = raw.find_first_not_of(" \t\r");
    out.emplace_back(trim(raw), start + 1 + (lead == std::string_view::npos ? 0 : lead));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

double observed_value(const std::string& statistic, const DatasetRecord& rec) {
  if (rec.kind == DatasetKind::univariate) {
    const auto& x = rec.sample.observations;
    const double n = static_cast<double>(x.size());
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
    if (statistic == "normal mean" || statistic == "exponential mean") return mean;
    if (statistic == "normal sd") {
      double ss = 0.0;
      for (double v : x) ss += (v - mean) * (v - mean);
      return std::sqrt(ss / n);
    }
  } else {
    const OlsResult o = ols(*rec.regression);
    if (statistic == "OLS intercept") return o.eta[0];
    if (statistic == "OLS slope") return o.eta[1];
    if (statistic == "OLS residual variance") return o.sigma2_unbiased;
  }
  throw DataError("unknown validation statistic '" + statistic + "'");
}

}  // namespace

CsvTable parse_csv(std::string_view text, const std::string& source) {
  if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);
  CsvTable table;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    const std::string_view line =
        text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    ++line_no;
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (table.header.empty()) {
      for (const auto& [f, col] : fields) {
        if (f.empty()) parse_fail(source, line_no, col, "empty column name in header");
        table.header.emplace_back(f);
      }
      continue;
    }
    if (fields.size() != table.header.size()) {
      std::ostringstream os;
      os << "expected " << table.header.size() << " fields, found " << fields.size();
      parse_fail(source, line_no, 1, os.str());
    }
    std::vector<double> row;
    row.reserve(fields.size());
    for (const auto& [f, col] : fields) {
      double v = 0.0;
      const char* first = f.data();
      const char* last = f.data() + f.size();
      if (!f.empty() && *first == '+') ++first;
      const auto [ptr, ec] = std::from_chars(first, last, v);
      if (f.empty() || ec != std::errc() || ptr != last) {
        parse_fail(source, line_no, col, "cannot parse '" + std::string(f) + "' as a number");
      }
      if (!std::isfinite(v)) parse_fail(source, line_no, col, "non-finite value");
      row.push_back(v);
    }
    table.rows.push_back(std::move(row));
  }
  if (table.header.empty()) throw DataError(source + ": no header row");
  if (table.rows.empty()) throw DataError(source + ": no data rows");
  return table;
}

std::string to_string(DatasetKind kind) {
  return kind == DatasetKind::univariate ? "univariate" : "regression";
}

bool DatasetRecord::validated() const {
  return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
}

std::vector<std::string> bundled_dataset_names() {
  std::vector<std::string> names;
  for (const auto& s : bundled_specs()) names.emplace_back(s.name);
  return names;
}

std::string_view bundled_csv(std::string_view name) {
  for (const auto& f : detail::bundled_files()) {
    if (f.name == name) return f.csv;
  }
  throw DataError("unknown bundled dataset '" + std::string(name) + "'");
}

DatasetRecord record_from_table(const CsvTable& table, const std::string& name,
                                const LoadOptions& options) {
  DatasetRecord rec;
  rec.name = name;
  const std::size_t cols = table.header.size();
  const std::size_t n = table.rows.size();
  if (cols == 1) {
    rec.kind = DatasetKind::univariate;
    rec.sample.name = name;
    rec.sample.observations.reserve(n);
    for (const auto& r : table.rows) rec.sample.observations.push_back(r[0]);
    return rec;
  }
  rec.kind = DatasetKind::regression;
  Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cols - 1));
  Vector y(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j + 1 < cols; ++j) x(i, j) = table.rows[i][j];
    y[i] = table.rows[i][cols - 1];
  }
  std::vector<std::string> names(table.header.begin(), table.header.end() - 1);
  if (options.intercept) {
    rec.regression = RegressionProblem::with_intercept(x, y, std::move(names), name);
  } else {
    RegressionProblem pr;
    pr.design = x;
    pr.response = y;
    pr.column_names = std::move(names);
    pr.name = name;
    rec.regression = std::move(pr);
  }
  rec.regression->validate();
  return rec;
}

DatasetRecord load_dataset(const std::string& name_or_path, const LoadOptions& options) {
  if (const BundledSpec* spec = find_spec(name_or_path)) {
    const CsvTable table = parse_csv(bundled_csv(spec->name), spec->name);
    LoadOptions opts = options;
    opts.intercept = true;
    DatasetRecord rec = record_from_table(table, spec->name, opts);
    if (rec.kind != spec->kind) {
      throw DataError("bundled dataset '" + rec.name + "' has the wrong number of columns");
    }
    rec.bundled = true;
    rec.source_citation = spec->citation;
    rec.sample.provenance = spec->citation;
    rec.default_model = spec->model;
    for (const auto& c : spec->checks) {
      ValidationCheck vc{c.statistic, c.expected, kCheckTolerance, 0.0, false};
      vc.observed = observed_value(vc.statistic, rec);
      vc.passed = std::abs(vc.observed - vc.expected) <= vc.tolerance * std::abs(vc.expected);
      rec.checks.push_back(vc);
    }
    for (const auto& c : rec.checks) {
      if (!c.passed) {
        std::ostringstream os;
        os.precision(17);
        os << "dataset '" << rec.name << "' failed validation: " << c.statistic
           << " expected " << c.expected << " got " << c.observed << " (relative tolerance "
           << c.tolerance << ")";
        throw DataError(os.str());
      }
    }
    return rec;
  }
  std::ifstream in(name_or_path, std::ios::binary);
  if (!in) {
    std::ostringstream os;
    os << "'" << name_or_path << "' is neither a bundled dataset nor a readable file (bundled:";
    for (const auto& s : bundled_specs()) os << " " << s.name;
    os << ")";
    throw DataError(os.str());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return record_from_table(parse_csv(buf.str(), name_or_path), name_or_path, options);
}

std::string to_string(CurveKind kind) {
  return kind == CurveKind::influence ? "influence" : "weight";
}

CurveKind curve_kind_from_string(const std::string& s) {
  if (s == "influence") return CurveKind::influence;
  if (s == "weight") return CurveKind::weight;
  throw ParameterError("curve kind must be 'influence' or 'weight', got '" + s + "'");
}

std::vector<double> linear_grid(double lo, double hi, int n) {
  if (!std::isfinite(lo) || !std::isfinite(hi) || n < 1 || (n == 1 && lo != hi) || hi < lo) {
    throw ParameterError("grid needs finite lo <= hi and n >= 2 points");
  }
  std::vector<double> g(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    g[static_cast<std::size_t>(i)] =
        i == n - 1 ? hi : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  return g;
}

CurveTable emit_curve(CurveKind kind, const Model& model, const Vector& theta,
                      const std::vector<Triplet>& triplets, std::vector<double> grid,
                      const QuadratureOptions& quadrature) {
  if (triplets.empty()) throw ParameterError("emit_curve needs at least one triplet");
  for (const auto& t : triplets) t.validate();
  for (double g : grid) {
    if (!std::isfinite(g)) throw ParameterError("curve grid has a non-finite point");
  }
  std::sort(grid.begin(), grid.end());
  CurveTable table;
  if (kind == CurveKind::weight) {
    if (!grid.empty() && grid.front() < 0.0) {
      throw DomainError("weight curves take density values t >= 0");
    }
    table.columns.emplace_back("t");
    for (const auto& t : triplets) table.columns.push_back("w " + t.to_string());
    for (double x : grid) {
      std::vector<double> row{x};
      for (const auto& t : triplets) row.push_back(weight(x, t));
      table.rows.push_back(std::move(row));
    }
    return table;
  }
  model.check(theta);
  table.columns.emplace_back("y");
  std::vector<InfluenceFunction> ifs;
  for (const auto& t : triplets) {
    ifs.emplace_back(model, theta, t, quadrature);
    for (const auto& p : model.param_names()) table.columns.push_back(p + " " + t.to_string());
  }
  for (double y : grid) {
    std::vector<double> row{y};
    for (const auto& f : ifs) {
      const Vector v = f(y);
      row.insert(row.end(), v.data(), v.data() + v.size());
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace epd
