#include "epd/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "epd/asymptotics.hpp"
#include "epd/data.hpp"
#include "epd/errors.hpp"
#include "epd/estimation.hpp"
#include "epd/regression.hpp"
#include "epd/tuning.hpp"

namespace epd {

namespace {

using Json = nlohmann::ordered_json;

// Options shared by every subcommand.
struct Common {
  std::string format = "json";
  std::uint64_t seed = 0;
};

struct TripletArgs {
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
  Triplet get() const { return {alpha, beta, gamma}; }
};

struct SearchArgs {
  std::string alpha_range = "-50:2";
  std::string beta_range = "0:1";
  std::string gamma_range = "0:1";
  std::string grid = "13,6,11";
  std::string plug_in = "model";
  double pilot_gamma = 0.5;
  bool dpd_only = false;
  bool no_refine = false;
  bool surface = false;
  std::vector<std::string> compare;
};

double parse_number(std::string_view s, const std::string& what) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw ParameterError("cannot parse '" + std::string(s) + "' in " + what);
  }
  return v;
}

std::vector<double> parse_list(const std::string& s, char sep, const std::string& what) {
  std::vector<double> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t p = s.find(sep, start);
    out.push_back(parse_number(std::string_view(s).substr(start, p == std::string::npos
                                                                      ? std::string::npos
                                                                      : p - start),
                               what));
    if (p == std::string::npos) break;
    start = p + 1;
  }
  return out;
}

Range parse_range(const std::string& s, const std::string& what) {
  const auto v = parse_list(s, ':', what);
  if (v.size() != 2) throw ParameterError(what + " must look like lo:hi, got '" + s + "'");
  return {v[0], v[1]};
}

Triplet parse_triplet(const std::string& s) {
  const auto v = parse_list(s, ',', "triplet");
  if (v.size() != 3) throw ParameterError("a triplet is alpha,beta,gamma, got '" + s + "'");
  Triplet t{v[0], v[1], v[2]};
  t.validate();
  return t;
}

Vector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// Non-finite values become null; JSON has no infinity.
Json num(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json vec_json(const Vector& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(num(v[i]));
  return a;
}

Json mat_json(const Matrix& m) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(num(m(i, j)));
    a.push_back(row);
  }
  return a;
}

Json named_json(const Vector& v, const std::vector<std::string>& names) {
  Json o = Json::object();
  for (Eigen::Index i = 0; i < v.size(); ++i) o[names[static_cast<std::size_t>(i)]] = num(v[i]);
  return o;
}

Json triplet_json(const Triplet& t) {
  return Json{{"alpha", num(t.alpha)}, {"beta", num(t.beta)}, {"gamma", num(t.gamma)}};
}

Json dataset_json(const DatasetRecord& rec) {
  Json d;
  d["name"] = rec.name;
  d["kind"] = to_string(rec.kind);
  d["bundled"] = rec.bundled;
  d["n"] = rec.kind == DatasetKind::univariate ? static_cast<long long>(rec.sample.size())
                                               : static_cast<long long>(rec.regression->n());
  if (rec.bundled) d["source"] = rec.source_citation;
  Json checks = Json::array();
  for (const auto& c : rec.checks) {
    checks.push_back({{"statistic", c.statistic},
                      {"expected", num(c.expected)},
                      {"tolerance", num(c.tolerance)},
                      {"observed", num(c.observed)},
                      {"passed", c.passed}});
  }
  d["validation"] = checks;
  d["validated"] = rec.validated();
  return d;
}

std::string csv_number(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string csv_field(const Json& v) {
  if (v.is_null()) return "null";
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number()) return csv_number(v.get<double>());
  std::string s = v.is_string() ? v.get<std::string>() : v.dump();
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

void flatten(const Json& v, const std::string& path, std::ostream& out) {
  if (v.is_object()) {
    for (const auto& [k, x] : v.items()) flatten(x, path.empty() ? k : path + "." + k, out);
  } else if (v.is_array()) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      flatten(v[i], path + "[" + std::to_string(i) + "]", out);
    }
  } else {
    out << csv_field(Json(path)) << "," << csv_field(v) << "\n";
  }
}

// CSV output: a table when the document carries one, otherwise one
// path,value row per scalar.
void write_csv(const Json& doc, std::ostream& out) {
  if (doc.contains("table")) {
    const Json& t = doc["table"];
    bool first = true;
    for (const auto& c : t["columns"]) {
      out << (first ? "" : ",") << csv_field(c);
      first = false;
    }
    out << "\n";
    for (const auto& row : t["rows"]) {
      first = true;
      for (const auto& x : row) {
        out << (first ? "" : ",") << csv_field(x);
        first = false;
      }
      out << "\n";
    }
    return;
  }
  out << "field,value\n";
  flatten(doc, "", out);
}

void write_document(const Json& doc, const std::string& format, std::ostream& out) {
  if (format == "csv") {
    write_csv(doc, out);
  } else {
    out << doc.dump(2) << "\n";
  }
}

std::unique_ptr<Model> resolve_model(const std::string& requested, const DatasetRecord& rec) {
  if (!requested.empty()) return make_model(requested);
  if (!rec.default_model.empty()) return make_model(rec.default_model);
  throw ParameterError("--model is required for data read from a file");
}

const Sample& univariate(const DatasetRecord& rec) {
  if (rec.kind != DatasetKind::univariate) {
    throw DataError("dataset '" + rec.name + "' has covariates; use regress or tune-regress");
  }
  return rec.sample;
}

const RegressionProblem& regression(const DatasetRecord& rec) {
  if (rec.kind != DatasetKind::regression) {
    throw DataError("dataset '" + rec.name + "' has a single column; use fit or tune");
  }
  return *rec.regression;
}

// Estimates as named parameters; the normal model also reports sigma.
Json estimate_json(const Model& model, const Vector& theta) {
  Json e = named_json(theta, model.param_names());
  if (model.name() == "normal") e["sigma"] = num(std::sqrt(theta[1]));
  return e;
}

Json fit_document(const Model& model, const Sample& sample, const Triplet& trip,
                  const FitResult& fit, bool variance) {
  Json r;
  r["triplet"] = triplet_json(trip);
  r["estimate"] = estimate_json(model, fit.theta_hat);
  r["theta"] = vec_json(fit.theta_hat);
  r["objective"] = num(fit.objective);
  if (variance) {
    const Matrix v = sandwich_variance(sample.observations, model, fit.theta_hat, trip);
    r["variance"] = mat_json(v);
    r["standard_errors"] = named_json(v.diagonal().cwiseSqrt(), model.param_names());
  }
  return r;
}

Json fit_diagnostics(const FitResult& fit) {
  return Json{{"converged", fit.converged},
              {"ee_residual_norm", num(fit.ee_residual_norm)},
              {"iterations", fit.iterations},
              {"starts", fit.starts},
              {"multiple_roots", fit.multiple_roots},
              {"quadrature_error", num(fit.quadrature_error)},
              {"warnings", fit.warnings}};
}

void add_search_options(CLI::App* cmd, SearchArgs& s) {
  cmd->add_option("--alpha-range", s.alpha_range, "alpha search range lo:hi")
      ->capture_default_str();
  cmd->add_option("--beta-range", s.beta_range, "beta search range lo:hi")->capture_default_str();
  cmd->add_option("--gamma-range", s.gamma_range, "gamma search range lo:hi")
      ->capture_default_str();
  cmd->add_option("--grid", s.grid, "grid points for alpha,beta,gamma")->capture_default_str();
  cmd->add_option("--plug-in", s.plug_in, "where J and K are evaluated: model or empirical")
      ->capture_default_str();
  cmd->add_option("--pilot-gamma", s.pilot_gamma, "gamma of the MDPDE pilot")
      ->capture_default_str();
  cmd->add_flag("--dpd-only", s.dpd_only, "search beta = 0 only");
}

TuneConfig tune_config(const SearchArgs& s) {
  TuneConfig c;
  c.alpha = parse_range(s.alpha_range, "--alpha-range");
  c.beta = parse_range(s.beta_range, "--beta-range");
  c.gamma = parse_range(s.gamma_range, "--gamma-range");
  const auto g = parse_list(s.grid, ',', "--grid");
  if (g.size() != 3) throw ParameterError("--grid takes three counts a,b,g");
  for (std::size_t i = 0; i < 3; ++i) {
    if (g[i] != std::floor(g[i]) || g[i] < 1) {
      throw ParameterError("--grid counts must be positive integers");
    }
    c.grid[i] = static_cast<int>(g[i]);
  }
  c.plug_in = plug_in_from_string(s.plug_in);
  c.pilot_gamma = s.pilot_gamma;
  c.dpd_only = s.dpd_only;
  c.refine = !s.no_refine;
  c.validate();
  return c;
}

Json config_json(const TuneConfig& c) {
  return Json{{"alpha_range", {num(c.alpha.lo), num(c.alpha.hi)}},
              {"beta_range", {num(c.beta.lo), num(c.beta.hi)}},
              {"gamma_range", {num(c.gamma.lo), num(c.gamma.hi)}},
              {"grid", c.grid},
              {"refine", c.refine},
              {"plug_in", to_string(c.plug_in)},
              {"pilot_gamma", num(c.pilot_gamma)},
              {"dpd_only", c.dpd_only}};
}

Json point_json(const MsePoint& p) {
  Json j{{"triplet", triplet_json(p.triplet)},
         {"mse", num(p.mse)},
         {"theta", vec_json(p.theta_hat)},
         {"refined", p.refined}};
  if (!p.note.empty()) j["note"] = p.note;
  return j;
}

Json tune_results(const TuneResult& r, const std::vector<std::string>& names) {
  Json res;
  res["optimum"] = {{"triplet", triplet_json(r.triplet)},
                    {"estimate", named_json(r.theta_hat, names)},
                    {"mse", num(r.empirical_mse)}};
  if (r.dpd) {
    res["dpd_optimum"] = {{"triplet", triplet_json(r.dpd->triplet)},
                          {"estimate", named_json(r.dpd->theta_hat, names)},
                          {"mse", num(r.dpd->empirical_mse)}};
  }
  res["pilot"] = named_json(r.pilot, names);
  return res;
}

Json surface_table(const TuneResult& r, const std::vector<std::string>& names) {
  Json cols = {"alpha", "beta", "gamma", "mse"};
  for (const auto& n : names) cols.push_back(n);
  cols.push_back("note");
  std::vector<MsePoint> pts = r.surface;
  std::sort(pts.begin(), pts.end(), [](const MsePoint& a, const MsePoint& b) {
    return std::tie(a.triplet.alpha, a.triplet.beta, a.triplet.gamma) <
           std::tie(b.triplet.alpha, b.triplet.beta, b.triplet.gamma);
  });
  Json rows = Json::array();
  for (const auto& p : pts) {
    Json row = {num(p.triplet.alpha), num(p.triplet.beta), num(p.triplet.gamma), num(p.mse)};
    for (Eigen::Index i = 0; i < p.theta_hat.size(); ++i) row.push_back(num(p.theta_hat[i]));
    for (std::size_t i = static_cast<std::size_t>(p.theta_hat.size()); i < names.size(); ++i) {
      row.push_back(nullptr);
    }
    row.push_back(p.note);
    rows.push_back(row);
  }
  return Json{{"columns", cols}, {"rows", rows}};
}

std::vector<std::string> regression_names(const RegressionProblem& pr) {
  std::vector<std::string> names = pr.column_names;
  names.emplace_back("sigma2");
  return names;
}

Json error_document(const std::string& type, const std::string& message, int code) {
  return Json{{"error", {{"type", type}, {"message", message}, {"exit_code", code}}}};
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Minimum exponential-polynomial divergence estimation", "epd"};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  app.add_option("--format", common.format, "output format")
      ->check(CLI::IsMember({"json", "csv"}))
      ->capture_default_str();
  app.add_option("--seed", common.seed, "seed for randomised steps")->capture_default_str();

  std::function<Json()> action;

  // fit / mle
  std::string data, model_name, init;
  TripletArgs trip;
  bool variance = false;
  auto* fit = app.add_subcommand("fit", "minimum-EPD fit of a univariate model");
  auto* mle = app.add_subcommand("mle", "maximum likelihood fit of a univariate model");
  for (auto* cmd : {fit, mle}) {
    cmd->add_option("--data", data, "bundled dataset name or CSV path")->required();
    cmd->add_option("--model", model_name, "normal or exponential (bundled data has a default)")
        ->check(CLI::IsMember({"normal", "exponential"}));
    cmd->add_option("--init", init, "starting value, comma-separated");
    cmd->add_flag("--variance", variance, "report the sandwich covariance estimate");
  }
  fit->add_option("--alpha", trip.alpha)->capture_default_str();
  fit->add_option("--beta", trip.beta)->capture_default_str();
  fit->add_option("--gamma", trip.gamma)->capture_default_str();
  const auto run_fit = [&](bool is_mle) {
    const DatasetRecord rec = load_dataset(data);
    const Sample& sample = univariate(rec);
    const auto model = resolve_model(model_name, rec);
    const Triplet t = is_mle ? Triplet::kl() : trip.get();
    t.validate();
    std::optional<Vector> start;
    if (!init.empty()) start = to_vector(parse_list(init, ',', "--init"));
    const FitResult f = fit_mepde(sample, *model, t, start);
    Json doc;
    doc["command"] = is_mle ? "mle" : "fit";
    doc["inputs"] = {{"data", data},
                     {"model", model->name()},
                     {"triplet", triplet_json(t)},
                     {"init", start ? vec_json(*start) : Json(nullptr)},
                     {"variance", variance}};
    doc["dataset"] = dataset_json(rec);
    doc["results"] = fit_document(*model, sample, t, f, variance);
    doc["diagnostics"] = fit_diagnostics(f);
    return doc;
  };
  fit->callback([&] { action = [&] { return run_fit(false); }; });
  mle->callback([&] { action = [&] { return run_fit(true); }; });

  // tune / mse-surface
  SearchArgs search;
  auto* tune = app.add_subcommand("tune", "Warwick-Jones selection of the tuning triplet");
  auto* surface = app.add_subcommand("mse-surface", "summed-MSE criterion on a triplet grid");
  for (auto* cmd : {tune, surface}) {
    cmd->add_option("--data", data, "bundled dataset name or CSV path")->required();
    cmd->add_option("--model", model_name, "normal or exponential")
        ->check(CLI::IsMember({"normal", "exponential"}));
    add_search_options(cmd, search);
  }
  tune->add_flag("--no-refine", search.no_refine, "grid only, no simplex refinement");
  tune->add_flag("--surface", search.surface, "include every evaluated point");
  tune->add_option("--compare", search.compare,
                   "also evaluate the criterion at alpha,beta,gamma (repeatable)");
  const auto run_tune = [&](bool grid_only) {
    const DatasetRecord rec = load_dataset(data);
    const Sample& sample = univariate(rec);
    const auto model = resolve_model(model_name, rec);
    if (grid_only) search.no_refine = true;
    const TuneConfig cfg = tune_config(search);
    const TuneResult r = tune_wj(sample, *model, cfg);
    const auto names = model->param_names();
    Json doc;
    doc["command"] = grid_only ? "mse-surface" : "tune";
    doc["inputs"] = {{"data", data}, {"model", model->name()}, {"config", config_json(cfg)}};
    doc["dataset"] = dataset_json(rec);
    if (grid_only) {
      doc["table"] = surface_table(r, names);
      doc["diagnostics"] = {{"evaluations", r.evaluations}};
      return doc;
    }
    Json res = tune_results(r, names);
    Json cmp = Json::array();
    for (const auto& s : search.compare) {
      const MsePoint p =
          evaluate_mse(sample, *model, parse_triplet(s), r.pilot, cfg.plug_in, cfg.fit);
      cmp.push_back(point_json(p));
    }
    if (!cmp.empty()) res["compare"] = cmp;
    if (search.surface) res["surface"] = surface_table(r, names);
    doc["results"] = res;
    Json sens = Json::array();
    for (const auto& s : pilot_sensitivity(sample, *model, r.triplet, cfg)) {
      sens.push_back({{"pilot_gamma", num(s.pilot_gamma)},
                      {"mse", num(s.mse)},
                      {"delta", num(s.delta)}});
    }
    doc["diagnostics"] = {{"evaluations", r.evaluations}, {"pilot_sensitivity", sens}};
    return doc;
  };
  tune->callback([&] { action = [&] { return run_tune(false); }; });
  surface->callback([&] { action = [&] { return run_tune(true); }; });

  // regress / tune-regress
  bool intercept = false;
  auto* regress = app.add_subcommand("regress", "minimum-EPD fit of a normal linear model");
  auto* tune_reg = app.add_subcommand("tune-regress", "tuning selection for the linear model");
  for (auto* cmd : {regress, tune_reg}) {
    cmd->add_option("--data", data, "bundled dataset name or CSV path (response last)")
        ->required();
    cmd->add_flag("--intercept", intercept,
                  "prepend an intercept column to file data (bundled data always has one)");
  }
  regress->add_option("--alpha", trip.alpha)->capture_default_str();
  regress->add_option("--beta", trip.beta)->capture_default_str();
  regress->add_option("--gamma", trip.gamma)->capture_default_str();
  regress->add_option("--init", init, "starting value eta..., sigma2");
  regress->add_flag("--variance", variance, "report Psi^-1 Omega Psi^-1 / n");
  add_search_options(tune_reg, search);
  tune_reg->add_flag("--no-refine", search.no_refine, "grid only, no simplex refinement");
  tune_reg->add_flag("--surface", search.surface, "include every evaluated point");
  tune_reg->add_option("--compare", search.compare,
                       "also evaluate the criterion at alpha,beta,gamma (repeatable)");
  regress->callback([&] {
    action = [&] {
      const DatasetRecord rec = load_dataset(data, {intercept});
      const RegressionProblem& pr = regression(rec);
      const Triplet t = trip.get();
      t.validate();
      RegressionFitOptions opts;
      opts.seed = common.seed;
      std::optional<Vector> start;
      if (!init.empty()) start = to_vector(parse_list(init, ',', "--init"));
      const RegressionFit f = fit_regression_mepde(pr, t, start, opts);
      const OlsResult o = ols(pr);
      const auto names = regression_names(pr);
      Json doc;
      doc["command"] = "regress";
      doc["inputs"] = {{"data", data},
                       {"intercept", rec.bundled || intercept},
                       {"triplet", triplet_json(t)},
                       {"init", start ? vec_json(*start) : Json(nullptr)},
                       {"variance", variance},
                       {"seed", common.seed}};
      doc["dataset"] = dataset_json(rec);
      Json res;
      res["triplet"] = triplet_json(t);
      res["estimate"] = named_json(f.theta(), names);
      res["theta"] = vec_json(f.theta());
      res["objective"] = num(f.objective);
      res["ols"] = {{"estimate", named_json(o.eta, pr.column_names)},
                    {"sigma2_unbiased", num(o.sigma2_unbiased)},
                    {"sigma2_ml", num(o.sigma2_ml)}};
      if (variance) {
        res["variance"] = mat_json(f.variance);
        res["standard_errors"] = named_json(f.variance.diagonal().cwiseSqrt(), names);
      }
      doc["results"] = res;
      doc["diagnostics"] = {{"converged", f.converged},
                            {"ee_residual_norm", num(f.ee_residual_norm)},
                            {"iterations", f.iterations},
                            {"starts", f.starts},
                            {"multiple_roots", f.multiple_roots},
                            {"warnings", f.warnings}};
      return doc;
    };
  });
  tune_reg->callback([&] {
    action = [&] {
      const DatasetRecord rec = load_dataset(data, {intercept});
      const RegressionProblem& pr = regression(rec);
      const TuneConfig cfg = tune_config(search);
      RegressionFitOptions opts;
      opts.seed = common.seed;
      const TuneResult r = tune_regression_wj(pr, cfg, opts);
      const auto names = regression_names(pr);
      Json doc;
      doc["command"] = "tune-regress";
      doc["inputs"] = {{"data", data},
                       {"intercept", rec.bundled || intercept},
                       {"config", config_json(cfg)},
                       {"seed", common.seed}};
      doc["dataset"] = dataset_json(rec);
      Json res = tune_results(r, names);
      Json cmp = Json::array();
      for (const auto& s : search.compare) {
        cmp.push_back(
            point_json(evaluate_regression_mse(pr, parse_triplet(s), r.pilot, cfg.plug_in, opts)));
      }
      if (!cmp.empty()) res["compare"] = cmp;
      if (search.surface) res["surface"] = surface_table(r, names);
      doc["results"] = res;
      doc["diagnostics"] = {{"evaluations", r.evaluations}};
      return doc;
    };
  });

  // curve
  std::string curve_kind, grid_spec, theta_spec;
  std::vector<std::string> triplet_specs;
  auto* curve = app.add_subcommand("curve", "influence or weight function table");
  curve->add_option("kind", curve_kind, "influence or weight")
      ->required()
      ->check(CLI::IsMember({"influence", "weight"}));
  curve->add_option("--model", model_name, "normal or exponential")
      ->check(CLI::IsMember({"normal", "exponential"}));
  curve->add_option("--theta", theta_spec, "model parameter, comma-separated");
  curve->add_option("--alpha", trip.alpha)->capture_default_str();
  curve->add_option("--beta", trip.beta)->capture_default_str();
  curve->add_option("--gamma", trip.gamma)->capture_default_str();
  curve->add_option("--triplet", triplet_specs,
                    "alpha,beta,gamma (repeatable; replaces --alpha/--beta/--gamma)");
  curve->add_option("--grid", grid_spec, "abscissa grid lo:hi:n")->required();
  curve->callback([&] {
    action = [&] {
      const CurveKind kind = curve_kind_from_string(curve_kind);
      const auto model = make_model(model_name.empty() ? "normal" : model_name);
      Vector theta = model->name() == "normal" ? Vector{{0.0, 1.0}} : Vector{{1.0}};
      if (!theta_spec.empty()) theta = to_vector(parse_list(theta_spec, ',', "--theta"));
      model->check(theta);
      std::vector<Triplet> trips;
      for (const auto& s : triplet_specs) trips.push_back(parse_triplet(s));
      if (trips.empty()) trips.push_back(trip.get());
      const auto g = parse_list(grid_spec, ':', "--grid");
      if (g.size() != 3 || g[2] != std::floor(g[2])) {
        throw ParameterError("--grid must look like lo:hi:n");
      }
      const CurveTable table = emit_curve(kind, *model, theta, trips,
                                          linear_grid(g[0], g[1], static_cast<int>(g[2])));
      Json doc;
      doc["command"] = "curve";
      Json tj = Json::array();
      for (const auto& t : trips) tj.push_back(triplet_json(t));
      doc["inputs"] = {{"kind", to_string(kind)},
                       {"model", model->name()},
                       {"theta", vec_json(theta)},
                       {"triplets", tj},
                       {"grid", {num(g[0]), num(g[1]), static_cast<int>(g[2])}}};
      Json rows = Json::array();
      for (const auto& r : table.rows) {
        Json row = Json::array();
        for (double v : r) row.push_back(num(v));
        rows.push_back(row);
      }
      doc["table"] = {{"columns", table.columns}, {"rows", rows}};
      if (kind == CurveKind::influence) {
        Json gj = Json::array();
        for (const auto& t : trips) {
          const GesResult r = ges(*model, theta, t);
          gj.push_back({{"triplet", triplet_json(t)},
                        {"ges", num(r.value)},
                        {"y_star", num(r.y_star)},
                        {"unbounded", r.unbounded}});
        }
        doc["diagnostics"] = {{"gross_error_sensitivity", gj}};
      }
      return doc;
    };
  });

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e, out, err);
    err << e.what() << "\n";
    write_document(error_document("UsageError", e.what(), kExitUsage), "json", out);
    return kExitUsage;
  }

  const auto fail = [&](const char* type, const std::exception& e, int code) {
    err << "error: " << e.what() << "\n";
    write_document(error_document(type, e.what(), code), common.format, out);
    return code;
  };
  try {
    const Json doc = action();
    write_document(doc, common.format, out);
    return kExitOk;
  } catch (const DataError& e) {
    return fail("DataError", e, kExitData);
  } catch (const ParameterError& e) {
    return fail("ParameterError", e, kExitUsage);
  } catch (const DegenerateMatrixError& e) {
    return fail("DegenerateMatrixError", e, kExitNumerical);
  } catch (const QuadratureError& e) {
    return fail("QuadratureError", e, kExitNumerical);
  } catch (const DomainError& e) {
    return fail("DomainError", e, kExitNumerical);
  } catch (const EstimationError& e) {
    return fail("EstimationError", e, kExitNumerical);
  } catch (const std::exception& e) {
    return fail("InternalError", e, kExitInternal);
  }
}

}  // namespace epd
