#pragma once

// Warwick-Jones selection of the tuning triplet: minimise
//
//   mse(trip) = n^{-1} tr(J^{-1} K J^{-1}) + |theta_hat(trip) - pilot|^2
//
// over a box of triplets, with a DPD-restricted (beta = 0) companion search.

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "epd/divergence.hpp"
#include "epd/estimation.hpp"
#include "epd/models.hpp"

namespace epd {

/// Where J and K are evaluated in the variance term.
enum class PlugIn {
  /// At the fitted model f_{theta_hat} (g = f_{theta_hat}).
  model,
  /// General forms with the empirical distribution in place of g.
  empirical,
};

std::string to_string(PlugIn p);
PlugIn plug_in_from_string(const std::string& s);

struct Range {
  double lo;
  double hi;
};

struct TuneConfig {
  Range alpha{-50.0, 2.0};
  Range beta{0.0, 1.0};
  Range gamma{0.0, 1.0};
  /// Grid points for alpha, beta, gamma.
  std::array<int, 3> grid{13, 6, 11};
  bool refine = true;
  /// Simplex refinements are started from this many best grid cells.
  int refine_cells = 3;
  int refine_iterations = 150;
  double pilot_gamma = 0.5;
  PlugIn plug_in = PlugIn::model;
  /// Skip the unrestricted search and report the beta = 0 optimum only.
  bool dpd_only = false;
  FitOptions fit;

  void validate() const;
};

struct MsePoint {
  Triplet triplet;
  /// +inf when the fit failed or J was degenerate; see note.
  double mse = 0.0;
  Vector theta_hat;
  bool refined = false;
  std::string note;
};

struct TuneOptimum {
  Triplet triplet;
  Vector theta_hat;
  double empirical_mse = 0.0;
};

struct TuneResult {
  Triplet triplet;
  Vector theta_hat;
  double empirical_mse = 0.0;
  std::vector<MsePoint> surface;
  Vector pilot;
  /// Best beta = 0 triplet; always filled by tune_wj.
  std::optional<TuneOptimum> dpd;
  int evaluations = 0;
};

/// Ordering used for the argmin: lower mse, with values within 1e-10
/// (relative) treated as ties broken by smaller gamma, beta, then |alpha|.
bool preferred(const MsePoint& a, const MsePoint& b);

/// Evaluates the criterion at one triplet; `warm` is an optional start for the fit.
using MseEvaluator = std::function<MsePoint(const Triplet&, const std::optional<Vector>& warm)>;

/// Grid scan plus simplex refinement shared by the IID and regression searches.
TuneResult search_triplets(const MseEvaluator& evaluate, const TuneConfig& config);

Vector pilot_estimate(const Sample& sample, const Model& model, double pilot_gamma = 0.5,
                      const FitOptions& options = {});

MsePoint evaluate_mse(const Sample& sample, const Model& model, const Triplet& trip,
                      const Vector& pilot, PlugIn plug_in, const FitOptions& options,
                      const std::optional<Vector>& warm = std::nullopt);

/// The criterion value alone; +inf when the fit fails or J is degenerate.
double empirical_mse(const Sample& sample, const Model& model, const Triplet& trip,
                     const Vector& pilot, PlugIn plug_in = PlugIn::model,
                     const FitOptions& options = {});

TuneResult tune_wj(const Sample& sample, const Model& model, const TuneConfig& config = {});

struct PilotSensitivity {
  double pilot_gamma;
  double mse;
  /// mse minus the mse under the configured pilot.
  double delta;
};

/// Re-evaluates the criterion at `trip` under pilots with other gammas.
std::vector<PilotSensitivity> pilot_sensitivity(const Sample& sample, const Model& model,
                                                const Triplet& trip, const TuneConfig& config,
                                                const std::vector<double>& gammas = {0.4, 0.6});

}  // namespace epd
