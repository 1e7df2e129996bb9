#pragma once

// Coupling spectra, the distance/velocity forward model and its fits,
// sensitivity curves and comparison against prior exclusion limits.

#include <Eigen/Dense>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "nvspin/experiment.hpp"
#include "nvspin/field_engine.hpp"

namespace nvspin {

struct ForceRangePeak {
  double lambda_c = 1e-6;  // m
  double gamma_w = 5e-8;   // m
  double amplitude = 0.0;

  void validate() const;
};

/// Sum of unnormalized Gaussian peaks in force range, sampled on a fixed
/// grid of force ranges.
struct CouplingSpectrum {
  std::vector<ForceRangePeak> peaks;
  std::vector<double> lambda_grid;

  void validate() const;
  // Paper-fit defaults: two peaks on the default grid.
  static CouplingSpectrum reference();
};

// n log-spaced points over [lo, hi].
std::vector<double> log_grid(double lo, double hi, std::size_t n);
std::vector<double> default_lambda_grid();

double spectrum_eval(const CouplingSpectrum& spec, double lambda);

/// First-window unit-coupling mean field U(lambda_i, d_j), computed once and
/// reused for every spectrum evaluated on the same grid.
class ResponseTable {
 public:
  ResponseTable() = default;
  static ResponseTable build(const Experiment& ex, std::vector<double> lambdas,
                             std::vector<double> distances);
  // Table from precomputed responses (rows: distances, columns: lambdas).
  static ResponseTable from_values(std::vector<double> lambdas, std::vector<double> distances,
                                   Eigen::MatrixXd response, Eigen::MatrixXd error);

  const std::vector<double>& lambdas() const { return lambdas_; }
  const std::vector<double>& distances() const { return distances_; }
  // Rows: distances, columns: lambdas. Tesla per unit coupling.
  const Eigen::MatrixXd& response() const { return response_; }
  const Eigen::MatrixXd& error() const { return error_; }

  // Model mean field at distance index j for a spectrum on the same grid.
  double bbar(const CouplingSpectrum& spec, std::size_t j) const;
  double bbar_error(const CouplingSpectrum& spec, std::size_t j) const;

 private:
  std::vector<double> lambdas_;
  std::vector<double> distances_;
  Eigen::MatrixXd response_;
  Eigen::MatrixXd error_;
};

// (1/tau) int_0^tau sum_i B(lambda_i, f(lambda_i), t) dt at standoff d.
FieldEstimate model_bbar(double d, const CouplingSpectrum& spec, const Experiment& ex);

// Field along the NV axis at time t summed over the spectrum grid.
FieldEstimate spectrum_field(const Experiment& ex, const CouplingSpectrum& spec, double t);

// Spectrum field sampled at n Gauss-Legendre nodes per window.
FieldTimeSeries spectrum_time_series(const Experiment& ex, const CouplingSpectrum& spec,
                                     const std::vector<std::array<double, 2>>& windows, std::size_t n);

struct DataRow {
  double abscissa = 0.0;  // m (distance) or m/s (velocity)
  double bbar = 0.0;      // T
  double sigma = 0.0;     // T
};

enum class DatasetKind { distance, velocity };

struct Dataset {
  DatasetKind kind = DatasetKind::distance;
  std::vector<DataRow> rows;

  void validate() const;
  std::vector<double> abscissae() const;
};

struct StartDiagnostic {
  std::vector<double> start;   // parameter vector at the start
  double chi2 = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct FitResult {
  std::vector<std::string> names;
  std::vector<double> values;
  std::vector<double> std_errors;
  Eigen::MatrixXd covariance;
  double chi2 = 0.0;
  std::size_t dof = 0;
  std::vector<double> residuals;      // (data - model) / sigma
  std::vector<double> cost_log;       // accepted-step chi2 history of the best start
  std::vector<StartDiagnostic> starts;

  double value(const std::string& name) const;
  double std_error(const std::string& name) const;
};

// Weighted least squares through the origin: bbar = k v_max.
FitResult fit_velocity(const Dataset& data);

struct DistanceFitSettings {
  std::set<std::string> frozen{"gamma_w1", "gamma_w2"};
  int lattice_starts = 8;
  int scan_starts = 4;
  int max_iterations = 200;
  double amplitude_bound = 1.0;
};

// Parameter names for peak k (1-based): lambda_c<k>, amplitude<k>, gamma_w<k>.
std::vector<std::string> spectrum_parameter_names(std::size_t peaks);

// Bounded Levenberg-Marquardt fit of the peak parameters. `table` must hold
// the responses at the dataset distances on init.lambda_grid.
FitResult fit_distance(const Dataset& data, const CouplingSpectrum& init, const ResponseTable& table,
                       const DistanceFitSettings& settings = {});

// Spectrum with the fitted parameter values.
CouplingSpectrum fitted_spectrum(const CouplingSpectrum& init, const FitResult& fit);

struct SensitivityRow {
  double lambda = 0.0;
  double f_perp_min = 0.0;    // +inf when unconstrained
  double unit_response = 0.0; // T per unit coupling
};

struct SensitivityCurve {
  std::vector<SensitivityRow> rows;
};

SensitivityCurve sensitivity_curve(double noise_bbar, const std::vector<double>& lambdas,
                                   const Experiment& ex, double d_ref);
// Same, from precomputed unit responses at d_ref.
SensitivityCurve sensitivity_from_responses(double noise_bbar, const std::vector<double>& lambdas,
                                            const std::vector<double>& responses);

struct PriorPoint {
  double lambda = 0.0;
  double f_perp_limit = 0.0;
};

struct ExclusionVerdict {
  double lambda = 0.0;
  double f_perp_min = 0.0;
  double prior_limit = 0.0;   // NaN when extrapolation would be needed
  double ratio = 0.0;         // prior_limit / f_perp_min
  bool below_prior = false;
  bool extrapolated = false;
};

struct PeakVerdict {
  double lambda_c = 0.0;
  double amplitude = 0.0;
  double prior_limit = 0.0;
  double precision = 0.0;
  bool below_prior = false;
  bool above_precision = false;
  bool extrapolated = false;
};

struct ExclusionReport {
  std::vector<ExclusionVerdict> points;
  std::vector<PeakVerdict> peaks;
};

// Log-log interpolation of the prior table; nullopt outside its range.
std::optional<double> interpolate_prior(const std::vector<PriorPoint>& prior, double lambda);

ExclusionReport exclusion_compare(const SensitivityCurve& curve, const std::vector<PriorPoint>& prior,
                                  const CouplingSpectrum* spectrum = nullptr);

}  // namespace nvspin
