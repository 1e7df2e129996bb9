#pragma once

// Volume and time integration of the exotic field over the half-ball source.

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "nvspin/experiment.hpp"
#include "nvspin/kernels.hpp"

namespace nvspin {

struct FieldEstimate {
  double value = 0.0;        // T
  double error_bound = 0.0;  // T
  std::size_t evaluations = 0;
};

struct McEstimate {
  double mean = 0.0;             // T
  double std_error = 0.0;        // T
  double truncation_bound = 0.0; // T, neglected tail beyond the sampled shell
  std::size_t accepted = 0;
};

// Field along the NV axis at time t from the whole half-ball.
FieldEstimate integrate_field(const Experiment& ex, const CouplingPoint& cp, double t);

// Same integral by uniform rejection sampling (independent check).
McEstimate mc_field_oracle(const Experiment& ex, const CouplingPoint& cp, double t);

// Field per unit coupling per unit source speed at time t: the geometric
// factor G with B = f_perp * v(t) * G.
FieldEstimate unit_geometric_factor(const Experiment& ex, double lambda, double t);

struct SeriesWindow {
  double t0 = 0.0;
  double t1 = 0.0;
  std::size_t begin = 0;
  std::size_t count = 0;
};

struct SeriesMeta {
  std::uint64_t geometry_hash = 0;
  std::string coupling;
};

/// Sampled field on one or more windows, each carrying its own
/// Gauss-Legendre rule. Windows are contiguous or disjoint and ascending.
class FieldTimeSeries {
 public:
  using Window = SeriesWindow;
  using Meta = SeriesMeta;

  FieldTimeSeries() = default;

  // Nodes for each window [t0, t1] in `windows` with n Gauss-Legendre points each.
  static std::vector<double> gauss_nodes(const std::vector<std::array<double, 2>>& windows,
                                         std::size_t n);

  // Builds a series from values already sampled at gauss_nodes(windows, n).
  // Throws DomainError if the sizes disagree.
  static FieldTimeSeries from_samples(const std::vector<std::array<double, 2>>& windows,
                                      std::size_t n, std::vector<double> values,
                                      std::vector<double> errors = {},
                                      SeriesMeta meta = SeriesMeta());

  // Samples fn at gauss_nodes(windows, n).
  static FieldTimeSeries sample(const std::vector<std::array<double, 2>>& windows, std::size_t n,
                                const std::function<double(double)>& fn);

  // Rebuilds a series from (t, B) rows written by to_csv, checking that the
  // times are the Gauss-Legendre nodes of the stated windows.
  static FieldTimeSeries from_rows(const std::vector<std::array<double, 2>>& windows,
                                   const std::vector<double>& times,
                                   const std::vector<double>& values);

  const std::vector<double>& times() const { return times_; }
  const std::vector<double>& values() const { return values_; }
  const std::vector<double>& errors() const { return errors_; }
  const std::vector<Window>& windows() const { return windows_; }
  const Meta& meta() const { return meta_; }
  double span_begin() const { return windows_.empty() ? 0.0 : windows_.front().t0; }
  double span_end() const { return windows_.empty() ? 0.0 : windows_.back().t1; }
  std::size_t size() const { return times_.size(); }

  // Integral of B dt over [a, b]. The interval must lie inside the covered
  // windows; partial windows use the window's interpolating polynomial.
  double integral(double a, double b) const;
  // Bound on the integral error propagated from the per-node errors.
  double integral_error(double a, double b) const;

  std::string to_csv() const;
  std::string to_json() const;

 private:
  std::vector<double> times_;
  std::vector<double> values_;
  std::vector<double> errors_;
  std::vector<double> weights_;
  std::vector<Window> windows_;
  Meta meta_;
};

// (1/(t1 - t0)) * integral of the series over [t0, t1].
double window_average(const FieldTimeSeries& series, std::array<double, 2> window);

// Field over the echo pair [0, tau] and [tau, 2 tau] with n nodes per window.
FieldTimeSeries field_time_series(const Experiment& ex, const CouplingPoint& cp, std::size_t n);

// General window sampling used by the echo pair and the jitter studies.
FieldTimeSeries field_on_windows(const Experiment& ex, const CouplingPoint& cp,
                                 const std::vector<std::array<double, 2>>& windows, std::size_t n);

// First-window mean field per unit coupling, (1/tau) int_0^tau B dt with f = 1.
FieldEstimate unit_window_mean(const Experiment& ex, double lambda);

std::uint64_t geometry_hash(const Experiment& ex);

}  // namespace nvspin
