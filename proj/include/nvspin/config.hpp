#pragma once

// Run configuration (JSON with unit-suffixed keys), dataset and prior-table
// CSV ingestion, tabular output and run manifests.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "nvspin/backgrounds.hpp"
#include "nvspin/echo.hpp"
#include "nvspin/experiment.hpp"
#include "nvspin/inference.hpp"

namespace nvspin {

struct FitConfig {
  DistanceFitSettings distance;
  double reference_distance = 1e-6;     // m
  double noise_bbar = 1.0 * units::nT;  // T
  std::vector<double> synth_distances;  // m
  std::vector<double> synth_velocities; // m/s
  double synth_sigma = 1.0 * units::nT; // T
  std::size_t curve_points = 40;
  std::size_t fringe_points = 20;
  double fringe_sigma = 0.01;
  double fringe_phase = -0.128;         // rad

  FitConfig();
  void validate() const;
};

enum class OutputFormat { csv, json };

struct RunConfig {
  Experiment experiment;
  Decoherence decoherence;
  CouplingSpectrum spectrum = CouplingSpectrum::reference();
  BackgroundConfig backgrounds;
  FitConfig fit;
  OutputFormat format = OutputFormat::csv;
  std::uint64_t seed = 20210205;

  void validate() const;
};

// Unknown keys and type mismatches throw ValidationError naming the key.
RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::string& path);
// Canonical JSON with every key present; parse(print(c)) == c.
std::string print_config(const RunConfig& cfg);
// FNV-1a of the canonical JSON with the thread count removed.
std::uint64_t config_hash(const RunConfig& cfg);
std::string hex64(std::uint64_t v);
std::uint64_t fnv1a(const std::string& bytes);

// CSV ingestion. Headers must match exactly; lines starting with '#' and
// blank lines are skipped.
Dataset parse_distance_csv(const std::string& text);
Dataset parse_velocity_csv(const std::string& text);
std::vector<PriorPoint> parse_prior_csv(const std::string& text);
std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& contents);

/// Column-named numeric table emitted as CSV (full round-trip precision) or
/// as a JSON object of columns.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  std::string to_csv() const;
  std::string to_json() const;
  std::string render(OutputFormat f) const { return f == OutputFormat::csv ? to_csv() : to_json(); }
};

std::string format_double(double v);

struct RunManifest {
  std::string command;
  std::string tool_version;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  double wall_time = 0.0;  // s
  std::map<std::string, double> error_bounds;
  std::map<std::string, std::uint64_t> outputs;

  std::string to_json() const;
};

const char* tool_version();

}  // namespace nvspin
