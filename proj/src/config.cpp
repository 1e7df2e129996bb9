#include "nvspin/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "nvspin/errors.hpp"

namespace nvspin {

using json = nlohmann::ordered_json;

const char* tool_version() { return "nvspin 1.0.0"; }

FitConfig::FitConfig() {
  for (int i = 1; i <= 12; ++i) synth_distances.push_back(i * 1e-6);
  synth_velocities = {0.01, 0.02, 0.03, 0.04, 0.053};
}

void FitConfig::validate() const {
  if (!(reference_distance > 0.0)) throw ValidationError("fit.reference_distance_m must be positive");
  if (!(noise_bbar > 0.0)) throw ValidationError("fit.noise_bbar_nT must be positive");
  if (!(synth_sigma >= 0.0)) throw ValidationError("fit.synth_sigma_nT must be non-negative");
  if (!(fringe_sigma >= 0.0)) throw ValidationError("fit.fringe_sigma must be non-negative");
  if (fringe_points < 4) throw ValidationError("fit.fringe_points must be at least 4");
  if (curve_points < 2) throw ValidationError("fit.curve_points must be at least 2");
  if (distance.max_iterations < 1) throw ValidationError("fit.max_iterations must be positive");
  if (distance.lattice_starts < 0 || distance.scan_starts < 0)
    throw ValidationError("fit start counts must be non-negative");
  if (!(distance.amplitude_bound > 0.0)) throw ValidationError("fit.amplitude_bound must be positive");
  for (double d : synth_distances)
    if (!(d > 0.0)) throw ValidationError("fit.synth_distances_m must be positive");
  for (double v : synth_velocities)
    if (!(v > 0.0)) throw ValidationError("fit.synth_velocities_mps must be positive");
}

void RunConfig::validate() const {
  experiment.validate();
  if (decoherence.enabled && !(decoherence.t2 > 0.0)) throw ValidationError("timing.t2_s must be positive");
  spectrum.validate();
  backgrounds.validate();
  fit.validate();
}

// --- parsing -----------------------------------------------------------------

namespace {

class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ValidationError(where() + " must be an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      if constexpr (std::is_same_v<T, double>) {
        if (!it->is_number()) throw ValidationError(name(key) + " must be a number");
        out = it->template get<double>();
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!it->is_boolean()) throw ValidationError(name(key) + " must be a boolean");
        out = it->template get<bool>();
      } else if constexpr (std::is_integral_v<T>) {
        if (!it->is_number_integer()) throw ValidationError(name(key) + " must be an integer");
        if constexpr (std::is_unsigned_v<T>)
          if (it->is_number_integer() && !it->is_number_unsigned())
            throw ValidationError(name(key) + " must be non-negative");
        out = it->template get<T>();
      } else {
        out = it->template get<T>();
      }
    } catch (const nlohmann::json::exception&) {
      throw ValidationError(name(key) + " has the wrong type");
    }
  }

  // Scaled numeric value (e.g. nT in the file, T in memory).
  void get_scaled(const char* key, double& out, double scale) {
    double v = out / scale;
    get(key, v);
    out = v * scale;
  }

  void get_vec3(const char* key, Vec3& out) {
    std::vector<double> v{out.x(), out.y(), out.z()};
    get(key, v);
    if (v.size() != 3) throw ValidationError(name(key) + " must have 3 components");
    out = Vec3(v[0], v[1], v[2]);
  }

  const json* child(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ValidationError("unknown key " + name(it.key().c_str()));
  }

  std::string name(const char* key) const { return path_.empty() ? key : path_ + "." + key; }
  std::string where() const { return path_.empty() ? "config" : path_; }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void parse_constants(const json& j, PhysicalConstants& k) {
  Section s(j, "constants");
  s.get("hbar_Js", k.hbar);
  s.get("electron_mass_kg", k.electron_mass);
  s.get("light_speed_mps", k.light_speed);
  s.get("gamma_e_radpsT", k.gamma_e);
  s.get("mu0_TmpA", k.mu0);
  s.get("eps0_Fpm", k.eps0);
  s.finish();
}

void parse_geometry(const json& j, SourceGeometry& g) {
  Section s(j, "geometry");
  s.get("radius_m", g.radius);
  s.get("nucleon_density_pm3", g.nucleon_density);
  s.get("standoff_m", g.standoff);
  s.get("flat_face_down", g.flat_face_down);
  s.finish();
}

void parse_timing(const json& j, SequenceTiming& t, Decoherence& dec) {
  Section s(j, "timing");
  s.get("tau_s", t.tau);
  s.get("pi_half_len_s", t.pi_half_len);
  s.get("pi_len_s", t.pi_len);
  s.get("laser_init_len_s", t.laser_init_len);
  s.get("laser_read_len_s", t.laser_read_len);
  s.get("sync_jitter_s", t.sync_jitter);
  s.get("t2_s", dec.t2);
  s.get("decoherence_exponent", dec.exponent);
  s.get("apply_decoherence", dec.enabled);
  s.finish();
}

void parse_quadrature(const json& j, QuadratureConfig& q) {
  Section s(j, "quadrature");
  s.get("rel_tol", q.rel_tol);
  s.get("abs_tol_T", q.abs_tol);
  s.get("max_evaluations", q.max_evaluations);
  s.get("subdivision_depth", q.subdivision_depth);
  s.get("mc_samples", q.mc_samples);
  s.get("mc_seed", q.mc_seed);
  s.get("time_nodes", q.time_nodes);
  s.get("response_nodes", q.response_nodes);
  s.get("threads", q.threads);
  s.finish();
}

void parse_spectrum(const json& j, CouplingSpectrum& spec) {
  Section s(j, "spectrum");
  if (const json* peaks = s.child("peaks")) {
    if (!peaks->is_array()) throw ValidationError("spectrum.peaks must be an array");
    spec.peaks.clear();
    for (std::size_t i = 0; i < peaks->size(); ++i) {
      Section p((*peaks)[i], "spectrum.peaks[" + std::to_string(i) + "]");
      ForceRangePeak peak;
      p.get("lambda_c_m", peak.lambda_c);
      p.get("gamma_w_m", peak.gamma_w);
      p.get("amplitude", peak.amplitude);
      p.finish();
      spec.peaks.push_back(peak);
    }
  }
  if (const json* grid = s.child("grid")) {
    Section g(*grid, "spectrum.grid");
    double lo = spec.lambda_grid.front(), hi = spec.lambda_grid.back();
    std::size_t n = spec.lambda_grid.size();
    g.get("min_m", lo);
    g.get("max_m", hi);
    g.get("count", n);
    g.finish();
    spec.lambda_grid = log_grid(lo, hi, n);
  }
  s.finish();
}

void parse_backgrounds(const json& j, BackgroundConfig& b) {
  Section s(j, "backgrounds");
  s.get("susceptibility", b.susceptibility);
  s.get("b0_T", b.b0);
  s.get("include_fork", b.include_fork);
  s.get("diamagnetic_rel_tol", b.diamagnetic_rel_tol);
  s.get("charge_C", b.charge.charge);
  s.get_vec3("charge_position_m", b.charge.position);
  s.get_scaled("diamagnetic_bound_nT", b.diamagnetic_bound, units::nT);
  s.get_scaled("charge_field_bound_nT", b.charge_field_bound, units::nT);
  s.get("stark_field_reference_Vpm", b.stark_field_reference);
  s.get("charge_reference_C", b.charge_reference);
  if (const json* prisms = s.child("fork_prisms")) {
    if (!prisms->is_array()) throw ValidationError("backgrounds.fork_prisms must be an array");
    b.fork_prisms.clear();
    for (std::size_t i = 0; i < prisms->size(); ++i) {
      Section p((*prisms)[i], "backgrounds.fork_prisms[" + std::to_string(i) + "]");
      Prism pr{Vec3::Zero(), Vec3::Zero()};
      p.get_vec3("center_m", pr.center);
      p.get_vec3("edges_m", pr.edges);
      p.finish();
      b.fork_prisms.push_back(pr);
    }
  }
  if (const json* st = s.child("stark")) {
    Section p(*st, "backgrounds.stark");
    p.get("freq_shift_Hz", b.stark.freq_shift);
    p.get("dipole_moment_HzmpV", b.stark.dipole_moment);
    p.get("screening_factor", b.stark.screening_factor);
    p.get("distance_m", b.stark.distance);
    p.finish();
  }
  s.finish();
}

void parse_fit(const json& j, FitConfig& f) {
  Section s(j, "fit");
  std::vector<std::string> frozen(f.distance.frozen.begin(), f.distance.frozen.end());
  s.get("frozen", frozen);
  f.distance.frozen = std::set<std::string>(frozen.begin(), frozen.end());
  s.get("lattice_starts", f.distance.lattice_starts);
  s.get("scan_starts", f.distance.scan_starts);
  s.get("max_iterations", f.distance.max_iterations);
  s.get("amplitude_bound", f.distance.amplitude_bound);
  s.get("reference_distance_m", f.reference_distance);
  s.get_scaled("noise_bbar_nT", f.noise_bbar, units::nT);
  s.get("synth_distances_m", f.synth_distances);
  s.get("synth_velocities_mps", f.synth_velocities);
  s.get_scaled("synth_sigma_nT", f.synth_sigma, units::nT);
  s.get("curve_points", f.curve_points);
  s.get("fringe_points", f.fringe_points);
  s.get("fringe_sigma", f.fringe_sigma);
  s.get("fringe_phase_rad", f.fringe_phase);
  s.finish();
}

}  // namespace

RunConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig cfg;
  Section top(j, "");
  if (const json* c = top.child("constants")) parse_constants(*c, cfg.experiment.constants);
  if (const json* c = top.child("geometry")) parse_geometry(*c, cfg.experiment.geometry);
  if (const json* c = top.child("frame")) {
    Section s(*c, "frame");
    double theta = cfg.experiment.frame.theta();
    s.get("theta_rad", theta);
    s.finish();
    if (!(theta > 0.0 && theta < 0.5 * pi)) throw ValidationError("frame.theta_rad must lie in (0, pi/2)");
    cfg.experiment.frame = FrameConvention(theta);
  }
  if (const json* c = top.child("vibration")) {
    Section s(*c, "vibration");
    s.get("amplitude_m", cfg.experiment.vibration.amplitude);
    s.get("angular_frequency_radps", cfg.experiment.vibration.angular_frequency);
    s.get("phase_origin_rad", cfg.experiment.vibration.phase_origin);
    s.finish();
  }
  if (const json* c = top.child("timing")) parse_timing(*c, cfg.experiment.timing, cfg.decoherence);
  if (const json* c = top.child("quadrature")) parse_quadrature(*c, cfg.experiment.quadrature);
  if (const json* c = top.child("spectrum")) parse_spectrum(*c, cfg.spectrum);
  if (const json* c = top.child("backgrounds")) parse_backgrounds(*c, cfg.backgrounds);
  if (const json* c = top.child("fit")) parse_fit(*c, cfg.fit);
  if (const json* c = top.child("output")) {
    Section s(*c, "output");
    std::string fmt = cfg.format == OutputFormat::csv ? "csv" : "json";
    s.get("format", fmt);
    s.finish();
    if (fmt == "csv")
      cfg.format = OutputFormat::csv;
    else if (fmt == "json")
      cfg.format = OutputFormat::json;
    else
      throw ValidationError("output.format must be csv or json");
  }
  top.get("seed", cfg.seed);
  top.finish();
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::string& path) { return parse_config(read_file(path)); }

namespace {

json vec3_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

json config_json(const RunConfig& c) {
  const Experiment& ex = c.experiment;
  json j;
  j["constants"] = {{"hbar_Js", ex.constants.hbar},
                    {"electron_mass_kg", ex.constants.electron_mass},
                    {"light_speed_mps", ex.constants.light_speed},
                    {"gamma_e_radpsT", ex.constants.gamma_e},
                    {"mu0_TmpA", ex.constants.mu0},
                    {"eps0_Fpm", ex.constants.eps0}};
  j["geometry"] = {{"radius_m", ex.geometry.radius},
                   {"nucleon_density_pm3", ex.geometry.nucleon_density},
                   {"standoff_m", ex.geometry.standoff},
                   {"flat_face_down", ex.geometry.flat_face_down}};
  j["frame"] = {{"theta_rad", ex.frame.theta()}};
  j["vibration"] = {{"amplitude_m", ex.vibration.amplitude},
                    {"angular_frequency_radps", ex.vibration.angular_frequency},
                    {"phase_origin_rad", ex.vibration.phase_origin}};
  j["timing"] = {{"tau_s", ex.timing.tau},
                 {"pi_half_len_s", ex.timing.pi_half_len},
                 {"pi_len_s", ex.timing.pi_len},
                 {"laser_init_len_s", ex.timing.laser_init_len},
                 {"laser_read_len_s", ex.timing.laser_read_len},
                 {"sync_jitter_s", ex.timing.sync_jitter},
                 {"t2_s", c.decoherence.t2},
                 {"decoherence_exponent", c.decoherence.exponent},
                 {"apply_decoherence", c.decoherence.enabled}};
  j["quadrature"] = {{"rel_tol", ex.quadrature.rel_tol},
                     {"abs_tol_T", ex.quadrature.abs_tol},
                     {"max_evaluations", ex.quadrature.max_evaluations},
                     {"subdivision_depth", ex.quadrature.subdivision_depth},
                     {"mc_samples", ex.quadrature.mc_samples},
                     {"mc_seed", ex.quadrature.mc_seed},
                     {"time_nodes", ex.quadrature.time_nodes},
                     {"response_nodes", ex.quadrature.response_nodes},
                     {"threads", ex.quadrature.threads}};
  json peaks = json::array();
  for (const ForceRangePeak& p : c.spectrum.peaks)
    peaks.push_back({{"lambda_c_m", p.lambda_c}, {"gamma_w_m", p.gamma_w}, {"amplitude", p.amplitude}});
  j["spectrum"] = {{"peaks", peaks},
                   {"grid",
                    {{"min_m", c.spectrum.lambda_grid.front()},
                     {"max_m", c.spectrum.lambda_grid.back()},
                     {"count", c.spectrum.lambda_grid.size()}}}};
  const BackgroundConfig& b = c.backgrounds;
  json prisms = json::array();
  for (const Prism& p : b.fork_prisms) prisms.push_back({{"center_m", vec3_json(p.center)}, {"edges_m", vec3_json(p.edges)}});
  j["backgrounds"] = {{"susceptibility", b.susceptibility},
                      {"b0_T", b.b0},
                      {"include_fork", b.include_fork},
                      {"fork_prisms", prisms},
                      {"diamagnetic_rel_tol", b.diamagnetic_rel_tol},
                      {"charge_C", b.charge.charge},
                      {"charge_position_m", vec3_json(b.charge.position)},
                      {"diamagnetic_bound_nT", b.diamagnetic_bound / units::nT},
                      {"charge_field_bound_nT", b.charge_field_bound / units::nT},
                      {"stark_field_reference_Vpm", b.stark_field_reference},
                      {"charge_reference_C", b.charge_reference},
                      {"stark",
                       {{"freq_shift_Hz", b.stark.freq_shift},
                        {"dipole_moment_HzmpV", b.stark.dipole_moment},
                        {"screening_factor", b.stark.screening_factor},
                        {"distance_m", b.stark.distance}}}};
  const FitConfig& f = c.fit;
  j["fit"] = {{"frozen", std::vector<std::string>(f.distance.frozen.begin(), f.distance.frozen.end())},
              {"lattice_starts", f.distance.lattice_starts},
              {"scan_starts", f.distance.scan_starts},
              {"max_iterations", f.distance.max_iterations},
              {"amplitude_bound", f.distance.amplitude_bound},
              {"reference_distance_m", f.reference_distance},
              {"noise_bbar_nT", f.noise_bbar / units::nT},
              {"synth_distances_m", f.synth_distances},
              {"synth_velocities_mps", f.synth_velocities},
              {"synth_sigma_nT", f.synth_sigma / units::nT},
              {"curve_points", f.curve_points},
              {"fringe_points", f.fringe_points},
              {"fringe_sigma", f.fringe_sigma},
              {"fringe_phase_rad", f.fringe_phase}};
  j["output"] = {{"format", c.format == OutputFormat::csv ? "csv" : "json"}};
  j["seed"] = c.seed;
  return j;
}

}  // namespace

std::string print_config(const RunConfig& cfg) { return config_json(cfg).dump(2) + "\n"; }

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t config_hash(const RunConfig& cfg) {
  json j = config_json(cfg);
  j["quadrature"].erase("threads");
  return fnv1a(j.dump());
}

// --- files and CSV -------------------------------------------------------------

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("error reading " + path);
  return ss.str();
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << contents;
  out.close();
  if (!out) throw IoError("error writing " + path);
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

double parse_number(const std::string& s, const std::string& column, std::size_t line) {
  double v = 0.0;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  if (!s.empty() && *begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, v);
  if (s.empty() || ec != std::errc() || ptr != end)
    throw ValidationError("line " + std::to_string(line) + ", column " + column + ": not a number: '" + s + "'");
  return v;
}

std::vector<std::vector<double>> parse_csv(const std::string& text, const std::vector<std::string>& header) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto cells = split(t);
    if (!have_header) {
      for (std::size_t i = 0; i < header.size(); ++i) {
        if (i >= cells.size())
          throw ValidationError("CSV header is missing column " + header[i]);
        if (cells[i] != header[i])
          throw ValidationError("CSV header column " + std::to_string(i + 1) + " is '" + cells[i] +
                                "', expected '" + header[i] + "'");
      }
      if (cells.size() != header.size()) throw ValidationError("CSV header has unexpected extra columns");
      have_header = true;
      continue;
    }
    if (cells.size() != header.size())
      throw ValidationError("line " + std::to_string(lineno) + ": expected " + std::to_string(header.size()) +
                            " columns, found " + std::to_string(cells.size()));
    std::vector<double> row;
    for (std::size_t i = 0; i < cells.size(); ++i) row.push_back(parse_number(cells[i], header[i], lineno));
    rows.push_back(row);
  }
  if (!have_header) throw ValidationError("CSV has no header");
  return rows;
}

Dataset parse_dataset(const std::string& text, DatasetKind kind, const std::vector<std::string>& header) {
  Dataset d;
  d.kind = kind;
  for (const auto& r : parse_csv(text, header)) d.rows.push_back({r[0], r[1] * units::nT, r[2] * units::nT});
  if (d.rows.empty()) throw ValidationError("dataset has no rows");
  for (std::size_t i = 0; i < d.rows.size(); ++i) {
    if (!(d.rows[i].sigma > 0.0))
      throw ValidationError("row " + std::to_string(i + 1) + ", column sigma_nT: must be positive");
    if (!(d.rows[i].abscissa > 0.0))
      throw ValidationError("row " + std::to_string(i + 1) + ", column " + header[0] + ": must be positive");
  }
  return d;
}

}  // namespace

Dataset parse_distance_csv(const std::string& text) {
  return parse_dataset(text, DatasetKind::distance, {"d_m", "bbar_nT", "sigma_nT"});
}

Dataset parse_velocity_csv(const std::string& text) {
  return parse_dataset(text, DatasetKind::velocity, {"vmax_mps", "bbar_nT", "sigma_nT"});
}

std::vector<PriorPoint> parse_prior_csv(const std::string& text) {
  std::vector<PriorPoint> out;
  for (const auto& r : parse_csv(text, {"lambda_m", "f_perp_limit"})) out.push_back({r[0], r[1]});
  if (out.empty()) throw ValidationError("prior constraint table has no rows");
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!(out[i].lambda > 0.0) || !(out[i].f_perp_limit > 0.0))
      throw ValidationError("prior row " + std::to_string(i + 1) + ": values must be positive");
    if (i > 0 && !(out[i].lambda > out[i - 1].lambda))
      throw ValidationError("prior row " + std::to_string(i + 1) + ": lambda_m must be increasing");
  }
  return out;
}

// --- tables and manifests ----------------------------------------------------------

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string Table::to_csv() const {
  std::string out;
  for (std::size_t i = 0; i < columns.size(); ++i) out += (i ? "," : "") + columns[i];
  out += "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + format_double(row[i]);
    out += "\n";
  }
  return out;
}

std::string Table::to_json() const {
  json j = json::object();
  for (std::size_t c = 0; c < columns.size(); ++c) {
    json col = json::array();
    for (const auto& row : rows) {
      if (std::isfinite(row[c]))
        col.push_back(row[c]);
      else
        col.push_back(format_double(row[c]));
    }
    j[columns[c]] = col;
  }
  return j.dump(2) + "\n";
}

std::string RunManifest::to_json() const {
  json j;
  j["command"] = command;
  j["tool_version"] = tool_version;
  j["config_hash"] = hex64(config_hash);
  j["seed"] = seed;
  json eb = json::object();
  for (const auto& [k, v] : error_bounds) eb[k] = v;
  j["error_bounds"] = eb;
  json outs = json::object();
  for (const auto& [k, v] : outputs) outs[k] = hex64(v);
  j["outputs"] = outs;
  j["wall_time_s"] = wall_time;
  return j.dump(2) + "\n";
}

}  // namespace nvspin
