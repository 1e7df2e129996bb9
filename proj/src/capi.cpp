#include "nvspin/nvspin.h"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <json.hpp>
#include <map>
#include <memory>
#include <random>

#include "nvspin/config.hpp"
#include "nvspin/errors.hpp"

using namespace nvspin;
using json = nlohmann::ordered_json;

struct nvspin_context {
  RunConfig config;
  std::map<std::string, double> error_bounds;
  std::unique_ptr<ResponseTable> table;  // cached for repeated distance fits
};

namespace {

thread_local std::string last_error;

nvspin_status to_status(ErrorCode c) {
  switch (c) {
    case ErrorCode::ok: return NVSPIN_OK;
    case ErrorCode::domain: return NVSPIN_ERR_DOMAIN;
    case ErrorCode::singularity: return NVSPIN_ERR_SINGULARITY;
    case ErrorCode::convergence: return NVSPIN_ERR_CONVERGENCE;
    case ErrorCode::rank: return NVSPIN_ERR_RANK;
    case ErrorCode::validation: return NVSPIN_ERR_VALIDATION;
    case ErrorCode::io: return NVSPIN_ERR_IO;
  }
  return NVSPIN_ERR_INTERNAL;
}

template <class F>
nvspin_status guarded(F&& body) {
  try {
    body();
    last_error.clear();
    return NVSPIN_OK;
  } catch (const ConvergenceError& e) {
    char buf[128];
    std::snprintf(buf, sizeof buf, " (best estimate %.6g, error bound %.3g)", e.estimate(), e.error_bound());
    last_error = std::string(e.what()) + buf;
    return NVSPIN_ERR_CONVERGENCE;
  } catch (const Error& e) {
    last_error = e.what();
    return to_status(e.code());
  } catch (const std::exception& e) {
    last_error = std::string("internal error: ") + e.what();
    return NVSPIN_ERR_INTERNAL;
  } catch (...) {
    last_error = "internal error";
    return NVSPIN_ERR_INTERNAL;
  }
}

char* dup_string(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

void require(const void* p, const char* what) {
  if (!p) throw ValidationError(std::string(what) + " must not be null");
}

Experiment experiment_at(const nvspin_context* ctx, double d) {
  if (!(d > 0.0) || !std::isfinite(d)) throw ValidationError("distance must be positive");
  return ctx->config.experiment.with_standoff(d);
}

void record(nvspin_context* ctx, const std::string& key, double bound) {
  auto& slot = ctx->error_bounds[key];
  slot = std::max(slot, bound);
}

const ResponseTable& response_table(nvspin_context* ctx, const std::vector<double>& distances) {
  const auto& grid = ctx->config.spectrum.lambda_grid;
  if (!ctx->table || ctx->table->distances() != distances || ctx->table->lambdas() != grid)
    ctx->table = std::make_unique<ResponseTable>(ResponseTable::build(ctx->config.experiment, grid, distances));
  return *ctx->table;
}

json parameters_json(const FitResult& fit, const std::set<std::string>& frozen) {
  json p = json::object();
  for (std::size_t i = 0; i < fit.names.size(); ++i)
    p[fit.names[i]] = {{"value", fit.values[i]}, {"std_error", fit.std_errors[i]},
                       {"frozen", frozen.count(fit.names[i]) > 0}};
  return p;
}

json fit_json(const FitResult& fit, const std::string& mode, const std::set<std::string>& frozen) {
  json j;
  j["mode"] = mode;
  j["parameters"] = parameters_json(fit, frozen);
  json cov = json::array();
  for (Eigen::Index r = 0; r < fit.covariance.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < fit.covariance.cols(); ++c) row.push_back(fit.covariance(r, c));
    cov.push_back(row);
  }
  j["covariance"] = cov;
  j["chi2"] = fit.chi2;
  j["dof"] = fit.dof;
  j["cost_log"] = fit.cost_log;
  json starts = json::array();
  for (const StartDiagnostic& s : fit.starts)
    starts.push_back({{"start", s.start}, {"chi2", s.chi2}, {"iterations", s.iterations}, {"converged", s.converged}});
  j["starts"] = starts;
  return j;
}

}  // namespace

extern "C" {

const char* nvspin_version(void) { return tool_version(); }

const char* nvspin_last_error(void) { return last_error.c_str(); }

const char* nvspin_status_name(nvspin_status status) {
  switch (status) {
    case NVSPIN_OK: return "ok";
    case NVSPIN_ERR_DOMAIN: return "domain error";
    case NVSPIN_ERR_SINGULARITY: return "singularity";
    case NVSPIN_ERR_CONVERGENCE: return "convergence failure";
    case NVSPIN_ERR_RANK: return "rank deficiency";
    case NVSPIN_ERR_VALIDATION: return "validation error";
    case NVSPIN_ERR_IO: return "I/O error";
    case NVSPIN_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void nvspin_free(void* p) { std::free(p); }

nvspin_status nvspin_context_create(const char* config_json, nvspin_context** out) {
  return guarded([&] {
    require(out, "out");
    *out = nullptr;
    auto ctx = std::make_unique<nvspin_context>();
    if (config_json && *config_json) ctx->config = parse_config(config_json);
    *out = ctx.release();
  });
}

nvspin_status nvspin_context_create_from_file(const char* path, nvspin_context** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = nullptr;
    auto ctx = std::make_unique<nvspin_context>();
    ctx->config = load_config(path);
    *out = ctx.release();
  });
}

void nvspin_context_destroy(nvspin_context* ctx) { delete ctx; }

nvspin_status nvspin_context_set_threads(nvspin_context* ctx, unsigned threads) {
  return guarded([&] {
    require(ctx, "ctx");
    ctx->config.experiment.quadrature.threads = threads;
  });
}

nvspin_status nvspin_context_set_seed(nvspin_context* ctx, uint64_t seed) {
  return guarded([&] {
    require(ctx, "ctx");
    ctx->config.seed = seed;
  });
}

nvspin_status nvspin_context_set_format(nvspin_context* ctx, const char* format) {
  return guarded([&] {
    require(ctx, "ctx");
    require(format, "format");
    const std::string f = format;
    if (f == "csv")
      ctx->config.format = OutputFormat::csv;
    else if (f == "json")
      ctx->config.format = OutputFormat::json;
    else
      throw ValidationError("format must be csv or json");
  });
}

nvspin_status nvspin_context_config_json(const nvspin_context* ctx, char** out) {
  return guarded([&] {
    require(ctx, "ctx");
    require(out, "out");
    *out = dup_string(print_config(ctx->config));
  });
}

nvspin_status nvspin_context_config_hash(const nvspin_context* ctx, uint64_t* out) {
  return guarded([&] {
    require(ctx, "ctx");
    require(out, "out");
    *out = config_hash(ctx->config);
  });
}

const char* nvspin_context_table_extension(const nvspin_context* ctx) {
  return ctx && ctx->config.format == OutputFormat::json ? "json" : "csv";
}

nvspin_status nvspin_field_at(nvspin_context* ctx, double distance_m, double t_s, double* field_T,
                              double* error_T) {
  return guarded([&] {
    require(ctx, "ctx");
    require(field_T, "field_T");
    if (!std::isfinite(t_s)) throw ValidationError("time must be finite");
    const FieldEstimate e = spectrum_field(experiment_at(ctx, distance_m), ctx->config.spectrum, t_s);
    *field_T = e.value;
    if (error_T) *error_T = e.error_bound;
    record(ctx, "field", e.error_bound);
  });
}

nvspin_status nvspin_field_series(nvspin_context* ctx, double distance_m, char** table, double* phase_rad,
                                  double* bbar_T, double* error_T) {
  return guarded([&] {
    require(ctx, "ctx");
    require(table, "table");
    const Experiment ex = experiment_at(ctx, distance_m);
    const double tau = ex.timing.tau;
    const FieldTimeSeries s =
        spectrum_time_series(ex, ctx->config.spectrum, {{0.0, tau}, {tau, 2.0 * tau}}, ex.quadrature.time_nodes);
    const EchoPhase ph = echo_phase(s, ex.timing, ex.constants);
    const double err = (s.integral_error(0.0, tau) + s.integral_error(tau, 2.0 * tau)) / (2.0 * tau);
    Table t{{"t_s", "B_T", "error_T"}, {}};
    for (std::size_t i = 0; i < s.size(); ++i) t.rows.push_back({s.times()[i], s.values()[i], s.errors()[i]});
    *table = dup_string(t.render(ctx->config.format));
    if (phase_rad) *phase_rad = ph.phi;
    if (bbar_T) *bbar_T = mean_field_from_phase(ph, ex.constants);
    if (error_T) *error_T = err;
    record(ctx, "field_series_bbar", err);
  });
}

nvspin_status nvspin_model_bbar(nvspin_context* ctx, double distance_m, double* bbar_T, double* error_T) {
  return guarded([&] {
    require(ctx, "ctx");
    require(bbar_T, "bbar_T");
    const FieldEstimate e = model_bbar(distance_m, ctx->config.spectrum, ctx->config.experiment);
    *bbar_T = e.value;
    if (error_T) *error_T = e.error_bound;
    record(ctx, "model_bbar", e.error_bound);
  });
}

nvspin_status nvspin_fit(nvspin_context* ctx, const char* mode, const char* data_csv, char** result_json,
                         char** residuals, char** curve) {
  return guarded([&] {
    require(ctx, "ctx");
    require(mode, "mode");
    require(data_csv, "data_csv");
    require(result_json, "result_json");
    const RunConfig& cfg = ctx->config;
    const std::string m = mode;
    Table res, crv;
    json j;
    if (m == "velocity") {
      const Dataset data = parse_velocity_csv(data_csv);
      const FitResult fit = fit_velocity(data);
      j = fit_json(fit, m, {});
      j["slope_nT_s_per_m"] = {{"value", fit.values[0] / units::nT}, {"std_error", fit.std_errors[0] / units::nT}};
      res.columns = {"vmax_mps", "bbar_nT", "sigma_nT", "model_nT", "residual"};
      double vmax = 0.0;
      for (std::size_t i = 0; i < data.rows.size(); ++i) {
        const DataRow& r = data.rows[i];
        vmax = std::max(vmax, r.abscissa);
        res.rows.push_back({r.abscissa, r.bbar / units::nT, r.sigma / units::nT,
                            fit.values[0] * r.abscissa / units::nT, fit.residuals[i]});
      }
      crv.columns = {"vmax_mps", "bbar_nT"};
      const std::size_t n = cfg.fit.curve_points;
      for (std::size_t i = 0; i < n; ++i) {
        const double v = 1.1 * vmax * static_cast<double>(i) / static_cast<double>(n - 1);
        crv.rows.push_back({v, fit.values[0] * v / units::nT});
      }
    } else if (m == "distance") {
      const Dataset data = parse_distance_csv(data_csv);
      const ResponseTable& table = response_table(ctx, data.abscissae());
      const FitResult fit = fit_distance(data, cfg.spectrum, table, cfg.fit.distance);
      const CouplingSpectrum spec = fitted_spectrum(cfg.spectrum, fit);
      j = fit_json(fit, m, cfg.fit.distance.frozen);
      res.columns = {"d_m", "bbar_nT", "sigma_nT", "model_nT", "residual"};
      double table_err = 0.0;
      for (std::size_t i = 0; i < data.rows.size(); ++i) {
        const DataRow& r = data.rows[i];
        table_err = std::max(table_err, table.bbar_error(spec, i));
        res.rows.push_back({r.abscissa, r.bbar / units::nT, r.sigma / units::nT, table.bbar(spec, i) / units::nT,
                            fit.residuals[i]});
      }
      record(ctx, "fit_model_bbar", table_err);
      const auto d = data.abscissae();
      const auto [lo, hi] = std::minmax_element(d.begin(), d.end());
      const auto ds = *hi > *lo ? log_grid(*lo, *hi, cfg.fit.curve_points) : std::vector<double>{*lo};
      crv.columns = {"d_m", "bbar_nT", "error_nT"};
      for (double x : ds) {
        const FieldEstimate e = model_bbar(x, spec, cfg.experiment);
        record(ctx, "fit_curve", e.error_bound);
        crv.rows.push_back({x, e.value / units::nT, e.error_bound / units::nT});
      }
    } else {
      throw ValidationError("fit mode must be distance or velocity");
    }
    *result_json = dup_string(j.dump(2) + "\n");
    if (residuals) *residuals = dup_string(res.render(cfg.format));
    if (curve) *curve = dup_string(crv.render(cfg.format));
  });
}

nvspin_status nvspin_sensitivity(nvspin_context* ctx, double noise_T, const char* prior_csv, char** curve,
                                 char** verdict_json) {
  return guarded([&] {
    require(ctx, "ctx");
    require(curve, "curve");
    const RunConfig& cfg = ctx->config;
    if (verdict_json) *verdict_json = nullptr;
    std::vector<PriorPoint> prior;
    if (prior_csv) prior = parse_prior_csv(prior_csv);
    if (noise_T < 0.0) noise_T = cfg.fit.noise_bbar;
    const SensitivityCurve c =
        sensitivity_curve(noise_T, cfg.spectrum.lambda_grid, cfg.experiment, cfg.fit.reference_distance);
    Table t{{"lambda_m", "f_perp_min", "unit_response_T"}, {}};
    for (const SensitivityRow& r : c.rows) t.rows.push_back({r.lambda, r.f_perp_min, r.unit_response});
    if (prior_csv && verdict_json) {
      const ExclusionReport rep = exclusion_compare(c, prior, &cfg.spectrum);
      auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
      json pts = json::array();
      for (const ExclusionVerdict& v : rep.points)
        pts.push_back({{"lambda_m", v.lambda}, {"f_perp_min", num(v.f_perp_min)}, {"prior_limit", num(v.prior_limit)},
                       {"ratio", num(v.ratio)}, {"below_prior", v.below_prior}, {"extrapolated", v.extrapolated}});
      json peaks = json::array();
      for (const PeakVerdict& p : rep.peaks)
        peaks.push_back({{"lambda_c_m", p.lambda_c}, {"amplitude", p.amplitude}, {"prior_limit", num(p.prior_limit)},
                         {"precision", num(p.precision)}, {"below_prior", p.below_prior},
                         {"above_precision", p.above_precision}, {"extrapolated", p.extrapolated}});
      json j;
      j["noise_T"] = noise_T;
      j["reference_distance_m"] = cfg.fit.reference_distance;
      j["points"] = pts;
      j["peaks"] = peaks;
      *verdict_json = dup_string(j.dump(2) + "\n");
    }
    *curve = dup_string(t.render(cfg.format));
  });
}

nvspin_status nvspin_backgrounds(nvspin_context* ctx, char** report_json) {
  return guarded([&] {
    require(ctx, "ctx");
    require(report_json, "report_json");
    BackgroundConfig b = ctx->config.backgrounds;
    if (b.include_fork && b.fork_prisms.empty()) b.fork_prisms = BackgroundConfig::default_fork(ctx->config.experiment.geometry);
    const BackgroundReport rep =
        background_report(ctx->config.experiment, b, ctx->config.experiment.quadrature.response_nodes);
    record(ctx, "diamagnetic_mean_field", rep.diamagnetic.error_bound);
    *report_json = dup_string(rep.to_json());
  });
}

nvspin_status nvspin_synth(nvspin_context* ctx, const char* mode, double noise, char** csv) {
  return guarded([&] {
    require(ctx, "ctx");
    require(mode, "mode");
    require(csv, "csv");
    const RunConfig& cfg = ctx->config;
    const std::string m = mode;
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Table t;
    if (m == "distance" || m == "velocity") {
      const double sigma = noise < 0.0 ? cfg.fit.synth_sigma : noise;
      const double reported = sigma > 0.0 ? sigma : 1.0 * units::nT;
      if (m == "distance") {
        t.columns = {"d_m", "bbar_nT", "sigma_nT"};
        for (double d : cfg.fit.synth_distances) {
          const FieldEstimate e = model_bbar(d, cfg.spectrum, cfg.experiment);
          record(ctx, "synth_model_bbar", e.error_bound);
          t.rows.push_back({d, (e.value + sigma * gauss(rng)) / units::nT, reported / units::nT});
        }
      } else {
        const FieldEstimate e = model_bbar(cfg.fit.reference_distance, cfg.spectrum, cfg.experiment);
        record(ctx, "synth_model_bbar", e.error_bound);
        const double slope = e.value / cfg.experiment.vibration.max_speed();
        t.columns = {"vmax_mps", "bbar_nT", "sigma_nT"};
        for (double v : cfg.fit.synth_velocities)
          t.rows.push_back({v, (slope * v + sigma * gauss(rng)) / units::nT, reported / units::nT});
      }
    } else if (m == "fringe") {
      const double sigma = noise < 0.0 ? cfg.fit.fringe_sigma : noise;
      const EchoPhase phase{cfg.fit.fringe_phase, cfg.experiment.timing.tau};
      const std::size_t n = cfg.fit.fringe_points;
      t.columns = {"phi_mw_rad", "signal", "sigma"};
      for (std::size_t i = 0; i < n; ++i) {
        const double phi_mw = -pi + 2.0 * pi * (static_cast<double>(i) + 0.5) / static_cast<double>(n);
        const ReadoutPoint p = populations(phase, phi_mw, cfg.decoherence);
        t.rows.push_back({phi_mw, p.signal + sigma * gauss(rng), sigma > 0.0 ? sigma : 1.0});
      }
    } else {
      throw ValidationError("synth mode must be distance, velocity or fringe");
    }
    *csv = dup_string(t.to_csv());
  });
}

nvspin_status nvspin_manifest(const nvspin_context* ctx, const char* command, double wall_time_s,
                              const char* const* names, const char* const* contents, size_t count,
                              char** manifest_json) {
  return guarded([&] {
    require(ctx, "ctx");
    require(command, "command");
    require(manifest_json, "manifest_json");
    if (count > 0) {
      require(names, "names");
      require(contents, "contents");
    }
    RunManifest m;
    m.command = command;
    m.tool_version = tool_version();
    m.config_hash = config_hash(ctx->config);
    m.seed = ctx->config.seed;
    m.wall_time = wall_time_s;
    m.error_bounds = ctx->error_bounds;
    for (size_t i = 0; i < count; ++i) {
      require(names[i], "names[i]");
      require(contents[i], "contents[i]");
      m.outputs[names[i]] = fnv1a(contents[i]);
    }
    *manifest_json = dup_string(m.to_json());
  });
}

nvspin_status nvspin_mean_field_from_phase(const nvspin_context* ctx, double phi_rad, double* bbar_T) {
  return guarded([&] {
    require(ctx, "ctx");
    require(bbar_T, "bbar_T");
    const Experiment& ex = ctx->config.experiment;
    *bbar_T = mean_field_from_phase(EchoPhase{phi_rad, ex.timing.tau}, ex.constants);
  });
}

nvspin_status nvspin_exotic_field_point(const nvspin_context* ctx, const double r_m[3], double v_y_mps,
                                        double lambda_m, double f_perp, double* field_T) {
  return guarded([&] {
    require(ctx, "ctx");
    require(r_m, "r_m");
    require(field_T, "field_T");
    const Experiment& ex = ctx->config.experiment;
    *field_T = exotic_field_point(Vec3(r_m[0], r_m[1], r_m[2]), v_y_mps, ex.frame.theta(),
                                  CouplingPoint{lambda_m, f_perp}, ex.constants);
  });
}

}  // extern "C"
