// Command-line driver. Talks to the library only through the C interface.

#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "nvspin/nvspin.h"

namespace fs = std::filesystem;

namespace {

constexpr double kNanoTesla = 1e-9;

enum Exit { kOk = 0, kInternal = 1, kValidation = 2, kConvergence = 3, kIo = 4 };

int exit_code(nvspin_status s) {
  switch (s) {
    case NVSPIN_OK: return kOk;
    case NVSPIN_ERR_DOMAIN:
    case NVSPIN_ERR_SINGULARITY:
    case NVSPIN_ERR_VALIDATION: return kValidation;
    case NVSPIN_ERR_CONVERGENCE:
    case NVSPIN_ERR_RANK: return kConvergence;
    case NVSPIN_ERR_IO: return kIo;
    default: return kInternal;
  }
}

struct Failure {
  int code;
  std::string message;
};

void check(nvspin_status s, const char* what) {
  if (s != NVSPIN_OK)
    throw Failure{exit_code(s), std::string(what) + ": " + nvspin_status_name(s) + ": " + nvspin_last_error()};
}

// Owns a library-allocated string.
struct CString {
  char* p = nullptr;
  ~CString() { nvspin_free(p); }
  char** out() { return &p; }
  std::string str() const { return p ? std::string(p) : std::string(); }
};

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Failure{kIo, "cannot open " + path};
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Outputs {
 public:
  explicit Outputs(fs::path dir) : dir_(std::move(dir)) {}

  void add(const std::string& name, const std::string& contents) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw Failure{kIo, "cannot create output directory " + dir_.string()};
    const fs::path p = dir_ / name;
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out || !(out << contents) || (out.close(), !out)) throw Failure{kIo, "cannot write " + p.string()};
    names_.push_back(name);
    contents_.push_back(contents);
  }

  void manifest(const nvspin_context* ctx, const std::string& command, double wall) {
    std::vector<const char*> n, c;
    for (std::size_t i = 0; i < names_.size(); ++i) {
      n.push_back(names_[i].c_str());
      c.push_back(contents_[i].c_str());
    }
    CString m;
    check(nvspin_manifest(ctx, command.c_str(), wall, n.data(), c.data(), n.size(), m.out()), "manifest");
    const std::string name = "manifest_" + command + ".json";
    const fs::path p = dir_ / name;
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out || !(out << m.str())) throw Failure{kIo, "cannot write " + p.string()};
  }

 private:
  fs::path dir_;
  std::vector<std::string> names_;
  std::vector<std::string> contents_;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exotic spin-velocity interaction: forward model, fits and backgrounds"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", nvspin_version());

  std::string config_path;
  std::string out_dir = ".";
  std::string format;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "Output directory");
  app.add_option("--format", format, "Tabular output format")->check(CLI::IsMember({"csv", "json"}));
  app.add_option("--seed", seed, "Random seed for synthetic data");
  app.add_option("--threads", threads, "Worker threads (0: all cores)");

  auto* field = app.add_subcommand("field", "Exotic field at one time or over the echo windows");
  double distance = 1e-6;
  std::optional<double> time;
  bool series = false;
  field->add_option("--distance", distance, "Standoff distance in m");
  auto* time_opt = field->add_option("--time", time, "Time in s");
  field->add_flag("--series", series, "Sample both echo windows")->excludes(time_opt);

  auto* fit = app.add_subcommand("fit", "Fit a distance or velocity dataset");
  std::string fit_mode, data_path;
  fit->add_option("--mode", fit_mode, "distance or velocity")->required()->check(CLI::IsMember({"distance", "velocity"}));
  fit->add_option("--data", data_path, "Dataset CSV")->required();

  auto* sens = app.add_subcommand("sensitivity", "Coupling sensitivity curve and prior comparison");
  std::optional<double> noise_nT;
  std::string prior_path;
  sens->add_option("--noise", noise_nT, "Mean-field noise level in nT");
  sens->add_option("--prior", prior_path, "Prior constraint CSV (lambda_m,f_perp_limit)");

  auto* bg = app.add_subcommand("backgrounds", "Diamagnetic, moving-charge and Stark background report");

  auto* synth = app.add_subcommand("synth", "Synthetic dataset from the forward model");
  std::string synth_mode;
  std::optional<double> synth_noise;
  synth->add_option("--mode", synth_mode, "distance, velocity or fringe")
      ->required()
      ->check(CLI::IsMember({"distance", "velocity", "fringe"}));
  synth->add_option("--noise", synth_noise, "Noise level (nT for distance/velocity, signal units for fringe)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kValidation;
  }

  nvspin_context* raw = nullptr;
  try {
    const auto start = std::chrono::steady_clock::now();
    if (config_path.empty())
      check(nvspin_context_create(nullptr, &raw), "config");
    else
      check(nvspin_context_create_from_file(config_path.c_str(), &raw), "config");
    std::unique_ptr<nvspin_context, void (*)(nvspin_context*)> ctx(raw, nvspin_context_destroy);
    if (seed) check(nvspin_context_set_seed(ctx.get(), *seed), "seed");
    if (threads) check(nvspin_context_set_threads(ctx.get(), *threads), "threads");
    if (!format.empty()) check(nvspin_context_set_format(ctx.get(), format.c_str()), "format");
    const std::string ext = nvspin_context_table_extension(ctx.get());

    Outputs outputs(out_dir);
    std::string command;

    if (*field) {
      command = "field";
      if (series) {
        CString table;
        double phase = 0.0, bbar = 0.0, err = 0.0;
        check(nvspin_field_series(ctx.get(), distance, table.out(), &phase, &bbar, &err), "field");
        outputs.add("field_series." + ext, table.str());
        std::string summary = "{\n  \"distance_m\": " + fmt("%.17g", distance) + ",\n  \"phase_rad\": " +
                              fmt("%.17g", phase) + ",\n  \"bbar_T\": " + fmt("%.17g", bbar) +
                              ",\n  \"bbar_error_T\": " + fmt("%.17g", err) + "\n}\n";
        outputs.add("field_echo.json", summary);
        std::cout << "echo phase " << fmt("%.6g", phase) << " rad, mean field " << fmt("%.6g", bbar / kNanoTesla)
                  << " nT (error bound " << fmt("%.3g", err / kNanoTesla) << " nT)\n";
      } else {
        const double t = time.value_or(0.0);
        double b = 0.0, err = 0.0;
        check(nvspin_field_at(ctx.get(), distance, t, &b, &err), "field");
        std::string body;
        if (ext == "csv")
          body = "d_m,t_s,B_T,error_T\n" + fmt("%.17g", distance) + "," + fmt("%.17g", t) + "," + fmt("%.17g", b) +
                 "," + fmt("%.17g", err) + "\n";
        else
          body = "{\n  \"d_m\": " + fmt("%.17g", distance) + ",\n  \"t_s\": " + fmt("%.17g", t) +
                 ",\n  \"B_T\": " + fmt("%.17g", b) + ",\n  \"error_T\": " + fmt("%.17g", err) + "\n}\n";
        outputs.add("field." + ext, body);
        std::cout << "B_eff = " << fmt("%.9g", b / kNanoTesla) << " nT (error bound " << fmt("%.3g", err / kNanoTesla)
                  << " nT)\n";
      }
    } else if (*fit) {
      command = "fit";
      const std::string data = read_text(data_path);
      CString result, residuals, curve;
      check(nvspin_fit(ctx.get(), fit_mode.c_str(), data.c_str(), result.out(), residuals.out(), curve.out()), "fit");
      outputs.add("fit_" + fit_mode + ".json", result.str());
      outputs.add("fit_" + fit_mode + "_residuals." + ext, residuals.str());
      outputs.add("fit_" + fit_mode + "_curve." + ext, curve.str());
      std::cout << "fit written to " << (fs::path(out_dir) / ("fit_" + fit_mode + ".json")).string() << "\n";
    } else if (*sens) {
      command = "sensitivity";
      if (noise_nT && !(*noise_nT > 0.0)) throw Failure{kValidation, "sensitivity: --noise must be positive"};
      const double noise = noise_nT ? *noise_nT * kNanoTesla : -1.0;
      std::string prior;
      bool have_prior = false;
      if (prior_path.empty()) {
        std::cerr << "warning: no prior table given; comparison skipped\n";
      } else if (!fs::exists(prior_path)) {
        std::cerr << "warning: prior table " << prior_path << " not found; comparison skipped\n";
      } else {
        prior = read_text(prior_path);
        have_prior = true;
      }
      CString curve, verdict;
      check(nvspin_sensitivity(ctx.get(), noise, have_prior ? prior.c_str() : nullptr, curve.out(),
                               verdict.out()),
            "sensitivity");
      outputs.add("sensitivity." + ext, curve.str());
      if (have_prior) outputs.add("exclusion.json", verdict.str());
      std::cout << "sensitivity curve written to " << (fs::path(out_dir) / ("sensitivity." + ext)).string() << "\n";
    } else if (*bg) {
      command = "backgrounds";
      CString report;
      check(nvspin_backgrounds(ctx.get(), report.out()), "backgrounds");
      outputs.add("backgrounds.json", report.str());
      std::cout << report.str();
    } else if (*synth) {
      command = "synth";
      double noise = -1.0;
      if (synth_noise) {
        if (*synth_noise < 0.0) throw Failure{kValidation, "synth: --noise must be non-negative"};
        noise = synth_mode == "fringe" ? *synth_noise : *synth_noise * kNanoTesla;
      }
      CString csv;
      check(nvspin_synth(ctx.get(), synth_mode.c_str(), noise, csv.out()), "synth");
      outputs.add("synth_" + synth_mode + ".csv", csv.str());
      std::cout << "synthetic " << synth_mode << " data written to "
                << (fs::path(out_dir) / ("synth_" + synth_mode + ".csv")).string() << "\n";
    }

    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    outputs.manifest(ctx.get(), command, wall);
    return kOk;
  } catch (const Failure& f) {
    std::cerr << "error: " << f.message << "\n";
    return f.code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInternal;
  }
}
