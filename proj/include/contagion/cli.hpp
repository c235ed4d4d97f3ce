#pragma once

#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "contagion/io.hpp"
#include "contagion/selftest.hpp"

namespace contagion::cli {

enum ExitCode : int {
  kOk = 0,
  kInputError = 2,
  kEngineError = 3,
  kNotConverged = 4,
};

namespace detail {

inline const std::map<std::string, PeriodMapping>& mapping_names() {
  static const std::map<std::string, PeriodMapping> m{{"scaled-quarterly", PeriodMapping::scaled_quarterly},
                                                      {"raw-per-period", PeriodMapping::raw_per_period},
                                                      {"annual-steps", PeriodMapping::annual_steps}};
  return m;
}

// Everything is rendered to memory first so a failing run writes nothing.
inline void emit(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ParseError(path, 0, "", "cannot open output file");
  f << text;
}

inline std::string surface_json(const LossSurface<double>& s) {
  nlohmann::json j = {{"n", s.n}, {"rows", s.rows}};
  return j.dump(2) + "\n";
}

}  // namespace detail

struct Options {
  std::string model;
  std::string quotes;
  std::string output;
  std::string sidecar;
  std::string json_path;
  std::string paths_csv;
  std::string format = "csv";
  std::string mode = "rational";
  std::string mapping = "scaled-quarterly";
  std::int64_t paths = 100000;
  std::uint64_t seed = 20240601;
  int threads = 0;
  int nodes = 64;
  int starts = 8;
  std::vector<int> variants;
  double p = 0.0, sigma_x = 0.0, q = 0.0;
  bool perturb_lambda = false;
};

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-period default contagion: loss distributions, simulation, tranche pricing"};
  app.require_subcommand(1);
  Options o;
  app.add_option("--threads", o.threads, "worker threads (0: all cores)")->check(CLI::NonNegativeNumber);

  auto* dist = app.add_subcommand("dist", "exact law of N_t for t = 0..T");
  dist->add_option("model", o.model, "model file")->required();
  dist->add_option("-o,--output", o.output, "output path (default stdout)");
  dist->add_option("--mode", o.mode, "arithmetic")->check(CLI::IsMember({"rational", "float"}));
  dist->add_option("--format", o.format)->check(CLI::IsMember({"csv", "json"}));
  dist->add_option("--sidecar", o.sidecar, "also write exact fractions here (rational mode)");

  auto* sim = app.add_subcommand("simulate", "Monte Carlo estimate of the law of N_t");
  sim->add_option("model", o.model, "model file")->required();
  sim->add_option("-o,--output", o.output);
  sim->add_option("--paths", o.paths)->check(CLI::PositiveNumber);
  sim->add_option("--seed", o.seed);
  sim->add_option("--paths-csv", o.paths_csv, "per-path export: path,t,defaults,direct_defaults");

  auto* fig = app.add_subcommand("figures", "mean, variance and tail probabilities of the four reference models");
  fig->add_option("-o,--output", o.output);
  fig->add_option("--format", o.format)->check(CLI::IsMember({"csv", "json"}));

  auto* price = app.add_subcommand("price", "model quotes for a quote file at given annual parameters");
  price->add_option("quotes", o.quotes, "quote file")->required();
  price->add_option("--p", o.p)->required();
  price->add_option("--sigma-x", o.sigma_x);
  price->add_option("--q", o.q)->required();
  price->add_option("--nodes", o.nodes)->check(CLI::Range(1, 1024));
  price->add_option("--period-mapping", o.mapping)->check(CLI::IsMember({"scaled-quarterly", "raw-per-period", "annual-steps"}));
  price->add_option("-o,--output", o.output);

  auto* cal = app.add_subcommand("calibrate", "fit (p, sigma_X, q) to a quote file");
  cal->add_option("quotes", o.quotes, "quote file")->required();
  cal->add_option("--variant", o.variants, "instrument set 1..4 (repeatable; default all)")->check(CLI::Range(1, 4));
  cal->add_option("--starts", o.starts, "Latin hypercube starts")->check(CLI::PositiveNumber);
  cal->add_option("--seed", o.seed);
  cal->add_option("--nodes", o.nodes)->check(CLI::Range(1, 1024));
  cal->add_option("--period-mapping", o.mapping)->check(CLI::IsMember({"scaled-quarterly", "raw-per-period", "annual-steps"}));
  cal->add_option("--json", o.json_path, "JSON report path");
  cal->add_option("-o,--output", o.output, "table path (default stdout)");

  auto* self = app.add_subcommand("selftest", "cross-check the independent computation routes");
  self->add_option("--paths", o.paths, "Monte Carlo paths")->check(CLI::PositiveNumber);
  self->add_option("--seed", o.seed);
  self->add_option("--nodes", o.nodes)->check(CLI::Range(1, 1024));
  self->add_flag("--perturb-lambda", o.perturb_lambda)->group("");
  bool paths_given = false;
  self->callback([&] { paths_given = self->count("--paths") > 0; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? kOk : kInputError;
  }
  if (o.threads == 0) o.threads = static_cast<int>(std::max(1U, std::thread::hardware_concurrency()));

  try {
    if (*dist) {
      const auto spec = load_model(o.model);
      for (const auto& w : spec.validate()) err << "warning: " << w << '\n';
      std::ostringstream text;
      std::string side;
      if (o.mode == "rational") {
        const auto surface = multi_period_pmf<Rational>(spec);
        surface.check();
        if (o.format == "json") text << detail::surface_json(surface.to_double());
        else write_surface_csv(text, surface);
        if (!o.sidecar.empty()) {
          std::ostringstream s;
          write_rational_sidecar(s, surface);
          side = s.str();
        }
      } else {
        if (!o.sidecar.empty()) throw ParseError("--sidecar", 0, "", "exact sidecar needs --mode rational");
        const auto surface = multi_period_pmf<double>(spec);
        surface.check();
        if (o.format == "json") text << detail::surface_json(surface);
        else write_surface_csv(text, surface);
      }
      detail::emit(o.output, text.str(), out);
      if (!side.empty()) detail::emit(o.sidecar, side, out);
      return kOk;
    }

    if (*sim) {
      SimConfig cfg;
      cfg.spec = load_model(o.model);
      cfg.paths = o.paths;
      cfg.seed = o.seed;
      cfg.threads = o.threads;
      std::ostringstream raw;
      PathObserver observer;
      if (!o.paths_csv.empty()) {
        raw << "path,t,defaults,direct_defaults\n";
        observer = [&](const PathRecord& r) {
          raw << r.path << ',' << r.t << ',' << r.defaults << ',' << r.direct_defaults << '\n';
        };
      }
      const auto surface = simulate(cfg, observer);
      std::ostringstream text;
      write_empirical_csv(text, surface);
      detail::emit(o.output, text.str(), out);
      if (!o.paths_csv.empty()) detail::emit(o.paths_csv, raw.str(), out);
      return kOk;
    }

    if (*fig) {
      const auto rows = reference_figures();
      std::ostringstream text;
      if (o.format == "json") {
        nlohmann::json j = nlohmann::json::array();
        for (const auto& r : rows)
          j.push_back({{"model", r.model}, {"t", r.t}, {"mean", r.mean}, {"variance", r.variance},
                       {"p_ge_6", r.p_ge_6}, {"p_eq_n", r.p_eq_n}});
        text << j.dump(2) << '\n';
      } else {
        write_figures_csv(text, rows);
      }
      detail::emit(o.output, text.str(), out);
      return kOk;
    }

    const EngineSettings engine{detail::mapping_names().at(o.mapping), o.nodes};

    if (*price) {
      const auto quotes = load_quotes(o.quotes);
      const ModelParams params{o.p, o.sigma_x, o.q};
      coordinates_from_params(params);  // feasibility
      const auto model = model_quotes(params, quotes, engine);
      std::ostringstream text;
      text << "instrument,attachment,detachment,unit,market,model\n";
      for (std::size_t i = 0; i < model.size(); ++i) {
        const auto& ins = quotes.instruments[i];
        text << ins.name << ',' << ins.tranche.attachment << ',' << ins.tranche.detachment << ','
             << (ins.tranche.unit == QuoteUnit::upfront_pct ? "pct-upfront" : "bp") << ','
             << format_probability(ins.quote) << ',' << format_probability(model[i]) << '\n';
      }
      detail::emit(o.output, text.str(), out);
      return kOk;
    }

    if (*cal) {
      const auto quotes = load_quotes(o.quotes);
      if (o.variants.empty()) o.variants = {1, 2, 3, 4};
      CalibrationSettings settings;
      settings.engine = engine;
      settings.grid_starts = o.starts;
      settings.seed = o.seed;
      settings.threads = o.threads;
      std::vector<CalibrationResult> results;
      nlohmann::json report = nlohmann::json::array();
      for (int v : o.variants) {
        results.push_back(calibrate(v, quotes, settings));
        report.push_back(calibration_json(results.back(), quotes));
        settings.validate_engine = false;  // once per run is enough
      }
      std::ostringstream text;
      write_calibration_table(text, quotes, results);
      detail::emit(o.output, text.str(), out);
      if (!o.json_path.empty()) detail::emit(o.json_path, report.dump(2) + "\n", out);
      bool converged = true;
      for (const auto& r : results) {
        if (r.converged) continue;
        converged = false;
        err << "calibration " << r.variant << " did not converge after " << r.iterations << " evaluations ("
            << r.restarts << " restarts); best rmse " << r.rmse << '\n';
      }
      return converged ? kOk : kNotConverged;
    }

    if (*self) {
      SelftestOptions so;
      if (paths_given) so.mc_paths = o.paths;
      so.seed = o.seed;
      so.threads = o.threads;
      so.nodes = o.nodes;
      so.perturb_lambda = o.perturb_lambda;
      bool ok = true;
      std::ostringstream text;
      for (const auto& c : run_selftest(so)) {
        text << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << '\n';
        ok = ok && c.passed;
      }
      out << text.str();
      return ok ? kOk : kEngineError;
    }
  } catch (const ParseError& e) {
    err << "input error: " << e.what() << '\n';
    return kInputError;
  } catch (const DomainError& e) {
    err << "input error: " << e.what() << '\n';
    return kInputError;
  } catch (const Error& e) {
    err << "engine error: " << e.what() << '\n';
    return kEngineError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kEngineError;
  }
  return kOk;
}

}  // namespace contagion::cli
