// nvmag: command-line front end for simulation, fitting, inversion and scans.
//
// Exit status: 0 success, 1 usage or input error, 2 numerical failure.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "nvmag/config.hpp"
#include "nvmag/errors.hpp"
#include "nvmag/estimators.hpp"
#include "nvmag/inversion.hpp"
#include "nvmag/scan.hpp"
#include "nvmag/sensitivity.hpp"
#include "nvmag/serialization.hpp"
#include "nvmag/signal_synth.hpp"
#include "nvmag/spin_model.hpp"

namespace {

using nlohmann::json;
using namespace nvmag;

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string format;  // empty = subcommand default
};

class UsageError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

Config load(const Globals& g) {
  Config c = g.config_path.empty() ? parse_config(json{{"version", kConfigVersion}})
                                   : load_config(g.config_path);
  if (g.seed) c.scan.seed = *g.seed;
  return c;
}

std::string format_or(const Globals& g, const std::string& fallback) {
  return g.format.empty() ? fallback : g.format;
}

void emit(const Globals& g, const std::string& text) {
  if (g.out.empty() || g.out == "-") {
    std::cout << text;
    return;
  }
  const std::filesystem::path p(g.out);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream os(p, std::ios::binary);
  if (!os) throw UsageError("cannot write " + g.out);
  os << text;
}

void emit_record(const Globals& g, const MeasurementRecord& rec) {
  if (format_or(g, "csv") == "csv") {
    std::ostringstream os;
    write_record_csv(os, rec);
    emit(g, os.str());
  } else {
    emit(g, dump9(to_json(rec)) + "\n");
  }
}

std::vector<double> parse_list(const std::string& s, std::size_t n, const std::string& what) {
  std::vector<double> v;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      v.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw UsageError(what + ": '" + item + "' is not a number");
    }
  }
  if (v.size() != n) throw UsageError(what + " needs " + std::to_string(n) + " comma-separated numbers");
  return v;
}

MeasurementRecord read_record(const std::string& path, RecordKind kind) {
  std::ifstream is(path);
  if (!is) throw UsageError("cannot open " + path);
  const auto first = is.peek();
  if (first == '{') {
    json j;
    try {
      j = json::parse(is);
    } catch (const json::exception& e) {
      throw UsageError(path + ": " + e.what());
    }
    if (!j.contains("kind")) j["kind"] = to_string(kind);
    MeasurementRecord rec = record_from_json(j);
    if (rec.kind != kind) throw UsageError(path + " holds a " + to_string(rec.kind) + " record");
    return rec;
  }
  return read_record_csv(is, kind);
}

std::string fit_text(const Globals& g, const FitResult& fit) {
  if (format_or(g, "json") == "json") return dump9(to_json(fit)) + "\n";
  std::ostringstream os;
  os << "parameter,value,sigma\n";
  for (std::size_t i = 0; i < fit.names.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    os << fit.names[i] << ',' << format9(fit.values(k)) << ',' << format9(fit.sigmas(k)) << '\n';
  }
  return os.str();
}

std::string budget_table(const json& rows) {
  std::ostringstream os;
  os << "quantity                                   value            unit\n";
  os << "-----------------------------------------  ---------------  ----\n";
  for (const auto& r : rows) {
    std::string name = r.at("quantity").get<std::string>();
    name.resize(41, ' ');
    os << name << "  " << std::left << std::setw(15) << format9(r.at("value").get<double>()) << "  "
       << r.at("unit").get<std::string>() << '\n';
  }
  return os.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"NV-center vector magnetometry toolkit", "nvmag"};
  app.fallthrough();
  app.require_subcommand(1);

  Globals g;
  app.add_option("--config", g.config_path, "JSON configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "RNG seed (overrides the config)");
  app.add_option("--out", g.out, "output file (directory for scan); stdout when absent");
  app.add_option("--format", g.format, "output format")->check(CLI::IsMember({"csv", "json"}));

  // simulate-*
  auto* sim_odmr = app.add_subcommand("simulate-odmr", "ODMR spectrum at the configured field");
  std::string field_arg;
  sim_odmr->add_option("--field", field_arg, "bx,by,bz in mT (NV frame)");

  auto* sim_prec = app.add_subcommand("simulate-precession", "15N free-precession trace");
  sim_prec->add_option("--field", field_arg, "bx,by,bz in mT (NV frame)");
  std::optional<double> omega_override;
  sim_prec->add_option("--omega-l", omega_override, "Larmor frequency in MHz (default: from field)");

  auto* sim_echo = app.add_subcommand("simulate-echo", "electron spin-echo trace");

  // fit
  auto* fit = app.add_subcommand("fit", "fit a measurement record");
  std::string fit_kind;
  std::string fit_in;
  fit->add_option("--kind", fit_kind, "record kind")
      ->required()
      ->check(CLI::IsMember({"odmr", "precession", "echo"}));
  fit->add_option("--in", fit_in, "record file (CSV or JSON)")->required()->check(CLI::ExistingFile);

  // invert
  auto* inv = app.add_subcommand("invert", "frequencies to (|Bz|, Bperp)");
  std::optional<double> dw_minus, dw_plus, omega_l, tau_re;
  double sigma_dw = 0.0, sigma_omega = 0.0;
  std::string branch = "minus";
  inv->add_option("--dw-minus", dw_minus, "minus-branch shift, MHz");
  inv->add_option("--dw-plus", dw_plus, "plus-branch shift, MHz");
  inv->add_option("--omega-l", omega_l, "Larmor frequency, MHz");
  inv->add_option("--sigma-dw", sigma_dw, "1-sigma of the branch shift, MHz");
  inv->add_option("--sigma-omega", sigma_omega, "1-sigma of the Larmor frequency, MHz");
  inv->add_option("--branch", branch, "branch used with --omega-l")
      ->check(CLI::IsMember({"minus", "plus"}));
  inv->add_option("--tau-re", tau_re, "echo revival time, us (adds |B| cross-check)");

  // disambiguate
  auto* dis = app.add_subcommand("disambiguate", "resolve the field vector with calibrated fields");
  std::string base_arg;
  std::vector<std::string> cal_args;
  double tol = kDefaultCandidateTol;
  dis->add_option("--base", base_arg, "|Bz|,Bperp of the unknown field, mT")->required();
  dis->add_option("--cal", cal_args,
                  "cx,cy,cz,|Bz'|,Bperp' : calibrated field and the reconstruction of B + C")
      ->take_all();
  dis->add_option("--tol", tol, "candidate tolerance, mT");

  // sensitivity
  auto* sens = app.add_subcommand("sensitivity", "noise budget table");
  double sens_bperp = 2.4, sens_temp_bperp = 0.7, sens_dT = 1.0;
  sens->add_option("--b-perp", sens_bperp, "operating Bperp for the ODMR-only error, mT");
  sens->add_option("--temp-b-perp", sens_temp_bperp, "Bperp for the temperature error, mT");
  sens->add_option("--delta-t", sens_dT, "temperature step, K");

  // scan
  auto* scan = app.add_subcommand("scan", "grid scan of a synthetic dipole magnet");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    const Config cfg = load(g);
    FieldVector B = cfg.field;
    if (!field_arg.empty()) B = FieldVector::from([&] {
        const auto v = parse_list(field_arg, 3, "--field");
        return Eigen::Vector3d(v[0], v[1], v[2]);
      }());
    const auto& noise = cfg.scan.noise;
    const std::uint64_t seed = cfg.scan.seed;

    if (sim_odmr->parsed()) {
      MeasurementRecord rec =
          synth_odmr(B, cfg.scan.nv, cfg.scan.odmr.sweep, cfg.scan.odmr.linewidth, cfg.scan.odmr.contrast);
      if (noise.enabled) rec = add_shot_noise(rec, noise.photon_rate, noise.odmr_dwell, seed);
      emit_record(g, rec);
    } else if (sim_prec->parsed()) {
      PrecessionModel m = cfg.scan.precession.model;
      m.omega_L = omega_override ? *omega_override : larmor_frequency(B, cfg.scan.nv);
      MeasurementRecord rec = synth_precession(m, cfg.scan.precession.times());
      if (noise.enabled) rec = add_gaussian_noise(rec, noise.precession_noise_ratio * m.Ic, seed);
      emit_record(g, rec);
    } else if (sim_echo->parsed()) {
      MeasurementRecord rec = synth_echo(cfg.echo.model, cfg.echo.taus());
      if (noise.enabled) rec = add_gaussian_noise(rec, cfg.echo.noise_sigma, seed);
      emit_record(g, rec);
    } else if (fit->parsed()) {
      const RecordKind kind = record_kind_from_string(fit_kind);
      const MeasurementRecord rec = read_record(fit_in, kind);
      FitResult res;
      if (kind == RecordKind::odmr) {
        res = fit_odmr_doublet(rec);
      } else if (kind == RecordKind::precession) {
        res = fit_precession(rec, cfg.scan.precession.grid);
      } else {
        const EchoModel& e = cfg.echo.model;
        res = fit_echo(rec, {{"tau_c", e.tau_c}, {"tau_re", e.tau_re}, {"a", e.a}, {"b", e.b},
                             {"omega1", e.omega1}, {"omega2", e.omega2}});
      }
      emit(g, fit_text(g, res));
    } else if (inv->parsed()) {
      const NVParameters& p = cfg.scan.nv;
      json out;
      if (omega_l) {
        const auto* dw = branch == "minus" ? &dw_minus : &dw_plus;
        if (!*dw) throw UsageError("--omega-l needs --dw-" + branch);
        const AxialTransverse at =
            invert_axial_transverse(**dw, *omega_l, p, branch == "minus" ? Branch::minus : Branch::plus,
                                    {sigma_dw, sigma_omega});
        out = to_json(at);
        out["method"] = "two_frequency";
      } else if (dw_minus && dw_plus) {
        out = to_json(invert_odmr_only(*dw_plus, *dw_minus, p, sigma_dw));
        out["method"] = "odmr_only";
      } else if (!tau_re) {
        throw UsageError("invert needs --omega-l with a branch shift, or both --dw-plus and --dw-minus");
      }
      if (tau_re) out["revival_magnitude"] = field_magnitude_from_revival(*tau_re, p);
      if (format_or(g, "json") == "json") {
        emit(g, dump9(out) + "\n");
      } else {
        std::ostringstream os;
        os << "quantity,value\n";
        for (auto it = out.begin(); it != out.end(); ++it)
          if (it->is_number()) os << it.key() << ',' << format9(it->get<double>()) << '\n';
        emit(g, os.str());
      }
    } else if (dis->parsed()) {
      const auto b = parse_list(base_arg, 2, "--base");
      std::vector<CalibratedMeasurement> cal;
      for (const auto& c : cal_args) {
        const auto v = parse_list(c, 5, "--cal");
        cal.push_back({CalibratedField{{v[0], v[1], v[2]}}, AxialTransverse::from(v[3], v[4])});
      }
      const AxialTransverse base = AxialTransverse::from(b[0], b[1]);
      json out;
      int status = 0;
      try {
        out = to_json(cal.empty() ? candidate_rings(base, tol) : disambiguate(base, cal, tol));
      } catch (const AmbiguityRemains& e) {
        out = to_json(e.partial());
        out["error"] = e.what();
        status = 2;
      }
      if (format_or(g, "json") == "json") {
        emit(g, dump9(out) + "\n");
      } else {
        std::ostringstream os;
        os << "bx_mt,by_mt,bz_mt\n";
        for (const auto& v : out.at("vectors"))
          os << format9(v[0].get<double>()) << ',' << format9(v[1].get<double>()) << ','
             << format9(v[2].get<double>()) << '\n';
        emit(g, os.str());
      }
      if (status) std::cerr << "error: " << out["error"].get<std::string>() << '\n';
      return status;
    } else if (sens->parsed()) {
      const NVParameters& p = cfg.scan.nv;
      const NoiseBudget& bud = cfg.budget;
      const AxialTransverse op = AxialTransverse::of(B);
      const TransverseError te = delta_bperp_full_chain(bud, op, p);
      const double dw = bud.delta_omega_odmr;
      const json rows = json::array({
          {{"quantity", "delta_Bz (ODMR)"}, {"value", delta_bz_odmr(bud, p)}, {"unit", "mT"}},
          {{"quantity", "delta_omega_L (precession readout)"},
           {"value", delta_omega_precession(bud)}, {"unit", "MHz"}},
          {{"quantity", "delta_Bperp (precession, dominant)"},
           {"value", delta_bperp_precession(bud, p)}, {"unit", "mT"}},
          {{"quantity", "delta_Bperp (precession, full chain)"}, {"value", te.full_chain}, {"unit", "mT"}},
          {{"quantity", "delta_Bperp (ODMR only)"},
           {"value", delta_bperp_odmr_only(dw, dw, sens_bperp, p)}, {"unit", "mT"}},
          {{"quantity", "omega_+ + omega_- shift per delta_T"},
           {"value", temperature_sum_shift(sens_dT, bud)}, {"unit", "MHz"}},
          {{"quantity", "delta_Bperp (ODMR only, temperature)"},
           {"value", temperature_error_odmr_only(sens_dT, sens_temp_bperp, bud, p)}, {"unit", "mT"}},
          {{"quantity", "omega_L shift per delta_T"},
           {"value", std::abs(larmor_d_omega_dD(B, p)) * bud.dD_dT * sens_dT}, {"unit", "MHz"}},
      });
      const std::string fmt = format_or(g, "table");
      if (fmt == "json") {
        emit(g, dump9(json{{"budget", to_json(bud)},
                           {"operating_point", to_json(op)},
                           {"odmr_only_b_perp_mt", sens_bperp},
                           {"temperature_b_perp_mt", sens_temp_bperp},
                           {"delta_T_k", sens_dT},
                           {"rows", rows}}) +
                     "\n");
      } else if (fmt == "csv") {
        std::ostringstream os;
        os << "quantity,value,unit\n";
        for (const auto& r : rows)
          os << r["quantity"].get<std::string>() << ',' << format9(r["value"].get<double>()) << ','
             << r["unit"].get<std::string>() << '\n';
        emit(g, os.str());
      } else {
        emit(g, budget_table(rows));
      }
    } else if (scan->parsed()) {
      if (g.out.empty()) throw UsageError("scan needs --out DIR");
      const ScanResult res = run_scan(cfg.scan);
      const auto files = write_scan_outputs(g.out, cfg.scan, res, config_hash(cfg));
      for (const auto& f : files) std::cerr << "wrote " << f.string() << '\n';
    }
    return 0;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
