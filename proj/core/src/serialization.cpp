#include "nvmag/serialization.hpp"

#include <cmath>
#include <cstdio>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "nvmag/errors.hpp"

namespace nvmag {

using nlohmann::json;

namespace {

json round9(const json& j) {
  if (j.is_number_float()) {
    const double v = j.get<double>();
    if (!std::isfinite(v)) return std::isnan(v) ? json("nan") : json(v > 0 ? "inf" : "-inf");
    return json(std::stod(format9(v)));
  }
  if (j.is_array() || j.is_object()) {
    json out = j;
    for (auto it = out.begin(); it != out.end(); ++it) *it = round9(*it);
    return out;
  }
  return j;
}

json matrix_json(const Eigen::Matrix3d& m) {
  json rows = json::array();
  for (int r = 0; r < 3; ++r) rows.push_back({m(r, 0), m(r, 1), m(r, 2)});
  return rows;
}

json number_or_string(double v) {
  if (std::isfinite(v)) return v;
  return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
}

std::string axis_header(RecordKind k) {
  return k == RecordKind::odmr ? "frequency_mhz,intensity" : "time_us,intensity";
}

}  // namespace

std::string format9(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string dump9(const json& j, int indent) { return round9(j).dump(indent); }

json to_json(const NVParameters& p) {
  return {{"D", p.D},       {"ge_be", p.ge_be},        {"gn", p.gn},
          {"beta_n", p.beta_n}, {"A", matrix_json(p.A)}, {"P", matrix_json(p.P)},
          {"g13c_b13c", p.g13c_b13c}};
}

json to_json(const FieldVector& b) {
  return {{"bx", b.bx}, {"by", b.by}, {"bz", b.bz}, {"b_perp", b.b_perp()},
          {"magnitude", b.magnitude()}};
}

json to_json(const TransitionSet& ts) {
  json lines = json::array();
  for (const auto& l : ts.lines)
    lines.push_back({{"frequency_mhz", l.frequency},
                     {"branch", to_string(l.branch)},
                     {"nuclear", to_string(l.nuclear)}});
  return {{"lines", lines},
          {"nuclear_precession_ms0_mhz", ts.nuclear_precession_ms0},
          {"nuclear_precession_ms_minus1_mhz", ts.nuclear_precession_ms_minus1}};
}

json to_json(const MeasurementRecord& rec) {
  return {{"kind", to_string(rec.kind)},
          {"axis_unit", rec.kind == RecordKind::odmr ? "MHz" : "us"},
          {"axis", rec.axis},
          {"values", rec.values},
          {"meta", rec.meta}};
}

MeasurementRecord record_from_json(const json& j) {
  MeasurementRecord rec;
  rec.kind = record_kind_from_string(j.at("kind").get<std::string>());
  rec.axis = j.at("axis").get<std::vector<double>>();
  rec.values = j.at("values").get<std::vector<double>>();
  if (j.contains("meta")) rec.meta = j.at("meta");
  rec.validate();
  return rec;
}

json to_json(const FitResult& fit) {
  json params = json::object();
  json sigmas = json::object();
  for (std::size_t j = 0; j < fit.names.size(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    params[fit.names[j]] = number_or_string(fit.values(jj));
    sigmas[fit.names[j]] = number_or_string(fit.sigmas(jj));
  }
  return {{"params", params},
          {"sigmas", sigmas},
          {"diagnostics",
           {{"residual_norm", fit.residual_norm},
            {"gradient_norm", fit.gradient_norm},
            {"converged", fit.converged},
            {"iterations", fit.iterations},
            {"stop_reason", fit.stop_reason},
            {"flags", fit.flags}}}};
}

json to_json(const AxialTransverse& at) {
  return {{"bz_abs", at.bz_abs},          {"b_perp", at.b_perp},
          {"theta_deg", at.theta_deg},    {"magnitude", at.magnitude()},
          {"iterations", at.iterations},  {"warnings", at.warnings}};
}

json to_json(const CandidateSet& cs) {
  json rings = json::array();
  for (const auto& r : cs.rings) rings.push_back({{"z", r.z}, {"r", r.r}});
  json vectors = json::array();
  for (const auto& v : cs.vectors) vectors.push_back({v.bx, v.by, v.bz});
  return {{"stage", to_string(cs.stage)},
          {"rings", rings},
          {"vectors", vectors},
          {"tolerance_mt", cs.tolerance},
          {"warnings", cs.warnings}};
}

json to_json(const NoiseBudget& b) {
  return {{"delta_omega_odmr_mhz", b.delta_omega_odmr},
          {"noise_ratio", b.noise_ratio},
          {"t_probe_us", b.t_probe},
          {"T0_us", b.T0},
          {"dD_dT_mhz_per_k", b.dD_dT},
          {"delta_T_k", b.delta_T}};
}

void write_record_csv(std::ostream& os, const MeasurementRecord& rec) {
  os << axis_header(rec.kind) << '\n';
  for (std::size_t i = 0; i < rec.axis.size(); ++i)
    os << format9(rec.axis[i]) << ',' << format9(rec.values[i]) << '\n';
}

MeasurementRecord read_record_csv(std::istream& is, RecordKind kind) {
  MeasurementRecord rec;
  rec.kind = kind;
  std::string line;
  bool header = true;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (header) {
      header = false;
      if (line.find_first_not_of("0123456789+-.eE, \t\r") != std::string::npos) continue;
    }
    std::istringstream ls(line);
    double x = 0.0;
    double y = 0.0;
    char comma = 0;
    if (!(ls >> x >> comma >> y) || comma != ',')
      throw InvalidArgument("malformed CSV row: '" + line + "'");
    rec.axis.push_back(x);
    rec.values.push_back(y);
  }
  rec.validate();
  return rec;
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

}  // namespace nvmag
