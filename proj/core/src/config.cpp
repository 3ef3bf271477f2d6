#include "nvmag/config.hpp"

#include <fstream>
#include <initializer_list>

#include "nvmag/errors.hpp"
#include "nvmag/serialization.hpp"

namespace nvmag {

using nlohmann::json;

namespace {

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* a : allowed) known = known || it.key() == a;
    if (!known) throw ConfigError("unknown key '" + it.key() + "' in " + where);
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

Eigen::Vector3d vec3(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) throw ConfigError(where + " must be a 3-element array");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

void read_range(const json& obj, const char* key, double& lo, double& hi, const std::string& where) {
  if (!obj.contains(key)) return;
  const json& r = obj.at(key);
  if (!r.is_array() || r.size() != 2) throw ConfigError(where + "." + key + " must be [min, max]");
  lo = r[0].get<double>();
  hi = r[1].get<double>();
}

Eigen::Matrix3d tensor(const json& j, const std::string& where) {
  if (j.is_array() && j.size() == 3 && j[0].is_number())
    return Eigen::Vector3d(j[0].get<double>(), j[1].get<double>(), j[2].get<double>()).asDiagonal();
  if (j.is_array() && j.size() == 3) {
    Eigen::Matrix3d m;
    for (int r = 0; r < 3; ++r) m.row(r) = vec3(j[static_cast<std::size_t>(r)], where).transpose();
    return m;
  }
  throw ConfigError(where + " must be a diagonal [xx, yy, zz] or a 3x3 array");
}

json vec_json(const Eigen::Vector3d& v) { return {v.x(), v.y(), v.z()}; }

}  // namespace

std::vector<double> EchoSettings::taus() const { return linspace(tau_start, tau_stop, n); }

Config parse_config(const json& j) {
  check_keys(j, {"version", "seed", "threads", "nv", "field", "odmr", "precession", "echo", "noise",
                 "grid", "magnet", "outputs", "budget"},
             "config");
  Config c;
  if (!j.contains("version")) throw ConfigError("config.version is required");
  read(j, "version", c.version, "config");
  if (c.version != kConfigVersion)
    throw ConfigError("unsupported config version " + std::to_string(c.version));
  read(j, "seed", c.scan.seed, "config");
  read(j, "threads", c.scan.threads, "config");
  read(j, "outputs", c.scan.outputs, "config");

  if (j.contains("nv")) {
    const json& n = j.at("nv");
    check_keys(n, {"D", "ge_be", "gn", "beta_n", "A", "P", "g13c_b13c"}, "nv");
    NVParameters& p = c.scan.nv;
    read(n, "D", p.D, "nv");
    read(n, "ge_be", p.ge_be, "nv");
    read(n, "gn", p.gn, "nv");
    read(n, "beta_n", p.beta_n, "nv");
    read(n, "g13c_b13c", p.g13c_b13c, "nv");
    if (n.contains("A")) p.A = tensor(n.at("A"), "nv.A");
    if (n.contains("P")) p.P = tensor(n.at("P"), "nv.P");
  }
  if (j.contains("field")) c.field = FieldVector::from(vec3(j.at("field"), "field"));

  if (j.contains("odmr")) {
    const json& o = j.at("odmr");
    check_keys(o, {"sweep", "linewidth", "contrast", "half_window", "points"}, "odmr");
    auto& s = c.scan.odmr;
    if (o.contains("sweep")) {
      const json& sw = o.at("sweep");
      check_keys(sw, {"start", "stop", "n"}, "odmr.sweep");
      read(sw, "start", s.sweep.start, "odmr.sweep");
      read(sw, "stop", s.sweep.stop, "odmr.sweep");
      read(sw, "n", s.sweep.n, "odmr.sweep");
    }
    read(o, "linewidth", s.linewidth, "odmr");
    read(o, "contrast", s.contrast, "odmr");
    read(o, "half_window", s.half_window, "odmr");
    read(o, "points", s.points, "odmr");
  }
  if (j.contains("precession")) {
    const json& o = j.at("precession");
    check_keys(o, {"I0", "Ic", "T0", "t_start", "t_stop", "n", "grid_min", "grid_max",
                   "grid_step"},
               "precession");
    auto& s = c.scan.precession;
    read(o, "I0", s.model.I0, "precession");
    read(o, "Ic", s.model.Ic, "precession");
    read(o, "T0", s.model.T0, "precession");
    read(o, "t_start", s.t_start, "precession");
    read(o, "t_stop", s.t_stop, "precession");
    read(o, "n", s.n, "precession");
    read(o, "grid_min", s.grid.min, "precession");
    read(o, "grid_max", s.grid.max, "precession");
    read(o, "grid_step", s.grid.step, "precession");
  }
  if (j.contains("echo")) {
    const json& o = j.at("echo");
    check_keys(o, {"tau_c", "tau_re", "a", "b", "omega1", "omega2", "tau_start", "tau_stop", "n",
                   "noise_sigma"},
               "echo");
    auto& e = c.echo;
    read(o, "tau_c", e.model.tau_c, "echo");
    read(o, "tau_re", e.model.tau_re, "echo");
    read(o, "a", e.model.a, "echo");
    read(o, "b", e.model.b, "echo");
    read(o, "omega1", e.model.omega1, "echo");
    read(o, "omega2", e.model.omega2, "echo");
    read(o, "tau_start", e.tau_start, "echo");
    read(o, "tau_stop", e.tau_stop, "echo");
    read(o, "n", e.n, "echo");
    read(o, "noise_sigma", e.noise_sigma, "echo");
  }
  if (j.contains("noise")) {
    const json& o = j.at("noise");
    check_keys(o, {"enabled", "photon_rate", "odmr_dwell", "precession_noise_ratio"}, "noise");
    auto& s = c.scan.noise;
    read(o, "enabled", s.enabled, "noise");
    read(o, "photon_rate", s.photon_rate, "noise");
    read(o, "odmr_dwell", s.odmr_dwell, "noise");
    read(o, "precession_noise_ratio", s.precession_noise_ratio, "noise");
  }
  if (j.contains("grid")) {
    const json& o = j.at("grid");
    check_keys(o, {"x_range", "y_range", "nx", "ny"}, "grid");
    auto& g = c.scan.grid;
    read_range(o, "x_range", g.x_min, g.x_max, "grid");
    read_range(o, "y_range", g.y_min, g.y_max, "grid");
    read(o, "nx", g.nx, "grid");
    read(o, "ny", g.ny, "grid");
  }
  if (j.contains("magnet")) {
    const json& o = j.at("magnet");
    check_keys(o, {"position", "moment", "nv_orientation"}, "magnet");
    auto& m = c.scan.magnet;
    if (o.contains("position")) m.position = vec3(o.at("position"), "magnet.position");
    if (o.contains("moment")) m.moment = vec3(o.at("moment"), "magnet.moment");
    if (o.contains("nv_orientation")) {
      const Eigen::Vector3d n = vec3(o.at("nv_orientation"), "magnet.nv_orientation");
      if (!(n.norm() > 0.0)) throw ConfigError("magnet.nv_orientation must be non-zero");
      m.nv_orientation = n.normalized();
    }
  }
  if (j.contains("budget")) {
    const json& o = j.at("budget");
    check_keys(o, {"delta_omega_odmr", "noise_ratio", "t_probe", "T0", "dD_dT", "delta_T"}, "budget");
    auto& b = c.budget;
    read(o, "delta_omega_odmr", b.delta_omega_odmr, "budget");
    read(o, "noise_ratio", b.noise_ratio, "budget");
    read(o, "t_probe", b.t_probe, "budget");
    read(o, "T0", b.T0, "budget");
    read(o, "dD_dT", b.dD_dT, "budget");
    read(o, "delta_T", b.delta_T, "budget");
  }

  try {
    c.scan.validate();
    c.budget.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
  return c;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(is);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return parse_config(j);
}

json to_json(const Config& c) {
  const auto& s = c.scan;
  json nv = to_json(s.nv);
  nv.erase("P");
  if (s.nv.P.cwiseAbs().maxCoeff() != 0.0) nv["P"] = to_json(s.nv)["P"];
  return {
      {"version", c.version},
      {"seed", s.seed},
      {"threads", s.threads},
      {"outputs", s.outputs},
      {"nv", nv},
      {"field", {c.field.bx, c.field.by, c.field.bz}},
      {"odmr",
       {{"sweep", {{"start", s.odmr.sweep.start}, {"stop", s.odmr.sweep.stop}, {"n", s.odmr.sweep.n}}},
        {"linewidth", s.odmr.linewidth},
        {"contrast", s.odmr.contrast},
        {"half_window", s.odmr.half_window},
        {"points", s.odmr.points}}},
      {"precession",
       {{"I0", s.precession.model.I0},
        {"Ic", s.precession.model.Ic},
        {"T0", s.precession.model.T0},
        {"t_start", s.precession.t_start},
        {"t_stop", s.precession.t_stop},
        {"n", s.precession.n},
        {"grid_min", s.precession.grid.min},
        {"grid_max", s.precession.grid.max},
        {"grid_step", s.precession.grid.step}}},
      {"echo",
       {{"tau_c", c.echo.model.tau_c},
        {"tau_re", c.echo.model.tau_re},
        {"a", c.echo.model.a},
        {"b", c.echo.model.b},
        {"omega1", c.echo.model.omega1},
        {"omega2", c.echo.model.omega2},
        {"tau_start", c.echo.tau_start},
        {"tau_stop", c.echo.tau_stop},
        {"n", c.echo.n},
        {"noise_sigma", c.echo.noise_sigma}}},
      {"noise",
       {{"enabled", s.noise.enabled},
        {"photon_rate", s.noise.photon_rate},
        {"odmr_dwell", s.noise.odmr_dwell},
        {"precession_noise_ratio", s.noise.precession_noise_ratio}}},
      {"grid",
       {{"x_range", {s.grid.x_min, s.grid.x_max}},
        {"y_range", {s.grid.y_min, s.grid.y_max}},
        {"nx", s.grid.nx},
        {"ny", s.grid.ny}}},
      {"magnet",
       {{"position", vec_json(s.magnet.position)},
        {"moment", vec_json(s.magnet.moment)},
        {"nv_orientation", vec_json(s.magnet.nv_orientation)}}},
      {"budget",
       {{"delta_omega_odmr", c.budget.delta_omega_odmr},
        {"noise_ratio", c.budget.noise_ratio},
        {"t_probe", c.budget.t_probe},
        {"T0", c.budget.T0},
        {"dD_dT", c.budget.dD_dT},
        {"delta_T", c.budget.delta_T}}}};
}

std::string config_hash(const Config& c) { return fnv1a_hex(to_json(c).dump()); }

}  // namespace nvmag
