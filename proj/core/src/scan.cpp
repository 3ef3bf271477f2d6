#include "nvmag/scan.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <thread>

#include "nvmag/errors.hpp"
#include "nvmag/inversion.hpp"
#include "nvmag/serialization.hpp"

namespace nvmag {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

void append_flag(std::string& flags, const std::string& f) {
  if (flags == "ok") flags.clear();
  if (!flags.empty()) flags += '|';
  flags += f;
}

// Writes an x/y-indexed CSV with a provenance comment line.
void write_map(const std::filesystem::path& path, const std::string& header_comment,
               const std::string& columns, const ScanResult& res,
               const std::function<std::string(const ScanPoint&)>& row) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InvalidArgument("cannot write " + path.string());
  os << header_comment << '\n' << columns << '\n';
  for (const auto& p : res.points)
    os << format9(p.x_mm) << ',' << format9(p.y_mm) << ',' << row(p) << '\n';
}

}  // namespace

void DipoleMagnet::validate() const {
  if (std::abs(nv_orientation.norm() - 1.0) > 1e-12)
    throw InvalidArgument("nv_orientation must be a unit vector");
  if (!moment.allFinite() || !position.allFinite())
    throw InvalidArgument("magnet position and moment must be finite");
}

Eigen::Matrix3d nv_frame(const Eigen::Vector3d& n) {
  const Eigen::Vector3d z = n.normalized();
  Eigen::Vector3d ref = Eigen::Vector3d::UnitX();
  if (std::abs(z.dot(ref)) > 0.99) ref = Eigen::Vector3d::UnitY();
  const Eigen::Vector3d x = (ref - ref.dot(z) * z).normalized();
  const Eigen::Vector3d y = z.cross(x);
  Eigen::Matrix3d R;
  R.row(0) = x.transpose();
  R.row(1) = y.transpose();
  R.row(2) = z.transpose();
  return R;
}

FieldVector dipole_field(const DipoleMagnet& m, const Eigen::Vector3d& sensor_lab) {
  const Eigen::Vector3d r = sensor_lab - m.position;
  const double d = r.norm();
  if (d <= kNearFieldCutoff) throw TooClose("sensor within the near-field cutoff of the dipole");
  const Eigen::Vector3d u = r / d;
  const Eigen::Vector3d b_lab = (3.0 * u * u.dot(m.moment) - m.moment) / (d * d * d);
  return FieldVector::from(nv_frame(m.nv_orientation) * b_lab);
}

double ScanGrid::x_at(int ix) const {
  return nx == 1 ? x_min : x_min + (x_max - x_min) * ix / (nx - 1);
}

double ScanGrid::y_at(int iy) const {
  return ny == 1 ? y_min : y_min + (y_max - y_min) * iy / (ny - 1);
}

std::vector<double> PrecessionSettings::times() const { return linspace(t_start, t_stop, n); }

void ScanConfig::validate() const {
  if (grid.nx < 1 || grid.ny < 1) throw InvalidArgument("grid needs nx, ny >= 1");
  for (double v : {grid.x_min, grid.x_max, grid.y_min, grid.y_max})
    if (!std::isfinite(v)) throw InvalidArgument("grid ranges must be finite");
  magnet.validate();
  nv.validate();
  if (noise.enabled && (!(noise.photon_rate > 0.0) || !(noise.odmr_dwell > 0.0) ||
                        noise.precession_noise_ratio < 0.0))
    throw InvalidArgument("noise settings must be positive");
  if (odmr.points < 8 || !(odmr.half_window > 0.0))
    throw InvalidArgument("odmr scan window needs >= 8 points and a positive half-width");
  if (precession.n < 8 || !(precession.t_stop > precession.t_start))
    throw InvalidArgument("precession trace needs >= 8 increasing samples");
  for (const auto& o : outputs)
    if (o != "bz" && o != "bperp" && o != "error")
      throw InvalidArgument("unknown output kind '" + o + "'");
}

const ScanPoint& ScanResult::at(int ix, int iy) const {
  return points.at(static_cast<std::size_t>(iy * grid.nx + ix));
}

double ScanResult::max_abs_error() const {
  double worst = 0.0;
  for (const auto& p : points) {
    if (!std::isfinite(p.bz_est) || !std::isfinite(p.bperp_est)) continue;
    worst = std::max({worst, std::abs(p.bz_est - p.bz_true), std::abs(p.bperp_est - p.bperp_true)});
  }
  return worst;
}

std::uint64_t point_seed(std::uint64_t seed, int ix, int iy, int stream) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ static_cast<std::uint32_t>(ix));
  h = splitmix64(h ^ (static_cast<std::uint64_t>(static_cast<std::uint32_t>(iy)) << 20));
  return splitmix64(h ^ (static_cast<std::uint64_t>(stream) << 40));
}

ScanPoint evaluate_point(const ScanConfig& cfg, int ix, int iy) {
  ScanPoint pt;
  pt.ix = ix;
  pt.iy = iy;
  pt.x_mm = cfg.grid.x_at(ix);
  pt.y_mm = cfg.grid.y_at(iy);
  pt.bz_true = pt.bperp_true = pt.bz_est = pt.bperp_est = kNaN;
  pt.sigma_bz = pt.sigma_bperp = kNaN;

  // The magnet moves; the sensor sits at the lab origin.
  DipoleMagnet magnet = cfg.magnet;
  magnet.position += Eigen::Vector3d(pt.x_mm, pt.y_mm, 0.0);
  FieldVector B;
  try {
    B = dipole_field(magnet, Eigen::Vector3d::Zero());
  } catch (const TooClose&) {
    pt.flag = "too_close";
    return pt;
  }
  pt.bz_true = std::abs(B.bz);
  pt.bperp_true = B.b_perp();

  const NVParameters& p = cfg.nv;
  try {
    const ZeemanShifts z = zeeman_shifts_perturbative(pt.bz_true, pt.bperp_true, p);
    const double center = p.D + z.minus;
    const double half_split = 0.5 * p.A(2, 2);
    const std::array<double, 2> lines{center - half_split, center + half_split};
    const Sweep sweep{center - cfg.odmr.half_window, center + cfg.odmr.half_window, cfg.odmr.points};
    MeasurementRecord odmr = synth_odmr_lines(lines, sweep, cfg.odmr.linewidth, cfg.odmr.contrast);

    PrecessionModel pm = cfg.precession.model;
    pm.omega_L = larmor_frequency(B, p);
    const auto times = cfg.precession.times();
    MeasurementRecord prec = synth_precession(pm, times);

    if (cfg.noise.enabled) {
      odmr = add_shot_noise(odmr, cfg.noise.photon_rate, cfg.noise.odmr_dwell,
                            point_seed(cfg.seed, ix, iy, 1));
      prec = add_gaussian_noise(prec, cfg.noise.precession_noise_ratio * pm.Ic,
                                point_seed(cfg.seed, ix, iy, 2));
    }

    const FitResult of = fit_odmr_doublet(odmr);
    const FitResult pf = fit_precession(prec, cfg.precession.grid);
    if (!of.converged || !pf.converged || pf.unidentifiable("omega_L")) {
      append_flag(pt.flag, "fit_failed");
      return pt;
    }
    const double dw = 0.5 * (of.value("c1") + of.value("c2")) - p.D;
    const double sdw = 0.5 * std::hypot(of.sigma("c1"), of.sigma("c2"));
    const FrequencySigmas sig{sdw, pf.sigma("omega_L")};
    const AxialTransverse at = invert_axial_transverse(dw, pf.value("omega_L"), p, Branch::minus, sig);
    pt.bz_est = at.bz_abs;
    pt.bperp_est = at.b_perp;
    pt.sigma_bz = sdw / p.ge_be;
    const double ax = std::abs(alpha_coefficients(p).x());
    const double gnb = std::abs(p.gn_beta_n());
    pt.sigma_bperp = at.b_perp > 0.0 ? pf.value("omega_L") * pf.sigma("omega_L") /
                                           (gnb * gnb * ax * ax * at.b_perp)
                                     : kNaN;
    for (const auto& w : at.warnings) append_flag(pt.flag, w);
  } catch (const Error& e) {
    append_flag(pt.flag, "failed");
    pt.flag += ":";
    std::string what = e.what();
    std::replace(what.begin(), what.end(), ',', ';');
    std::replace(what.begin(), what.end(), ' ', '_');
    pt.flag += what;
  }
  return pt;
}

ScanResult run_scan(const ScanConfig& cfg) {
  cfg.validate();
  ScanResult res;
  res.grid = cfg.grid;
  const int total = cfg.grid.nx * cfg.grid.ny;
  res.points.resize(static_cast<std::size_t>(total));

  unsigned workers = cfg.threads > 0 ? static_cast<unsigned>(cfg.threads)
                                     : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(total));
  std::atomic<int> next{0};
  auto work = [&] {
    for (int k = next++; k < total; k = next++) {
      res.points[static_cast<std::size_t>(k)] = evaluate_point(cfg, k % cfg.grid.nx, k / cfg.grid.nx);
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  return res;
}

std::vector<std::filesystem::path> write_scan_outputs(const std::filesystem::path& dir,
                                                      const ScanConfig& cfg, const ScanResult& res,
                                                      const std::string& config_hash) {
  std::filesystem::create_directories(dir);
  const std::string comment =
      "# config_hash=" + config_hash + " seed=" + std::to_string(cfg.seed);
  std::vector<std::filesystem::path> written;

  const auto full = dir / "map_full.csv";
  write_map(full, comment, "x_mm,y_mm,bz_true_mt,bperp_true_mt,bz_est_mt,bperp_est_mt,flag", res,
            [](const ScanPoint& p) {
              return format9(p.bz_true) + ',' + format9(p.bperp_true) + ',' + format9(p.bz_est) +
                     ',' + format9(p.bperp_est) + ',' + p.flag;
            });
  written.push_back(full);

  for (const auto& kind : cfg.outputs) {
    const auto path = dir / ("map_" + kind + ".csv");
    if (kind == "bz") {
      write_map(path, comment, "x_mm,y_mm,bz_true_mt,bz_est_mt,flag", res, [](const ScanPoint& p) {
        return format9(p.bz_true) + ',' + format9(p.bz_est) + ',' + p.flag;
      });
    } else if (kind == "bperp") {
      write_map(path, comment, "x_mm,y_mm,bperp_true_mt,bperp_est_mt,flag", res,
                [](const ScanPoint& p) {
                  return format9(p.bperp_true) + ',' + format9(p.bperp_est) + ',' + p.flag;
                });
    } else {
      write_map(path, comment, "x_mm,y_mm,bz_err_mt,bperp_err_mt,sigma_bz_mt,sigma_bperp_mt,flag",
                res, [](const ScanPoint& p) {
                  return format9(p.bz_est - p.bz_true) + ',' + format9(p.bperp_est - p.bperp_true) +
                         ',' + format9(p.sigma_bz) + ',' + format9(p.sigma_bperp) + ',' + p.flag;
                });
    }
    written.push_back(path);
  }

  int ok = 0;
  for (const auto& p : res.points) ok += p.flag == "ok";
  const Eigen::Matrix3d R = nv_frame(cfg.magnet.nv_orientation);
  nlohmann::json meta = {
      {"config_hash", config_hash},
      {"seed", cfg.seed},
      {"grid", {{"nx", cfg.grid.nx}, {"ny", cfg.grid.ny},
                {"x_range_mm", {cfg.grid.x_min, cfg.grid.x_max}},
                {"y_range_mm", {cfg.grid.y_min, cfg.grid.y_max}}}},
      {"points_ok", ok},
      {"points_total", static_cast<int>(res.points.size())},
      {"max_abs_error_mt", res.max_abs_error()},
      {"nv_frame",
       {{"convention",
         "z = NV axis; x = lab x projected transverse (lab y if NV axis within 8 deg of lab x); "
         "y = z cross x"},
        {"x_lab", {R(0, 0), R(0, 1), R(0, 2)}},
        {"y_lab", {R(1, 0), R(1, 1), R(1, 2)}},
        {"z_lab", {R(2, 0), R(2, 1), R(2, 2)}}}},
      {"rng",
       {{"generator", "std::mt19937_64"},
        {"stream_seed", "splitmix64 chain over (seed, ix, iy << 20, stream << 40)"},
        {"streams", {{"odmr", 1}, {"precession", 2}}}}},
      {"files", nlohmann::json::array()}};
  for (const auto& w : written) meta["files"].push_back(w.filename().string());
  const auto meta_path = dir / "scan_meta.json";
  std::ofstream os(meta_path, std::ios::binary);
  os << dump9(meta) << '\n';
  written.push_back(meta_path);
  return written;
}

}  // namespace nvmag
