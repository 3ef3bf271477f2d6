#pragma once

// Synthetic magnet scans: a point dipole moved over a grid, with the full
// simulate -> fit -> invert pipeline evaluated at every grid point.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nvmag/estimators.hpp"
#include "nvmag/signal_synth.hpp"
#include "nvmag/spin_model.hpp"

namespace nvmag {

struct DipoleMagnet {
  Eigen::Vector3d position{0.0, 0.0, -3.0};  // mm, lab frame
  Eigen::Vector3d moment{0.0, 0.0, 60.0};    // mT mm^3
  Eigen::Vector3d nv_orientation = Eigen::Vector3d(1.0, 1.0, 1.0).normalized();

  void validate() const;
};

inline constexpr double kNearFieldCutoff = 0.1;  // mm

// Right-handed NV frame: z along nv_orientation, x along the lab x axis
// projected onto the transverse plane (lab y when the NV axis is within
// ~8 degrees of lab x), y = z cross x. Rows are the frame axes in lab
// coordinates.
Eigen::Matrix3d nv_frame(const Eigen::Vector3d& nv_orientation);

// Point-dipole field at `sensor_lab`, expressed in the NV frame.
// Throws TooClose inside the near-field cutoff.
FieldVector dipole_field(const DipoleMagnet& m, const Eigen::Vector3d& sensor_lab);

struct ScanGrid {
  double x_min = -2.0, x_max = 2.0;  // mm, magnet offsets
  double y_min = -2.0, y_max = 2.0;
  int nx = 20;
  int ny = 20;

  double x_at(int ix) const;
  double y_at(int iy) const;
};

struct NoiseSettings {
  bool enabled = false;
  double photon_rate = 3e4;             // counts / s
  double odmr_dwell = 0.1;              // s per sweep point
  double precession_noise_ratio = 0.045;  // per-point sigma / Ic
};

struct OdmrSettings {
  Sweep sweep{2780.0, 2792.0, 601};  // used by simulate-odmr
  double linewidth = kDefaultOdmrLinewidth;
  double contrast = kDefaultOdmrContrast;
  double half_window = 8.0;  // MHz, scan sweeps track the expected doublet
  int points = 241;
};

struct PrecessionSettings {
  PrecessionModel model{1.0, 0.1, 0.1632, 156.0};
  double t_start = 0.0;  // us
  double t_stop = 312.0;
  int n = 625;
  FrequencyGrid grid{0.007, 0.5, 0.0};

  std::vector<double> times() const;
};

struct ScanConfig {
  ScanGrid grid;
  DipoleMagnet magnet;
  NoiseSettings noise;
  std::uint64_t seed = 0;
  std::vector<std::string> outputs{"bz", "bperp", "error"};
  NVParameters nv;
  OdmrSettings odmr;
  PrecessionSettings precession;
  int threads = 0;  // 0 = hardware concurrency

  void validate() const;
};

struct ScanPoint {
  int ix = 0, iy = 0;
  double x_mm = 0.0, y_mm = 0.0;
  double bz_true = 0.0, bperp_true = 0.0;
  double bz_est = 0.0, bperp_est = 0.0;
  double sigma_bz = 0.0, sigma_bperp = 0.0;
  // "ok", warnings joined by '|' (estimates valid), or a failure reason
  // (estimates NaN).
  std::string flag = "ok";
};

struct ScanResult {
  ScanGrid grid;
  std::vector<ScanPoint> points;  // row-major: iy * nx + ix

  const ScanPoint& at(int ix, int iy) const;
  double max_abs_error() const;  // over points with finite estimates
};

// Per-point RNG seed: splitmix64 over (seed, ix, iy, stream).
std::uint64_t point_seed(std::uint64_t seed, int ix, int iy, int stream);

ScanPoint evaluate_point(const ScanConfig& cfg, int ix, int iy);
ScanResult run_scan(const ScanConfig& cfg);

// Writes map_full.csv, one map per requested output kind and scan_meta.json.
// Returns the written paths.
std::vector<std::filesystem::path> write_scan_outputs(const std::filesystem::path& dir,
                                                      const ScanConfig& cfg, const ScanResult& res,
                                                      const std::string& config_hash);

}  // namespace nvmag
