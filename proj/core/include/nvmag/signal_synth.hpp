#pragma once

// Synthetic measurement records: ODMR sweeps, 15N free-precession traces
// and electron spin-echo traces, plus counting noise.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nvmag/spin_model.hpp"

namespace nvmag {

enum class RecordKind { odmr, precession, echo };

std::string to_string(RecordKind k);
RecordKind record_kind_from_string(const std::string& s);

struct MeasurementRecord {
  std::vector<double> axis;    // MHz for sweeps, us for traces
  std::vector<double> values;  // normalized intensity
  RecordKind kind = RecordKind::odmr;
  nlohmann::json meta = nlohmann::json::object();

  std::size_t size() const { return axis.size(); }
  // Throws InvalidArgument unless axis is strictly increasing, both vectors
  // have the same length and every value is finite.
  void validate() const;
};

struct Sweep {
  double start = 2780.0;  // MHz
  double stop = 2792.0;   // MHz
  int n = 601;
};

struct PrecessionModel {
  double I0 = 1.0;
  double Ic = 0.1;
  double omega_L = 0.1632;  // MHz
  double T0 = 156.0;        // us
};

struct EchoModel {
  double tau_c = 10.0;   // us
  double tau_re = 24.27; // us
  double a = 0.5;
  double b = 0.8;
  double omega1 = 0.163; // MHz
  double omega2 = 3.03;  // MHz
};

// Placeholder ODMR line-shape defaults; not measured values.
inline constexpr double kDefaultOdmrContrast = 0.15;
inline constexpr double kDefaultOdmrLinewidth = 0.8;  // MHz, FWHM

std::vector<double> linspace(double start, double stop, int n);

// Unit-peak Lorentzian with full width at half maximum `fwhm`.
double lorentzian(double f, double center, double fwhm);

double odmr_value(double f, std::span<const double> centers, double linewidth, double contrast,
                  double baseline = 1.0);
double precession_value(const PrecessionModel& m, double t);
double echo_envelope(const EchoModel& m, double tau);
double echo_value(const EchoModel& m, double tau);

// ODMR dips at the exact transition frequencies that fall inside the sweep.
// Throws EmptySweep when none do.
MeasurementRecord synth_odmr(const FieldVector& B, const NVParameters& p, const Sweep& sweep,
                             double linewidth = kDefaultOdmrLinewidth,
                             double contrast = kDefaultOdmrContrast);

// Same line shape with caller-supplied centers (those inside the sweep).
MeasurementRecord synth_odmr_lines(std::span<const double> centers, const Sweep& sweep,
                                   double linewidth = kDefaultOdmrLinewidth,
                                   double contrast = kDefaultOdmrContrast);

MeasurementRecord synth_precession(const PrecessionModel& model, std::span<const double> times);

// meta["envelope_exceeds_one"] is set when the revival term pushes the
// envelope above 1, where values can leave [0, 1].
MeasurementRecord synth_echo(const EchoModel& model, std::span<const double> taus);

// Poisson counting noise with mean v * photon_rate * dwell, rescaled back to
// normalized intensity. Generator: std::mt19937_64 seeded with `seed`.
MeasurementRecord add_shot_noise(const MeasurementRecord& rec, double photon_rate, double dwell,
                                 std::uint64_t seed);

// Additive Gaussian noise of fixed standard deviation.
MeasurementRecord add_gaussian_noise(const MeasurementRecord& rec, double sigma,
                                     std::uint64_t seed);

}  // namespace nvmag
