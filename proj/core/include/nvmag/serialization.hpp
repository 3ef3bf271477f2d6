#pragma once

// JSON and CSV forms of the toolkit's data types. Numbers in text output are
// printed with 9 significant digits.

#include <iosfwd>
#include <string>

#include <nlohmann/json.hpp>

#include "nvmag/estimators.hpp"
#include "nvmag/inversion.hpp"
#include "nvmag/sensitivity.hpp"
#include "nvmag/signal_synth.hpp"
#include "nvmag/spin_model.hpp"

namespace nvmag {

std::string format9(double v);

// Dumps JSON with every floating-point value rounded to 9 significant digits.
std::string dump9(const nlohmann::json& j, int indent = 2);

nlohmann::json to_json(const NVParameters& p);
nlohmann::json to_json(const FieldVector& b);
nlohmann::json to_json(const TransitionSet& ts);
nlohmann::json to_json(const MeasurementRecord& rec);
nlohmann::json to_json(const FitResult& fit);
nlohmann::json to_json(const AxialTransverse& at);
nlohmann::json to_json(const CandidateSet& cs);
nlohmann::json to_json(const NoiseBudget& b);

MeasurementRecord record_from_json(const nlohmann::json& j);

// Two columns with a unit-bearing header, e.g. "frequency_mhz,intensity".
void write_record_csv(std::ostream& os, const MeasurementRecord& rec);
MeasurementRecord read_record_csv(std::istream& is, RecordKind kind);

// 64-bit FNV-1a, hex encoded.
std::string fnv1a_hex(const std::string& bytes);

}  // namespace nvmag
