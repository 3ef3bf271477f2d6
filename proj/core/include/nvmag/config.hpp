#pragma once

// Versioned JSON configuration shared by every CLI subcommand. Unknown keys
// are rejected at every level.

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "nvmag/scan.hpp"
#include "nvmag/sensitivity.hpp"

namespace nvmag {

inline constexpr int kConfigVersion = 1;

struct EchoSettings {
  EchoModel model;
  double tau_start = 0.0;  // us
  double tau_stop = 40.0;
  int n = 2001;
  double noise_sigma = 0.01;  // additive, used when noise is enabled

  std::vector<double> taus() const;
};

struct Config {
  int version = kConfigVersion;
  ScanConfig scan;
  FieldVector field{2.426, 0.0, 3.129};
  EchoSettings echo;
  NoiseBudget budget;
};

Config parse_config(const nlohmann::json& j);
Config load_config(const std::filesystem::path& path);
nlohmann::json to_json(const Config& c);

// FNV-1a of the canonical (re-serialized) configuration.
std::string config_hash(const Config& c);

}  // namespace nvmag
