#pragma once

// Run configuration as a nested JSON document. Every key has a default;
// a config file only needs the keys it changes.

#include <cstdint>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "rareforce/dynamics.hpp"
#include "rareforce/model.hpp"
#include "rareforce/optimizer.hpp"

namespace rareforce {

struct PotentialSpec {
  std::string kind = "skew_double_well";  // skew_double_well | free | harmonic
  double tilt = 0.25;                     // skew_double_well
  double stiffness = 1.0;                 // harmonic
  double center = 0.0;                    // harmonic
};

struct AnsatzSpec {
  std::size_t m = 10;
  double width = 0.1;
  std::string width_kind = "variance";  // variance | stddev
  std::string placement = "uniform";
  std::string init = "fill_wells";      // fill_wells | zero

  double stddev() const;
};

struct LadderSpec {
  std::size_t shells = 1;
  std::vector<double> thresholds;  // explicit inner thresholds; overrides shells
};

struct EstimateSpec {
  std::size_t paths = 2000;
  std::string control = "ansatz";  // ansatz | none
};

struct ReferenceSpec {
  double dx = 1e-3;
  std::size_t probes = 20;
};

struct GradcheckSpec {
  double horizon = 1.0;
  double fd_step = 1e-3;
  std::size_t vectors = 3;
  std::size_t batch_size = 2000;
  double coefficient_scale = 0.5;
};

struct CompareSpec {
  double discretization_allowance = 0.0;
};

struct RunConfig {
  PotentialSpec potential;
  double sigma = 1.0;
  double set_lo = -1.1;
  double set_hi = -1.0;
  double domain_lo = -1.5;
  double domain_hi = 2.0;
  std::string boundary = "reflect";
  std::optional<double> x0;  // empty: the local minimum of V farthest from S
  SimConfig sim;
  AnsatzSpec ansatz;
  DescentConfig descent;
  LadderSpec ladder;
  EstimateSpec estimate;
  ReferenceSpec reference;
  GradcheckSpec gradcheck;
  CompareSpec compare;
  std::string output_dir = "out";

  void validate() const;
};

nlohmann::json to_json(const RunConfig& cfg);
/// Missing keys keep their defaults; unknown keys are an error naming every
/// offending path.
RunConfig config_from_json(const nlohmann::json& j);
RunConfig load_config(const std::string& path);

/// Applies "a.b.c=value"; the value is parsed as JSON when possible and
/// taken as a string otherwise.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// FNV-1a of the canonical JSON, excluding keys that cannot change results
/// (workers, output_dir). 16 hex digits.
std::string config_hash(const RunConfig& cfg);

/// Dotted paths present in `doc` but not in `schema`.
std::vector<std::string> unknown_keys(const nlohmann::json& doc, const nlohmann::json& schema);

}  // namespace rareforce
