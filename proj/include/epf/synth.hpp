#pragma once

#include <string>

#include "epf/dataset.hpp"
#include "epf/rng.hpp"

namespace epf::data {

// Deterministic synthetic market scenarios for testing and benchmarking.
//   flat      constant drivers and a constant price, no noise
//   linear    price = 2*load - 1*wind exactly (noise optional)
//   nonlinear linear core plus a kinked wind-suppression response
//   mixed     linear core, milder kink, noise and occasional evening spikes
enum class Scenario { flat, linear, nonlinear, mixed };

Scenario scenario_from_string(const std::string& s);
std::string to_string(Scenario s);

struct ScenarioConfig {
  Scenario scenario = Scenario::mixed;
  double noise_std = -1.0;   // < 0: scenario default
  double spike_prob = -1.0;  // per-day probability, < 0: scenario default
  CivilDate start = {2021, 1, 4};  // a Monday
};

// Generation is fully determined by the rng stream.
HourlyPanel synth_generate(Rng& rng, int days, const ScenarioConfig& cfg);

}  // namespace epf::data
