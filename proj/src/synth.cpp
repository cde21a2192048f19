#include "epf/synth.hpp"

#include <cmath>

#include "epf/error.hpp"

namespace epf::data {

Scenario scenario_from_string(const std::string& s) {
  if (s == "flat") return Scenario::flat;
  if (s == "linear") return Scenario::linear;
  if (s == "nonlinear") return Scenario::nonlinear;
  if (s == "mixed") return Scenario::mixed;
  fail(ErrorCode::ParseError, "unknown scenario '" + s + "'");
}

std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::flat: return "flat";
    case Scenario::linear: return "linear";
    case Scenario::nonlinear: return "nonlinear";
    case Scenario::mixed: return "mixed";
  }
  return "?";
}

namespace {

constexpr double kPi = 3.14159265358979323846;

double relu(double x) { return x > 0.0 ? x : 0.0; }

double clamp(double x, double lo, double hi) { return x < lo ? lo : (x > hi ? hi : x); }

// Two-peak intraday demand profile, mean roughly 1.
double load_shape(int s) {
  return 1.0 + 0.16 * std::sin(2.0 * kPi * (s - 9.0) / 24.0) +
         0.06 * std::sin(4.0 * kPi * (s - 2.0) / 24.0);
}

double solar_bell(int s) {
  if (s < 6 || s > 19) return 0.0;
  const double x = std::sin(kPi * (s - 6.0) / 13.0);
  return x > 0.0 ? std::pow(x, 1.5) : 0.0;
}

struct ScenarioDefaults {
  double noise;
  double spike_prob;
};

ScenarioDefaults defaults_for(Scenario s) {
  switch (s) {
    case Scenario::flat: return {0.0, 0.0};
    case Scenario::linear: return {0.0, 0.0};
    case Scenario::nonlinear: return {2.0, 0.0};
    case Scenario::mixed: return {2.0, 0.01};
  }
  return {0.0, 0.0};
}

}  // namespace

HourlyPanel synth_generate(Rng& rng, int days, const ScenarioConfig& cfg) {
  if (days < 30) fail(ErrorCode::RangeError, "synthetic panels need at least 30 days");

  const ScenarioDefaults def = defaults_for(cfg.scenario);
  const double noise_std = cfg.noise_std >= 0.0 ? cfg.noise_std : def.noise;
  const double spike_prob = cfg.spike_prob >= 0.0 ? cfg.spike_prob : def.spike_prob;
  const bool flat = cfg.scenario == Scenario::flat;

  HourlyPanel p;
  const std::size_t n = static_cast<std::size_t>(days) * 24;
  p.times.reserve(n);
  p.price.reserve(n);

  const std::int64_t day0 = days_from_civil(cfg.start);

  // daily state
  double load_level = 0.0;
  double wind_level = 14.0;
  double gas = 25.0, coal = 90.0, oil = 70.0, eua = 45.0;

  for (int t = 0; t < days; ++t) {
    const CivilDate date = civil_from_days(day0 + t);
    const int wd = weekday_from_days(day0 + t);
    const int doy = static_cast<int>(day0 + t - days_from_civil(CivilDate{date.year, 1, 1}));

    double wind_phase = 0.0, solar_amp = 5.0, weekend = 1.0, season = 1.0;
    double spike_mag = 0.0;
    int spike_hour = 18;
    if (!flat) {
      load_level = 0.7 * load_level + rng.normal() * 1.0;
      wind_level = clamp(0.82 * wind_level + 2.5 + rng.normal() * 3.5, 0.3, 45.0);
      gas *= std::exp(0.010 * rng.normal());
      coal *= std::exp(0.008 * rng.normal());
      oil *= std::exp(0.008 * rng.normal());
      eua *= std::exp(0.008 * rng.normal());
      wind_phase = rng.uniform(0.0, 24.0);
      season = 1.0 + 0.08 * std::cos(2.0 * kPi * (doy - 15.0) / 365.0);
      solar_amp = 8.0 * (1.0 + 0.75 * std::cos(2.0 * kPi * (doy - 172.0) / 365.0)) *
                  std::fabs(1.0 + 0.3 * rng.normal());
      weekend = (wd >= 5) ? 0.88 : 1.0;
      if (spike_prob > 0.0 && rng.uniform() < spike_prob) {
        spike_hour = 17 + static_cast<int>(rng.uniform_int(4));
        spike_mag = rng.uniform(60.0, 200.0);
      }
    }

    for (int s = 0; s < 24; ++s) {
      Timestamp ts;
      ts.date = date;
      ts.hour = s;
      ts.offset_min = 0;
      p.times.push_back(ts);

      double load, wind, solar;
      if (flat) {
        load = 55.0;
        wind = 10.0;
        solar = 5.0;
      } else {
        load = 55.0 * weekend * season * load_shape(s) + load_level + rng.normal() * 0.3;
        wind = clamp(wind_level * (1.0 + 0.15 * std::sin(2.0 * kPi * (s + wind_phase) / 24.0)) +
                         rng.normal() * 0.6,
                     0.05, 60.0);
        solar = solar_amp * solar_bell(s);
      }

      double price = 0.0;
      switch (cfg.scenario) {
        case Scenario::flat:
          price = 50.0;
          break;
        case Scenario::linear:
          price = 2.0 * load - 1.0 * wind;
          break;
        case Scenario::nonlinear:
          price = 2.0 * load - 1.0 * wind - 2.5 * relu(wind - 18.0) + 0.25 * gas;
          break;
        case Scenario::mixed:
          price = 2.0 * load - 1.0 * wind - 0.6 * solar + 0.3 * gas + 0.5 * eua -
                  1.8 * relu(wind - 20.0);
          break;
      }
      if (noise_std > 0.0) price += noise_std * rng.normal();
      if (spike_mag > 0.0) {
        const double d = s - spike_hour;
        price += spike_mag * std::exp(-0.5 * d * d);
      }

      p.price.push_back(price);
      p.load_fc.push_back(load);
      p.wind_on.push_back(0.8 * wind);
      p.wind_off.push_back(0.2 * wind);
      p.solar_fc.push_back(solar);
      p.coal.push_back(coal);
      p.gas.push_back(gas);
      p.oil.push_back(oil);
      p.eua.push_back(eua);
    }
  }
  return p;
}

}  // namespace epf::data
