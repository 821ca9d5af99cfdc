#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "freqscope/error.hpp"
#include "freqscope/profile.hpp"
#include "freqscope/trace.hpp"

namespace freqscope {

// Fraction of non-idle time per tick.
struct WorkloadTrace {
  std::vector<double> loads;
  int tick_ms = 10;

  void validate() const {
    if (loads.empty()) throw InvalidArgument("workload has no ticks");
    if (tick_ms < 1) throw InvalidArgument("workload tick_ms must be >= 1");
    for (double l : loads) {
      if (!(l >= 0.0 && l <= 1.0)) throw InvalidArgument("workload load outside [0, 1]");
    }
  }
};

// Android interactive governor tunables.
struct InteractiveParams {
  std::int64_t hispeed_freq_khz = 0;  // 0: lowest P-state >= 1.2 GHz
  int boostpulse_duration_ms = 80;
  int min_sample_time_ms = 20;
  double load_trigger = 0.3;
};

// Leaky-bucket stand-in for the hardware's thermal/power budget.
struct TurboParams {
  bool enabled = false;
  std::int64_t ceiling_khz = 0;  // 0: profile's effective maximum
  double budget_gain_per_idle_tick = 0.05;
  double budget_cost_per_boost_tick = 0.05;
  double idle_load = 0.1;  // ticks below this regain budget
};

struct SimConfig {
  DeviceProfile profile;
  Governor governor = Governor::kOndemand;
  InteractiveParams interactive;
  std::int64_t conservative_step_khz = 100'000;
  std::optional<std::int64_t> set_speed_khz;  // userspace only
  TurboParams turbo;
  std::uint64_t seed = 0;
  bool allow_unsupported_governor = false;

  // Defaults that depend on the profile: turbo follows the profile's boost flag,
  // governor is the profile's default.
  static SimConfig for_profile(const DeviceProfile& p) {
    SimConfig c;
    c.profile = p;
    c.governor = p.default_governor;
    c.turbo.enabled = p.turbo_boost;
    return c;
  }

  static SimConfig for_profile(const DeviceProfile& p, Governor g) {
    auto c = for_profile(p);
    c.governor = g;
    return c;
  }

  std::int64_t hispeed_khz() const {
    if (interactive.hispeed_freq_khz != 0) return interactive.hispeed_freq_khz;
    auto it = std::lower_bound(profile.pstates.begin(), profile.pstates.end(), 1'200'000);
    return it == profile.pstates.end() ? profile.max_freq_khz : *it;
  }

  std::int64_t turbo_ceiling_khz() const {
    return turbo.ceiling_khz != 0 ? turbo.ceiling_khz : profile.effective_max_khz();
  }

  // Highest frequency reachable at all under this configuration.
  std::int64_t upper_bound_khz() const {
    return turbo.enabled ? turbo_ceiling_khz() : profile.max_freq_khz;
  }

  void validate() const {
    profile.validate();
    if (!allow_unsupported_governor && !profile.supports(governor)) {
      throw InvalidArgument("governor '" + std::string(to_string(governor)) +
                            "' is not available on " + profile.name);
    }
    if (governor == Governor::kUserspace && !set_speed_khz) {
      throw InvalidArgument("userspace governor requires set_speed_khz");
    }
    if (set_speed_khz && (*set_speed_khz < profile.min_freq_khz ||
                          *set_speed_khz > profile.max_freq_khz)) {
      throw InvalidArgument("set_speed_khz outside the profile range");
    }
    if (governor == Governor::kInteractive) {
      if (!profile.is_pstate(hispeed_khz())) {
        throw InvalidArgument("hispeed_freq is not a P-state");
      }
      if (interactive.boostpulse_duration_ms < 0 || interactive.min_sample_time_ms < 0) {
        throw InvalidArgument("interactive timings must be non-negative");
      }
      if (!(interactive.load_trigger > 0.0 && interactive.load_trigger <= 1.0)) {
        throw InvalidArgument("load_trigger must be in (0, 1]");
      }
    }
    if (conservative_step_khz <= 0) throw InvalidArgument("conservative step must be > 0");
    if (turbo.enabled) {
      if (turbo_ceiling_khz() > profile.max_freq_khz) {
        throw InvalidArgument("turbo ceiling above max_freq");
      }
      if (turbo.budget_cost_per_boost_tick < 0 || turbo.budget_gain_per_idle_tick < 0) {
        throw InvalidArgument("turbo budget rates must be non-negative");
      }
    }
  }
};

struct GovernorState {
  Governor governor = Governor::kOndemand;
  std::int64_t current_freq_khz = 0;
  std::int64_t set_speed_khz = 0;
  double pelt_load = 0.0;
  int boost_remaining_ms = 0;
  int ms_since_change = 0;
  double turbo_budget = 1.0;
  bool triggered = false;  // interactive: this tick hit load_trigger
};

inline GovernorState initial_state(const SimConfig& cfg) {
  GovernorState s;
  s.governor = cfg.governor;
  s.current_freq_khz = cfg.profile.min_freq_khz;
  s.set_speed_khz = cfg.set_speed_khz.value_or(0);
  s.ms_since_change = cfg.interactive.min_sample_time_ms;
  return s;
}

namespace detail {

inline double ondemand_target(const DeviceProfile& p, double load) {
  return static_cast<double>(p.min_freq_khz) +
         load * static_cast<double>(p.max_freq_khz - p.min_freq_khz);
}

// Frequency cap for this tick: the turbo ceiling while budget lasts, base
// frequency once it is spent.
inline std::int64_t turbo_cap(const SimConfig& cfg, const GovernorState& s) {
  if (!cfg.turbo.enabled) return cfg.profile.max_freq_khz;
  if (cfg.profile.base_freq_khz && s.turbo_budget < cfg.turbo.budget_cost_per_boost_tick) {
    return *cfg.profile.base_freq_khz;
  }
  return cfg.turbo_ceiling_khz();
}

inline std::int64_t conservative_walk(const DeviceProfile& p, std::int64_t current,
                                      std::int64_t target, std::int64_t step) {
  if (target == current) return current;
  const auto& ps = p.pstates;
  auto idx = static_cast<std::ptrdiff_t>(p.index_of(current));
  const std::ptrdiff_t dir = target > current ? 1 : -1;
  std::ptrdiff_t next = idx + dir;  // always at least one P-state
  while (true) {
    const std::ptrdiff_t cand = next + dir;
    if (cand < 0 || cand >= static_cast<std::ptrdiff_t>(ps.size())) break;
    if (std::abs(ps[cand] - current) > step) break;
    if ((dir > 0 && ps[cand] > target) || (dir < 0 && ps[cand] < target)) break;
    next = cand;
  }
  return ps[next];
}

}  // namespace detail

// Advances one tick under `load` and returns the next state. The frequency in
// the returned state is the reading for this tick.
inline GovernorState step_governor(const GovernorState& state, double load,
                                   const SimConfig& cfg, int tick_ms) {
  if (!(load >= 0.0 && load <= 1.0)) throw InvalidArgument("load outside [0, 1]");
  const auto& p = cfg.profile;
  GovernorState s = state;
  s.triggered = false;
  s.ms_since_change += tick_ms;

  const std::int64_t lo = p.min_freq_khz;
  const std::int64_t cap = detail::turbo_cap(cfg, s);
  std::int64_t next = s.current_freq_khz;

  switch (cfg.governor) {
    case Governor::kPerformance:
      next = cfg.upper_bound_khz();
      break;
    case Governor::kPowersave:
      // intel_pstate's powersave is a load-following policy, not a pin.
      if (p.driver == ScalingDriver::kIntelPstate) {
        next = p.quantize(detail::ondemand_target(p, load), lo, cap);
      } else {
        next = lo;
      }
      break;
    case Governor::kUserspace:
      if (s.set_speed_khz <= 0) throw InvalidArgument("userspace governor without set_speed");
      next = p.quantize(static_cast<double>(s.set_speed_khz), lo, cap);
      break;
    case Governor::kOndemand:
      next = p.quantize(detail::ondemand_target(p, load), lo, cap);
      break;
    case Governor::kConservative: {
      const auto target = p.quantize(detail::ondemand_target(p, load), lo, cap);
      next = detail::conservative_walk(p, s.current_freq_khz, target,
                                       cfg.conservative_step_khz);
      break;
    }
    case Governor::kSchedutil: {
      const double alpha = 1.0 - std::exp2(-static_cast<double>(tick_ms) / 32.0);
      s.pelt_load = alpha * load + (1.0 - alpha) * s.pelt_load;
      const double util = std::min(1.0, 1.25 * s.pelt_load);
      next = p.quantize(static_cast<double>(lo) +
                            util * static_cast<double>(p.max_freq_khz - lo),
                        lo, cap);
      break;
    }
    case Governor::kInteractive: {
      const auto& ip = cfg.interactive;
      s.boost_remaining_ms = std::max(0, s.boost_remaining_ms - tick_ms);
      s.triggered = load >= ip.load_trigger;
      if (s.triggered) s.boost_remaining_ms = ip.boostpulse_duration_ms;
      double target = detail::ondemand_target(p, load);
      if (s.boost_remaining_ms > 0) {
        target = std::max(target, static_cast<double>(cfg.hispeed_khz()));
      }
      const auto quantized = p.quantize(target, lo, std::max(cap, cfg.hispeed_khz()));
      next = s.current_freq_khz;
      if (quantized != s.current_freq_khz) {
        // Input-boost ramps are immediate; every other change waits out
        // min_sample_time since the previous one.
        const bool boost_ramp = s.triggered && quantized > s.current_freq_khz;
        if (boost_ramp || s.ms_since_change >= ip.min_sample_time_ms) next = quantized;
      }
      break;
    }
  }

  if (next != s.current_freq_khz) s.ms_since_change = 0;
  s.current_freq_khz = next;

  const bool pinned = cfg.governor == Governor::kPerformance ||
                      (cfg.governor == Governor::kPowersave &&
                       p.driver != ScalingDriver::kIntelPstate);
  if (cfg.turbo.enabled && !pinned) {
    if (p.base_freq_khz && next > *p.base_freq_khz) {
      s.turbo_budget -= cfg.turbo.budget_cost_per_boost_tick;
    }
    if (load < cfg.turbo.idle_load) s.turbo_budget += cfg.turbo.budget_gain_per_idle_tick;
    s.turbo_budget = std::clamp(s.turbo_budget, 0.0, 1.0);
  }
  return s;
}

inline FrequencyTrace simulate(const WorkloadTrace& workload, const SimConfig& cfg) {
  workload.validate();
  cfg.validate();
  FrequencyTrace out;
  out.interval_ms = workload.tick_ms;
  out.device = cfg.profile.name;
  out.samples.reserve(workload.loads.size());
  GovernorState s = initial_state(cfg);
  for (double load : workload.loads) {
    s = step_governor(s, load, cfg, workload.tick_ms);
    out.samples.push_back(s.current_freq_khz);
  }
  return out;
}

}  // namespace freqscope
