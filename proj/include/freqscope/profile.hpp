#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "freqscope/error.hpp"

namespace freqscope {

enum class Governor {
  kPerformance,
  kPowersave,
  kUserspace,
  kOndemand,
  kConservative,
  kInteractive,
  kSchedutil,
};

inline constexpr std::array<std::string_view, 7> kGovernorNames = {
    "performance", "powersave",   "userspace", "ondemand",
    "conservative", "interactive", "schedutil"};

inline std::string_view to_string(Governor g) {
  return kGovernorNames[static_cast<std::size_t>(g)];
}

inline Governor parse_governor(std::string_view name) {
  for (std::size_t i = 0; i < kGovernorNames.size(); ++i) {
    if (kGovernorNames[i] == name) return static_cast<Governor>(i);
  }
  throw InvalidArgument("unknown governor '" + std::string(name) + "'");
}

enum class ScalingDriver { kIntelPstate, kAcpiCpufreq, kMsm };

inline std::string_view to_string(ScalingDriver d) {
  switch (d) {
    case ScalingDriver::kIntelPstate: return "intel_pstate";
    case ScalingDriver::kAcpiCpufreq: return "acpi-cpufreq";
    case ScalingDriver::kMsm: return "msm";
  }
  return "unknown";
}

// The cpufreq attribute set of one policy on one machine. All frequencies in
// kHz, as sysfs reports them.
struct DeviceProfile {
  std::string name;
  std::int64_t min_freq_khz = 0;
  std::int64_t max_freq_khz = 0;
  std::optional<std::int64_t> base_freq_khz;
  std::vector<std::int64_t> pstates;
  Governor default_governor = Governor::kOndemand;
  std::vector<Governor> available_governors;
  ScalingDriver driver = ScalingDriver::kAcpiCpufreq;
  bool turbo_boost = false;
  std::optional<std::int64_t> turbo_ceiling_khz;
  std::int64_t transition_latency_ns = 0;

  void validate() const {
    auto fail = [&](const std::string& why) {
      throw InvalidArgument("profile '" + name + "': " + why);
    };
    if (pstates.size() < 2) fail("needs at least two P-states");
    for (std::size_t i = 1; i < pstates.size(); ++i) {
      if (pstates[i] <= pstates[i - 1]) fail("P-states not strictly ascending");
    }
    if (pstates.front() != min_freq_khz) fail("min_freq is not the first P-state");
    if (pstates.back() != max_freq_khz) fail("max_freq is not the last P-state");
    if (base_freq_khz &&
        (*base_freq_khz < min_freq_khz || *base_freq_khz > max_freq_khz)) {
      fail("base_freq outside [min_freq, max_freq]");
    }
    if (turbo_ceiling_khz) {
      const std::int64_t floor = base_freq_khz.value_or(min_freq_khz);
      if (*turbo_ceiling_khz <= floor || *turbo_ceiling_khz > max_freq_khz) {
        fail("turbo ceiling outside (base_freq, max_freq]");
      }
    }
    if (!supports(default_governor)) fail("default governor not available");
  }

  bool supports(Governor g) const {
    return std::find(available_governors.begin(), available_governors.end(), g) !=
           available_governors.end();
  }

  // Upper end of the range the hardware actually reaches: the empirical turbo
  // ceiling when one is known, max_freq otherwise.
  std::int64_t effective_max_khz() const {
    return turbo_ceiling_khz.value_or(max_freq_khz);
  }

  bool is_pstate(std::int64_t khz) const {
    return std::binary_search(pstates.begin(), pstates.end(), khz);
  }

  // Nearest P-state to `khz` among those in [lo, hi]; ties round up. Falls back
  // to the P-state nearest the band when the band holds none.
  std::int64_t quantize(double khz, std::int64_t lo, std::int64_t hi) const {
    auto first = std::lower_bound(pstates.begin(), pstates.end(), lo);
    auto last = std::upper_bound(pstates.begin(), pstates.end(), hi);
    if (first >= last) {
      return first == pstates.end() ? pstates.back() : *first;
    }
    std::int64_t best = *first;
    double best_dist = std::abs(khz - static_cast<double>(best));
    for (auto it = first + 1; it != last; ++it) {
      const double d = std::abs(khz - static_cast<double>(*it));
      if (d <= best_dist) {  // ascending scan: equal distance keeps the higher
        best = *it;
        best_dist = d;
      }
      if (static_cast<double>(*it) > khz) break;
    }
    return best;
  }

  std::int64_t quantize(double khz) const {
    return quantize(khz, min_freq_khz, max_freq_khz);
  }

  std::size_t index_of(std::int64_t khz) const {
    auto it = std::lower_bound(pstates.begin(), pstates.end(), khz);
    if (it == pstates.end() || *it != khz) {
      throw InvalidArgument("frequency " + std::to_string(khz) +
                            " kHz is not a P-state of " + name);
    }
    return static_cast<std::size_t>(it - pstates.begin());
  }
};

// min, min+step, ... up to and including max (max appended if off-grid).
inline std::vector<std::int64_t> stepped_pstates(std::int64_t min_khz,
                                                 std::int64_t max_khz,
                                                 std::int64_t step_khz) {
  std::vector<std::int64_t> out;
  for (std::int64_t f = min_khz; f < max_khz; f += step_khz) out.push_back(f);
  out.push_back(max_khz);
  return out;
}

// `count` evenly spaced values from lo to hi, rounded to whole MHz.
inline std::vector<std::int64_t> spaced_pstates(std::int64_t lo_khz,
                                                std::int64_t hi_khz,
                                                std::size_t count) {
  std::vector<std::int64_t> out;
  const double step = static_cast<double>(hi_khz - lo_khz) / static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i) {
    const double khz = static_cast<double>(lo_khz) + step * static_cast<double>(i);
    out.push_back(std::llround(khz / 1000.0) * 1000);
  }
  return out;
}

namespace profiles {

inline DeviceProfile comet_lake() {
  DeviceProfile p;
  p.name = "comet_lake";
  p.min_freq_khz = 400'000;
  p.max_freq_khz = 4'900'000;
  p.base_freq_khz = 1'800'000;
  p.pstates = stepped_pstates(400'000, 4'900'000, 100'000);
  p.default_governor = Governor::kPowersave;
  p.available_governors = {Governor::kPerformance, Governor::kPowersave};
  p.driver = ScalingDriver::kIntelPstate;
  p.turbo_boost = true;
  p.turbo_ceiling_khz = 3'600'000;  // observed under browser load
  p.transition_latency_ns = 20'000;
  return p;
}

inline DeviceProfile tiger_lake() {
  DeviceProfile p;
  p.name = "tiger_lake";
  p.min_freq_khz = 400'000;
  p.max_freq_khz = 4'700'000;
  p.base_freq_khz = 2'800'000;
  p.pstates = stepped_pstates(400'000, 4'700'000, 100'000);
  p.default_governor = Governor::kPowersave;
  p.available_governors = {Governor::kPerformance, Governor::kPowersave};
  p.driver = ScalingDriver::kIntelPstate;
  p.turbo_boost = true;
  p.transition_latency_ns = 20'000;
  return p;
}

inline DeviceProfile ryzen5() {
  DeviceProfile p;
  p.name = "ryzen5";
  p.min_freq_khz = 1'400'000;
  p.max_freq_khz = 4'060'000;
  p.base_freq_khz = 1'700'000;
  p.pstates = stepped_pstates(1'400'000, 4'060'000, 100'000);
  p.default_governor = Governor::kOndemand;
  p.available_governors = {Governor::kOndemand,  Governor::kPowersave,
                           Governor::kPerformance, Governor::kUserspace,
                           Governor::kConservative, Governor::kSchedutil};
  p.driver = ScalingDriver::kAcpiCpufreq;
  p.turbo_boost = true;
  p.transition_latency_ns = 10'000;
  return p;
}

// 23 operating points between the two levels the big cores sit at most of the
// time (806 MHz idle, 2361 MHz loaded).
inline DeviceProfile cortex_a73() {
  DeviceProfile p;
  p.name = "cortex_a73";
  p.pstates = spaced_pstates(806'000, 2'361'000, 23);
  p.min_freq_khz = p.pstates.front();
  p.max_freq_khz = p.pstates.back();
  p.default_governor = Governor::kInteractive;
  p.available_governors = {Governor::kInteractive, Governor::kConservative,
                           Governor::kOndemand,    Governor::kUserspace,
                           Governor::kPowersave,   Governor::kPerformance};
  p.driver = ScalingDriver::kMsm;
  p.turbo_boost = false;
  p.transition_latency_ns = 80'000;
  return p;
}

}  // namespace profiles

inline std::vector<DeviceProfile> builtin_profiles() {
  return {profiles::comet_lake(), profiles::tiger_lake(), profiles::ryzen5(),
          profiles::cortex_a73()};
}

inline std::optional<DeviceProfile> find_profile(std::string_view name) {
  for (auto& p : builtin_profiles()) {
    if (p.name == name) return p;
  }
  return std::nullopt;
}

inline DeviceProfile profile_by_name(std::string_view name) {
  auto p = find_profile(name);
  if (!p) throw InvalidArgument("unknown device profile '" + std::string(name) + "'");
  return *p;
}

}  // namespace freqscope
