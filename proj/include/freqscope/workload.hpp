#pragma once

#include <algorithm>
#include <cstdint>
#include <variant>
#include <vector>

#include "freqscope/error.hpp"
#include "freqscope/governor.hpp"
#include "freqscope/random.hpp"

namespace freqscope {

// A page load: a heavy render phase followed by short script/layout bursts.
// The whole load skeleton is a function of (site_salt, class_id); the
// measurement seed only draws the additive Gaussian jitter, which stands in
// for background activity and run-to-run variation.
struct WebsiteParams {
  std::uint64_t class_id = 0;
  std::uint64_t site_salt = 0;
  std::size_t ticks = 1000;
  int tick_ms = 10;
  int render_min_ticks = 100;
  int render_max_ticks = 200;
  int bursts_min = 15;
  int bursts_max = 25;
  int burst_width_min = 2;
  int burst_width_max = 6;
  double burst_height_min = 0.4;
  double burst_height_max = 1.0;
  double idle_level = 0.02;
  double jitter_sigma = 0.4;
};

// Key presses as short load pulses. Pulse widths of 5-9 ticks at 20 ms give
// 8-12 elevated readings once the interactive governor's 80 ms hold is added.
struct KeystrokeWorkloadParams {
  std::vector<std::int64_t> press_times_ms;
  std::int64_t duration_ms = 5000;
  int tick_ms = 20;
  int pulse_ticks_min = 5;
  int pulse_ticks_max = 9;
  double pulse_load_min = 0.35;
  double pulse_load_max = 0.5;
  double idle_max = 0.02;
};

struct IdleParams {
  std::size_t ticks = 1000;
  int tick_ms = 10;
  double max_load = 0.02;
};

struct NoiseParams {
  std::size_t ticks = 1000;
  int tick_ms = 10;
  double bursts_per_second = 2.0;
  int width_min = 2;
  int width_max = 20;
  double idle_max = 0.02;
};

using WorkloadParams =
    std::variant<WebsiteParams, KeystrokeWorkloadParams, IdleParams, NoiseParams>;

namespace detail {

inline void fill_idle(std::vector<double>& loads, Rng& rng, double max_load) {
  for (auto& l : loads) l = rng.uniform(0.0, max_load);
}

inline WorkloadTrace website_workload(const WebsiteParams& p, std::uint64_t seed) {
  if (p.ticks < static_cast<std::size_t>(p.render_max_ticks + p.burst_width_max + 16) ||
      p.tick_ms < 1 || p.render_min_ticks < 1 || p.render_min_ticks > p.render_max_ticks ||
      p.bursts_min < 0 || p.bursts_min > p.bursts_max || p.burst_width_min < 1 ||
      p.burst_width_min > p.burst_width_max || p.jitter_sigma < 0) {
    throw InvalidArgument("invalid website workload parameters");
  }
  std::vector<double> skeleton(p.ticks, p.idle_level);
  Rng shape(mix_seed({0x5157u, p.site_salt, p.class_id}));

  const auto render = static_cast<std::size_t>(
      shape.uniform_int(p.render_min_ticks, p.render_max_ticks));
  for (std::size_t t = 0; t < render;) {
    const auto seg = static_cast<std::size_t>(shape.uniform_int(5, 20));
    const double level = shape.uniform(0.6, 1.0);
    for (std::size_t k = 0; k < seg && t < render; ++k, ++t) skeleton[t] = level;
  }
  const auto bursts = shape.uniform_int(p.bursts_min, p.bursts_max);
  const auto last_start = static_cast<std::int64_t>(p.ticks) - p.burst_width_max - 1;
  for (std::int64_t b = 0; b < bursts; ++b) {
    const auto start = shape.uniform_int(static_cast<std::int64_t>(render), last_start);
    const auto width = shape.uniform_int(p.burst_width_min, p.burst_width_max);
    const double height = shape.uniform(p.burst_height_min, p.burst_height_max);
    for (std::int64_t k = 0; k < width; ++k) {
      auto& v = skeleton[static_cast<std::size_t>(start + k)];
      v = std::max(v, height);
    }
  }

  WorkloadTrace w;
  w.tick_ms = p.tick_ms;
  w.loads.resize(p.ticks);
  Rng jitter(mix_seed({0x717u, p.site_salt, p.class_id, seed}));
  for (std::size_t t = 0; t < p.ticks; ++t) {
    w.loads[t] = std::clamp(skeleton[t] + jitter.normal(0.0, p.jitter_sigma), 0.0, 1.0);
  }
  return w;
}

inline WorkloadTrace keystroke_workload(const KeystrokeWorkloadParams& p,
                                        std::uint64_t seed) {
  if (p.tick_ms < 1 || p.duration_ms < p.tick_ms || p.pulse_ticks_min < 1 ||
      p.pulse_ticks_min > p.pulse_ticks_max || p.pulse_load_min > p.pulse_load_max) {
    throw InvalidArgument("invalid keystroke workload parameters");
  }
  for (std::size_t i = 0; i < p.press_times_ms.size(); ++i) {
    const auto t = p.press_times_ms[i];
    if (t < 0 || t >= p.duration_ms) {
      throw InvalidArgument("press time " + std::to_string(t) + " ms out of range");
    }
    if (i > 0 && t <= p.press_times_ms[i - 1]) {
      throw InvalidArgument("press times must be strictly increasing");
    }
  }
  WorkloadTrace w;
  w.tick_ms = p.tick_ms;
  w.loads.resize(static_cast<std::size_t>(p.duration_ms / p.tick_ms));
  Rng rng(mix_seed({0x4b3u, seed}));
  fill_idle(w.loads, rng, p.idle_max);
  for (auto press : p.press_times_ms) {
    const auto first = static_cast<std::size_t>(press / p.tick_ms);
    const auto width = static_cast<std::size_t>(rng.uniform_int(p.pulse_ticks_min, p.pulse_ticks_max));
    const double level = rng.uniform(p.pulse_load_min, p.pulse_load_max);
    for (std::size_t k = first; k < first + width && k < w.loads.size(); ++k) {
      w.loads[k] = std::max(w.loads[k], level);
    }
  }
  return w;
}

inline WorkloadTrace noise_workload(const NoiseParams& p, std::uint64_t seed) {
  if (p.ticks == 0 || p.tick_ms < 1 || p.bursts_per_second < 0 || p.width_min < 1 ||
      p.width_min > p.width_max) {
    throw InvalidArgument("invalid noise workload parameters");
  }
  WorkloadTrace w;
  w.tick_ms = p.tick_ms;
  w.loads.resize(p.ticks);
  Rng rng(mix_seed({0x401u, seed}));
  fill_idle(w.loads, rng, p.idle_max);
  const double start_prob = p.bursts_per_second * p.tick_ms / 1000.0;
  for (std::size_t t = 0; t < p.ticks; ++t) {
    if (!rng.bernoulli(start_prob)) continue;
    const auto width = static_cast<std::size_t>(rng.uniform_int(p.width_min, p.width_max));
    const double level = rng.uniform(0.1, 1.0);
    for (std::size_t k = t; k < t + width && k < p.ticks; ++k) {
      w.loads[k] = std::max(w.loads[k], level);
    }
  }
  return w;
}

}  // namespace detail

inline WorkloadTrace synth_workload(const WorkloadParams& params, std::uint64_t seed) {
  return std::visit(
      [seed](const auto& p) -> WorkloadTrace {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, WebsiteParams>) {
          return detail::website_workload(p, seed);
        } else if constexpr (std::is_same_v<P, KeystrokeWorkloadParams>) {
          return detail::keystroke_workload(p, seed);
        } else if constexpr (std::is_same_v<P, IdleParams>) {
          if (p.ticks == 0 || p.tick_ms < 1 || p.max_load < 0 || p.max_load >= 0.05) {
            throw InvalidArgument("invalid idle workload parameters");
          }
          WorkloadTrace w;
          w.tick_ms = p.tick_ms;
          w.loads.resize(p.ticks);
          Rng rng(mix_seed({0x1d1eu, seed}));
          detail::fill_idle(w.loads, rng, p.max_load);
          return w;
        } else {
          return detail::noise_workload(p, seed);
        }
      },
      params);
}

}  // namespace freqscope
