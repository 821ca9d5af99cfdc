#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "freqscope/dataset.hpp"
#include "freqscope/governor.hpp"
#include "freqscope/random.hpp"
#include "freqscope/sampler.hpp"
#include "freqscope/source.hpp"
#include "freqscope/workload.hpp"

namespace freqscope {

// Synthetic stand-ins for browsing and typing sessions, run through the
// governor simulator and the sampler exactly as a live collection would be.

inline std::string website_label(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "site-%03zu", i);
  return buf;
}

struct WebsiteDatasetSpec {
  std::size_t classes = 20;
  std::size_t measurements = 30;
  std::size_t samples = 1000;
  int interval_ms = 10;
  WebsiteParams workload;  // class_id and ticks are filled in per class
};

// One measurement = one page load replayed through a fresh simulated core.
inline FrequencyTrace simulate_measurement(const SimConfig& cfg, const WorkloadTrace& w,
                                           std::size_t samples, int interval_ms,
                                           const std::string& label) {
  auto src = FreqSource::sim(cfg, w);
  CollectPlan plan;
  plan.interval_ms = interval_ms;
  plan.samples_per_measurement = samples;
  plan.label = label;
  plan.inter_measurement_sleep_ms = 0;
  return collect(plan, src).front();
}

inline LabeledDataset simulate_website_dataset(const SimConfig& cfg, const WebsiteDatasetSpec& spec,
                                               std::uint64_t seed) {
  cfg.validate();
  if (spec.classes < 1 || spec.measurements < 1 || spec.samples < 1 || spec.interval_ms < 1) {
    throw InvalidArgument("website dataset needs classes, measurements and samples >= 1");
  }
  LabeledDataset ds;
  ds.split_seed = seed;
  auto params = spec.workload;
  const auto span_ms = static_cast<std::int64_t>(spec.samples) * spec.interval_ms;
  params.ticks = static_cast<std::size_t>((span_ms + params.tick_ms - 1) / params.tick_ms);
  for (std::size_t c = 0; c < spec.classes; ++c) {
    params.class_id = c;
    const auto label = website_label(c);
    for (std::size_t m = 0; m < spec.measurements; ++m) {
      auto run_cfg = cfg;
      run_cfg.seed = mix_seed({seed, c, m});
      const auto w = synth_workload(params, run_cfg.seed);
      ds.add(label, simulate_measurement(run_cfg, w, spec.samples, spec.interval_ms, label));
    }
  }
  return ds;
}

// Physical key positions on a QWERTY keyboard (row, column with row stagger).
inline std::pair<double, double> key_position(char c) {
  static constexpr std::array<std::string_view, 4> rows = {"1234567890-=", "qwertyuiop[]",
                                                           "asdfghjkl;'", "zxcvbnm,./"};
  static constexpr std::array<double, 4> stagger = {0.0, 0.5, 0.75, 1.25};
  const char lower = (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto col = rows[r].find(lower);
    if (col != std::string_view::npos) {
      return {static_cast<double>(r), static_cast<double>(col) + stagger[r]};
    }
  }
  return {4.0, 5.0};  // space bar and anything unknown
}

inline double key_distance(char a, char b) {
  const auto [ra, ca] = key_position(a);
  const auto [rb, cb] = key_position(b);
  return std::hypot(ra - rb, ca - cb);
}

struct TypingModel {
  double base_gap_ms = 320.0;
  double ms_per_key = 45.0;
  double shift_penalty_ms = 90.0;  // case change between consecutive keys
  double sigma_ms = 30.0;
  double min_gap_ms = 300.0;
};

// Mean inter-key gap for each consecutive pair of characters.
inline std::vector<double> password_gap_means(const std::string& password,
                                              const TypingModel& m = {}) {
  std::vector<double> out;
  for (std::size_t i = 1; i < password.size(); ++i) {
    const char a = password[i - 1], b = password[i];
    double gap = m.base_gap_ms + m.ms_per_key * key_distance(a, b);
    const bool upper_a = a >= 'A' && a <= 'Z', upper_b = b >= 'A' && b <= 'Z';
    if (upper_a != upper_b) gap += m.shift_penalty_ms;
    out.push_back(gap);
  }
  return out;
}

inline std::vector<std::int64_t> sample_press_times(const std::string& password, Rng& rng,
                                                    std::int64_t first_press_ms,
                                                    const TypingModel& m = {}) {
  std::vector<std::int64_t> out{first_press_ms};
  for (double mean : password_gap_means(password, m)) {
    const double gap = std::max(m.min_gap_ms, rng.normal(mean, m.sigma_ms));
    out.push_back(out.back() + std::llround(gap));
  }
  return out;
}

struct TypingSession {
  std::string password;
  std::vector<std::int64_t> press_times_ms;
  FrequencyTrace trace;
};

// A password typed once on a simulated phone, sampled every tick.
inline TypingSession simulate_typing(const SimConfig& cfg, const std::string& password,
                                     std::uint64_t seed, const TypingModel& m = {},
                                     int interval_ms = 20) {
  if (password.empty()) throw InvalidArgument("empty password");
  Rng rng(mix_seed({seed, 0x7e9u}));
  TypingSession s;
  s.password = password;
  s.press_times_ms = sample_press_times(password, rng, 500 + rng.uniform_int(0, 9) * interval_ms, m);
  KeystrokeWorkloadParams kp;
  kp.tick_ms = interval_ms;
  kp.press_times_ms = s.press_times_ms;
  kp.duration_ms = s.press_times_ms.back() + 1000;
  auto run_cfg = cfg;
  run_cfg.seed = seed;
  const auto w = synth_workload(kp, seed);
  s.trace = simulate_measurement(run_cfg, w, w.loads.size(), interval_ms, password);
  return s;
}

inline std::vector<TypingSession> simulate_typing_dataset(const SimConfig& cfg,
                                                          const std::vector<std::string>& passwords,
                                                          std::size_t per_label,
                                                          std::uint64_t seed,
                                                          const TypingModel& m = {}) {
  cfg.validate();
  std::vector<TypingSession> out;
  for (std::size_t p = 0; p < passwords.size(); ++p) {
    for (std::size_t i = 0; i < per_label; ++i) {
      out.push_back(simulate_typing(cfg, passwords[p], mix_seed({seed, hash_string(passwords[p]), i}), m));
    }
  }
  return out;
}

}  // namespace freqscope
