#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "freqscope/dataset.hpp"
#include "freqscope/error.hpp"
#include "freqscope/knn.hpp"
#include "freqscope/trace.hpp"

namespace freqscope {

// Thresholds describing what a key press looks like on the big cores of a
// phone sampled every 20 ms.
struct KeystrokeParams {
  std::int64_t idle_freq_khz = 800'000;
  std::int64_t peak_cap_khz = 1'600'000;
  std::int64_t sustained_freq_khz = 1'200'000;
  std::size_t min_pulse_samples = 8;
  std::size_t max_single_pulse_samples = 12;
  int decay_ms = 200;  // typical fall back to idle; closer presses fuse
  int sample_interval_ms = 20;
  std::int64_t hysteresis_khz = 50'000;

  void validate() const {
    if (min_pulse_samples < 1 || min_pulse_samples > max_single_pulse_samples) {
      throw InvalidArgument("need 1 <= min_pulse_samples <= max_single_pulse_samples");
    }
    if (!(idle_freq_khz < sustained_freq_khz && sustained_freq_khz < peak_cap_khz)) {
      throw InvalidArgument("need idle < sustained < peak_cap frequencies");
    }
    if (sample_interval_ms < 1 || decay_ms < 0 || hysteresis_khz < 0) {
      throw InvalidArgument("invalid keystroke timing parameters");
    }
  }
};

struct KeystrokeEvent {
  std::size_t start_index = 0;
  std::size_t length_samples = 0;
  int inferred_count = 1;
  bool extrapolated = false;  // longer than two single pulses

  bool operator==(const KeystrokeEvent&) const = default;
};

struct KeystrokeReport {
  std::vector<KeystrokeEvent> events;
  std::vector<std::int64_t> press_times_ms;
  std::vector<std::int64_t> inter_key_timings_ms;
};

// Consecutive differences of press times; empty when fewer than two presses.
inline std::vector<std::int64_t> timings(const std::vector<std::int64_t>& press_times_ms) {
  std::vector<std::int64_t> out;
  for (std::size_t i = 1; i < press_times_ms.size(); ++i) {
    out.push_back(press_times_ms[i] - press_times_ms[i - 1]);
  }
  return out;
}

inline std::vector<std::int64_t> timings(const KeystrokeReport& r) {
  return timings(r.press_times_ms);
}

// Segments maximal runs above idle + hysteresis. A run of min..max_single
// samples peaking at or below the cap is one press. A longer run that never
// drops below the sustained level is several presses fused by the governor's
// hold: two up to twice the single length, ceil(len / max_single) beyond.
// Everything else is background noise.
inline KeystrokeReport detect_keystrokes(const FrequencyTrace& trace, const KeystrokeParams& p) {
  p.validate();
  trace.validate();
  if (trace.interval_ms != p.sample_interval_ms) {
    throw InvalidArgument("trace interval " + std::to_string(trace.interval_ms) +
                          " ms does not match keystroke sampling interval " +
                          std::to_string(p.sample_interval_ms) + " ms");
  }
  const auto threshold = p.idle_freq_khz + p.hysteresis_khz;
  const auto& s = trace.samples;
  KeystrokeReport report;

  std::size_t i = 0;
  while (i < s.size()) {
    if (s[i] <= threshold) {
      ++i;
      continue;
    }
    std::size_t end = i;
    std::int64_t peak = 0;
    std::int64_t floor = s[i];
    while (end < s.size() && s[end] > threshold) {
      peak = std::max(peak, s[end]);
      floor = std::min(floor, s[end]);
      ++end;
    }
    const std::size_t len = end - i;
    KeystrokeEvent ev{i, len, 0, false};
    if (len >= p.min_pulse_samples && len <= p.max_single_pulse_samples) {
      if (peak <= p.peak_cap_khz) ev.inferred_count = 1;
    } else if (len > p.max_single_pulse_samples && floor >= p.sustained_freq_khz) {
      if (len <= 2 * p.max_single_pulse_samples) {
        ev.inferred_count = 2;
      } else {
        ev.inferred_count = static_cast<int>((len + p.max_single_pulse_samples - 1) /
                                             p.max_single_pulse_samples);
        ev.extrapolated = true;
      }
    }
    if (ev.inferred_count > 0) {
      const std::int64_t start_ms =
          (trace.start_index + static_cast<std::int64_t>(i)) * trace.interval_ms;
      const std::int64_t span_ms = static_cast<std::int64_t>(len) * trace.interval_ms;
      for (int k = 0; k < ev.inferred_count; ++k) {
        report.press_times_ms.push_back(start_ms + k * span_ms / ev.inferred_count);
      }
      report.events.push_back(ev);
    }
    i = end;
  }
  report.inter_key_timings_ms = timings(report.press_times_ms);
  return report;
}

inline std::string format_keystroke_report(const KeystrokeReport& r) {
  std::ostringstream os;
  auto join = [](const std::vector<std::int64_t>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
    return out;
  };
  os << "events=" << r.events.size() << '\n';
  for (std::size_t i = 0; i < r.events.size(); ++i) {
    const auto& e = r.events[i];
    os << "event." << i << "=" << e.start_index << ',' << e.length_samples << ','
       << e.inferred_count << (e.extrapolated ? ",extrapolated" : "") << '\n';
  }
  os << "presses=" << r.press_times_ms.size() << '\n';
  os << "press_times_ms=" << join(r.press_times_ms) << '\n';
  os << "inter_key_timings_ms=" << join(r.inter_key_timings_ms) << '\n';
  return os.str();
}

using TimingVector = std::vector<double>;

struct LabeledTiming {
  std::string label;
  TimingVector timings;
};

// KNN over inter-keystroke timing vectors zero-padded to a common length.
struct PasswordModel {
  KnnModel knn;
  std::vector<std::string> password_labels;
  std::size_t timing_length = 0;

  TimingVector pad(const TimingVector& v) const {
    TimingVector out(timing_length, 0.0);
    std::copy_n(v.begin(), std::min(v.size(), timing_length), out.begin());
    return out;
  }

  Ranking rank(const TimingVector& v) const {
    return knn_predict(knn, pad(v), password_labels.size());
  }
};

struct PasswordTrainOptions {
  std::size_t per_label = 10;
  SplitFractions split{0.7, 0.0, 0.3};
  int k = 4;
};

struct PasswordTraining {
  PasswordModel model;
  std::vector<LabeledTiming> train;
  std::vector<LabeledTiming> test;
};

// Subsamples exactly `per_label` measurements per password (seeded), splits
// them per label, and fits the KNN on the training part.
inline PasswordTraining train_password_model(
    const std::map<std::string, std::vector<TimingVector>>& ds, std::uint64_t split_seed,
    const PasswordTrainOptions& opts = {}) {
  if (ds.size() < 2) throw InvalidArgument("password model needs at least 2 passwords");
  std::size_t max_len = 0;
  for (auto& [label, vectors] : ds) {
    if (vectors.size() < opts.per_label) {
      throw InvalidArgument("password '" + label + "' has " + std::to_string(vectors.size()) +
                            " measurements, need " + std::to_string(opts.per_label));
    }
    for (auto& v : vectors) max_len = std::max(max_len, v.size());
  }
  if (max_len == 0) throw InvalidArgument("all timing vectors are empty");

  PasswordTraining out;
  out.model.timing_length = max_len;
  out.model.knn.k = opts.k;
  const auto counts = split_counts(opts.per_label, opts.split);
  for (auto& [label, vectors] : ds) {
    out.model.password_labels.push_back(label);
    auto chosen = split_order(mix_seed({split_seed, 0x5b5u}), label, vectors.size());
    chosen.resize(opts.per_label);
    std::sort(chosen.begin(), chosen.end());
    const auto order = split_order(split_seed, label, chosen.size());
    for (std::size_t r = 0; r < order.size(); ++r) {
      LabeledTiming item{label, vectors[chosen[order[r]]]};
      if (r < counts.train) {
        out.model.knn.add(out.model.pad(item.timings), label);
        out.train.push_back(std::move(item));
      } else if (r >= counts.train + counts.val) {
        out.test.push_back(std::move(item));
      }
    }
  }
  return out;
}

// Entry g-1 is the fraction of items whose true label is among the first g
// ranked guesses.
inline std::vector<double> guess_curve_from_rankings(const std::vector<std::string>& truths,
                                                     const std::vector<Ranking>& rankings,
                                                     std::size_t max_guesses) {
  if (truths.empty()) throw InvalidArgument("empty test set");
  if (truths.size() != rankings.size()) throw InvalidArgument("one ranking per test item");
  std::vector<std::size_t> first_hit(max_guesses + 1, 0);
  for (std::size_t i = 0; i < truths.size(); ++i) {
    const auto& r = rankings[i];
    for (std::size_t g = 0; g < r.size() && g < max_guesses; ++g) {
      if (r[g].label == truths[i]) {
        first_hit[g]++;
        break;
      }
    }
  }
  std::vector<double> curve(max_guesses);
  std::size_t cumulative = 0;
  for (std::size_t g = 0; g < max_guesses; ++g) {
    cumulative += first_hit[g];
    curve[g] = static_cast<double>(cumulative) / static_cast<double>(truths.size());
  }
  return curve;
}

inline std::vector<double> guess_curve(const PasswordModel& model,
                                       const std::vector<LabeledTiming>& test,
                                       std::size_t max_guesses) {
  if (max_guesses < 1 || max_guesses > model.password_labels.size()) {
    throw InvalidArgument("max_guesses must be in [1, number of passwords]");
  }
  std::vector<std::string> truths;
  std::vector<Ranking> rankings;
  for (auto& item : test) {
    truths.push_back(item.label);
    rankings.push_back(model.rank(item.timings));
  }
  return guess_curve_from_rankings(truths, rankings, max_guesses);
}

}  // namespace freqscope
