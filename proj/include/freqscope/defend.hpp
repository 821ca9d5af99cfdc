#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "freqscope/dataset.hpp"
#include "freqscope/error.hpp"
#include "freqscope/evaluate.hpp"
#include "freqscope/profile.hpp"
#include "freqscope/random.hpp"
#include "freqscope/source.hpp"
#include "freqscope/trace.hpp"

namespace freqscope {

// Sample-and-hold: the interface refreshes once every `factor` readings. With
// a phase seed the refresh grid is offset by a per-trace random phase, since
// the kernel's update timer is not aligned with the start of a measurement.
struct ResolutionReduce {
  int factor = 10;
  std::optional<std::uint64_t> phase_seed;
};

// Random plateaus of extra load, as a background workload injector produces.
struct NoiseInject {
  double burst_rate_hz = 5.0;
  double burst_height = 0.5;  // fraction of the device's frequency range
  std::uint64_t seed = 0;
  int width_min = 3;
  int width_max = 8;
};

struct ConstantMask {
  std::int64_t freq_khz = 0;
};

struct AccessRestrict {};

enum class DefenseStage { kSource, kTrace };

struct Defense {
  std::variant<ResolutionReduce, NoiseInject, ConstantMask, AccessRestrict> kind;
  DefenseStage stage = DefenseStage::kTrace;

  std::string name() const {
    static constexpr const char* kNames[] = {"resolution_reduce", "noise_inject",
                                             "constant_mask", "access_restrict"};
    return kNames[kind.index()];
  }

  std::string param() const {
    std::ostringstream os;
    std::visit(
        [&](const auto& d) {
          using D = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<D, ResolutionReduce>) {
            os << d.factor;
          } else if constexpr (std::is_same_v<D, NoiseInject>) {
            os << d.burst_rate_hz << "Hz@" << d.burst_height;
          } else if constexpr (std::is_same_v<D, ConstantMask>) {
            os << d.freq_khz;
          } else {
            os << "masked";
          }
        },
        kind);
    return os.str();
  }

  void validate() const {
    std::visit(
        [](const auto& d) {
          using D = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<D, ResolutionReduce>) {
            if (d.factor < 2) throw InvalidArgument("resolution_reduce factor must be >= 2");
          } else if constexpr (std::is_same_v<D, NoiseInject>) {
            if (d.burst_rate_hz < 0) throw InvalidArgument("noise burst rate must be >= 0");
            if (d.burst_height < 0 || d.burst_height > 1) {
              throw InvalidArgument("noise burst height must be in [0, 1]");
            }
            if (d.width_min < 1 || d.width_min > d.width_max) {
              throw InvalidArgument("noise burst widths invalid");
            }
          } else if constexpr (std::is_same_v<D, ConstantMask>) {
            if (d.freq_khz < 0) throw InvalidArgument("mask frequency must be >= 0");
          }
        },
        kind);
  }
};

namespace detail {

inline std::pair<std::int64_t, std::int64_t> trace_range(const FrequencyTrace& t,
                                                         const std::optional<DeviceProfile>& p) {
  if (p) return {p->min_freq_khz, p->effective_max_khz()};
  auto [lo, hi] = std::minmax_element(t.samples.begin(), t.samples.end());
  return {*lo, *hi};
}

}  // namespace detail

// `stream` distinguishes traces so that seeded defenses draw independent
// randomness per trace.
inline FrequencyTrace apply_defense(const Defense& d, const FrequencyTrace& t,
                                    std::uint64_t stream = 0) {
  d.validate();
  t.validate();
  if (d.stage == DefenseStage::kSource || std::holds_alternative<AccessRestrict>(d.kind)) {
    throw InvalidArgument(d.name() + " applies at the frequency source, not to a trace");
  }
  const auto profile = find_profile(t.device);
  FrequencyTrace out = t;
  auto& s = out.samples;

  if (auto* rr = std::get_if<ResolutionReduce>(&d.kind)) {
    std::int64_t phase = 0;
    if (rr->phase_seed) {
      Rng rng(mix_seed({*rr->phase_seed, 0x9a5eu, stream}));
      phase = rng.uniform_int(0, rr->factor - 1);
    }
    for (std::size_t i = 0; i < s.size(); ++i) {
      const auto idx = static_cast<std::int64_t>(i);
      std::int64_t anchor = idx - ((idx - phase) % rr->factor + rr->factor) % rr->factor;
      s[i] = t.samples[static_cast<std::size_t>(std::max<std::int64_t>(anchor, 0))];
    }
  } else if (auto* ni = std::get_if<NoiseInject>(&d.kind)) {
    const auto [lo, hi] = detail::trace_range(t, profile);
    const double add = ni->burst_height * static_cast<double>(hi - lo);
    const double start_prob = std::min(1.0, ni->burst_rate_hz * t.interval_ms / 1000.0);
    Rng rng(mix_seed({ni->seed, 0xb0257u, stream}));
    std::vector<bool> covered(s.size(), false);
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (!rng.bernoulli(start_prob)) continue;
      const auto width = static_cast<std::size_t>(rng.uniform_int(ni->width_min, ni->width_max));
      for (std::size_t k = i; k < i + width && k < s.size(); ++k) covered[k] = true;
    }
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (!covered[i]) continue;
      const double v = std::clamp(static_cast<double>(s[i]) + add, static_cast<double>(lo),
                                  static_cast<double>(hi));
      s[i] = profile ? profile->quantize(v, lo, hi) : static_cast<std::int64_t>(v);
    }
  } else if (auto* cm = std::get_if<ConstantMask>(&d.kind)) {
    if (profile && !profile->is_pstate(cm->freq_khz)) {
      throw InvalidArgument("mask frequency is not a P-state of " + profile->name);
    }
    std::fill(s.begin(), s.end(), cm->freq_khz);
  }
  return out;
}

// Access restriction is the one defense that acts on the source.
inline void apply_defense(const Defense& d, FreqSource& src) {
  if (!std::holds_alternative<AccessRestrict>(d.kind)) {
    throw InvalidArgument(d.name() + " applies to traces, not to a frequency source");
  }
  src.set_policy(AccessPolicy::kMasked);
}

inline LabeledDataset defend_dataset(const Defense& d, const LabeledDataset& ds) {
  LabeledDataset out;
  out.split_seed = ds.split_seed;
  out.split_fractions = ds.split_fractions;
  for (auto& label : ds.classes) {
    const auto& traces = ds.measurements.at(label);
    for (std::size_t i = 0; i < traces.size(); ++i) {
      out.add(label, apply_defense(d, traces[i], mix_seed({hash_string(label), i})));
    }
  }
  return out;
}

struct DefenseEvaluation {
  EvalReport clean;
  EvalReport defended;
};

// The defense is applied to train and test alike: the attacker profiles the
// defended system.
inline DefenseEvaluation evaluate_defense(const Defense& d, const LabeledDataset& ds,
                                          const ClassifierParams& params,
                                          const std::vector<int>& topk = {1, 5}) {
  const auto clean_split = split_dataset(ds);
  const auto clean_model = train_classifier(clean_split.train, params);
  DefenseEvaluation out;
  out.clean = evaluate(clean_model, clean_split.test, topk);

  const auto defended = defend_dataset(d, ds);
  const auto split = split_dataset(defended);
  const auto model = train_classifier(split.train, params);
  out.defended = evaluate(model, split.test, topk);
  return out;
}

struct SweepRow {
  std::string defense;
  std::string param;
  double top1_clean = 0.0;
  double top1_defended = 0.0;
};

// One row per defense, all scored against the same clean baseline. A
// resolution_reduce factor of 1 is accepted here as the undefended point of a
// resolution sweep.
inline std::vector<SweepRow> run_sweep(const LabeledDataset& ds,
                                       const std::vector<Defense>& defenses,
                                       const ClassifierParams& params) {
  const auto clean_split = split_dataset(ds);
  const double clean =
      evaluate(train_classifier(clean_split.train, params), clean_split.test, {1}).top1_accuracy;
  std::vector<SweepRow> rows;
  for (auto& d : defenses) {
    SweepRow row{d.name(), d.param(), clean, clean};
    auto* rr = std::get_if<ResolutionReduce>(&d.kind);
    if (!(rr && rr->factor == 1)) {
      const auto defended = defend_dataset(d, ds);
      const auto split = split_dataset(defended);
      row.top1_defended =
          evaluate(train_classifier(split.train, params), split.test, {1}).top1_accuracy;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::string format_sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os.precision(6);
  os << "defense,param,top1_clean,top1_defended\n";
  for (auto& r : rows) {
    os << r.defense << ',' << r.param << ',' << r.top1_clean << ',' << r.top1_defended << '\n';
  }
  return os.str();
}

// One whitespace-separated (index, param, accuracy) block per defense kind,
// blank-line separated, the layout gnuplot's `index` selector expects.
inline std::string format_sweep_plot(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os.precision(6);
  std::string current;
  std::size_t x = 0;
  for (auto& r : rows) {
    if (r.defense != current) {
      if (!current.empty()) os << "\n\n";
      os << "# " << r.defense << "\n# x param top1_defended top1_clean\n";
      current = r.defense;
      x = 0;
    }
    os << x++ << ' ' << r.param << ' ' << r.top1_defended << ' ' << r.top1_clean << '\n';
  }
  return os.str();
}

inline std::vector<SweepRow> parse_sweep_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line) || line != "defense,param,top1_clean,top1_defended") {
    throw ParseError(ParseErrorKind::kMalformedHeader, line_no, "not a sweep CSV");
  }
  std::vector<SweepRow> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    if (cells.size() != 4) {
      throw ParseError(ParseErrorKind::kMalformedHeader, line_no, "expected 4 columns");
    }
    SweepRow r{cells[0], cells[1], 0.0, 0.0};
    try {
      r.top1_clean = std::stod(cells[2]);
      r.top1_defended = std::stod(cells[3]);
    } catch (const std::logic_error&) {
      throw ParseError(ParseErrorKind::kNonNumericSample, line_no, "accuracy is not a number");
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace freqscope
