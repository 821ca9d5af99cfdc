#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "freqscope/dataset.hpp"
#include "freqscope/error.hpp"
#include "freqscope/evaluate.hpp"
#include "freqscope/governor.hpp"
#include "freqscope/keystroke.hpp"
#include "freqscope/profile.hpp"
#include "freqscope/sampler.hpp"

namespace freqscope {

// Line-oriented `section.key = value` settings. Every key has a schema entry
// with a type and a default; anything else is rejected.
enum class ValueType { kInt, kFloat, kString, kBool, kIntList, kStringList };

struct ConfigKey {
  std::string_view name;
  ValueType type;
  std::string_view default_value;  // empty: unset
  std::string_view help;
};

inline const std::vector<ConfigKey>& config_schema() {
  using V = ValueType;
  static const std::vector<ConfigKey> keys = {
      {"run.seed", V::kInt, "1", "global seed for workloads, splits and models"},
      {"run.output", V::kString, "", "output directory or file of the subcommand"},
      {"run.source", V::kString, "sim", "frequency source: sim, replay or sysfs"},
      {"run.data", V::kString, "", "dataset directory read by train, eval, keystrokes, defend"},
      {"run.model", V::kString, "", "model file read by eval and keystrokes"},
      {"run.trace", V::kString, "", "trace file read by keystrokes"},

      {"sim.profile", V::kString, "ryzen5", "device profile"},
      {"sim.governor", V::kString, "", "scaling governor (default: the profile's)"},
      {"sim.set_speed_khz", V::kInt, "", "userspace governor frequency"},
      {"sim.conservative_step_khz", V::kInt, "100000", "conservative walk step"},
      {"sim.turbo", V::kString, "auto", "auto, on or off"},
      {"sim.turbo_ceiling_khz", V::kInt, "", "turbo cap (default: the profile's)"},
      {"sim.hispeed_freq_khz", V::kInt, "", "interactive boost target"},
      {"sim.boostpulse_duration_ms", V::kInt, "80", "interactive boost hold"},
      {"sim.min_sample_time_ms", V::kInt, "20", "interactive rate limit"},
      {"sim.load_trigger", V::kFloat, "0.3", "interactive boost trigger load"},
      {"sim.workload", V::kString, "website", "website, idle or noise (collect --source sim)"},
      {"sim.class_id", V::kInt, "0", "website class simulated by collect"},

      {"simulate.kind", V::kString, "website", "website or keystrokes"},
      {"simulate.classes", V::kInt, "20", "website classes"},
      {"simulate.measurements", V::kInt, "30", "measurements per website"},
      {"simulate.samples", V::kInt, "1000", "samples per website measurement"},
      {"simulate.interval_ms", V::kInt, "10", "website sampling interval"},
      {"simulate.passwords", V::kString, "", "password list, one per line"},
      {"simulate.per_label", V::kInt, "10", "typing sessions per password"},
      {"simulate.typing_sigma_ms", V::kFloat, "30", "inter-key gap deviation"},

      {"collect.interval_ms", V::kInt, "10", "T_i"},
      {"collect.samples", V::kInt, "1000", "N_s"},
      {"collect.measurements", V::kInt, "1", "N_m"},
      {"collect.label", V::kString, "", "class label of the collected traces"},
      {"collect.pre_hook", V::kString, "", "command run before each measurement"},
      {"collect.post_hook", V::kString, "", "command run after each measurement"},
      {"collect.inter_measurement_sleep_ms", V::kInt, "1000", "rest between measurements"},
      {"collect.replay", V::kString, "", "trace file replayed by --source replay"},
      {"collect.sysfs_policy", V::kInt, "0", "cpufreq policy read by --source sysfs"},
      {"collect.device", V::kString, "", "device name recorded for sysfs traces"},
      {"collect.restrict", V::kBool, "false", "mask the source (access restriction)"},

      {"classify.model", V::kString, "knn", "knn or forest"},
      {"classify.k", V::kInt, "3", "KNN neighbours"},
      {"classify.trees", V::kInt, "100", "forest size"},
      {"classify.max_depth", V::kInt, "20", "tree depth limit"},
      {"classify.min_leaf", V::kInt, "1", "minimum samples per leaf"},
      {"classify.feature_subsample", V::kFloat, "0", "features per split as a fraction; 0 = sqrt(d)"},
      {"classify.normalization", V::kString, "none", "none or minmax_per_profile"},
      {"classify.split", V::kString, "0.8,0.1,0.1", "train,val,test fractions"},
      {"classify.eval_split", V::kString, "test", "train, val, test or all"},
      {"classify.topk", V::kIntList, "1,5", "reported top-k accuracies"},

      {"keystroke.idle_freq_khz", V::kInt, "800000", ""},
      {"keystroke.peak_cap_khz", V::kInt, "1600000", ""},
      {"keystroke.sustained_freq_khz", V::kInt, "1200000", ""},
      {"keystroke.min_pulse_samples", V::kInt, "8", ""},
      {"keystroke.max_single_pulse_samples", V::kInt, "12", ""},
      {"keystroke.decay_ms", V::kInt, "200", ""},
      {"keystroke.sample_interval_ms", V::kInt, "20", ""},
      {"keystroke.hysteresis_khz", V::kInt, "50000", ""},
      {"keystroke.per_label", V::kInt, "10", "measurements per password used for the model"},
      {"keystroke.k", V::kInt, "4", "password model neighbours"},
      {"keystroke.guesses", V::kInt, "0", "guess-curve length; 0 disables"},
      {"keystroke.password", V::kString, "", "password typed by --source sim"},
      {"keystroke.duration_ms", V::kInt, "10000", "live sampling time for --source sysfs"},
      {"keystroke.model_out", V::kString, "", "where keystrokes --data saves the password model"},

      {"defend.sweep", V::kStringList, "resolution_reduce:1,2,5,10,25,50",
       "kind:p1,p2,... entries separated by ';'"},
      {"defend.random_phase", V::kBool, "true", "offset the resolution_reduce refresh grid per trace"},
      {"defend.noise_height", V::kFloat, "0.5", "noise burst height as a fraction of range"},
      {"defend.noise_seed", V::kInt, "", "noise seed (default: run.seed)"},

      {"report.inputs", V::kStringList, "", "report.kv or sweep.csv files separated by ';'"},
      {"report.plot", V::kString, "", "plot-data output file"},
  };
  return keys;
}

inline const ConfigKey* find_config_key(std::string_view name) {
  for (auto& k : config_schema()) {
    if (k.name == name) return &k;
  }
  return nullptr;
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    auto piece = trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (!piece.empty()) out.emplace_back(piece);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::optional<double> parse_double(std::string_view s) {
  double v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::optional<bool> parse_bool(std::string_view s) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  return std::nullopt;
}

}  // namespace detail

class Config {
 public:
  Config() {
    for (auto& k : config_schema()) {
      if (!k.default_value.empty()) values_[std::string(k.name)] = std::string(k.default_value);
    }
  }

  // Applies `key = value` lines on top of the current values. `origin` names
  // the source in error messages.
  void merge_text(std::string_view text, const std::string& origin) {
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
      const auto nl = text.find('\n', pos);
      auto line = text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
      pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
      ++line_no;
      line = detail::trim(line);
      if (line.empty() || line.front() == '#') continue;
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) {
        throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected 'section.key = value'");
      }
      try {
        set(detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
      } catch (const ConfigError& e) {
        throw ConfigError(origin + ":" + std::to_string(line_no) + ": " + e.what());
      }
    }
  }

  void merge_file(const std::filesystem::path& path) {
    std::string text;
    try {
      text = read_file(path);
    } catch (const IoError& e) {
      throw ConfigError(e.what());
    }
    merge_text(text, path.string());
  }

  // Empty value unsets the key.
  void set(std::string_view name, std::string_view value) {
    const auto* key = find_config_key(name);
    if (!key) throw ConfigError("unknown config key '" + std::string(name) + "'");
    if (value.empty()) {
      values_.erase(std::string(name));
      return;
    }
    check_type(*key, value);
    values_[std::string(name)] = std::string(value);
  }

  // "key=value" as given on the command line.
  void set_assignment(std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("expected key=value, got '" + std::string(assignment) + "'");
    }
    set(detail::trim(assignment.substr(0, eq)), detail::trim(assignment.substr(eq + 1)));
  }

  bool has(std::string_view name) const {
    require_known(name);
    return values_.count(std::string(name)) > 0;
  }

  const std::string& str(std::string_view name) const {
    require_known(name);
    static const std::string empty;
    auto it = values_.find(std::string(name));
    return it == values_.end() ? empty : it->second;
  }

  std::optional<std::int64_t> opt_int(std::string_view name) const {
    if (!has(name)) return std::nullopt;
    return *detail::parse_int<std::int64_t>(str(name));
  }

  std::int64_t integer(std::string_view name) const {
    auto v = opt_int(name);
    if (!v) throw ConfigError("config key '" + std::string(name) + "' is not set");
    return *v;
  }

  double real(std::string_view name) const {
    if (!has(name)) throw ConfigError("config key '" + std::string(name) + "' is not set");
    return *detail::parse_double(str(name));
  }

  bool boolean(std::string_view name) const { return *detail::parse_bool(str(name)); }

  std::vector<std::int64_t> int_list(std::string_view name) const {
    std::vector<std::int64_t> out;
    for (auto& piece : detail::split(str(name), ',')) {
      out.push_back(*detail::parse_int<std::int64_t>(piece));
    }
    return out;
  }

  std::vector<std::string> string_list(std::string_view name) const {
    return detail::split(str(name), ';');
  }

  // Every schema key in schema order, unset ones commented out, so the file
  // can be fed back with --config to repeat the run.
  std::string resolved(std::string_view command) const {
    std::ostringstream os;
    os << "# resolved configuration for 'freqscope " << command << "'\n";
    std::string_view section;
    for (auto& k : config_schema()) {
      const auto sec = k.name.substr(0, k.name.find('.'));
      if (sec != section) {
        os << '\n';
        section = sec;
      }
      auto it = values_.find(std::string(k.name));
      if (it == values_.end()) {
        os << "# " << k.name << " =\n";
      } else {
        os << k.name << " = " << it->second << '\n';
      }
    }
    return os.str();
  }

 private:
  static void require_known(std::string_view name) {
    if (!find_config_key(name)) {
      throw ConfigError("unknown config key '" + std::string(name) + "'");
    }
  }

  static void check_type(const ConfigKey& key, std::string_view value) {
    bool ok = true;
    switch (key.type) {
      case ValueType::kInt:
        ok = detail::parse_int<std::int64_t>(value).has_value();
        break;
      case ValueType::kFloat:
        ok = detail::parse_double(value).has_value();
        break;
      case ValueType::kBool:
        ok = detail::parse_bool(value).has_value();
        break;
      case ValueType::kIntList:
        for (auto& piece : detail::split(value, ',')) {
          ok = ok && detail::parse_int<std::int64_t>(piece).has_value();
        }
        break;
      case ValueType::kString:
      case ValueType::kStringList:
        ok = value.find('\n') == std::string_view::npos;
        break;
    }
    if (!ok) {
      throw ConfigError("invalid value '" + std::string(value) + "' for '" +
                        std::string(key.name) + "'");
    }
  }

  std::map<std::string, std::string> values_;
};

// Domain errors raised while turning a config into parameters are config errors.
template <typename F>
auto from_config(F&& f) {
  try {
    return f();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
}

inline SimConfig sim_config_from(const Config& c) {
  return from_config([&] {
    const auto profile = profile_by_name(c.str("sim.profile"));
    auto cfg = SimConfig::for_profile(profile);
    if (c.has("sim.governor")) cfg.governor = parse_governor(c.str("sim.governor"));
    cfg.set_speed_khz = c.opt_int("sim.set_speed_khz");
    cfg.conservative_step_khz = c.integer("sim.conservative_step_khz");
    const auto& turbo = c.str("sim.turbo");
    if (turbo == "on") {
      cfg.turbo.enabled = true;
    } else if (turbo == "off") {
      cfg.turbo.enabled = false;
    } else if (turbo != "auto") {
      throw ConfigError("sim.turbo must be auto, on or off");
    }
    cfg.turbo.ceiling_khz = c.opt_int("sim.turbo_ceiling_khz").value_or(0);
    cfg.interactive.hispeed_freq_khz = c.opt_int("sim.hispeed_freq_khz").value_or(0);
    cfg.interactive.boostpulse_duration_ms = static_cast<int>(c.integer("sim.boostpulse_duration_ms"));
    cfg.interactive.min_sample_time_ms = static_cast<int>(c.integer("sim.min_sample_time_ms"));
    cfg.interactive.load_trigger = c.real("sim.load_trigger");
    cfg.seed = static_cast<std::uint64_t>(c.integer("run.seed"));
    cfg.validate();
    return cfg;
  });
}

inline CollectPlan collect_plan_from(const Config& c) {
  return from_config([&] {
    CollectPlan p;
    p.interval_ms = static_cast<int>(c.integer("collect.interval_ms"));
    p.samples_per_measurement = static_cast<std::size_t>(c.integer("collect.samples"));
    p.measurements = static_cast<std::size_t>(c.integer("collect.measurements"));
    p.label = c.str("collect.label");
    if (c.has("collect.pre_hook")) p.pre_hook = c.str("collect.pre_hook");
    if (c.has("collect.post_hook")) p.post_hook = c.str("collect.post_hook");
    p.inter_measurement_sleep_ms = c.integer("collect.inter_measurement_sleep_ms");
    if (c.integer("collect.interval_ms") < 1 || c.integer("collect.samples") < 1 ||
        c.integer("collect.measurements") < 1) {
      throw ConfigError("collect.interval_ms, samples and measurements must be >= 1");
    }
    p.validate();
    return p;
  });
}

inline SplitFractions split_fractions_from(const Config& c) {
  const auto parts = detail::split(c.str("classify.split"), ',');
  if (parts.size() != 3) throw ConfigError("classify.split needs three fractions");
  std::array<double, 3> f{};
  for (std::size_t i = 0; i < 3; ++i) {
    auto v = detail::parse_double(parts[i]);
    if (!v) throw ConfigError("classify.split: '" + parts[i] + "' is not a number");
    f[i] = *v;
  }
  SplitFractions s{f[0], f[1], f[2]};
  from_config([&] { return split_counts(100, s); });
  return s;
}

inline ClassifierParams classifier_params_from(const Config& c) {
  return from_config([&] {
    ClassifierParams p;
    p.kind = parse_model_kind(c.str("classify.model"));
    p.k = static_cast<int>(c.integer("classify.k"));
    if (p.k < 1) throw ConfigError("classify.k must be >= 1");
    p.forest.n_trees = static_cast<int>(c.integer("classify.trees"));
    p.forest.max_depth = static_cast<int>(c.integer("classify.max_depth"));
    p.forest.min_leaf = static_cast<int>(c.integer("classify.min_leaf"));
    p.forest.feature_subsample = c.real("classify.feature_subsample");
    p.forest.seed = static_cast<std::uint64_t>(c.integer("run.seed"));
    p.forest.validate();
    p.normalization = parse_normalization(c.str("classify.normalization"));
    return p;
  });
}

inline KeystrokeParams keystroke_params_from(const Config& c) {
  return from_config([&] {
    KeystrokeParams p;
    p.idle_freq_khz = c.integer("keystroke.idle_freq_khz");
    p.peak_cap_khz = c.integer("keystroke.peak_cap_khz");
    p.sustained_freq_khz = c.integer("keystroke.sustained_freq_khz");
    const auto min_pulse = c.integer("keystroke.min_pulse_samples");
    const auto max_single = c.integer("keystroke.max_single_pulse_samples");
    if (min_pulse < 1 || max_single < 1) throw ConfigError("pulse sample counts must be >= 1");
    p.min_pulse_samples = static_cast<std::size_t>(min_pulse);
    p.max_single_pulse_samples = static_cast<std::size_t>(max_single);
    p.decay_ms = static_cast<int>(c.integer("keystroke.decay_ms"));
    p.sample_interval_ms = static_cast<int>(c.integer("keystroke.sample_interval_ms"));
    p.hysteresis_khz = c.integer("keystroke.hysteresis_khz");
    p.validate();
    return p;
  });
}

}  // namespace freqscope
