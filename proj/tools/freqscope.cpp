// freqscope: simulate, collect, train, eval, keystrokes, defend, report.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "freqscope/freqscope.hpp"

namespace fs = std::filesystem;
using namespace freqscope;

namespace {

// A command-line option that, when given, overrides one config key.
struct Binding {
  CLI::Option* option;
  std::string key;
  std::string value;
};

struct Command {
  CLI::App* app = nullptr;
  std::vector<std::unique_ptr<Binding>> bindings;
  std::vector<std::pair<std::string, std::string>> defaults;  // per-command overrides

  void bind(const std::string& flag, const std::string& key, const std::string& help) {
    auto b = std::make_unique<Binding>();
    b->key = key;
    b->option = app->add_option(flag, b->value, help + " [" + key + "]");
    bindings.push_back(std::move(b));
  }

  void bind_flag(const std::string& flag, const std::string& key, const std::string& help) {
    auto b = std::make_unique<Binding>();
    b->key = key;
    b->value = "true";
    b->option = app->add_flag(flag)->description(help + " [" + key + "]");
    bindings.push_back(std::move(b));
  }
};

struct Globals {
  std::vector<std::string> config_files;
  std::vector<std::string> assignments;
};

// defaults < per-command defaults < --config files < --set < dedicated flags
Config resolve(const Command& cmd, const Globals& g) {
  Config c;
  for (auto& [k, v] : cmd.defaults) c.set(k, v);
  for (auto& f : g.config_files) c.merge_file(f);
  for (auto& a : g.assignments) c.set_assignment(a);
  for (auto& b : cmd.bindings) {
    if (b->option->count() > 0) c.set(b->key, b->value);
  }
  return c;
}

std::string require(const Config& c, const std::string& key, const std::string& what) {
  if (!c.has(key) || c.str(key).empty()) throw ConfigError(what + " is required [" + key + "]");
  return c.str(key);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_file_atomic(path, text);
}

void write_resolved(const Config& c, const std::string& command, const fs::path& path) {
  write_text(path, c.resolved(command));
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::vector<std::string> out;
  std::istringstream in(read_file(path));
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

std::string join_ints(const std::vector<std::int64_t>& v, char sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? std::string(1, sep) : "") + std::to_string(v[i]);
  return out;
}

LabeledDataset load_for_split(const Config& c) {
  auto ds = load_dataset(require(c, "run.data", "--data"));
  ds.split_seed = static_cast<std::uint64_t>(c.integer("run.seed"));
  ds.split_fractions = split_fractions_from(c);
  return ds;
}

// ---------------------------------------------------------------- simulate

int cmd_simulate(const Config& c) {
  const fs::path out = require(c, "run.output", "--out");
  const auto seed = static_cast<std::uint64_t>(c.integer("run.seed"));
  const auto cfg = sim_config_from(c);
  DirectoryLock lock(out);
  const auto& kind = c.str("simulate.kind");
  if (kind == "website") {
    WebsiteDatasetSpec spec;
    const auto classes = c.integer("simulate.classes"), measurements = c.integer("simulate.measurements");
    const auto samples = c.integer("simulate.samples"), interval = c.integer("simulate.interval_ms");
    if (classes < 1 || measurements < 1 || samples < 1 || interval < 1) {
      throw ConfigError("simulate.classes, measurements, samples and interval_ms must be >= 1");
    }
    spec.classes = static_cast<std::size_t>(classes);
    spec.measurements = static_cast<std::size_t>(measurements);
    spec.samples = static_cast<std::size_t>(samples);
    spec.interval_ms = static_cast<int>(interval);
    const auto ds = from_config([&] { return simulate_website_dataset(cfg, spec, seed); });
    save_dataset(ds, out);
    std::printf("wrote %zu traces in %zu classes to %s\n", ds.total(), ds.classes.size(),
                out.c_str());
  } else if (kind == "keystrokes") {
    const auto passwords = read_lines(require(c, "simulate.passwords", "--passwords"));
    if (passwords.empty()) throw ConfigError("password list is empty");
    const auto per_label = c.integer("simulate.per_label");
    if (per_label < 1) throw ConfigError("simulate.per_label must be >= 1");
    TypingModel tm;
    tm.sigma_ms = c.real("simulate.typing_sigma_ms");
    const auto sessions = from_config([&] {
      return simulate_typing_dataset(cfg, passwords, static_cast<std::size_t>(per_label), seed, tm);
    });
    std::map<std::string, std::size_t> next_id;
    for (auto& s : sessions) {
      const auto dir = out / percent_encode(s.password);
      fs::create_directories(dir);
      const auto id = next_id[s.password]++;
      save_trace(s.trace, dir / measurement_file_name(id));
      // Ground-truth press times next to each trace.
      auto truth = dir / measurement_file_name(id);
      truth.replace_extension(".presses");
      write_file_atomic(truth, join_ints(s.press_times_ms, '\n') + "\n");
    }
    std::printf("wrote %zu typing traces for %zu passwords to %s\n", sessions.size(),
                passwords.size(), out.c_str());
  } else {
    throw ConfigError("simulate.kind must be website or keystrokes");
  }
  write_resolved(c, "simulate", out / "freqscope-simulate.conf");
  return kExitOk;
}

// ----------------------------------------------------------------- collect

// One simulated page load (or idle/noise stretch) per measurement, separated
// by idle time matching the inter-measurement sleep.
WorkloadTrace collect_workload(const Config& c, const CollectPlan& plan, std::uint64_t seed) {
  constexpr int kTick = 10;
  const auto span_ms = static_cast<std::int64_t>(plan.samples_per_measurement) * plan.interval_ms;
  const auto period_ms = span_ms + plan.inter_measurement_sleep_ms;
  const auto total_ticks =
      static_cast<std::size_t>((period_ms * static_cast<std::int64_t>(plan.measurements)) / kTick + 1);
  WorkloadTrace w;
  w.tick_ms = kTick;
  w.loads = synth_workload(IdleParams{total_ticks, kTick, 0.02}, seed).loads;
  const auto& kind = c.str("sim.workload");
  const auto span_ticks = static_cast<std::size_t>((span_ms + kTick - 1) / kTick);
  for (std::size_t m = 0; m < plan.measurements; ++m) {
    const auto m_seed = mix_seed({seed, m});
    WorkloadTrace part;
    if (kind == "website") {
      WebsiteParams wp;
      wp.class_id = static_cast<std::uint64_t>(c.integer("sim.class_id"));
      wp.ticks = span_ticks;
      const auto min_ticks = static_cast<std::size_t>(wp.render_max_ticks + wp.burst_width_max + 16);
      if (span_ticks < min_ticks) {
        throw ConfigError("a simulated page load needs at least " +
                          std::to_string(min_ticks * kTick) +
                          " ms per measurement (collect.samples x collect.interval_ms)");
      }
      part = from_config([&] { return synth_workload(wp, m_seed); });
    } else if (kind == "noise") {
      part = synth_workload(NoiseParams{span_ticks, kTick}, m_seed);
    } else if (kind == "idle") {
      part = synth_workload(IdleParams{span_ticks, kTick}, m_seed);
    } else {
      throw ConfigError("sim.workload must be website, idle or noise");
    }
    const auto start = static_cast<std::size_t>(period_ms * static_cast<std::int64_t>(m) / kTick);
    for (std::size_t t = 0; t < part.loads.size() && start + t < w.loads.size(); ++t) {
      w.loads[start + t] = part.loads[t];
    }
  }
  return w;
}

FreqSource open_source(const Config& c, const CollectPlan* plan) {
  const auto& source = c.str("run.source");
  if (source == "sim") {
    const auto cfg = sim_config_from(c);
    if (!plan) throw ConfigError("sim source needs a collection plan");
    return FreqSource::sim(cfg, collect_workload(c, *plan, cfg.seed));
  }
  if (source == "replay") {
    const fs::path file = c.has("collect.replay") ? c.str("collect.replay") : require(c, "run.trace", "--trace");
    return FreqSource::replay(load_trace(file));
  }
  if (source == "sysfs") {
    const auto path = sysfs_freq_path(static_cast<int>(c.integer("collect.sysfs_policy")));
    return FreqSource::sysfs(path, c.has("collect.device") ? c.str("collect.device") : "sysfs");
  }
  throw ConfigError("run.source must be sim, replay or sysfs");
}

int cmd_collect(const Config& c) {
  const fs::path out = require(c, "run.output", "--out");
  const auto plan = collect_plan_from(c);
  if (plan.label.empty()) throw ConfigError("--label is required [collect.label]");
  auto src = open_source(c, &plan);
  if (c.boolean("collect.restrict")) apply_defense(Defense{AccessRestrict{}, DefenseStage::kSource}, src);

  DirectoryLock lock(out);
  const auto dir = out / percent_encode(plan.label);
  std::size_t first_id = 0;
  if (fs::is_directory(dir)) {
    while (fs::exists(dir / measurement_file_name(first_id))) ++first_id;
  }
  std::size_t written = 0;
  auto save = [&](std::size_t m, const FrequencyTrace& t) {
    fs::create_directories(dir);
    save_trace(t, dir / measurement_file_name(first_id + m));
    ++written;
  };
  collect(plan, src, run_hook_command, save);
  write_resolved(c, "collect", out / "freqscope-collect.conf");
  std::printf("collected %zu measurements of '%s' into %s\n", written, plan.label.c_str(),
              dir.c_str());
  return kExitOk;
}

// ------------------------------------------------------------- train / eval

int cmd_train(const Config& c) {
  const fs::path out = require(c, "run.output", "--out");
  const auto params = classifier_params_from(c);
  const auto ds = load_for_split(c);
  const auto split = from_config([&] { return split_dataset(ds); });
  const auto model = train_classifier(split.train, params);
  ModelMetadata meta = {{"dataset", c.str("run.data")},
                        {"train_items", std::to_string(split.train.size())},
                        {"split_seed", std::to_string(ds.split_seed)},
                        {"split", c.str("classify.split")}};
  save_classifier(model, out, meta);
  write_resolved(c, "train", out.string() + ".conf");
  std::printf("trained %s on %zu traces, %zu classes -> %s\n", std::string(to_string(params.kind)).c_str(),
              split.train.size(), model.classes.size(), out.c_str());
  return kExitOk;
}

int cmd_eval(Config c) {
  const fs::path model_path = require(c, "run.model", "--model");
  ModelMetadata meta;
  const auto model = load_classifier(model_path, &meta);
  // Evaluate on the same partition the model was trained against.
  if (meta.count("split_seed")) c.set("run.seed", meta.at("split_seed"));
  if (meta.count("split")) c.set("classify.split", meta.at("split"));
  const auto ds = load_for_split(c);
  const auto split = from_config([&] { return split_dataset(ds); });
  const auto& which = c.str("classify.eval_split");
  DatasetView view;
  if (which == "test") {
    view = split.test;
  } else if (which == "val") {
    view = split.val;
  } else if (which == "train") {
    view = split.train;
  } else if (which == "all") {
    view = DatasetView::all(ds);
  } else {
    throw ConfigError("classify.eval_split must be train, val, test or all");
  }
  std::vector<int> topk;
  for (auto k : c.int_list("classify.topk")) topk.push_back(static_cast<int>(k));
  const auto report = from_config([&] { return evaluate(model, view, topk); });
  std::cout << format_report_table(report);
  if (c.has("run.output")) {
    const fs::path out = c.str("run.output");
    write_text(out / "report.txt", format_report_table(report));
    write_text(out / "report.kv", format_report_kv(report));
    write_text(out / "confusion.csv", format_confusion_csv(report));
    write_resolved(c, "eval", out / "freqscope-eval.conf");
  }
  return kExitOk;
}

// -------------------------------------------------------------- keystrokes

std::vector<double> to_timing_vector(const KeystrokeReport& r) {
  return {r.inter_key_timings_ms.begin(), r.inter_key_timings_ms.end()};
}

int keystrokes_dataset(const Config& c, const KeystrokeParams& kp) {
  const auto ds = load_dataset(c.str("run.data"));
  std::map<std::string, std::vector<TimingVector>> timings_by_password;
  for (auto& label : ds.classes) {
    for (auto& t : ds.measurements.at(label)) {
      timings_by_password[label].push_back(to_timing_vector(detect_keystrokes(t, kp)));
    }
  }
  PasswordTrainOptions opts;
  const auto per_label = c.integer("keystroke.per_label");
  if (per_label < 2) throw ConfigError("keystroke.per_label must be >= 2");
  opts.per_label = static_cast<std::size_t>(per_label);
  opts.k = static_cast<int>(c.integer("keystroke.k"));
  const auto seed = static_cast<std::uint64_t>(c.integer("run.seed"));
  const auto trained = from_config([&] { return train_password_model(timings_by_password, seed, opts); });
  std::printf("password model: %zu passwords, %zu training and %zu test vectors, length %zu\n",
              trained.model.password_labels.size(), trained.train.size(), trained.test.size(),
              trained.model.timing_length);
  if (c.has("keystroke.model_out")) {
    save_password_model(trained.model, c.str("keystroke.model_out"),
                        {{"dataset", c.str("run.data")}, {"split_seed", std::to_string(seed)}});
    write_resolved(c, "keystrokes", c.str("keystroke.model_out") + ".conf");
  }
  const auto guesses = c.integer("keystroke.guesses");
  if (guesses > 0) {
    const auto curve = from_config([&] {
      return guess_curve(trained.model, trained.test, static_cast<std::size_t>(guesses));
    });
    std::ostringstream dat;
    dat << "# guesses accuracy\n";
    for (std::size_t g = 0; g < curve.size(); ++g) {
      std::printf("guess %-3zu %.4f\n", g + 1, curve[g]);
      dat << g + 1 << ' ' << curve[g] << '\n';
    }
    if (c.has("run.output")) write_text(fs::path(c.str("run.output")) / "guess_curve.dat", dat.str());
  }
  if (c.has("run.output")) {
    write_resolved(c, "keystrokes", fs::path(c.str("run.output")) / "freqscope-keystrokes.conf");
  }
  return kExitOk;
}

int cmd_keystrokes(const Config& c) {
  const auto kp = keystroke_params_from(c);
  if (c.has("run.data")) return keystrokes_dataset(c, kp);

  FrequencyTrace trace;
  const auto& source = c.str("run.source");
  if (c.has("run.trace") || source == "replay") {
    trace = load_trace(require(c, "run.trace", "--trace"));
  } else if (source == "sim") {
    const auto password = require(c, "keystroke.password", "--password");
    const auto cfg = sim_config_from(c);
    trace = simulate_typing(cfg, password, cfg.seed, {}, kp.sample_interval_ms).trace;
  } else if (source == "sysfs") {
    CollectPlan plan;
    plan.interval_ms = kp.sample_interval_ms;
    const auto duration = c.integer("keystroke.duration_ms");
    if (duration < kp.sample_interval_ms) throw ConfigError("keystroke.duration_ms too short");
    plan.samples_per_measurement = static_cast<std::size_t>(duration / kp.sample_interval_ms);
    plan.inter_measurement_sleep_ms = 0;
    auto src = open_source(c, &plan);
    trace = collect(plan, src, run_hook_command).front();
  } else {
    throw ConfigError("run.source must be sim, replay or sysfs");
  }

  const auto report = detect_keystrokes(trace, kp);
  std::string text = format_keystroke_report(report);
  if (c.has("run.model")) {
    const auto model = load_password_model(c.str("run.model"));
    const auto ranking = model.rank(to_timing_vector(report));
    const auto guesses = std::max<std::int64_t>(1, c.integer("keystroke.guesses"));
    for (std::size_t g = 0; g < ranking.size() && g < static_cast<std::size_t>(guesses); ++g) {
      text += "guess." + std::to_string(g + 1) + "=" + percent_encode(ranking[g].label) + "\n";
    }
  }
  std::cout << text;
  if (c.has("run.output")) {
    const fs::path out = c.str("run.output");
    write_text(out / "keystrokes.kv", text);
    write_resolved(c, "keystrokes", out / "freqscope-keystrokes.conf");
  }
  return kExitOk;
}

// ------------------------------------------------------------------ defend

std::vector<Defense> parse_sweep(const Config& c) {
  const auto seed = static_cast<std::uint64_t>(c.integer("run.seed"));
  std::vector<Defense> out;
  for (auto& entry : c.string_list("defend.sweep")) {
    const auto colon = entry.find(':');
    const auto kind = entry.substr(0, colon);
    const auto params = colon == std::string::npos ? std::vector<std::string>{}
                                                    : detail::split(entry.substr(colon + 1), ',');
    auto number = [&](const std::string& p) {
      auto v = detail::parse_double(p);
      if (!v) throw ConfigError("defend.sweep: '" + p + "' is not a number");
      return *v;
    };
    if (kind == "access_restrict") {
      throw ConfigError("access_restrict acts on the source; use 'collect --restrict'");
    }
    if (params.empty()) throw ConfigError("defend.sweep: '" + kind + "' needs parameters");
    for (auto& p : params) {
      Defense d;
      if (kind == "resolution_reduce") {
        ResolutionReduce rr{static_cast<int>(number(p)), std::nullopt};
        if (c.boolean("defend.random_phase")) rr.phase_seed = seed;
        if (rr.factor < 1) throw ConfigError("resolution factor must be >= 1");
        d.kind = rr;
        if (rr.factor == 1) {
          out.push_back(d);  // baseline point, not validated as a defense
          continue;
        }
      } else if (kind == "noise_inject") {
        NoiseInject ni;
        ni.burst_rate_hz = number(p);
        ni.burst_height = c.real("defend.noise_height");
        ni.seed = c.has("defend.noise_seed") ? static_cast<std::uint64_t>(c.integer("defend.noise_seed")) : seed;
        d.kind = ni;
      } else if (kind == "constant_mask") {
        d.kind = ConstantMask{static_cast<std::int64_t>(number(p))};
      } else {
        throw ConfigError("unknown defense '" + kind + "'");
      }
      from_config([&] { d.validate(); return 0; });
      out.push_back(d);
    }
  }
  if (out.empty()) throw ConfigError("defend.sweep is empty");
  return out;
}

int cmd_defend(const Config& c) {
  const auto defenses = parse_sweep(c);
  const auto params = classifier_params_from(c);
  const auto ds = load_for_split(c);
  const auto rows = from_config([&] { return run_sweep(ds, defenses, params); });
  const auto csv = format_sweep_csv(rows);
  std::cout << csv;
  if (c.has("run.output")) {
    const fs::path out = c.str("run.output");
    write_text(out / "sweep.csv", csv);
    write_text(out / "sweep.dat", format_sweep_plot(rows));
    write_resolved(c, "defend", out / "freqscope-defend.conf");
  }
  return kExitOk;
}

// ------------------------------------------------------------------ report

int cmd_report(const Config& c) {
  const auto inputs = c.string_list("report.inputs");
  if (inputs.empty()) throw ConfigError("--input is required [report.inputs]");
  std::vector<std::pair<std::string, EvalReport>> reports;
  std::vector<SweepRow> sweep;
  for (auto& in : inputs) {
    const auto text = read_file(in);
    if (text.rfind("defense,", 0) == 0) {
      for (auto& r : parse_sweep_csv(text)) sweep.push_back(r);
    } else {
      reports.emplace_back(in, parse_report_kv(text));
    }
  }
  std::ostringstream plot;
  char buf[256];
  if (!reports.empty()) {
    std::set<int> ks;
    for (auto& [name, r] : reports) {
      for (auto& [k, acc] : r.topk_accuracy) {
        if (k != 1) ks.insert(k);
      }
    }
    std::printf("%-40s %6s %8s", "report", "items", "top-1");
    for (int k : ks) std::printf("   top-%-2d", k);
    std::printf("\n");
    plot << "# index top1";
    for (int k : ks) plot << " top" << k;
    plot << "  (report)\n";
    std::size_t idx = 0;
    for (auto& [name, r] : reports) {
      std::snprintf(buf, sizeof buf, "%-40s %6zu %8.4f", name.c_str(), r.total, r.top1_accuracy);
      std::string line = buf;
      plot << idx++ << ' ' << r.top1_accuracy;
      for (int k : ks) {
        auto it = r.topk_accuracy.find(k);
        std::snprintf(buf, sizeof buf, " %8s", it == r.topk_accuracy.end() ? "-" : "");
        if (it != r.topk_accuracy.end()) std::snprintf(buf, sizeof buf, " %8.4f", it->second);
        line += buf;
        plot << ' ' << (it == r.topk_accuracy.end() ? std::string("nan") : std::to_string(it->second));
      }
      std::printf("%s\n", line.c_str());
      plot << "  # " << name << '\n';
    }
  }
  if (!sweep.empty()) {
    if (!reports.empty()) {
      std::printf("\n");
      plot << "\n\n";
    }
    std::printf("%-20s %-14s %12s %14s\n", "defense", "param", "top1_clean", "top1_defended");
    for (auto& r : sweep) {
      std::printf("%-20s %-14s %12.4f %14.4f\n", r.defense.c_str(), r.param.c_str(), r.top1_clean,
                  r.top1_defended);
    }
    plot << format_sweep_plot(sweep);
  }
  if (c.has("report.plot")) {
    write_text(c.str("report.plot"), plot.str());
    write_resolved(c, "report", c.str("report.plot") + ".conf");
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CPU frequency side-channel toolkit: simulate governors, collect traces, "
               "fingerprint websites, infer keystrokes and evaluate countermeasures"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config_files, "config file(s) with 'section.key = value' lines")
      ->check(CLI::ExistingFile);
  app.add_option("--set", g.assignments, "override one config key: section.key=value");

  std::map<std::string, Command> cmds;
  auto make = [&](const std::string& name, const std::string& help) -> Command& {
    auto& cmd = cmds[name];
    cmd.app = app.add_subcommand(name, help);
    cmd.bind("--seed", "run.seed", "seed");
    cmd.bind("--source", "run.source", "frequency source: sim, replay or sysfs");
    return cmd;
  };
  auto sim_flags = [](Command& cmd) {
    cmd.bind("--profile", "sim.profile", "device profile: comet_lake, tiger_lake, ryzen5, cortex_a73");
    cmd.bind("--governor", "sim.governor", "scaling governor");
    cmd.bind("--set-speed", "sim.set_speed_khz", "userspace frequency in kHz");
    cmd.bind("--turbo", "sim.turbo", "auto, on or off");
  };
  auto classifier_flags = [](Command& cmd) {
    cmd.bind("--model-kind", "classify.model", "knn or forest");
    cmd.bind("--k", "classify.k", "KNN neighbours");
    cmd.bind("--trees", "classify.trees", "forest size");
    cmd.bind("--max-depth", "classify.max_depth", "tree depth limit");
    cmd.bind("--normalization", "classify.normalization", "none or minmax_per_profile");
    cmd.bind("--split", "classify.split", "train,val,test fractions");
  };

  auto& simulate = make("simulate", "generate a synthetic labeled dataset through the governor simulator");
  simulate.bind("--kind", "simulate.kind", "website or keystrokes");
  simulate.bind("--classes", "simulate.classes", "number of websites");
  simulate.bind("--measurements", "simulate.measurements", "measurements per website");
  simulate.bind("--samples", "simulate.samples", "samples per measurement");
  simulate.bind("--interval-ms", "simulate.interval_ms", "sampling interval");
  simulate.bind("--passwords", "simulate.passwords", "password list (keystrokes)");
  simulate.bind("--per-label", "simulate.per_label", "typing sessions per password");
  simulate.bind("--out", "run.output", "dataset directory");
  sim_flags(simulate);

  auto& collect_cmd = make("collect", "sample a frequency source into a dataset directory");
  collect_cmd.bind("--label", "collect.label", "class label");
  collect_cmd.bind("--interval-ms", "collect.interval_ms", "sampling interval T_i");
  collect_cmd.bind("--samples", "collect.samples", "samples per measurement N_s");
  collect_cmd.bind("--measurements", "collect.measurements", "measurements N_m");
  collect_cmd.bind("--pre-hook", "collect.pre_hook", "command run before each measurement");
  collect_cmd.bind("--post-hook", "collect.post_hook", "command run after each measurement");
  collect_cmd.bind("--sleep-ms", "collect.inter_measurement_sleep_ms", "rest between measurements");
  collect_cmd.bind("--replay", "collect.replay", "trace file for --source replay");
  collect_cmd.bind("--policy", "collect.sysfs_policy", "cpufreq policy for --source sysfs");
  collect_cmd.bind("--device", "collect.device", "device name recorded in sysfs traces");
  collect_cmd.bind("--workload", "sim.workload", "website, idle or noise (sim source)");
  collect_cmd.bind("--class-id", "sim.class_id", "website class (sim source)");
  collect_cmd.bind_flag("--restrict", "collect.restrict", "mask the source (access restriction)");
  collect_cmd.bind("--out", "run.output", "dataset directory");
  sim_flags(collect_cmd);

  auto& train = make("train", "train a website classifier on a dataset's training split");
  train.bind("--data", "run.data", "dataset directory");
  train.bind("--out", "run.output", "model file to write");
  classifier_flags(train);

  auto& eval = make("eval", "evaluate a model on a dataset split");
  eval.bind("--data", "run.data", "dataset directory");
  eval.bind("--model", "run.model", "model file");
  eval.bind("--topk", "classify.topk", "comma-separated k values");
  eval.bind("--eval-split", "classify.eval_split", "train, val, test or all");
  eval.bind("--out", "run.output", "directory for report.txt, report.kv, confusion.csv");

  auto& keys = make("keystrokes", "detect key presses, extract timings, recover passwords");
  keys.defaults = {{"sim.profile", "cortex_a73"}};
  keys.bind("--trace", "run.trace", "trace file to analyse");
  keys.bind("--password", "keystroke.password", "password typed by the sim source");
  keys.bind("--duration-ms", "keystroke.duration_ms", "sampling time for --source sysfs");
  keys.bind("--data", "run.data", "typing dataset (one class per password)");
  keys.bind("--model", "run.model", "password model used to rank a single trace");
  keys.bind("--model-out", "keystroke.model_out", "save the password model trained from --data");
  keys.bind("--per-label", "keystroke.per_label", "measurements per password");
  keys.bind("--guess-curve", "keystroke.guesses", "report accuracy within the first N guesses");
  keys.bind("--out", "run.output", "output directory");
  keys.bind("--policy", "collect.sysfs_policy", "cpufreq policy for --source sysfs");
  sim_flags(keys);

  auto& defend = make("defend", "evaluate countermeasures as a parameter sweep");
  defend.bind("--data", "run.data", "dataset directory");
  defend.bind("--sweep", "defend.sweep", "e.g. 'resolution_reduce:1,2,5,10;constant_mask:1400000'");
  defend.bind("--noise-height", "defend.noise_height", "noise burst height (fraction of range)");
  defend.bind("--out", "run.output", "directory for sweep.csv and sweep.dat");
  classifier_flags(defend);

  auto& report = make("report", "render eval reports and sweeps as tables and plot data");
  report.bind("--input", "report.inputs", "report.kv or sweep.csv files separated by ';'");
  report.bind("--plot-out", "report.plot", "plot-data file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    for (auto& [name, cmd] : cmds) {
      if (!cmd.app->parsed()) continue;
      const auto c = resolve(cmd, g);
      const auto& source = c.str("run.source");
      if (source != "sim" && source != "replay" && source != "sysfs") {
        throw ConfigError("run.source must be sim, replay or sysfs, got '" + source + "'");
      }
      if (name == "simulate" && source != "sim") {
        throw ConfigError("simulate only generates data with --source sim");
      }
      if (name == "simulate") return cmd_simulate(c);
      if (name == "collect") return cmd_collect(c);
      if (name == "train") return cmd_train(c);
      if (name == "eval") return cmd_eval(c);
      if (name == "keystrokes") return cmd_keystrokes(c);
      if (name == "defend") return cmd_defend(c);
      if (name == "report") return cmd_report(c);
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "freqscope: %s\n", e.what());
    return e.exit_code();
  } catch (const fs::filesystem_error& e) {
    std::fprintf(stderr, "freqscope: %s\n", e.what());
    return kExitIo;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "freqscope: %s\n", e.what());
    return kExitFailure;
  }
  return kExitFailure;
}
