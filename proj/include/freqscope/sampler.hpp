#pragma once

#include <cstdint>
#include <cstring>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <spawn.h>
#include <sys/wait.h>

#include "freqscope/error.hpp"
#include "freqscope/source.hpp"
#include "freqscope/trace.hpp"

extern char** environ;

namespace freqscope {

// One website (or app) worth of measurements: N_m traces of N_s readings
// taken every T_i milliseconds.
struct CollectPlan {
  int interval_ms = 10;
  std::size_t samples_per_measurement = 1000;
  std::size_t measurements = 1;
  std::string label;
  std::optional<std::string> pre_hook;   // e.g. open the page in a browser
  std::optional<std::string> post_hook;  // e.g. close the browser
  std::int64_t inter_measurement_sleep_ms = 1000;

  void validate() const {
    if (interval_ms < 1) throw InvalidArgument("interval_ms must be >= 1");
    if (samples_per_measurement < 1) throw InvalidArgument("samples per measurement must be >= 1");
    if (measurements < 1) throw InvalidArgument("measurement count must be >= 1");
    if (inter_measurement_sleep_ms < 0) throw InvalidArgument("inter-measurement sleep must be >= 0");
  }
};

struct HookContext {
  std::string label;
  std::size_t measurement = 0;
};

using HookRunner = std::function<void(const std::string& command, const HookContext&)>;

// Environment variables a hook inherits; everything else is dropped.
inline const std::vector<std::string>& hook_env_allowlist() {
  static const std::vector<std::string> keys = {
      "PATH", "HOME", "USER", "LOGNAME", "LANG", "LC_ALL", "TMPDIR",
      "DISPLAY", "WAYLAND_DISPLAY", "XDG_RUNTIME_DIR", "DBUS_SESSION_BUS_ADDRESS"};
  return keys;
}

// Runs `command` through /bin/sh with the allowlisted environment plus
// FREQSCOPE_LABEL and FREQSCOPE_MEASUREMENT. Non-zero exit is a HookError.
inline void run_hook_command(const std::string& command, const HookContext& ctx) {
  std::vector<std::string> env;
  for (auto& key : hook_env_allowlist()) {
    if (const char* v = std::getenv(key.c_str())) env.push_back(key + "=" + v);
  }
  for (char** e = environ; e && *e; ++e) {
    if (std::strncmp(*e, "FREQSCOPE_", 10) == 0) env.emplace_back(*e);
  }
  env.push_back("FREQSCOPE_LABEL=" + ctx.label);
  env.push_back("FREQSCOPE_MEASUREMENT=" + std::to_string(ctx.measurement));
  std::vector<char*> envp;
  for (auto& e : env) envp.push_back(e.data());
  envp.push_back(nullptr);

  std::string sh = "/bin/sh", dash_c = "-c", cmd = command;
  char* argv[] = {sh.data(), dash_c.data(), cmd.data(), nullptr};
  pid_t pid = 0;
  if (posix_spawn(&pid, "/bin/sh", nullptr, nullptr, argv, envp.data()) != 0) {
    throw HookError("cannot start hook '" + command + "'");
  }
  int status = 0;
  if (waitpid(pid, &status, 0) < 0 || !WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    throw HookError("hook '" + command + "' failed during measurement " +
                    std::to_string(ctx.measurement) + " of '" + ctx.label + "'");
  }
}

// Timed sampling loop: per measurement run the pre-hook, take N_s readings
// spaced T_i apart, run the post-hook, then rest. `on_trace` sees each trace as
// soon as it is complete, so callers keep finished work if a later one fails.
inline std::vector<FrequencyTrace> collect(
    const CollectPlan& plan, FreqSource& src, const HookRunner& hooks = run_hook_command,
    const std::function<void(std::size_t, const FrequencyTrace&)>& on_trace = {}) {
  plan.validate();
  std::vector<FrequencyTrace> out;
  out.reserve(plan.measurements);
  for (std::size_t m = 0; m < plan.measurements; ++m) {
    const HookContext ctx{plan.label, m};
    if (plan.pre_hook) hooks(*plan.pre_hook, ctx);
    FrequencyTrace t;
    t.interval_ms = plan.interval_ms;
    t.device = src.device();
    if (!plan.label.empty()) t.label = plan.label;
    t.samples.reserve(plan.samples_per_measurement);
    for (std::size_t j = 0; j < plan.samples_per_measurement; ++j) {
      t.samples.push_back(src.read_freq());
      src.advance(plan.interval_ms);
    }
    if (plan.post_hook) hooks(*plan.post_hook, ctx);
    if (on_trace) on_trace(m, t);
    out.push_back(std::move(t));
    src.advance(plan.inter_measurement_sleep_ms);
  }
  return out;
}

// Mean length of runs of identical consecutive values; 1.0 when every value
// differs from its predecessor.
inline double mean_run_length(const std::vector<std::int64_t>& values) {
  if (values.empty()) return 0.0;
  std::size_t runs = 1;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] != values[i - 1]) ++runs;
  }
  return static_cast<double>(values.size()) / static_cast<double>(runs);
}

// For each delay, reads `reads_per_delay` values spaced by that delay and
// reports their mean run length.
inline std::map<std::int64_t, double> repetitiveness(FreqSource& src,
                                                     const std::vector<std::int64_t>& delays_ms,
                                                     std::size_t reads_per_delay) {
  if (delays_ms.empty()) throw InvalidArgument("no delays given");
  if (reads_per_delay < 2) throw InvalidArgument("need at least 2 reads per delay");
  std::map<std::int64_t, double> out;
  for (auto delay : delays_ms) {
    if (delay < 0) throw InvalidArgument("negative delay");
    std::vector<std::int64_t> values;
    values.reserve(reads_per_delay);
    for (std::size_t i = 0; i < reads_per_delay; ++i) {
      values.push_back(src.read_freq());
      src.advance(delay);
    }
    out[delay] = mean_run_length(values);
  }
  return out;
}

}  // namespace freqscope
