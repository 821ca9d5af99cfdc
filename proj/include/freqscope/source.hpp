#pragma once

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <thread>
#include <variant>

#include "freqscope/error.hpp"
#include "freqscope/governor.hpp"
#include "freqscope/trace.hpp"

namespace freqscope {

enum class AccessPolicy { kOpen, kMasked };

inline constexpr const char* kSysfsRootEnv = "FREQSCOPE_SYSFS_ROOT";
inline constexpr const char* kDefaultSysfsRoot = "/sys/devices/system/cpu";

// <root>/cpufreq/policy<N>/scaling_cur_freq, root taken from the environment
// override when set.
inline std::filesystem::path sysfs_freq_path(int policy = 0,
                                             std::optional<std::filesystem::path> root = {}) {
  if (!root) {
    const char* env = std::getenv(kSysfsRootEnv);
    root = env && *env ? std::filesystem::path(env) : std::filesystem::path(kDefaultSysfsRoot);
  }
  return *root / "cpufreq" / ("policy" + std::to_string(policy)) / "scaling_cur_freq";
}

// One frequency reader over a live sysfs file, a governor simulation, or a
// recorded trace. Single owner; not safe for concurrent use.
class FreqSource {
 public:
  enum class Backend { kSysfs, kSim, kReplay };

  static FreqSource sysfs(std::filesystem::path attribute, std::string device = "sysfs") {
    FreqSource s;
    s.backend_ = Sysfs{std::move(attribute), {}, false};
    s.device_ = std::move(device);
    return s;
  }

  // The simulated core starts already running tick 0 of the workload, so the
  // reading at time t equals sample t/tick of simulate(workload, cfg).
  static FreqSource sim(SimConfig cfg, WorkloadTrace workload) {
    cfg.validate();
    workload.validate();
    FreqSource s;
    Sim sim{std::move(cfg), std::move(workload), {}, 0, 0, 0};
    sim.state = initial_state(sim.cfg);
    sim.state = step_governor(sim.state, sim.workload.loads[0], sim.cfg, sim.workload.tick_ms);
    sim.next_tick = 1;
    s.device_ = sim.cfg.profile.name;
    s.backend_ = std::move(sim);
    return s;
  }

  static FreqSource replay(FrequencyTrace trace) {
    trace.validate();
    FreqSource s;
    s.device_ = trace.device;
    s.backend_ = Replay{std::move(trace), 0, 0};
    return s;
  }

  Backend backend() const { return static_cast<Backend>(backend_.index()); }
  const std::string& device() const { return device_; }
  AccessPolicy policy() const { return policy_; }
  void set_policy(AccessPolicy p) { policy_ = p; }

  std::int64_t read_freq() const {
    if (policy_ == AccessPolicy::kMasked) {
      throw AccessDenied("access to scaling_cur_freq is restricted");
    }
    if (auto* fs = std::get_if<Sysfs>(&backend_)) return read_sysfs(fs->path);
    if (auto* sim = std::get_if<Sim>(&backend_)) return sim->state.current_freq_khz;
    const auto& r = std::get<Replay>(backend_);
    if (r.cursor >= r.trace.samples.size()) throw SourceError("replay exhausted");
    return r.trace.samples[r.cursor];
  }

  // Virtual time for sim and replay; a sleep to an absolute deadline for sysfs.
  void advance(std::int64_t dt_ms) {
    if (dt_ms < 0) throw InvalidArgument("advance by a negative duration");
    if (dt_ms == 0) return;
    if (auto* fs = std::get_if<Sysfs>(&backend_)) {
      if (!fs->started) {
        fs->deadline = std::chrono::steady_clock::now();
        fs->started = true;
      }
      fs->deadline += std::chrono::milliseconds(dt_ms);
      std::this_thread::sleep_until(fs->deadline);
    } else if (auto* sim = std::get_if<Sim>(&backend_)) {
      sim->remainder_ms += dt_ms;
      const int tick = sim->workload.tick_ms;
      while (sim->remainder_ms >= tick) {
        const double load = sim->next_tick < sim->workload.loads.size()
                                ? sim->workload.loads[sim->next_tick]
                                : 0.0;  // idle once the workload ends
        sim->state = step_governor(sim->state, load, sim->cfg, tick);
        ++sim->next_tick;
        ++sim->steps;
        sim->remainder_ms -= tick;
      }
    } else {
      auto& r = std::get<Replay>(backend_);
      r.remainder_ms += dt_ms;
      r.cursor += static_cast<std::size_t>(r.remainder_ms / r.trace.interval_ms);
      r.remainder_ms %= r.trace.interval_ms;
      r.cursor = std::min(r.cursor, r.trace.samples.size());
    }
  }

  // Governor steps taken by advance() (sim backend).
  std::size_t sim_steps() const { return std::get<Sim>(backend_).steps; }
  const GovernorState& sim_state() const { return std::get<Sim>(backend_).state; }
  std::size_t replay_cursor() const { return std::get<Replay>(backend_).cursor; }

 private:
  struct Sysfs {
    std::filesystem::path path;
    std::chrono::steady_clock::time_point deadline;
    bool started;
  };
  struct Sim {
    SimConfig cfg;
    WorkloadTrace workload;
    GovernorState state;
    std::size_t next_tick;
    std::int64_t remainder_ms;
    std::size_t steps;
  };
  struct Replay {
    FrequencyTrace trace;
    std::size_t cursor;
    std::int64_t remainder_ms;
  };

  static std::int64_t read_sysfs(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw SourceError("cannot read " + path.string());
    std::string text;
    std::getline(in, text);
    auto v = detail::parse_int<std::int64_t>(text);
    if (!v || *v < 0) throw SourceError("unexpected contents in " + path.string());
    return *v;
  }

  FreqSource() = default;

  std::variant<Sysfs, Sim, Replay> backend_;
  AccessPolicy policy_ = AccessPolicy::kOpen;
  std::string device_;
};

}  // namespace freqscope
