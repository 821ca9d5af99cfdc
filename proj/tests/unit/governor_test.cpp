#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "freqscope/governor.hpp"
#include "freqscope/profile.hpp"
#include "freqscope/random.hpp"
#include "freqscope/workload.hpp"

using namespace freqscope;

namespace {

// Brute-force nearest P-state, ties to the higher one.
std::int64_t nearest_pstate(const std::vector<std::int64_t>& ps, double khz) {
  std::int64_t best = ps.front();
  for (auto f : ps) {
    const double d = std::abs(khz - static_cast<double>(f));
    const double bd = std::abs(khz - static_cast<double>(best));
    if (d < bd || (d == bd && f > best)) best = f;
  }
  return best;
}

WorkloadTrace constant_load(double load, std::size_t n, int tick_ms = 10) {
  return {std::vector<double>(n, load), tick_ms};
}

WorkloadTrace random_workload(Rng& rng, std::size_t n, int tick_ms = 10) {
  WorkloadTrace w;
  w.tick_ms = tick_ms;
  for (std::size_t i = 0; i < n; ++i) w.loads.push_back(rng.uniform());
  return w;
}

}  // namespace

TEST(Profiles, TableValues) {
  const auto cl = profiles::comet_lake();
  EXPECT_EQ(cl.min_freq_khz, 400'000);
  EXPECT_EQ(cl.max_freq_khz, 4'900'000);
  EXPECT_EQ(cl.base_freq_khz, 1'800'000);
  EXPECT_EQ(cl.turbo_ceiling_khz, 3'600'000);
  EXPECT_EQ(cl.default_governor, Governor::kPowersave);
  EXPECT_TRUE(cl.turbo_boost);

  const auto tl = profiles::tiger_lake();
  EXPECT_EQ(tl.min_freq_khz, 400'000);
  EXPECT_EQ(tl.max_freq_khz, 4'700'000);
  EXPECT_EQ(tl.base_freq_khz, 2'800'000);
  EXPECT_EQ(tl.default_governor, Governor::kPowersave);

  const auto r5 = profiles::ryzen5();
  EXPECT_EQ(r5.min_freq_khz, 1'400'000);
  EXPECT_EQ(r5.max_freq_khz, 4'060'000);
  EXPECT_EQ(r5.base_freq_khz, 1'700'000);
  EXPECT_EQ(r5.default_governor, Governor::kOndemand);
  EXPECT_TRUE(r5.supports(Governor::kSchedutil));
  EXPECT_FALSE(r5.supports(Governor::kInteractive));

  const auto a73 = profiles::cortex_a73();
  EXPECT_EQ(a73.pstates.size(), 23u);
  EXPECT_EQ(a73.min_freq_khz, 806'000);
  EXPECT_EQ(a73.max_freq_khz, 2'361'000);
  // Displayed to the table's precision: 0.8 GHz and 2.36 GHz.
  EXPECT_NEAR(a73.min_freq_khz / 1e6, 0.8, 0.01);
  EXPECT_NEAR(a73.max_freq_khz / 1e6, 2.36, 0.005);
  EXPECT_FALSE(a73.turbo_boost);
  EXPECT_EQ(a73.default_governor, Governor::kInteractive);
  EXPECT_FALSE(a73.supports(Governor::kSchedutil));

  for (auto& p : builtin_profiles()) EXPECT_NO_THROW(p.validate()) << p.name;
}

TEST(Profiles, InvalidProfilesRejected) {
  auto p = profiles::ryzen5();
  p.pstates = {1'400'000};
  EXPECT_THROW(p.validate(), InvalidArgument);
  p = profiles::ryzen5();
  p.pstates[3] = p.pstates[2];
  EXPECT_THROW(p.validate(), InvalidArgument);
  p = profiles::comet_lake();
  p.turbo_ceiling_khz = 1'000'000;  // below base
  EXPECT_THROW(p.validate(), InvalidArgument);
  p = profiles::comet_lake();
  p.base_freq_khz = 5'000'000;
  EXPECT_THROW(p.validate(), InvalidArgument);
  EXPECT_THROW(profile_by_name("pentium"), InvalidArgument);
}

TEST(Profiles, QuantizeMatchesBruteForce) {
  Rng rng(3);
  for (auto& p : builtin_profiles()) {
    for (int i = 0; i < 2000; ++i) {
      const double khz = rng.uniform(0.0, 6e6);
      ASSERT_EQ(p.quantize(khz), nearest_pstate(p.pstates, khz)) << p.name << " " << khz;
    }
    // Exact midpoints go up.
    for (std::size_t i = 1; i < p.pstates.size(); ++i) {
      const double mid = (p.pstates[i - 1] + p.pstates[i]) / 2.0;
      EXPECT_EQ(p.quantize(mid), p.pstates[i]);
    }
  }
}

TEST(Governor, OndemandHalfLoadOnRyzen) {
  const auto cfg = SimConfig::for_profile(profiles::ryzen5(), Governor::kOndemand);
  const auto t = simulate(constant_load(0.5, 1), cfg);
  const double target = 1'400'000 + 0.5 * (4'060'000 - 1'400'000);
  EXPECT_EQ(t.samples[0], nearest_pstate(profiles::ryzen5().pstates, target));
  EXPECT_EQ(t.samples[0], 2'700'000);
}

TEST(Governor, OndemandBounds) {
  for (auto& p : {profiles::ryzen5(), profiles::cortex_a73()}) {
    auto cfg = SimConfig::for_profile(p, Governor::kOndemand);
    EXPECT_EQ(simulate(constant_load(0.0, 50), cfg).samples,
              std::vector<std::int64_t>(50, p.min_freq_khz));
    EXPECT_EQ(simulate(constant_load(1.0, 1), cfg).samples[0], p.max_freq_khz);
  }
  // Boosted intel part: load-following powersave tops out at the ceiling.
  const auto cfg = SimConfig::for_profile(profiles::comet_lake());
  EXPECT_EQ(simulate(constant_load(1.0, 1), cfg).samples[0], 3'600'000);
}

TEST(Governor, PinnedGovernors) {
  Rng rng(9);
  const auto w = random_workload(rng, 300);
  auto cfg = SimConfig::for_profile(profiles::ryzen5(), Governor::kPerformance);
  EXPECT_EQ(simulate(w, cfg).samples, std::vector<std::int64_t>(300, 4'060'000));
  cfg.governor = Governor::kPowersave;
  EXPECT_EQ(simulate(w, cfg).samples, std::vector<std::int64_t>(300, 1'400'000));
  cfg = SimConfig::for_profile(profiles::comet_lake(), Governor::kPerformance);
  EXPECT_EQ(simulate(w, cfg).samples, std::vector<std::int64_t>(300, 3'600'000));
  cfg.turbo.enabled = false;
  EXPECT_EQ(simulate(w, cfg).samples, std::vector<std::int64_t>(300, 4'900'000));
}

TEST(Governor, UserspaceAndValidation) {
  auto cfg = SimConfig::for_profile(profiles::ryzen5(), Governor::kUserspace);
  EXPECT_THROW(simulate(constant_load(0.0, 5), cfg), InvalidArgument);
  cfg.set_speed_khz = 2'430'000;
  cfg.turbo.enabled = false;
  EXPECT_EQ(simulate(constant_load(0.7, 5), cfg).samples,
            std::vector<std::int64_t>(5, 2'400'000));
  cfg.set_speed_khz = 9'000'000;
  EXPECT_THROW(cfg.validate(), InvalidArgument);

  auto bad = SimConfig::for_profile(profiles::ryzen5(), Governor::kInteractive);
  EXPECT_THROW(bad.validate(), InvalidArgument);
  bad.allow_unsupported_governor = true;
  EXPECT_NO_THROW(bad.validate());
  EXPECT_THROW(parse_governor("turbo"), InvalidArgument);
  for (auto name : kGovernorNames) EXPECT_EQ(to_string(parse_governor(name)), name);

  auto ondemand = SimConfig::for_profile(profiles::ryzen5());
  EXPECT_THROW(step_governor(initial_state(ondemand), 1.5, ondemand, 10), InvalidArgument);
}

TEST(Governor, UserspaceTurboBudgetFallsBackToBase) {
  // Asking for 1.8 GHz needs turbo above the 1.7 GHz base; once the budget is
  // spent the part drops to base until idle ticks refill it.
  auto cfg = SimConfig::for_profile(profiles::ryzen5(), Governor::kUserspace);
  cfg.set_speed_khz = 1'800'000;
  const auto busy = simulate(constant_load(0.9, 60), cfg);
  EXPECT_EQ(busy.samples.front(), 1'800'000);
  EXPECT_EQ(busy.samples.back(), 1'700'000);
}

TEST(Governor, TurboBudgetIsALeakyBucket) {
  auto cfg = SimConfig::for_profile(profiles::comet_lake());
  // 20 boosted ticks drain a full budget at cost 0.05.
  const auto t = simulate(constant_load(1.0, 40), cfg);
  for (int i = 0; i < 19; ++i) EXPECT_EQ(t.samples[i], 3'600'000) << i;
  for (int i = 21; i < 40; ++i) EXPECT_EQ(t.samples[i], 1'800'000) << i;

  auto s = initial_state(cfg);
  for (int i = 0; i < 40; ++i) s = step_governor(s, 1.0, cfg, 10);
  EXPECT_GE(s.turbo_budget, 0.0);
  EXPECT_LT(s.turbo_budget, cfg.turbo.budget_cost_per_boost_tick);
  for (int i = 0; i < 10; ++i) s = step_governor(s, 0.0, cfg, 10);
  EXPECT_NEAR(s.turbo_budget, 0.5, 0.05 + 1e-9);
  s = step_governor(s, 1.0, cfg, 10);
  EXPECT_EQ(s.current_freq_khz, 3'600'000);
}

TEST(Governor, ConservativeWalksOneStepPerTick) {
  const auto cfg = SimConfig::for_profile(profiles::ryzen5(), Governor::kConservative);
  auto no_turbo = cfg;
  no_turbo.turbo.enabled = false;
  const auto t = simulate(constant_load(1.0, 40), no_turbo);
  for (std::size_t i = 0; i < 26; ++i) {
    EXPECT_EQ(t.samples[i], 1'500'000 + 100'000 * static_cast<std::int64_t>(i)) << i;
  }
  EXPECT_EQ(t.samples[26], 4'060'000);
  EXPECT_EQ(t.samples.back(), 4'060'000);
}

TEST(Governor, SchedutilFollowsPelt) {
  auto cfg = SimConfig::for_profile(profiles::ryzen5(), Governor::kSchedutil);
  cfg.turbo.enabled = false;
  Rng rng(17);
  const auto w = random_workload(rng, 200);
  const auto t = simulate(w, cfg);
  const auto& p = cfg.profile;
  // Oracle: exponential average with a 32 ms half-life, 25% headroom.
  double pelt = 0.0;
  const double decay = std::pow(0.5, 10.0 / 32.0);
  for (std::size_t i = 0; i < w.loads.size(); ++i) {
    pelt = (1.0 - decay) * w.loads[i] + decay * pelt;
    const double util = std::min(1.0, 1.25 * pelt);
    const double target = p.min_freq_khz + util * (p.max_freq_khz - p.min_freq_khz);
    ASSERT_EQ(t.samples[i], nearest_pstate(p.pstates, target)) << i;
  }
}

TEST(Governor, InteractiveSpikeHoldsHispeed) {
  const auto cfg = SimConfig::for_profile(profiles::cortex_a73());
  EXPECT_EQ(cfg.hispeed_khz(), nearest_pstate(cfg.profile.pstates, 1'230'000));
  EXPECT_GE(cfg.hispeed_khz(), 1'200'000);
  for (int tick : {10, 20}) {
    WorkloadTrace w = constant_load(0.0, 40, tick);
    w.loads[10] = 0.35;
    const auto t = simulate(w, cfg);
    const std::size_t hold_ticks = static_cast<std::size_t>(80 / tick);
    for (std::size_t i = 10; i < 10 + hold_ticks; ++i) {
      EXPECT_GE(t.samples[i], cfg.hispeed_khz()) << "tick " << tick << " sample " << i;
    }
    EXPECT_EQ(t.samples[9], cfg.profile.min_freq_khz);
    EXPECT_EQ(t.samples.back(), cfg.profile.min_freq_khz);
  }
}

TEST(Governor, InteractiveRateLimit) {
  // Every change except an upward ramp on a trigger tick waits out
  // min_sample_time since the previous change.
  const auto cfg = SimConfig::for_profile(profiles::cortex_a73());
  Rng rng(23);
  for (int tick : {10, 20}) {
    for (int trial = 0; trial < 50; ++trial) {
      const auto w = random_workload(rng, 200, tick);
      auto s = initial_state(cfg);
      int since = 1 << 20;
      for (double l : w.loads) {
        const auto prev = s.current_freq_khz;
        s = step_governor(s, l, cfg, tick);
        since += tick;
        if (s.current_freq_khz == prev) continue;
        const bool ramp = s.triggered && s.current_freq_khz > prev;
        if (!ramp) {
          ASSERT_GE(since, cfg.interactive.min_sample_time_ms);
        }
        since = 0;
      }
    }
  }
  // At 10 ms ticks a decrease right after a change waits one more tick.
  WorkloadTrace w = constant_load(0.0, 10, 10);
  w.loads[2] = 1.0;
  auto s = initial_state(cfg);
  std::vector<std::int64_t> f;
  for (double l : w.loads) {
    s = step_governor(s, l, cfg, 10);
    f.push_back(s.current_freq_khz);
  }
  EXPECT_EQ(f[2], cfg.profile.max_freq_khz);
  EXPECT_EQ(f[3], cfg.profile.max_freq_khz);  // 10 ms since change: held
  EXPECT_EQ(f[4], cfg.hispeed_khz());         // still boosted
}

TEST(Governor, IdleOnPhoneStaysAtMinimum) {
  const auto cfg = SimConfig::for_profile(profiles::cortex_a73());
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto w = synth_workload(IdleParams{1000, 20, 0.02}, seed);
    const auto t = simulate(w, cfg);
    const auto at_min = std::count(t.samples.begin(), t.samples.end(), cfg.profile.min_freq_khz);
    EXPECT_GE(static_cast<double>(at_min), 0.95 * t.samples.size());
  }
}

TEST(Governor, Determinism) {
  Rng rng(31);
  const auto w = random_workload(rng, 500);
  for (auto g : {Governor::kOndemand, Governor::kConservative, Governor::kSchedutil}) {
    const auto cfg = SimConfig::for_profile(profiles::ryzen5(), g);
    EXPECT_EQ(simulate(w, cfg), simulate(w, cfg));
  }
}

TEST(Governor, OndemandMonotoneWithoutTurbo) {
  Rng rng(41);
  auto cfg = SimConfig::for_profile(profiles::ryzen5(), Governor::kOndemand);
  cfg.turbo.enabled = false;
  for (int trial = 0; trial < 100; ++trial) {
    const auto lo = random_workload(rng, 100);
    auto hi = lo;
    for (auto& l : hi.loads) l = std::min(1.0, l + rng.uniform(0.0, 0.3));
    const auto a = simulate(lo, cfg), b = simulate(hi, cfg);
    for (std::size_t i = 0; i < a.samples.size(); ++i) ASSERT_LE(a.samples[i], b.samples[i]);
  }
}

TEST(Workload, KeystrokePulses) {
  KeystrokeWorkloadParams p;
  p.press_times_ms = {1000, 2000};
  p.duration_ms = 3000;
  const auto w = synth_workload(p, 3);
  EXPECT_EQ(w.loads.size(), 150u);
  int pulses = 0;
  for (std::size_t i = 0; i < w.loads.size(); ++i) {
    const bool high = w.loads[i] >= p.pulse_load_min;
    const bool prev = i > 0 && w.loads[i - 1] >= p.pulse_load_min;
    if (high && !prev) ++pulses;
  }
  EXPECT_EQ(pulses, 2);
  EXPECT_GE(w.loads[50], p.pulse_load_min);
  EXPECT_LT(w.loads[49], p.pulse_load_min);

  p.press_times_ms = {3000};
  EXPECT_THROW(synth_workload(p, 0), InvalidArgument);
  p.press_times_ms = {500, 400};
  EXPECT_THROW(synth_workload(p, 0), InvalidArgument);
}

TEST(Workload, WebsiteSkeletonIsPerClass) {
  WebsiteParams p;
  p.class_id = 7;
  p.jitter_sigma = 0.0;
  EXPECT_EQ(synth_workload(p, 1).loads, synth_workload(p, 2).loads);
  p.jitter_sigma = 0.1;
  const auto a = synth_workload(p, 1), b = synth_workload(p, 2);
  EXPECT_NE(a.loads, b.loads);
  EXPECT_EQ(a.loads, synth_workload(p, 1).loads);
  p.jitter_sigma = 0.0;
  const auto skeleton7 = synth_workload(p, 1);
  p.class_id = 8;
  EXPECT_NE(synth_workload(p, 1).loads, skeleton7.loads);
  p.ticks = 50;
  EXPECT_THROW(synth_workload(p, 1), InvalidArgument);
}

TEST(Workload, IdleAndNoise) {
  const auto idle = synth_workload(IdleParams{}, 4);
  for (double l : idle.loads) EXPECT_LT(l, 0.05);
  EXPECT_THROW(synth_workload(IdleParams{100, 10, 0.2}, 4), InvalidArgument);
  const auto noise = synth_workload(NoiseParams{}, 4);
  EXPECT_GT(*std::max_element(noise.loads.begin(), noise.loads.end()), 0.1);
  EXPECT_EQ(noise.loads, synth_workload(NoiseParams{}, 4).loads);
}
