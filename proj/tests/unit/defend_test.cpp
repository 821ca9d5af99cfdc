#include <gtest/gtest.h>

#include <set>

#include "freqscope/defend.hpp"
#include "freqscope/experiment.hpp"
#include "freqscope/sampler.hpp"

using namespace freqscope;

namespace {

FrequencyTrace noisy_trace(std::uint64_t seed, std::size_t n = 400) {
  const auto cfg = SimConfig::for_profile(profiles::ryzen5());
  return simulate(synth_workload(NoiseParams{n, 10, 8.0, 2, 10, 0.02}, seed), cfg);
}

LabeledDataset small_website_dataset() {
  WebsiteDatasetSpec spec;
  spec.classes = 5;
  spec.measurements = 10;
  spec.samples = 300;
  return simulate_website_dataset(SimConfig::for_profile(profiles::ryzen5()), spec, 17);
}

}  // namespace

TEST(Defend, ResolutionReduceHoldsEveryFactorReadings) {
  const auto t = noisy_trace(1);
  for (int f : {2, 5, 10}) {
    const auto out = apply_defense({ResolutionReduce{f, std::nullopt}}, t);
    for (std::size_t i = 0; i < t.samples.size(); ++i) {
      ASSERT_EQ(out.samples[i], t.samples[i - i % static_cast<std::size_t>(f)]) << f << " " << i;
    }
  }
}

TEST(Defend, ResolutionReducePhaseOffsetsTheGrid) {
  const auto t = noisy_trace(2);
  const Defense d{ResolutionReduce{10, 99}};
  std::set<std::size_t> phases;
  for (std::uint64_t stream = 0; stream < 40; ++stream) {
    const auto out = apply_defense(d, t, stream);
    EXPECT_EQ(out.samples, apply_defense(d, t, stream).samples);
    // Find the phase: the first index > 0 where the held value is refreshed
    // from its own position, then check the whole grid against it.
    std::size_t phase = 10;
    for (std::size_t p = 0; p < 10; ++p) {
      bool ok = true;
      for (std::size_t i = 0; i < t.samples.size() && ok; ++i) {
        const auto back = (i + 10 - p) % 10;
        const std::size_t anchor = i >= back ? i - back : 0;
        ok = out.samples[i] == t.samples[anchor];
      }
      if (ok) {
        phase = p;
        break;
      }
    }
    ASSERT_LT(phase, 10u) << "stream " << stream;
    phases.insert(phase);
  }
  EXPECT_GE(phases.size(), 5u);
}

TEST(Defend, NoiseInjectStaysOnTheProfile) {
  const auto t = noisy_trace(3);
  const auto p = profiles::ryzen5();
  NoiseInject ni;
  ni.burst_rate_hz = 10;
  ni.seed = 4;
  const auto out = apply_defense({ni}, t, 1);
  std::size_t changed = 0;
  for (std::size_t i = 0; i < t.samples.size(); ++i) {
    EXPECT_TRUE(p.is_pstate(out.samples[i]));
    EXPECT_GE(out.samples[i], t.samples[i]);
    changed += out.samples[i] != t.samples[i];
  }
  EXPECT_GT(changed, 20u);
  EXPECT_NE(apply_defense({ni}, t, 2).samples, out.samples);
  ni.burst_rate_hz = 0;
  EXPECT_EQ(apply_defense({ni}, t, 1).samples, t.samples);
}

TEST(Defend, ConstantMaskAndValidation) {
  const auto t = noisy_trace(4);
  const auto out = apply_defense({ConstantMask{2'000'000}}, t);
  EXPECT_EQ(out.samples, std::vector<std::int64_t>(t.samples.size(), 2'000'000));
  EXPECT_THROW(apply_defense({ConstantMask{2'050'000}}, t), InvalidArgument);
  EXPECT_THROW(apply_defense({ResolutionReduce{1, std::nullopt}}, t), InvalidArgument);
  EXPECT_THROW(apply_defense({AccessRestrict{}}, t), InvalidArgument);
  NoiseInject bad;
  bad.burst_height = 2;
  EXPECT_THROW(apply_defense({bad}, t), InvalidArgument);
}

TEST(Defend, AccessRestrictMasksTheSource) {
  auto src = FreqSource::replay(noisy_trace(5));
  EXPECT_THROW(apply_defense({ConstantMask{0}}, src), InvalidArgument);
  apply_defense({AccessRestrict{}}, src);
  EXPECT_THROW(src.read_freq(), AccessDenied);
}

TEST(Defend, DefendedDatasetKeepsShapeAndSplit) {
  const auto ds = small_website_dataset();
  const auto out = defend_dataset({ResolutionReduce{5, 1}}, ds);
  EXPECT_EQ(out.classes, ds.classes);
  EXPECT_EQ(out.shape(), ds.shape());
  EXPECT_EQ(out.split_seed, ds.split_seed);
  EXPECT_EQ(out.total(), ds.total());
}

TEST(Defend, SweepBaselineAndMask) {
  const auto ds = small_website_dataset();
  ClassifierParams params;
  const auto rows = run_sweep(ds, {{ResolutionReduce{1, std::nullopt}}, {ConstantMask{1'400'000}}},
                              params);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].defense, "resolution_reduce");
  EXPECT_EQ(rows[0].param, "1");
  EXPECT_EQ(rows[0].top1_defended, rows[0].top1_clean);
  EXPECT_EQ(rows[1].top1_clean, rows[0].top1_clean);
  EXPECT_GE(rows[0].top1_clean, 0.9);
  // Every masked trace is identical, so one class wins every vote.
  EXPECT_NEAR(rows[1].top1_defended, 0.2, 1e-9);

  const auto ev = evaluate_defense({ConstantMask{1'400'000}}, ds, params);
  EXPECT_EQ(ev.clean.top1_accuracy, rows[0].top1_clean);
  EXPECT_EQ(ev.defended.top1_accuracy, rows[1].top1_defended);
}

TEST(Defend, SweepCsvRoundTrip) {
  const std::vector<SweepRow> rows = {{"resolution_reduce", "10", 1.0, 0.53},
                                      {"noise_inject", "5Hz@0.5", 1.0, 0.25}};
  const auto back = parse_sweep_csv(format_sweep_csv(rows));
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].param, "5Hz@0.5");
  EXPECT_DOUBLE_EQ(back[0].top1_defended, 0.53);
  EXPECT_THROW(parse_sweep_csv("a,b\n"), ParseError);
  EXPECT_THROW(parse_sweep_csv("defense,param,top1_clean,top1_defended\nx,1,2\n"), ParseError);
  EXPECT_THROW(parse_sweep_csv("defense,param,top1_clean,top1_defended\nx,1,y,2\n"), ParseError);
  const auto plot = format_sweep_plot(rows);
  EXPECT_NE(plot.find("# noise_inject"), std::string::npos);
  EXPECT_NE(plot.find("0 10 0.53 1\n"), std::string::npos);
}
