#pragma once

#include <string>
#include <vector>

#include "freqscope/error.hpp"
#include "freqscope/profile.hpp"
#include "freqscope/trace.hpp"

namespace freqscope {

enum class Normalization { kNone, kMinmaxPerProfile };

inline std::string_view to_string(Normalization n) {
  return n == Normalization::kNone ? "none" : "minmax_per_profile";
}

inline Normalization parse_normalization(std::string_view s) {
  if (s == "none") return Normalization::kNone;
  if (s == "minmax_per_profile" || s == "minmax") return Normalization::kMinmaxPerProfile;
  throw InvalidArgument("unknown normalization '" + std::string(s) + "'");
}

// Raw samples are the features; one value per reading.
struct FeatureVector {
  std::vector<double> values;
  Normalization normalization = Normalization::kNone;
};

// Maps [min_freq, effective max] of `profile` onto [0, 1]. A vector that is
// already normalized is returned unchanged.
inline FeatureVector normalize(FeatureVector fv, const DeviceProfile& profile) {
  if (fv.normalization == Normalization::kMinmaxPerProfile) return fv;
  const double lo = static_cast<double>(profile.min_freq_khz);
  const double span = static_cast<double>(profile.effective_max_khz()) - lo;
  for (auto& v : fv.values) v = (v - lo) / span;
  fv.normalization = Normalization::kMinmaxPerProfile;
  return fv;
}

inline FeatureVector to_features(const FrequencyTrace& t, Normalization n) {
  FeatureVector fv;
  fv.values.assign(t.samples.begin(), t.samples.end());
  if (n == Normalization::kMinmaxPerProfile) {
    auto profile = find_profile(t.device);
    if (!profile) {
      throw InvalidArgument("minmax normalization needs a known device, trace has '" +
                            t.device + "'");
    }
    fv = normalize(std::move(fv), *profile);
  }
  return fv;
}

}  // namespace freqscope
