#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "freqscope/error.hpp"

namespace freqscope {

struct RankedLabel {
  std::string label;
  double score = 0.0;

  bool operator==(const RankedLabel&) const = default;
};

// Best first. Classifiers in this library always rank every known label.
using Ranking = std::vector<RankedLabel>;

struct KnnModel {
  int k = 4;
  std::vector<std::vector<double>> points;
  std::vector<std::string> labels;

  void add(std::vector<double> x, std::string label) {
    if (!points.empty() && x.size() != points.front().size()) {
      throw InvalidArgument("training vector dimension mismatch");
    }
    points.push_back(std::move(x));
    labels.push_back(std::move(label));
  }

  std::size_t size() const { return points.size(); }
  std::size_t dim() const { return points.empty() ? 0 : points.front().size(); }
};

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return sum;
}

// Votes among the k nearest points (euclidean, ties between equidistant points
// by training order). Labels rank by votes, then smaller mean neighbour
// distance, then label order. Labels without votes follow, ordered by their
// closest training point, then label order. Score is the vote fraction.
inline Ranking knn_predict(const KnnModel& model, std::span<const double> x,
                           std::size_t k_out) {
  if (model.points.empty()) throw InvalidArgument("KNN model has no training points");
  if (x.size() != model.dim()) {
    throw InvalidArgument("query has dimension " + std::to_string(x.size()) +
                          ", model expects " + std::to_string(model.dim()));
  }
  if (k_out < 1) throw InvalidArgument("k_out must be >= 1");
  if (model.k < 1) throw InvalidArgument("KNN k must be >= 1");

  const std::size_t n = model.points.size();
  std::vector<std::pair<double, std::size_t>> dist(n);
  for (std::size_t i = 0; i < n; ++i) dist[i] = {squared_distance(model.points[i], x), i};

  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(model.k), n);
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());

  struct Tally {
    int votes = 0;
    double distance_sum = 0.0;
    double nearest = std::numeric_limits<double>::infinity();
  };
  std::map<std::string, Tally> tally;
  for (std::size_t r = 0; r < k; ++r) {
    auto& t = tally[model.labels[dist[r].second]];
    t.votes += 1;
    t.distance_sum += std::sqrt(dist[r].first);
  }
  for (std::size_t r = 0; r < n; ++r) {
    auto& t = tally[model.labels[dist[r].second]];
    t.nearest = std::min(t.nearest, dist[r].first);
  }

  struct Entry {
    const std::string* label;
    int votes;
    double mean;
    double nearest;
  };
  std::vector<Entry> entries;
  entries.reserve(tally.size());
  for (auto& [label, t] : tally) {
    entries.push_back({&label, t.votes, t.votes ? t.distance_sum / t.votes : 0.0, t.nearest});
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.votes != b.votes) return a.votes > b.votes;
    if (a.votes > 0) {
      if (a.mean != b.mean) return a.mean < b.mean;
    } else if (a.nearest != b.nearest) {
      return a.nearest < b.nearest;
    }
    return *a.label < *b.label;
  });

  Ranking out;
  for (std::size_t i = 0; i < entries.size() && i < k_out; ++i) {
    out.push_back({*entries[i].label,
                   static_cast<double>(entries[i].votes) / static_cast<double>(k)});
  }
  return out;
}

}  // namespace freqscope
