#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "freqscope/dataset.hpp"
#include "freqscope/evaluate.hpp"
#include "freqscope/forest.hpp"
#include "freqscope/knn.hpp"
#include "freqscope/model_io.hpp"
#include "freqscope/random.hpp"
#include "temp_dir.hpp"

using namespace freqscope;

namespace {

// Full sort of every training point, then the documented tie rules.
std::vector<std::string> brute_force_knn(const KnnModel& m, const std::vector<double>& x) {
  std::vector<std::pair<double, std::size_t>> all;
  for (std::size_t i = 0; i < m.size(); ++i) {
    double d = 0;
    for (std::size_t j = 0; j < x.size(); ++j) d += (m.points[i][j] - x[j]) * (m.points[i][j] - x[j]);
    all.push_back({d, i});
  }
  std::stable_sort(all.begin(), all.end(),
                   [](auto& a, auto& b) { return a.first < b.first; });
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(m.k), m.size());
  std::map<std::string, std::pair<int, double>> votes;
  std::map<std::string, double> nearest;
  for (std::size_t r = 0; r < all.size(); ++r) {
    const auto& label = m.labels[all[r].second];
    if (!nearest.count(label)) nearest[label] = all[r].first;
    if (r < k) {
      votes[label].first++;
      votes[label].second += std::sqrt(all[r].first);
    }
  }
  std::vector<std::string> labels;
  for (auto& [l, d] : nearest) labels.push_back(l);
  std::sort(labels.begin(), labels.end(), [&](const std::string& a, const std::string& b) {
    const int va = votes.count(a) ? votes[a].first : 0;
    const int vb = votes.count(b) ? votes[b].first : 0;
    if (va != vb) return va > vb;
    if (va > 0) {
      const double ma = votes[a].second / va, mb = votes[b].second / vb;
      if (ma != mb) return ma < mb;
    } else if (nearest[a] != nearest[b]) {
      return nearest[a] < nearest[b];
    }
    return a < b;
  });
  return labels;
}

std::vector<std::string> labels_of(const Ranking& r) {
  std::vector<std::string> out;
  for (auto& x : r) out.push_back(x.label);
  return out;
}

LabeledDataset clustered_dataset(std::size_t classes, std::size_t per_class, std::size_t dim,
                                 double noise, std::uint64_t seed) {
  Rng rng(seed);
  LabeledDataset ds;
  for (std::size_t c = 0; c < classes; ++c) {
    std::vector<std::int64_t> centre;
    for (std::size_t d = 0; d < dim; ++d) centre.push_back(rng.uniform_int(1'000'000, 3'000'000));
    for (std::size_t m = 0; m < per_class; ++m) {
      FrequencyTrace t;
      t.device = "ryzen5";
      for (auto v : centre) t.samples.push_back(v + static_cast<std::int64_t>(rng.normal(0, noise)));
      ds.add("class-" + std::to_string(c), t);
    }
  }
  ds.split_seed = seed;
  return ds;
}

}  // namespace

TEST(Knn, HandComputedExample) {
  KnnModel m;
  m.k = 3;
  m.add({0.0}, "a");
  m.add({1.0}, "b");
  m.add({2.0}, "b");
  m.add({10.0}, "c");
  const double q[] = {0.4};
  const auto r = knn_predict(m, q, 3);
  ASSERT_EQ(r.size(), 3u);
  EXPECT_EQ(r[0].label, "b");
  EXPECT_DOUBLE_EQ(r[0].score, 2.0 / 3.0);
  EXPECT_EQ(r[1].label, "a");
  EXPECT_EQ(r[2].label, "c");
  EXPECT_DOUBLE_EQ(r[2].score, 0.0);
  EXPECT_EQ(knn_predict(m, q, 1).size(), 1u);
}

TEST(Knn, TieBetweenEquidistantPointsUsesTrainingOrder) {
  KnnModel m;
  m.k = 1;
  m.add({1.0}, "z");
  m.add({-1.0}, "a");
  const double q[] = {0.0};
  EXPECT_EQ(knn_predict(m, q, 2)[0].label, "z");
}

TEST(Knn, MatchesBruteForceOracle) {
  Rng rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    KnnModel m;
    m.k = static_cast<int>(rng.uniform_int(1, 7));
    const auto dim = static_cast<std::size_t>(rng.uniform_int(1, 6));
    const auto n = rng.uniform_int(1, 40);
    for (std::int64_t i = 0; i < n; ++i) {
      std::vector<double> x;
      // Small integer grid so exact distance ties are common.
      for (std::size_t d = 0; d < dim; ++d) x.push_back(static_cast<double>(rng.uniform_int(0, 3)));
      m.add(x, std::string(1, static_cast<char>('a' + rng.uniform_int(0, 5))));
    }
    std::vector<double> q;
    for (std::size_t d = 0; d < dim; ++d) q.push_back(static_cast<double>(rng.uniform_int(0, 3)));
    ASSERT_EQ(labels_of(knn_predict(m, q, 100)), brute_force_knn(m, q)) << "trial " << trial;
  }
}

TEST(Knn, Errors) {
  KnnModel m;
  const double q[] = {1.0, 2.0};
  EXPECT_THROW(knn_predict(m, q, 1), InvalidArgument);
  m.add({1.0}, "a");
  EXPECT_THROW(m.add({1.0, 2.0}, "b"), InvalidArgument);
  EXPECT_THROW(knn_predict(m, q, 1), InvalidArgument);
  EXPECT_THROW(knn_predict(m, std::span<const double>(q, 1), 0), InvalidArgument);
}

TEST(Forest, LearnsXorButNotAtDepthOne) {
  std::vector<std::vector<double>> x;
  std::vector<std::string> y;
  Rng rng(5);
  for (int i = 0; i < 400; ++i) {
    const double a = rng.uniform(), b = rng.uniform();
    x.push_back({a, b});
    y.push_back((a < 0.5) != (b < 0.5) ? "one" : "zero");
  }
  auto accuracy = [&](const ForestModel& m) {
    int hits = 0;
    for (std::size_t i = 0; i < x.size(); ++i) hits += forest_predict(m, x[i], 1)[0].label == y[i];
    return static_cast<double>(hits) / static_cast<double>(x.size());
  };
  ForestParams p;
  p.n_trees = 25;
  p.feature_subsample = 1.0;
  p.seed = 9;
  p.max_depth = 1;
  EXPECT_LE(accuracy(forest_train(x, y, p)), 0.75);
  p.max_depth = 8;
  EXPECT_GE(accuracy(forest_train(x, y, p)), 0.97);
}

TEST(Forest, DeterministicForSeed) {
  const auto ds = clustered_dataset(4, 10, 12, 200'000, 3);
  std::vector<std::vector<double>> x;
  std::vector<std::string> y;
  for (auto& it : DatasetView::all(ds).items) {
    x.push_back(to_features(*it.trace, Normalization::kNone).values);
    y.push_back(*it.label);
  }
  ForestParams p;
  p.n_trees = 20;
  p.seed = 11;
  const auto a = forest_train(x, y, p), b = forest_train(x, y, p);
  EXPECT_EQ(a.trees, b.trees);
  p.seed = 12;
  EXPECT_NE(forest_train(x, y, p).trees, a.trees);
  for (auto& t : a.trees) {
    for (std::size_t i = 0; i < t.nodes.size(); ++i) {
      const auto& n = t.nodes[i];
      if (n.feature >= 0) {
        EXPECT_GT(n.left, static_cast<int>(i));
        EXPECT_GT(n.right, static_cast<int>(i));
      }
    }
  }
}

TEST(Forest, ParamValidation) {
  std::vector<std::vector<double>> x = {{1}, {2}};
  ForestParams p;
  p.n_trees = 0;
  EXPECT_THROW(forest_train(x, {"a", "b"}, p), InvalidArgument);
  p = {};
  EXPECT_THROW(forest_train(x, {"a", "a"}, p), InvalidArgument);
  EXPECT_THROW(forest_train(x, {"a"}, p), InvalidArgument);
  p.feature_subsample = 1.5;
  EXPECT_THROW(p.validate(), InvalidArgument);
  EXPECT_EQ(ForestParams{}.features_per_split(1000), 32u);
}

TEST(Features, MinmaxNormalizationPerProfile) {
  FrequencyTrace t;
  t.device = "comet_lake";
  t.samples = {400'000, 3'600'000, 2'000'000};
  const auto fv = to_features(t, Normalization::kMinmaxPerProfile);
  EXPECT_DOUBLE_EQ(fv.values[0], 0.0);
  EXPECT_DOUBLE_EQ(fv.values[1], 1.0);
  EXPECT_DOUBLE_EQ(fv.values[2], 0.5);
  EXPECT_EQ(normalize(fv, profiles::ryzen5()).values, fv.values);
  t.device = "unknown";
  EXPECT_THROW(to_features(t, Normalization::kMinmaxPerProfile), InvalidArgument);
  EXPECT_EQ(to_features(t, Normalization::kNone).values[1], 3'600'000.0);
  EXPECT_THROW(parse_normalization("zscore"), InvalidArgument);
}

TEST(Evaluate, RandomRankerTopKIsKOverC) {
  Rng rng(101);
  std::vector<std::string> labels;
  for (int c = 0; c < 20; ++c) labels.push_back("l" + std::to_string(c));
  std::vector<std::string> truths;
  std::vector<Ranking> rankings;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    truths.push_back(labels[static_cast<std::size_t>(rng.uniform_int(0, 19))]);
    auto order = labels;
    for (std::size_t j = order.size() - 1; j > 0; --j) {
      std::swap(order[j], order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(j)))]);
    }
    Ranking r;
    for (auto& l : order) r.push_back({l, 0.0});
    rankings.push_back(r);
  }
  const auto rep = evaluate_rankings(labels, truths, rankings, {1, 5, 20});
  for (int k : {1, 5}) {
    const double p = k / 20.0;
    const double sd = std::sqrt(p * (1 - p) / n);
    EXPECT_NEAR(rep.topk_accuracy.at(k), p, 4 * sd) << k;
  }
  EXPECT_DOUBLE_EQ(rep.topk_accuracy.at(20), 1.0);
  EXPECT_DOUBLE_EQ(rep.top1_accuracy, rep.topk_accuracy.at(1));
  std::size_t sum = 0;
  for (auto& row : rep.confusion) {
    for (auto v : row) sum += v;
  }
  EXPECT_EQ(sum, static_cast<std::size_t>(n));
}

TEST(Evaluate, Errors) {
  EXPECT_THROW(evaluate_rankings({"a"}, {}, {}, {1}), InvalidArgument);
  EXPECT_THROW(evaluate_rankings({"a"}, {"b"}, {{{"a", 1.0}}}, {1}), InvalidArgument);
  EXPECT_THROW(evaluate_rankings({"a"}, {"a"}, {{{"a", 1.0}}}, {0}), InvalidArgument);
  EXPECT_THROW(evaluate_rankings({"a"}, {"a"}, {{}}, {1}), InvalidArgument);
}

TEST(Evaluate, SeparableDataIsPerfect) {
  const auto ds = clustered_dataset(5, 20, 30, 50'000, 8);
  const auto split = split_dataset(ds);
  for (auto kind : {ModelKind::kKnn, ModelKind::kForest}) {
    ClassifierParams p;
    p.kind = kind;
    p.forest.n_trees = 30;
    const auto c = train_classifier(split.train, p);
    const auto rep = evaluate(c, split.test, {1, 3});
    EXPECT_DOUBLE_EQ(rep.top1_accuracy, 1.0) << to_string(kind);
    EXPECT_EQ(rep.total, 10u);
    EXPECT_EQ(rep.per_class_accuracy.size(), 5u);
  }
}

TEST(Evaluate, ReportKvRoundTrip) {
  const auto ds = clustered_dataset(4, 10, 8, 900'000, 21);
  const auto split = split_dataset(ds);
  const auto c = train_classifier(split.train, {});
  auto rep = evaluate(c, split.test, {1, 5});
  rep.per_class_accuracy["odd,label=1"] = 0.25;
  const auto back = parse_report_kv(format_report_kv(rep));
  EXPECT_EQ(back.total, rep.total);
  EXPECT_EQ(back.top1_accuracy, rep.top1_accuracy);
  EXPECT_EQ(back.topk_accuracy, rep.topk_accuracy);
  EXPECT_EQ(back.per_class_accuracy, rep.per_class_accuracy);

  EXPECT_THROW(parse_report_kv("total=3\n"), ParseError);
  EXPECT_THROW(parse_report_kv("total=3\ntop1_accuracy=x\n"), ParseError);
  EXPECT_THROW(parse_report_kv("total=3\ntop1_accuracy=0.5\nwhat=1\n"), ParseError);
  EXPECT_THROW(parse_report_kv("garbage\n"), ParseError);
}

TEST(ModelIo, ClassifierRoundTripPreservesRankings) {
  TempDir dir;
  const auto ds = clustered_dataset(4, 10, 16, 700'000, 33);
  const auto split = split_dataset(ds);
  for (auto kind : {ModelKind::kKnn, ModelKind::kForest}) {
    ClassifierParams p;
    p.kind = kind;
    p.k = 2;
    p.normalization = Normalization::kMinmaxPerProfile;
    p.forest.n_trees = 15;
    const auto c = train_classifier(split.train, p);
    const auto path = dir / "model.json";
    save_classifier(c, path, {{"split_seed", "33"}});
    ModelMetadata meta;
    const auto back = load_classifier(path, &meta);
    EXPECT_EQ(meta.at("split_seed"), "33");
    EXPECT_EQ(back.classes, c.classes);
    EXPECT_EQ(back.params.normalization, p.normalization);
    for (auto& it : split.test.items) {
      EXPECT_EQ(back.rank(*it.trace, 4), c.rank(*it.trace, 4));
    }
  }
}

TEST(ModelIo, CorruptFilesAreBadModel) {
  TempDir dir;
  auto kind_of = [&](const std::string& text) {
    write_file_atomic(dir / "m.json", text);
    try {
      load_classifier(dir / "m.json");
    } catch (const ParseError& e) {
      return e.kind();
    }
    return ParseErrorKind::kEmptyBody;
  };
  EXPECT_EQ(kind_of("not json"), ParseErrorKind::kBadModel);
  EXPECT_EQ(kind_of("{\"format\":\"other\"}"), ParseErrorKind::kBadModel);
  EXPECT_EQ(kind_of("{\"format\":\"freqscope-model\",\"version\":2,\"kind\":\"knn\"}"),
            ParseErrorKind::kBadModel);
  EXPECT_EQ(kind_of("{\"format\":\"freqscope-model\",\"version\":1,\"kind\":\"knn\"}"),
            ParseErrorKind::kBadModel);

  // A forest whose child index points backwards is rejected.
  const auto ds = clustered_dataset(3, 10, 4, 100'000, 2);
  ClassifierParams p;
  p.kind = ModelKind::kForest;
  p.forest.n_trees = 2;
  save_classifier(train_classifier(DatasetView::all(ds), p), dir / "f.json");
  auto j = nlohmann::json::parse(read_file(dir / "f.json"));
  auto& tree = j["model"]["trees"][0];
  ASSERT_GE(tree["feature"][0].get<int>(), 0);
  tree["left"][0] = 0;
  EXPECT_EQ(kind_of(j.dump()), ParseErrorKind::kBadModel);
  j = nlohmann::json::parse(read_file(dir / "f.json"));
  j["model"]["trees"][1]["right"].push_back(3);
  EXPECT_EQ(kind_of(j.dump()), ParseErrorKind::kBadModel);
  EXPECT_THROW(load_classifier(dir / "missing.json"), IoError);
}
