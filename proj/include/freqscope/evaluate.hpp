#pragma once

#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "freqscope/dataset.hpp"
#include "freqscope/error.hpp"
#include "freqscope/features.hpp"
#include "freqscope/forest.hpp"
#include "freqscope/knn.hpp"

namespace freqscope {

struct EvalReport {
  std::vector<std::string> labels;
  std::size_t total = 0;
  double top1_accuracy = 0.0;
  std::map<int, double> topk_accuracy;
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
  std::map<std::string, double> per_class_accuracy;
};

// Scores precomputed rankings. `labels` fixes the confusion-matrix order;
// every truth and every top-1 prediction must be one of them.
inline EvalReport evaluate_rankings(const std::vector<std::string>& labels,
                                    const std::vector<std::string>& truths,
                                    const std::vector<Ranking>& rankings,
                                    std::vector<int> topk) {
  if (truths.empty()) throw InvalidArgument("empty test set");
  if (truths.size() != rankings.size()) throw InvalidArgument("one ranking per test item");
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < labels.size(); ++i) index[labels[i]] = i;
  auto lookup = [&](const std::string& l) {
    auto it = index.find(l);
    if (it == index.end()) throw InvalidArgument("label '" + l + "' unknown to the model");
    return it->second;
  };

  std::sort(topk.begin(), topk.end());
  topk.erase(std::unique(topk.begin(), topk.end()), topk.end());
  EvalReport r;
  r.labels = labels;
  r.total = truths.size();
  r.confusion.assign(labels.size(), std::vector<std::size_t>(labels.size(), 0));
  std::map<int, std::size_t> hits;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    const auto& ranking = rankings[i];
    if (ranking.empty()) throw InvalidArgument("empty ranking");
    r.confusion[lookup(truths[i])][lookup(ranking.front().label)]++;
    auto pos = std::find_if(ranking.begin(), ranking.end(),
                            [&](const RankedLabel& x) { return x.label == truths[i]; });
    const auto rank = static_cast<int>(pos - ranking.begin());  // == size if absent
    for (int k : topk) {
      if (k < 1) throw InvalidArgument("top-k values must be >= 1");
      if (rank < k) hits[k]++;
    }
  }
  std::size_t diag = 0;
  for (std::size_t c = 0; c < labels.size(); ++c) {
    diag += r.confusion[c][c];
    std::size_t row = 0;
    for (auto v : r.confusion[c]) row += v;
    if (row > 0) {
      r.per_class_accuracy[labels[c]] =
          static_cast<double>(r.confusion[c][c]) / static_cast<double>(row);
    }
  }
  r.top1_accuracy = static_cast<double>(diag) / static_cast<double>(r.total);
  for (int k : topk) {
    r.topk_accuracy[k] = static_cast<double>(hits[k]) / static_cast<double>(r.total);
  }
  return r;
}

enum class ModelKind { kKnn, kForest };

inline std::string_view to_string(ModelKind k) { return k == ModelKind::kKnn ? "knn" : "forest"; }

inline ModelKind parse_model_kind(std::string_view s) {
  if (s == "knn") return ModelKind::kKnn;
  if (s == "forest" || s == "rf") return ModelKind::kForest;
  throw InvalidArgument("unknown model kind '" + std::string(s) + "'");
}

struct ClassifierParams {
  ModelKind kind = ModelKind::kKnn;
  int k = 3;
  ForestParams forest;
  Normalization normalization = Normalization::kNone;
};

// A trained website classifier: normalization choice plus the fitted model.
struct Classifier {
  ClassifierParams params;
  std::vector<std::string> classes;
  std::size_t dim = 0;
  std::variant<KnnModel, ForestModel> model;

  Ranking rank(const FeatureVector& fv, std::size_t k_out) const {
    if (fv.normalization != params.normalization) {
      throw InvalidArgument("feature normalization does not match the model");
    }
    return std::visit(
        [&](const auto& m) -> Ranking {
          using M = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<M, KnnModel>) {
            return knn_predict(m, fv.values, k_out);
          } else {
            return forest_predict(m, fv.values, k_out);
          }
        },
        model);
  }

  Ranking rank(const FrequencyTrace& t, std::size_t k_out) const {
    return rank(to_features(t, params.normalization), k_out);
  }
};

inline Classifier train_classifier(const DatasetView& train, const ClassifierParams& params) {
  if (train.empty()) throw InvalidArgument("empty training set");
  Classifier c;
  c.params = params;
  std::vector<std::vector<double>> x;
  std::vector<std::string> y;
  x.reserve(train.size());
  for (auto& item : train.items) {
    x.push_back(to_features(*item.trace, params.normalization).values);
    y.push_back(*item.label);
  }
  c.dim = x.front().size();
  c.classes = y;
  std::sort(c.classes.begin(), c.classes.end());
  c.classes.erase(std::unique(c.classes.begin(), c.classes.end()), c.classes.end());
  if (params.kind == ModelKind::kKnn) {
    KnnModel m;
    m.k = params.k;
    for (std::size_t i = 0; i < x.size(); ++i) m.add(std::move(x[i]), y[i]);
    c.model = std::move(m);
  } else {
    c.model = forest_train(x, y, params.forest);
  }
  return c;
}

inline EvalReport evaluate(const Classifier& model, const DatasetView& test,
                           const std::vector<int>& topk) {
  if (test.empty()) throw InvalidArgument("empty test set");
  std::vector<std::string> truths;
  std::vector<Ranking> rankings;
  for (auto& item : test.items) {
    if (item.trace->size() != model.dim) {
      throw InvalidArgument("test trace length differs from the model's feature length");
    }
    truths.push_back(*item.label);
    rankings.push_back(model.rank(*item.trace, model.classes.size()));
  }
  return evaluate_rankings(model.classes, truths, rankings, topk);
}

inline std::string format_report_table(const EvalReport& r) {
  std::ostringstream os;
  char buf[128];
  std::snprintf(buf, sizeof buf, "test items  %zu\n", r.total);
  os << buf;
  std::snprintf(buf, sizeof buf, "top-1       %.4f\n", r.top1_accuracy);
  os << buf;
  for (auto& [k, acc] : r.topk_accuracy) {
    if (k == 1) continue;
    std::snprintf(buf, sizeof buf, "top-%-2d      %.4f\n", k, acc);
    os << buf;
  }
  os << "\nper-class accuracy\n";
  for (auto& [label, acc] : r.per_class_accuracy) {
    std::snprintf(buf, sizeof buf, "  %-32s %.4f\n", label.c_str(), acc);
    os << buf;
  }
  return os.str();
}

inline std::string format_report_kv(const EvalReport& r) {
  std::ostringstream os;
  os.precision(17);
  os << "total=" << r.total << '\n';
  os << "top1_accuracy=" << r.top1_accuracy << '\n';
  for (auto& [k, acc] : r.topk_accuracy) {
    if (k != 1) os << "top" << k << "_accuracy=" << acc << '\n';
  }
  for (auto& [label, acc] : r.per_class_accuracy) {
    os << "class." << percent_encode(label) << ".accuracy=" << acc << '\n';
  }
  return os.str();
}

inline std::string format_confusion_csv(const EvalReport& r) {
  std::ostringstream os;
  os << "true\\predicted";
  for (auto& l : r.labels) os << ',' << percent_encode(l);
  os << '\n';
  for (std::size_t i = 0; i < r.labels.size(); ++i) {
    os << percent_encode(r.labels[i]);
    for (auto v : r.confusion[i]) os << ',' << v;
    os << '\n';
  }
  return os.str();
}

// Reads back what format_report_kv wrote. The confusion matrix is not part of
// that file and stays empty.
inline EvalReport parse_report_kv(std::string_view text) {
  EvalReport r;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  bool have_total = false, have_top1 = false;
  auto fail = [&](const std::string& what) {
    throw ParseError(ParseErrorKind::kMalformedHeader, line_no, what);
  };
  auto number = [&](const std::string& v) {
    try {
      std::size_t used = 0;
      const double d = std::stod(v, &used);
      if (used != v.size()) fail("bad number '" + v + "'");
      return d;
    } catch (const std::logic_error&) {
      fail("bad number '" + v + "'");
    }
    return 0.0;
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail("expected key=value");
    const auto key = line.substr(0, eq), value = line.substr(eq + 1);
    if (key == "total") {
      auto n = detail::parse_int<std::size_t>(value);
      if (!n) fail("bad total");
      r.total = *n;
      have_total = true;
    } else if (key == "top1_accuracy") {
      r.top1_accuracy = number(value);
      r.topk_accuracy[1] = r.top1_accuracy;
      have_top1 = true;
    } else if (key.rfind("top", 0) == 0 && key.size() > 12 &&
               key.compare(key.size() - 9, 9, "_accuracy") == 0) {
      auto k = detail::parse_int<int>(std::string_view(key).substr(3, key.size() - 12));
      if (!k || *k < 1) fail("bad top-k key '" + key + "'");
      r.topk_accuracy[*k] = number(value);
    } else if (key.rfind("class.", 0) == 0 && key.size() > 15 &&
               key.compare(key.size() - 9, 9, ".accuracy") == 0) {
      auto label = percent_decode(std::string_view(key).substr(6, key.size() - 15));
      if (!label) fail("bad class label in '" + key + "'");
      r.per_class_accuracy[*label] = number(value);
      r.labels.push_back(*label);
    } else {
      fail("unknown key '" + key + "'");
    }
  }
  if (!have_total || !have_top1) {
    throw ParseError(ParseErrorKind::kEmptyBody, 0, "report lacks total or top1_accuracy");
  }
  return r;
}

}  // namespace freqscope
