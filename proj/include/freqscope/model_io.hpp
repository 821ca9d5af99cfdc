#pragma once

#include <filesystem>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "freqscope/error.hpp"
#include "freqscope/evaluate.hpp"
#include "freqscope/keystroke.hpp"
#include "freqscope/trace.hpp"

// Model files are JSON documents:
//   {"format": "freqscope-model", "version": 1, "kind": "knn" | "forest" | "password",
//    "params": {...}, "metadata": {...}, "model": {...}}
// Doubles are written with round-trip precision, so a reloaded model ranks
// exactly like the one that was saved.

namespace freqscope {

inline constexpr const char* kModelFormat = "freqscope-model";
inline constexpr int kModelVersion = 1;

using ModelMetadata = std::map<std::string, std::string>;

namespace detail {

using nlohmann::json;

inline json knn_to_json(const KnnModel& m) {
  return {{"k", m.k}, {"points", m.points}, {"labels", m.labels}};
}

inline KnnModel knn_from_json(const json& j) {
  KnnModel m;
  m.k = j.at("k").get<int>();
  auto points = j.at("points").get<std::vector<std::vector<double>>>();
  auto labels = j.at("labels").get<std::vector<std::string>>();
  if (points.size() != labels.size()) throw InvalidArgument("points and labels differ in count");
  for (std::size_t i = 0; i < points.size(); ++i) m.add(std::move(points[i]), labels[i]);
  return m;
}

inline json forest_params_to_json(const ForestParams& p) {
  return {{"n_trees", p.n_trees},   {"max_depth", p.max_depth},
          {"min_leaf", p.min_leaf}, {"feature_subsample", p.feature_subsample},
          {"seed", p.seed}};
}

inline ForestParams forest_params_from_json(const json& j) {
  ForestParams p;
  p.n_trees = j.at("n_trees").get<int>();
  p.max_depth = j.at("max_depth").get<int>();
  p.min_leaf = j.at("min_leaf").get<int>();
  p.feature_subsample = j.at("feature_subsample").get<double>();
  p.seed = j.at("seed").get<std::uint64_t>();
  p.validate();
  return p;
}

// Each tree is stored as parallel arrays to keep files compact.
inline json forest_to_json(const ForestModel& m) {
  json trees = json::array();
  for (auto& t : m.trees) {
    json f = json::array(), th = json::array(), l = json::array(), r = json::array(),
         lab = json::array();
    for (auto& n : t.nodes) {
      f.push_back(n.feature);
      th.push_back(n.threshold);
      l.push_back(n.left);
      r.push_back(n.right);
      lab.push_back(n.label);
    }
    trees.push_back({{"feature", f}, {"threshold", th}, {"left", l}, {"right", r}, {"label", lab}});
  }
  return {{"classes", m.classes}, {"dim", m.dim}, {"trees", trees}};
}

inline ForestModel forest_from_json(const json& j, const ForestParams& params) {
  ForestModel m;
  m.params = params;
  m.classes = j.at("classes").get<std::vector<std::string>>();
  m.dim = j.at("dim").get<std::size_t>();
  const auto n_classes = static_cast<int>(m.classes.size());
  for (auto& jt : j.at("trees")) {
    const auto f = jt.at("feature").get<std::vector<int>>();
    const auto th = jt.at("threshold").get<std::vector<double>>();
    const auto l = jt.at("left").get<std::vector<int>>();
    const auto r = jt.at("right").get<std::vector<int>>();
    const auto lab = jt.at("label").get<std::vector<int>>();
    const auto n = f.size();
    if (n == 0 || th.size() != n || l.size() != n || r.size() != n || lab.size() != n) {
      throw InvalidArgument("tree arrays differ in length");
    }
    DecisionTree tree;
    for (std::size_t i = 0; i < n; ++i) {
      TreeNode node{f[i], th[i], l[i], r[i], lab[i]};
      const auto bound = static_cast<int>(n);
      if (node.feature >= 0) {
        // Children always follow their parent, which also rules out cycles.
        if (node.feature >= static_cast<int>(m.dim) || node.left <= static_cast<int>(i) ||
            node.right <= static_cast<int>(i) || node.left >= bound || node.right >= bound) {
          throw InvalidArgument("tree node " + std::to_string(i) + " is malformed");
        }
      } else if (node.label < 0 || node.label >= n_classes) {
        throw InvalidArgument("leaf label out of range");
      }
      tree.nodes.push_back(node);
    }
    m.trees.push_back(std::move(tree));
  }
  if (m.trees.empty()) throw InvalidArgument("forest has no trees");
  return m;
}

inline json envelope(std::string_view kind, json params, const ModelMetadata& meta, json model) {
  return {{"format", kModelFormat}, {"version", kModelVersion}, {"kind", kind},
          {"params", std::move(params)}, {"metadata", meta}, {"model", std::move(model)}};
}

inline json read_envelope(const std::filesystem::path& path, std::string_view want_kind) {
  const auto text = read_file(path);
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw ParseError(ParseErrorKind::kBadModel, 0, path.string() + ": not a JSON model file");
  }
  if (j.value("format", "") != kModelFormat) {
    throw ParseError(ParseErrorKind::kBadModel, 0, path.string() + ": not a freqscope model");
  }
  if (j.value("version", 0) != kModelVersion) {
    throw ParseError(ParseErrorKind::kBadModel, 0,
                     path.string() + ": unsupported model version " + j.value("version", json()).dump());
  }
  const auto kind = j.value("kind", "");
  if (want_kind == "classifier" ? (kind != "knn" && kind != "forest") : kind != want_kind) {
    throw ParseError(ParseErrorKind::kBadModel, 0,
                     path.string() + ": model kind '" + kind + "' where " +
                         std::string(want_kind) + " was expected");
  }
  return j;
}

template <typename F>
auto decode_model(const std::filesystem::path& path, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw ParseError(ParseErrorKind::kBadModel, 0, path.string() + ": " + e.what());
  } catch (const InvalidArgument& e) {
    throw ParseError(ParseErrorKind::kBadModel, 0, path.string() + ": " + e.what());
  }
}

}  // namespace detail

inline void save_classifier(const Classifier& c, const std::filesystem::path& path,
                            const ModelMetadata& meta = {}) {
  using detail::json;
  json params = {{"k", c.params.k},
                 {"normalization", to_string(c.params.normalization)},
                 {"forest", detail::forest_params_to_json(c.params.forest)},
                 {"classes", c.classes},
                 {"dim", c.dim}};
  json model = c.params.kind == ModelKind::kKnn
                   ? detail::knn_to_json(std::get<KnnModel>(c.model))
                   : detail::forest_to_json(std::get<ForestModel>(c.model));
  write_file_atomic(path, detail::envelope(to_string(c.params.kind), params, meta, model).dump() + "\n");
}

inline Classifier load_classifier(const std::filesystem::path& path, ModelMetadata* meta = nullptr) {
  const auto j = detail::read_envelope(path, "classifier");
  return detail::decode_model(path, [&] {
    Classifier c;
    const auto& p = j.at("params");
    c.params.kind = parse_model_kind(j.at("kind").get<std::string>());
    c.params.k = p.at("k").get<int>();
    c.params.normalization = parse_normalization(p.at("normalization").get<std::string>());
    c.params.forest = detail::forest_params_from_json(p.at("forest"));
    c.classes = p.at("classes").get<std::vector<std::string>>();
    c.dim = p.at("dim").get<std::size_t>();
    if (c.params.kind == ModelKind::kKnn) {
      auto m = detail::knn_from_json(j.at("model"));
      if (m.size() == 0 || m.dim() != c.dim) throw InvalidArgument("KNN points do not match dim");
      c.model = std::move(m);
    } else {
      auto m = detail::forest_from_json(j.at("model"), c.params.forest);
      if (m.dim != c.dim || m.classes != c.classes) {
        throw InvalidArgument("forest does not match the declared classes or dim");
      }
      c.model = std::move(m);
    }
    if (meta) *meta = j.at("metadata").get<ModelMetadata>();
    return c;
  });
}

inline void save_password_model(const PasswordModel& m, const std::filesystem::path& path,
                                const ModelMetadata& meta = {}) {
  using detail::json;
  json params = {{"k", m.knn.k}, {"timing_length", m.timing_length},
                 {"passwords", m.password_labels}};
  write_file_atomic(path, detail::envelope("password", params, meta, detail::knn_to_json(m.knn)).dump() + "\n");
}

inline PasswordModel load_password_model(const std::filesystem::path& path,
                                         ModelMetadata* meta = nullptr) {
  const auto j = detail::read_envelope(path, "password");
  return detail::decode_model(path, [&] {
    PasswordModel m;
    const auto& p = j.at("params");
    m.timing_length = p.at("timing_length").get<std::size_t>();
    m.password_labels = p.at("passwords").get<std::vector<std::string>>();
    m.knn = detail::knn_from_json(j.at("model"));
    if (m.knn.size() == 0 || m.knn.dim() != m.timing_length) {
      throw InvalidArgument("password model points do not match timing_length");
    }
    if (meta) *meta = j.at("metadata").get<ModelMetadata>();
    return m;
  });
}

}  // namespace freqscope
