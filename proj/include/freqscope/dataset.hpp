#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include "freqscope/error.hpp"
#include "freqscope/random.hpp"
#include "freqscope/trace.hpp"

namespace freqscope {

struct SplitFractions {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

// Traces grouped by class label. `classes` is kept sorted.
struct LabeledDataset {
  std::vector<std::string> classes;
  std::map<std::string, std::vector<FrequencyTrace>> measurements;
  std::uint64_t split_seed = 0;
  SplitFractions split_fractions;

  void add(const std::string& label, FrequencyTrace trace) {
    auto& bucket = measurements[label];
    if (bucket.empty()) {
      classes.insert(std::upper_bound(classes.begin(), classes.end(), label), label);
    }
    bucket.push_back(std::move(trace));
  }

  std::size_t total() const {
    std::size_t n = 0;
    for (auto& [label, traces] : measurements) n += traces.size();
    return n;
  }

  // Shared interval and sample count; throws when traces disagree.
  std::pair<int, std::size_t> shape() const {
    std::optional<std::pair<int, std::size_t>> s;
    for (auto& [label, traces] : measurements) {
      for (auto& t : traces) {
        std::pair<int, std::size_t> here{t.interval_ms, t.size()};
        if (!s) s = here;
        if (*s != here) {
          throw InvalidArgument("dataset traces differ in interval or length (class '" +
                                label + "')");
        }
      }
    }
    if (!s) throw InvalidArgument("dataset is empty");
    return *s;
  }
};

// Non-owning selection of (label, trace) pairs from a dataset.
struct DatasetView {
  struct Item {
    const std::string* label;
    const FrequencyTrace* trace;
  };
  std::vector<Item> items;

  std::size_t size() const { return items.size(); }
  bool empty() const { return items.empty(); }

  static DatasetView all(const LabeledDataset& ds) {
    DatasetView v;
    for (auto& label : ds.classes) {
      for (auto& t : ds.measurements.at(label)) v.items.push_back({&label, &t});
    }
    return v;
  }
};

struct DatasetSplit {
  DatasetView train;
  DatasetView val;
  DatasetView test;
};

struct SplitCounts {
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;
};

// Per-class partition sizes; the rounding remainder goes to train.
inline SplitCounts split_counts(std::size_t n, const SplitFractions& f) {
  const double sum = f.train + f.val + f.test;
  if (std::abs(sum - 1.0) > 1e-9 || f.train < 0 || f.val < 0 || f.test < 0) {
    throw InvalidArgument("split fractions must be non-negative and sum to 1");
  }
  auto part = [n](double frac) {
    return static_cast<std::size_t>(std::floor(frac * static_cast<double>(n) + 1e-9));
  };
  SplitCounts c;
  c.val = part(f.val);
  c.test = part(f.test);
  c.train = n - c.val - c.test;
  const std::array<std::pair<double, std::size_t>, 3> parts = {
      std::pair{f.train, c.train}, std::pair{f.val, c.val}, std::pair{f.test, c.test}};
  for (auto [frac, count] : parts) {
    if (frac > 0 && count == 0) {
      throw InvalidArgument("class with " + std::to_string(n) +
                            " measurements is too small for the requested split");
    }
  }
  return c;
}

// Measurement order inside a class is ranked by a hash of (seed, label, index),
// so assignment depends on nothing else.
inline std::vector<std::size_t> split_order(std::uint64_t seed, const std::string& label,
                                            std::size_t n) {
  std::vector<std::pair<std::uint64_t, std::size_t>> keyed;
  keyed.reserve(n);
  const auto label_hash = hash_string(label);
  for (std::size_t i = 0; i < n; ++i) keyed.emplace_back(mix_seed({seed, label_hash, i}), i);
  std::sort(keyed.begin(), keyed.end());
  std::vector<std::size_t> order;
  order.reserve(n);
  for (auto& [key, i] : keyed) order.push_back(i);
  return order;
}

inline DatasetSplit split_dataset(const LabeledDataset& ds) {
  DatasetSplit out;
  for (auto& label : ds.classes) {
    const auto& traces = ds.measurements.at(label);
    if (traces.size() < 3) {
      throw InvalidArgument("class '" + label + "' has fewer than 3 measurements");
    }
    const auto counts = split_counts(traces.size(), ds.split_fractions);
    const auto order = split_order(ds.split_seed, label, traces.size());
    for (std::size_t r = 0; r < order.size(); ++r) {
      DatasetView::Item item{&label, &traces[order[r]]};
      if (r < counts.train) {
        out.train.items.push_back(item);
      } else if (r < counts.train + counts.val) {
        out.val.items.push_back(item);
      } else {
        out.test.items.push_back(item);
      }
    }
  }
  return out;
}

// Union of measurements per class. Requires identical class sets and shapes.
inline LabeledDataset merge_datasets(const std::vector<LabeledDataset>& parts) {
  if (parts.empty()) throw InvalidArgument("nothing to merge");
  const auto shape = parts.front().shape();
  LabeledDataset out;
  out.split_seed = parts.front().split_seed;
  out.split_fractions = parts.front().split_fractions;
  for (auto& ds : parts) {
    if (ds.classes != parts.front().classes) {
      throw InvalidArgument("cannot merge datasets with different class sets");
    }
    if (ds.shape() != shape) {
      throw InvalidArgument("cannot merge datasets with different trace shapes");
    }
    for (auto& label : ds.classes) {
      for (auto& t : ds.measurements.at(label)) out.add(label, t);
    }
  }
  return out;
}

inline std::string measurement_file_name(std::size_t id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04zu.ftrace", id);
  return buf;
}

// Layout: root/<percent-encoded label>/<zero-padded id>.ftrace
inline void save_dataset(const LabeledDataset& ds, const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  fs::create_directories(root);
  for (auto& label : ds.classes) {
    const auto dir = root / percent_encode(label);
    fs::create_directories(dir);
    const auto& traces = ds.measurements.at(label);
    for (std::size_t i = 0; i < traces.size(); ++i) {
      save_trace(traces[i], dir / measurement_file_name(i));
    }
  }
}

inline LabeledDataset load_dataset(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw IoError("not a dataset directory: " + root.string());
  std::vector<fs::path> dirs;
  for (auto& e : fs::directory_iterator(root)) {
    if (e.is_directory()) dirs.push_back(e.path());
  }
  std::sort(dirs.begin(), dirs.end());
  LabeledDataset ds;
  for (auto& dir : dirs) {
    auto label = percent_decode(dir.filename().string());
    if (!label) throw IoError("bad class directory name: " + dir.string());
    std::vector<fs::path> files;
    for (auto& e : fs::directory_iterator(dir)) {
      if (e.is_regular_file() && e.path().extension() == ".ftrace") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (auto& f : files) ds.add(*label, load_trace(f));
  }
  if (ds.classes.empty()) throw IoError("dataset has no classes: " + root.string());
  return ds;
}

// Exclusive advisory lock on a dataset directory, released on destruction or
// process exit. A second writer fails fast instead of waiting.
class DirectoryLock {
 public:
  explicit DirectoryLock(const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const auto path = dir / ".freqscope.lock";
    fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0) throw IoError("cannot open lock file " + path.string());
    if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
      ::close(fd_);
      throw LockError(dir.string() + " is in use by another freqscope run");
    }
  }
  DirectoryLock(const DirectoryLock&) = delete;
  DirectoryLock& operator=(const DirectoryLock&) = delete;
  ~DirectoryLock() { ::close(fd_); }

 private:
  int fd_ = -1;
};

}  // namespace freqscope
