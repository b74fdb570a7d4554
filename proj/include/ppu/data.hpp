#ifndef PPU_DATA_HPP
#define PPU_DATA_HPP

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "ppu/errors.hpp"
#include "ppu/hash.hpp"
#include "ppu/matrix.hpp"
#include "ppu/model.hpp"
#include "ppu/random.hpp"

namespace ppu {

struct Splits {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
};

struct Dataset {
  Matrix inputs;
  std::vector<int> labels;
  std::size_t classes = 0;
  Splits splits;
  nlohmann::json provenance;

  std::size_t size() const { return inputs.rows; }
  std::size_t dims() const { return inputs.cols; }
};

struct SplitRatios {
  double validation = 0.1;
  double test = 0.2;
};

/// Per class: validation = floor(rv * n_c), test = floor(rt * n_c), the rest
/// goes to train. Within a class, rows are assigned in `order`.
inline Splits make_splits(std::span<const int> labels, std::size_t classes, const SplitRatios& ratios,
                          std::span<const std::size_t> order) {
  std::vector<std::vector<std::size_t>> by_class(classes);
  for (std::size_t i : order) by_class[static_cast<std::size_t>(labels[i])].push_back(i);
  Splits s;
  for (const auto& members : by_class) {
    const auto n = members.size();
    const auto n_val = static_cast<std::size_t>(std::floor(ratios.validation * static_cast<double>(n)));
    const auto n_test = static_cast<std::size_t>(std::floor(ratios.test * static_cast<double>(n)));
    const auto n_train = n - n_val - n_test;
    s.train.insert(s.train.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.validation.insert(s.validation.end(), members.begin() + static_cast<std::ptrdiff_t>(n_train),
                        members.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    s.test.insert(s.test.end(), members.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), members.end());
  }
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.validation.begin(), s.validation.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

struct BlobConfig {
  std::size_t classes = 5;
  std::size_t dims = 8;
  std::size_t n_per_class = 125;
  double spread = 0.3;
  std::uint64_t seed = 0;
};

inline nlohmann::json to_json(const BlobConfig& c) {
  return {{"kind", "blobs"}, {"classes", c.classes}, {"dims", c.dims},
          {"n_per_class", c.n_per_class}, {"spread", c.spread}, {"seed", c.seed}};
}

namespace detail {

// Class means with minimum pairwise distance sqrt(2): a random orthonormal
// frame when D >= K, otherwise evenly spaced points on a circle in a random
// plane (or on a line when D == 1).
inline Matrix blob_means(std::size_t classes, std::size_t dims, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix means(classes, dims);
  auto random_unit_frame = [&](std::size_t count) {
    Matrix frame(count, dims);
    for (std::size_t r = 0; r < count; ++r) {
      auto v = frame.row(r);
      for (;;) {
        for (double& x : v) x = normal(rng);
        for (std::size_t q = 0; q < r; ++q) {
          auto u = frame.row(q);
          double dot = 0.0;
          for (std::size_t d = 0; d < dims; ++d) dot += u[d] * v[d];
          for (std::size_t d = 0; d < dims; ++d) v[d] -= dot * u[d];
        }
        double norm = 0.0;
        for (double x : v) norm += x * x;
        norm = std::sqrt(norm);
        if (norm > 1e-8) {
          for (double& x : v) x /= norm;
          break;
        }
      }
    }
    return frame;
  };
  if (dims >= classes) {
    means = random_unit_frame(classes);
  } else if (dims == 1) {
    const double step = std::sqrt(2.0);
    const double centre = 0.5 * static_cast<double>(classes - 1);
    for (std::size_t k = 0; k < classes; ++k) means(k, 0) = step * (static_cast<double>(k) - centre);
  } else {
    const Matrix plane = random_unit_frame(2);
    const double pi = std::acos(-1.0);
    const double radius = std::sqrt(2.0) / (2.0 * std::sin(pi / static_cast<double>(classes)));
    const double phase = std::uniform_real_distribution<double>(0.0, 2.0 * pi)(rng);
    for (std::size_t k = 0; k < classes; ++k) {
      const double a = phase + 2.0 * pi * static_cast<double>(k) / static_cast<double>(classes);
      for (std::size_t d = 0; d < dims; ++d) {
        means(k, d) = radius * (std::cos(a) * plane(0, d) + std::sin(a) * plane(1, d));
      }
    }
  }
  return means;
}

}  // namespace detail

/// Isotropic Gaussian clusters (std `spread`) around seeded class means.
/// Rows are class-major; splits are 70/10/20 per class.
inline Dataset gen_blobs(const BlobConfig& cfg) {
  if (cfg.classes < 2) throw SpecError("gen_blobs: need K >= 2");
  if (cfg.dims < 1) throw SpecError("gen_blobs: need D >= 1");
  if (cfg.n_per_class < 10) throw SpecError("gen_blobs: need n_per_class >= 10");
  if (!(cfg.spread > 0.0)) throw SpecError("gen_blobs: spread must be positive");

  Rng rng(cfg.seed);
  const Matrix means = detail::blob_means(cfg.classes, cfg.dims, rng);
  std::normal_distribution<double> normal(0.0, cfg.spread);

  Dataset ds;
  ds.classes = cfg.classes;
  ds.inputs = Matrix(cfg.classes * cfg.n_per_class, cfg.dims);
  ds.labels.resize(ds.inputs.rows);
  for (std::size_t k = 0; k < cfg.classes; ++k) {
    for (std::size_t j = 0; j < cfg.n_per_class; ++j) {
      const std::size_t i = k * cfg.n_per_class + j;
      ds.labels[i] = static_cast<int>(k);
      for (std::size_t d = 0; d < cfg.dims; ++d) ds.inputs(i, d) = means(k, d) + normal(rng);
    }
  }
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  ds.splits = make_splits(ds.labels, ds.classes, {}, order);
  ds.provenance = to_json(cfg);
  return ds;
}

struct CsvOptions {
  SplitRatios ratios;
  std::optional<std::uint64_t> shuffle_seed;  // assign splits in file order when unset
};

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(',', start);
    auto f = line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
    while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.remove_prefix(1);
    while (!f.empty() && (f.back() == ' ' || f.back() == '\t' || f.back() == '\r')) f.remove_suffix(1);
    fields.push_back(f);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return fields;
}

inline bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

inline bool parse_integer(std::string_view s, long long& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace detail

/// Reads numeric feature columns followed by an integer label column. A first
/// row that does not parse as numbers is treated as a header.
inline Dataset load_csv(const std::string& path, const CsvOptions& opts = {}) {
  const std::string bytes = read_file_bytes(path);
  std::istringstream in(bytes);
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  std::vector<double> values;
  std::vector<long long> raw_labels;
  bool first_content = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto fields = detail::split_fields(line);
    if (first_content) {
      first_content = false;
      double tmp;
      const bool numeric = std::all_of(fields.begin(), fields.end(),
                                       [&](std::string_view f) { return detail::parse_double(f, tmp); });
      if (!numeric) {
        width = fields.size();
        continue;  // header row
      }
    }
    if (fields.size() < 2) throw ParseError("row needs at least one feature and a label", line_no);
    if (width == 0) width = fields.size();
    if (fields.size() != width) {
      throw ParseError("expected " + std::to_string(width) + " columns, found " + std::to_string(fields.size()),
                       line_no);
    }
    for (std::size_t c = 0; c + 1 < fields.size(); ++c) {
      double v;
      if (!detail::parse_double(fields[c], v)) {
        throw ParseError("column " + std::to_string(c + 1) + " is not numeric: '" + std::string(fields[c]) + "'",
                         line_no);
      }
      values.push_back(v);
    }
    long long label;
    if (!detail::parse_integer(fields.back(), label)) {
      throw ParseError("label is not an integer: '" + std::string(fields.back()) + "'", line_no);
    }
    raw_labels.push_back(label);
  }
  if (raw_labels.empty()) throw DataError(path + ": no data rows");

  const std::set<long long> distinct(raw_labels.begin(), raw_labels.end());
  const bool contiguous = *distinct.begin() == 0 && *distinct.rbegin() == static_cast<long long>(distinct.size()) - 1;
  if (!contiguous) {
    std::vector<std::pair<long long, int>> remap;
    std::string msg = path + ": label set is not {0..K-1}; suggested remap:";
    int next = 0;
    for (long long l : distinct) {
      remap.emplace_back(l, next);
      msg += " " + std::to_string(l) + "->" + std::to_string(next);
      ++next;
    }
    throw LabelMappingError(msg, std::move(remap));
  }

  Dataset ds;
  ds.classes = distinct.size();
  ds.inputs = Matrix(raw_labels.size(), width - 1);
  ds.inputs.data = std::move(values);
  ds.labels.assign(raw_labels.begin(), raw_labels.end());
  std::vector<std::size_t> order;
  if (opts.shuffle_seed) {
    order = seeded_permutation(ds.size(), *opts.shuffle_seed);
  } else {
    order.resize(ds.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
  }
  ds.splits = make_splits(ds.labels, ds.classes, opts.ratios, order);
  ds.provenance = {{"kind", "csv"}, {"path", path}, {"sha256", sha256_hex(bytes)}};
  if (opts.shuffle_seed) ds.provenance["shuffle_seed"] = *opts.shuffle_seed;
  return ds;
}

/// Writes features then label, one row per example, with a header. Values are
/// printed with 17 significant digits so load_csv reads back the same doubles.
inline void write_csv(const std::string& path, const Dataset& ds) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path + " for writing");
  for (std::size_t d = 0; d < ds.dims(); ++d) out << 'x' << d << ',';
  out << "label\n";
  char buf[32];
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (double v : ds.inputs.row(i)) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << buf << ',';
    }
    out << ds.labels[i] << '\n';
  }
  if (!out) throw DataError("write failed: " + path);
}

struct ForgetSpec {
  enum class Mode { ClassUnlearning, Selective };
  Mode mode = Mode::Selective;
  int target_class = 0;
  std::size_t count = 0;  // selective only
  std::uint64_t seed = 0;
};

struct SplitResult {
  std::vector<std::size_t> forget;
  std::vector<std::size_t> retain;
  int target_class = 0;
};

inline SplitResult make_forget_split(const Dataset& ds, const ForgetSpec& spec) {
  if (spec.target_class < 0 || static_cast<std::size_t>(spec.target_class) >= ds.classes) {
    throw SpecError("forget class " + std::to_string(spec.target_class) + " outside [0," + std::to_string(ds.classes) + ")");
  }
  std::vector<std::size_t> candidates;
  for (std::size_t i : ds.splits.train) {
    if (ds.labels[i] == spec.target_class) candidates.push_back(i);
  }
  SplitResult out;
  out.target_class = spec.target_class;
  if (spec.mode == ForgetSpec::Mode::ClassUnlearning) {
    out.forget = candidates;
  } else {
    if (spec.count < 1 || spec.count > candidates.size()) {
      throw SpecError("selective forget count " + std::to_string(spec.count) + " must be in [1, " +
                      std::to_string(candidates.size()) + "]");
    }
    const auto perm = seeded_permutation(candidates.size(), spec.seed);
    for (std::size_t j = 0; j < spec.count; ++j) out.forget.push_back(candidates[perm[j]]);
    std::sort(out.forget.begin(), out.forget.end());
  }
  std::set_difference(ds.splits.train.begin(), ds.splits.train.end(), out.forget.begin(), out.forget.end(),
                      std::back_inserter(out.retain));
  return out;
}

inline EvalSubset make_subset(const Dataset& ds, std::string name, std::span<const std::size_t> idx) {
  EvalSubset s{std::move(name), select_rows(ds.inputs, idx), {}};
  s.labels.reserve(idx.size());
  for (std::size_t i : idx) s.labels.push_back(ds.labels[i]);
  return s;
}

/// Test-split rows whose label is `cls`.
inline std::vector<std::size_t> test_rows_of_class(const Dataset& ds, int cls) {
  std::vector<std::size_t> out;
  for (std::size_t i : ds.splits.test) {
    if (ds.labels[i] == cls) out.push_back(i);
  }
  return out;
}

inline nlohmann::json dataset_manifest(const Dataset& ds) {
  return {{"provenance", ds.provenance},
          {"N", ds.size()},
          {"D", ds.dims()},
          {"K", ds.classes},
          {"splits", {{"train", ds.splits.train}, {"validation", ds.splits.validation}, {"test", ds.splits.test}}}};
}

}  // namespace ppu

#endif  // PPU_DATA_HPP
