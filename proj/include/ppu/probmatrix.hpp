#ifndef PPU_PROBMATRIX_HPP
#define PPU_PROBMATRIX_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ppu/binio.hpp"
#include "ppu/errors.hpp"
#include "ppu/matrix.hpp"
#include "ppu/random.hpp"

namespace ppu {

inline constexpr double kProbFloor = 1e-12;
inline constexpr double kRowSumTolerance = 1e-9;

// Raises entries below kProbFloor to the floor and rescales the remaining
// entries so the row still sums to one. Rows already above the floor are
// left bit-for-bit untouched.
inline void floor_row(std::span<double> row) {
  std::size_t floored = 0;
  double rest = 0.0;
  for (double v : row) {
    if (v < kProbFloor) ++floored;
    else rest += v;
  }
  if (floored == 0) return;
  const double scale = (1.0 - static_cast<double>(floored) * kProbFloor) / rest;
  for (double& v : row) v = v < kProbFloor ? kProbFloor : v * scale;
}

// Numerically stable softmax of `logits` into `out` (no flooring).
inline void softmax(std::span<const double> logits, std::span<double> out) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    out[k] = std::exp(logits[k] - mx);
    z += out[k];
  }
  for (double& v : out) v /= z;
}

/// N x K row-stochastic matrix with a registry mapping each row to the
/// dataset index it describes. Construction validates and floors; all
/// operations return new matrices.
class ProbMatrix {
 public:
  ProbMatrix() = default;

  explicit ProbMatrix(Matrix values, std::vector<std::size_t> registry = {})
      : values_(std::move(values)), registry_(std::move(registry)) {
    if (values_.cols == 0) throw ShapeError("probability matrix needs at least one class");
    if (registry_.empty()) {
      registry_.resize(values_.rows);
      std::iota(registry_.begin(), registry_.end(), std::size_t{0});
    }
    if (registry_.size() != values_.rows) throw ShapeError("registry length does not match row count");
    for (std::size_t i = 0; i < values_.rows; ++i) {
      auto r = values_.row(i);
      double sum = 0.0;
      for (double v : r) {
        if (!(v >= 0.0 && v <= 1.0)) {
          throw InvalidProbabilities("row " + std::to_string(i) + " has entry outside [0,1]: " + std::to_string(v));
        }
        sum += v;
      }
      if (std::abs(sum - 1.0) > kRowSumTolerance) {
        throw InvalidProbabilities("row " + std::to_string(i) + " sums to " + std::to_string(sum));
      }
      floor_row(r);
    }
  }

  std::size_t rows() const { return values_.rows; }
  std::size_t classes() const { return values_.cols; }
  std::span<const double> row(std::size_t i) const { return values_.row(i); }
  double operator()(std::size_t i, std::size_t k) const { return values_(i, k); }
  const Matrix& values() const { return values_; }
  const std::vector<std::size_t>& registry() const { return registry_; }

  bool operator==(const ProbMatrix& o) const {
    return bitwise_equal(values_, o.values_) && registry_ == o.registry_;
  }

 private:
  Matrix values_;
  std::vector<std::size_t> registry_;
};

/// KL(p || q) = sum_k p_k ln(p_k / q_k). Both rows are expected floored.
inline double kl_div(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw ShapeError("kl_div: rows have different lengths");
  double d = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (p[k] > 0.0) d += p[k] * std::log(p[k] / q[k]);
  }
  return std::max(d, 0.0);
}

struct PseudoScheme {
  enum class Kind { Uniform, RandomSoftmax };
  Kind kind = Kind::Uniform;
  std::optional<std::uint64_t> seed;

  static PseudoScheme uniform() { return {}; }
  static PseudoScheme random_softmax(std::uint64_t seed) { return {Kind::RandomSoftmax, seed}; }

  void validate() const {
    if ((kind == Kind::RandomSoftmax) != seed.has_value()) {
      throw SpecError("pseudo scheme: a seed is required for random-softmax and only for it");
    }
  }
};

inline ProbMatrix pseudo_generate(std::size_t n, std::size_t classes, const PseudoScheme& scheme) {
  scheme.validate();
  if (n == 0 || classes == 0) throw ShapeError("pseudo_generate: need n >= 1 and K >= 1");
  Matrix m(n, classes);
  if (scheme.kind == PseudoScheme::Kind::Uniform) {
    std::fill(m.data.begin(), m.data.end(), 1.0 / static_cast<double>(classes));
  } else {
    Rng rng(*scheme.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> logits(classes);
    for (std::size_t i = 0; i < n; ++i) {
      for (double& z : logits) z = normal(rng);
      softmax(logits, m.row(i));
    }
  }
  return ProbMatrix(std::move(m));
}

using ClassMass = std::vector<double>;

inline ClassMass class_mass(const ProbMatrix& q) {
  ClassMass mass(q.classes(), 0.0);
  for (std::size_t i = 0; i < q.rows(); ++i) {
    auto r = q.row(i);
    for (std::size_t k = 0; k < r.size(); ++k) mass[k] += r[k];
  }
  return mass;
}

/// Replaces rows at positions `idx` by the rows of `p` (in order). The
/// registry of `q` is kept; untouched rows are copied bit for bit.
inline ProbMatrix replace_rows(const ProbMatrix& q, std::span<const std::size_t> idx, const ProbMatrix& p) {
  if (idx.size() != p.rows()) throw ShapeError("replace_rows: index count differs from replacement rows");
  if (!idx.empty() && p.classes() != q.classes()) throw ShapeError("replace_rows: class counts differ");
  std::set<std::size_t> seen;
  for (std::size_t i : idx) {
    if (i >= q.rows()) throw IndexError("replace_rows: index " + std::to_string(i) + " out of range");
    if (!seen.insert(i).second) throw IndexError("replace_rows: duplicate index " + std::to_string(i));
  }
  Matrix out = q.values();
  for (std::size_t j = 0; j < idx.size(); ++j) {
    auto src = p.row(j);
    std::copy(src.begin(), src.end(), out.row(idx[j]).begin());
  }
  return ProbMatrix(std::move(out), q.registry());
}

/// Concatenates rows of `a` and `b` (registries appended).
inline ProbMatrix concat_rows(const ProbMatrix& a, const ProbMatrix& b) {
  if (a.classes() != b.classes()) throw ShapeError("concat_rows: class counts differ");
  Matrix out(a.rows() + b.rows(), a.classes());
  std::copy(a.values().data.begin(), a.values().data.end(), out.data.begin());
  std::copy(b.values().data.begin(), b.values().data.end(), out.data.begin() + a.values().data.size());
  std::vector<std::size_t> reg = a.registry();
  reg.insert(reg.end(), b.registry().begin(), b.registry().end());
  return ProbMatrix(std::move(out), std::move(reg));
}

// Dump format: 8-byte magic, u64 header length, JSON header {N, K, registry},
// then N*K little-endian f64 values in row-major order.
inline constexpr char kMatrixMagic[8] = {'P', 'P', 'U', 'M', 'A', 'T', 'R', 'X'};

inline void write_matrix_dump(const std::string& path, const ProbMatrix& q) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path);
  nlohmann::json header = {{"N", q.rows()}, {"K", q.classes()}, {"registry", q.registry()}};
  const std::string text = header.dump();
  out.write(kMatrixMagic, 8);
  binio::write_u64(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  binio::write_f64s(out, q.values().data);
}

inline ProbMatrix read_matrix_dump(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  char magic[8];
  if (!in.read(magic, 8) || !std::equal(magic, magic + 8, kMatrixMagic)) throw FormatError(path + ": bad magic");
  const auto len = binio::read_u64(in);
  std::string text(len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(len))) throw FormatError(path + ": truncated header");
  const auto header = nlohmann::json::parse(text);
  Matrix m(header.at("N").get<std::size_t>(), header.at("K").get<std::size_t>());
  binio::read_f64s(in, m.data);
  return ProbMatrix(std::move(m), header.at("registry").get<std::vector<std::size_t>>());
}

}  // namespace ppu

#endif  // PPU_PROBMATRIX_HPP
