#ifndef PPU_TESTS_SUPPORT_HPP
#define PPU_TESTS_SUPPORT_HPP

#include <array>
#include <random>

#include "oracles/refine_oracle.hpp"
#include "ppu/refine.hpp"

namespace testing_support {

inline ppu::ProbMatrix random_probs(std::size_t n, std::size_t k, ppu::Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  ppu::Matrix m(n, k);
  std::vector<double> logits(k);
  for (std::size_t i = 0; i < n; ++i) {
    for (double& z : logits) z = nd(rng);
    ppu::softmax(logits, m.row(i));
  }
  return ppu::ProbMatrix(std::move(m));
}

// Random feasible instance: M is the class mass of an unrelated random matrix.
inline ppu::RefineProblem random_problem(ppu::Rng& rng, std::size_t n_lo = 2, std::size_t n_hi = 6,
                                         std::size_t k_lo = 2, std::size_t k_hi = 3) {
  std::uniform_int_distribution<std::size_t> nd(n_lo, n_hi), kd(k_lo, k_hi);
  std::uniform_int_distribution<int> ld(0, 2), rd(0, 1);
  const std::size_t n = nd(rng), k = kd(rng);
  const double lambda = std::array{0.5, 1.0, 2.0}[ld(rng)];
  auto target = random_probs(n, k, rng);
  auto other = random_probs(n, k, rng);
  std::vector<ppu::RowRole> roles(n);
  for (auto& r : roles) r = rd(rng) ? ppu::RowRole::Forget : ppu::RowRole::Retain;
  return {target, roles, lambda, ppu::class_mass(other)};
}

inline oracle::RefineInstance to_oracle(const ppu::RefineProblem& p) {
  oracle::RefineInstance in{p.target.rows(), p.target.classes(), p.target.values().data, {}, p.mass};
  for (std::size_t i = 0; i < in.n; ++i) in.c.push_back(p.row_weight(i));
  return in;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

}  // namespace testing_support

#endif  // PPU_TESTS_SUPPORT_HPP
