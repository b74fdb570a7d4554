#ifndef PPU_TESTS_FINITE_DIFF_HPP
#define PPU_TESTS_FINITE_DIFF_HPP

#include <cmath>
#include <functional>
#include <vector>

namespace oracle {

/// Central differences of f at x, one coordinate at a time.
inline std::vector<double> central_difference(const std::function<double(const std::vector<double>&)>& f,
                                              std::vector<double> x, double h) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + h;
    const double up = f(x);
    x[i] = orig - h;
    const double down = f(x);
    x[i] = orig;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

/// max_i |a_i - b_i| / max(|a|_inf, |b|_inf, floor)
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b, double floor = 1e-8) {
  double num = 0.0, scale = floor;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num = std::max(num, std::abs(a[i] - b[i]));
    scale = std::max({scale, std::abs(a[i]), std::abs(b[i])});
  }
  return num / scale;
}

}  // namespace oracle

#endif  // PPU_TESTS_FINITE_DIFF_HPP
