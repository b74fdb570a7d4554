#ifndef PPU_TESTS_REFINE_ORACLE_HPP
#define PPU_TESTS_REFINE_ORACLE_HPP

// Primal reference solver for
//   min_Q  sum_i c_i KL(Q_i || P_i)   s.t.  rows of Q sum to 1, column sums = M
// by projected gradient on the affine constraint set, with Barzilai-Borwein
// steps and backtracking that keeps every entry strictly positive. It shares
// no code with the library's dual solver.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

namespace oracle {

struct RefineInstance {
  std::size_t n = 0, k = 0;
  std::vector<double> p;  // n*k, row-major, strictly positive rows summing to 1
  std::vector<double> c;  // n row weights
  std::vector<double> m;  // k column targets, sum = n
};

struct RefineSolution {
  std::vector<double> q;
  double objective = 0.0;
  double residual = 0.0;    // max |column sum - m|, max |row sum - 1|
  double stationarity = 0.0;
  std::size_t iterations = 0;
};

inline double objective(const RefineInstance& in, const std::vector<double>& q) {
  double f = 0.0;
  for (std::size_t i = 0; i < in.n; ++i) {
    for (std::size_t j = 0; j < in.k; ++j) {
      const double v = q[i * in.k + j];
      if (v > 0.0) f += in.c[i] * v * std::log(v / in.p[i * in.k + j]);
    }
  }
  return f;
}

// Orthogonal projection onto {D : D 1 = 0, D^T 1 = 0} (double centering).
inline std::vector<double> project_tangent(const std::vector<double>& g, std::size_t n, std::size_t k) {
  std::vector<double> rm(n, 0.0), cm(k, 0.0);
  double all = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      rm[i] += g[i * k + j];
      cm[j] += g[i * k + j];
      all += g[i * k + j];
    }
  }
  std::vector<double> out(g.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      out[i * k + j] = g[i * k + j] - rm[i] / k - cm[j] / n + all / (n * k);
    }
  }
  return out;
}

inline double residual(const RefineInstance& in, const std::vector<double>& q) {
  double r = 0.0;
  for (std::size_t i = 0; i < in.n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < in.k; ++j) s += q[i * in.k + j];
    r = std::max(r, std::abs(s - 1.0));
  }
  for (std::size_t j = 0; j < in.k; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < in.n; ++i) s += q[i * in.k + j];
    r = std::max(r, std::abs(s - in.m[j]));
  }
  return r;
}

inline RefineSolution solve_refine(const RefineInstance& in, double stationarity_tol = 1e-11,
                                   std::size_t max_iters = 2'000'000) {
  const std::size_t n = in.n, k = in.k, nk = n * k;
  // Feasible interior start: every row equal to m / n.
  std::vector<double> q(nk);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) q[i * k + j] = in.m[j] / static_cast<double>(n);
  }
  auto gradient = [&](const std::vector<double>& x) {
    std::vector<double> g(nk);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < k; ++j) g[i * k + j] = in.c[i] * (std::log(x[i * k + j] / in.p[i * k + j]) + 1.0);
    }
    return project_tangent(g, n, k);
  };
  auto max_abs = [](const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
  };

  RefineSolution sol;
  std::vector<double> g = gradient(q);
  double f = objective(in, q);
  double step = 1e-2;
  std::size_t it = 0;
  for (; it < max_iters && max_abs(g) > stationarity_tol; ++it) {
    // Largest step keeping q > 0, then backtrack on the Armijo condition.
    double t = step;
    for (std::size_t e = 0; e < nk; ++e) {
      if (g[e] > 0.0) t = std::min(t, 0.99 * q[e] / g[e]);
    }
    double gg = 0.0;
    for (double x : g) gg += x * x;
    std::vector<double> trial(nk);
    double ft = 0.0;
    for (;;) {
      for (std::size_t e = 0; e < nk; ++e) trial[e] = q[e] - t * g[e];
      ft = objective(in, trial);
      if (ft <= f - 1e-4 * t * gg || t < 1e-300) break;
      t *= 0.5;
    }
    std::vector<double> g_new = gradient(trial);
    // Barzilai-Borwein step for the next iteration.
    double sy = 0.0, ss = 0.0;
    for (std::size_t e = 0; e < nk; ++e) {
      const double s = trial[e] - q[e], y = g_new[e] - g[e];
      sy += s * y;
      ss += s * s;
    }
    step = sy > 0.0 ? std::clamp(ss / sy, 1e-12, 1e6) : 1e-2;
    q.swap(trial);
    g.swap(g_new);
    f = ft;
  }
  sol.q = q;
  sol.objective = f;
  sol.residual = residual(in, q);
  sol.stationarity = max_abs(g);
  sol.iterations = it;
  return sol;
}

}  // namespace oracle

#endif  // PPU_TESTS_REFINE_ORACLE_HPP
