#ifndef PPU_REFINE_HPP
#define PPU_REFINE_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ppu/errors.hpp"
#include "ppu/probmatrix.hpp"

namespace ppu {

enum class RowRole { Forget, Retain };

/// Weighted KL projection instance:
///
///   min_Q  sum_i c_i KL(Q_i || P_i)   s.t.  sum_i Q_ik = M_k,  Q_i in simplex
///
/// with c_i = 1 on forget rows and c_i = lambda on retain rows.
struct RefineProblem {
  ProbMatrix target;           // forget rows: pseudo-probabilities; retain rows: model outputs
  std::vector<RowRole> roles;  // one per row of `target`
  double lambda = 1.0;
  ClassMass mass;

  double row_weight(std::size_t i) const { return roles[i] == RowRole::Forget ? 1.0 : lambda; }

  void validate() const {
    if (roles.size() != target.rows()) throw ShapeError("refine: one role per target row is required");
    if (mass.size() != target.classes()) throw ShapeError("refine: class mass length must equal K");
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw SpecError("refine: lambda must be a positive real");
    for (double m : mass) {
      if (!(m >= 0.0) || !std::isfinite(m)) throw InfeasibleError("refine: class mass entries must be non-negative");
    }
  }

  // Sum M_k = N is required for the row and column constraints to hold jointly.
  void check_feasible(double tol = 1e-6) const {
    double total = 0.0;
    for (double m : mass) total += m;
    const double n = static_cast<double>(target.rows());
    if (std::abs(total - n) > tol) {
      throw InfeasibleError("refine: sum of class masses " + std::to_string(total) + " differs from row count " +
                            std::to_string(target.rows()));
    }
  }
};

struct DualState {
  std::vector<double> alpha;
  double eta = 0.0;
  std::size_t iteration = 0;
  std::vector<double> residual_history;
  std::vector<double> eta_history;
};

struct RefineConfig {
  double tol = 1e-6;
  std::size_t max_iters = 10000;
  std::optional<double> eta;                // defaults to 0.1 / N
  std::optional<ProbMatrix> warm_start;     // defaults to the target itself (alpha = 0)
};

struct RefineResult {
  ProbMatrix q;
  DualState dual;
  double objective = 0.0;
  bool converged = false;
  std::size_t iterations = 0;
};

inline double objective(const ProbMatrix& q, const RefineProblem& problem) {
  if (q.rows() != problem.target.rows() || q.classes() != problem.target.classes()) {
    throw ShapeError("objective: Q is not conformable with the problem");
  }
  double forget = 0.0, retain = 0.0;
  for (std::size_t i = 0; i < q.rows(); ++i) {
    const double d = kl_div(q.row(i), problem.target.row(i));
    (problem.roles[i] == RowRole::Forget ? forget : retain) += d;
  }
  return forget + problem.lambda * retain;
}

inline constexpr double kExponentClamp = 50.0;

/// Row-wise Lagrangian minimiser: Q_ik proportional to P_ik exp(-alpha_k / c_i).
/// Multipliers are centred before exponentiation, so adding a constant to
/// every alpha_k leaves Q unchanged.
inline ProbMatrix primal_update(const RefineProblem& problem, const DualState& dual) {
  const std::size_t n = problem.target.rows();
  const std::size_t classes = problem.target.classes();
  if (dual.alpha.size() != classes) throw ShapeError("primal_update: dual vector length must equal K");
  if (problem.roles.size() != n) throw ShapeError("primal_update: one role per row is required");

  double mean = 0.0;
  for (double a : dual.alpha) mean += a;
  mean /= static_cast<double>(classes);
  const bool flat = std::all_of(dual.alpha.begin(), dual.alpha.end(), [&](double a) { return a == mean; });
  if (flat) return problem.target;

  Matrix out(n, classes);
  std::vector<double> factor(classes);
  for (std::size_t i = 0; i < n; ++i) {
    const double c = problem.row_weight(i);
    for (std::size_t k = 0; k < classes; ++k) {
      const double arg = std::clamp(-(dual.alpha[k] - mean) / c, -kExponentClamp, kExponentClamp);
      factor[k] = std::exp(arg);
    }
    const auto p = problem.target.row(i);
    auto q = out.row(i);
    double z = 0.0;
    for (std::size_t k = 0; k < classes; ++k) {
      q[k] = p[k] * factor[k];
      z += q[k];
    }
    if (!std::isfinite(z) || !(z > 0.0)) {
      throw NumericalOverflow("primal_update: row " + std::to_string(i) + " normaliser is not finite");
    }
    for (double& v : q) v /= z;
  }
  return ProbMatrix(std::move(out), problem.target.registry());
}

inline double mass_residual(const ClassMass& columns, const ClassMass& mass) {
  double r = 0.0;
  for (std::size_t k = 0; k < columns.size(); ++k) r = std::max(r, std::abs(columns[k] - mass[k]));
  return r;
}

/// Gradient step on the dual: alpha_k <- alpha_k + eta (sum_i Q_ik - M_k).
inline DualState dual_step(DualState dual, const ProbMatrix& q, const ClassMass& mass) {
  if (q.classes() != mass.size() || dual.alpha.size() != mass.size()) throw ShapeError("dual_step: shape mismatch");
  const ClassMass columns = class_mass(q);
  for (std::size_t k = 0; k < mass.size(); ++k) dual.alpha[k] += dual.eta * (columns[k] - mass[k]);
  dual.residual_history.push_back(mass_residual(columns, mass));
  dual.eta_history.push_back(dual.eta);
  ++dual.iteration;
  return dual;
}

/// Multipliers whose primal image best matches a warm-start matrix W in the
/// least-squares sense: alpha_k = -mean_i c_i ln(W_ik / P_ik). W = P gives 0.
inline std::vector<double> alpha_from_warm_start(const RefineProblem& problem, const ProbMatrix& warm) {
  if (warm.rows() != problem.target.rows() || warm.classes() != problem.target.classes()) {
    throw ShapeError("refine: warm start is not conformable with the problem");
  }
  std::vector<double> alpha(problem.target.classes(), 0.0);
  if (warm == problem.target) return alpha;
  for (std::size_t i = 0; i < warm.rows(); ++i) {
    const double c = problem.row_weight(i);
    for (std::size_t k = 0; k < alpha.size(); ++k) alpha[k] -= c * std::log(warm(i, k) / problem.target(i, k));
  }
  for (double& a : alpha) a /= static_cast<double>(warm.rows());
  return alpha;
}

/// Alternates primal_update and dual_step until the column-mass residual
/// drops to cfg.tol. The step size is halved whenever the residual grows.
/// On non-convergence the lowest-residual iterate is returned.
inline RefineResult refine(const RefineProblem& problem, const RefineConfig& cfg = {}) {
  problem.validate();
  problem.check_feasible();
  if (problem.target.rows() == 0) throw ShapeError("refine: empty problem");
  if (cfg.eta && !(*cfg.eta > 0.0)) throw SpecError("refine: step size must be positive");

  DualState dual;
  dual.eta = cfg.eta.value_or(0.1 / static_cast<double>(problem.target.rows()));
  dual.alpha = cfg.warm_start ? alpha_from_warm_start(problem, *cfg.warm_start)
                              : std::vector<double>(problem.target.classes(), 0.0);

  RefineResult best;
  double best_residual = std::numeric_limits<double>::infinity();
  double previous = std::numeric_limits<double>::infinity();
  for (std::size_t it = 1; it <= cfg.max_iters; ++it) {
    ProbMatrix q = primal_update(problem, dual);
    const double residual = mass_residual(class_mass(q), problem.mass);
    if (residual < best_residual) {
      best_residual = residual;
      best.q = q;
      best.iterations = it;
    }
    if (residual <= cfg.tol) {
      dual.residual_history.push_back(residual);
      dual.eta_history.push_back(dual.eta);
      ++dual.iteration;
      RefineResult done{std::move(q), std::move(dual), 0.0, true, it};
      done.objective = objective(done.q, problem);
      return done;
    }
    if (residual > previous) dual.eta *= 0.5;
    previous = residual;
    dual = dual_step(std::move(dual), q, problem.mass);
  }
  best.dual = std::move(dual);
  best.converged = false;
  best.iterations = cfg.max_iters;
  best.objective = objective(best.q, problem);
  return best;
}

inline nlohmann::json refine_record(const RefineResult& r) {
  return {{"objective", r.objective},
          {"iterations", r.iterations},
          {"converged", r.converged},
          {"alpha", r.dual.alpha},
          {"final_eta", r.dual.eta},
          {"eta_history", r.dual.eta_history},
          {"residual_history", r.dual.residual_history}};
}

}  // namespace ppu

#endif  // PPU_REFINE_HPP
