#pragma once

// Discrete surrogates for square-root domain statements. Domain equality in the
// continuum becomes two-sided norm equivalence that stays uniform under mesh
// refinement:
//   kappa = max_f rho(f) / min_f rho(f),   rho(f) = |P f| / |Q f|,
// computed exactly from the Gram matrices G1 = P^*P, G2 = Q^*Q through the
// generalized Hermitian eigenproblem, plus a seeded random sample.

#include <array>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "slkato/matfun.hpp"
#include "slkato/mesh.hpp"

namespace slkato {

struct GramExtremes {
  double min_ratio = 0.0;  // sqrt of the smallest generalized eigenvalue
  double max_ratio = 0.0;
  double kappa = 1.0;
};

/// Extremes of sqrt(v^* G1 v / v^* G2 v) over all v != 0. Works with the
/// difference G1 - G2, so identical Gram matrices give kappa == 1 exactly.
template <class Scalar>
GramExtremes kappa_from_grams(const Mat<Scalar>& G1, const Mat<Scalar>& G2) {
  if (G1.rows() != G2.rows() || G1.rows() != G1.cols() || G2.rows() != G2.cols())
    throw PreconditionError("kappa_from_grams: Gram matrices must be square and of equal size");
  Eigen::LLT<Mat<Scalar>> llt(G2);
  if (llt.info() != Eigen::Success) throw SpectrumError("kappa_from_grams: reference Gram matrix is not positive definite");
  const Mat<Scalar> delta = G1 - G2;
  GramExtremes out;
  if (delta.cwiseAbs().maxCoeff() == 0.0) {
    out.min_ratio = out.max_ratio = out.kappa = 1.0;
    return out;
  }
  // C = L^{-1} delta L^{-*}
  Mat<Scalar> c = llt.matrixL().solve(delta);
  c = llt.matrixL().solve(Mat<Scalar>(c.adjoint())).adjoint();
  c = (c + c.adjoint().eval()) * 0.5;
  Eigen::SelfAdjointEigenSolver<Mat<Scalar>> es(c, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw ConvergenceError("kappa_from_grams: eigensolver failed");
  const double lo = 1.0 + es.eigenvalues()(0);
  const double hi = 1.0 + es.eigenvalues()(es.eigenvalues().size() - 1);
  if (!(lo > 0.0)) throw SpectrumError("kappa_from_grams: numerator Gram matrix is singular");
  out.min_ratio = std::sqrt(lo);
  out.max_ratio = std::sqrt(hi);
  out.kappa = std::sqrt(hi / lo);
  return out;
}

struct KappaRow {
  int n = 0;
  double E = 0.0;
  double alpha = 0.5;
  double min_ratio = 0.0;
  double max_ratio = 0.0;
  double kappa = 1.0;
  double sampled_min = 0.0;  // over the random vectors
  double sampled_max = 0.0;
};

namespace detail {

template <class Scalar>
void sample_ratios(const Mat<Scalar>& G1, const Mat<Scalar>& G2, const MatR& mass_sqrt, int n_samples,
                   std::uint64_t seed, KappaRow& row) {
  std::mt19937_64 rng(seed);
  row.sampled_min = std::numeric_limits<double>::infinity();
  row.sampled_max = 0.0;
  for (int k = 0; k < n_samples; ++k) {
    // Nodal Gaussian coefficients, mapped to orthonormal coordinates.
    const VecC f = random_complex_gaussian(G1.rows(), rng);
    const VecC v = mass_sqrt * f;
    const double num = v.dot(G1.template cast<cplx>() * v).real();
    const double den = v.dot(G2.template cast<cplx>() * v).real();
    const double r = std::sqrt(num / den);
    row.sampled_min = std::min(row.sampled_min, r);
    row.sampled_max = std::max(row.sampled_max, r);
  }
  if (n_samples == 0) row.sampled_min = row.sampled_max = 0.0;
}

}  // namespace detail

/// Reference Gram (H_ref + E)^{2 alpha}, H_ref the p == 1 operator on the same
/// dofs without Robin terms; alpha = 1/2 gives the E-scaled W^{1,2} Gram exactly.
inline MatC reference_gram(const DiscreteOperator& op, double E, double alpha) {
  if (alpha == 0.5) return w12_norm_orthonormal(op, E);
  const MatC href = op.congruence(unit_stiffness(op.mesh, op.dofs).cast<cplx>());
  return hermitian_function(href, [E, alpha](double l) { return std::pow(l + E, 2.0 * alpha); });
}

/// Gram matrix of (H + E)^alpha.
inline MatC power_gram(const MatC& H, double E, double alpha, const QuadratureSpec& quad = {}) {
  if (is_hermitian(H)) {
    MatC g = H;
    if (alpha == 0.5) {
      g.diagonal().array() += E;
      return g;
    }
    return hermitian_function(H, [E, alpha](double l) {
      if (l + E <= 0.0) throw SpectrumError("power_gram: H + E is not positive");
      return std::pow(l + E, 2.0 * alpha);
    });
  }
  MatC shifted = H;
  shifted.diagonal().array() += E;
  const MatC P = alpha == 0.5 ? sqrt_db<cplx>(shifted) : frac_power_quad<cplx>(shifted, alpha, quad);
  return P.adjoint() * P;
}

/// One refinement level: |(H + E)^alpha f| against the reference norm.
inline KappaRow sqrt_domain_kappa(const DiscreteOperator& op, double E, int n_samples = 64, std::uint64_t seed = 1,
                                  double alpha = 0.5, const QuadratureSpec& quad = {}) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw PreconditionError("sqrt_domain_kappa: alpha must lie in (0, 1)");
  if (!(E > 0.0)) throw PreconditionError("sqrt_domain_kappa: E must be positive");
  const MatC G1 = power_gram(op.H, E, alpha, quad);
  const MatC G2 = reference_gram(op, E, alpha);
  const GramExtremes ex = kappa_from_grams<cplx>(G1, G2);
  KappaRow row;
  row.n = op.meta.n_cells;
  row.E = E;
  row.alpha = alpha;
  row.min_ratio = ex.min_ratio;
  row.max_ratio = ex.max_ratio;
  row.kappa = ex.kappa;
  detail::sample_ratios<cplx>(G1, G2, op.mass_sqrt, n_samples, seed, row);
  return row;
}

/// Numerical-range vertex plus margin: max(0, -min Re W(H)) + 1.
inline double safe_shift(const MatC& H) {
  Eigen::SelfAdjointEigenSolver<MatC> es(hermitian_part(H), Eigen::EigenvaluesOnly);
  return std::max(0.0, -es.eigenvalues()(0)) + 1.0;
}

// ---------------------------------------------------------------------------
// Lions' operator: T = d/dx on (0, X) with a Dirichlet condition at 0

/// Upwind first difference (T f)_i = (f_i - f_{i-1}) / h, f_0 = 0, on the nodes
/// x_1..x_n. Uniform nodal weights h make the orthonormal matrix equal to T.
inline DiscreteOperator lions_operator(int n, double X = 1.0) {
  if (n < 8) throw PreconditionError("lions_operator: need n >= 8");
  if (!(X > 0.0)) throw PreconditionError("lions_operator: X must be positive");
  DiscreteOperator op;
  op.mesh = build_mesh(IntervalSpec::half_line(0.0, X), n);
  op.dofs.node_to_dof.assign(static_cast<std::size_t>(n) + 1, -1);
  for (int i = 1; i <= n; ++i) {
    op.dofs.node_to_dof[static_cast<std::size_t>(i)] = i - 1;
    op.dofs.nodes.push_back(i);
  }
  const double h = op.mesh.h;
  op.H = MatC::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    op.H(i, i) = 1.0 / h;
    if (i > 0) op.H(i, i - 1) = -1.0 / h;
  }
  op.meta.interval = op.mesh.interval;
  op.meta.left = BoundaryCondition::dirichlet();
  op.meta.right = BoundaryCondition::neumann();
  op.meta.n_cells = n;
  op.mass_lumped = VecR::Constant(n, h);
  op.mass_sqrt = MatR::Identity(n, n) * std::sqrt(h);
  op.mass_inv_sqrt = MatR::Identity(n, n) / std::sqrt(h);
  return op;
}

/// (T + E)^alpha for the Lions matrix. T + E = a (I - rho S) with S the lower
/// shift and rho = (1/h) / (1/h + E) < 1, so the power is the lower-triangular
/// Toeplitz matrix of the binomial series a^alpha sum_k binom(alpha, k) (-rho)^k S^k.
inline MatR lions_power(int n, double X, double E, double alpha) {
  if (!(E > 0.0)) throw PreconditionError("lions_power: E must be positive");
  const double h = X / n;
  const double a = 1.0 / h + E;
  const double rho = (1.0 / h) / a;
  VecR c(n);
  c(0) = 1.0;
  for (int k = 1; k < n; ++k) c(k) = c(k - 1) * (k - 1 - alpha) / k * rho;  // binom(alpha,k)(-rho)^k
  MatR P = MatR::Zero(n, n);
  const double scale = std::pow(a, alpha);
  for (int j = 0; j < n; ++j)
    for (int i = j; i < n; ++i) P(i, j) = scale * c(i - j);
  return P;
}

/// |(T + E)^alpha f| against |(T^* + E)^alpha f| for the Lions matrix; (T^* + E)^alpha = P^T.
inline KappaRow lions_kappa(int n, double X, double E, double alpha, int n_samples = 64, std::uint64_t seed = 1) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw PreconditionError("lions_kappa: alpha must lie in (0, 1)");
  const MatR P = lions_power(n, X, E, alpha);
  const MatR G1 = P.transpose() * P;
  const MatR G2 = P * P.transpose();
  const GramExtremes ex = kappa_from_grams<double>(G1, G2);
  KappaRow row;
  row.n = n;
  row.E = E;
  row.alpha = alpha;
  row.min_ratio = ex.min_ratio;
  row.max_ratio = ex.max_ratio;
  row.kappa = ex.kappa;
  detail::sample_ratios<double>(G1, G2, MatR::Identity(n, n) * std::sqrt(X / n), n_samples, seed, row);
  return row;
}

// ---------------------------------------------------------------------------
// Refinement studies

inline constexpr double kDefaultGrowthThreshold = 1.5;

struct DomainProblem {
  std::string name;
  bool adjoint_pair = false;  // compare (H + E)^alpha with (H^* + E)^alpha (Lions) instead of the reference norm
  double X = 1.0;             // Lions length
  std::function<DiscreteOperator(int)> build;  // unused for the Lions problem
};

inline DomainProblem lions_problem(double X = 1.0) {
  DomainProblem p;
  p.name = "lions";
  p.adjoint_pair = true;
  p.X = X;
  return p;
}

struct DomainEquivalenceReport {
  std::string problem;
  double alpha = 0.5;
  double E = 0.0;
  std::vector<KappaRow> rows;
  double growth = 1.0;  // kappa(n_max) / kappa(n_min)
  double threshold = kDefaultGrowthThreshold;
  std::string verdict;  // "bounded" or "divergent"
  bool increasing = true;
};

/// E <= 0 asks for the safe shift: the largest numerical-range vertex margin over the levels.
inline DomainEquivalenceReport refinement_study(const DomainProblem& problem, const std::vector<int>& n_list, double E,
                                                double alpha, double threshold = kDefaultGrowthThreshold,
                                                int n_samples = 64, std::uint64_t seed = 1) {
  if (n_list.size() < 2) throw PreconditionError("refinement_study: need at least two levels");
  for (std::size_t i = 1; i < n_list.size(); ++i)
    if (!(n_list[i] > n_list[i - 1])) throw PreconditionError("refinement_study: n_list must be increasing");
  if (!(threshold >= 1.0)) throw PreconditionError("refinement_study: growth threshold must be >= 1");
  DomainEquivalenceReport rep;
  rep.problem = problem.name;
  rep.alpha = alpha;
  rep.threshold = threshold;
  if (problem.adjoint_pair) {
    rep.E = E > 0.0 ? E : 1.0;
    for (int n : n_list) rep.rows.push_back(lions_kappa(n, problem.X, rep.E, alpha, n_samples, seed));
  } else {
    if (!problem.build) throw PreconditionError("refinement_study: problem has no operator builder");
    std::vector<DiscreteOperator> ops;
    for (int n : n_list) ops.push_back(problem.build(n));
    rep.E = E;
    if (!(E > 0.0)) {
      rep.E = 0.0;
      for (const auto& op : ops) rep.E = std::max(rep.E, safe_shift(op.H));
    }
    for (const auto& op : ops) rep.rows.push_back(sqrt_domain_kappa(op, rep.E, n_samples, seed, alpha));
  }
  rep.growth = rep.rows.back().kappa / rep.rows.front().kappa;
  rep.verdict = rep.growth <= threshold ? "bounded" : "divergent";
  for (std::size_t i = 1; i < rep.rows.size(); ++i)
    if (!(rep.rows[i].kappa > rep.rows[i - 1].kappa)) rep.increasing = false;
  return rep;
}

// ---------------------------------------------------------------------------
// Uniform bounds in E and multiplier decay

struct RootComparison {
  double sup_root = 0.0;     // sup_E |S^{1/2} (T + E)^{-1/2}|
  double argmax_root = 0.0;
  double sup_shifted = 0.0;  // sup_E |(S + E)^{1/2} (T + E)^{-1/2}|
  double argmax_shifted = 0.0;
  std::vector<std::array<double, 3>> profile;  // (E, first, second)
};

namespace detail {
// PSD roundoff below zero is clipped for Hermitian input.
inline MatC principal_root(const MatC& A) {
  if (is_hermitian(A)) return hermitian_function(A, [](double l) { return std::sqrt(std::max(l, 0.0)); });
  return sqrt_db<cplx>(A);
}
inline MatC shifted(const MatC& A, double E) {
  MatC out = A;
  out.diagonal().array() += E;
  return out;
}
}  // namespace detail

/// Grid points below 1 are ignored.
inline RootComparison root_comparison_bounds(const MatC& S, const MatC& T, const std::vector<double>& E_grid) {
  if (S.rows() != T.rows()) throw PreconditionError("root_comparison_bounds: S and T must have equal size");
  RootComparison out;
  const MatC s_root = detail::principal_root(S);
  for (double E : E_grid) {
    if (E < 1.0) continue;
    const MatC t_root = detail::principal_root(detail::shifted(T, E));
    auto lu = checked_lu<cplx>(t_root, "root_comparison_bounds");
    const MatC t_inv = lu.inverse();
    const double first = norm2(MatC(s_root * t_inv));
    const double second = norm2(MatC(detail::principal_root(detail::shifted(S, E)) * t_inv));
    out.profile.push_back({E, first, second});
    if (first > out.sup_root) {
      out.sup_root = first;
      out.argmax_root = E;
    }
    if (second > out.sup_shifted) {
      out.sup_shifted = second;
      out.argmax_shifted = E;
    }
  }
  if (out.profile.empty()) throw PreconditionError("root_comparison_bounds: no grid point E >= 1");
  return out;
}

/// Dual-cell average of per-cell values at the dofs: the diagonal multiplier in
/// orthonormal coordinates for lumped mass.
inline VecR nodal_multiplier(const Mesh& mesh, const DofMap& dofs, const std::vector<double>& cell_values) {
  if (static_cast<int>(cell_values.size()) != mesh.n_cells())
    throw PreconditionError("nodal_multiplier: need one value per cell");
  VecR num = VecR::Zero(dofs.size()), den = VecR::Zero(dofs.size());
  for (int k = 0; k < mesh.n_cells(); ++k)
    for (int node : {k, k + 1}) {
      const int d = dofs.node_to_dof[static_cast<std::size_t>(node)];
      if (d < 0) continue;
      num(d) += cell_values[static_cast<std::size_t>(k)] * 0.5 * mesh.width(k);
      den(d) += 0.5 * mesh.width(k);
    }
  return num.cwiseQuotient(den);
}

struct DecaySamples {
  std::vector<double> E;
  std::vector<double> norm;
  double slope = 0.0;
};

/// |Phi (L + E)^{-1/2}| on the grid for Hermitian L (one eigendecomposition).
inline DecaySamples multiplier_decay(const VecR& phi, const MatC& L, const std::vector<double>& E_grid) {
  if (!is_hermitian(L)) throw PreconditionError("multiplier_decay: L must be Hermitian");
  if (phi.size() != L.rows()) throw PreconditionError("multiplier_decay: multiplier size mismatch");
  Eigen::SelfAdjointEigenSolver<MatC> es(L);
  if (es.info() != Eigen::Success) throw ConvergenceError("multiplier_decay: eigensolver failed");
  const MatC phiV = phi.cast<cplx>().asDiagonal() * es.eigenvectors();
  DecaySamples out;
  for (double E : E_grid) {
    const VecR d = es.eigenvalues().array() + E;
    if ((d.array() <= 0.0).any()) throw SpectrumError("multiplier_decay: L + E not positive");
    const MatC m = phiV * d.array().rsqrt().matrix().asDiagonal();  // unitary factor on the right dropped
    out.E.push_back(E);
    out.norm.push_back(norm2(m));
  }
  if (phi.cwiseAbs().maxCoeff() > 0.0) out.slope = loglog_slope(out.E, out.norm);
  return out;
}

}  // namespace slkato
