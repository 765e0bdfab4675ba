#pragma once

// Factored perturbations W = B^* A, the operator K(z) = -A (T0 - z)^{-1} B^*,
// and Kato's resolvent formula
//   R(z) = R0(z) - R0(z) B^* [I - K(z)]^{-1} A R0(z).
//
// All factors live in the L2-orthonormal coordinates of the base operator, so
// B^* A reproduces the assembled perturbation matrix up to roundoff.

#include <Eigen/SparseCore>

#include "slkato/matfun.hpp"
#include "slkato/mesh.hpp"

namespace slkato {

enum class FactorVariant { qr_pair, s_pair, full_triple };

inline const char* to_string(FactorVariant v) {
  switch (v) {
    case FactorVariant::qr_pair: return "qr_pair";
    case FactorVariant::s_pair: return "s_pair";
    case FactorVariant::full_triple: return "full_triple";
  }
  return "?";
}

struct FactoredPerturbation {
  FactorVariant variant = FactorVariant::qr_pair;
  MatC A;  // k x n, orthonormal coordinates
  MatC B;  // k x n
  MatC A_nodal, B_nodal;

  Eigen::Index aux_dim() const { return A.rows(); }
  /// B^* A in orthonormal coordinates.
  MatC perturbation() const { return B.adjoint() * A; }
  /// B^* A in nodal coordinates (compare with the assembled form matrices).
  MatC nodal_perturbation() const { return B_nodal.adjoint() * A_nodal; }
};

namespace detail {

inline MatC stack_rows(std::initializer_list<MatC> blocks) {
  Eigen::Index rows = 0, cols = -1;
  for (const auto& b : blocks) {
    rows += b.rows();
    cols = b.cols();
  }
  MatC out(rows, cols);
  Eigen::Index r = 0;
  for (const auto& b : blocks) {
    out.middleRows(r, b.rows()) = b;
    r += b.rows();
  }
  return out;
}

inline MatC to_orthonormal_columns(const MatC& nodal, const DiscreteOperator& coords) {
  if (coords.meta.mass == MassTreatment::lumped) {
    MatC out = nodal;
    for (Eigen::Index j = 0; j < out.cols(); ++j) out.col(j) *= coords.mass_inv_sqrt(j, j);
    return out;
  }
  return nodal * coords.mass_inv_sqrt;
}

}  // namespace detail

/// Factor the r/s/q part of `c` over the coordinates of `coords` (same mesh and dofs).
///   qr_pair:     A = [D; phase(w) |w|^{1/2}],   B = [conj(r) Avg; |w|^{1/2}]   -> K1 + K3
///   s_pair:      A = s Avg,                      B = D                          -> K2
///   full_triple: the three blocks stacked                                      -> K1 + K2 + K3
/// D and Avg are the cell derivative and midpoint-average maps, w the lumped potential weights.
inline FactoredPerturbation build_factorization(const DiscreteOperator& coords, const CoefficientSet& c,
                                                FactorVariant variant) {
  const Mesh& mesh = coords.mesh;
  if (c.n_cells() != mesh.n_cells()) throw PreconditionError("build_factorization: samples not aligned with mesh");
  const CellOperators ops = cell_operators(mesh, coords.dofs);
  const Eigen::Index nc = mesh.n_cells();
  const Eigen::Index nd = coords.dofs.size();
  const MatC D = ops.derivative.cast<cplx>();

  VecC r_bar(nc), s(nc);
  for (Eigen::Index k = 0; k < nc; ++k) {
    r_bar(k) = std::conj(c.r[static_cast<std::size_t>(k)]);
    s(k) = c.s[static_cast<std::size_t>(k)];
  }
  const MatC avg = ops.average.cast<cplx>();
  const MatC rbar_avg = r_bar.asDiagonal() * avg;
  const MatC s_avg = s.asDiagonal() * avg;

  const VecC w = lumped_potential_weights(mesh, c, coords.dofs);
  VecC aq(nd), bq(nd);
  for (Eigen::Index i = 0; i < nd; ++i) {
    const double mag = std::sqrt(std::abs(w(i)));
    aq(i) = std::polar(mag, principal_arg(w(i)));
    bq(i) = mag;
  }
  const MatC Aq = aq.asDiagonal().toDenseMatrix();
  const MatC Bq = bq.asDiagonal().toDenseMatrix();

  FactoredPerturbation f;
  f.variant = variant;
  switch (variant) {
    case FactorVariant::qr_pair:
      f.A_nodal = detail::stack_rows({D, Aq});
      f.B_nodal = detail::stack_rows({rbar_avg, Bq});
      break;
    case FactorVariant::s_pair:
      f.A_nodal = s_avg;
      f.B_nodal = D;
      break;
    case FactorVariant::full_triple:
      f.A_nodal = detail::stack_rows({D, s_avg, Aq});
      f.B_nodal = detail::stack_rows({rbar_avg, D, Bq});
      break;
  }
  f.A = detail::to_orthonormal_columns(f.A_nodal, coords);
  f.B = detail::to_orthonormal_columns(f.B_nodal, coords);
  return f;
}

namespace detail {

/// R - R B^* (I - K)^{-1} A R with K = -A R B^*. The factors are banded, so
/// they are applied as sparse matrices.
inline MatC kato_update(const MatC& R, const FactoredPerturbation& f, const char* what, double* norm_K = nullptr) {
  const Eigen::SparseMatrix<cplx> A = f.A.sparseView();
  const Eigen::SparseMatrix<cplx> Bs = MatC(f.B.adjoint()).sparseView();
  const MatC RBs = R * Bs;
  const MatC AR = A * R;
  MatC IK = A * RBs;  // = -K
  if (norm_K) *norm_K = norm2(IK);
  IK.diagonal().array() += 1.0;
  Eigen::PartialPivLU<MatC> lu(IK);
  if (!(lu.rcond() > kSingularRcond) || !lu.matrixLU().allFinite())
    throw AdmissibilityError(std::string(what) + ": 1 is an eigenvalue of K(z)");
  return R - RBs * lu.solve(AR);
}

}  // namespace detail

/// K(z) = -A (H0 - z)^{-1} B^*.
inline MatC kato_K(const MatC& H0, const FactoredPerturbation& f, cplx z) {
  MatC shifted = H0;
  shifted.diagonal().array() -= z;
  auto lu = checked_lu<cplx>(shifted, "kato_K (z in the spectrum of T0)");
  const Eigen::SparseMatrix<cplx> A = f.A.sparseView();
  return -(A * lu.solve(MatC(f.B.adjoint())));
}

/// Kato's resolvent formula. Throws AdmissibilityError if 1 is (numerically) an eigenvalue of K(z).
inline MatC perturbed_resolvent(const MatC& H0, const FactoredPerturbation& f, cplx z) {
  const MatC R0 = resolvent(H0, z);
  if (f.aux_dim() == 0) return R0;
  return detail::kato_update(R0, f, "perturbed_resolvent");
}

struct IdentityReport {
  double max_rel_error = 0.0;
  std::vector<std::pair<cplx, double>> errors;  // (z, relative error)
  std::vector<cplx> excluded;                    // z where the identity was not admissible
};

/// Kato-built resolvent against the direct inverse of the one-shot assembly.
inline IdentityReport verify_identity(const MatC& direct, const MatC& H0, const FactoredPerturbation& f,
                                      const std::vector<cplx>& z_list) {
  IdentityReport rep;
  for (const cplx& z : z_list) {
    try {
      const MatC rk = perturbed_resolvent(H0, f, z);
      const MatC rd = resolvent(direct, z);
      const double err = norm2(MatC(rk - rd)) / norm2(rd);
      rep.errors.emplace_back(z, err);
      rep.max_rel_error = std::max(rep.max_rel_error, err);
    } catch (const AdmissibilityError&) {
      rep.excluded.push_back(z);
    } catch (const SpectrumError&) {
      rep.excluded.push_back(z);
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Two-step construction: L_{p,0,0,0} -> L_{p,q,r,0} (qr_pair) -> L_{p,q,r,s} (s_pair)

struct TwoStepResult {
  MatC R;         // resolvent of the fully perturbed operator
  MatC R_stage1;  // resolvent of L_{p,q,r,0}
  double norm_K1 = 0.0;
  double norm_K2 = 0.0;
};

class TwoStep {
 public:
  TwoStep(const DiscreteOperator& T0, const CoefficientSet& c)
      : H0_(T0.H),
        qr_(build_factorization(T0, c, FactorVariant::qr_pair)),
        s_(build_factorization(T0, c, FactorVariant::s_pair)) {}

  const FactoredPerturbation& stage1() const { return qr_; }
  const FactoredPerturbation& stage2() const { return s_; }

  TwoStepResult resolvent(cplx z) const {
    TwoStepResult out;
    try {
      out.R_stage1 = perturbed_resolvent(H0_, qr_, z);
    } catch (const AdmissibilityError& e) {
      throw AdmissibilityError(std::string("two_step stage 1: ") + e.what());
    }
    out.norm_K1 = norm2(kato_K(H0_, qr_, z));
    if (s_.aux_dim() == 0 || s_.A.norm() == 0.0) {
      out.R = out.R_stage1;
      return out;
    }
    // Stage 2 uses R1 in place of (T0 - z)^{-1}.
    out.R = detail::kato_update(out.R_stage1, s_, "two_step stage 2", &out.norm_K2);
    return out;
  }

 private:
  MatC H0_;
  FactoredPerturbation qr_, s_;
};

// ---------------------------------------------------------------------------
// Decay diagnostics

/// (H + E)^{-1/2} for a family of shifts; Hermitian H reuses one eigendecomposition.
class InverseSqrtFamily {
 public:
  explicit InverseSqrtFamily(const MatC& H) : H_(H), hermitian_(is_hermitian(H)) {
    if (hermitian_) {
      es_.compute(H);
      if (es_.info() != Eigen::Success) throw ConvergenceError("InverseSqrtFamily: eigensolver failed");
    }
  }

  MatC operator()(double E) const {
    if (hermitian_) {
      VecR d = es_.eigenvalues().array() + E;
      if ((d.array() <= 0.0).any()) throw SpectrumError("InverseSqrtFamily: H + E not positive");
      d = d.array().rsqrt();
      return es_.eigenvectors() * d.asDiagonal() * es_.eigenvectors().adjoint();
    }
    MatC shifted = H_;
    shifted.diagonal().array() += E;
    const MatC root = sqrt_db<cplx>(shifted);
    return checked_lu<cplx>(root, "InverseSqrtFamily").inverse();
  }

 private:
  MatC H_;
  bool hermitian_;
  Eigen::SelfAdjointEigenSolver<MatC> es_;
};

struct DecayRow {
  double E = 0.0;
  double normK = 0.0;     // ||K(-E)||
  double normA = 0.0;     // ||A (T0 + E)^{-1/2}||
  double normB = 0.0;     // ||(T0 + E)^{-1/2} B^*||
  double integral = 0.0;  // int_R^Rmax lambda^{-1} normA(lambda+E) normB(lambda+E) dlambda
};

struct DecayOptions {
  double R = 1.0;
  double R_max = 1e6;
  int integral_nodes = 10;  // Gauss-Legendre in log(lambda); 0 skips the integral
};

struct DecayProfile {
  std::vector<DecayRow> rows;
  double slope = 0.0;  // log-log slope of normK
  bool monotone = true;
};

inline DecayProfile decay_profile(const MatC& H0, const FactoredPerturbation& f, const std::vector<double>& E_list,
                                  const DecayOptions& opt = {}) {
  for (std::size_t i = 0; i < E_list.size(); ++i) {
    if (!(E_list[i] > 0.0)) throw PreconditionError("decay_profile: E values must be positive");
    if (i > 0 && !(E_list[i] > E_list[i - 1])) throw PreconditionError("decay_profile: E grid must be increasing");
  }
  const InverseSqrtFamily family(H0);
  const MatC Bs = f.B.adjoint();
  auto norms = [&](double E) {
    const MatC S = family(E);
    return std::pair<double, double>{norm2(MatC(f.A * S)), norm2(MatC(S * Bs))};
  };
  std::vector<double> gx, gw;
  if (opt.integral_nodes > 0) gauss_legendre(opt.integral_nodes, gx, gw);

  DecayProfile prof;
  std::vector<double> Es, Ks;
  for (double E : E_list) {
    DecayRow row;
    row.E = E;
    row.normK = norm2(kato_K(H0, f, -E));
    std::tie(row.normA, row.normB) = norms(E);
    if (opt.integral_nodes > 0) {
      const double l0 = std::log(opt.R), l1 = std::log(opt.R_max);
      PairwiseSum<double> acc;
      for (std::size_t i = 0; i < gx.size(); ++i) {
        // dlambda / lambda = d(log lambda)
        const double lam = std::exp(0.5 * (l1 - l0) * gx[i] + 0.5 * (l1 + l0));
        const auto [na, nb] = norms(lam + E);
        acc.add(0.5 * (l1 - l0) * gw[i] * na * nb);
      }
      row.integral = acc.result(0.0);
    }
    if (!prof.rows.empty() && row.normK > prof.rows.back().normK) prof.monotone = false;
    prof.rows.push_back(row);
    Es.push_back(E);
    Ks.push_back(row.normK);
  }
  prof.slope = loglog_slope(Es, Ks);
  return prof;
}

/// Smallest E in [E_lo, E_hi] with ||K(-E)|| <= target, by bisection in log E
/// (assumes the norm decreases in E). Returns +inf if E_hi does not reach it.
inline double admissibility_threshold(const MatC& H0, const FactoredPerturbation& f, double E_lo, double E_hi,
                                      double target = 0.5, int iterations = 60) {
  if (!(E_lo > 0.0 && E_hi > E_lo)) throw PreconditionError("admissibility_threshold: need 0 < E_lo < E_hi");
  auto g = [&](double E) { return norm2(kato_K(H0, f, -E)); };
  if (g(E_lo) <= target) return E_lo;
  if (g(E_hi) > target) return std::numeric_limits<double>::infinity();
  double lo = std::log(E_lo), hi = std::log(E_hi);
  for (int it = 0; it < iterations && hi - lo > 1e-12; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (g(std::exp(mid)) <= target)
      hi = mid;
    else
      lo = mid;
  }
  return std::exp(hi);
}

}  // namespace slkato
