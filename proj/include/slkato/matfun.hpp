#pragma once

// Dense matrix functions: resolvents, principal square roots (scaled
// Denman-Beavers), fractional powers through
//   H^a = sin(pi a)/pi * int_0^inf t^(a-1) H (H + t)^(-1) dt,
// and the trace / symmetrized-determinant identity
//   -d/dz ln det((A-z)^(1/2) (A0-z)^(-1) (A-z)^(1/2)) = tr((A-z)^(-1) - (A0-z)^(-1)).
// Every square root is principal with the cut on (-inf, 0].

#include "slkato/common.hpp"

#include <Eigen/Eigenvalues>

#include <functional>
#include <type_traits>

namespace slkato {

template <class Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

// ---------------------------------------------------------------------------
// Resolvents and determinants

/// Relative reciprocal condition below which an LU factorization is treated as singular.
inline constexpr double kSingularRcond = 1e-15;

template <class Scalar>
Eigen::PartialPivLU<Mat<Scalar>> checked_lu(const Mat<Scalar>& a, const char* what) {
  Eigen::PartialPivLU<Mat<Scalar>> lu(a);
  const auto& u = lu.matrixLU();
  double umax = 0.0, umin = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < u.rows(); ++i) {
    umax = std::max(umax, std::abs(u(i, i)));
    umin = std::min(umin, std::abs(u(i, i)));
  }
  if (!(umin > 0.0) || lu.rcond() < kSingularRcond || !std::isfinite(umax))
    throw SpectrumError(std::string(what) + ": matrix is numerically singular");
  return lu;
}

/// (H - z)^(-1) by a dense LU solve against the identity.
inline MatC resolvent(const MatC& H, cplx z) {
  if (H.rows() != H.cols()) throw PreconditionError("resolvent: matrix must be square");
  MatC shifted = H;
  shifted.diagonal().array() -= z;
  auto lu = checked_lu<cplx>(shifted, "resolvent (z in spectrum)");
  return lu.solve(MatC::Identity(H.rows(), H.cols()));
}

/// ||(H - z) R - I||_2, the backward check for a computed resolvent.
inline double resolvent_residual(const MatC& H, cplx z, const MatC& R) {
  MatC shifted = H;
  shifted.diagonal().array() -= z;
  MatC res = shifted * R;
  res.diagonal().array() -= 1.0;
  return norm2(res);
}

/// log det(A) from LU pivots; the imaginary part is only defined modulo 2 pi.
template <class Scalar>
cplx log_det(const Mat<Scalar>& a) {
  Eigen::PartialPivLU<Mat<Scalar>> lu(a);
  cplx acc = 0.0;
  const auto& u = lu.matrixLU();
  for (Eigen::Index i = 0; i < u.rows(); ++i) {
    const cplx piv = static_cast<cplx>(u(i, i));
    if (piv == cplx(0.0)) throw SpectrumError("log_det: singular matrix");
    acc += std::log(piv);
  }
  if (lu.permutationP().determinant() < 0) acc += cplx(0.0, pi);
  return acc;
}

// ---------------------------------------------------------------------------
// Spectrum helpers

template <class Scalar>
bool is_triangular(const Mat<Scalar>& a) {
  bool lower = true, upper = true;
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      if (i < j && a(i, j) != Scalar(0)) lower = false;
      if (i > j && a(i, j) != Scalar(0)) upper = false;
    }
  return lower || upper;
}

template <class Scalar>
VecC eigenvalues(const Mat<Scalar>& a) {
  if (is_triangular(a)) return a.diagonal().template cast<cplx>();
  if constexpr (std::is_same_v<Scalar, double>) {
    Eigen::EigenSolver<MatR> es(a, false);
    return es.eigenvalues();
  } else {
    Eigen::ComplexEigenSolver<MatC> es(a, false);
    return es.eigenvalues();
  }
}

/// Throws SpectrumError if some eigenvalue lies on (or within tol*scale of) the cut (-inf, 0].
inline void require_off_cut(const VecC& ev, const char* what, double tol = 1e-12) {
  double scale = 0.0;
  for (const cplx& l : ev) scale = std::max(scale, std::abs(l));
  const double eps = tol * std::max(scale, 1.0);
  for (const cplx& l : ev) {
    if (l.real() <= eps && std::abs(l.imag()) <= eps)
      throw SpectrumError(std::string(what) + ": eigenvalue on the branch cut (-inf, 0]");
  }
}

// ---------------------------------------------------------------------------
// Principal square root

struct SqrtOptions {
  int max_iterations = 100;
  double tolerance = 1e-10;  // on ||Y^2 - X|| / ||X||
  bool check_spectrum = true;
};

/// Principal square root by the scaled Denman-Beavers iteration.
template <class Scalar>
Mat<Scalar> sqrt_db(const Mat<Scalar>& x, const SqrtOptions& opt = {}) {
  if (x.rows() != x.cols()) throw PreconditionError("sqrt_db: matrix must be square");
  const Eigen::Index n = x.rows();
  if (n == 0) return x;
  if (opt.check_spectrum) require_off_cut(eigenvalues(x), "sqrt_db");

  Mat<Scalar> y = x;
  Mat<Scalar> z = Mat<Scalar>::Identity(n, n);
  bool scaling = true;
  double prev_change = std::numeric_limits<double>::infinity();
  for (int it = 0; it < opt.max_iterations; ++it) {
    Eigen::PartialPivLU<Mat<Scalar>> ly(y), lz(z);
    double mu = 1.0;
    if (scaling) {
      // Determinant scaling mu = |det Y det Z|^(-1/(2n)).
      cplx ld = 0.0;
      const auto& uy = ly.matrixLU();
      const auto& uz = lz.matrixLU();
      for (Eigen::Index i = 0; i < n; ++i) ld += std::log(static_cast<cplx>(uy(i, i))) + std::log(static_cast<cplx>(uz(i, i)));
      mu = std::exp(-ld.real() / (2.0 * static_cast<double>(n)));
      if (!std::isfinite(mu) || mu <= 0.0) mu = 1.0;
    }
    const Mat<Scalar> id = Mat<Scalar>::Identity(n, n);
    Mat<Scalar> y_next = (mu * y + lz.solve(id) / mu) * 0.5;
    Mat<Scalar> z_next = (mu * z + ly.solve(id) / mu) * 0.5;
    if (!y_next.allFinite() || !z_next.allFinite()) throw ConvergenceError("sqrt_db: iteration diverged");
    const double change = (y_next - y).norm() / y_next.norm();
    y = std::move(y_next);
    z = std::move(z_next);
    if (change < 1e-2) scaling = false;
    if (change < 1e-14 || (change < 1e-11 && change >= prev_change)) break;
    prev_change = change;
  }
  const double resid = (y * y - x).norm() / x.norm();
  if (!(resid <= opt.tolerance))
    throw ConvergenceError("sqrt_db: residual " + std::to_string(resid) + " above tolerance");
  return y;
}

/// f(H) for Hermitian H via its eigendecomposition; f must map the real spectrum.
inline MatC hermitian_function(const MatC& H, const std::function<double(double)>& f) {
  Eigen::SelfAdjointEigenSolver<MatC> es(H);
  if (es.info() != Eigen::Success) throw ConvergenceError("hermitian_function: eigensolver failed");
  VecR fv = es.eigenvalues().unaryExpr(f);
  return es.eigenvectors() * fv.asDiagonal() * es.eigenvectors().adjoint();
}

// ---------------------------------------------------------------------------
// Split Gauss-Legendre rule for int_0^inf t^beta F(t) dt

/// Gauss-Legendre nodes and weights on [-1, 1].
inline void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  x.assign(static_cast<std::size_t>(n), 0.0);
  w.assign(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    // Recompute the derivative at the converged node.
    double p0 = 1.0, p1 = 0.0;
    for (int j = 0; j < n; ++j) {
      const double p2 = p1;
      p1 = p0;
      p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
    }
    dp = n * (z * p0 - p1) / (z * z - 1.0);
    const auto lo = static_cast<std::size_t>(i);
    const auto hi = static_cast<std::size_t>(n - 1 - i);
    x[lo] = -z;
    x[hi] = z;
    w[lo] = w[hi] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
}

/// Split at t = 1 with graded Gauss-Legendre panels toward 0 on each half.
/// (0,1) uses t = u^m and (1,inf) uses t = v^(-m'), with m, m' chosen from the
/// power so that t^beta dt and t^(beta-1) dt become bounded; for beta = -1/2
/// this is t = u^2 and t = v^(-2).
struct QuadratureSpec {
  int panels = 8;           // per half
  int nodes_per_panel = 25;
  double grading = 0.2;     // ratio between consecutive panel breakpoints

  int n_nodes() const { return 2 * panels * nodes_per_panel; }

  void validate() const {
    if (panels < 1 || nodes_per_panel < 1 || n_nodes() < 8)
      throw PreconditionError("quadrature needs at least 8 nodes");
    if (!(grading > 0.0 && grading < 1.0)) throw PreconditionError("quadrature grading must lie in (0, 1)");
  }

  /// Default panel layout with the requested total node count (rounded up to a panel multiple).
  static QuadratureSpec with_nodes(int total) {
    QuadratureSpec s;
    s.nodes_per_panel = std::max(1, (total + 2 * s.panels - 1) / (2 * s.panels));
    return s;
  }
};

struct QuadratureRule {
  std::vector<double> t;
  std::vector<double> w;
};

/// Nodes t_k > 0 and positive weights with int_0^inf t^beta F(t) dt ~ sum w_k F(t_k),
/// accurate for F smooth on [0, inf) with F(t) ~ 1/t at infinity. beta in (-1, 0).
inline QuadratureRule power_weight_rule(const QuadratureSpec& spec, double beta) {
  spec.validate();
  if (!(beta > -1.0 && beta < 0.0)) throw PreconditionError("power_weight_rule: beta must lie in (-1, 0)");
  std::vector<double> gx, gw;
  gauss_legendre(spec.nodes_per_panel, gx, gw);

  std::vector<double> breaks{0.0};
  for (int k = spec.panels - 1; k >= 1; --k) breaks.push_back(std::pow(spec.grading, k));
  breaks.push_back(1.0);

  const double ml = 1.0 / (beta + 1.0);
  const double mr = -1.0 / beta;
  QuadratureRule rule;
  // Left half, t = u^ml: t^beta dt = ml u^(ml (beta + 1) - 1) du = ml du.
  for (std::size_t p = 0; p + 1 < breaks.size(); ++p) {
    const double lo = breaks[p], hi = breaks[p + 1];
    for (std::size_t i = 0; i < gx.size(); ++i) {
      const double u = 0.5 * (hi - lo) * gx[i] + 0.5 * (hi + lo);
      const double wu = 0.5 * (hi - lo) * gw[i];
      rule.t.push_back(std::pow(u, ml));
      rule.w.push_back(wu * ml * std::pow(u, ml * (beta + 1.0) - 1.0));
    }
  }
  // Right half, t = v^(-mr): t^beta dt = mr v^(-mr (beta + 1) - 1) dv.
  for (std::size_t p = 0; p + 1 < breaks.size(); ++p) {
    const double lo = breaks[p], hi = breaks[p + 1];
    for (std::size_t i = 0; i < gx.size(); ++i) {
      const double v = 0.5 * (hi - lo) * gx[i] + 0.5 * (hi + lo);
      const double wv = 0.5 * (hi - lo) * gw[i];
      rule.t.push_back(std::pow(v, -mr));
      rule.w.push_back(wv * mr * std::pow(v, -mr * (beta + 1.0) - 1.0));
    }
  }
  return rule;
}

// ---------------------------------------------------------------------------
// Fractional powers

/// H^alpha from the resolvent integral; H + t must be invertible for every t > 0.
template <class Scalar>
Mat<Scalar> frac_power_quad(const Mat<Scalar>& H, double alpha, const QuadratureSpec& spec = {}) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw PreconditionError("frac_power_quad: alpha must lie in (0, 1)");
  if (H.rows() != H.cols()) throw PreconditionError("frac_power_quad: matrix must be square");
  const QuadratureRule rule = power_weight_rule(spec, alpha - 1.0);
  const Eigen::Index n = H.rows();
  PairwiseSum<Mat<Scalar>> sum;
  for (std::size_t k = 0; k < rule.t.size(); ++k) {
    Mat<Scalar> shifted = H;
    shifted.diagonal().array() += rule.t[k];
    auto lu = checked_lu<Scalar>(shifted, "frac_power_quad (H + t singular)");
    sum.add(Mat<Scalar>(rule.w[k] * lu.solve(H)));
  }
  return sum.result(Mat<Scalar>::Zero(n, n)) * (std::sin(pi * alpha) / pi);
}

struct PowerLawResiduals {
  double adjoint = 0.0;            // ||(H^a)^* - (H^*)^a||
  double product = 0.0;            // ||H^a H^b - H^(a+b)||
  double adjoint_relative = 0.0;   // divided by ||H^a||
  double product_relative = 0.0;   // divided by ||H^(a+b)||
};

inline PowerLawResiduals check_power_laws(const MatC& H, double alpha, double beta, const QuadratureSpec& spec = {}) {
  if (!(alpha > 0.0 && beta > 0.0 && alpha + beta < 1.0))
    throw PreconditionError("check_power_laws: need alpha, beta > 0 and alpha + beta < 1");
  const MatC ha = frac_power_quad<cplx>(H, alpha, spec);
  const MatC hsa = frac_power_quad<cplx>(MatC(H.adjoint()), alpha, spec);
  const MatC hb = alpha == beta ? ha : frac_power_quad<cplx>(H, beta, spec);
  const MatC hab = frac_power_quad<cplx>(H, alpha + beta, spec);
  PowerLawResiduals r;
  r.adjoint = norm2(MatC(ha.adjoint() - hsa));
  r.product = norm2(MatC(ha * hb - hab));
  r.adjoint_relative = r.adjoint / norm2(ha);
  r.product_relative = r.product / norm2(hab);
  return r;
}

// ---------------------------------------------------------------------------
// Trace formula for the symmetrized perturbation determinant

struct TraceDetResult {
  cplx log_det_derivative;  // -d/dz ln D(z) by central differences
  cplx trace;               // tr((A-z)^(-1) - (A0-z)^(-1))
  double residual = 0.0;    // |difference|
};

/// ln det((A-z)^(1/2) (A0-z)^(-1) (A-z)^(1/2)), branch-checked.
inline cplx symmetrized_log_det(const MatC& A, const MatC& A0, cplx z) {
  MatC az = A, a0z = A0;
  az.diagonal().array() -= z;
  a0z.diagonal().array() -= z;
  require_off_cut(eigenvalues(az), "trace_det_check: A - z crosses the branch cut");
  require_off_cut(eigenvalues(a0z), "trace_det_check: A0 - z crosses the branch cut");
  const MatC root = sqrt_db<cplx>(az, {100, 1e-10, false});
  auto lu = checked_lu<cplx>(a0z, "trace_det_check (A0 - z singular)");
  const MatC sym = root * lu.solve(root);
  return log_det<cplx>(sym);
}

inline TraceDetResult trace_det_check(const MatC& A, const MatC& A0, cplx z, double h) {
  if (A.rows() != A0.rows() || A.rows() != A.cols() || A0.rows() != A0.cols())
    throw PreconditionError("trace_det_check: A and A0 must be square of equal size");
  if (!(h > 0.0)) throw PreconditionError("trace_det_check: step h must be positive");
  const cplx lp = symmetrized_log_det(A, A0, z + h);
  const cplx lm = symmetrized_log_det(A, A0, z - h);
  cplx diff = lp - lm;
  // The log is only defined modulo 2 pi i; the true increment is small.
  diff.imag(std::remainder(diff.imag(), 2.0 * pi));
  TraceDetResult out;
  out.log_det_derivative = -diff / (2.0 * h);
  out.trace = resolvent(A, z).trace() - resolvent(A0, z).trace();
  out.residual = std::abs(out.log_det_derivative - out.trace);
  return out;
}

}  // namespace slkato
