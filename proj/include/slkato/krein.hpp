#pragma once

// Closed forms for p == 1 on a finite interval (a, b) with a Robin condition
// theta_a at a and Dirichlet at b:
//   u2(z, x) = sin(w (b - x)) / sin(w (b - a)),   w = z^{1/2},
//   d(z)     = cot(theta_a) + u2'(z, a),
//   G(z)     = G_D(z) - d(z)^{-1} u2(z, x) u2(z, x'),
// the square-root kernel of (L + E)^{-1/2} and the K0 bound on its correction.
//
// Everything is evaluated with exponentials that decay (Im w >= 0 after a sign
// flip, which all the even-in-w quotients allow), so large |z| and large E do
// not overflow.

#include "slkato/matfun.hpp"
#include "slkato/mesh.hpp"

#include <array>

namespace slkato {

namespace detail {

/// e^z - 1 without cancellation for small |z|.
inline cplx cexpm1(cplx z) {
  const double x = z.real(), y = z.imag();
  const double s = std::sin(0.5 * y);
  return {std::expm1(x) * std::cos(y) - 2.0 * s * s, std::exp(x) * std::sin(y)};
}

/// sinh(u) = e^u sigma(u) for u >= 0.
inline double sigma(double u) { return -0.5 * std::expm1(-2.0 * u); }

/// z^{1/2} with the sign chosen so that Im w >= 0.
inline cplx even_root(cplx z) {
  cplx w = std::sqrt(z);
  if (w.imag() < 0.0) w = -w;
  return w;
}

inline constexpr double kSmallRoot = 1e-8;
inline const cplx I(0.0, 1.0);

inline void require_inside(double x, double a, double b, const char* what) {
  const double tol = 1e-12 * std::max(1.0, std::abs(b - a));
  if (x < a - tol || x > b + tol) throw PreconditionError(std::string(what) + ": point outside [a, b]");
}

/// e^{2 i w L} - 1, rejecting Dirichlet eigenvalues.
inline cplx dirichlet_denominator(cplx w, double L) {
  const cplx den = cexpm1(2.0 * I * w * L);
  if (std::abs(den) < 1e-13) throw SpectrumError("z is a Dirichlet eigenvalue of (a, b)");
  return den;
}

}  // namespace detail

inline cplx u2_closed_form(cplx z, double x, double a, double b) {
  if (!(a < b)) throw PreconditionError("u2: need a < b");
  detail::require_inside(x, a, b, "u2");
  const double L = b - a, y = std::clamp(b - x, 0.0, L);
  const cplx w = detail::even_root(z);
  if (std::abs(w) * L < detail::kSmallRoot) return y / L;
  if (w.imag() > 0.0) {
    const cplx den = detail::dirichlet_denominator(w, L);
    return std::exp(detail::I * w * (L - y)) * detail::cexpm1(2.0 * detail::I * w * y) / den;
  }
  const cplx sl = std::sin(w * L);
  if (std::abs(sl) < 1e-13) throw SpectrumError("z is a Dirichlet eigenvalue of (a, b)");
  return std::sin(w * y) / sl;
}

/// d/dx u2(z, x).
inline cplx u2_derivative(cplx z, double x, double a, double b) {
  if (!(a < b)) throw PreconditionError("u2: need a < b");
  detail::require_inside(x, a, b, "u2'");
  const double L = b - a, y = std::clamp(b - x, 0.0, L);
  const cplx w = detail::even_root(z);
  if (std::abs(w) * L < detail::kSmallRoot) return -1.0 / L;
  if (w.imag() > 0.0) {
    const cplx den = detail::dirichlet_denominator(w, L);
    const cplx e2 = std::exp(2.0 * detail::I * w * y);
    return -w * detail::I * std::exp(detail::I * w * (L - y)) * (e2 + 1.0) / den;
  }
  const cplx sl = std::sin(w * L);
  if (std::abs(sl) < 1e-13) throw SpectrumError("z is a Dirichlet eigenvalue of (a, b)");
  return -w * std::cos(w * y) / sl;
}

/// cot(theta_a) + u2'(z, a). Dirichlet theta_a has no such denominator.
inline cplx d_theta(cplx z, const BoundaryCondition& theta_a, double a, double b) {
  theta_a.validate();
  return theta_a.cot_theta() + u2_derivative(z, a, a, b);
}

/// Tolerance for "d vanishes": shared spectrum of the Dirichlet and Robin realizations.
inline bool d_vanishes(cplx d, cplx z, const BoundaryCondition& theta_a) {
  const double scale = 1.0 + std::abs(theta_a.cot_theta()) + std::sqrt(std::abs(z));
  return std::abs(d) <= 1e-12 * scale;
}

/// Green's function of -d^2/dx^2 - z with Dirichlet conditions at a and b.
inline cplx green_dirichlet(cplx z, double x, double xp, double a, double b) {
  detail::require_inside(x, a, b, "green_dirichlet");
  detail::require_inside(xp, a, b, "green_dirichlet");
  const double L = b - a;
  const double alpha = std::clamp(std::min(x, xp) - a, 0.0, L);
  const double beta = std::clamp(b - std::max(x, xp), 0.0, L);
  const cplx w = detail::even_root(z);
  if (std::abs(w) * L < detail::kSmallRoot) return alpha * beta / L;
  if (w.imag() > 0.0) {
    using detail::cexpm1;
    using detail::I;
    const cplx den = detail::dirichlet_denominator(w, L);
    return std::exp(I * w * (L - alpha - beta)) * cexpm1(2.0 * I * w * alpha) * cexpm1(2.0 * I * w * beta) /
           (2.0 * I * w * den);
  }
  const cplx sl = std::sin(w * L);
  if (std::abs(sl) < 1e-13) throw SpectrumError("z is a Dirichlet eigenvalue of (a, b)");
  return std::sin(w * alpha) * std::sin(w * beta) / (w * sl);
}

/// Rank-one correction T(z, x, x') = u2(z, x) u2(z, x') / d(z).
inline cplx robin_correction(cplx z, double x, double xp, const BoundaryCondition& theta_a, double a, double b) {
  const cplx d = d_theta(z, theta_a, a, b);
  if (d_vanishes(d, z, theta_a)) throw AdmissibilityError("d(z) = 0: z is shared by the Dirichlet and Robin spectra");
  return u2_closed_form(z, x, a, b) * u2_closed_form(z, xp, a, b) / d;
}

/// Green's function of the realization with theta_a at a and Dirichlet at b.
inline cplx green_robin(cplx z, double x, double xp, const BoundaryCondition& theta_a, double a, double b) {
  if (theta_a.is_dirichlet()) return green_dirichlet(z, x, xp, a, b);
  return green_dirichlet(z, x, xp, a, b) - robin_correction(z, x, xp, theta_a, a, b);
}

// ---------------------------------------------------------------------------
// Kernel tables

enum class KernelKind { green, sqrt_kernel, t_kernel };

inline const char* to_string(KernelKind k) {
  switch (k) {
    case KernelKind::green: return "green";
    case KernelKind::sqrt_kernel: return "sqrt_kernel";
    case KernelKind::t_kernel: return "t_kernel";
  }
  return "?";
}

/// values(i, j) ~ K(x[i], xp[j]). Square-root kernels are averaged over the
/// dual cell of xp[j] (the pointwise kernel has a log singularity on the diagonal).
struct KernelTable {
  KernelKind kind = KernelKind::green;
  std::vector<double> x, xp;
  MatC values;
  cplx z = 0.0;
  double E = 0.0;
  BoundaryCondition theta_a, theta_b;
};

namespace detail {
inline void require_finite_mesh(const Mesh& mesh, const char* what) {
  if (mesh.interval.kind != IntervalKind::finite)
    throw PreconditionError(std::string(what) + ": closed forms need a finite interval");
}

/// Lumped nodal masses (dual-cell lengths) of all mesh nodes.
inline std::vector<double> dual_lengths(const Mesh& mesh) {
  std::vector<double> m(static_cast<std::size_t>(mesh.n_nodes()), 0.0);
  for (int k = 0; k < mesh.n_cells(); ++k) {
    m[static_cast<std::size_t>(k)] += 0.5 * mesh.width(k);
    m[static_cast<std::size_t>(k) + 1] += 0.5 * mesh.width(k);
  }
  return m;
}
}  // namespace detail

/// Pointwise Green's function on all mesh nodes (theta_b = Dirichlet).
inline KernelTable green_table(cplx z, const BoundaryCondition& theta_a, const Mesh& mesh) {
  detail::require_finite_mesh(mesh, "green_table");
  KernelTable t;
  t.kind = KernelKind::green;
  t.x = t.xp = mesh.nodes;
  t.z = z;
  t.theta_a = theta_a;
  t.theta_b = BoundaryCondition::dirichlet();
  const double a = mesh.left(), b = mesh.right();
  const Eigen::Index n = mesh.n_nodes();
  t.values.resize(n, n);
  if (theta_a.is_dirichlet()) {
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index i = 0; i < n; ++i) t.values(i, j) = green_dirichlet(z, t.x[i], t.xp[j], a, b);
    return t;
  }
  const cplx d = d_theta(z, theta_a, a, b);
  if (d_vanishes(d, z, theta_a)) throw AdmissibilityError("green_table: d(z) = 0");
  VecC u(n);
  for (Eigen::Index i = 0; i < n; ++i) u(i) = u2_closed_form(z, t.x[i], a, b);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) t.values(i, j) = green_dirichlet(z, t.x[i], t.xp[j], a, b) - u(i) * u(j) / d;
  return t;
}

/// T(t, x, x') = u2(-t, x) u2(-t, x') / d(-t) on all mesh nodes.
inline KernelTable t_kernel_table(double t, const BoundaryCondition& theta_a, const Mesh& mesh) {
  detail::require_finite_mesh(mesh, "t_kernel_table");
  KernelTable tab;
  tab.kind = KernelKind::t_kernel;
  tab.x = tab.xp = mesh.nodes;
  tab.z = -t;
  tab.theta_a = theta_a;
  tab.theta_b = BoundaryCondition::dirichlet();
  const Eigen::Index n = mesh.n_nodes();
  tab.values = MatC::Zero(n, n);
  if (theta_a.is_dirichlet()) return tab;
  const double a = mesh.left(), b = mesh.right();
  const cplx d = d_theta(-t, theta_a, a, b);
  if (d_vanishes(d, -t, theta_a)) throw AdmissibilityError("t_kernel_table: d(-t) = 0");
  VecC u(n);
  for (Eigen::Index i = 0; i < n; ++i) u(i) = u2_closed_form(-t, tab.x[i], a, b);
  tab.values = u * u.transpose() / d;
  return tab;
}

/// Krein's formula in orthonormal coordinates. R_dir is the resolvent of the
/// Dirichlet-Dirichlet operator at z on the interior nodes (lumped mass). The
/// result lives on the dofs of the theta_a / Dirichlet realization, i.e. the
/// nodes a = x_0, ..., x_{n-1}: R_dir padded with a zero row and column at a,
/// minus d^{-1} M^{1/2} u u^T M^{1/2} with u = u2(z, x_i).
inline MatC krein_resolvent(const MatC& R_dir, cplx z, const BoundaryCondition& theta_a, const Mesh& mesh) {
  detail::require_finite_mesh(mesh, "krein_resolvent");
  theta_a.validate();
  const int n = mesh.n_cells();
  if (R_dir.rows() != n - 1 || R_dir.cols() != n - 1)
    throw PreconditionError("krein_resolvent: R_dir must act on the interior nodes");
  MatC out = MatC::Zero(n, n);
  out.bottomRightCorner(n - 1, n - 1) = R_dir;
  if (theta_a.is_dirichlet()) return out;
  const double a = mesh.left(), b = mesh.right();
  const cplx d = d_theta(z, theta_a, a, b);
  if (d_vanishes(d, z, theta_a)) throw AdmissibilityError("krein_resolvent: d(z) = 0");
  const auto m = detail::dual_lengths(mesh);
  VecC v(n);
  for (int i = 0; i < n; ++i) v(i) = std::sqrt(m[static_cast<std::size_t>(i)]) * u2_closed_form(z, mesh.nodes[i], a, b);
  out -= v * v.transpose() / d;
  return out;
}

/// Kernel values G_ij = R_ij / sqrt(m_i m_j) of an orthonormal-coordinate
/// operator on the first R.rows() mesh nodes (or on nodes offset..).
inline MatC kernel_from_orthonormal(const MatC& R, const Mesh& mesh, int first_node = 0) {
  const auto m = detail::dual_lengths(mesh);
  MatC g(R.rows(), R.cols());
  for (Eigen::Index j = 0; j < R.cols(); ++j)
    for (Eigen::Index i = 0; i < R.rows(); ++i)
      g(i, j) = R(i, j) / std::sqrt(m[static_cast<std::size_t>(first_node + i)] *
                                    m[static_cast<std::size_t>(first_node + j)]);
  return g;
}

// ---------------------------------------------------------------------------
// Square-root kernel

/// Shift above which L_{theta_a} + E is strictly accretive: from
/// |f(a)|^2 <= eps |f'|^2 + (1/L + 1/eps) |f|^2 with eps = 1/Re cot(theta_a), plus margin 1.
inline double krein_safe_shift(const BoundaryCondition& theta_a, double a, double b) {
  if (theta_a.is_dirichlet()) return 1.0;
  const double c = theta_a.cot_theta().real();
  return std::max(0.0, c * (1.0 / (b - a) + c)) + 1.0;
}

namespace detail {

/// Average over y in [alpha, beta] of G_D(-k^2, x, y).
inline double avg_green_dirichlet_neg(double k, double x, double alpha, double beta, double a, double b) {
  const double L = b - a;
  double total = 0.0;
  const double sl = sigma(k * L);
  const double lo = std::max(alpha, x);
  if (beta > lo) {
    total += std::exp(k * (x - lo)) * sigma(k * (x - a)) * sigma(k * (b - 0.5 * (lo + beta))) *
             sigma(0.5 * k * (beta - lo)) / sl;
  }
  const double hi = std::min(beta, x);
  if (hi > alpha) {
    total += std::exp(k * (hi - x)) * sigma(k * (b - x)) * sigma(k * (0.5 * (alpha + hi) - a)) *
             sigma(0.5 * k * (hi - alpha)) / sl;
  }
  return total * 2.0 / (k * k * (beta - alpha));
}

/// u2(-k^2, x) and its average over [alpha, beta].
inline double u2_neg(double k, double x, double a, double b) {
  return std::exp(-k * (x - a)) * sigma(k * (b - x)) / sigma(k * (b - a));
}
inline double avg_u2_neg(double k, double alpha, double beta, double a, double b) {
  const double delta = beta - alpha;
  return std::exp(-k * (alpha - a)) * sigma(k * (b - 0.5 * (alpha + beta))) * sigma(0.5 * k * delta) /
         sigma(k * (b - a)) * 2.0 / (k * delta);
}

inline cplx d_neg(double k, cplx cot_a, double L) { return cot_a - k / std::tanh(k * L); }

}  // namespace detail

/// R^{1/2}(-E, x_i, .) averaged over the dual cell of x'_j, all mesh nodes:
///   (1/pi) int_0^inf t^{-1/2} [G_D(-(t+E)) - T(t+E)] dt,
/// with t = E tau and the shared split Gauss rule in tau.
inline KernelTable sqrt_kernel(double E, const BoundaryCondition& theta_a, const Mesh& mesh,
                               const QuadratureSpec& quad = {}) {
  detail::require_finite_mesh(mesh, "sqrt_kernel");
  theta_a.validate();
  const double a = mesh.left(), b = mesh.right(), L = b - a;
  if (!(E >= krein_safe_shift(theta_a, a, b)))
    throw PreconditionError("sqrt_kernel: E is below the safe shift for theta_a");
  const bool dirichlet = theta_a.is_dirichlet();
  const cplx c = dirichlet ? cplx(0.0) : theta_a.cot_theta();
  const QuadratureRule rule = power_weight_rule(quad, -0.5);

  const int nn = mesh.n_nodes();
  std::vector<double> lo(static_cast<std::size_t>(nn)), hi(static_cast<std::size_t>(nn));
  for (int j = 0; j < nn; ++j) {
    lo[j] = j == 0 ? a : 0.5 * (mesh.nodes[j - 1] + mesh.nodes[j]);
    hi[j] = j == nn - 1 ? b : 0.5 * (mesh.nodes[j] + mesh.nodes[j + 1]);
  }

  PairwiseSum<MatC> sum;
  for (std::size_t q = 0; q < rule.t.size(); ++q) {
    const double s = E * (rule.t[q] + 1.0);
    const double k = std::sqrt(s);
    cplx inv_d = 0.0;
    if (!dirichlet) {
      const cplx d = detail::d_neg(k, c, L);
      if (d_vanishes(d, -s, theta_a)) throw AdmissibilityError("sqrt_kernel: d(-(t+E)) = 0");
      inv_d = 1.0 / d;
    }
    std::vector<double> u(static_cast<std::size_t>(nn)), ubar(static_cast<std::size_t>(nn));
    for (int i = 0; i < nn; ++i) {
      u[i] = detail::u2_neg(k, mesh.nodes[i], a, b);
      ubar[i] = detail::avg_u2_neg(k, lo[i], hi[i], a, b);
    }
    MatC F(nn, nn);
    for (int j = 0; j < nn; ++j)
      for (int i = 0; i < nn; ++i)
        F(i, j) = detail::avg_green_dirichlet_neg(k, mesh.nodes[i], lo[j], hi[j], a, b) - u[i] * ubar[j] * inv_d;
    sum.add(MatC(rule.w[q] * F));
  }

  KernelTable tab;
  tab.kind = KernelKind::sqrt_kernel;
  tab.x = tab.xp = mesh.nodes;
  tab.E = E;
  tab.z = -E;
  tab.theta_a = theta_a;
  tab.theta_b = BoundaryCondition::dirichlet();
  tab.values = sum.result(MatC::Zero(nn, nn)) * (std::sqrt(E) / pi);
  return tab;
}

/// The dof block (nodes 0..n-1, node b excluded) of a dual-cell-averaged kernel
/// as an operator in orthonormal coordinates: sqrt(m_i) K_ij sqrt(m_j).
inline MatC kernel_to_orthonormal(const KernelTable& tab, const Mesh& mesh) {
  const auto m = detail::dual_lengths(mesh);
  const Eigen::Index n = mesh.n_cells();
  MatC out(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i)
      out(i, j) = std::sqrt(m[static_cast<std::size_t>(i)]) * tab.values(i, j) * std::sqrt(m[static_cast<std::size_t>(j)]);
  return out;
}

// ---------------------------------------------------------------------------
// Modified Bessel function K0 and the correction bound

/// K0(z) = int_0^inf exp(-z cosh u) du, z > 0, on composite Gauss-Legendre panels.
inline double bessel_k0(double z, int nodes_per_panel = 20) {
  if (!(z > 0.0) || !std::isfinite(z)) throw PreconditionError("bessel_k0: argument must be positive");
  std::vector<double> gx, gw;
  gauss_legendre(nodes_per_panel, gx, gw);
  // K0(z) = e^{-z} int exp(-z (cosh u - 1)) du, truncated where the exponent reaches 745.
  const double U = std::acosh(1.0 + 745.0 / z);
  const int panels = std::max(8, static_cast<int>(std::ceil(U / 0.25)));
  const double width = U / panels;
  PairwiseSum<double> acc;
  for (int p = 0; p < panels; ++p) {
    const double lo = p * width;
    for (std::size_t i = 0; i < gx.size(); ++i) {
      const double u = lo + 0.5 * width * (gx[i] + 1.0);
      // cosh u - 1 = 2 sinh^2(u/2)
      const double sh = std::sinh(0.5 * u);
      acc.add(0.5 * width * gw[i] * std::exp(-2.0 * z * sh * sh));
    }
  }
  return std::exp(-z) * acc.result(0.0);
}

/// Power series, for 0 < z <= 2.
inline double bessel_k0_series(double z) {
  if (!(z > 0.0 && z <= 2.0)) throw PreconditionError("bessel_k0_series: needs 0 < z <= 2");
  const double y = 0.25 * z * z;
  const double lg = std::log(0.5 * z) + std::numbers::egamma;
  double term = 1.0, harmonic = 0.0, i0 = 1.0, rest = 0.0;
  for (int k = 1; k < 60; ++k) {
    term *= y / (static_cast<double>(k) * k);
    harmonic += 1.0 / k;
    i0 += term;
    rest += term * harmonic;
    if (term < 1e-18 * i0) break;
  }
  return -lg * i0 + rest;
}

/// Asymptotic expansion, truncated at the smallest term; for z >= 20.
inline double bessel_k0_asymptotic(double z) {
  if (!(z >= 20.0)) throw PreconditionError("bessel_k0_asymptotic: needs z >= 20");
  double term = 1.0, sum = 1.0;
  for (int k = 1; k < 100; ++k) {
    const double next = -term * (2.0 * k - 1) * (2.0 * k - 1) / (8.0 * k * z);
    if (std::abs(next) >= std::abs(term)) break;
    term = next;
    sum += term;
    if (std::abs(term) < 1e-17 * std::abs(sum)) break;
  }
  return std::sqrt(pi / (2.0 * z)) * std::exp(-z) * sum;
}

struct BesselBound {
  double lhs = 0.0;
  double rhs = 0.0;
  double slack = 0.0;
  double C = 0.0;
  std::array<double, 4> distances{};  // arguments y_m, K0 is taken at sqrt(E) y_m
};

namespace detail {
/// |T(t)| sqrt(t) / sum_m exp(-sqrt(t) y_m); the common exponential cancels analytically.
inline double t_bound_ratio(double t, double x, double xp, cplx cot_a, double a, double b) {
  const double k = std::sqrt(t);
  const double L = b - a;
  const double den = -std::expm1(-2.0 * k * L);
  return std::tanh(k * (b - x)) * std::tanh(k * (b - xp)) / (den * den) * k / std::abs(d_neg(k, cot_a, L));
}
}  // namespace detail

/// |int_0^inf t^{-1/2} T(t+E, x, x') dt| against 2C sum_m K0(sqrt(E) y_m), where C
/// is the largest ratio |T(t)| sqrt(t) / sum_m exp(-sqrt(t) y_m) over t >= E
/// (a dense log grid up to 1e10 E, plus the t -> inf limit 1).
inline BesselBound bessel_bound_check(double E, double x, double xp, const BoundaryCondition& theta_a, double a,
                                      double b, const QuadratureSpec& quad = {}) {
  if (theta_a.is_dirichlet()) throw PreconditionError("bessel_bound_check: theta_a must not be Dirichlet");
  detail::require_inside(x, a, b, "bessel_bound_check");
  detail::require_inside(xp, a, b, "bessel_bound_check");
  if (!(E >= krein_safe_shift(theta_a, a, b))) throw PreconditionError("bessel_bound_check: E below the safe shift");
  BesselBound out;
  out.distances = {x + xp - 2 * a, 2 * b + x - xp - 2 * a, 2 * b + xp - x - 2 * a, 4 * b - x - xp - 2 * a};
  for (double y : out.distances)
    if (!(y > 0.0)) throw PreconditionError("bessel_bound_check: K0 argument must be positive");
  const cplx c = theta_a.cot_theta();
  const double L = b - a;

  const QuadratureRule rule = power_weight_rule(quad, -0.5);
  PairwiseSum<cplx> acc;
  for (std::size_t q = 0; q < rule.t.size(); ++q) {
    const double k = std::sqrt(E * (rule.t[q] + 1.0));
    const cplx d = detail::d_neg(k, c, L);
    if (d_vanishes(d, -k * k, theta_a)) throw AdmissibilityError("bessel_bound_check: d vanishes");
    acc.add(rule.w[q] * detail::u2_neg(k, x, a, b) * detail::u2_neg(k, xp, a, b) / d);
  }
  out.lhs = std::abs(acc.result(0.0)) * std::sqrt(E);

  out.C = 1.0;
  for (double t : log_grid(E, 1e10 * E, 64)) out.C = std::max(out.C, detail::t_bound_ratio(t, x, xp, c, a, b));
  double ksum = 0.0;
  for (double y : out.distances) ksum += bessel_k0(std::sqrt(E) * y);
  out.rhs = 2.0 * out.C * ksum;
  out.slack = out.rhs - out.lhs;
  return out;
}

}  // namespace slkato
