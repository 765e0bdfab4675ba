#pragma once

// Piecewise-linear finite-element discretization of
//   L = -(p f')' + r f' - (s f)' + q
// through its sesquilinear form
//   q(g, f) = int conj(g') p f' + conj(g) r f' + conj(g') s f + conj(g) q f
//             - cot(theta_a) conj(g(a)) f(a) - cot(theta_b) conj(g(b)) f(b).
// Coefficients are sampled once per cell at the midpoint. The potential term
// uses lumped (nodal) quadrature so that q == c gives K3 == c * M_lumped.

#include "slkato/common.hpp"

#include <cstring>
#include <functional>
#include <optional>
#include <string>
#include <utility>

namespace slkato {

enum class IntervalKind { finite, half_line, full_line };

inline const char* to_string(IntervalKind k) {
  switch (k) {
    case IntervalKind::finite: return "finite";
    case IntervalKind::half_line: return "half_line";
    case IntervalKind::full_line: return "full_line";
  }
  return "?";
}

/// Finite interval (a, b), or a truncation [a, a+X] of (a, inf), or [-X, X] of the line.
struct IntervalSpec {
  IntervalKind kind = IntervalKind::finite;
  double a = 0.0;
  double b = 1.0;
  double truncation = 20.0;

  static IntervalSpec finite(double a, double b) { return {IntervalKind::finite, a, b, 0.0}; }
  static IntervalSpec half_line(double a, double radius = 20.0) {
    return {IntervalKind::half_line, a, a + radius, radius};
  }
  static IntervalSpec full_line(double radius = 20.0) {
    return {IntervalKind::full_line, -radius, radius, radius};
  }

  double left() const {
    return kind == IntervalKind::full_line ? -truncation : a;
  }
  double right() const {
    switch (kind) {
      case IntervalKind::finite: return b;
      case IntervalKind::half_line: return a + truncation;
      case IntervalKind::full_line: return truncation;
    }
    return b;
  }
  double length() const { return right() - left(); }

  void validate() const {
    if (kind == IntervalKind::finite) {
      if (!(a < b) || !std::isfinite(a) || !std::isfinite(b))
        throw PreconditionError("finite interval needs a < b");
    } else if (!(truncation > 0.0) || !std::isfinite(truncation)) {
      throw PreconditionError("truncation radius X must be positive");
    }
  }
};

struct Mesh {
  std::vector<double> nodes;
  bool uniform = true;
  double h = 0.0;
  IntervalSpec interval;

  int n_cells() const { return static_cast<int>(nodes.size()) - 1; }
  int n_nodes() const { return static_cast<int>(nodes.size()); }
  double left() const { return nodes.front(); }
  double right() const { return nodes.back(); }
  double midpoint(int cell) const { return 0.5 * (nodes[cell] + nodes[cell + 1]); }
  double width(int cell) const { return nodes[cell + 1] - nodes[cell]; }
};

inline Mesh build_mesh(const IntervalSpec& interval, int n) {
  if (n < 2) throw PreconditionError("build_mesh: need n >= 2 cells");
  interval.validate();
  Mesh m;
  m.interval = interval;
  const double lo = interval.left();
  const double hi = interval.right();
  m.h = (hi - lo) / n;
  m.nodes.resize(static_cast<std::size_t>(n) + 1);
  for (int i = 0; i <= n; ++i) m.nodes[static_cast<std::size_t>(i)] = lo + i * m.h;
  m.nodes.back() = hi;
  return m;
}

/// Coefficient as a function of position and local cell width (the width lets
/// singular families truncate at grid scale).
using CoefficientFn = std::function<cplx(double x, double h)>;

struct CoefficientFunctions {
  std::string name = "custom";
  CoefficientFn p = [](double, double) { return cplx(1.0); };
  CoefficientFn q = [](double, double) { return cplx(0.0); };
  CoefficientFn r = [](double, double) { return cplx(0.0); };
  CoefficientFn s = [](double, double) { return cplx(0.0); };
};

inline CoefficientFn constant_fn(cplx c) {
  return [c](double, double) { return c; };
}

/// Coefficients of the formal adjoint: (p, q, r, s) -> (conj p, conj q, conj s, conj r).
inline CoefficientFunctions adjoint_coefficients(const CoefficientFunctions& c) {
  CoefficientFunctions out;
  out.name = c.name + "*";
  auto cj = [](CoefficientFn f) -> CoefficientFn {
    return [f = std::move(f)](double x, double h) { return std::conj(f(x, h)); };
  };
  out.p = cj(c.p);
  out.q = cj(c.q);
  out.r = cj(c.s);
  out.s = cj(c.r);
  return out;
}

/// Drop some terms: keep p always, keep q/r/s according to the flags.
inline CoefficientFunctions restrict_coefficients(const CoefficientFunctions& c, bool keep_q, bool keep_r,
                                                  bool keep_s) {
  CoefficientFunctions out = c;
  if (!keep_q) out.q = constant_fn(0.0);
  if (!keep_r) out.r = constant_fn(0.0);
  if (!keep_s) out.s = constant_fn(0.0);
  return out;
}

/// Per-cell midpoint samples plus the ellipticity constants lambda <= Re p, |p| <= Lambda.
struct CoefficientSet {
  std::vector<cplx> p, q, r, s;
  double lambda = 0.0;
  double Lambda = 0.0;

  int n_cells() const { return static_cast<int>(p.size()); }

  void validate() const {
    const std::size_t n = p.size();
    if (q.size() != n || r.size() != n || s.size() != n)
      throw PreconditionError("coefficient samples must all have one value per cell");
    if (!(lambda > 0.0)) throw PreconditionError("coefficients violate Re(p) > lambda > 0");
    for (const cplx& v : p) {
      if (v.real() < lambda || std::abs(v) > Lambda * (1.0 + 1e-14))
        throw PreconditionError("coefficient p outside lambda <= Re(p), |p| <= Lambda");
    }
  }

  std::uint64_t hash() const {
    // FNV-1a over the raw sample bytes.
    std::uint64_t hsh = 1469598103934665603ull;
    auto mix = [&hsh](const std::vector<cplx>& v) {
      for (const cplx& z : v) {
        double parts[2] = {z.real(), z.imag()};
        unsigned char bytes[sizeof(parts)];
        std::memcpy(bytes, parts, sizeof(parts));
        for (unsigned char byte : bytes) {
          hsh ^= byte;
          hsh *= 1099511628211ull;
        }
      }
    };
    mix(p);
    mix(q);
    mix(r);
    mix(s);
    return hsh;
  }
};

inline CoefficientSet sample_coefficients(const Mesh& mesh, const CoefficientFunctions& f) {
  CoefficientSet c;
  const int n = mesh.n_cells();
  c.p.resize(n);
  c.q.resize(n);
  c.r.resize(n);
  c.s.resize(n);
  c.lambda = std::numeric_limits<double>::infinity();
  c.Lambda = 0.0;
  for (int k = 0; k < n; ++k) {
    const double x = mesh.midpoint(k);
    const double hk = mesh.width(k);
    c.p[k] = f.p(x, hk);
    c.q[k] = f.q(x, hk);
    c.r[k] = f.r(x, hk);
    c.s[k] = f.s(x, hk);
    c.lambda = std::min(c.lambda, c.p[k].real());
    c.Lambda = std::max(c.Lambda, std::abs(c.p[k]));
  }
  return c;
}

/// Separated boundary condition cos(theta) g + sin(theta) g' = 0 (sign of g'
/// flipped at the right endpoint). theta = 0 is Dirichlet, pi/2 Neumann.
struct BoundaryCondition {
  cplx theta = 0.0;

  static BoundaryCondition dirichlet() { return {0.0}; }
  static BoundaryCondition neumann() { return {pi / 2}; }
  static BoundaryCondition robin(cplx theta) { return {theta}; }

  bool is_dirichlet() const { return theta == cplx(0.0); }
  bool is_neumann() const { return theta == cplx(pi / 2); }

  void validate() const {
    if (!(theta.real() >= 0.0 && theta.real() < pi) || !std::isfinite(theta.imag()))
      throw PreconditionError("boundary parameter theta must satisfy 0 <= Re(theta) < pi");
  }

  /// cot(theta); Dirichlet has no Robin coefficient and must be handled by DOF removal.
  cplx cot_theta() const {
    if (is_dirichlet()) throw PreconditionError("cot(theta) requested for a Dirichlet condition");
    if (is_neumann()) return 0.0;
    return cot(theta);
  }

  BoundaryCondition conjugate() const { return {std::conj(theta)}; }
};

/// Degrees of freedom: mesh nodes not removed by a Dirichlet condition.
struct DofMap {
  std::vector<int> nodes;      // dof -> node
  std::vector<int> node_to_dof;  // node -> dof or -1

  int size() const { return static_cast<int>(nodes.size()); }
};

inline DofMap make_dof_map(const Mesh& mesh, const BoundaryCondition& left, const BoundaryCondition& right) {
  DofMap d;
  const int nn = mesh.n_nodes();
  d.node_to_dof.assign(static_cast<std::size_t>(nn), -1);
  for (int i = 0; i < nn; ++i) {
    if (i == 0 && left.is_dirichlet()) continue;
    if (i == nn - 1 && right.is_dirichlet()) continue;
    d.node_to_dof[static_cast<std::size_t>(i)] = static_cast<int>(d.nodes.size());
    d.nodes.push_back(i);
  }
  return d;
}

struct FormMatrices {
  Mesh mesh;
  BoundaryCondition left, right;
  DofMap dofs;
  std::uint64_t coefficient_hash = 0;

  VecR mass_lumped;      // diagonal of the row-sum mass
  MatR mass_consistent;  // exact P1 Gram matrix
  MatC K0;               // p-stiffness
  MatC K1;               // r-convection
  MatC K2;               // s-convection
  MatC K3;               // q-potential (lumped)
  MatC Bdry;             // -cot(theta) terms at boundary dofs

  int n_dof() const { return dofs.size(); }
  MatC total() const { return K0 + K1 + K2 + K3 + Bdry; }
  MatR mass_matrix(bool lumped = true) const {
    return lumped ? MatR(mass_lumped.asDiagonal()) : mass_consistent;
  }
};

/// Lumped nodal weights w_i = sum over cells touching i of q_k h_k / 2 (restricted to dofs).
inline VecC lumped_potential_weights(const Mesh& mesh, const CoefficientSet& c, const DofMap& dofs) {
  VecC w = VecC::Zero(dofs.size());
  for (int k = 0; k < mesh.n_cells(); ++k) {
    const double half = 0.5 * mesh.width(k);
    for (int node : {k, k + 1}) {
      const int d = dofs.node_to_dof[static_cast<std::size_t>(node)];
      if (d >= 0) w(d) += c.q[static_cast<std::size_t>(k)] * half;
    }
  }
  return w;
}

/// Cell-level derivative and midpoint-average maps from dof values to the
/// orthonormal cell space (each row scaled by sqrt(h_k)), so that
///   |derivative * f|^2 = int |f'|^2 and
///   average^T diag(c) derivative reproduces int conj(g) c f' with midpoint sampling.
struct CellOperators {
  MatR derivative;
  MatR average;
};

inline CellOperators cell_operators(const Mesh& mesh, const DofMap& dofs) {
  const int nc = mesh.n_cells();
  CellOperators ops{MatR::Zero(nc, dofs.size()), MatR::Zero(nc, dofs.size())};
  for (int k = 0; k < nc; ++k) {
    const double hk = mesh.width(k);
    const double root = std::sqrt(hk);
    const int dl = dofs.node_to_dof[static_cast<std::size_t>(k)];
    const int dr = dofs.node_to_dof[static_cast<std::size_t>(k + 1)];
    if (dl >= 0) {
      ops.derivative(k, dl) = -root / hk;
      ops.average(k, dl) = 0.5 * root;
    }
    if (dr >= 0) {
      ops.derivative(k, dr) = root / hk;
      ops.average(k, dr) = 0.5 * root;
    }
  }
  return ops;
}

inline FormMatrices assemble_forms(const Mesh& mesh, const CoefficientSet& c, const BoundaryCondition& left,
                                   const BoundaryCondition& right) {
  left.validate();
  right.validate();
  if (c.n_cells() != mesh.n_cells())
    throw PreconditionError("assemble_forms: coefficient samples not aligned with mesh");

  FormMatrices f;
  f.mesh = mesh;
  f.left = left;
  f.right = right;
  f.dofs = make_dof_map(mesh, left, right);
  f.coefficient_hash = c.hash();
  const int nd = f.dofs.size();
  if (nd == 0) throw PreconditionError("assemble_forms: no degrees of freedom left");

  f.mass_lumped = VecR::Zero(nd);
  f.mass_consistent = MatR::Zero(nd, nd);
  f.K0 = MatC::Zero(nd, nd);
  f.K1 = MatC::Zero(nd, nd);
  f.K2 = MatC::Zero(nd, nd);
  f.K3 = MatC::Zero(nd, nd);
  f.Bdry = MatC::Zero(nd, nd);

  for (int k = 0; k < mesh.n_cells(); ++k) {
    const double hk = mesh.width(k);
    const int dof[2] = {f.dofs.node_to_dof[static_cast<std::size_t>(k)],
                        f.dofs.node_to_dof[static_cast<std::size_t>(k + 1)]};
    const double grad[2] = {-1.0 / hk, 1.0 / hk};
    const auto kk = static_cast<std::size_t>(k);
    for (int i = 0; i < 2; ++i) {
      if (dof[i] < 0) continue;
      f.mass_lumped(dof[i]) += 0.5 * hk;
      f.K3(dof[i], dof[i]) += c.q[kk] * (0.5 * hk);
      for (int j = 0; j < 2; ++j) {
        if (dof[j] < 0) continue;
        // int phi_i' p phi_j'
        f.K0(dof[i], dof[j]) += c.p[kk] * (grad[i] * grad[j] * hk);
        // int phi_i r phi_j'  (phi_i(mid) = 1/2)
        f.K1(dof[i], dof[j]) += c.r[kk] * (0.5 * grad[j] * hk);
        // int phi_i' s phi_j
        f.K2(dof[i], dof[j]) += c.s[kk] * (grad[i] * 0.5 * hk);
        f.mass_consistent(dof[i], dof[j]) += (i == j ? 2.0 : 1.0) * hk / 6.0;
      }
    }
  }

  const int first = f.dofs.node_to_dof.front();
  const int last = f.dofs.node_to_dof.back();
  if (!left.is_dirichlet()) f.Bdry(first, first) += -left.cot_theta();
  if (!right.is_dirichlet()) f.Bdry(last, last) += -right.cot_theta();
  return f;
}

enum class MassTreatment { lumped, consistent };

inline const char* to_string(MassTreatment m) { return m == MassTreatment::lumped ? "lumped" : "consistent"; }

struct OperatorMeta {
  IntervalSpec interval;
  BoundaryCondition left, right;
  std::uint64_t coefficient_hash = 0;
  MassTreatment mass = MassTreatment::lumped;
  int n_cells = 0;
};

/// Operator matrix in L2-orthonormal coordinates, H = M^{-1/2} S M^{-1/2}.
struct DiscreteOperator {
  MatC H;
  OperatorMeta meta;
  Mesh mesh;
  DofMap dofs;
  MatR mass_inv_sqrt;  // M^{-1/2}
  MatR mass_sqrt;      // M^{1/2}
  VecR mass_lumped;

  int size() const { return static_cast<int>(H.rows()); }

  /// Nodal (dof) vector -> orthonormal coordinates.
  VecC to_orthonormal(const VecC& nodal) const { return mass_sqrt * nodal; }
  VecC to_nodal(const VecC& ortho) const { return mass_inv_sqrt * ortho; }
  /// Congruence transform of a nodal bilinear-form matrix.
  MatC congruence(const MatC& form) const {
    if (meta.mass == MassTreatment::lumped) return scale_symmetric(form);
    return mass_inv_sqrt * form * mass_inv_sqrt;
  }

 private:
  MatC scale_symmetric(const MatC& form) const {
    MatC out(form.rows(), form.cols());
    for (Eigen::Index j = 0; j < form.cols(); ++j)
      for (Eigen::Index i = 0; i < form.rows(); ++i)
        out(i, j) = form(i, j) * (mass_inv_sqrt(i, i) * mass_inv_sqrt(j, j));
    return out;
  }
};

inline DiscreteOperator orthonormalize(const FormMatrices& forms, MassTreatment treatment = MassTreatment::lumped) {
  DiscreteOperator op;
  op.meta = {forms.mesh.interval, forms.left, forms.right, forms.coefficient_hash, treatment, forms.mesh.n_cells()};
  op.mesh = forms.mesh;
  op.dofs = forms.dofs;
  op.mass_lumped = forms.mass_lumped;
  if (treatment == MassTreatment::lumped) {
    if ((forms.mass_lumped.array() <= 0.0).any()) throw PreconditionError("lumped mass not positive");
    op.mass_inv_sqrt = forms.mass_lumped.array().rsqrt().matrix().asDiagonal();
    op.mass_sqrt = forms.mass_lumped.array().sqrt().matrix().asDiagonal();
  } else {
    Eigen::SelfAdjointEigenSolver<MatR> es(forms.mass_consistent);
    if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 0.0)
      throw PreconditionError("consistent mass matrix is not positive definite");
    const VecR ev = es.eigenvalues();
    op.mass_inv_sqrt = es.eigenvectors() * ev.array().rsqrt().matrix().asDiagonal() * es.eigenvectors().transpose();
    op.mass_sqrt = es.eigenvectors() * ev.array().sqrt().matrix().asDiagonal() * es.eigenvectors().transpose();
  }
  op.H = op.congruence(forms.total());
  return op;
}

/// Convenience: functions -> samples -> forms -> operator.
inline DiscreteOperator assemble_operator(const Mesh& mesh, const CoefficientFunctions& f, const BoundaryCondition& left,
                                          const BoundaryCondition& right,
                                          MassTreatment treatment = MassTreatment::lumped) {
  return orthonormalize(assemble_forms(mesh, sample_coefficients(mesh, f), left, right), treatment);
}

/// Stiffness matrix of p == 1 on the dofs, using the same arithmetic as assemble_forms.
inline MatR unit_stiffness(const Mesh& mesh, const DofMap& dofs) {
  MatR k0 = MatR::Zero(dofs.size(), dofs.size());
  for (int k = 0; k < mesh.n_cells(); ++k) {
    const double hk = mesh.width(k);
    const int dof[2] = {dofs.node_to_dof[static_cast<std::size_t>(k)],
                        dofs.node_to_dof[static_cast<std::size_t>(k + 1)]};
    const double grad[2] = {-1.0 / hk, 1.0 / hk};
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        if (dof[i] >= 0 && dof[j] >= 0) k0(dof[i], dof[j]) += grad[i] * grad[j] * hk;
  }
  return k0;
}

/// E-scaled discrete W^{1,2} Gram matrix in nodal (dof) coordinates:
/// f^* G f = |f'|^2 + E |f|^2.
inline MatR w12_norm_matrix(const Mesh& mesh, const BoundaryCondition& left, const BoundaryCondition& right,
                            double E, MassTreatment mass = MassTreatment::lumped) {
  if (!(E > 0.0)) throw PreconditionError("w12_norm_matrix: E must be positive");
  const DofMap dofs = make_dof_map(mesh, left, right);
  MatR g = unit_stiffness(mesh, dofs);
  if (mass == MassTreatment::consistent) {
    const CoefficientSet ones = sample_coefficients(mesh, CoefficientFunctions{});
    g += E * assemble_forms(mesh, ones, left, right).mass_consistent;
  } else {
    for (int k = 0; k < mesh.n_cells(); ++k) {
      for (int node : {k, k + 1}) {
        const int d = dofs.node_to_dof[static_cast<std::size_t>(node)];
        if (d >= 0) g(d, d) += E * 0.5 * mesh.width(k);
      }
    }
  }
  return g;
}

/// The same Gram matrix in the orthonormal coordinates of `op`: H_ref + E I,
/// H_ref the p == 1 operator with the same boundary dofs and no Robin terms.
inline MatC w12_norm_orthonormal(const DiscreteOperator& op, double E) {
  if (!(E > 0.0)) throw PreconditionError("w12_norm_orthonormal: E must be positive");
  MatC g = op.congruence(unit_stiffness(op.mesh, op.dofs).cast<cplx>());
  g.diagonal().array() += E;
  return g;
}

}  // namespace slkato
