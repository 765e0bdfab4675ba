#pragma once

// Explicit relative form-bound constants and their numerical verification:
//   |q_j(f,f)| <= eps Re q_0(f,f) + M eps^{-3} |f|^2,  0 < eps < eps_0,
// with C_0 = sqrt(2) max{1, C_r, C_s, sqrt(2) C_q^2}, eps_qrs = min{sqrt(C_r), sqrt(C_s), C_q},
// M = 128 C_0^2 (1/lambda + 1/lambda^3), eps_0 = min{1, 4 eps_qrs / lambda}.

#include "slkato/mesh.hpp"

#include <functional>

namespace slkato {

struct FormBoundConstants {
  double C_q = 0.0, C_r = 0.0, C_s = 0.0;
  double C_0 = 0.0;
  double eps_qrs = 0.0;
  double M = 0.0;
  double eps_0 = 0.0;
  double lambda = 1.0;
  bool whole_domain = false;  // window covered the whole (truncated) domain
};

/// Derived constants from the three loc-unif norms. Zero norms do not
/// constrain eps_qrs (a vanishing coefficient has no form to bound).
inline FormBoundConstants derive_constants(double C_q, double C_r, double C_s, double lambda) {
  if (!(lambda > 0.0)) throw PreconditionError("derive_constants: lambda must be positive");
  if (C_q < 0.0 || C_r < 0.0 || C_s < 0.0) throw PreconditionError("derive_constants: norms must be nonnegative");
  FormBoundConstants c;
  c.C_q = C_q;
  c.C_r = C_r;
  c.C_s = C_s;
  c.lambda = lambda;
  c.C_0 = std::sqrt(2.0) * std::max({1.0, C_r, C_s, std::sqrt(2.0) * C_q * C_q});
  c.eps_qrs = std::numeric_limits<double>::infinity();
  if (C_r > 0.0) c.eps_qrs = std::min(c.eps_qrs, std::sqrt(C_r));
  if (C_s > 0.0) c.eps_qrs = std::min(c.eps_qrs, std::sqrt(C_s));
  if (C_q > 0.0) c.eps_qrs = std::min(c.eps_qrs, C_q);
  c.M = 128.0 * c.C_0 * c.C_0 * (1.0 / lambda + 1.0 / (lambda * lambda * lambda));
  c.eps_0 = std::min(1.0, 4.0 / lambda * c.eps_qrs);
  return c;
}

/// Sliding unit-window suprema of int |q|, int |r|^2, int |s|^2 (per-cell
/// midpoint rule, windows starting at mesh nodes). Finite intervals, and
/// truncated domains shorter than one window, use whole-domain integrals.
inline FormBoundConstants locunif_norms(const CoefficientSet& c, const Mesh& mesh) {
  if (c.n_cells() != mesh.n_cells()) throw PreconditionError("locunif_norms: samples not aligned with mesh");
  const int nc = mesh.n_cells();
  const double length = mesh.right() - mesh.left();
  const bool whole = mesh.interval.kind == IntervalKind::finite || length <= 1.0;
  int window = nc;
  if (!whole) window = std::min(nc, std::max(1, static_cast<int>(std::lround(1.0 / mesh.h))));

  auto sup_window = [&](auto density) {
    std::vector<double> cell(static_cast<std::size_t>(nc));
    for (int k = 0; k < nc; ++k) cell[static_cast<std::size_t>(k)] = density(k) * mesh.width(k);
    double best = 0.0;
    for (int start = 0; start + window <= nc; ++start) {
      double acc = 0.0;
      for (int k = start; k < start + window; ++k) acc += cell[static_cast<std::size_t>(k)];
      best = std::max(best, acc);
    }
    return best;
  };
  const auto C_q = sup_window([&](int k) { return std::abs(c.q[static_cast<std::size_t>(k)]); });
  const auto C_r = sup_window([&](int k) { return std::norm(c.r[static_cast<std::size_t>(k)]); });
  const auto C_s = sup_window([&](int k) { return std::norm(c.s[static_cast<std::size_t>(k)]); });
  FormBoundConstants out = derive_constants(C_q, C_r, C_s, c.lambda);
  out.whole_domain = whole;
  return out;
}

struct FormBoundRow {
  double eps = 0.0;
  int j = 0;  // 1: r term, 2: s term, 3: q term
  double lhs = 0.0;
  double bound = 0.0;
  double slack = 0.0;
};

/// Both sides of the relative bound for one nodal (dof) vector. The L2 norm
/// is the exact norm of the piecewise-linear interpolant.
inline std::vector<FormBoundRow> check_form_bound(const VecC& f, const FormMatrices& forms,
                                                  const FormBoundConstants& k, double eps) {
  if (!(eps > 0.0 && eps < k.eps_0)) throw PreconditionError("check_form_bound: eps must lie in (0, eps_0)");
  if (f.size() != forms.n_dof()) throw PreconditionError("check_form_bound: vector size does not match dofs");
  const double re_q0 = f.dot(forms.K0 * f).real();
  const double norm_sq = f.dot(forms.mass_consistent.cast<cplx>() * f).real();
  const double bound = eps * re_q0 + k.M / (eps * eps * eps) * norm_sq;
  const MatC* parts[3] = {&forms.K1, &forms.K2, &forms.K3};
  std::vector<FormBoundRow> rows;
  for (int j = 0; j < 3; ++j) {
    const double lhs = std::abs(f.dot(*parts[j] * f));
    rows.push_back({eps, j + 1, lhs, bound, bound - lhs});
  }
  return rows;
}

struct TrudingerReport {
  double eps = 0.0;
  double pointwise_lhs = 0.0;    // max_i |f(x_i)|^2
  double pointwise_bound = 0.0;  // eps |f'|^2 + (1/(b-a) + 1/eps) |f|^2
  double pointwise_slack = 0.0;
  double weighted_lhs = 0.0;     // |w f|^2
  double weighted_bound = 0.0;   // N_w times the pointwise bound
  double weighted_slack = 0.0;
  double N_w = 0.0;
};

/// Finite-interval Trudinger bounds for the interpolant of nodal values f (all
/// mesh nodes) and a per-cell weight w. |w f|^2 and N_w = |w|^2 use the same
/// per-cell trapezoid weights.
inline TrudingerReport check_trudinger(const VecC& f, const std::vector<cplx>& w, const Mesh& mesh, double eps) {
  if (mesh.interval.kind != IntervalKind::finite) throw PreconditionError("check_trudinger: finite interval required");
  if (!(eps > 0.0)) throw PreconditionError("check_trudinger: eps must be positive");
  if (f.size() != mesh.n_nodes() || static_cast<int>(w.size()) != mesh.n_cells())
    throw PreconditionError("check_trudinger: f needs one value per node and w one per cell");
  double deriv = 0.0, l2 = 0.0, wf = 0.0, nw = 0.0, peak = 0.0;
  for (int k = 0; k < mesh.n_cells(); ++k) {
    const double hk = mesh.width(k);
    const cplx a = f(k), b = f(k + 1);
    deriv += std::norm(b - a) / hk;
    l2 += hk / 3.0 * (std::norm(a) + std::norm(b) + (std::conj(a) * b).real());
    const double w2 = std::norm(w[static_cast<std::size_t>(k)]);
    nw += w2 * hk;
    wf += w2 * hk * 0.5 * (std::norm(a) + std::norm(b));
  }
  for (Eigen::Index i = 0; i < f.size(); ++i) peak = std::max(peak, std::norm(f(i)));
  TrudingerReport r;
  r.eps = eps;
  r.pointwise_lhs = peak;
  r.pointwise_bound = eps * deriv + (1.0 / (mesh.right() - mesh.left()) + 1.0 / eps) * l2;
  r.pointwise_slack = r.pointwise_bound - r.pointwise_lhs;
  r.N_w = nw;
  r.weighted_lhs = wf;
  r.weighted_bound = nw * r.pointwise_bound;
  r.weighted_slack = r.weighted_bound - r.weighted_lhs;
  return r;
}

// ---------------------------------------------------------------------------
// Composition of infinitesimal bounds

/// eta(eps) sampled on a log grid; evaluation interpolates log eta linearly in log eps.
struct EtaTable {
  std::vector<double> eps;
  std::vector<double> eta;

  static EtaTable sample(const std::function<double(double)>& f, double lo, double hi, int per_decade = 32) {
    EtaTable t;
    t.eps = log_grid(lo, hi, per_decade);
    for (double e : t.eps) t.eta.push_back(f(e));
    return t;
  }

  bool covers(double e) const {
    return !eps.empty() && e >= eps.front() * (1 - 1e-12) && e <= eps.back() * (1 + 1e-12);
  }

  double operator()(double e) const {
    if (!covers(e)) throw PreconditionError("EtaTable: eps outside the tabulated range");
    auto it = std::lower_bound(eps.begin(), eps.end(), e);
    if (it == eps.end()) return eta.back();
    const auto i = static_cast<std::size_t>(it - eps.begin());
    if (i == 0 || *it == e) return eta[i];
    const double x0 = std::log(eps[i - 1]), x1 = std::log(eps[i]);
    const double s = (std::log(e) - x0) / (x1 - x0);
    if (eta[i - 1] > 0.0 && eta[i] > 0.0)
      return std::exp((1 - s) * std::log(eta[i - 1]) + s * std::log(eta[i]));
    return (1 - s) * eta[i - 1] + s * eta[i];
  }
};

struct ComposedBound {
  double eps0 = 0.0;
  EtaTable eta0;
};

/// eps0 = 2 min{1/2, eps1, eps2}, eta0(eps) = eta1(eps/2) + eta2(eps/2) on the
/// part of (0, eps0) where both tables are defined at eps/2.
inline ComposedBound compose_infinitesimal(double eps1, double eps2, const EtaTable& eta1, const EtaTable& eta2,
                                           int per_decade = 32) {
  if (!(eps1 > 0.0 && eps2 > 0.0)) throw PreconditionError("compose_infinitesimal: eps1, eps2 must be positive");
  ComposedBound out;
  out.eps0 = 2.0 * std::min({0.5, eps1, eps2});
  const double lo = 2.0 * std::max(eta1.eps.front(), eta2.eps.front());
  const double hi = std::min({out.eps0, 2.0 * eta1.eps.back(), 2.0 * eta2.eps.back()});
  if (!(hi > lo)) return out;
  for (double e : log_grid(lo, hi, per_decade)) {
    if (e >= out.eps0) break;
    out.eta0.eps.push_back(e);
    out.eta0.eta.push_back(eta1(e / 2) + eta2(e / 2));
  }
  return out;
}

}  // namespace slkato
