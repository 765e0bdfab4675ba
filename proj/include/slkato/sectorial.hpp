#pragma once

// Numerical-range and resolvent diagnostics: accretivity, sector fits,
// positive-type constants and sector resolvent bounds.
//
// The numerical range is approximated from inside: seeded random unit vectors
// plus the support-function sweep (extreme eigenvectors of the Hermitian part
// of e^{i phi} H over a phi grid).

#include "slkato/matfun.hpp"

#include <map>

namespace slkato {

struct SectorReport {
  double gamma = 0.0;  // vertex
  double theta = 0.0;  // semi-angle, pi/2 means "no sector with theta < pi/2"
  double M_A = 0.0;    // positive-type constant (filled by sector_diagnostics)
  std::map<double, double> M_angle;
  bool accretive = false;  // numerical range in the closed right half-plane
  bool sectorial = false;  // theta < pi/2
  double min_re = 0.0, max_re = 0.0, max_abs_im = 0.0;

  std::vector<cplx> samples;           // all numerical-range points used
  std::vector<std::pair<double, cplx>> boundary;  // (phi, support point)
};

struct SectorFit {
  double gamma = 0.0;
  double theta = 0.0;
};

/// Sector S_{gamma,theta} containing every point, with the vertex fixed by the caller.
inline SectorFit fit_sector(const std::vector<cplx>& points, double vertex) {
  SectorFit fit{vertex, 0.0};
  for (const cplx& w : points) {
    const cplx d = w - vertex;
    if (d == cplx(0.0)) continue;
    if (d.real() <= 0.0 && d.imag() != 0.0) {
      fit.theta = pi / 2;
      continue;
    }
    fit.theta = std::max(fit.theta, std::abs(principal_arg(d)));
  }
  fit.theta = std::min(fit.theta, pi / 2);
  return fit;
}

/// Default vertex rule: gamma = min Re - (max Re - min Re). Real point sets
/// (imaginary parts at roundoff level) get gamma = min Re, theta = 0; a
/// vertical segment gets theta = pi/2.
inline SectorFit fit_sector(const std::vector<cplx>& points) {
  if (points.empty()) return {};
  double lo = std::numeric_limits<double>::infinity(), hi = -lo, scale = 1.0, im = 0.0;
  for (const cplx& w : points) {
    lo = std::min(lo, w.real());
    hi = std::max(hi, w.real());
    scale = std::max(scale, std::abs(w));
    im = std::max(im, std::abs(w.imag()));
  }
  if (im <= 1e-13 * scale) return {lo, 0.0};
  const double spread = hi - lo;
  if (spread == 0.0) return {lo, pi / 2};
  return fit_sector(points, lo - spread);
}

struct RangeOptions {
  int n_samples = 256;
  int n_angles = 64;
  std::uint64_t seed = 1;
};

inline std::vector<cplx> rayleigh_samples(const MatC& H, int n_samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<cplx> out;
  out.reserve(static_cast<std::size_t>(n_samples));
  for (int k = 0; k < n_samples; ++k) {
    const VecC v = random_complex_gaussian(H.rows(), rng);
    out.push_back(v.dot(H * v) / v.squaredNorm());
  }
  return out;
}

inline SectorReport numerical_range_hull(const MatC& H, const RangeOptions& opt = {}) {
  if (opt.n_samples < 1) throw PreconditionError("numerical_range_hull: need at least one sample");
  if (H.rows() != H.cols() || H.rows() == 0) throw PreconditionError("numerical_range_hull: square matrix required");
  SectorReport rep;
  rep.samples = rayleigh_samples(H, opt.n_samples, opt.seed);
  for (int k = 0; k < opt.n_angles; ++k) {
    const double phi = 2.0 * pi * k / opt.n_angles;
    const MatC rot = std::polar(1.0, phi) * H;
    Eigen::SelfAdjointEigenSolver<MatC> es(hermitian_part(rot));
    // Largest eigenvector of Re(e^{i phi} H) maximizes Re(e^{i phi} w) over the range.
    const VecC v = es.eigenvectors().col(H.rows() - 1);
    const cplx w = v.dot(H * v) / v.squaredNorm();
    rep.boundary.emplace_back(phi, w);
    rep.samples.push_back(w);
  }
  // The minimum of Re over the range is exact from the Hermitian part.
  Eigen::SelfAdjointEigenSolver<MatC> re_part(hermitian_part(H));
  const VecC vmin = re_part.eigenvectors().col(0);
  rep.samples.push_back(vmin.dot(H * vmin) / vmin.squaredNorm());

  rep.min_re = re_part.eigenvalues()(0);
  rep.max_re = re_part.eigenvalues()(H.rows() - 1);
  for (const cplx& w : rep.samples) rep.max_abs_im = std::max(rep.max_abs_im, std::abs(w.imag()));
  const double scale = std::max({1.0, std::abs(rep.max_re), rep.max_abs_im});
  rep.accretive = rep.min_re >= -1e-12 * scale;

  const SectorFit fit = fit_sector(rep.samples);
  rep.gamma = fit.gamma;
  rep.theta = fit.theta;
  rep.sectorial = fit.theta < pi / 2;
  return rep;
}

// ---------------------------------------------------------------------------
// Norm estimates

struct PowerOptions {
  int iterations = 50;
  double tolerance = 1e-10;
  std::uint64_t seed = 12345;
};

/// ||A^{-1}||_2 by power iteration on (A A^*)^{-1} with LU solves.
inline double inverse_norm_power(const MatC& a, const PowerOptions& opt = {}) {
  auto lu = checked_lu<cplx>(a, "inverse_norm_power");
  Eigen::PartialPivLU<MatC> lu_adj(a.adjoint());
  std::mt19937_64 rng(opt.seed);
  VecC v = random_complex_gaussian(a.rows(), rng);
  v.normalize();
  double est = 0.0;
  for (int it = 0; it < opt.iterations; ++it) {
    // w = A^{-1} A^{-*} v, so v^* w = ||A^{-*} v||^2.
    const VecC u = lu_adj.solve(v);
    const VecC w = lu.solve(u);
    const double next = std::sqrt(u.squaredNorm());
    v = w / w.norm();
    if (std::abs(next - est) <= opt.tolerance * next) {
      est = next;
      break;
    }
    est = next;
  }
  return est;
}

struct AccretivityCheck {
  bool ok = true;
  double worst_ratio = 0.0;  // max ||(H + zeta)^{-1}|| Re(zeta)
  cplx worst_zeta = 0.0;
  std::vector<double> ratios;
};

/// ||(H + zeta)^{-1}|| <= 1 / Re(zeta) on the grid (Re(zeta) > 0 required).
inline AccretivityCheck check_m_accretive(const MatC& H, const std::vector<cplx>& zeta_grid,
                                          const PowerOptions& opt = {}) {
  AccretivityCheck out;
  for (const cplx& zeta : zeta_grid) {
    if (!(zeta.real() > 0.0)) throw PreconditionError("check_m_accretive: grid points need Re(zeta) > 0");
    MatC shifted = H;
    shifted.diagonal().array() += zeta;
    double ratio;
    try {
      ratio = inverse_norm_power(shifted, opt) * zeta.real();
    } catch (const SpectrumError&) {
      ratio = std::numeric_limits<double>::infinity();
    }
    out.ratios.push_back(ratio);
    if (ratio > out.worst_ratio || out.ratios.size() == 1) {
      out.worst_ratio = ratio;
      out.worst_zeta = zeta;
    }
  }
  out.ok = out.worst_ratio <= 1.0 + 1e-9;
  return out;
}

struct SectorDiagnostics {
  double M_A = 0.0;
  std::vector<std::pair<double, double>> positive_type_profile;  // (t, (1+t)||(H+t)^{-1}||)
  double M_angle = 0.0;
  double omega_prime = 0.0;
  double theta = 0.0;     // semi-angle of the range about vertex 0
  bool blow_up = false;   // omega' does not exceed theta, or the resolvent blew up
};

/// z samples outside the closed omega'-sector: radii x angles in (omega', pi].
inline std::vector<cplx> sector_complement_samples(double omega_prime, const std::vector<double>& radii,
                                                   int n_angles = 8) {
  std::vector<cplx> z;
  for (double r : radii)
    for (int k = 1; k <= n_angles; ++k) {
      const double phi = omega_prime + (pi - omega_prime) * k / n_angles;
      z.push_back(std::polar(r, phi));
      if (k < n_angles) z.push_back(std::polar(r, -phi));
    }
  return z;
}

inline SectorDiagnostics sector_diagnostics(const MatC& H, const std::vector<double>& t_grid, double omega_prime,
                                            const std::vector<cplx>& z_samples, const PowerOptions& opt = {}) {
  require_off_cut(eigenvalues<cplx>(H), "sector_diagnostics");
  if (!(omega_prime > 0.0 && omega_prime < pi)) throw PreconditionError("sector_diagnostics: omega' must lie in (0, pi)");
  SectorDiagnostics out;
  out.omega_prime = omega_prime;
  for (double t : t_grid) {
    if (t < 0.0) throw PreconditionError("sector_diagnostics: t grid must be nonnegative");
    MatC shifted = H;
    shifted.diagonal().array() += t;
    const double ratio = (1.0 + t) * inverse_norm_power(shifted, opt);
    out.positive_type_profile.emplace_back(t, ratio);
    out.M_A = std::max(out.M_A, ratio);
  }
  RangeOptions ro;
  ro.seed = opt.seed;
  const SectorReport rep = numerical_range_hull(H, ro);
  out.theta = fit_sector(rep.samples, 0.0).theta;
  if (omega_prime <= out.theta) out.blow_up = true;
  for (const cplx& z : z_samples) {
    if (std::abs(principal_arg(z)) <= omega_prime) continue;
    MatC shifted = H;
    shifted.diagonal().array() -= z;
    try {
      out.M_angle = std::max(out.M_angle, std::abs(z) * inverse_norm_power(shifted, opt));
    } catch (const SpectrumError&) {
      out.M_angle = std::numeric_limits<double>::infinity();
      out.blow_up = true;
    }
  }
  return out;
}

}  // namespace slkato
