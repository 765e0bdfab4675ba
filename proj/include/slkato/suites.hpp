#pragma once

// Check batteries shared by the command-line tool and the acceptance runner.
// Every suite returns its numbers, a pass flag and the CSV tables it produced.

#include <chrono>
#include <string>
#include <utility>
#include <vector>

#include "slkato/domain.hpp"
#include "slkato/families.hpp"
#include "slkato/formbounds.hpp"
#include "slkato/io.hpp"
#include "slkato/kato.hpp"
#include "slkato/krein.hpp"
#include "slkato/matfun.hpp"
#include "slkato/sectorial.hpp"

namespace slkato {

struct SuiteResult {
  std::string check;
  bool passed = true;
  std::vector<std::pair<std::string, double>> numbers;
  std::vector<std::pair<std::string, std::string>> labels;
  std::vector<std::pair<std::string, CsvTable>> tables;  // file stem -> table
  std::vector<std::string> failures;
  double seconds = 0.0;

  void number(const std::string& key, double v) { numbers.emplace_back(key, v); }
  void label(const std::string& key, const std::string& v) { labels.emplace_back(key, v); }
  double value(const std::string& key) const {
    for (const auto& [k, v] : numbers)
      if (k == key) return v;
    throw PreconditionError("suite result has no value '" + key + "'");
  }
  void require(bool ok, const std::string& what) {
    if (!ok) {
      passed = false;
      failures.push_back(what);
    }
  }
  void record(Manifest& m) const {
    const std::string pre = check + ".";
    m.set(pre + "passed", passed);
    for (const auto& [k, v] : numbers) m.set(pre + k, v);
    for (const auto& [k, v] : labels) m.set(pre + k, v);
  }
};

class Stopwatch {
 public:
  Stopwatch() : t0_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
  }

 private:
  std::chrono::steady_clock::time_point t0_;
};

// ---------------------------------------------------------------------------
// Problems

struct ProblemSpec {
  std::string name;
  CoefficientFunctions coeffs;
  IntervalSpec interval;
  BoundaryCondition left = BoundaryCondition::dirichlet();
  BoundaryCondition right = BoundaryCondition::dirichlet();

  Mesh mesh(int n) const { return build_mesh(interval, n); }
};

inline std::string bc_label(const BoundaryCondition& bc) {
  if (bc.is_dirichlet()) return "dirichlet";
  if (bc.theta == cplx(pi / 2)) return "neumann";
  return format_complex(bc.theta);
}

/// Singular families are centred slightly off the middle of the interval.
inline ProblemSpec family_problem(const std::string& family, const IntervalSpec& iv, const BoundaryCondition& left,
                                  const BoundaryCondition& right) {
  ProblemSpec p;
  p.name = family + "_" + to_string(iv.kind);
  p.coeffs = named_family(family, 0.5 * (iv.left() + iv.right()) + 0.1);
  p.interval = iv;
  p.left = left;
  p.right = right;
  return p;
}

/// Five families on a finite, a truncated half-line and a truncated full-line
/// interval. Neumann/Dirichlet and Dirichlet/Neumann ends alternate.
inline std::vector<ProblemSpec> kato_battery() {
  std::vector<ProblemSpec> out;
  const IntervalSpec ivs[3] = {IntervalSpec::finite(0, 1), IntervalSpec::half_line(0, 6), IntervalSpec::full_line(4)};
  const std::pair<BoundaryCondition, BoundaryCondition> bcs[2] = {
      {BoundaryCondition::neumann(), BoundaryCondition::dirichlet()},
      {BoundaryCondition::dirichlet(), BoundaryCondition::neumann()}};
  int k = 0;
  for (const char* fam : {"complex_constant", "mixed_sign", "spike", "sawtooth", "complex_p"})
    for (const auto& iv : ivs) {
      const auto& [l, r] = bcs[k++ % 2];
      out.push_back(family_problem(fam, iv, l, r));
    }
  return out;
}

namespace detail {

struct SplitOperators {
  DiscreteOperator direct;  // one-shot assembly with all coefficients
  DiscreteOperator base;    // p only
  CoefficientSet coeffs;
};

inline SplitOperators split_operators(const ProblemSpec& p, int n) {
  const Mesh mesh = p.mesh(n);
  const auto c = sample_coefficients(mesh, p.coeffs);
  const auto c0 = sample_coefficients(mesh, restrict_coefficients(p.coeffs, false, false, false));
  return {orthonormalize(assemble_forms(mesh, c, p.left, p.right)),
          orthonormalize(assemble_forms(mesh, c0, p.left, p.right)), c};
}

inline double rel_error(const MatC& a, const MatC& ref) { return norm2(MatC(a - ref)) / norm2(ref); }

/// Numerical range in the open right half-plane: positive Hermitian part plus a skew part.
inline MatC random_accretive(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  MatC g(n, n), k(n, n);
  for (int j = 0; j < n; ++j) g.col(j) = random_complex_gaussian(n, rng);
  for (int j = 0; j < n; ++j) k.col(j) = random_complex_gaussian(n, rng);
  MatC h = g.adjoint() * g / n;
  h.diagonal().array() += 0.5;
  return h + (k - k.adjoint()) * (0.5 / std::sqrt(static_cast<double>(n)));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Resolvent identity, one shot and in two steps

struct KatoSuiteOptions {
  int n = 200;
  double shift = 20.0;  // z grid sits around -shift
  double tolerance = 1e-9;
};

inline std::vector<cplx> kato_z_grid(double shift) {
  return {cplx(-shift, 0), cplx(-shift, 3), cplx(-2 * shift, -5), cplx(-shift / 2 - 1, 40)};
}

/// Returns {one-shot result, two-step result}.
inline std::pair<SuiteResult, SuiteResult> kato_suite(const std::vector<ProblemSpec>& problems,
                                                      const KatoSuiteOptions& opt = {}) {
  Stopwatch clock;
  SuiteResult one{"kato_identity"}, two{"two_step"};
  CsvTable tab{{"problem", "left", "right", "z_re", "z_im", "one_shot_error", "two_step_error"}, {}};
  double worst1 = 0.0, worst2 = 0.0, two_step_seconds = 0.0;
  int evaluated = 0, excluded = 0;
  for (const auto& p : problems) {
    const auto s = detail::split_operators(p, opt.n);
    const auto fac = build_factorization(s.base, s.coeffs, FactorVariant::full_triple);
    const TwoStep ts(s.base, s.coeffs);
    int ok_here = 0;
    for (const cplx& z : kato_z_grid(opt.shift)) {
      double e1 = std::numeric_limits<double>::quiet_NaN(), e2 = e1;
      MatC rd;
      try {
        rd = resolvent(s.direct.H, z);
      } catch (const SpectrumError&) {
        ++excluded;
        continue;
      }
      try {
        e1 = detail::rel_error(perturbed_resolvent(s.base.H, fac, z), rd);
        worst1 = std::max(worst1, e1);
        ++ok_here;
      } catch (const AdmissibilityError&) {
        ++excluded;
      }
      const Stopwatch t;
      try {
        e2 = detail::rel_error(ts.resolvent(z).R, rd);
        worst2 = std::max(worst2, e2);
      } catch (const AdmissibilityError&) {
      }
      two_step_seconds += t.seconds();
      tab.add(p.name, bc_label(p.left), bc_label(p.right), z.real(), z.imag(), e1, e2);
    }
    one.require(ok_here > 0, p.name + ": no admissible z");
    evaluated += ok_here;
  }
  // The one-shot runtime covers assembly, factorization and verification, not the two-step pass.
  one.seconds = clock.seconds() - two_step_seconds;
  two.seconds = two_step_seconds;
  one.number("problems", static_cast<double>(problems.size()));
  one.number("n", opt.n);
  one.number("evaluated_points", evaluated);
  one.number("excluded_points", excluded);
  one.number("max_identity_error", worst1);
  one.number("tolerance", opt.tolerance);
  one.number("runtime_seconds", one.seconds);
  one.require(worst1 <= opt.tolerance, "identity error " + fmt17(worst1) + " above tolerance");
  two.number("max_two_step_error", worst2);
  two.number("tolerance", opt.tolerance);
  two.require(worst2 <= opt.tolerance, "two-step error " + fmt17(worst2) + " above tolerance");
  one.tables.emplace_back("identity_errors", tab);
  return {one, two};
}

// ---------------------------------------------------------------------------
// Fractional powers

struct FracPowerSuiteOptions {
  std::vector<std::uint64_t> seeds = {42, 43, 44};
  int n = 50;
  QuadratureSpec quad{};  // 400 nodes
  double sqrt_tolerance = 1e-6;
  double law_tolerance = 1e-5;
  double doubling_factor = 4.0;
};

inline SuiteResult frac_power_suite(const FracPowerSuiteOptions& opt = {}) {
  Stopwatch clock;
  SuiteResult r{"fractional_powers"};
  CsvTable tab{{"seed", "quad_vs_sqrt", "power_product", "power_adjoint", "doubling_factor"}, {}};
  double worst_sqrt = 0.0, worst_law = 0.0, worst_factor = std::numeric_limits<double>::infinity();
  for (std::uint64_t seed : opt.seeds) {
    const MatC h = detail::random_accretive(opt.n, seed);
    const MatC s = sqrt_db<cplx>(h);
    const double e_sqrt = (frac_power_quad<cplx>(h, 0.5, opt.quad) - s).norm() / s.norm();

    double e_law = 0.0;
    const MatC h30 = detail::random_accretive(30, seed + 1000);
    for (auto [a, b] : {std::pair{0.25, 0.25}, std::pair{0.2, 0.5}, std::pair{0.4, 0.3}}) {
      const auto pl = check_power_laws(h30, a, b, opt.quad);
      e_law = std::max({e_law, pl.product_relative, pl.adjoint_relative});
    }

    const MatC h20 = detail::random_accretive(20, seed + 2000);
    const MatC s20 = sqrt_db<cplx>(h20);
    QuadratureSpec coarse = opt.quad;
    coarse.nodes_per_panel = 3;
    QuadratureSpec fine = coarse;
    fine.nodes_per_panel = 6;
    const double factor = (frac_power_quad<cplx>(h20, 0.5, coarse) - s20).norm() /
                          (frac_power_quad<cplx>(h20, 0.5, fine) - s20).norm();

    tab.add(static_cast<long long>(seed), e_sqrt, e_law, e_law, factor);
    worst_sqrt = std::max(worst_sqrt, e_sqrt);
    worst_law = std::max(worst_law, e_law);
    worst_factor = std::min(worst_factor, factor);
  }
  r.number("quadrature_nodes", opt.quad.n_nodes());
  r.number("max_quad_vs_sqrt", worst_sqrt);
  r.number("max_power_law_residual", worst_law);
  r.number("min_doubling_factor", worst_factor);
  r.require(worst_sqrt <= opt.sqrt_tolerance, "quadrature vs Denman-Beavers " + fmt17(worst_sqrt));
  r.require(worst_law <= opt.law_tolerance, "power law residual " + fmt17(worst_law));
  r.require(worst_factor >= opt.doubling_factor, "node doubling factor " + fmt17(worst_factor));
  r.tables.emplace_back("fractional_powers", tab);
  r.seconds = clock.seconds();
  return r;
}

// ---------------------------------------------------------------------------
// Krein formula, square-root kernel, Bessel bound

struct KreinSuiteOptions {
  std::vector<BoundaryCondition> thetas = {BoundaryCondition::neumann(), BoundaryCondition::robin(pi / 4),
                                           BoundaryCondition::robin(cplx(1.0, 0.5))};
  std::vector<int> n_list = {64, 128, 256};
  std::vector<cplx> z_list = {cplx(-5.0), cplx(-2.0, 6.0)};
  double min_order = 1.8;
  std::vector<double> bessel_E = {25.0, 100.0};
  std::vector<double> bessel_points = {0.1, 0.3, 0.5, 0.7, 0.9};
  double k0_tolerance = 1e-8;
  double kernel_E = 25.0;
  int kernel_n = 40;
  QuadratureSpec quad{};
};

/// Largest nodal kernel gap between the Krein-built and the directly assembled Robin resolvent on (0, 1).
inline double krein_gap(int n, const BoundaryCondition& theta_a, cplx z) {
  const Mesh mesh = build_mesh(IntervalSpec::finite(0, 1), n);
  const CoefficientSet c = sample_coefficients(mesh, CoefficientFunctions{});
  auto direct = [&](const BoundaryCondition& left) {
    return resolvent(orthonormalize(assemble_forms(mesh, c, left, BoundaryCondition::dirichlet())).H, z);
  };
  const MatC rk = krein_resolvent(direct(BoundaryCondition::dirichlet()), z, theta_a, mesh);
  return kernel_from_orthonormal(MatC(rk - direct(theta_a)), mesh).cwiseAbs().maxCoeff();
}

inline CsvTable kernel_csv(const KernelTable& t) {
  CsvTable tab{{"x", "xp", "re", "im"}, {}};
  for (std::size_t i = 0; i < t.x.size(); ++i)
    for (std::size_t j = 0; j < t.xp.size(); ++j) {
      const cplx v = t.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      tab.add(t.x[i], t.xp[j], v.real(), v.imag());
    }
  return tab;
}

inline SuiteResult krein_suite(const KreinSuiteOptions& opt = {}) {
  Stopwatch clock;
  SuiteResult r{"krein"};

  CsvTable conv{{"theta", "z_re", "z_im", "n", "gap", "order"}, {}};
  double min_order = std::numeric_limits<double>::infinity();
  for (const auto& th : opt.thetas)
    for (const cplx& z : opt.z_list) {
      double prev = 0.0;
      for (std::size_t k = 0; k < opt.n_list.size(); ++k) {
        const double gap = krein_gap(opt.n_list[k], th, z);
        double order = std::numeric_limits<double>::quiet_NaN();
        if (k > 0) {
          order = std::log(prev / gap) / std::log(static_cast<double>(opt.n_list[k]) / opt.n_list[k - 1]);
          min_order = std::min(min_order, order);
        }
        conv.add(bc_label(th), z.real(), z.imag(), opt.n_list[k], gap, order);
        prev = gap;
      }
    }
  r.number("min_convergence_order", min_order);
  r.require(min_order >= opt.min_order, "Krein convergence order " + fmt17(min_order));

  const Mesh kmesh = build_mesh(IntervalSpec::finite(0, 1), opt.kernel_n);
  double worst_row = 0.0;
  for (const auto& th : opt.thetas) {
    const auto tab = sqrt_kernel(opt.kernel_E, th, kmesh, opt.quad);
    const double scale = tab.values.cwiseAbs().maxCoeff();
    worst_row = std::max(worst_row, tab.values.row(kmesh.n_nodes() - 1).cwiseAbs().maxCoeff() / scale);
    if (&th == &opt.thetas.back()) r.tables.emplace_back("sqrt_kernel", kernel_csv(tab));
  }
  r.number("sqrt_kernel_endpoint_row", worst_row);
  r.require(worst_row <= 1e-12, "square-root kernel row at b " + fmt17(worst_row));

  CsvTable grid{{"theta", "E", "x", "xp", "lhs", "rhs", "slack", "C"}, {}};
  double min_slack = std::numeric_limits<double>::infinity();
  for (const auto& th : opt.thetas)
    for (double E : opt.bessel_E)
      for (double x : opt.bessel_points)
        for (double xp : opt.bessel_points) {
          const auto b = bessel_bound_check(E, x, xp, th, 0.0, 1.0, opt.quad);
          grid.add(bc_label(th), E, x, xp, b.lhs, b.rhs, b.slack, b.C);
          min_slack = std::min(min_slack, b.slack);
        }
  r.number("min_bessel_slack", min_slack);
  r.require(min_slack >= 0.0, "Bessel bound slack " + fmt17(min_slack));
  r.tables.emplace_back("bessel_grid", grid);

  CsvTable profile{{"E", "lhs", "rhs"}, {}};
  for (double E : log_grid(opt.bessel_E.front(), 1e4, 4)) {
    const auto b = bessel_bound_check(E, 0.3, 0.6, opt.thetas.front(), 0.0, 1.0, opt.quad);
    profile.add(E, b.lhs, b.rhs);
  }
  r.tables.emplace_back("bessel_profile", profile);

  double k0_gap = 0.0;
  for (double z : {1e-3, 0.05, 0.5, 1.0, 1.7, 2.0}) {
    const double s = bessel_k0_series(z);
    k0_gap = std::max(k0_gap, std::abs(bessel_k0(z) - s) / s);
  }
  for (double z : {20.0, 35.0, 80.0, 400.0}) {
    const double a = bessel_k0_asymptotic(z);
    k0_gap = std::max(k0_gap, std::abs(bessel_k0(z) - a) / a);
  }
  r.number("k0_two_method_gap", k0_gap);
  r.require(k0_gap <= opt.k0_tolerance, "K0 methods disagree by " + fmt17(k0_gap));
  r.tables.emplace_back("krein_convergence", conv);
  r.seconds = clock.seconds();
  return r;
}

// ---------------------------------------------------------------------------
// Relative form bounds and Trudinger

struct FormBoundSuiteOptions {
  int n = 120;
  int vectors = 1000;
  int eps_count = 16;
  std::uint64_t seed = 2024;
  double tolerance = 1e-10;
};

inline std::vector<ProblemSpec> formbound_battery() {
  return {family_problem("constant", IntervalSpec::finite(0, 1), BoundaryCondition::neumann(),
                         BoundaryCondition::neumann()),
          family_problem("complex_constant", IntervalSpec::finite(0, 1), BoundaryCondition::dirichlet(),
                         BoundaryCondition::neumann()),
          family_problem("spike", IntervalSpec::half_line(0, 4), BoundaryCondition::neumann(),
                         BoundaryCondition::dirichlet()),
          family_problem("sawtooth", IntervalSpec::full_line(5), BoundaryCondition::dirichlet(),
                         BoundaryCondition::dirichlet())};
}

/// eps spread geometrically over (1e-3 eps_0, 0.99 eps_0).
inline std::vector<double> eps_grid(double eps_0, int count) {
  std::vector<double> out;
  for (int k = 0; k < count; ++k) out.push_back(0.99 * eps_0 * std::pow(1e-3, 1.0 - static_cast<double>(k) / (count - 1)));
  return out;
}

inline SuiteResult formbound_suite(const std::vector<ProblemSpec>& problems, const FormBoundSuiteOptions& opt = {}) {
  Stopwatch clock;
  SuiteResult r{"form_bounds"};
  double min_slack = std::numeric_limits<double>::infinity();
  double min_trud = std::numeric_limits<double>::infinity();
  CsvTable trud{{"problem", "eps", "min_pointwise_slack", "min_weighted_slack"}, {}};
  std::uint64_t seed = opt.seed;
  for (const auto& p : problems) {
    const Mesh mesh = p.mesh(opt.n);
    const auto c = sample_coefficients(mesh, p.coeffs);
    const auto forms = assemble_forms(mesh, c, p.left, p.right);
    const auto k = locunif_norms(c, mesh);
    const auto eps = eps_grid(k.eps_0, opt.eps_count);
    std::mt19937_64 rng(seed++);
    std::vector<VecC> battery;
    for (int v = 0; v < opt.vectors; ++v) battery.push_back(random_complex_gaussian(forms.n_dof(), rng));

    // Worst row per (eps, j).
    std::vector<FormBoundRow> worst(eps.size() * 3);
    for (auto& w : worst) w.slack = std::numeric_limits<double>::infinity();
    for (const VecC& f : battery)
      for (std::size_t e = 0; e < eps.size(); ++e)
        for (const auto& row : check_form_bound(f, forms, k, eps[e])) {
          auto& w = worst[e * 3 + static_cast<std::size_t>(row.j - 1)];
          // Relative slack so that vectors of different size compare.
          const double scale = std::max(row.bound, 1e-300);
          if (row.slack / scale < w.slack / std::max(w.bound, 1e-300) || !std::isfinite(w.slack)) w = row;
          min_slack = std::min(min_slack, row.slack / scale);
        }
    CsvTable tab{{"eps", "j", "lhs", "bound", "slack"}, {}};
    for (const auto& w : worst) tab.add(w.eps, w.j, w.lhs, w.bound, w.slack);
    r.tables.emplace_back("form_bounds_" + p.name, tab);

    if (mesh.interval.kind == IntervalKind::finite) {
      std::vector<cplx> weight;
      for (const cplx& q : c.q) weight.emplace_back(std::sqrt(std::abs(q)));
      for (double e : eps) {
        double pw = std::numeric_limits<double>::infinity(), wt = pw;
        for (const VecC& f : battery) {
          VecC full = VecC::Zero(mesh.n_nodes());
          for (int d = 0; d < forms.n_dof(); ++d) full(forms.dofs.nodes[static_cast<std::size_t>(d)]) = f(d);
          const auto t = check_trudinger(full, weight, mesh, e);
          pw = std::min(pw, t.pointwise_slack / t.pointwise_bound);
          wt = std::min(wt, t.N_w > 0.0 ? t.weighted_slack / t.weighted_bound : 0.0);
        }
        trud.add(p.name, e, pw, wt);
        min_trud = std::min({min_trud, pw, wt});
      }
    }
  }
  r.number("vectors_per_problem", opt.vectors);
  r.number("eps_values", opt.eps_count);
  r.number("min_relative_slack", min_slack);
  r.number("min_trudinger_relative_slack", min_trud);
  r.require(min_slack >= -opt.tolerance, "form bound slack " + fmt17(min_slack));
  r.require(min_trud >= -opt.tolerance, "Trudinger slack " + fmt17(min_trud));
  r.tables.emplace_back("trudinger", trud);
  r.seconds = clock.seconds();
  return r;
}

// ---------------------------------------------------------------------------
// Decay of the factored perturbation

struct DecaySuiteOptions {
  int n = 200;
  double E_lo = 1e2, E_hi = 1e6;
  int per_decade = 2;
  double max_slope = -0.2;
  double plateau = 0.5;
  int integral_nodes = 6;
};

inline ProblemSpec decay_default_problem() {
  ProblemSpec p = family_problem("complex_constant", IntervalSpec::finite(0, 0.5), BoundaryCondition::neumann(),
                                 BoundaryCondition::dirichlet());
  p.name = "complex_constant_decay";
  return p;
}

inline CsvTable decay_csv(const DecayProfile& prof) {
  CsvTable t{{"E", "normK", "normA", "normB", "integral"}, {}};
  for (const auto& row : prof.rows) t.add(row.E, row.normK, row.normA, row.normB, row.integral);
  return t;
}

inline SuiteResult decay_suite(const ProblemSpec& p, const DecaySuiteOptions& opt = {}) {
  Stopwatch clock;
  SuiteResult r{"decay"};
  const auto E = log_grid(opt.E_lo, opt.E_hi, opt.per_decade);
  DecayOptions dopt;
  dopt.integral_nodes = opt.integral_nodes;
  const auto s = detail::split_operators(p, opt.n);
  const Mesh mesh = p.mesh(opt.n);

  const auto qr = decay_profile(s.base.H, build_factorization(s.base, s.coeffs, FactorVariant::qr_pair), E, dopt);
  const auto mid = orthonormalize(assemble_forms(
      mesh, sample_coefficients(mesh, restrict_coefficients(p.coeffs, true, true, false)), p.left, p.right));
  const auto sp = decay_profile(mid.H, build_factorization(mid, s.coeffs, FactorVariant::s_pair), E, dopt);
  const auto tri = decay_profile(s.base.H, build_factorization(s.base, s.coeffs, FactorVariant::full_triple), E, dopt);
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (const auto& row : tri.rows) {
    lo = std::min(lo, row.normB);
    hi = std::max(hi, row.normB);
  }
  r.number("qr_pair_slope", qr.slope);
  r.number("s_pair_slope", sp.slope);
  r.number("full_triple_normB_min_over_max", lo / hi);
  r.require(qr.slope <= opt.max_slope, "qr_pair slope " + fmt17(qr.slope));
  r.require(sp.slope <= opt.max_slope, "s_pair slope " + fmt17(sp.slope));
  r.require(lo >= opt.plateau * hi, "full_triple normB does not plateau");
  r.tables.emplace_back("decay_qr_pair", decay_csv(qr));
  r.tables.emplace_back("decay_s_pair", decay_csv(sp));
  r.tables.emplace_back("decay_full_triple", decay_csv(tri));

  // Multiplier |q|^{1/2} against the p == 1 Laplacian with the same ends.
  const auto lap = orthonormalize(assemble_forms(mesh, sample_coefficients(mesh, CoefficientFunctions{}), p.left,
                                                 p.right));
  const auto q_cells = sample_coefficients(mesh, p.coeffs).q;
  std::vector<double> cells;
  for (const cplx& q : q_cells) cells.push_back(std::sqrt(std::abs(q)));
  const auto dec = multiplier_decay(nodal_multiplier(mesh, lap.dofs, cells), lap.H, E);
  CsvTable mt{{"E", "norm"}, {}};
  for (std::size_t i = 0; i < dec.E.size(); ++i) mt.add(dec.E[i], dec.norm[i]);
  r.tables.emplace_back("multiplier_decay", mt);
  r.number("multiplier_slope", dec.slope);
  r.require(dec.slope <= opt.max_slope, "multiplier slope " + fmt17(dec.slope));
  r.seconds = clock.seconds();
  return r;
}

// ---------------------------------------------------------------------------
// Square-root domains under refinement

struct DomainSuiteOptions {
  std::vector<int> baseline_n = {32, 64, 128, 256, 512, 1024};
  std::vector<int> lions_n = {32, 64, 128, 256, 512, 1024};
  std::vector<int> compliant_n = {32, 64, 128, 256, 512};
  double threshold = kDefaultGrowthThreshold;
  int samples = 16;
  std::uint64_t seed = 1;
};

inline CsvTable kappa_csv(const DomainEquivalenceReport& rep) {
  CsvTable t{{"n", "E", "alpha", "min_ratio", "max_ratio", "kappa", "verdict"}, {}};
  for (const auto& row : rep.rows)
    t.add(row.n, row.E, row.alpha, row.min_ratio, row.max_ratio, row.kappa, rep.verdict);
  return t;
}

inline DomainProblem operator_problem(const ProblemSpec& p) {
  DomainProblem d;
  d.name = p.name;
  d.build = [p](int n) {
    return orthonormalize(assemble_forms(p.mesh(n), sample_coefficients(p.mesh(n), p.coeffs), p.left, p.right));
  };
  return d;
}

/// Problems inside the hypotheses: complex coefficients with Dirichlet/Neumann ends and complex Robin data at p == 1.
inline std::vector<ProblemSpec> compliant_battery() {
  ProblemSpec robin = family_problem("complex_robin", IntervalSpec::finite(0, 1),
                                     BoundaryCondition::robin(cplx(1.0, 0.5)), BoundaryCondition::dirichlet());
  robin.name = "complex_robin_theta";
  return {family_problem("complex_constant", IntervalSpec::finite(0, 1), BoundaryCondition::dirichlet(),
                         BoundaryCondition::dirichlet()),
          family_problem("mixed_sign", IntervalSpec::finite(0, 1), BoundaryCondition::neumann(),
                         BoundaryCondition::dirichlet()),
          robin};
}

inline SuiteResult domain_suite(const std::vector<ProblemSpec>& compliant, const DomainSuiteOptions& opt = {}) {
  Stopwatch clock;
  SuiteResult r{"domain"};
  r.number("growth_threshold", opt.threshold);

  double baseline = 0.0;
  CsvTable base{{"n", "E", "alpha", "min_ratio", "max_ratio", "kappa", "verdict"}, {}};
  const ProblemSpec lap = family_problem("laplace", IntervalSpec::finite(0, 1), BoundaryCondition::dirichlet(),
                                         BoundaryCondition::dirichlet());
  for (int n : opt.baseline_n) {
    const auto op = operator_problem(lap).build(n);
    const auto row = sqrt_domain_kappa(op, 1.0, opt.samples, opt.seed);
    baseline = std::max(baseline, std::abs(row.kappa - 1.0));
    base.add(row.n, row.E, row.alpha, row.min_ratio, row.max_ratio, row.kappa,
             std::abs(row.kappa - 1.0) <= 1e-12 ? "bounded" : "divergent");
  }
  r.number("baseline_max_deviation", baseline);
  r.require(baseline <= 1e-12, "baseline kappa deviates by " + fmt17(baseline));
  r.tables.emplace_back("kappa_baseline", base);

  const auto half = refinement_study(lions_problem(), opt.lions_n, 1.0, 0.5, opt.threshold, opt.samples, opt.seed);
  const auto quarter = refinement_study(lions_problem(), opt.lions_n, 1.0, 0.25, opt.threshold, opt.samples, opt.seed);
  r.number("lions_half_growth", half.growth);
  r.number("lions_quarter_growth", quarter.growth);
  r.label("lions_half_verdict", half.verdict);
  r.label("lions_quarter_verdict", quarter.verdict);
  r.require(half.growth > quarter.growth, "Lions growth at 1/2 does not exceed growth at 1/4");
  r.require(half.verdict == "divergent", "Lions kappa_1/2 stays below the ceiling");
  r.require(quarter.verdict == "bounded", "Lions kappa_1/4 exceeds the ceiling");
  r.tables.emplace_back("kappa_lions_half", kappa_csv(half));
  r.tables.emplace_back("kappa_lions_quarter", kappa_csv(quarter));

  double worst = 0.0;
  for (const auto& p : compliant) {
    const auto rep = refinement_study(operator_problem(p), opt.compliant_n, 0.0, 0.5, opt.threshold, opt.samples,
                                      opt.seed);
    worst = std::max(worst, rep.growth);
    r.label(p.name + "_verdict", rep.verdict);
    r.require(rep.verdict == "bounded", p.name + " growth " + fmt17(rep.growth));
    r.tables.emplace_back("kappa_" + p.name, kappa_csv(rep));
  }
  r.number("compliant_max_growth", worst);
  r.seconds = clock.seconds();
  return r;
}

// ---------------------------------------------------------------------------
// Trace formula for the symmetrized determinant

struct TraceSuiteOptions {
  std::vector<std::uint64_t> seeds = {31, 41, 51};
  double closed_form_tolerance = 1e-6;
  double order_window = 0.25;
};

inline SuiteResult trace_suite(const TraceSuiteOptions& opt = {}) {
  Stopwatch clock;
  SuiteResult r{"trace_formula"};
  MatC a0 = MatC::Zero(2, 2);
  a0.diagonal() << 1.0, 2.0;
  MatC a = a0;
  a(0, 0) += 0.1;
  const cplx z = -1.0;
  const auto closed = trace_det_check(a, a0, z, 1e-5);
  const cplx exact = 1.0 / (1.1 - z) - 1.0 / (1.0 - z);
  r.number("closed_form_residual", closed.residual);
  r.number("closed_form_trace_error", std::abs(closed.trace - exact));
  r.require(closed.residual <= opt.closed_form_tolerance, "closed-form residual " + fmt17(closed.residual));
  r.require(std::abs(closed.trace - exact) <= opt.closed_form_tolerance, "closed-form trace mismatch");

  CsvTable tab{{"seed", "h", "residual", "order"}, {}};
  double worst = 0.0;
  for (std::uint64_t seed : opt.seeds) {
    const MatC b0 = detail::random_accretive(6, seed);
    std::mt19937_64 rng(seed + 1);
    MatC p(6, 6);
    for (int j = 0; j < 6; ++j) p.col(j) = random_complex_gaussian(6, rng);
    const MatC b = b0 + 0.05 * p;
    double prev = 0.0;
    for (double h : {0.1, 0.05, 0.025}) {
      const double res = trace_det_check(b, b0, -2.0, h).residual;
      double order = std::numeric_limits<double>::quiet_NaN();
      if (prev > 0.0) {
        order = std::log2(prev / res);
        worst = std::max(worst, std::abs(order - 2.0));
      }
      tab.add(static_cast<long long>(seed), h, res, order);
      prev = res;
    }
  }
  r.number("max_order_deviation", worst);
  r.require(worst <= opt.order_window, "Richardson order off by " + fmt17(worst));
  r.tables.emplace_back("trace_richardson", tab);
  r.seconds = clock.seconds();
  return r;
}

// ---------------------------------------------------------------------------
// Hypothesis checks for one problem

struct HypothesisSuiteOptions {
  int n = 100;
  int vectors = 200;
  int eps_count = 16;
  std::uint64_t seed = 1;
  std::vector<double> E_grid = log_grid(1e2, 1e5, 2);
  int integral_nodes = 4;
  double tolerance = 1e-10;
};

inline SuiteResult hypothesis_suite(const ProblemSpec& p, const HypothesisSuiteOptions& opt = {}) {
  Stopwatch clock;
  SuiteResult r{"hypotheses"};
  const Mesh mesh = p.mesh(opt.n);
  const auto c = sample_coefficients(mesh, p.coeffs);
  const auto forms = assemble_forms(mesh, c, p.left, p.right);
  const auto op = orthonormalize(forms);

  // Numerical range and m-accretivity after the safe shift.
  RangeOptions ropt;
  ropt.seed = opt.seed;
  const auto range = numerical_range_hull(op.H, ropt);
  CsvTable rt{{"phi", "re", "im"}, {}};
  for (const auto& [phi, w] : range.boundary) rt.add(phi, w.real(), w.imag());
  r.tables.emplace_back("numerical_range", rt);
  r.number("range_vertex", range.gamma);
  r.number("range_semi_angle", range.theta);
  r.label("sectorial", range.sectorial ? "true" : "false");
  const double shift = safe_shift(op.H);
  MatC shifted = op.H;
  shifted.diagonal().array() += shift;
  std::vector<cplx> zeta;
  for (double re : {0.1, 1.0, 10.0})
    for (double im : {-10.0, 0.0, 10.0}) zeta.emplace_back(re, im);
  const auto acc = check_m_accretive(shifted, zeta);
  r.number("safe_shift", shift);
  r.number("accretivity_worst_ratio", acc.worst_ratio);
  r.require(acc.ok, "shifted operator is not m-accretive on the grid");

  const auto shifted_range = fit_sector(numerical_range_hull(shifted, ropt).samples, 0.0);
  const double omega = 0.5 * (shifted_range.theta + pi);
  std::vector<double> t_grid = {0.0};
  for (double t : log_grid(1e-2, 1e4, 2)) t_grid.push_back(t);
  const auto diag = sector_diagnostics(shifted, t_grid, omega, sector_complement_samples(omega, {0.1, 1.0, 10.0}));
  CsvTable pt{{"t", "ratio"}, {}};
  for (const auto& [t, ratio] : diag.positive_type_profile) pt.add(t, ratio);
  r.tables.emplace_back("positive_type", pt);
  r.number("positive_type_constant", diag.M_A);
  r.require(std::isfinite(diag.M_A), "positive-type constant is not finite");

  // Relative form bounds with the derived constants.
  const auto k = locunif_norms(c, mesh);
  r.number("C_q", k.C_q);
  r.number("C_r", k.C_r);
  r.number("C_s", k.C_s);
  r.number("M", k.M);
  r.number("eps_0", k.eps_0);
  std::mt19937_64 rng(opt.seed);
  double min_slack = std::numeric_limits<double>::infinity();
  CsvTable ft{{"eps", "j", "lhs", "bound", "slack"}, {}};
  std::vector<FormBoundRow> worst(static_cast<std::size_t>(opt.eps_count) * 3);
  for (auto& w : worst) w.slack = std::numeric_limits<double>::infinity();
  const auto eps = eps_grid(k.eps_0, opt.eps_count);
  for (int v = 0; v < opt.vectors; ++v) {
    const VecC f = random_complex_gaussian(forms.n_dof(), rng);
    for (std::size_t e = 0; e < eps.size(); ++e)
      for (const auto& row : check_form_bound(f, forms, k, eps[e])) {
        const double rel = row.slack / std::max(row.bound, 1e-300);
        auto& w = worst[e * 3 + static_cast<std::size_t>(row.j - 1)];
        if (rel < w.slack / std::max(w.bound, 1e-300)) w = row;
        min_slack = std::min(min_slack, rel);
      }
  }
  for (const auto& w : worst) ft.add(w.eps, w.j, w.lhs, w.bound, w.slack);
  r.tables.emplace_back("form_bounds", ft);
  r.number("form_bound_min_relative_slack", min_slack);
  r.require(min_slack >= -opt.tolerance, "form bound slack " + fmt17(min_slack));

  // Admissibility threshold and decay of the factors.
  const auto s = detail::split_operators(p, opt.n);
  for (FactorVariant v : {FactorVariant::qr_pair, FactorVariant::full_triple}) {
    const auto fac = build_factorization(s.base, s.coeffs, v);
    const double Estar = admissibility_threshold(s.base.H, fac, 1e-2, 1e8);
    r.number(std::string("admissibility_threshold_") + to_string(v), Estar);
    r.require(std::isfinite(Estar), std::string(to_string(v)) + ": K(-E) never drops below 1/2");
  }
  DecayOptions dopt;
  dopt.integral_nodes = opt.integral_nodes;
  const auto prof =
      decay_profile(s.base.H, build_factorization(s.base, s.coeffs, FactorVariant::qr_pair), opt.E_grid, dopt);
  r.tables.emplace_back("decay_qr_pair", decay_csv(prof));
  std::vector<double> Es, As, Bs;
  for (const auto& row : prof.rows) {
    Es.push_back(row.E);
    As.push_back(row.normA);
    Bs.push_back(row.normB);
  }
  if (As.back() > 0.0) r.number("normA_slope", loglog_slope(Es, As));
  if (Bs.back() > 0.0) r.number("normB_slope", loglog_slope(Es, Bs));
  r.number("normK_slope", prof.slope);
  r.require(prof.monotone, "K(-E) is not decreasing on the grid");
  r.require(prof.rows.back().normK < 1.0, "K(-E) not below 1 at the largest E");
  r.seconds = clock.seconds();
  return r;
}

}  // namespace slkato
