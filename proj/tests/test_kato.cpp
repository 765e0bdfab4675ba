#include "slkato/families.hpp"
#include "slkato/kato.hpp"

#include <gtest/gtest.h>

using namespace slkato;

namespace {

struct Split {
  DiscreteOperator direct;  // one-shot assembly of L_{p,q,r,s}
  DiscreteOperator base;    // L_{p,0,0,0}
  CoefficientSet coeffs;
};

Split split(const Mesh& mesh, const CoefficientFunctions& f, const BoundaryCondition& l,
            const BoundaryCondition& r) {
  const auto c = sample_coefficients(mesh, f);
  const auto c0 = sample_coefficients(mesh, restrict_coefficients(f, false, false, false));
  return {orthonormalize(assemble_forms(mesh, c, l, r)), orthonormalize(assemble_forms(mesh, c0, l, r)), c};
}

double rel_diff(const MatC& a, const MatC& b) { return (a - b).norm() / std::max(b.norm(), 1e-300); }

FactoredPerturbation scalar_toy() {
  FactoredPerturbation f;
  f.A = MatC::Ones(1, 1);
  f.B = MatC::Ones(1, 1);
  return f;
}

std::vector<cplx> z_grid(double shift) {
  return {cplx(-shift, 0), cplx(-shift, 3), cplx(-2 * shift, -5), cplx(-shift / 2 - 1, 40)};
}

}  // namespace

TEST(Factorization, QrPairWithoutQAndR) {
  const Mesh mesh = build_mesh(IntervalSpec::finite(0, 1), 20);
  CoefficientFunctions f;
  f.s = constant_fn(0.7);
  const auto s = split(mesh, f, BoundaryCondition::dirichlet(), BoundaryCondition::dirichlet());
  const auto fac = build_factorization(s.base, s.coeffs, FactorVariant::qr_pair);
  const Eigen::Index nc = mesh.n_cells();
  EXPECT_EQ(fac.A.bottomRows(fac.A.rows() - nc).norm(), 0.0);
  EXPECT_EQ(fac.B.topRows(nc).norm(), 0.0);
  EXPECT_EQ(fac.perturbation().norm(), 0.0);
}

TEST(Factorization, SPairReproducesK2) {
  const Mesh mesh = build_mesh(IntervalSpec::finite(0, 2), 30);
  CoefficientFunctions f;
  f.s = constant_fn(cplx(-1.5, 0.25));
  const auto c = sample_coefficients(mesh, f);
  const auto forms = assemble_forms(mesh, c, BoundaryCondition::neumann(), BoundaryCondition::dirichlet());
  const auto op = orthonormalize(forms);
  const auto fac = build_factorization(op, c, FactorVariant::s_pair);
  EXPECT_LE((fac.nodal_perturbation() - forms.K2).norm(), 1e-14 * forms.K2.norm());
}

TEST(Factorization, UnitPotentialMatchesK3) {
  const Mesh mesh = build_mesh(IntervalSpec::finite(0, 1), 25);
  CoefficientFunctions f;
  f.q = constant_fn(1.0);
  const auto c = sample_coefficients(mesh, f);
  const auto forms = assemble_forms(mesh, c, BoundaryCondition::robin(0.7), BoundaryCondition::neumann());
  const auto op = orthonormalize(forms);
  const auto fac = build_factorization(op, c, FactorVariant::qr_pair);
  EXPECT_LE((fac.nodal_perturbation() - forms.K3).norm(), 1e-14);
  EXPECT_LE((fac.nodal_perturbation() - MatC(forms.mass_lumped.cast<cplx>().asDiagonal())).norm(), 1e-14);
  // Orthonormal coordinates: lumped M^{-1/2} K3 M^{-1/2} = I.
  EXPECT_LE((fac.perturbation() - MatC::Identity(op.size(), op.size())).norm(), 1e-13);
}

TEST(Factorization, AllVariantsReproduceAssembly) {
  const Mesh mesh = build_mesh(IntervalSpec::full_line(3), 40);
  for (const auto& name : family_names()) {
    const auto c = sample_coefficients(mesh, named_family(name));
    const auto forms = assemble_forms(mesh, c, BoundaryCondition::dirichlet(), BoundaryCondition::neumann());
    const auto op = orthonormalize(forms);
    const MatC qr = forms.K1 + forms.K3;
    const MatC all = qr + forms.K2;
    const double scale = std::max(1.0, all.norm());
    EXPECT_LE((build_factorization(op, c, FactorVariant::qr_pair).nodal_perturbation() - qr).norm(), 1e-13 * scale)
        << name;
    EXPECT_LE((build_factorization(op, c, FactorVariant::s_pair).nodal_perturbation() - forms.K2).norm(),
              1e-13 * scale)
        << name;
    EXPECT_LE((build_factorization(op, c, FactorVariant::full_triple).nodal_perturbation() - all).norm(),
              1e-13 * scale)
        << name;
  }
}

TEST(Factorization, ConsistentMassCoordinates) {
  const Mesh mesh = build_mesh(IntervalSpec::finite(0, 1), 24);
  const auto f = named_family("complex_constant");
  const auto c = sample_coefficients(mesh, f);
  const auto forms = assemble_forms(mesh, c, BoundaryCondition::neumann(), BoundaryCondition::dirichlet());
  const auto op = orthonormalize(forms, MassTreatment::consistent);
  const auto fac = build_factorization(op, c, FactorVariant::full_triple);
  const MatC expected = op.congruence(forms.K1 + forms.K2 + forms.K3);
  EXPECT_LE(rel_diff(fac.perturbation(), expected), 1e-12);
}

TEST(KatoK, ZeroFactorization) {
  const MatC H0 = MatC::Identity(3, 3) * 2.0;
  FactoredPerturbation f;
  f.A = MatC::Zero(2, 3);
  f.B = MatC::Zero(2, 3);
  EXPECT_EQ(kato_K(H0, f, -1.0).norm(), 0.0);
  EXPECT_LE(rel_diff(perturbed_resolvent(H0, f, -1.0), resolvent(H0, -1.0)), 1e-16);
}

TEST(KatoK, ScalarToy) {
  const MatC T0 = MatC::Ones(1, 1);
  const auto f = scalar_toy();
  EXPECT_NEAR(std::abs(kato_K(T0, f, 0.0)(0, 0) - cplx(-1.0)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(perturbed_resolvent(T0, f, 0.0)(0, 0) - cplx(0.5)), 0.0, 1e-15);
}

TEST(KatoK, InadmissibleZ) {
  // T0 = [1], W = B^*A = -1: T0 + W = 0 so z = 0 is an eigenvalue and K(0) = 1.
  const MatC T0 = MatC::Ones(1, 1);
  auto f = scalar_toy();
  f.A(0, 0) = -1.0;
  EXPECT_NEAR(std::abs(kato_K(T0, f, 0.0)(0, 0) - cplx(1.0)), 0.0, 1e-15);
  EXPECT_THROW(perturbed_resolvent(T0, f, 0.0), AdmissibilityError);
  const auto rep = verify_identity(MatC::Zero(1, 1), T0, f, {0.0, -1.0});
  EXPECT_EQ(rep.excluded.size(), 1u);
  EXPECT_LE(rep.max_rel_error, 1e-15);
}

TEST(KatoIdentity, UnitPotentialDirichlet) {
  const Mesh mesh = build_mesh(IntervalSpec::finite(0, 1), 60);
  CoefficientFunctions f;
  f.q = constant_fn(1.0);
  const auto s = split(mesh, f, BoundaryCondition::dirichlet(), BoundaryCondition::dirichlet());
  const auto fac = build_factorization(s.base, s.coeffs, FactorVariant::qr_pair);
  const auto rep = verify_identity(s.direct.H, s.base.H, fac, {cplx(-5.0)});
  EXPECT_TRUE(rep.excluded.empty());
  EXPECT_LE(rep.max_rel_error, 1e-9);
}

class KatoFamilies : public ::testing::TestWithParam<std::tuple<std::string, int>> {};

TEST_P(KatoFamilies, OneShotAndTwoStepAgreeWithDirect) {
  const auto& [name, kind] = GetParam();
  const IntervalSpec iv = kind == 0   ? IntervalSpec::finite(0, 1)
                          : kind == 1 ? IntervalSpec::half_line(0, 6)
                                      : IntervalSpec::full_line(4);
  const Mesh mesh = build_mesh(iv, 120);
  const auto fam = named_family(name, 0.5 * (iv.left() + iv.right()) + 0.1);
  const auto s = split(mesh, fam, BoundaryCondition::neumann(), BoundaryCondition::dirichlet());
  const auto fac = build_factorization(s.base, s.coeffs, FactorVariant::full_triple);
  const double shift = 20.0;
  const auto rep = verify_identity(s.direct.H, s.base.H, fac, z_grid(shift));
  EXPECT_LE(rep.max_rel_error, 1e-9) << name;
  EXPECT_LE(rep.excluded.size(), 1u);

  const TwoStep two(s.base, s.coeffs);
  for (const cplx& z : z_grid(shift)) {
    try {
      const auto out = two.resolvent(z);
      EXPECT_LE(rel_diff(out.R, resolvent(s.direct.H, z)), 1e-9) << name << " z=" << z;
    } catch (const AdmissibilityError&) {
    }
  }
}

INSTANTIATE_TEST_SUITE_P(Families, KatoFamilies,
                         ::testing::Combine(::testing::Values("complex_constant", "mixed_sign", "spike", "sawtooth",
                                                              "complex_p"),
                                            ::testing::Values(0, 1, 2)));

TEST(TwoStep, WithoutSIsStageOne) {
  const Mesh mesh = build_mesh(IntervalSpec::finite(0, 1), 40);
  auto f = named_family("complex_constant");
  f.s = constant_fn(0.0);
  const auto s = split(mesh, f, BoundaryCondition::dirichlet(), BoundaryCondition::dirichlet());
  const auto out = TwoStep(s.base, s.coeffs).resolvent(-3.0);
  EXPECT_EQ((out.R - out.R_stage1).norm(), 0.0);
  EXPECT_EQ(out.norm_K2, 0.0);
}

TEST(TwoStep, StageOneMatchesPartialAssembly) {
  const Mesh mesh = build_mesh(IntervalSpec::finite(0, 1), 40);
  const auto f = named_family("complex_constant");
  const auto s = split(mesh, f, BoundaryCondition::neumann(), BoundaryCondition::neumann());
  const auto partial = assemble_operator(mesh, restrict_coefficients(f, true, true, false),
                                         BoundaryCondition::neumann(), BoundaryCondition::neumann());
  const auto out = TwoStep(s.base, s.coeffs).resolvent(-10.0);
  EXPECT_LE(rel_diff(out.R_stage1, resolvent(partial.H, -10.0)), 1e-9);
}

TEST(KatoIdentity, SecondResolventConsistency) {
  const Mesh mesh = build_mesh(IntervalSpec::finite(0, 1), 50);
  const auto s = split(mesh, named_family("mixed_sign"), BoundaryCondition::neumann(), BoundaryCondition::neumann());
  const auto fac = build_factorization(s.base, s.coeffs, FactorVariant::full_triple);
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int k = 0; k < 4; ++k) {
    const cplx z1(-30 + 10 * u(rng), 30 * u(rng)), z2(-30 + 10 * u(rng), 30 * u(rng));
    const MatC r1 = perturbed_resolvent(s.base.H, fac, z1);
    const MatC r2 = perturbed_resolvent(s.base.H, fac, z2);
    EXPECT_LE(rel_diff(r1 - r2, (z1 - z2) * r1 * r2), 1e-9);
  }
}

TEST(Admissibility, ThresholdSeparatesAdmissibleShifts) {
  const Mesh mesh = build_mesh(IntervalSpec::finite(0, 1), 60);
  auto f = named_family("complex_constant");
  f.q = constant_fn(cplx(-40.0, 5.0));
  const auto s = split(mesh, f, BoundaryCondition::neumann(), BoundaryCondition::dirichlet());
  const auto fac = build_factorization(s.base, s.coeffs, FactorVariant::qr_pair);
  const double Estar = admissibility_threshold(s.base.H, fac, 1e-2, 1e6);
  ASSERT_TRUE(std::isfinite(Estar));
  EXPECT_NEAR(norm2(kato_K(s.base.H, fac, -Estar)), 0.5, 1e-6);
  for (double E : log_grid(Estar, 1e6, 3)) {
    EXPECT_LT(norm2(kato_K(s.base.H, fac, -E)), 1.0);
    EXPECT_NO_THROW(perturbed_resolvent(s.base.H, fac, -E));
  }
  EXPECT_THROW(admissibility_threshold(s.base.H, fac, 1.0, 0.5), PreconditionError);
}

TEST(Decay, ZeroFactorization) {
  const Mesh mesh = build_mesh(IntervalSpec::finite(0, 1), 20);
  const auto s = split(mesh, named_family("laplace"), BoundaryCondition::dirichlet(), BoundaryCondition::dirichlet());
  FactoredPerturbation fac;
  fac.A = MatC::Zero(3, s.base.size());
  fac.B = MatC::Zero(3, s.base.size());
  const auto prof = decay_profile(s.base.H, fac, {1.0, 10.0, 100.0});
  for (const auto& row : prof.rows) {
    EXPECT_EQ(row.normK, 0.0);
    EXPECT_EQ(row.normA, 0.0);
    EXPECT_EQ(row.integral, 0.0);
  }
}

TEST(Decay, RejectsBadGrid) {
  const MatC H = MatC::Identity(2, 2);
  FactoredPerturbation f;
  f.A = f.B = MatC::Identity(2, 2);
  EXPECT_THROW(decay_profile(H, f, {10.0, 1.0}), PreconditionError);
  EXPECT_THROW(decay_profile(H, f, {0.0, 1.0}), PreconditionError);
}

TEST(Decay, PairsDecayAndTripleStalls) {
  const Mesh mesh = build_mesh(IntervalSpec::finite(0, 0.5), 200);
  const auto f = named_family("complex_constant");
  const auto s = split(mesh, f, BoundaryCondition::neumann(), BoundaryCondition::dirichlet());
  const auto E = log_grid(1e2, 1e6, 2);
  DecayOptions opt;
  opt.integral_nodes = 0;

  const auto qr = decay_profile(s.base.H, build_factorization(s.base, s.coeffs, FactorVariant::qr_pair), E, opt);
  EXPECT_LE(qr.slope, -0.2);
  EXPECT_TRUE(qr.monotone);

  // s_pair perturbs L_{p,q,r,0}.
  const auto mid = assemble_operator(mesh, restrict_coefficients(f, true, true, false), BoundaryCondition::neumann(),
                                     BoundaryCondition::dirichlet());
  const auto sp = decay_profile(mid.H, build_factorization(mid, s.coeffs, FactorVariant::s_pair), E, opt);
  EXPECT_LE(sp.slope, -0.2);
  EXPECT_TRUE(sp.monotone);

  const auto tri = decay_profile(s.base.H, build_factorization(s.base, s.coeffs, FactorVariant::full_triple), E, opt);
  double lo = 1e300, hi = 0.0;
  for (const auto& row : tri.rows) {
    lo = std::min(lo, row.normB);
    hi = std::max(hi, row.normB);
  }
  EXPECT_GE(lo, 0.5 * hi);
}

TEST(Decay, IntegralMatchesDirectQuadratureForScalar) {
  // H = [h], A = B = [1]: integrand lambda^{-1} (h + lambda + E)^{-1}.
  const double h = 2.0, E = 3.0, R = 1.0, Rmax = 1e4;
  MatC H(1, 1);
  H(0, 0) = h;
  FactoredPerturbation f;
  f.A = f.B = MatC::Ones(1, 1);
  DecayOptions opt;
  opt.R = R;
  opt.R_max = Rmax;
  opt.integral_nodes = 40;
  const auto prof = decay_profile(H, f, {E}, opt);
  const double c = h + E;
  const double exact = (std::log(Rmax / R) - std::log((Rmax + c) / (R + c))) / c;
  EXPECT_NEAR(prof.rows[0].integral, exact, 1e-10);
  EXPECT_NEAR(prof.rows[0].normK, 1.0 / c, 1e-15);
}
