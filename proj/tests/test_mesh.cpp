#include "slkato/matfun.hpp"
#include "slkato/mesh.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace slkato;

namespace {

CoefficientFunctions smooth_family() {
  CoefficientFunctions f;
  f.name = "smooth";
  f.p = [](double x, double) { return cplx(1.5 + 0.5 * std::sin(3 * x), 0.3 * std::cos(x)); };
  f.q = [](double x, double) { return cplx(std::cos(2 * x), -0.5 * x); };
  f.r = [](double x, double) { return cplx(x * x, 0.2); };
  f.s = [](double x, double) { return cplx(-0.7, std::sin(x)); };
  return f;
}

// Independent evaluation of the sesquilinear form on P1 interpolants: each cell
// is integrated by a composite trapezoid rule with the exact coefficient functions.
cplx form_by_quadrature(const Mesh& mesh, const CoefficientFunctions& c, const BoundaryCondition& left,
                        const BoundaryCondition& right, const VecC& g_nodes, const VecC& f_nodes) {
  const int sub = 64;
  cplx total = 0.0;
  for (int k = 0; k < mesh.n_cells(); ++k) {
    const double x0 = mesh.nodes[k], hk = mesh.width(k);
    const cplx df = (f_nodes(k + 1) - f_nodes(k)) / hk;
    const cplx dg = (g_nodes(k + 1) - g_nodes(k)) / hk;
    for (int j = 0; j <= sub; ++j) {
      const double t = static_cast<double>(j) / sub;
      const double x = x0 + t * hk;
      const double wt = (j == 0 || j == sub ? 0.5 : 1.0) * hk / sub;
      const cplx f = (1 - t) * f_nodes(k) + t * f_nodes(k + 1);
      const cplx g = (1 - t) * g_nodes(k) + t * g_nodes(k + 1);
      total += wt * (std::conj(dg) * c.p(x, hk) * df + std::conj(g) * c.r(x, hk) * df +
                     std::conj(dg) * c.s(x, hk) * f + std::conj(g) * c.q(x, hk) * f);
    }
  }
  if (!left.is_dirichlet()) total -= left.cot_theta() * std::conj(g_nodes(0)) * f_nodes(0);
  const auto last = g_nodes.size() - 1;
  if (!right.is_dirichlet()) total -= right.cot_theta() * std::conj(g_nodes(last)) * f_nodes(last);
  return total;
}

double min_numerical_range_real(const MatC& H) {
  Eigen::SelfAdjointEigenSolver<MatC> es(hermitian_part(H));
  return es.eigenvalues()(0);
}

}  // namespace

TEST(BuildMesh, FiniteInterval) {
  const Mesh m = build_mesh(IntervalSpec::finite(0, 1), 4);
  ASSERT_EQ(m.n_nodes(), 5);
  const double expected[] = {0, 0.25, 0.5, 0.75, 1};
  for (int i = 0; i < 5; ++i) EXPECT_DOUBLE_EQ(m.nodes[i], expected[i]);
  EXPECT_DOUBLE_EQ(m.h, 0.25);
}

TEST(BuildMesh, TruncatedIntervals) {
  const Mesh half = build_mesh(IntervalSpec::half_line(0, 10), 100);
  EXPECT_DOUBLE_EQ(half.left(), 0.0);
  EXPECT_DOUBLE_EQ(half.right(), 10.0);
  EXPECT_NEAR(half.h, 0.1, 1e-15);
  const Mesh full = build_mesh(IntervalSpec::full_line(5), 10);
  EXPECT_DOUBLE_EQ(full.left(), -5.0);
  EXPECT_DOUBLE_EQ(full.right(), 5.0);
  EXPECT_DOUBLE_EQ(full.h, 1.0);
  for (int i = 1; i < full.n_nodes(); ++i) EXPECT_LT(full.nodes[i - 1], full.nodes[i]);
}

TEST(BuildMesh, RejectsBadInput) {
  EXPECT_THROW(build_mesh(IntervalSpec::finite(0, 1), 1), PreconditionError);
  EXPECT_THROW(build_mesh(IntervalSpec::finite(0, 1), 0), PreconditionError);
  EXPECT_THROW(build_mesh(IntervalSpec::finite(1, 1), 4), PreconditionError);
  EXPECT_THROW(build_mesh(IntervalSpec::half_line(0, -1), 4), PreconditionError);
}

TEST(AssembleForms, SingleHatFunction) {
  const Mesh m = build_mesh(IntervalSpec::finite(0, 1), 2);
  const auto forms = assemble_forms(m, sample_coefficients(m, {}), BoundaryCondition::dirichlet(),
                                    BoundaryCondition::dirichlet());
  ASSERT_EQ(forms.n_dof(), 1);
  EXPECT_DOUBLE_EQ(forms.K0(0, 0).real(), 4.0);
  EXPECT_DOUBLE_EQ(forms.K0(0, 0).imag(), 0.0);
  EXPECT_DOUBLE_EQ(forms.mass_lumped(0), 0.5);
}

TEST(AssembleForms, ConstantPotentialIsScaledMass) {
  const Mesh m = build_mesh(IntervalSpec::finite(-1, 2), 17);
  CoefficientFunctions f;
  const cplx c(2.5, -0.75);
  f.q = constant_fn(c);
  const auto forms =
      assemble_forms(m, sample_coefficients(m, f), BoundaryCondition::neumann(), BoundaryCondition::dirichlet());
  const MatC expected = c * forms.mass_matrix().cast<cplx>();
  EXPECT_LE((forms.K3 - expected).norm(), 1e-15 * expected.norm());
}

TEST(AssembleForms, NeumannHasNoBoundaryTerm) {
  const Mesh m = build_mesh(IntervalSpec::finite(0, 1), 8);
  const auto forms =
      assemble_forms(m, sample_coefficients(m, {}), BoundaryCondition::neumann(), BoundaryCondition::neumann());
  EXPECT_EQ(forms.Bdry.norm(), 0.0);
  EXPECT_EQ(forms.n_dof(), 9);
}

TEST(AssembleForms, RobinBoundaryIsRankTwoOnBoundaryDofs) {
  const Mesh m = build_mesh(IntervalSpec::finite(0, 1), 8);
  const BoundaryCondition a = BoundaryCondition::robin(cplx(1.0, 0.5));
  const BoundaryCondition b = BoundaryCondition::robin(pi / 4);
  const auto forms = assemble_forms(m, sample_coefficients(m, {}), a, b);
  const int n = forms.n_dof();
  EXPECT_LE(std::abs(forms.Bdry(0, 0) + cot(cplx(1.0, 0.5))), 1e-15);
  EXPECT_NEAR(forms.Bdry(n - 1, n - 1).real(), -1.0, 1e-15);
  MatC rest = forms.Bdry;
  rest(0, 0) = rest(n - 1, n - 1) = 0.0;
  EXPECT_EQ(rest.norm(), 0.0);
}

TEST(AssembleForms, DirichletNeverEvaluatesCotangent) {
  EXPECT_THROW(BoundaryCondition::dirichlet().cot_theta(), PreconditionError);
  const Mesh m = build_mesh(IntervalSpec::finite(0, 1), 4);
  EXPECT_NO_THROW(assemble_forms(m, sample_coefficients(m, {}), BoundaryCondition::dirichlet(),
                                 BoundaryCondition::dirichlet()));
}

TEST(AssembleForms, RejectsThetaOutsideStrip) {
  const Mesh m = build_mesh(IntervalSpec::finite(0, 1), 4);
  EXPECT_THROW(assemble_forms(m, sample_coefficients(m, {}), BoundaryCondition::robin(-0.1),
                              BoundaryCondition::dirichlet()),
               PreconditionError);
  EXPECT_THROW(assemble_forms(m, sample_coefficients(m, {}), BoundaryCondition::robin(pi),
                              BoundaryCondition::dirichlet()),
               PreconditionError);
}

TEST(AssembleForms, MassIsPositiveDefinite) {
  const Mesh m = build_mesh(IntervalSpec::finite(0, 1), 12);
  const auto forms =
      assemble_forms(m, sample_coefficients(m, {}), BoundaryCondition::neumann(), BoundaryCondition::neumann());
  Eigen::SelfAdjointEigenSolver<MatR> es(forms.mass_consistent);
  EXPECT_GT(es.eigenvalues()(0), 0.0);
  EXPECT_GT(forms.mass_lumped.minCoeff(), 0.0);
  // Row sums of the consistent mass are the lumped mass.
  EXPECT_LE((forms.mass_consistent.rowwise().sum() - forms.mass_lumped).norm(), 1e-15);
}

TEST(AssembleForms, FormConsistencyWithQuadrature) {
  const auto family = smooth_family();
  const BoundaryCondition a = BoundaryCondition::robin(cplx(0.7, 0.2));
  const BoundaryCondition b = BoundaryCondition::neumann();
  std::mt19937_64 rng(7);
  double prev = 0.0;
  for (int n : {16, 32, 64}) {
    const Mesh m = build_mesh(IntervalSpec::finite(0, 2), n);
    const auto forms = assemble_forms(m, sample_coefficients(m, family), a, b);
    // Only the lumped potential is not exact on interpolants; replace it by the
    // consistent potential in the oracle comparison via the relative tolerance.
    double worst = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
      const VecC f = random_complex_gaussian(m.n_nodes(), rng);
      const VecC g = random_complex_gaussian(m.n_nodes(), rng);
      const cplx assembled = g.dot(forms.total() * f);
      const cplx oracle = form_by_quadrature(m, family, a, b, g, f);
      worst = std::max(worst, std::abs(assembled - oracle) / std::abs(oracle));
    }
    EXPECT_LE(worst, 2.0 * m.h) << "n=" << n;
    prev = worst;
  }
  EXPECT_GT(prev, 0.0);
}

TEST(Orthonormalize, DirichletLaplacianEigenvalues) {
  const int n = 40;
  const Mesh m = build_mesh(IntervalSpec::finite(0, pi), n);
  const auto op = assemble_operator(m, {}, BoundaryCondition::dirichlet(), BoundaryCondition::dirichlet());
  ASSERT_TRUE(is_hermitian(op.H));
  Eigen::SelfAdjointEigenSolver<MatC> es(op.H);
  for (int k = 1; k < n; ++k) {
    const double expected = 4.0 / (m.h * m.h) * std::pow(std::sin(k * m.h / 2), 2);
    EXPECT_NEAR(es.eigenvalues()(k - 1), expected, 1e-10 * expected);
  }
}

TEST(Orthonormalize, RealPIsHermitianForAnyTheta) {
  const Mesh m = build_mesh(IntervalSpec::finite(0, 1), 10);
  CoefficientFunctions f;
  f.p = [](double x, double) { return cplx(1 + x * x); };
  for (double th : {0.0, 0.3, pi / 2, 2.5}) {
    const auto op = assemble_operator(m, f, BoundaryCondition::robin(th), BoundaryCondition::robin(th));
    EXPECT_TRUE(is_hermitian(op.H)) << "theta=" << th;
  }
}

TEST(Orthonormalize, SelfAdjointHasNonnegativeRange) {
  const Mesh m = build_mesh(IntervalSpec::finite(0, 1), 20);
  const auto op = assemble_operator(m, {}, BoundaryCondition::neumann(), BoundaryCondition::dirichlet());
  EXPECT_GE(min_numerical_range_real(op.H), -1e-10);
}

TEST(Orthonormalize, ComplexPSectorBound) {
  const Mesh m = build_mesh(IntervalSpec::finite(0, 1), 32);
  CoefficientFunctions f;
  f.p = constant_fn(cplx(1.0, 0.5));
  const auto forms =
      assemble_forms(m, sample_coefficients(m, f), BoundaryCondition::dirichlet(), BoundaryCondition::dirichlet());
  const auto op = orthonormalize(forms);
  const double ratio = std::abs(cplx(1.0, 0.5)) / 1.0;
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const VecC v = random_complex_gaussian(op.size(), rng);
    const cplx w = v.dot(op.H * v);
    EXPECT_LE(std::abs(w.imag()), ratio * w.real() * (1 + 1e-12));
  }
}

TEST(Orthonormalize, ConsistentMassMatchesDefinition) {
  const Mesh m = build_mesh(IntervalSpec::finite(0, 1), 12);
  const auto forms = assemble_forms(m, sample_coefficients(m, smooth_family()), BoundaryCondition::neumann(),
                                    BoundaryCondition::dirichlet());
  const auto op = orthonormalize(forms, MassTreatment::consistent);
  // M^{1/2} H M^{1/2} = S
  const MatC back = op.mass_sqrt * op.H * op.mass_sqrt;
  EXPECT_LE((back - forms.total()).norm(), 1e-11 * forms.total().norm());
  EXPECT_LE((op.mass_sqrt * op.mass_sqrt - forms.mass_consistent).norm(), 1e-13);
}

TEST(Invariants, AdjointSymmetry) {
  const auto family = smooth_family();
  const Mesh m = build_mesh(IntervalSpec::finite(0, 1.5), 24);
  const BoundaryCondition a = BoundaryCondition::robin(cplx(1.0, 0.5));
  const BoundaryCondition b = BoundaryCondition::robin(cplx(0.4, -0.3));
  const auto op = assemble_operator(m, family, a, b);
  const auto adj = assemble_operator(m, adjoint_coefficients(family), a.conjugate(), b.conjugate());
  EXPECT_LE((adj.H - op.H.adjoint()).norm(), 1e-13 * op.H.norm());
}

TEST(Invariants, HermitianReduction) {
  const Mesh m = build_mesh(IntervalSpec::finite(0, 1), 24);
  CoefficientFunctions f;
  f.p = [](double x, double) { return cplx(2 + std::sin(x)); };
  f.q = [](double x, double) { return cplx(x - 0.5); };
  f.r = [](double x, double) { return cplx(std::cos(4 * x)); };
  f.s = f.r;  // s = conj(r) for real r
  const auto op = assemble_operator(m, f, BoundaryCondition::robin(0.8), BoundaryCondition::neumann());
  EXPECT_TRUE(is_hermitian(op.H));
  // Complex r with s = conj(r) is Hermitian as well.
  f.r = [](double x, double) { return cplx(x, 1 - x); };
  f.s = [](double x, double) { return cplx(x, -(1 - x)); };
  const auto op2 = assemble_operator(m, f, BoundaryCondition::robin(0.8), BoundaryCondition::neumann());
  EXPECT_LE((op2.H - op2.H.adjoint()).norm(), 1e-14 * op2.H.norm());
}

TEST(Invariants, DirichletMonotonicity) {
  const Mesh m = build_mesh(IntervalSpec::finite(0, 1), 24);
  const auto family = smooth_family();
  const BoundaryCondition robin = BoundaryCondition::robin(cplx(0.9, 0.1));
  const double free_min = min_numerical_range_real(assemble_operator(m, family, robin, robin).H);
  const double one_min =
      min_numerical_range_real(assemble_operator(m, family, BoundaryCondition::dirichlet(), robin).H);
  const double both_min = min_numerical_range_real(
      assemble_operator(m, family, BoundaryCondition::dirichlet(), BoundaryCondition::dirichlet()).H);
  EXPECT_GE(one_min, free_min - 1e-12);
  EXPECT_GE(both_min, one_min - 1e-12);
}

TEST(W12Norm, UnitGramIsStiffnessPlusMass) {
  const Mesh m = build_mesh(IntervalSpec::finite(0, 1), 10);
  const auto bc = BoundaryCondition::neumann();
  const auto forms = assemble_forms(m, sample_coefficients(m, {}), bc, bc);
  const MatR g = w12_norm_matrix(m, bc, bc, 1.0);
  EXPECT_LE((g - forms.K0.real() - forms.mass_matrix()).norm(), 1e-14);
  // Constants have no derivative part.
  const VecR ones = VecR::Ones(forms.n_dof());
  EXPECT_NEAR(ones.dot(g * ones), ones.dot(forms.mass_matrix() * ones), 1e-13);
  EXPECT_THROW(w12_norm_matrix(m, bc, bc, 0.0), PreconditionError);
}

TEST(W12Norm, HatFunctionStiffness) {
  const Mesh m = build_mesh(IntervalSpec::finite(0, 1), 2);
  const auto d = BoundaryCondition::dirichlet();
  const MatR g = w12_norm_matrix(m, d, d, 1e-300);
  EXPECT_DOUBLE_EQ(g(0, 0), 4.0);
}

TEST(W12Norm, OrthonormalGramMatchesSelfAdjointOperator) {
  const Mesh m = build_mesh(IntervalSpec::finite(0, 1), 30);
  const auto d = BoundaryCondition::dirichlet();
  const auto op = assemble_operator(m, {}, d, d);
  MatC shifted = op.H;
  shifted.diagonal().array() += 2.0;
  EXPECT_EQ((w12_norm_orthonormal(op, 2.0) - shifted).norm(), 0.0);
}
