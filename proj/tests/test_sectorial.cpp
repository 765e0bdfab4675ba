#include "slkato/mesh.hpp"
#include "slkato/sectorial.hpp"

#include <gtest/gtest.h>

using namespace slkato;

namespace {

MatC random_psd(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  MatC g(n, n);
  for (int j = 0; j < n; ++j) g.col(j) = random_complex_gaussian(n, rng);
  return g.adjoint() * g;
}

bool in_sector(cplx w, double gamma, double theta) {
  const cplx d = w - gamma;
  if (std::abs(d) <= 1e-12 * std::max(1.0, std::abs(w))) return true;
  return std::abs(principal_arg(d)) <= theta + 1e-12;
}

}  // namespace

TEST(NumericalRange, HermitianPsdHasZeroAngle) {
  const MatC H = random_psd(12, 3);
  const auto rep = numerical_range_hull(H);
  Eigen::SelfAdjointEigenSolver<MatC> es(H);
  EXPECT_EQ(rep.theta, 0.0);
  EXPECT_NEAR(rep.gamma, es.eigenvalues()(0), 1e-12 * es.eigenvalues().maxCoeff());
  EXPECT_TRUE(rep.accretive);
  EXPECT_TRUE(rep.sectorial);
}

TEST(NumericalRange, ImaginaryAxisIsNotSectorial) {
  const MatC H = cplx(0, 1) * random_psd(8, 5);
  const auto rep = numerical_range_hull(H);
  // Re(range) = 0: on the boundary of the closed half-plane, no sector of angle < pi/2.
  EXPECT_FALSE(rep.sectorial);
  EXPECT_DOUBLE_EQ(rep.theta, pi / 2);
  EXPECT_LE(std::abs(rep.min_re), 1e-12 * rep.max_abs_im);
}

TEST(NumericalRange, ComplexPRespectsEllipticityBound) {
  const Mesh mesh = build_mesh(IntervalSpec::finite(0, 1), 64);
  CoefficientFunctions f;
  f.p = constant_fn(cplx(1.0, 0.5));
  const auto op = assemble_operator(mesh, f, BoundaryCondition::dirichlet(), BoundaryCondition::dirichlet());
  const auto rep = numerical_range_hull(op.H);
  // About the vertex 0 every point is (1 + 0.5i) * positive.
  const SectorFit about_zero = fit_sector(rep.samples, 0.0);
  EXPECT_LE(std::tan(about_zero.theta), std::abs(cplx(1.0, 0.5)) / 1.0 + 1e-12);
  EXPECT_NEAR(std::tan(about_zero.theta), 0.5, 1e-10);
  EXPECT_TRUE(rep.accretive);
  EXPECT_TRUE(rep.sectorial);
}

TEST(NumericalRange, SamplesLieInFittedSector) {
  std::mt19937_64 rng(17);
  MatC H(10, 10);
  for (int j = 0; j < 10; ++j) H.col(j) = random_complex_gaussian(10, rng);
  const auto rep = numerical_range_hull(H);
  for (const cplx& w : rep.samples) EXPECT_TRUE(in_sector(w, rep.gamma, rep.theta)) << w;
}

TEST(NumericalRange, ShiftCovariance) {
  std::mt19937_64 rng(23);
  MatC H(9, 9);
  for (int j = 0; j < 9; ++j) H.col(j) = random_complex_gaussian(9, rng);
  H += 6.0 * MatC::Identity(9, 9);
  const double c = 2.5;
  const auto a = numerical_range_hull(H);
  const auto b = numerical_range_hull(H + c * MatC::Identity(9, 9));
  EXPECT_NEAR(b.gamma, a.gamma + c, 1e-10);
  EXPECT_NEAR(b.theta, a.theta, 1e-10);
}

TEST(NumericalRange, RejectsEmptySampling) {
  RangeOptions opt;
  opt.n_samples = 0;
  EXPECT_THROW(numerical_range_hull(MatC::Identity(3, 3), opt), PreconditionError);
}

TEST(FitSector, VertexRule) {
  const std::vector<cplx> pts = {{1, 0}, {3, 1}, {3, -1}};
  const auto fit = fit_sector(pts);
  EXPECT_DOUBLE_EQ(fit.gamma, -1.0);
  EXPECT_NEAR(fit.theta, std::atan(0.25), 1e-15);
}

TEST(MAccretive, ZeroMatrix) {
  const MatC H = MatC::Zero(4, 4);
  const std::vector<cplx> grid = {{1, 0}, {1, 2}, {0.1, -3}, {5, 5}};
  const auto chk = check_m_accretive(H, grid);
  EXPECT_TRUE(chk.ok);
  for (std::size_t i = 0; i < grid.size(); ++i)
    EXPECT_NEAR(chk.ratios[i], grid[i].real() / std::abs(grid[i]), 1e-10);
}

TEST(MAccretive, HermitianPsd) {
  const MatC H = random_psd(10, 9);
  std::vector<cplx> grid;
  for (double t : log_grid(1e-2, 1e2, 4)) grid.emplace_back(t, 0.0);
  const auto chk = check_m_accretive(H, grid);
  EXPECT_TRUE(chk.ok);
  EXPECT_LE(chk.worst_ratio, 1.0 + 1e-9);
}

TEST(MAccretive, NonAccretiveFails) {
  MatC H = MatC::Zero(2, 2);
  H(0, 0) = -1.0;
  H(1, 1) = 1.0;
  const auto chk = check_m_accretive(H, {cplx(0.8, 0.0)});
  EXPECT_FALSE(chk.ok);
  EXPECT_NEAR(chk.worst_ratio, 4.0, 1e-9);  // |(-1 + 0.8)^{-1}| * 0.8
  const auto singular = check_m_accretive(H, {cplx(1.0, 0.0)});
  EXPECT_FALSE(singular.ok);
  EXPECT_TRUE(std::isinf(singular.worst_ratio));
}

TEST(MAccretive, RejectsLeftHalfPlaneGrid) {
  EXPECT_THROW(check_m_accretive(MatC::Identity(2, 2), {cplx(-1, 0)}), PreconditionError);
}

TEST(MAccretive, AssembledOperatorAfterShift) {
  const Mesh mesh = build_mesh(IntervalSpec::finite(0, 1), 48);
  CoefficientFunctions f;
  f.p = constant_fn(cplx(1.0, 0.3));
  f.q = constant_fn(cplx(-2.0, 1.0));
  f.r = constant_fn(cplx(1.0, -0.5));
  f.s = constant_fn(cplx(0.5, 0.5));
  const auto op = assemble_operator(mesh, f, BoundaryCondition::neumann(), BoundaryCondition::dirichlet());
  const auto rep = numerical_range_hull(op.H);
  MatC shifted = op.H;
  shifted.diagonal().array() += std::max(0.0, -rep.min_re) + 1.0;
  std::vector<cplx> grid;
  for (double re : {0.1, 1.0, 10.0})
    for (double im : {-10.0, 0.0, 10.0}) grid.emplace_back(re, im);
  EXPECT_TRUE(check_m_accretive(shifted, grid).ok);
}

TEST(SectorDiagnostics, IdentityHasUnitPositiveType) {
  const MatC H = MatC::Identity(5, 5);
  const auto d = sector_diagnostics(H, log_grid(1e-3, 1e3, 4), pi / 4, sector_complement_samples(pi / 4, {0.1, 1, 10}));
  EXPECT_NEAR(d.M_A, 1.0, 1e-10);
  EXPECT_FALSE(d.blow_up);
}

TEST(SectorDiagnostics, SpectrumInOneTwo) {
  VecC ev(4);
  ev << 1.0, 1.3, 1.7, 2.0;
  const MatC H = ev.asDiagonal();
  std::vector<double> t_grid = {0.0};
  for (double t : log_grid(1e-2, 1e3, 8)) t_grid.push_back(t);
  const auto d = sector_diagnostics(H, t_grid, pi / 2, {});
  double exact = 0.0;
  for (double t : t_grid) exact = std::max(exact, (1 + t) / (1 + t));  // worst eigenvalue is 1
  EXPECT_NEAR(d.M_A, exact, 1e-9);
  EXPECT_LE(d.M_A, 2.0);
}

TEST(SectorDiagnostics, AngleBlowUp) {
  VecC ev(2);
  ev << 1.0, std::polar(1.0, 0.6);
  const MatC H = ev.asDiagonal();
  const std::vector<double> radii = {0.1, 1.0, 10.0};
  const auto above = sector_diagnostics(H, {0.0, 1.0}, 0.7, sector_complement_samples(0.7, radii));
  EXPECT_FALSE(above.blow_up);
  EXPECT_TRUE(std::isfinite(above.M_angle));
  EXPECT_NEAR(above.theta, 0.6, 1e-12);
  const auto below = sector_diagnostics(H, {0.0, 1.0}, 0.5, sector_complement_samples(0.5, radii));
  EXPECT_TRUE(below.blow_up);
}

TEST(SectorDiagnostics, RejectsSpectrumOnCut) {
  VecC ev(2);
  ev << -1.0, 2.0;
  const MatC H = ev.asDiagonal();
  EXPECT_THROW(sector_diagnostics(H, {1.0}, 1.0, {}), SpectrumError);
}

TEST(InverseNorm, MatchesSvd) {
  std::mt19937_64 rng(31);
  MatC a(12, 12);
  for (int j = 0; j < 12; ++j) a.col(j) = random_complex_gaussian(12, rng);
  a += 8.0 * MatC::Identity(12, 12);
  PowerOptions opt;
  opt.iterations = 500;
  opt.tolerance = 1e-14;
  EXPECT_NEAR(inverse_norm_power(a, opt), 1.0 / min_singular(a), 1e-8 / min_singular(a));
}
