/// Thermoelastic and Maxwell systems, discrete curl, Helmholtz splitting.
#include "homlab/applications.hpp"
#include "homlab/evo.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace homlab;
using F = StaggeredGrid::Family;

namespace {

constexpr Real pi = std::numbers::pi;

ThermoFields constant_fields(const GridDomain& dom, Real c, Real gamma, Real w = 1.0)
{
    const int d = dom.dim();
    ThermoFields f;
    f.rho0 = RVec::Constant(dom.num_cells(), 1.0);
    f.w = RVec::Constant(dom.num_cells(), w);
    f.stiffness = CoefficientField<Real>::constant(dom, c * RMat::Identity(d, d));
    f.conductivity = CoefficientField<Real>::constant(dom, 2.0 * RMat::Identity(d, d));
    f.coupling = gamma;
    return f;
}

ThermoFields random_fields(const GridDomain& dom, Real gamma, std::mt19937_64& rng)
{
    std::uniform_real_distribution<Real> u(1.0, 2.0), s(-0.2, 0.2);
    const int d = dom.dim();
    auto spd = [&](const Point&) {
        RMat m = RMat::Identity(d, d) * u(rng);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < i; ++j) m(i, j) = m(j, i) = s(rng);
        return m;
    };
    ThermoFields f;
    f.rho0 = RVec::NullaryExpr(dom.num_cells(), [&] { return u(rng); });
    f.w = RVec::NullaryExpr(dom.num_cells(), [&] { return u(rng); });
    f.stiffness = CoefficientField<Real>::from_function(dom, spd);
    f.conductivity = CoefficientField<Real>::from_function(dom, spd);
    f.coupling = gamma;
    return f;
}

ExperimentOptions options(std::vector<Index> n_list, Index cells_per_period, Real tol)
{
    ExperimentOptions o;
    o.n_list = std::move(n_list);
    o.mesh.cells_per_period = cells_per_period;
    o.tolerance = tol;
    return o;
}

Real sparse_max(const SpMat<Real>& m)
{
    return m.nonZeros() ? Eigen::Map<const RVec>(m.valuePtr(), m.nonZeros()).cwiseAbs().maxCoeff() : 0.0;
}

} // namespace

TEST(Thermo, BlockDimensions1D)
{
    const auto sys = assemble_thermo(GridDomain::unit(1, 8), constant_fields(GridDomain::unit(1, 8), 2.0, 0.5), 1.0);
    const std::array<Index, 4> dims{7, 8, 7, 8};
    EXPECT_EQ(sys.block_dims(), dims);
    EXPECT_EQ(sys.space().dim(), 30);
    EXPECT_GT(sys.coercivity, 0.0);
}

TEST(Thermo, SkewAndKernel)
{
    const auto sys = assemble_thermo(GridDomain::unit(1, 8), constant_fields(GridDomain::unit(1, 8), 2.0, 0.5), 1.0);
    const auto a = skew_split(sys.a);
    // Dirichlet grad is injective; each div block has a one-dimensional kernel.
    EXPECT_EQ(a.kernel().dim().value(), 2);
    EXPECT_EQ(a.range().dim().value(), 28);
}

TEST(Thermo, UncoupledM0IsBlockDiagonal)
{
    const auto dom = GridDomain::unit(2, 4);
    const auto sys = assemble_thermo(dom, constant_fields(dom, 2.0, 0.0), 1.0);
    EXPECT_EQ(sparse_max(sys.coupling_op), 0.0);
    const auto rep = congruence_diagonalize(sys);
    SpMat<Real> eye(sys.space().dim(), sys.space().dim());
    eye.setIdentity();
    EXPECT_EQ(sparse_max(SpMat<Real>(rep.s.sparse_matrix() - eye)), 0.0);
    EXPECT_TRUE(rep.passed());
}

TEST(Thermo, CoupledTemperatureBlock)
{
    const auto dom = GridDomain::unit(1, 8);
    const auto sys = assemble_thermo(dom, constant_fields(dom, 2.0, 0.7, 1.0), 1.0);
    const Index o = sys.offset(2), n = sys.block_dims()[2];
    const RMat m0 = sys.m0.to_dense().block(o, o, n, n);
    const RVec row = m0 * RVec::Ones(n);
    // Interior nodes see both neighbouring cells: w + Gamma^2 / C.
    for (Index i = 1; i + 1 < n; ++i) EXPECT_NEAR(row(i), 1.0 + 0.245, 1e-12) << i;
    const auto rep = congruence_diagonalize(sys);
    EXPECT_TRUE(rep.passed());
}

TEST(ThermoProperty, CongruenceOnRandomFields)
{
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 10; ++trial) {
        const auto dom = GridDomain::unit(1 + trial % 2, 5);
        const auto sys = assemble_thermo(dom, random_fields(dom, 0.3 + 0.1 * trial, rng), 1.0);
        const auto rep = congruence_diagonalize(sys);
        EXPECT_LT(rep.m0_defect, 1e-9);
        EXPECT_LT(rep.m1_defect, 1e-9);
        EXPECT_LT(rep.a_defect, 1e-9);
        EXPECT_LT(rep.a_skew, 1e-9);
    }
}

TEST(Thermo, BlockSolveMatchesMonolithic)
{
    std::mt19937_64 rng(9);
    const auto dom = GridDomain::unit(2, 6);
    const auto sys = assemble_thermo(dom, random_fields(dom, 0.5, rng), 1.0);
    const RVec f = gaussian_vector<Real>(sys.space().dim(), rng);
    const auto r = block_solve(sys.t, skew_split(sys.a), f);
    EXPECT_LT(r.residual, 1e-9);
    EXPECT_LT(r.direct_diff, 1e-8);
}

TEST(Thermo, ResolventBoundsHold)
{
    const auto dom = GridDomain::unit(1, 8);
    const auto sys = assemble_thermo(dom, constant_fields(dom, 2.0, 0.7), 1.5);
    EXPECT_TRUE(resolvent_bounds(sys.t, skew_split(sys.a)).holds());
}

TEST(Thermo, LambdaBelowThresholdSuggestsMinimum)
{
    const auto dom = GridDomain::unit(1, 8);
    try {
        assemble_thermo(dom, constant_fields(dom, 2.0, 0.5), 0.01, 1.0);
        FAIL() << "expected CoercivityError";
    } catch (const CoercivityError& e) {
        EXPECT_NE(std::string(e.what()).find("try lambda"), std::string::npos);
    }
}

TEST(Thermo, RejectsNonPositiveDensity)
{
    const auto dom = GridDomain::unit(1, 8);
    auto f = constant_fields(dom, 2.0, 0.5);
    f.rho0(3) = 0.0;
    EXPECT_THROW(assemble_thermo(dom, f, 1.0), CoercivityError);
}

TEST(ThermoHomogenization, ConstantSequence)
{
    ThermoSequence s;
    s.stiffness = CoefficientSequence<Real>::laminate(1, [](Real) { return 2.0; }, Bounds{2.0, 2.0});
    s.conductivity = CoefficientSequence<Real>::laminate(1, [](Real) { return 3.0; }, Bounds{3.0, 3.0});
    s.rho0 = [](Real) { return 1.0; };
    s.w = [](Real) { return 1.0; };
    s.coupling = 0.5;
    s.stiffness_limit = RMat::Constant(1, 1, 2.0);
    s.conductivity_limit = RMat::Constant(1, 1, 3.0);
    const auto rep = thermo_homogenization_experiment(s, 1.0, 1, options({1, 2}, 8, 5e-2));
    for (const auto& r : rep.rows) {
        EXPECT_LT(r.resolvent_gap, 1e-10);
        EXPECT_LT(r.w_gap, 1e-12);
    }
}

TEST(ThermoHomogenization, LaminateDecays)
{
    for (Real gamma : {0.0, 0.5, 1.0}) {
        const auto rep =
            thermo_homogenization_experiment(laminate_thermo_sequence(1, gamma), 1.0, 1, options({1, 2, 4, 8, 16}, 32, 5e-2));
        EXPECT_TRUE(rep.passed()) << "gamma " << gamma;
        EXPECT_LT(rep.rows.back().resolvent_gap, 5e-2);
        EXPECT_LT(rep.rows.back().w_gap, rep.rows.front().w_gap);
    }
}

TEST(Curl, ComplexIdentities)
{
    for (Index n : {2, 3, 5}) {
        const auto id = complex_identities(StaggeredGrid(n));
        EXPECT_LT(id.curl_grad, 1e-14);
        EXPECT_LT(id.div_curl, 1e-14);
        EXPECT_EQ(id.adjointness, 0.0);
    }
}

TEST(Curl, GradientsAreCurlFree)
{
    const StaggeredGrid g(5);
    const auto c0 = g.curl0();
    const auto g0 = g.grad0();
    std::mt19937_64 rng(10);
    for (int k = 0; k < 50; ++k) {
        const RVec u = gaussian_vector<Real>(g.size(F::node), rng);
        EXPECT_LT(c0.apply(g0.apply(u)).cwiseAbs().maxCoeff(), 1e-10);
    }
}

TEST(Curl, FourierSymbol)
{
    const Index n = 8;
    const StaggeredGrid g(n);
    const Real h = g.h();
    const int k = 2, l = 3;
    const RVec e = g.sample(F::edge, [&](const Point& x) {
        return DiagonalTensor{0, 0, std::sin(pi * k * x[0]) * std::sin(pi * l * x[1])};
    });
    const RVec expect = g.sample(F::face, [&](const Point& x) {
        const Real sx = 2 * std::sin(pi * k * h / 2) / h, sy = 2 * std::sin(pi * l * h / 2) / h;
        return DiagonalTensor{std::sin(pi * k * x[0]) * sy * std::cos(pi * l * x[1]),
                              -sx * std::cos(pi * k * x[0]) * std::sin(pi * l * x[1]), 0.0};
    });
    EXPECT_LT((g.curl0().apply(e) - expect).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Curl, AdjointInWeightedSpaces)
{
    const StaggeredGrid g(4);
    const auto cp = build_curl(g);
    std::mt19937_64 rng(11);
    const RVec e = gaussian_vector<Real>(g.size(F::edge), rng);
    const RVec f = gaussian_vector<Real>(g.size(F::face), rng);
    const auto he = g.space(F::edge), hf = g.space(F::face);
    EXPECT_NEAR(hf.inner(cp.curl0.apply(e), f), he.inner(e, cp.curl.apply(f)), 1e-10);
}

TEST(Helmholtz, SmallBox)
{
    const auto [dir, neu] = helmholtz_decompose(StaggeredGrid(4));
    EXPECT_EQ(dir.total, 3 * 4 * 3 * 3);
    EXPECT_EQ(dir.dim_sum(), dir.total);
    EXPECT_EQ(*dir.harmonic.dim(), 0);
    EXPECT_EQ(*dir.gradients.dim(), 27);
    EXPECT_TRUE(dir.passed());
    EXPECT_EQ(neu.total, 3 * 3 * 4 * 4);
    EXPECT_EQ(*neu.gradients.dim(), 63);
    EXPECT_EQ(*neu.harmonic.dim(), 0);
    EXPECT_TRUE(neu.passed());
}

TEST(Helmholtz, GradientLandsInGradientBlock)
{
    const StaggeredGrid g(4);
    const auto [dir, neu] = helmholtz_decompose(g);
    std::mt19937_64 rng(12);
    const RVec gu = g.grad0().apply(gaussian_vector<Real>(g.size(F::node), rng));
    const auto he = g.space(F::edge);
    EXPECT_LT(he.norm(RVec(dir.gradients.project(gu) - gu)) / he.norm(gu), 1e-10);
    EXPECT_LT(he.norm(dir.curls.project(gu)) / he.norm(gu), 1e-10);
}

TEST(Helmholtz, MediumBox)
{
    const auto [dir, neu] = helmholtz_decompose(StaggeredGrid(8));
    EXPECT_TRUE(dir.passed());
    EXPECT_TRUE(neu.passed());
}

TEST(Maxwell, SkewAndKernelDims)
{
    const StaggeredGrid g(3);
    const auto sys = MaxwellSystem::constant(g, {2, 2, 2}, {1, 1, 1}, 1.0);
    const auto a = skew_split(sys.a());
    EXPECT_EQ(a.kernel().dim().value(), g.size(F::node) + g.size(F::cell) - 1);
    EXPECT_TRUE(resolvent_bounds(sys.t(), a).holds());
}

TEST(Maxwell, SchurSolveMatchesDirect)
{
    const StaggeredGrid g(4);
    const MaxwellSystem sys(
        g, [](const Point& x) { return DiagonalTensor{1 + x[0], 2, 1}; },
        [](const Point& x) { return DiagonalTensor{1, 1 + x[1], 2}; }, [](const Point&) { return DiagonalTensor{0.5, 0, 0}; },
        1.5);
    std::mt19937_64 rng(13);
    const RVec f = gaussian_vector<Real>(sys.space().dim(), rng);
    const RVec direct = SparseSolver<Real>((sys.t() + sys.a()).sparse_matrix()).solve(f);
    EXPECT_LT((sys.solve(f) - direct).norm() / direct.norm(), 1e-10);
}

TEST(Maxwell, RejectsNonPositive)
{
    EXPECT_THROW(MaxwellSystem::constant(StaggeredGrid(3), {1, -1, 1}, {1, 1, 1}, 1.0), CoercivityError);
}

TEST(MaxwellHomogenization, ConstantCoefficients)
{
    MaxwellSequence s;
    s.eps = [](Real) { return DiagonalTensor{2, 2, 2}; };
    s.mu = [](Real) { return DiagonalTensor{1, 1, 1}; };
    s.sigma = [](Real) { return DiagonalTensor{0.5, 0.5, 0.5}; };
    const auto rep = maxwell_homogenization_experiment(s, 1.0, options({1, 2}, 2, 0.1));
    for (const auto& r : rep.rows) EXPECT_LT(r.resolvent_gap, 1e-10);
    EXPECT_NEAR(rep.eps_lambda[0], 2.5, 1e-12);
    EXPECT_EQ(rep.cells_per_axis, 4);
}

TEST(MaxwellHomogenization, LaminateLimitTensor)
{
    const auto s = laminate_maxwell_sequence();
    const auto mu = laminate_diagonal_limit(s.mu, s.breaks);
    EXPECT_NEAR(mu[0], 4.0 / 3.0, 1e-10);
    EXPECT_NEAR(mu[1], 1.5, 1e-10);
    EXPECT_NEAR(mu[2], 1.5, 1e-10);
}

TEST(MaxwellHomogenization, BoundsViolationNamesN)
{
    auto s = laminate_maxwell_sequence();
    s.bounds = Bounds{1.5, 100.0};
    try {
        maxwell_homogenization_experiment(s, 1.0, options({1}, 4, 0.1));
        FAIL() << "expected CoercivityError";
    } catch (const CoercivityError& e) {
        EXPECT_NE(std::string(e.what()).find("n=1"), std::string::npos);
    }
}
