/// Laminate means, cell problems and the oscillation/mesh convergence experiments.
#include "homlab/homogenize.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace homlab;

namespace {

constexpr Real pi = std::numbers::pi;

ExperimentOptions options(std::vector<Index> n_list, Index cells_per_period, Real tol = 2e-2)
{
    ExperimentOptions o;
    o.n_list = std::move(n_list);
    o.mesh.cells_per_period = cells_per_period;
    o.tolerance = tol;
    return o;
}

RMat one_by_one(Real v) { return RMat::Constant(1, 1, v); }

} // namespace

TEST(LaminateLimit, TwoPhaseEqualVolume)
{
    const auto m = laminate_limit<Real>(two_phase_profile(1.0, 4.0, 0.5), {0.5});
    EXPECT_NEAR(m.harmonic, 1.6, 1e-10);
    EXPECT_NEAR(m.arithmetic, 2.5, 1e-10);
}

TEST(LaminateLimit, Constant)
{
    const auto m = laminate_limit<Real>([](Real) { return 3.25; });
    EXPECT_NEAR(m.harmonic, 3.25, 1e-12);
    EXPECT_NEAR(m.arithmetic, 3.25, 1e-12);
}

TEST(LaminateLimit, SineProfile)
{
    const auto m = laminate_limit<Real>(sine_profile(2.0, 1.0));
    EXPECT_NEAR(m.harmonic, std::sqrt(3.0), 1e-10);
    EXPECT_NEAR(m.arithmetic, 2.0, 1e-10);
}

TEST(LaminateLimit, TensorPrediction)
{
    const RMat a = laminate_tensor<Real>(3, {1.6, 2.5});
    RMat expect = RMat::Identity(3, 3) * 2.5;
    expect(0, 0) = 1.6;
    EXPECT_EQ(a, expect);
}

TEST(LaminateLimitProperty, HarmonicBelowArithmetic)
{
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<Real> val(0.5, 5.0), cut(0.05, 0.95);
    for (int trial = 0; trial < 50; ++trial) {
        const Real lo = val(rng), hi = val(rng), frac = cut(rng);
        const auto m = laminate_limit<Real>(two_phase_profile(lo, hi, frac), {frac});
        EXPECT_LE(m.harmonic, m.arithmetic + 1e-12);
        EXPECT_NEAR(m.harmonic, 1.0 / (frac / lo + (1 - frac) / hi), 1e-10);
        EXPECT_NEAR(m.arithmetic, frac * lo + (1 - frac) * hi, 1e-10);
        const auto c = laminate_limit<Real>(two_phase_profile(lo, lo, frac), {frac});
        EXPECT_NEAR(c.harmonic, c.arithmetic, 1e-12);
    }
}

TEST(CellProblem, ConstantMatrixIsItsOwnLimit)
{
    RMat a(2, 2);
    a << 2.0, 0.5, -0.3, 1.5;
    const auto cell = CoefficientField<Real>::constant(GridDomain::unit(2, 8), a);
    EXPECT_LT((homogenized_tensor(cell) - a).cwiseAbs().maxCoeff(), 1e-12);
    const auto sol = cell_problem<Real>(cell, Vec<Real>::Unit(2, 0));
    EXPECT_LT(sol.corrector.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(CellProblem, LaminateMatchesMeans)
{
    const auto seq = CoefficientSequence<Real>::laminate(2, two_phase_profile(1.0, 4.0, 0.5), Bounds{1.0, 4.0});
    const RMat a = homogenized_tensor(seq.cell_field(128));
    EXPECT_NEAR(a(0, 0), 1.6, 0.016);
    EXPECT_NEAR(a(1, 1), 2.5, 0.025);
    EXPECT_LT(std::abs(a(0, 1)) + std::abs(a(1, 0)), 1e-8);
}

TEST(CellProblem, LaminateCorrectorIsOneDimensional)
{
    const Index n = 32;
    const auto seq2 = CoefficientSequence<Real>::laminate(2, sine_profile(2.0, 1.0), Bounds{1.0, 3.0});
    const auto seq1 = CoefficientSequence<Real>::laminate(1, sine_profile(2.0, 1.0), Bounds{1.0, 3.0});
    const CellProblem<Real> p2(seq2.cell_field(n));
    const CellProblem<Real> p1(seq1.cell_field(n));
    const auto w2 = p2.solve(Vec<Real>::Unit(2, 0)).corrector;
    const auto w1 = p1.solve(Vec<Real>::Unit(1, 0)).corrector;
    const auto& g = p2.solver().gradient();
    Real worst = 0.0;
    for (Index i = 0; i < g.num_nodes(); ++i) worst = std::max(worst, std::abs(w2(i) - w1(g.node_multi(i)[0])));
    EXPECT_LT(worst, 1e-8);
    // The transverse direction needs no correction.
    EXPECT_LT(p2.solve(Vec<Real>::Unit(2, 1)).corrector.cwiseAbs().maxCoeff(), 1e-10);
}

TEST(CellProblem, CheckerboardFluxResidual)
{
    const auto seq = CoefficientSequence<Real>::periodic(2, checkerboard_cell<Real>(1.0, 4.0), Bounds{1.0, 4.0});
    const CellProblem<Real> p(seq.cell_field(32));
    for (int j = 0; j < 2; ++j) EXPECT_LT(p.solve(Vec<Real>::Unit(2, j)).flux_residual, 1e-9);
    const RMat a = p.tensor();
    EXPECT_NEAR(a(0, 0), 2.0, 0.1);
    EXPECT_NEAR(a(1, 1), 2.0, 0.1);
}

TEST(CellProblemProperty, SymmetryAndCoercivityInherited)
{
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<Real> u(-1, 1);
    for (int trial = 0; trial < 5; ++trial) {
        const Real c1 = u(rng), c2 = u(rng), c3 = 0.3 * u(rng);
        const auto cell = CoefficientField<Real>::from_function(GridDomain::unit(2, 24), [=](const Point& y) {
            RMat m(2, 2);
            m << 2 + c1 * std::sin(2 * pi * y[0]), c3 * std::cos(2 * pi * y[1]), c3 * std::cos(2 * pi * y[1]),
                2 + c2 * std::sin(2 * pi * (y[0] + y[1]));
            return m;
        });
        const auto b = cell.measured_bounds();
        const RMat a = homogenized_tensor(cell);
        EXPECT_LT((a - a.transpose()).cwiseAbs().maxCoeff(), 1e-8);
        const auto h = HilbertSpace<Real>::identity(2);
        EXPECT_TRUE(coercivity_check(LinearOp<Real>::dense(h, h, a), b.alpha, b.beta, 1e-8).passes());
    }
}

TEST(CellProblemProperty, SmoothLaminateConvergesSpectrally)
{
    // Periodic midpoint sampling of a trigonometric profile: error falls faster than any power of h.
    const auto seq = CoefficientSequence<Real>::laminate(2, sine_profile(2.0, 1.0), Bounds{1.0, 3.0});
    Real prev = 1.0;
    for (Index n : {8, 16, 32, 64}) {
        const RMat a = homogenized_tensor(seq.cell_field(n));
        const Real err = std::abs(a(0, 0) - std::sqrt(3.0));
        EXPECT_LT(err, std::max(1e-3 * prev, 1e-12)) << n;
        EXPECT_NEAR(a(1, 1), 2.0, 1e-10) << n;
        prev = err;
    }
    EXPECT_LT(prev, 1e-12);
}

TEST(HConvergence, ConstantSequenceAtSolverTolerance)
{
    const auto seq = CoefficientSequence<Real>::laminate(2, sine_profile(2.0, 0.0), Bounds{2.0, 2.0});
    const auto rep = hconvergence_experiment<Real>(seq, RMat::Identity(2, 2) * 2.0, options({1, 2, 4}, 8));
    for (const auto& r : rep.rows) EXPECT_LT(r.max_pairing_err(), 1e-9);
    EXPECT_TRUE(rep.passed());
}

TEST(HConvergence, OneDimensionalHarmonicMean)
{
    const auto seq = CoefficientSequence<Real>::laminate(1, sine_profile(2.0, 1.0), Bounds{1.0, 3.0});
    const auto rep = hconvergence_experiment<Real>(seq, one_by_one(std::sqrt(3.0)), options({1, 2, 4, 8, 16, 32}, 64));
    EXPECT_LT(rep.final_error(), 0.02);
    EXPECT_TRUE(rep.decreasing());
    EXPECT_TRUE(rep.passed());
    EXPECT_EQ(rep.rows.back().cells, 2048);
}

TEST(HConvergence, WrongCandidateFails)
{
    const auto seq = CoefficientSequence<Real>::laminate(1, sine_profile(2.0, 1.0), Bounds{1.0, 3.0});
    const auto rep = hconvergence_experiment<Real>(seq, one_by_one(2.0), options({1, 4, 16}, 32));
    EXPECT_FALSE(rep.passed());
}

TEST(HConvergence, EstimatedLimitIsFlagged)
{
    const auto seq = CoefficientSequence<Real>::laminate(1, sine_profile(2.0, 1.0), Bounds{1.0, 3.0});
    const auto rep = hconvergence_experiment<Real>(seq, std::nullopt, options({4, 8, 16, 32}, 32));
    EXPECT_TRUE(rep.estimated);
    EXPECT_EQ(rep.candidate, "estimate");
    EXPECT_TRUE(std::isnan(rep.rows.front().strong_gap_u));
    std::ostringstream os;
    rep.table().write(os);
    EXPECT_NE(os.str().find("limit=estimate"), std::string::npos);
}

TEST(HConvergence, MeshRuleBudget)
{
    const auto seq = CoefficientSequence<Real>::laminate(2, sine_profile(2.0, 1.0), Bounds{1.0, 3.0});
    EXPECT_THROW(hconvergence_experiment<Real>(seq, RMat::Identity(2, 2), options({1, 4096}, 32)), MeshRuleViolation);
}

TEST(HConvergence, SequenceFieldsRespectBounds)
{
    const auto seq = CoefficientSequence<Real>::laminate(1, sine_profile(2.0, 1.0), Bounds{1.5, 3.0});
    EXPECT_THROW(seq.field(1, GridDomain::unit(1, 64)), CoercivityError);
}

TEST(Qdind, ConstantVanishes)
{
    const auto seq = CoefficientSequence<Real>::laminate(1, sine_profile(2.0, 0.0), Bounds{2.0, 2.0});
    const auto rep = qdind_check(seq, options({1, 2, 4}, 16));
    EXPECT_TRUE(rep.all_vanish());
    EXPECT_TRUE(rep.passed());
}

TEST(Qdind, SineOscillationJointDecay)
{
    const auto seq = CoefficientSequence<Real>::laminate(1, sine_profile(2.0, 1.0), Bounds{1.0, 3.0});
    const auto rep = qdind_check(seq, options({1, 2, 4, 8, 16, 32}, 32));
    EXPECT_TRUE(rep.decay());
    EXPECT_GT(rep.log_correlation, 0.9);
    EXPECT_TRUE(rep.passed());
    EXPECT_NEAR(rep.limit, std::sqrt(3.0), 1e-10);
}

TEST(Qdind, TwoPhaseLimit)
{
    const auto seq = CoefficientSequence<Real>::laminate(1, two_phase_profile(1.0, 4.0, 0.5), Bounds{1.0, 4.0});
    const auto rep = qdind_check(seq, options({1, 2, 4, 8}, 32));
    EXPECT_NEAR(rep.limit, 1.6, 1e-10);
    EXPECT_TRUE(rep.passed());
}

TEST(SchurEquivalence, ConstantSequence)
{
    const auto seq = CoefficientSequence<Real>::laminate(1, sine_profile(2.0, 0.0), Bounds{2.0, 2.0});
    const auto rep = schur_equiv_check<Real>(seq, one_by_one(2.0), options({1, 2, 4}, 16));
    for (const auto& r : rep.rows)
        for (Real x : r.tau) EXPECT_LT(x, 1e-9);
    EXPECT_TRUE(rep.passed());
}

TEST(SchurEquivalence, OneDimensionalSineFamily)
{
    const auto seq = CoefficientSequence<Real>::laminate(1, sine_profile(2.0, 1.0), Bounds{1.0, 3.0});
    const auto rep = schur_equiv_check<Real>(seq, one_by_one(std::sqrt(3.0)), options({4, 8, 16, 32, 64}, 32));
    for (std::size_t i = 1; i < rep.rows.size(); ++i)
        for (int k = 0; k < 4; ++k) EXPECT_LE(rep.rows[i].tau[k], rep.rows[i - 1].tau[k] + 1e-12) << "row " << i;
    EXPECT_TRUE(rep.tau_decays());
    EXPECT_TRUE(rep.solution_decays());
    EXPECT_TRUE(rep.joint());
    std::ostringstream os;
    rep.table().write(os);
    EXPECT_NE(os.str().find("schema=schur_gap/v1"), std::string::npos);
}

TEST(AdjointSymmetry, RealSymmetricLaminateIsSelfDual)
{
    const auto seq = CoefficientSequence<Real>::laminate(1, sine_profile(2.0, 1.0), Bounds{1.0, 3.0});
    const auto rep = adjoint_symmetry_check<Real>(seq, one_by_one(std::sqrt(3.0)), options({2, 4, 8}, 32));
    ASSERT_EQ(rep.primal.rows.size(), rep.dual.rows.size());
    for (std::size_t i = 0; i < rep.primal.rows.size(); ++i)
        for (int k = 0; k < 4; ++k) EXPECT_NEAR(rep.primal.rows[i].tau[k], rep.dual.rows[i].tau[k], 1e-12);
    EXPECT_TRUE(rep.passed());
}

TEST(AdjointSymmetry, ComplexFamilyAgainstConjugate)
{
    const std::function<Complex(Real)> profile = [](Real y) { return Complex(2.0, 0.3) + std::sin(2 * pi * y); };
    const auto seq = CoefficientSequence<Complex>::laminate(1, profile, Bounds{1.0, 3.1});
    const auto means = laminate_limit<Complex>(profile);
    const Mat<Complex> cand = Mat<Complex>::Constant(1, 1, means.harmonic);
    const auto rep = adjoint_symmetry_check<Complex>(seq, cand, options({2, 4, 8, 16}, 32, 5e-2));
    EXPECT_TRUE(rep.primal.passed());
    EXPECT_TRUE(rep.dual.passed());
    EXPECT_TRUE(rep.passed());
}

TEST(AdjointSymmetry, NonsymmetricConstantField)
{
    Mat<Real> a(2, 2);
    a << 2.0, 0.5, -0.5, 2.0;
    const auto seq = CoefficientSequence<Real>::periodic(2, [a](const Point&) { return a; }, Bounds{2.0, 2.2});
    const auto rep = adjoint_symmetry_check<Real>(seq, a, options({1, 2}, 8));
    EXPECT_TRUE(rep.primal.passed());
    EXPECT_TRUE(rep.dual.passed());
}
