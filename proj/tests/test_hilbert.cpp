/// Weighted spaces, operators, subspaces, probes and the triplet format.
#include "homlab/grid.hpp"
#include "homlab/hilbert.hpp"

#include <gtest/gtest.h>

#include <numbers>
#include <random>
#include <sstream>

using namespace homlab;

namespace {

RVec positive_weights(Index n, std::mt19937_64& rng)
{
    std::uniform_real_distribution<Real> u(0.5, 2.0);
    RVec w(n);
    for (Index i = 0; i < n; ++i) w(i) = u(rng);
    return w;
}

template <class S>
Real adjoint_defect(const LinearOp<S>& a, std::mt19937_64& rng)
{
    const auto as = adjoint(a);
    const Vec<S> x = gaussian_vector<S>(a.cols(), rng);
    const Vec<S> y = gaussian_vector<S>(a.rows(), rng);
    return std::abs(a.target().inner(y, a.apply(x)) - a.source().inner(as.apply(y), x));
}

} // namespace

TEST(Adjoint, SymmetricOnIdentityWeightsIsItself)
{
    std::mt19937_64 rng(3);
    const RMat b = gaussian_matrix<Real>(6, 6, rng);
    const RMat a = b + b.transpose();
    const auto h = HilbertSpace<Real>::identity(6);
    const auto op = LinearOp<Real>::dense(h, h, a);
    EXPECT_LT((adjoint(op).to_dense() - a).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Adjoint, InnerProductIdentityWeighted)
{
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const auto hs = HilbertSpace<Real>::diagonal(positive_weights(10, rng));
        const auto ht = HilbertSpace<Real>::diagonal(positive_weights(10, rng));
        const auto op = LinearOp<Real>::dense(hs, ht, gaussian_matrix<Real>(10, 10, rng));
        EXPECT_LT(adjoint_defect(op, rng), 1e-12);
    }
}

TEST(Adjoint, ComplexDenseWeights)
{
    std::mt19937_64 rng(8);
    const Mat<Complex> r = gaussian_matrix<Complex>(10, 10, rng);
    const Mat<Complex> w = r * r.adjoint() + Mat<Complex>::Identity(10, 10) * Complex(10.0);
    const auto h = HilbertSpace<Complex>::dense(w);
    const auto op = LinearOp<Complex>::dense(h, h, gaussian_matrix<Complex>(10, 10, rng));
    EXPECT_LT(adjoint_defect(op, rng), 1e-11);
}

TEST(Adjoint, SparseMatchesDense)
{
    std::mt19937_64 rng(9);
    const auto g = build_grad<Real>(GridDomain::unit(2, 5), Flavor::neumann);
    EXPECT_LT(adjoint_defect(g.op(), rng), 1e-12);
    const auto dense = LinearOp<Real>::dense(g.scalar_space(), g.vector_space(), g.op().to_dense());
    EXPECT_LT((adjoint(dense).to_dense() - adjoint(g.op()).to_dense()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Adjoint, OffDiagonalBlockSwap)
{
    std::mt19937_64 rng(11);
    const auto h0 = HilbertSpace<Real>::diagonal(positive_weights(3, rng));
    const auto h1 = HilbertSpace<Real>::diagonal(positive_weights(4, rng));
    const auto h = direct_sum<Real>({h0, h1});
    const RMat b = gaussian_matrix<Real>(3, 4, rng); // h1 -> h0
    const RMat c = gaussian_matrix<Real>(4, 3, rng); // h0 -> h1
    RMat a = RMat::Zero(7, 7);
    a.topRightCorner(3, 4) = b;
    a.bottomLeftCorner(4, 3) = c;
    const RMat as = adjoint(LinearOp<Real>::dense(h, h, a)).to_dense();
    const RMat bs = adjoint(LinearOp<Real>::dense(h1, h0, b)).to_dense();
    const RMat cs = adjoint(LinearOp<Real>::dense(h0, h1, c)).to_dense();
    EXPECT_LT(as.topLeftCorner(3, 3).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_LT(as.bottomRightCorner(4, 4).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_LT((as.topRightCorner(3, 4) - cs).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((as.bottomLeftCorner(4, 3) - bs).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Adjoint, Involution)
{
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 20; ++trial) {
        const auto hs = HilbertSpace<Real>::diagonal(positive_weights(8, rng));
        const auto ht = HilbertSpace<Real>::diagonal(positive_weights(5, rng));
        const RMat m = gaussian_matrix<Real>(5, 8, rng);
        const auto op = LinearOp<Real>::dense(hs, ht, m);
        EXPECT_LT((adjoint(adjoint(op)).to_dense() - m).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(Adjoint, MatrixFreeWithoutTransposeThrows)
{
    const auto h = HilbertSpace<Real>::identity(3);
    const auto op = LinearOp<Real>::matrix_free(h, h, [](const Vec<Real>& x) { return Vec<Real>(2.0 * x); });
    EXPECT_THROW(adjoint(op), MissingTranspose);
    EXPECT_THROW(adjoint(op), Error);
}

TEST(Adjoint, ComposeAndCombineStayConsistent)
{
    std::mt19937_64 rng(17);
    const auto h = HilbertSpace<Real>::diagonal(positive_weights(6, rng));
    const auto a = LinearOp<Real>::dense(h, h, gaussian_matrix<Real>(6, 6, rng));
    const auto b = LinearOp<Real>::dense(h, h, gaussian_matrix<Real>(6, 6, rng));
    EXPECT_LT(adjoint_defect(compose(a, b), rng), 1e-12);
    EXPECT_LT(adjoint_defect(combine<Real>(2.0, a, -1.5, b), rng), 1e-12);
    EXPECT_LT(((a + b).to_dense() - a.to_dense() - b.to_dense()).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(KernelRange, ZeroOperator)
{
    const auto h = HilbertSpace<Real>::identity(5);
    const auto kr = kernel_range(LinearOp<Real>::dense(h, h, RMat::Zero(5, 5)));
    EXPECT_EQ(kr.kernel.dim().value(), 5);
    EXPECT_EQ(kr.range.dim().value(), 0);
}

TEST(KernelRange, DirichletGradientInjective)
{
    const auto g = build_grad<Real>(GridDomain::unit(1, 64), Flavor::dirichlet);
    const auto kr = kernel_range(g.op());
    EXPECT_EQ(kr.kernel.dim().value(), 0);
    EXPECT_EQ(kr.range.dim().value(), 63);
}

TEST(KernelRange, NeumannGradientKernelIsConstants)
{
    const auto g = build_grad<Real>(GridDomain::unit(1, 64), Flavor::neumann);
    const auto kr = kernel_range(g.op());
    ASSERT_EQ(kr.kernel.dim().value(), 1);
    const Vec<Real> k = kr.kernel.basis().col(0);
    EXPECT_LT((k.array() - k(0)).abs().maxCoeff(), 1e-10);
}

TEST(KernelRange, KernelOrthogonalToAdjointRange)
{
    std::mt19937_64 rng(19);
    for (int trial = 0; trial < 10; ++trial) {
        const auto hs = HilbertSpace<Real>::diagonal(positive_weights(9, rng));
        const auto ht = HilbertSpace<Real>::diagonal(positive_weights(7, rng));
        const RMat m = gaussian_matrix<Real>(7, 4, rng) * gaussian_matrix<Real>(4, 9, rng);
        const auto op = LinearOp<Real>::dense(hs, ht, m);
        const auto kr = kernel_range(op);
        const auto kra = kernel_range(adjoint(op));
        ASSERT_EQ(kr.kernel.dim().value() + kra.range.dim().value(), 9);
        const RMat cross = kr.kernel.basis().transpose() * hs.weigh_rows(kra.range.basis());
        EXPECT_LT(cross.cwiseAbs().maxCoeff(), 1e-8);
    }
}

TEST(Coercivity, ScaledIdentity)
{
    const auto h = HilbertSpace<Real>::identity(4);
    const auto rep = coercivity_check(LinearOp<Real>::dense(h, h, 2.0 * RMat::Identity(4, 4)), 2.0, 2.0);
    EXPECT_NEAR(rep.re_min, 2.0, 1e-12);
    EXPECT_NEAR(rep.re_inv_min, 0.5, 1e-12);
    EXPECT_TRUE(rep.passes());
}

TEST(Coercivity, RotationScaling)
{
    const auto h = HilbertSpace<Real>::identity(2);
    RMat t(2, 2);
    t << 1, -1, 1, 1;
    const auto rep = coercivity_check(LinearOp<Real>::dense(h, h, t), 1.0, 2.0);
    EXPECT_NEAR(rep.re_min, 1.0, 1e-12);
    EXPECT_NEAR(rep.re_inv_min, 0.5, 1e-12);
    EXPECT_TRUE(rep.passes());
    EXPECT_FALSE(coercivity_check(LinearOp<Real>::dense(h, h, t), 1.0, 1.5).passes());
}

TEST(Coercivity, SmallEigenvalueFailsLowerBound)
{
    std::mt19937_64 rng(23);
    Eigen::HouseholderQR<RMat> qr(gaussian_matrix<Real>(6, 6, rng));
    const RMat q = qr.householderQ();
    RVec ev(6);
    ev << 0.3, 1, 1.5, 2, 3, 4;
    const RMat t = q * ev.asDiagonal() * q.transpose();
    const auto h = HilbertSpace<Real>::identity(6);
    const auto rep = coercivity_check(LinearOp<Real>::dense(h, h, t), 1.0, 10.0);
    EXPECT_NEAR(rep.re_min, 0.3, 1e-10);
    EXPECT_FALSE(rep.lower_ok);
    EXPECT_FALSE(rep.passes());
}

TEST(Coercivity, SingularFlagged)
{
    const auto h = HilbertSpace<Real>::identity(3);
    RMat t = RMat::Identity(3, 3);
    t(2, 2) = 0.0;
    const auto rep = coercivity_check(LinearOp<Real>::dense(h, h, t), 0.5, 2.0);
    EXPECT_TRUE(rep.singular);
    EXPECT_FALSE(rep.upper_ok);
}

TEST(Coercivity, InvalidBoundsRejected)
{
    const auto h = HilbertSpace<Real>::identity(2);
    const auto op = identity_op(h);
    EXPECT_THROW(coercivity_check(op, 2.0, 1.0), InvalidArgument);
    EXPECT_THROW(coercivity_check(op, 0.0, 1.0), InvalidArgument);
}

TEST(CoercivityProperty, InverseInReciprocalClass)
{
    std::mt19937_64 rng(29);
    for (int trial = 0; trial < 50; ++trial) {
        const Index n = 2 + trial % 9;
        const auto h = HilbertSpace<Real>::diagonal(positive_weights(n, rng));
        const RMat p = gaussian_matrix<Real>(n, n, rng);
        const RMat k = gaussian_matrix<Real>(n, n, rng);
        const RMat m = 0.5 * RMat::Identity(n, n) + 0.2 * p * p.transpose() + (k - k.transpose());
        const auto t = from_whitened(h, m);
        const auto probe = coercivity_check(t, 1e-3, 1e3);
        ASSERT_FALSE(probe.singular);
        const Real alpha = probe.re_min * (1 - 1e-9);
        const Real beta = 1.0 / probe.re_inv_min * (1 + 1e-9);
        ASSERT_TRUE(coercivity_check(t, alpha, beta).passes());
        const auto ti = LinearOp<Real>::dense(h, h, t.to_dense().inverse());
        EXPECT_TRUE(coercivity_check(ti, 1.0 / beta, 1.0 / alpha, 1e-9).passes()) << "trial " << trial;
    }
}

TEST(CoercivityProperty, ComplexScalars)
{
    std::mt19937_64 rng(31);
    const Index n = 6;
    const auto h = HilbertSpace<Complex>::identity(n);
    const Mat<Complex> k = gaussian_matrix<Complex>(n, n, rng);
    const Mat<Complex> t = Mat<Complex>::Identity(n, n) + (k - k.adjoint()) / Complex(2.0);
    const auto rep = coercivity_check(LinearOp<Complex>::dense(h, h, t), 1.0, 1e6);
    EXPECT_NEAR(rep.re_min, 1.0, 1e-10);
    EXPECT_GT(rep.re_inv_min, 0.0);
}

TEST(WotGap, EqualOperatorsGiveZero)
{
    std::mt19937_64 rng(37);
    const auto h = HilbertSpace<Real>::identity(5);
    const auto a = LinearOp<Real>::dense(h, h, gaussian_matrix<Real>(5, 5, rng));
    const auto p = ProbeSet<Real>::random(h, 8, 1);
    EXPECT_EQ(wot_gap(a, a, p, p), 0.0);
    EXPECT_EQ(strong_gap(a, a, p), 0.0);
}

TEST(WotGap, RankOneGivesOne)
{
    std::mt19937_64 rng(41);
    const auto h = HilbertSpace<Real>::diagonal(positive_weights(6, rng));
    Vec<Real> phi = gaussian_vector<Real>(6, rng);
    Vec<Real> psi = gaussian_vector<Real>(6, rng);
    phi /= h.norm(phi);
    psi /= h.norm(psi);
    const RMat r = phi * h.weigh(psi).transpose(); // phi <psi, .>
    const auto s = LinearOp<Real>::dense(h, h, r);
    const auto t = LinearOp<Real>::dense(h, h, RMat::Zero(6, 6));
    const ProbeSet<Real> left(h, {phi});
    const ProbeSet<Real> right(h, {psi});
    EXPECT_NEAR(wot_gap(s, t, left, right), 1.0, 1e-12);
    EXPECT_NEAR(strong_gap(s, t, right), 1.0, 1e-12);
}

TEST(WotGap, ShapeMismatchThrows)
{
    const auto h3 = HilbertSpace<Real>::identity(3);
    const auto h4 = HilbertSpace<Real>::identity(4);
    const auto a = identity_op(h3);
    const auto b = identity_op(h4);
    const auto p = ProbeSet<Real>::random(h3);
    EXPECT_THROW(wot_gap(a, b, p, p), ShapeError);
    EXPECT_THROW(wot_gap(b, b, p, p), ShapeError);
    EXPECT_THROW(strong_gap(a, b, p), ShapeError);
}

TEST(WotGap, OscillatingMultiplierWeakButNotStrong)
{
    const auto g = build_grad<Real>(GridDomain::unit(1, 4096), Flavor::neumann);
    const auto& h = g.scalar_space();
    const auto probes = scalar_probes(g, 5);
    const auto zero = LinearOp<Real>::sparse(h, h, SpMat<Real>(h.dim(), h.dim()));
    std::vector<Real> weak, strong;
    for (Index n : {4, 16, 64, 256}) {
        const Vec<Real> m = g.sample_nodes([n](const Point& x) { return std::sin(2 * std::numbers::pi * n * x[0]); });
        const auto s = LinearOp<Real>::sparse(h, h, sparse_diagonal<Real>(m));
        weak.push_back(wot_gap(s, zero, probes, probes));
        strong.push_back(strong_gap(s, zero, probes));
    }
    for (std::size_t i = 1; i < weak.size(); ++i) EXPECT_LT(weak[i], weak[i - 1]);
    EXPECT_LT(weak.back(), 1e-3);
    for (Real s : strong) EXPECT_GT(s, 0.5);
}

TEST(WotGapProperty, PseudoMetric)
{
    std::mt19937_64 rng(43);
    for (int trial = 0; trial < 30; ++trial) {
        const auto h = HilbertSpace<Real>::diagonal(positive_weights(7, rng));
        const auto a = LinearOp<Real>::dense(h, h, gaussian_matrix<Real>(7, 7, rng));
        const auto b = LinearOp<Real>::dense(h, h, gaussian_matrix<Real>(7, 7, rng));
        const auto c = LinearOp<Real>::dense(h, h, gaussian_matrix<Real>(7, 7, rng));
        const auto l = ProbeSet<Real>::random(h, 5, 100 + trial);
        const auto r = ProbeSet<Real>::random(h, 5, 200 + trial);
        const Real ab = wot_gap(a, b, l, r), ba = wot_gap(b, a, l, r);
        EXPECT_NEAR(ab, ba, 1e-13 * (1 + ab));
        EXPECT_LE(wot_gap(a, c, l, r), wot_gap(a, b, l, r) + wot_gap(b, c, l, r) + 1e-13);
        EXPECT_GE(ab, 0.0);
    }
}

TEST(WotGapProperty, ClosureOfCoercivityClass)
{
    std::mt19937_64 rng(47);
    const Index n = 6;
    const Real alpha = 0.5, beta = 4.0;
    const auto h = HilbertSpace<Real>::diagonal(positive_weights(n, rng));
    const RMat limit = RMat::Identity(n, n) + 0.1 * [&] {
        const RMat k = gaussian_matrix<Real>(n, n, rng);
        return RMat(k - k.transpose());
    }();
    const RMat pert = [&] {
        const RMat p = gaussian_matrix<Real>(n, n, rng);
        return RMat(p + p.transpose());
    }();
    const auto t = from_whitened(h, limit);
    ASSERT_TRUE(coercivity_check(t, alpha, beta).passes());
    std::vector<Vec<Real>> basis;
    for (Index i = 0; i < n; ++i) basis.push_back(Vec<Real>::Unit(n, i));
    const ProbeSet<Real> spanning(h, basis);
    Real previous = std::numeric_limits<Real>::infinity();
    for (Index k : {10, 100, 1000, 10000}) {
        const RMat tk = limit + (0.3 / static_cast<Real>(k)) * pert;
        const auto tn = from_whitened(h, tk);
        ASSERT_TRUE(coercivity_check(tn, alpha, beta).passes());
        const Real gap = wot_gap(tn, t, spanning, spanning);
        EXPECT_LT(gap, previous);
        previous = gap;
    }
    EXPECT_LT(previous, 1e-3);
    EXPECT_TRUE(coercivity_check(t, alpha, beta, 1e-8).passes());
}

TEST(Probes, UnitNormAndDeterministic)
{
    std::mt19937_64 rng(53);
    const auto h = HilbertSpace<Real>::diagonal(positive_weights(12, rng));
    const auto a = ProbeSet<Real>::random(h, 8, 5);
    const auto b = ProbeSet<Real>::random(h, 8, 5);
    ASSERT_EQ(a.size(), 8u);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_NEAR(h.norm(a.vectors()[i]), 1.0, 1e-12);
        EXPECT_EQ(a.vectors()[i], b.vectors()[i]);
    }
    EXPECT_THROW(ProbeSet<Real>(h, {}), InvalidArgument);
}

TEST(Probes, GridSineModes)
{
    const auto g = build_grad<Real>(GridDomain::unit(2, 16), Flavor::dirichlet);
    const auto p = scalar_probes(g);
    EXPECT_EQ(p.size(), 25u);
    for (const auto& v : p.vectors()) EXPECT_NEAR(g.scalar_space().norm(v), 1.0, 1e-12);
}

TEST(Subspace, SpanFromBasisAndComplement)
{
    std::mt19937_64 rng(59);
    const auto h = HilbertSpace<Real>::diagonal(positive_weights(8, rng));
    RMat v = gaussian_matrix<Real>(8, 3, rng);
    v.col(2) = v.col(0) + 2.0 * v.col(1);
    const auto s = Subspace<Real>::span(h, v);
    EXPECT_EQ(s.dim().value(), 2);
    EXPECT_LT(s.verify(), 1e-12);
    const auto c = s.complement();
    EXPECT_EQ(c.dim().value(), 6);
    const Vec<Real> x = gaussian_vector<Real>(8, rng);
    EXPECT_LT(h.norm(s.project(x) + c.project(x) - x), 1e-12);
    EXPECT_LT(std::abs(h.inner(s.project(x), c.project(x))), 1e-12);
    EXPECT_THROW(Subspace<Real>::from_basis(h, v), InvalidArgument);
}

TEST(Subspace, ImplicitRangeProjectorIdempotentAndSelfAdjoint)
{
    const auto g = build_grad<Real>(GridDomain::unit(2, 40), Flavor::neumann);
    ASSERT_GT(g.op().rows(), kExplicitSubspaceLimit);
    const auto kr = kernel_range(g.op(), Tolerances::rank, g.kernel_basis());
    EXPECT_FALSE(kr.range.is_explicit());
    EXPECT_EQ(kr.range.dim().value(), g.num_nodes() - 1);
    EXPECT_LT(kr.range.verify(11, 4), Tolerances::projector);
    EXPECT_LT(kr.range.complement().verify(12, 4), Tolerances::projector);
    std::mt19937_64 rng(61);
    const Vec<Real> u = gaussian_vector<Real>(g.num_nodes(), rng);
    const Vec<Real> gu = g.op().apply(u);
    EXPECT_LT(g.vector_space().norm(kr.range.project(gu) - gu) / g.vector_space().norm(gu), 1e-10);
}

TEST(Subspace, ProbesRestrictedToSubspace)
{
    std::mt19937_64 rng(67);
    const auto h = HilbertSpace<Real>::identity(10);
    const auto s = Subspace<Real>::span(h, gaussian_matrix<Real>(10, 3, rng));
    const auto p = ProbeSet<Real>::random(h, 8, 2).restricted_to(s);
    EXPECT_EQ(p.size(), 3u);
    EXPECT_EQ(p.space().dim(), 3);
    const auto z = ProbeSet<Real>::random(h, 8, 2).restricted_to(Subspace<Real>::zero(h));
    EXPECT_EQ(z.size(), 0u);
}

TEST(Triplets, RoundTripReal)
{
    const auto g = build_grad<Real>(GridDomain::unit(2, 4), Flavor::neumann);
    std::stringstream ss;
    write_triplets(ss, g.matrix());
    const auto m = read_triplets<Real>(ss);
    EXPECT_EQ(m.rows(), g.matrix().rows());
    EXPECT_EQ(m.cols(), g.matrix().cols());
    EXPECT_EQ(RMat(m - g.matrix()).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Triplets, RoundTripComplex)
{
    std::mt19937_64 rng(71);
    const Mat<Complex> d = gaussian_matrix<Complex>(4, 3, rng);
    const SpMat<Complex> s = d.sparseView();
    std::stringstream ss;
    write_triplets(ss, s);
    EXPECT_EQ(Mat<Complex>(read_triplets<Complex>(ss)), d);
}

TEST(Triplets, RejectsMalformedInput)
{
    auto parse = [](const std::string& text) {
        std::istringstream is(text);
        return read_triplets<Real>(is);
    };
    EXPECT_THROW(parse(""), FormatError);
    EXPECT_THROW(parse("2 2 0\n"), FormatError);
    EXPECT_THROW(parse("%%homlab-triplet integer\n2 2 0\n"), FormatError);
    EXPECT_THROW(parse("%%homlab-triplet real\n2 2\n"), FormatError);
    EXPECT_THROW(parse("%%homlab-triplet real\n2 2 2\n0 0 1\n"), FormatError);
    EXPECT_THROW(parse("%%homlab-triplet real\n2 2 1\n2 0 1\n"), FormatError);
    EXPECT_THROW(parse("%%homlab-triplet complex\n2 2 1\n0 0 1 1\n"), FormatError);
    EXPECT_EQ(parse("%%homlab-triplet real\n\n2 2 1\n1 0 -3.5\n").coeff(1, 0), -3.5);
}

TEST(OpNorm, MatchesLargestWeightedSingularValue)
{
    std::mt19937_64 rng(73);
    const auto h = HilbertSpace<Real>::diagonal(positive_weights(5, rng));
    const auto op = from_whitened(h, RMat(RVec::LinSpaced(5, 1.0, 3.0).asDiagonal()));
    EXPECT_NEAR(op_norm(op), 3.0, 1e-10);
}
