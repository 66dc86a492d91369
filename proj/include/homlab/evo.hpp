/**
 * @file evo.hpp
 * @brief (T + A) u = f with skew-adjoint A: kernel/range splitting,
 *        resolvent bounds, block elimination, coefficient recovery and the
 *        resolvent/Schur joint-decay experiment.
 */
#pragma once

#include "homlab/csv.hpp"
#include "homlab/parallel.hpp"
#include "homlab/elliptic.hpp"
#include "homlab/grid.hpp"
#include "homlab/schur.hpp"

#include <functional>
#include <random>

namespace homlab {

/**
 * @brief Skew-adjoint operator with its kernel/range decomposition and the
 * reduced operator A~ = iota_1^* A iota_1 on the range (explicit mode only).
 */
template <class S>
class SkewOp {
public:
    SkewOp() = default;

    explicit SkewOp(LinearOp<S> a, Real tol = 1e-10, const Mat<S>& kernel_hint = Mat<S>()) : op_(std::move(a))
    {
        HOMLAB_THROW_IF(op_.rows() != op_.cols(), ShapeError, "skew operator must be square");
        const auto& h = op_.source();
        skew_defect_ = skew_defect(op_);
        HOMLAB_THROW_IF(skew_defect_ > tol, NotSkew,
                        "||A + A*|| / ||A|| = " + format_real(skew_defect_) + " exceeds " + format_real(tol));
        auto kr = kernel_range(op_, Tolerances::rank, kernel_hint);
        ker_ = kr.kernel;
        ran_ = kr.range;
        if (!ran_.is_explicit()) return;
        // The range of A equals ker(A)^perp for skew A; the kernel basis from the
        // SVD spans the same space as the complement of the range basis.
        const Mat<S>& b = ran_.basis();
        reduced_ = b.adjoint() * h.weigh_rows(op_.apply_columns(b));
        if (reduced_.rows()) {
            Eigen::PartialPivLU<Mat<S>> lu(reduced_);
            rcond_ = lu_rcond<S>(lu);
            HOMLAB_THROW_IF(!(rcond_ * Tolerances::condition >= 1.0), NotInM, "reduced operator is singular");
            reduced_inv_ = lu.inverse();
        } else {
            rcond_ = 1.0;
            reduced_inv_ = Mat<S>(0, 0);
        }
        const Mat<S>& k = ker_.basis();
        Real blk = 0.0;
        if (k.cols()) {
            blk = std::max(blk, h.whiten_rows(op_.apply_columns(k)).cwiseAbs().maxCoeff());
            if (b.cols()) blk = std::max(blk, (b.adjoint() * h.weigh_rows(op_.apply_columns(k))).cwiseAbs().maxCoeff());
        }
        block_defect_ = blk;
    }

    /// ||A + A*|| / ||A|| on the dense form or on seeded probes.
    static Real skew_defect(const LinearOp<S>& a)
    {
        const auto& h = a.source();
        if (a.rows() == 0) return 0.0;
        if (a.rows() <= kExplicitSubspaceLimit || a.kind() == LinearOp<S>::Kind::dense) {
            const Mat<S> t = whitened_matrix(a);
            const Real n = t.norm();
            return n > 0 ? (t + t.adjoint()).norm() / n : 0.0;
        }
        std::mt19937_64 rng(17);
        Real worst = 0.0;
        for (int k = 0; k < 4; ++k) {
            const Vec<S> x = gaussian_vector<S>(a.rows(), rng);
            const Vec<S> y = a.apply(x);
            const Real ny = h.norm(y);
            if (ny > 0) worst = std::max(worst, h.norm(Vec<S>(y + a.apply_adjoint(x))) / ny);
        }
        return worst;
    }

    const LinearOp<S>& op() const { return op_; }
    const Subspace<S>& kernel() const { return ker_; }
    const Subspace<S>& range() const { return ran_; }
    Decomposition<S> decomposition() const { return Decomposition<S>(ker_, ran_); }
    const Mat<S>& reduced() const { return reduced_; }
    const Mat<S>& reduced_inverse() const { return reduced_inv_; }
    Real reduced_rcond() const { return rcond_; }
    /// Largest entry of the (ker, ker), (ker, ran), (ran, ker) blocks.
    Real block_defect() const { return block_defect_; }
    Real skew_defect() const { return skew_defect_; }
    bool injective() const { return ker_.dim() && *ker_.dim() == 0; }

private:
    LinearOp<S> op_;
    Subspace<S> ker_;
    Subspace<S> ran_;
    Mat<S> reduced_;
    Mat<S> reduced_inv_;
    Real rcond_ = 0.0;
    Real block_defect_ = 0.0;
    Real skew_defect_ = 0.0;
};

template <class S>
inline SkewOp<S> skew_split(const LinearOp<S>& a, Real tol = 1e-10)
{
    return SkewOp<S>(a, tol);
}

/// T(lambda) = lambda m0 + m1, required to satisfy Re T >= c > 0.
template <class S>
class MaterialLaw {
public:
    MaterialLaw(LinearOp<S> m0, LinearOp<S> m1, Real lambda) : m0_(std::move(m0)), m1_(std::move(m1)), lambda_(lambda)
    {
        HOMLAB_THROW_IF(!(lambda > 0.0), InvalidArgument, "lambda must be positive");
        t_ = combine<S>(S(lambda), m0_, S(1), m1_);
        const auto rep = coercivity_check(t_, 1e-300, 1e300, 0.0);
        c_ = rep.re_min;
        HOMLAB_THROW_IF(!(c_ > 0.0), CoercivityError,
                        "Re(lambda M0 + M1) has minimum " + std::to_string(c_) + " at lambda = " +
                            std::to_string(lambda));
    }

    const LinearOp<S>& m0() const { return m0_; }
    const LinearOp<S>& m1() const { return m1_; }
    Real lambda() const { return lambda_; }
    const LinearOp<S>& t() const { return t_; }
    Real coercivity() const { return c_; }

private:
    LinearOp<S> m0_, m1_, t_;
    Real lambda_;
    Real c_ = 0.0;
};

struct ResolventBounds {
    Real norm_resolvent = 0.0;   ///< ||(T+A)^{-1}||
    Real norm_a_resolvent = 0.0; ///< ||A (T+A)^{-1}||
    Real c = 0.0;                ///< lambda_min(Re T)
    Real norm_t = 0.0;
    Real bound_resolvent() const { return 1.0 / c; }
    Real bound_a_resolvent() const { return (c + norm_t) / c; }
    bool holds(Real tol = 1e-9) const
    {
        return norm_resolvent <= bound_resolvent() * (1 + tol) + tol &&
               norm_a_resolvent <= bound_a_resolvent() * (1 + tol) + tol;
    }
};

/**
 * @brief ||(T+A)^{-1}|| <= 1/c and ||A (T+A)^{-1}|| <= (c + ||T||)/c.
 * @throws CoercivityError if Re T is not positive definite.
 */
template <class S>
inline ResolventBounds resolvent_bounds(const LinearOp<S>& t, const SkewOp<S>& a)
{
    const auto& h = t.source();
    const auto cr = coercivity_check(t, 1e-300, 1e300, 0.0);
    HOMLAB_THROW_IF(!(cr.re_min > 0.0), CoercivityError, "Re T is not positive definite");
    const Mat<S> ta = (t + a.op()).to_dense();
    const Mat<S> r = Eigen::PartialPivLU<Mat<S>>(ta).inverse();
    const auto rop = LinearOp<S>::dense(h, h, r);
    ResolventBounds b;
    b.c = cr.re_min;
    b.norm_t = op_norm(t);
    b.norm_resolvent = op_norm(rop);
    b.norm_a_resolvent = op_norm(LinearOp<S>::dense(h, h, a.op().to_dense() * r));
    return b;
}

template <class S>
struct BlockSolveResult {
    Vec<S> u;
    Real residual = 0.0;    ///< ||(T+A)u - f|| / ||f||
    Real direct_diff = 0.0; ///< ||u - u_direct|| / ||u_direct||
};

/**
 * @brief Elimination along (ker A, ran A):
 * u1 = (T_S + A~)^{-1}(f1 - T10 T00^{-1} f0), u0 = T00^{-1}(f0 - T01 u1).
 */
template <class S>
inline BlockSolveResult<S> block_solve(const LinearOp<S>& t, const SkewOp<S>& a, const Vec<S>& f)
{
    HOMLAB_THROW_IF(!a.range().is_explicit(), InvalidArgument, "block_solve needs explicit ker/ran bases");
    const auto& h = t.source();
    const auto cr = coercivity_check(t, 1e-300, 1e300, 0.0);
    HOMLAB_THROW_IF(!(cr.re_min > 0.0), CoercivityError, "Re T is not positive definite");
    const auto dec = a.decomposition();
    const auto bl = blocks(t, dec);
    const Mat<S>& bk = dec.h0().basis();
    const Mat<S>& br = dec.h1().basis();
    const Vec<S> f0 = bk.adjoint() * h.weigh(f);
    const Vec<S> f1 = br.adjoint() * h.weigh(f);
    const Mat<S>& t00 = bl.a00.dense_matrix();
    Vec<S> u0 = Vec<S>::Zero(bk.cols());
    Vec<S> u1 = Vec<S>::Zero(br.cols());
    if (bk.cols() == 0) {
        u1 = Eigen::PartialPivLU<Mat<S>>(Mat<S>(bl.a11.dense_matrix() + a.reduced())).solve(f1);
    } else {
        Eigen::PartialPivLU<Mat<S>> lu00(t00);
        const Mat<S> m01 = lu00.solve(bl.a01.dense_matrix());
        const Mat<S> ts = bl.a11.dense_matrix() - bl.a10.dense_matrix() * m01;
        if (br.cols()) {
            const Mat<S> sys = ts + a.reduced();
            Eigen::PartialPivLU<Mat<S>> lus(sys);
            HOMLAB_THROW_IF(!(lu_rcond<S>(lus) * Tolerances::condition >= 1.0), SolverDiverged,
                            "T_S + A~ is singular although T is coercive");
            u1 = lus.solve(Vec<S>(f1 - bl.a10.dense_matrix() * lu00.solve(f0)));
        }
        u0 = lu00.solve(Vec<S>(f0 - bl.a01.dense_matrix() * u1));
    }
    BlockSolveResult<S> r;
    r.u = bk * u0 + br * u1;
    const auto ta = t + a.op();
    const Real fn = h.norm(f);
    r.residual = fn > 0 ? h.norm(Vec<S>(ta.apply(r.u) - f)) / fn : h.norm(ta.apply(r.u));
    Vec<S> direct;
    if (ta.is_sparse()) {
        direct = SparseSolver<S>(ta.sparse_matrix()).solve(f);
    } else {
        direct = Eigen::PartialPivLU<Mat<S>>(ta.to_dense()).solve(f);
    }
    const Real dn = h.norm(direct);
    r.direct_diff = dn > 0 ? h.norm(Vec<S>(r.u - direct)) / dn : h.norm(r.u);
    return r;
}

template <class S>
struct RecoveredCoefficient {
    LinearOp<S> t;
    Real round_trip = 0.0; ///< max |(t + A)^{-1} - s| entry, relative to max |s|
};

/// T with (T + A)^{-1} = s, i.e. T = K s^{-1} with K f = f - A s f.
template <class S>
inline RecoveredCoefficient<S> recover_coefficient(const LinearOp<S>& s, const SkewOp<S>& a)
{
    const auto& h = s.source();
    const Mat<S> sd = s.to_dense();
    Eigen::PartialPivLU<Mat<S>> lu(sd);
    HOMLAB_THROW_IF(sd.rows() && !(lu_rcond<S>(lu) * Tolerances::condition >= 1.0), SingularResolvent,
                    "s is not continuously invertible");
    const Mat<S> sinv = lu.inverse();
    const Mat<S> k = Mat<S>::Identity(sd.rows(), sd.cols()) - a.op().to_dense() * sd;
    RecoveredCoefficient<S> r;
    r.t = LinearOp<S>::dense(h, h, k * sinv);
    const Mat<S> back = Eigen::PartialPivLU<Mat<S>>(Mat<S>(r.t.dense_matrix() + a.op().to_dense())).inverse();
    const Real scale = sd.size() ? sd.cwiseAbs().maxCoeff() : 1.0;
    r.round_trip = sd.size() ? (back - sd).cwiseAbs().maxCoeff() / std::max(scale, 1e-300) : 0.0;
    return r;
}

// ---------------------------------------------------------------------------
// Joint decay experiment
// ---------------------------------------------------------------------------

struct AbstractSchurRow {
    Index n = 0;
    TauGap tau{0, 0, 0, 0};     ///< relative
    Real resolvent_gap = 0.0;   ///< relative wot gap of (T_n+A)^{-1} vs (T+A)^{-1}
    Real strong_gap = 0.0;      ///< ||(T_n+A)^{-1} f_n - (T+A)^{-1} f|| / ||(T+A)^{-1} f||
    Real max_tau() const { return std::max({tau[0], tau[1], tau[2], tau[3]}); }
};

struct AbstractSchurReport {
    std::vector<AbstractSchurRow> rows;
    Real tolerance = 0.0;
    std::string regime;
    bool strong_applicable = false; ///< A one-to-one
    Real tau_slope = 0.0;
    Real resolvent_slope = 0.0;

    bool tau_decays() const
    {
        return rows.empty() || (rows.back().max_tau() < tolerance && rows.back().max_tau() <= rows.front().max_tau());
    }
    bool resolvent_decays() const
    {
        return rows.empty() ||
               (rows.back().resolvent_gap < tolerance && rows.back().resolvent_gap <= rows.front().resolvent_gap);
    }
    /// Both families decay below the threshold, or neither does.
    bool joint() const { return tau_decays() == resolvent_decays(); }

    CsvTable table() const
    {
        CsvTable t("evo", {"n", "gap_m00inv", "gap_m01", "gap_m10", "gap_ms", "resolvent_wot_gap", "strong_gap"});
        t.note("regime=" + regime + " tau_slope=" + format_real(tau_slope) +
               " resolvent_slope=" + format_real(resolvent_slope) +
               (strong_applicable ? "" : " strong_gap=informational(A has a kernel)"));
        for (const auto& r : rows)
            t.add({r.n, r.tau[0], r.tau[1], r.tau[2], r.tau[3], r.resolvent_gap, r.strong_gap});
        return t;
    }
};

template <class S>
struct AbstractSchurOptions {
    std::vector<Index> n_list;
    Real tolerance = 1e-6;
    std::string regime = "synthetic";
    int jobs = 1;
    Vec<S> rhs;                              ///< f; defaults to the first probe
    std::function<Vec<S>(Index)> wobble;     ///< f_n - f
};

/**
 * @brief Per n: relative tau gaps of T_n vs T on (ker A, ran A) and the
 * relative wot gap of the resolvents, on a shared probe set.
 */
template <class S>
inline AbstractSchurReport abstract_schur_experiment(const SkewOp<S>& a, const std::function<LinearOp<S>(Index)>& t_seq,
                                                     const LinearOp<S>& t_limit, const ProbeSet<S>& probes,
                                                     const AbstractSchurOptions<S>& opt)
{
    const auto& h = a.op().source();
    const auto dec = a.decomposition();
    const auto p0 = probes.restricted_to(dec.h0());
    const auto p1 = probes.restricted_to(dec.h1());
    const auto lim = schur_maps(t_limit, dec);
    const std::array<Real, 4> raw{pairing_scale(lim.m00inv, p0, p0), pairing_scale(lim.m01, p0, p1),
                                  pairing_scale(lim.m10, p1, p0), pairing_scale(lim.ms, p1, p1)};
    const Real overall = std::max(*std::max_element(raw.begin(), raw.end()), 1e-300);
    std::array<Real, 4> scale{};
    for (int k = 0; k < 4; ++k) scale[k] = raw[k] > 1e-8 * overall ? raw[k] : overall;

    auto resolvent = [&](const LinearOp<S>& t) {
        const auto ta = t + a.op();
        if (ta.is_sparse()) {
            auto solver = std::make_shared<SparseSolver<S>>(ta.sparse_matrix());
            return LinearOp<S>::matrix_free(h, h, [solver](const Vec<S>& x) { return solver->solve(x); });
        }
        return LinearOp<S>::dense(h, h, Eigen::PartialPivLU<Mat<S>>(ta.to_dense()).inverse());
    };
    const auto rlim = resolvent(t_limit);
    const Real rscale = std::max(pairing_scale(rlim, probes, probes), 1e-300);
    const Vec<S> f = opt.rhs.size() ? opt.rhs : probes.vectors().front();
    const Vec<S> ulim = rlim.apply(f);
    const Real un = std::max(h.norm(ulim), 1e-300);

    AbstractSchurReport rep;
    rep.tolerance = opt.tolerance;
    rep.regime = opt.regime;
    rep.strong_applicable = a.injective();
    rep.rows.resize(opt.n_list.size());
    parallel_for(opt.n_list.size(), opt.jobs, [&](std::size_t i) {
        const Index n = opt.n_list[i];
        const auto tn = t_seq(n);
        AbstractSchurRow r;
        r.n = n;
        const auto g = tau_gap(schur_maps(tn, dec), lim, p0, p1);
        for (int k = 0; k < 4; ++k) r.tau[k] = g[k] / scale[k];
        const auto rn = resolvent(tn);
        r.resolvent_gap = wot_gap(rn, rlim, probes, probes) / rscale;
        const Vec<S> fn = opt.wobble ? Vec<S>(f + opt.wobble(n)) : f;
        r.strong_gap = h.norm(Vec<S>(rn.apply(fn) - ulim)) / un;
        rep.rows[i] = r;
    });
    std::vector<Real> ns, ts, rs;
    for (const auto& r : rep.rows) {
        ns.push_back(static_cast<Real>(r.n));
        ts.push_back(std::max(r.max_tau(), 1e-300));
        rs.push_back(std::max(r.resolvent_gap, 1e-300));
    }
    if (ns.size() >= 2) {
        rep.tau_slope = loglog_slope(ns, ts);
        rep.resolvent_slope = loglog_slope(ns, rs);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Seeded instances
// ---------------------------------------------------------------------------

/// Random T on `h` with Re T >= alpha and Re T^{-1} >= 1/beta (W-sense).
template <class S, class Rng>
inline LinearOp<S> random_coercive(const HilbertSpace<S>& h, Real alpha, Real beta, Rng& rng)
{
    // Whitened T = R + K: R Hermitian with spectrum in [lo, hi], K skew.
    const Index n = h.dim();
    std::uniform_real_distribution<Real> uni(0.0, 1.0);
    const Real lo = alpha + 0.05 * (beta - alpha);
    const Real hi = lo + 0.5 * (std::sqrt(lo * beta) - lo);
    Mat<S> q = Eigen::HouseholderQR<Mat<S>>(gaussian_matrix<S>(n, n, rng)).householderQ();
    RVec ev(n);
    for (Index i = 0; i < n; ++i) ev(i) = lo + (hi - lo) * uni(rng);
    const Mat<S> re = q * ev.template cast<S>().asDiagonal() * q.adjoint();
    Mat<S> k = gaussian_matrix<S>(n, n, rng);
    k = (k - Mat<S>(k.adjoint())) / S(2);
    const Real kn = Eigen::BDCSVD<Mat<S>>(k).singularValues()(0);
    // Re <T x, x> >= lo |x|^2 >= |T x|^2 / beta once hi + ||K|| <= sqrt(lo beta).
    const Real room = std::sqrt(lo * beta) - hi;
    if (kn > 0) k *= S(0.9 * room / kn * uni(rng));
    const Mat<S> tw = re + k;
    return from_whitened(h, tw);
}

/// Random skew-adjoint operator of rank at most `rank` on `h`.
template <class S, class Rng>
inline LinearOp<S> random_skew(const HilbertSpace<S>& h, Index rank, Rng& rng)
{
    const Index n = h.dim();
    Mat<S> b = gaussian_matrix<S>(n, rank, rng);
    Mat<S> c = gaussian_matrix<S>(rank, rank, rng);
    c = (c - Mat<S>(c.adjoint())) / S(2);
    const Mat<S> kw = b * c * b.adjoint();
    return from_whitened(h, kw);
}


/// Seeded finite-dimensional instance: T_n = T + E/n (or T + (-1)^n E).
template <class S>
struct SyntheticEvo {
    SkewOp<S> a;
    LinearOp<S> t_limit;
    std::function<LinearOp<S>(Index)> t_seq;
    ProbeSet<S> probes;
};

template <class S>
inline SyntheticEvo<S> synthetic_evo(Index dim, Index rank, std::uint64_t seed, bool convergent = true)
{
    HOMLAB_THROW_IF(rank < 0 || rank > dim, InvalidArgument, "rank must lie in [0, dim]");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<Real> uni(1.0, 2.0);
    RVec w(dim);
    for (Index i = 0; i < dim; ++i) w(i) = uni(rng);
    const auto h = HilbertSpace<S>::diagonal(w);
    SyntheticEvo<S> out;
    out.a = SkewOp<S>(random_skew(h, rank - rank % 2, rng));
    out.t_limit = random_coercive(h, 0.5, 4.0, rng);
    Mat<S> pert = gaussian_matrix<S>(dim, dim, rng);
    // Small enough to keep T + E coercive.
    pert *= S(0.2 / Eigen::BDCSVD<Mat<S>>(whitened_matrix(LinearOp<S>::dense(h, h, pert))).singularValues()(0));
    const auto e = LinearOp<S>::dense(h, h, pert);
    const auto t = out.t_limit;
    out.t_seq = [t, e, convergent](Index n) {
        const Real s = convergent ? 1.0 / static_cast<Real>(n) : (n % 2 ? -1.0 : 1.0);
        return combine<S>(S(1), t, S(s), e);
    };
    out.probes = ProbeSet<S>::random(h, 8, seed + 1);
    return out;
}

/**
 * @brief 1D two-scale system on H = nodes (Dirichlet) + cells:
 * A = [[0, div], [grad, 0]], T_n = diag(rho(n x), c(n x)).
 */
template <class S>
struct TwoScaleEvo {
    DiscreteGradient<S> grad;
    SkewOp<S> a;
    LinearOp<S> t_limit;
    std::function<LinearOp<S>(Index)> t_seq;
    ProbeSet<S> probes;
    Vec<S> rhs;
    std::function<Vec<S>(Index)> wobble;
};

template <class S>
inline TwoScaleEvo<S> two_scale_evo(std::function<Real(Real)> rho, std::function<Real(Real)> c, Index cells)
{
    HOMLAB_THROW_IF(cells < 2, InvalidArgument, "two-scale fixture needs at least 2 cells");
    TwoScaleEvo<S> out;
    out.grad = DiscreteGradient<S>(GridDomain::unit(1, cells), Flavor::dirichlet);
    const auto& g = out.grad;
    const auto hs = g.scalar_space();
    const auto hv = g.vector_space();
    const std::vector<HilbertSpace<S>> parts{hs, hv};
    const SpMat<S> div = g.div().sparse_matrix();
    out.a = SkewOp<S>(block_sparse<S>(parts, {{SpMat<S>(), div}, {g.matrix(), SpMat<S>()}}));

    const Index nn = g.num_nodes();
    const Index ns = g.num_simplices();
    auto frac = [](Real x) { return x - std::floor(x); };
    const Real mr = integrate(rho, 0.0, 1.0);
    const Real mc = integrate(c, 0.0, 1.0);
    out.t_limit = block_sparse<S>(parts, {{sparse_diagonal<S>(Vec<S>::Constant(nn, S(mr))), SpMat<S>()},
                                          {SpMat<S>(), sparse_diagonal<S>(Vec<S>::Constant(ns, S(mc)))}});
    const auto gg = out.grad;
    out.t_seq = [gg, parts, rho, c, frac](Index n) {
        Vec<S> dn(gg.num_nodes()), dc(gg.num_simplices());
        for (Index i = 0; i < dn.size(); ++i) dn(i) = S(rho(frac(static_cast<Real>(n) * gg.node_point(i)[0])));
        for (Index k = 0; k < dc.size(); ++k) dc(k) = S(c(frac(static_cast<Real>(n) * gg.simplex_barycenter(k)[0])));
        return block_sparse<S>(parts, {{sparse_diagonal<S>(dn), SpMat<S>()}, {SpMat<S>(), sparse_diagonal<S>(dc)}});
    };

    const auto sp = scalar_probes(g, 6);
    const auto vp = vector_probes(g, 6);
    std::vector<Vec<S>> pv;
    for (const auto& p : sp.vectors()) {
        Vec<S> v = Vec<S>::Zero(nn + ns);
        v.head(nn) = p;
        pv.push_back(v);
    }
    for (const auto& p : vp.vectors()) {
        Vec<S> v = Vec<S>::Zero(nn + ns);
        v.tail(ns) = p;
        pv.push_back(v);
    }
    const auto h = out.a.op().source();
    out.probes = ProbeSet<S>(h, pv);
    out.rhs = pv.front();
    out.wobble = [gg, nn, ns](Index n) {
        Vec<S> v = Vec<S>::Zero(nn + ns);
        v.head(nn) = gg.sample_nodes([n](const Point& x) {
            return std::sin(2.0 * std::numbers::pi * static_cast<Real>(n) * x[0]);
        });
        return v;
    };
    return out;
}

} // namespace homlab
