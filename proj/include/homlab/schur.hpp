/**
 * @file schur.hpp
 * @brief Block operators along an orthogonal splitting H = H0 (+) H1 and the
 *        four Schur-topology maps.
 *
 * Explicit decompositions work in basis coordinates (k0, k1 dims, identity
 * weights). Implicit ones keep every vector in ambient coordinates and
 * realize a00^{-1} with a sparse Galerkin solve (H0 = ran G) or CGNR.
 */
#pragma once

#include "homlab/csv.hpp"
#include "homlab/hilbert.hpp"

#include <array>

namespace homlab {

template <class S>
class Decomposition {
public:
    Decomposition() = default;

    /// Validates h0 _|_ h1 and h0 + h1 = H.
    Decomposition(Subspace<S> h0, Subspace<S> h1, Real tol = 1e-8) : h0_(std::move(h0)), h1_(std::move(h1))
    {
        HOMLAB_THROW_IF(!h0_.ambient().same_as(h1_.ambient()), ShapeError, "subspaces live in different spaces");
        HOMLAB_THROW_IF(h0_.is_explicit() != h1_.is_explicit(), InvalidArgument,
                        "explicit and implicit subspaces cannot be mixed in one decomposition");
        const auto& h = h0_.ambient();
        if (h0_.is_explicit()) {
            HOMLAB_THROW_IF(h0_.basis().cols() + h1_.basis().cols() != h.dim(), InvalidArgument,
                            "dim h0 + dim h1 != dim H");
            if (h0_.basis().cols() && h1_.basis().cols()) {
                const Mat<S> cross = h0_.basis().adjoint() * h.weigh_rows(h1_.basis());
                HOMLAB_THROW_IF(cross.cwiseAbs().maxCoeff() > tol, InvalidArgument, "h0 and h1 are not orthogonal");
            }
        } else {
            std::mt19937_64 rng(5);
            for (int k = 0; k < 3; ++k) {
                const Vec<S> x = gaussian_vector<S>(h.dim(), rng);
                const Vec<S> p0 = h0_.project(x);
                const Vec<S> p1 = h1_.project(x);
                const Real nx = h.norm(x);
                HOMLAB_THROW_IF(h.norm(p0 + p1 - x) > tol * nx, InvalidArgument, "P0 + P1 != I");
                HOMLAB_THROW_IF(std::abs(h.inner(p0, p1)) > tol * nx * nx, InvalidArgument,
                                "h0 and h1 are not orthogonal");
            }
        }
    }

    /// (h0, h0^perp).
    static Decomposition from_h0(const Subspace<S>& h0) { return Decomposition(h0, h0.complement()); }

    const HilbertSpace<S>& space() const { return h0_.ambient(); }
    const Subspace<S>& h0() const { return h0_; }
    const Subspace<S>& h1() const { return h1_; }
    bool is_explicit() const { return h0_.is_explicit(); }
    Decomposition swapped() const { return Decomposition(h1_, h0_); }

private:
    Subspace<S> h0_;
    Subspace<S> h1_;
};

/// a_jk = iota_j^* a iota_k.
template <class S>
struct Blocks {
    LinearOp<S> a00, a01, a10, a11;
};

/// The four maps a00^{-1}, a00^{-1} a01, a10 a00^{-1}, a11 - a10 a00^{-1} a01.
template <class S>
struct SchurMaps {
    LinearOp<S> m00inv, m01, m10, ms;
};

template <class S>
inline Blocks<S> blocks(const LinearOp<S>& a, const Decomposition<S>& dec)
{
    HOMLAB_THROW_IF(a.rows() != a.cols() || a.rows() != dec.space().dim(), ShapeError,
                    "blocks: operator must be square on the decomposed space");
    const auto& h = dec.space();
    if (dec.is_explicit()) {
        const Mat<S>& b0 = dec.h0().basis();
        const Mat<S>& b1 = dec.h1().basis();
        const auto c0 = dec.h0().coordinates();
        const auto c1 = dec.h1().coordinates();
        const Mat<S> ab0 = a.apply_columns(b0);
        const Mat<S> ab1 = a.apply_columns(b1);
        const Mat<S> wb0 = h.weigh_rows(b0);
        const Mat<S> wb1 = h.weigh_rows(b1);
        return {LinearOp<S>::dense(c0, c0, wb0.adjoint() * ab0), LinearOp<S>::dense(c1, c0, wb0.adjoint() * ab1),
                LinearOp<S>::dense(c0, c1, wb1.adjoint() * ab0), LinearOp<S>::dense(c1, c1, wb1.adjoint() * ab1)};
    }
    auto sandwich = [&](const Subspace<S>& left, const Subspace<S>& right) {
        return LinearOp<S>::matrix_free(h, h, [a, left, right](const Vec<S>& x) {
            return left.project(a.apply(right.project(x)));
        });
    };
    return {sandwich(dec.h0(), dec.h0()), sandwich(dec.h0(), dec.h1()), sandwich(dec.h1(), dec.h0()),
            sandwich(dec.h1(), dec.h1())};
}

namespace detail {

template <class S>
inline void require_invertible(const Mat<S>& m, const char* what)
{
    if (m.rows() == 0) return;
    const Real rc = rcond_estimate<S>(m);
    HOMLAB_THROW_IF(!(rc * Tolerances::condition >= 1.0), NotInM,
                    std::string(what) + " is not continuously invertible (condition estimate " +
                        std::to_string(rc > 0 ? 1.0 / rc : std::numeric_limits<Real>::infinity()) + ")");
}

/// x |-> (P0 a P0)^{-1} P0 x on H0, in ambient coordinates.
template <class S>
inline typename LinearOp<S>::Applicator implicit_inverse00(const LinearOp<S>& a, const Decomposition<S>& dec)
{
    const auto& h0 = dec.h0();
    const auto& h = dec.space();
    if (const auto* gen = h0.generator(); gen && !h0.is_generator_complement() && a.is_sparse()) {
        std::shared_ptr<PinnedSolver<S>> solver;
        try {
            solver = gen->factor(a);
        } catch (const SolverDiverged& e) {
            throw NotInM(std::string("a00 is singular: ") + e.what());
        }
        const auto g = gen->generator();
        return [solver, g, gen](const Vec<S>& x) { return Vec<S>(g.apply(solver->solve(gen->pull(x)))); };
    }
    HOMLAB_THROW_IF(!a.has_transpose(), MissingTranspose, "CGNR for a00 needs the operator transpose");
    const Index cap = 10 * h.dim();
    return [a, h0, h, cap](const Vec<S>& x) {
        auto fwd = [&](const Vec<S>& v) { return Vec<S>(h0.project(a.apply(h0.project(v)))); };
        auto adj = [&](const Vec<S>& v) { return Vec<S>(h0.project(a.apply_adjoint(h0.project(v)))); };
        auto inner = [&](const Vec<S>& u, const Vec<S>& v) { return h.inner(u, v); };
        return cgnr<S>(fwd, adj, inner, h0.project(x), 1e-10, cap);
    };
}

} // namespace detail

/**
 * @brief Schur maps of `a` for the decomposition.
 * @throws NotInM if a00 or a is not continuously invertible.
 */
template <class S>
inline SchurMaps<S> schur_maps(const LinearOp<S>& a, const Decomposition<S>& dec)
{
    if (dec.is_explicit()) {
        const auto bl = blocks(a, dec);
        const Mat<S> a00 = bl.a00.dense_matrix();
        detail::require_invertible<S>(a00, "a00");
        const auto c0 = dec.h0().coordinates();
        const auto c1 = dec.h1().coordinates();
        Mat<S> inv00, m01, m10;
        if (a00.rows()) {
            Eigen::PartialPivLU<Mat<S>> lu(a00);
            inv00 = lu.inverse();
        } else {
            inv00 = Mat<S>(0, 0);
        }
        m01 = inv00 * bl.a01.dense_matrix();
        m10 = bl.a10.dense_matrix() * inv00;
        const Mat<S> ms = bl.a11.dense_matrix() - bl.a10.dense_matrix() * m01;
        detail::require_invertible<S>(ms, "the Schur complement (hence a)");
        return {LinearOp<S>::dense(c0, c0, inv00), LinearOp<S>::dense(c1, c0, m01),
                LinearOp<S>::dense(c0, c1, m10), LinearOp<S>::dense(c1, c1, ms)};
    }
    const auto& h = dec.space();
    const auto inv = detail::implicit_inverse00(a, dec);
    const auto h0 = dec.h0();
    const auto h1 = dec.h1();
    auto m00 = LinearOp<S>::matrix_free(h, h, [inv](const Vec<S>& x) { return inv(x); });
    auto m01 = LinearOp<S>::matrix_free(h, h, [inv, a, h0, h1](const Vec<S>& x) {
        return inv(h0.project(a.apply(h1.project(x))));
    });
    auto m10 = LinearOp<S>::matrix_free(h, h, [inv, a, h1](const Vec<S>& x) {
        return h1.project(a.apply(inv(x)));
    });
    auto ms = LinearOp<S>::matrix_free(h, h, [inv, a, h0, h1](const Vec<S>& x) {
        const Vec<S> y = a.apply(h1.project(x));
        return Vec<S>(h1.project(y) - h1.project(a.apply(inv(h0.project(y)))));
    });
    return {m00, m01, m10, ms};
}

/**
 * @brief a^{-1} from the 2x2 block formula
 * [[m00inv + m01 ms^{-1} m10, -m01 ms^{-1}], [-ms^{-1} m10, ms^{-1}]].
 */
template <class S>
inline LinearOp<S> block_inverse(const LinearOp<S>& a, const Decomposition<S>& dec)
{
    const auto& h = dec.space();
    if (dec.is_explicit()) {
        const auto m = schur_maps(a, dec);
        const Index k0 = m.m00inv.rows();
        const Index k1 = m.ms.rows();
        Mat<S> msinv = k1 ? Mat<S>(Eigen::PartialPivLU<Mat<S>>(m.ms.dense_matrix()).inverse()) : Mat<S>(0, 0);
        Mat<S> x(k0 + k1, k0 + k1);
        const Mat<S>& m01 = m.m01.dense_matrix();
        const Mat<S>& m10 = m.m10.dense_matrix();
        x.topLeftCorner(k0, k0) = m.m00inv.dense_matrix() + m01 * msinv * m10;
        x.topRightCorner(k0, k1) = -m01 * msinv;
        x.bottomLeftCorner(k1, k0) = -msinv * m10;
        x.bottomRightCorner(k1, k1) = msinv;
        Mat<S> b(h.dim(), k0 + k1);
        b << dec.h0().basis(), dec.h1().basis();
        // a^{-1} = B X B^H W
        return LinearOp<S>::dense(h, h, b * x * h.weigh_rows(b).adjoint());
    }
    const auto m = schur_maps(a, dec);
    const auto madj = schur_maps(adjoint(a), dec);
    const auto h1 = dec.h1();
    const Index cap = 10 * h.dim();
    // ms^* is the Schur complement of a^* on the same splitting.
    auto msinv = [m, madj, h, h1, cap](const Vec<S>& y) {
        auto fwd = [&](const Vec<S>& v) { return m.ms.apply(h1.project(v)); };
        auto adj = [&](const Vec<S>& v) { return madj.ms.apply(h1.project(v)); };
        auto inner = [&](const Vec<S>& u, const Vec<S>& v) { return h.inner(u, v); };
        return cgnr<S>(fwd, adj, inner, h1.project(y), 1e-10, cap);
    };
    const auto h0 = dec.h0();
    return LinearOp<S>::matrix_free(h, h, [m, msinv, h0, h1](const Vec<S>& f) {
        const Vec<S> f0 = h0.project(f);
        const Vec<S> f1 = h1.project(f);
        const Vec<S> u1 = msinv(Vec<S>(f1 - m.m10.apply(f0)));
        return Vec<S>(m.m00inv.apply(f0) - m.m01.apply(u1) + u1);
    });
}

/// Coercivity of the Schur complement; must pass whenever a is in F(alpha, beta).
template <class S>
inline CoercivityReport schur_complement_coercivity(const LinearOp<S>& a, const Decomposition<S>& dec, Real alpha,
                                                    Real beta, Real tol = 1e-9)
{
    HOMLAB_THROW_IF(!dec.is_explicit(), InvalidArgument, "schur_complement_coercivity needs an explicit decomposition");
    return coercivity_check(schur_maps(a, dec).ms, alpha, beta, tol);
}

/**
 * @brief Membership in F(alpha; H0, H1), alpha = ((a00, a01), (a10, a11)).
 *
 * Follows the set as printed: a00 and a_S are both checked against
 * F(alpha00, alpha11), the off-diagonal maps against balls of radius
 * alpha10 and alpha01.
 */
struct SchurClassReport {
    CoercivityReport t00;
    CoercivityReport ts;
    Real norm_m10 = 0.0;
    Real norm_m01 = 0.0;
    bool m10_ok = false;
    bool m01_ok = false;
    /// The same (alpha00, alpha11) pair bounds both diagonal entries.
    bool reuses_diagonal_pair = true;
    bool passes() const { return t00.passes() && ts.passes() && m10_ok && m01_ok; }
};

template <class S>
inline SchurClassReport schur_class_check(const LinearOp<S>& a, const Decomposition<S>& dec,
                                          const std::array<std::array<Real, 2>, 2>& alpha, Real tol = 1e-9)
{
    HOMLAB_THROW_IF(!dec.is_explicit(), InvalidArgument, "schur_class_check needs an explicit decomposition");
    const auto bl = blocks(a, dec);
    const auto m = schur_maps(a, dec);
    SchurClassReport r;
    r.t00 = coercivity_check(bl.a00, alpha[0][0], alpha[1][1], tol);
    r.ts = coercivity_check(m.ms, alpha[0][0], alpha[1][1], tol);
    r.norm_m10 = op_norm(m.m10);
    r.norm_m01 = op_norm(m.m01);
    r.m10_ok = r.norm_m10 <= alpha[1][0] + tol;
    r.m01_ok = r.norm_m01 <= alpha[0][1] + tol;
    return r;
}

/// Four weak-operator gaps (m00inv, m01, m10, ms).
using TauGap = std::array<Real, 4>;

template <class S>
inline TauGap tau_gap(const SchurMaps<S>& a, const SchurMaps<S>& b, const ProbeSet<S>& probes0,
                      const ProbeSet<S>& probes1)
{
    TauGap g{0, 0, 0, 0};
    const bool has0 = probes0.size() > 0;
    const bool has1 = probes1.size() > 0;
    if (has0) g[0] = wot_gap(a.m00inv, b.m00inv, probes0, probes0);
    if (has0 && has1) {
        g[1] = wot_gap(a.m01, b.m01, probes0, probes1);
        g[2] = wot_gap(a.m10, b.m10, probes1, probes0);
    }
    if (has1) g[3] = wot_gap(a.ms, b.ms, probes1, probes1);
    return g;
}

/// Probes live in the subspace coordinates (see ProbeSet::restricted_to).
template <class S>
inline TauGap tau_gap(const LinearOp<S>& a, const LinearOp<S>& b, const Decomposition<S>& dec,
                      const ProbeSet<S>& probes0, const ProbeSet<S>& probes1)
{
    return tau_gap(schur_maps(a, dec), schur_maps(b, dec), probes0, probes1);
}

struct SwapCheck {
    Real err_m00inv = 0.0; ///< |m00inv(a^{-1}, swapped) - ms(a)|
    Real err_m01 = 0.0;    ///< |m01(a^{-1}, swapped) + m10(a)|
    Real err_m10 = 0.0;    ///< |m10(a^{-1}, swapped) + m01(a)|
    Real err_ms = 0.0;     ///< |ms(a^{-1}, swapped) - m00inv(a)|
    Real tol = 1e-9;
    Real max_error() const { return std::max({err_m00inv, err_m01, err_m10, err_ms}); }
    bool passes() const { return max_error() <= tol; }
};

/**
 * @brief Maps of a^{-1} on (H1, H0) versus those of a on (H0, H1):
 * (ms, -m10, -m01, m00inv). Errors are relative to max(1, ||a||, ||a^{-1}||).
 */
template <class S>
inline SwapCheck inversion_swap_check(const LinearOp<S>& a, const Decomposition<S>& dec, Real tol = 1e-9)
{
    HOMLAB_THROW_IF(!dec.is_explicit(), InvalidArgument, "inversion_swap_check needs an explicit decomposition");
    const auto& h = dec.space();
    const auto m = schur_maps(a, dec);
    const Mat<S> ad = a.to_dense();
    detail::require_invertible<S>(ad, "a");
    const auto ainv = LinearOp<S>::dense(h, h, Eigen::PartialPivLU<Mat<S>>(ad).inverse());
    const auto w = schur_maps(ainv, dec.swapped());
    auto maxabs = [](const Mat<S>& x) { return x.size() ? x.cwiseAbs().maxCoeff() : 0.0; };
    const Real scale = std::max({1.0, maxabs(m.ms.dense_matrix()), maxabs(m.m00inv.dense_matrix())});
    SwapCheck r;
    r.tol = tol;
    r.err_m00inv = maxabs(w.m00inv.dense_matrix() - m.ms.dense_matrix()) / scale;
    r.err_m01 = maxabs(w.m01.dense_matrix() + m.m10.dense_matrix()) / scale;
    r.err_m10 = maxabs(w.m10.dense_matrix() + m.m01.dense_matrix()) / scale;
    r.err_ms = maxabs(w.ms.dense_matrix() - m.m00inv.dense_matrix()) / scale;
    return r;
}

/**
 * @brief Moves a finite-dimensional K inside H1 over to H0:
 * returns (H0 (+) K, H1 intersect K^perp).
 */
template <class S>
inline Decomposition<S> finite_shuffle(const Decomposition<S>& dec, const Subspace<S>& k, Real tol = 1e-8)
{
    HOMLAB_THROW_IF(!k.is_explicit(), InvalidArgument, "finite_shuffle needs an explicit basis of K");
    const auto& h = dec.space();
    const Mat<S>& kb = k.basis();
    if (kb.cols() == 0) return dec;
    for (Index j = 0; j < kb.cols(); ++j) {
        const Vec<S> kj = kb.col(j);
        HOMLAB_THROW_IF(h.norm(dec.h1().project(kj) - kj) > tol, InvalidArgument, "K is not contained in h1");
    }
    auto pk = [h, kb](const Vec<S>& v) { return Vec<S>(kb * (kb.adjoint() * h.weigh(v))); };
    if (dec.is_explicit()) {
        Mat<S> b0(h.dim(), dec.h0().basis().cols() + kb.cols());
        b0 << dec.h0().basis(), kb;
        const Mat<S>& b1 = dec.h1().basis();
        const Mat<S> b1k = b1 - kb * (kb.adjoint() * h.weigh_rows(b1));
        auto s0 = Subspace<S>::span(h, b0);
        auto s1 = Subspace<S>::span(h, b1k, 1e-8);
        return Decomposition<S>(s0, s1);
    }
    const auto h0 = dec.h0();
    const auto h1 = dec.h1();
    auto d0 = h0.dim();
    auto d1 = h1.dim();
    auto s0 = Subspace<S>::implicit(
        h, [h0, pk](const Vec<S>& v) { return Vec<S>(h0.project(v) + pk(v)); },
        d0 ? std::optional<Index>(*d0 + kb.cols()) : std::nullopt);
    auto s1 = Subspace<S>::implicit(
        h, [h1, pk](const Vec<S>& v) { return Vec<S>(h1.project(v) - pk(v)); },
        d1 ? std::optional<Index>(*d1 - kb.cols()) : std::nullopt);
    return Decomposition<S>(s0, s1);
}

/// CSV table for tau gap rows.
inline CsvTable tau_gap_table()
{
    return CsvTable("schur_gap", {"n", "gap_m00inv", "gap_m01", "gap_m10", "gap_ms"});
}

inline void add_tau_row(CsvTable& t, long n, const TauGap& g) { t.add({n, g[0], g[1], g[2], g[3]}); }

} // namespace homlab
