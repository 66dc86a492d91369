/**
 * @file linalg.hpp
 * @brief Scalar aliases, sparse solver handles and small eigenvalue helpers.
 *
 * Everything above this layer talks to matrices through these aliases so that
 * the real and complex instantiations share one code path.
 */
#pragma once

#include "homlab/error.hpp"

#include <Eigen/Dense>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <type_traits>
#include <vector>

namespace homlab {

using Index = Eigen::Index;
using Real = double;
using Complex = std::complex<double>;

template <class S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <class S>
using SpMat = Eigen::SparseMatrix<S, Eigen::ColMajor, int>;
using RVec = Vec<Real>;
using RMat = Mat<Real>;

template <class S>
inline constexpr bool is_complex_v = false;
template <class T>
inline constexpr bool is_complex_v<std::complex<T>> = true;

/// Real part for either scalar kind.
template <class S>
inline Real real_part(const S& s)
{
    if constexpr (is_complex_v<S>) {
        return s.real();
    } else {
        return s;
    }
}

/// Draws a standard normal scalar; complex draws use independent parts.
template <class S, class Rng>
inline S gaussian(Rng& rng)
{
    std::normal_distribution<Real> nd(0.0, 1.0);
    if constexpr (is_complex_v<S>) {
        const Real re = nd(rng);
        const Real im = nd(rng);
        return S(re, im);
    } else {
        return nd(rng);
    }
}

template <class S, class Rng>
inline Vec<S> gaussian_vector(Index n, Rng& rng)
{
    Vec<S> v(n);
    for (Index i = 0; i < n; ++i) v(i) = gaussian<S>(rng);
    return v;
}

template <class S, class Rng>
inline Mat<S> gaussian_matrix(Index rows, Index cols, Rng& rng)
{
    Mat<S> m(rows, cols);
    for (Index j = 0; j < cols; ++j)
        for (Index i = 0; i < rows; ++i) m(i, j) = gaussian<S>(rng);
    return m;
}

/// Reciprocal condition estimate of a square dense matrix (1-norm, LU based).
/// Reciprocal condition estimate of a factorization. Eigen's estimator can
/// report 1 for exactly singular input, so it is capped by the pivot ratio.
/// Short scientific rendering for messages.
inline std::string sci(Real v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", v);
    return buf;
}

template <class S>
inline Real lu_rcond(const Eigen::PartialPivLU<Mat<S>>& lu)
{
    if (lu.rows() == 0) return 1.0;
    const RVec piv = lu.matrixLU().diagonal().cwiseAbs();
    const Real mx = piv.maxCoeff();
    if (!(mx > 0.0) || !std::isfinite(mx)) return 0.0;
    const Real rc = lu.rcond();
    return std::isfinite(rc) ? std::min(rc, piv.minCoeff() / mx) : 0.0;
}

template <class S>
inline Real rcond_estimate(const Mat<S>& m)
{
    if (m.rows() == 0) return 1.0;
    return lu_rcond<S>(Eigen::PartialPivLU<Mat<S>>(m));
}

template <class S>
inline bool is_hermitian(const SpMat<S>& k, Real tol = 1e-13)
{
    if (k.rows() != k.cols()) return false;
    const SpMat<S> diff = SpMat<S>(k.adjoint()) - k;
    const Real scale = std::max<Real>(k.norm(), 1e-300);
    return diff.norm() <= tol * scale;
}

/**
 * @brief Factorized square sparse system with a residual contract.
 *
 * Direct factorization below `direct_limit` unknowns, preconditioned BiCGSTAB
 * above. Every solve is checked against the relative residual bound and a
 * violation raises SolverDiverged.
 */
template <class S>
class SparseSolver {
public:
    struct Options {
        Index direct_limit = 200000;
        Real rel_residual = 1e-10;
        Index max_iterations = 0; // 0: 10 * size
    };

    SparseSolver() = default;

    explicit SparseSolver(SpMat<S> k, Options opt = {})
        : k_(std::move(k)), opt_(opt)
    {
        HOMLAB_THROW_IF(k_.rows() != k_.cols(), ShapeError, "sparse system must be square");
        k_.makeCompressed();
        if (k_.rows() == 0) return;
        if (k_.rows() <= opt_.direct_limit) {
            if (is_hermitian(k_)) {
                auto ldlt = std::make_shared<Eigen::SimplicialLDLT<SpMat<S>>>();
                ldlt->compute(k_);
                if (ldlt->info() == Eigen::Success && pivots_ok(*ldlt)) {
                    ldlt_ = std::move(ldlt);
                    return;
                }
            }
            auto lu = std::make_shared<Eigen::SparseLU<SpMat<S>, Eigen::COLAMDOrdering<int>>>();
            lu->analyzePattern(k_);
            lu->factorize(k_);
            HOMLAB_THROW_IF(lu->info() != Eigen::Success, SolverDiverged,
                            "sparse LU factorization failed (singular system?)");
            lu_ = std::move(lu);
        } else {
            auto it = std::make_shared<Eigen::BiCGSTAB<SpMat<S>, Eigen::IncompleteLUT<S>>>();
            it->setTolerance(opt_.rel_residual * 1e-2);
            it->setMaxIterations(opt_.max_iterations > 0 ? opt_.max_iterations : 10 * k_.rows());
            it->compute(k_);
            HOMLAB_THROW_IF(it->info() != Eigen::Success, SolverDiverged,
                            "preconditioner setup failed");
            iterative_ = std::move(it);
        }
    }

    Index size() const { return k_.rows(); }
    const SpMat<S>& matrix() const { return k_; }

    Vec<S> solve(const Vec<S>& b) const
    {
        HOMLAB_THROW_IF(b.size() != k_.rows(), ShapeError, "right-hand side size mismatch");
        if (k_.rows() == 0) return Vec<S>(0);
        const Real bn = b.norm();
        if (bn == 0.0) return Vec<S>::Zero(b.size());
        Vec<S> x;
        if (ldlt_) {
            x = ldlt_->solve(b);
        } else if (lu_) {
            x = lu_->solve(b);
        } else {
            x = iterative_->solve(b);
        }
        const Real res = (k_ * x - b).norm() / bn;
        HOMLAB_THROW_IF(!(res <= opt_.rel_residual), SolverDiverged,
                        "relative residual " + sci(res) + " above " +
                            sci(opt_.rel_residual));
        return x;
    }

private:
    static bool pivots_ok(const Eigen::SimplicialLDLT<SpMat<S>>& f)
    {
        const auto d = f.vectorD();
        const Real mx = d.cwiseAbs().maxCoeff();
        return d.cwiseAbs().minCoeff() > 1e-14 * mx;
    }

    SpMat<S> k_;
    Options opt_{};
    std::shared_ptr<Eigen::SimplicialLDLT<SpMat<S>>> ldlt_;
    std::shared_ptr<Eigen::SparseLU<SpMat<S>, Eigen::COLAMDOrdering<int>>> lu_;
    std::shared_ptr<Eigen::BiCGSTAB<SpMat<S>, Eigen::IncompleteLUT<S>>> iterative_;
};

/// Chooses one row per kernel vector so that the pinned rows make the
/// restricted kernel block invertible.
template <class S>
inline std::vector<Index> choose_pins(const Mat<S>& kernel)
{
    std::vector<Index> pins;
    if (kernel.cols() == 0) return pins;
    Eigen::ColPivHouseholderQR<Mat<S>> qr(kernel.transpose());
    const auto& perm = qr.colsPermutation().indices();
    for (Index j = 0; j < kernel.cols(); ++j) pins.push_back(perm(j));
    std::sort(pins.begin(), pins.end());
    return pins;
}

/**
 * @brief Solves a singular sparse system with known kernel by pinning dofs.
 *
 * The pinned unknowns are set to zero and their equations dropped; the
 * remaining system is nonsingular. Callers must supply compatible
 * right-hand sides; the full residual is checked after expansion.
 */
template <class S>
class PinnedSolver {
public:
    PinnedSolver() = default;

    PinnedSolver(const SpMat<S>& k, std::vector<Index> pins, typename SparseSolver<S>::Options opt = {})
        : n_(k.rows()), pins_(std::move(pins)), full_(k), tol_(opt.rel_residual)
    {
        std::sort(pins_.begin(), pins_.end());
        map_.assign(static_cast<std::size_t>(n_), -1);
        Index next = 0;
        std::size_t p = 0;
        for (Index i = 0; i < n_; ++i) {
            if (p < pins_.size() && pins_[p] == i) {
                ++p;
                continue;
            }
            map_[static_cast<std::size_t>(i)] = next++;
        }
        std::vector<Eigen::Triplet<S>> trip;
        trip.reserve(static_cast<std::size_t>(k.nonZeros()));
        for (int c = 0; c < k.outerSize(); ++c)
            for (typename SpMat<S>::InnerIterator it(k, c); it; ++it) {
                const Index r = map_[static_cast<std::size_t>(it.row())];
                const Index cc = map_[static_cast<std::size_t>(it.col())];
                if (r >= 0 && cc >= 0) trip.emplace_back(r, cc, it.value());
            }
        SpMat<S> red(next, next);
        red.setFromTriplets(trip.begin(), trip.end());
        // The reduced solve carries a slightly looser bound; the full residual
        // below enforces the contract.
        auto ropt = opt;
        ropt.rel_residual = std::max(opt.rel_residual, 1e-10);
        solver_ = std::make_shared<SparseSolver<S>>(std::move(red), ropt);
    }

    Index size() const { return n_; }
    const std::vector<Index>& pins() const { return pins_; }

    /// `floor` bounds the residual denominator from below, for right-hand
    /// sides that are pure rounding noise.
    Vec<S> solve(const Vec<S>& b, Real floor = 0.0) const
    {
        HOMLAB_THROW_IF(b.size() != n_, ShapeError, "right-hand side size mismatch");
        Vec<S> rb(solver_->size());
        for (Index i = 0; i < n_; ++i) {
            const Index m = map_[static_cast<std::size_t>(i)];
            if (m >= 0) rb(m) = b(i);
        }
        const Vec<S> rx = solver_->solve(rb);
        Vec<S> x = Vec<S>::Zero(n_);
        for (Index i = 0; i < n_; ++i) {
            const Index m = map_[static_cast<std::size_t>(i)];
            if (m >= 0) x(i) = rx(m);
        }
        const Real bn = std::max(b.norm(), floor);
        if (bn > 0.0) {
            const Real res = (full_ * x - b).norm() / bn;
            HOMLAB_THROW_IF(!(res <= std::max(tol_, 1e-10)), SolverDiverged,
                            "pinned solve residual " + sci(res) +
                                " (incompatible right-hand side?)");
        }
        return x;
    }

private:
    Index n_ = 0;
    std::vector<Index> pins_;
    std::vector<Index> map_;
    SpMat<S> full_;
    Real tol_ = 1e-10;
    std::shared_ptr<SparseSolver<S>> solver_;
};

/**
 * @brief Extreme eigenvalues of a self-adjoint operator by Lanczos.
 *
 * Full reorthogonalization in the supplied inner product. Used only above the
 * dense-eigensolver cutoff.
 */
template <class S>
inline std::pair<Real, Real> lanczos_extremes(const std::function<Vec<S>(const Vec<S>&)>& apply,
                                              const std::function<S(const Vec<S>&, const Vec<S>&)>& inner,
                                              Index n, Index steps, std::uint64_t seed = 7)
{
    steps = std::min(steps, n);
    std::mt19937_64 rng(seed);
    std::vector<Vec<S>> q;
    Vec<S> v = gaussian_vector<S>(n, rng);
    v /= std::sqrt(real_part(inner(v, v)));
    RVec alpha(steps), beta(steps);
    Index m = 0;
    for (Index k = 0; k < steps; ++k) {
        q.push_back(v);
        Vec<S> w = apply(v);
        alpha(k) = real_part(inner(v, w));
        for (int pass = 0; pass < 2; ++pass)
            for (const auto& qi : q) w -= inner(qi, w) * qi;
        const Real b = std::sqrt(std::max<Real>(0.0, real_part(inner(w, w))));
        beta(k) = b;
        m = k + 1;
        if (b < 1e-12) break;
        v = w / b;
    }
    RMat tri = RMat::Zero(m, m);
    for (Index k = 0; k < m; ++k) {
        tri(k, k) = alpha(k);
        if (k + 1 < m) tri(k, k + 1) = tri(k + 1, k) = beta(k);
    }
    Eigen::SelfAdjointEigenSolver<RMat> es(tri, Eigen::EigenvaluesOnly);
    return {es.eigenvalues()(0), es.eigenvalues()(m - 1)};
}

/// Least-squares slope of log(y) against log(x).
inline Real loglog_slope(const std::vector<Real>& x, const std::vector<Real>& y)
{
    HOMLAB_THROW_IF(x.size() != y.size() || x.size() < 2, InvalidArgument, "slope needs >= 2 points");
    Real sx = 0, sy = 0, sxx = 0, sxy = 0;
    const Real n = static_cast<Real>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const Real lx = std::log(x[i]);
        const Real ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

/// Pearson correlation of two equally long samples.
inline Real correlation(const std::vector<Real>& a, const std::vector<Real>& b)
{
    HOMLAB_THROW_IF(a.size() != b.size() || a.size() < 2, InvalidArgument, "correlation needs >= 2 points");
    const Real n = static_cast<Real>(a.size());
    Real ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    Real sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) return 1.0;
    return sab / std::sqrt(saa * sbb);
}

/**
 * @brief CGLS for min ||A x - b|| in a weighted inner product.
 *
 * `apply_adj` must be the adjoint of `apply` in the same inner product.
 * Stops at relative residual `tol` (consistent systems) or when the normal
 * residual stalls; throws SolverDiverged after `max_it` steps.
 */
template <class S>
inline Vec<S> cgnr(const std::function<Vec<S>(const Vec<S>&)>& apply,
                   const std::function<Vec<S>(const Vec<S>&)>& apply_adj,
                   const std::function<S(const Vec<S>&, const Vec<S>&)>& inner, const Vec<S>& b, Real tol,
                   Index max_it)
{
    auto nrm = [&](const Vec<S>& v) { return std::sqrt(std::max<Real>(0.0, real_part(inner(v, v)))); };
    const Real bn = nrm(b);
    Vec<S> x = Vec<S>::Zero(b.size());
    if (bn == 0.0) return x;
    Vec<S> r = b;
    Vec<S> s = apply_adj(r);
    Vec<S> p = s;
    Real gamma = real_part(inner(s, s));
    const Real gamma0 = gamma;
    for (Index it = 0; it < max_it; ++it) {
        if (nrm(r) <= tol * bn || gamma <= tol * tol * tol * gamma0) return x;
        const Vec<S> q = apply(p);
        const Real qq = real_part(inner(q, q));
        if (qq == 0.0) break;
        const Real step = gamma / qq;
        x += step * p;
        r -= step * q;
        s = apply_adj(r);
        const Real g2 = real_part(inner(s, s));
        p = s + (g2 / gamma) * p;
        gamma = g2;
    }
    if (nrm(r) <= tol * bn) return x;
    throw SolverDiverged("CGNR did not reach relative residual " + sci(tol));
}

} // namespace homlab
