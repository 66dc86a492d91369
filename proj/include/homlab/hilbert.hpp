/**
 * @file hilbert.hpp
 * @brief Finite-dimensional weighted Hilbert spaces, operators between them,
 *        subspaces, coercivity classes and weak-operator gap diagnostics.
 *
 * Inner products are anti-linear in the first slot: inner(x, y) = x^H W y.
 * Adjoints are taken with respect to the weights, A* = W_src^{-1} A^H W_tgt.
 */
#pragma once

#include "homlab/error.hpp"
#include "homlab/linalg.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstdint>
#include <functional>
#include <iomanip>
#include <istream>
#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace homlab {

/// Default cutoffs used across the library.
struct Tolerances {
    static constexpr Real rank = 1e-10;          ///< relative singular value cutoff
    static constexpr Real orthonormality = 1e-10;
    static constexpr Real projector = 1e-8;      ///< idempotency / self-adjointness of implicit projectors
    static constexpr Real condition = 1e12;      ///< "continuously invertible" cutoff
};

/// Dimension above which subspaces are kept as implicit projectors.
inline constexpr Index kExplicitSubspaceLimit = 2000;
/// Dimension above which eigenvalue bounds switch from dense to Lanczos.
inline constexpr Index kDenseEigenLimit = 1200;

// ---------------------------------------------------------------------------
// HilbertSpace
// ---------------------------------------------------------------------------

/**
 * @brief K^n with inner product x^H W y.
 *
 * Cheap to copy; the weight data is shared.
 */
template <class S>
class HilbertSpace {
public:
    HilbertSpace() : HilbertSpace(identity(0)) {}

    static HilbertSpace identity(Index n) { return diagonal(RVec::Ones(n)); }

    static HilbertSpace diagonal(RVec w)
    {
        HOMLAB_THROW_IF(w.size() > 0 && !(w.minCoeff() > 0.0), InvalidArgument,
                        "weights must be strictly positive");
        auto d = std::make_shared<Data>();
        d->n = w.size();
        d->sqrt_diag = w.cwiseSqrt();
        d->diag = std::move(w);
        return HilbertSpace(std::move(d));
    }

    /// Full Hermitian positive-definite weight.
    static HilbertSpace dense(Mat<S> w)
    {
        HOMLAB_THROW_IF(w.rows() != w.cols(), ShapeError, "weight must be square");
        const Real asym = (w - w.adjoint()).norm();
        HOMLAB_THROW_IF(asym > 1e-12 * std::max<Real>(1.0, w.norm()), InvalidArgument,
                        "weight must be Hermitian");
        auto d = std::make_shared<Data>();
        d->n = w.rows();
        d->llt.compute(w);
        HOMLAB_THROW_IF(d->llt.info() != Eigen::Success, InvalidArgument,
                        "weight must be positive definite");
        d->diag = w.diagonal().real();
        d->full = std::move(w);
        d->is_diag = false;
        return HilbertSpace(std::move(d));
    }

    Index dim() const { return d_->n; }
    bool is_diagonal() const { return d_->is_diag; }
    /// Diagonal of W (the full weight in diagonal mode).
    const RVec& weights() const { return d_->diag; }

    Mat<S> weight_matrix() const
    {
        if (is_diagonal()) return d_->diag.template cast<S>().asDiagonal();
        return d_->full;
    }

    Vec<S> weigh(const Vec<S>& x) const
    {
        check(x);
        if (is_diagonal()) return d_->diag.template cast<S>().cwiseProduct(x);
        return d_->full * x;
    }

    Vec<S> unweigh(const Vec<S>& y) const
    {
        check(y);
        if (is_diagonal()) return y.cwiseQuotient(d_->diag.template cast<S>());
        return d_->llt.solve(y);
    }

    S inner(const Vec<S>& x, const Vec<S>& y) const
    {
        check(x);
        check(y);
        if (is_diagonal()) return x.dot(d_->diag.template cast<S>().cwiseProduct(y));
        return x.dot(d_->full * y);
    }

    Real norm(const Vec<S>& x) const { return std::sqrt(std::max<Real>(0.0, real_part(inner(x, x)))); }

    /// L^H x with W = L L^H; Euclidean norm of the result equals norm(x).
    Vec<S> whiten(const Vec<S>& x) const
    {
        check(x);
        if (is_diagonal()) return d_->sqrt_diag.template cast<S>().cwiseProduct(x);
        return d_->llt.matrixU() * x;
    }

    Vec<S> unwhiten(const Vec<S>& y) const
    {
        check(y);
        if (is_diagonal()) return y.cwiseQuotient(d_->sqrt_diag.template cast<S>());
        return d_->llt.matrixU().solve(y);
    }

    Mat<S> whiten_rows(const Mat<S>& m) const
    {
        if (is_diagonal()) return d_->sqrt_diag.template cast<S>().asDiagonal() * m;
        return d_->llt.matrixU() * m;
    }

    Mat<S> unwhiten_rows(const Mat<S>& m) const
    {
        if (is_diagonal()) return d_->sqrt_diag.cwiseInverse().template cast<S>().asDiagonal() * m;
        return d_->llt.matrixU().solve(m);
    }

    /// W M.
    Mat<S> weigh_rows(const Mat<S>& m) const
    {
        if (is_diagonal()) return d_->diag.template cast<S>().asDiagonal() * m;
        return d_->full * m;
    }

    /// W^{-1} M.
    Mat<S> unweigh_rows(const Mat<S>& m) const
    {
        if (is_diagonal()) return d_->diag.cwiseInverse().template cast<S>().asDiagonal() * m;
        return d_->llt.solve(m);
    }

    /// M W.
    Mat<S> weigh_cols(const Mat<S>& m) const
    {
        if (is_diagonal()) return m * d_->diag.template cast<S>().asDiagonal();
        return m * d_->full;
    }

    bool same_as(const HilbertSpace& o) const { return d_ == o.d_; }

private:
    struct Data {
        Index n = 0;
        RVec diag;
        RVec sqrt_diag;
        Mat<S> full;
        Eigen::LLT<Mat<S>> llt;
        bool is_diag = true;
    };

    explicit HilbertSpace(std::shared_ptr<const Data> d) : d_(std::move(d)) {}

    void check(const Vec<S>& x) const
    {
        HOMLAB_THROW_IF(x.size() != d_->n, ShapeError,
                        "vector of size " + std::to_string(x.size()) + " in space of dim " +
                            std::to_string(d_->n));
    }

    std::shared_ptr<const Data> d_;
};

/// Orthogonal sum of spaces (block-diagonal weight).
template <class S>
inline HilbertSpace<S> direct_sum(const std::vector<HilbertSpace<S>>& parts)
{
    Index n = 0;
    bool diag = true;
    for (const auto& p : parts) {
        n += p.dim();
        diag = diag && p.is_diagonal();
    }
    if (diag) {
        RVec w(n);
        Index off = 0;
        for (const auto& p : parts) {
            w.segment(off, p.dim()) = p.weights();
            off += p.dim();
        }
        return HilbertSpace<S>::diagonal(std::move(w));
    }
    Mat<S> w = Mat<S>::Zero(n, n);
    Index off = 0;
    for (const auto& p : parts) {
        w.block(off, off, p.dim(), p.dim()) = p.weight_matrix();
        off += p.dim();
    }
    return HilbertSpace<S>::dense(std::move(w));
}

// ---------------------------------------------------------------------------
// LinearOp
// ---------------------------------------------------------------------------

/**
 * @brief Bounded operator between two HilbertSpaces.
 *
 * Backed by a dense matrix, a sparse matrix, or a matrix-free applicator with
 * an optional conjugate-transpose applicator.
 */
template <class S>
class LinearOp {
public:
    using Applicator = std::function<Vec<S>(const Vec<S>&)>;
    enum class Kind { dense, sparse, matrix_free };

    LinearOp() = default;

    static LinearOp dense(HilbertSpace<S> src, HilbertSpace<S> tgt, Mat<S> m)
    {
        HOMLAB_THROW_IF(m.rows() != tgt.dim() || m.cols() != src.dim(), ShapeError,
                        "dense matrix does not match source/target dims");
        LinearOp op(std::move(src), std::move(tgt), Kind::dense);
        op.dense_ = std::make_shared<const Mat<S>>(std::move(m));
        return op;
    }

    static LinearOp sparse(HilbertSpace<S> src, HilbertSpace<S> tgt, SpMat<S> m)
    {
        HOMLAB_THROW_IF(m.rows() != tgt.dim() || m.cols() != src.dim(), ShapeError,
                        "sparse matrix does not match source/target dims");
        m.makeCompressed();
        LinearOp op(std::move(src), std::move(tgt), Kind::sparse);
        op.sparse_ = std::make_shared<const SpMat<S>>(std::move(m));
        return op;
    }

    static LinearOp matrix_free(HilbertSpace<S> src, HilbertSpace<S> tgt, Applicator apply,
                                Applicator apply_conj_transpose = nullptr)
    {
        LinearOp op(std::move(src), std::move(tgt), Kind::matrix_free);
        op.apply_ = std::move(apply);
        op.apply_ct_ = std::move(apply_conj_transpose);
        return op;
    }

    const HilbertSpace<S>& source() const { return src_; }
    const HilbertSpace<S>& target() const { return tgt_; }
    Index rows() const { return tgt_.dim(); }
    Index cols() const { return src_.dim(); }
    Kind kind() const { return kind_; }
    bool is_sparse() const { return kind_ == Kind::sparse; }
    bool is_dense() const { return kind_ == Kind::dense; }
    const Mat<S>& dense_matrix() const { return *dense_; }
    const SpMat<S>& sparse_matrix() const { return *sparse_; }
    bool has_transpose() const { return kind_ != Kind::matrix_free || static_cast<bool>(apply_ct_); }

    Vec<S> apply(const Vec<S>& x) const
    {
        HOMLAB_THROW_IF(x.size() != cols(), ShapeError,
                        "operator expects input of size " + std::to_string(cols()) + ", got " +
                            std::to_string(x.size()));
        switch (kind_) {
        case Kind::dense: return (*dense_) * x;
        case Kind::sparse: return (*sparse_) * x;
        default: return apply_(x);
        }
    }

    /// Euclidean conjugate transpose A^H y.
    Vec<S> apply_conj_transpose(const Vec<S>& y) const
    {
        HOMLAB_THROW_IF(y.size() != rows(), ShapeError, "conjugate transpose input size mismatch");
        switch (kind_) {
        case Kind::dense: return dense_->adjoint() * y;
        case Kind::sparse: return sparse_->adjoint() * y;
        default:
            HOMLAB_THROW_IF(!apply_ct_, MissingTranspose, "matrix-free operator has no transpose applicator");
            return apply_ct_(y);
        }
    }

    /// Weighted adjoint W_src^{-1} A^H W_tgt y.
    Vec<S> apply_adjoint(const Vec<S>& y) const
    {
        return src_.unweigh(apply_conj_transpose(tgt_.weigh(y)));
    }

    Mat<S> to_dense() const
    {
        if (kind_ == Kind::dense) return *dense_;
        if (kind_ == Kind::sparse) return Mat<S>(*sparse_);
        Mat<S> m(rows(), cols());
        for (Index j = 0; j < cols(); ++j) m.col(j) = apply(Vec<S>::Unit(cols(), j));
        return m;
    }

    Mat<S> apply_columns(const Mat<S>& x) const
    {
        if (kind_ == Kind::dense) return (*dense_) * x;
        if (kind_ == Kind::sparse) return (*sparse_) * x;
        Mat<S> out(rows(), x.cols());
        for (Index j = 0; j < x.cols(); ++j) out.col(j) = apply(x.col(j));
        return out;
    }

private:
    LinearOp(HilbertSpace<S> src, HilbertSpace<S> tgt, Kind k)
        : src_(std::move(src)), tgt_(std::move(tgt)), kind_(k)
    {}

    HilbertSpace<S> src_;
    HilbertSpace<S> tgt_;
    Kind kind_ = Kind::dense;
    std::shared_ptr<const Mat<S>> dense_;
    std::shared_ptr<const SpMat<S>> sparse_;
    Applicator apply_;
    Applicator apply_ct_;
};

template <class S>
inline LinearOp<S> identity_op(const HilbertSpace<S>& h)
{
    SpMat<S> id(h.dim(), h.dim());
    id.setIdentity();
    return LinearOp<S>::sparse(h, h, std::move(id));
}

/// W-adjoint as an operator. Matrix-free operators need a transpose applicator.
template <class S>
inline LinearOp<S> adjoint(const LinearOp<S>& op)
{
    const auto src = op.source();
    const auto tgt = op.target();
    using Kind = typename LinearOp<S>::Kind;
    if (op.kind() == Kind::dense) {
        return LinearOp<S>::dense(tgt, src, src.unweigh_rows(tgt.weigh_cols(op.dense_matrix().adjoint())));
    }
    if (op.kind() == Kind::sparse) {
        if (src.is_diagonal() && tgt.is_diagonal()) {
            const SpMat<S> ah = op.sparse_matrix().adjoint();
            SpMat<S> m = src.weights().cwiseInverse().template cast<S>().asDiagonal() * ah *
                         tgt.weights().template cast<S>().asDiagonal();
            return LinearOp<S>::sparse(tgt, src, std::move(m));
        }
        const Mat<S> ah = Mat<S>(op.sparse_matrix().adjoint());
        return LinearOp<S>::dense(tgt, src, src.unweigh_rows(tgt.weigh_cols(ah)));
    }
    HOMLAB_THROW_IF(!op.has_transpose(), MissingTranspose, "matrix-free operator has no transpose applicator");
    // (W_s^{-1} A^H W_t)^H = W_t A W_s^{-1}
    return LinearOp<S>::matrix_free(
        tgt, src, [op](const Vec<S>& y) { return op.apply_adjoint(y); },
        [op, src, tgt](const Vec<S>& x) { return tgt.weigh(op.apply(src.unweigh(x))); });
}

/// a o b.
template <class S>
inline LinearOp<S> compose(const LinearOp<S>& a, const LinearOp<S>& b)
{
    HOMLAB_THROW_IF(a.cols() != b.rows(), ShapeError, "compose: inner dimensions differ");
    using Kind = typename LinearOp<S>::Kind;
    if (a.kind() == Kind::sparse && b.kind() == Kind::sparse)
        return LinearOp<S>::sparse(b.source(), a.target(), SpMat<S>(a.sparse_matrix() * b.sparse_matrix()));
    if (a.kind() != Kind::matrix_free && b.kind() != Kind::matrix_free)
        return LinearOp<S>::dense(b.source(), a.target(), a.to_dense() * b.to_dense());
    typename LinearOp<S>::Applicator ct;
    if (a.has_transpose() && b.has_transpose())
        ct = [a, b](const Vec<S>& y) { return b.apply_conj_transpose(a.apply_conj_transpose(y)); };
    return LinearOp<S>::matrix_free(
        b.source(), a.target(), [a, b](const Vec<S>& x) { return a.apply(b.apply(x)); }, ct);
}

template <class S>
inline S internal_conj(const S& s)
{
    if constexpr (is_complex_v<S>) {
        return std::conj(s);
    } else {
        return s;
    }
}

/// alpha a + beta b.
template <class S>
inline LinearOp<S> combine(S alpha, const LinearOp<S>& a, S beta, const LinearOp<S>& b)
{
    HOMLAB_THROW_IF(a.rows() != b.rows() || a.cols() != b.cols(), ShapeError, "combine: shapes differ");
    using Kind = typename LinearOp<S>::Kind;
    if (a.kind() == Kind::sparse && b.kind() == Kind::sparse)
        return LinearOp<S>::sparse(a.source(), a.target(),
                                   SpMat<S>(alpha * a.sparse_matrix() + beta * b.sparse_matrix()));
    if (a.kind() != Kind::matrix_free && b.kind() != Kind::matrix_free)
        return LinearOp<S>::dense(a.source(), a.target(), alpha * a.to_dense() + beta * b.to_dense());
    typename LinearOp<S>::Applicator ct;
    if (a.has_transpose() && b.has_transpose())
        ct = [=](const Vec<S>& y) {
            return Vec<S>(internal_conj(alpha) * a.apply_conj_transpose(y) +
                          internal_conj(beta) * b.apply_conj_transpose(y));
        };
    return LinearOp<S>::matrix_free(
        a.source(), a.target(), [=](const Vec<S>& x) { return Vec<S>(alpha * a.apply(x) + beta * b.apply(x)); },
        ct);
}

template <class S>
inline LinearOp<S> operator-(const LinearOp<S>& a, const LinearOp<S>& b)
{
    return combine<S>(S(1), a, S(-1), b);
}

template <class S>
inline LinearOp<S> operator+(const LinearOp<S>& a, const LinearOp<S>& b)
{
    return combine<S>(S(1), a, S(1), b);
}

/// Whitened matrix L_t^H A L_s^{-H}: the operator in orthonormal coordinates.
/**
 * @brief Sparse block operator on direct_sum(parts). blocks[i][j] maps part j
 * to part i; an empty (0x0) block is zero.
 */
template <class S>
inline LinearOp<S> block_sparse(const std::vector<HilbertSpace<S>>& parts,
                                const std::vector<std::vector<SpMat<S>>>& blocks)
{
    const std::size_t m = parts.size();
    HOMLAB_THROW_IF(blocks.size() != m, ShapeError, "block_sparse: block rows do not match parts");
    std::vector<Index> off(m + 1, 0);
    for (std::size_t i = 0; i < m; ++i) off[i + 1] = off[i] + parts[i].dim();
    std::vector<Eigen::Triplet<S>> trip;
    for (std::size_t i = 0; i < m; ++i) {
        HOMLAB_THROW_IF(blocks[i].size() != m, ShapeError, "block_sparse: block columns do not match parts");
        for (std::size_t j = 0; j < m; ++j) {
            const SpMat<S>& b = blocks[i][j];
            if (b.rows() == 0 && b.cols() == 0) continue;
            HOMLAB_THROW_IF(b.rows() != parts[i].dim() || b.cols() != parts[j].dim(), ShapeError,
                            "block_sparse: block (" + std::to_string(i) + "," + std::to_string(j) + ") has wrong shape");
            for (Index c = 0; c < b.outerSize(); ++c)
                for (typename SpMat<S>::InnerIterator it(b, c); it; ++it)
                    trip.emplace_back(off[i] + it.row(), off[j] + it.col(), it.value());
        }
    }
    SpMat<S> out(off[m], off[m]);
    out.setFromTriplets(trip.begin(), trip.end());
    const auto h = direct_sum(parts);
    return LinearOp<S>::sparse(h, h, std::move(out));
}

/// Sparse diagonal matrix from a vector.
template <class S>
inline SpMat<S> sparse_diagonal(const Vec<S>& d)
{
    SpMat<S> m(d.size(), d.size());
    m.reserve(Eigen::VectorXi::Constant(d.size(), 1));
    for (Index i = 0; i < d.size(); ++i) m.insert(i, i) = d(i);
    m.makeCompressed();
    return m;
}

template <class S>
inline Mat<S> whitened_matrix(const LinearOp<S>& op)
{
    const Mat<S> a = op.to_dense();
    const Mat<S> right = op.source().unwhiten_rows(Mat<S>::Identity(op.cols(), op.cols()));
    return op.target().whiten_rows(a * right);
}

/// Inverse of whitened_matrix for an endomorphism of h.
template <class S>
inline LinearOp<S> from_whitened(const HilbertSpace<S>& h, const Mat<S>& m)
{
    // U^{-1} m U with W = U^H U; m U = (U^H m^H)^H and U^H X = W U^{-1} X.
    const Mat<S> mu = h.weigh_rows(h.unwhiten_rows(Mat<S>(m.adjoint()))).adjoint();
    return LinearOp<S>::dense(h, h, h.unwhiten_rows(mu));
}

/// Operator norm in the weighted norms.
template <class S>
inline Real op_norm(const LinearOp<S>& op)
{
    if (op.rows() == 0 || op.cols() == 0) return 0.0;
    if (std::max(op.rows(), op.cols()) <= kExplicitSubspaceLimit) {
        Eigen::BDCSVD<Mat<S>> svd(whitened_matrix(op));
        return svd.singularValues()(0);
    }
    const auto h = op.source();
    const auto [lo, hi] = lanczos_extremes<S>(
        [&](const Vec<S>& x) { return op.apply_adjoint(op.apply(x)); },
        [&](const Vec<S>& x, const Vec<S>& y) { return h.inner(x, y); }, h.dim(), 200);
    (void)lo;
    return std::sqrt(std::max<Real>(0.0, hi));
}

// ---------------------------------------------------------------------------
// Subspaces
// ---------------------------------------------------------------------------

/**
 * @brief ran(G) for a sparse G with diagonal weights, kept implicitly.
 *
 * The W-orthogonal projector is P v = G x with (G^H W_v G) x = G^H W_v v.
 * A known kernel of G is deflated by pinning dofs.
 */
template <class S>
class GeneratedRange {
public:
    GeneratedRange(LinearOp<S> g, Mat<S> kernel)
        : g_(std::move(g)), kernel_(std::move(kernel)), pins_(choose_pins<S>(kernel_))
    {
        HOMLAB_THROW_IF(!g_.is_sparse(), InvalidArgument, "generated range needs a sparse generator");
        HOMLAB_THROW_IF(!g_.source().is_diagonal() || !g_.target().is_diagonal(), InvalidArgument,
                        "generated range needs diagonal weights");
        HOMLAB_THROW_IF(kernel_.cols() > 0 && kernel_.rows() != g_.cols(), ShapeError,
                        "kernel basis lives in the generator source");
        gram_ = std::make_shared<PinnedSolver<S>>(sandwich(identity_op(g_.target())), pins_);
    }

    const LinearOp<S>& generator() const { return g_; }
    const Mat<S>& kernel() const { return kernel_; }
    const std::vector<Index>& pins() const { return pins_; }
    Index range_dim() const { return g_.cols() - kernel_.cols(); }

    /// G^H W_v A G as a sparse matrix (A sparse on the target space).
    SpMat<S> sandwich(const LinearOp<S>& a) const
    {
        HOMLAB_THROW_IF(!a.is_sparse(), InvalidArgument, "sandwich needs a sparse operator");
        const SpMat<S>& g = g_.sparse_matrix();
        const SpMat<S> wg = g_.target().weights().template cast<S>().asDiagonal() * a.sparse_matrix() * g;
        return SpMat<S>(g.adjoint() * wg);
    }

    /// G^H W_v v.
    Vec<S> pull(const Vec<S>& v) const { return g_.apply_conj_transpose(g_.target().weigh(v)); }

    Vec<S> project(const Vec<S>& v) const
    {
        // |G|^H W |v| sizes the rounding error of the pulled right-hand side.
        const RVec mag = g_.sparse_matrix().cwiseAbs().transpose() * g_.target().weigh(v).cwiseAbs();
        return g_.apply(gram_->solve(pull(v), mag.norm()));
    }

    std::shared_ptr<PinnedSolver<S>> factor(const LinearOp<S>& a) const
    {
        return std::make_shared<PinnedSolver<S>>(sandwich(a), pins_);
    }

private:
    LinearOp<S> g_;
    Mat<S> kernel_;
    std::vector<Index> pins_;
    std::shared_ptr<PinnedSolver<S>> gram_;
};

/**
 * @brief Closed subspace of a HilbertSpace.
 *
 * Explicit mode stores a W-orthonormal basis B (coordinates c <-> B c);
 * implicit mode stores a projector applicator and works in ambient
 * coordinates.
 */
template <class S>
class Subspace {
public:
    using Projector = std::function<Vec<S>(const Vec<S>&)>;

    Subspace() = default;

    /// Wraps an already orthonormal basis; validated to `tol`.
    static Subspace from_basis(HilbertSpace<S> ambient, Mat<S> basis, Real tol = Tolerances::orthonormality)
    {
        HOMLAB_THROW_IF(basis.rows() != ambient.dim(), ShapeError, "basis rows must match ambient dim");
        const Mat<S> gram = basis.adjoint() * ambient.weigh_rows(basis);
        const Real err = basis.cols() == 0
                             ? 0.0
                             : (gram - Mat<S>::Identity(basis.cols(), basis.cols())).cwiseAbs().maxCoeff();
        HOMLAB_THROW_IF(err > tol, InvalidArgument,
                        "basis is not W-orthonormal (deviation " + sci(err) + ")");
        Subspace s;
        s.ambient_ = std::move(ambient);
        s.basis_ = std::move(basis);
        s.explicit_ = true;
        return s;
    }

    /// Orthonormalized span of the given columns.
    static Subspace span(HilbertSpace<S> ambient, const Mat<S>& vectors, Real rank_tol = Tolerances::rank)
    {
        HOMLAB_THROW_IF(vectors.rows() != ambient.dim(), ShapeError, "span: vectors must live in ambient");
        if (vectors.cols() == 0) return zero(ambient);
        const Mat<S> y = ambient.whiten_rows(vectors);
        Eigen::BDCSVD<Mat<S>> svd(y, Eigen::ComputeThinU);
        const auto& sv = svd.singularValues();
        Index r = 0;
        const Real cut = rank_tol * std::max<Real>(sv.size() ? sv(0) : 0.0, 1e-300);
        while (r < sv.size() && sv(r) > cut) ++r;
        Mat<S> basis = ambient.unwhiten_rows(svd.matrixU().leftCols(r));
        return from_basis(std::move(ambient), std::move(basis), 1e-8);
    }

    static Subspace zero(HilbertSpace<S> ambient)
    {
        Subspace s;
        s.basis_ = Mat<S>(ambient.dim(), 0);
        s.ambient_ = std::move(ambient);
        s.explicit_ = true;
        return s;
    }

    static Subspace whole(HilbertSpace<S> ambient)
    {
        Mat<S> b = ambient.unwhiten_rows(Mat<S>::Identity(ambient.dim(), ambient.dim()));
        return from_basis(std::move(ambient), std::move(b), 1e-8);
    }

    static Subspace implicit(HilbertSpace<S> ambient, Projector p, std::optional<Index> dim = std::nullopt)
    {
        Subspace s;
        s.ambient_ = std::move(ambient);
        s.projector_ = std::move(p);
        s.dim_ = dim;
        s.explicit_ = false;
        return s;
    }

    /// Implicit ran(g); `kernel` is a basis of ker(g) in g's source, empty if injective.
    static Subspace range_of(const LinearOp<S>& g, Mat<S> kernel = Mat<S>())
    {
        if (kernel.rows() == 0) kernel = Mat<S>(g.cols(), 0);
        auto gen = std::make_shared<const GeneratedRange<S>>(g, std::move(kernel));
        Subspace s;
        s.ambient_ = g.target();
        s.generator_ = gen;
        s.projector_ = [gen](const Vec<S>& v) { return gen->project(v); };
        s.dim_ = gen->range_dim();
        s.explicit_ = false;
        return s;
    }

    bool is_explicit() const { return explicit_; }
    std::optional<Index> dim() const
    {
        if (explicit_) return basis_.cols();
        return dim_;
    }
    const HilbertSpace<S>& ambient() const { return ambient_; }
    const Mat<S>& basis() const { return basis_; }

    /// Space in which this subspace's own vectors are expressed.
    HilbertSpace<S> coordinates() const
    {
        if (explicit_) return HilbertSpace<S>::identity(basis_.cols());
        return ambient_;
    }

    Vec<S> embed(const Vec<S>& c) const
    {
        if (explicit_) {
            HOMLAB_THROW_IF(c.size() != basis_.cols(), ShapeError, "embed: coordinate size mismatch");
            return basis_ * c;
        }
        return c;
    }

    /// iota^* v.
    Vec<S> restrict(const Vec<S>& v) const
    {
        if (explicit_) return basis_.adjoint() * ambient_.weigh(v);
        return project(v);
    }

    Vec<S> project(const Vec<S>& v) const
    {
        if (explicit_) return basis_ * (basis_.adjoint() * ambient_.weigh(v));
        const Vec<S> p = projector_(v);
        return complement_ ? Vec<S>(v - p) : p;
    }

    /// Generator backing an implicit subspace, or nullptr.
    const GeneratedRange<S>* generator() const { return generator_.get(); }
    /// True for the orthogonal complement of a generated range.
    bool is_generator_complement() const { return complement_; }

    Subspace complement() const
    {
        if (explicit_) {
            const Index n = ambient_.dim();
            const Index k = basis_.cols();
            if (k == 0) return whole(ambient_);
            if (k == n) return zero(ambient_);
            const Mat<S> q = ambient_.whiten_rows(basis_);
            Eigen::HouseholderQR<Mat<S>> qr(q);
            const Mat<S> full = qr.householderQ() * Mat<S>::Identity(n, n);
            return from_basis(ambient_, ambient_.unwhiten_rows(full.rightCols(n - k)), 1e-8);
        }
        Subspace s = *this;
        s.complement_ = !complement_;
        if (dim_) s.dim_ = ambient_.dim() - *dim_;
        return s;
    }

    /// Orthonormality (explicit) or idempotency and self-adjointness (implicit) on random probes.
    Real verify(std::uint64_t seed = 11, Index probes = 4) const
    {
        if (explicit_) {
            if (basis_.cols() == 0) return 0.0;
            const Mat<S> gram = basis_.adjoint() * ambient_.weigh_rows(basis_);
            return (gram - Mat<S>::Identity(basis_.cols(), basis_.cols())).cwiseAbs().maxCoeff();
        }
        std::mt19937_64 rng(seed);
        Real worst = 0.0;
        for (Index k = 0; k < probes; ++k) {
            const Vec<S> x = gaussian_vector<S>(ambient_.dim(), rng);
            const Vec<S> y = gaussian_vector<S>(ambient_.dim(), rng);
            const Vec<S> px = project(x);
            const Real scale = ambient_.norm(x) * ambient_.norm(y);
            worst = std::max(worst, ambient_.norm(project(px) - px) / ambient_.norm(x));
            worst = std::max(worst, std::abs(ambient_.inner(y, px) - ambient_.inner(project(y), x)) / scale);
        }
        return worst;
    }

private:
    HilbertSpace<S> ambient_;
    Mat<S> basis_;
    Projector projector_;
    std::shared_ptr<const GeneratedRange<S>> generator_;
    std::optional<Index> dim_;
    bool explicit_ = true;
    bool complement_ = false;
};

// ---------------------------------------------------------------------------
// Probes
// ---------------------------------------------------------------------------

/**
 * @brief Finite family of unit vectors used to sample weak-operator pairings.
 */
template <class S>
class ProbeSet {
public:
    ProbeSet() = default;

    ProbeSet(HilbertSpace<S> space, std::vector<Vec<S>> vectors, std::uint64_t seed = 0)
        : space_(std::move(space)), vectors_(std::move(vectors)), seed_(seed)
    {
        HOMLAB_THROW_IF(vectors_.empty() && space_.dim() > 0, InvalidArgument, "probe set must be nonempty");
        for (auto& v : vectors_) {
            const Real nv = space_.norm(v);
            HOMLAB_THROW_IF(!(nv > 0.0), InvalidArgument, "probe vectors must be nonzero");
            v /= nv;
        }
    }

    /// Probes for a zero-dimensional space or a trivial subspace.
    static ProbeSet empty(HilbertSpace<S> space)
    {
        ProbeSet p;
        p.space_ = std::move(space);
        return p;
    }

    /// Seeded pseudo-random unit vectors.
    static ProbeSet random(HilbertSpace<S> space, Index count = 8, std::uint64_t seed = 1)
    {
        if (space.dim() == 0) return empty(std::move(space));
        std::mt19937_64 rng(seed);
        std::vector<Vec<S>> v;
        for (Index k = 0; k < count; ++k) v.push_back(gaussian_vector<S>(space.dim(), rng));
        return ProbeSet(std::move(space), std::move(v), seed);
    }

    /**
     * @brief Projects the probes into a subspace (in its coordinates) and
     * orthonormalizes them, dropping directions below `drop_tol`.
     */
    ProbeSet restricted_to(const Subspace<S>& sub, Real drop_tol = 1e-8) const
    {
        const auto coords = sub.coordinates();
        std::vector<Vec<S>> out;
        for (const auto& v : vectors_) {
            Vec<S> c = sub.restrict(v);
            for (int pass = 0; pass < 2; ++pass)
                for (const auto& q : out) c -= coords.inner(q, c) * q;
            const Real nc = coords.norm(c);
            if (nc > drop_tol) out.push_back(c / nc);
        }
        if (out.empty()) return empty(coords);
        return ProbeSet(coords, std::move(out), seed_);
    }

    const HilbertSpace<S>& space() const { return space_; }
    const std::vector<Vec<S>>& vectors() const { return vectors_; }
    std::size_t size() const { return vectors_.size(); }
    std::uint64_t seed() const { return seed_; }

private:
    HilbertSpace<S> space_;
    std::vector<Vec<S>> vectors_;
    std::uint64_t seed_ = 0;
};

/// max_{i,j} |<phi_i, (s - t) psi_j>|.
template <class S>
inline Real wot_gap(const LinearOp<S>& s, const LinearOp<S>& t, const ProbeSet<S>& left, const ProbeSet<S>& right)
{
    HOMLAB_THROW_IF(s.rows() != t.rows() || s.cols() != t.cols(), ShapeError, "wot_gap: operator shapes differ");
    HOMLAB_THROW_IF(left.space().dim() != s.rows() || right.space().dim() != s.cols(), ShapeError,
                    "wot_gap: probe spaces do not match operator");
    Real gap = 0.0;
    for (const auto& psi : right.vectors()) {
        const Vec<S> d = s.apply(psi) - t.apply(psi);
        for (const auto& phi : left.vectors()) gap = std::max(gap, std::abs(s.target().inner(phi, d)));
    }
    return gap;
}

/// max_{i,j} |<phi_i, t psi_j>|.
template <class S>
inline Real pairing_scale(const LinearOp<S>& t, const ProbeSet<S>& left, const ProbeSet<S>& right)
{
    Real m = 0.0;
    for (const auto& psi : right.vectors()) {
        const Vec<S> y = t.apply(psi);
        for (const auto& phi : left.vectors()) m = std::max(m, std::abs(t.target().inner(phi, y)));
    }
    return m;
}

/// max_j ||(s - t) psi_j||.
template <class S>
inline Real strong_gap(const LinearOp<S>& s, const LinearOp<S>& t, const ProbeSet<S>& right)
{
    HOMLAB_THROW_IF(s.rows() != t.rows() || s.cols() != t.cols(), ShapeError, "strong_gap: operator shapes differ");
    HOMLAB_THROW_IF(right.space().dim() != s.cols(), ShapeError, "strong_gap: probe space does not match operator");
    Real gap = 0.0;
    for (const auto& psi : right.vectors()) gap = std::max(gap, s.target().norm(s.apply(psi) - t.apply(psi)));
    return gap;
}

// ---------------------------------------------------------------------------
// Kernel and range
// ---------------------------------------------------------------------------

template <class S>
struct KernelRange {
    Subspace<S> kernel;
    Subspace<S> range;
    RVec singular_values; ///< weighted singular values (dense path only)
};

/**
 * @brief W-orthonormal bases of ker(op) and ran(op).
 *
 * `rel_tol` is relative to the largest weighted singular value. Above
 * kExplicitSubspaceLimit a sparse operator returns an implicit range; its
 * kernel must then be supplied through `kernel_hint`.
 */
template <class S>
inline KernelRange<S> kernel_range(const LinearOp<S>& op, Real rel_tol = Tolerances::rank,
                                   const Mat<S>& kernel_hint = Mat<S>())
{
    const auto& src = op.source();
    const auto& tgt = op.target();
    if (std::max(op.rows(), op.cols()) > kExplicitSubspaceLimit && op.is_sparse() && src.is_diagonal() &&
        tgt.is_diagonal()) {
        Mat<S> hint = kernel_hint.rows() ? kernel_hint : Mat<S>(op.cols(), 0);
        return {Subspace<S>::span(src, hint), Subspace<S>::range_of(op, hint), RVec()};
    }
    const Mat<S> a = whitened_matrix(op);
    if (a.rows() == 0 || a.cols() == 0) {
        return {Subspace<S>::whole(src), Subspace<S>::zero(tgt), RVec()};
    }
    Eigen::BDCSVD<Mat<S>> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const RVec sv = svd.singularValues();
    const Real cut = rel_tol * (sv.size() ? sv(0) : 0.0);
    Index r = 0;
    while (r < sv.size() && sv(r) > cut && sv(r) > 0.0) ++r;
    Mat<S> kb = src.unwhiten_rows(svd.matrixV().rightCols(op.cols() - r));
    Mat<S> rb = tgt.unwhiten_rows(svd.matrixU().leftCols(r));
    return {Subspace<S>::from_basis(src, std::move(kb), 1e-8), Subspace<S>::from_basis(tgt, std::move(rb), 1e-8),
            sv};
}

// ---------------------------------------------------------------------------
// Coercivity classes
// ---------------------------------------------------------------------------

struct CoercivityReport {
    Real re_min = 0.0;      ///< lambda_min(Re T)
    Real re_inv_min = 0.0;  ///< lambda_min(Re T^{-1})
    Real alpha = 0.0;
    Real beta = 0.0;
    bool singular = false;
    bool lower_ok = false;  ///< Re T >= alpha
    bool upper_ok = false;  ///< Re T^{-1} >= 1/beta
    bool passes() const { return lower_ok && upper_ok; }
};

/**
 * @brief Membership test for F(alpha, beta): Re T >= alpha, Re T^{-1} >= 1/beta.
 *
 * Re means (T + T*)/2 with the W-adjoint. `tol` is an absolute slack on both
 * eigenvalue bounds.
 */
template <class S>
inline CoercivityReport coercivity_check(const LinearOp<S>& op, Real alpha, Real beta, Real tol = 1e-10)
{
    HOMLAB_THROW_IF(op.rows() != op.cols(), ShapeError, "coercivity_check needs a square operator");
    HOMLAB_THROW_IF(!(alpha > 0.0) || !(alpha <= beta), InvalidArgument, "need 0 < alpha <= beta");
    CoercivityReport rep;
    rep.alpha = alpha;
    rep.beta = beta;
    const Index n = op.rows();
    if (n == 0) {
        rep.re_min = rep.re_inv_min = std::numeric_limits<Real>::infinity();
        rep.lower_ok = rep.upper_ok = true;
        return rep;
    }
    if (n <= kDenseEigenLimit) {
        const Mat<S> t = whitened_matrix(op);
        const Mat<S> re = (t + t.adjoint()) / S(2);
        Eigen::SelfAdjointEigenSolver<Mat<S>> es(re, Eigen::EigenvaluesOnly);
        rep.re_min = es.eigenvalues()(0);
        Eigen::PartialPivLU<Mat<S>> lu(t);
        const Real rc = lu_rcond<S>(lu);
        if (!(rc > 1.0 / Tolerances::condition)) {
            rep.singular = true;
            rep.re_inv_min = -std::numeric_limits<Real>::infinity();
        } else {
            const Mat<S> ti = lu.inverse();
            Eigen::SelfAdjointEigenSolver<Mat<S>> es2((ti + ti.adjoint()) / S(2), Eigen::EigenvaluesOnly);
            rep.re_inv_min = es2.eigenvalues()(0);
        }
    } else {
        HOMLAB_THROW_IF(!op.is_sparse(), InvalidArgument,
                        "coercivity_check above the dense cutoff needs a sparse operator");
        const auto h = op.source();
        const auto tstar = adjoint(op);
        auto inner = [h](const Vec<S>& x, const Vec<S>& y) { return h.inner(x, y); };
        rep.re_min = lanczos_extremes<S>(
                         [&](const Vec<S>& x) { return Vec<S>((op.apply(x) + tstar.apply(x)) / S(2)); }, inner, n,
                         std::min<Index>(n, 300))
                         .first;
        try {
            SparseSolver<S> f(op.sparse_matrix());
            SparseSolver<S> fa(tstar.sparse_matrix());
            rep.re_inv_min = lanczos_extremes<S>(
                                 [&](const Vec<S>& x) { return Vec<S>((f.solve(x) + fa.solve(x)) / S(2)); }, inner,
                                 n, std::min<Index>(n, 300))
                                 .first;
        } catch (const SolverDiverged&) {
            rep.singular = true;
            rep.re_inv_min = -std::numeric_limits<Real>::infinity();
        }
    }
    rep.lower_ok = rep.re_min >= alpha - tol;
    rep.upper_ok = !rep.singular && rep.re_inv_min >= 1.0 / beta - tol;
    return rep;
}

// ---------------------------------------------------------------------------
// Sparse triplet text format
// ---------------------------------------------------------------------------
//
//   %%homlab-triplet real|complex
//   rows cols nnz
//   i j value            (0-based; complex: i j re im)

template <class S>
inline void write_triplets(std::ostream& os, const SpMat<S>& m)
{
    os << "%%homlab-triplet " << (is_complex_v<S> ? "complex" : "real") << '\n';
    os << m.rows() << ' ' << m.cols() << ' ' << m.nonZeros() << '\n';
    os << std::setprecision(17);
    for (int c = 0; c < m.outerSize(); ++c)
        for (typename SpMat<S>::InnerIterator it(m, c); it; ++it) {
            os << it.row() << ' ' << it.col() << ' ';
            if constexpr (is_complex_v<S>) {
                os << it.value().real() << ' ' << it.value().imag() << '\n';
            } else {
                os << it.value() << '\n';
            }
        }
}

template <class S>
inline SpMat<S> read_triplets(std::istream& is)
{
    std::string line;
    int lineno = 0;
    auto next = [&]() -> bool {
        while (std::getline(is, line)) {
            ++lineno;
            if (!line.empty() && line.find_first_not_of(" \t\r") != std::string::npos) return true;
        }
        return false;
    };
    auto fail = [&](const std::string& why) { throw FormatError("line " + std::to_string(lineno) + ": " + why); };
    if (!next()) fail("empty input");
    std::istringstream hs(line);
    std::string tag, field;
    hs >> tag >> field;
    if (tag != "%%homlab-triplet") fail("missing %%homlab-triplet header");
    const bool cplx = field == "complex";
    if (!cplx && field != "real") fail("field must be real or complex");
    if (cplx && !is_complex_v<S>) fail("complex data cannot be read into a real matrix");
    if (!next()) fail("missing dimension line");
    long rows = -1, cols = -1, nnz = -1;
    {
        std::istringstream ds(line);
        if (!(ds >> rows >> cols >> nnz) || rows < 0 || cols < 0 || nnz < 0) fail("bad dimension line");
    }
    std::vector<Eigen::Triplet<S>> trip;
    trip.reserve(static_cast<std::size_t>(nnz));
    for (long k = 0; k < nnz; ++k) {
        if (!next()) fail("expected " + std::to_string(nnz) + " entries");
        std::istringstream es(line);
        long i = -1, j = -1;
        Real re = 0, im = 0;
        if (!(es >> i >> j >> re)) fail("bad entry");
        if (cplx && !(es >> im)) fail("complex entry needs re and im");
        if (i < 0 || j < 0 || i >= rows || j >= cols) fail("entry index out of range");
        if constexpr (is_complex_v<S>) {
            trip.emplace_back(i, j, S(re, im));
        } else {
            trip.emplace_back(i, j, re);
        }
    }
    SpMat<S> m(rows, cols);
    m.setFromTriplets(trip.begin(), trip.end());
    return m;
}

} // namespace homlab
