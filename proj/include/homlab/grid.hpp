/**
 * @file grid.hpp
 * @brief Structured box grids, Kuhn-simplex P1 gradients, cell-wise
 *        coefficient fields and sine-mode probes.
 *
 * Scalars are nodal. Every cell is split into d! Kuhn simplices; vector
 * fields hold one constant d-vector per simplex. Cells are numbered with
 * axis 0 fastest.
 */
#pragma once

#include "homlab/hilbert.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <numeric>

namespace homlab {

using Point = std::array<Real, 3>;
using MultiIndex = std::array<Index, 3>;

/// Default unknown-count guard (overridable with HOMLAB_BUDGET).
inline Index unknown_budget()
{
    if (const char* env = std::getenv("HOMLAB_BUDGET")) {
        try {
            const long long v = std::stoll(env);
            if (v > 0) return static_cast<Index>(v);
        } catch (...) {
        }
    }
    return 4000000;
}

inline void check_budget(Index unknowns, const std::string& what)
{
    const Index cap = unknown_budget();
    HOMLAB_THROW_IF(unknowns > cap, BudgetExceeded,
                    what + " needs " + std::to_string(unknowns) + " unknowns, budget is " + std::to_string(cap));
}

class GridDomain {
public:
    GridDomain() = default;

    GridDomain(int d, Point lo, Point hi, MultiIndex cells) : d_(d), lo_(lo), hi_(hi), cells_(cells)
    {
        HOMLAB_THROW_IF(d < 1 || d > 3, InvalidArgument, "grid dimension must be 1, 2 or 3");
        for (int k = 0; k < d; ++k) {
            HOMLAB_THROW_IF(cells_[k] < 1, InvalidArgument, "every axis needs at least one cell");
            HOMLAB_THROW_IF(!(hi_[k] > lo_[k]), InvalidArgument, "box extents must be positive");
        }
        for (int k = d; k < 3; ++k) {
            lo_[k] = 0.0;
            hi_[k] = 1.0;
            cells_[k] = 1;
        }
    }

    /// (0,1)^d with n cells per axis.
    static GridDomain unit(int d, Index n) { return GridDomain(d, {0, 0, 0}, {1, 1, 1}, {n, n, n}); }

    int dim() const { return d_; }
    Real lo(int k) const { return lo_[k]; }
    Real hi(int k) const { return hi_[k]; }
    Real extent(int k) const { return hi_[k] - lo_[k]; }
    Index cells(int k) const { return cells_[k]; }
    Real h(int k) const { return extent(k) / static_cast<Real>(cells_[k]); }
    Index num_cells() const { return cells_[0] * cells_[1] * cells_[2]; }
    Real cell_volume() const
    {
        Real v = 1.0;
        for (int k = 0; k < d_; ++k) v *= h(k);
        return v;
    }
    Real volume() const
    {
        Real v = 1.0;
        for (int k = 0; k < d_; ++k) v *= extent(k);
        return v;
    }

    Index cell_index(const MultiIndex& i) const { return i[0] + cells_[0] * (i[1] + cells_[1] * i[2]); }
    MultiIndex cell_multi(Index c) const
    {
        MultiIndex i{0, 0, 0};
        i[0] = c % cells_[0];
        c /= cells_[0];
        i[1] = c % cells_[1];
        i[2] = c / cells_[1];
        return i;
    }
    Point cell_center(Index c) const
    {
        const auto i = cell_multi(c);
        Point x{0, 0, 0};
        for (int k = 0; k < d_; ++k) x[k] = lo_[k] + (static_cast<Real>(i[k]) + 0.5) * h(k);
        return x;
    }
    /// Same box, different resolution.
    GridDomain refined(MultiIndex cells) const { return GridDomain(d_, lo_, hi_, cells); }

    bool operator==(const GridDomain& o) const
    {
        return d_ == o.d_ && lo_ == o.lo_ && hi_ == o.hi_ && cells_ == o.cells_;
    }

private:
    int d_ = 1;
    Point lo_{0, 0, 0};
    Point hi_{1, 1, 1};
    MultiIndex cells_{1, 1, 1};
};

enum class Flavor { dirichlet, neumann, periodic };

inline const char* to_string(Flavor f)
{
    switch (f) {
    case Flavor::dirichlet: return "dirichlet";
    case Flavor::neumann: return "neumann";
    case Flavor::periodic: return "periodic";
    }
    return "?";
}

inline Flavor parse_flavor(const std::string& s)
{
    if (s == "dirichlet") return Flavor::dirichlet;
    if (s == "neumann") return Flavor::neumann;
    if (s == "periodic") return Flavor::periodic;
    throw InvalidArgument("unknown boundary flavor '" + s + "'");
}

inline std::vector<std::array<int, 3>> kuhn_permutations(int d)
{
    std::array<int, 3> p{0, 1, 2};
    std::vector<std::array<int, 3>> out;
    do {
        out.push_back(p);
    } while (std::next_permutation(p.begin(), p.begin() + d));
    return out;
}

/**
 * @brief Nodal P1 gradient on Kuhn simplices for one boundary flavor.
 *
 * Dirichlet eliminates boundary nodes, Neumann keeps all nodes (boundary
 * weights halved per axis), periodic identifies opposite faces.
 */
template <class S>
class DiscreteGradient {
public:
    DiscreteGradient() = default;

    DiscreteGradient(GridDomain dom, Flavor flavor) : dom_(std::move(dom)), flavor_(flavor)
    {
        const int d = dom_.dim();
        perms_ = kuhn_permutations(d);
        nperm_ = static_cast<Index>(perms_.size());
        for (int k = 0; k < 3; ++k) {
            const Index n = k < d ? dom_.cells(k) : 1;
            if (k >= d) nodes_[k] = 1;
            else if (flavor_ == Flavor::dirichlet) nodes_[k] = n - 1;
            else if (flavor_ == Flavor::neumann) nodes_[k] = n + 1;
            else nodes_[k] = n;
        }
        num_nodes_ = nodes_[0] * nodes_[1] * nodes_[2];
        HOMLAB_THROW_IF(num_nodes_ == 0, InvalidArgument, "Dirichlet grid needs at least two cells per axis");
        num_simplices_ = dom_.num_cells() * nperm_;
        check_budget(num_nodes_ + num_simplices_ * d, "gradient assembly");

        RVec ws(num_nodes_);
        for (Index i = 0; i < num_nodes_; ++i) {
            const auto m = node_multi(i);
            Real w = dom_.cell_volume();
            if (flavor_ == Flavor::neumann)
                for (int k = 0; k < d; ++k)
                    if (m[k] == 0 || m[k] == dom_.cells(k)) w *= 0.5;
            ws(i) = w;
        }
        scalar_ = HilbertSpace<S>::diagonal(ws);
        vector_ = HilbertSpace<S>::diagonal(RVec::Constant(num_simplices_ * d, simplex_volume()));

        std::vector<Eigen::Triplet<S>> trip;
        trip.reserve(static_cast<std::size_t>(num_simplices_ * d * 2));
        for (Index c = 0; c < dom_.num_cells(); ++c) {
            const auto ci = dom_.cell_multi(c);
            for (Index s = 0; s < nperm_; ++s) {
                MultiIndex v = ci;
                for (int k = 0; k < d; ++k) {
                    const int ax = perms_[s][k];
                    MultiIndex w = v;
                    ++w[ax];
                    const Index row = (c * nperm_ + s) * d + ax;
                    const Real ih = 1.0 / dom_.h(ax);
                    const Index a = node_of_vertex(w);
                    const Index b = node_of_vertex(v);
                    if (a >= 0) trip.emplace_back(row, a, S(ih));
                    if (b >= 0) trip.emplace_back(row, b, S(-ih));
                    v = w;
                }
            }
        }
        SpMat<S> g(num_simplices_ * d, num_nodes_);
        g.setFromTriplets(trip.begin(), trip.end());
        g.prune(S(0));
        op_ = LinearOp<S>::sparse(scalar_, vector_, std::move(g));
    }

    const GridDomain& domain() const { return dom_; }
    Flavor flavor() const { return flavor_; }
    /// Consistency order of the difference stencil.
    int order() const { return 1; }
    const LinearOp<S>& op() const { return op_; }
    const SpMat<S>& matrix() const { return op_.sparse_matrix(); }
    const HilbertSpace<S>& scalar_space() const { return scalar_; }
    const HilbertSpace<S>& vector_space() const { return vector_; }
    Index num_nodes() const { return num_nodes_; }
    Index num_simplices() const { return num_simplices_; }
    Index simplices_per_cell() const { return nperm_; }
    Real simplex_volume() const { return dom_.cell_volume() / static_cast<Real>(nperm_); }

    /// Basis of the kernel: empty (Dirichlet) or the constants.
    Mat<S> kernel_basis() const
    {
        if (flavor_ == Flavor::dirichlet) return Mat<S>(num_nodes_, 0);
        return Mat<S>::Ones(num_nodes_, 1);
    }

    /// W-adjoint of the gradient, i.e. minus the discrete divergence.
    LinearOp<S> div() const
    {
        const auto adj = adjoint(op_);
        return LinearOp<S>::sparse(vector_, scalar_, SpMat<S>(-adj.sparse_matrix()));
    }

    MultiIndex node_multi(Index i) const
    {
        MultiIndex m{0, 0, 0};
        m[0] = i % nodes_[0];
        i /= nodes_[0];
        m[1] = i % nodes_[1];
        m[2] = i / nodes_[1];
        if (flavor_ == Flavor::dirichlet)
            for (int k = 0; k < dom_.dim(); ++k) ++m[k];
        return m;
    }

    /// Node number of a lattice vertex, -1 if eliminated.
    Index node_of_vertex(MultiIndex v) const
    {
        const int d = dom_.dim();
        for (int k = 0; k < d; ++k) {
            const Index n = dom_.cells(k);
            if (flavor_ == Flavor::dirichlet) {
                if (v[k] <= 0 || v[k] >= n) return -1;
                v[k] -= 1;
            } else if (flavor_ == Flavor::periodic) {
                v[k] = ((v[k] % n) + n) % n;
            }
        }
        for (int k = d; k < 3; ++k) v[k] = 0;
        return v[0] + nodes_[0] * (v[1] + nodes_[1] * v[2]);
    }

    Point node_point(Index i) const
    {
        const auto m = node_multi(i);
        Point x{0, 0, 0};
        for (int k = 0; k < dom_.dim(); ++k) x[k] = dom_.lo(k) + static_cast<Real>(m[k]) * dom_.h(k);
        return x;
    }

    /// Vertex lattice coordinates of simplex s (d+1 entries).
    std::vector<MultiIndex> simplex_vertices(Index s) const
    {
        const Index c = s / nperm_;
        const auto& p = perms_[s % nperm_];
        std::vector<MultiIndex> v{dom_.cell_multi(c)};
        for (int k = 0; k < dom_.dim(); ++k) {
            auto w = v.back();
            ++w[p[k]];
            v.push_back(w);
        }
        return v;
    }

    Point simplex_barycenter(Index s) const
    {
        Point x{0, 0, 0};
        const auto vs = simplex_vertices(s);
        for (const auto& v : vs)
            for (int k = 0; k < dom_.dim(); ++k) x[k] += dom_.lo(k) + static_cast<Real>(v[k]) * dom_.h(k);
        for (int k = 0; k < dom_.dim(); ++k) x[k] /= static_cast<Real>(vs.size());
        return x;
    }

    Index cell_of_simplex(Index s) const { return s / nperm_; }

    /// Simplex-wise mean of the d+1 vertex values (eliminated nodes count as 0).
    SpMat<S> vertex_average() const
    {
        std::vector<Eigen::Triplet<S>> trip;
        const Real w = 1.0 / static_cast<Real>(dom_.dim() + 1);
        for (Index s = 0; s < num_simplices_; ++s)
            for (const auto& v : simplex_vertices(s))
                if (const Index n = node_of_vertex(v); n >= 0) trip.emplace_back(s, n, S(w));
        SpMat<S> m(num_simplices_, num_nodes_);
        m.setFromTriplets(trip.begin(), trip.end());
        return m;
    }

    /// Nodal value = mean over the cells touching the node.
    RVec cell_to_node_average(const RVec& cell_values) const
    {
        HOMLAB_THROW_IF(cell_values.size() != dom_.num_cells(), ShapeError, "need one value per cell");
        RVec sum = RVec::Zero(num_nodes_);
        RVec cnt = RVec::Zero(num_nodes_);
        const int d = dom_.dim();
        const int corners = 1 << d;
        for (Index c = 0; c < dom_.num_cells(); ++c) {
            const auto ci = dom_.cell_multi(c);
            for (int m = 0; m < corners; ++m) {
                MultiIndex v = ci;
                for (int k = 0; k < d; ++k)
                    if (m & (1 << k)) ++v[k];
                if (const Index n = node_of_vertex(v); n >= 0) {
                    sum(n) += cell_values(c);
                    cnt(n) += 1.0;
                }
            }
        }
        return sum.cwiseQuotient(cnt);
    }

    /// Samples f at the nodes.
    template <class F>
    Vec<S> sample_nodes(F&& f) const
    {
        Vec<S> v(num_nodes_);
        for (Index i = 0; i < num_nodes_; ++i) v(i) = static_cast<S>(f(node_point(i)));
        return v;
    }

    /// Samples a vector field f(x) -> std::array<S,3> at simplex barycenters.
    template <class F>
    Vec<S> sample_vector(F&& f) const
    {
        const int d = dom_.dim();
        Vec<S> v(num_simplices_ * d);
        for (Index s = 0; s < num_simplices_; ++s) {
            const auto val = f(simplex_barycenter(s));
            for (int k = 0; k < d; ++k) v(s * d + k) = static_cast<S>(val[k]);
        }
        return v;
    }

    /// Replicates a constant d-vector on every simplex.
    Vec<S> constant_vector(const Vec<S>& xi) const
    {
        const int d = dom_.dim();
        HOMLAB_THROW_IF(xi.size() != d, ShapeError, "constant field needs d components");
        Vec<S> v(num_simplices_ * d);
        for (Index s = 0; s < num_simplices_; ++s) v.segment(s * d, d) = xi;
        return v;
    }

    /// Integral of a vector field: sum of simplex contributions, one entry per component.
    Vec<S> integrate_vector(const Vec<S>& v) const
    {
        const int d = dom_.dim();
        Vec<S> out = Vec<S>::Zero(d);
        for (Index s = 0; s < num_simplices_; ++s) out += v.segment(s * d, d);
        return out * S(simplex_volume());
    }

private:
    GridDomain dom_;
    Flavor flavor_ = Flavor::dirichlet;
    std::vector<std::array<int, 3>> perms_;
    Index nperm_ = 1;
    MultiIndex nodes_{1, 1, 1};
    Index num_nodes_ = 0;
    Index num_simplices_ = 0;
    HilbertSpace<S> scalar_;
    HilbertSpace<S> vector_;
    LinearOp<S> op_;
};

template <class S>
inline DiscreteGradient<S> build_grad(const GridDomain& dom, Flavor flavor)
{
    return DiscreteGradient<S>(dom, flavor);
}

// ---------------------------------------------------------------------------
// Coefficient fields
// ---------------------------------------------------------------------------

struct Bounds {
    Real alpha = 0.0;
    Real beta = 0.0;
};

/// Cell-wise d x d coefficient a(x), sampled at cell centres.
template <class S>
class CoefficientField {
public:
    CoefficientField() = default;

    /// `blocks` is d x (d * cells), block c holding the matrix of cell c.
    CoefficientField(GridDomain dom, Mat<S> blocks, std::optional<Bounds> declared = std::nullopt)
        : dom_(std::move(dom)), blocks_(std::move(blocks)), declared_(declared)
    {
        const int d = dom_.dim();
        HOMLAB_THROW_IF(blocks_.rows() != d || blocks_.cols() != d * dom_.num_cells(), ShapeError,
                        "coefficient storage must be d x (d * cells)");
    }

    static CoefficientField constant(const GridDomain& dom, const Mat<S>& a,
                                     std::optional<Bounds> declared = std::nullopt)
    {
        const int d = dom.dim();
        HOMLAB_THROW_IF(a.rows() != d || a.cols() != d, ShapeError, "constant coefficient must be d x d");
        Mat<S> b(d, d * dom.num_cells());
        for (Index c = 0; c < dom.num_cells(); ++c) b.middleCols(c * d, d) = a;
        return CoefficientField(dom, std::move(b), declared);
    }

    /// f(x) -> d x d matrix at cell centres.
    template <class F>
    static CoefficientField from_function(const GridDomain& dom, F&& f,
                                          std::optional<Bounds> declared = std::nullopt)
    {
        const int d = dom.dim();
        Mat<S> b(d, d * dom.num_cells());
        for (Index c = 0; c < dom.num_cells(); ++c) {
            const Mat<S> m = f(dom.cell_center(c));
            HOMLAB_THROW_IF(m.rows() != d || m.cols() != d, ShapeError, "coefficient function must return d x d");
            b.middleCols(c * d, d) = m;
        }
        return CoefficientField(dom, std::move(b), declared);
    }

    /// f(x) * identity.
    template <class F>
    static CoefficientField scalar(const GridDomain& dom, F&& f, std::optional<Bounds> declared = std::nullopt)
    {
        const int d = dom.dim();
        return from_function(
            dom, [&](const Point& x) { return Mat<S>(Mat<S>::Identity(d, d) * static_cast<S>(f(x))); }, declared);
    }

    const GridDomain& domain() const { return dom_; }
    int dim() const { return dom_.dim(); }
    Mat<S> cell(Index c) const { return blocks_.middleCols(c * dom_.dim(), dom_.dim()); }
    const Mat<S>& storage() const { return blocks_; }
    std::optional<Bounds> declared() const { return declared_; }
    CoefficientField with_bounds(Bounds b) const { return CoefficientField(dom_, blocks_, b); }

    /// Tight (alpha, beta): min lambda(Re a) and 1 / min lambda(Re a^{-1}) over cells.
    Bounds measured_bounds() const
    {
        Real lo = std::numeric_limits<Real>::infinity();
        Real lo_inv = std::numeric_limits<Real>::infinity();
        for (Index c = 0; c < dom_.num_cells(); ++c) {
            const auto [m1, m2] = cell_minima(cell(c));
            lo = std::min(lo, m1);
            lo_inv = std::min(lo_inv, m2);
        }
        return {lo, lo_inv > 0 ? 1.0 / lo_inv : std::numeric_limits<Real>::infinity()};
    }

    /// Cell-wise M(alpha, beta) membership with the declared (or given) bounds.
    void check(std::optional<Bounds> bounds = std::nullopt, Real tol = 1e-12) const
    {
        const auto b = bounds ? bounds : declared_;
        for (Index c = 0; c < dom_.num_cells(); ++c) {
            const auto [m1, m2] = cell_minima(cell(c));
            HOMLAB_THROW_IF(!(m1 > 0.0) || !(m2 > 0.0), CoercivityError,
                            "cell " + std::to_string(c) + " has Re a or Re a^{-1} not positive definite");
            if (b) {
                HOMLAB_THROW_IF(m1 < b->alpha - tol, CoercivityError,
                                "cell " + std::to_string(c) + ": min Re a = " + std::to_string(m1) + " < alpha");
                HOMLAB_THROW_IF(m2 < 1.0 / b->beta - tol, CoercivityError,
                                "cell " + std::to_string(c) + ": min Re a^{-1} = " + std::to_string(m2) +
                                    " < 1/beta");
            }
        }
    }

    /// Block-diagonal operator on the simplex vector space of `g`.
    LinearOp<S> as_operator(const DiscreteGradient<S>& g) const
    {
        HOMLAB_THROW_IF(!(g.domain() == dom_), ShapeError, "coefficient and gradient use different grids");
        const int d = dom_.dim();
        const Index per = g.simplices_per_cell();
        std::vector<Eigen::Triplet<S>> trip;
        trip.reserve(static_cast<std::size_t>(g.num_simplices() * d * d));
        for (Index c = 0; c < dom_.num_cells(); ++c) {
            const Mat<S> a = cell(c);
            for (Index s = c * per; s < (c + 1) * per; ++s)
                for (int i = 0; i < d; ++i)
                    for (int j = 0; j < d; ++j)
                        if (a(i, j) != S(0)) trip.emplace_back(s * d + i, s * d + j, a(i, j));
        }
        SpMat<S> m(g.num_simplices() * d, g.num_simplices() * d);
        m.setFromTriplets(trip.begin(), trip.end());
        return LinearOp<S>::sparse(g.vector_space(), g.vector_space(), std::move(m));
    }

    CoefficientField adjoint_field() const
    {
        const int d = dom_.dim();
        Mat<S> b(d, blocks_.cols());
        for (Index c = 0; c < dom_.num_cells(); ++c) b.middleCols(c * d, d) = cell(c).adjoint();
        return CoefficientField(dom_, std::move(b), declared_);
    }

    CoefficientField inverse_field() const
    {
        const int d = dom_.dim();
        Mat<S> b(d, blocks_.cols());
        for (Index c = 0; c < dom_.num_cells(); ++c) b.middleCols(c * d, d) = cell(c).inverse();
        std::optional<Bounds> nb;
        if (declared_) nb = Bounds{1.0 / declared_->beta, 1.0 / declared_->alpha};
        return CoefficientField(dom_, std::move(b), nb);
    }

    CoefficientField scaled(S s) const { return CoefficientField(dom_, blocks_ * s, std::nullopt); }

    /// Entry (i, j) of every cell.
    Vec<S> component(int i, int j) const
    {
        Vec<S> v(dom_.num_cells());
        for (Index c = 0; c < dom_.num_cells(); ++c) v(c) = blocks_(i, c * dom_.dim() + j);
        return v;
    }

private:
    static std::pair<Real, Real> cell_minima(const Mat<S>& a)
    {
        Eigen::SelfAdjointEigenSolver<Mat<S>> e1((a + a.adjoint()) / S(2), Eigen::EigenvaluesOnly);
        Eigen::FullPivLU<Mat<S>> lu(a);
        if (!lu.isInvertible()) return {e1.eigenvalues()(0), -std::numeric_limits<Real>::infinity()};
        const Mat<S> ai = lu.inverse();
        Eigen::SelfAdjointEigenSolver<Mat<S>> e2((ai + ai.adjoint()) / S(2), Eigen::EigenvaluesOnly);
        return {e1.eigenvalues()(0), e2.eigenvalues()(0)};
    }

    GridDomain dom_;
    Mat<S> blocks_;
    std::optional<Bounds> declared_;
};

/**
 * Coefficient grid text format:
 *
 *   %%homlab-coeff real|complex      (optional, default real)
 *   d n_1 ... n_d
 *   bounds alpha beta                (optional)
 *   one line per cell (axis 0 fastest): the d x d entries row by row,
 *   complex entries as "re im" pairs
 *
 * Lines starting with '#' are comments. The box defaults to (0,1)^d.
 */
template <class S>
inline CoefficientField<S> read_coefficients(std::istream& is, Point lo = {0, 0, 0}, Point hi = {1, 1, 1})
{
    std::string line;
    int lineno = 0;
    auto next = [&]() -> bool {
        while (std::getline(is, line)) {
            ++lineno;
            const auto p = line.find_first_not_of(" \t\r");
            if (p == std::string::npos || line[p] == '#') continue;
            return true;
        }
        return false;
    };
    auto fail = [&](const std::string& why) { throw FormatError("line " + std::to_string(lineno) + ": " + why); };
    if (!next()) fail("empty coefficient file");
    bool cplx = false;
    if (line.rfind("%%homlab-coeff", 0) == 0) {
        std::istringstream hs(line);
        std::string tag, field;
        hs >> tag >> field;
        if (field == "complex") cplx = true;
        else if (field != "real") fail("field must be real or complex");
        if (cplx && !is_complex_v<S>) fail("complex coefficients cannot be read as real");
        if (!next()) fail("missing dimension line");
    }
    std::istringstream ds(line);
    int d = 0;
    if (!(ds >> d) || d < 1 || d > 3) fail("dimension must be 1, 2 or 3");
    MultiIndex cells{1, 1, 1};
    for (int k = 0; k < d; ++k)
        if (!(ds >> cells[k]) || cells[k] < 1) fail("bad cell count");
    const GridDomain dom(d, lo, hi, cells);
    std::optional<Bounds> bounds;
    Mat<S> b(d, d * dom.num_cells());
    Index c = 0;
    while (next()) {
        if (line.rfind("bounds", 0) == 0) {
            std::istringstream bs(line.substr(6));
            Bounds bb;
            if (!(bs >> bb.alpha >> bb.beta)) fail("bounds needs alpha beta");
            bounds = bb;
            continue;
        }
        if (c >= dom.num_cells()) fail("more cell lines than cells");
        std::istringstream es(line);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) {
                Real re = 0, im = 0;
                if (!(es >> re)) fail("cell line needs " + std::to_string(d * d) + " entries");
                if (cplx && !(es >> im)) fail("complex entry needs re and im");
                if constexpr (is_complex_v<S>) {
                    b(i, c * d + j) = S(re, im);
                } else {
                    b(i, c * d + j) = re;
                }
            }
        ++c;
    }
    if (c != dom.num_cells()) fail("expected " + std::to_string(dom.num_cells()) + " cell lines, got " +
                                   std::to_string(c));
    return CoefficientField<S>(dom, std::move(b), bounds);
}

template <class S>
inline void write_coefficients(std::ostream& os, const CoefficientField<S>& a)
{
    const int d = a.dim();
    const auto& dom = a.domain();
    os << "%%homlab-coeff " << (is_complex_v<S> ? "complex" : "real") << '\n' << d;
    for (int k = 0; k < d; ++k) os << ' ' << dom.cells(k);
    os << '\n' << std::setprecision(17);
    if (a.declared()) os << "bounds " << a.declared()->alpha << ' ' << a.declared()->beta << '\n';
    for (Index c = 0; c < dom.num_cells(); ++c) {
        const Mat<S> m = a.cell(c);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) {
                if (i || j) os << ' ';
                if constexpr (is_complex_v<S>) {
                    os << m(i, j).real() << ' ' << m(i, j).imag();
                } else {
                    os << m(i, j);
                }
            }
        os << '\n';
    }
}

// ---------------------------------------------------------------------------
// Probes on grid spaces
// ---------------------------------------------------------------------------

/// Wave numbers k in {1..5}^d ordered by |k|^2 (then lexicographically), at most `cap`.
inline std::vector<MultiIndex> sine_modes(int d, std::size_t cap = 25)
{
    std::vector<MultiIndex> ks;
    for (Index a = 1; a <= 5; ++a)
        for (Index b = 1; b <= (d > 1 ? 5 : 1); ++b)
            for (Index c = 1; c <= (d > 2 ? 5 : 1); ++c) ks.push_back({a, d > 1 ? b : 0, d > 2 ? c : 0});
    std::stable_sort(ks.begin(), ks.end(), [](const MultiIndex& x, const MultiIndex& y) {
        return x[0] * x[0] + x[1] * x[1] + x[2] * x[2] < y[0] * y[0] + y[1] * y[1] + y[2] * y[2];
    });
    if (ks.size() > cap) ks.resize(cap);
    return ks;
}

inline Real sine_mode(const GridDomain& dom, const MultiIndex& k, const Point& x)
{
    Real v = 1.0;
    for (int a = 0; a < dom.dim(); ++a) v *= std::sin(std::numbers::pi * static_cast<Real>(k[a]) * (x[a] - dom.lo(a)) / dom.extent(a));
    return v;
}

/// Lowest sine modes sampled at the nodes.
template <class S>
inline ProbeSet<S> scalar_probes(const DiscreteGradient<S>& g, std::size_t cap = 25)
{
    std::vector<Vec<S>> v;
    for (const auto& k : sine_modes(g.domain().dim(), cap))
        v.push_back(g.sample_nodes([&](const Point& x) { return sine_mode(g.domain(), k, x); }));
    return ProbeSet<S>(g.scalar_space(), std::move(v));
}

/// Component e_j times the lowest floor(cap/d) sine modes, sampled at barycentres.
template <class S>
inline ProbeSet<S> vector_probes(const DiscreteGradient<S>& g, std::size_t cap = 25)
{
    const int d = g.domain().dim();
    std::vector<Vec<S>> v;
    for (const auto& k : sine_modes(d, cap / static_cast<std::size_t>(d)))
        for (int j = 0; j < d; ++j)
            v.push_back(g.sample_vector([&](const Point& x) {
                std::array<Real, 3> r{0, 0, 0};
                r[j] = sine_mode(g.domain(), k, x);
                return r;
            }));
    return ProbeSet<S>(g.vector_space(), std::move(v));
}

} // namespace homlab
