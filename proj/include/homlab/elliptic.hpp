/**
 * @file elliptic.hpp
 * @brief Galerkin solvers for -div a grad u = f on grid spaces, the affine
 *        problem and its dual, H^{-1} norms and divergence diagnostics.
 */
#pragma once

#include "homlab/csv.hpp"
#include "homlab/grid.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace homlab {

/**
 * @brief Right-hand side functional f on the nodal space.
 *
 * density: phi -> <phi, g> with lumped quadrature, F = W_s g.
 * flux:    phi -> -<grad phi, r> (distributional divergence of r), F = -G^H W_v r.
 * raw:     F given directly.
 */
template <class S>
class RHSFunctional {
public:
    enum class Kind { density, flux, raw };

    static RHSFunctional density(Vec<S> nodal) { return RHSFunctional(Kind::density, std::move(nodal)); }
    template <class F>
    static RHSFunctional density(const DiscreteGradient<S>& g, F&& f)
    {
        return density(g.sample_nodes(std::forward<F>(f)));
    }
    static RHSFunctional flux(Vec<S> field) { return RHSFunctional(Kind::flux, std::move(field)); }
    static RHSFunctional raw(Vec<S> f) { return RHSFunctional(Kind::raw, std::move(f)); }

    Kind kind() const { return kind_; }
    const Vec<S>& data() const { return data_; }

    /// Vector of f(phi_i) over the nodal basis.
    Vec<S> assemble(const DiscreteGradient<S>& g) const
    {
        switch (kind_) {
        case Kind::density:
            HOMLAB_THROW_IF(data_.size() != g.num_nodes(), ShapeError, "density needs nodal values");
            return g.scalar_space().weigh(data_);
        case Kind::flux:
            HOMLAB_THROW_IF(data_.size() != g.vector_space().dim(), ShapeError, "flux needs a simplex vector field");
            return -g.op().apply_conj_transpose(g.vector_space().weigh(data_));
        case Kind::raw:
            HOMLAB_THROW_IF(data_.size() != g.num_nodes(), ShapeError, "raw functional has wrong length");
            return data_;
        }
        return data_;
    }

    /// f(v), anti-linear in v like the inner product.
    S evaluate(const DiscreteGradient<S>& g, const Vec<S>& v) const { return v.dot(assemble(g)); }

private:
    RHSFunctional(Kind k, Vec<S> d) : kind_(k), data_(std::move(d)) {}
    Kind kind_;
    Vec<S> data_;
};

template <class S>
struct EllipticSolution {
    Vec<S> u;      ///< nodal values
    Vec<S> grad;   ///< G u
    Vec<S> flux;   ///< a G u
    Real residual = 0.0; ///< relative Galerkin residual
};

/**
 * @brief Factorized Galerkin operator G^H W_v a G for one gradient and coefficient.
 *
 * Neumann and periodic systems pin one node and return mean-free solutions.
 */
template <class S>
class EllipticSolver {
public:
    EllipticSolver(DiscreteGradient<S> g, CoefficientField<S> a, bool check_coefficient = true)
        : g_(std::move(g)), a_(std::move(a))
    {
        if (check_coefficient) a_.check();
        aop_ = a_.as_operator(g_);
        const SpMat<S>& gm = g_.matrix();
        const SpMat<S> wa = g_.vector_space().weights().template cast<S>().asDiagonal() * aop_.sparse_matrix();
        k_ = SpMat<S>(gm.adjoint() * (wa * gm));
        const Mat<S> ker = g_.kernel_basis();
        solver_ = std::make_shared<PinnedSolver<S>>(k_, choose_pins<S>(ker));
    }

    const DiscreteGradient<S>& gradient() const { return g_; }
    const CoefficientField<S>& coefficient() const { return a_; }
    const LinearOp<S>& coefficient_op() const { return aop_; }
    const SpMat<S>& stiffness() const { return k_; }

    EllipticSolution<S> solve(const RHSFunctional<S>& f) const { return solve_vector(f.assemble(g_)); }

    /// Solves K u = F.
    EllipticSolution<S> solve_vector(const Vec<S>& f) const
    {
        HOMLAB_THROW_IF(f.size() != g_.num_nodes(), ShapeError, "right-hand side has wrong length");
        if (g_.flavor() != Flavor::dirichlet) {
            const S total = f.sum();
            const Real scale = f.cwiseAbs().sum();
            HOMLAB_THROW_IF(std::abs(total) > 1e-10 * std::max<Real>(scale, 1e-300), CompatibilityError,
                            std::string("right-hand side does not annihilate constants (") + to_string(g_.flavor()) +
                                " flavor, |f(1)| = " + std::to_string(std::abs(total)) + ")");
        }
        EllipticSolution<S> s;
        s.u = solver_->solve(f);
        if (g_.flavor() != Flavor::dirichlet) {
            const auto& w = g_.scalar_space().weights();
            const S mean = (w.template cast<S>().cwiseProduct(s.u)).sum() / S(w.sum());
            s.u.array() -= mean;
        }
        s.grad = g_.op().apply(s.u);
        s.flux = aop_.apply(s.grad);
        const Real fn = f.norm();
        s.residual = fn > 0 ? (k_ * s.u - f).norm() / fn : (k_ * s.u).norm();
        return s;
    }

private:
    DiscreteGradient<S> g_;
    CoefficientField<S> a_;
    LinearOp<S> aop_;
    SpMat<S> k_;
    std::shared_ptr<PinnedSolver<S>> solver_;
};

template <class S>
inline EllipticSolution<S> solve_elliptic(const GridDomain& dom, const CoefficientField<S>& a,
                                          const RHSFunctional<S>& f, Flavor flavor)
{
    return EllipticSolver<S>(build_grad<S>(dom, flavor), a).solve(f);
}

// ---------------------------------------------------------------------------
// Poincare constant
// ---------------------------------------------------------------------------

struct PoincareReport {
    Real gamma = 0.0;       ///< smallest weighted singular value of the Dirichlet gradient
    Real lower_bound = 0.0; ///< 1/(axis-0 width)
    int iterations = 0;
    bool bound_holds() const { return gamma >= lower_bound; }
};

/// Inverse iteration on K x = lambda W x for the Dirichlet Laplacian.
inline PoincareReport poincare_constant(const GridDomain& dom, Real tol = 1e-12, int max_it = 500)
{
    const auto g = build_grad<Real>(dom, Flavor::dirichlet);
    const SpMat<Real>& gm = g.matrix();
    const SpMat<Real> k = gm.transpose() * g.vector_space().weights().asDiagonal() * gm;
    SparseSolver<Real> solver(k);
    const auto& w = g.scalar_space().weights();
    RVec x = g.sample_nodes([&](const Point& p) { return 1.0 + 0.1 * p[0]; });
    Real lambda = 0.0;
    PoincareReport r;
    for (int it = 0; it < max_it; ++it) {
        x = solver.solve(RVec(w.cwiseProduct(x)));
        x /= std::sqrt(x.dot(w.cwiseProduct(x)));
        const Real next = x.dot(k * x);
        r.iterations = it + 1;
        if (std::abs(next - lambda) <= tol * next) {
            lambda = next;
            break;
        }
        lambda = next;
    }
    r.gamma = std::sqrt(lambda);
    r.lower_bound = 1.0 / dom.extent(0);
    return r;
}

// ---------------------------------------------------------------------------
// H^{-1} norms
// ---------------------------------------------------------------------------

enum class DualNorm {
    laplacian, ///< dual of ||grad v||
    graph      ///< dual of (||v||^2 + ||grad v||^2)^{1/2}
};

/// sqrt(F^H K^{-1} F) on the Dirichlet space of `g`.
template <class S>
inline Real hminus_norm(const DiscreteGradient<S>& g, const RHSFunctional<S>& f, DualNorm norm = DualNorm::laplacian)
{
    HOMLAB_THROW_IF(g.flavor() != Flavor::dirichlet, InvalidArgument, "H^-1 norms use the Dirichlet space");
    const Vec<S> fv = f.assemble(g);
    if (fv.norm() == 0.0) return 0.0;
    const SpMat<S>& gm = g.matrix();
    SpMat<S> k = gm.adjoint() * g.vector_space().weights().template cast<S>().asDiagonal() * gm;
    if (norm == DualNorm::graph) {
        SpMat<S> m(k.rows(), k.cols());
        m.setIdentity();
        k += SpMat<S>(g.scalar_space().weights().template cast<S>().asDiagonal() * m);
    }
    SparseSolver<S> solver(k);
    return std::sqrt(std::max<Real>(0.0, real_part(fv.dot(solver.solve(fv)))));
}

template <class S>
inline Real hminus_norm(const GridDomain& dom, const RHSFunctional<S>& f, DualNorm norm = DualNorm::laplacian)
{
    return hminus_norm(build_grad<S>(dom, Flavor::dirichlet), f, norm);
}

// ---------------------------------------------------------------------------
// 1D closed formula
// ---------------------------------------------------------------------------

/**
 * @brief (iota^* a iota)^{-1} phi on the mean-free functions of an interval:
 * a^{-1} phi - a^{-1} (int a^{-1} phi) / (int a^{-1}).
 *
 * `a` and `phi` are per-cell values, `h` the cell width.
 */
template <class S>
inline Vec<S> projected_inverse_1d(const Vec<S>& a, const Vec<S>& phi, Real h)
{
    HOMLAB_THROW_IF(a.size() != phi.size() || a.size() == 0, ShapeError, "a and phi need one value per cell");
    const S mean_phi = phi.sum() * h;
    HOMLAB_THROW_IF(std::abs(mean_phi) > 1e-10 * std::max<Real>(1.0, phi.cwiseAbs().sum() * h), NonMeanFree,
                    "<1, phi> = " + std::to_string(std::abs(mean_phi)));
    const Vec<S> ainv = a.cwiseInverse();
    const S hm = ainv.sum() * h;
    HOMLAB_THROW_IF(std::abs(hm) < 1e-12 * ainv.cwiseAbs().sum() * h, VanishingHarmonicMean,
                    "the mean of a^{-1} vanishes");
    const Vec<S> aphi = ainv.cwiseProduct(phi);
    return aphi - ainv * (aphi.sum() * h / hm);
}

// ---------------------------------------------------------------------------
// Affine problem and its dual
// ---------------------------------------------------------------------------

template <class S>
struct AffineSolution {
    Vec<S> u;
    Vec<S> p;               ///< a (G u + z)
    Real dual_residual = 0; ///< max_q |<a^{-1} p - z, q>| / ||z|| over unit q in ran(G)^perp
    Real residual = 0;      ///< primal Galerkin residual
};

/**
 * @brief -div a (grad u + z) = f on the Dirichlet space, with the dual
 * identity <a^{-1} p, q> = <z, q> checked on probes q orthogonal to ran(G).
 */
template <class S>
inline AffineSolution<S> solve_affine(const EllipticSolver<S>& solver, const Vec<S>& z, const RHSFunctional<S>& f,
                                      std::uint64_t seed = 3)
{
    const auto& g = solver.gradient();
    HOMLAB_THROW_IF(z.size() != g.vector_space().dim(), ShapeError, "z must be a simplex vector field");
    const auto& aop = solver.coefficient_op();
    const Vec<S> fz = f.assemble(g) - g.op().apply_conj_transpose(g.vector_space().weigh(aop.apply(z)));
    const auto sol = solver.solve_vector(fz);
    AffineSolution<S> r;
    r.u = sol.u;
    r.residual = sol.residual;
    r.p = aop.apply(Vec<S>(sol.grad + z));

    const auto ainv = solver.coefficient().inverse_field().as_operator(g);
    const Vec<S> e = ainv.apply(r.p) - z;
    const auto& hv = g.vector_space();
    const auto perp = Subspace<S>::range_of(g.op(), g.kernel_basis()).complement();
    const auto probes = ProbeSet<S>::random(hv, 8, seed).restricted_to(perp);
    const auto smooth = vector_probes(g).restricted_to(perp);
    Real worst = 0.0;
    for (const ProbeSet<S>* set : {&probes, &smooth})
        for (const auto& q : set->vectors()) worst = std::max(worst, std::abs(hv.inner(q, e)));
    const Real zn = hv.norm(z);
    r.dual_residual = zn > 0 ? worst / zn : worst;
    return r;
}

// ---------------------------------------------------------------------------
// Divergence diagnostics
// ---------------------------------------------------------------------------

struct DivergenceDefect {
    Real projection_gap = 0.0; ///< ||P_{ran G}(r_n - r)||
    Real hminus_gap = 0.0;     ///< ||div(r_n - r)||_{H^-1}
    /// hminus_gap / projection_gap; the two norms coincide for the Laplacian dual.
    Real ratio = 1.0;
};

template <class S>
inline DivergenceDefect divergence_defect(const DiscreteGradient<S>& g, const Vec<S>& rn, const Vec<S>& r)
{
    HOMLAB_THROW_IF(g.flavor() != Flavor::dirichlet, InvalidArgument, "divergence_defect uses the Dirichlet gradient");
    const Vec<S> d = rn - r;
    GeneratedRange<S> range(g.op(), g.kernel_basis());
    DivergenceDefect out;
    out.projection_gap = g.vector_space().norm(range.project(d));
    out.hminus_gap = hminus_norm(g, RHSFunctional<S>::flux(d));
    out.ratio = out.projection_gap > 1e-300 ? out.hminus_gap / out.projection_gap : 1.0;
    return out;
}

/// sum over simplices of w phi <r, q>.
template <class S>
inline S divcurl_pairing(const DiscreteGradient<S>& g, const Vec<S>& q, const Vec<S>& r, const RVec& phi)
{
    const int d = g.domain().dim();
    HOMLAB_THROW_IF(phi.size() != g.num_simplices(), ShapeError, "cutoff needs one value per simplex");
    HOMLAB_THROW_IF(q.size() != r.size() || q.size() != g.vector_space().dim(), ShapeError,
                    "fields must live on the simplex vector space");
    S total(0);
    for (Index s = 0; s < g.num_simplices(); ++s) total += phi(s) * r.segment(s * d, d).dot(q.segment(s * d, d));
    return total * S(g.simplex_volume());
}

/// Table of pairings for a whole sequence.
template <class S>
inline std::vector<S> divcurl_pairing(const DiscreteGradient<S>& g, const std::vector<Vec<S>>& qs,
                                      const std::vector<Vec<S>>& rs, const RVec& phi)
{
    HOMLAB_THROW_IF(qs.size() != rs.size(), ShapeError, "sequences differ in length");
    std::vector<S> out;
    for (std::size_t i = 0; i < qs.size(); ++i) out.push_back(divcurl_pairing(g, qs[i], rs[i], phi));
    return out;
}

/// Smooth bump with maximum 1, supported in (centre - radius, centre + radius) per axis.
inline Real bump(const GridDomain& dom, const Point& x, Real centre = 0.5, Real radius = 0.4)
{
    Real v = 1.0;
    for (int k = 0; k < dom.dim(); ++k) {
        const Real s = (x[k] - (dom.lo(k) + centre * dom.extent(k))) / (radius * dom.extent(k));
        if (std::abs(s) >= 1.0) return 0.0;
        v *= std::exp(1.0 - 1.0 / (1.0 - s * s));
    }
    return v;
}

template <class S>
inline RVec bump_on_simplices(const DiscreteGradient<S>& g)
{
    RVec phi(g.num_simplices());
    for (Index s = 0; s < g.num_simplices(); ++s) phi(s) = bump(g.domain(), g.simplex_barycenter(s));
    return phi;
}

// ---------------------------------------------------------------------------
// Dumps
// ---------------------------------------------------------------------------

inline std::vector<std::string> coordinate_columns(int d)
{
    static const char* names[] = {"x", "y", "z"};
    return std::vector<std::string>(names, names + d);
}

template <class S>
inline void add_value_cells(std::vector<CsvCell>& row, const S& v)
{
    if constexpr (is_complex_v<S>) {
        row.emplace_back(v.real());
        row.emplace_back(v.imag());
    } else {
        row.emplace_back(static_cast<double>(v));
    }
}

template <class S>
inline std::vector<std::string> value_columns(const std::string& name)
{
    if constexpr (is_complex_v<S>) {
        return {name + "_re", name + "_im"};
    } else {
        return {name};
    }
}

/// Nodal solution with coordinates.
template <class S>
inline CsvTable solution_table(const DiscreteGradient<S>& g, const Vec<S>& u)
{
    const int d = g.domain().dim();
    auto cols = coordinate_columns(d);
    for (auto& c : value_columns<S>("u")) cols.push_back(c);
    CsvTable t("solution", cols);
    for (Index i = 0; i < g.num_nodes(); ++i) {
        const auto x = g.node_point(i);
        std::vector<CsvCell> row;
        for (int k = 0; k < d; ++k) row.emplace_back(x[k]);
        add_value_cells(row, u(i));
        t.add(std::move(row));
    }
    return t;
}

/// Simplex vector field at barycentres.
template <class S>
inline CsvTable flux_table(const DiscreteGradient<S>& g, const Vec<S>& q)
{
    const int d = g.domain().dim();
    auto cols = coordinate_columns(d);
    for (int k = 0; k < d; ++k)
        for (auto& c : value_columns<S>("q" + std::to_string(k + 1))) cols.push_back(c);
    CsvTable t("flux", cols);
    for (Index s = 0; s < g.num_simplices(); ++s) {
        const auto x = g.simplex_barycenter(s);
        std::vector<CsvCell> row;
        for (int k = 0; k < d; ++k) row.emplace_back(x[k]);
        for (int k = 0; k < d; ++k) add_value_cells(row, q(s * d + k));
        t.add(std::move(row));
    }
    return t;
}

/// Adaptive Gauss-Kronrod on [a, b].
template <class F>
inline Real integrate(F&& f, Real a, Real b, Real tol = 1e-12)
{
    return boost::math::quadrature::gauss_kronrod<Real, 61>::integrate(std::forward<F>(f), a, b, 15, tol);
}

} // namespace homlab
