/**
 * @file applications.hpp
 * @brief Thermoelastic and Maxwell systems on grids: assembly, congruence
 *        diagonalisation, staggered curl, Helmholtz splitting and the
 *        homogenisation resolvent experiments.
 */
#pragma once

#include "homlab/evo.hpp"
#include "homlab/homogenize.hpp"

namespace homlab {

// ---------------------------------------------------------------------------
// Thermoelasticity
// ---------------------------------------------------------------------------

/// Thermoelastic coefficients on one grid. Scalars are per cell.
struct ThermoFields {
    RVec rho0;
    CoefficientField<Real> stiffness;    ///< C
    Real coupling = 0.0;                 ///< Gamma
    RVec w;
    CoefficientField<Real> conductivity; ///< kappa
};

/**
 * @brief lambda M0 + M1 + A on (v, T, theta, Q) = (nodes, simplex vectors,
 * nodes, simplex vectors) with Dirichlet gradients.
 */
struct ThermoSystem {
    DiscreteGradient<Real> grad;
    std::vector<HilbertSpace<Real>> parts;
    ThermoFields fields;
    Real lambda = 1.0;
    SpMat<Real> coupling_op;     ///< theta -> gamma * (vertex average of theta)
    SpMat<Real> coupling_adj;    ///< its weighted adjoint
    LinearOp<Real> a;
    LinearOp<Real> m0;
    LinearOp<Real> m1;
    LinearOp<Real> t;            ///< lambda m0 + m1
    Real coercivity = 0.0;       ///< lambda_min Re t

    const HilbertSpace<Real>& space() const { return a.source(); }
    std::array<Index, 4> block_dims() const
    {
        return {parts[0].dim(), parts[1].dim(), parts[2].dim(), parts[3].dim()};
    }
    Index offset(int block) const
    {
        Index o = 0;
        for (int k = 0; k < block; ++k) o += parts[static_cast<std::size_t>(k)].dim();
        return o;
    }
};

namespace detail {

inline SpMat<Real> weighted_adjoint(const SpMat<Real>& m, const HilbertSpace<Real>& src, const HilbertSpace<Real>& tgt)
{
    SpMat<Real> out = src.weights().cwiseInverse().asDiagonal() * SpMat<Real>(m.transpose()) *
                      tgt.weights().asDiagonal();
    out.makeCompressed();
    return out;
}

} // namespace detail

/**
 * @brief Assembles the thermoelastic system.
 * @param min_coercivity required lower bound for Re(lambda M0 + M1)
 * @throws CoercivityError with a suggested lambda when the bound fails
 */
inline ThermoSystem assemble_thermo(const GridDomain& dom, ThermoFields fields, Real lambda,
                                    Real min_coercivity = 0.0)
{
    HOMLAB_THROW_IF(!(lambda > 0.0), InvalidArgument, "lambda must be positive");
    HOMLAB_THROW_IF(fields.rho0.size() != dom.num_cells() || fields.w.size() != dom.num_cells(), ShapeError,
                    "rho0 and w need one value per cell");
    HOMLAB_THROW_IF(!(fields.stiffness.domain() == dom) || !(fields.conductivity.domain() == dom), ShapeError,
                    "C and kappa must live on the system grid");
    HOMLAB_THROW_IF(fields.rho0.minCoeff() <= 0.0 || fields.w.minCoeff() <= 0.0, CoercivityError,
                    "rho0 and w must be positive");
    ThermoSystem sys;
    sys.grad = DiscreteGradient<Real>(dom, Flavor::dirichlet);
    const auto& g = sys.grad;
    const auto hs = g.scalar_space();
    const auto hv = g.vector_space();
    sys.parts = {hs, hv, hs, hv};
    sys.lambda = lambda;

    const int d = dom.dim();
    const SpMat<Real> avg = g.vertex_average();
    {
        const Real gi = fields.coupling / std::sqrt(static_cast<Real>(d));
        std::vector<Eigen::Triplet<Real>> trip;
        for (Index s = 0; s < avg.outerSize(); ++s)
            for (SpMat<Real>::InnerIterator it(avg, s); it; ++it)
                for (int i = 0; i < d; ++i) trip.emplace_back(it.row() * d + i, it.col(), gi * it.value());
        sys.coupling_op = SpMat<Real>(hv.dim(), hs.dim());
        sys.coupling_op.setFromTriplets(trip.begin(), trip.end());
    }
    sys.coupling_adj = detail::weighted_adjoint(sys.coupling_op, hs, hv);

    const SpMat<Real> grad = g.matrix();
    const SpMat<Real> div = g.div().sparse_matrix();
    const SpMat<Real> none;
    sys.a = block_sparse<Real>(sys.parts, {{none, div, none, none},
                                           {grad, none, none, none},
                                           {none, none, none, div},
                                           {none, none, grad, none}});

    const SpMat<Real> cinv = fields.stiffness.inverse_field().as_operator(g).sparse_matrix();
    const SpMat<Real> kinv = fields.conductivity.inverse_field().as_operator(g).sparse_matrix();
    const SpMat<Real> rho = sparse_diagonal<Real>(g.cell_to_node_average(fields.rho0));
    const SpMat<Real> wn = sparse_diagonal<Real>(g.cell_to_node_average(fields.w));
    const SpMat<Real> cg = cinv * sys.coupling_op;
    const SpMat<Real> gc = sys.coupling_adj * cinv;
    const SpMat<Real> gcg = SpMat<Real>(wn + sys.coupling_adj * cg);
    sys.m0 = block_sparse<Real>(sys.parts, {{rho, none, none, none},
                                            {none, cinv, cg, none},
                                            {none, gc, gcg, none},
                                            {none, none, none, none}});
    sys.m1 = block_sparse<Real>(sys.parts, {{none, none, none, none},
                                            {none, none, none, none},
                                            {none, none, none, none},
                                            {none, none, none, kinv}});
    sys.fields = std::move(fields);
    sys.t = combine<Real>(lambda, sys.m0, 1.0, sys.m1);

    const auto rep = coercivity_check(sys.t, 1e-300, 1e300, 0.0);
    sys.coercivity = rep.re_min;
    if (!(sys.coercivity > min_coercivity) || !(sys.coercivity > 0.0)) {
        // The kappa block does not scale with lambda; the rest does.
        const auto m0rep = coercivity_check(
            block_sparse<Real>({sys.parts[0], sys.parts[1], sys.parts[2]},
                               {{rho, none, none}, {none, cinv, cg}, {none, gc, gcg}}),
            1e-300, 1e300, 0.0);
        std::string hint = "M0 is not positive definite on (v, T, theta)";
        if (m0rep.re_min > 0.0)
            hint = "try lambda >= " + format_real(std::max(min_coercivity, 0.0) / m0rep.re_min);
        throw CoercivityError("Re(lambda M0 + M1) has minimum " + format_real(sys.coercivity) +
                                          " at lambda = " + format_real(lambda) + "; " + hint);
    }
    return sys;
}

struct CongruenceReport {
    LinearOp<Real> s;
    Real m0_defect = 0.0; ///< S M0 S* vs diag(rho0, C^-1, w, 0)
    Real m1_defect = 0.0; ///< S M1 S* vs M1
    Real a_defect = 0.0;  ///< S A S* vs the coupled form
    Real a_skew = 0.0;    ///< skew defect of S A S*
    bool passed(Real tol = 1e-9) const
    {
        return m0_defect <= tol && m1_defect <= tol && a_defect <= tol && a_skew <= tol;
    }
};

namespace detail {

inline Real relative_diff(const SpMat<Real>& a, const SpMat<Real>& b)
{
    const SpMat<Real> d = a - b;
    Real m = 0.0, s = 0.0;
    for (Index k = 0; k < d.outerSize(); ++k)
        for (SpMat<Real>::InnerIterator it(d, k); it; ++it) m = std::max(m, std::abs(it.value()));
    for (Index k = 0; k < b.outerSize(); ++k)
        for (SpMat<Real>::InnerIterator it(b, k); it; ++it) s = std::max(s, std::abs(it.value()));
    return m / std::max(s, 1e-300);
}

} // namespace detail

/**
 * @brief S = [[1,0,0,0],[0,1,0,0],[0,-Gamma*,1,0],[0,0,0,1]] and the three
 * congruence identities.
 */
inline CongruenceReport congruence_diagonalize(const ThermoSystem& sys)
{
    const auto& p = sys.parts;
    const auto& g = sys.grad;
    const SpMat<Real> none;
    auto eye = [](Index n) {
        SpMat<Real> m(n, n);
        m.setIdentity();
        return m;
    };
    CongruenceReport rep;
    const SpMat<Real> neg_adj = -sys.coupling_adj;
    rep.s = block_sparse<Real>(p, {{eye(p[0].dim()), none, none, none},
                                   {none, eye(p[1].dim()), none, none},
                                   {none, neg_adj, eye(p[2].dim()), none},
                                   {none, none, none, eye(p[3].dim())}});
    const HilbertSpace<Real> h = sys.space();
    const SpMat<Real> s = rep.s.sparse_matrix();
    const SpMat<Real> s_adj = detail::weighted_adjoint(s, h, h);
    auto congr = [&](const LinearOp<Real>& m) { return SpMat<Real>(s * m.sparse_matrix() * s_adj); };

    const SpMat<Real> cinv = sys.fields.stiffness.inverse_field().as_operator(g).sparse_matrix();
    const SpMat<Real> rho = sparse_diagonal<Real>(g.cell_to_node_average(sys.fields.rho0));
    const SpMat<Real> wn = sparse_diagonal<Real>(g.cell_to_node_average(sys.fields.w));
    const auto target0 = block_sparse<Real>(p, {{rho, none, none, none},
                                                {none, cinv, none, none},
                                                {none, none, wn, none},
                                                {none, none, none, none}});
    rep.m0_defect = detail::relative_diff(congr(sys.m0), target0.sparse_matrix());
    rep.m1_defect = detail::relative_diff(congr(sys.m1), sys.m1.sparse_matrix());

    const SpMat<Real> grad = g.matrix();
    const SpMat<Real> div = g.div().sparse_matrix();
    const SpMat<Real> div_gamma = -(div * sys.coupling_op);
    const SpMat<Real> gamma_grad = -(sys.coupling_adj * grad);
    const auto target_a = block_sparse<Real>(p, {{none, div, div_gamma, none},
                                                 {grad, none, none, none},
                                                 {gamma_grad, none, none, div},
                                                 {none, none, grad, none}});
    const SpMat<Real> sas = congr(sys.a);
    rep.a_defect = detail::relative_diff(sas, target_a.sparse_matrix());
    const SpMat<Real> sas_adj = detail::weighted_adjoint(sas, h, h);
    rep.a_skew = detail::relative_diff(SpMat<Real>(-sas_adj), sas);
    return rep;
}

/// Oscillating thermoelastic coefficients indexed by n.
struct ThermoSequence {
    CoefficientSequence<Real> stiffness;
    CoefficientSequence<Real> conductivity;
    std::function<Real(Real)> rho0; ///< profile in n x_1
    std::function<Real(Real)> w;    ///< profile in n x_1
    Real coupling = 0.0;
    Mat<Real> stiffness_limit;      ///< H-limit of C_n
    Mat<Real> conductivity_limit;   ///< H-limit of kappa_n
    std::vector<Real> breaks{0.5};  ///< jump points of the profiles in [0, 1)
};

namespace detail {

inline RVec cell_profile(const GridDomain& dom, const std::function<Real(Real)>& prof, Index n)
{
    RVec v(dom.num_cells());
    for (Index c = 0; c < dom.num_cells(); ++c) v(c) = prof(periodic_position(dom, dom.cell_center(c), n)[0]);
    return v;
}

inline Real profile_mean(const std::function<Real(Real)>& prof, const std::vector<Real>& breaks)
{
    std::vector<Real> pts{0.0};
    for (Real b : breaks)
        if (b > 0.0 && b < 1.0) pts.push_back(b);
    pts.push_back(1.0);
    Real m = 0.0;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) m += integrate(prof, pts[i], pts[i + 1]);
    return m;
}

/// Probes per block: sine modes in each scalar block, e_j times sine modes in each vector block.
inline ProbeSet<Real> block_probes(const ThermoSystem& sys, std::size_t cap)
{
    const auto sp = scalar_probes(sys.grad, cap);
    const auto vp = vector_probes(sys.grad, cap);
    const Index total = sys.space().dim();
    std::vector<Vec<Real>> out;
    for (int b = 0; b < 4; ++b) {
        const auto& src = (b % 2 == 0) ? sp : vp;
        for (const auto& v : src.vectors()) {
            Vec<Real> x = Vec<Real>::Zero(total);
            x.segment(sys.offset(b), v.size()) = v;
            out.push_back(std::move(x));
        }
    }
    return ProbeSet<Real>(sys.space(), std::move(out));
}

inline LinearOp<Real> sparse_resolvent(const LinearOp<Real>& t, const LinearOp<Real>& a)
{
    const auto ta = t + a;
    auto solver = std::make_shared<SparseSolver<Real>>(ta.sparse_matrix());
    return LinearOp<Real>::matrix_free(ta.source(), ta.target(),
                                       [solver](const Vec<Real>& x) { return solver->solve(x); });
}

} // namespace detail

struct ThermoRow {
    Index n = 0;
    Real resolvent_gap = 0.0;
    TauGap stiffness_tau{0, 0, 0, 0};
    Real w_gap = 0.0;
    Real rho0_gap = 0.0;
};

struct ThermoReport {
    std::vector<ThermoRow> rows;
    Real tolerance = 5e-2;
    Real coupling = 0.0;
    Real lambda = 1.0;
    bool decays() const
    {
        return rows.empty() || (rows.back().resolvent_gap < tolerance && rows.back().resolvent_gap <= rows.front().resolvent_gap);
    }
    bool passed() const { return decays(); }
    CsvTable table() const
    {
        CsvTable t("thermo", {"n", "resolvent_wot_gap", "tau_c_m00inv", "tau_c_m01", "tau_c_m10", "tau_c_ms",
                              "w_wot_gap", "rho0_wot_gap"});
        t.note("lambda=" + format_real(lambda) + " gamma=" + format_real(coupling));
        for (const auto& r : rows)
            t.add({r.n, r.resolvent_gap, r.stiffness_tau[0], r.stiffness_tau[1], r.stiffness_tau[2], r.stiffness_tau[3],
                   r.w_gap, r.rho0_gap});
        return t;
    }
};

/**
 * @brief Relative wot gap between the resolvents of the n-th system and the
 * limit system (H-limits for C and kappa, means for rho0 and w), next to the
 * Schur gaps of C_n and the multiplier gaps of w_n and rho0_n.
 */
inline ThermoReport thermo_homogenization_experiment(const ThermoSequence& seq, Real lambda, int d,
                                                     const ExperimentOptions& opt, std::size_t probe_cap = 4)
{
    const GridDomain dom = detail::coupled_grid(d, opt);
    auto fields_at = [&](Index n) {
        ThermoFields f;
        f.rho0 = detail::cell_profile(dom, seq.rho0, n);
        f.w = detail::cell_profile(dom, seq.w, n);
        f.stiffness = seq.stiffness.field(n, dom);
        f.conductivity = seq.conductivity.field(n, dom);
        f.coupling = seq.coupling;
        return f;
    };
    ThermoFields lim;
    lim.rho0 = RVec::Constant(dom.num_cells(), detail::profile_mean(seq.rho0, seq.breaks));
    lim.w = RVec::Constant(dom.num_cells(), detail::profile_mean(seq.w, seq.breaks));
    lim.stiffness = CoefficientField<Real>::constant(dom, seq.stiffness_limit);
    lim.conductivity = CoefficientField<Real>::constant(dom, seq.conductivity_limit);
    lim.coupling = seq.coupling;
    const auto limit = assemble_thermo(dom, lim, lambda);
    const auto probes = detail::block_probes(limit, probe_cap);
    const auto rlim = detail::sparse_resolvent(limit.t, limit.a);
    const Real scale = std::max(pairing_scale(rlim, probes, probes), 1e-300);

    const auto sp = scalar_probes(limit.grad, 8);
    const RVec w_lim = limit.grad.cell_to_node_average(lim.w);
    const RVec r_lim = limit.grad.cell_to_node_average(lim.rho0);
    const auto hs = limit.grad.scalar_space();
    auto mult = [&](const RVec& v) { return LinearOp<Real>::sparse(hs, hs, sparse_diagonal<Real>(Vec<Real>(v))); };
    const Real w_scale = std::max(pairing_scale(mult(w_lim), sp, sp), 1e-300);
    const Real r_scale = std::max(pairing_scale(mult(r_lim), sp, sp), 1e-300);

    ThermoReport rep;
    rep.tolerance = opt.tolerance;
    rep.coupling = seq.coupling;
    rep.lambda = lambda;
    rep.rows.resize(opt.n_list.size());
    parallel_for(opt.n_list.size(), opt.jobs, [&](std::size_t i) {
        const Index n = opt.n_list[i];
        const auto f = fields_at(n);
        ThermoSystem sys;
        try {
            sys = assemble_thermo(dom, f, lambda);
        } catch (const CoercivityError& e) {
            throw CoercivityError("n=" + std::to_string(n) + ": " + e.what());
        }
        ThermoRow r;
        r.n = n;
        r.resolvent_gap = wot_gap(detail::sparse_resolvent(sys.t, sys.a), rlim, probes, probes) / scale;
        r.w_gap = wot_gap(mult(sys.grad.cell_to_node_average(f.w)), mult(w_lim), sp, sp) / w_scale;
        r.rho0_gap = wot_gap(mult(sys.grad.cell_to_node_average(f.rho0)), mult(r_lim), sp, sp) / r_scale;
        rep.rows[i] = r;
    });
    const auto tau = schur_equiv_check(seq.stiffness, seq.stiffness_limit, opt);
    for (std::size_t i = 0; i < rep.rows.size() && i < tau.rows.size(); ++i) rep.rows[i].stiffness_tau = tau.rows[i].tau_rel;
    return rep;
}

/// 1D-laminate sequence: C_n two-phase, kappa_n sine, w_n and rho0_n oscillating.
inline ThermoSequence laminate_thermo_sequence(int d, Real coupling)
{
    ThermoSequence s;
    const auto c = two_phase_profile(1.0, 4.0);
    const auto k = two_phase_profile(2.0, 3.0);
    s.stiffness = CoefficientSequence<Real>::laminate(d, c, Bounds{1.0, 4.0});
    s.conductivity = CoefficientSequence<Real>::laminate(d, k, Bounds{2.0, 3.0});
    s.rho0 = two_phase_profile(1.0, 2.0);
    s.w = two_phase_profile(0.5, 1.5);
    s.coupling = coupling;
    s.stiffness_limit = laminate_tensor<Real>(d, laminate_limit<Real>(c, {0.5}));
    s.conductivity_limit = laminate_tensor<Real>(d, laminate_limit<Real>(k, {0.5}));
    return s;
}

// ---------------------------------------------------------------------------
// Staggered 3D grid
// ---------------------------------------------------------------------------

/**
 * @brief Unit cube with N cells per axis. Interior nodes, interior edges
 * (tangential trace zero), interior faces and cells.
 */
class StaggeredGrid {
public:
    enum class Family { node, edge, face, cell };

    StaggeredGrid() = default;
    explicit StaggeredGrid(Index n) : n_(n)
    {
        HOMLAB_THROW_IF(n < 2, InvalidArgument, "staggered grid needs at least 2 cells per axis");
        check_budget(n * n * n * 7, "staggered grid");
        h_ = 1.0 / static_cast<Real>(n);
    }

    Index cells_per_axis() const { return n_; }
    Real h() const { return h_; }

    /// Index ranges [lo, hi) per axis for a family (dir = edge direction or face normal).
    std::array<std::array<Index, 2>, 3> ranges(Family f, int dir = 0) const
    {
        std::array<std::array<Index, 2>, 3> r{};
        for (int k = 0; k < 3; ++k) {
            switch (f) {
            case Family::node: r[k] = {1, n_}; break;
            case Family::cell: r[k] = {0, n_}; break;
            case Family::edge: r[k] = k == dir ? std::array<Index, 2>{0, n_} : std::array<Index, 2>{1, n_}; break;
            case Family::face: r[k] = k == dir ? std::array<Index, 2>{1, n_} : std::array<Index, 2>{0, n_}; break;
            }
        }
        return r;
    }

    Index count(Family f, int dir = 0) const
    {
        const auto r = ranges(f, dir);
        Index c = 1;
        for (const auto& x : r) c *= x[1] - x[0];
        return c;
    }
    /// Total over directions for edges and faces.
    Index size(Family f) const
    {
        if (f == Family::node || f == Family::cell) return count(f);
        return count(f, 0) + count(f, 1) + count(f, 2);
    }

    /// Global index within the family, or -1 when p is outside (boundary).
    Index index(Family f, int dir, const MultiIndex& p) const
    {
        const auto r = ranges(f, dir);
        Index idx = 0, stride = 1;
        for (int k = 0; k < 3; ++k) {
            if (p[k] < r[k][0] || p[k] >= r[k][1]) return -1;
            idx += (p[k] - r[k][0]) * stride;
            stride *= r[k][1] - r[k][0];
        }
        if (f == Family::edge || f == Family::face)
            for (int a = 0; a < dir; ++a) idx += count(f, a);
        return idx;
    }

    template <class Fn>
    void for_each(Family f, int dir, Fn&& fn) const
    {
        const auto r = ranges(f, dir);
        for (Index k = r[2][0]; k < r[2][1]; ++k)
            for (Index j = r[1][0]; j < r[1][1]; ++j)
                for (Index i = r[0][0]; i < r[0][1]; ++i) {
                    const MultiIndex p{i, j, k};
                    fn(index(f, dir, p), p);
                }
    }

    /// Geometric position of a DOF.
    Point position(Family f, int dir, const MultiIndex& p) const
    {
        Point x{0, 0, 0};
        for (int k = 0; k < 3; ++k) {
            Real off = 0.0;
            if (f == Family::cell) off = 0.5;
            if (f == Family::edge && k == dir) off = 0.5;
            if (f == Family::face && k != dir) off = 0.5;
            x[k] = (static_cast<Real>(p[k]) + off) * h_;
        }
        return x;
    }

    HilbertSpace<Real> space(Family f) const
    {
        return HilbertSpace<Real>::diagonal(RVec::Constant(size(f), h_ * h_ * h_));
    }

    /// Dirichlet gradient: interior nodes -> interior edges.
    LinearOp<Real> grad0() const
    {
        std::vector<Eigen::Triplet<Real>> trip;
        for (int a = 0; a < 3; ++a)
            for_each(Family::edge, a, [&](Index e, const MultiIndex& p) {
                MultiIndex q = p;
                ++q[a];
                if (const Index i = index(Family::node, 0, q); i >= 0) trip.emplace_back(e, i, 1.0 / h_);
                if (const Index i = index(Family::node, 0, p); i >= 0) trip.emplace_back(e, i, -1.0 / h_);
            });
        return make(Family::edge, Family::node, trip);
    }

    /// Curl with tangential-zero trace: interior edges -> interior faces.
    LinearOp<Real> curl0() const
    {
        std::vector<Eigen::Triplet<Real>> trip;
        for (int a = 0; a < 3; ++a) {
            const int b = (a + 1) % 3, c = (a + 2) % 3;
            for_each(Family::face, a, [&](Index f, const MultiIndex& p) {
                MultiIndex pb = p, pc = p;
                ++pb[b];
                ++pc[c];
                // (curl E)_a = d_b E_c - d_c E_b
                if (const Index e = index(Family::edge, c, pb); e >= 0) trip.emplace_back(f, e, 1.0 / h_);
                if (const Index e = index(Family::edge, c, p); e >= 0) trip.emplace_back(f, e, -1.0 / h_);
                if (const Index e = index(Family::edge, b, pc); e >= 0) trip.emplace_back(f, e, -1.0 / h_);
                if (const Index e = index(Family::edge, b, p); e >= 0) trip.emplace_back(f, e, 1.0 / h_);
            });
        }
        return make(Family::face, Family::edge, trip);
    }

    /// Adjoint of curl0 (no boundary condition): interior faces -> interior edges.
    LinearOp<Real> curl() const { return adjoint(curl0()); }

    /// Neumann gradient: cells -> interior faces.
    LinearOp<Real> grad_neumann() const
    {
        std::vector<Eigen::Triplet<Real>> trip;
        for (int a = 0; a < 3; ++a)
            for_each(Family::face, a, [&](Index f, const MultiIndex& p) {
                MultiIndex q = p;
                --q[a];
                trip.emplace_back(f, index(Family::cell, 0, p), 1.0 / h_);
                trip.emplace_back(f, index(Family::cell, 0, q), -1.0 / h_);
            });
        return make(Family::face, Family::cell, trip);
    }

    /// Divergence on faces with zero normal trace: -adjoint(grad_neumann).
    LinearOp<Real> div() const
    {
        return LinearOp<Real>::sparse(space(Family::face), space(Family::cell),
                                      SpMat<Real>(-SpMat<Real>(grad_neumann().sparse_matrix().transpose())));
    }

    /// Vector field with component fn(x)[a] sampled on family f (edges or faces).
    template <class Fn>
    Vec<Real> sample(Family f, Fn&& fn) const
    {
        Vec<Real> v(size(f));
        for (int a = 0; a < 3; ++a)
            for_each(f, a, [&](Index i, const MultiIndex& p) { v(i) = fn(position(f, a, p))[static_cast<std::size_t>(a)]; });
        return v;
    }

    template <class Fn>
    Vec<Real> sample_scalar(Family f, Fn&& fn) const
    {
        Vec<Real> v(size(f));
        for_each(f, 0, [&](Index i, const MultiIndex& p) { v(i) = fn(position(f, 0, p)); });
        return v;
    }

private:
    LinearOp<Real> make(Family to, Family from, const std::vector<Eigen::Triplet<Real>>& trip) const
    {
        SpMat<Real> m(size(to), size(from));
        m.setFromTriplets(trip.begin(), trip.end());
        return LinearOp<Real>::sparse(space(from), space(to), std::move(m));
    }

    Index n_ = 2;
    Real h_ = 0.5;
};

/// Discrete curl pair with curl = curl0^*.
struct CurlPair {
    LinearOp<Real> curl0;
    LinearOp<Real> curl;
};

inline CurlPair build_curl(const StaggeredGrid& grid)
{
    auto c0 = grid.curl0();
    return {c0, adjoint(c0)};
}

struct ComplexIdentities {
    Real curl_grad = 0.0;   ///< max |curl0 grad0|
    Real div_curl = 0.0;    ///< max |div curl0|
    Real adjointness = 0.0; ///< max |curl - curl0^T|
};

inline ComplexIdentities complex_identities(const StaggeredGrid& grid)
{
    const auto cp = build_curl(grid);
    const SpMat<Real> c0 = cp.curl0.sparse_matrix();
    auto maxabs = [](const SpMat<Real>& m) {
        Real r = 0.0;
        for (Index k = 0; k < m.outerSize(); ++k)
            for (SpMat<Real>::InnerIterator it(m, k); it; ++it) r = std::max(r, std::abs(it.value()));
        return r;
    };
    const Real scale = std::max(maxabs(c0), 1e-300);
    ComplexIdentities r;
    r.curl_grad = maxabs(SpMat<Real>(c0 * grid.grad0().sparse_matrix())) / (scale * scale);
    r.div_curl = maxabs(SpMat<Real>(SpMat<Real>(grid.grad_neumann().sparse_matrix().transpose()) * c0)) / (scale * scale);
    r.adjointness = maxabs(SpMat<Real>(cp.curl.sparse_matrix() - SpMat<Real>(c0.transpose()))) / scale;
    return r;
}

// ---------------------------------------------------------------------------
// Helmholtz decomposition
// ---------------------------------------------------------------------------

/// gradients + curls + harmonic fields on edges (Dirichlet) or faces (Neumann).
struct HelmholtzSplit {
    Flavor flavor = Flavor::dirichlet;
    Subspace<Real> gradients;
    Subspace<Real> curls;
    Subspace<Real> harmonic;
    Index total = 0;
    Real orthogonality = 0.0;  ///< max |<b_i, b_j>| across blocks
    Real reassembly = 0.0;     ///< seeded random field minus sum of its projections, relative

    Index dim_sum() const { return *gradients.dim() + *curls.dim() + *harmonic.dim(); }
    bool passed(Real tol = 1e-8) const
    {
        return dim_sum() == total && orthogonality < tol && reassembly < 1e-9 && *harmonic.dim() == 0;
    }
};

namespace detail {

inline HelmholtzSplit helmholtz_from(const LinearOp<Real>& grad, const LinearOp<Real>& curl, Flavor flavor,
                                     std::uint64_t seed)
{
    const auto& h = grad.target();
    HelmholtzSplit s;
    s.flavor = flavor;
    s.total = h.dim();
    s.gradients = kernel_range(grad).range;
    s.curls = kernel_range(curl).range;
    HOMLAB_THROW_IF(!s.gradients.is_explicit() || !s.curls.is_explicit(), BudgetExceeded,
                    "Helmholtz decomposition needs explicit subspaces; grid too large");
    const Mat<Real>& bg = s.gradients.basis();
    const Mat<Real>& bc = s.curls.basis();
    Mat<Real> both(h.dim(), bg.cols() + bc.cols());
    both << bg, bc;
    const Mat<Real> wb = h.whiten_rows(both);
    Eigen::HouseholderQR<Mat<Real>> qr(wb);
    const Mat<Real> q = qr.householderQ();
    const Index r = std::min<Index>(both.cols(), h.dim());
    s.harmonic = Subspace<Real>::from_basis(h, h.unwhiten_rows(q.rightCols(h.dim() - r)), 1e-8);
    const Mat<Real>& bh = s.harmonic.basis();
    Real o = 0.0;
    if (bg.cols() && bc.cols()) o = std::max(o, (bg.transpose() * h.weigh_rows(bc)).cwiseAbs().maxCoeff());
    if (bg.cols() && bh.cols()) o = std::max(o, (bg.transpose() * h.weigh_rows(bh)).cwiseAbs().maxCoeff());
    if (bc.cols() && bh.cols()) o = std::max(o, (bc.transpose() * h.weigh_rows(bh)).cwiseAbs().maxCoeff());
    s.orthogonality = o;
    std::mt19937_64 rng(seed);
    const Vec<Real> x = gaussian_vector<Real>(h.dim(), rng);
    const Vec<Real> back = s.gradients.project(x) + s.curls.project(x) + s.harmonic.project(x);
    s.reassembly = h.norm(Vec<Real>(back - x)) / h.norm(x);
    return s;
}

} // namespace detail

/// Both flavours: edges = ran grad0 + ran curl + H_D, faces = ran grad_N + ran curl0 + H_N.
inline std::pair<HelmholtzSplit, HelmholtzSplit> helmholtz_decompose(const StaggeredGrid& grid, std::uint64_t seed = 1)
{
    const auto cp = build_curl(grid);
    return {detail::helmholtz_from(grid.grad0(), cp.curl, Flavor::dirichlet, seed),
            detail::helmholtz_from(grid.grad_neumann(), cp.curl0, Flavor::neumann, seed + 1)};
}

// ---------------------------------------------------------------------------
// Maxwell
// ---------------------------------------------------------------------------

using DiagonalTensor = std::array<Real, 3>;
using DiagonalTensorFn = std::function<DiagonalTensor(const Point&)>;

/**
 * @brief T(lambda) + A on (E on edges, H on faces), with
 * T = diag(lambda eps + sigma, lambda mu) and A = [[0, -curl], [curl0, 0]].
 */
class MaxwellSystem {
public:
    MaxwellSystem() = default;

    /// Coefficients sampled per cell; edges take the arithmetic mean, faces the harmonic mean.
    MaxwellSystem(StaggeredGrid grid, const DiagonalTensorFn& eps, const DiagonalTensorFn& mu,
                  const DiagonalTensorFn& sigma, Real lambda)
        : grid_(std::move(grid)), lambda_(lambda)
    {
        HOMLAB_THROW_IF(!(lambda > 0.0), InvalidArgument, "lambda must be positive");
        const Index nc = grid_.size(StaggeredGrid::Family::cell);
        RMat te(nc, 3), tm(nc, 3);
        grid_.for_each(StaggeredGrid::Family::cell, 0, [&](Index c, const MultiIndex& p) {
            const Point x = grid_.position(StaggeredGrid::Family::cell, 0, p);
            const auto e = eps(x), m = mu(x), s = sigma(x);
            for (int a = 0; a < 3; ++a) {
                te(c, a) = lambda * e[static_cast<std::size_t>(a)] + s[static_cast<std::size_t>(a)];
                tm(c, a) = lambda * m[static_cast<std::size_t>(a)];
            }
        });
        init(te, tm);
    }

    /// Constant tensors: electric block t_e = eps(lambda), magnetic block lambda mu.
    static MaxwellSystem constant(StaggeredGrid grid, const DiagonalTensor& t_e, const DiagonalTensor& mu, Real lambda)
    {
        MaxwellSystem s;
        s.grid_ = std::move(grid);
        s.lambda_ = lambda;
        const Index nc = s.grid_.size(StaggeredGrid::Family::cell);
        RMat te(nc, 3), tm(nc, 3);
        for (int a = 0; a < 3; ++a) {
            te.col(a).setConstant(t_e[static_cast<std::size_t>(a)]);
            tm.col(a).setConstant(lambda * mu[static_cast<std::size_t>(a)]);
        }
        s.init(te, tm);
        return s;
    }

    const StaggeredGrid& grid() const { return grid_; }
    const HilbertSpace<Real>& space() const { return space_; }
    const LinearOp<Real>& a() const { return a_; }
    const LinearOp<Real>& t() const { return t_; }
    Real lambda() const { return lambda_; }
    Index electric_dim() const { return ne_; }
    Index magnetic_dim() const { return nf_; }
    /// min and max of the diagonal of T.
    Bounds bounds() const { return bounds_; }

    /// (T + A)^{-1} via the electric Schur complement t_e + curl t_h^{-1} curl0.
    Vec<Real> solve(const Vec<Real>& f) const
    {
        HOMLAB_THROW_IF(f.size() != ne_ + nf_, ShapeError, "right-hand side has wrong size");
        const Vec<Real> fe = f.head(ne_);
        const Vec<Real> fh = f.tail(nf_);
        const Vec<Real> th_inv_fh = fh.cwiseQuotient(th_);
        const Vec<Real> e = solver_->solve(Vec<Real>(fe + curl_ * th_inv_fh));
        Vec<Real> out(ne_ + nf_);
        out.head(ne_) = e;
        out.tail(nf_) = (fh - curl0_ * e).cwiseQuotient(th_);
        return out;
    }

    LinearOp<Real> resolvent() const
    {
        auto self = std::make_shared<const MaxwellSystem>(*this);
        return LinearOp<Real>::matrix_free(space_, space_, [self](const Vec<Real>& x) { return self->solve(x); });
    }

private:
    void init(const RMat& te_cells, const RMat& tm_cells)
    {
        using F = StaggeredGrid::Family;
        const auto& g = grid_;
        ne_ = g.size(F::edge);
        nf_ = g.size(F::face);
        te_.resize(ne_);
        th_.resize(nf_);
        for (int a = 0; a < 3; ++a) {
            const int b = (a + 1) % 3, c = (a + 2) % 3;
            g.for_each(F::edge, a, [&](Index e, const MultiIndex& p) {
                Real s = 0.0;
                for (int db = -1; db <= 0; ++db)
                    for (int dc = -1; dc <= 0; ++dc) {
                        MultiIndex q = p;
                        q[b] += db;
                        q[c] += dc;
                        s += te_cells(g.index(F::cell, 0, q), a);
                    }
                te_(e) = s / 4.0;
            });
            g.for_each(F::face, a, [&](Index f, const MultiIndex& p) {
                MultiIndex q = p;
                --q[a];
                const Real x = tm_cells(g.index(F::cell, 0, p), a);
                const Real y = tm_cells(g.index(F::cell, 0, q), a);
                th_(f) = 2.0 / (1.0 / x + 1.0 / y);
            });
        }
        bounds_ = Bounds{std::min(te_.minCoeff(), th_.minCoeff()), std::max(te_.maxCoeff(), th_.maxCoeff())};
        HOMLAB_THROW_IF(!(bounds_.alpha > 0.0), CoercivityError,
                        "lambda eps + sigma and lambda mu must be positive definite");
        const auto c0 = g.curl0();
        curl0_ = c0.sparse_matrix();
        curl_ = SpMat<Real>(curl0_.transpose());
        const HilbertSpace<Real> he = g.space(F::edge), hf = g.space(F::face);
        const std::vector<HilbertSpace<Real>> parts{he, hf};
        a_ = block_sparse<Real>(parts, {{SpMat<Real>(), SpMat<Real>(-curl_)}, {curl0_, SpMat<Real>()}});
        space_ = a_.source();
        t_ = block_sparse<Real>(parts, {{sparse_diagonal<Real>(te_), SpMat<Real>()},
                                        {SpMat<Real>(), sparse_diagonal<Real>(th_)}});
        SpMat<Real> schur = SpMat<Real>(curl_ * th_.cwiseInverse().asDiagonal() * curl0_) + sparse_diagonal<Real>(te_);
        solver_ = std::make_shared<SparseSolver<Real>>(std::move(schur));
    }

    StaggeredGrid grid_;
    Real lambda_ = 1.0;
    Index ne_ = 0, nf_ = 0;
    Vec<Real> te_, th_;
    SpMat<Real> curl0_, curl_;
    LinearOp<Real> a_, t_;
    HilbertSpace<Real> space_;
    Bounds bounds_{0, 0};
    std::shared_ptr<const SparseSolver<Real>> solver_;
};

/// x_1-laminate Maxwell coefficients: profiles of y in [0, 1).
struct MaxwellSequence {
    std::function<DiagonalTensor(Real)> eps;
    std::function<DiagonalTensor(Real)> mu;
    std::function<DiagonalTensor(Real)> sigma;
    std::vector<Real> breaks{0.5};
    Bounds bounds{0.1, 100.0};
};

/// Laminate limit per component: harmonic across the layers (axis 0), arithmetic along them.
inline DiagonalTensor laminate_diagonal_limit(const std::function<DiagonalTensor(Real)>& f,
                                              const std::vector<Real>& breaks)
{
    DiagonalTensor out{};
    for (std::size_t a = 0; a < 3; ++a) {
        const auto m = laminate_limit<Real>([&](Real y) { return f(y)[a]; }, breaks);
        out[a] = a == 0 ? m.harmonic : m.arithmetic;
    }
    return out;
}

struct MaxwellRow {
    Index n = 0;
    Real resolvent_gap = 0.0;
    Real coercivity_min = 0.0;
};

struct MaxwellReport {
    std::vector<MaxwellRow> rows;
    Real tolerance = 0.1;
    Real lambda = 1.0;
    Index cells_per_axis = 0;
    DiagonalTensor eps_lambda{};
    DiagonalTensor mu_limit{};
    Index ker_curl0 = 0; ///< dim ran grad0 + dim H_D (0 on a box)
    Index ker_curl = 0;  ///< dim ran grad_N + dim H_N (0 on a box)
    bool decays() const
    {
        return rows.empty() ||
               (rows.back().resolvent_gap < tolerance && rows.back().resolvent_gap <= rows.front().resolvent_gap);
    }
    bool passed() const { return decays(); }
    CsvTable table() const
    {
        CsvTable t("maxwell", {"n", "resolvent_wot_gap", "coercivity_min"});
        t.note("lambda=" + format_real(lambda) + " cells_per_axis=" + std::to_string(cells_per_axis) +
               " eps_lambda=" + format_real(eps_lambda[0]) + "," + format_real(eps_lambda[1]) + "," +
               format_real(eps_lambda[2]) + " mu=" + format_real(mu_limit[0]) + "," + format_real(mu_limit[1]) +
               "," + format_real(mu_limit[2]) + " ker_curl0=" + std::to_string(ker_curl0) +
               " ker_curl=" + std::to_string(ker_curl));
        for (const auto& r : rows) t.add({r.n, r.resolvent_gap, r.coercivity_min});
        return t;
    }
};

namespace detail {

inline ProbeSet<Real> maxwell_probes(const MaxwellSystem& sys)
{
    using F = StaggeredGrid::Family;
    const auto& g = sys.grid();
    const std::vector<MultiIndex> modes{{1, 1, 1}, {2, 1, 1}, {1, 2, 1}, {1, 1, 2}};
    std::vector<Vec<Real>> out;
    for (const F fam : {F::edge, F::face})
        for (int a = 0; a < 3; ++a)
            for (const auto& k : modes) {
                Vec<Real> part = g.sample(fam, [&](const Point& x) {
                    DiagonalTensor v{0, 0, 0};
                    v[static_cast<std::size_t>(a)] = std::sin(std::numbers::pi * k[0] * x[0]) *
                                                     std::sin(std::numbers::pi * k[1] * x[1]) *
                                                     std::sin(std::numbers::pi * k[2] * x[2]);
                    return v;
                });
                Vec<Real> full = Vec<Real>::Zero(sys.electric_dim() + sys.magnetic_dim());
                if (fam == F::edge)
                    full.head(sys.electric_dim()) = part;
                else
                    full.tail(sys.magnetic_dim()) = part;
                out.push_back(std::move(full));
            }
    return ProbeSet<Real>(sys.space(), std::move(out));
}

} // namespace detail

/**
 * @brief Relative wot gap of (T_n + A)^{-1} against the resolvent built from
 * eps(lambda) = H-limit of lambda eps_n + sigma_n and mu = H-limit of mu_n.
 * @throws CoercivityError naming the offending n
 */
inline MaxwellReport maxwell_homogenization_experiment(const MaxwellSequence& seq, Real lambda,
                                                       const ExperimentOptions& opt)
{
    HOMLAB_THROW_IF(opt.n_list.empty(), InvalidArgument, "n_list is empty");
    const Index nmax = *std::max_element(opt.n_list.begin(), opt.n_list.end());
    const Index cells = opt.mesh.cells(nmax);
    HOMLAB_THROW_IF(static_cast<long double>(cells) * cells * cells * 7 > static_cast<long double>(unknown_budget()),
                    MeshRuleViolation,
                    "n=" + std::to_string(nmax) + " needs " + std::to_string(cells) + "^3 cells, above the unknown budget");
    const StaggeredGrid grid(cells);

    auto t_e = [&](Real y) {
        const auto e = seq.eps(y), s = seq.sigma(y);
        return DiagonalTensor{lambda * e[0] + s[0], lambda * e[1] + s[1], lambda * e[2] + s[2]};
    };
    MaxwellReport rep;
    rep.tolerance = opt.tolerance;
    rep.lambda = lambda;
    rep.cells_per_axis = cells;
    rep.eps_lambda = laminate_diagonal_limit(t_e, seq.breaks);
    rep.mu_limit = laminate_diagonal_limit(seq.mu, seq.breaks);
    using F = StaggeredGrid::Family;
    rep.ker_curl0 = grid.size(F::node);
    rep.ker_curl = grid.size(F::cell) - 1;

    const auto limit = MaxwellSystem::constant(grid, rep.eps_lambda, rep.mu_limit, lambda);
    const auto probes = detail::maxwell_probes(limit);
    const auto rlim = limit.resolvent();
    const Real scale = std::max(pairing_scale(rlim, probes, probes), 1e-300);

    rep.rows.resize(opt.n_list.size());
    parallel_for(opt.n_list.size(), opt.jobs, [&](std::size_t i) {
        const Index n = opt.n_list[i];
        auto at = [n](const std::function<DiagonalTensor(Real)>& f) {
            return [f, n](const Point& x) {
                const Real t = static_cast<Real>(n) * x[0];
                return f(t - std::floor(t));
            };
        };
        const MaxwellSystem sys(grid, at(seq.eps), at(seq.mu), at(seq.sigma), lambda);
        const auto b = sys.bounds();
        HOMLAB_THROW_IF(b.alpha < seq.bounds.alpha || b.beta > seq.bounds.beta, CoercivityError,
                        "n=" + std::to_string(n) + ": lambda eps + sigma or lambda mu leaves [" +
                            format_real(seq.bounds.alpha) + ", " + format_real(seq.bounds.beta) + "]");
        MaxwellRow r;
        r.n = n;
        r.coercivity_min = b.alpha;
        r.resolvent_gap = wot_gap(sys.resolvent(), rlim, probes, probes) / scale;
        rep.rows[i] = r;
    });
    return rep;
}

/// Two-phase laminate: eps in {1, 4}, mu in {1, 2}, sigma in {0, 0.5}.
inline MaxwellSequence laminate_maxwell_sequence()
{
    MaxwellSequence s;
    s.eps = [](Real y) { const Real v = y < 0.5 ? 1.0 : 4.0; return DiagonalTensor{v, v, v}; };
    s.mu = [](Real y) { const Real v = y < 0.5 ? 1.0 : 2.0; return DiagonalTensor{v, v, v}; };
    s.sigma = [](Real y) { const Real v = y < 0.5 ? 0.0 : 0.5; return DiagonalTensor{v, v, v}; };
    return s;
}

} // namespace homlab
