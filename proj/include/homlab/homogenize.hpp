/**
 * @file homogenize.hpp
 * @brief Oscillating coefficient families, predicted limits (means,
 *        laminates, periodic cell problems) and convergence experiments.
 */
#pragma once

#include "homlab/elliptic.hpp"
#include "homlab/parallel.hpp"
#include "homlab/schur.hpp"

#include <map>

namespace homlab {

enum class SequenceKind { periodic_rescale, laminate_x1, explicit_list };

inline const char* to_string(SequenceKind k)
{
    switch (k) {
    case SequenceKind::periodic_rescale: return "periodic_rescale";
    case SequenceKind::laminate_x1: return "laminate_x1";
    case SequenceKind::explicit_list: return "explicit_list";
    }
    return "?";
}

/// Position of x inside its period cell, per axis, in [0,1).
inline Point periodic_position(const GridDomain& dom, const Point& x, Index n)
{
    Point y{0, 0, 0};
    for (int k = 0; k < dom.dim(); ++k) {
        const Real t = static_cast<Real>(n) * (x[k] - dom.lo(k)) / dom.extent(k);
        y[k] = t - std::floor(t);
    }
    return y;
}

/**
 * @brief n -> a_n with uniform bounds.
 *
 * periodic_rescale: a_n(x) = a(n x) from a unit-cell function.
 * laminate_x1:      a_n(x) = alpha(n x_1) * I.
 * explicit_list:    fields keyed by n.
 */
template <class S>
class CoefficientSequence {
public:
    using CellFn = std::function<Mat<S>(const Point&)>;

    static CoefficientSequence periodic(int d, CellFn cell, Bounds b)
    {
        CoefficientSequence s;
        s.kind_ = SequenceKind::periodic_rescale;
        s.d_ = d;
        s.cell_ = std::move(cell);
        s.bounds_ = b;
        return s;
    }

    static CoefficientSequence laminate(int d, std::function<S(Real)> profile, Bounds b)
    {
        CoefficientSequence s;
        s.kind_ = SequenceKind::laminate_x1;
        s.d_ = d;
        s.profile_ = profile;
        s.cell_ = [profile, d](const Point& y) { return Mat<S>(Mat<S>::Identity(d, d) * profile(y[0])); };
        s.bounds_ = b;
        return s;
    }

    static CoefficientSequence explicit_list(std::map<Index, CoefficientField<S>> fields, Bounds b)
    {
        HOMLAB_THROW_IF(fields.empty(), InvalidArgument, "explicit sequence needs at least one field");
        CoefficientSequence s;
        s.kind_ = SequenceKind::explicit_list;
        s.d_ = fields.begin()->second.dim();
        s.list_ = std::move(fields);
        s.bounds_ = b;
        return s;
    }

    SequenceKind kind() const { return kind_; }
    int dim() const { return d_; }
    Bounds bounds() const { return bounds_; }
    const CellFn& cell_function() const { return cell_; }
    const std::function<S(Real)>& profile() const { return profile_; }

    /// a_n sampled at the cell centres of `dom`; checked against the uniform bounds.
    CoefficientField<S> field(Index n, const GridDomain& dom) const
    {
        HOMLAB_THROW_IF(dom.dim() != d_, ShapeError, "sequence and grid dimensions differ");
        CoefficientField<S> f;
        if (kind_ == SequenceKind::explicit_list) {
            const auto it = list_.find(n);
            HOMLAB_THROW_IF(it == list_.end(), InvalidArgument, "explicit sequence has no member n=" + std::to_string(n));
            HOMLAB_THROW_IF(!(it->second.domain() == dom), ShapeError, "explicit member lives on another grid");
            f = it->second.with_bounds(bounds_);
        } else {
            const auto cell = cell_;
            f = CoefficientField<S>::from_function(
                dom, [&](const Point& x) { return cell(periodic_position(dom, x, n)); }, bounds_);
        }
        f.check(bounds_, 1e-10);
        return f;
    }

    /// The unit-cell field on Y = (0,1)^d.
    CoefficientField<S> cell_field(Index cells_per_axis) const
    {
        HOMLAB_THROW_IF(kind_ == SequenceKind::explicit_list, InvalidArgument, "explicit sequences have no cell");
        return field(1, GridDomain::unit(d_, cells_per_axis));
    }

    /// n -> a_n^*.
    CoefficientSequence adjoint() const
    {
        CoefficientSequence s = *this;
        if (kind_ == SequenceKind::explicit_list) {
            for (auto& [n, f] : s.list_) f = f.adjoint_field();
            return s;
        }
        const auto cell = cell_;
        s.cell_ = [cell](const Point& y) { return Mat<S>(cell(y).adjoint()); };
        if (profile_) {
            const auto p = profile_;
            s.profile_ = [p](Real t) {
                if constexpr (is_complex_v<S>) {
                    return std::conj(p(t));
                } else {
                    return p(t);
                }
            };
        }
        return s;
    }

private:
    SequenceKind kind_ = SequenceKind::periodic_rescale;
    int d_ = 1;
    CellFn cell_;
    std::function<S(Real)> profile_;
    std::map<Index, CoefficientField<S>> list_;
    Bounds bounds_;
};

// ---------------------------------------------------------------------------
// Standard profiles
// ---------------------------------------------------------------------------

/// mean + amplitude * sin(2 pi y).
inline std::function<Real(Real)> sine_profile(Real mean = 2.0, Real amplitude = 1.0)
{
    return [=](Real y) { return mean + amplitude * std::sin(2.0 * std::numbers::pi * y); };
}

/// `low` on [0, fraction), `high` on [fraction, 1).
inline std::function<Real(Real)> two_phase_profile(Real low = 1.0, Real high = 4.0, Real fraction = 0.5)
{
    return [=](Real y) { return y < fraction ? low : high; };
}

/// Checkerboard of two phases on the unit square.
template <class S>
inline typename CoefficientSequence<S>::CellFn checkerboard_cell(Real a, Real b)
{
    return [=](const Point& y) {
        const int parity = (static_cast<int>(std::floor(2 * y[0])) + static_cast<int>(std::floor(2 * y[1]))) % 2;
        return Mat<S>(Mat<S>::Identity(2, 2) * S(parity == 0 ? a : b));
    };
}

// ---------------------------------------------------------------------------
// Laminate limits
// ---------------------------------------------------------------------------

template <class S>
struct MeanPair {
    S harmonic; ///< (int alpha^{-1})^{-1}
    S arithmetic; ///< int alpha
};

/// Harmonic and arithmetic means over one period; `breaks` are jump points in (0,1).
template <class S>
inline MeanPair<S> laminate_limit(const std::function<S(Real)>& alpha, std::vector<Real> breaks = {},
                                  Real tol = 1e-12)
{
    std::vector<Real> pts{0.0};
    std::sort(breaks.begin(), breaks.end());
    for (Real b : breaks)
        if (b > 0.0 && b < 1.0) pts.push_back(b);
    pts.push_back(1.0);
    auto integ = [&](auto&& f) {
        S total(0);
        for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
            const Real re = integrate([&](Real t) { return real_part(S(f(t))); }, pts[i], pts[i + 1], tol);
            if constexpr (is_complex_v<S>) {
                const Real im = integrate([&](Real t) { return std::imag(S(f(t))); }, pts[i], pts[i + 1], tol);
                total += S(re, im);
            } else {
                total += re;
            }
        }
        return total;
    };
    const S inv = integ([&](Real t) { return S(1) / alpha(t); });
    HOMLAB_THROW_IF(std::abs(inv) < 1e-300, VanishingHarmonicMean, "mean of alpha^{-1} vanishes");
    return {S(1) / inv, integ(alpha)};
}

/// Prediction for a laminate in x_1: diag(harmonic, arithmetic, ...).
template <class S>
inline Mat<S> laminate_tensor(int d, const MeanPair<S>& m)
{
    Mat<S> a = Mat<S>::Identity(d, d) * m.arithmetic;
    a(0, 0) = m.harmonic;
    return a;
}

// ---------------------------------------------------------------------------
// Cell problem
// ---------------------------------------------------------------------------

template <class S>
struct CellSolution {
    Vec<S> corrector;      ///< w, mean-free nodal
    Vec<S> field;          ///< v = xi + G w
    Real flux_residual = 0.0; ///< ||G^H W a v|| / ||G^H W a xi||
};

/// Periodic cell problem on Y with one factorization reused across directions.
template <class S>
class CellProblem {
public:
    explicit CellProblem(const CoefficientField<S>& a_cell)
        : solver_(build_grad<S>(a_cell.domain(), Flavor::periodic), a_cell)
    {}

    const EllipticSolver<S>& solver() const { return solver_; }

    CellSolution<S> solve(const Vec<S>& xi) const
    {
        const auto& g = solver_.gradient();
        const Vec<S> xf = g.constant_vector(xi);
        const auto& aop = solver_.coefficient_op();
        const Vec<S> axi = g.op().apply_conj_transpose(g.vector_space().weigh(aop.apply(xf)));
        // Exactly compatible in exact arithmetic; strip the rounding residue.
        Vec<S> rhs = -axi;
        rhs.array() -= rhs.mean();
        const auto sol = solver_.solve_vector(rhs);
        CellSolution<S> c;
        c.corrector = sol.u;
        c.field = xf + sol.grad;
        const Vec<S> res = g.op().apply_conj_transpose(g.vector_space().weigh(aop.apply(c.field)));
        const Real ref = axi.norm();
        c.flux_residual = ref > 0 ? res.norm() / ref : res.norm();
        return c;
    }

    /// Column j = average over Y of a v_{e_j}.
    Mat<S> tensor() const
    {
        const auto& g = solver_.gradient();
        const int d = g.domain().dim();
        Mat<S> out(d, d);
        for (int j = 0; j < d; ++j) {
            Vec<S> e = Vec<S>::Zero(d);
            e(j) = S(1);
            const auto c = solve(e);
            out.col(j) = g.integrate_vector(solver_.coefficient_op().apply(c.field)) / S(g.domain().volume());
        }
        return out;
    }

private:
    EllipticSolver<S> solver_;
};

template <class S>
inline CellSolution<S> cell_problem(const CoefficientField<S>& a_cell, const Vec<S>& xi)
{
    return CellProblem<S>(a_cell).solve(xi);
}

template <class S>
inline Mat<S> homogenized_tensor(const CoefficientField<S>& a_cell)
{
    return CellProblem<S>(a_cell).tensor();
}

// ---------------------------------------------------------------------------
// Convergence experiments
// ---------------------------------------------------------------------------

struct MeshRule {
    Index cells_per_period = 32;

    /// Cells per axis for a run whose finest oscillation is n_max.
    Index cells(Index n_max) const { return cells_per_period * std::max<Index>(n_max, 1); }

    std::string describe() const
    {
        return ">=" + std::to_string(cells_per_period) + " cells/period on the finest n";
    }
};

struct ExperimentOptions {
    std::vector<Index> n_list{1, 2, 4, 8, 16, 32};
    MeshRule mesh;
    Real tolerance = 2e-2;
    std::uint64_t probe_seed = 1;
    int jobs = 1;
    /// Right-hand side density.
    std::function<Real(const Point&)> rhs = [](const Point&) { return 1.0; };
};

namespace detail {

inline GridDomain coupled_grid(int d, const ExperimentOptions& opt)
{
    HOMLAB_THROW_IF(opt.n_list.empty(), InvalidArgument, "n_list is empty");
    const Index nmax = *std::max_element(opt.n_list.begin(), opt.n_list.end());
    const Index c = opt.mesh.cells(nmax);
    long double unknowns = 1;
    for (int k = 0; k < d; ++k) unknowns *= static_cast<long double>(c);
    unknowns *= (d == 1 ? 2 : d == 2 ? 5 : 19);
    HOMLAB_THROW_IF(unknowns > static_cast<long double>(unknown_budget()), MeshRuleViolation,
                    "n=" + std::to_string(nmax) + " needs " + std::to_string(c) + " cells per axis (" +
                        opt.mesh.describe() + "), above the unknown budget");
    return GridDomain::unit(d, c);
}

template <class S>
inline Real max_abs_pairing(const ProbeSet<S>& p, const Vec<S>& v)
{
    Real m = 0.0;
    for (const auto& g : p.vectors()) m = std::max(m, std::abs(p.space().inner(g, v)));
    return m;
}

template <class S>
inline std::vector<S> pairings(const ProbeSet<S>& p, const Vec<S>& v)
{
    std::vector<S> out;
    for (const auto& g : p.vectors()) out.push_back(p.space().inner(g, v));
    return out;
}

/// Aitken extrapolation of three consecutive values.
template <class S>
inline S aitken(S p1, S p2, S p3)
{
    const S d1 = p2 - p1;
    const S d2 = p3 - p2;
    const S den = d2 - d1;
    if (std::abs(den) <= 1e-14 * (std::abs(p3) + 1e-300)) return p3;
    return p3 - d2 * d2 / den;
}

} // namespace detail

struct HLimitRow {
    Index n = 0;
    Index cells = 0;
    Real pairing_err_u = 0.0;    ///< max_i |<g_i, u_n - u>| / max_i |<g_i, u>|
    Real pairing_err_flux = 0.0; ///< same for fluxes against vector probes
    Real strong_gap_u = 0.0;     ///< ||u_n - u|| / ||u||
    Real strong_gap_flux = 0.0;
    TauGap tau{std::numeric_limits<Real>::quiet_NaN(), std::numeric_limits<Real>::quiet_NaN(),
               std::numeric_limits<Real>::quiet_NaN(), std::numeric_limits<Real>::quiet_NaN()};
    Real max_pairing_err() const { return std::max(pairing_err_u, pairing_err_flux); }
};

struct HLimitReport {
    std::vector<HLimitRow> rows;
    std::string mesh_rule;
    std::uint64_t probe_seed = 0;
    std::string candidate; ///< textual a_hom, or "estimate"
    bool estimated = false;
    Real tolerance = 0.0;

    Real final_error() const { return rows.empty() ? 0.0 : rows.back().max_pairing_err(); }
    bool decreasing() const { return rows.size() < 2 || rows.back().max_pairing_err() < rows.front().max_pairing_err(); }
    /// Every row at most the previous one plus `noise`.
    bool monotone(Real noise = 1e-12) const
    {
        for (std::size_t i = 1; i < rows.size(); ++i)
            if (rows[i].max_pairing_err() > rows[i - 1].max_pairing_err() + noise) return false;
        return true;
    }
    /// Constant sequences (all errors at solver level) count as decreasing.
    bool passed() const
    {
        if (final_error() <= 1e-9) return true;
        return final_error() < tolerance && decreasing();
    }

    CsvTable table() const
    {
        CsvTable t("hconv", {"n", "cells_per_axis", "pairing_err_u", "pairing_err_flux", "strong_gap_u",
                             "strong_gap_flux", "gap_m00inv", "gap_m01", "gap_m10", "gap_ms"});
        t.note("mesh_rule=" + mesh_rule + " probe_seed=" + std::to_string(probe_seed) + " candidate=" + candidate +
               (estimated ? " limit=estimate" : ""));
        for (const auto& r : rows)
            t.add({r.n, r.cells, r.pairing_err_u, r.pairing_err_flux, r.strong_gap_u, r.strong_gap_flux, r.tau[0],
                   r.tau[1], r.tau[2], r.tau[3]});
        return t;
    }
};

template <class S>
inline std::string matrix_text(const Mat<S>& m)
{
    std::ostringstream os;
    os << std::setprecision(10) << '[';
    for (Index i = 0; i < m.rows(); ++i) {
        os << (i ? ";" : "");
        for (Index j = 0; j < m.cols(); ++j) os << (j ? " " : "") << m(i, j);
    }
    os << ']';
    return os.str();
}

/**
 * @brief Solves with a_n for every n and compares probe pairings of
 * solutions and fluxes with the candidate solve (or an extrapolated limit).
 *
 * All n share the grid fixed by the mesh rule at the largest n, so the
 * discretisation error is common to every row.
 */
template <class S>
inline HLimitReport hconvergence_experiment(const CoefficientSequence<S>& seq, std::optional<Mat<S>> candidate,
                                            const ExperimentOptions& opt)
{
    const int d = seq.dim();
    const GridDomain dom = detail::coupled_grid(d, opt);
    const auto g = build_grad<S>(dom, Flavor::dirichlet);
    const auto f = RHSFunctional<S>::density(g, opt.rhs);
    const auto sp = scalar_probes(g);
    const auto vp = vector_probes(g);

    HLimitReport rep;
    rep.mesh_rule = opt.mesh.describe();
    rep.probe_seed = opt.probe_seed;
    rep.tolerance = opt.tolerance;

    std::vector<EllipticSolution<S>> sols(opt.n_list.size());
    parallel_for(opt.n_list.size(), opt.jobs, [&](std::size_t i) {
        sols[i] = EllipticSolver<S>(g, seq.field(opt.n_list[i], dom), false).solve(f);
    });

    std::vector<S> ref_u, ref_q;
    Vec<S> ref_uvec, ref_qvec;
    if (candidate) {
        const auto ac = CoefficientField<S>::constant(dom, *candidate);
        ac.check();
        const auto sol = EllipticSolver<S>(g, ac).solve(f);
        ref_u = detail::pairings(sp, sol.u);
        ref_q = detail::pairings(vp, sol.flux);
        ref_uvec = sol.u;
        ref_qvec = sol.flux;
        rep.candidate = matrix_text<S>(*candidate);
    } else {
        HOMLAB_THROW_IF(sols.size() < 3, InvalidArgument, "limit estimation needs at least three n");
        const std::size_t k = sols.size();
        const auto p1 = detail::pairings(sp, sols[k - 3].u), p2 = detail::pairings(sp, sols[k - 2].u),
                   p3 = detail::pairings(sp, sols[k - 1].u);
        const auto q1 = detail::pairings(vp, sols[k - 3].flux), q2 = detail::pairings(vp, sols[k - 2].flux),
                   q3 = detail::pairings(vp, sols[k - 1].flux);
        for (std::size_t i = 0; i < p1.size(); ++i) ref_u.push_back(detail::aitken(p1[i], p2[i], p3[i]));
        for (std::size_t i = 0; i < q1.size(); ++i) ref_q.push_back(detail::aitken(q1[i], q2[i], q3[i]));
        rep.candidate = "estimate";
        rep.estimated = true;
    }
    auto rel = [](const std::vector<S>& a, const std::vector<S>& ref) {
        Real num = 0, den = 0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            num = std::max(num, std::abs(a[i] - ref[i]));
            den = std::max(den, std::abs(ref[i]));
        }
        return den > 0 ? num / den : num;
    };
    for (std::size_t i = 0; i < sols.size(); ++i) {
        HLimitRow row;
        row.n = opt.n_list[i];
        row.cells = dom.cells(0);
        row.pairing_err_u = rel(detail::pairings(sp, sols[i].u), ref_u);
        row.pairing_err_flux = rel(detail::pairings(vp, sols[i].flux), ref_q);
        if (candidate) {
            const auto& hs = g.scalar_space();
            const auto& hv = g.vector_space();
            row.strong_gap_u = hs.norm(sols[i].u - ref_uvec) / std::max(hs.norm(ref_uvec), 1e-300);
            row.strong_gap_flux = hv.norm(sols[i].flux - ref_qvec) / std::max(hv.norm(ref_qvec), 1e-300);
        } else {
            row.strong_gap_u = row.strong_gap_flux = std::numeric_limits<Real>::quiet_NaN();
        }
        rep.rows.push_back(row);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// 1D weak-operator equivalence
// ---------------------------------------------------------------------------

struct QdindRow {
    Index n = 0;
    Real gap_inverse = 0.0;  ///< wot gap of a_n^{-1} vs a^{-1}
    Real gap_solution = 0.0; ///< wot gap of (i* a_n i)^{-1} on the mean-free functions
    Real gap_flux = 0.0;     ///< wot gap of a_n i (i* a_n i)^{-1}
};

struct QdindReport {
    std::vector<QdindRow> rows;
    Real limit = 0.0; ///< harmonic mean (real part)
    Real log_correlation = 1.0;
    Real tolerance = 0.0;

    bool all_vanish() const
    {
        for (const auto& r : rows)
            if (std::max({r.gap_inverse, r.gap_solution, r.gap_flux}) > 1e-12) return false;
        return true;
    }
    bool decay() const
    {
        if (rows.size() < 2) return true;
        const auto& a = rows.front();
        const auto& b = rows.back();
        return b.gap_inverse < a.gap_inverse && b.gap_solution < a.gap_solution && b.gap_flux < a.gap_flux;
    }
    bool passed() const { return all_vanish() || (decay() && log_correlation > 0.9); }

    CsvTable table() const
    {
        CsvTable t("qdind", {"n", "gap_inverse", "gap_solution_op", "gap_flux_op"});
        t.note("limit=" + format_real(limit) + " log_correlation=" + format_real(log_correlation));
        for (const auto& r : rows) t.add({r.n, r.gap_inverse, r.gap_solution, r.gap_flux});
        return t;
    }
};

/**
 * @brief Tracks a_n^{-1} -> a^{-1} against the two Schur-side maps on
 * (0,1), evaluated with the closed mean-free formula.
 */
template <class S>
inline QdindReport qdind_check(const CoefficientSequence<S>& seq, const ExperimentOptions& opt)
{
    HOMLAB_THROW_IF(seq.dim() != 1, InvalidArgument, "qdind_check is one-dimensional");
    const GridDomain dom = detail::coupled_grid(1, opt);
    const auto g = build_grad<S>(dom, Flavor::dirichlet);
    const auto& hv = g.vector_space();
    const Real h = dom.h(0);
    const Index n_cells = dom.num_cells();
    const auto vp = vector_probes(g);
    auto mean_free = Subspace<S>::implicit(
        hv, [](const Vec<S>& v) { return Vec<S>(v.array() - v.mean()); }, n_cells - 1);
    const auto gp = vp.restricted_to(mean_free);

    const auto cell = seq.cell_function();
    const auto means = laminate_limit<S>([&](Real t) { return cell({t, 0, 0})(0, 0); }, {0.5});
    const Vec<S> alim = Vec<S>::Constant(n_cells, means.harmonic);

    auto solution_op = [&](const Vec<S>& a) {
        return LinearOp<S>::matrix_free(hv, hv, [a, h](const Vec<S>& phi) { return projected_inverse_1d<S>(a, phi, h); });
    };
    auto flux_op = [&](const Vec<S>& a) {
        return LinearOp<S>::matrix_free(
            hv, hv, [a, h](const Vec<S>& phi) { return Vec<S>(a.cwiseProduct(projected_inverse_1d<S>(a, phi, h))); });
    };
    auto inverse_op = [&](const Vec<S>& a) {
        return LinearOp<S>::matrix_free(hv, hv, [a](const Vec<S>& x) { return Vec<S>(x.cwiseQuotient(a)); });
    };

    QdindReport rep;
    rep.limit = real_part(means.harmonic);
    rep.tolerance = opt.tolerance;
    rep.rows.resize(opt.n_list.size());
    parallel_for(opt.n_list.size(), opt.jobs, [&](std::size_t i) {
        const auto f = seq.field(opt.n_list[i], dom);
        const Vec<S> an = f.component(0, 0);
        QdindRow r;
        r.n = opt.n_list[i];
        r.gap_inverse = wot_gap(inverse_op(an), inverse_op(alim), vp, vp);
        r.gap_solution = wot_gap(solution_op(an), solution_op(alim), gp, gp);
        r.gap_flux = wot_gap(flux_op(an), flux_op(alim), vp, gp);
        rep.rows[i] = r;
    });
    std::vector<Real> li, ls;
    bool tiny = false;
    for (const auto& r : rep.rows) {
        if (r.gap_inverse <= 1e-15 || std::max(r.gap_solution, r.gap_flux) <= 1e-15) tiny = true;
        li.push_back(std::log(std::max(r.gap_inverse, 1e-300)));
        ls.push_back(std::log(std::max({r.gap_solution, r.gap_flux, 1e-300})));
    }
    rep.log_correlation = (tiny || li.size() < 2) ? 1.0 : correlation(li, ls);
    return rep;
}

// ---------------------------------------------------------------------------
// Schur-topology equivalence on (ran grad0, ran grad0^perp)
// ---------------------------------------------------------------------------

struct SchurEquivRow {
    Index n = 0;
    TauGap tau{0, 0, 0, 0};     ///< absolute
    TauGap tau_rel{0, 0, 0, 0}; ///< relative to the limit pairings
    Real solution_err = 0.0;    ///< max pairing error of the H-convergence run
};

struct SchurEquivReport {
    std::vector<SchurEquivRow> rows;
    Real tolerance = 0.0;

    static bool shrinks(Real first, Real last) { return last < first || last <= 1e-9; }

    bool tau_decays() const
    {
        if (rows.empty()) return true;
        for (int k = 0; k < 4; ++k) {
            if (rows.back().tau_rel[k] > tolerance) return false;
            if (!shrinks(rows.front().tau_rel[k], rows.back().tau_rel[k])) return false;
        }
        return true;
    }
    bool solution_decays() const
    {
        if (rows.empty()) return true;
        return rows.back().solution_err <= tolerance && shrinks(rows.front().solution_err, rows.back().solution_err);
    }
    /// Both families decay, or neither does.
    bool joint() const { return tau_decays() == solution_decays(); }
    bool passed() const { return tau_decays() && solution_decays(); }

    CsvTable table() const
    {
        CsvTable t("schur_gap", {"n", "gap_m00inv", "gap_m01", "gap_m10", "gap_ms", "rel_m00inv", "rel_m01",
                                 "rel_m10", "rel_ms", "solution_pairing_err"});
        for (const auto& r : rows)
            t.add({r.n, r.tau[0], r.tau[1], r.tau[2], r.tau[3], r.tau_rel[0], r.tau_rel[1], r.tau_rel[2],
                   r.tau_rel[3], r.solution_err});
        return t;
    }
};

/**
 * @brief Four Schur gaps of a_n against the constant candidate on the
 * splitting (ran grad0, its complement), next to the H-convergence pairings.
 */
template <class S>
inline SchurEquivReport schur_equiv_check(const CoefficientSequence<S>& seq, const Mat<S>& candidate,
                                          const ExperimentOptions& opt)
{
    const int d = seq.dim();
    const GridDomain dom = detail::coupled_grid(d, opt);
    const auto g = build_grad<S>(dom, Flavor::dirichlet);
    const auto h0 = Subspace<S>::range_of(g.op(), g.kernel_basis());
    const Decomposition<S> dec(h0, h0.complement());
    const auto vp = vector_probes(g);
    const auto p0 = vp.restricted_to(dec.h0());
    const auto p1 = vp.restricted_to(dec.h1());

    const auto ac = CoefficientField<S>::constant(dom, candidate);
    ac.check();
    const auto lim = schur_maps(ac.as_operator(g), dec);
    const std::array<Real, 4> raw{pairing_scale(lim.m00inv, p0, p0), pairing_scale(lim.m01, p0, p1),
                                  pairing_scale(lim.m10, p1, p0), pairing_scale(lim.ms, p1, p1)};
    const Real overall = *std::max_element(raw.begin(), raw.end());
    std::array<Real, 4> scale{};
    for (int k = 0; k < 4; ++k) scale[k] = raw[k] > 1e-8 * overall ? raw[k] : overall;

    const auto hrep = hconvergence_experiment(seq, std::optional<Mat<S>>(candidate), opt);
    SchurEquivReport rep;
    rep.tolerance = opt.tolerance;
    rep.rows.resize(opt.n_list.size());
    parallel_for(opt.n_list.size(), opt.jobs, [&](std::size_t i) {
        const auto an = seq.field(opt.n_list[i], dom).as_operator(g);
        SchurEquivRow r;
        r.n = opt.n_list[i];
        r.tau = tau_gap(schur_maps(an, dec), lim, p0, p1);
        for (int k = 0; k < 4; ++k) r.tau_rel[k] = r.tau[k] / std::max(scale[k], 1e-300);
        r.solution_err = hrep.rows[i].max_pairing_err();
        rep.rows[i] = r;
    });
    return rep;
}

struct AdjointSymmetryReport {
    SchurEquivReport primal;
    SchurEquivReport dual;
    /// Dual run decays whenever the primal run decays.
    bool passed() const { return !primal.passed() || dual.passed(); }
};

template <class S>
inline AdjointSymmetryReport adjoint_symmetry_check(const CoefficientSequence<S>& seq, const Mat<S>& candidate,
                                                    const ExperimentOptions& opt)
{
    return {schur_equiv_check(seq, candidate, opt), schur_equiv_check(seq.adjoint(), Mat<S>(candidate.adjoint()), opt)};
}

} // namespace homlab
