/**
 * @file runner.hpp
 * @brief Experiment catalogue and config-driven dispatch used by the CLI.
 */
#pragma once

#include "homlab/applications.hpp"
#include "homlab/compensated.hpp"
#include "homlab/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace homlab {

struct CatalogueEntry {
    std::string name;
    std::string summary;
    std::string result; ///< the statement the experiment exercises
    bool needs_n_list = false;
};

inline const std::vector<CatalogueEntry>& catalogue()
{
    static const std::vector<CatalogueEntry> c{
        {"solve1d", "Dirichlet problem -(a u')' = f on a 1D grid; nodal solution table",
         "well-posedness of the divergence-form problem with coercive coefficients", false},
        {"laminate2d", "Harmonic/arithmetic laminate means against a 2D periodic cell solve",
         "laminate formula: harmonic mean across layers, arithmetic mean along them", false},
        {"cell", "Periodic cell problem and the homogenized coefficient tensor",
         "cell-problem formula for the homogenized coefficient: a_hom xi = mean of a (xi + grad chi_xi)", false},
        {"hconv", "Probe pairings of u_n and a_n grad u_n against a candidate limit",
         "definition of H-convergence: u_n -> u weakly and a_n grad u_n -> a grad u weakly", true},
        {"qdind", "Gaps of the projected inverse, solution and flux maps along n",
         "H-convergence is independent of the right-hand side and the boundary condition", true},
        {"schur-gap", "Schur-topology gaps of a_n on (gradients, complement) next to solution errors",
         "H-convergence is convergence in the Schur topology of (range of grad0, its complement)", true},
        {"divcurl", "Pairings int phi q_n r_n for compliant and non-compliant sequences",
         "div-curl lemma: products of weakly convergent fields converge when div and curl are compact", true},
        {"divtest", "Projection gap onto gradients against the H^-1 norm of the divergence",
         "divergence test: strong convergence of div in H^-1 equals strong convergence of the gradient part", true},
        {"evo", "Schur gaps on (ker A, ran A) and resolvent gaps for (T_n + A)^-1",
         "abstract Schur equivalence: T_n -> T in the Schur topology iff resolvents converge weakly", true},
        {"recover", "Seeded round trips s = (T + A)^-1 -> T", "a coefficient is recovered uniquely from its resolvent",
         false},
        {"thermo", "Resolvent homogenisation of the thermoelastic system",
         "thermoelastic homogenisation: H-limits for C and kappa, weak-* limits for rho0 and w", true},
        {"maxwell", "Resolvent homogenisation of Maxwell's equations on a staggered 3D grid",
         "Maxwell homogenisation with the per-lambda H-limit eps(lambda) of lambda eps_n + sigma_n", true},
        {"helmholtz", "Helmholtz splitting of edge and face fields on a 3D box",
         "Helmholtz decomposition: range of grad + range of curl + harmonic fields", false},
    };
    return c;
}

inline const CatalogueEntry& catalogue_entry(const std::string& name)
{
    for (const auto& e : catalogue())
        if (e.name == name) return e;
    throw ConfigError("unknown experiment kind '" + name + "'");
}

inline std::string describe(const std::string& name)
{
    const auto& e = catalogue_entry(name);
    std::ostringstream os;
    os << e.name << ": " << e.summary << "\n  exercises: " << e.result << "\n"
       << "  n_list: " << (e.needs_n_list ? "required" : "not used") << "\n";
    return os.str();
}

struct RunOutcome {
    CsvTable table;
    bool passed = false;
    std::string summary;
    std::vector<std::string> warnings;
};

namespace detail {

inline std::vector<Index> n_list_of(const RunConfig& c)
{
    std::vector<Index> out;
    for (auto v : c.integer_list("run", "n_list")) out.push_back(static_cast<Index>(v));
    return out;
}

inline ExperimentOptions options_of(const RunConfig& c, Index cells_per_period, Real tolerance, int jobs)
{
    ExperimentOptions o;
    o.n_list = n_list_of(c);
    o.mesh.cells_per_period = static_cast<Index>(c.integer("run", "cells_per_period", cells_per_period));
    o.tolerance = c.real("run", "tolerance", tolerance);
    o.probe_seed = static_cast<std::uint64_t>(c.integer("run", "probe_seed", 1));
    o.jobs = jobs;
    HOMLAB_THROW_IF(o.mesh.cells_per_period < 1, ConfigError, "[run] cells_per_period must be positive");
    return o;
}

inline std::function<Real(Real)> profile_of(const RunConfig& c, Bounds& b, std::vector<Real>& breaks)
{
    const std::string p = c.text("sequence", "profile", "sine");
    if (p == "sine") {
        const Real m = c.real("sequence", "mean", 2.0), a = c.real("sequence", "amplitude", 1.0);
        HOMLAB_THROW_IF(!(m - std::abs(a) > 0.0), ConfigError, "[sequence] sine profile must stay positive");
        b = {m - std::abs(a), m + std::abs(a)};
        breaks = {};
        return sine_profile(m, a);
    }
    if (p == "two_phase") {
        const Real lo = c.real("sequence", "low", 1.0), hi = c.real("sequence", "high", 4.0);
        const Real fr = c.real("sequence", "fraction", 0.5);
        HOMLAB_THROW_IF(!(lo > 0.0 && hi > 0.0), ConfigError, "[sequence] phases must be positive");
        HOMLAB_THROW_IF(!(fr > 0.0 && fr < 1.0), ConfigError, "[sequence] fraction must lie in (0, 1)");
        b = {std::min(lo, hi), std::max(lo, hi)};
        breaks = {fr};
        return two_phase_profile(lo, hi, fr);
    }
    throw ConfigError("[sequence] profile: unknown profile '" + p + "' (sine|two_phase)");
}

inline CoefficientField<Real> coefficients_of(const RunConfig& c)
{
    const std::string path = c.resolve_path(c.text("sequence", "coefficients"));
    std::ifstream in(path);
    HOMLAB_THROW_IF(!in, ConfigError, "[sequence] coefficients: cannot open '" + path + "'");
    try {
        return read_coefficients<Real>(in);
    } catch (const FormatError& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

inline Mat<Real> triplet_matrix(const RunConfig& c, const std::string& key)
{
    const std::string path = c.resolve_path(c.text("sequence", key));
    std::ifstream in(path);
    HOMLAB_THROW_IF(!in, ConfigError, "[sequence] " + key + ": cannot open '" + path + "'");
    try {
        return Mat<Real>(read_triplets<Real>(in));
    } catch (const FormatError& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

/// Periodic sequence whose unit cell is a file-backed field.
inline CoefficientSequence<Real> periodic_from_field(const CoefficientField<Real>& f)
{
    const auto& dom = f.domain();
    const int d = dom.dim();
    auto cell = [f, d](const Point& y) {
        MultiIndex i{0, 0, 0};
        for (int k = 0; k < d; ++k) {
            const Index n = f.domain().cells(k);
            i[k] = std::min<Index>(n - 1, static_cast<Index>(std::floor(y[k] * static_cast<Real>(n))));
        }
        return f.cell(f.domain().cell_index(i));
    };
    return CoefficientSequence<Real>::periodic(d, cell, f.declared().value_or(f.measured_bounds()));
}

/// Scalar c gives c I; d*d comma-separated entries give a full matrix, row by row.
inline Mat<Real> candidate_of(const RunConfig& c, int d)
{
    const auto v = c.real_list("run", "candidate");
    if (v.size() == 1) return Mat<Real>::Identity(d, d) * v[0];
    HOMLAB_THROW_IF(v.size() != static_cast<std::size_t>(d * d), ConfigError,
                    "[run] candidate: expected 1 or " + std::to_string(d * d) + " entries");
    Mat<Real> m(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) m(i, j) = v[static_cast<std::size_t>(i * d + j)];
    return m;
}

/// Coefficient sequence plus its analytic limit.
struct BuiltSequence {
    CoefficientSequence<Real> seq;
    Mat<Real> limit;
};

inline BuiltSequence sequence_of(const RunConfig& c, int d)
{
    const std::string kind = c.text("sequence", "kind", "laminate");
    if (kind == "laminate") {
        Bounds b{1, 1};
        std::vector<Real> breaks;
        const auto prof = profile_of(c, b, breaks);
        return {CoefficientSequence<Real>::laminate(d, prof, b),
                laminate_tensor<Real>(d, laminate_limit<Real>(prof, breaks))};
    }
    if (kind == "checkerboard") {
        HOMLAB_THROW_IF(d != 2, ConfigError, "[sequence] checkerboard needs [domain] dim = 2");
        const Real lo = c.real("sequence", "low", 1.0), hi = c.real("sequence", "high", 4.0);
        return {CoefficientSequence<Real>::periodic(2, checkerboard_cell<Real>(lo, hi), Bounds{std::min(lo, hi), std::max(lo, hi)}),
                Mat<Real>::Identity(2, 2) * std::sqrt(lo * hi)};
    }
    if (kind == "constant") {
        const Real v = c.real("sequence", "value", 2.0);
        HOMLAB_THROW_IF(!(v > 0.0), ConfigError, "[sequence] value must be positive");
        return {CoefficientSequence<Real>::periodic(
                    d, [v, d](const Point&) { return Mat<Real>(Mat<Real>::Identity(d, d) * v); }, Bounds{v, v}),
                Mat<Real>::Identity(d, d) * v};
    }
    if (kind == "file") {
        const auto f = coefficients_of(c);
        HOMLAB_THROW_IF(f.dim() != d, ConfigError,
                        "[sequence] coefficients: file has dim " + std::to_string(f.dim()) + ", [domain] dim is " +
                            std::to_string(d));
        return {periodic_from_field(f), homogenized_tensor(f)};
    }
    throw ConfigError("[sequence] kind: unknown sequence kind '" + kind + "' (laminate|checkerboard|constant|file)");
}

inline int dim_of(const RunConfig& c, int fallback)
{
    const auto d = c.integer("domain", "dim", fallback);
    HOMLAB_THROW_IF(d < 1 || d > 3, ConfigError, "[domain] dim must be 1, 2 or 3");
    return static_cast<int>(d);
}

inline Index cells_of(const RunConfig& c, Index fallback)
{
    const auto n = c.integer("domain", "cells", fallback);
    HOMLAB_THROW_IF(n < 1, ConfigError, "[domain] cells must be positive");
    return static_cast<Index>(n);
}

inline Real rel_tensor_error(const Mat<Real>& a, const Mat<Real>& ref) { return (a - ref).norm() / ref.norm(); }

inline std::string verdict(bool ok) { return ok ? "pass" : "fail"; }

} // namespace detail

/// Runs the experiment named in [experiment] kind.
inline RunOutcome run_experiment(const RunConfig& cfg, int jobs = 1)
{
    const std::string kind = cfg.text("experiment", "kind");
    const auto& entry = catalogue_entry(kind);
    if (entry.needs_n_list) cfg.require("run", "n_list");
    RunOutcome out;
    std::ostringstream sum;

    if (kind == "solve1d") {
        const Index cells = detail::cells_of(cfg, 64);
        const Index n = cfg.has("run", "n_list") ? detail::n_list_of(cfg).back() : 1;
        const auto built = detail::sequence_of(cfg, 1);
        const GridDomain dom = GridDomain::unit(1, cells);
        const auto g = build_grad<Real>(dom, Flavor::dirichlet);
        const auto sol = EllipticSolver<Real>(g, built.seq.field(n, dom))
                             .solve(RHSFunctional<Real>::density(g, [](const Point&) { return 1.0; }));
        out.table = solution_table(g, sol.u);
        out.table.note("n=" + std::to_string(n) + " residual=" + format_real(sol.residual));
        out.passed = sol.residual < 1e-9;
        sum << "residual=" << format_real(sol.residual);
    } else if (kind == "cell" && cfg.text("sequence", "kind", "laminate") == "file") {
        const auto f = detail::coefficients_of(cfg);
        const int d = f.dim();
        const Mat<Real> hom = homogenized_tensor(f);
        const bool has_ref = cfg.has("run", "candidate");
        const Mat<Real> ref = has_ref ? detail::candidate_of(cfg, d) : Mat<Real>::Constant(d, d, std::numeric_limits<Real>::quiet_NaN());
        const Bounds b = f.declared().value_or(f.measured_bounds());
        const auto h = HilbertSpace<Real>::identity(d);
        const bool in_class = coercivity_check(LinearOp<Real>::dense(h, h, hom), b.alpha, b.beta, 1e-8).passes();
        out.table = CsvTable("cell", {"i", "j", "computed", "reference"});
        std::string note = "cells_per_axis=" + std::to_string(f.domain().cells(0)) + " in_class=" + (in_class ? "1" : "0");
        Real err = std::numeric_limits<Real>::quiet_NaN();
        const Real tol = cfg.real("run", "tolerance", 1e-2);
        if (has_ref) {
            err = detail::rel_tensor_error(hom, ref);
            note += " relative_error=" + format_real(err);
        }
        out.table.note(note);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) out.table.add({Index(i), Index(j), hom(i, j), ref(i, j)});
        out.passed = in_class && (!has_ref || err < tol);
        sum << "in_class=" << in_class;
        if (has_ref) sum << " relative_error=" << format_real(err) << " tolerance=" << format_real(tol);
    } else if (kind == "laminate2d" || kind == "cell") {
        const int d = kind == "laminate2d" ? 2 : detail::dim_of(cfg, 2);
        const Index cells = detail::cells_of(cfg, kind == "laminate2d" ? 64 : 128);
        RunConfig c2 = cfg;
        if (kind == "laminate2d" && !c2.has("sequence", "profile")) c2.set("sequence", "profile", "two_phase");
        const auto built = detail::sequence_of(c2, d);
        const Mat<Real> hom = homogenized_tensor(built.seq.cell_field(cells));
        const Real err = detail::rel_tensor_error(hom, built.limit);
        const std::string sk = c2.text("sequence", "kind", "laminate");
        const Real tol = cfg.real("run", "tolerance", sk == "checkerboard" ? 2e-2 : 1e-2);
        out.table = CsvTable(kind == "cell" ? "cell" : "laminate", {"i", "j", "computed", "reference"});
        out.table.note("cells_per_axis=" + std::to_string(cells) + " relative_error=" + format_real(err));
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) out.table.add({Index(i), Index(j), hom(i, j), built.limit(i, j)});
        out.passed = err < tol;
        sum << "relative_error=" << format_real(err) << " tolerance=" << format_real(tol);
    } else if (kind == "hconv") {
        const int d = detail::dim_of(cfg, 1);
        const auto opt = detail::options_of(cfg, d == 1 ? 64 : 16, d == 1 ? 2e-2 : 5e-2, jobs);
        const auto built = detail::sequence_of(cfg, d);
        std::optional<Mat<Real>> cand = built.limit;
        if (cfg.has("run", "candidate")) {
            if (cfg.text("run", "candidate") == "estimate") {
                cand.reset();
            } else {
                cand = detail::candidate_of(cfg, d);
            }
        }
        if (!cand) out.warnings.push_back("candidate estimated by extrapolation over n");
        const auto rep = hconvergence_experiment(built.seq, cand, opt);
        out.table = rep.table();
        out.passed = rep.passed();
        sum << "final_error=" << format_real(rep.final_error()) << " tolerance=" << format_real(rep.tolerance);
    } else if (kind == "qdind") {
        const int d = detail::dim_of(cfg, 1);
        const auto opt = detail::options_of(cfg, 32, 2e-2, jobs);
        const auto rep = qdind_check(detail::sequence_of(cfg, d).seq, opt);
        out.table = rep.table();
        out.passed = rep.passed();
        sum << "log_correlation=" << format_real(rep.log_correlation);
    } else if (kind == "schur-gap") {
        const int d = detail::dim_of(cfg, 1);
        const auto opt = detail::options_of(cfg, 32, 2e-2, jobs);
        const auto built = detail::sequence_of(cfg, d);
        const Mat<Real> cand = cfg.has("run", "candidate") ? detail::candidate_of(cfg, d) : built.limit;
        const auto rep = schur_equiv_check(built.seq, cand, opt);
        out.table = rep.table();
        out.passed = rep.passed();
        sum << "joint=" << rep.joint();
    } else if (kind == "divcurl") {
        const auto opt = detail::options_of(cfg, 64, 1e-2, jobs);
        const auto rep = divcurl_experiment(parse_divcurl_case(cfg.text("sequence", "case", "compliant")), opt);
        out.table = rep.table();
        out.passed = rep.passed();
        sum << "final_gap=" << format_real(rep.rows.back().gap);
    } else if (kind == "divtest") {
        const auto opt = detail::options_of(cfg, 8, 0.0, jobs);
        const auto rep = divergence_test_experiment(parse_divtest_case(cfg.text("sequence", "case", "vanishing")), opt,
                                                    detail::dim_of(cfg, 2));
        out.table = rep.table();
        out.passed = rep.passed();
        sum << "joint=" << rep.joint();
    } else if (kind == "evo") {
        const std::string regime = cfg.text("sequence", "regime", "synthetic");
        AbstractSchurOptions<Real> o;
        o.n_list = detail::n_list_of(cfg);
        o.jobs = jobs;
        AbstractSchurReport rep;
        if (regime == "synthetic" || regime == "nonconvergent") {
            const auto size = cfg.integer("sequence", "size", 12);
            const auto rank = cfg.integer("sequence", "rank", size / 2);
            const auto seed = static_cast<std::uint64_t>(cfg.integer("run", "seed", 7));
            const bool conv = regime == "synthetic";
            const auto inst = synthetic_evo<Real>(static_cast<Index>(size), static_cast<Index>(rank), seed, conv);
            o.tolerance = cfg.real("run", "tolerance", 1e-6);
            o.regime = regime;
            rep = abstract_schur_experiment(inst.a, inst.t_seq, inst.t_limit, inst.probes, o);
            out.passed = rep.joint();
            if (conv) {
                const bool slopes = std::abs(rep.tau_slope + 1.0) <= 0.1 && std::abs(rep.resolvent_slope + 1.0) <= 0.1;
                out.passed = out.passed && slopes && rep.tau_decays();
            } else {
                out.passed = out.passed && !rep.tau_decays();
            }
        } else if (regime == "two-scale") {
            const Index nmax = *std::max_element(o.n_list.begin(), o.n_list.end());
            const Index cells = static_cast<Index>(cfg.integer("run", "cells_per_period", 32)) * nmax;
            const auto inst = two_scale_evo<Real>(sine_profile(2.0, 1.0), sine_profile(3.0, 1.5), cells);
            o.tolerance = cfg.real("run", "tolerance", 5e-2);
            o.regime = regime;
            o.rhs = inst.rhs;
            o.wobble = inst.wobble;
            rep = abstract_schur_experiment(inst.a, inst.t_seq, inst.t_limit, inst.probes, o);
            out.passed = rep.joint() && rep.tau_decays();
        } else {
            throw ConfigError("[sequence] regime: unknown regime '" + regime + "' (synthetic|nonconvergent|two-scale)");
        }
        out.table = rep.table();
        sum << "joint=" << rep.joint() << " tau_slope=" << format_real(rep.tau_slope)
            << " resolvent_slope=" << format_real(rep.resolvent_slope);
    } else if (kind == "recover" && (cfg.has("sequence", "t_matrix") || cfg.has("sequence", "a_matrix"))) {
        const Mat<Real> t = detail::triplet_matrix(cfg, "t_matrix");
        const Mat<Real> am = detail::triplet_matrix(cfg, "a_matrix");
        HOMLAB_THROW_IF(t.rows() != t.cols() || am.rows() != am.cols() || t.rows() != am.rows(), ConfigError,
                        "[sequence] t_matrix and a_matrix must be square of equal size");
        const auto h = HilbertSpace<Real>::identity(t.rows());
        const SkewOp<Real> a(LinearOp<Real>::dense(h, h, am));
        const Real lo = cfg.real("sequence", "low", 0.5), hi = cfg.real("sequence", "high", 4.0);
        const Mat<Real> s = Eigen::PartialPivLU<Mat<Real>>(Mat<Real>(t + am)).inverse();
        const auto rec = recover_coefficient(LinearOp<Real>::dense(h, h, s), a);
        const Real err = (rec.t.dense_matrix() - t).cwiseAbs().maxCoeff() / t.cwiseAbs().maxCoeff();
        const bool in_class = coercivity_check(rec.t, lo, hi, 1e-8).passes();
        out.table = CsvTable("recover", {"trial", "round_trip", "coefficient_error", "in_class"});
        out.table.note("source=files size=" + std::to_string(t.rows()));
        out.table.add({Index(0), rec.round_trip, err, in_class});
        out.passed = rec.round_trip < 1e-9 && err < 1e-10 && in_class;
        sum << "coefficient_error=" << format_real(err) << " in_class=" << in_class;
    } else if (kind == "recover") {
        const auto trials = cfg.integer("run", "trials", 200);
        const auto size = cfg.integer("sequence", "size", 8);
        const auto seed = static_cast<std::uint64_t>(cfg.integer("run", "seed", 11));
        HOMLAB_THROW_IF(trials < 1 || size < 1, ConfigError, "[run] trials and [sequence] size must be positive");
        out.table = CsvTable("recover", {"trial", "round_trip", "coefficient_error", "in_class"});
        std::mt19937_64 rng(seed);
        bool all = true;
        Real worst = 0.0;
        for (std::int64_t k = 0; k < trials; ++k) {
            const auto h = HilbertSpace<Real>::identity(static_cast<Index>(size));
            const auto t = random_coercive(h, 0.5, 4.0, rng);
            const SkewOp<Real> a(random_skew(h, static_cast<Index>(size) - size % 2, rng));
            const Mat<Real> s = Eigen::PartialPivLU<Mat<Real>>(Mat<Real>(t.dense_matrix() + a.op().to_dense())).inverse();
            const auto rec = recover_coefficient(LinearOp<Real>::dense(h, h, s), a);
            const Real err = (rec.t.dense_matrix() - t.dense_matrix()).cwiseAbs().maxCoeff() /
                             t.dense_matrix().cwiseAbs().maxCoeff();
            const bool in_class = coercivity_check(rec.t, 0.5, 4.0, 1e-8).passes();
            out.table.add({Index(k), rec.round_trip, err, in_class});
            all = all && rec.round_trip < 1e-9 && err < 1e-10 && in_class;
            worst = std::max(worst, err);
        }
        out.passed = all;
        sum << "worst_coefficient_error=" << format_real(worst);
    } else if (kind == "thermo") {
        const int d = detail::dim_of(cfg, 1);
        const auto opt = detail::options_of(cfg, 32, 5e-2, jobs);
        const auto rep = thermo_homogenization_experiment(laminate_thermo_sequence(d, cfg.real("sequence", "coupling", 0.5)),
                                                          cfg.real("run", "lambda", 1.0), d, opt);
        out.table = rep.table();
        out.passed = rep.passed();
        sum << "final_gap=" << format_real(rep.rows.back().resolvent_gap);
    } else if (kind == "maxwell") {
        const auto opt = detail::options_of(cfg, 2, 0.1, jobs);
        const auto rep = maxwell_homogenization_experiment(laminate_maxwell_sequence(), cfg.real("run", "lambda", 1.0), opt);
        out.table = rep.table();
        out.passed = rep.passed();
        sum << "final_gap=" << format_real(rep.rows.back().resolvent_gap);
    } else if (kind == "helmholtz") {
        const Index cells = detail::cells_of(cfg, 4);
        const StaggeredGrid grid(cells);
        const auto ids = complex_identities(grid);
        const auto [dsplit, nsplit] = helmholtz_decompose(grid, static_cast<std::uint64_t>(cfg.integer("run", "seed", 1)));
        out.table = CsvTable("helmholtz", {"flavor", "total", "gradients", "curls", "harmonic", "orthogonality", "reassembly"});
        out.table.note("cells_per_axis=" + std::to_string(cells) + " curl_grad=" + format_real(ids.curl_grad) +
                       " div_curl=" + format_real(ids.div_curl));
        for (const auto* s : {&dsplit, &nsplit})
            out.table.add({std::string(to_string(s->flavor)), s->total, *s->gradients.dim(), *s->curls.dim(),
                           *s->harmonic.dim(), s->orthogonality, s->reassembly});
        out.passed = dsplit.passed() && nsplit.passed() && ids.curl_grad < 1e-12 && ids.div_curl < 1e-12;
        sum << "harmonic_dims=" << *dsplit.harmonic.dim() << "," << *nsplit.harmonic.dim();
    } else {
        throw ConfigError("experiment '" + kind + "' has no runner");
    }
    out.summary = "kind=" + kind + " status=" + detail::verdict(out.passed) + " " + sum.str();
    return out;
}

} // namespace homlab
