#include "villain/experiments.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <sstream>

#include "json.hpp"
#include "villain/decouple.hpp"
#include "villain/harmonic.hpp"
#include "villain/ivgauss.hpp"

namespace villain {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string num(double x)
{
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, r.ptr);
}

json num_json(double x) { return std::isfinite(x) ? json(x) : json(num(x)); }

double json_num(const json& j)
{
    if (j.is_number()) return j.get<double>();
    const std::string s = j.get<std::string>();
    if (s == "inf") return INFINITY;
    if (s == "-inf") return -INFINITY;
    return NAN;
}

Verdict verdict_from_string(const std::string& s)
{
    if (s == to_string(Verdict::Pass)) return Verdict::Pass;
    if (s == to_string(Verdict::Fail)) return Verdict::Fail;
    return Verdict::Inconclusive;
}

struct Fit {
    double slope, intercept, r;
};

Fit fit_line(const std::vector<double>& x, const std::vector<double>& y)
{
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) sx += x[i], sy += y[i];
    const double mx = sx / n, my = sy / n;
    double sxx = 0, syy = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    const double slope = sxy / sxx;
    return {slope, my - slope * mx, sxy / std::sqrt(sxx * syy)};
}

MeasureReport make_report(const std::string& name)
{
    MeasureReport r;
    r.name = name;
    return r;
}

// Pass/fail on a boolean with the measured value shown.
Check flag(const std::string& name, bool ok, double value, const std::string& tolerance)
{
    Check c;
    c.name = name;
    c.estimate = value;
    c.tolerance = tolerance;
    c.verdict = ok ? Verdict::Pass : Verdict::Fail;
    return c;
}

std::string scope_of(const LatticeSpec& s) { return s.describe(); }

std::string beta_scope(double beta) { return "beta=" + num(beta); }

}  // namespace

Verdict ExperimentResult::verdict() const
{
    std::vector<Check> all;
    for (const auto& e : reports)
        for (const auto& c : e.report.checks) all.push_back(c);
    return combine(all);
}

int exit_code(Verdict v)
{
    switch (v) {
    case Verdict::Pass:
        return 0;
    case Verdict::Fail:
        return 1;
    case Verdict::Inconclusive:
        return 2;
    }
    return 1;
}

// ---------------------------------------------------------------- building blocks

MeasureReport calculus_check(const LatticeSpec& spec, std::uint64_t seed, int trials)
{
    auto lat = make_lattice(spec);
    const int n = spec.n;
    PhiloxStream rng(seed, 0x43414c43u, static_cast<std::uint32_t>(fnv1a64(spec.describe())), 0);
    auto rint = [&](int k) {
        IntForm f(lat, k);
        for (auto& v : f.values()) v = static_cast<std::int64_t>(std::floor(7 * rng.uniform())) - 3;
        f.enforce_boundary();
        return f;
    };
    auto rreal = [&](int k) {
        RealForm f(lat, k);
        for (auto& v : f.values()) v = rng.normal();
        f.enforce_boundary();
        return f;
    };
    std::int64_t dd = 0, dsds = 0, adj_int = 0, bnd = 0;
    double adj_real = 0;
    for (int t = 0; t < trials; ++t)
        for (int k = 0; k <= n; ++k) {
            const IntForm f = rint(k);
            const IntForm ddf = d(d(f));
            for (auto v : ddf.values()) dd = std::max<std::int64_t>(dd, std::llabs(v));
            if (k >= 2) {
                const IntForm ss = d_star(d_star(f));
                for (auto v : ss.values()) dsds = std::max<std::int64_t>(dsds, std::llabs(v));
            }
            if (k < n) {
                const IntForm g = rint(k + 1);
                adj_int = std::max<std::int64_t>(adj_int, std::llabs(inner(d(f), g) + inner(f, d_star(g))));
                const RealForm a = rreal(k), b = rreal(k + 1);
                const double lhs = inner(d(a), b), rhs = -inner(a, d_star(b));
                adj_real = std::max(adj_real, std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs)));
            }
            if (spec.boundary == Boundary::Zero) {
                const IntForm df = d(f);
                for (std::size_t i = 0; i < df.size(); ++i)
                    if (lat->is_boundary(df.degree(), i)) bnd = std::max<std::int64_t>(bnd, std::llabs(df[i]));
            }
        }
    // Boundary of a boundary, cell by cell through the box-free incidence rule.
    std::int64_t bb = 0;
    for (int k = 2; k <= n; ++k)
        for (const CellKey& c : lat->enumerate_cells(k)) {
            std::map<std::pair<std::array<int, kMaxDim>, std::uint32_t>, int> acc;
            for (const auto& f : boundary_of(c, n))
                for (const auto& e : boundary_of(f.cell, n)) acc[{e.cell.base, e.cell.dirs}] += f.coeff * e.coeff * e.cell.sign * f.cell.sign;
            for (const auto& [key, v] : acc) bb = std::max<std::int64_t>(bb, std::abs(v));
        }
    MeasureReport r = make_report("calculus");
    r.checks.push_back(exact("d d f = 0 (integer forms, max entry)", static_cast<double>(dd), 0, 0));
    r.checks.push_back(exact(std::string(spec.boundary == Boundary::Zero ? "ring " : "") + "d* d* f = 0 (max entry)", static_cast<double>(dsds), 0, 0));
    r.checks.push_back(exact("<df, g> + <f, d*g> = 0 (integer forms)", static_cast<double>(adj_int), 0, 0));
    r.checks.push_back(exact("<df, g> + <f, d*g> = 0 (real forms, relative)", adj_real, 0, 1e-12));
    if (spec.boundary == Boundary::Zero) r.checks.push_back(exact("d keeps zero-boundary forms zero on the boundary", static_cast<double>(bnd), 0, 0));
    r.checks.push_back(exact("boundary of a boundary cancels on every cell", static_cast<double>(bb), 0, 0));
    r.info = {{"trials", static_cast<double>(trials)}, {"degrees", static_cast<double>(n + 1)}};
    return r;
}

MeasureReport green_entries(const LatticeSpec& spec, int pairs, double tol, std::uint64_t seed)
{
    auto lat = make_lattice(spec);
    const Mode mode = spec.boundary;
    const auto dofs = form_dofs(*lat, 1, mode);
    PhiloxStream rng(seed, 0x47524e45u, 0, 0);
    SolveSettings cg;
    cg.method = SolveSettings::Method::CG;
    cg.tol = 1e-14;
    PoissonSolver solver(lat, 1, mode, cg);
    double cross = 0, same = 0;
    long n_cross = 0, n_same = 0;
    const int sources = std::min(spec.n, 3);
    for (int s = 0; s < sources; ++s) {
        CellKey e;
        e.dirs = 1u << s;
        RealForm delta(lat, 1);
        delta.set(e, 1.0);
        const RealForm u = solver.solve(delta);
        // Every cross-direction entry of this column.
        for (auto i : dofs) {
            const CellKey f = lat->cell(1, static_cast<std::size_t>(i));
            if (f.dirs == e.dirs) continue;
            cross = std::max(cross, std::abs(u[i]));
            ++n_cross;
        }
        // Same-direction entries at random targets against the direction graph.
        for (int t = 0; t < pairs; ++t) {
            CellKey f;
            do {
                f = lat->cell(1, static_cast<std::size_t>(dofs[static_cast<std::size_t>(rng.uniform() * static_cast<double>(dofs.size()))]));
            } while (f.dirs != e.dirs);
            same = std::max(same, std::abs(-u.at(f) - green_one_form(e, f, *lat, mode)));
            ++n_same;
        }
    }
    MeasureReport r = make_report("green_entries");
    r.checks.push_back(exact("cross-direction 1-form Green entries vanish", cross, 0, tol));
    r.checks.push_back(exact("same-direction entries match the direction graph", same, 0, tol));
    r.info = {{"cross_entries", static_cast<double>(n_cross)}, {"same_entries", static_cast<double>(n_same)}};
    return r;
}

MeasureReport green_power_law(int n, const std::vector<long>& radii, double tol)
{
    std::vector<double> x, y;
    for (long rad : radii) {
        std::vector<int> v(static_cast<std::size_t>(n), 0);
        v[0] = static_cast<int>(rad);
        x.push_back(std::log(static_cast<double>(rad)));
        y.push_back(std::log(green_infinite_vertex(v, n)));
    }
    const Fit f = fit_line(x, y);
    MeasureReport r = make_report("green_power_law_n" + std::to_string(n));
    r.checks.push_back(exact("fitted exponent of G(0, r e_1)", f.slope, -(n - 2), tol));
    r.info = {{"exponent", f.slope}, {"prefactor", std::exp(f.intercept)}, {"r_min", static_cast<double>(radii.front())}, {"r_max", static_cast<double>(radii.back())}};
    return r;
}

MeasureReport cgff_stability(const std::vector<long>& K, double tol)
{
    MeasureReport r = make_report("c_gff");
    std::vector<double> v;
    for (long k : K) {
        const CgffResult c = c_gff_detail(static_cast<int>(k));
        v.push_back(c.value);
        r.info.push_back({"c_gff_K" + std::to_string(k), c.value});
        r.info.push_back({"tail_K" + std::to_string(k), c.tail});
    }
    for (std::size_t i = 1; i < v.size(); ++i)
        r.checks.push_back(exact("c_gff(K=" + std::to_string(K[i]) + ") vs K=" + std::to_string(K[i - 1]), v[i], v[i - 1], tol));
    r.checks.push_back(exact("c_gff() agrees with the finest truncation", c_gff(), v.back(), tol));
    return r;
}

MeasureReport loop_slope(int n, Mode mode, const std::vector<long>& sizes, double rel_tol, Table* table)
{
    std::vector<double> x, y;
    if (table) {
        table->file = "loop_energy.csv";
        table->header = {"L", "H", "j", "margin", "loop_energy", "energy_per_perimeter"};
    }
    for (long L : sizes) {
        const int j = static_cast<int>((3 * L + 1) / 2);
        const auto spec = LatticeSpec::cube(n, j, mode);
        const auto loop = RectLoop::centered(spec, static_cast<int>(L), static_cast<int>(L));
        loop.validate(spec, static_cast<int>(L));
        const double e = loop_energy(loop, spec, mode);
        x.push_back(2.0 * static_cast<double>(L));
        y.push_back(e);
        if (table)
            table->rows.push_back({std::to_string(L), std::to_string(L), std::to_string(j), std::to_string(loop.margin(spec)), num(e),
                                   num(e / (2.0 * static_cast<double>(L)))});
    }
    const Fit f = fit_line(x, y);
    const double target = 2 * c_gff();
    MeasureReport r = make_report("loop_energy_slope");
    r.checks.push_back(exact("slope of loop energy vs L + H against 2 c_gff", f.slope, target, rel_tol * target));
    r.info = {{"slope", f.slope}, {"2c_gff", target}, {"relative_error", f.slope / target - 1}, {"intercept", f.intercept}};
    return r;
}

MeasureReport rank_report(const LatticeSpec& spec, bool exact_rank, Table* table)
{
    const RankTable t = rank_table(spec, exact_rank);
    MeasureReport r = make_report("ranks");
    if (table) {
        table->file = "ranks.csv";
        table->header = {"k", "cells", "lower", "upper", "harmonic"};
    }
    for (const auto& row : t.rows) {
        if (table)
            table->rows.push_back({std::to_string(row.k), std::to_string(row.cells), std::to_string(row.lower), std::to_string(row.upper),
                                   std::to_string(row.cells - row.lower - row.upper)});
        if (row.k > 0 && row.k < spec.n)
            r.checks.push_back(exact("k=" + std::to_string(row.k) + ": lower + upper = #cells", static_cast<double>(row.lower + row.upper),
                                     static_cast<double>(row.cells), 0));
        if (row.k > 0)
            r.checks.push_back(exact("k=" + std::to_string(row.k) + ": lower rank equals the count by alternating sums", static_cast<double>(row.lower),
                                     static_cast<double>(rank_by_counting(spec, row.k - 1, spec.boundary)), 0));
    }
    if (spec.n == 4 && spec.is_cube()) {
        const long j = spec.half_side();
        auto pw = [](long b, int e) {
            double v = 1;
            while (e-- > 0) v *= static_cast<double>(b);
            return v;
        };
        auto row = [&](int k) { return t.rows[static_cast<std::size_t>(k)]; };
        if (spec.boundary == Boundary::Free) {
            r.checks.push_back(exact("dim P_{0->1} = (2j+1)^4 - 1", static_cast<double>(row(1).lower), pw(2 * j + 1, 4) - 1, 0));
            r.checks.push_back(exact("dim P_{1->2} = (2j+1)^3 (6j-1) + 1", static_cast<double>(row(1).upper), pw(2 * j + 1, 3) * static_cast<double>(6 * j - 1) + 1, 0));
            r.checks.push_back(exact("dim P_{2->3} = (2j)^3 (6j+4)", static_cast<double>(row(2).upper), pw(2 * j, 3) * static_cast<double>(6 * j + 4), 0));
            r.checks.push_back(exact("dim P_{3->4} = (2j)^4", static_cast<double>(row(3).upper), pw(2 * j, 4), 0));
        } else {
            r.checks.push_back(exact("dim P_{0->1} = (2j-1)^4", static_cast<double>(row(1).lower), pw(2 * j - 1, 4), 0));
            r.checks.push_back(exact("dim P_{1->2} = (2j-1)^3 (6j+1)", static_cast<double>(row(1).upper), pw(2 * j - 1, 3) * static_cast<double>(6 * j + 1), 0));
            r.checks.push_back(exact("dim P_{2->3} = (2j)^3 (6j-4) + 1", static_cast<double>(row(2).upper), pw(2 * j, 3) * static_cast<double>(6 * j - 4) + 1, 0));
            r.checks.push_back(exact("dim P_{3->4} = (2j)^4 - 1", static_cast<double>(row(3).upper), pw(2 * j, 4) - 1, 0));
        }
    }
    r.info = {{"exact", exact_rank ? 1.0 : 0.0}, {"min_gap", t.min_gap}};
    return r;
}

MeasureReport ivg_bounds(double b0, double b1, double c0, double c1, double step)
{
    long viol_i = 0, n_i = 0, viol_iii = 0, n_iii = 0;
    double slack_i = INFINITY, slack_iii = INFINITY;
    const int na = static_cast<int>(std::lround(0.5 / step));
    for (long i = 1;; ++i) {
        const double beta = b0 + static_cast<double>(i) * step;
        if (beta > b1 + 1e-9) break;
        for (int ia = 0; ia <= na; ++ia) {
            const double a = std::min(0.5, ia * step);
            const double v = ivg_var({a, beta}), bound = std::exp(-beta * (1 - 2 * a) / 2) / 16;
            slack_i = std::min(slack_i, v / bound);
            viol_i += v < bound;
            ++n_i;
        }
    }
    for (long i = 0;; ++i) {
        const double beta = c0 + static_cast<double>(i) * step;
        if (beta > c1 + 1e-9) break;
        const double m = error_M(beta).value, bound = 2 * beta * std::exp(-2 * M_PI * M_PI * beta);
        slack_iii = std::min(slack_iii, m / bound);
        viol_iii += m < bound;
        ++n_iii;
    }
    MeasureReport r = make_report("ivg_bounds");
    r.checks.push_back(exact("Var(a, beta) >= e^{-beta(1-2a)/2}/16: violations", static_cast<double>(viol_i), 0, 0));
    r.checks.push_back(exact("M(beta) >= 2 beta e^{-(2pi)^2 beta/2}: violations", static_cast<double>(viol_iii), 0, 0));
    r.info = {{"grid_points_i", static_cast<double>(n_i)}, {"min_ratio_i", slack_i}, {"grid_points_iii", static_cast<double>(n_iii)}, {"min_ratio_iii", slack_iii}};
    return r;
}

MeasureReport gsw_law(const LatticePtr& lat, double beta, long samples, double bulk_rel, std::uint64_t seed)
{
    if (lat->dim() < 2) throw DegreeError("the gradient spin wave lives on 2-forms");
    GswSampler g(lat, 1, beta);
    // Test panel: a bulk face, a face pair, a 2 x 2 rectangle, an exact form and a random patch.
    CellKey f0;
    f0.dirs = 3;
    CellKey f1 = f0;
    f1.base[1] = -1;
    const std::int32_t i0 = static_cast<std::int32_t>(lat->index(f0));
    std::vector<std::pair<std::string, RealForm>> panel;
    {
        RealForm f(lat, 2);
        f[i0] = 1;
        panel.push_back({"bulk face", f});
        f.set(f1, -1);
        panel.push_back({"face pair", f});
    }
    if (lat->spec().half_side() >= 2 || !lat->spec().is_cube()) {
        const auto loop = RectLoop::centered(lat->spec(), 2, 2);
        panel.push_back({"2x2 rectangle", region_form(loop, lat)});
    }
    {
        RealForm e(lat, 1);
        CellKey c;
        c.dirs = 1;
        e.set(c, 1.0);
        panel.push_back({"d of an edge", d(e)});
    }
    {
        PhiloxStream r(seed, 0x50414e4cu, 0, 0);
        RealForm f(lat, 2);
        for (auto i : lat->interior(2)) {
            const CellKey c = lat->cell(2, static_cast<std::size_t>(i));
            bool near = true;
            for (int a = 0; a < lat->dim(); ++a) near = near && std::abs(c.base[a]) <= 1;
            if (near) f[i] = r.uniform() < 0.5 ? -1.0 : 1.0;
        }
        panel.push_back({"random signs near the centre", f});
    }
    if (lat->boundary() == Boundary::Zero)
        for (auto& [name, f] : panel) f.enforce_boundary();
    std::vector<double> target;
    for (const auto& [name, f] : panel) {
        const RealForm pf = g.projector().apply(Projection::Lower, f);
        target.push_back(norm2(pf) / beta);
    }
    std::vector<std::vector<double>> series(panel.size());
    PhiloxStream rng(seed, 0xfffffff0u, 0x67737700u, 0);
    for (long t = 0; t < samples; ++t) {
        const RealForm rho = g.draw(rng);
        for (std::size_t i = 0; i < panel.size(); ++i) {
            const double x = inner(rho, panel[i].second);
            series[i].push_back(x * x);
        }
    }
    MeasureReport r = make_report("gsw_law");
    for (std::size_t i = 0; i < panel.size(); ++i)
        r.checks.push_back(two_sided("Var<rho, f> = |Pf|^2/beta: " + panel[i].first, batch_means(series[i]), target[i], 3));
    const Estimate bulk = batch_means(series[0]);
    r.checks.push_back(two_sided("bulk face variance = 1/(2 beta)", bulk, 1 / (2 * beta), 3, bulk_rel));
    r.info = {{"bulk_variance", bulk.mean}, {"bulk_se", bulk.se}, {"bulk_exact_finite_box", target[0]}, {"self_dual_value", 1 / (2 * beta)}};
    r.samples = samples;
    r.underpowered = samples < 1000;
    return r;
}

MeasureReport decouple_panel(VillainChain& chain, long samples, double tol)
{
    const auto& lat = chain.state().lat;
    const int p = chain.state().p;
    Decomposer dec(lat, p);
    IndependenceAccumulator acc(*lat, p);
    double worst = 0;
    long charged = 0;
    chain.run(samples, [&](const VillainState& s, long) {
        const DecoupledPair pr = dec.decompose(s);
        const double lhs = s.energy(), rhs = norm2(pr.rho) + 4 * M_PI * M_PI * pr.coulomb_energy;
        worst = std::max(worst, std::abs(lhs - rhs) / std::max(lhs, 1e-300));
        charged += pr.q.is_zero() ? 0 : 1;
        acc.add(pr);
    });
    const IndependenceReport rep = acc.report();
    MeasureReport r = make_report("decouple");
    r.checks.push_back(exact("|F|^2 = |rho|^2 + (2pi)^2 <q,(-Delta)^-1 q> per sample (max relative error)", worst, 0, tol));
    for (const auto& row : rep.rows) {
        Check c = two_sided("corr(" + row.rho_name + ", " + row.q_name + ") = 0", row.corr, 0.0, 3);
        if (!std::isfinite(row.corr.se)) {
            c.verdict = Verdict::Inconclusive;
            c.note = "degenerate series";
        }
        r.checks.push_back(c);
    }
    for (const auto& nr : rep.normality) {
        const double z = std::max(std::abs(nr.shape.skew / nr.shape.skew_se), std::abs(nr.shape.kurt / nr.shape.kurt_se));
        r.checks.push_back(flag("normality of " + nr.name + " (max |z| of skewness, kurtosis)", nr.shape.normal_at_1pct, z, "|z| < 2.576"));
    }
    r.info = {{"samples", static_cast<double>(rep.samples)}, {"charged_fraction", static_cast<double>(charged) / static_cast<double>(samples)}};
    r.underpowered = rep.underpowered;
    r.samples = samples;
    return r;
}

// ---------------------------------------------------------------- serialization

std::string to_json(const ReportEntry& e)
{
    json j;
    j["scope"] = e.scope;
    j["name"] = e.report.name;
    j["samples"] = e.report.samples;
    j["underpowered"] = e.report.underpowered;
    j["verdict"] = to_string(e.report.verdict());
    json checks = json::array();
    for (const auto& c : e.report.checks)
        checks.push_back({{"name", c.name},
                          {"estimate", num_json(c.estimate)},
                          {"se", num_json(c.se)},
                          {"target", num_json(c.target)},
                          {"margin", num_json(c.margin)},
                          {"tolerance", c.tolerance},
                          {"verdict", to_string(c.verdict)},
                          {"note", c.note}});
    j["checks"] = checks;
    json info = json::array();
    for (const auto& [k, v] : e.report.info) info.push_back({k, num_json(v)});
    j["info"] = info;
    return j.dump(2);
}

ReportEntry report_from_json(const std::string& text)
{
    const json j = json::parse(text);
    ReportEntry e;
    e.scope = j.at("scope").get<std::string>();
    e.report.name = j.at("name").get<std::string>();
    e.report.samples = j.at("samples").get<long>();
    e.report.underpowered = j.at("underpowered").get<bool>();
    for (const auto& c : j.at("checks")) {
        Check k;
        k.name = c.at("name").get<std::string>();
        k.estimate = json_num(c.at("estimate"));
        k.se = json_num(c.at("se"));
        k.target = json_num(c.at("target"));
        k.margin = json_num(c.at("margin"));
        k.tolerance = c.at("tolerance").get<std::string>();
        k.verdict = verdict_from_string(c.at("verdict").get<std::string>());
        k.note = c.at("note").get<std::string>();
        e.report.checks.push_back(k);
    }
    for (const auto& kv : j.at("info")) e.report.info.push_back({kv.at(0).get<std::string>(), json_num(kv.at(1))});
    return e;
}

// ---------------------------------------------------------------- driver

namespace {

std::string csv_field(const std::string& s)
{
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
}

void write_csv(const fs::path& path, const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows, const std::string& hash)
{
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    auto line = [&](const std::vector<std::string>& cells, const std::string& h, const std::string& v) {
        for (const auto& c : cells) os << csv_field(c) << ",";
        os << h << "," << v << "\n";
    };
    line(header, "config_hash", "code_version");
    for (const auto& r : rows) line(r, hash, code_version());
}

void write_text(const fs::path& path, const std::string& text)
{
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp);
        if (!os) throw std::runtime_error("cannot write " + tmp.string());
        os << text;
    }
    fs::rename(tmp, path);
}

std::string read_text(const fs::path& path)
{
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot read " + path.string());
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

class Logger {
public:
    explicit Logger(std::ostream* os) : os_(os), t0_(std::chrono::steady_clock::now()) {}
    void operator()(const std::string& msg) const
    {
        if (!os_) return;
        const double t = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
        *os_ << "[" << std::fixed << std::setprecision(1) << t << "s] " << msg << std::endl;
    }

private:
    std::ostream* os_;
    std::chrono::steady_clock::time_point t0_;
};

using Stage = std::pair<std::string, std::function<MeasureReport(VillainChain&)>>;

// Runs the stages of one chain with per-stage checkpoints. Stage s writes
// the checkpoint ckpt_s, then its report; ckpt_{s-1} is removed afterwards.
// On resume, the last stage with both files is the restart point.
// Stage files carry the config hash and code version like every other output.
std::string tagged(const std::string& report_json, std::uint64_t hash)
{
    json j = json::parse(report_json);
    j["config_hash"] = hex64(hash);
    j["code_version"] = code_version();
    return j.dump(2);
}

void run_chain_stages(const RunConfig& cfg, const RunOptions& opt, const Logger& log, std::size_t bi, double beta, const std::vector<Stage>& stages,
                      ExperimentResult& res, const std::function<void(const VillainChain&, const fs::path&)>& finish)
{
    const fs::path stage_dir = opt.out / "stages", ck_dir = opt.out / "checkpoints";
    fs::create_directories(stage_dir);
    fs::create_directories(ck_dir);
    const std::string tag = "b" + std::to_string(bi);
    auto stage_file = [&](std::size_t s) { return stage_dir / (tag + "_s" + std::to_string(s) + ".json"); };
    auto ck_file = [&](long s) { return ck_dir / (tag + "_s" + (s < 0 ? std::string("burnin") : std::to_string(s)) + ".json"); };
    const std::uint64_t h = cfg.hash();
    long done = -1;
    if (opt.resume)
        for (std::size_t s = 0; s < stages.size(); ++s) {
            if (!fs::exists(stage_file(s))) break;
            done = static_cast<long>(s);
        }
    std::unique_ptr<VillainChain> chain;
    auto load = [&](long s) {
        std::uint64_t got = 0;
        chain = std::make_unique<VillainChain>(VillainChain::load_checkpoint(ck_file(s).string(), &got));
        if (got != h) throw std::runtime_error("checkpoint " + ck_file(s).string() + " belongs to another configuration");
    };
    if (opt.resume && fs::exists(ck_file(done))) {
        load(done);
        log(beta_scope(beta) + ": resumed after stage " + std::to_string(done + 1) + " of " + std::to_string(stages.size()) + " at sweep " +
            std::to_string(chain->sweeps()));
    } else {
        if (done >= 0) throw std::runtime_error("finished stages without a matching checkpoint in " + ck_dir.string());
        const auto spec = cfg.lattice();
        chain = std::make_unique<VillainChain>(make_lattice(spec), static_cast<int>(cfg.get_int("chain", "p")), cfg.chain(beta, static_cast<std::uint32_t>(bi)));
        chain->run_burn_in();
        chain->save_checkpoint(ck_file(-1).string(), h);
        log(beta_scope(beta) + ": burn-in done (" + std::to_string(chain->sweeps()) + " sweeps)");
    }
    for (std::size_t s = 0; s < stages.size(); ++s) {
        if (static_cast<long>(s) <= done) {
            res.reports.push_back(report_from_json(read_text(stage_file(s))));
            continue;
        }
        MeasureReport r = stages[s].second(*chain);
        ReportEntry e{beta_scope(beta), r};
        chain->save_checkpoint(ck_file(static_cast<long>(s)).string(), h);
        write_text(stage_file(s), tagged(to_json(e), h) + "\n");
        const fs::path prev = ck_file(static_cast<long>(s) - 1);
        for (const auto& suffix : {"", ".theta", ".m"}) fs::remove(prev.string() + suffix);
        log(beta_scope(beta) + ": " + stages[s].first + " -> " + to_string(r.verdict()));
        res.reports.push_back(std::move(e));
        if (++res.stages_run == opt.stop_after_stages) throw Interrupted("stopped after " + std::to_string(res.stages_run) + " stages");
    }
    if (finish) finish(*chain, opt.out);
}

std::vector<std::int32_t> bulk_faces(const Lattice& lat, std::size_t count)
{
    std::vector<std::pair<long, std::int32_t>> by_dist;
    for (auto i : lat.interior(2)) {
        const CellKey c = lat.cell(2, static_cast<std::size_t>(i));
        long d2 = 0;
        for (int a = 0; a < lat.dim(); ++a) d2 += static_cast<long>(2 * c.base[a] + (c.has(a) ? 1 : 0)) * (2 * c.base[a] + (c.has(a) ? 1 : 0));
        by_dist.push_back({d2, i});
    }
    std::sort(by_dist.begin(), by_dist.end());
    std::vector<std::int32_t> out;
    for (std::size_t k = 0; k < std::min(count, by_dist.size()); ++k) out.push_back(by_dist[k].second);
    return out;
}

CellKey central_cell(int k)
{
    CellKey c;
    c.dirs = (1u << k) - 1;
    return c;
}

Estimate diff(const Estimate& a, const Estimate& b) { return {a.mean - b.mean, std::hypot(a.se, b.se), std::min(a.n, b.n), std::min(a.batches, b.batches)}; }

Estimate entry_estimate(const MeasureReport& r, const std::string& mean_key, const std::string& se_key)
{
    Estimate e;
    for (const auto& [k, v] : r.info) {
        if (k == mean_key) e.mean = v;
        if (k == se_key) e.se = v;
    }
    e.n = static_cast<std::size_t>(r.samples);
    return e;
}

std::pair<int, int> parse_loop(const std::string& s)
{
    const auto x = s.find('x');
    return {std::stoi(s.substr(0, x)), std::stoi(s.substr(x + 1))};
}

void save_state_snapshots(const RunConfig& cfg, const VillainChain& chain, const fs::path& out, std::size_t bi, bool decomposed)
{
    const fs::path dir = out / "snapshots";
    fs::create_directories(dir);
    const SnapshotTag tag{cfg.hash(), code_version()};
    const std::string b = "_b" + std::to_string(bi) + ".vlf";
    save_snapshot((dir / ("theta" + b)).string(), chain.state().theta, tag);
    save_snapshot((dir / ("m" + b)).string(), chain.state().m, tag);
    if (decomposed) {
        const DecoupledPair pr = decompose(chain.state());
        save_snapshot((dir / ("rho" + b)).string(), pr.rho, tag);
        save_snapshot((dir / ("q" + b)).string(), pr.q, tag);
    }
}

}  // namespace

ExperimentResult run_experiment(const RunConfig& cfg, const RunOptions& opt)
{
    cfg.validate();
    fs::create_directories(opt.out);
    const Logger log(opt.log);
    const std::string hash = hex64(cfg.hash());
    // Resolved config first, so a crashed run can be resumed from it.
    write_text(opt.out / "resolved.cfg", "# config_hash = " + hash + "\n# code_version = " + code_version() + "\n" + cfg.resolved_text());
    ExperimentResult res;
    const LatticeSpec spec = cfg.lattice();
    const std::uint64_t seed = cfg.seed();
    const auto betas = cfg.betas();
    const long samples = uses_chain(cfg.experiment) ? cfg.get_int("chain", "samples") : 0;
    log("experiment " + to_string(cfg.experiment) + ", config " + hash);

    switch (cfg.experiment) {
    case Experiment::CalculusCheck: {
        std::vector<LatticeSpec> specs;
        if (cfg.get_bool("calculus", "grid")) {
            for (int n = 2; n <= 4; ++n)
                for (int j = 1; j <= 2; ++j)
                    for (Boundary b : {Boundary::Free, Boundary::Zero}) specs.push_back(LatticeSpec::cube(n, j, b));
        } else {
            specs.push_back(spec);
        }
        for (const auto& s : specs) {
            res.reports.push_back({scope_of(s), calculus_check(s, seed, static_cast<int>(cfg.get_int("calculus", "trials")))});
            log(scope_of(s) + " done");
        }
        break;
    }
    case Experiment::Green: {
        res.reports.push_back({scope_of(spec), green_entries(spec, static_cast<int>(cfg.get_int("green", "entry_pairs")), cfg.get_real("green", "entry_tol"), seed)});
        log("Green entries done");
        for (long n : cfg.get_ints("green", "power_dims"))
            res.reports.push_back({"Z^" + std::to_string(n), green_power_law(static_cast<int>(n), cfg.get_ints("green", "power_radii"), cfg.get_real("green", "power_tol"))});
        res.reports.push_back({"Z^4", cgff_stability(cfg.get_ints("green", "cgff_K"), cfg.get_real("green", "cgff_tol"))});
        log("power laws and c_gff done");
        Table t;
        res.reports.push_back({"n=4 " + to_string(spec.boundary), loop_slope(4, spec.boundary, cfg.get_ints("green", "loop_sizes"), cfg.get_real("green", "slope_tol"), &t)});
        res.tables.push_back(t);
        log("loop energies done");
        break;
    }
    case Experiment::Ranks: {
        Table t;
        res.reports.push_back({scope_of(spec), rank_report(spec, cfg.get_bool("ranks", "exact"), &t)});
        res.tables.push_back(t);
        break;
    }
    case Experiment::IvgTable: {
        const double step = cfg.get_real("ivg", "step");
        res.reports.push_back({"grid", ivg_bounds(cfg.get_real("ivg", "i_beta_min"), cfg.get_real("ivg", "i_beta_max"), cfg.get_real("ivg", "iii_beta_min"),
                                                  cfg.get_real("ivg", "iii_beta_max"), step)});
        Table t;
        t.file = "ivg_table.csv";
        t.header = {"beta", "a", "mean", "var", "t3", "error_M", "K_beta"};
        for (double b : cfg.get_reals("ivg", "table_betas")) {
            const double m = error_M(b).value, k = ratio_K(b).value;
            for (double a : cfg.get_reals("ivg", "table_a")) {
                const IvgParams p{a, b};
                t.rows.push_back({num(b), num(a), num(ivg_mean(p)), num(ivg_var(p)), num(ivg_t3(p)), num(m), num(k)});
            }
        }
        res.tables.push_back(t);
        break;
    }
    case Experiment::Villain: {
        const auto names = cfg.get_strings("villain", "measurements");
        std::vector<Estimate> tilde;
        for (std::size_t bi = 0; bi < betas.size(); ++bi) {
            auto lat = make_lattice(spec);
            std::vector<Stage> stages;
            for (const auto& m : names) {
                if (m == "energy-identity") stages.push_back({m, [samples](VillainChain& c) { return energy_identity(c, samples); }});
                if (m == "tilde-m") {
                    const auto face = static_cast<std::int32_t>(lat->index(central_cell(2)));
                    stages.push_back({m, [samples, face](VillainChain& c) { return tilde_M_estimate(c, samples, face); }});
                }
                if (m == "fourier-m") {
                    RealForm h(lat, 2);
                    for (auto i : bulk_faces(*lat, static_cast<std::size_t>(cfg.get_int("villain", "fourier_faces")))) h[i] = cfg.get_real("villain", "fourier_scale");
                    const double b = cfg.get_real("villain", "truncation");
                    stages.push_back({m, [samples, h, b](VillainChain& c) { return fourier_m(c, samples, h, b); }});
                }
                if (m == "coulomb-variance") {
                    RealForm h(lat, 3);
                    h.set(central_cell(3), 1.0);
                    stages.push_back({m, [samples, h](VillainChain& c) { return coulomb_variance_check(c, samples, h); }});
                }
                if (m == "factorization") {
                    IntForm f(lat, 2);
                    f.set(central_cell(2), 1);
                    stages.push_back({m, [samples, f](VillainChain& c) { return fourier_factorization(c, samples, f); }});
                }
            }
            const std::size_t first = res.reports.size();
            run_chain_stages(cfg, opt, log, bi, betas[bi], stages, res,
                             [&](const VillainChain& c, const fs::path& out) { save_state_snapshots(cfg, c, out, bi, false); });
            for (std::size_t i = first; i < res.reports.size(); ++i)
                if (res.reports[i].report.name == "tilde_M") tilde.push_back(entry_estimate(res.reports[i].report, "tilde_M", "se"));
        }
        if (tilde.size() >= 2 && tilde.size() == betas.size()) {
            // Weighted slope of log tilde_M against beta, s.e. by the delta method.
            std::vector<double> x, y, w;
            for (std::size_t i = 0; i < tilde.size(); ++i) {
                x.push_back(betas[i]);
                y.push_back(std::log(tilde[i].mean));
                const double s = tilde[i].se / tilde[i].mean;
                w.push_back(1 / std::max(s * s, 1e-30));
            }
            double sw = 0, sx = 0, sy = 0;
            for (std::size_t i = 0; i < x.size(); ++i) sw += w[i], sx += w[i] * x[i], sy += w[i] * y[i];
            double sxx = 0, sxy = 0;
            for (std::size_t i = 0; i < x.size(); ++i) {
                sxx += w[i] * (x[i] - sx / sw) * (x[i] - sx / sw);
                sxy += w[i] * (x[i] - sx / sw) * (y[i] - sy / sw);
            }
            MeasureReport r = make_report("tilde_M_slope");
            const Estimate slope{sxy / sxx, std::sqrt(1 / sxx), tilde.size(), 0};
            r.checks.push_back(at_least("d log tilde_M / d beta > -(2pi)^2/2", slope, -2 * M_PI * M_PI, 3));
            r.info = {{"slope", slope.mean}, {"slope_se", slope.se}, {"floor", -2 * M_PI * M_PI}};
            res.reports.push_back({"all betas", r});
        }
        break;
    }
    case Experiment::Decouple: {
        const double tol = cfg.get_real("decouple", "pythagoras_tol");
        const long gsw_n = cfg.get_int("decouple", "gsw_samples");
        const double gsw_rel = cfg.get_real("decouple", "gsw_rel");
        for (std::size_t bi = 0; bi < betas.size(); ++bi) {
            const double beta = betas[bi];
            std::vector<Stage> stages = {
                {"decouple-panel", [samples, tol](VillainChain& c) { return decouple_panel(c, samples, tol); }},
                {"energy-identity", [samples](VillainChain& c) { return energy_identity(c, samples); }},
                {"gsw-law", [=](VillainChain& c) { return gsw_law(c.state().lat, beta, gsw_n, gsw_rel, seed + bi); }},
            };
            run_chain_stages(cfg, opt, log, bi, beta, stages, res,
                             [&](const VillainChain& c, const fs::path& out) { save_state_snapshots(cfg, c, out, bi, true); });
        }
        break;
    }
    case Experiment::Wilson: {
        for (std::size_t bi = 0; bi < betas.size(); ++bi) {
            std::vector<Stage> stages;
            for (const std::string key : {"loops", "one_sided"})
                for (const auto& s : cfg.get_strings("wilson", key)) {
                    WilsonOptions w;
                    std::tie(w.L, w.H) = parse_loop(s);
                    w.margin = static_cast<int>(cfg.get_int("wilson", "margin"));
                    w.one_sided = key == std::string("one_sided");
                    w.rel_tol = cfg.get_real("wilson", "rel_tol");
                    w.max_placements = static_cast<std::size_t>(cfg.get_int("wilson", "max_placements"));
                    stages.push_back({"wilson " + s, [samples, w](VillainChain& c) { return wilson_experiment(c, samples, w); }});
                }
            run_chain_stages(cfg, opt, log, bi, betas[bi], stages, res,
                             [&](const VillainChain& c, const fs::path& out) { save_state_snapshots(cfg, c, out, bi, false); });
        }
        break;
    }
    case Experiment::FreeEnergy: {
        const double delta = cfg.get_real("free_energy", "delta");
        std::vector<std::pair<double, Estimate>> est;
        for (std::size_t bi = 0; bi < betas.size(); ++bi) {
            std::vector<Stage> stages = {{"free-energy", [samples, delta](VillainChain& c) { return free_energy_derivative(c, samples, delta); }}};
            run_chain_stages(cfg, opt, log, bi, betas[bi], stages, res,
                             [&](const VillainChain& c, const fs::path& out) { save_state_snapshots(cfg, c, out, bi, false); });
            est.push_back({betas[bi], entry_estimate(res.reports.back().report, "estimate", "se")});
        }
        if (est.size() >= 2) {
            std::sort(est.begin(), est.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
            MeasureReport r = make_report("free_energy_monotonicity");
            for (std::size_t i = 1; i < est.size(); ++i)
                r.checks.push_back(at_least("estimate(beta=" + num(est[i].first) + ") - estimate(beta=" + num(est[i - 1].first) + ") >= 0",
                                            diff(est[i].second, est[i - 1].second), 0.0, 3));
            res.reports.push_back({"all betas", r});
        }
        break;
    }
    case Experiment::CoulombSample: {
        const int p = static_cast<int>(cfg.get_int("chain", "p"));
        const long hist_max = cfg.get_int("coulomb", "hist_max");
        Table t;
        t.file = "coulomb_hist.csv";
        t.header = {"beta", "q_central", "count", "frequency"};
        for (std::size_t bi = 0; bi < betas.size(); ++bi) {
            const double beta = betas[bi];
            const fs::path stage = opt.out / "stages" / ("b" + std::to_string(bi) + "_coulomb.json");
            fs::create_directories(stage.parent_path());
            auto lat = make_lattice(spec);
            const auto central = static_cast<std::int32_t>(lat->index(central_cell(p + 2)));
            std::map<long, long> hist;
            if (opt.resume && fs::exists(stage)) {
                res.reports.push_back(report_from_json(read_text(stage)));
                const json j = json::parse(read_text(fs::path(stage.string() + ".hist")));
                for (const auto& kv : j.at("hist")) hist[kv.at(0).get<long>()] = kv.at(1).get<long>();
            } else {
                std::vector<double> qc, q2, charges;
                long neutral = 0;
                std::int64_t worst = 0;
                coulomb_sample(lat, p, cfg.chain(beta, static_cast<std::uint32_t>(bi)), samples, [&](const IntForm& q, long) {
                    const IntForm dq = d(q);
                    for (auto v : dq.values()) worst = std::max<std::int64_t>(worst, std::llabs(v));
                    const std::int64_t x = q[central];
                    qc.push_back(static_cast<double>(x));
                    ++hist[static_cast<long>(std::clamp<std::int64_t>(x, -hist_max - 1, hist_max + 1))];
                    double s2 = 0, nc = 0;
                    for (auto v : q.values()) {
                        s2 += static_cast<double>(v * v);
                        nc += v != 0;
                    }
                    q2.push_back(s2);
                    charges.push_back(nc);
                    neutral += nc == 0;
                });
                MeasureReport r = make_report("coulomb_sample");
                r.checks.push_back(exact("dq = 0 on every sample (max entry)", static_cast<double>(worst), 0, 0));
                r.checks.push_back(two_sided("E q(c) = 0 by the q -> -q symmetry", batch_means(qc), 0.0, 3));
                const Estimate e2 = batch_means(q2), ec = batch_means(charges);
                r.info = {{"P(q=0)", static_cast<double>(neutral) / static_cast<double>(samples)}, {"E|q|^2", e2.mean}, {"E|q|^2_se", e2.se},
                          {"E#charged_cells", ec.mean}, {"E#charged_cells_se", ec.se}};
                r.samples = samples;
                ReportEntry e{beta_scope(beta), r};
                json hj = json::array();
                for (const auto& [k, v] : hist) hj.push_back({k, v});
                write_text(stage.string() + ".hist", tagged(json{{"hist", hj}}.dump(), cfg.hash()) + "\n");
                write_text(stage, tagged(to_json(e), cfg.hash()) + "\n");
                res.reports.push_back(e);
                log(beta_scope(beta) + ": coulomb-sample -> " + to_string(r.verdict()));
            }
            for (const auto& [k, v] : hist)
                t.rows.push_back({num(beta), (std::abs(k) > hist_max ? (k < 0 ? "<=" : ">=") : "") + std::to_string(k), std::to_string(v),
                                  num(static_cast<double>(v) / static_cast<double>(samples))});
        }
        res.tables.push_back(t);
        break;
    }
    }

    // Reports.
    std::vector<std::vector<std::string>> rows, info_rows;
    json reports = json::array();
    for (const auto& e : res.reports) {
        for (const auto& c : e.report.checks)
            rows.push_back({to_string(cfg.experiment), e.scope, e.report.name, c.name, num(c.estimate), num(c.se), num(c.target), num(c.margin), c.tolerance,
                            to_string(c.verdict), c.note});
        for (const auto& [k, v] : e.report.info) info_rows.push_back({to_string(cfg.experiment), e.scope, e.report.name, k, num(v)});
        reports.push_back(json::parse(to_json(e)));
    }
    write_csv(opt.out / "results.csv", {"experiment", "scope", "report", "check", "estimate", "se", "target", "margin", "tolerance", "verdict", "note"}, rows, hash);
    write_csv(opt.out / "info.csv", {"experiment", "scope", "report", "key", "value"}, info_rows, hash);
    for (const auto& t : res.tables) write_csv(opt.out / t.file, t.header, t.rows, hash);
    json doc;
    doc["experiment"] = to_string(cfg.experiment);
    doc["config_hash"] = hash;
    doc["code_version"] = code_version();
    doc["config"] = cfg.resolved_text();
    doc["verdict"] = to_string(res.verdict());
    doc["reports"] = reports;
    write_text(opt.out / "report.json", doc.dump(2) + "\n");
    log("verdict " + to_string(res.verdict()));
    return res;
}

// ---------------------------------------------------------------- describe

namespace {

double sweep_seconds(const LatticeSpec& spec, int p)
{
    return 40e-9 * static_cast<double>(cell_count(spec, p, Boundary::Free) + cell_count(spec, p + 1, Boundary::Free));
}

std::string runtime(double seconds)
{
    std::ostringstream os;
    os << std::setprecision(2);
    if (seconds < 120)
        os << seconds << " s";
    else if (seconds < 7200)
        os << seconds / 60 << " min";
    else
        os << seconds / 3600 << " h";
    return os.str();
}

}  // namespace

std::string describe(Experiment e, const RunConfig& cfg)
{
    std::ostringstream os;
    os << "experiment: " << to_string(e) << "\n";
    const LatticeSpec spec = cfg.lattice();
    double seconds = 1;
    auto chain_cost = [&](double stages) {
        const int p = static_cast<int>(cfg.get_int("chain", "p"));
        double s = 0;
        for (double b : cfg.betas()) {
            const long burn = cfg.get_int("chain", "burn_in") < 0 ? static_cast<long>(std::ceil(50 * b)) : cfg.get_int("chain", "burn_in");
            s += (static_cast<double>(burn) + stages * static_cast<double>(cfg.get_int("chain", "samples") * cfg.get_int("chain", "thinning"))) *
                 sweep_seconds(spec, p);
        }
        return s;
    };
    switch (e) {
    case Experiment::CalculusCheck:
        os << "measures: d d = 0 and d* d* = 0 (ring d* under zero boundary) on random integer forms, adjointness <df,g> = -<f,d*g>\n"
              "  for integer forms (exact) and real forms (relative error < 1e-12), zero-boundary preservation, and the\n"
              "  cancellation of the boundary of a boundary on every cell.\n"
              "specs: "
           << (cfg.get_bool("calculus", "grid") ? "n = 2, 3, 4 x j = 1, 2 x {free, zero}" : spec.describe()) << "\n";
        seconds = cfg.get_bool("calculus", "grid") ? 5 : 1;
        break;
    case Experiment::Green:
        os << "measures:\n"
              "  - 1-form Green entries on "
           << spec.describe()
           << " from a CG solve: cross-direction entries = 0 and same-direction entries equal to\n"
              "    the direction-graph Green function, both within "
           << cfg.get_string("green", "entry_tol")
           << "\n"
              "  - exponent of the Z^n vertex Green function G(0, r e_1) for n in {"
           << cfg.get_string("green", "power_dims") << "}: -(n-2) within " << cfg.get_string("green", "power_tol")
           << "\n"
              "  - c_gff stability across truncations K in {"
           << cfg.get_string("green", "cgff_K") << "} within " << cfg.get_string("green", "cgff_tol")
           << "\n"
              "  - loop energy |P 1_R|^2 of L x L loops, L in {"
           << cfg.get_string("green", "loop_sizes") << "}, margin L: slope against L + H equal to 2 c_gff = " << 2 * c_gff() << " within "
           << cfg.get_real("green", "slope_tol") * 100 << "%\n";
        seconds = 10;
        break;
    case Experiment::Ranks:
        os << "measures: dimensions of the images of d and d* on " << spec.describe()
           << "; lower + upper = #cells for 0 < k < n; agreement with the alternating cell counts; for n = 4 cubes the closed forms\n"
              "  (2j+1)^4 - 1, (2j+1)^3 (6j-1) + 1, (2j)^3 (6j+4), (2j)^4 (free) and (2j-1)^4, (2j-1)^3 (6j+1), (2j)^3 (6j-4) + 1, (2j)^4 - 1 (zero).\n"
              "output: ranks.csv, one row per degree k.\n";
        seconds = spec.half_side() <= 2 ? 10 : 120;
        break;
    case Experiment::IvgTable:
        os << "measures: Var(a, beta) >= e^{-beta(1-2a)/2}/16 for beta in (" << cfg.get_string("ivg", "i_beta_min") << ", " << cfg.get_string("ivg", "i_beta_max")
           << "], a in [0, 1/2], and M(beta) >= 2 beta e^{-(2pi)^2 beta/2} for beta in [" << cfg.get_string("ivg", "iii_beta_min") << ", "
           << cfg.get_string("ivg", "iii_beta_max") << "], grid step " << cfg.get_string("ivg", "step")
           << "; zero violations allowed.\n"
              "output: ivg_table.csv with moments, M(beta) and the grid value of K_beta.\n";
        seconds = 10;
        break;
    case Experiment::Villain:
        os << "chain: joint (theta, m) Gibbs sampler on " << spec.describe() << ", betas {" << cfg.get_string("chain", "betas") << "}, "
           << cfg.get_int("chain", "samples")
           << " samples per stage\n"
              "stages (one-sided checks within 3 s.e.):\n"
              "  energy-identity: E|dtheta + 2pi m|^2 - (2pi)^2 E<q,(-Delta)^-1 q> = dim/beta (two-sided, 3 s.e.)\n"
              "  tilde-m: tilde_M on a bulk face >= inf_a Var(a, (2pi)^2 beta)\n"
              "  fourier-m: |E e^{i<m,h>}| <= exp(-((1 - bK)/2) inf_a Var <h_b, h_b>), h = "
           << cfg.get_string("villain", "fourier_scale") << " on " << cfg.get_int("villain", "fourier_faces") << " bulk faces, b = " << cfg.get_string("villain", "truncation")
           << "\n"
              "  coulomb-variance: E<q,h>^2 >= sum_f tilde_M(f) (d*h)(f)^2 for h the indicator of a bulk 3-cell\n"
              "  factorization: E e^{i<dtheta,f>} = exp(-|Pf|^2/(2 beta)) E e^{2pi i <m, Upper f>} (3 s.e.)\n"
              "  across betas: slope of log tilde_M in beta above -(2pi)^2/2\n";
        seconds = chain_cost(static_cast<double>(cfg.get_strings("villain", "measurements").size()));
        break;
    case Experiment::Decouple:
        os << "chain on " << spec.describe() << ", betas {" << cfg.get_string("chain", "betas")
           << "}\n"
              "stages:\n"
              "  decouple-panel: per-sample |F|^2 = |rho|^2 + (2pi)^2 <q,(-Delta)^-1 q> within "
           << cfg.get_string("decouple", "pythagoras_tol")
           << " relative; 20 correlations between\n"
              "    functionals of rho and of q equal to 0 within 3 s.e.; normality of rho functionals at the 1% level\n"
              "  energy-identity: as in the villain experiment\n"
              "  gsw-law: Var<rho, f> = |Pf|^2/beta on a 5-form panel (3 s.e.), bulk-face variance = 1/(2 beta) within "
           << cfg.get_real("decouple", "gsw_rel") * 100 << "% + 3 s.e.\n";
        seconds = chain_cost(2) * 3;
        break;
    case Experiment::Wilson:
        os << "chain on " << spec.describe() << ", betas {" << cfg.get_string("chain", "betas")
           << "}; Wilson loops averaged over every placement with margin >= max(L, H)\n"
              "  two-sided loops {"
           << cfg.get_string("wilson", "loops") << "}: E W = exp(-loop_energy/(2 beta)) within 3 s.e. and within " << cfg.get_real("wilson", "rel_tol") * 100
           << "% (spin-wave value of the non-degenerate regime)\n"
              "  one-sided loops {"
           << cfg.get_string("wilson", "one_sided")
           << "}: E W <= exp(-loop_energy/(2 beta)) + 3 s.e. (McBryan-Spencer bound)\n"
              "  every loop: Im E W = 0 within 3 s.e. and Re E W >= 0; the multiplicative improvement (1 + K M(beta)) is reported as the\n"
              "  gap -2 beta log E W - loop_energy, not asserted. Targets below 5 s.e. are reported as inconclusive.\n";
        seconds = chain_cost(static_cast<double>(cfg.get_strings("wilson", "loops").size() + cfg.get_strings("wilson", "one_sided").size())) + 30;
        break;
    case Experiment::FreeEnergy:
        os << "chain on " << spec.describe() << ", betas {" << cfg.get_string("chain", "betas")
           << "}\n"
              "  estimate -(1/(8 vol)) E|dtheta + 2pi m|^2 of (1/(4 vol)) d/dbeta log Z, one-sided against the rank-corrected\n"
              "  spin-wave floor -dim/(8 vol beta) within 3 s.e.; the upper bound -(3/4)(1/(2 beta) + e^{-pi^2 (beta + delta)}/2) with delta = "
           << cfg.get_string("free_energy", "delta")
           << "\n"
              "  is reported, and the estimate must increase with beta (3 s.e.).\n";
        seconds = chain_cost(1);
        break;
    case Experiment::CoulombSample:
        os << "chain of degree p = " << cfg.get_int("chain", "p") << " on " << spec.describe()
           << " emitting q = dm; checks dq = 0 exactly and E q(c) = 0 (3 s.e.);\n"
              "  reports P(q = 0), E|q|^2 and the charge histogram on the central cell (coulomb_hist.csv).\n";
        seconds = chain_cost(1);
        break;
    }
    os << "estimated runtime: " << runtime(seconds) << " (single thread)\n";
    return os.str();
}

}  // namespace villain
