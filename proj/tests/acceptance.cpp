// Acceptance run: one PASS or FAIL line per criterion. Tolerances, sample
// counts and runtime limits are fixed here. Exit status is 0 only when every
// criterion passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "coulomb_oracle.hpp"
#include "oracles.hpp"
#include "villain/experiments.hpp"

using namespace villain;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    int id;
    std::string title;
    double limit_s;  // 0 means no runtime limit
    std::function<Outcome()> body;
};

std::string fmt(double x, int prec = 4)
{
    std::ostringstream os;
    os.precision(prec);
    os << x;
    return os.str();
}

struct Tally {
    long pass = 0, fail = 0, inc = 0;
    std::vector<std::string> bad;
    void add(const std::string& scope, const MeasureReport& r)
    {
        for (const auto& c : r.checks) {
            pass += c.verdict == Verdict::Pass;
            fail += c.verdict == Verdict::Fail;
            inc += c.verdict == Verdict::Inconclusive;
            if (c.verdict != Verdict::Pass && bad.size() < 3) bad.push_back(to_string(c.verdict) + " [" + scope + "] " + r.name + ": " + c.name);
        }
    }
    bool all_pass() const { return fail == 0 && inc == 0 && pass > 0; }
    std::string summary() const
    {
        std::string s = std::to_string(pass) + " pass, " + std::to_string(fail) + " fail, " + std::to_string(inc) + " inconclusive";
        for (const auto& b : bad) s += "; " + b;
        return s;
    }
};

const fs::path& scratch()
{
    static const fs::path p = fs::temp_directory_path() / ("villain_acceptance_" + std::to_string(::getpid()));
    return p;
}

ExperimentResult run_config(const std::string& text, const std::string& name)
{
    RunConfig cfg = RunConfig::parse(text);
    cfg.validate();
    RunOptions opt;
    opt.out = scratch() / name;
    return run_experiment(cfg, opt);
}

const Check* find_check(const MeasureReport& r, const std::string& prefix)
{
    for (const auto& c : r.checks)
        if (c.name.rfind(prefix, 0) == 0) return &c;
    return nullptr;
}

// ---------------------------------------------------------------- criteria

Outcome c1_calculus()
{
    const auto res = run_config("[run]\nexperiment = calculus-check\nseed = 1\n[calculus]\ngrid = true\ntrials = 2\n", "c1");
    Tally t;
    for (const auto& e : res.reports) t.add(e.scope, e.report);
    return {t.all_pass(), "n in {2,3,4} x j in {1,2} x {free, zero}: " + t.summary()};
}

Outcome c2_ranks()
{
    Tally t;
    long closed_forms = 0;
    for (int j : {1, 2})
        for (Boundary b : {Boundary::Free, Boundary::Zero}) {
            const LatticeSpec spec = LatticeSpec::cube(4, j, b);
            const MeasureReport r = rank_report(spec, false);
            for (const auto& c : r.checks) closed_forms += c.name.rfind("dim P_", 0) == 0;
            t.add(spec.describe(), r);
        }
    const bool ok = t.all_pass() && closed_forms == 16;
    return {ok, "closed-form entries checked: " + std::to_string(closed_forms) + " of 16; " + t.summary()};
}

Outcome c3_green()
{
    Tally t;
    for (Boundary b : {Boundary::Free, Boundary::Zero}) {
        const LatticeSpec spec = LatticeSpec::cube(4, 2, b);
        t.add(spec.describe(), green_entries(spec, 12, 1e-10, 1));
    }
    std::string exps;
    for (int n : {3, 4}) {
        const MeasureReport r = green_power_law(n, {8, 12, 16, 24, 32}, 0.05);
        t.add("n=" + std::to_string(n), r);
        if (!r.checks.empty()) exps += " n=" + std::to_string(n) + ": " + fmt(r.checks[0].estimate);
    }
    return {t.all_pass(), "exponents" + exps + "; " + t.summary()};
}

Outcome c4_cgff()
{
    Tally t;
    const MeasureReport s = cgff_stability({64, 128}, 1e-6);
    t.add("c_gff", s);
    const MeasureReport l = loop_slope(4, Mode::Zero, {16, 24, 32}, 0.03);
    t.add("slope", l);
    std::string d = "c_gff = " + fmt(c_gff(), 12);
    if (!l.checks.empty()) d += ", slope " + fmt(l.checks[0].estimate, 6) + " vs 2 c_gff " + fmt(2 * c_gff(), 6);
    return {t.all_pass(), d + "; " + t.summary()};
}

Outcome c5_ivg()
{
    Tally t;
    const MeasureReport r = ivg_bounds(10, 40, 1.0 / 3, 2, 0.01);
    t.add("grid", r);
    double viol = 0;
    for (const auto& c : r.checks)
        if (c.name.find("violations") != std::string::npos) viol += c.estimate;
    return {t.all_pass() && viol == 0, "violations " + fmt(viol) + "; " + t.summary()};
}

double wrap(double x) { return x - 2 * M_PI * std::floor((x + M_PI) / (2 * M_PI)); }

Outcome c6_sampler()
{
    const long sweeps = 1000000;
    int pass = 0, total = 0;
    std::string worst;
    double worst_z = 0;
    auto close = [&](const std::string& what, const Estimate& e, double target) {
        const double z = e.se > 0 ? std::abs(e.mean - target) / e.se : (e.mean == target ? 0.0 : INFINITY);
        ++total;
        pass += z <= 3.0;
        if (z > worst_z) worst_z = z, worst = what;
    };
    for (double beta : {0.5, 1.0, 4.0}) {
        const std::string tag = "beta=" + fmt(beta) + " ";
        {
            const auto o = oracle::single_plaquette(beta);
            auto lat = make_lattice(LatticeSpec::box({0, 0}, {1, 1}, Boundary::Free));
            ChainConfig cfg;
            cfg.beta = beta;
            cfg.seed = 101;
            cfg.burn_in = 1000;
            VillainChain chain(lat, 1, cfg);
            std::vector<double> p1, p2, p4, m1, m2;
            chain.run(sweeps, [&](const VillainState& s, long) {
                const double phi = wrap(d(s.theta)[0]);
                p1.push_back(phi);
                p2.push_back(phi * phi);
                p4.push_back(phi * phi * phi * phi);
                m1.push_back(static_cast<double>(s.m[0]));
                m2.push_back(static_cast<double>(s.m[0] * s.m[0]));
            });
            close(tag + "plaquette mean", batch_means(p1), 0.0);
            close(tag + "plaquette variance", batch_means(p2), o.phi2);
            close(tag + "plaquette fourth moment", batch_means(p4), o.phi4);
            close(tag + "plaquette m mean", batch_means(m1), 0.0);
            close(tag + "plaquette m^2", batch_means(m2), o.m2);
        }
        {
            auto lat = make_lattice(LatticeSpec::box({0, 0}, {2, 1}, Boundary::Free));
            int sigma = 0;
            const auto& ptr = lat->cob_ptr(1);
            for (std::size_t e = 0; e < lat->count(1); ++e)
                if (ptr[e + 1] - ptr[e] == 2) sigma = lat->cob_sign(1)[ptr[e]] * lat->cob_sign(1)[ptr[e] + 1];
            const double target = oracle::two_plaquette_m1m2(beta, sigma);
            const auto o = oracle::single_plaquette(beta);
            ChainConfig cfg;
            cfg.beta = beta;
            cfg.seed = 202;
            cfg.burn_in = 1000;
            VillainChain chain(lat, 1, cfg);
            std::vector<double> mm, m0, p2;
            chain.run(sweeps, [&](const VillainState& s, long) {
                mm.push_back(static_cast<double>(s.m[0] * s.m[1]));
                m0.push_back(static_cast<double>(s.m[0]));
                const double phi = wrap(d(s.theta)[0]);
                p2.push_back(phi * phi);
            });
            close(tag + "two plaquettes m1 m2", batch_means(mm), target);
            close(tag + "two plaquettes m mean", batch_means(m0), 0.0);
            // Each plaquette of the pair has the single-plaquette dtheta law.
            close(tag + "two plaquettes variance", batch_means(p2), o.phi2);
        }
    }
    return {pass == total, std::to_string(pass) + "/" + std::to_string(total) + " moments within 3 s.e. at 1e6 sweeps; largest |z| " + fmt(worst_z, 3) + " (" + worst + ")"};
}

Outcome c7_decouple()
{
    const auto res = run_config(
        "[run]\nexperiment = decouple\nseed = 3\n[lattice]\nn = 4\nj = 2\nboundary = zero\n"
        "[chain]\nbetas = 1, 4\nsamples = 100000\n[decouple]\npythagoras_tol = 1e-8\ngsw_samples = 20000\n",
        "c7");
    Tally at1, at4;
    bool pyth1 = false, pyth4 = false, ident1 = false, ident4 = false;
    long degenerate4 = 0;
    for (const auto& e : res.reports) {
        const bool one = e.scope == "beta=1";
        (one ? at1 : at4).add(e.scope, e.report);
        if (e.report.name == "decouple") {
            const Check* p = find_check(e.report, "|F|^2 = |rho|^2");
            (one ? pyth1 : pyth4) = p && p->verdict == Verdict::Pass;
            if (!one)
                for (const auto& c : e.report.checks) degenerate4 += c.note == "degenerate series";
        }
        if (e.report.name == "energy_identity") (one ? ident1 : ident4) = e.report.verdict() == Verdict::Pass;
    }
    // Without a single charge at beta = 4 the q functionals are constant and
    // their correlations undefined; independence is then read off beta = 1.
    const bool ok = at1.all_pass() && at4.fail == 0 && at4.inc == degenerate4 && pyth1 && pyth4 && ident1 && ident4;
    return {ok, "beta=1: " + at1.summary() + "; beta=4: " + at4.summary() + " (" + std::to_string(degenerate4) + " correlations with a charge-free q)"};
}

Outcome c8_coulomb()
{
    auto lat = make_lattice(LatticeSpec::cube(4, 1, Boundary::Zero));
    const double beta = 0.5;
    const auto law = oracle::coulomb_law(*lat, 1, beta, 3.0, 3);
    ChainConfig cfg;
    cfg.beta = beta;
    cfg.seed = 808;
    const long n = 1000000;
    std::map<std::vector<std::int64_t>, long> hist;
    coulomb_sample(lat, 1, cfg, n, [&](const IntForm& q, long) {
        std::vector<std::int64_t> key;
        key.reserve(law.dofs.size());
        for (auto c : law.dofs) key.push_back(q[c]);
        ++hist[key];
    });
    const double tv = oracle::coulomb_tv(law, hist, n);
    const bool ok = tv < 0.02 && law.tail_bound < 1e-4;
    return {ok, "TV " + fmt(tv, 3) + " (limit 0.02, iid floor " + fmt(oracle::coulomb_tv_floor(law, static_cast<double>(n)), 3) + "), truncation mass bound " +
                    fmt(law.tail_bound, 3) + " (limit 1e-4), " + std::to_string(law.states.size()) + " charge states, lattice rank " + std::to_string(law.rank)};
}

Outcome c9_gsw()
{
    Tally t;
    const MeasureReport r = gsw_law(make_lattice(LatticeSpec::cube(4, 4, Boundary::Zero)), 1.0, 20000, 0.02, 909);
    t.add("beta=1", r);
    const Check* bulk = find_check(r, "bulk face variance");
    std::string d = t.summary();
    if (bulk) d = "bulk variance " + fmt(bulk->estimate) + " +- " + fmt(bulk->se, 2) + " vs 1/(2 beta) = 0.5; " + d;
    return {t.all_pass(), d};
}

Outcome c10_wilson()
{
    const auto res = run_config(
        "[run]\nexperiment = wilson\nseed = 11\n[lattice]\nn = 4\nj = 8\nboundary = zero\n"
        "[chain]\nbetas = 4\nsamples = 4000\n[wilson]\nloops = 3x3\none_sided = 5x5\nrel_tol = 0.1\n",
        "c10");
    Tally t;
    std::string d;
    for (const auto& e : res.reports) {
        t.add(e.scope, e.report);
        for (const auto& c : e.report.checks) d += e.report.name + " " + fmt(c.estimate) + " vs " + fmt(c.target) + "; ";
    }
    return {t.all_pass(), d + t.summary()};
}

Outcome c11_fourier()
{
    const auto res = run_config(
        "[run]\nexperiment = villain\nseed = 5\n[lattice]\nn = 4\nj = 2\nboundary = zero\n"
        "[chain]\nbetas = 1\nsamples = 20000\n[villain]\nmeasurements = fourier-m\nfourier_faces = 10\nfourier_scale = 0.3\ntruncation = 0.5\n",
        "c11");
    Tally t;
    std::string d;
    for (const auto& e : res.reports) {
        t.add(e.scope, e.report);
        if (e.report.name == "fourier_m" && !e.report.checks.empty())
            d = "|E e^{i<m,h>}| " + fmt(e.report.checks[0].estimate) + " vs bound " + fmt(e.report.checks[0].target) + "; ";
    }
    return {t.all_pass(), d + t.summary()};
}

Outcome c12_trapping()
{
    const int L = 128, margin = 128;
    const int j = (L + 2 * margin + 1) / 2;
    const LatticeSpec spec = LatticeSpec::cube(3, j, Boundary::Zero);
    std::vector<double> x, y;
    for (int H : {4, 8, 16, 32}) {
        const RectLoop loop = RectLoop::centered(spec, L, H);
        loop.validate(spec, margin);
        x.push_back(std::log(static_cast<double>(H)));
        y.push_back(loop_energy(loop, spec, Mode::Zero));
    }
    const auto fit = oracle::linear_fit(x, y);
    std::string d = "L = 128, H in {4,8,16,32}: energies";
    for (double v : y) d += " " + fmt(v);
    return {fit.r >= 0.99, d + "; slope in log H " + fmt(fit.slope) + ", correlation " + fmt(fit.r, 5) + " (limit 0.99)"};
}

Outcome c13_free_energy()
{
    const auto res = run_config(
        "[run]\nexperiment = free-energy\nseed = 13\n[lattice]\nn = 4\nj = 4\nboundary = zero\n"
        "[chain]\nbetas = 1, 2, 4\nsamples = 2000\n[free_energy]\ndelta = 0.5\n",
        "c13");
    Tally t;
    std::string d;
    for (const auto& e : res.reports) {
        t.add(e.scope, e.report);
        if (e.scope == "beta=2" && e.report.name == "free_energy_derivative" && !e.report.checks.empty())
            d = "beta=2: " + fmt(e.report.checks[0].estimate, 6) + " vs floor " + fmt(e.report.checks[0].target, 6) + "; ";
    }
    return {t.all_pass(), d + t.summary()};
}

}  // namespace

// Optional arguments select criteria by number, e.g. `acceptance 6 12`.
int main(int argc, char** argv)
{
    std::vector<int> only;
    for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
    const std::vector<Criterion> criteria = {
        {1, "exact calculus suite", 10, c1_calculus},
        {2, "dimension table", 60, c2_ranks},
        {3, "Green structure and power law", 0, c3_green},
        {4, "C_GFF stability and loop-energy slope", 600, c4_cgff},
        {5, "IV-Gaussian bounds", 60, c5_ivg},
        {6, "sampler exactness oracle", 300, c6_sampler},
        {7, "decoupling identity", 0, c7_decouple},
        {8, "Coulomb law oracle", 900, c8_coulomb},
        {9, "GSW law", 0, c9_gsw},
        {10, "Wilson regime check", 7200, c10_wilson},
        {11, "Fourier bound", 0, c11_fourier},
        {12, "3d quark trapping", 0, c12_trapping},
        {13, "free energy", 0, c13_free_energy},
    };
    // The lines also go to acceptance_results.txt, since ctest hides the
    // output of passing tests.
    std::ofstream record("acceptance_results.txt");
    auto emit = [&](const std::string& line) {
        std::cout << line << std::flush;
        record << line << std::flush;
    };
    emit("acceptance, code version " + std::string(code_version()) + "\n");
    int failed = 0;
    for (const auto& c : criteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.body();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::string timing = fmt(secs, 3) + " s";
        if (c.limit_s > 0) {
            timing += " (limit " + fmt(c.limit_s) + " s)";
            if (secs > c.limit_s) {
                o.pass = false;
                o.detail += "; over the runtime limit";
            }
        }
        failed += !o.pass;
        emit("C" + std::to_string(c.id) + (c.id < 10 ? "  " : " ") + (o.pass ? "PASS" : "FAIL") + "  " + c.title + ": " + o.detail + "; " + timing + "\n");
    }
    fs::remove_all(scratch());
    emit(failed == 0 ? "all criteria pass\n" : std::to_string(failed) + " criteria fail\n");
    return failed == 0 ? 0 : 1;
}
