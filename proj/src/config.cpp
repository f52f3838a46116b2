#include "villain/config.hpp"

#include <algorithm>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "villain/harmonic.hpp"

#ifndef VILLAIN_VERSION
#define VILLAIN_VERSION "0.0.0"
#endif

namespace villain {

const char* code_version() { return VILLAIN_VERSION; }

std::uint64_t fnv1a64(std::string_view s)
{
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string hex64(std::uint64_t h)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace {

struct ExperimentName {
    Experiment e;
    const char* name;
    const char* section;
};

constexpr ExperimentName kNames[] = {
    {Experiment::CalculusCheck, "calculus-check", "calculus"},
    {Experiment::Green, "green", "green"},
    {Experiment::Ranks, "ranks", "ranks"},
    {Experiment::Villain, "villain", "villain"},
    {Experiment::Decouple, "decouple", "decouple"},
    {Experiment::Wilson, "wilson", "wilson"},
    {Experiment::FreeEnergy, "free-energy", "free_energy"},
    {Experiment::CoulombSample, "coulomb-sample", "coulomb"},
    {Experiment::IvgTable, "ivg-table", "ivg"},
};

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s)
{
    std::vector<std::string> out;
    if (trim(s).empty()) return out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(trim(item));
    return out;
}

std::string join(const std::vector<std::string>& v)
{
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i];
    return s;
}

std::string canon_real(double x)
{
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, r.ptr);
}

bool parse_long(const std::string& s, long& v)
{
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    return r.ec == std::errc() && r.ptr == s.data() + s.size();
}

bool parse_real(const std::string& s, double& v)
{
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    return r.ec == std::errc() && r.ptr == s.data() + s.size() && std::isfinite(v);
}

bool parse_bool(std::string s, bool& v)
{
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    if (s == "true" || s == "yes" || s == "on" || s == "1") return v = true, true;
    if (s == "false" || s == "no" || s == "off" || s == "0") return v = false, true;
    return false;
}

// Canonical text of a value, or throws naming the key.
std::string canonical(const KeySchema& k, const std::string& raw)
{
    const std::string name = k.section + "." + k.key;
    const std::string s = trim(raw);
    auto bad = [&](const std::string& what) { return ConfigError(name, "expected " + what + ", got '" + s + "'"); };
    switch (k.type) {
    case ValueType::Int: {
        long v;
        if (!parse_long(s, v)) throw bad("an integer");
        return std::to_string(v);
    }
    case ValueType::Real: {
        double v;
        if (!parse_real(s, v)) throw bad("a number");
        return canon_real(v);
    }
    case ValueType::Bool: {
        bool v;
        if (!parse_bool(s, v)) throw bad("true or false");
        return v ? "true" : "false";
    }
    case ValueType::String:
        return s;
    case ValueType::IntList: {
        std::vector<std::string> out;
        for (const auto& x : split_list(s)) {
            long v;
            if (!parse_long(x, v)) throw bad("a comma-separated list of integers");
            out.push_back(std::to_string(v));
        }
        return join(out);
    }
    case ValueType::RealList: {
        std::vector<std::string> out;
        for (const auto& x : split_list(s)) {
            double v;
            if (!parse_real(x, v)) throw bad("a comma-separated list of numbers");
            out.push_back(canon_real(v));
        }
        return join(out);
    }
    case ValueType::StringList:
        return join(split_list(s));
    }
    return s;
}

using VT = ValueType;

std::vector<KeySchema> experiment_keys(Experiment e)
{
    switch (e) {
    case Experiment::CalculusCheck:
        return {{"calculus", "grid", VT::Bool, "true", "check every box in n = 2,3,4, j = 1,2, both modes (false: the [lattice] box only)"},
                {"calculus", "trials", VT::Int, "2", "random forms per degree"}};
    case Experiment::Green:
        return {{"green", "entry_pairs", VT::Int, "12", "edge pairs compared on the [lattice] box"},
                {"green", "entry_tol", VT::Real, "1e-10", "tolerance of the entry checks"},
                {"green", "power_dims", VT::IntList, "3,4", "dimensions of the Z^n power-law fit"},
                {"green", "power_radii", VT::IntList, "8,12,16,24,32", "distances of the power-law fit"},
                {"green", "power_tol", VT::Real, "0.05", "allowed deviation of the exponent from -(n-2)"},
                {"green", "cgff_K", VT::IntList, "64,128", "truncations compared for c_gff"},
                {"green", "cgff_tol", VT::Real, "1e-6", "c_gff stability tolerance"},
                {"green", "loop_sizes", VT::IntList, "16,24,32", "square loops L = H for the perimeter slope, margin L"},
                {"green", "slope_tol", VT::Real, "0.03", "relative tolerance of the slope against 2 c_gff"}};
    case Experiment::Ranks:
        return {{"ranks", "exact", VT::Bool, "false", "exact ranks modulo a prime instead of eigenvalue gaps"}};
    case Experiment::Villain:
        return {{"villain", "measurements", VT::StringList, "energy-identity,tilde-m,fourier-m,coulomb-variance,factorization", "stages run per beta"},
                {"villain", "fourier_faces", VT::Int, "10", "bulk faces in the Fourier test form"},
                {"villain", "fourier_scale", VT::Real, "0.3", "value of the Fourier test form on its faces"},
                {"villain", "truncation", VT::Real, "0.5", "truncation level b of the Fourier bound"}};
    case Experiment::Decouple:
        return {{"decouple", "pythagoras_tol", VT::Real, "1e-8", "relative tolerance of the per-sample energy split"},
                {"decouple", "gsw_samples", VT::Int, "20000", "gradient spin-wave draws for the variance panel"},
                {"decouple", "gsw_rel", VT::Real, "0.02", "relative slack of the bulk-face variance against 1/(2 beta)"}};
    case Experiment::Wilson:
        return {{"wilson", "loops", VT::StringList, "3x3", "loops LxH compared two-sidedly with exp(-E/(2 beta))"},
                {"wilson", "one_sided", VT::StringList, "", "loops LxH checked against the upper bound only"},
                {"wilson", "margin", VT::Int, "-1", "distance from R to the boundary, -1 for max(L, H)"},
                {"wilson", "allow_tight_margin", VT::Bool, "false", "permit margins below max(L, H)"},
                {"wilson", "rel_tol", VT::Real, "0.1", "relative tolerance of the two-sided check"},
                {"wilson", "max_placements", VT::Int, "0", "cap on the placement panel, 0 for all"}};
    case Experiment::FreeEnergy:
        return {{"free_energy", "delta", VT::Real, "0.5", "delta in the reported upper bound"}};
    case Experiment::CoulombSample:
        return {{"coulomb", "hist_max", VT::Int, "4", "largest |q| tabulated on the central cell"}};
    case Experiment::IvgTable:
        return {{"ivg", "i_beta_min", VT::Real, "10", "variance bound grid: beta in (i_beta_min, i_beta_max]"},
                {"ivg", "i_beta_max", VT::Real, "40", ""},
                {"ivg", "iii_beta_min", VT::Real, canon_real(1.0 / 3), "error-function bound grid: beta in [iii_beta_min, iii_beta_max]"},
                {"ivg", "iii_beta_max", VT::Real, "2", ""},
                {"ivg", "step", VT::Real, "0.01", "grid step in beta and a"},
                {"ivg", "table_betas", VT::RealList, "0.5,1,2,4,8", "rows of the moment table"},
                {"ivg", "table_a", VT::RealList, "0,0.1,0.2,0.3,0.4,0.5", "centres of the moment table"}};
    }
    return {};
}

}  // namespace

std::string to_string(Experiment e)
{
    for (const auto& n : kNames)
        if (n.e == e) return n.name;
    return "?";
}

Experiment experiment_from_string(const std::string& s)
{
    for (const auto& n : kNames)
        if (s == n.name) return n.e;
    std::string known;
    for (const auto& n : kNames) known += std::string(known.empty() ? "" : ", ") + n.name;
    throw ConfigError("run.experiment", "unknown experiment '" + s + "' (known: " + known + ")");
}

const std::vector<Experiment>& all_experiments()
{
    static const std::vector<Experiment> all = [] {
        std::vector<Experiment> v;
        for (const auto& n : kNames) v.push_back(n.e);
        return v;
    }();
    return all;
}

bool uses_chain(Experiment e)
{
    return e == Experiment::Villain || e == Experiment::Decouple || e == Experiment::Wilson || e == Experiment::FreeEnergy ||
           e == Experiment::CoulombSample;
}

std::string section_for(Experiment e)
{
    for (const auto& n : kNames)
        if (n.e == e) return n.section;
    return "";
}

std::vector<KeySchema> schema_for(Experiment e)
{
    std::vector<KeySchema> s = {
        {"run", "experiment", VT::String, to_string(e), "experiment name"},
        {"run", "seed", VT::Int, "1", "master seed"},
        {"run", "threads", VT::Int, "1", "OpenMP threads (not hashed)"},
        {"run", "out", VT::String, "", "output directory (not hashed)"},
        {"run", "max_memory_mb", VT::Int, "4000", "refuse boxes whose estimated footprint exceeds this"},
        {"lattice", "n", VT::Int, "4", "dimension"},
        {"lattice", "j", VT::Int, "2", "half side: the box is [-j, j]^n"},
        {"lattice", "boundary", VT::String, "zero", "free or zero"},
    };
    if (uses_chain(e)) {
        const std::vector<KeySchema> chain = {
            {"chain", "p", VT::Int, "1", "degree of theta (1 for gauge theory, n-2 for the n-form Coulomb gas)"},
            {"chain", "betas", VT::RealList, "1", "inverse temperatures, one chain each"},
            {"chain", "samples", VT::Int, "10000", "thinned samples per measurement stage"},
            {"chain", "burn_in", VT::Int, "-1", "burn-in sweeps, -1 for ceil(50 beta)"},
            {"chain", "thinning", VT::Int, "1", "sweeps between samples"},
            {"chain", "theta_move", VT::String, "lifted", "lifted or truncated"},
        };
        s.insert(s.end(), chain.begin(), chain.end());
    }
    const auto own = experiment_keys(e);
    s.insert(s.end(), own.begin(), own.end());
    return s;
}

const KeySchema& RunConfig::find(const std::string& section, const std::string& key) const
{
    bool section_known = false;
    for (const auto& k : schema_) {
        if (k.section != section) continue;
        section_known = true;
        if (k.key == key) return k;
    }
    if (!section_known)
        throw ConfigError(section + "." + key, "section [" + section + "] is not accepted by experiment " + to_string(experiment));
    throw ConfigError(section + "." + key, "unknown key");
}

RunConfig RunConfig::defaults(Experiment e)
{
    RunConfig c;
    c.experiment = e;
    c.schema_ = schema_for(e);
    for (const auto& k : c.schema_) c.values_[k.section][k.key] = k.fallback;
    return c;
}

void RunConfig::set(const std::string& section, const std::string& key, const std::string& value)
{
    const KeySchema& k = find(section, key);
    if (section == "run" && key == "experiment") {
        if (trim(value) != to_string(experiment)) throw ConfigError("run.experiment", "cannot change the experiment of a resolved config");
        return;
    }
    values_[section][key] = canonical(k, value);
}

bool RunConfig::has(const std::string& section, const std::string& key) const
{
    const auto it = values_.find(section);
    return it != values_.end() && it->second.count(key);
}

RunConfig RunConfig::parse(const std::string& text)
{
    // '#' and ';' both start comment lines.
    std::stringstream in(text), cleaned;
    std::string line;
    while (std::getline(in, line)) {
        const std::string t = trim(line);
        if (!t.empty() && t[0] == '#') continue;
        cleaned << line << "\n";
    }
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::ini_parser::read_ini(cleaned, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError("", std::string("malformed config: ") + e.message() + " (line " + std::to_string(e.line()) + ")");
    }
    for (const auto& [name, sub] : tree)
        if (sub.empty() && !sub.data().empty()) throw ConfigError(name, "key outside any section");
    const auto run = tree.get_child_optional("run");
    if (!run || !run->get_optional<std::string>("experiment")) throw ConfigError("run.experiment", "missing");
    RunConfig c = defaults(experiment_from_string(trim(run->get<std::string>("experiment"))));
    for (const auto& [section, sub] : tree)
        for (const auto& [key, value] : sub) {
            if (!value.empty()) throw ConfigError(section + "." + key, "nested keys are not supported");
            c.set(section, key, value.data());
        }
    c.validate();
    return c;
}

RunConfig RunConfig::load(const std::string& path)
{
    std::ifstream is(path);
    if (!is) throw ConfigError("", "cannot read config " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return parse(ss.str());
}

long RunConfig::get_int(const std::string& section, const std::string& key) const
{
    find(section, key);
    long v = 0;
    parse_long(values_.at(section).at(key), v);
    return v;
}

double RunConfig::get_real(const std::string& section, const std::string& key) const
{
    find(section, key);
    double v = 0;
    parse_real(values_.at(section).at(key), v);
    return v;
}

bool RunConfig::get_bool(const std::string& section, const std::string& key) const
{
    find(section, key);
    return values_.at(section).at(key) == "true";
}

std::string RunConfig::get_string(const std::string& section, const std::string& key) const
{
    find(section, key);
    return values_.at(section).at(key);
}

std::vector<long> RunConfig::get_ints(const std::string& section, const std::string& key) const
{
    std::vector<long> out;
    for (const auto& s : get_strings(section, key)) {
        long v = 0;
        parse_long(s, v);
        out.push_back(v);
    }
    return out;
}

std::vector<double> RunConfig::get_reals(const std::string& section, const std::string& key) const
{
    std::vector<double> out;
    for (const auto& s : get_strings(section, key)) {
        double v = 0;
        parse_real(s, v);
        out.push_back(v);
    }
    return out;
}

std::vector<std::string> RunConfig::get_strings(const std::string& section, const std::string& key) const
{
    return split_list(get_string(section, key));
}

LatticeSpec RunConfig::lattice() const
{
    Boundary b;
    try {
        b = boundary_from_string(get_string("lattice", "boundary"));
    } catch (const std::exception&) {
        throw ConfigError("lattice.boundary", "expected free or zero, got '" + get_string("lattice", "boundary") + "'");
    }
    const long n = get_int("lattice", "n"), j = get_int("lattice", "j");
    if (n < 1 || n > kMaxDim) throw ConfigError("lattice.n", "dimension must lie in [1, " + std::to_string(kMaxDim) + "]");
    if (j < 1) throw ConfigError("lattice.j", "half side must be positive");
    return LatticeSpec::cube(static_cast<int>(n), static_cast<int>(j), b);
}

std::vector<double> RunConfig::betas() const
{
    if (!uses_chain(experiment)) return {};
    return get_reals("chain", "betas");
}

ChainConfig RunConfig::chain(double beta, std::uint32_t chain_id) const
{
    ChainConfig c;
    c.beta = beta;
    c.burn_in = get_int("chain", "burn_in");
    c.thinning = get_int("chain", "thinning");
    c.seed = seed();
    c.chain_id = chain_id;
    try {
        c.theta_move = theta_move_from_string(get_string("chain", "theta_move"));
    } catch (const std::exception&) {
        throw ConfigError("chain.theta_move", "expected lifted or truncated, got '" + get_string("chain", "theta_move") + "'");
    }
    c.threads = threads();
    return c;
}

double estimate_memory(const LatticeSpec& spec, int p)
{
    const int n = spec.n;
    double bytes = 0;
    for (int k = 0; k <= n; ++k) {
        double cells = static_cast<double>(binomial(n, k));
        for (int a = 0; a < n; ++a) cells *= spec.extent(a) + 1;
        // Flags, interior list, boundary and coboundary incidences.
        bytes += cells * (1 + 4 + 4 + 2.0 * k * 5 + 2.0 * (n - k) * 5);
        // Forms and solver work vectors on the degrees a chain touches.
        if (k >= p && k <= p + 2) bytes += cells * 8 * 8;
    }
    return bytes;
}

void RunConfig::validate() const
{
    const LatticeSpec spec = lattice();
    if (get_int("run", "seed") < 0) throw ConfigError("run.seed", "must be non-negative");
    if (get_int("run", "threads") < 1) throw ConfigError("run.threads", "must be at least 1");
    if (uses_chain(experiment)) {
        const long p = get_int("chain", "p");
        if (p < 0 || p + 1 > spec.n) throw ConfigError("chain.p", "needs 0 <= p < n");
        if (experiment != Experiment::CoulombSample && p != 1) throw ConfigError("chain.p", "this experiment measures gauge-theory observables and needs p = 1");
        if (experiment == Experiment::CoulombSample && p + 2 > spec.n) throw ConfigError("chain.p", "charges q = dm need p + 2 <= n");
        const auto b = betas();
        if (b.empty()) throw ConfigError("chain.betas", "at least one beta is required");
        for (double x : b)
            if (!(x > 0)) throw ConfigError("chain.betas", "inverse temperatures must be positive");
        if (get_int("chain", "samples") < 1) throw ConfigError("chain.samples", "must be positive");
        if (get_int("chain", "thinning") < 1) throw ConfigError("chain.thinning", "must be positive");
        chain(b.front(), 0);
        const double mb = estimate_memory(spec, static_cast<int>(p)) / (1024.0 * 1024.0);
        if (mb > static_cast<double>(get_int("run", "max_memory_mb")))
            throw ConfigError("lattice.j", "estimated footprint " + std::to_string(static_cast<long>(mb)) + " MB exceeds run.max_memory_mb");
    }
    if (experiment == Experiment::Wilson) {
        if (spec.n < 2) throw ConfigError("lattice.n", "Wilson loops need n >= 2");
        const long margin = get_int("wilson", "margin");
        for (const std::string key : {"loops", "one_sided"})
            for (const auto& s : get_strings("wilson", key)) {
                int L = 0, H = 0;
                char x = 0;
                std::istringstream is(s);
                if (!(is >> L >> x >> H) || x != 'x' || L < 1 || H < 1 || !is.eof())
                    throw ConfigError("wilson." + std::string(key), "loop '" + s + "' is not of the form LxH");
                const int need = std::max(L, H);
                const int m = margin < 0 ? need : static_cast<int>(margin);
                if (m < need && !get_bool("wilson", "allow_tight_margin"))
                    throw ConfigError("wilson.margin", "margin " + std::to_string(m) + " is below max(L, H) = " + std::to_string(need) +
                                                           " for loop " + s + "; set allow_tight_margin = true to override");
                if (2 * m + std::max(L, H) > 2 * spec.half_side())
                    throw ConfigError("lattice.j", "box too small for loop " + s + " with margin " + std::to_string(m));
            }
    }
    if (experiment == Experiment::Villain) {
        for (const auto& m : get_strings("villain", "measurements"))
            if (m != "energy-identity" && m != "tilde-m" && m != "fourier-m" && m != "coulomb-variance" && m != "factorization")
                throw ConfigError("villain.measurements", "unknown measurement '" + m + "'");
        if (spec.n < 3) throw ConfigError("lattice.n", "the villain panel needs n >= 3");
    }
    if (experiment == Experiment::Green) {
        for (long n : get_ints("green", "power_dims"))
            if (n < 3) throw ConfigError("green.power_dims", "the Z^n Green function needs n >= 3");
        if (get_ints("green", "loop_sizes").size() < 2) throw ConfigError("green.loop_sizes", "a slope needs at least two sizes");
    }
    if (experiment == Experiment::Ranks && spec.n > 4 && spec.half_side() > 2)
        throw ConfigError("lattice.j", "rank tables are limited to small boxes");
}

std::string RunConfig::resolved_text() const
{
    std::ostringstream os;
    std::string section;
    for (const auto& k : schema_) {
        if (k.section != section) {
            os << (section.empty() ? "" : "\n") << "[" << k.section << "]\n";
            section = k.section;
        }
        os << k.key << " = " << values_.at(k.section).at(k.key) << "\n";
    }
    return os.str();
}

std::uint64_t RunConfig::hash() const
{
    std::string s = to_string(experiment) + "\n";
    for (const auto& k : schema_) {
        if (k.section == "run" && (k.key == "threads" || k.key == "out")) continue;
        s += k.section + "." + k.key + "=" + values_.at(k.section).at(k.key) + "\n";
    }
    return fnv1a64(s);
}

}  // namespace villain
