#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "villain/lattice.hpp"
#include "villain/sampler.hpp"

namespace villain {

// Version string compiled into every output.
const char* code_version();

std::uint64_t fnv1a64(std::string_view s);
std::string hex64(std::uint64_t h);

enum class Experiment { CalculusCheck, Green, Ranks, Villain, Decouple, Wilson, FreeEnergy, CoulombSample, IvgTable };
std::string to_string(Experiment e);
Experiment experiment_from_string(const std::string& s);
const std::vector<Experiment>& all_experiments();
// Experiments that run a Villain chain.
bool uses_chain(Experiment e);

struct ConfigError : std::runtime_error {
    std::string key;
    ConfigError(const std::string& k, const std::string& msg) : std::runtime_error(k.empty() ? msg : k + ": " + msg), key(k) {}
};

enum class ValueType { Int, Real, Bool, String, IntList, RealList, StringList };

struct KeySchema {
    std::string section;
    std::string key;
    ValueType type;
    std::string fallback;  // default, already in canonical form
    std::string doc;
};

// Keys accepted for an experiment, in canonical order. Sections are [run],
// [lattice], [chain] for chain experiments, plus the experiment's own one.
std::vector<KeySchema> schema_for(Experiment e);
std::string section_for(Experiment e);

// A fully resolved run configuration. Values are stored in canonical text
// form; typed getters parse them. `threads` and `out` are execution
// details and do not enter the hash.
class RunConfig {
public:
    Experiment experiment = Experiment::CalculusCheck;

    static RunConfig parse(const std::string& text);
    static RunConfig load(const std::string& path);
    static RunConfig defaults(Experiment e);

    // Throws ConfigError for keys outside the schema or badly typed values.
    void set(const std::string& section, const std::string& key, const std::string& value);
    bool has(const std::string& section, const std::string& key) const;

    long get_int(const std::string& section, const std::string& key) const;
    double get_real(const std::string& section, const std::string& key) const;
    bool get_bool(const std::string& section, const std::string& key) const;
    std::string get_string(const std::string& section, const std::string& key) const;
    std::vector<long> get_ints(const std::string& section, const std::string& key) const;
    std::vector<double> get_reals(const std::string& section, const std::string& key) const;
    std::vector<std::string> get_strings(const std::string& section, const std::string& key) const;

    LatticeSpec lattice() const;
    std::vector<double> betas() const;
    std::uint64_t seed() const { return static_cast<std::uint64_t>(get_int("run", "seed")); }
    int threads() const { return static_cast<int>(get_int("run", "threads")); }
    ChainConfig chain(double beta, std::uint32_t chain_id) const;

    // Cross-key checks (degree ranges, loop margins, memory pre-flight).
    void validate() const;
    // Canonical INI text of every key, defaults included.
    std::string resolved_text() const;
    std::uint64_t hash() const;
    const std::map<std::string, std::map<std::string, std::string>>& values() const { return values_; }

private:
    const KeySchema& find(const std::string& section, const std::string& key) const;
    std::vector<KeySchema> schema_;
    std::map<std::string, std::map<std::string, std::string>> values_;
};

// Rough peak memory in bytes of the lattice tables, one chain state and the
// Poisson solver work vectors.
double estimate_memory(const LatticeSpec& spec, int p);

}  // namespace villain
