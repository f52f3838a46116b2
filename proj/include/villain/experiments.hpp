#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "villain/config.hpp"
#include "villain/observables.hpp"

namespace villain {

// A report with the scope it was measured in, e.g. "beta=4" or "n=3 j=1 free".
struct ReportEntry {
    std::string scope;
    MeasureReport report;
};

// Extra table written as CSV next to the reports.
struct Table {
    std::string file;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

struct ExperimentResult {
    std::vector<ReportEntry> reports;
    std::vector<Table> tables;
    long stages_run = 0;  // chain stages measured by this invocation
    Verdict verdict() const;
};

struct RunOptions {
    std::filesystem::path out;
    bool resume = false;
    std::ostream* log = nullptr;
    // Stop after this many newly finished chain stages, as an interruption
    // would; negative runs to the end.
    long stop_after_stages = -1;
};

// Thrown when a run stops on `stop_after_stages`; the output directory is
// left in a resumable state.
struct Interrupted : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Runs the configured experiment and writes results.csv, info.csv,
// report.json, resolved.cfg, extra tables, snapshots and checkpoints to
// `opt.out`. Chain experiments save a checkpoint and the finished report
// after every stage; with `opt.resume` finished stages are reloaded and the
// chain continues from its checkpoint, reproducing an uninterrupted run.
ExperimentResult run_experiment(const RunConfig& cfg, const RunOptions& opt);

// Plan of an experiment: measurements, targets, tolerances, runtime estimate.
std::string describe(Experiment e, const RunConfig& cfg);

// 0 all pass, 1 any fail, 2 inconclusive without fails.
int exit_code(Verdict v);

// ------------------------------------------------------------ building blocks

// d d = 0, d* d* = 0, adjointness, zero-boundary preservation and the
// cell-level boundary of a boundary, on random integer and real forms.
MeasureReport calculus_check(const LatticeSpec& spec, std::uint64_t seed, int trials);

// 1-form Green entries from a conjugate-gradient solve against the
// direction-graph values: cross-direction entries vanish, same-direction
// entries agree.
MeasureReport green_entries(const LatticeSpec& spec, int pairs, double tol, std::uint64_t seed);

// Exponent of the Z^n vertex Green function along an axis.
MeasureReport green_power_law(int n, const std::vector<long>& radii, double tol);

// c_gff at increasing truncations.
MeasureReport cgff_stability(const std::vector<long>& K, double tol);

// Loop energy of centred L x L loops with margin L against 2 c_gff (L + H).
MeasureReport loop_slope(int n, Mode mode, const std::vector<long>& sizes, double rel_tol, Table* table = nullptr);

// Rank table of a box with the Lower + Upper = #cells check and, for
// n = 4 cubes, the closed forms of the dimension table.
MeasureReport rank_report(const LatticeSpec& spec, bool exact, Table* table = nullptr);

// Var(a, beta) >= e^{-beta (1 - 2a)/2} / 16 for beta in (b0, b1], and
// M(beta) >= 2 beta e^{-(2 pi)^2 beta / 2} for beta in [c0, c1].
MeasureReport ivg_bounds(double b0, double b1, double c0, double c1, double step);

// Var<rho, f> = |P f|^2 / beta on a panel of test forms, and the bulk-face
// variance against 1/(2 beta).
MeasureReport gsw_law(const LatticePtr& lat, double beta, long samples, double bulk_rel, std::uint64_t seed);

// Per-sample energy split, the rho / q independence panel and normality.
MeasureReport decouple_panel(VillainChain& chain, long samples, double tol);

// Report serialization for stage files.
std::string to_json(const ReportEntry& e);
ReportEntry report_from_json(const std::string& text);

}  // namespace villain
