#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "villain/experiments.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace villain;
namespace fs = std::filesystem;

namespace {

constexpr int kUsageError = 64;
constexpr int kRuntimeError = 70;
constexpr int kInterrupted = 75;

// Flag beats environment beats config file, for seed and threads only. A
// resumed run keeps its seed.
void apply_overrides(RunConfig& cfg, const std::string& seed, const std::string& threads, bool seed_allowed = true)
{
    if (seed_allowed) {
        if (!seed.empty())
            cfg.set("run", "seed", seed);
        else if (const char* e = std::getenv("VILLAIN_SEED"))
            cfg.set("run", "seed", e);
    }
    if (!threads.empty())
        cfg.set("run", "threads", threads);
    else if (const char* e = std::getenv("VILLAIN_THREADS"))
        cfg.set("run", "threads", e);
}

int execute(const RunConfig& cfg, const fs::path& out, bool resume, long stop_after = -1)
{
#ifdef _OPENMP
    omp_set_num_threads(cfg.threads());
#endif
    RunOptions opt;
    opt.out = out;
    opt.resume = resume;
    opt.log = &std::cerr;
    opt.stop_after_stages = stop_after;
    const ExperimentResult res = run_experiment(cfg, opt);
    long pass = 0, fail = 0, inc = 0;
    for (const auto& e : res.reports)
        for (const auto& c : e.report.checks) {
            pass += c.verdict == Verdict::Pass;
            fail += c.verdict == Verdict::Fail;
            inc += c.verdict == Verdict::Inconclusive;
            if (c.verdict != Verdict::Pass) std::cout << to_string(c.verdict) << ": [" << e.scope << "] " << e.report.name << ": " << c.name << "\n";
        }
    std::cout << "checks: " << pass << " pass, " << fail << " fail, " << inc << " inconclusive\n"
              << "verdict: " << to_string(res.verdict()) << "\n"
              << "outputs: " << out.string() << "\n";
    return exit_code(res.verdict());
}

std::string schema_text(Experiment e)
{
    std::string s = "keys:\n";
    for (const auto& k : schema_for(e))
        s += "  [" + k.section + "] " + k.key + " = " + (k.fallback.empty() ? "\"\"" : k.fallback) + (k.doc.empty() ? "" : "  ; " + k.doc) + "\n";
    return s;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Villain lattice gauge theory experiments"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(code_version()));

    std::string config_path, seed, threads, out, exp_name, describe_config, resume_dir;
    bool allow_tight = false;
    long stop_after = -1;

    auto* run = app.add_subcommand("run", "run the experiment of a config file");
    run->add_option("config", config_path, "config file")->required()->check(CLI::ExistingFile);
    run->add_option("--seed", seed, "override the master seed");
    run->add_option("--threads", threads, "override the thread count");
    run->add_option("--out", out, "output directory");
    run->add_flag("--allow-tight-margin", allow_tight, "permit Wilson loop margins below max(L, H)");
    run->add_option("--stop-after", stop_after, "stop after this many chain stages, leaving a resumable directory")->check(CLI::PositiveNumber);

    auto* desc = app.add_subcommand("describe", "print the plan of an experiment without running it");
    desc->add_option("experiment", exp_name, "experiment name")->required();
    desc->add_option("--config", describe_config, "config file to size the plan")->check(CLI::ExistingFile);

    auto* resume = app.add_subcommand("resume", "continue an interrupted run from its output directory");
    resume->add_option("dir", resume_dir, "output directory of the run")->required()->check(CLI::ExistingDirectory);
    resume->add_option("--threads", threads, "override the thread count");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kUsageError;
    }

    try {
        if (*run) {
            RunConfig cfg = RunConfig::load(config_path);
            apply_overrides(cfg, seed, threads);
            if (allow_tight && cfg.experiment == Experiment::Wilson) cfg.set("wilson", "allow_tight_margin", "true");
            cfg.validate();
            fs::path dir = out;
            if (dir.empty()) dir = cfg.get_string("run", "out");
            if (dir.empty()) dir = fs::path("runs") / (to_string(cfg.experiment) + "-" + hex64(cfg.hash()));
            cfg.set("run", "out", dir.string());
            return execute(cfg, dir, false, stop_after);
        }
        if (*desc) {
            const Experiment e = experiment_from_string(exp_name);
            RunConfig cfg = describe_config.empty() ? RunConfig::defaults(e) : RunConfig::load(describe_config);
            if (cfg.experiment != e) throw ConfigError("run.experiment", "config is for " + to_string(cfg.experiment) + ", not " + exp_name);
            std::cout << describe(e, cfg) << schema_text(e);
            return 0;
        }
        if (*resume) {
            const fs::path dir = resume_dir;
            RunConfig cfg = RunConfig::load((dir / "resolved.cfg").string());
            apply_overrides(cfg, "", threads, false);
            cfg.set("run", "out", dir.string());
            return execute(cfg, dir, true);
        }
    } catch (const Interrupted& e) {
        std::cerr << e.what() << "; continue with: villain resume <dir>\n";
        return kInterrupted;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kUsageError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kRuntimeError;
    }
    return kUsageError;
}
