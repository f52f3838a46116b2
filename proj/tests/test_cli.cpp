#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "villain/experiments.hpp"

using namespace villain;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code = -1;
    std::string out;  // stdout and stderr together
};

std::string bin()
{
    const char* b = std::getenv("VILLAIN_BIN");
    REQUIRE_MESSAGE(b != nullptr, "VILLAIN_BIN is not set");
    return b;
}

Run sh(const std::string& args, const std::string& env = "")
{
    const std::string cmd = env + (env.empty() ? "" : " ") + bin() + " " + args + " 2>&1";
    Run r;
    FILE* p = popen(cmd.c_str(), "r");
    REQUIRE(p != nullptr);
    std::array<char, 4096> buf{};
    std::size_t n;
    while ((n = fread(buf.data(), 1, buf.size(), p)) > 0) r.out.append(buf.data(), n);
    const int status = pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    REQUIRE_MESSAGE(in.good(), p.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

struct Scratch {
    fs::path dir;
    explicit Scratch(const std::string& name) : dir(fs::temp_directory_path() / ("villain_cli_" + name + "_" + std::to_string(::getpid())))
    {
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    ~Scratch() { fs::remove_all(dir); }
    fs::path write(const std::string& file, const std::string& text) const
    {
        const fs::path p = dir / file;
        std::ofstream(p) << text;
        return p;
    }
};

// report.json embeds the resolved config, whose run.out differs per directory.
std::string without_config_line(const std::string& json)
{
    std::istringstream in(json);
    std::string line, out;
    while (std::getline(in, line))
        if (line.find("\"config\":") == std::string::npos) out += line + "\n";
    return out;
}

std::string comparable(const fs::path& p) { return p.filename() == "report.json" ? without_config_line(slurp(p)) : slurp(p); }

const char* kRanks = "[run]\nexperiment = ranks\n[lattice]\nn = 3\nj = 1\nboundary = free\n";
const char* kCalc = "[run]\nexperiment = calculus-check\n[calculus]\ngrid = false\ntrials = 1\n";
// Two betas with three stages each on a tiny box.
const char* kVillain =
    "[run]\nexperiment = villain\nseed = 3\n[lattice]\nn = 3\nj = 1\n[chain]\nbetas = 0.6, 0.8\nsamples = 200\nburn_in = 50\n"
    "[villain]\nmeasurements = energy-identity, tilde-m, coulomb-variance\n";

}  // namespace

TEST_CASE("describe prints the plan and the keys of each experiment")
{
    for (auto e : all_experiments()) {
        const Run r = sh("describe " + to_string(e));
        CHECK_MESSAGE(r.code == 0, r.out);
        CHECK(r.out.find("keys:") != std::string::npos);
        CHECK(r.out.find("[run] experiment") != std::string::npos);
    }
    CHECK(sh("describe no-such-experiment").code == 64);
}

TEST_CASE("unknown keys and sections are rejected by name")
{
    Scratch s("unknown");
    const Run a = sh("run " + s.write("a.cfg", std::string(kRanks) + "bogus_key = 1\n").string() + " --out " + (s.dir / "a").string());
    CHECK(a.code == 64);
    CHECK(a.out.find("bogus_key") != std::string::npos);
    const Run b = sh("run " + s.write("b.cfg", std::string(kRanks) + "[wilson]\nloops = 3x3\n").string() + " --out " + (s.dir / "b").string());
    CHECK(b.code == 64);
    CHECK(b.out.find("wilson") != std::string::npos);
    const Run c = sh("run " + s.write("c.cfg", "[run]\nexperiment = ranks\n[lattice]\nn = four\n").string() + " --out " + (s.dir / "c").string());
    CHECK(c.code == 64);
    CHECK(c.out.find("lattice.n") != std::string::npos);
    CHECK_FALSE(fs::exists(s.dir / "a"));
}

TEST_CASE("ranks run writes tagged CSV, JSON and the resolved config")
{
    Scratch s("ranks");
    const fs::path out = s.dir / "out";
    const Run r = sh("run " + s.write("r.cfg", kRanks).string() + " --out " + out.string());
    REQUIRE_MESSAGE(r.code == 0, r.out);
    for (const char* f : {"results.csv", "info.csv", "report.json", "resolved.cfg", "ranks.csv"}) CHECK_MESSAGE(fs::exists(out / f), f);

    const RunConfig cfg = RunConfig::load((out / "resolved.cfg").string());
    const std::string hash = hex64(cfg.hash());
    const std::string resolved = slurp(out / "resolved.cfg");
    CHECK(resolved.find(hash) != std::string::npos);
    CHECK(resolved.find(code_version()) != std::string::npos);

    std::istringstream csv(slurp(out / "results.csv"));
    std::string line;
    std::getline(csv, line);
    CHECK(line.rfind("experiment,", 0) == 0);
    int rows = 0;
    while (std::getline(csv, line)) {
        ++rows;
        CHECK(line.find("," + hash + "," + code_version()) != std::string::npos);
    }
    CHECK(rows > 0);
    const std::string json = slurp(out / "report.json");
    CHECK(json.find(hash) != std::string::npos);
    CHECK(json.find(code_version()) != std::string::npos);
    // One row per degree plus the header; n = 3 has degrees 0..3.
    std::istringstream ranks(slurp(out / "ranks.csv"));
    int lines = 0;
    while (std::getline(ranks, line)) ++lines;
    CHECK(lines == 5);
}

TEST_CASE("calculus check exits 0 and threads do not enter the hash")
{
    Scratch s("calc");
    const fs::path cfg = s.write("c.cfg", kCalc);
    const Run a = sh("run " + cfg.string() + " --threads 1 --out " + (s.dir / "a").string());
    REQUIRE_MESSAGE(a.code == 0, a.out);
    CHECK(a.out.find("verdict: pass") != std::string::npos);
    const Run b = sh("run " + cfg.string() + " --threads 2 --out " + (s.dir / "b").string());
    REQUIRE(b.code == 0);
    CHECK(RunConfig::load((s.dir / "a/resolved.cfg").string()).hash() == RunConfig::load((s.dir / "b/resolved.cfg").string()).hash());
    CHECK(slurp(s.dir / "a/results.csv") == slurp(s.dir / "b/results.csv"));
}

TEST_CASE("seed override: flag beats environment beats config")
{
    Scratch s("seed");
    const fs::path cfg = s.write("c.cfg", kCalc);
    REQUIRE(sh("run " + cfg.string() + " --out " + (s.dir / "env").string(), "VILLAIN_SEED=11").code == 0);
    REQUIRE(sh("run " + cfg.string() + " --seed 12 --out " + (s.dir / "flag").string(), "VILLAIN_SEED=11").code == 0);
    CHECK(RunConfig::load((s.dir / "env/resolved.cfg").string()).seed() == 11);
    CHECK(RunConfig::load((s.dir / "flag/resolved.cfg").string()).seed() == 12);
}

TEST_CASE("chain runs are reproducible and resume reproduces an uninterrupted run")
{
    Scratch s("chain");
    const fs::path cfg = s.write("v.cfg", kVillain);
    const Run a = sh("run " + cfg.string() + " --out " + (s.dir / "a").string());
    REQUIRE_MESSAGE(a.code <= 2, a.out);
    const Run b = sh("run " + cfg.string() + " --out " + (s.dir / "b").string());
    REQUIRE(b.code == a.code);
    for (const char* f : {"results.csv", "info.csv", "report.json"}) CHECK_MESSAGE(comparable(s.dir / "a" / f) == comparable(s.dir / "b" / f), f);
    CHECK(slurp(s.dir / "a/snapshots/theta_b1.vlf") == slurp(s.dir / "b/snapshots/theta_b1.vlf"));

    const Run other = sh("run " + cfg.string() + " --seed 4 --out " + (s.dir / "o").string());
    REQUIRE(other.code <= 2);
    CHECK(slurp(s.dir / "a/info.csv") != slurp(s.dir / "o/info.csv"));

    // Interrupt in the middle of the second beta, then resume.
    const Run stop = sh("run " + cfg.string() + " --stop-after 4 --out " + (s.dir / "r").string());
    CHECK_MESSAGE(stop.code == 75, stop.out);
    CHECK_FALSE(fs::exists(s.dir / "r/results.csv"));
    const Run res = sh("resume " + (s.dir / "r").string());
    REQUIRE_MESSAGE(res.code == a.code, res.out);
    for (const char* f : {"results.csv", "info.csv", "report.json"}) CHECK_MESSAGE(comparable(s.dir / "a" / f) == comparable(s.dir / "r" / f), f);
    CHECK(slurp(s.dir / "a/snapshots/theta_b1.vlf") == slurp(s.dir / "r/snapshots/theta_b1.vlf"));

    // Snapshots and stage files carry the config hash and version.
    const std::uint64_t hash = RunConfig::load((s.dir / "a/resolved.cfg").string()).hash();
    const SnapshotTag tag = read_snapshot_tag((s.dir / "a/snapshots/m_b0.vlf").string());
    CHECK(tag.config_hash == hash);
    CHECK(tag.code_version == code_version());
    const std::string stage = slurp(s.dir / "a/stages/b1_s2.json");
    CHECK(stage.find(hex64(hash)) != std::string::npos);
    CHECK(stage.find(code_version()) != std::string::npos);
}

TEST_CASE("a resumed directory refuses a checkpoint of another configuration")
{
    Scratch s("mismatch");
    const fs::path cfg = s.write("v.cfg", kVillain);
    REQUIRE(sh("run " + cfg.string() + " --stop-after 1 --out " + (s.dir / "r").string()).code == 75);
    std::string text = slurp(s.dir / "r/resolved.cfg");
    const auto pos = text.find("samples = 200");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, 13, "samples = 300");
    std::ofstream(s.dir / "r/resolved.cfg") << text;
    const Run r = sh("resume " + (s.dir / "r").string());
    CHECK(r.code == 70);
    CHECK(r.out.find("another configuration") != std::string::npos);
}

TEST_CASE("exit codes follow the verdict")
{
    CHECK(exit_code(Verdict::Pass) == 0);
    CHECK(exit_code(Verdict::Fail) == 1);
    CHECK(exit_code(Verdict::Inconclusive) == 2);
    Scratch s("fail");
    // A power-law tolerance no finite box can meet.
    const fs::path cfg = s.write("g.cfg",
                                 "[run]\nexperiment = green\n[lattice]\nn = 3\nj = 2\n[green]\nentry_pairs = 2\npower_dims = 3\n"
                                 "power_radii = 4, 6\npower_tol = 1e-9\ncgff_K = 16, 32\ncgff_tol = 1\nloop_sizes = 2, 3\nslope_tol = 1\n");
    const Run r = sh("run " + cfg.string() + " --out " + (s.dir / "g").string());
    CHECK_MESSAGE(r.code == 1, r.out);
    CHECK(r.out.find("fail:") != std::string::npos);
}
