/// Config parsing and the command-line runner, driven as a subprocess.
#include "homlab/config.hpp"
#include "homlab/runner.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace homlab;
namespace fs = std::filesystem;

namespace {

const std::string fixtures = HOMLAB_FIXTURES;
const std::string cli = HOMLAB_CLI;

struct Run {
    int code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

fs::path scratch()
{
    static int counter = 0;
    const auto dir = fs::temp_directory_path() / ("homlab_cli_" + std::to_string(::getpid()) + "_" +
                                                  std::to_string(counter++));
    fs::create_directories(dir);
    return dir;
}

Run invoke(const std::string& args)
{
    const auto dir = scratch();
    const std::string cmd = "'" + cli + "' " + args + " > '" + (dir / "out").string() + "' 2> '" +
                            (dir / "err").string() + "'";
    const int status = std::system(cmd.c_str());
    Run r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(dir / "out");
    r.err = slurp(dir / "err");
    fs::remove_all(dir);
    return r;
}

std::string fixture(const std::string& name) { return "'" + fixtures + "/" + name + "'"; }

std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }

} // namespace

TEST(Config, CanonicalRoundTrip)
{
    const auto a = RunConfig::parse_string("[run]\nseed = 3\nn_list = 1, 2\n# note\n[experiment]\nkind = hconv\n");
    const auto b = RunConfig::parse_string(a.serialize());
    EXPECT_EQ(a, b);
    EXPECT_EQ(a.serialize(), b.serialize());
    EXPECT_EQ(a.serialize(), "[experiment]\nkind = hconv\n\n[run]\nn_list = 1, 2\nseed = 3\n");
    EXPECT_EQ(a.digest(), b.digest());
    EXPECT_EQ(a.digest().size(), 16u);
}

TEST(Config, DigestTracksContent)
{
    const auto a = RunConfig::parse_string("[run]\nseed = 3\n");
    const auto b = RunConfig::parse_string("[run]\nseed = 4\n");
    EXPECT_NE(a.digest(), b.digest());
}

TEST(Config, UnknownKeyNamesLocation)
{
    try {
        RunConfig::load(fixtures + "/unknown_key.cfg");
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("unknown_key.cfg:5"), std::string::npos) << msg;
        EXPECT_NE(msg.find("mesh_size"), std::string::npos) << msg;
    }
}

TEST(Config, MalformedInput)
{
    EXPECT_THROW(RunConfig::parse_string("[run\nseed = 1\n"), ConfigError);
    EXPECT_THROW(RunConfig::parse_string("[bogus]\n"), ConfigError);
    EXPECT_THROW(RunConfig::parse_string("seed = 1\n"), ConfigError);
    EXPECT_THROW(RunConfig::parse_string("[run]\nseed\n"), ConfigError);
    EXPECT_THROW(RunConfig::parse_string("[run]\nseed = 1\nseed = 2\n"), ConfigError);
    EXPECT_THROW(RunConfig::parse_string("[run]\nseed =\n"), ConfigError);
    EXPECT_THROW(RunConfig::load(fixtures + "/does_not_exist.cfg"), ConfigError);
}

TEST(Config, TypedAccessors)
{
    const auto c = RunConfig::parse_string("[run]\nn_list = 1, 2, 8\ntolerance = 2e-2\nseed = x\n");
    EXPECT_EQ(c.integer_list("run", "n_list"), (std::vector<std::int64_t>{1, 2, 8}));
    EXPECT_DOUBLE_EQ(c.real("run", "tolerance"), 0.02);
    EXPECT_EQ(c.integer("run", "trials", 5), 5);
    try {
        c.integer("run", "seed");
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("seed"), std::string::npos);
    }
    EXPECT_THROW(c.require("run", "cells_per_period"), ConfigError);
}

TEST(Config, RealListsAndRelativePaths)
{
    const auto c = RunConfig::parse_string("[run]\ncandidate = 1.5, -2e-1, 0, 3\n");
    EXPECT_EQ(c.real_list("run", "candidate"), (std::vector<Real>{1.5, -0.2, 0.0, 3.0}));
    EXPECT_EQ(c.resolve_path("a.coeff"), "a.coeff");
    const auto l = RunConfig::load(fixtures + "/cell_from_file.cfg");
    EXPECT_EQ(fs::path(l.resolve_path("laminate_cell.coeff")), fs::path(fixtures) / "laminate_cell.coeff");
    EXPECT_EQ(l.resolve_path("/abs/x"), "/abs/x");
}

TEST(Cli, ListHasEveryExperiment)
{
    const auto r = invoke("list");
    EXPECT_EQ(r.code, 0);
    EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 13);
    for (const char* k : {"solve1d", "laminate2d", "cell", "hconv", "qdind", "schur-gap", "divcurl", "divtest", "evo",
                          "recover", "thermo", "maxwell", "helmholtz"})
        EXPECT_NE(r.out.find(std::string(k) + "\t"), std::string::npos) << k;
}

TEST(Cli, Describe)
{
    const auto h = invoke("describe hconv");
    EXPECT_EQ(h.code, 0);
    EXPECT_EQ(h.out, describe("hconv"));
    EXPECT_NE(h.out.find("n_list: required"), std::string::npos);
    const auto c = invoke("describe cell");
    EXPECT_NE(c.out.find("n_list: not used"), std::string::npos);
    EXPECT_EQ(invoke("describe nonsense").code, 2);
}

TEST(Cli, UsageErrorsExitTwo)
{
    EXPECT_EQ(invoke("").code, 2);
    EXPECT_EQ(invoke("frobnicate").code, 2);
    EXPECT_EQ(invoke("run").code, 2);
    EXPECT_EQ(invoke("run --config " + fixture("does_not_exist.cfg")).code, 2);
    const auto u = invoke("run --config " + fixture("unknown_key.cfg"));
    EXPECT_EQ(u.code, 2);
    EXPECT_NE(u.err.find("status=usage"), std::string::npos);
    EXPECT_NE(u.err.find("mesh_size"), std::string::npos);
    EXPECT_EQ(invoke("run --config " + fixture("missing_n_list.cfg")).code, 2);
    EXPECT_EQ(invoke("cell --config " + fixture("1d_harmonic.cfg")).code, 2);
    EXPECT_EQ(invoke("run --config " + fixture("1d_harmonic.cfg") + " --jobs 0").code, 2);
}

TEST(Cli, PassingRunWritesHeaderAndDigest)
{
    const auto r = invoke("run --config " + fixture("1d_harmonic.cfg"));
    ASSERT_EQ(r.code, 0) << r.err;
    const auto digest = RunConfig::load(fixtures + "/1d_harmonic.cfg").digest();
    EXPECT_EQ(first_line(r.out), "# homlab schema=hconv/v1 config_digest=" + digest);
    EXPECT_NE(r.out.find("\nn,cells_per_axis,pairing_err_u"), std::string::npos);
}

TEST(Cli, OutputIsByteIdentical)
{
    const auto a = invoke("run --config " + fixture("1d_harmonic.cfg"));
    const auto b = invoke("hconv --config " + fixture("1d_harmonic.cfg"));
    ASSERT_EQ(a.code, 0);
    EXPECT_EQ(a.out, b.out);

    const auto dir = scratch();
    const auto c = invoke("run --config " + fixture("1d_harmonic.cfg") + " --out '" + dir.string() + "'");
    EXPECT_EQ(c.code, 0);
    EXPECT_TRUE(c.out.empty());
    EXPECT_EQ(slurp(dir / "1d_harmonic.csv"), a.out);
    fs::remove_all(dir);
}

TEST(Cli, SeedOverrideChangesDigest)
{
    const auto a = invoke("run --config " + fixture("schur_identity.cfg"));
    const auto b = invoke("run --config " + fixture("schur_identity.cfg") + " --seed 99");
    ASSERT_EQ(a.code, 0) << a.err;
    ASSERT_EQ(b.code, 0) << b.err;
    EXPECT_NE(first_line(a.out), first_line(b.out));
    EXPECT_EQ(invoke("run --config " + fixture("schur_identity.cfg") + " --seed 99").out, b.out);
}

TEST(Cli, FailingAssertionExitsOne)
{
    const auto dir = scratch();
    {
        std::ofstream os(dir / "wrong.cfg");
        os << "[experiment]\nkind = hconv\n[domain]\ndim = 1\n[sequence]\nkind = laminate\nprofile = sine\n"
              "mean = 2\namplitude = 1\n[run]\nn_list = 1, 4, 16\ncells_per_period = 32\ncandidate = 2\n";
    }
    const auto r = invoke("run --config '" + (dir / "wrong.cfg").string() + "'");
    EXPECT_EQ(r.code, 1);
    EXPECT_EQ(first_line(r.out).rfind("# homlab schema=hconv/v1", 0), 0u);
    fs::remove_all(dir);
}

TEST(Cli, ExperimentErrorExitsOne)
{
    const auto dir = scratch();
    {
        std::ofstream os(dir / "huge.cfg");
        os << "[experiment]\nkind = hconv\n[domain]\ndim = 2\n[sequence]\nkind = laminate\n"
              "[run]\nn_list = 1, 100000\ncells_per_period = 64\n";
    }
    const auto r = invoke("run --config '" + (dir / "huge.cfg").string() + "'");
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("status=error"), std::string::npos) << r.err;
    fs::remove_all(dir);
}

TEST(Cli, CellFromCoefficientFile)
{
    const auto r = invoke("run --config " + fixture("cell_from_file.cfg"));
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("0,0,1.600000000000e+00,1.600000000000e+00"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("1,1,2.500000000000e+00,2.500000000000e+00"), std::string::npos) << r.out;
}

TEST(Cli, RecoverFromTripletFiles)
{
    const auto r = invoke("run --config " + fixture("recover_files.cfg"));
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("# source=files size=3"), std::string::npos);
}

TEST(Cli, DataFileProblems)
{
    const auto dir = scratch();
    {
        std::ofstream os(dir / "missing.cfg");
        os << "[experiment]\nkind = cell\n[sequence]\nkind = file\ncoefficients = nowhere.coeff\n";
        std::ofstream bad(dir / "bad.coeff");
        bad << "2 2 2\n1 0 0 1\n";
        std::ofstream cb(dir / "truncated.cfg");
        cb << "[experiment]\nkind = cell\n[sequence]\nkind = file\ncoefficients = bad.coeff\n";
        std::ofstream ns(dir / "notskew.cfg");
        ns << "[experiment]\nkind = recover\n[sequence]\nt_matrix = " << fixtures << "/recover_t.triplet\na_matrix = "
           << fixtures << "/recover_t.triplet\n";
    }
    EXPECT_EQ(invoke("run --config '" + (dir / "missing.cfg").string() + "'").code, 2);
    const auto t = invoke("run --config '" + (dir / "truncated.cfg").string() + "'");
    EXPECT_EQ(t.code, 2);
    EXPECT_NE(t.err.find("bad.coeff"), std::string::npos) << t.err;
    const auto n = invoke("run --config '" + (dir / "notskew.cfg").string() + "'");
    EXPECT_EQ(n.code, 1);
    EXPECT_NE(n.err.find("NotSkew"), std::string::npos) << n.err;
    fs::remove_all(dir);
}
