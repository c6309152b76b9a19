#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const char* cli() {
    if (const char* p = std::getenv("BIFRACT_CLI_PATH")) return p;
#ifdef BIFRACT_CLI
    return BIFRACT_CLI;
#else
    return "bifract";
#endif
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("bifract-cli-" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    std::string write(const std::string& name, const std::string& text) const {
        std::ofstream(path(name)) << text;
        return path(name);
    }

    static std::string read(const std::string& file) {
        std::ifstream in(file, std::ios::binary);
        std::ostringstream s;
        s << in.rdbuf();
        return s.str();
    }

    // Runs the CLI with `args`, capturing stdout and stderr.
    int run(const std::string& args, const std::string& env = "") {
        const std::string cmd = env + " '" + cli() + "' " + args + " >'" + path("stdout") + "' 2>'" +
                                path("stderr") + "'";
        const int status = std::system(cmd.c_str());
        out = read(path("stdout"));
        err = read(path("stderr"));
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }

    fs::path dir_;
    std::string out, err;
};

const char* kPeak = "x,y,s\n0,0,0.8\n0.5,1,0.8\n1,0,0.8\n";

std::size_t lines(const std::string& text) { return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')); }

} // namespace

TEST_F(Cli, InterpolateWritesDefaultLattice) {
    const auto in = write("p.csv", kPeak);
    ASSERT_EQ(run("interpolate --in " + in + " --out " + path("f.csv")), 0) << err;
    const auto csv = read(path("f.csv"));
    EXPECT_EQ(csv.substr(0, 4), "x,f\n");
    EXPECT_EQ(lines(csv), 2050u);  // header + 2^11 + 1 samples
    EXPECT_NE(out.find("residual=0\n"), std::string::npos) << out;
    EXPECT_NE(out.find("samples=2049"), std::string::npos);
}

TEST_F(Cli, ReRunsAreByteIdentical) {
    const auto in = write("p.csv", kPeak);
    ASSERT_EQ(run("interpolate --in " + in), 0);
    const auto first = out;
    ASSERT_EQ(run("interpolate --in " + in), 0);
    EXPECT_EQ(out, first);
    ASSERT_EQ(run("render --in " + in + " --points 20000 --width 64 --height 48 --out " + path("a.pgm")), 0) << err;
    ASSERT_EQ(run("render --in " + in + " --points 20000 --width 64 --height 48 --out " + path("b.pgm")), 0);
    EXPECT_EQ(read(path("a.pgm")), read(path("b.pgm")));
    ASSERT_EQ(run("render --in " + in + " --points 20000 --width 64 --height 48 --seed 2 --out " + path("c.pgm")), 0);
    EXPECT_NE(read(path("a.pgm")), read(path("c.pgm")));
}

TEST_F(Cli, ExitCodes) {
    EXPECT_EQ(run("interpolate --in " + write("bad.csv", "x,y,s\n0,0,0\n1,abc,0\n")), 2);
    EXPECT_NE(err.find("bad.csv:3:"), std::string::npos) << err;
    EXPECT_EQ(run("interpolate --in " + write("knots.csv", "x,y,s\n0,0,0\n0,1,0\n")), 2);
    EXPECT_EQ(run("interpolate --in " + write("s.csv", "x,y,s\n0,0,0.5\n1,1,1.2\n2,0,0.5\n")), 3);
    EXPECT_EQ(run("render --in " + write("p.csv", kPeak) + " --ymin 0 --ymax 2 --points 10000 --out " +
                  path("o.pgm")),
              4);
    EXPECT_EQ(run("dimension --closed-form --in " + write("nu.csv", "x,y,s\n0,0,0.5\n0.3,1,0.5\n1,0,0.5\n")), 5);
    EXPECT_EQ(run("dimension --closed-form --in " + write("ns.csv", "x,y,s\n0,0,0.5\n0.5,1,0.2\n1,0,0.6\n")), 5);
    EXPECT_EQ(run("frobnicate"), 2);
}

TEST_F(Cli, DimensionReportsClosedForm) {
    ASSERT_EQ(run("dimension --closed-form --in " + write("p.csv", kPeak)), 0) << err;
    EXPECT_NE(out.find("gamma=1.6000000000000001"), std::string::npos) << out;
    EXPECT_NE(out.find("closed_form=1.6780719051126378"), std::string::npos) << out;
    ASSERT_EQ(run("dimension --closed-form --in " + write("q.csv", "x,y,s\n0,0,0.4\n0.5,1,0.4\n1,0,0.4\n")), 0);
    EXPECT_NE(out.find("degenerate: gamma<=1, dimension=1"), std::string::npos) << out;
    ASSERT_EQ(run("dimension --closed-form --in " + write("l.csv", "x,y,s\n0,0,0.9\n0.5,0.5,0.9\n1,1,0.9\n")), 0);
    EXPECT_NE(out.find("degenerate: collinear data, dimension=1"), std::string::npos) << out;
}

TEST_F(Cli, DimensionEmpiricalWritesReport) {
    const auto in = write("p.csv", kPeak);
    ASSERT_EQ(run("dimension --in " + in + " --rmax 10 --out " + path("d.csv") + " --svg " + path("d.svg") +
                  " --dump-columns " + path("cols.csv")),
              0)
        << err;
    const auto csv = read(path("d.csv"));
    EXPECT_EQ(csv.substr(0, 20), "r,N_r,slope_partial\n");
    EXPECT_EQ(lines(csv), 8u);
    EXPECT_NE(out.find("slope="), std::string::npos);
    EXPECT_NE(read(path("d.svg")).find("<svg"), std::string::npos);
    EXPECT_EQ(read(path("cols.csv")).substr(0, 9), "r,k,N_rk\n");
    // Outside the hypotheses the empirical path still runs.
    ASSERT_EQ(run("dimension --rmax 8 --in " + write("ns.csv", "x,y,s\n0,0,0.5\n0.5,1,0.2\n1,0,0.6\n")), 0) << err;
    EXPECT_NE(err.find("closed_form withheld"), std::string::npos) << err;
}

TEST_F(Cli, EnvironmentBelowFlags) {
    const auto in = write("p.csv", kPeak);
    ASSERT_EQ(run("interpolate --in " + in, "BIFRACT_DEPTH=3"), 0) << err;
    EXPECT_EQ(lines(out), 18u);  // header + 2^4 + 1
    ASSERT_EQ(run("interpolate --in " + in + " --depth 4", "BIFRACT_DEPTH=3"), 0);
    EXPECT_EQ(lines(out), 34u);
}

TEST_F(Cli, VerifyDefaultAndChain) {
    ASSERT_EQ(run("verify --trials 2000 --r 4 --oversample 4"), 0) << err;
    EXPECT_NE(out.find("\"status\":\"pass\""), std::string::npos);
    const auto chain = write("c.csv", "x,ylow,yhigh\n0,0,0.6\n0.5,0.4,0.9\n1,0,0.6\n");
    ASSERT_EQ(run("verify --in " + chain + " --trials 2000 --out " + path("log.jsonl")), 0) << err;
    EXPECT_GT(lines(read(path("log.jsonl"))), 5u);
    EXPECT_EQ(run("verify --suite nope"), 2);
}

TEST_F(Cli, RenderFormats) {
    const auto chain = write("c.csv", "x,ylow,yhigh\n0,0,0.6\n0.5,0.4,0.9\n1,0,0.6\n");
    ASSERT_EQ(run("render --in " + chain + " --mode deterministic --k 6 --width 80 --height 60 --out " +
                  path("a.svg")),
              0)
        << err;
    EXPECT_NE(read(path("a.svg")).find("<svg"), std::string::npos);
    ASSERT_EQ(run("render --in " + chain + " --points 5000 --width 80 --height 60"), 0);
    EXPECT_EQ(out.substr(0, 3), "P5\n");
    EXPECT_EQ(run("render --in " + chain + " --mode spiral"), 2);
}
