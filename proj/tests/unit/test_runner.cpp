#include "degen/runner.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace degen;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("degen_runner_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream o;
    o << in.rdbuf();
    return o.str();
}

int lab(const std::string& args) {
    const int status = std::system((std::string(DEGEN_LAB_PATH) + " " + args + " > /dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path write_config(const fs::path& dir, const std::string& text) {
    const auto p = dir / "config.json";
    std::ofstream(p) << text;
    return p;
}

} // namespace

TEST(Config, DefaultsAndOverrides) {
    const auto c = parse_config(nlohmann::json::parse(R"({"alpha": 0.25, "n": 64, "K": 3})"), "spectrum");
    EXPECT_EQ(c.alpha, 0.25);
    EXPECT_EQ(c.n, 64);
    EXPECT_EQ(c.K, 3);
    EXPECT_EQ(c.grading, 2.0);
}

TEST(Config, RejectsBadInput) {
    const auto bad = [](const char* text, const char* exp) {
        EXPECT_THROW(parse_config(nlohmann::json::parse(text), exp), ConfigError) << text;
    };
    bad(R"({"alpha": 0.5, "colour": 1})", "spectrum");
    bad(R"({"alpha": 1.0})", "spectrum");
    bad(R"({"alpha": -0.1})", "spectrum");
    bad(R"({"n": "many"})", "spectrum");
    bad(R"({"T": 0})", "evolve");
    bad(R"({"n": 100, "deltas": [0.2, 0.1, 0.033]})", "delta-sweep");
    bad(R"({"steps": 41})", "observability");
    EXPECT_THROW(parse_config(nlohmann::json::object(), "no-such-experiment"), ConfigError);
}

TEST(Runner, SpectrumTableShape) {
    const auto c = parse_config(nlohmann::json::parse(R"({"n": 1024, "K": 5})"), "spectrum");
    const auto reports = run(c);
    ASSERT_EQ(reports.size(), 1u);
    ASSERT_FALSE(reports[0].tables.empty());
    EXPECT_EQ(reports[0].tables[0].rows.size(), 5u);
    EXPECT_TRUE(reports[0].passed());
}

TEST(Runner, OutputIsByteIdentical) {
    const auto c = parse_config(nlohmann::json::parse(R"({"n": 64, "steps": 32})"), "evolve");
    const auto a = scratch("det_a"), b = scratch("det_b");
    write_reports(a, run(c), "evolve");
    write_reports(b, run(c, 2), "evolve");
    std::size_t files = 0;
    for (const auto& e : fs::directory_iterator(a)) {
        ++files;
        EXPECT_EQ(slurp(e.path()), slurp(b / e.path().filename())) << e.path();
    }
    EXPECT_GE(files, 2u);
    const std::string csv = slurp(a / "evolution.csv");
    EXPECT_EQ(csv.rfind("# alpha=0.5,T=", 0), 0u);
}

TEST(Cli, ExitCodes) {
    const auto dir = scratch("cli");
    const auto good = write_config(dir, R"({"n": 1024, "K": 3})");
    EXPECT_EQ(lab("spectrum --config " + good.string() + " --out " + (dir / "out").string()), 0);
    EXPECT_TRUE(fs::exists(dir / "out" / "summary.json"));
    EXPECT_EQ(lab("spectrum --config " + (dir / "missing.json").string()), 2);
    EXPECT_EQ(lab("spectrum"), 2);
    EXPECT_EQ(lab("nonsense --config " + good.string()), 2);
    const auto unknown = write_config(dir, R"({"n": 64, "bogus": true})");
    EXPECT_EQ(lab("spectrum --config " + unknown.string()), 2);
    // too coarse for the 1e-3 Bessel tolerance on lambda_1: a check failure
    const auto coarse = write_config(dir, R"({"n": 32, "K": 3})");
    EXPECT_EQ(lab("spectrum --config " + coarse.string() + " --out " + (dir / "coarse").string()), 1);
}
