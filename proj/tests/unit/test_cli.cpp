#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <gtest/gtest.h>
#include <httplib.h>

#include "ehrtl/cli.hpp"
#include "ehrtl/store.hpp"

using namespace ehrtl;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome run(std::vector<std::string> args) {
    args.insert(args.begin(), "ehr-timeline");
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("ehrtl_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }
    std::string path(const std::string& name) const { return (dir_ / name).string(); }
    std::string write(const std::string& name, const std::string& text) const {
        std::ofstream(dir_ / name, std::ios::binary) << text;
        return path(name);
    }
    std::string raw_results() const {
        return write("hc.txt",
                     "patient_id|date|test_name|analyte|value|unit|ref_min|ref_max|institution\n"
                     "P1|13/11/2019|Hb||10,6|g/dL|12|16|\n"
                     "P1|13/11/2019|Hb||11|g/dL|12|16|\n"
                     "P1|14/11/2019|Unobtainium||1|x|0|1|\n"
                     "P2|14/11/2019|VCM||99|fL|80|96|\n");
    }
    fs::path dir_;
};

}  // namespace

TEST_F(Cli, IngestWritesDatasetAndReport) {
    const auto r = run({"ingest", raw_results(), "-o", path("d.jsonl"), "--rejections", path("rej.txt")});
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("rows in:     4"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("kept:        2"), std::string::npos);
    EXPECT_NE(r.out.find("rejected:    1"), std::string::npos);
    EXPECT_NE(r.out.find("duplicates:  1"), std::string::npos);
    EXPECT_EQ(load(path("d.jsonl")).results.size(), 2u);
    EXPECT_NE(slurp(path("rej.txt")).find("UnknownTest"), std::string::npos);
}

TEST_F(Cli, IngestMissingRulesLeavesNoOutput) {
    const auto r = run({"ingest", raw_results(), "--rules", path("missing.json"), "-o", path("d.jsonl")});
    EXPECT_NE(r.code, 0);
    EXPECT_EQ(r.code, cli::kIoError);
    EXPECT_FALSE(fs::exists(path("d.jsonl")));
    EXPECT_FALSE(fs::exists(path("d.jsonl.tmp")));
    EXPECT_NE(r.err.find("missing.json"), std::string::npos);
}

TEST_F(Cli, IngestStrict) {
    const auto r = run({"ingest", raw_results(), "-o", path("d.jsonl"), "--strict"});
    EXPECT_EQ(r.code, cli::kFailed);
    EXPECT_FALSE(fs::exists(path("d.jsonl")));
}

TEST_F(Cli, ValidateGoodCorruptAndVersion) {
    ASSERT_EQ(run({"gen", "--seed", "3", "-o", path("d.jsonl")}).code, 0);
    auto r = run({"validate", path("d.jsonl")});
    EXPECT_EQ(r.code, 0) << r.err;

    auto text = slurp(path("d.jsonl"));
    const auto third = text.find('\n', text.find('\n') + 1);
    text.insert(third + 1, "garbage\n");
    write("bad.jsonl", text);
    r = run({"validate", path("bad.jsonl")});
    EXPECT_EQ(r.code, cli::kFailed);
    EXPECT_NE(r.err.find("bad.jsonl:3"), std::string::npos) << r.err;

    auto v2 = slurp(path("d.jsonl"));
    v2.replace(v2.find("\"schema_version\":\"1.0\""), 22, "\"schema_version\":\"2.0\"");
    write("v2.jsonl", v2);
    r = run({"validate", path("v2.jsonl")});
    EXPECT_EQ(r.code, cli::kFailed);
    EXPECT_NE(r.err.find("version"), std::string::npos) << r.err;
}

TEST_F(Cli, GenIsByteIdentical) {
    ASSERT_EQ(run({"gen", "--seed", "7", "-o", path("a.jsonl")}).code, 0);
    ASSERT_EQ(run({"gen", "--seed", "7", "-o", path("b.jsonl")}).code, 0);
    EXPECT_EQ(slurp(path("a.jsonl")), slurp(path("b.jsonl")));
    EXPECT_EQ(run({"gen", "--tests", "0", "-o", path("c.jsonl")}).code, cli::kUsage);
}

TEST_F(Cli, ExportGraphPrintsEdgeCount) {
    ASSERT_EQ(run({"gen", "--seed", "2", "-o", path("d.jsonl")}).code, 0);
    const auto n = load(path("d.jsonl")).results.size();
    const auto r = run({"export-graph", path("d.jsonl"), "-o", path("g.json")});
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("edges: " + std::to_string(n) + "\n"), std::string::npos) << r.out;
    EXPECT_TRUE(fs::exists(path("g.json")));
}

TEST_F(Cli, UsageErrors) {
    EXPECT_EQ(run({}).code, cli::kUsage);
    EXPECT_EQ(run({"frobnicate"}).code, cli::kUsage);
    EXPECT_EQ(run({"ingest"}).code, cli::kUsage);
    EXPECT_EQ(run({"ingest", path("nope.txt"), "-o", path("x")}).code, cli::kUsage);
    EXPECT_EQ(run({"--help"}).code, 0);
    EXPECT_EQ(run({"validate", path("nope.jsonl")}).code, cli::kIoError);
}

TEST_F(Cli, DatasetFromEnvironment) {
    ASSERT_EQ(run({"gen", "-o", path("env.jsonl")}).code, 0);
    ::setenv("EHR_DATASET", path("env.jsonl").c_str(), 1);
    const auto r = run({"validate"});
    ::unsetenv("EHR_DATASET");
    EXPECT_EQ(r.code, 0) << r.err;
}

TEST_F(Cli, ServeOnOccupiedPortFailsClearly) {
    ASSERT_EQ(run({"gen", "-o", path("d.jsonl")}).code, 0);
    httplib::Server blocker;
    const int port = blocker.bind_to_any_port("127.0.0.1");
    ASSERT_GT(port, 0);
    const auto r = run({"serve", path("d.jsonl"), "--listen", "127.0.0.1:" + std::to_string(port)});
    EXPECT_EQ(r.code, cli::kIoError);
    EXPECT_NE(r.err.find("cannot bind"), std::string::npos) << r.err;
    EXPECT_EQ(run({"serve", path("d.jsonl"), "--listen", "nonsense"}).code, cli::kUsage);
}
