#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "thetaexp/io.hpp"

using thetaexp::json;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = thetaexp::cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::vector<json> records(const std::string& text) {
    std::vector<json> rows;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) rows.push_back(json::parse(line));
    return rows;
}

std::string golden(const std::string& name) {
    std::ifstream in(std::string(THETAEXP_GOLDEN_DIR) + "/" + name);
    std::string line;
    std::getline(in, line);
    return line;
}

std::string first_data_header(const std::string& csv) {
    std::istringstream in(csv);
    std::string line;
    while (std::getline(in, line))
        if (!line.empty() && line[0] != '#') return line;
    return {};
}

std::string temp_path(const std::string& stem) {
    return ::testing::TempDir() + "thetaexp_" + stem;
}

}  // namespace

TEST(Cli, ExpandExample) {
    const auto r = run({"expand", "--m", "2", "--x", "1/2", "--mode", "exact", "--n", "5"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto rows = records(r.out);
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[0]["record"], "config");
    EXPECT_EQ(rows[0]["options"]["mode"], "exact");
    EXPECT_EQ(rows[1]["digits"], json::parse("[2,2,4,2,4]"));
    EXPECT_EQ(rows[1]["terminated"], false);
    EXPECT_EQ(rows[1]["m"], 2);
    EXPECT_EQ(rows[1]["formula_id"], "expansion");
}

TEST(Cli, MeasureTail) {
    const auto r = run({"measure", "tail", "--m", "2", "--k", "3"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto rows = records(r.out);
    EXPECT_NEAR(rows.back()["value"].get<double>(), 0.7095112913514548, 1e-15);
    EXPECT_EQ(rows.back()["formula_id"], "tail_mass");
}

TEST(Cli, ExperimentDeterministic) {
    const std::vector<std::string> args{"experiment", "khinchine", "--m", "2", "--n", "1000", "--trials", "10",
                                        "--seed", "42"};
    const auto a = run(args), b = run(args);
    ASSERT_EQ(a.code, 0) << a.err;
    EXPECT_EQ(a.out, b.out);
    auto t1 = args, t4 = args;
    t1.insert(t1.begin(), {"--threads", "1"});
    t4.insert(t4.begin(), {"--threads", "4"});
    const auto r1 = records(run(t1).out), r4 = records(run(t4).out);
    EXPECT_EQ(r1.back().dump(), r4.back().dump());
}

TEST(Cli, EveryRecordSelfDescribing) {
    for (const auto& args : std::vector<std::vector<std::string>>{
             {"expand", "--x", "0.3", "--n", "4"},
             {"evaluate", "--digits", "2,2,4", "--exact"},
             {"cylinder", "--digits", "2,3"},
             {"measure", "khinchine"},
             {"quantile", "--u", "0.25"},
             {"invariant-check", "--grid", "50", "--intervals", "5"},
             {"ulam", "--cells", "128", "--gap"},
             {"mixing", "--max-lag", "4", "--digit-cap", "10", "--fit-to", "4"},
             {"experiment", "max-digit", "--n", "500", "--trials", "3"},
             {"experiment", "philipp", "--n", "500", "--trials", "3", "--norming", "n_log_n_pow:2"}}) {
        const auto r = run(args);
        ASSERT_EQ(r.code, 0) << args[0] << ": " << r.err;
        const auto rows = records(r.out);
        ASSERT_GE(rows.size(), 2u);
        EXPECT_EQ(rows[0]["record"], "config");
        for (std::size_t k = 1; k < rows.size(); ++k) {
            EXPECT_TRUE(rows[k].contains("m")) << rows[k].dump();
            EXPECT_TRUE(rows[k].contains("formula_id")) << rows[k].dump();
        }
    }
}

TEST(Cli, ExitCodes) {
    EXPECT_EQ(run({}).code, 2);
    EXPECT_EQ(run({"expand"}).code, 2);
    EXPECT_EQ(run({"expand", "--x", "1/2", "--bogus"}).code, 2);
    EXPECT_EQ(run({"--help"}).code, 0);
    EXPECT_EQ(run({"measure", "--help"}).code, 0);

    const auto dom = run({"expand", "--x", "0.9", "--n", "3"});
    EXPECT_EQ(dom.code, 1);
    const auto err = json::parse(dom.err);
    EXPECT_EQ(err["error"], "domain");

    EXPECT_EQ(json::parse(run({"expand", "--x", "0.3", "--mode", "exact"}).err)["error"], "parameter");
    EXPECT_EQ(json::parse(run({"measure", "tail", "--m", "4", "--k", "5"}).err)["error"], "parameter");
    EXPECT_EQ(json::parse(run({"experiment", "khinchine", "--trials", "0"}).err)["error"], "config");
    EXPECT_EQ(json::parse(run({"mixing", "--method", "exact", "--max-lag", "2"}).err)["error"], "parameter");
}

TEST(Cli, ConfigFile) {
    const std::string path = temp_path("config.ini");
    {
        std::ofstream f(path);
        f << "[expand]\nx=1/2\nn=3\nmode=exact\n";
    }
    const auto r = run({"--config", path, "expand"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(records(r.out).back()["digits"], json::parse("[2,2,4]"));
    const auto o = run({"--config", path, "expand", "--n", "5"});
    EXPECT_EQ(records(o.out).back()["digits"], json::parse("[2,2,4,2,4]"));
    std::remove(path.c_str());
}

TEST(Cli, OutFile) {
    const std::string path = temp_path("out.json");
    const auto r = run({"--out", path, "measure", "digit", "--i", "2"});
    ASSERT_EQ(r.code, 0);
    EXPECT_TRUE(r.out.empty());
    std::ifstream in(path);
    std::stringstream buf;
    buf << in.rdbuf();
    EXPECT_NEAR(records(buf.str()).back()["value"].get<double>(), 0.2904887086485452, 1e-15);
    std::remove(path.c_str());
}

TEST(CliGolden, CsvHeadersStable) {
    EXPECT_EQ(std::string(thetaexp::kTrialCsvHeader), golden("trials_header.csv"));
    EXPECT_EQ(std::string(thetaexp::kRunningCsvHeader), golden("running_header.csv"));
    EXPECT_EQ(std::string(thetaexp::kMixingCsvHeader), golden("mixing_header.csv"));

    const auto trials = run({"--format", "csv", "experiment", "khinchine", "--n", "300", "--trials", "2"});
    ASSERT_EQ(trials.code, 0) << trials.err;
    EXPECT_EQ(first_data_header(trials.out), golden("trials_header.csv"));
    EXPECT_EQ(trials.out.rfind("# record=config", 0), 0u);

    const auto mixing = run({"--format", "csv", "mixing", "--max-lag", "4", "--digit-cap", "10", "--fit-to", "4"});
    ASSERT_EQ(mixing.code, 0) << mixing.err;
    EXPECT_EQ(first_data_header(mixing.out), golden("mixing_header.csv"));

    const std::string running = temp_path("running.csv"), density = temp_path("density.csv"),
                      psi = temp_path("psi.csv");
    ASSERT_EQ(run({"experiment", "diamond-vaaler", "--n", "300", "--trials", "2", "--running-out", running}).code, 0);
    ASSERT_EQ(run({"ulam", "--cells", "64", "--density-out", density}).code, 0);
    ASSERT_EQ(run({"mixing", "--max-lag", "3", "--digit-cap", "5", "--no-fit", "--curve-out", psi}).code, 0);
    for (const auto& [file, name] : std::vector<std::pair<std::string, std::string>>{
             {running, "running_header.csv"}, {density, "density_header.csv"}, {psi, "psi_header.csv"}}) {
        std::ifstream in(file);
        std::string header;
        std::getline(in, header);
        EXPECT_EQ(header, golden(name)) << file;
        std::remove(file.c_str());
    }
}
