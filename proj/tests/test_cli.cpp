#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

// Runs the CLI with stdout/stderr discarded and returns its exit code.
int run(const std::string& args) {
    const std::string cmd = std::string(EXOVAL_CLI) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() / ("exoval_cli_" + std::to_string(::getpid()));
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }
    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    fs::path dir_;
};

}  // namespace

TEST_F(Cli, HelpAndUsageErrors) {
    EXPECT_EQ(run("--help"), 0);
    EXPECT_EQ(run(""), 2);
    EXPECT_EQ(run("bogus"), 2);
    EXPECT_EQ(run("experiment bogus --seed 1"), 2);
    EXPECT_EQ(run("experiment controlled"), 2);  // --seed is required
    EXPECT_EQ(run("datagen --exotic asian --range xi=0.8,0.1 --out " + path("x.csv")), 2);
    EXPECT_EQ(run("datagen --exotic rainbow --out " + path("x.csv")), 2);
    EXPECT_EQ(run("train --data " + path("missing.csv")), 2);
}

TEST_F(Cli, DatagenIsDeterministicAndWritesProvenance) {
    const std::string args = "datagen --model heston --exotic asian --n 12 --paths 500 --seed 7 --threads 2 --out ";
    ASSERT_EQ(run(args + path("a.csv")), 0);
    ASSERT_EQ(run(args + path("b.csv")), 0);
    const std::string a = slurp(path("a.csv"));
    EXPECT_EQ(a, slurp(path("b.csv")));
    std::istringstream lines(a);
    std::string header;
    std::getline(lines, header);
    EXPECT_EQ(std::count(header.begin(), header.end(), ','), 28);
    int rows = 0;
    for (std::string l; std::getline(lines, l);) rows += !l.empty();
    EXPECT_EQ(rows, 12);
    const auto prov = nlohmann::json::parse(slurp(path("a.csv.json")));
    EXPECT_EQ(prov["exotic"], "asian_call");
    EXPECT_EQ(prov["model"], "heston");
}

TEST_F(Cli, TrainThenSensitivity) {
    ASSERT_EQ(run("datagen --exotic barrier --n 120 --paths 300 --seed 3 --out " + path("ko.csv")), 0);
    ASSERT_EQ(run("train --data " + path("ko.csv") + " --max-epochs 5 --seed 4 --out " + path("ko.json")), 0);
    ASSERT_EQ(run("train --data " + path("ko.csv") + " --max-epochs 5 --seed 4 --out " + path("ko2.json")), 0);
    EXPECT_EQ(slurp(path("ko.json")), slurp(path("ko2.json")));
    const auto weights = nlohmann::json::parse(slurp(path("ko.json")));
    EXPECT_TRUE(weights.contains("metadata"));
    EXPECT_TRUE(fs::exists(path("ko.json.history.csv")));

    const std::string sens = "experiment sensitivity --seed 5 --panel 20 --weights " + path("ko.json") + " --out-dir ";
    ASSERT_EQ(run(sens + path("s1")), 0);
    ASSERT_EQ(run(sens + path("s2")), 0);
    const std::string s1 = slurp(path("s1/sensitivity_summary.json"));
    EXPECT_FALSE(s1.empty());
    EXPECT_EQ(s1, slurp(path("s2/sensitivity_summary.json")));
}

TEST_F(Cli, FitSurfaceFromQuotes) {
    {
        std::ofstream q(path("quotes.csv"));
        q << "date,T_years,strike,spot,implied_vol\n" << std::setprecision(17);
        q << "2019-01-02,0.5,3750,2500,0.3\n";  // moneyness 1.5, skipped
        const double T[] = {1.0 / 12, 0.25, 0.5, 1.0, 2.0};
        const double m[] = {0.7, 0.85, 1.0, 1.15, 1.3};
        for (const char* day : {"2019-01-02", "2019-01-03"})
            for (double t : T)
                for (double k : m) q << day << ',' << t << ',' << k * 2500 << ",2500," << 0.2 + 0.1 * (1 - k) << '\n';
    }
    ASSERT_EQ(run("fit-surface --quotes " + path("quotes.csv") + " --mask snp19 --rate 0.02 --out " + path("p.csv")),
              0);
    std::istringstream panel(slurp(path("p.csv")));
    std::string header;
    std::getline(panel, header);
    EXPECT_EQ(header, "day,spot,rate,maturity,moneyness,vol,active");
    int rows = 0;
    for (std::string l; std::getline(panel, l);) {
        if (l.empty()) continue;
        ++rows;
        // Quotes sit on the nodes, so every fitted vol equals its quote.
        double spot, rate, T, k, vol;
        int active;
        const auto comma = l.find(',');
        ASSERT_EQ(std::sscanf(l.c_str() + comma + 1, "%lf,%lf,%lf,%lf,%lf,%d", &spot, &rate, &T, &k, &vol, &active), 6);
        EXPECT_NEAR(vol, 0.2 + 0.1 * (1 - k), 1e-10) << l;
    }
    EXPECT_EQ(rows, 50);
}

TEST_F(Cli, EmptyQuotesAreAUsageError) {
    std::ofstream(path("empty.csv")) << "date,T_years,strike,spot,implied_vol\n";
    EXPECT_EQ(run("fit-surface --quotes " + path("empty.csv") + " --out " + path("p.csv")), 2);
}
