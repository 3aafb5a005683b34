#include "cli_support.hpp"

#include "convsl/convsl.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace cli_support;

namespace {

/// Rows of a CSV file (header dropped), split on commas.
std::vector<std::vector<std::string>> csv_rows(const std::filesystem::path& p) {
    std::istringstream in(read_file(p));
    std::string line;
    std::getline(in, line);
    std::vector<std::vector<std::string>> rows;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::stringstream ls(line);
        std::string c;
        while (std::getline(ls, c, ',')) cells.push_back(c);
        rows.push_back(cells);
    }
    return rows;
}

}  // namespace

TEST(Cli, HelpExitsCleanly) { EXPECT_EQ(run("--help"), 0); }

TEST(Cli, UsageErrorsExitWithInputCode) {
    const auto dir = scratch("cli_usage");
    EXPECT_EQ(run(""), 2);
    EXPECT_EQ(run("forward"), 2);
    EXPECT_EQ(run("forward --problem " + (dir / "missing.txt").string()), 2);
    write_file(dir / "bad.txt", "grid = 128\ncolour = red\n");
    EXPECT_EQ(run("forward --problem " + (dir / "bad.txt").string() + " --out " + dir.string()), 2);
    write_file(dir / "odd.txt", "grid = 127\n");
    EXPECT_EQ(run("forward --problem " + (dir / "odd.txt").string() + " --out " + dir.string()), 2);
}

TEST(Cli, ForwardShiftsSquaresByConstantPotential) {
    const auto dir = scratch("cli_forward");
    write_file(dir / "p.txt", "grid = 128\nq = const:1\nK = 10\n");
    ASSERT_EQ(run("forward --problem " + (dir / "p.txt").string() + " --out " + dir.string()), 0);
    const auto rows = csv_rows(dir / "eigenvalues.csv");
    ASSERT_EQ(rows.size(), 10u);
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const double n = static_cast<double>(k + 1);
        EXPECT_NEAR(std::stod(rows[k][1]), n * n + 1.0, 1e-4) << k + 1;
        EXPECT_NEAR(std::stod(rows[k][2]), 0.0, 1e-10);
    }
    const auto manifest = read_file(dir / "manifest.txt");
    EXPECT_NE(manifest.find("# command: forward"), std::string::npos);
    EXPECT_NE(manifest.find("eigenvalues.csv"), std::string::npos);
    // The manifest is itself a valid problem file describing the run.
    const auto pf = convsl::load_problem(dir / "manifest.txt");
    EXPECT_EQ(pf.grid, 128u);
    EXPECT_EQ(pf.q, "const:1");
    EXPECT_EQ(pf.K, 10u);
}

TEST(Cli, CommandLineOverridesProblemFile) {
    const auto dir = scratch("cli_override");
    write_file(dir / "p.txt", "grid = 128\nK = 10\n");
    ASSERT_EQ(run("forward --problem " + (dir / "p.txt").string() + " --out " + dir.string() + " --K 6"), 0);
    EXPECT_EQ(csv_rows(dir / "eigenvalues.csv").size(), 6u);
}

TEST(Cli, RecoverVFromSquaresIsZero) {
    const auto dir = scratch("cli_v");
    write_file(dir / "p.txt", "grid = 128\nK = 4\nspectrum = [1 0 4 0 9 0 16 0]\n");
    ASSERT_EQ(run("recover-v --problem " + (dir / "p.txt").string() + " --out " + dir.string()), 0);
    for (const auto& r : csv_rows(dir / "v.csv")) EXPECT_NEAR(std::abs(std::stod(r[1])), 0.0, 1e-12);
}

TEST(Cli, ForwardOutputFeedsInversion) {
    const auto dir = scratch("cli_chain");
    write_file(dir / "p.txt", "grid = 200\nq = cos\nM = cos:0.2\nK = 30\n");
    ASSERT_EQ(run("forward --problem " + (dir / "p.txt").string() + " --out " + dir.string()), 0);
    write_file(dir / "inv.txt", "grid = 200\nq = cos\nM = cos:0.2\nK = 30\nspectrum_file = eigenvalues.csv\n");
    ASSERT_EQ(run("invert --problem " + (dir / "inv.txt").string() + " --out " + dir.string()), 0);
    const auto manifest = read_file(dir / "manifest.txt");
    const auto at = manifest.find("# result weighted_relative_error = ");
    ASSERT_NE(at, std::string::npos);
    EXPECT_LE(std::stod(manifest.substr(at + 35)), 5e-2);
    EXPECT_TRUE(std::filesystem::exists(dir / "m.csv"));
    EXPECT_TRUE(std::filesystem::exists(dir / "trace.txt"));
}

TEST(Cli, InconsistentSpectrumExitsWithDataCode) {
    const auto dir = scratch("cli_inconsistent");
    std::string s = "grid = 128\nK = 20\nspectrum = [";
    for (int n = 1; n <= 20; ++n) s += " " + std::to_string(n * n + (n > 10 ? 3 : 0)) + " 0";
    s += " ]\n";
    write_file(dir / "p.txt", s);
    EXPECT_EQ(run("invert --problem " + (dir / "p.txt").string() + " --out " + dir.string()), 4);
}

TEST(Cli, StabilityWritesFixedColumns) {
    const auto dir = scratch("cli_stab");
    write_file(dir / "p.txt", "grid = 128\nq = cos\nM = cos:0.2\nK = 20\neps = [0 1e-2]\n");
    ASSERT_EQ(run("stability --problem " + (dir / "p.txt").string() + " --out " + dir.string()), 0);
    const auto rows = csv_rows(dir / "stability.csv");
    ASSERT_EQ(rows.size(), 4u);
    for (const auto& r : rows) {
        ASSERT_EQ(r.size(), 8u);
        EXPECT_EQ(r[7], "ok");
    }
}
