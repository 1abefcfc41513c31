#include <qtdg/experiment.hpp>

#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace qtdg;

#ifndef QTDG_CLI_PATH
#define QTDG_CLI_PATH "qtdg"
#endif

namespace {

std::string csv(const RunRecord& r) {
    std::ostringstream os;
    write_csv(os, r);
    return os.str();
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(QTDG_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
}

std::filesystem::path scratch(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("qtdg_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace

TEST(Config, ParsesAllKeys) {
    const auto c = parse_config(R"({"problem": "smooth_dar", "space": "full", "degrees": [2, 3],
        "levels": [8, 16], "epsilon": 1, "gamma": {"2": 32, "3": 72}, "quad_order": 5,
        "output": "x.csv", "timing": false, "dar_norm": true, "nu": 0.5})");
    EXPECT_EQ(c.problem, "smooth_dar");
    EXPECT_EQ(c.space, SpaceKind::full_polynomial);
    EXPECT_EQ(c.gamma_for(3), 72.0);
    EXPECT_EQ(*c.quad_points, 5);
    EXPECT_FALSE(c.timing);
    EXPECT_EQ(parse_config(R"({"gamma": "8p2", "degrees": [3]})").gamma_for(3), 72.0);
    EXPECT_EQ(parse_config(R"({"gamma": 7.5})").gamma_for(4), 7.5);
}

TEST(Config, Rejections) {
    EXPECT_THROW(parse_config(R"({"bogus": 1})"), ParseError);
    EXPECT_THROW(parse_config(R"({"levels": [8, 4]})"), ContractError);
    EXPECT_THROW(parse_config(R"({"degrees": [-1]})"), ContractError);
    EXPECT_THROW(parse_config(R"({"problem": "nope"})"), UnknownProblem);
    EXPECT_THROW(parse_config(R"({"gamma": {"2": 32}, "degrees": [3]})"), ContractError);
    EXPECT_THROW(parse_config("{not json"), ParseError);
    EXPECT_THROW(parse_config(R"({"space": "hp"})"), ParseError);
}

TEST(Run, CsvIsByteStableWithTimingOff) {
    ExperimentConfig c;
    c.problem = "smooth_dar";
    c.degrees = {2};
    c.levels = {2, 4};
    c.timing = false;
    const auto a = csv(run(c));
    const auto b = csv(run(c));
    EXPECT_EQ(a, b);
    EXPECT_EQ(a.substr(0, a.find('\n')), kCsvHeader);
    // h_actual recorded next to h_nominal
    EXPECT_NE(a.find("5.0000000000e-01,7.0710678119e-01"), std::string::npos);
}

TEST(Compare, PerElementDofs) {
    ExperimentConfig c;
    c.problem = "exp_diffusion";
    c.degrees = {1, 4};
    c.levels = {2};
    c.timing = false;
    const auto rec = compare_spaces(c);
    ASSERT_EQ(rec.cells.size(), 4u);
    const auto ne = static_cast<Eigen::Index>(generate_structured(2, 2).num_elements());
    EXPECT_EQ(rec.cells[0].report.dofs, 3 * ne);   // qt, p=1
    EXPECT_EQ(rec.cells[1].report.dofs, 9 * ne);   // qt, p=4
    EXPECT_EQ(rec.cells[2].report.dofs, 3 * ne);   // full, p=1
    EXPECT_EQ(rec.cells[3].report.dofs, 15 * ne);  // full, p=4
}

TEST(Snapshot, DefaultGammaTable) {
    EXPECT_EQ(*snapshot_gamma("advdom_neumann", 1e-1), 10.0);
    EXPECT_EQ(*snapshot_gamma("advdom_neumann", 1e-2), 1.0);
    EXPECT_EQ(*snapshot_gamma("advdom_dirichlet", 1e-2), 1e-1);
    EXPECT_EQ(*snapshot_gamma("advdom_dirichlet", 1e-4), 1e-3);
    EXPECT_EQ(*snapshot_gamma("reactdom", 1e-4), 1e-2);
    EXPECT_FALSE(snapshot_gamma("reactdom", 0.3).has_value());
    EXPECT_FALSE(snapshot_gamma("smooth_dar", 0.1).has_value());
}

TEST(Snapshot, AdvectionDominatedRange) {
    SnapshotConfig s;
    s.problem = "advdom_neumann";
    s.nu = 0.1;
    const auto g = snapshot(s);
    ASSERT_EQ(g.size(), 101u * 101u);
    const auto [lo, hi] = std::minmax_element(g.begin(), g.end());
    EXPECT_GE(*lo, -0.2);
    EXPECT_LE(*hi, 1.2);
    // row j is x2 = j/100: the inflow value 1 on x1 = 0
    EXPECT_NEAR(g[50 * 101], 1.0, 0.2);
}

TEST(Snapshot, ReactionDominatedLayers) {
    SnapshotConfig s;
    s.problem = "reactdom";
    s.nu = 1e-4;
    const auto g = snapshot(s);
    EXPECT_LT(std::abs(g[50 * 101 + 50]), 0.05);
    EXPECT_GT(g[50 * 101], 0.5);
}

TEST(Cli, ExitCodes) {
    const auto dir = scratch("cli");
    EXPECT_EQ(run_cli("convergence --problem exp_diffusion --pmin 1 --pmax 1 --levels 2,4 --no-timing --out " + dir.string()), 0);
    EXPECT_TRUE(std::filesystem::exists(dir / "convergence_exp_diffusion_qt.csv"));
    EXPECT_EQ(run_cli("convergence --problem nope --out " + dir.string()), 2);
    EXPECT_EQ(run_cli("convergence --problem exp_diffusion --levels 4,2 --out " + dir.string()), 2);
    EXPECT_EQ(run_cli("frobnicate"), 2);
    EXPECT_EQ(run_cli("run --config " + (dir / "missing.json").string()), 2);
    // K_11 vanishes nowhere in the builtins; a numerical failure comes from a singular solve
    EXPECT_EQ(run_cli("snapshot --problem reactdom --nu 0.3 --out " + (dir / "s.txt").string()), 2);
    {
        std::ofstream cfg(dir / "cfg.json");
        cfg << R"({"problem": "poly_reaction", "degrees": [2], "levels": [2, 4], "gamma": 32, "timing": false, "output": ")"
            << (dir / "out.csv").string() << "\"}";
    }
    EXPECT_EQ(run_cli("run --config " + (dir / "cfg.json").string()), 0);
    std::ifstream in(dir / "out.csv");
    std::string header;
    std::getline(in, header);
    EXPECT_EQ(header, kCsvHeader);
    EXPECT_EQ(run_cli("snapshot --problem advdom_dirichlet --nu 0.01 --p 2 --n 4 --out " + (dir / "s.txt").string()), 0);
    std::ifstream snap(dir / "s.txt");
    EXPECT_EQ(std::count(std::istreambuf_iterator<char>(snap), std::istreambuf_iterator<char>(), '\n'), 101 * 101);
}
