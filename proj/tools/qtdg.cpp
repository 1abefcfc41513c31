// qtdg: command-line front end for the quasi-Trefftz DG experiments.
//
//   qtdg run --config FILE
//   qtdg convergence --problem NAME --space qt|full --pmin A --pmax B --levels 4,8,16 ...
//   qtdg compare --problem NAME --pmin A --pmax B --levels 16 ...
//   qtdg snapshot --problem NAME --nu X --gamma G --p P --n N --out FILE
//
// Exit codes: 0 success, 2 configuration error, 3 numerical failure.

#include <qtdg/experiment.hpp>

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct SweepOptions {
    std::string problem = "exp_diffusion";
    double nu = 0.1;
    std::string space = "qt";
    int pmin = 1;
    int pmax = 3;
    std::vector<int> levels{4, 8, 16, 32};
    int epsilon = -1;
    std::string gamma = "8p2";
    int quad_order = 0;
    std::string out = ".";
    bool no_timing = false;
    bool dar = false;
};

void add_sweep_options(CLI::App* cmd, SweepOptions& o, bool with_space) {
    cmd->add_option("--problem", o.problem, "builtin problem name")->required();
    cmd->add_option("--nu", o.nu, "diffusion scale of the dominated regimes");
    if (with_space) cmd->add_option("--space", o.space, "qt or full")->check(CLI::IsMember({"qt", "full"}));
    cmd->add_option("--pmin", o.pmin, "lowest degree");
    cmd->add_option("--pmax", o.pmax, "highest degree");
    cmd->add_option("--levels", o.levels, "mesh levels n (h = 1/n)")->delimiter(',');
    cmd->add_option("--epsilon", o.epsilon, "-1 SIPG, 0 IIPG, 1 NIPG")->check(CLI::Range(-1, 1));
    cmd->add_option("--gamma", o.gamma, "penalty value or 8p2");
    cmd->add_option("--quad-order", o.quad_order, "Gauss points per direction (default p+1)");
    cmd->add_option("--out", o.out, "output directory");
    cmd->add_flag("--no-timing", o.no_timing, "write 0 for walltime so the CSV is byte-stable");
    cmd->add_flag("--dar-norm", o.dar, "also compute the dar-norm error");
}

qtdg::ExperimentConfig to_config(const SweepOptions& o) {
    qtdg::ExperimentConfig c;
    c.problem = o.problem;
    c.nu = o.nu;
    c.space = qtdg::parse_space(o.space);
    if (o.pmax < o.pmin) throw qtdg::ContractError("pmax < pmin");
    c.degrees.clear();
    for (int p = o.pmin; p <= o.pmax; ++p) c.degrees.push_back(p);
    c.levels = o.levels;
    c.epsilon = o.epsilon;
    if (o.gamma == "8p2") {
        c.gamma_rule = qtdg::GammaRule::eight_p_squared;
    } else {
        c.gamma_rule = qtdg::GammaRule::fixed;
        try {
            c.gamma = std::stod(o.gamma);
        } catch (const std::exception&) {
            throw qtdg::ParseError("--gamma must be a number or 8p2");
        }
    }
    if (o.quad_order > 0) c.quad_points = o.quad_order;
    c.timing = !o.no_timing;
    c.dar_norm = o.dar;
    c.validate();
    return c;
}

void write_record(const qtdg::RunRecord& rec, const std::string& path) {
    if (path.empty() || path == "-") {
        qtdg::write_csv(std::cout, rec);
        return;
    }
    const std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream os(p);
    if (!os) throw qtdg::ContractError("cannot open " + path);
    qtdg::write_csv(os, rec);
    std::cerr << "wrote " << path << '\n';
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw qtdg::ContractError("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void print_warnings(const qtdg::RunRecord& rec) {
    std::vector<std::string> seen;
    for (const auto& c : rec.cells)
        for (const auto& w : c.warnings)
            if (std::find(seen.begin(), seen.end(), w) == seen.end()) seen.push_back(w);
    for (const auto& w : seen) std::cerr << "warning: " << w << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"quasi-Trefftz DG for diffusion-advection-reaction problems"};
    app.require_subcommand(1);

    std::string config_path;
    auto* run_cmd = app.add_subcommand("run", "run the experiment described by a JSON config");
    run_cmd->add_option("--config", config_path, "config file")->required();

    SweepOptions conv;
    auto* conv_cmd = app.add_subcommand("convergence", "h-convergence sweep");
    add_sweep_options(conv_cmd, conv, true);

    SweepOptions cmp;
    cmp.levels = {16};
    cmp.pmin = 1;
    cmp.pmax = 4;
    auto* cmp_cmd = app.add_subcommand("compare", "quasi-Trefftz vs full polynomial space");
    add_sweep_options(cmp_cmd, cmp, false);

    qtdg::SnapshotConfig snap;
    double snap_gamma = 0.0;
    std::string snap_out = "snapshot.txt";
    auto* snap_cmd = app.add_subcommand("snapshot", "sample u_h on a 101x101 grid");
    snap_cmd->add_option("--problem", snap.problem, "advdom_neumann, advdom_dirichlet or reactdom")->required();
    snap_cmd->add_option("--nu", snap.nu, "diffusion scale");
    auto* g_opt = snap_cmd->add_option("--gamma", snap_gamma, "penalty (default from the problem and nu)");
    snap_cmd->add_option("--p", snap.p, "degree");
    snap_cmd->add_option("--n", snap.n, "mesh level");
    snap_cmd->add_option("--epsilon", snap.epsilon, "-1 SIPG, 0 IIPG, 1 NIPG")->check(CLI::Range(-1, 1));
    snap_cmd->add_option("--out", snap_out, "output file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }

    try {
        if (*run_cmd) {
            const auto cfg = qtdg::parse_config(slurp(config_path));
            const auto rec = qtdg::run(cfg);
            print_warnings(rec);
            write_record(rec, cfg.output);
        } else if (*conv_cmd) {
            const auto cfg = to_config(conv);
            const auto rec = qtdg::run(cfg);
            print_warnings(rec);
            write_record(rec, conv.out + "/convergence_" + cfg.problem + "_" + conv.space + ".csv");
        } else if (*cmp_cmd) {
            const auto cfg = to_config(cmp);
            const auto rec = qtdg::compare_spaces(cfg);
            print_warnings(rec);
            write_record(rec, cmp.out + "/compare_" + cfg.problem + ".csv");
        } else if (*snap_cmd) {
            if (g_opt->count() > 0) snap.gamma = snap_gamma;
            const auto grid = qtdg::snapshot(snap);
            std::ofstream os(snap_out);
            if (!os) throw qtdg::ContractError("cannot open " + snap_out);
            os.precision(17);
            for (double v : grid) os << v << '\n';
            std::cerr << "wrote " << snap_out << '\n';
        }
    } catch (const qtdg::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.error_class() == qtdg::ErrorClass::config ? kExitConfig : kExitNumerical;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: output: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNumerical;
    }
    return 0;
}
