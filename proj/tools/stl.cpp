// Command-line front end: training, transfer, reference solves, benchmarks, stiffness.
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "stlpinn/bench.hpp"
#include "stlpinn/error.hpp"

using namespace stlpinn;

namespace {

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(Errc::IoError, "cannot open '" + path + "' for writing");
    out << text;
    if (!out) throw Error(Errc::IoError, "failed writing '" + path + "'");
}

std::vector<Method> parse_methods(const std::string& list) {
    std::vector<Method> out;
    std::stringstream ss(list);
    for (std::string item; std::getline(ss, item, ',');)
        if (!item.empty()) out.push_back(parse_method(item));
    return out;
}

TransferOptions transfer_options(const std::string& solver, double ridge) {
    TransferOptions o;
    if (solver == "qr")
        o.solver = TransferSolver::StackedQR;
    else if (solver != "normal")
        throw Error(Errc::InvalidConfig, "unknown solver '" + solver + "'");
    o.ridge = ridge;
    if (ridge > 0.0) std::cerr << "transfer: ridge " << ridge << " added to the operator\n";
    return o;
}

struct TrainArgs {
    std::string config, out;
};

struct TransferArgs {
    std::string ckpt, out, solver = "normal";
    double alpha = 0.0;
    std::size_t p = 0;
    double beta = -1.0;
    double ridge = 0.0;
    std::size_t points = 1001;
};

struct SolveArgs {
    std::string family, method, out;
    double alpha = 0.0;
    double rtol = 1e-10;
    double beta = -1.0;
    std::size_t points = 1001;
    std::size_t cells = 200;
};

struct BenchArgs {
    std::string protocol, config, out_dir, methods;
    bool with_vanilla = false;
    std::vector<std::string> checkpoints;
};

struct StiffnessArgs {
    std::string family;
    double alpha = 0.0;
};

int run_train(const TrainArgs& a) {
    const auto cfg = load_config(a.config);
    const auto seed = cfg.seeds.empty() ? 0 : cfg.seeds.front();
    const auto ck = checkpoint_for_seed(cfg, seed, cfg.heads);
    save_checkpoint(ck, a.out);
    const auto& h = ck.history;
    if (!h.total.empty())
        std::cout << "trained " << ck.heads.size() << " heads, final loss " << h.total.back() << "\n";
    return 0;
}

int run_transfer(const TransferArgs& a) {
    const auto ck = load_checkpoint(a.ckpt);
    FamilyParams params;
    if (a.beta >= 0.0) params.beta = a.beta;
    const auto target = instantiate(ck.family(), a.alpha, params);
    const auto opts = transfer_options(a.solver, a.ridge);
    const auto sol = target.is_linear() ? transfer_linear(ck, target, opts)
                                        : transfer_nonlinear(ck, target, a.p, opts);
    ExperimentConfig cfg;
    cfg.eval_points = a.points;
    const auto grid = evaluation_grid(target, cfg);
    write_text(a.out, solution_csv(grid, sol.evaluate(grid.points)));
    std::cout << "transfer to alpha=" << a.alpha << " in " << sol.total_seconds() << " s\n";
    return 0;
}

int run_solve(const SolveArgs& a) {
    FamilyParams params;
    if (a.beta >= 0.0) params.beta = a.beta;
    const auto spec = instantiate(parse_family(a.family), a.alpha, params);
    ExperimentConfig cfg;
    cfg.eval_points = a.points;
    cfg.ar_cells = a.cells;
    const auto grid = evaluation_grid(spec, cfg);
    Tolerances tol;
    tol.rtol = tol.atol = a.rtol;
    const Method m = parse_method(a.method);
    SolverSolution s;
    if (m == Method::RK45 && spec.is_ode()) {
        s = rk45_solve(spec, tol, grid.times);
    } else if (m == Method::Radau && spec.is_ode()) {
        s = radau_solve(spec, tol, grid.times);
    } else if (m == Method::LWRadau && !spec.is_ode()) {
        ArGrid g;
        g.cells = a.cells;
        g.reaction = ReactionSubstep::Radau;
        s = godunov_split_solve(spec, g, grid.times, tol);
    } else {
        throw Error(Errc::InvalidConfig, "method '" + a.method + "' does not apply to " + a.family);
    }
    Eigen::MatrixXd values(static_cast<Eigen::Index>(s.values.cols()), static_cast<Eigen::Index>(s.values.rows()));
    for (std::size_t i = 0; i < s.values.rows(); ++i)
        for (std::size_t c = 0; c < s.values.cols(); ++c)
            values(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(i)) = s.values(i, c);
    write_text(a.out, solution_csv(grid, values));
    std::cout << a.method << ": " << s.accepted_steps << " accepted, " << s.rejected_steps << " rejected steps, "
              << s.wall_clock_s << " s\n";
    return 0;
}

int run_bench(const BenchArgs& a) {
    auto cfg = load_config(a.config);
    cfg.out_dir = a.out_dir;
    if (a.with_vanilla) cfg.with_vanilla = true;
    if (!a.methods.empty()) cfg.methods = parse_methods(a.methods);
    if (!a.checkpoints.empty()) cfg.checkpoints = a.checkpoints;
    std::filesystem::create_directories(a.out_dir);
    const std::filesystem::path dir(a.out_dir);
    if (a.protocol == "perf") {
        const auto rows = run_performance(cfg);
        emit_results(rows, (dir / "performance.csv").string(), OutputFormat::Csv);
        if (!rows.empty()) emit_results(rows, (dir / "performance.svg").string(), OutputFormat::Svg);
        std::cout << rows.size() << " rows\n";
    } else if (a.protocol == "scale") {
        const auto rows = run_scalability(cfg);
        emit_scalability(rows, (dir / "scalability.csv").string());
        std::cout << rows.size() << " rows\n";
    } else {
        const auto res = run_reparametrization(cfg);
        emit_results(res.rows, (dir / "reparametrization.csv").string(), OutputFormat::Csv);
        emit_reparametrization_summary(res.summary, family_name(cfg.family), cfg.repar.alpha,
                                       (dir / "reparametrization_summary.csv").string());
        std::cout << res.summary.samples << " samples, mean MAE " << res.summary.mean_mae << ", mean solve "
                  << res.summary.mean_solve_s << " s, full transfer " << res.summary.full_transfer_s << " s\n";
    }
    return 0;
}

int run_stiffness(const StiffnessArgs& a) {
    const auto r = stiffness_ratio(instantiate(parse_family(a.family), a.alpha));
    std::cout << "eigenvalues " << r.eigenvalues[0].real() << (r.eigenvalues[0].imag() < 0 ? "" : "+")
              << r.eigenvalues[0].imag() << "i, " << r.eigenvalues[1].real()
              << (r.eigenvalues[1].imag() < 0 ? "" : "+") << r.eigenvalues[1].imag() << "i\n"
              << "stiffness ratio " << r.ratio << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"stiff transfer learning for physics-informed networks"};
    app.require_subcommand(1);

    TrainArgs tr;
    auto* train_cmd = app.add_subcommand("train", "train a multi-head network from a config");
    train_cmd->add_option("--config", tr.config)->required();
    train_cmd->add_option("--out", tr.out)->required();

    TransferArgs tf;
    auto* transfer_cmd = app.add_subcommand("transfer", "one-shot transfer to a new alpha");
    transfer_cmd->add_option("--ckpt", tf.ckpt)->required();
    transfer_cmd->add_option("--alpha", tf.alpha)->required();
    transfer_cmd->add_option("--p", tf.p, "cascade order for polynomial targets");
    transfer_cmd->add_option("--beta", tf.beta, "nonlinearity strength");
    transfer_cmd->add_option("--solver", tf.solver)->check(CLI::IsMember({"normal", "qr"}));
    transfer_cmd->add_option("--ridge", tf.ridge);
    transfer_cmd->add_option("--points", tf.points);
    transfer_cmd->add_option("--out", tf.out)->required();

    SolveArgs sv;
    auto* solve_cmd = app.add_subcommand("solve", "reference solve");
    solve_cmd->add_option("--family", sv.family)->required();
    solve_cmd->add_option("--alpha", sv.alpha)->required();
    solve_cmd->add_option("--method", sv.method)->required()->check(CLI::IsMember({"rk45", "radau", "lw-radau"}));
    solve_cmd->add_option("--rtol", sv.rtol);
    solve_cmd->add_option("--beta", sv.beta);
    solve_cmd->add_option("--points", sv.points);
    solve_cmd->add_option("--cells", sv.cells);
    solve_cmd->add_option("--out", sv.out)->required();

    BenchArgs bn;
    auto* bench_cmd = app.add_subcommand("bench", "experiment protocols");
    bench_cmd->add_option("protocol", bn.protocol)->required()->check(CLI::IsMember({"perf", "scale", "repar"}));
    bench_cmd->add_option("--config", bn.config)->required();
    bench_cmd->add_option("--out-dir", bn.out_dir)->required();
    bench_cmd->add_flag("--with-vanilla", bn.with_vanilla);
    bench_cmd->add_option("--methods", bn.methods, "comma list, e.g. stl,radau");
    bench_cmd->add_option("--checkpoint", bn.checkpoints, "reuse checkpoints instead of training");

    StiffnessArgs st;
    auto* stiff_cmd = app.add_subcommand("stiffness", "eigenvalues and stiffness ratio");
    stiff_cmd->add_option("--family", st.family)->required();
    stiff_cmd->add_option("--alpha", st.alpha)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (*train_cmd) return run_train(tr);
        if (*transfer_cmd) return run_transfer(tf);
        if (*solve_cmd) return run_solve(sv);
        if (*bench_cmd) return run_bench(bn);
        return run_stiffness(st);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return is_numerical(e.code()) ? 2 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
