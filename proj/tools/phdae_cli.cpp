// Batch front end: model generation, analysis reports, simulation,
// reduction sweeps, solver benchmarks and coupling over file-based
// scenarios. Exit codes: 0 success, 1 malformed scenario, 2 validation
// failure, 3 numerical failure.

#include "phdae/analysis.hpp"
#include "phdae/integrate.hpp"
#include "phdae/interconnect.hpp"
#include "phdae/io.hpp"
#include "phdae/kernels.hpp"
#include "phdae/models.hpp"
#include "phdae/mor.hpp"
#include "phdae/solve.hpp"
#include "phdae/transform.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace phdae;

namespace {

struct Options {
    std::string scenario_path;
    std::string out_dir = ".";
    std::uint64_t seed = 1;
    double tol = -1.0;
};

json load_scenario(const Options& opt) {
    if (opt.scenario_path.empty()) throw InvalidInput("missing --scenario file");
    std::ifstream in(opt.scenario_path);
    if (!in) throw InvalidInput("cannot open scenario " + opt.scenario_path);
    return json::parse(in);
}

LtiPhDae build_model(const json& spec, const Options& opt) {
    if (spec.contains("envelope"))
        return io::load_envelope(fs::path(opt.scenario_path).parent_path() /
                                 spec.at("envelope").get<std::string>());
    const std::string builder = spec.at("builder").get<std::string>();
    const json params = spec.value("params", json::object());
    const auto seed = params.value("seed", opt.seed);
    if (builder == "power-network") {
        models::PowerNetworkParams p;
        p.L = params.value("L", p.L);
        p.C1 = params.value("C1", p.C1);
        p.C2 = params.value("C2", p.C2);
        p.R_L = params.value("R_L", p.R_L);
        p.R_G = params.value("R_G", p.R_G);
        p.R_R = params.value("R_R", p.R_R);
        return models::power_network_model(p);
    }
    if (builder == "msd" || builder == "msd-uode") {
        models::MsdParams p;
        p.g = params.value("g", p.g);
        p.mass = params.value("m", p.mass);
        p.k = params.value("k", p.k);
        p.d = params.value("d", p.d);
        p.kappa = params.value("kappa", p.kappa);
        p.delta = params.value("delta", p.delta);
        return builder == "msd" ? models::msd_model(p) : models::msd_uode(p);
    }
    if (builder == "gas")
        return models::gas_like_model(params.value("n1", 3), params.value("n2", 4),
                                      params.value("n3", 2), seed);
    if (builder == "rlc-random")
        return models::rlc_model(models::random_rlc_graph(params.value("nodes", 10), seed));
    throw InvalidInput("unknown builder '" + builder + "'");
}

json staircase_report(const transform::StaircaseDecomposition& dec) {
    json j;
    j["block_sizes"] = {dec.n1, dec.n2, dec.n3, dec.n4, dec.n5};
    j["regular"] = dec.regular;
    j["kronecker_index"] = dec.index_label();
    j["unique_solutions"] = dec.unique_solutions;
    j["rank_gaps"] = {dec.rank_gaps[0], dec.rank_gaps[1], dec.rank_gaps[2]};
    j["zero_defect"] = dec.zero_defect;
    return j;
}

json validation_report(const ValidationReport& rep) {
    json j;
    j["pass"] = rep.pass;
    j["skew_defect"] = rep.skew_defect;
    j["dissipation_min_eig"] = rep.dissipation_min_eig;
    j["symmetry_defect"] = rep.symmetry_defect;
    if (!rep.pass) j["reasons"] = rep.reasons;
    return j;
}

int run_analyze(const LtiPhDae& sys, const json& task, const Options& opt) {
    json out;
    const auto val = validate_structure(sys);
    out["validation"] = validation_report(val);
    if (sys.is_standard_form()) {
        const auto dec = transform::staircase_dhdae(sys.E, sys.J, sys.R, opt.tol);
        out["staircase"] = staircase_report(dec);
        if (task.value("export_transforms", false))
            io::write_matrix_market(dec.Z, fs::path(opt.out_dir) / "staircase_Z.mtx");
        const auto stab = analysis::stability_spectrum(sys.E, sys.J, sys.R);
        json sj;
        sj["verdict"] = analysis::to_string(stab.verdict);
        sj["max_real_part"] = stab.max_real_part;
        sj["imaginary_axis_semisimple"] = stab.imaginary_axis_semisimple;
        json evs = json::array();
        for (Index i = 0; i < stab.finite_eigenvalues.size(); ++i)
            evs.push_back({stab.finite_eigenvalues(i).real(),
                           stab.finite_eigenvalues(i).imag()});
        sj["finite_eigenvalues"] = evs;
        out["stability"] = sj;
        out["asymptotic_stability"] =
            analysis::to_string(analysis::asymptotic_stability_dae(sys.E, sys.J, sys.R));
        if (dec.regular && dec.kronecker_index <= 1) {
            const auto ode = transform::reduce_to_ode(dec);
            if (ode.E.rows() > 0) {
                const auto eig = kernels::sym_eig(ode.E);
                Vec isq = eig.eigenvalues.array().sqrt().inverse().matrix();
                const Mat half =
                    eig.eigenvectors * isq.asDiagonal() * eig.eigenvectors.transpose();
                const auto hypo = analysis::hypocoercivity_index(
                    skew_part(half * ode.J * half), sym_part(half * ode.R * half));
                out["hypocoercivity"] = {
                    {"finite", hypo.finite},
                    {"index", hypo.finite ? hypo.index : -1},
                    {"cross_checks_agree", hypo.cross_checks_agree}};
            }
        }
        const auto rc = analysis::rank_conditions(sys.E, sys.state_matrix(), sys.G,
                                                  Mat(sys.G.transpose() * sys.Q));
        out["rank_conditions"] = {{"C1", rc.c1},
                                  {"C2", rc.c2},
                                  {"O1", rc.o1},
                                  {"O2", rc.o2},
                                  {"strongly_stabilizable", rc.strongly_stabilizable},
                                  {"strongly_detectable", rc.strongly_detectable}};
    }
    std::ofstream f(fs::path(opt.out_dir) / "analysis.json");
    f << out.dump(2) << "\n";
    std::cout << out.dump(2) << "\n";
    return val.pass ? 0 : 2;
}

integrate::InputFunction make_input(const json& spec, Index m, const Options& opt) {
    if (!spec.is_object() || spec.value("kind", "zero") == "zero")
        return integrate::zero_input(m);
    const std::string kind = spec.at("kind").get<std::string>();
    if (kind == "constant") {
        Vec u0 = Vec::Zero(m);
        const auto vals = spec.at("value");
        for (Index i = 0; i < m && i < static_cast<Index>(vals.size()); ++i)
            u0(i) = vals.at(static_cast<std::size_t>(i)).get<double>();
        return [u0](double) { return u0; };
    }
    if (kind == "csv") {
        std::ifstream in(fs::path(opt.scenario_path).parent_path() /
                         spec.at("path").get<std::string>());
        if (!in) throw InvalidInput("cannot open input csv");
        std::string line;
        std::getline(in, line);  // header
        std::vector<double> ts;
        std::vector<Vec> us;
        while (std::getline(in, line)) {
            std::stringstream ss(line);
            std::string cell;
            std::vector<double> row;
            while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
            if (static_cast<Index>(row.size()) < m + 1)
                throw InvalidInput("input csv row too short");
            ts.push_back(row[0]);
            Vec u(m);
            for (Index i = 0; i < m; ++i) u(i) = row[static_cast<std::size_t>(i) + 1];
            us.push_back(u);
        }
        return [ts, us, m](double t) {
            if (ts.empty()) return Vec(Vec::Zero(m));
            if (t <= ts.front()) return us.front();
            if (t >= ts.back()) return us.back();
            std::size_t k = 1;
            while (k < ts.size() && ts[k] < t) ++k;
            const double w = (t - ts[k - 1]) / (ts[k] - ts[k - 1]);
            return Vec((1.0 - w) * us[k - 1] + w * us[k]);
        };
    }
    throw InvalidInput("unknown input kind '" + kind + "'");
}

int run_simulate(const LtiPhDae& sys, const json& task, const Options& opt) {
    const double tau = task.value("tau", 0.01);
    const double t0 = task.value("t0", 0.0);
    const double tf = task.value("tf", 1.0);
    const Index stages = task.value("stages", 1);
    Vec z0 = Vec::Zero(sys.n());
    if (task.contains("z0")) {
        const auto& arr = task.at("z0");
        for (Index i = 0; i < sys.n() && i < static_cast<Index>(arr.size()); ++i)
            z0(i) = arr.at(static_cast<std::size_t>(i)).get<double>();
    }
    if (task.value("consistent_init", true) && sys.is_standard_form())
        z0 = integrate::consistent_init(sys, z0);
    const auto u = make_input(task.value("input", json::object()), sys.m(), opt);
    const auto traj = integrate::simulate(sys, z0, u, t0, tf, tau, stages);
    integrate::write_trajectory_csv(traj, fs::path(opt.out_dir) / "trajectory.csv");
    const auto check = dissipation_check(sys, traj);
    json rep;
    rep["dissipation_lhs"] = check.lhs;
    rep["dissipation_rhs"] = check.rhs;
    rep["dissipation_holds"] = check.holds;
    std::ofstream f(fs::path(opt.out_dir) / "simulation.json");
    f << rep.dump(2) << "\n";
    std::cout << rep.dump(2) << "\n";
    return 0;
}

int run_reduce(const LtiPhDae& sys, const json& task, const Options& opt) {
    const auto semi = transform::semi_explicit_split(sys, /*normalize=*/true, opt.tol);
    std::vector<Index> orders;
    for (const auto& r : task.value("r", json::array({4}))) orders.push_back(r.get<Index>());
    std::vector<std::string> methods;
    for (const auto& m : task.value("methods", json::array({"irka"})))
        methods.push_back(m.get<std::string>());

    const auto cache = mor::make_h2_cache(semi.as_system());
    std::vector<std::vector<double>> rows;
    std::vector<std::string> row_methods;
    for (const auto& method : methods) {
        mor::BalancingResult bal;
        if (method == "ecrm" || method == "fcrm")
            bal = mor::balancing_projector(
                semi, *std::max_element(orders.begin(), orders.end()));
        for (const Index r : orders) {
            mor::ReducedModel rom;
            if (method == "ecrm") {
                rom = mor::ecrm(semi, Mat(bal.v1.leftCols(std::min<Index>(r, bal.v1.cols()))));
            } else if (method == "fcrm") {
                rom = mor::fcrm(semi, Mat(bal.v1.leftCols(std::min<Index>(r, bal.v1.cols()))));
            } else if (method == "mm") {
                rom = mor::mm_rom(semi, task.value("sigma0", 0.0), r);
            } else if (method == "mm-inf") {
                rom = mor::mm_rom(semi, std::numeric_limits<double>::infinity(), r);
            } else if (method == "irka") {
                rom = mor::irka(semi, r).rom;
            } else if (method == "irka-modh") {
                const auto modh = mor::modified_hamiltonian(semi);
                rom = mor::irka(modh.parts, r).rom;
            } else {
                throw InvalidInput("unknown reduction method '" + method + "'");
            }
            const double err = mor::h2_error(cache, rom.rom) / cache.norm;
            rows.push_back({static_cast<double>(r), err});
            row_methods.push_back(method);
            io::save_envelope(rom.rom,
                              fs::path(opt.out_dir) /
                                  ("rom_" + method + "_r" + std::to_string(r) + ".json"));
        }
    }
    std::ofstream f(fs::path(opt.out_dir) / "reduction_errors.csv");
    f << "r,method,h2_rel_error\n";
    for (std::size_t i = 0; i < rows.size(); ++i)
        f << static_cast<Index>(rows[i][0]) << "," << row_methods[i] << ","
          << io::format_double(rows[i][1]) << "\n";
    std::cout << "wrote " << rows.size() << " reduction entries\n";
    return 0;
}

int run_bench_solve(const json& task, const Options& opt) {
    Mat h, sskew;
    Index n = 0;
    if (task.contains("matrix_mtx")) {
        const Mat a = io::read_matrix_market(fs::path(opt.scenario_path).parent_path() /
                                             task.at("matrix_mtx").get<std::string>());
        h = sym_part(a);
        sskew = skew_part(a);
        n = a.rows();
    } else {
        n = task.value("n", 200);
        const double tau = task.value("tau", 1e-3);
        const std::string prof = task.value("profile", "full");
        models::DampingProfile profile = models::DampingProfile::full;
        if (prof == "rank-deficient") profile = models::DampingProfile::rank_deficient;
        if (prof == "tridiagonal") profile = models::DampingProfile::tridiagonal;
        const auto bench = models::hs_bench(n, tau, profile, opt.seed);
        h = bench.H;
        sskew = bench.S;
    }
    Rng rng(opt.seed ^ 0x9e3779b97f4a7c15ULL);
    const Vec b = rng.vector(n);
    const double tol = opt.tol > 0 ? opt.tol : 1e-10;
    const auto wl = solve::widlund_solve(h, sskew, b, tol);
    const auto gm = solve::gmres_ref(h, sskew, b, tol);
    auto dump_log = [&](const solve::IterationLog& log, const std::string& name) {
        std::vector<std::vector<double>> rows;
        for (std::size_t i = 0; i < log.residual_history.size(); ++i)
            rows.push_back({static_cast<double>(i), log.residual_history[i]});
        io::write_csv(fs::path(opt.out_dir) / (name + ".csv"), {"iter", "residual"}, rows);
    };
    dump_log(wl.log, "widlund");
    dump_log(gm.log, "gmres");
    json rep;
    rep["widlund_iterations"] = wl.log.iterations;
    rep["gmres_iterations"] = gm.log.iterations;
    rep["widlund_termination"] = wl.log.termination;
    rep["gmres_termination"] = gm.log.termination;
    rep["true_residual_widlund"] = ((h + sskew) * wl.x - b).norm() / b.norm();
    std::ofstream f(fs::path(opt.out_dir) / "bench.json");
    f << rep.dump(2) << "\n";
    std::cout << rep.dump(2) << "\n";
    return 0;
}

int run_couple(const json& scenario, const Options& opt) {
    const auto a = build_model(scenario.at("model"), opt);
    const auto b = build_model(scenario.at("model_b"), opt);
    const auto& task = scenario.at("couple");
    auto read_mat = [](const json& rows) {
        const Index r = static_cast<Index>(rows.size());
        const Index c = r ? static_cast<Index>(rows.at(0).size()) : 0;
        Mat m(r, c);
        for (Index i = 0; i < r; ++i)
            for (Index jx = 0; jx < c; ++jx)
                m(i, jx) = rows.at(static_cast<std::size_t>(i))
                               .at(static_cast<std::size_t>(jx))
                               .get<double>();
        return m;
    };
    LtiPhDae coupled;
    if (task.value("variant", "feedback") == "feedback") {
        coupled = interconnect::couple_feedback(a, b, read_mat(task.at("F")));
    } else {
        coupled = interconnect::couple_general(a, b, read_mat(task.at("M")),
                                               read_mat(task.at("L")));
    }
    io::save_envelope(coupled, fs::path(opt.out_dir) / "coupled.json");
    const auto val = validate_structure(coupled);
    std::cout << validation_report(val).dump(2) << "\n";
    return val.pass ? 0 : 2;
}

int dispatch(const Options& opt, const std::string& command) {
    const json scenario = load_scenario(opt);
    fs::create_directories(opt.out_dir);
    const std::string task_name =
        command == "run" ? scenario.value("task", "analyze") : command;

    if (task_name == "bench-solve")
        return run_bench_solve(scenario.value("bench", json::object()), opt);
    if (task_name == "couple") return run_couple(scenario, opt);

    const auto sys = build_model(scenario.at("model"), opt);
    if (task_name == "model") {
        io::EnvelopeOptions eopt;
        eopt.matrices_as_mtx = scenario.value("mtx", false);
        io::save_envelope(sys, fs::path(opt.out_dir) / "model.json", eopt);
        std::cout << "model written (n=" << sys.n() << ", m=" << sys.m() << ")\n";
        return 0;
    }
    if (task_name == "analyze")
        return run_analyze(sys, scenario.value("analyze", json::object()), opt);
    if (task_name == "simulate")
        return run_simulate(sys, scenario.value("simulate", json::object()), opt);
    if (task_name == "reduce")
        return run_reduce(sys, scenario.value("reduce", json::object()), opt);
    throw InvalidInput("unknown task '" + task_name + "'");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"port-Hamiltonian descriptor-system toolkit"};
    app.require_subcommand(1);
    Options opt;
    app.add_option("--scenario", opt.scenario_path, "scenario JSON file");
    app.add_option("--out", opt.out_dir, "output directory");
    app.add_option("--seed", opt.seed, "random seed");
    app.add_option("--tol", opt.tol, "rank/validation tolerance override");

    std::string command;
    for (const char* name :
         {"model", "analyze", "simulate", "reduce", "bench-solve", "couple", "run"}) {
        auto* sub = app.add_subcommand(name);
        sub->fallthrough();  // global --scenario/--out/... may follow the verb
        sub->callback([&command, name]() { command = name; });
    }

    CLI11_PARSE(app, argc, argv);

    try {
        return dispatch(opt, command);
    } catch (const InvalidInput& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
