// parapot: parabolic potential-theory toolkit command line.
//
// Subcommands: potential, norm, verify, capacity, heat, riccati, lane-emden,
// picard, campaign.  See README.md for file formats.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>

#include "parapot/parapot.hpp"

using namespace parapot;

namespace {

enum class LogLevel { Error = 0, Info = 1, Debug = 2 };

LogLevel log_level() {
    const char* env = std::getenv("PARAPOT_LOG");
    if (!env) return LogLevel::Error;
    const std::string v(env);
    if (v == "debug") return LogLevel::Debug;
    if (v == "info") return LogLevel::Info;
    return LogLevel::Error;
}

void log_info(const std::string& msg) {
    if (log_level() >= LogLevel::Info) std::cerr << "[parapot] " << msg << "\n";
}

struct GlobalOpts {
    std::uint64_t seed = 1;
    double tol = 1e-6;
    std::string out_dir = ".";
    int threads = 1;
};

std::string out_path(const GlobalOpts& g, const std::string& file) {
    if (file.empty() || file.front() == '/' || g.out_dir == ".") return file;
    std::filesystem::create_directories(g.out_dir);
    return (std::filesystem::path(g.out_dir) / file).string();
}

void write_report(const GlobalOpts& g, const std::string& path, const VerificationReport& rep) {
    json j = rep.to_json();
    j["seed"] = g.seed;
    save_json(out_path(g, path), j);
    log_info("wrote " + path + (rep.pass ? " (pass)" : " (fail)"));
}

int potential_eval(const GlobalOpts& g, const std::string& kind, double alpha, double p, double R,
                   double delta, double r_param, const std::string& measure_file,
                   const std::string& points_file, const std::string& out_file) {
    DiscreteMeasure mu = load_measure(measure_file);
    std::ifstream pf(points_file);
    if (!pf) throw ParseError(points_file + ": cannot open");
    const auto pts = read_points_csv(pf, points_file);

    PotentialSpec spec;
    spec.alpha = alpha;
    spec.p = p;
    spec.R = R > 0.0 ? R : kInf;
    spec.delta = delta;

    std::vector<double> vals(pts.size());
    for (size_t i = 0; i < pts.size(); ++i) {
        const SpaceTimePoint& z = pts[i];
        if (kind == "riesz") vals[i] = riesz_potential(mu, spec, z);
        else if (kind == "maximal") vals[i] = maximal_potential(mu, spec, z);
        else if (kind == "wolff") vals[i] = wolff_potential(mu, spec, z);
        else if (kind == "heat")
            vals[i] = kernel_convolve(mu, {KernelFamily::HeatH, false}, spec, z);
        else if (kind == "bessel")
            vals[i] = kernel_convolve(mu, {KernelFamily::BesselG, false}, spec, z);
        else if (kind == "dyadic") vals[i] = dyadic_wolff(mu, spec, z);
        else if (kind == "lowersum")
            vals[i] = discrete_lower_sum(mu, z, r_param > 0.0 ? r_param : kInf);
        else throw ParseError("potential eval: unknown kind " + kind);
    }
    std::ofstream os(out_path(g, out_file));
    write_points_csv(os, pts, vals, "value");
    log_info("wrote " + out_file);
    return 0;
}

int norm_cmd(const GlobalOpts& g, const std::string& spec_file, const std::string& function_file,
             const std::string& out_file) {
    const json sj = load_json(spec_file);
    const NormSpec spec = norm_spec_from_json(sj);
    const GridSpec grid = grid_from_json(sj.at("grid"));
    std::ifstream ff(function_file);
    if (!ff) throw ParseError(function_file + ": cannot open");
    const GridFunction f = read_grid_csv(ff, grid, function_file);

    json out;
    out["spec"] = sj;
    if (spec.morrey == MorreyKind::None) {
        out["norm"] = lorentz_norm(f, spec);
    } else {
        const MorreyResult r = lorentz_morrey_norm(f, spec);
        out["norm"] = r.value;
        out["maximizer"] = {{"x", r.maximizer_center.x}, {"t", r.maximizer_center.t},
                            {"radius", r.maximizer_radius}};
    }
    save_json(out_path(g, out_file), out);
    return 0;
}

int verify_cmd(const GlobalOpts& g, const std::string& what, const std::string& measure_file,
               const std::string& spec_file, const std::string& sets_file,
               const std::string& out_file) {
    CampaignCheck chk;
    chk.kind = what == "good-lambda" ? "good-lambda"
               : what == "equivalence" ? "norm-equivalence"
               : what == "exp-int" ? "exp-integrability"
               : what == "weak-map" ? "weak-mapping"
               : what == "trace" ? "trace"
                                 : what;
    chk.name = what;
    chk.params = load_json(spec_file);
    chk.params["measure"] = measure_file;
    if (!sets_file.empty()) {
        const json sets = load_json(sets_file);
        chk.params["sets"] = sets.contains("cylinders") ? sets.at("cylinders") : sets;
    }
    Rng rng(g.seed);
    const VerificationReport rep = run_check(chk, rng);
    write_report(g, out_file, rep);
    return rep.pass ? 0 : 1;
}

int capacity_cmd(const GlobalOpts& g, const std::string& set_file, const std::string& spec_file,
                 const std::string& solver, const std::string& out_file) {
    CompactSet K = compact_set_from_json(load_json(set_file));
    CapacitySpec spec = capacity_spec_from_json(load_json(spec_file));
    spec.solver = solver == "primal" ? CapSolver::Primal
                  : solver == "dual" ? CapSolver::Dual
                                     : CapSolver::Both;
    const CapacityEstimate est = estimate_capacity(K, spec);
    json out;
    out["cells"] = K.count();
    if (est.primal >= 0.0) out["primal"] = est.primal;
    if (est.dual >= 0.0) out["dual"] = est.dual;
    if (std::isfinite(est.gap)) out["gap"] = est.gap;
    out["iterations"] = est.iterations;
    out["converged"] = est.converged;
    out["conventions"] = conventions_json();
    save_json(out_path(g, out_file), out);
    return 0;
}

int heat_solve_cmd(const GlobalOpts& g, const std::string& problem_file,
                   const std::string& out_file) {
    const HeatProblem pr = heat_problem_from_json(load_json(problem_file));
    const GridFunction u =
        pr.domain == HeatDomain::FreeSpace ? solve_free_space_grid(pr) : solve_dirichlet(pr);
    std::ofstream os(out_path(g, out_file));
    write_grid_csv(os, u, "u");
    log_info("wrote " + out_file);
    return 0;
}

int heat_verify_cmd(const GlobalOpts& g, const std::string& what, const std::string& solution_file,
                    const std::string& problem_file, const std::string& measure_file,
                    const std::string& points_file, double r_param, double target_slope,
                    bool one_sided, const std::string& out_file) {
    const HeatProblem pr = heat_problem_from_json(load_json(problem_file));
    std::ifstream sf(solution_file);
    if (!sf) throw ParseError(solution_file + ": cannot open");
    const GridFunction u = read_grid_csv(sf, pr.grid, solution_file);
    const DiscreteMeasure mu =
        measure_file.empty() ? pr.mu : load_measure(measure_file);

    VerificationReport rep;
    if (what == "bounds") {
        rep = verify_two_sided_bounds(u, mu, pr.sigma);
    } else if (what == "gradient") {
        rep = gradient_bound_check(u, mu);
    } else if (what == "decay") {
        rep = verify_decay(u, target_slope, one_sided);
    } else if (what == "lower") {
        std::vector<SpaceTimePoint> pts;
        if (!points_file.empty()) {
            std::ifstream pf(points_file);
            if (!pf) throw ParseError(points_file + ": cannot open");
            pts = read_points_csv(pf, points_file);
        } else {
            Rng rng(g.seed);
            for (int k = 0; k < 50; ++k)
                pts.push_back(random_point_in(rng, pr.grid.dim(), pr.grid.corner[0],
                                              pr.grid.corner[0] + pr.grid.side[0],
                                              pr.grid.t_begin, pr.grid.t_end));
        }
        DiscreteMeasure combined = abs_measure(mu);
        for (const Atom& a : abs_measure(pr.sigma).atoms) combined.atoms.push_back(a);
        rep = verify_lower_bound(u, combined, pts, r_param > 0.0 ? r_param : kInf);
    } else {
        throw ParseError("heat verify: unknown check " + what);
    }
    write_report(g, out_file, rep);
    return rep.pass ? 0 : 1;
}

int picard_cmd(const GlobalOpts& g, const std::string& f_file, const std::string& spec_file,
               double K, double q, const std::string& out_file, const std::string& report_file) {
    const json sj = load_json(spec_file);
    const PotentialSpec spec = potential_spec_from_json(sj);
    const GridSpec grid = grid_from_json(sj.at("grid"));
    std::ifstream ff(f_file);
    if (!ff) throw ParseError(f_file + ": cannot open");
    const GridFunction f = read_grid_csv(ff, grid, f_file);

    IterationConfig cfg;
    cfg.q = q;
    cfg.K = K;
    cfg.mode = IterationMode::Potential;
    cfg.tol = g.tol;
    const IterationResult res = picard_potential_iteration(f, spec, cfg);
    if (!out_file.empty()) {
        std::ofstream os(out_path(g, out_file));
        write_grid_csv(os, res.u, "u");
    }
    if (!report_file.empty()) write_report(g, report_file, res.report);
    return res.report.pass ? 0 : 1;
}

int iteration_cmd(const GlobalOpts& g, IterationMode mode, const std::string& measure_file,
                  const std::string& sigma_file, double q, const std::string& grid_file,
                  double damping, int max_iters, const std::string& out_file,
                  const std::string& report_file) {
    const json gj = load_json(grid_file);
    HeatProblem base;
    base.grid = grid_from_json(gj.contains("grid") ? gj.at("grid") : gj);
    base.domain = HeatDomain::DirichletBox;
    if (gj.contains("scheme") && gj.at("scheme").get<std::string>() == "crank_nicolson")
        base.scheme = HeatScheme::CrankNicolson;

    DiscreteMeasure mu = measure_file.empty() ? DiscreteMeasure(base.grid.dim())
                                              : load_measure(measure_file);
    DiscreteMeasure sigma = sigma_file.empty() ? DiscreteMeasure(base.grid.dim())
                                               : load_measure(sigma_file);
    IterationConfig cfg;
    cfg.q = q;
    cfg.mode = mode;
    cfg.tol = g.tol;
    cfg.damping = damping;
    cfg.max_iters = max_iters;

    const IterationResult res = mode == IterationMode::Riccati
                                    ? riccati_solve(mu, sigma, cfg, base)
                                    : lane_emden_solve(mu, sigma, cfg, base);
    if (!out_file.empty()) {
        std::ofstream os(out_path(g, out_file));
        write_grid_csv(os, res.u, "u");
    }
    if (!report_file.empty()) write_report(g, report_file, res.report);
    return res.report.pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"parapot: parabolic nonlinear-potential-theory toolkit"};
    app.require_subcommand(1);

    GlobalOpts g;
    app.add_option("--seed", g.seed, "random seed for campaigns and sampling");
    app.add_option("--tol", g.tol, "global tolerance");
    app.add_option("--out-dir", g.out_dir, "output directory");
    app.add_option("--threads", g.threads, "campaign worker threads");

    // potential eval
    auto* pot = app.add_subcommand("potential", "evaluate potentials at points");
    auto* pe = pot->add_subcommand("eval", "evaluate one potential operator");
    std::string pe_kind, pe_measure, pe_points, pe_out = "potential.csv";
    double pe_alpha = 1.0, pe_p = 2.0, pe_R = -1.0, pe_delta = 0.0, pe_r = -1.0;
    pe->add_option("--kind", pe_kind, "riesz|maximal|wolff|heat|bessel|dyadic|lowersum")
        ->required();
    pe->add_option("--alpha", pe_alpha);
    pe->add_option("--p", pe_p);
    pe->add_option("--R", pe_R, "truncation radius (<0 means infinity)");
    pe->add_option("--delta", pe_delta);
    pe->add_option("--r", pe_r, "lower-sum base radius (<0 means infinity)");
    pe->add_option("--measure", pe_measure)->required();
    pe->add_option("--points", pe_points)->required();
    pe->add_option("--out", pe_out);

    // norm
    auto* nm = app.add_subcommand("norm", "Lorentz / Lorentz-Morrey norm of a grid function");
    std::string nm_spec, nm_fn, nm_out = "norm.json";
    nm->add_option("--spec", nm_spec)->required();
    nm->add_option("--function", nm_fn)->required();
    nm->add_option("--out", nm_out);

    // verify
    auto* vf = app.add_subcommand("verify", "verification campaigns");
    std::string vf_what, vf_measure, vf_spec, vf_sets, vf_out = "report.json";
    vf->add_option("check", vf_what, "good-lambda|equivalence|exp-int|weak-map|trace")
        ->required();
    vf->add_option("--measure", vf_measure)->required();
    vf->add_option("--spec", vf_spec)->required();
    vf->add_option("--sets", vf_sets);
    vf->add_option("--out", vf_out);

    // capacity
    auto* cp = app.add_subcommand("capacity", "capacity of a compact set");
    std::string cp_set, cp_spec, cp_solver = "both", cp_out = "capacity.json";
    cp->add_option("--set", cp_set)->required();
    cp->add_option("--spec", cp_spec)->required();
    cp->add_option("--solver", cp_solver, "primal|dual|both");
    cp->add_option("--out", cp_out);

    // heat
    auto* ht = app.add_subcommand("heat", "heat solves and their verification");
    auto* hs = ht->add_subcommand("solve", "solve the heat problem");
    std::string hs_problem, hs_out = "solution.csv";
    hs->add_option("--problem", hs_problem)->required();
    hs->add_option("--out", hs_out);
    auto* hv = ht->add_subcommand("verify", "verify a solution");
    std::string hv_what, hv_solution, hv_problem, hv_measure, hv_points, hv_out = "report.json";
    double hv_r = -1.0, hv_slope = -1.0;
    bool hv_one_sided = false;
    hv->add_option("check", hv_what, "bounds|lower|decay|gradient")->required();
    hv->add_option("--solution", hv_solution)->required();
    hv->add_option("--problem", hv_problem)->required();
    hv->add_option("--measure", hv_measure);
    hv->add_option("--points", hv_points);
    hv->add_option("--r", hv_r);
    hv->add_option("--target-slope", hv_slope);
    hv->add_flag("--one-sided", hv_one_sided);
    hv->add_option("--out", hv_out);

    // picard / lane-emden / riccati
    auto* pc = app.add_subcommand("picard", "potential Picard iteration");
    std::string pc_f, pc_spec, pc_out, pc_report = "picard.json";
    double pc_K = 1.0, pc_q = 2.0;
    pc->add_option("--f", pc_f)->required();
    pc->add_option("--K", pc_K);
    pc->add_option("--q", pc_q);
    pc->add_option("--spec", pc_spec)->required();
    pc->add_option("--out", pc_out);
    pc->add_option("--report", pc_report);

    auto* le = app.add_subcommand("lane-emden", "Lane-Emden iteration");
    std::string le_mode = "absorption", le_measure, le_sigma, le_grid, le_out,
                le_report = "lane_emden.json";
    double le_q = 2.0, le_damping = 1.0;
    int le_iters = 200;
    le->add_option("--mode", le_mode, "absorption|source");
    le->add_option("--measure", le_measure);
    le->add_option("--sigma", le_sigma);
    le->add_option("--q", le_q);
    le->add_option("--grid", le_grid)->required();
    le->add_option("--damping", le_damping);
    le->add_option("--max-iters", le_iters);
    le->add_option("--out", le_out);
    le->add_option("--report", le_report);

    auto* rc = app.add_subcommand("riccati", "Riccati iteration");
    std::string rc_measure, rc_sigma, rc_grid, rc_out, rc_report = "riccati.json";
    double rc_q = 2.0, rc_damping = 1.0;
    int rc_iters = 200;
    rc->add_option("--measure", rc_measure);
    rc->add_option("--sigma", rc_sigma);
    rc->add_option("--q", rc_q);
    rc->add_option("--grid", rc_grid)->required();
    rc->add_option("--damping", rc_damping);
    rc->add_option("--max-iters", rc_iters);
    rc->add_option("--out", rc_out);
    rc->add_option("--report", rc_report);

    // campaign
    auto* cg = app.add_subcommand("campaign", "run a campaign config");
    std::string cg_config;
    cg->add_option("--config", cg_config)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (pe->parsed())
            return potential_eval(g, pe_kind, pe_alpha, pe_p, pe_R, pe_delta, pe_r, pe_measure,
                                  pe_points, pe_out);
        if (nm->parsed()) return norm_cmd(g, nm_spec, nm_fn, nm_out);
        if (vf->parsed()) return verify_cmd(g, vf_what, vf_measure, vf_spec, vf_sets, vf_out);
        if (cp->parsed()) return capacity_cmd(g, cp_set, cp_spec, cp_solver, cp_out);
        if (hs->parsed()) return heat_solve_cmd(g, hs_problem, hs_out);
        if (hv->parsed())
            return heat_verify_cmd(g, hv_what, hv_solution, hv_problem, hv_measure, hv_points,
                                   hv_r, hv_slope, hv_one_sided, hv_out);
        if (pc->parsed()) return picard_cmd(g, pc_f, pc_spec, pc_K, pc_q, pc_out, pc_report);
        if (le->parsed())
            return iteration_cmd(g,
                                 le_mode == "source" ? IterationMode::LaneEmdenSource
                                                     : IterationMode::LaneEmdenAbsorption,
                                 le_measure, le_sigma, le_q, le_grid, le_damping, le_iters, le_out,
                                 le_report);
        if (rc->parsed())
            return iteration_cmd(g, IterationMode::Riccati, rc_measure, rc_sigma, rc_q, rc_grid,
                                 rc_damping, rc_iters, rc_out, rc_report);
        if (cg->parsed()) {
            CampaignConfig cfg = campaign_from_json(load_json(cg_config));
            if (g.out_dir != ".") cfg.out_dir = g.out_dir;
            if (g.threads > 1) cfg.threads = g.threads;
            if (app.count("--seed")) cfg.seed = g.seed;
            const CampaignResult res = run_campaign(cfg);
            std::cout << res.index.dump(2) << "\n";
            return res.exit_code;
        }
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
