#pragma once

#include "parapot/heat.hpp"
#include "parapot/norms.hpp"

namespace parapot {

enum class IterationMode { Potential, LaneEmdenAbsorption, LaneEmdenSource, Riccati };

struct IterationConfig {
    double q = 2.0;
    double K = 1.0;  // potential iteration constant
    IterationMode mode = IterationMode::Potential;
    int max_iters = 200;
    double tol = 1e-6;                 // sup norm of successive differences
    double divergence_ceiling = 0.0;   // 0: auto, 1e8 * data scale
    double damping = 1.0;              // 1 = full Picard
    bool nonlinear_enabled = true;     // q-term switch for linearity sanity

    double q_conjugate() const { return q / (q - 1.0); }

    void validate() const {
        if (!(q > 1.0)) throw std::invalid_argument("IterationConfig: q must exceed 1");
        if (!(K > 0.0) && mode == IterationMode::Potential)
            throw std::invalid_argument("IterationConfig: K must be positive");
        if (!(damping > 0.0 && damping <= 1.0))
            throw std::invalid_argument("IterationConfig: damping must lie in (0,1]");
    }
};

struct IterationResult {
    GridFunction u;
    VerificationReport report;
    bool converged = false;
    bool diverged = false;
    int iterations = 0;
};

/// Picard iteration u_{n+1} = K I_alpha^{R,delta}[u_n^q] + f, u_0 = f, with a
/// pointwise check of the bound u_n <= (K q 2^{q-1}/(q-1)) I[f^q] + f.
inline IterationResult picard_potential_iteration(const GridFunction& f,
                                                  const PotentialSpec& spec,
                                                  const IterationConfig& cfg,
                                                  const RieszMatrix* prebuilt = nullptr) {
    cfg.validate();
    for (double v : f.values)
        if (v < 0.0) throw std::invalid_argument("picard_potential_iteration: f must be >= 0");

    IterationResult res;
    res.report.check = "picard_potential";
    res.report.params = {{"q", cfg.q}, {"K", cfg.K}, {"alpha", spec.alpha},
                         {"delta", spec.delta}, {"R", spec.R == kInf ? -1.0 : spec.R}};

    RieszMatrix local;
    if (!prebuilt) local = riesz_density_matrix(f.grid, f.grid, spec);
    const RieszMatrix& M = prebuilt ? *prebuilt : local;
    const auto n = static_cast<size_t>(f.size());
    const double fmax = f.sup_norm();
    const double ceiling = cfg.divergence_ceiling > 0.0 ? cfg.divergence_ceiling
                                                        : 1e8 * std::max(fmax, 1e-30);

    // explicit bound of the proposition
    std::vector<double> fq(n), bound(n);
    for (size_t i = 0; i < n; ++i) fq[i] = std::pow(f.values[i], cfg.q);
    M.apply(fq, bound);
    const double bc = cfg.K * cfg.q * std::pow(2.0, cfg.q - 1.0) / (cfg.q - 1.0);
    for (size_t i = 0; i < n; ++i) bound[i] = bc * bound[i] + f.values[i];

    GridFunction u = f;
    std::vector<double> uq(n), pot(n);
    double worst_bound_ratio = 0.0;
    bool bound_ok = true;
    res.u = u;
    for (int it = 1; it <= cfg.max_iters; ++it) {
        for (size_t i = 0; i < n; ++i)
            uq[i] = cfg.nonlinear_enabled ? std::pow(u.values[i], cfg.q) : 0.0;
        M.apply(uq, pot);
        double diff = 0.0, umax = 0.0;
        bool blown = false;
        for (size_t i = 0; i < n; ++i) {
            const double next = cfg.K * pot[i] + f.values[i];
            const double v = (1.0 - cfg.damping) * u.values[i] + cfg.damping * next;
            diff = std::max(diff, std::abs(v - u.values[i]));
            u.values[i] = v;
            umax = std::max(umax, v);
            if (!std::isfinite(v) || v > ceiling) blown = true;
            if (bound[i] > 0.0) worst_bound_ratio = std::max(worst_bound_ratio, v / bound[i]);
        }
        res.iterations = it;
        if (blown) {
            res.diverged = true;
            res.report.status = "diverged";
            res.report.samples["first_divergent_iterate"] = it;
            break;
        }
        if (diff <= cfg.tol * (1.0 + umax)) {
            res.converged = true;
            break;
        }
    }
    bound_ok = worst_bound_ratio <= 1.0 + 1e-9;
    res.u = u;
    res.report.fitted_constants["bound_constant"] = bc;
    res.report.fitted_constants["worst_bound_ratio"] = worst_bound_ratio;
    res.report.worst_ratio = worst_bound_ratio;
    res.report.pass = res.converged && bound_ok;
    if (res.converged && !bound_ok) res.report.status = "converged but bound violated";
    return res;
}

/// Bracket the blow-up threshold of f -> iteration(lambda f) by bisection.
inline std::pair<double, double> picard_blowup_threshold(const GridFunction& f,
                                                         const PotentialSpec& spec,
                                                         IterationConfig cfg, double lambda_lo,
                                                         double lambda_hi,
                                                         double rel_width = 0.01) {
    const RieszMatrix M = riesz_density_matrix(f.grid, f.grid, spec);
    auto converges = [&](double lam) {
        GridFunction g = f;
        for (double& v : g.values) v *= lam;
        return !picard_potential_iteration(g, spec, cfg, &M).diverged;
    };
    if (!converges(lambda_lo))
        throw std::invalid_argument("picard_blowup_threshold: lower bracket already diverges");
    while (converges(lambda_hi)) {
        lambda_lo = lambda_hi;
        lambda_hi *= 2.0;
        if (lambda_hi > 1e12)
            throw std::runtime_error("picard_blowup_threshold: no divergence found");
    }
    while ((lambda_hi - lambda_lo) > rel_width * lambda_lo) {
        const double mid = 0.5 * (lambda_lo + lambda_hi);
        (converges(mid) ? lambda_lo : lambda_hi) = mid;
    }
    return {lambda_lo, lambda_hi};
}

/// Lane-Emden iteration u_{n+1} = heat-solve(mu -/+ |u_n|^{q-1} u_n, sigma).
/// Absorption subtracts, source adds.  For absorption with nonnegative data
/// the report records the comparison 0 <= u <= heat-solve(mu, sigma).
inline IterationResult lane_emden_solve(const DiscreteMeasure& mu, const DiscreteMeasure& sigma,
                                        const IterationConfig& cfg, HeatProblem base) {
    cfg.validate();
    if (cfg.mode != IterationMode::LaneEmdenAbsorption && cfg.mode != IterationMode::LaneEmdenSource)
        throw std::invalid_argument("lane_emden_solve: wrong iteration mode");
    const double sign = cfg.mode == IterationMode::LaneEmdenAbsorption ? -1.0 : 1.0;
    base.mu = mu;
    base.sigma = sigma;
    base.validate();

    IterationResult res;
    res.report.check = cfg.mode == IterationMode::LaneEmdenAbsorption ? "lane_emden_absorption"
                                                                      : "lane_emden_source";
    res.report.params = {{"q", cfg.q}};

    GridFunction linear = solve_dirichlet(base);
    GridFunction u = linear;
    const double scale = std::max(linear.sup_norm(), 1e-30);
    const double ceiling =
        cfg.divergence_ceiling > 0.0 ? cfg.divergence_ceiling : 1e8 * scale;

    for (int it = 1; it <= cfg.max_iters; ++it) {
        GridFunction term(base.grid);
        if (cfg.nonlinear_enabled)
            for (std::int64_t i = 0; i < u.size(); ++i)
                term[i] = sign * std::pow(std::abs(u[i]), cfg.q - 1.0) * u[i];
        HeatProblem pr = base;
        pr.mu = base.mu;
        if (pr.mu.has_density() && pr.mu.density->grid.same_layout(base.grid)) {
            GridFunction sum = *pr.mu.density;
            for (std::int64_t i = 0; i < sum.size(); ++i) sum[i] += term[i];
            pr.mu.density = std::move(sum);
        } else if (pr.mu.has_density()) {
            throw std::invalid_argument("lane_emden_solve: mu density must live on the solver grid");
        } else {
            pr.mu.density = term;
        }
        GridFunction next = solve_dirichlet(pr);
        double diff = 0.0, umax = 0.0;
        bool blown = false;
        for (std::int64_t i = 0; i < u.size(); ++i) {
            const double v = (1.0 - cfg.damping) * u[i] + cfg.damping * next[i];
            diff = std::max(diff, std::abs(v - u[i]));
            u[i] = v;
            umax = std::max(umax, std::abs(v));
            if (!std::isfinite(v) || std::abs(v) > ceiling) blown = true;
        }
        res.iterations = it;
        if (blown) {
            res.diverged = true;
            res.report.status = "diverged";
            res.report.samples["first_divergent_iterate"] = it;
            break;
        }
        if (diff <= cfg.tol * (1.0 + umax)) {
            res.converged = true;
            break;
        }
    }
    res.u = u;
    res.report.fitted_constants["final_sup_norm"] = u.sup_norm();
    res.report.samples["iterations"] = res.iterations;
    if (cfg.mode == IterationMode::LaneEmdenAbsorption && mu.is_nonnegative() &&
        sigma.is_nonnegative() && res.converged) {
        double worst_low = 0.0, worst_high = 0.0;
        for (std::int64_t i = 0; i < u.size(); ++i) {
            worst_low = std::min(worst_low, u[i]);
            worst_high = std::max(worst_high, u[i] - linear[i]);
        }
        res.report.fitted_constants["min_u"] = worst_low;
        res.report.fitted_constants["max_excess_over_linear"] = worst_high;
        const double tol = 1e-8 * std::max(1.0, linear.sup_norm());
        res.report.pass = res.converged && worst_low >= -tol && worst_high <= tol;
    } else {
        res.report.pass = res.converged;
    }
    if (!res.converged && !res.diverged) res.report.status = "not converged";
    return res;
}

/// Riccati iteration u_{n+1} = heat-solve(|grad u_n|^q + mu, sigma), with the
/// pointwise gradient target |grad u| <= Lambda I_1[|omega|] and the weak
/// Lorentz gradient ratio against ||I_1[|omega|]||_{(N+2)(q-1), inf}.
inline IterationResult riccati_solve(const DiscreteMeasure& mu, const DiscreteMeasure& sigma,
                                     const IterationConfig& cfg, HeatProblem base) {
    cfg.validate();
    if (cfg.mode != IterationMode::Riccati)
        throw std::invalid_argument("riccati_solve: wrong iteration mode");
    base.mu = mu;
    base.sigma = sigma;
    base.validate();
    const GridSpec& g = base.grid;
    const int N = g.dim();
    const std::int64_t ns = g.spatial_cell_count();

    IterationResult res;
    res.report.check = "riccati";
    res.report.params = {{"q", cfg.q}};

    std::vector<std::int64_t> strides(N, 1);
    for (int i = N - 2; i >= 0; --i) strides[i] = strides[i + 1] * g.cells[i + 1];
    auto gradient_field = [&](const GridFunction& u) {
        GridFunction gr(g);
        for (int k = 0; k < g.steps; ++k)
            for (std::int64_t sp = 0; sp < ns; ++sp) {
                bool interior = true;
                for (int i = 0; i < N && interior; ++i) {
                    const auto c = (sp / strides[i]) % g.cells[i];
                    interior = c > 0 && c < g.cells[i] - 1;
                }
                if (!interior) continue;
                double g2 = 0.0;
                for (int i = 0; i < N; ++i) {
                    const double d =
                        (u[k * ns + sp + strides[i]] - u[k * ns + sp - strides[i]]) /
                        (2.0 * g.spacing(i));
                    g2 += d * d;
                }
                gr[k * ns + sp] = std::sqrt(g2);
            }
        return gr;
    };

    GridFunction linear = solve_dirichlet(base);
    GridFunction u = linear;
    const double scale = std::max(linear.sup_norm(), 1e-30);
    const double ceiling = cfg.divergence_ceiling > 0.0 ? cfg.divergence_ceiling : 1e8 * scale;

    for (int it = 1; it <= cfg.max_iters; ++it) {
        GridFunction grad = gradient_field(u);
        GridFunction term(g);
        if (cfg.nonlinear_enabled)
            for (std::int64_t i = 0; i < term.size(); ++i)
                term[i] = std::pow(grad[i], cfg.q);
        HeatProblem pr = base;
        pr.mu = base.mu;
        if (pr.mu.has_density() && pr.mu.density->grid.same_layout(g)) {
            GridFunction sum = *pr.mu.density;
            for (std::int64_t i = 0; i < sum.size(); ++i) sum[i] += term[i];
            pr.mu.density = std::move(sum);
        } else if (pr.mu.has_density()) {
            throw std::invalid_argument("riccati_solve: mu density must live on the solver grid");
        } else {
            pr.mu.density = term;
        }
        GridFunction next = solve_dirichlet(pr);
        double diff = 0.0, umax = 0.0;
        bool blown = false;
        for (std::int64_t i = 0; i < u.size(); ++i) {
            const double v = (1.0 - cfg.damping) * u[i] + cfg.damping * next[i];
            diff = std::max(diff, std::abs(v - u[i]));
            u[i] = v;
            umax = std::max(umax, std::abs(v));
            if (!std::isfinite(v) || std::abs(v) > ceiling) blown = true;
        }
        res.iterations = it;
        if (blown) {
            res.diverged = true;
            res.report.status = "diverged";
            res.report.samples["first_divergent_iterate"] = it;
            break;
        }
        if (diff <= cfg.tol * (1.0 + umax)) {
            res.converged = true;
            break;
        }
    }
    res.u = u;
    if (res.diverged) {
        res.report.pass = false;
        return res;  // gradient targets are meaningless without a solution
    }

    // gradient targets against I_1 of the combined |data|
    DiscreteMeasure omega = abs_measure(mu);
    {
        DiscreteMeasure sig_abs = abs_measure(sigma);
        for (const Atom& a : sig_abs.atoms) omega.atoms.push_back(a);
        if (sig_abs.has_density() && !omega.has_density()) {
            omega.density = sig_abs.density;
            omega.density_on_t0_slab = sig_abs.density_on_t0_slab;
        }
    }
    GridFunction grad = gradient_field(u);
    PotentialSpec s1;
    s1.alpha = 1.0;
    s1.quad.points_per_decade = 16;  // ratio reporting needs no quadrature luxury
    double hmax = 0.0;
    for (int i = 0; i < N; ++i) hmax = std::max(hmax, g.spacing(i));
    hmax = std::max(hmax, std::sqrt(2.0 * g.dt()));
    GridFunction pot(g);
    double lambda_hat = 0.0;
    for (std::int64_t i = 0; i < grad.size(); ++i) {
        const SpaceTimePoint z = g.cell_center(i);
        pot[i] = riesz_potential(omega, s1, z);
        bool excluded = false;
        for (const Atom& a : omega.atoms)
            if (parabolic_distance(a.z, z) <= hmax) excluded = true;
        if (excluded || !(pot[i] > 0.0) || !std::isfinite(pot[i])) continue;
        lambda_hat = std::max(lambda_hat, grad[i] / pot[i]);
    }
    NormSpec weak;
    weak.q = (N + 2.0) * (cfg.q - 1.0);
    weak.s = kInf;
    GridFunction pot_clean = pot;
    for (auto& v : pot_clean.values)
        if (!std::isfinite(v)) v = 0.0;
    const double grad_norm = lorentz_norm(grad, weak);
    const double pot_norm = lorentz_norm(pot_clean, weak);
    res.report.fitted_constants["lambda_hat"] = lambda_hat;
    res.report.fitted_constants["grad_weak_norm"] = grad_norm;
    res.report.fitted_constants["I1_weak_norm"] = pot_norm;
    res.report.fitted_constants["weak_ratio"] = pot_norm > 0.0 ? grad_norm / pot_norm : 0.0;
    res.report.worst_ratio = lambda_hat;
    res.report.pass = res.converged && std::isfinite(lambda_hat);
    if (!res.converged && !res.diverged) res.report.status = "not converged";
    return res;
}

/// Bisect the data scale at which a heat-type iteration stops converging.
template <typename Solve>
inline std::pair<double, double> iteration_blowup_threshold(Solve&& solve, double lambda_lo,
                                                            double lambda_hi,
                                                            double rel_width = 0.01) {
    auto converges = [&](double lam) { return solve(lam); };
    if (!converges(lambda_lo))
        throw std::invalid_argument("iteration_blowup_threshold: lower bracket already diverges");
    while (converges(lambda_hi)) {
        lambda_lo = lambda_hi;
        lambda_hi *= 2.0;
        if (lambda_hi > 1e12)
            throw std::runtime_error("iteration_blowup_threshold: no divergence found");
    }
    while ((lambda_hi - lambda_lo) > rel_width * lambda_lo) {
        const double mid = 0.5 * (lambda_lo + lambda_hi);
        (converges(mid) ? lambda_lo : lambda_hi) = mid;
    }
    return {lambda_lo, lambda_hi};
}

}  // namespace parapot
