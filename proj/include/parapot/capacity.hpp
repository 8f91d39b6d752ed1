#pragma once

#include <array>
#include <functional>

#include "parapot/potentials.hpp"
#include "parapot/report.hpp"

namespace parapot {

enum class CapKernel { HeatH, BesselG, RieszE, EllipticRiesz, EllipticBessel };

inline bool is_elliptic(CapKernel k) {
    return k == CapKernel::EllipticRiesz || k == CapKernel::EllipticBessel;
}

enum class CapSolver { Primal, Dual, Both };

struct CapacitySpec {
    CapKernel kernel = CapKernel::RieszE;
    double alpha = 1.0;
    double p = 2.0;
    double R = kInf;
    double delta = 0.0;
    CapSolver solver = CapSolver::Both;
    int max_iters = 600;
    double tol = 1e-5;
    // coarse source layers wrapped around the base grid: each level doubles
    // the box extent and the cell size, so exterior sources can take part in
    // the minimization at small cost
    int halo_levels = 2;

    double p_conjugate() const { return p / (p - 1.0); }
};

// Compact set as an indicator over grid cells.  Elliptic kernels use only the
// spatial part of the grid (steps should be 1).
struct CompactSet {
    GridSpec grid;
    std::vector<std::uint8_t> mask;

    std::int64_t count() const {
        std::int64_t c = 0;
        for (auto m : mask) c += m != 0;
        return c;
    }
    double volume(bool elliptic = false) const {
        return count() * (elliptic ? grid.spatial_cell_volume() : grid.cell_volume());
    }
};

/// Cells whose centers lie in the cylinder.
inline CompactSet set_from_cylinder(const GridSpec& g, const ParabolicCylinder& cyl) {
    CompactSet K;
    K.grid = g;
    K.mask.assign(static_cast<size_t>(g.total_cell_count()), 0);
    for (std::int64_t i = 0; i < g.total_cell_count(); ++i)
        if (cyl.contains(g.cell_center(i))) K.mask[static_cast<size_t>(i)] = 1;
    return K;
}

/// Spatial cells whose centers lie in the ball (elliptic sets; steps = 1).
inline CompactSet set_from_ball(const GridSpec& g, const std::vector<double>& center, double rho) {
    CompactSet K;
    K.grid = g;
    K.grid.steps = 1;
    K.mask.assign(static_cast<size_t>(K.grid.spatial_cell_count()), 0);
    for (std::int64_t s = 0; s < K.grid.spatial_cell_count(); ++s) {
        const SpaceTimePoint c = K.grid.cell_center(s);
        double d2 = 0.0;
        for (int i = 0; i < K.grid.dim(); ++i) d2 += (c.x[i] - center[i]) * (c.x[i] - center[i]);
        if (std::sqrt(d2) < rho) K.mask[static_cast<size_t>(s)] = 1;
    }
    return K;
}

namespace detail {

/// Radially cached elliptic Bessel kernel (one subordination quadrature per node).
class BesselRadialCache {
  public:
    BesselRadialCache(double alpha, int dim, double r_lo, double r_hi)
        : alpha_(alpha), dim_(dim), r_lo_(std::max(r_lo, 1e-9)), r_hi_(std::max(r_hi, 2.0 * r_lo)) {
        const int n = 512;
        lg_lo_ = std::log(r_lo_);
        lg_step_ = (std::log(r_hi_) - lg_lo_) / (n - 1);
        vals_.resize(n);
        std::vector<double> x(dim_, 0.0);
        for (int i = 0; i < n; ++i) {
            x[0] = std::exp(lg_lo_ + i * lg_step_);
            vals_[i] = elliptic_bessel_kernel(x, alpha_);
        }
    }

    double operator()(double r) const {
        if (r <= r_lo_) {
            std::vector<double> x(dim_, 0.0);
            x[0] = std::max(r, 1e-12);
            return elliptic_bessel_kernel(x, alpha_);
        }
        const double u = (std::log(r) - lg_lo_) / lg_step_;
        const int i = std::min(static_cast<int>(u), static_cast<int>(vals_.size()) - 2);
        const double w = u - i;
        return vals_[i] * (1.0 - w) + vals_[i + 1] * w;
    }

  private:
    double alpha_;
    int dim_;
    double r_lo_, r_hi_, lg_lo_, lg_step_;
    std::vector<double> vals_;
};

// Generic cell average by dyadic subdivision refined toward the evaluation
// point; raw buffers only (this sits on the hot path of matrix assembly).
// RawKernel is called with the displacement (z - y) components.
using RawKernel = std::function<double(const double*, double)>;

inline double cell_average_rec(const RawKernel& ker, const double* zx, double zt,
                               const double* lo, const double* hi, double t0, double t1, int n,
                               int depth) {
    double mid[4], dx[4];
    double diam2 = 0.0, dist2 = 0.0;
    for (int i = 0; i < n; ++i) {
        mid[i] = 0.5 * (lo[i] + hi[i]);
        dx[i] = zx[i] - mid[i];
        const double s = hi[i] - lo[i];
        diam2 += s * s;
        dist2 += dx[i] * dx[i];
    }
    const double tm = 0.5 * (t0 + t1);
    const double reach = std::max(std::sqrt(diam2), std::sqrt(2.0 * (t1 - t0)));
    const double dist = std::max(std::sqrt(dist2), std::sqrt(2.0 * std::abs(zt - tm)));
    // recurse only into cells the evaluation point touches; the integrable
    // singularity makes the refined contributions shrink geometrically
    if (depth <= 0 || dist > 0.9 * reach) return ker(dx, zt - tm);
    double clo[4], chi[4];
    double acc = 0.0;
    const int kids = 1 << (n + 1);
    for (int mask = 0; mask < kids; ++mask) {
        for (int i = 0; i < n; ++i) {
            const double m = 0.5 * (lo[i] + hi[i]);
            clo[i] = (mask & (1 << i)) ? m : lo[i];
            chi[i] = (mask & (1 << i)) ? hi[i] : m;
        }
        const double ct0 = (mask & (1 << n)) ? tm : t0;
        const double ct1 = (mask & (1 << n)) ? t1 : tm;
        acc += cell_average_rec(ker, zx, zt, clo, chi, ct0, ct1, n, depth - 1);
    }
    return acc / kids;
}

}  // namespace detail

// Discretized capacity program: min sum f^p vol subject to (A f) >= 1 on the
// constraint cells, f >= 0; A_ij ~ integral of the kernel over source cell j
// seen from constraint center i.
struct CapacityProblem {
    std::int64_t rows = 0, cols = 0;
    std::vector<double> A;    // rows x cols
    std::vector<double> At;   // cols x rows (transposed copy for fast column dots)
    std::vector<double> vol;  // cols
    double p = 2.0;

    void build_transpose() {
        At.assign(static_cast<size_t>(rows * cols), 0.0);
        for (std::int64_t i = 0; i < rows; ++i)
            for (std::int64_t j = 0; j < cols; ++j) At[j * rows + i] = A[i * cols + j];
    }

    double At_dot(const std::vector<double>& lam, std::int64_t j) const {
        double s = 0.0;
        const double* col = At.data() + j * rows;
        for (std::int64_t i = 0; i < rows; ++i) s += lam[static_cast<size_t>(i)] * col[i];
        return s;
    }
};

inline CapacityProblem build_capacity_problem(const CompactSet& K, const CapacitySpec& spec) {
    const bool elliptic = is_elliptic(spec.kernel);
    GridSpec g = K.grid;
    if (elliptic) g.steps = 1;
    const std::int64_t ncells = elliptic ? g.spatial_cell_count() : g.total_cell_count();
    if (static_cast<std::int64_t>(K.mask.size()) != ncells)
        throw std::invalid_argument("build_capacity_problem: mask size mismatch");

    std::vector<std::int64_t> constraint;
    for (std::int64_t i = 0; i < ncells; ++i)
        if (K.mask[static_cast<size_t>(i)]) constraint.push_back(i);

    const int N = g.dim();

    // source cells: the base grid plus coarse halo levels around it
    struct SourceCell {
        double cx[3] = {0, 0, 0};
        double ct = 0.0;
        double lo[3] = {0, 0, 0}, hi[3] = {0, 0, 0};
        double t0 = 0.0, t1 = 0.0;
        double vol = 0.0;
        double reach = 0.0;
    };
    std::vector<SourceCell> cells;
    std::vector<double> blo, bhi;
    auto push_grid = [&](const GridSpec& gg, const GridSpec* inner) {
        const std::int64_t n = elliptic ? gg.spatial_cell_count() : gg.total_cell_count();
        for (std::int64_t j = 0; j < n; ++j) {
            SpaceTimePoint c = gg.cell_center(j);
            if (elliptic) c.t = 0.0;
            if (inner) {  // skip cells covered by the finer level
                bool inside = true;
                for (int i = 0; i < N; ++i)
                    inside = inside && c.x[i] > inner->corner[i] &&
                             c.x[i] < inner->corner[i] + inner->side[i];
                if (!elliptic)
                    inside = inside && c.t > inner->t_begin && c.t < inner->t_end;
                if (inside) continue;
            }
            SourceCell sc;
            gg.cell_bounds(j, blo, bhi);
            double diag2 = 0.0;
            for (int i = 0; i < N; ++i) {
                sc.cx[i] = c.x[i];
                sc.lo[i] = blo[i];
                sc.hi[i] = bhi[i];
                diag2 += gg.spacing(i) * gg.spacing(i);
            }
            sc.ct = elliptic ? 0.0 : c.t;
            sc.t0 = elliptic ? -1e-12 : gg.cell_t_lo(j);
            sc.t1 = elliptic ? 1e-12 : gg.cell_t_hi(j);
            sc.vol = elliptic ? gg.spatial_cell_volume() : gg.cell_volume();
            sc.reach = elliptic ? std::sqrt(diag2)
                                : std::max(std::sqrt(diag2), std::sqrt(2.0 * gg.dt()));
            cells.push_back(sc);
        }
    };
    push_grid(g, nullptr);
    {
        GridSpec inner = g, outer = g;
        for (int lvl = 0; lvl < spec.halo_levels; ++lvl) {
            for (int i = 0; i < N; ++i) {
                outer.corner[i] = inner.corner[i] - 0.5 * inner.side[i];
                outer.side[i] = 2.0 * inner.side[i];
            }
            const double tmid = 0.5 * (inner.t_begin + inner.t_end);
            const double thalf = 0.5 * (inner.t_end - inner.t_begin);
            outer.t_begin = tmid - 2.0 * thalf;
            outer.t_end = tmid + 2.0 * thalf;
            push_grid(outer, &inner);
            inner = outer;
        }
    }

    CapacityProblem P;
    P.p = spec.p;
    P.rows = static_cast<std::int64_t>(constraint.size());
    P.cols = static_cast<std::int64_t>(cells.size());
    P.vol.resize(cells.size());
    for (size_t j = 0; j < cells.size(); ++j) P.vol[j] = cells[j].vol;
    P.A.assign(static_cast<size_t>(P.rows * P.cols), 0.0);
    if (P.rows == 0) return P;

    std::optional<detail::BesselRadialCache> bessel_cache;
    if (spec.kernel == CapKernel::EllipticBessel)
        bessel_cache.emplace(spec.alpha, N, 0.25 * g.spacing(0), 4.0 * g.parabolic_diameter());

    // displacement-based kernel, allocation free
    detail::RawKernel raw = [&, kern = spec.kernel](const double* dx, double dt) -> double {
        double r2 = 0.0;
        for (int i = 0; i < N; ++i) r2 += dx[i] * dx[i];
        switch (kern) {
            case CapKernel::RieszE: {
                const double d = std::max(std::sqrt(r2), std::sqrt(2.0 * std::abs(dt)));
                if (d == 0.0) return 0.0;
                return std::pow(d, -(N + 2.0 - spec.alpha)) *
                       truncation_weight(d, spec.R, spec.delta);
            }
            case CapKernel::HeatH:
            case CapKernel::BesselG: {
                if (!(dt > 0.0)) return 0.0;
                double v = heat_kernel_constant(spec.alpha, N) *
                           std::pow(dt, -0.5 * (N + 2.0 - spec.alpha)) *
                           std::exp(-r2 / (4.0 * dt));
                if (kern == CapKernel::BesselG) v *= std::exp(-dt);
                return v;
            }
            case CapKernel::EllipticRiesz: {
                const double r = std::sqrt(r2);
                if (r == 0.0) return 0.0;
                return std::pow(r, spec.alpha - N) * truncation_weight(r, spec.R, spec.delta);
            }
            case CapKernel::EllipticBessel:
                return (*bessel_cache)(std::sqrt(r2));
        }
        return 0.0;
    };

    double dxbuf[4];
    for (std::int64_t r = 0; r < P.rows; ++r) {
        SpaceTimePoint z = g.cell_center(constraint[static_cast<size_t>(r)]);
        if (elliptic) z.t = 0.0;
        double* row = P.A.data() + r * P.cols;
        for (std::int64_t j = 0; j < P.cols; ++j) {
            const SourceCell& sc = cells[static_cast<size_t>(j)];
            double d2 = 0.0;
            for (int i = 0; i < N; ++i) {
                dxbuf[i] = z.x[i] - sc.cx[i];
                d2 += dxbuf[i] * dxbuf[i];
            }
            const double dist =
                elliptic ? std::sqrt(d2)
                         : std::max(std::sqrt(d2), std::sqrt(2.0 * std::abs(z.t - sc.ct)));
            if (dist > 2.0 * sc.reach) {
                row[j] = raw(dxbuf, z.t - sc.ct) * sc.vol;
            } else {
                row[j] = detail::cell_average_rec(raw, z.x.data(), z.t, sc.lo, sc.hi, sc.t0,
                                                  sc.t1, N, 9) *
                         sc.vol;
            }
        }
    }
    P.build_transpose();
    return P;
}

struct CapacityEstimate {
    double primal = -1.0;
    double dual = -1.0;
    double gap = kInf;       // (primal - dual)/primal when both present
    int iterations = 0;
    double residual = kInf;  // duality gap of the primal lambda iterate
    bool converged = false;
};

namespace detail {

/// Lagrange-dual ascent in lambda >= 0 with exact primal recovery.
inline CapacityEstimate primal_solve(const CapacityProblem& P, int max_iters, double tol) {
    CapacityEstimate out;
    if (P.rows == 0) {
        out.primal = 0.0;
        out.converged = true;
        out.residual = 0.0;
        return out;
    }
    const double p = P.p, pp = p / (p - 1.0);
    const auto rows = static_cast<size_t>(P.rows), cols = static_cast<size_t>(P.cols);
    std::vector<double> lam(rows, 1.0), f(cols), Af(rows), grad(rows), trial(rows);

    auto recover_f = [&](const std::vector<double>& l) {
        for (size_t j = 0; j < cols; ++j) {
            const double c = P.At_dot(l, static_cast<std::int64_t>(j));
            f[j] = std::pow(std::max(c, 0.0) / (p * P.vol[j]), 1.0 / (p - 1.0));
        }
    };
    auto apply_A = [&](const std::vector<double>& ff, std::vector<double>& out_v) {
        for (size_t i = 0; i < rows; ++i) {
            double s = 0.0;
            const double* row = P.A.data() + i * cols;
            for (size_t j = 0; j < cols; ++j) s += row[j] * ff[j];
            out_v[i] = s;
        }
    };
    auto dual_value = [&](const std::vector<double>& l) {
        double s = 0.0;
        for (size_t i = 0; i < rows; ++i) s += l[i];
        double t = 0.0;
        for (size_t j = 0; j < cols; ++j) {
            const double c = std::max(P.At_dot(l, static_cast<std::int64_t>(j)), 0.0);
            t += P.vol[j] * std::pow(c / (p * P.vol[j]), pp);
        }
        return s - (p - 1.0) * t;
    };

    // scale the starting point along its ray (1-d exact maximization)
    {
        recover_f(lam);
        double s = 0.0;
        for (size_t i = 0; i < rows; ++i) s += lam[i];
        double t = 0.0;
        for (size_t j = 0; j < cols; ++j) {
            const double c = std::max(P.At_dot(lam, static_cast<std::int64_t>(j)), 0.0);
            t += P.vol[j] * std::pow(c / (p * P.vol[j]), pp);
        }
        if (t > 0.0) {
            const double scale = std::pow(s / (pp * (p - 1.0) * t), p - 1.0);
            for (double& v : lam) v *= scale;
        }
    }

    double g_cur = dual_value(lam);
    double step = 1.0;
    double primal_best = kInf;
    for (int it = 1; it <= max_iters; ++it) {
        out.iterations = it;
        recover_f(lam);
        apply_A(f, Af);
        double feas_min = kInf;
        for (size_t i = 0; i < rows; ++i) {
            grad[i] = 1.0 - Af[i];
            feas_min = std::min(feas_min, Af[i]);
        }
        // feasible primal certificate by rescaling
        if (feas_min > 0.0) {
            double val = 0.0;
            for (size_t j = 0; j < cols; ++j) val += std::pow(f[j], p) * P.vol[j];
            primal_best = std::min(primal_best, val / std::pow(feas_min, p));
        }
        const double gap = primal_best < kInf ? (primal_best - g_cur) / std::max(primal_best, 1e-300)
                                              : kInf;
        out.residual = gap;
        if (gap < tol) {
            out.converged = true;
            break;
        }
        // Armijo backtracking along the projected gradient
        double gnorm2 = 0.0;
        for (size_t i = 0; i < rows; ++i) {
            const bool active = lam[i] <= 0.0 && grad[i] < 0.0;
            if (!active) gnorm2 += grad[i] * grad[i];
        }
        if (gnorm2 == 0.0) {
            out.converged = true;
            break;
        }
        bool improved = false;
        for (int bt = 0; bt < 40; ++bt) {
            for (size_t i = 0; i < rows; ++i) trial[i] = std::max(0.0, lam[i] + step * grad[i]);
            const double g_new = dual_value(trial);
            if (g_new > g_cur + 1e-4 * step * gnorm2) {
                lam.swap(trial);
                g_cur = g_new;
                step *= 1.3;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if (!improved) break;
    }
    recover_f(lam);
    apply_A(f, Af);
    double feas_min = kInf;
    for (size_t i = 0; i < rows; ++i) feas_min = std::min(feas_min, Af[i]);
    if (feas_min > 0.0) {
        double val = 0.0;
        for (size_t j = 0; j < cols; ++j) val += std::pow(f[j], p) * P.vol[j];
        primal_best = std::min(primal_best, val / std::pow(feas_min, p));
    }
    out.primal = primal_best;
    return out;
}

/// Projected ascent of mu(K)/||A^T mu / vol||_{p'} over mu >= 0; returns sup^p.
inline CapacityEstimate dual_solve(const CapacityProblem& P, int max_iters, double tol) {
    CapacityEstimate out;
    if (P.rows == 0) {
        out.dual = 0.0;
        out.converged = true;
        out.residual = 0.0;
        return out;
    }
    const double p = P.p, pp = p / (p - 1.0);
    const auto rows = static_cast<size_t>(P.rows), cols = static_cast<size_t>(P.cols);
    std::vector<double> mu(rows, 1.0), gvals(cols), grad(rows), trial(rows), gq(cols), Agq(rows);

    auto ratio = [&](const std::vector<double>& m, bool fill) -> double {
        double S = 0.0;
        for (size_t i = 0; i < rows; ++i) S += m[i];
        if (S <= 0.0) return 0.0;
        double nrm = 0.0;
        for (size_t j = 0; j < cols; ++j) {
            const double gj = P.At_dot(m, static_cast<std::int64_t>(j)) / P.vol[j];
            if (fill) gvals[j] = gj;
            nrm += P.vol[j] * std::pow(gj, pp);
        }
        nrm = std::pow(nrm, 1.0 / pp);
        return nrm > 0.0 ? S / nrm : 0.0;
    };

    double h_cur = ratio(mu, true);
    double step = 1.0;
    for (int it = 1; it <= max_iters; ++it) {
        out.iterations = it;
        double S = 0.0;
        for (size_t i = 0; i < rows; ++i) S += mu[i];
        double nrm_pp = 0.0;
        for (size_t j = 0; j < cols; ++j) {
            nrm_pp += P.vol[j] * std::pow(gvals[j], pp);
            gq[j] = std::pow(gvals[j], pp - 1.0);
        }
        const double nrm = std::pow(nrm_pp, 1.0 / pp);
        for (size_t i = 0; i < rows; ++i) {
            double s = 0.0;
            const double* row = P.A.data() + i * cols;
            for (size_t j = 0; j < cols; ++j) s += row[j] * gq[j];
            Agq[i] = s;
        }
        double gnorm2 = 0.0;
        for (size_t i = 0; i < rows; ++i) {
            grad[i] = (1.0 - S * std::pow(nrm, -pp) * Agq[i]) / nrm;
            const bool active = mu[i] <= 0.0 && grad[i] < 0.0;
            if (!active) gnorm2 += grad[i] * grad[i];
        }
        if (gnorm2 <= tol * tol * h_cur * h_cur) {
            out.converged = true;
            break;
        }
        bool improved = false;
        const double mu_scale = S / rows;
        for (int bt = 0; bt < 40; ++bt) {
            for (size_t i = 0; i < rows; ++i)
                trial[i] = std::max(0.0, mu[i] + step * mu_scale * nrm * grad[i]);
            const double h_new = ratio(trial, false);
            if (h_new > h_cur * (1.0 + 1e-12)) {
                mu.swap(trial);
                h_cur = ratio(mu, true);
                step *= 1.3;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if (!improved) {
            out.converged = true;
            break;
        }
    }
    out.dual = std::pow(h_cur, p);
    out.residual = 0.0;
    return out;
}

}  // namespace detail

/// Upper-biased estimate from a feasible f on the grid.
inline double capacity_primal(const CompactSet& K, const CapacitySpec& spec) {
    const CapacityProblem P = build_capacity_problem(K, spec);
    const auto r = detail::primal_solve(P, spec.max_iters, spec.tol);
    if (!std::isfinite(r.primal))
        throw std::runtime_error("capacity_primal: solver failed to produce a feasible point");
    return r.primal;
}

/// Lower-biased estimate from a feasible dual measure; returned to the p-th
/// power so it shares units with the primal.
inline double capacity_dual(const CompactSet& K, const CapacitySpec& spec) {
    const CapacityProblem P = build_capacity_problem(K, spec);
    return detail::dual_solve(P, spec.max_iters, spec.tol).dual;
}

inline CapacityEstimate estimate_capacity(const CompactSet& K, const CapacitySpec& spec) {
    const CapacityProblem P = build_capacity_problem(K, spec);
    CapacityEstimate out;
    if (spec.solver != CapSolver::Dual) {
        const auto r = detail::primal_solve(P, spec.max_iters, spec.tol);
        out.primal = r.primal;
        out.iterations = r.iterations;
        out.residual = r.residual;
        out.converged = r.converged;
    }
    if (spec.solver != CapSolver::Primal) {
        const auto r = detail::dual_solve(P, spec.max_iters, spec.tol);
        out.dual = r.dual;
        out.iterations += r.iterations;
        out.converged = out.converged || (spec.solver == CapSolver::Dual && r.converged);
    }
    if (out.primal >= 0.0 && out.dual >= 0.0 && out.primal > 0.0)
        out.gap = (out.primal - out.dual) / out.primal;
    return out;
}

// ---------------------------------------------------------------------------
// Reports

/// Per-set ratio table capA/capB with family-wide spread.
inline VerificationReport capacity_equivalence_report(const std::vector<CompactSet>& family,
                                                      const CapacitySpec& specA,
                                                      const CapacitySpec& specB,
                                                      double acceptance_ratio = 10.0) {
    VerificationReport rep;
    rep.check = "capacity_equivalence";
    rep.params = {{"acceptance_ratio", acceptance_ratio}};
    double lo = kInf, hi = 0.0;
    json rows = json::array();
    for (const CompactSet& K : family) {
        const double a = capacity_primal(K, specA);
        const double b = capacity_primal(K, specB);
        const double ratio = b > 0.0 ? a / b : kInf;
        rows.push_back({{"cells", K.count()}, {"capA", a}, {"capB", b}, {"ratio", ratio}});
        lo = std::min(lo, ratio);
        hi = std::max(hi, ratio);
    }
    rep.samples["sets"] = rows;
    rep.fitted_constants["min_ratio"] = lo;
    rep.fitted_constants["max_ratio"] = hi;
    rep.worst_ratio = lo > 0.0 ? hi / lo : kInf;
    rep.pass = std::isfinite(rep.worst_ratio) && rep.worst_ratio <= acceptance_ratio;
    return rep;
}

/// |E|^{1 - alpha p/(N+2)} <= C Cap(E): ratios uniformly bounded over a family.
inline VerificationReport isoperimetric_check(const std::vector<CompactSet>& family,
                                              const CapacitySpec& spec,
                                              double acceptance_factor = 2.0) {
    VerificationReport rep;
    rep.check = "isoperimetric";
    if (family.empty()) {
        rep.pass = true;
        rep.status = "empty family";
        return rep;
    }
    const int N = family.front().grid.dim();
    if (!(spec.alpha * spec.p < N + 2.0))
        throw std::invalid_argument("isoperimetric_check: requires alpha p < N+2");
    const double expo = 1.0 - spec.alpha * spec.p / (N + 2.0);
    rep.params = {{"exponent", expo}, {"acceptance_factor", acceptance_factor}};
    double lo = kInf, hi = 0.0;
    json rows = json::array();
    for (const CompactSet& K : family) {
        const double vol = K.volume(is_elliptic(spec.kernel));
        if (vol == 0.0) continue;  // empty set: 0 <= 0 vacuously
        const double cap = capacity_primal(K, spec);
        const double ratio = cap > 0.0 ? std::pow(vol, expo) / cap : kInf;
        rows.push_back({{"volume", vol}, {"cap", cap}, {"ratio", ratio}});
        lo = std::min(lo, ratio);
        hi = std::max(hi, ratio);
    }
    rep.samples["sets"] = rows;
    rep.fitted_constants["C_fit"] = hi;
    rep.worst_ratio = lo > 0.0 && lo < kInf ? hi / lo : (hi == 0.0 ? 0.0 : kInf);
    rep.pass = rows.empty() || (std::isfinite(rep.worst_ratio) && rep.worst_ratio <= acceptance_factor);
    if (rows.empty()) rep.status = "all sets empty";
    return rep;
}

/// Empirical trace-inequality constants C4..C8 over a family of sample sets,
/// with divergence detection as the sets shrink (witness recorded).
inline VerificationReport trace_constants(const DiscreteMeasure& mu, const CapacitySpec& cap_spec,
                                          const PotentialSpec& pot_spec,
                                          const std::vector<ParabolicCylinder>& sample_sets,
                                          const GridSpec& grid) {
    detail::require_nonnegative(mu, "trace_constants");
    VerificationReport rep;
    rep.check = "trace_constants";
    rep.params = {{"alpha", pot_spec.alpha}, {"p", cap_spec.p},
                  {"delta", pot_spec.delta}, {"R", pot_spec.R == kInf ? -1.0 : pot_spec.R}};
    const double pp = cap_spec.p_conjugate();
    const double cellvol = grid.cell_volume();

    // densities living on the evaluation grid go through the kernel matrix;
    // atoms are exact tail sums
    const RieszMatrix M = riesz_density_matrix(grid, grid, pot_spec);
    auto field_of = [&](const DiscreteMeasure& m) {
        GridFunction out(grid);
        if (m.has_density()) {
            if (m.density->grid.same_layout(grid) && !m.density_on_t0_slab) {
                M.apply(m.density->values, out.values);
            } else {
                DiscreteMeasure donly(m.dim);
                donly.density = m.density;
                donly.density_on_t0_slab = m.density_on_t0_slab;
                out = potential_field(donly, pot_spec, PotentialOp::Riesz, grid);
            }
        }
        if (!m.atoms.empty()) {
            DiscreteMeasure aonly(m.dim);
            aonly.atoms = m.atoms;
            for (std::int64_t i = 0; i < out.size(); ++i)
                out[i] += riesz_potential(aonly, pot_spec, grid.cell_center(i));
        }
        return out;
    };

    // I_alpha^{R,delta}[mu] on the grid
    GridFunction pot = field_of(mu);

    // C5: sup I[(I[mu])^{p'}] / I[mu] over nodes
    double c5 = 0.0;
    {
        std::vector<double> dens(static_cast<size_t>(pot.size()));
        for (std::int64_t i = 0; i < pot.size(); ++i)
            dens[static_cast<size_t>(i)] =
                std::isfinite(pot[i]) ? std::pow(pot[i], pp) : 0.0;
        std::vector<double> outer(dens.size());
        M.apply(dens, outer);
        for (std::int64_t i = 0; i < pot.size(); ++i) {
            if (!(pot[i] > 0.0) || !std::isfinite(pot[i])) continue;
            c5 = std::max(c5, outer[static_cast<size_t>(i)] / pot[i]);
        }
    }

    double c4 = 0.0, c6 = 0.0, c7 = 0.0, c8 = 0.0;
    json rows = json::array();
    std::vector<std::pair<double, double>> c4_by_size;  // (volume, ratio)
    for (const ParabolicCylinder& cyl : sample_sets) {
        const CompactSet K = set_from_cylinder(grid, cyl);
        if (K.count() == 0) continue;
        const double cap = capacity_primal(K, cap_spec);
        const double muE = cylinder_measure(mu, cyl);
        const double r4 = cap > 0.0 ? muE / cap : (muE > 0.0 ? kInf : 0.0);
        double int6 = 0.0;
        for (std::int64_t i = 0; i < pot.size(); ++i)
            if (K.mask[static_cast<size_t>(i)] && std::isfinite(pot[i]))
                int6 += std::pow(pot[i], pp) * cellvol;
        const double r6 = cap > 0.0 ? int6 / cap : (int6 > 0.0 ? kInf : 0.0);

        const DiscreteMeasure muE_restricted = restrict_to(mu, cyl);
        GridFunction potE = field_of(muE_restricted);
        double int7 = 0.0, int8 = 0.0;
        for (std::int64_t i = 0; i < potE.size(); ++i) {
            if (!std::isfinite(potE[i])) continue;
            const double v = std::pow(potE[i], pp) * cellvol;
            int7 += v;
            if (K.mask[static_cast<size_t>(i)]) int8 += v;
        }
        const double r7 = muE > 0.0 ? int7 / muE : (int7 > 0.0 ? kInf : 0.0);
        const double r8 = muE > 0.0 ? int8 / muE : (int8 > 0.0 ? kInf : 0.0);
        rows.push_back({{"rho", cyl.radius}, {"cap", cap}, {"mu", muE},
                        {"C4", r4}, {"C6", r6}, {"C7", r7}, {"C8", r8}});
        c4 = std::max(c4, r4);
        c6 = std::max(c6, r6);
        c7 = std::max(c7, r7);
        c8 = std::max(c8, r8);
        if (std::isfinite(r4) && r4 > 0.0) c4_by_size.emplace_back(K.volume(), r4);
    }
    rep.samples["sets"] = rows;
    rep.fitted_constants["C4"] = c4;
    rep.fitted_constants["C5"] = c5;
    rep.fitted_constants["C6"] = c6;
    rep.fitted_constants["C7"] = c7;
    rep.fitted_constants["C8"] = c8;

    // divergence heuristic: C4 ratios growing as sets shrink
    bool failing = !std::isfinite(c4) || !std::isfinite(c5) || !std::isfinite(c6) ||
                   !std::isfinite(c7) || !std::isfinite(c8);
    if (c4_by_size.size() >= 3) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (auto& [v, r] : c4_by_size) {
            const double x = std::log(v), y = std::log(r);
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
        const double n = static_cast<double>(c4_by_size.size());
        const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        double rmin = kInf, rmax = 0.0;
        for (auto& [v, r] : c4_by_size) {
            rmin = std::min(rmin, r);
            rmax = std::max(rmax, r);
        }
        rep.fitted_constants["C4_size_slope"] = slope;
        if (slope < -0.25 && rmax / rmin > 5.0) {
            failing = true;
            auto worst = std::min_element(c4_by_size.begin(), c4_by_size.end());
            rep.samples["witness_volume"] = worst->first;
            rep.samples["witness_ratio"] = worst->second;
        }
    }
    rep.status = failing ? "failing" : "consistent";
    rep.worst_ratio = c4;
    rep.pass = !failing;
    return rep;
}

}  // namespace parapot
