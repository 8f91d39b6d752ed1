#pragma once

#include <charconv>
#include <fstream>
#include <sstream>

#include "parapot/capacity.hpp"
#include "parapot/heat.hpp"
#include "parapot/norms.hpp"

namespace parapot {

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

inline double finite_number(const json& j, const std::string& where) {
    if (!j.is_number()) throw ParseError(where + ": expected a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) throw ParseError(where + ": NaN/Inf rejected");
    return v;
}

inline std::vector<double> finite_array(const json& j, const std::string& where) {
    if (!j.is_array()) throw ParseError(where + ": expected an array");
    std::vector<double> out;
    out.reserve(j.size());
    for (const auto& e : j) out.push_back(finite_number(e, where));
    return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// GridSpec

inline json grid_to_json(const GridSpec& g) {
    return json{{"corner", g.corner},
                {"side_lengths", g.side},
                {"cells", g.cells},
                {"time_interval", {g.t_begin, g.t_end}},
                {"steps", g.steps}};
}

inline GridSpec grid_from_json(const json& j) {
    GridSpec g;
    g.corner = detail::finite_array(j.at("corner"), "grid.corner");
    g.side = detail::finite_array(j.at("side_lengths"), "grid.side_lengths");
    for (const auto& c : j.at("cells")) g.cells.push_back(c.get<int>());
    const auto ti = detail::finite_array(j.at("time_interval"), "grid.time_interval");
    if (ti.size() != 2) throw ParseError("grid.time_interval: expected [t0, t1]");
    g.t_begin = ti[0];
    g.t_end = ti[1];
    g.steps = j.at("steps").get<int>();
    g.validate();
    return g;
}

// ---------------------------------------------------------------------------
// DiscreteMeasure

inline json measure_to_json(const DiscreteMeasure& mu) {
    json j;
    j["dim"] = mu.dim;
    json atoms = json::array();
    for (const Atom& a : mu.atoms)
        atoms.push_back({{"x", a.z.x}, {"t", a.z.t}, {"mass", a.mass}});
    j["atoms"] = atoms;
    if (mu.density) {
        j["density"] = {{"grid", grid_to_json(mu.density->grid)},
                        {"values", mu.density->values},
                        {"on_t0_slab", mu.density_on_t0_slab}};
    }
    return j;
}

inline DiscreteMeasure measure_from_json(const json& j) {
    DiscreteMeasure mu(j.at("dim").get<int>());
    if (mu.dim < 1) throw ParseError("measure.dim: must be >= 1");
    if (j.contains("atoms")) {
        for (const auto& a : j.at("atoms")) {
            auto x = detail::finite_array(a.at("x"), "atom.x");
            if (static_cast<int>(x.size()) != mu.dim)
                throw ParseError("atom.x: dimension mismatch");
            mu.add_atom(SpaceTimePoint(std::move(x), detail::finite_number(a.at("t"), "atom.t")),
                        detail::finite_number(a.at("mass"), "atom.mass"));
        }
    }
    if (j.contains("density") && !j.at("density").is_null()) {
        const json& d = j.at("density");
        GridSpec g = grid_from_json(d.at("grid"));
        if (g.dim() != mu.dim) throw ParseError("density.grid: dimension mismatch");
        std::vector<double> vals = detail::finite_array(d.at("values"), "density.values");
        mu.density = GridFunction(std::move(g), std::move(vals));
        if (d.contains("on_t0_slab")) mu.density_on_t0_slab = d.at("on_t0_slab").get<bool>();
    }
    return mu;
}

// ---------------------------------------------------------------------------
// PotentialSpec / NormSpec / CapacitySpec

inline double r_from_json(const json& j) {
    if (j.is_null() || (j.is_string() && j.get<std::string>() == "inf")) return kInf;
    return detail::finite_number(j, "R");
}

inline PotentialSpec potential_spec_from_json(const json& j) {
    PotentialSpec s;
    if (j.contains("alpha")) s.alpha = detail::finite_number(j.at("alpha"), "alpha");
    if (j.contains("p")) s.p = detail::finite_number(j.at("p"), "p");
    if (j.contains("R")) s.R = r_from_json(j.at("R"));
    if (j.contains("delta")) s.delta = detail::finite_number(j.at("delta"), "delta");
    if (j.contains("quadrature")) {
        const json& q = j.at("quadrature");
        if (q.contains("rho_min")) s.quad.rho_min = detail::finite_number(q.at("rho_min"), "rho_min");
        if (q.contains("rho_max")) s.quad.rho_max = detail::finite_number(q.at("rho_max"), "rho_max");
        if (q.contains("points_per_decade"))
            s.quad.points_per_decade = q.at("points_per_decade").get<int>();
    }
    return s;
}

inline NormSpec norm_spec_from_json(const json& j) {
    NormSpec s;
    if (j.contains("q")) s.q = detail::finite_number(j.at("q"), "q");
    if (j.contains("s")) {
        if (j.at("s").is_string() && j.at("s").get<std::string>() == "inf")
            s.s = kInf;
        else
            s.s = detail::finite_number(j.at("s"), "s");
    }
    if (j.contains("morrey") && !j.at("morrey").is_null()) {
        const json& m = j.at("morrey");
        if (m.is_string() && m.get<std::string>() == "none") {
            s.morrey = MorreyKind::None;
        } else if (m.contains("calorie")) {
            s.morrey = MorreyKind::Calorie;
            s.morrey_exponent = detail::finite_number(m.at("calorie"), "morrey.calorie");
        } else if (m.contains("spatial")) {
            s.morrey = MorreyKind::Spatial;
            s.morrey_exponent = detail::finite_number(m.at("spatial"), "morrey.spatial");
        } else {
            throw ParseError("morrey: expected \"none\", {calorie: k} or {spatial: th}");
        }
    }
    if (j.contains("radius_scan")) s.radius_scan = j.at("radius_scan").get<int>();
    return s;
}

inline CapacitySpec capacity_spec_from_json(const json& j) {
    CapacitySpec s;
    if (j.contains("kernel")) {
        const std::string k = j.at("kernel").get<std::string>();
        if (k == "riesz_e") s.kernel = CapKernel::RieszE;
        else if (k == "heat_h") s.kernel = CapKernel::HeatH;
        else if (k == "bessel_g") s.kernel = CapKernel::BesselG;
        else if (k == "elliptic_riesz") s.kernel = CapKernel::EllipticRiesz;
        else if (k == "elliptic_bessel") s.kernel = CapKernel::EllipticBessel;
        else throw ParseError("capacity.kernel: unknown kernel " + k);
    }
    if (j.contains("alpha")) s.alpha = detail::finite_number(j.at("alpha"), "alpha");
    if (j.contains("p")) s.p = detail::finite_number(j.at("p"), "p");
    if (j.contains("R")) s.R = r_from_json(j.at("R"));
    if (j.contains("delta")) s.delta = detail::finite_number(j.at("delta"), "delta");
    if (j.contains("max_iters")) s.max_iters = j.at("max_iters").get<int>();
    if (j.contains("tol")) s.tol = detail::finite_number(j.at("tol"), "tol");
    if (j.contains("halo_levels")) s.halo_levels = j.at("halo_levels").get<int>();
    return s;
}

inline ParabolicCylinder cylinder_from_json(const json& j) {
    auto x = detail::finite_array(j.at("center_x"), "cylinder.center_x");
    const double t = detail::finite_number(j.at("center_t"), "cylinder.center_t");
    const double rho = detail::finite_number(j.at("radius"), "cylinder.radius");
    CylinderKind kind = CylinderKind::Centered;
    if (j.contains("kind")) {
        const std::string k = j.at("kind").get<std::string>();
        if (k == "backward") kind = CylinderKind::Backward;
        else if (k != "centered") throw ParseError("cylinder.kind: expected centered|backward");
    }
    return ParabolicCylinder(SpaceTimePoint(std::move(x), t), rho, kind);
}

// Set file: {"grid": GridSpec, "cylinders": [...]} or {"grid":..., "cells": [...]}
inline CompactSet compact_set_from_json(const json& j) {
    CompactSet K;
    K.grid = grid_from_json(j.at("grid"));
    K.mask.assign(static_cast<size_t>(K.grid.total_cell_count()), 0);
    if (j.contains("cylinders")) {
        for (const auto& c : j.at("cylinders")) {
            const ParabolicCylinder cyl = cylinder_from_json(c);
            for (std::int64_t i = 0; i < K.grid.total_cell_count(); ++i)
                if (cyl.contains(K.grid.cell_center(i))) K.mask[static_cast<size_t>(i)] = 1;
        }
    }
    if (j.contains("cells")) {
        for (const auto& c : j.at("cells")) {
            const auto i = c.get<std::int64_t>();
            if (i < 0 || i >= K.grid.total_cell_count())
                throw ParseError("set.cells: index out of range");
            K.mask[static_cast<size_t>(i)] = 1;
        }
    }
    return K;
}

// ---------------------------------------------------------------------------
// HeatProblem

inline HeatProblem heat_problem_from_json(const json& j) {
    HeatProblem pr;
    pr.grid = grid_from_json(j.at("grid"));
    pr.mu = j.contains("mu") && !j.at("mu").is_null() ? measure_from_json(j.at("mu"))
                                                      : DiscreteMeasure(pr.grid.dim());
    pr.sigma = j.contains("sigma") && !j.at("sigma").is_null()
                   ? measure_from_json(j.at("sigma"))
                   : DiscreteMeasure(pr.grid.dim());
    if (j.contains("domain")) {
        const std::string d = j.at("domain").get<std::string>();
        if (d == "free_space") pr.domain = HeatDomain::FreeSpace;
        else if (d == "dirichlet_box") pr.domain = HeatDomain::DirichletBox;
        else throw ParseError("heat.domain: expected free_space|dirichlet_box");
    }
    if (j.contains("scheme")) {
        const std::string s = j.at("scheme").get<std::string>();
        if (s == "explicit") pr.scheme = HeatScheme::Explicit;
        else if (s == "crank_nicolson") pr.scheme = HeatScheme::CrankNicolson;
        else throw ParseError("heat.scheme: expected explicit|crank_nicolson");
    }
    return pr;
}

// ---------------------------------------------------------------------------
// CSV

inline std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

inline void write_points_csv(std::ostream& os, const std::vector<SpaceTimePoint>& pts,
                             const std::vector<double>& values, const std::string& value_name) {
    const int N = pts.empty() ? 0 : pts.front().dim();
    for (int i = 0; i < N; ++i) os << "x_" << i + 1 << ",";
    os << "t," << value_name << "\n";
    for (size_t k = 0; k < pts.size(); ++k) {
        for (int i = 0; i < N; ++i) os << format_double(pts[k].x[i]) << ",";
        os << format_double(pts[k].t) << "," << format_double(values[k]) << "\n";
    }
}

inline void write_grid_csv(std::ostream& os, const GridFunction& f,
                           const std::string& value_name) {
    std::vector<SpaceTimePoint> pts;
    pts.reserve(static_cast<size_t>(f.size()));
    for (std::int64_t i = 0; i < f.size(); ++i) pts.push_back(f.grid.cell_center(i));
    write_points_csv(os, pts, f.values, value_name);
}

inline std::vector<std::vector<double>> read_csv(std::istream& is, std::vector<std::string>* header,
                                                 const std::string& where) {
    std::vector<std::vector<double>> rows;
    std::string line;
    int lineno = 0;
    bool first = true;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        if (first) {
            first = false;
            // header row of column names
            if (header) {
                while (std::getline(ss, cell, ',')) header->push_back(cell);
            }
            continue;
        }
        std::vector<double> row;
        while (std::getline(ss, cell, ',')) {
            try {
                const double v = std::stod(cell);
                if (!std::isfinite(v))
                    throw ParseError(where + ":" + std::to_string(lineno) + ": NaN/Inf rejected");
                row.push_back(v);
            } catch (const std::invalid_argument&) {
                throw ParseError(where + ":" + std::to_string(lineno) + ": bad number '" + cell +
                                 "'");
            }
        }
        if (!row.empty()) rows.push_back(std::move(row));
    }
    return rows;
}

/// Points file: CSV with columns x_1..x_N,t.
inline std::vector<SpaceTimePoint> read_points_csv(std::istream& is, const std::string& where) {
    std::vector<std::string> header;
    auto rows = read_csv(is, &header, where);
    std::vector<SpaceTimePoint> pts;
    for (const auto& r : rows) {
        if (r.size() < 2) throw ParseError(where + ": need at least one coordinate and t");
        std::vector<double> x(r.begin(), r.end() - 1);
        pts.emplace_back(std::move(x), r.back());
    }
    return pts;
}

/// Function CSV (columns x_1..x_N,t,value) mapped onto a grid by coordinates.
inline GridFunction read_grid_csv(std::istream& is, const GridSpec& g, const std::string& where) {
    std::vector<std::string> header;
    auto rows = read_csv(is, &header, where);
    GridFunction f(g);
    std::vector<std::uint8_t> seen(static_cast<size_t>(g.total_cell_count()), 0);
    for (const auto& r : rows) {
        if (static_cast<int>(r.size()) != g.dim() + 2)
            throw ParseError(where + ": expected x_1..x_N,t,value columns");
        std::vector<double> x(r.begin(), r.end() - 2);
        const std::int64_t cell = g.locate(SpaceTimePoint(std::move(x), r[r.size() - 2]));
        if (cell < 0) throw ParseError(where + ": row outside the declared grid");
        f[cell] = r.back();
        seen[static_cast<size_t>(cell)] = 1;
    }
    for (auto s : seen)
        if (!s) throw ParseError(where + ": grid not fully covered by rows");
    return f;
}

// ---------------------------------------------------------------------------
// Files

inline json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path + ": cannot open");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    return j;
}

inline void save_json(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    out << j.dump(2) << "\n";
}

inline DiscreteMeasure load_measure(const std::string& path) {
    return measure_from_json(load_json(path));
}

}  // namespace parapot
