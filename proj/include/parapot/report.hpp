#pragma once

#include <map>
#include <string>

#include <json.hpp>

namespace parapot {

using json = nlohmann::json;

/// Conventions in force for every run; embedded in each report so that a
/// reader can audit how boundary cases and quadrature were resolved.
inline json conventions_json() {
    return json{{"spatial_ball", "open"},
                {"backward_cylinder_time", "(t-rho^2, t]"},
                {"centered_cylinder_time", "[t-rho^2/2, t+rho^2/2)"},
                {"density_cells", "piecewise constant"},
                {"ball_box_overlap", "adaptive quadrature, rel tol ~1e-10"},
                {"rho_integrals", "closed form between atom breakpoints; log-spaced composite for densities"}};
}

// Structured record of one empirical check: fitted constants, worst-case
// ratios, pass/fail against the declared tolerance.
struct VerificationReport {
    std::string check;
    json params = json::object();
    std::map<std::string, double> fitted_constants;
    double worst_ratio = 0.0;
    bool pass = false;
    std::string status = "ok";
    json samples = json::object();

    json to_json() const {
        json j;
        j["check"] = check;
        j["params"] = params;
        j["fitted_constants"] = fitted_constants;
        j["worst_ratio"] = worst_ratio;
        j["pass"] = pass;
        j["status"] = status;
        j["samples"] = samples;
        j["conventions"] = conventions_json();
        return j;
    }
};

}  // namespace parapot
