#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "core.hpp"

namespace sdrom {

enum class TimeProfileKind { exp_decay, cosine };

/// Scalar time factor g(t) applied to the spatial solution pattern.
struct TimeProfile {
    TimeProfileKind kind = TimeProfileKind::exp_decay;
    double param = 1.0;  // decay rate or angular frequency

    double g(double t) const {
        return kind == TimeProfileKind::exp_decay ? std::exp(-param * t)
                                                  : std::cos(param * t);
    }
    double dg(double t) const {
        return kind == TimeProfileKind::exp_decay ? -param * std::exp(-param * t)
                                                  : -param * std::sin(param * t);
    }
};

/// "name:param" with name in {exp_decay, cosine}.
inline TimeProfile parse_time_profile(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos)
        throw std::invalid_argument("time profile must be name:param, got '" + text + "'");
    const std::string name = text.substr(0, colon);
    TimeProfile p;
    if (name == "exp_decay")
        p.kind = TimeProfileKind::exp_decay;
    else if (name == "cosine")
        p.kind = TimeProfileKind::cosine;
    else
        throw std::invalid_argument("unknown time profile '" + name + "'");
    try {
        std::size_t used = 0;
        p.param = std::stod(text.substr(colon + 1), &used);
        if (used != text.size() - colon - 1) throw std::invalid_argument("");
    } catch (const std::exception&) {
        throw std::invalid_argument("bad time profile parameter in '" + text + "'");
    }
    return p;
}

/// Closed-form solution of the forced Navier-Stokes problem on [0,1]^2:
/// velocity is the curl of psi = A sin^2(pi x) sin^2(pi y) g(t), so it is
/// divergence-free and vanishes on the boundary; the forcing makes the pair
/// (u, p) satisfy the momentum equation exactly.
struct ManufacturedCase {
    double amplitude = 1.0;
    double nu = 0.01;
    TimeProfile profile;

    std::array<double, 2> velocity(double x, double y, double t) const {
        const auto [ux, uy] = pattern(x, y);
        const double gt = profile.g(t);
        return {gt * ux, gt * uy};
    }

    /// Row-major Jacobian: {dux/dx, dux/dy, duy/dx, duy/dy}.
    std::array<double, 4> velocity_gradient(double x, double y, double t) const {
        const auto J = pattern_gradient(x, y);
        const double gt = profile.g(t);
        return {gt * J[0], gt * J[1], gt * J[2], gt * J[3]};
    }

    double pressure(double x, double y, double t) const {
        using std::numbers::pi;
        return profile.g(t) * std::sin(2 * pi * x) * std::cos(2 * pi * y);
    }

    std::array<double, 2> forcing(double x, double y, double t) const {
        using std::numbers::pi;
        const double gt = profile.g(t), dgt = profile.dg(t);
        const auto [ux, uy] = pattern(x, y);
        const auto J = pattern_gradient(x, y);
        const double A = amplitude;
        const double sx = std::sin(pi * x), sy = std::sin(pi * y);
        const double s2x = std::sin(2 * pi * x), s2y = std::sin(2 * pi * y);
        const double c2x = std::cos(2 * pi * x), c2y = std::cos(2 * pi * y);
        const double pi3 = pi * pi * pi;
        const double lap_x = 2 * A * pi3 * c2x * s2y - 4 * A * pi3 * sx * sx * s2y;
        const double lap_y = 4 * A * pi3 * s2x * sy * sy - 2 * A * pi3 * s2x * c2y;
        const double gp_x = 2 * pi * c2x * c2y;
        const double gp_y = -2 * pi * s2x * s2y;
        return {ux * dgt + gt * gt * (ux * J[0] + uy * J[1]) - nu * gt * lap_x + gt * gp_x,
                uy * dgt + gt * gt * (ux * J[2] + uy * J[3]) - nu * gt * lap_y + gt * gp_y};
    }

  private:
    std::array<double, 2> pattern(double x, double y) const {
        using std::numbers::pi;
        const double sx = std::sin(pi * x), sy = std::sin(pi * y);
        return {amplitude * pi * sx * sx * std::sin(2 * pi * y),
                -amplitude * pi * std::sin(2 * pi * x) * sy * sy};
    }

    std::array<double, 4> pattern_gradient(double x, double y) const {
        using std::numbers::pi;
        const double A = amplitude, pi2 = pi * pi;
        const double sx = std::sin(pi * x), sy = std::sin(pi * y);
        const double s2x = std::sin(2 * pi * x), s2y = std::sin(2 * pi * y);
        return {A * pi2 * s2x * s2y, 2 * A * pi2 * sx * sx * std::cos(2 * pi * y),
                -2 * A * pi2 * std::cos(2 * pi * x) * sy * sy, -A * pi2 * s2x * s2y};
    }
};

}  // namespace sdrom
