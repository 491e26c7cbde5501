#pragma once

#include <cmath>
#include <map>
#include <memory>
#include <random>

#include <sdrom/sdrom.hpp>

namespace testhelp {

using namespace sdrom;

inline const TaylorHoodSpace& shared_space(int n) {
    static std::map<int, std::unique_ptr<TaylorHoodSpace>> cache;
    auto it = cache.find(n);
    if (it == cache.end())
        it = cache.emplace(n, std::make_unique<TaylorHoodSpace>(build_mesh(n))).first;
    return *it->second;
}

inline const AssembledOperators& shared_ops(int n) {
    static std::map<int, std::unique_ptr<AssembledOperators>> cache;
    auto it = cache.find(n);
    if (it == cache.end())
        it = cache
                 .emplace(n, std::make_unique<AssembledOperators>(
                                 assemble_operators(shared_space(n))))
                 .first;
    return *it->second;
}

inline ManufacturedCase default_case() {
    ManufacturedCase c;
    c.nu = 0.01;
    c.amplitude = 1.0;
    c.profile = parse_time_profile("exp_decay:1.0");
    return c;
}

/// Manufactured-forcing FOM runs, cached by (n, dt scaled, steps).
inline const SnapshotSet& shared_fom(int n, double dt, int steps) {
    static std::map<std::tuple<int, long, int>, std::unique_ptr<SnapshotSet>> cache;
    const auto key = std::make_tuple(n, std::lround(dt * 1e9), steps);
    auto it = cache.find(key);
    if (it == cache.end()) {
        const TaylorHoodSpace& space = shared_space(n);
        FomOptions opt;
        opt.dt = dt;
        opt.n_steps = steps;
        opt.nu = 0.01;
        FomResult res = solve_fom(space, shared_ops(n), default_case(), opt);
        it = cache.emplace(key, std::make_unique<SnapshotSet>(std::move(res.snapshots)))
                 .first;
    }
    return *it->second;
}

/// Random velocity vector supported on interior dofs only.
inline Vec random_interior(const TaylorHoodSpace& space, std::mt19937_64& rng) {
    std::normal_distribution<double> dist;
    Vec v = Vec::Zero(space.n_velocity_dofs());
    for (int d : space.interior_velocity_dofs()) v[d] = dist(rng);
    return v;
}

/// Interpolant of a smooth solenoidal field: curl of a random low-frequency
/// stream function that vanishes on the boundary.
inline Vec random_solenoidal(const TaylorHoodSpace& space, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    double a[2][2];
    for (auto& row : a)
        for (double& v : row) v = dist(rng);
    const double pi = std::numbers::pi;
    return space.interpolate_velocity([&](double x, double y) {
        double ux = 0.0, uy = 0.0;
        for (int k = 1; k <= 2; ++k)
            for (int l = 1; l <= 2; ++l) {
                const double c = a[k - 1][l - 1];
                ux += c * std::sin(k * pi * x) * l * pi * std::cos(l * pi * y);
                uy -= c * k * pi * std::cos(k * pi * x) * std::sin(l * pi * y);
            }
        return std::array<double, 2>{ux, uy};
    });
}

/// Synthetic snapshot family with smooth time dependence (no solver involved).
inline SnapshotSet synthetic_snapshots(const TaylorHoodSpace& space, int n_states,
                                       double dt, std::mt19937_64& rng) {
    SnapshotSet set;
    set.n_per_side = space.mesh().n_per_side;
    set.dt = dt;
    set.nu = 0.01;
    const Vec base0 = random_solenoidal(space, rng);
    const Vec base1 = random_solenoidal(space, rng);
    const Vec base2 = random_solenoidal(space, rng);
    for (int n = 0; n < n_states; ++n) {
        const double t = n * dt;
        set.velocity.push_back(std::cos(t) * base0 + std::sin(2.0 * t) * base1 +
                               std::exp(-t) * base2);
    }
    return set;
}

}  // namespace testhelp
