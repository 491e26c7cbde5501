#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include <sdrom/manufactured.hpp>

using namespace sdrom;

namespace {

ManufacturedCase make_case(const std::string& profile) {
    ManufacturedCase c;
    c.nu = 0.01;
    c.amplitude = 1.0;
    c.profile = parse_time_profile(profile);
    return c;
}

}  // namespace

TEST_CASE("velocity is divergence free and vanishes on the boundary", "[manufactured]") {
    const ManufacturedCase c = make_case("exp_decay:1.0");
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    for (int k = 0; k < 50; ++k) {
        const double x = dist(rng), y = dist(rng), t = dist(rng);
        const auto g = c.velocity_gradient(x, y, t);
        REQUIRE(std::abs(g[0] + g[3]) < 1e-12);  // du/dx + dv/dy
    }
    for (double s : {0.0, 0.3, 0.71, 1.0}) {
        for (const auto& p : {std::array<double, 2>{s, 0.0}, std::array<double, 2>{s, 1.0},
                              std::array<double, 2>{0.0, s}, std::array<double, 2>{1.0, s}}) {
            const auto u = c.velocity(p[0], p[1], 0.4);
            REQUIRE(std::abs(u[0]) < 1e-13);
            REQUIRE(std::abs(u[1]) < 1e-13);
        }
    }
}

TEST_CASE("velocity gradient matches finite differences", "[manufactured]") {
    const ManufacturedCase c = make_case("cosine:2.0");
    const double eps = 1e-6;
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> dist(0.1, 0.9);
    for (int k = 0; k < 20; ++k) {
        const double x = dist(rng), y = dist(rng), t = dist(rng);
        const auto g = c.velocity_gradient(x, y, t);
        const auto uxp = c.velocity(x + eps, y, t), uxm = c.velocity(x - eps, y, t);
        const auto uyp = c.velocity(x, y + eps, t), uym = c.velocity(x, y - eps, t);
        REQUIRE(std::abs(g[0] - (uxp[0] - uxm[0]) / (2 * eps)) < 1e-8);
        REQUIRE(std::abs(g[1] - (uyp[0] - uym[0]) / (2 * eps)) < 1e-8);
        REQUIRE(std::abs(g[2] - (uxp[1] - uxm[1]) / (2 * eps)) < 1e-8);
        REQUIRE(std::abs(g[3] - (uyp[1] - uym[1]) / (2 * eps)) < 1e-8);
    }
}

TEST_CASE("forcing closes the momentum equation", "[manufactured]") {
    // residual check by finite differences: f = u_t + (u.grad)u - nu lap u + grad p
    for (const std::string& profile : {std::string("exp_decay:1.5"), std::string("cosine:2.0")}) {
        ManufacturedCase c = make_case(profile);
        c.amplitude = 0.7;
        std::mt19937_64 rng(11);
        std::uniform_real_distribution<double> dist(0.15, 0.85);
        const double ht = 1e-6, hx = 1e-5;
        for (int k = 0; k < 15; ++k) {
            const double x = dist(rng), y = dist(rng), t = dist(rng);
            const auto f = c.forcing(x, y, t);
            const auto u = c.velocity(x, y, t);
            const auto g = c.velocity_gradient(x, y, t);
            for (int comp = 0; comp < 2; ++comp) {
                const double ut = (c.velocity(x, y, t + ht)[comp] -
                                   c.velocity(x, y, t - ht)[comp]) /
                                  (2 * ht);
                const double lap =
                    (c.velocity(x + hx, y, t)[comp] + c.velocity(x - hx, y, t)[comp] -
                     2 * u[comp]) /
                        (hx * hx) +
                    (c.velocity(x, y + hx, t)[comp] + c.velocity(x, y - hx, t)[comp] -
                     2 * u[comp]) /
                        (hx * hx);
                const double conv = u[0] * g[comp == 0 ? 0 : 2] + u[1] * g[comp == 0 ? 1 : 3];
                const double dp = comp == 0 ? (c.pressure(x + hx, y, t) -
                                               c.pressure(x - hx, y, t)) /
                                                  (2 * hx)
                                            : (c.pressure(x, y + hx, t) -
                                               c.pressure(x, y - hx, t)) /
                                                  (2 * hx);
                const double residual = ut + conv - c.nu * lap + dp - f[comp];
                REQUIRE(std::abs(residual) < 5e-6);
            }
        }
    }
}

TEST_CASE("pressure has zero mean", "[manufactured]") {
    const ManufacturedCase c = make_case("exp_decay:1.0");
    // midpoint rule on a fine grid; sin(2 pi x) cos(2 pi y) integrates to zero
    const int m = 64;
    double s = 0.0;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
            s += c.pressure((i + 0.5) / m, (j + 0.5) / m, 0.3) / (m * m);
    REQUIRE(std::abs(s) < 1e-12);
}

TEST_CASE("time profiles and their derivatives", "[manufactured]") {
    const TimeProfile decay = parse_time_profile("exp_decay:1.5");
    const TimeProfile wave = parse_time_profile("cosine:2.0");
    REQUIRE(decay.g(0.0) == Catch::Approx(1.0));
    REQUIRE(wave.g(0.0) == Catch::Approx(1.0));
    const double ht = 1e-6;
    for (double t : {0.0, 0.2, 0.9}) {
        REQUIRE(std::abs(decay.dg(t) - (decay.g(t + ht) - decay.g(t - ht)) / (2 * ht)) <
                1e-8);
        REQUIRE(std::abs(wave.dg(t) - (wave.g(t + ht) - wave.g(t - ht)) / (2 * ht)) < 1e-8);
    }
    REQUIRE(decay.g(1.0) == Catch::Approx(std::exp(-1.5)).epsilon(1e-14));
    REQUIRE(wave.g(0.5) == Catch::Approx(std::cos(1.0)).epsilon(1e-14));
}

TEST_CASE("profile parsing rejects malformed input", "[manufactured]") {
    REQUIRE_THROWS_AS(parse_time_profile("linear:1.0"), std::invalid_argument);
    REQUIRE_THROWS_AS(parse_time_profile("exp_decay"), std::invalid_argument);
    REQUIRE_THROWS_AS(parse_time_profile("cosine:abc"), std::invalid_argument);
}
