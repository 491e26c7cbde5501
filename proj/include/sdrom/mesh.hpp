#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "core.hpp"

namespace sdrom {

/// Conforming triangulation of the unit square [0,1]^2.
/// Each grid square is split into two triangles along a diagonal; the
/// diagonal direction alternates per square so the pattern is symmetric.
struct TriMesh {
    int n_per_side = 0;                         // grid squares per side
    std::vector<std::array<double, 2>> vertices;
    std::vector<std::array<int, 3>> cells;      // CCW vertex indices
    std::vector<double> cell_area;
    std::vector<double> cell_h;                 // longest edge per cell
    double h = 0.0;                             // max over cells

    int n_vertices() const { return static_cast<int>(vertices.size()); }
    int n_cells() const { return static_cast<int>(cells.size()); }
};

inline TriMesh build_mesh(int n_per_side) {
    if (n_per_side < 1) throw std::invalid_argument("build_mesh: n_per_side must be >= 1");
    TriMesh mesh;
    mesh.n_per_side = n_per_side;
    const int n = n_per_side;
    const int nv = (n + 1) * (n + 1);
    mesh.vertices.resize(nv);
    for (int j = 0; j <= n; ++j)
        for (int i = 0; i <= n; ++i)
            mesh.vertices[j * (n + 1) + i] = {double(i) / n, double(j) / n};

    auto vid = [n](int i, int j) { return j * (n + 1) + i; };
    mesh.cells.reserve(2 * n * n);
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            const int v00 = vid(i, j), v10 = vid(i + 1, j);
            const int v01 = vid(i, j + 1), v11 = vid(i + 1, j + 1);
            if ((i + j) % 2 == 0) {
                // diagonal v00-v11
                mesh.cells.push_back({v00, v10, v11});
                mesh.cells.push_back({v00, v11, v01});
            } else {
                // diagonal v10-v01
                mesh.cells.push_back({v00, v10, v01});
                mesh.cells.push_back({v10, v11, v01});
            }
        }
    }

    mesh.cell_area.resize(mesh.cells.size());
    mesh.cell_h.resize(mesh.cells.size());
    for (std::size_t c = 0; c < mesh.cells.size(); ++c) {
        const auto& t = mesh.cells[c];
        const auto& a = mesh.vertices[t[0]];
        const auto& b = mesh.vertices[t[1]];
        const auto& d = mesh.vertices[t[2]];
        const double det = (b[0] - a[0]) * (d[1] - a[1]) - (b[1] - a[1]) * (d[0] - a[0]);
        if (det <= 0.0) throw NumericError("build_mesh: non-positive cell orientation");
        mesh.cell_area[c] = 0.5 * det;
        auto edge = [](const std::array<double, 2>& p, const std::array<double, 2>& q) {
            return std::sqrt((p[0] - q[0]) * (p[0] - q[0]) + (p[1] - q[1]) * (p[1] - q[1]));
        };
        mesh.cell_h[c] = std::max({edge(a, b), edge(b, d), edge(d, a)});
        mesh.h = std::max(mesh.h, mesh.cell_h[c]);
    }
    return mesh;
}

}  // namespace sdrom
