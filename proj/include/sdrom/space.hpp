#pragma once

#include <array>
#include <functional>
#include <map>
#include <utility>
#include <vector>

#include "core.hpp"
#include "mesh.hpp"
#include "quadrature.hpp"

namespace sdrom {

/// Vector field sampled at all quadrature points (component-wise).
struct QuadField {
    Vec x, y;

    QuadField() = default;
    explicit QuadField(Eigen::Index n) : x(Vec::Zero(n)), y(Vec::Zero(n)) {}
    Eigen::Index size() const { return x.size(); }
};

/// Velocity Jacobian sampled at quadrature points; `xy` is d(u_x)/dy.
struct QuadGradients {
    Vec xx, xy, yx, yy;

    explicit QuadGradients(Eigen::Index n)
        : xx(Vec::Zero(n)), xy(Vec::Zero(n)), yx(Vec::Zero(n)), yy(Vec::Zero(n)) {}
};

/// Taylor-Hood pair on a TriMesh: continuous P2 velocity, continuous P1
/// pressure. Velocity dof = 2*node + component with nodes ordered as all
/// vertices followed by all edge midpoints; pressure dof = vertex index.
class TaylorHoodSpace {
  public:
    explicit TaylorHoodSpace(TriMesh mesh) : mesh_(std::move(mesh)) {
        build_edges();
        build_geometry();
        build_masks();
    }

    const TriMesh& mesh() const { return mesh_; }
    int n_nodes() const { return n_nodes_; }
    int n_velocity_dofs() const { return 2 * n_nodes_; }
    int n_pressure_dofs() const { return mesh_.n_vertices(); }
    int n_quad_points() const { return static_cast<int>(qp_w_.size()); }
    int n_cells() const { return mesh_.n_cells(); }

    const std::array<double, 2>& node_coord(int node) const { return node_coords_[node]; }
    const std::array<int, 6>& cell_nodes(int cell) const { return cell_nodes_[cell]; }
    double cell_area(int cell) const { return mesh_.cell_area[cell]; }
    double cell_h(int cell) const { return mesh_.cell_h[cell]; }

    const Vec& qp_weights() const { return qp_w_; }
    const Vec& qp_x() const { return qp_x_; }
    const Vec& qp_y() const { return qp_y_; }
    int qp_cell(int q) const { return q / TriQuadRule::n_points; }

    /// P2 shape value of local node k at reference quad point q.
    double shape_value(int q, int k) const { return shape_val_[q * 6 + k]; }
    /// Physical P2 shape gradient of local node k at quad point (cell, q).
    double shape_grad_x(int cell, int q, int k) const {
        return shape_gx_[(cell * TriQuadRule::n_points + q) * 6 + k];
    }
    double shape_grad_y(int cell, int q, int k) const {
        return shape_gy_[(cell * TriQuadRule::n_points + q) * 6 + k];
    }
    /// P1 shape value of local vertex k at reference quad point q.
    double pshape_value(int q, int k) const { return pshape_val_[q * 3 + k]; }
    /// Physical P1 shape gradient (constant within a cell).
    double pshape_grad_x(int cell, int k) const { return pshape_gx_[cell * 3 + k]; }
    double pshape_grad_y(int cell, int k) const { return pshape_gy_[cell * 3 + k]; }

    bool node_on_boundary(int node) const { return node_boundary_[node]; }
    bool velocity_dof_interior(int dof) const { return !node_boundary_[dof / 2]; }
    const std::vector<int>& interior_velocity_dofs() const { return interior_vel_; }
    /// Full velocity dof -> interior index, or -1 on the boundary.
    int interior_index(int dof) const { return interior_map_[dof]; }

    QuadField velocity_values(const Vec& u) const {
        check_velocity_size(u);
        QuadField f(n_quad_points());
        const int nq = TriQuadRule::n_points;
        for (int c = 0; c < n_cells(); ++c) {
            const auto& nodes = cell_nodes_[c];
            for (int q = 0; q < nq; ++q) {
                double vx = 0.0, vy = 0.0;
                for (int k = 0; k < 6; ++k) {
                    const double s = shape_val_[q * 6 + k];
                    vx += s * u[2 * nodes[k]];
                    vy += s * u[2 * nodes[k] + 1];
                }
                f.x[c * nq + q] = vx;
                f.y[c * nq + q] = vy;
            }
        }
        return f;
    }

    QuadGradients velocity_gradients(const Vec& u) const {
        check_velocity_size(u);
        QuadGradients g(n_quad_points());
        const int nq = TriQuadRule::n_points;
        for (int c = 0; c < n_cells(); ++c) {
            const auto& nodes = cell_nodes_[c];
            for (int q = 0; q < nq; ++q) {
                const int base = (c * nq + q) * 6;
                double gxx = 0, gxy = 0, gyx = 0, gyy = 0;
                for (int k = 0; k < 6; ++k) {
                    const double dx = shape_gx_[base + k], dy = shape_gy_[base + k];
                    const double ux = u[2 * nodes[k]], uy = u[2 * nodes[k] + 1];
                    gxx += dx * ux;
                    gxy += dy * ux;
                    gyx += dx * uy;
                    gyy += dy * uy;
                }
                const int i = c * nq + q;
                g.xx[i] = gxx;
                g.xy[i] = gxy;
                g.yx[i] = gyx;
                g.yy[i] = gyy;
            }
        }
        return g;
    }

    /// Nodal interpolation of an analytic velocity field.
    Vec interpolate_velocity(const std::function<std::array<double, 2>(double, double)>& fn) const {
        Vec u(n_velocity_dofs());
        for (int node = 0; node < n_nodes_; ++node) {
            const auto v = fn(node_coords_[node][0], node_coords_[node][1]);
            u[2 * node] = v[0];
            u[2 * node + 1] = v[1];
        }
        return u;
    }

    /// Integral of each P1 basis function (used for the zero-mean constraint).
    Vec pressure_integral_row() const {
        Vec m = Vec::Zero(n_pressure_dofs());
        for (int c = 0; c < n_cells(); ++c)
            for (int k = 0; k < 3; ++k) m[mesh_.cells[c][k]] += mesh_.cell_area[c] / 3.0;
        return m;
    }

  private:
    void check_velocity_size(const Vec& u) const {
        if (u.size() != n_velocity_dofs())
            throw std::invalid_argument("velocity dof vector has wrong length");
    }

    void build_edges() {
        const int nv = mesh_.n_vertices();
        std::map<std::pair<int, int>, int> edge_id;
        cell_nodes_.resize(mesh_.n_cells());
        node_coords_.assign(mesh_.vertices.begin(), mesh_.vertices.end());
        for (int c = 0; c < mesh_.n_cells(); ++c) {
            const auto& t = mesh_.cells[c];
            const std::array<std::pair<int, int>, 3> loc = {
                std::pair{t[0], t[1]}, std::pair{t[1], t[2]}, std::pair{t[2], t[0]}};
            for (int k = 0; k < 3; ++k) cell_nodes_[c][k] = t[k];
            for (int e = 0; e < 3; ++e) {
                auto key = std::minmax(loc[e].first, loc[e].second);
                auto [it, inserted] = edge_id.try_emplace(key, static_cast<int>(edge_id.size()));
                if (inserted) {
                    const auto& a = mesh_.vertices[key.first];
                    const auto& b = mesh_.vertices[key.second];
                    node_coords_.push_back({0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])});
                }
                cell_nodes_[c][3 + e] = nv + it->second;
            }
        }
        n_nodes_ = static_cast<int>(node_coords_.size());
    }

    void build_geometry() {
        const auto& rule = tri_quad_degree5();
        const int nq = TriQuadRule::n_points;
        const int nc = mesh_.n_cells();
        qp_x_.resize(nc * nq);
        qp_y_.resize(nc * nq);
        qp_w_.resize(nc * nq);
        shape_val_.resize(nq * 6);
        pshape_val_.resize(nq * 3);
        shape_gx_.assign(static_cast<std::size_t>(nc) * nq * 6, 0.0);
        shape_gy_.assign(static_cast<std::size_t>(nc) * nq * 6, 0.0);
        pshape_gx_.assign(static_cast<std::size_t>(nc) * 3, 0.0);
        pshape_gy_.assign(static_cast<std::size_t>(nc) * 3, 0.0);

        // Reference values and gradients; local node order v0,v1,v2,m01,m12,m20.
        std::array<std::array<double, 6>, TriQuadRule::n_points> ref_gx, ref_gy;
        for (int q = 0; q < nq; ++q) {
            const double l0 = rule.bary[q][0], l1 = rule.bary[q][1], l2 = rule.bary[q][2];
            const std::array<double, 6> vals = {l0 * (2 * l0 - 1), l1 * (2 * l1 - 1),
                                                l2 * (2 * l2 - 1), 4 * l0 * l1,
                                                4 * l1 * l2,       4 * l2 * l0};
            for (int k = 0; k < 6; ++k) shape_val_[q * 6 + k] = vals[k];
            pshape_val_[q * 3 + 0] = l0;
            pshape_val_[q * 3 + 1] = l1;
            pshape_val_[q * 3 + 2] = l2;
            // d(lambda)/d(xi,eta): l0 -> (-1,-1), l1 -> (1,0), l2 -> (0,1)
            const std::array<std::array<double, 2>, 3> dl = {{{-1, -1}, {1, 0}, {0, 1}}};
            for (int i = 0; i < 3; ++i) {
                ref_gx[q][i] = (4 * rule.bary[q][i] - 1) * dl[i][0];
                ref_gy[q][i] = (4 * rule.bary[q][i] - 1) * dl[i][1];
            }
            auto edge_grad = [&](int i, int j, double& gx, double& gy) {
                gx = 4 * (rule.bary[q][i] * dl[j][0] + rule.bary[q][j] * dl[i][0]);
                gy = 4 * (rule.bary[q][i] * dl[j][1] + rule.bary[q][j] * dl[i][1]);
            };
            edge_grad(0, 1, ref_gx[q][3], ref_gy[q][3]);
            edge_grad(1, 2, ref_gx[q][4], ref_gy[q][4]);
            edge_grad(2, 0, ref_gx[q][5], ref_gy[q][5]);
        }

        const std::array<std::array<double, 2>, 3> dl = {{{-1, -1}, {1, 0}, {0, 1}}};
        for (int c = 0; c < nc; ++c) {
            const auto& t = mesh_.cells[c];
            const auto& p0 = mesh_.vertices[t[0]];
            const auto& p1 = mesh_.vertices[t[1]];
            const auto& p2 = mesh_.vertices[t[2]];
            const double j00 = p1[0] - p0[0], j01 = p2[0] - p0[0];
            const double j10 = p1[1] - p0[1], j11 = p2[1] - p0[1];
            const double det = j00 * j11 - j01 * j10;
            // J^{-T} entries
            const double it00 = j11 / det, it01 = -j10 / det;
            const double it10 = -j01 / det, it11 = j00 / det;
            for (int q = 0; q < nq; ++q) {
                const int i = c * nq + q;
                qp_x_[i] = p0[0] + j00 * rule.bary[q][1] + j01 * rule.bary[q][2];
                qp_y_[i] = p0[1] + j10 * rule.bary[q][1] + j11 * rule.bary[q][2];
                qp_w_[i] = rule.weights[q] * mesh_.cell_area[c];
                for (int k = 0; k < 6; ++k) {
                    shape_gx_[i * 6 + k] = it00 * ref_gx[q][k] + it01 * ref_gy[q][k];
                    shape_gy_[i * 6 + k] = it10 * ref_gx[q][k] + it11 * ref_gy[q][k];
                }
            }
            for (int k = 0; k < 3; ++k) {
                pshape_gx_[c * 3 + k] = it00 * dl[k][0] + it01 * dl[k][1];
                pshape_gy_[c * 3 + k] = it10 * dl[k][0] + it11 * dl[k][1];
            }
        }
    }

    void build_masks() {
        node_boundary_.resize(n_nodes_);
        const double tol = 1e-12;
        for (int i = 0; i < n_nodes_; ++i) {
            const double x = node_coords_[i][0], y = node_coords_[i][1];
            node_boundary_[i] =
                x < tol || x > 1.0 - tol || y < tol || y > 1.0 - tol;
        }
        interior_map_.assign(n_velocity_dofs(), -1);
        for (int d = 0; d < n_velocity_dofs(); ++d) {
            if (!node_boundary_[d / 2]) {
                interior_map_[d] = static_cast<int>(interior_vel_.size());
                interior_vel_.push_back(d);
            }
        }
    }

    TriMesh mesh_;
    int n_nodes_ = 0;
    std::vector<std::array<double, 2>> node_coords_;
    std::vector<std::array<int, 6>> cell_nodes_;
    Vec qp_x_, qp_y_, qp_w_;
    std::vector<double> shape_val_, shape_gx_, shape_gy_;
    std::vector<double> pshape_val_, pshape_gx_, pshape_gy_;
    std::vector<bool> node_boundary_;
    std::vector<int> interior_vel_;
    std::vector<int> interior_map_;
};

/// L2 inner product of two quadrature-sampled vector fields.
inline double l2_inner(const TaylorHoodSpace& space, const QuadField& f, const QuadField& g) {
    if (f.size() != space.n_quad_points() || g.size() != space.n_quad_points())
        throw std::invalid_argument("quadrature field has wrong length");
    const Vec& w = space.qp_weights();
    return (w.array() * (f.x.array() * g.x.array() + f.y.array() * g.y.array())).sum();
}

inline double l2_norm(const TaylorHoodSpace& space, const QuadField& f) {
    return std::sqrt(std::max(0.0, l2_inner(space, f, f)));
}

}  // namespace sdrom
