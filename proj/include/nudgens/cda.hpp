#pragma once

// Coarse-mesh interpolation operator I_H and the nudging term machinery.
//
// The coarse grid is a uniform N x N partition of the fine mesh's bounding
// box. Two operator modes:
//   PiecewiseConstantAverage - I_H u is the L2 average of u over each coarse
//     cell, evaluated through the fine quadrature points, so averaging is
//     exact for nested grids and a consistent quadrature approximation when
//     fine cells straddle coarse boundaries. Coarse cells holding no fine
//     quadrature point (outside the fluid) are dropped; partially covered
//     cells average over the covered part. L2-nonexpansive by construction.
//   CoarseNodalP1 - bilinear interpolation of nodal values at the coarse grid
//     vertices, prolonged to the fine space. Vertices outside the fluid are
//     inactive and their interpolation weight is redistributed.
//
// The nudging matrix J satisfies v^T J u = (I_H u_h, v_h) in the fine
// quadrature inner product.

#include "nudgens/fem.hpp"

#include <memory>
#include <unordered_map>

namespace nudgens {

class MeasurementSource;  // defined in truth.hpp

struct CoarseGrid {
  double xmin = 0.0, ymin = 0.0;
  double dx = 0.0, dy = 0.0;
  int nx = 0, ny = 0;

  // Max cell diameter; uniform cells make this the grid spacing H.
  double spacing() const { return std::hypot(dx, dy); }

  int cell_index(double x, double y) const {
    const double eps = 1e-12 * std::max(dx * nx, dy * ny);
    if (x < xmin - eps || y < ymin - eps || x > xmin + nx * dx + eps || y > ymin + ny * dy + eps)
      return -1;
    const int i = std::clamp(static_cast<int>((x - xmin) / dx), 0, nx - 1);
    const int j = std::clamp(static_cast<int>((y - ymin) / dy), 0, ny - 1);
    return j * nx + i;
  }
};

inline CoarseGrid coarse_grid_for(const Mesh& mesh, int n) {
  if (n < 1) throw std::invalid_argument("coarse_grid_for: N must be >= 1");
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& p : mesh.vertices) {
    xmin = std::min(xmin, p.x);
    xmax = std::max(xmax, p.x);
    ymin = std::min(ymin, p.y);
    ymax = std::max(ymax, p.y);
  }
  CoarseGrid g;
  g.xmin = xmin;
  g.ymin = ymin;
  g.nx = g.ny = n;
  g.dx = (xmax - xmin) / n;
  g.dy = (ymax - ymin) / n;
  return g;
}

enum class InterpolationMode { PiecewiseConstantAverage, CoarseNodalP1 };

class Interpolant {
 public:
  Interpolant(std::shared_ptr<const DofMap> fine, const CoarseGrid& grid, InterpolationMode mode)
      : dofs_(std::move(fine)), grid_(grid), mode_(mode) {
    const Mesh& m = dofs_->mesh();
    const auto& rule = triangle_rule(5);

    // Fine quadrature survey; every point must land in a coarse cell.
    struct QP {
      int coarse = -1;
      double w = 0.0;
      Point x;
      std::array<int, 6> nodes;
      std::array<double, 6> phi;
    };
    std::vector<QP> qps;
    qps.reserve(static_cast<std::size_t>(m.n_cells()) * rule.points.size());
    for (int c = 0; c < m.n_cells(); ++c) {
      const auto g = cell_geometry(m, c);
      for (const auto& q : rule.points) {
        QP qp;
        qp.x = g.at(q.l0, q.l1, q.l2);
        qp.coarse = grid_.cell_index(qp.x.x, qp.x.y);
        if (qp.coarse < 0)
          throw std::invalid_argument(
              "build_interpolant: fine quadrature point outside all coarse cells");
        qp.w = g.area * q.w;
        qp.nodes = dofs_->cell_nodes(c);
        qp.phi = p2_values(q.l0, q.l1, q.l2);
        qps.push_back(qp);
      }
    }

    const int nn = dofs_->n_velocity_nodes();
    if (mode_ == InterpolationMode::PiecewiseConstantAverage) {
      std::vector<double> mass(static_cast<std::size_t>(grid_.nx) * grid_.ny, 0.0);
      for (const auto& qp : qps) mass[qp.coarse] += qp.w;
      covered_of_cell_.assign(mass.size(), -1);
      for (std::size_t k = 0; k < mass.size(); ++k) {
        if (mass[k] > 0.0) {
          covered_of_cell_[k] = n_repr_;
          covered_mass_.push_back(mass[k]);
          ++n_repr_;
        }
      }
      std::vector<Triplet> rts;
      rts.reserve(qps.size() * 6);
      for (const auto& qp : qps) {
        const int k = covered_of_cell_[qp.coarse];
        const double s = qp.w / covered_mass_[k];
        for (int j = 0; j < 6; ++j) rts.emplace_back(k, qp.nodes[j], s * qp.phi[j]);
      }
      restrict_ = from_triplets(n_repr_, nn, rts);
      // J_scalar = R^T diag(mass) R, assembled row-by-row.
      std::vector<Triplet> jts;
      for (int k = 0; k < n_repr_; ++k) {
        std::vector<std::pair<int, double>> row;
        for (SparseMatrix::InnerIterator it(restrict_, k); it; ++it)
          row.emplace_back(static_cast<int>(it.col()), it.value());
        for (const auto& [i, vi] : row)
          for (const auto& [j, vj] : row) jts.emplace_back(i, j, covered_mass_[k] * vi * vj);
      }
      SparseMatrix js = from_triplets(nn, nn, jts);
      matrix_ = detail::expand_to_vector(js);
    } else {
      // Active coarse vertices and their fine-space evaluation rows.
      const int nvx = grid_.nx + 1, nvy = grid_.ny + 1;
      vertex_repr_.assign(static_cast<std::size_t>(nvx) * nvy, -1);
      std::vector<Triplet> rts;
      for (int j = 0; j < nvy; ++j) {
        for (int i = 0; i < nvx; ++i) {
          const Point p{grid_.xmin + i * grid_.dx, grid_.ymin + j * grid_.dy};
          std::array<double, 3> l;
          const int cell = dofs_->locator().locate(p, &l, 1e-9);
          if (cell < 0) continue;
          const int id = n_repr_++;
          vertex_repr_[static_cast<std::size_t>(j) * nvx + i] = id;
          const auto phi = p2_values(l[0], l[1], l[2]);
          const auto& nodes = dofs_->cell_nodes(cell);
          for (int k = 0; k < 6; ++k) rts.emplace_back(id, nodes[k], phi[k]);
        }
      }
      if (n_repr_ == 0)
        throw std::invalid_argument("build_interpolant: no coarse vertex lies in the domain");
      restrict_ = from_triplets(n_repr_, nn, rts);
      // J_scalar[i][j] = sum_q w_q phi_i(x_q) * (prolongation row at x_q)_j.
      std::unordered_map<int, double> comb;
      std::vector<Triplet> jts;
      for (const auto& qp : qps) {
        comb.clear();
        accumulate_prolongation_row(qp.x, 1.0, comb);
        for (int i = 0; i < 6; ++i) {
          const double wi = qp.w * qp.phi[i];
          if (wi == 0.0) continue;
          for (const auto& [node, val] : comb) jts.emplace_back(qp.nodes[i], node, wi * val);
        }
      }
      SparseMatrix js = from_triplets(nn, nn, jts);
      matrix_ = detail::expand_to_vector(js);
    }
  }

  const CoarseGrid& grid() const { return grid_; }
  InterpolationMode mode() const { return mode_; }
  double spacing() const { return grid_.spacing(); }
  int n_repr() const { return n_repr_; }
  const std::shared_ptr<const DofMap>& dofs() const { return dofs_; }

  // Matrix J of the implicit nudging term: v^T J u = (I_H u_h, v_h).
  const SparseMatrix& matrix() const { return matrix_; }

  // Load vector (I_H w, v) for a fine-space measurement field w. Identical to
  // J * w by construction, which is what makes nudging self-canceling when
  // the measurements coincide with the trajectory.
  Vector nudging_rhs(const Field& w) const {
    if (w.kind != FieldKind::Velocity || w.coeffs.size() != matrix_.cols())
      throw std::invalid_argument("nudging_rhs: incompatible measurement field");
    return matrix_ * w.coeffs;
  }

  // Coarse representation of u, interleaved (entry 2k+c is component c).
  Vector restrict(const Field& u) const {
    Vector out(2 * n_repr_);
    for (int c = 0; c < 2; ++c) {
      Vector comp(dofs_->n_velocity_nodes());
      for (int n = 0; n < dofs_->n_velocity_nodes(); ++n)
        comp[n] = u.coeffs[DofMap::velocity_dof(n, c)];
      Vector r = restrict_ * comp;
      for (int k = 0; k < n_repr_; ++k) out[2 * k + c] = r[k];
    }
    return out;
  }

  // Pointwise value of I_H u at x given the coarse representation.
  Vec2 value(const Vector& repr, Point x) const {
    if (mode_ == InterpolationMode::PiecewiseConstantAverage) {
      const int cell = grid_.cell_index(x.x, x.y);
      const int k = cell >= 0 ? covered_of_cell_[cell] : -1;
      if (k < 0) return Vec2::Zero();
      return {repr[2 * k], repr[2 * k + 1]};
    }
    std::unordered_map<int, double> dummy;
    Vec2 out = Vec2::Zero();
    for_each_corner(x, [&](int id, double w) {
      out.x() += w * repr[2 * id];
      out.y() += w * repr[2 * id + 1];
    });
    return out;
  }

  double stability_constant_estimate() const {
    return mode_ == InterpolationMode::PiecewiseConstantAverage ? 1.05 : 2.0;
  }

 private:
  template <typename F>
  void for_each_corner(Point x, F&& emit) const {
    const int cell = grid_.cell_index(x.x, x.y);
    if (cell < 0) return;
    const int ci = cell % grid_.nx, cj = cell / grid_.nx;
    const double xi = std::clamp((x.x - (grid_.xmin + ci * grid_.dx)) / grid_.dx, 0.0, 1.0);
    const double eta = std::clamp((x.y - (grid_.ymin + cj * grid_.dy)) / grid_.dy, 0.0, 1.0);
    const int nvx = grid_.nx + 1;
    const std::array<std::pair<int, double>, 4> corners = {
        std::make_pair(cj * nvx + ci, (1 - xi) * (1 - eta)),
        std::make_pair(cj * nvx + ci + 1, xi * (1 - eta)),
        std::make_pair((cj + 1) * nvx + ci, (1 - xi) * eta),
        std::make_pair((cj + 1) * nvx + ci + 1, xi * eta)};
    double active_w = 0.0;
    for (const auto& [v, w] : corners)
      if (vertex_repr_[v] >= 0) active_w += w;
    if (active_w <= 0.0) return;
    for (const auto& [v, w] : corners)
      if (vertex_repr_[v] >= 0 && w != 0.0) emit(vertex_repr_[v], w / active_w);
  }

  void accumulate_prolongation_row(Point x, double scale,
                                   std::unordered_map<int, double>& out) const {
    for_each_corner(x, [&](int id, double w) {
      for (SparseMatrix::InnerIterator it(restrict_, id); it; ++it)
        out[static_cast<int>(it.col())] += scale * w * it.value();
    });
  }

  std::shared_ptr<const DofMap> dofs_;
  CoarseGrid grid_;
  InterpolationMode mode_;
  int n_repr_ = 0;
  std::vector<int> covered_of_cell_;   // avg mode: grid cell -> covered index
  std::vector<double> covered_mass_;   // avg mode: quadrature measure per covered cell
  std::vector<int> vertex_repr_;       // nodal mode: grid vertex -> repr index
  SparseMatrix restrict_;              // scalar R over velocity nodes
  SparseMatrix matrix_;                // vector-expanded J
};

inline std::shared_ptr<const Interpolant> build_interpolant(std::shared_ptr<const DofMap> fine,
                                                            const CoarseGrid& grid,
                                                            InterpolationMode mode) {
  return std::make_shared<const Interpolant>(std::move(fine), grid, mode);
}

// || I_H u - u || and || I_H u || in the fine quadrature L2 norm.
inline double interp_error_l2(const Interpolant& itp, const Field& u) {
  const Mesh& m = u.dofs->mesh();
  const auto& rule = triangle_rule(5);
  const Vector repr = itp.restrict(u);
  double acc = 0.0;
  for (int c = 0; c < m.n_cells(); ++c) {
    const auto g = cell_geometry(m, c);
    for (const auto& q : rule.points) {
      const Point x = g.at(q.l0, q.l1, q.l2);
      const Vec2 diff = itp.value(repr, x) - velocity_value(u, c, q.l0, q.l1, q.l2);
      acc += g.area * q.w * diff.squaredNorm();
    }
  }
  return std::sqrt(std::max(0.0, acc));
}

inline double interp_image_l2(const Interpolant& itp, const Field& u) {
  const Mesh& m = u.dofs->mesh();
  const auto& rule = triangle_rule(5);
  const Vector repr = itp.restrict(u);
  double acc = 0.0;
  for (int c = 0; c < m.n_cells(); ++c) {
    const auto g = cell_geometry(m, c);
    for (const auto& q : rule.points) {
      const Point x = g.at(q.l0, q.l1, q.l2);
      acc += g.area * q.w * itp.value(repr, x).squaredNorm();
    }
  }
  return std::sqrt(std::max(0.0, acc));
}

// Nudging configuration; mu = 0 disables nudging entirely.
struct NudgeConfig {
  double mu = 0.0;
  std::shared_ptr<const Interpolant> interpolant;
  std::shared_ptr<const MeasurementSource> source;
};

}  // namespace nudgens
