#pragma once

// Error norms against analytic or discrete truth, accumulated norms, the
// drag/lift surface functionals of the channel benchmark, and CSV output.

#include "nudgens/fem.hpp"
#include "nudgens/truth.hpp"

#include <fstream>
#include <string>
#include <vector>

namespace nudgens {

struct TimeSeries {
  std::vector<std::string> names;  // column names, excluding the time axis
  std::vector<double> time;
  std::vector<std::vector<double>> rows;
  std::vector<std::pair<std::string, std::string>> metadata;

  void add_row(double t, std::vector<double> values) {
    if (values.size() != names.size())
      throw std::invalid_argument("TimeSeries: row width does not match declared columns");
    if (!time.empty() && t <= time.back())
      throw std::invalid_argument("TimeSeries: time must be strictly increasing");
    time.push_back(t);
    rows.push_back(std::move(values));
  }
  const std::vector<double>& column(const std::string& name, std::vector<double>& buf) const {
    for (std::size_t j = 0; j < names.size(); ++j) {
      if (names[j] == name) {
        buf.clear();
        for (const auto& r : rows) buf.push_back(r[j]);
        return buf;
      }
    }
    throw std::out_of_range("TimeSeries: no column '" + name + "'");
  }
};

// || u_h - w(t) || with analytic truth integrated by a degree >= 7 rule.
inline double l2_error_vs_truth(const Field& u, const std::function<Vec2(Point, double)>& w,
                                double t) {
  const Mesh& m = u.dofs->mesh();
  const auto& rule = triangle_rule(8);
  double acc = 0.0;
  for (int c = 0; c < m.n_cells(); ++c) {
    const auto g = cell_geometry(m, c);
    for (const auto& q : rule.points) {
      const Vec2 diff = velocity_value(u, c, q.l0, q.l1, q.l2) - w(g.at(q.l0, q.l1, q.l2), t);
      acc += g.area * q.w * diff.squaredNorm();
    }
  }
  return std::sqrt(std::max(0.0, acc));
}

// || grad(u_h) - grad(w)(t) || (H1 seminorm of the error).
inline double h1_error_vs_truth(const Field& u, const std::function<Mat2(Point, double)>& gw,
                                double t) {
  const Mesh& m = u.dofs->mesh();
  const auto& rule = triangle_rule(8);
  double acc = 0.0;
  for (int c = 0; c < m.n_cells(); ++c) {
    const auto g = cell_geometry(m, c);
    for (const auto& q : rule.points) {
      const Mat2 diff =
          velocity_gradient(u, c, g, q.l0, q.l1, q.l2) - gw(g.at(q.l0, q.l1, q.l2), t);
      acc += g.area * q.w * diff.squaredNorm();
    }
  }
  return std::sqrt(std::max(0.0, acc));
}

// || a - b || for two discrete fields on the same space.
inline double l2_error_between(const Field& a, const Field& b) {
  if (a.kind != b.kind || a.coeffs.size() != b.coeffs.size())
    throw std::invalid_argument("l2_error_between: incompatible fields");
  Field diff = a;
  diff.coeffs -= b.coeffs;
  return l2_norm(diff);
}

// sqrt(dt * sum of squares); the accumulated L2(0,T;H1) error quantity.
inline double accumulated_h1_error(const std::vector<double>& grad_error_series, double dt) {
  double acc = 0.0;
  for (double v : grad_error_series) acc += v * v;
  return std::sqrt(dt * acc);
}

// Drag and lift coefficients over the Block boundary:
//   c_d =  2/(rho L U^2) * integral of ( rho nu du_ts/dn n_y - p n_x )
//   c_l = -2/(rho L U^2) * integral of ( rho nu du_ts/dn n_x + p n_y )
// with rho = 1, L = 0.1 (block side), U = 1.5 (peak of the inflow parabola),
// n the block surface normal pointing into the fluid, tangent t = (n_y, -n_x),
// and the gradient taken as the one-sided trace from the adjacent cell.
inline std::pair<double, double> drag_lift(const Field& u, const Field& p, double nu) {
  const DofMap& dofs = *u.dofs;
  const Mesh& m = dofs.mesh();
  constexpr double rho = 1.0, block_side = 0.1, u_max = 1.5;
  const double coef = 2.0 / (rho * block_side * u_max * u_max);
  const auto gauss = gauss_legendre_01(4);

  bool saw_block = false;
  double cd = 0.0, cl = 0.0;
  for (const auto& be : m.boundary_edges) {
    if (be.tag != Tag::Block) continue;
    saw_block = true;
    const int edge = dofs.edge_id(be.a, be.b);
    const int cell = dofs.edge_cells(edge)[0];
    const auto g = cell_geometry(m, cell);
    const Point pa = m.vertices[be.a], pb = m.vertices[be.b];
    const double len = std::hypot(pb.x - pa.x, pb.y - pa.y);
    Vec2 n(pb.y - pa.y, -(pb.x - pa.x));
    n.normalize();
    // Orient the normal toward the adjacent (fluid) cell.
    const Point centroid{(g.p[0].x + g.p[1].x + g.p[2].x) / 3.0,
                         (g.p[0].y + g.p[1].y + g.p[2].y) / 3.0};
    const Point mid{0.5 * (pa.x + pb.x), 0.5 * (pa.y + pb.y)};
    if (n.dot(Vec2(centroid.x - mid.x, centroid.y - mid.y)) < 0.0) n = -n;
    const Vec2 tang(n.y(), -n.x());

    for (const auto& [s, w] : gauss) {
      const Point x{pa.x + s * (pb.x - pa.x), pa.y + s * (pb.y - pa.y)};
      const auto l = g.barycentric(x);
      const Mat2 grad = velocity_gradient(u, cell, g, l[0], l[1], l[2]);
      const double pv = pressure_value(p, cell, l[0], l[1], l[2]);
      const double duts_dn = tang.dot(grad * n);
      cd += len * w * (rho * nu * duts_dn * n.y() - pv * n.x());
      cl -= len * w * (rho * nu * duts_dn * n.x() + pv * n.y());
    }
  }
  if (!saw_block) throw std::invalid_argument("drag_lift: mesh has no Block-tagged boundary");
  return {coef * cd, coef * cl};
}

// CSV with a header row and one row per time; values at full round-trip
// precision. Column order follows declaration order.
inline void emit_csv(const TimeSeries& series, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("emit_csv: cannot open " + path);
  out.precision(17);
  out << "time";
  for (const auto& n : series.names) out << ',' << n;
  out << '\n';
  for (std::size_t i = 0; i < series.time.size(); ++i) {
    out << series.time[i];
    for (double v : series.rows[i]) out << ',' << v;
    out << '\n';
  }
  if (!out) throw std::runtime_error("emit_csv: write failed for " + path);
}

}  // namespace nudgens
