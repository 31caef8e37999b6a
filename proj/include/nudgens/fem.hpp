#pragma once

// Taylor-Hood (P2 velocity / P1 pressure) spaces on triangle meshes and the
// assembly of every bilinear form the time-stepping schemes need. Velocity
// dofs are interleaved per node: dof(node, comp) = 2*node + comp, with nodes
// ordered vertices first, then edge midpoints. Pressure dofs are vertices.
//
// All forms are integrated with a rule exact to degree 5, which is exact for
// the P2 x grad(P2) x P2 convection integrand; there is no variational crime
// in any assembled operator.

#include "nudgens/mesh.hpp"
#include "nudgens/quadrature.hpp"
#include "nudgens/sparse.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <functional>
#include <map>
#include <memory>
#include <set>

namespace nudgens {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;  // (i,j) = d u_i / d x_j

enum class FieldKind { Velocity, Pressure };

struct CellGeometry {
  std::array<Point, 3> p;
  std::array<Vec2, 3> grad_lambda;
  double area = 0.0;

  Point at(double l0, double l1, double l2) const {
    return {l0 * p[0].x + l1 * p[1].x + l2 * p[2].x, l0 * p[0].y + l1 * p[1].y + l2 * p[2].y};
  }
  std::array<double, 3> barycentric(Point q) const {
    std::array<double, 3> l;
    // lambda_i is affine with gradient grad_lambda[i], equal to 1 at p[i].
    for (int i = 0; i < 3; ++i)
      l[i] = 1.0 + grad_lambda[i].dot(Vec2(q.x - p[i].x, q.y - p[i].y));
    return l;
  }
};

inline CellGeometry cell_geometry(const Mesh& m, int c) {
  CellGeometry g;
  for (int i = 0; i < 3; ++i) g.p[i] = m.vertices[m.cells[c][i]];
  const double twice_area = (g.p[1].x - g.p[0].x) * (g.p[2].y - g.p[0].y) -
                            (g.p[2].x - g.p[0].x) * (g.p[1].y - g.p[0].y);
  g.area = 0.5 * twice_area;
  auto perp = [twice_area](const Point& a, const Point& b) {
    return Vec2(-(b.y - a.y), b.x - a.x) / twice_area;
  };
  g.grad_lambda[0] = perp(g.p[1], g.p[2]);
  g.grad_lambda[1] = perp(g.p[2], g.p[0]);
  g.grad_lambda[2] = perp(g.p[0], g.p[1]);
  return g;
}

// Quadratic Lagrange basis; local nodes 0..2 are vertices, 3..5 the edge
// midpoints opposite each vertex (3 = mid(v1,v2), 4 = mid(v2,v0), 5 = mid(v0,v1)).
inline std::array<double, 6> p2_values(double l0, double l1, double l2) {
  return {l0 * (2.0 * l0 - 1.0), l1 * (2.0 * l1 - 1.0), l2 * (2.0 * l2 - 1.0),
          4.0 * l1 * l2,         4.0 * l2 * l0,         4.0 * l0 * l1};
}

inline std::array<Vec2, 6> p2_gradients(double l0, double l1, double l2,
                                        const std::array<Vec2, 3>& gl) {
  return {(4.0 * l0 - 1.0) * gl[0],
          (4.0 * l1 - 1.0) * gl[1],
          (4.0 * l2 - 1.0) * gl[2],
          4.0 * (l2 * gl[1] + l1 * gl[2]),
          4.0 * (l0 * gl[2] + l2 * gl[0]),
          4.0 * (l1 * gl[0] + l0 * gl[1])};
}

// Uniform-bin point locator over the mesh cells.
class CellLocator {
 public:
  explicit CellLocator(const Mesh& mesh) : mesh_(&mesh) {
    xmin_ = ymin_ = 1e300;
    xmax_ = ymax_ = -1e300;
    for (const auto& p : mesh.vertices) {
      xmin_ = std::min(xmin_, p.x);
      xmax_ = std::max(xmax_, p.x);
      ymin_ = std::min(ymin_, p.y);
      ymax_ = std::max(ymax_, p.y);
    }
    nb_ = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(mesh.n_cells()) / 2.0)));
    bins_.resize(static_cast<std::size_t>(nb_) * nb_);
    for (int c = 0; c < mesh.n_cells(); ++c) {
      double cxmin = 1e300, cxmax = -1e300, cymin = 1e300, cymax = -1e300;
      for (int v : mesh.cells[c]) {
        cxmin = std::min(cxmin, mesh.vertices[v].x);
        cxmax = std::max(cxmax, mesh.vertices[v].x);
        cymin = std::min(cymin, mesh.vertices[v].y);
        cymax = std::max(cymax, mesh.vertices[v].y);
      }
      for (int bj = bin_of(cymin, ymin_, ymax_); bj <= bin_of(cymax, ymin_, ymax_); ++bj)
        for (int bi = bin_of(cxmin, xmin_, xmax_); bi <= bin_of(cxmax, xmin_, xmax_); ++bi)
          bins_[static_cast<std::size_t>(bj) * nb_ + bi].push_back(c);
    }
  }

  // Returns the containing cell (barycentric coordinates clamped >= -tol) or -1.
  int locate(Point q, std::array<double, 3>* bary = nullptr, double tol = 1e-10) const {
    const int bi = bin_of(q.x, xmin_, xmax_), bj = bin_of(q.y, ymin_, ymax_);
    if (bi < 0 || bj < 0) return -1;
    int best = -1;
    double best_min = -1e300;
    std::array<double, 3> best_l{};
    for (int c : bins_[static_cast<std::size_t>(bj) * nb_ + bi]) {
      const auto g = cell_geometry(*mesh_, c);
      const auto l = g.barycentric(q);
      const double lmin = std::min({l[0], l[1], l[2]});
      if (lmin > best_min) {
        best_min = lmin;
        best = c;
        best_l = l;
      }
      if (lmin >= 0.0) break;
    }
    if (best < 0 || best_min < -tol) return -1;
    if (bary) *bary = best_l;
    return best;
  }

 private:
  int bin_of(double v, double lo, double hi) const {
    if (v < lo - 1e-12 || v > hi + 1e-12) return -1;
    const int b = static_cast<int>((v - lo) / std::max(hi - lo, 1e-300) * nb_);
    return std::clamp(b, 0, nb_ - 1);
  }
  const Mesh* mesh_;
  double xmin_, xmax_, ymin_, ymax_;
  int nb_ = 1;
  std::vector<std::vector<int>> bins_;
};

class DofMap {
 public:
  explicit DofMap(std::shared_ptr<const Mesh> mesh) : mesh_(std::move(mesh)) {
    const Mesh& m = *mesh_;
    m.validate();
    // Canonical edge enumeration: lexicographic over (min,max) vertex pairs,
    // independent of cell ordering.
    std::map<std::pair<int, int>, int> edge_ids;
    for (const auto& cell : m.cells)
      for (int e = 0; e < 3; ++e)
        edge_ids.emplace(detail::edge_key(cell[e], cell[(e + 1) % 3]), 0);
    edges_.reserve(edge_ids.size());
    for (auto& [key, id] : edge_ids) {
      id = static_cast<int>(edges_.size());
      edges_.push_back(key);
    }
    edge_cells_.assign(edges_.size(), {-1, -1});
    cell_nodes_.resize(m.cells.size());
    for (std::size_t c = 0; c < m.cells.size(); ++c) {
      const auto& cell = m.cells[c];
      for (int e = 0; e < 3; ++e) {
        // Local edge e is opposite vertex e.
        const int a = cell[(e + 1) % 3], b = cell[(e + 2) % 3];
        const int id = edge_ids.at(detail::edge_key(a, b));
        cell_nodes_[c][e] = cell[e];
        cell_nodes_[c][3 + e] = m.n_vertices() + id;
        auto& adj = edge_cells_[id];
        (adj[0] < 0 ? adj[0] : adj[1]) = static_cast<int>(c);
      }
    }
    for (const auto& be : m.boundary_edges) {
      const int id = edge_ids.at(detail::edge_key(be.a, be.b));
      std::set<int>& nodes = tag_nodes_[be.tag];
      nodes.insert(be.a);
      nodes.insert(be.b);
      nodes.insert(m.n_vertices() + id);
      boundary_edge_ids_.push_back(id);
    }
    for (const auto& [tag, nodes] : tag_nodes_) {
      boundary_nodes_[tag].assign(nodes.begin(), nodes.end());
      for (int n : nodes) node_tag_set_[n].push_back(tag);
      all_boundary_.insert(all_boundary_.end(), nodes.begin(), nodes.end());
    }
    std::sort(all_boundary_.begin(), all_boundary_.end());
    all_boundary_.erase(std::unique(all_boundary_.begin(), all_boundary_.end()),
                        all_boundary_.end());
    locator_ = std::make_unique<CellLocator>(m);
  }

  const Mesh& mesh() const { return *mesh_; }
  std::shared_ptr<const Mesh> mesh_ptr() const { return mesh_; }
  const CellLocator& locator() const { return *locator_; }

  int n_vertices() const { return mesh_->n_vertices(); }
  int n_edges() const { return static_cast<int>(edges_.size()); }
  int n_velocity_nodes() const { return n_vertices() + n_edges(); }
  int n_velocity_dofs() const { return 2 * n_velocity_nodes(); }
  int n_pressure_dofs() const { return n_vertices(); }
  int n_dofs(FieldKind k) const {
    return k == FieldKind::Velocity ? n_velocity_dofs() : n_pressure_dofs();
  }
  static int velocity_dof(int node, int comp) { return 2 * node + comp; }

  Point node_position(int node) const {
    if (node < n_vertices()) return mesh_->vertices[node];
    const auto& [a, b] = edges_[node - n_vertices()];
    return {0.5 * (mesh_->vertices[a].x + mesh_->vertices[b].x),
            0.5 * (mesh_->vertices[a].y + mesh_->vertices[b].y)};
  }

  const std::array<int, 6>& cell_nodes(int c) const { return cell_nodes_[c]; }

  int edge_id(int a, int b) const {
    const auto key = detail::edge_key(a, b);
    const auto it = std::lower_bound(edges_.begin(), edges_.end(), key);
    return (it != edges_.end() && *it == key) ? static_cast<int>(it - edges_.begin()) : -1;
  }
  // Adjacent cells of an edge; second entry is -1 for boundary edges.
  const std::array<int, 2>& edge_cells(int edge) const { return edge_cells_[edge]; }

  const std::vector<int>& boundary_nodes(Tag t) const {
    static const std::vector<int> empty;
    const auto it = boundary_nodes_.find(t);
    return it == boundary_nodes_.end() ? empty : it->second;
  }
  const std::vector<int>& all_boundary_nodes() const { return all_boundary_; }
  const std::map<int, std::vector<Tag>>& boundary_node_tags() const { return node_tag_set_; }

 private:
  std::shared_ptr<const Mesh> mesh_;
  std::vector<std::pair<int, int>> edges_;
  std::vector<std::array<int, 2>> edge_cells_;
  std::vector<std::array<int, 6>> cell_nodes_;
  std::map<Tag, std::set<int>> tag_nodes_;
  std::map<Tag, std::vector<int>> boundary_nodes_;
  std::map<int, std::vector<Tag>> node_tag_set_;
  std::vector<int> all_boundary_;
  std::vector<int> boundary_edge_ids_;
  std::unique_ptr<CellLocator> locator_;
};

struct Field {
  std::shared_ptr<const DofMap> dofs;
  FieldKind kind = FieldKind::Velocity;
  Vector coeffs;
};

inline Field zero_field(std::shared_ptr<const DofMap> dofs, FieldKind kind) {
  Field f;
  f.kind = kind;
  f.coeffs = Vector::Zero(dofs->n_dofs(kind));
  f.dofs = std::move(dofs);
  return f;
}

inline Field interpolate_velocity(std::shared_ptr<const DofMap> dofs,
                                  const std::function<Vec2(Point)>& fn) {
  Field f = zero_field(dofs, FieldKind::Velocity);
  for (int n = 0; n < f.dofs->n_velocity_nodes(); ++n) {
    const Vec2 v = fn(f.dofs->node_position(n));
    f.coeffs[DofMap::velocity_dof(n, 0)] = v.x();
    f.coeffs[DofMap::velocity_dof(n, 1)] = v.y();
  }
  return f;
}

inline Field interpolate_pressure(std::shared_ptr<const DofMap> dofs,
                                  const std::function<double(Point)>& fn) {
  Field f = zero_field(dofs, FieldKind::Pressure);
  for (int v = 0; v < f.dofs->n_pressure_dofs(); ++v)
    f.coeffs[v] = fn(f.dofs->mesh().vertices[v]);
  return f;
}

// Cell-local evaluation.
inline Vec2 velocity_value(const Field& f, int cell, double l0, double l1, double l2) {
  const auto& nodes = f.dofs->cell_nodes(cell);
  const auto phi = p2_values(l0, l1, l2);
  Vec2 u = Vec2::Zero();
  for (int k = 0; k < 6; ++k) {
    u.x() += phi[k] * f.coeffs[DofMap::velocity_dof(nodes[k], 0)];
    u.y() += phi[k] * f.coeffs[DofMap::velocity_dof(nodes[k], 1)];
  }
  return u;
}

inline Mat2 velocity_gradient(const Field& f, int cell, const CellGeometry& g, double l0,
                              double l1, double l2) {
  const auto& nodes = f.dofs->cell_nodes(cell);
  const auto dphi = p2_gradients(l0, l1, l2, g.grad_lambda);
  Mat2 grad = Mat2::Zero();
  for (int k = 0; k < 6; ++k)
    for (int c = 0; c < 2; ++c) grad.row(c) += f.coeffs[DofMap::velocity_dof(nodes[k], c)] * dphi[k].transpose();
  return grad;
}

inline double pressure_value(const Field& f, int cell, double l0, double l1, double l2) {
  const auto& cellv = f.dofs->mesh().cells[cell];
  return l0 * f.coeffs[cellv[0]] + l1 * f.coeffs[cellv[1]] + l2 * f.coeffs[cellv[2]];
}

inline Vec2 evaluate_velocity(const Field& f, Point q) {
  std::array<double, 3> l;
  const int c = f.dofs->locator().locate(q, &l);
  if (c < 0) throw std::domain_error("evaluate: point outside domain");
  return velocity_value(f, c, l[0], l[1], l[2]);
}

inline double evaluate_pressure(const Field& f, Point q) {
  std::array<double, 3> l;
  const int c = f.dofs->locator().locate(q, &l);
  if (c < 0) throw std::domain_error("evaluate: point outside domain");
  return pressure_value(f, c, l[0], l[1], l[2]);
}

// ---------------------------------------------------------------------------
// Assembly
// ---------------------------------------------------------------------------

namespace detail {

template <typename LocalKernel>
SparseMatrix assemble_p2_scalar(const DofMap& dofs, const LocalKernel& kernel) {
  const Mesh& m = dofs.mesh();
  const auto& rule = triangle_rule(5);
  std::vector<Triplet> ts;
  ts.reserve(static_cast<std::size_t>(m.n_cells()) * 36);
  Eigen::Matrix<double, 6, 6> local;
  for (int c = 0; c < m.n_cells(); ++c) {
    const auto g = cell_geometry(m, c);
    local.setZero();
    for (const auto& q : rule.points) kernel(c, g, q, local);
    const auto& nodes = dofs.cell_nodes(c);
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j)
        if (local(i, j) != 0.0) ts.emplace_back(nodes[i], nodes[j], local(i, j));
  }
  const int n = dofs.n_velocity_nodes();
  return from_triplets(n, n, ts);
}

// Interleave a scalar nodal operator over both velocity components.
inline SparseMatrix expand_to_vector(const SparseMatrix& s) {
  std::vector<Triplet> ts;
  ts.reserve(static_cast<std::size_t>(s.nonZeros()) * 2);
  for (int r = 0; r < s.rows(); ++r)
    for (SparseMatrix::InnerIterator it(s, r); it; ++it)
      for (int c = 0; c < 2; ++c)
        ts.emplace_back(2 * r + c, 2 * static_cast<int>(it.col()) + c, it.value());
  SparseMatrix out(2 * s.rows(), 2 * s.cols());
  out.setFromTriplets(ts.begin(), ts.end());
  out.makeCompressed();
  return out;
}

}  // namespace detail

inline SparseMatrix assemble_mass(const DofMap& dofs, FieldKind kind) {
  if (kind == FieldKind::Pressure) {
    const Mesh& m = dofs.mesh();
    const auto& rule = triangle_rule(2);
    std::vector<Triplet> ts;
    for (int c = 0; c < m.n_cells(); ++c) {
      const double area = m.signed_area(c);
      const auto& cell = m.cells[c];
      for (const auto& q : rule.points) {
        const std::array<double, 3> l = {q.l0, q.l1, q.l2};
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j) ts.emplace_back(cell[i], cell[j], area * q.w * l[i] * l[j]);
      }
    }
    return from_triplets(dofs.n_pressure_dofs(), dofs.n_pressure_dofs(), ts);
  }
  auto kernel = [](int, const CellGeometry& g, const QuadraturePoint& q,
                   Eigen::Matrix<double, 6, 6>& local) {
    const auto phi = p2_values(q.l0, q.l1, q.l2);
    const double w = g.area * q.w;
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j) local(i, j) += w * phi[i] * phi[j];
  };
  return detail::expand_to_vector(detail::assemble_p2_scalar(dofs, kernel));
}

inline SparseMatrix assemble_stiffness(const DofMap& dofs, FieldKind kind) {
  if (kind == FieldKind::Pressure) {
    const Mesh& m = dofs.mesh();
    std::vector<Triplet> ts;
    for (int c = 0; c < m.n_cells(); ++c) {
      const auto g = cell_geometry(m, c);
      const auto& cell = m.cells[c];
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
          ts.emplace_back(cell[i], cell[j], g.area * g.grad_lambda[i].dot(g.grad_lambda[j]));
    }
    return from_triplets(dofs.n_pressure_dofs(), dofs.n_pressure_dofs(), ts);
  }
  auto kernel = [](int, const CellGeometry& g, const QuadraturePoint& q,
                   Eigen::Matrix<double, 6, 6>& local) {
    const auto dphi = p2_gradients(q.l0, q.l1, q.l2, g.grad_lambda);
    const double w = g.area * q.w;
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j) local(i, j) += w * dphi[i].dot(dphi[j]);
  };
  return detail::expand_to_vector(detail::assemble_p2_scalar(dofs, kernel));
}

// B with (B u)_q = integral of q_h div(u_h); shape pressure dofs x velocity dofs.
inline SparseMatrix assemble_divergence(const DofMap& dofs) {
  const Mesh& m = dofs.mesh();
  const auto& rule = triangle_rule(5);
  std::vector<Triplet> ts;
  ts.reserve(static_cast<std::size_t>(m.n_cells()) * 36);
  for (int c = 0; c < m.n_cells(); ++c) {
    const auto g = cell_geometry(m, c);
    const auto& cell = m.cells[c];
    const auto& nodes = dofs.cell_nodes(c);
    for (const auto& q : rule.points) {
      const std::array<double, 3> lp1 = {q.l0, q.l1, q.l2};
      const auto dphi = p2_gradients(q.l0, q.l1, q.l2, g.grad_lambda);
      const double w = g.area * q.w;
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 6; ++j)
          for (int comp = 0; comp < 2; ++comp)
            ts.emplace_back(cell[i], DofMap::velocity_dof(nodes[j], comp),
                            w * lp1[i] * dphi[j](comp));
    }
  }
  return from_triplets(dofs.n_pressure_dofs(), dofs.n_velocity_dofs(), ts);
}

// G with v^T G u = integral of div(u_h) div(v_h).
inline SparseMatrix assemble_graddiv(const DofMap& dofs) {
  const Mesh& m = dofs.mesh();
  const auto& rule = triangle_rule(5);
  std::vector<Triplet> ts;
  ts.reserve(static_cast<std::size_t>(m.n_cells()) * 144);
  Eigen::Matrix<double, 12, 12> local;
  for (int c = 0; c < m.n_cells(); ++c) {
    const auto g = cell_geometry(m, c);
    local.setZero();
    for (const auto& q : rule.points) {
      const auto dphi = p2_gradients(q.l0, q.l1, q.l2, g.grad_lambda);
      const double w = g.area * q.w;
      // Local dof 2k+comp contributes dphi[k](comp) to the divergence.
      for (int i = 0; i < 6; ++i)
        for (int ci = 0; ci < 2; ++ci)
          for (int j = 0; j < 6; ++j)
            for (int cj = 0; cj < 2; ++cj)
              local(2 * i + ci, 2 * j + cj) += w * dphi[i](ci) * dphi[j](cj);
    }
    const auto& nodes = dofs.cell_nodes(c);
    for (int i = 0; i < 12; ++i)
      for (int j = 0; j < 12; ++j)
        if (local(i, j) != 0.0)
          ts.emplace_back(DofMap::velocity_dof(nodes[i / 2], i % 2),
                          DofMap::velocity_dof(nodes[j / 2], j % 2), local(i, j));
  }
  return from_triplets(dofs.n_velocity_dofs(), dofs.n_velocity_dofs(), ts);
}

enum class ConvectionForm { Plain, Skew };

// Plain: N[(i,c),(j,c)] = integral of phi_i (a . grad phi_j).
// Skew:  (N v, w) = 0.5*((a.grad v, w) - (a.grad w, v)); exactly antisymmetric.
inline SparseMatrix assemble_convection(const Field& advector, ConvectionForm form) {
  const DofMap& dofs = *advector.dofs;
  auto kernel = [&advector](int c, const CellGeometry& g, const QuadraturePoint& q,
                            Eigen::Matrix<double, 6, 6>& local) {
    const Vec2 a = velocity_value(advector, c, q.l0, q.l1, q.l2);
    const auto phi = p2_values(q.l0, q.l1, q.l2);
    const auto dphi = p2_gradients(q.l0, q.l1, q.l2, g.grad_lambda);
    const double w = g.area * q.w;
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j) local(i, j) += w * phi[i] * a.dot(dphi[j]);
  };
  SparseMatrix scalar = detail::assemble_p2_scalar(dofs, kernel);
  if (form == ConvectionForm::Skew) {
    SparseMatrix t = SparseMatrix(scalar.transpose());
    scalar = 0.5 * (scalar - t);
  }
  return detail::expand_to_vector(scalar);
}

// Velocity load vector (f, v) with f evaluated at quadrature points.
inline Vector assemble_velocity_load(const DofMap& dofs, const std::function<Vec2(Point)>& f) {
  const Mesh& m = dofs.mesh();
  const auto& rule = triangle_rule(5);
  Vector load = Vector::Zero(dofs.n_velocity_dofs());
  for (int c = 0; c < m.n_cells(); ++c) {
    const auto g = cell_geometry(m, c);
    const auto& nodes = dofs.cell_nodes(c);
    for (const auto& q : rule.points) {
      const Vec2 fv = f(g.at(q.l0, q.l1, q.l2));
      const auto phi = p2_values(q.l0, q.l1, q.l2);
      const double w = g.area * q.w;
      for (int k = 0; k < 6; ++k) {
        load[DofMap::velocity_dof(nodes[k], 0)] += w * phi[k] * fv.x();
        load[DofMap::velocity_dof(nodes[k], 1)] += w * phi[k] * fv.y();
      }
    }
  }
  return load;
}

// ---------------------------------------------------------------------------
// Dirichlet constraints (symmetric elimination)
// ---------------------------------------------------------------------------

struct DirichletBC {
  int dof = -1;
  double value = 0.0;
};

// Eliminates constrained rows and columns in place: constrained rows become
// identity rows, couplings to constrained dofs move to the right-hand side.
// Conflicting values for one dof are rejected.
inline void apply_dirichlet(SparseMatrix& a, Vector& rhs, const std::vector<DirichletBC>& bcs) {
  const int n = static_cast<int>(a.rows());
  std::vector<char> constrained(n, 0);
  std::vector<double> value(n, 0.0);
  for (const auto& bc : bcs) {
    if (bc.dof < 0 || bc.dof >= n) throw std::invalid_argument("apply_dirichlet: dof out of range");
    if (constrained[bc.dof] && value[bc.dof] != bc.value)
      throw std::invalid_argument("apply_dirichlet: conflicting values for dof " +
                                  std::to_string(bc.dof));
    constrained[bc.dof] = 1;
    value[bc.dof] = bc.value;
  }
  for (int r = 0; r < n; ++r) {
    if (constrained[r]) {
      bool diag_found = false;
      for (SparseMatrix::InnerIterator it(a, r); it; ++it) {
        if (it.col() == r) {
          it.valueRef() = 1.0;
          diag_found = true;
        } else {
          it.valueRef() = 0.0;
        }
      }
      if (!diag_found)
        throw std::logic_error("apply_dirichlet: missing diagonal for constrained dof");
      rhs[r] = value[r];
    } else {
      for (SparseMatrix::InnerIterator it(a, r); it; ++it) {
        if (constrained[it.col()]) {
          rhs[r] -= it.value() * value[it.col()];
          it.valueRef() = 0.0;
        }
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Norms
// ---------------------------------------------------------------------------

inline double domain_area(const Mesh& m) { return m.total_area(); }

inline double l2_norm(const Field& f) {
  const Mesh& m = f.dofs->mesh();
  const auto& rule = triangle_rule(5);
  double acc = 0.0;
  for (int c = 0; c < m.n_cells(); ++c) {
    const auto g = cell_geometry(m, c);
    for (const auto& q : rule.points) {
      if (f.kind == FieldKind::Velocity) {
        acc += g.area * q.w * velocity_value(f, c, q.l0, q.l1, q.l2).squaredNorm();
      } else {
        const double v = pressure_value(f, c, q.l0, q.l1, q.l2);
        acc += g.area * q.w * v * v;
      }
    }
  }
  return std::sqrt(std::max(0.0, acc));
}

inline double h1_seminorm(const Field& f) {
  const Mesh& m = f.dofs->mesh();
  const auto& rule = triangle_rule(5);
  double acc = 0.0;
  for (int c = 0; c < m.n_cells(); ++c) {
    const auto g = cell_geometry(m, c);
    if (f.kind == FieldKind::Pressure) {
      const auto& cell = m.cells[c];
      const Vec2 gp = f.coeffs[cell[0]] * g.grad_lambda[0] + f.coeffs[cell[1]] * g.grad_lambda[1] +
                      f.coeffs[cell[2]] * g.grad_lambda[2];
      acc += g.area * gp.squaredNorm();
      continue;
    }
    for (const auto& q : rule.points)
      acc += g.area * q.w * velocity_gradient(f, c, g, q.l0, q.l1, q.l2).squaredNorm();
  }
  return std::sqrt(std::max(0.0, acc));
}

inline double pressure_mean(const Field& p) {
  const Mesh& m = p.dofs->mesh();
  double acc = 0.0;
  for (int c = 0; c < m.n_cells(); ++c) {
    const auto& cell = m.cells[c];
    acc += m.signed_area(c) * (p.coeffs[cell[0]] + p.coeffs[cell[1]] + p.coeffs[cell[2]]) / 3.0;
  }
  return acc / m.total_area();
}

// Dirichlet list for all tagged boundary velocity nodes. The callback is
// evaluated once per (node, tag) pair; a node carrying several tags must
// receive consistent values (checked downstream by apply_dirichlet).
inline std::vector<DirichletBC> velocity_dirichlet(
    const DofMap& dofs, const std::function<Vec2(Point, Tag)>& g) {
  std::vector<DirichletBC> bcs;
  for (const auto& [node, tags] : dofs.boundary_node_tags()) {
    const Point p = dofs.node_position(node);
    for (Tag t : tags) {
      const Vec2 v = g(p, t);
      bcs.push_back({DofMap::velocity_dof(node, 0), v.x()});
      bcs.push_back({DofMap::velocity_dof(node, 1), v.y()});
    }
  }
  return bcs;
}

}  // namespace nudgens
