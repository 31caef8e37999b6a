#pragma once

// Conforming triangle meshes for the two benchmark domains: the unit square
// and the 2.2 x 0.41 channel with a 0.1 x 0.1 block centered at (0.2, 0.2).
// Meshes are immutable after construction; all constructors validate.

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace nudgens {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

enum class Tag { Wall, Inflow, Outflow, Block };

inline const char* tag_name(Tag t) {
  switch (t) {
    case Tag::Wall: return "WALL";
    case Tag::Inflow: return "INFLOW";
    case Tag::Outflow: return "OUTFLOW";
    case Tag::Block: return "BLOCK";
  }
  return "?";
}

struct MeshError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct BoundaryEdge {
  int a = -1;
  int b = -1;
  Tag tag = Tag::Wall;
};

// Channel benchmark geometry.
namespace channel {
inline constexpr double length = 2.2;
inline constexpr double height = 0.41;
inline constexpr double block_lo = 0.15;
inline constexpr double block_hi = 0.25;
}  // namespace channel

struct Mesh {
  std::vector<Point> vertices;
  std::vector<std::array<int, 3>> cells;  // counter-clockwise vertex triples
  std::vector<BoundaryEdge> boundary_edges;

  int n_vertices() const { return static_cast<int>(vertices.size()); }
  int n_cells() const { return static_cast<int>(cells.size()); }

  double signed_area(int c) const {
    const Point& p0 = vertices[cells[c][0]];
    const Point& p1 = vertices[cells[c][1]];
    const Point& p2 = vertices[cells[c][2]];
    return 0.5 * ((p1.x - p0.x) * (p2.y - p0.y) - (p2.x - p0.x) * (p1.y - p0.y));
  }

  double cell_diameter(int c) const {
    double d = 0.0;
    for (int e = 0; e < 3; ++e) {
      const Point& a = vertices[cells[c][e]];
      const Point& b = vertices[cells[c][(e + 1) % 3]];
      d = std::max(d, std::hypot(b.x - a.x, b.y - a.y));
    }
    return d;
  }

  double max_diameter() const {
    double d = 0.0;
    for (int c = 0; c < n_cells(); ++c) d = std::max(d, cell_diameter(c));
    return d;
  }

  double total_area() const {
    double a = 0.0;
    for (int c = 0; c < n_cells(); ++c) a += signed_area(c);
    return a;
  }

  // Conformity and orientation checks; throws MeshError on the first violation.
  void validate() const;
};

namespace detail {

inline std::pair<int, int> edge_key(int a, int b) {
  return a < b ? std::make_pair(a, b) : std::make_pair(b, a);
}

}  // namespace detail

inline void Mesh::validate() const {
  if (vertices.empty() || cells.empty()) throw MeshError("mesh is empty");
  for (std::size_t c = 0; c < cells.size(); ++c) {
    for (int v : cells[c]) {
      if (v < 0 || v >= n_vertices())
        throw MeshError("cell " + std::to_string(c) + " references vertex " + std::to_string(v) +
                        " out of range");
    }
    if (signed_area(static_cast<int>(c)) <= 0.0)
      throw MeshError("cell " + std::to_string(c) + " has non-positive area");
  }
  std::map<std::pair<int, int>, int> edge_count;
  for (const auto& cell : cells)
    for (int e = 0; e < 3; ++e) edge_count[detail::edge_key(cell[e], cell[(e + 1) % 3])]++;
  for (const auto& [key, count] : edge_count) {
    if (count > 2)
      throw MeshError("edge (" + std::to_string(key.first) + "," + std::to_string(key.second) +
                      ") shared by " + std::to_string(count) + " cells");
  }
  std::map<std::pair<int, int>, int> boundary_seen;  // -> index into boundary_edges
  for (std::size_t i = 0; i < boundary_edges.size(); ++i) {
    const auto& be = boundary_edges[i];
    if (be.a < 0 || be.a >= n_vertices() || be.b < 0 || be.b >= n_vertices())
      throw MeshError("boundary edge " + std::to_string(i) + " references vertex out of range");
    auto key = detail::edge_key(be.a, be.b);
    auto it = edge_count.find(key);
    if (it == edge_count.end() || it->second != 1)
      throw MeshError("boundary edge (" + std::to_string(be.a) + "," + std::to_string(be.b) +
                      ") is not a once-used cell edge");
    if (!boundary_seen.emplace(key, static_cast<int>(i)).second)
      throw MeshError("boundary edge (" + std::to_string(be.a) + "," + std::to_string(be.b) +
                      ") tagged more than once");
  }
  for (const auto& [key, count] : edge_count) {
    if (count == 1 && boundary_seen.find(key) == boundary_seen.end())
      throw MeshError("untagged boundary edge (" + std::to_string(key.first) + "," +
                      std::to_string(key.second) + ")");
  }
}

// Uniform triangulation of [0,1]^2 with (n+1)^2 vertices and 2 n^2 cells,
// every boundary edge tagged Wall.
inline Mesh unit_square_mesh(int n) {
  if (n < 1) throw MeshError("unit_square_mesh: n must be >= 1");
  Mesh m;
  const int np = n + 1;
  m.vertices.reserve(static_cast<std::size_t>(np) * np);
  for (int j = 0; j < np; ++j)
    for (int i = 0; i < np; ++i)
      m.vertices.push_back({static_cast<double>(i) / n, static_cast<double>(j) / n});
  auto v = [np](int i, int j) { return j * np + i; };
  m.cells.reserve(2u * n * n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const int a = v(i, j), b = v(i + 1, j), c = v(i + 1, j + 1), d = v(i, j + 1);
      m.cells.push_back({a, b, c});
      m.cells.push_back({a, c, d});
    }
  }
  for (int i = 0; i < n; ++i) {
    m.boundary_edges.push_back({v(i, 0), v(i + 1, 0), Tag::Wall});
    m.boundary_edges.push_back({v(i, n), v(i + 1, n), Tag::Wall});
    m.boundary_edges.push_back({v(0, i), v(0, i + 1), Tag::Wall});
    m.boundary_edges.push_back({v(n, i), v(n, i + 1), Tag::Wall});
  }
  m.validate();
  return m;
}

namespace detail {

// Partition [lo, hi] into ceil((hi-lo)/h) equal pieces, endpoints exact.
inline void append_ticks(std::vector<double>& out, double lo, double hi, double h) {
  const int k = std::max(1, static_cast<int>(std::ceil((hi - lo) / h - 1e-12)));
  if (out.empty()) out.push_back(lo);
  for (int i = 1; i <= k; ++i) out.push_back(i == k ? hi : lo + (hi - lo) * i / k);
}

inline bool strictly_inside_block(double x, double y) {
  constexpr double eps = 1e-12;
  return x > channel::block_lo + eps && x < channel::block_hi - eps &&
         y > channel::block_lo + eps && y < channel::block_hi - eps;
}

}  // namespace detail

// Structured triangulation of the channel minus the block. Grid lines are
// snapped to the block faces so the block boundary is resolved exactly.
inline Mesh channel_block_mesh(double target_h) {
  if (!(target_h > 0.0) || !(target_h < 0.1))
    throw MeshError("channel_block_mesh: target_h must lie in (0, 0.1) to resolve the block");
  using namespace channel;
  std::vector<double> xs, ys;
  detail::append_ticks(xs, 0.0, block_lo, target_h);
  detail::append_ticks(xs, block_lo, block_hi, target_h);
  detail::append_ticks(xs, block_hi, length, target_h);
  detail::append_ticks(ys, 0.0, block_lo, target_h);
  detail::append_ticks(ys, block_lo, block_hi, target_h);
  detail::append_ticks(ys, block_hi, height, target_h);

  Mesh m;
  const int nx = static_cast<int>(xs.size()), ny = static_cast<int>(ys.size());
  std::vector<int> vid(static_cast<std::size_t>(nx) * ny, -1);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      if (detail::strictly_inside_block(xs[i], ys[j])) continue;
      vid[static_cast<std::size_t>(j) * nx + i] = m.n_vertices();
      m.vertices.push_back({xs[i], ys[j]});
    }
  }
  auto v = [&](int i, int j) { return vid[static_cast<std::size_t>(j) * nx + i]; };
  for (int j = 0; j + 1 < ny; ++j) {
    for (int i = 0; i + 1 < nx; ++i) {
      const double cx = 0.5 * (xs[i] + xs[i + 1]), cy = 0.5 * (ys[j] + ys[j + 1]);
      if (detail::strictly_inside_block(cx, cy)) continue;
      const int a = v(i, j), b = v(i + 1, j), c = v(i + 1, j + 1), d = v(i, j + 1);
      m.cells.push_back({a, b, c});
      m.cells.push_back({a, c, d});
    }
  }

  // Boundary edges are the once-used cell edges; classify by midpoint location.
  std::map<std::pair<int, int>, int> edge_count;
  for (const auto& cell : m.cells)
    for (int e = 0; e < 3; ++e) edge_count[detail::edge_key(cell[e], cell[(e + 1) % 3])]++;
  constexpr double eps = 1e-9;
  for (const auto& [key, count] : edge_count) {
    if (count != 1) continue;
    const Point& pa = m.vertices[key.first];
    const Point& pb = m.vertices[key.second];
    const double mx = 0.5 * (pa.x + pb.x), my = 0.5 * (pa.y + pb.y);
    Tag tag;
    if (std::abs(mx) < eps)
      tag = Tag::Inflow;
    else if (std::abs(mx - length) < eps)
      tag = Tag::Outflow;
    else if (std::abs(my) < eps || std::abs(my - height) < eps)
      tag = Tag::Wall;
    else if ((std::abs(mx - block_lo) < eps || std::abs(mx - block_hi) < eps ||
              std::abs(my - block_lo) < eps || std::abs(my - block_hi) < eps) &&
             mx > block_lo - eps && mx < block_hi + eps && my > block_lo - eps &&
             my < block_hi + eps)
      tag = Tag::Block;
    else
      throw MeshError("channel_block_mesh: unclassifiable boundary edge at (" +
                      std::to_string(mx) + "," + std::to_string(my) + ")");
    m.boundary_edges.push_back({key.first, key.second, tag});
  }
  m.validate();
  return m;
}

// Split every cell into 3 by inserting its barycenter. Boundary unchanged.
inline Mesh barycentric_refine(const Mesh& in) {
  in.validate();
  Mesh m;
  m.vertices = in.vertices;
  m.boundary_edges = in.boundary_edges;
  m.cells.reserve(in.cells.size() * 3);
  for (const auto& cell : in.cells) {
    const Point& p0 = in.vertices[cell[0]];
    const Point& p1 = in.vertices[cell[1]];
    const Point& p2 = in.vertices[cell[2]];
    const int bc = m.n_vertices();
    m.vertices.push_back({(p0.x + p1.x + p2.x) / 3.0, (p0.y + p1.y + p2.y) / 3.0});
    m.cells.push_back({cell[0], cell[1], bc});
    m.cells.push_back({cell[1], cell[2], bc});
    m.cells.push_back({cell[2], cell[0], bc});
  }
  m.validate();
  return m;
}

// ASCII format: "NV NC NB", then NV lines "x y", NC lines "i j k" (0-based,
// counter-clockwise), NB lines "i j TAG" with TAG in {WALL,INFLOW,OUTFLOW,BLOCK}.
inline void save_mesh(const Mesh& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw MeshError("save_mesh: cannot open " + path);
  out.precision(17);
  out << m.n_vertices() << ' ' << m.n_cells() << ' ' << m.boundary_edges.size() << '\n';
  for (const auto& p : m.vertices) out << p.x << ' ' << p.y << '\n';
  for (const auto& c : m.cells) out << c[0] << ' ' << c[1] << ' ' << c[2] << '\n';
  for (const auto& b : m.boundary_edges)
    out << b.a << ' ' << b.b << ' ' << tag_name(b.tag) << '\n';
  if (!out) throw MeshError("save_mesh: write failed for " + path);
}

inline Mesh load_mesh(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MeshError("load_mesh: cannot open " + path);
  int lineno = 0;
  std::string line;
  auto next_line = [&](std::istringstream& iss) {
    while (std::getline(in, line)) {
      ++lineno;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      iss.clear();
      iss.str(line);
      return;
    }
    throw MeshError(path + ":" + std::to_string(lineno) + ": unexpected end of file");
  };
  auto fail = [&](const std::string& what) -> MeshError {
    return MeshError(path + ":" + std::to_string(lineno) + ": " + what);
  };

  std::istringstream iss;
  next_line(iss);
  long nv = 0, nc = 0, nb = 0;
  if (!(iss >> nv >> nc >> nb) || nv <= 0 || nc <= 0 || nb < 0)
    throw fail("expected header 'NV NC NB'");
  Mesh m;
  m.vertices.resize(static_cast<std::size_t>(nv));
  for (long i = 0; i < nv; ++i) {
    next_line(iss);
    if (!(iss >> m.vertices[i].x >> m.vertices[i].y)) throw fail("expected vertex 'x y'");
    if (!std::isfinite(m.vertices[i].x) || !std::isfinite(m.vertices[i].y))
      throw fail("non-finite vertex coordinate");
  }
  m.cells.resize(static_cast<std::size_t>(nc));
  for (long i = 0; i < nc; ++i) {
    next_line(iss);
    auto& c = m.cells[i];
    if (!(iss >> c[0] >> c[1] >> c[2])) throw fail("expected cell 'i j k'");
    for (int k : c)
      if (k < 0 || k >= nv) throw fail("cell vertex index " + std::to_string(k) + " out of range");
  }
  m.boundary_edges.resize(static_cast<std::size_t>(nb));
  for (long i = 0; i < nb; ++i) {
    next_line(iss);
    auto& b = m.boundary_edges[i];
    std::string tag;
    if (!(iss >> b.a >> b.b >> tag)) throw fail("expected boundary edge 'i j TAG'");
    if (b.a < 0 || b.a >= nv || b.b < 0 || b.b >= nv) throw fail("boundary vertex out of range");
    if (tag == "WALL")
      b.tag = Tag::Wall;
    else if (tag == "INFLOW")
      b.tag = Tag::Inflow;
    else if (tag == "OUTFLOW")
      b.tag = Tag::Outflow;
    else if (tag == "BLOCK")
      b.tag = Tag::Block;
    else
      throw fail("unknown boundary tag '" + tag + "'");
  }
  m.validate();  // rejects negative-area cells and non-conforming input
  return m;
}

// FNV-1a over a canonical binary serialization; identifies meshes in run
// manifests and snapshot archives.
inline std::uint64_t mesh_hash(const Mesh& m) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const void* data, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ull;
    }
  };
  const std::int64_t nv = m.n_vertices(), nc = m.n_cells(),
                     nb = static_cast<std::int64_t>(m.boundary_edges.size());
  mix(&nv, sizeof nv);
  mix(&nc, sizeof nc);
  mix(&nb, sizeof nb);
  for (const auto& p : m.vertices) {
    mix(&p.x, sizeof p.x);
    mix(&p.y, sizeof p.y);
  }
  for (const auto& c : m.cells) mix(c.data(), sizeof(int) * 3);
  for (const auto& b : m.boundary_edges) {
    mix(&b.a, sizeof b.a);
    mix(&b.b, sizeof b.b);
    const int t = static_cast<int>(b.tag);
    mix(&t, sizeof t);
  }
  return h;
}

}  // namespace nudgens
