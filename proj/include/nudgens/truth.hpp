#pragma once

// Sources of the true velocity w used by the nudging term: closed-form
// manufactured solutions with the forcing derived from the Navier-Stokes
// equations, and snapshot archives of stored high-resolution reference runs.
//
// Archive layout: a directory holding an ASCII `meta` file (mesh hash, dt,
// stride, count, nu) and one binary little-endian file of 8-byte floats per
// snapshot, velocity coefficients in dof order, named snap_NNNNNN.bin.

#include "nudgens/fem.hpp"

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <vector>

namespace nudgens {

struct AnalyticSolution {
  std::function<Vec2(Point, double)> velocity;
  std::function<Mat2(Point, double)> velocity_gradient;
  std::function<double(Point, double)> pressure;
  std::function<Vec2(Point, double)> forcing;
};

// u = (e^t cos y, e^t sin x), p = (x - y)(1 + t); div u = 0 identically and
// f = u_t + u.grad(u) + grad(p) - nu*lap(u) in closed form.
inline AnalyticSolution manufactured_solution(double nu) {
  AnalyticSolution s;
  s.velocity = [](Point p, double t) -> Vec2 {
    const double et = std::exp(t);
    return {et * std::cos(p.y), et * std::sin(p.x)};
  };
  s.velocity_gradient = [](Point p, double t) -> Mat2 {
    const double et = std::exp(t);
    Mat2 g;
    g << 0.0, -et * std::sin(p.y), et * std::cos(p.x), 0.0;
    return g;
  };
  s.pressure = [](Point p, double t) { return (p.x - p.y) * (1.0 + t); };
  s.forcing = [nu](Point p, double t) -> Vec2 {
    const double et = std::exp(t);
    const double u1 = et * std::cos(p.y), u2 = et * std::sin(p.x);
    return {u1 - u2 * et * std::sin(p.y) + (1.0 + t) + nu * u1,
            u2 + u1 * et * std::cos(p.x) - (1.0 + t) + nu * u2};
  };
  return s;
}

class MeasurementSource {
 public:
  virtual ~MeasurementSource() = default;
  // True velocity w(t) as a fine-space field. Throws std::out_of_range when
  // the source cannot answer for t.
  virtual Field sample(double t) const = 0;
  virtual const std::shared_ptr<const DofMap>& dofs() const = 0;
};

class AnalyticSource final : public MeasurementSource {
 public:
  AnalyticSource(std::shared_ptr<const DofMap> dofs, AnalyticSolution sol)
      : dofs_(std::move(dofs)), sol_(std::move(sol)) {}
  Field sample(double t) const override {
    return interpolate_velocity(dofs_, [&](Point p) { return sol_.velocity(p, t); });
  }
  const std::shared_ptr<const DofMap>& dofs() const override { return dofs_; }
  const AnalyticSolution& solution() const { return sol_; }

 private:
  std::shared_ptr<const DofMap> dofs_;
  AnalyticSolution sol_;
};

enum class TimePolicy { Strict, Linear };

struct ArchiveMeta {
  std::uint64_t mesh_hash = 0;
  double dt = 0.0;
  int stride = 1;
  int count = 0;  // number of snapshots, including t = 0
  double nu = 0.0;
};

namespace detail {

inline std::string snapshot_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "snap_%06d.bin", index);
  return buf;
}

}  // namespace detail

class ArchiveWriter {
 public:
  ArchiveWriter(std::string dir, const ArchiveMeta& meta) : dir_(std::move(dir)), meta_(meta) {
    std::filesystem::create_directories(dir_);
    std::ofstream out(dir_ + "/meta");
    if (!out) throw std::runtime_error("archive: cannot write " + dir_ + "/meta");
    out.precision(17);
    char hash[32];
    std::snprintf(hash, sizeof hash, "%016" PRIx64, meta_.mesh_hash);
    out << "mesh_hash " << hash << "\n"
        << "dt " << meta_.dt << "\n"
        << "stride " << meta_.stride << "\n"
        << "count " << meta_.count << "\n"
        << "nu " << meta_.nu << "\n";
  }

  void write(int index, const Vector& coeffs) const {
    const std::string path = dir_ + "/" + detail::snapshot_name(index);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("archive: cannot write " + path);
    out.write(reinterpret_cast<const char*>(coeffs.data()),
              static_cast<std::streamsize>(sizeof(double)) * coeffs.size());
    if (!out) throw std::runtime_error("archive: short write to " + path);
  }

 private:
  std::string dir_;
  ArchiveMeta meta_;
};

inline ArchiveMeta read_archive_meta(const std::string& dir) {
  std::ifstream in(dir + "/meta");
  if (!in) throw std::runtime_error("archive: cannot open " + dir + "/meta");
  ArchiveMeta meta;
  std::string key;
  while (in >> key) {
    if (key == "mesh_hash") {
      std::string hex;
      in >> hex;
      meta.mesh_hash = std::stoull(hex, nullptr, 16);
    } else if (key == "dt")
      in >> meta.dt;
    else if (key == "stride")
      in >> meta.stride;
    else if (key == "count")
      in >> meta.count;
    else if (key == "nu")
      in >> meta.nu;
    else
      throw std::runtime_error("archive: unknown meta key '" + key + "'");
  }
  if (meta.dt <= 0.0 || meta.count <= 0 || meta.stride < 1)
    throw std::runtime_error("archive: malformed meta in " + dir);
  return meta;
}

// Archives are self-describing: the stored mesh hash is validated against the
// dof map's mesh on construction and a mismatch is a hard error.
class StoredReferenceSource final : public MeasurementSource {
 public:
  StoredReferenceSource(std::shared_ptr<const DofMap> dofs, std::string dir,
                        TimePolicy policy = TimePolicy::Strict)
      : dofs_(std::move(dofs)), dir_(std::move(dir)), policy_(policy),
        meta_(read_archive_meta(dir_)) {
    if (meta_.mesh_hash != mesh_hash(dofs_->mesh()))
      throw std::runtime_error("archive: mesh hash mismatch for " + dir_);
  }

  const ArchiveMeta& meta() const { return meta_; }
  TimePolicy policy() const { return policy_; }

  Vector read_snapshot(int index) const {
    if (index < 0 || index >= meta_.count)
      throw std::out_of_range("archive: snapshot " + std::to_string(index) + " out of range");
    const std::string path = dir_ + "/" + detail::snapshot_name(index);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("archive: cannot open " + path);
    Vector v(dofs_->n_velocity_dofs());
    in.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(sizeof(double)) * v.size());
    if (in.gcount() != static_cast<std::streamsize>(sizeof(double)) * v.size())
      throw std::runtime_error("archive: short read from " + path);
    return v;
  }

  Field sample(double t) const override {
    const double step = meta_.dt * meta_.stride;
    const double pos = t / step;
    const double eps = 1e-8;
    Field f = zero_field(dofs_, FieldKind::Velocity);
    const long nearest = std::lround(pos);
    if (std::abs(pos - nearest) <= eps && nearest >= 0 && nearest < meta_.count) {
      f.coeffs = read_snapshot(static_cast<int>(nearest));
      return f;
    }
    if (policy_ == TimePolicy::Strict)
      throw std::out_of_range("archive: no snapshot at t = " + std::to_string(t) +
                              " (strict time policy)");
    if (pos < -eps || pos > meta_.count - 1 + eps)
      throw std::out_of_range("archive: t = " + std::to_string(t) + " outside stored range");
    const int lo = std::clamp(static_cast<int>(std::floor(pos)), 0, meta_.count - 2);
    const double theta = std::clamp(pos - lo, 0.0, 1.0);
    f.coeffs = (1.0 - theta) * read_snapshot(lo) + theta * read_snapshot(lo + 1);
    return f;
  }

  const std::shared_ptr<const DofMap>& dofs() const override { return dofs_; }

 private:
  std::shared_ptr<const DofMap> dofs_;
  std::string dir_;
  TimePolicy policy_;
  ArchiveMeta meta_;
};

// In-memory snapshot-per-step source; used for self-nudging checks where the
// measurements replay a previously recorded trajectory.
class InMemorySource final : public MeasurementSource {
 public:
  InMemorySource(std::shared_ptr<const DofMap> dofs, double dt, std::vector<Vector> snapshots)
      : dofs_(std::move(dofs)), dt_(dt), snapshots_(std::move(snapshots)) {}

  Field sample(double t) const override {
    const long i = std::lround(t / dt_);
    if (std::abs(t - i * dt_) > 1e-8 || i < 0 || i >= static_cast<long>(snapshots_.size()))
      throw std::out_of_range("in-memory source: no snapshot at t = " + std::to_string(t));
    Field f = zero_field(dofs_, FieldKind::Velocity);
    f.coeffs = snapshots_[i];
    return f;
  }
  const std::shared_ptr<const DofMap>& dofs() const override { return dofs_; }

 private:
  std::shared_ptr<const DofMap> dofs_;
  double dt_;
  std::vector<Vector> snapshots_;
};

}  // namespace nudgens
