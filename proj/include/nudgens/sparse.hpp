#pragma once

// Compressed-row sparse operators and the linear solvers used by the
// schemes. Storage is Eigen's row-major compressed format (row offsets,
// sorted column indices, values). Iterative solvers verify their residual
// contract with an explicit matrix-vector product before reporting success.

#include <Eigen/Dense>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

namespace nudgens {

using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using ColMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor>;
using Triplet = Eigen::Triplet<double>;

struct SolveReport {
  int iterations = 0;
  double residual = 0.0;  // final relative residual |b - A x| / |b|
  bool converged = false;
};

struct SolveFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline SparseMatrix from_triplets(int rows, int cols, std::vector<Triplet>& ts) {
  SparseMatrix a(rows, cols);
  a.setFromTriplets(ts.begin(), ts.end());
  a.makeCompressed();
  return a;
}

inline Vector spmv(const SparseMatrix& a, const Vector& x) {
  if (a.cols() != x.size())
    throw std::invalid_argument("spmv: dimension mismatch " + std::to_string(a.cols()) + " vs " +
                                std::to_string(x.size()));
  return a * x;
}

using LinOp = std::function<Vector(const Vector&)>;

namespace detail {

inline void deflate(Vector& v, const Vector* nullspace) {
  if (nullspace) v -= (nullspace->dot(v) / nullspace->squaredNorm()) * (*nullspace);
}

}  // namespace detail

// Preconditioned conjugate gradient. `nullspace`, when given, must span the
// kernel of the (singular PSD) operator; iterates are kept orthogonal to it.
inline std::pair<Vector, SolveReport> cg(const LinOp& apply, const LinOp& precond, const Vector& b,
                                         double tol, int maxit,
                                         const Vector* nullspace = nullptr) {
  Vector rhs = b;
  detail::deflate(rhs, nullspace);
  const double bnorm = rhs.norm();
  Vector x = Vector::Zero(b.size());
  SolveReport rep;
  if (bnorm == 0.0) {
    rep.converged = true;
    return {x, rep};
  }
  Vector r = rhs;
  Vector z = precond ? precond(r) : r;
  detail::deflate(z, nullspace);
  Vector p = z;
  double rz = r.dot(z);
  for (int it = 0; it < maxit; ++it) {
    Vector ap = apply(p);
    detail::deflate(ap, nullspace);
    const double alpha = rz / p.dot(ap);
    x += alpha * p;
    r -= alpha * ap;
    rep.iterations = it + 1;
    if (r.norm() <= tol * bnorm) break;
    z = precond ? precond(r) : r;
    detail::deflate(z, nullspace);
    const double rz_new = r.dot(z);
    p = z + (rz_new / rz) * p;
    rz = rz_new;
  }
  detail::deflate(x, nullspace);
  Vector resid = rhs - apply(x);
  detail::deflate(resid, nullspace);
  rep.residual = resid.norm() / bnorm;
  rep.converged = rep.residual <= tol;
  return {x, rep};
}

// Restarted GMRES with right preconditioning (modified Gram-Schmidt Arnoldi).
inline std::pair<Vector, SolveReport> gmres(const LinOp& apply, const LinOp& precond,
                                            const Vector& b, double tol, int maxit,
                                            int restart = 60,
                                            const Vector* nullspace = nullptr) {
  Vector rhs = b;
  detail::deflate(rhs, nullspace);
  const double bnorm = rhs.norm();
  Vector x = Vector::Zero(b.size());
  SolveReport rep;
  if (bnorm == 0.0) {
    rep.converged = true;
    return {x, rep};
  }
  const int m = std::min<int>(restart, static_cast<int>(b.size()));
  std::vector<Vector> v(m + 1), zcache(m);
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(m + 1, m);
  Vector cs = Vector::Zero(m), sn = Vector::Zero(m), g = Vector::Zero(m + 1);

  int total_it = 0;
  bool done = false;
  while (total_it < maxit && !done) {
    Vector r = rhs - apply(x);
    detail::deflate(r, nullspace);
    const double beta = r.norm();
    if (beta <= tol * bnorm) break;
    v[0] = r / beta;
    g.setZero();
    g(0) = beta;
    int k = 0;
    while (k < m && total_it < maxit) {
      zcache[k] = precond ? precond(v[k]) : v[k];
      detail::deflate(zcache[k], nullspace);
      Vector w = apply(zcache[k]);
      detail::deflate(w, nullspace);
      for (int i = 0; i <= k; ++i) {
        h(i, k) = w.dot(v[i]);
        w -= h(i, k) * v[i];
      }
      double hsub = w.norm();  // pre-rotation subdiagonal entry
      const bool breakdown = hsub <= 1e-300;
      if (!breakdown) v[k + 1] = w / hsub;
      for (int i = 0; i < k; ++i) {
        const double t = cs(i) * h(i, k) + sn(i) * h(i + 1, k);
        h(i + 1, k) = -sn(i) * h(i, k) + cs(i) * h(i + 1, k);
        h(i, k) = t;
      }
      const double denom = std::hypot(h(k, k), hsub);
      if (denom == 0.0) {
        done = true;  // stagnated direction; discard column k
        break;
      }
      cs(k) = h(k, k) / denom;
      sn(k) = hsub / denom;
      h(k, k) = denom;
      g(k + 1) = -sn(k) * g(k);
      g(k) = cs(k) * g(k);
      ++k;
      ++total_it;
      if (std::abs(g(k)) <= tol * bnorm || breakdown) {
        done = breakdown && std::abs(g(k)) > tol * bnorm;  // true breakdown: no progress possible
        break;
      }
    }
    if (k == 0) break;
    // Solve the triangular least-squares system and update x.
    Vector y(k);
    for (int i = k - 1; i >= 0; --i) {
      double s = g(i);
      for (int j = i + 1; j < k; ++j) s -= h(i, j) * y(j);
      y(i) = s / h(i, i);
    }
    for (int i = 0; i < k; ++i) x += y(i) * zcache[i];
    detail::deflate(x, nullspace);
  }
  rep.iterations = total_it;
  Vector resid = rhs - apply(x);
  detail::deflate(resid, nullspace);
  rep.residual = resid.norm() / bnorm;
  rep.converged = rep.residual <= tol;
  return {x, rep};
}

inline LinOp jacobi_preconditioner(const SparseMatrix& a) {
  Vector d = a.diagonal();
  for (int i = 0; i < d.size(); ++i) d(i) = (d(i) != 0.0) ? 1.0 / d(i) : 1.0;
  return [d](const Vector& r) -> Vector { return d.asDiagonal() * r; };
}

// CG with Jacobi preconditioning for SPD systems. With a declared constant
// (or other) nullspace the right-hand side and iterates are deflated, which
// realizes the mean-zero pressure solves.
inline std::pair<Vector, SolveReport> solve_spd(const SparseMatrix& a, const Vector& b, double tol,
                                                int maxit,
                                                const Vector* nullspace = nullptr) {
  if (a.rows() != a.cols() || a.rows() != b.size())
    throw std::invalid_argument("solve_spd: dimension mismatch");
  auto apply = [&a](const Vector& x) -> Vector { return a * x; };
  return cg(apply, jacobi_preconditioner(a), b, tol, maxit, nullspace);
}

// GMRES(60) with an incomplete-LU preconditioner (diagonal fallback).
inline std::pair<Vector, SolveReport> solve_nonsymmetric(const SparseMatrix& a, const Vector& b,
                                                         double tol, int maxit) {
  if (a.rows() != a.cols() || a.rows() != b.size())
    throw std::invalid_argument("solve_nonsymmetric: dimension mismatch");
  auto apply = [&a](const Vector& x) -> Vector { return a * x; };
  Eigen::IncompleteLUT<double> ilut;
  LinOp precond;
  try {
    ilut.setDroptol(1e-5);
    ilut.setFillfactor(12);
    ColMatrix ac = a;
    ilut.compute(ac);
    if (ilut.info() == Eigen::Success)
      precond = [&ilut](const Vector& r) -> Vector { return ilut.solve(r); };
  } catch (const std::exception&) {
    precond = nullptr;
  }
  if (!precond) precond = jacobi_preconditioner(a);
  return gmres(apply, precond, b, tol, maxit, 60);
}

// Direct sparse LU solve; throws SolveFailure when the factorization fails.
class LuSolver {
 public:
  explicit LuSolver(const SparseMatrix& a) : a_(a) {
    lu_.compute(a_);
    if (lu_.info() != Eigen::Success) throw SolveFailure("sparse LU factorization failed");
  }
  Vector solve(const Vector& b) const {
    Vector x = lu_.solve(b);
    if (lu_.info() != Eigen::Success) throw SolveFailure("sparse LU solve failed");
    return x;
  }

 private:
  ColMatrix a_;  // keeps the factored matrix alive
  Eigen::SparseLU<ColMatrix> lu_;
};

inline Vector solve_lu(const SparseMatrix& a, const Vector& b) { return LuSolver(a).solve(b); }

// Saddle-point solver for [A B^T; B 0] [u; p] = [f; g].
//
// Below `dense_threshold` total unknowns the bordered system is solved with a
// dense factorization; otherwise a Schur-complement GMRES iterates on the
// pressure, with A factored once and an optional pressure-mass
// preconditioner. A constant pressure nullspace is detected from B and the
// returned pressure is deflated against it (zero coefficient mean).
inline std::tuple<Vector, Vector, SolveReport> solve_saddle(
    const SparseMatrix& a, const SparseMatrix& b, const Vector& f, const Vector& g, double tol,
    const SparseMatrix* pressure_mass = nullptr, int dense_threshold = 3000) {
  const int n = static_cast<int>(a.rows());
  const int m = static_cast<int>(b.rows());
  if (a.cols() != n || b.cols() != n || f.size() != n || g.size() != m)
    throw std::invalid_argument("solve_saddle: dimension mismatch");
  SparseMatrix bt = SparseMatrix(b.transpose());

  const Vector ones = Vector::Ones(m);
  const bool constant_nullspace = (bt * ones).norm() <= 1e-10 * std::max(1.0, b.coeffs().abs().sum() / std::max(1, m));
  const double scale = std::max(f.norm(), g.norm());
  SolveReport rep;

  Vector u, p;
  if (n + m <= dense_threshold) {
    const int extra = constant_nullspace ? 1 : 0;
    Eigen::MatrixXd k = Eigen::MatrixXd::Zero(n + m + extra, n + m + extra);
    for (int i = 0; i < n; ++i)
      for (SparseMatrix::InnerIterator it(a, i); it; ++it) k(i, it.col()) = it.value();
    for (int i = 0; i < m; ++i)
      for (SparseMatrix::InnerIterator it(b, i); it; ++it) {
        k(n + i, it.col()) = it.value();
        k(it.col(), n + i) = it.value();
      }
    if (constant_nullspace) {
      for (int i = 0; i < m; ++i) k(n + m, n + i) = k(n + i, n + m) = 1.0;
    }
    Vector rhs = Vector::Zero(n + m + extra);
    rhs.head(n) = f;
    rhs.segment(n, m) = g;
    Vector sol = Eigen::PartialPivLU<Eigen::MatrixXd>(k).solve(rhs);
    u = sol.head(n);
    p = sol.segment(n, m);
    rep.iterations = 0;
  } else {
    LuSolver alu(a);
    auto schur = [&](const Vector& q) -> Vector { return b * alu.solve(bt * q); };
    LinOp precond;
    std::optional<Eigen::SimplicialLDLT<ColMatrix>> mp_chol;
    if (pressure_mass) {
      mp_chol.emplace();
      ColMatrix mp = *pressure_mass;
      mp_chol->compute(mp);
      if (mp_chol->info() == Eigen::Success)
        precond = [&mp_chol](const Vector& r) -> Vector { return mp_chol->solve(r); };
    }
    const Vector rhs_p = b * alu.solve(f) - g;
    auto [ps, prep] = gmres(schur, precond, rhs_p, tol, 2000, 80,
                            constant_nullspace ? &ones : nullptr);
    p = ps;
    u = alu.solve(f - bt * p);
    rep.iterations = prep.iterations;
  }
  if (constant_nullspace) p.array() -= p.mean();

  const double r1 = (f - a * u - bt * p).norm();
  Vector r2 = g - b * u;
  if (constant_nullspace) detail::deflate(r2, &ones);
  rep.residual = std::hypot(r1, r2.norm()) / (scale > 0.0 ? scale : 1.0);
  rep.converged = rep.residual <= 10.0 * tol;
  return {u, p, rep};
}

}  // namespace nudgens
