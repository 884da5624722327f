#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "susyflow/error.hpp"
#include "susyflow/operator.hpp"

namespace susyflow {

using MatVec = std::function<CVector(const CVector&)>;

namespace detail {

/// Two-pass classical Gram-Schmidt of w against the first `cols` columns.
inline CVector orthogonalize(const CMatrix& basis, Eigen::Index cols, CVector& w) {
  CVector h = basis.leftCols(cols).adjoint() * w;
  w.noalias() -= basis.leftCols(cols) * h;
  CVector h2 = basis.leftCols(cols).adjoint() * w;
  w.noalias() -= basis.leftCols(cols) * h2;
  return h + h2;
}

inline CVector random_unit(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  CVector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = Complex(g(rng), g(rng));
  return v / v.norm();
}

}  // namespace detail

struct ExpmvOptions {
  int krylov_dim = 30;
  double tol = 1e-10;  ///< local error per step, relative to ||psi||
  int max_splits = 60;
};

struct ExpmvStats {
  int steps = 0;
  int splits = 0;
  int matvecs = 0;
};

/// e^{-t H} v by Krylov (Arnoldi) projection with step splitting. The
/// per-step error uses the a posteriori estimate
/// beta * tau * h_{m+1,m} * |e_m^T phi_1(tau Hm) e_1|.
inline CVector expmv(const MatVec& hmul, const CVector& v, double t, const ExpmvOptions& opt = {},
                     ExpmvStats* stats = nullptr) {
  if (t < 0.0) throw Error(ErrorCode::NegativeTime, "t=" + std::to_string(t));
  CVector w = v;
  const double psi_norm = v.norm();
  if (t == 0.0 || psi_norm == 0.0) return w;
  const Eigen::Index n = v.size();
  const int m_max = static_cast<int>(std::min<Eigen::Index>(opt.krylov_dim, n));
  ExpmvStats local;
  double done = 0.0;
  double tau = t;
  CMatrix basis(n, m_max + 1);
  CMatrix hess(m_max + 1, m_max);
  while (done < t) {
    const double beta = w.norm();
    if (beta == 0.0) break;
    basis.col(0) = w / beta;
    hess.setZero();
    int m = m_max;
    bool happy = false;
    for (int j = 0; j < m_max; ++j) {
      CVector u = -hmul(basis.col(j));
      ++local.matvecs;
      const CVector h = detail::orthogonalize(basis, j + 1, u);
      hess.col(j).head(j + 1) = h;
      const double nu = u.norm();
      if (nu <= 1e-13 * std::max(1.0, h.norm())) {
        m = j + 1;
        happy = true;
        break;
      }
      hess(j + 1, j) = nu;
      basis.col(j + 1) = u / nu;
    }
    tau = std::min(tau, t - done);
    int splits_here = 0;
    for (;;) {
      CMatrix aug = CMatrix::Zero(m + 1, m + 1);
      aug.topLeftCorner(m, m) = tau * hess.topLeftCorner(m, m);
      aug(0, m) = 1.0;
      const CMatrix e = aug.exp();
      double err = 0.0;
      if (!happy) err = beta * tau * std::abs(hess(m, m - 1)) * std::abs(e(m - 1, m));
      if (err <= opt.tol * psi_norm) {
        w = beta * (basis.leftCols(m) * e.col(0).head(m));
        done += tau;
        ++local.steps;
        if (splits_here == 0) tau *= 2.0;
        break;
      }
      tau *= 0.5;
      ++splits_here;
      ++local.splits;
      if (splits_here > opt.max_splits)
        throw Error(ErrorCode::NonConvergence, "expmv step error above tolerance after " +
                                                   std::to_string(opt.max_splits) + " splits");
    }
  }
  if (stats) *stats = local;
  return w;
}

struct KrylovSchurOptions {
  int subspace = 40;
  double tol = 1e-10;
  int max_restarts = 3000;
  unsigned seed = 7;
  int max_probes = -1;  ///< fresh-vector restarts after convergence; < 0 means nev
};

struct RitzPairs {
  CVector values;
  CMatrix vectors;  ///< unit-norm columns
  std::vector<double> ritz_residuals;
  int restarts = 0;
  int matvecs = 0;
  int probes = 0;
};

namespace detail {

/// Swap diagonal entries i and i+1 of the upper-triangular t, updating u.
inline void swap_schur(CMatrix& t, CMatrix& u, Eigen::Index i) {
  const Complex a = t(i, i), b = t(i, i + 1), c = t(i + 1, i + 1);
  Eigen::Vector2cd x(b, c - a);
  const double nx = x.norm();
  if (nx == 0.0) return;
  x /= nx;
  Eigen::Matrix2cd q;
  q << x[0], -std::conj(x[1]), x[1], std::conj(x[0]);
  t.middleCols(i, 2) = t.middleCols(i, 2) * q;
  t.middleRows(i, 2) = q.adjoint() * t.middleRows(i, 2);
  u.middleCols(i, 2) = u.middleCols(i, 2) * q;
  t(i + 1, i) = 0.0;
}

}  // namespace detail

/// `nev` eigenvalues of largest magnitude by Krylov-Schur restarted Arnoldi.
///
/// A single start vector only sees one direction per eigenspace, so after
/// convergence the wanted Schur vectors are locked and the expansion is
/// restarted from a fresh random vector orthogonal to them. This repeats
/// until a probe leaves the wanted set unchanged, which recovers the
/// multiplicity of semisimple eigenvalues.
inline RitzPairs krylov_schur_largest(const MatVec& op, Eigen::Index n, int nev, const KrylovSchurOptions& opt = {}) {
  const int m = static_cast<int>(std::min<Eigen::Index>(std::max(opt.subspace, 2 * nev + 2), n));
  if (nev > m) throw Error(ErrorCode::DimensionMismatch, "more eigenvalues requested than dimension");
  std::mt19937_64 rng(opt.seed);
  CMatrix basis = CMatrix::Zero(n, m + 1);
  CMatrix s = CMatrix::Zero(m + 1, m);
  basis.col(0) = detail::random_unit(n, rng);
  RitzPairs out;
  int k = 0;
  const int max_probes = opt.max_probes < 0 ? nev : opt.max_probes;
  std::vector<Complex> last_wanted;
  for (int restart = 0; restart <= opt.max_restarts; ++restart) {
    for (int j = k; j < m; ++j) {
      CVector w = op(basis.col(j));
      ++out.matvecs;
      const CVector h = detail::orthogonalize(basis, j + 1, w);
      s.col(j).head(j + 1) += h;
      double nw = w.norm();
      if (nw <= 1e-13 * std::max(1.0, h.norm())) {
        // invariant subspace: continue with a fresh direction
        s(j + 1, j) = 0.0;
        for (int tries = 0; tries < 3; ++tries) {
          w = detail::random_unit(n, rng);
          detail::orthogonalize(basis, j + 1, w);
          nw = w.norm();
          if (nw > 1e-8) break;
        }
        if (j + 1 <= m) basis.col(j + 1) = w / nw;
      } else {
        s(j + 1, j) = nw;
        basis.col(j + 1) = w / nw;
      }
    }
    const CMatrix sm = s.topRows(m);
    const Eigen::RowVectorXcd b = s.row(m);
    Eigen::ComplexEigenSolver<CMatrix> ces(sm, true);
    std::vector<int> order(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) order[static_cast<std::size_t>(i)] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](int x, int y) { return std::abs(ces.eigenvalues()[x]) > std::abs(ces.eigenvalues()[y]); });
    bool all = true;
    out.ritz_residuals.assign(static_cast<std::size_t>(nev), 0.0);
    const double scale = std::abs(ces.eigenvalues()[order[0]]);
    for (int i = 0; i < nev; ++i) {
      const int idx = order[static_cast<std::size_t>(i)];
      CVector y = ces.eigenvectors().col(idx);
      y.normalize();
      const double r = std::abs(b.dot(y.conjugate()));  // |b y|
      out.ritz_residuals[static_cast<std::size_t>(i)] = r;
      if (r > opt.tol * std::max(std::abs(ces.eigenvalues()[idx]), 1e-3 * scale)) all = false;
    }
    if (all && m < n && out.probes < max_probes) {
      std::vector<Complex> wanted;
      for (int i = 0; i < nev; ++i) wanted.push_back(ces.eigenvalues()[order[static_cast<std::size_t>(i)]]);
      bool same = last_wanted.size() == wanted.size();
      for (std::size_t i = 0; same && i < wanted.size(); ++i)
        same = std::abs(wanted[i] - last_wanted[i]) <= 1e3 * opt.tol * scale;
      if (!same) {
        last_wanted = wanted;
        ++out.probes;
        Eigen::ComplexSchur<CMatrix> schur(sm, true);
        CMatrix t = schur.matrixT();
        CMatrix u = schur.matrixU();
        for (int p = 0; p < nev; ++p) {
          int best = p;
          for (int j = p + 1; j < m; ++j)
            if (std::abs(t(j, j)) > std::abs(t(best, best))) best = j;
          for (int j = best; j > p; --j) detail::swap_schur(t, u, j - 1);
        }
        basis.leftCols(nev) = (basis.leftCols(m) * u.leftCols(nev)).eval();
        CVector fresh = detail::random_unit(n, rng);
        detail::orthogonalize(basis, nev, fresh);
        detail::orthogonalize(basis, nev, fresh);
        basis.col(nev) = fresh / fresh.norm();
        s.setZero();
        s.topLeftCorner(nev, nev) = t.topLeftCorner(nev, nev).triangularView<Eigen::Upper>();
        k = nev;
        continue;
      }
    }
    if (all || restart == opt.max_restarts || m == n) {
      out.values.resize(nev);
      out.vectors.resize(n, nev);
      for (int i = 0; i < nev; ++i) {
        const int idx = order[static_cast<std::size_t>(i)];
        out.values[i] = ces.eigenvalues()[idx];
        CVector x = basis.leftCols(m) * ces.eigenvectors().col(idx);
        out.vectors.col(i) = x / x.norm();
      }
      out.restarts = restart;
      if (!all && m != n)
        throw Error(ErrorCode::NoConvergence, "Krylov-Schur did not converge in " + std::to_string(opt.max_restarts) +
                                                  " restarts (worst Ritz residual " +
                                                  std::to_string(*std::max_element(out.ritz_residuals.begin(),
                                                                                   out.ritz_residuals.end())) +
                                                  ")");
      return out;
    }
    // Restart: order the Schur form with the wanted values leading, keep them.
    const int keep = std::min(nev + (m - nev) / 2, m - 1);
    Eigen::ComplexSchur<CMatrix> schur(sm, true);
    CMatrix t = schur.matrixT();
    CMatrix u = schur.matrixU();
    for (int p = 0; p < keep; ++p) {
      int best = p;
      for (int j = p + 1; j < m; ++j)
        if (std::abs(t(j, j)) > std::abs(t(best, best))) best = j;
      for (int j = best; j > p; --j) detail::swap_schur(t, u, j - 1);
    }
    const CMatrix vk = basis.leftCols(m) * u.leftCols(keep);
    const Eigen::RowVectorXcd bk = b * u.leftCols(keep);
    const CVector residual_dir = basis.col(m);
    basis.leftCols(keep) = vk;
    basis.col(keep) = residual_dir;
    s.setZero();
    s.topLeftCorner(keep, keep) = t.topLeftCorner(keep, keep).triangularView<Eigen::Upper>();
    s.row(keep).head(keep) = bk;
    k = keep;
  }
  return out;
}

}  // namespace susyflow
