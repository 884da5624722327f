#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/LU>
#include <Eigen/SVD>

#include "susyflow/fpoperator.hpp"
#include "susyflow/krylov.hpp"

namespace susyflow {

struct PartnerLink {
  int sector = -1;
  int index = -1;  ///< position within the partner sector's entries
};

struct SpectrumEntry {
  Complex value;
  int sector = 0;
  CVector right;
  CVector left;  ///< dual vector: left^T right = 1 (bilinear pairing); empty if unavailable
  double residual = 0.0;
  std::optional<PartnerLink> partner;
  bool d_symmetric = false;
  bool partner_missing = false;
  std::string diagnostic;
};

struct SectorInfo {
  int sector = 0;
  Eigen::Index dimension = 0;
  bool complete = false;  ///< full spectrum (dense path)
  bool defective = false;
  Eigen::Index eigenvector_rank = 0;
  double norm_estimate = 0.0;
  std::string method;
  int iterations = 0;
};

/// Eigenvalues with sector labels, vectors, residuals and BF links. Entries
/// are grouped by sector (ascending) and sorted by (Re, Im) within a sector.
struct SpectrumReport {
  std::string system_id = "system";
  std::vector<SpectrumEntry> entries;
  std::vector<SectorInfo> sectors;
  double tol_eig = 1e-8;

  std::vector<int> sector_indices(int k) const {
    std::vector<int> out;
    for (std::size_t i = 0; i < entries.size(); ++i)
      if (entries[i].sector == k) out.push_back(static_cast<int>(i));
    return out;
  }

  /// Spectral scale max |E| (at least 1e-300 to keep relative tolerances usable).
  double scale() const {
    double s = 0.0;
    for (const auto& e : entries) s = std::max(s, std::abs(e.value));
    return std::max(s, 1e-300);
  }

  bool all_complete() const {
    return !sectors.empty() && std::all_of(sectors.begin(), sectors.end(), [](const SectorInfo& s) { return s.complete; });
  }

  const SectorInfo* info(int k) const {
    for (const auto& s : sectors)
      if (s.sector == k) return &s;
    return nullptr;
  }
};

// ---------------------------------------------------------------------------
// Dense path

struct DenseEigOptions {
  Eigen::Index cap = 3000;
  double tol_eig = 1e-8;
  bool compute_left = true;
  double defect_rcond = 1e-12;
};

struct DenseEig {
  CVector values;
  CMatrix right;  ///< unit columns
  CMatrix left;   ///< columns l_i with l_i^T r_j = delta_ij; empty when defective
  std::vector<double> residuals;
  double norm_estimate = 0.0;
  bool defective = false;
  Eigen::Index eigenvector_rank = 0;
};

namespace detail {

template <class Mat>
void finish_dense(const Mat& a, DenseEig& out, const DenseEigOptions& opt) {
  const Eigen::Index n = a.rows();
  out.norm_estimate = a.cwiseAbs().colwise().sum().maxCoeff();
  for (Eigen::Index i = 0; i < n; ++i) out.right.col(i).normalize();
  out.residuals.resize(static_cast<std::size_t>(n));
  const CMatrix ac = a.template cast<Complex>();
  for (Eigen::Index i = 0; i < n; ++i) {
    const CVector r = ac * out.right.col(i) - out.values[i] * out.right.col(i);
    out.residuals[static_cast<std::size_t>(i)] = r.norm() / std::max(out.norm_estimate, 1e-300);
    if (out.residuals[static_cast<std::size_t>(i)] > opt.tol_eig)
      throw Error(ErrorCode::NoConvergence, "eigenpair " + std::to_string(i) + " residual " +
                                                std::to_string(out.residuals[static_cast<std::size_t>(i)]));
  }
  Eigen::PartialPivLU<CMatrix> lu(out.right);
  const double rc = lu.rcond();
  out.defective = !(rc > opt.defect_rcond);
  if (out.defective) {
    Eigen::FullPivLU<CMatrix> full(out.right);
    full.setThreshold(1e-8);
    out.eigenvector_rank = full.rank();
  } else {
    out.eigenvector_rank = n;
    if (opt.compute_left) out.left = lu.inverse().transpose();
  }
}

}  // namespace detail

inline DenseEig dense_eig(const Eigen::MatrixXd& a, const DenseEigOptions& opt = {}) {
  if (a.rows() > opt.cap)
    throw Error(ErrorCode::DimensionMismatch, "dimension " + std::to_string(a.rows()) + " exceeds dense cap " +
                                                  std::to_string(opt.cap));
  DenseEig out;
  if (a.rows() == 0) return out;
  Eigen::EigenSolver<Eigen::MatrixXd> es(a, true);
  if (es.info() != Eigen::Success) throw Error(ErrorCode::NoConvergence, "real Schur iteration failed");
  out.values = es.eigenvalues();
  out.right = es.eigenvectors();
  detail::finish_dense(a, out, opt);
  return out;
}

inline DenseEig dense_eig(const CMatrix& a, const DenseEigOptions& opt = {}) {
  if (a.rows() > opt.cap)
    throw Error(ErrorCode::DimensionMismatch, "dimension " + std::to_string(a.rows()) + " exceeds dense cap " +
                                                  std::to_string(opt.cap));
  DenseEig out;
  if (a.rows() == 0) return out;
  Eigen::ComplexEigenSolver<CMatrix> es(a, true);
  if (es.info() != Eigen::Success) throw Error(ErrorCode::NoConvergence, "complex Schur iteration failed");
  out.values = es.eigenvalues();
  out.right = es.eigenvectors();
  detail::finish_dense(a, out, opt);
  return out;
}

// ---------------------------------------------------------------------------
// Krylov path

enum class KrylovMode { MaxMagnitude, MinReal };

struct KrylovEigOptions {
  int count = 6;
  int subspace = 40;
  double tau = 0.0;  ///< surrogate time step; <= 0 selects 1/(4 ||H||_est)
  double tol = 1e-9;  ///< Ritz residual tolerance on the iterated operator
  int max_restarts = 3000;
  double residual_tol = 1e-6;  ///< post-hoc residual contract against the operator
  ExpmvOptions expmv{20, 1e-12, 60};
  unsigned seed = 7;
};

struct KrylovEig {
  CVector values;
  CMatrix vectors;
  std::vector<double> residuals;
  double tau = 0.0;
  double norm_estimate = 0.0;
  int restarts = 0;
  int matvecs = 0;
};

/// Largest-magnitude eigenpairs of a matvec-capable operator.
inline KrylovEig krylov_max_magnitude(const MatVec& op, Eigen::Index n, double norm_estimate,
                                      const KrylovEigOptions& opt = {}) {
  KrylovSchurOptions ks{opt.subspace, opt.tol, opt.max_restarts, opt.seed};
  const RitzPairs rp = krylov_schur_largest(op, n, opt.count, ks);
  KrylovEig out;
  out.values = rp.values;
  out.vectors = rp.vectors;
  out.restarts = rp.restarts;
  out.matvecs = rp.matvecs;
  out.norm_estimate = norm_estimate;
  for (Eigen::Index i = 0; i < out.values.size(); ++i) {
    const CVector r = op(out.vectors.col(i)) - out.values[i] * out.vectors.col(i);
    const double res = r.norm() / std::max(norm_estimate, 1e-300);
    out.residuals.push_back(res);
    if (res > opt.residual_tol)
      throw Error(ErrorCode::NoConvergence, "Krylov eigenpair " + std::to_string(i) + " residual " + std::to_string(res));
  }
  return out;
}

/// Smallest-real-part eigenpairs of H via Arnoldi on w -> e^{-tau H} w.
/// Eigenvalues are recovered as -log(mu)/tau and cross-checked against
/// the Rayleigh quotient with H.
inline KrylovEig krylov_min_real(const SparseReal& h, const KrylovEigOptions& opt = {}) {
  KrylovEig out;
  out.norm_estimate = norm_estimate(h);
  const double tau = opt.tau > 0.0 ? opt.tau : 1.0 / (4.0 * std::max(out.norm_estimate, 1e-300));
  out.tau = tau;
  if (tau <= 0.0) throw Error(ErrorCode::BranchAmbiguity, "tau must be positive");
  const MatVec hmul = hamiltonian_matvec(h);
  int expmv_matvecs = 0;
  const MatVec surrogate = [&](const CVector& w) {
    ExpmvStats st;
    CVector r = expmv(hmul, w, tau, opt.expmv, &st);
    expmv_matvecs += st.matvecs;
    return r;
  };
  KrylovSchurOptions ks{opt.subspace, opt.tol, opt.max_restarts, opt.seed};
  const RitzPairs rp = krylov_schur_largest(surrogate, h.rows(), opt.count, ks);
  out.restarts = rp.restarts;
  out.matvecs = expmv_matvecs;
  std::vector<std::pair<Complex, CVector>> pairs;
  for (Eigen::Index i = 0; i < rp.values.size(); ++i) {
    const Complex mu = rp.values[i];
    if (std::abs(mu) == 0.0) throw Error(ErrorCode::BranchAmbiguity, "surrogate eigenvalue is zero");
    const Complex e_log = -std::log(mu) / tau;
    const CVector x = rp.vectors.col(i);
    const CVector hx = susyflow::apply(h, x);
    const Complex e_rq = x.dot(hx) / x.squaredNorm();
    if (std::abs(e_rq.imag()) * tau >= std::numbers::pi ||
        std::abs(e_log - e_rq) > 1e-4 * std::max(out.norm_estimate, 1.0))
      throw Error(ErrorCode::BranchAmbiguity, "log branch of surrogate eigenvalue disagrees with Rayleigh quotient");
    pairs.emplace_back(e_rq, x);
  }
  std::stable_sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) {
    return a.first.real() < b.first.real() || (a.first.real() == b.first.real() && a.first.imag() < b.first.imag());
  });
  out.values.resize(static_cast<Eigen::Index>(pairs.size()));
  out.vectors.resize(h.rows(), static_cast<Eigen::Index>(pairs.size()));
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    out.values[ii] = pairs[i].first;
    out.vectors.col(ii) = pairs[i].second;
    const CVector r = susyflow::apply(h, pairs[i].second) - pairs[i].first * pairs[i].second;
    const double res = r.norm() / (std::max(out.norm_estimate, 1e-300) * pairs[i].second.norm());
    out.residuals.push_back(res);
    if (res > opt.residual_tol)
      throw Error(ErrorCode::NoConvergence, "min-real eigenpair " + std::to_string(i) + " residual " + std::to_string(res));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reports

namespace detail {
inline bool complex_less(const Complex& a, const Complex& b) {
  if (a.real() != b.real()) return a.real() < b.real();
  return a.imag() < b.imag();
}

inline void append_sector(SpectrumReport& rep, int k, const CVector& values, const CMatrix& right, const CMatrix& left,
                          const std::vector<double>& residuals) {
  std::vector<int> order(static_cast<std::size_t>(values.size()));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return complex_less(values[a], values[b]); });
  for (int i : order) {
    SpectrumEntry e;
    e.value = values[i];
    e.sector = k;
    e.right = right.col(i);
    if (left.cols() == right.cols() && left.size() > 0) e.left = left.col(i);
    e.residual = residuals[static_cast<std::size_t>(i)];
    rep.entries.push_back(std::move(e));
  }
}
}  // namespace detail

/// Full spectra of every sector of H via the dense path.
inline SpectrumReport dense_spectrum(const FPHamiltonian& hf, const DenseEigOptions& opt = {},
                                     std::string system_id = "system") {
  SpectrumReport rep;
  rep.system_id = std::move(system_id);
  rep.tol_eig = opt.tol_eig;
  for (int k = 0; k <= hf.dim(); ++k) {
    const DenseEig de = dense_eig(Eigen::MatrixXd(hf.block(k)), opt);
    SectorInfo info;
    info.sector = k;
    info.dimension = hf.block(k).rows();
    info.complete = true;
    info.defective = de.defective;
    info.eigenvector_rank = de.eigenvector_rank;
    info.norm_estimate = de.norm_estimate;
    info.method = "dense";
    rep.sectors.push_back(info);
    detail::append_sector(rep, k, de.values, de.right, de.left, de.residuals);
  }
  return rep;
}

/// Smallest-real eigenvalues per sector via the exponential surrogate.
inline SpectrumReport krylov_spectrum(const FPHamiltonian& hf, const KrylovEigOptions& opt = {},
                                      std::string system_id = "system") {
  SpectrumReport rep;
  rep.system_id = std::move(system_id);
  rep.tol_eig = opt.residual_tol;
  for (int k = 0; k <= hf.dim(); ++k) {
    const KrylovEig ke = krylov_min_real(hf.block(k), opt);
    SectorInfo info;
    info.sector = k;
    info.dimension = hf.block(k).rows();
    info.complete = false;
    info.norm_estimate = ke.norm_estimate;
    info.method = "krylov-min-real";
    info.iterations = ke.restarts;
    rep.sectors.push_back(info);
    detail::append_sector(rep, k, ke.values, ke.vectors, CMatrix(), ke.residuals);
  }
  return rep;
}

/// max over eigenvalues of the distance from conj(lambda) to the set.
inline double conjugation_defect(const std::vector<Complex>& values) {
  double worst = 0.0;
  for (const Complex& a : values) {
    double best = std::numeric_limits<double>::infinity();
    for (const Complex& b : values) best = std::min(best, std::abs(std::conj(a) - b));
    worst = std::max(worst, best);
  }
  return worst;
}

/// max |l_a^T r_b - delta_ab| within sector k.
inline double biorthogonality_defect(const SpectrumReport& rep, int k) {
  const auto idx = rep.sector_indices(k);
  double worst = 0.0;
  for (int a : idx) {
    const auto& ea = rep.entries[static_cast<std::size_t>(a)];
    if (ea.left.size() == 0) return std::numeric_limits<double>::infinity();
    for (int b : idx) {
      const Complex p = ea.left.transpose() * rep.entries[static_cast<std::size_t>(b)].right;
      worst = std::max(worst, std::abs(p - (a == b ? 1.0 : 0.0)));
    }
  }
  return worst;
}

// ---------------------------------------------------------------------------
// BF pairing

struct BfOptions {
  double tol_zero_rel = 1e-6;  ///< zero threshold relative to the spectral scale
  double tol_pair_rel = 1e-6;  ///< eigenvalue matching tolerance relative to scale
  double exactness_fraction = 0.1;
  double degenerate_rel = 1e-9;  ///< eigenvalues this close (relative to scale) share one eigenspace
};

struct BfSummary {
  int nonzero_entries = 0;
  int paired = 0;
  int unpaired = 0;
  int d_symmetric = 0;
  int multiplicity_mismatches = 0;
  std::vector<std::string> diagnostics;

  bool complete() const { return unpaired == 0 && multiplicity_mismatches == 0; }
};

namespace detail {

/// Relative residual of the least-squares problem d w = v.
inline double exactness_residual(const SparseReal& d, const CVector& v) {
  if (d.cols() == 0) return 1.0;
  Eigen::LeastSquaresConjugateGradient<SparseReal> ls;
  ls.setTolerance(1e-12);
  ls.setMaxIterations(std::max<Eigen::Index>(2000, 4 * d.cols()));
  ls.compute(d);
  const Eigen::VectorXd wr = ls.solve(Eigen::VectorXd(v.real()));
  const Eigen::VectorXd wi = ls.solve(Eigen::VectorXd(v.imag()));
  CVector w(wr.size());
  w.real() = wr;
  w.imag() = wi;
  return (susyflow::apply(d, w) - v).norm() / std::max(v.norm(), 1e-300);
}

inline int nearest_in_sector(const SpectrumReport& rep, int k, Complex value, double tol, int* position) {
  const auto idx = rep.sector_indices(k);
  int best = -1;
  double bd = std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < idx.size(); ++p) {
    const double dist = std::abs(rep.entries[static_cast<std::size_t>(idx[p])].value - value);
    if (dist < bd) {
      bd = dist;
      best = static_cast<int>(p);
    }
  }
  if (best < 0 || bd > tol) return -1;
  *position = best;
  return idx[static_cast<std::size_t>(best)];
}

}  // namespace detail

/// Groups the entries of sector k into chains of eigenvalues closer than tol.
inline std::vector<std::vector<int>> eigen_clusters(const SpectrumReport& rep, int k, double tol) {
  const auto idx = rep.sector_indices(k);
  std::vector<std::vector<int>> out;
  std::vector<bool> used(idx.size(), false);
  for (std::size_t a = 0; a < idx.size(); ++a) {
    if (used[a]) continue;
    std::vector<int> members{idx[a]};
    used[a] = true;
    for (std::size_t m = 0; m < members.size(); ++m)
      for (std::size_t b = 0; b < idx.size(); ++b)
        if (!used[b] && std::abs(rep.entries[static_cast<std::size_t>(idx[b])].value -
                                 rep.entries[static_cast<std::size_t>(members[m])].value) <= tol) {
          members.push_back(idx[b]);
          used[b] = true;
        }
    out.push_back(std::move(members));
  }
  return out;
}

/// Links every nonzero eigenstate to its BF partner in an adjacent sector
/// and flags d-symmetric zero modes. Missing partners are reported per
/// entry, never silently accepted.
///
/// Within a degenerate cluster of a fully resolved sector the eigenbasis is
/// first rotated by the right singular vectors of d V, so that closed
/// states and states with d v != 0 are separated; left vectors follow the
/// dual rotation.
inline BfSummary pair_bf(SpectrumReport& rep, const OperatorFamily& d, const OperatorFamily& j,
                         const BfOptions& opt = {}) {
  BfSummary sum;
  const double scale = rep.scale();
  const double tol_zero = opt.tol_zero_rel * scale;
  const double tol_pair = opt.tol_pair_rel * scale;
  const int top = static_cast<int>(d.size()) - 1;
  auto dmat = [&](int k) -> const SparseReal& { return d[static_cast<std::size_t>(k)].matrix; };
  auto jmat = [&](int k) -> const SparseReal& { return j[static_cast<std::size_t>(k)].matrix; };
  auto entry = [&](int i) -> SpectrumEntry& { return rep.entries[static_cast<std::size_t>(i)]; };

  struct Cluster {
    Complex center;
    int size = 0;
    int up = 0;  ///< rank of d on the cluster
    bool zero = false;
  };
  const double tol_rot = opt.degenerate_rel * scale;
  for (int k = 0; k < top; ++k) {
    const SectorInfo* info = rep.info(k);
    if (!info || !info->complete) continue;
    for (const auto& members : eigen_clusters(rep, k, tol_rot)) {
      const auto m = static_cast<Eigen::Index>(members.size());
      if (m < 2) continue;
      CMatrix v(entry(members.front()).right.size(), m);
      for (Eigen::Index c = 0; c < m; ++c) v.col(c) = entry(members[static_cast<std::size_t>(c)]).right;
      CMatrix dv(dmat(k).rows(), m);
      for (Eigen::Index c = 0; c < m; ++c) dv.col(c) = susyflow::apply(dmat(k), v.col(c));
      Eigen::JacobiSVD<CMatrix> svd(dv, Eigen::ComputeFullV);
      const CMatrix w = svd.matrixV();
      const CMatrix vr = v * w;
      const bool have_left =
          std::all_of(members.begin(), members.end(), [&](int i) { return entry(i).left.size() > 0; });
      CMatrix lr;
      if (have_left) {
        CMatrix l(v.rows(), m);
        for (Eigen::Index c = 0; c < m; ++c) l.col(c) = entry(members[static_cast<std::size_t>(c)]).left;
        lr = l * w.conjugate();
      }
      for (Eigen::Index c = 0; c < m; ++c) {
        SpectrumEntry& e = entry(members[static_cast<std::size_t>(c)]);
        e.right = vr.col(c);
        if (have_left) e.left = lr.col(c);
      }
    }
  }

  std::vector<std::vector<Cluster>> clusters(static_cast<std::size_t>(top + 1));
  for (int k = 0; k <= top; ++k) {
    const SectorInfo* info = rep.info(k);
    if (!info || !info->complete) continue;
    for (const auto& members : eigen_clusters(rep, k, tol_pair)) {
      Cluster c;
      c.center = entry(members.front()).value;
      c.size = static_cast<int>(members.size());
      c.zero = std::abs(c.center) <= tol_zero;
      if (k < top) {
        CMatrix dv(dmat(k).rows(), c.size);
        for (int m = 0; m < c.size; ++m)
          dv.col(m) = susyflow::apply(dmat(k), entry(members[static_cast<std::size_t>(m)]).right);
        Eigen::JacobiSVD<CMatrix> svd(dv);
        for (Eigen::Index s = 0; s < svd.singularValues().size(); ++s)
          if (svd.singularValues()[s] > tol_zero) ++c.up;
      }
      clusters[static_cast<std::size_t>(k)].push_back(c);
    }
  }

  for (auto& e : rep.entries) {
    const int k = e.sector;
    e.partner.reset();
    e.partner_missing = false;
    e.d_symmetric = false;
    e.diagnostic.clear();
    const CVector& v = e.right;
    const double nv = v.norm();
    const CVector dv = k < top ? susyflow::apply(dmat(k), v) : CVector();
    const double ndv = k < top ? dv.norm() : 0.0;

    if (std::abs(e.value) <= tol_zero) {
      const double exact_res = k > 0 ? detail::exactness_residual(dmat(k - 1), v) : 1.0;
      if (ndv <= tol_zero * nv && exact_res > opt.exactness_fraction) {
        e.d_symmetric = true;
        ++sum.d_symmetric;
        continue;
      }
    } else {
      ++sum.nonzero_entries;
    }

    int pos = -1;
    if (ndv > tol_zero * nv) {
      // partner d v in sector k+1; verify it is an H_{k+1} eigenvector
      CVector hdv = susyflow::apply(dmat(k), susyflow::apply(jmat(k + 1), dv));
      if (k + 1 < top) hdv += susyflow::apply(jmat(k + 2), susyflow::apply(dmat(k + 1), dv));
      const double pres = (hdv - e.value * dv).norm() / std::max(ndv * std::max(scale, 1.0), 1e-300);
      if (pres > 1e-6) {
        e.diagnostic = "d v is not an eigenvector of H_{k+1} (relative residual " + std::to_string(pres) + ")";
      } else if (detail::nearest_in_sector(rep, k + 1, e.value, tol_pair, &pos) >= 0) {
        e.partner = PartnerLink{k + 1, pos};
      } else {
        e.diagnostic = "no eigenvalue within tolerance in sector " + std::to_string(k + 1);
      }
    } else if (k > 0 && std::abs(e.value) > 0.0) {
      // closed: partner j v / E in sector k-1 with d (j v / E) = v
      const CVector vp = susyflow::apply(jmat(k), v) / e.value;
      const double back = (susyflow::apply(dmat(k - 1), vp) - v).norm() / std::max(nv, 1e-300);
      if (back > 1e-6) {
        e.diagnostic = "d(j v / E) differs from v (relative " + std::to_string(back) + ")";
      } else if (detail::nearest_in_sector(rep, k - 1, e.value, tol_pair, &pos) >= 0) {
        e.partner = PartnerLink{k - 1, pos};
      } else {
        e.diagnostic = "no eigenvalue within tolerance in sector " + std::to_string(k - 1);
      }
    } else {
      e.diagnostic = "closed state in sector 0 with nonzero eigenvalue";
    }
    if (e.partner) {
      ++sum.paired;
    } else {
      e.partner_missing = true;
      ++sum.unpaired;
      sum.diagnostics.push_back("PartnerNotFound: sector " + std::to_string(k) + " E=(" +
                                std::to_string(e.value.real()) + "," + std::to_string(e.value.imag()) + "): " +
                                e.diagnostic);
    }
  }

  // Multiplicity accounting on fully resolved sectors: each nonzero cluster
  // splits into `up` states with partners in k+1 and size-up closed states
  // whose partners live in k-1.
  for (int k = 0; k <= top; ++k) {
    for (const Cluster& c : clusters[static_cast<std::size_t>(k)]) {
      if (c.zero) continue;
      const int down = c.size - c.up;
      if (k == 0 && down > 0) sum.multiplicity_mismatches += down;
      if (k + 1 <= top && rep.info(k + 1) && rep.info(k + 1)->complete && c.up > 0) {
        int partner_down = 0;
        for (const Cluster& q : clusters[static_cast<std::size_t>(k + 1)])
          if (!q.zero && std::abs(q.center - c.center) <= tol_pair) partner_down += q.size - q.up;
        if (partner_down != c.up) {
          sum.multiplicity_mismatches += std::abs(partner_down - c.up);
          sum.diagnostics.push_back("multiplicity mismatch at E=(" + std::to_string(c.center.real()) + "," +
                                    std::to_string(c.center.imag()) + ") between sectors " + std::to_string(k) +
                                    " and " + std::to_string(k + 1));
        }
      }
    }
  }
  return sum;
}

/// Spectrum CSV: system_id, sector, re, im, residual, d_symmetric,
/// partner_sector, partner_index.
inline void write_spectrum_csv(std::ostream& os, const SpectrumReport& rep) {
  os << "system_id,sector,re,im,residual,d_symmetric,partner_sector,partner_index\n";
  os.precision(17);
  for (const auto& e : rep.entries) {
    os << rep.system_id << ',' << e.sector << ',' << e.value.real() << ',' << e.value.imag() << ',' << e.residual
       << ',' << (e.d_symmetric ? 1 : 0) << ',' << (e.partner ? e.partner->sector : -1) << ','
       << (e.partner ? e.partner->index : -1) << '\n';
  }
}

}  // namespace susyflow
