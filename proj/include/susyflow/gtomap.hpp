#pragma once

#include <array>
#include <cmath>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "susyflow/error.hpp"
#include "susyflow/ghost.hpp"
#include "susyflow/operator.hpp"
#include "susyflow/spectral.hpp"

namespace susyflow {

using IntMatrix = Eigen::Matrix<long long, Eigen::Dynamic, Eigen::Dynamic>;
using Mode = std::array<int, 3>;

/// Affine torus map x -> A x + b followed by additive Gaussian noise of
/// variance T per axis.
struct MapSpec {
  std::string name = "map";
  IntMatrix A;
  Eigen::VectorXd b;
  double temperature = 0.0;

  int dim() const { return static_cast<int>(A.rows()); }
};

namespace detail {

inline long long int_det(const IntMatrix& a) {
  const auto n = a.rows();
  if (n == 0) return 1;
  if (n == 1) return a(0, 0);
  if (n == 2) return a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
  long long s = 0;
  for (Eigen::Index c = 0; c < n; ++c) {
    IntMatrix minor(n - 1, n - 1);
    for (Eigen::Index r = 1; r < n; ++r)
      for (Eigen::Index cc = 0, m = 0; cc < n; ++cc)
        if (cc != c) minor(r - 1, m++) = a(r, cc);
    s += ((c % 2) ? -1 : 1) * a(0, c) * int_det(minor);
  }
  return s;
}

/// Determinant of the submatrix with the given row and column masks.
inline double masked_minor(const Eigen::MatrixXd& a, GhostMask rows, GhostMask cols) {
  std::vector<int> r, c;
  for (int i = 0; i < a.rows(); ++i)
    if (has_axis(rows, i)) r.push_back(i);
  for (int i = 0; i < a.cols(); ++i)
    if (has_axis(cols, i)) c.push_back(i);
  if (r.size() != c.size()) return 0.0;
  if (r.empty()) return 1.0;
  Eigen::MatrixXd sub(r.size(), c.size());
  for (std::size_t i = 0; i < r.size(); ++i)
    for (std::size_t j = 0; j < c.size(); ++j) sub(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = a(r[i], c[j]);
  return std::round(sub.determinant());
}

}  // namespace detail

inline long long integer_determinant(const IntMatrix& a) { return detail::int_det(a); }

/// Exact inverse of a unimodular integer matrix (adjugate / det).
inline IntMatrix unimodular_inverse(const IntMatrix& a) {
  const long long det = detail::int_det(a);
  if (det != 1 && det != -1) throw Error(ErrorCode::NotUnimodular, "det A = " + std::to_string(det));
  const auto n = a.rows();
  IntMatrix inv(n, n);
  if (n == 1) {
    inv(0, 0) = det;
    return inv;
  }
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      IntMatrix minor(n - 1, n - 1);
      for (Eigen::Index r = 0, mr = 0; r < n; ++r) {
        if (r == j) continue;
        for (Eigen::Index c = 0, mc = 0; c < n; ++c) {
          if (c == i) continue;
          minor(mr, mc++) = a(r, c);
        }
        ++mr;
      }
      inv(i, j) = (((i + j) % 2) ? -1 : 1) * detail::int_det(minor) * det;
    }
  return inv;
}

inline void validate_map(const MapSpec& m) {
  if (m.A.rows() != m.A.cols()) throw Error(ErrorCode::DimensionMismatch, "A must be square");
  if (m.dim() < 1 || m.dim() > 3) throw Error(ErrorCode::DimensionUnsupported, "D=" + std::to_string(m.dim()));
  if (m.b.size() != m.dim()) throw Error(ErrorCode::DimensionMismatch, "shift b has wrong length");
  if (!(m.temperature >= 0.0)) throw Error(ErrorCode::DomainMismatch, "map temperature must be >= 0");
  const long long det = detail::int_det(m.A);
  if (det != 1 && det != -1) throw Error(ErrorCode::NotUnimodular, "det A = " + std::to_string(det));
}

inline MapSpec make_map(std::string name, const IntMatrix& A, const Eigen::VectorXd& b, double T) {
  MapSpec m{std::move(name), A, b, T};
  validate_map(m);
  return m;
}

/// Built-in maps: cat (A=[[2,1],[1,1]]), identity (param D), translation
/// (D, b0, b1, b2), plus T for all.
inline MapSpec builtin_map(const std::string& name, const std::map<std::string, double>& params) {
  auto get = [&](const std::string& k, double d) {
    auto it = params.find(k);
    return it == params.end() ? d : it->second;
  };
  const double T = get("T", 0.0);
  if (name == "cat") {
    IntMatrix A(2, 2);
    A << 2, 1, 1, 1;
    return make_map(name, A, Eigen::VectorXd::Zero(2), T);
  }
  if (name == "identity" || name == "translation") {
    const int D = static_cast<int>(get("D", 2));
    if (D < 1 || D > 3) throw Error(ErrorCode::DimensionUnsupported, "D=" + std::to_string(D));
    Eigen::VectorXd b = Eigen::VectorXd::Zero(D);
    if (name == "translation")
      for (int i = 0; i < D; ++i) b[i] = get("b" + std::to_string(i), two_pi * (std::sqrt(2.0) - 1.0) * (i + 1));
    return make_map(name, IntMatrix::Identity(D, D), b, T);
  }
  throw Error(ErrorCode::UnknownFlow, "unknown map '" + name + "' (known: cat, identity, translation)");
}

struct ModeImage {
  Mode source{};
  Mode image{};
  Complex weight;
  bool retained = false;
};

/// Truncated Fourier x ghost representation of the noise-averaged pullback
/// by the inverse map. Sector k basis: ghost slot major, mode minor.
struct GtoOperator {
  MapSpec map;
  int K = 1;
  std::vector<Mode> modes;  ///< all |k_i| <= K, axis 0 fastest
  std::vector<ModeImage> mode_map;
  std::vector<Eigen::SparseMatrix<Complex>> blocks;  ///< sector k = 0..D
  std::vector<std::vector<GhostMask>> masks;
  std::size_t dropped_modes = 0;

  int dim() const { return map.dim(); }
  std::size_t n_modes() const { return modes.size(); }
  const Eigen::SparseMatrix<Complex>& block(int k) const { return blocks[static_cast<std::size_t>(k)]; }

  long mode_index(const Mode& k) const {
    long idx = 0, stride = 1;
    for (int a = 0; a < dim(); ++a) {
      if (k[static_cast<std::size_t>(a)] < -K || k[static_cast<std::size_t>(a)] > K) return -1;
      idx += (k[static_cast<std::size_t>(a)] + K) * stride;
      stride *= 2 * K + 1;
    }
    return idx;
  }

  /// Dropped source modes with Euclidean norm <= radius.
  std::size_t dropped_within(double radius) const {
    std::size_t c = 0;
    for (const auto& m : mode_map) {
      double r2 = 0.0;
      for (int a = 0; a < dim(); ++a) r2 += double(m.source[static_cast<std::size_t>(a)]) * m.source[static_cast<std::size_t>(a)];
      if (!m.retained && std::sqrt(r2) <= radius) ++c;
    }
    return c;
  }
};

/// Ghost action of the pullback: G[I][J] = det(Ainv[J rows, I cols]).
inline Eigen::MatrixXd ghost_block(const IntMatrix& Ainv, int degree) {
  const int D = static_cast<int>(Ainv.rows());
  const auto masks = masks_of_degree(D, degree);
  const Eigen::MatrixXd a = Ainv.cast<double>();
  Eigen::MatrixXd g(masks.size(), masks.size());
  for (std::size_t I = 0; I < masks.size(); ++I)
    for (std::size_t J = 0; J < masks.size(); ++J)
      g(static_cast<Eigen::Index>(I), static_cast<Eigen::Index>(J)) = detail::masked_minor(a, masks[J], masks[I]);
  return g;
}

inline GtoOperator build_gto(const MapSpec& map, int K) {
  if (K < 1) throw Error(ErrorCode::TruncationTooSmall, "K=" + std::to_string(K));
  validate_map(map);
  GtoOperator g;
  g.map = map;
  g.K = K;
  const int D = map.dim();
  const IntMatrix Ainv = unimodular_inverse(map.A);
  const IntMatrix AinvT = Ainv.transpose();
  const long side = 2 * K + 1;
  long total = 1;
  for (int a = 0; a < D; ++a) total *= side;
  for (long p = 0; p < total; ++p) {
    Mode k{0, 0, 0};
    long r = p;
    for (int a = 0; a < D; ++a) {
      k[static_cast<std::size_t>(a)] = static_cast<int>(r % side) - K;
      r /= side;
    }
    g.modes.push_back(k);
  }
  // column mode -> (row mode, weight)
  std::vector<std::pair<long, Complex>> target(g.modes.size(), {-1, Complex(0.0)});
  for (std::size_t c = 0; c < g.modes.size(); ++c) {
    const Mode& k = g.modes[c];
    Mode kp{0, 0, 0};
    double phase = 0.0, k2 = 0.0;
    for (int i = 0; i < D; ++i) {
      long long s = 0;
      for (int j = 0; j < D; ++j) s += AinvT(i, j) * k[static_cast<std::size_t>(j)];
      kp[static_cast<std::size_t>(i)] = static_cast<int>(s);
      phase += double(s) * map.b[i];
      k2 += double(s) * double(s);
    }
    const Complex w = std::exp(Complex(-0.5 * map.temperature * k2, -phase));
    const long row = g.mode_index(kp);
    g.mode_map.push_back({k, kp, w, row >= 0});
    if (row < 0) {
      ++g.dropped_modes;
      continue;
    }
    target[c] = {row, w};
  }
  const auto nm = static_cast<Eigen::Index>(g.modes.size());
  for (int deg = 0; deg <= D; ++deg) {
    const auto masks = masks_of_degree(D, deg);
    const Eigen::MatrixXd G = ghost_block(Ainv, deg);
    std::vector<Eigen::Triplet<Complex>> trip;
    for (std::size_t I = 0; I < masks.size(); ++I)
      for (std::size_t J = 0; J < masks.size(); ++J) {
        const double gij = G(static_cast<Eigen::Index>(I), static_cast<Eigen::Index>(J));
        if (gij == 0.0) continue;
        for (Eigen::Index c = 0; c < nm; ++c) {
          const auto& [row, w] = target[static_cast<std::size_t>(c)];
          if (row < 0) continue;
          trip.emplace_back(static_cast<Eigen::Index>(I) * nm + row, static_cast<Eigen::Index>(J) * nm + c, gij * w);
        }
      }
    const auto n = static_cast<Eigen::Index>(masks.size()) * nm;
    Eigen::SparseMatrix<Complex> m(n, n);
    m.setFromTriplets(trip.begin(), trip.end());
    g.blocks.push_back(std::move(m));
    g.masks.push_back(masks);
  }
  return g;
}

/// Exact Fourier exterior derivative on the truncated basis, indexed by
/// source degree 0..D-1.
inline std::vector<Eigen::SparseMatrix<Complex>> fourier_d(const GtoOperator& g) {
  const int D = g.dim();
  const auto nm = static_cast<Eigen::Index>(g.n_modes());
  std::vector<Eigen::SparseMatrix<Complex>> out;
  for (int deg = 0; deg < D; ++deg) {
    const auto src = masks_of_degree(D, deg);
    const auto dst = masks_of_degree(D, deg + 1);
    std::vector<Eigen::Triplet<Complex>> trip;
    for (std::size_t J = 0; J < src.size(); ++J)
      for (int i = 0; i < D; ++i) {
        if (has_axis(src[J], i)) continue;
        const GhostMask target = src[J] | (1u << i);
        const auto I = static_cast<Eigen::Index>(std::find(dst.begin(), dst.end(), target) - dst.begin());
        const double sgn = slot_sign(src[J], i);
        for (Eigen::Index c = 0; c < nm; ++c) {
          const int ki = g.modes[static_cast<std::size_t>(c)][static_cast<std::size_t>(i)];
          if (ki == 0) continue;
          trip.emplace_back(I * nm + c, static_cast<Eigen::Index>(J) * nm + c, Complex(0.0, sgn * ki));
        }
      }
    Eigen::SparseMatrix<Complex> m(static_cast<Eigen::Index>(dst.size()) * nm, static_cast<Eigen::Index>(src.size()) * nm);
    m.setFromTriplets(trip.begin(), trip.end());
    out.push_back(std::move(m));
  }
  return out;
}

/// Relative defect ||d M - M d|| on columns whose mode image is retained.
inline double gto_d_commutator_defect(const GtoOperator& g) {
  const auto dk = fourier_d(g);
  const auto nm = static_cast<Eigen::Index>(g.n_modes());
  double worst = 0.0;
  for (int deg = 0; deg < g.dim(); ++deg) {
    const Eigen::SparseMatrix<Complex> lhs = dk[static_cast<std::size_t>(deg)] * g.block(deg);
    const Eigen::SparseMatrix<Complex> rhs = g.block(deg + 1) * dk[static_cast<std::size_t>(deg)];
    const Eigen::MatrixXcd diff = Eigen::MatrixXcd(lhs - rhs);
    const double scale = std::max(Eigen::MatrixXcd(lhs).norm(), 1e-300);
    for (Eigen::Index c = 0; c < diff.cols(); ++c) {
      if (!g.mode_map[static_cast<std::size_t>(c % nm)].retained) continue;
      worst = std::max(worst, diff.col(c).norm() / scale);
    }
  }
  return worst;
}

inline Complex gto_supertrace(const GtoOperator& g) {
  Complex s(0.0);
  for (int k = 0; k <= g.dim(); ++k) {
    Complex tr(0.0);
    const auto& b = g.block(k);
    for (Eigen::Index c = 0; c < b.outerSize(); ++c)
      for (Eigen::SparseMatrix<Complex>::InnerIterator it(b, c); it; ++it)
        if (it.row() == it.col()) tr += it.value();
    s += (k % 2 ? -1.0 : 1.0) * tr;
  }
  return s;
}

struct GtoSpectrum {
  SpectrumReport report;
  double spectral_radius = 0.0;
  int radius_sector = -1;
  Complex leading;
  double gamma_g = 0.0;  ///< -log(spectral radius) per map step
};

inline GtoSpectrum gto_spectrum(const GtoOperator& g, const DenseEigOptions& dense = {},
                                const KrylovEigOptions& krylov = {}, std::string system_id = "map") {
  GtoSpectrum out;
  out.report.system_id = std::move(system_id);
  out.report.tol_eig = dense.tol_eig;
  for (int k = 0; k <= g.dim(); ++k) {
    const auto& b = g.block(k);
    SectorInfo info;
    info.sector = k;
    info.dimension = b.rows();
    if (b.rows() <= dense.cap) {
      const DenseEig de = dense_eig(CMatrix(b), dense);
      info.complete = true;
      info.defective = de.defective;
      info.eigenvector_rank = de.eigenvector_rank;
      info.norm_estimate = de.norm_estimate;
      info.method = "dense";
      out.report.sectors.push_back(info);
      detail::append_sector(out.report, k, de.values, de.right, de.left, de.residuals);
    } else {
      const double nrm = norm_estimate(b);
      const MatVec mv = [&b](const CVector& x) { return CVector(b * x); };
      const KrylovEig ke = krylov_max_magnitude(mv, b.rows(), nrm, krylov);
      info.norm_estimate = nrm;
      info.method = "krylov-max-magnitude";
      info.iterations = ke.restarts;
      out.report.sectors.push_back(info);
      detail::append_sector(out.report, k, ke.values, ke.vectors, CMatrix(), ke.residuals);
    }
  }
  for (const auto& e : out.report.entries) {
    if (std::abs(e.value) > out.spectral_radius) {
      out.spectral_radius = std::abs(e.value);
      out.radius_sector = e.sector;
      out.leading = e.value;
    }
  }
  out.gamma_g = -std::log(out.spectral_radius);
  return out;
}

/// Mode map: k..., k'..., weight_re, weight_im, retained.
inline void write_mode_map_csv(std::ostream& os, const GtoOperator& g) {
  const char* axes = "xyz";
  for (int a = 0; a < g.dim(); ++a) os << 'k' << axes[a] << ',';
  for (int a = 0; a < g.dim(); ++a) os << "kp" << axes[a] << ',';
  os << "weight_re,weight_im,retained\n";
  os.precision(17);
  for (const auto& m : g.mode_map) {
    for (int a = 0; a < g.dim(); ++a) os << m.source[static_cast<std::size_t>(a)] << ',';
    for (int a = 0; a < g.dim(); ++a) os << m.image[static_cast<std::size_t>(a)] << ',';
    os << m.weight.real() << ',' << m.weight.imag() << ',' << (m.retained ? 1 : 0) << '\n';
  }
}

}  // namespace susyflow
