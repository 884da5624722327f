#pragma once

#include <complex>
#include <cstddef>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "susyflow/ghost.hpp"

namespace susyflow {

using Complex = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;

enum class OpTag { Derivative, D, Codiff, Interior, Current, Hamiltonian, Gto, FourierD };

constexpr std::string_view op_tag_name(OpTag t) {
  switch (t) {
    case OpTag::Derivative: return "derivative";
    case OpTag::D: return "d";
    case OpTag::Codiff: return "codiff";
    case OpTag::Interior: return "interior";
    case OpTag::Current: return "j";
    case OpTag::Hamiltonian: return "H";
    case OpTag::Gto: return "gto";
    case OpTag::FourierD: return "fourier_d";
  }
  return "?";
}

/// Sparse block acting from one ghost degree to another. Rows follow
/// `target_masks` (ascending) times the grid, columns likewise for the source.
template <class Scalar>
struct SectorOperatorT {
  OpTag tag = OpTag::D;
  int source_degree = 0;
  int target_degree = 0;
  std::vector<GhostMask> source_masks;
  std::vector<GhostMask> target_masks;
  Eigen::SparseMatrix<Scalar> matrix;

  Eigen::Index rows() const { return matrix.rows(); }
  Eigen::Index cols() const { return matrix.cols(); }
  bool empty() const { return matrix.rows() == 0 || matrix.cols() == 0; }
};

using SectorOperator = SectorOperatorT<double>;

/// Indexed by source degree 0..D. Entries whose target degree falls outside
/// 0..D have zero rows.
///
/// A thin wrapper rather than a std::vector alias so that unqualified
/// apply(family, form) does not find std::apply through ADL.
template <class Scalar>
class OperatorFamilyT {
 public:
  using value_type = SectorOperatorT<Scalar>;

  OperatorFamilyT() = default;
  explicit OperatorFamilyT(std::size_t n) : ops_(n) {}

  value_type& operator[](std::size_t i) { return ops_[i]; }
  const value_type& operator[](std::size_t i) const { return ops_[i]; }
  std::size_t size() const { return ops_.size(); }
  bool empty() const { return ops_.empty(); }
  void reserve(std::size_t n) { ops_.reserve(n); }
  void resize(std::size_t n) { ops_.resize(n); }
  void push_back(value_type op) { ops_.push_back(std::move(op)); }
  value_type& back() { return ops_.back(); }
  const value_type& back() const { return ops_.back(); }
  auto begin() { return ops_.begin(); }
  auto end() { return ops_.end(); }
  auto begin() const { return ops_.begin(); }
  auto end() const { return ops_.end(); }

 private:
  std::vector<value_type> ops_;
};
using OperatorFamily = OperatorFamilyT<double>;

/// y = A x for a real sparse A and complex x.
inline CVector apply(const Eigen::SparseMatrix<double>& a, const CVector& x) {
  CVector y(a.rows());
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor>> xr(
      reinterpret_cast<const double*>(x.data()), x.size(), 2);
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor>> yr(reinterpret_cast<double*>(y.data()),
                                                                           y.size(), 2);
  yr.noalias() = a * xr;
  return y;
}

inline CVector apply(const Eigen::SparseMatrix<Complex>& a, const CVector& x) { return a * x; }

template <class Scalar>
CVector apply(const SectorOperatorT<Scalar>& op, const CVector& x) {
  if (op.empty()) return CVector::Zero(op.rows());
  return susyflow::apply(op.matrix, x);
}

/// Relative operator-norm estimate of `residual(v)` against ||v||, maximized
/// over `samples` random vectors with a fixed seed.
template <class Fn>
double random_probe_norm(Eigen::Index dim, Fn&& residual, int samples = 20, unsigned seed = 12345) {
  std::srand(seed);
  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    CVector v = CVector::Random(dim);
    const double nv = v.norm();
    if (nv == 0.0) continue;
    worst = std::max(worst, residual(v) / nv);
  }
  return worst;
}

/// Power-iteration estimate of ||A||_2 (iterations on A^T A).
inline double norm_estimate(const Eigen::SparseMatrix<double>& a, int iterations = 20) {
  if (a.rows() == 0 || a.cols() == 0) return 0.0;
  Eigen::VectorXd v = Eigen::VectorXd::Ones(a.cols());
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] += 0.37 * std::sin(1.3 * static_cast<double>(i));
  v.normalize();
  double est = 0.0;
  for (int it = 0; it < iterations; ++it) {
    Eigen::VectorXd w = a.transpose() * (a * v);
    const double nw = w.norm();
    if (nw == 0.0) return 0.0;
    est = std::sqrt(nw);
    v = w / nw;
  }
  return est;
}

inline double norm_estimate(const Eigen::SparseMatrix<Complex>& a, int iterations = 20) {
  if (a.rows() == 0 || a.cols() == 0) return 0.0;
  CVector v = CVector::Ones(a.cols());
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] += Complex(0.37 * std::sin(1.3 * static_cast<double>(i)), 0.11);
  v.normalize();
  double est = 0.0;
  for (int it = 0; it < iterations; ++it) {
    CVector w = a.adjoint() * (a * v);
    const double nw = w.norm();
    if (nw == 0.0) return 0.0;
    est = std::sqrt(nw);
    v = w / nw;
  }
  return est;
}

}  // namespace susyflow
