#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "susyflow/mesh.hpp"
#include "susyflow/operator.hpp"
#include "susyflow/vfparse.hpp"

namespace susyflow {

/// Inhomogeneous differential form on a torus mesh.
///
/// Coefficients are stored once per increasing multi-index: degree blocks
/// 0..D in order (full algebra) or a single degree block, each block laid
/// out mask-major in ascending mask order.
class FormField {
 public:
  FormField() = default;

  static FormField zeros(const TorusMesh& mesh, int degree) {
    if (degree < 0 || degree > mesh.dim)
      throw Error(ErrorCode::DegreeOverflow, "degree " + std::to_string(degree) + " on D=" + std::to_string(mesh.dim));
    FormField f;
    f.mesh_ = mesh;
    f.degree_ = degree;
    f.masks_ = masks_of_degree(mesh.dim, degree);
    f.coeffs_ = CVector::Zero(static_cast<Eigen::Index>(f.masks_.size() * mesh.n_grid));
    return f;
  }

  static FormField zeros_full(const TorusMesh& mesh) {
    FormField f;
    f.mesh_ = mesh;
    f.degree_ = -1;
    for (int k = 0; k <= mesh.dim; ++k)
      for (GhostMask m : masks_of_degree(mesh.dim, k)) f.masks_.push_back(m);
    f.coeffs_ = CVector::Zero(static_cast<Eigen::Index>(f.masks_.size() * mesh.n_grid));
    return f;
  }

  static FormField from_block(const TorusMesh& mesh, int degree, const CVector& block) {
    FormField f = zeros(mesh, degree);
    if (block.size() != f.coeffs_.size())
      throw Error(ErrorCode::DimensionMismatch, "block size " + std::to_string(block.size()));
    f.coeffs_ = block;
    return f;
  }

  /// Single-mask form with coefficient fn(x) sampled at the mask's staggered points.
  static FormField from_function(const TorusMesh& mesh, GhostMask mask,
                                 const std::function<Complex(const std::array<double, 3>&)>& fn) {
    FormField f = zeros(mesh, ghost_degree(mask));
    for (std::size_t p = 0; p < mesh.n_grid; ++p) f.at(mask, p) = fn(mesh.point(p, mask));
    return f;
  }

  const TorusMesh& mesh() const { return mesh_; }
  bool is_full() const { return degree_ < 0; }
  int degree() const { return degree_; }
  const std::vector<GhostMask>& masks() const { return masks_; }
  CVector& coeffs() { return coeffs_; }
  const CVector& coeffs() const { return coeffs_; }

  bool has_mask(GhostMask m) const { return std::find(masks_.begin(), masks_.end(), m) != masks_.end(); }

  std::size_t offset(GhostMask m) const {
    const auto it = std::find(masks_.begin(), masks_.end(), m);
    if (it == masks_.end()) throw Error(ErrorCode::DegreeOverflow, "mask not stored in this form");
    return static_cast<std::size_t>(it - masks_.begin()) * mesh_.n_grid;
  }

  Complex& at(GhostMask m, std::size_t p) { return coeffs_[static_cast<Eigen::Index>(offset(m) + p)]; }
  Complex at(GhostMask m, std::size_t p) const { return coeffs_[static_cast<Eigen::Index>(offset(m) + p)]; }

  /// Coefficients of the degree-k block (zeros when not stored).
  CVector degree_block(int k) const {
    const auto size = static_cast<Eigen::Index>(binomial(mesh_.dim, k) * mesh_.n_grid);
    if (!is_full()) return k == degree_ ? coeffs_ : CVector::Zero(size);
    std::size_t start = 0;
    for (int j = 0; j < k; ++j) start += binomial(mesh_.dim, j) * mesh_.n_grid;
    return coeffs_.segment(static_cast<Eigen::Index>(start), size);
  }

  void set_degree_block(int k, const CVector& v) {
    if (!is_full()) {
      if (k != degree_) throw Error(ErrorCode::DegreeOverflow, "form stores only degree " + std::to_string(degree_));
      coeffs_ = v;
      return;
    }
    std::size_t start = 0;
    for (int j = 0; j < k; ++j) start += binomial(mesh_.dim, j) * mesh_.n_grid;
    coeffs_.segment(static_cast<Eigen::Index>(start), v.size()) = v;
  }

  /// Degree if exactly one degree block carries nonzero coefficients; -1 otherwise.
  int effective_degree() const {
    if (!is_full()) return degree_;
    int found = -1;
    for (int k = 0; k <= mesh_.dim; ++k) {
      if (degree_block(k).cwiseAbs().maxCoeff() > 0.0) {
        if (found >= 0) return -1;
        found = k;
      }
    }
    return found;
  }

  /// Flat inner product (prod h) * sum conj(a) b.
  Complex inner(const FormField& o) const {
    if (!(mesh_ == o.mesh_)) throw Error(ErrorCode::MeshMismatch, "inner product across meshes");
    Complex s = 0.0;
    for (GhostMask m : masks_) {
      if (!o.has_mask(m)) continue;
      const auto a = coeffs_.segment(static_cast<Eigen::Index>(offset(m)), static_cast<Eigen::Index>(mesh_.n_grid));
      const auto b = o.coeffs_.segment(static_cast<Eigen::Index>(o.offset(m)), static_cast<Eigen::Index>(mesh_.n_grid));
      s += a.dot(b);
    }
    return s * mesh_.cell_volume();
  }

 private:
  TorusMesh mesh_;
  int degree_ = 0;
  std::vector<GhostMask> masks_;
  CVector coeffs_;
};

/// Test hook: negate the contribution of one (operator, source mask, axis)
/// term. Used by the mutation checks.
struct SignFlip {
  OpTag op = OpTag::D;
  GhostMask mask = 0;
  int axis = 0;
};

struct AssemblyOptions {
  std::vector<double> axis_weights;  ///< per-axis factors on d (empty = 1)
  std::optional<SignFlip> flip;
};

namespace detail {

inline double flip_factor(const AssemblyOptions& opt, OpTag op, GhostMask mask, int axis) {
  if (opt.flip && opt.flip->op == op && opt.flip->mask == mask && opt.flip->axis == axis) return -1.0;
  return 1.0;
}

inline void add_block(std::vector<Eigen::Triplet<double>>& out, const SparseReal& block, std::size_t row0,
                      std::size_t col0, double scale) {
  for (int c = 0; c < block.outerSize(); ++c)
    for (SparseReal::InnerIterator it(block, c); it; ++it)
      out.emplace_back(static_cast<int>(row0 + static_cast<std::size_t>(it.row())),
                       static_cast<int>(col0 + static_cast<std::size_t>(it.col())), scale * it.value());
}

inline SectorOperator empty_operator(const TorusMesh& mesh, OpTag tag, int source_degree, int target_degree) {
  SectorOperator op;
  op.tag = tag;
  op.source_degree = source_degree;
  op.target_degree = target_degree;
  op.source_masks = masks_of_degree(mesh.dim, source_degree);
  if (target_degree >= 0 && target_degree <= mesh.dim) op.target_masks = masks_of_degree(mesh.dim, target_degree);
  const auto rows = static_cast<Eigen::Index>(op.target_masks.size() * mesh.n_grid);
  const auto cols = static_cast<Eigen::Index>(op.source_masks.size() * mesh.n_grid);
  op.matrix.resize(rows, cols);
  return op;
}

}  // namespace detail

/// Exterior derivative d_k : Omega^k -> Omega^{k+1}, from staggered
/// differences. Inserting axis i into sector S carries slot_sign(S, i).
inline OperatorFamily build_d(const TorusMesh& mesh, const AssemblyOptions& opt = {}) {
  std::vector<SparseReal> diff;
  for (int a = 0; a < mesh.dim; ++a) diff.push_back(staggered_difference(mesh, a));
  OperatorFamily family;
  for (int k = 0; k <= mesh.dim; ++k) {
    SectorOperator op = detail::empty_operator(mesh, OpTag::D, k, k + 1);
    if (k < mesh.dim) {
      std::vector<Eigen::Triplet<double>> entries;
      for (std::size_t cs = 0; cs < op.source_masks.size(); ++cs) {
        const GhostMask s = op.source_masks[cs];
        for (int a = 0; a < mesh.dim; ++a) {
          if (has_axis(s, a)) continue;
          const GhostMask t = s | (1u << a);
          const std::size_t rs = mask_slot(mesh.dim, t);
          double w = opt.axis_weights.empty() ? 1.0 : opt.axis_weights[static_cast<std::size_t>(a)];
          w *= slot_sign(s, a) * detail::flip_factor(opt, OpTag::D, s, a);
          detail::add_block(entries, diff[static_cast<std::size_t>(a)], rs * mesh.n_grid, cs * mesh.n_grid, w);
        }
      }
      op.matrix.setFromTriplets(entries.begin(), entries.end());
      op.matrix.prune(0.0);
    }
    family.push_back(std::move(op));
  }
  return family;
}

/// Codifferential d^dagger_k : Omega^k -> Omega^{k-1}, the adjoint of d_{k-1}
/// under the flat pairing; with weights, axis i carries e_i^2.
inline OperatorFamily build_codiff(const TorusMesh& mesh, std::span<const double> vielbein = {},
                                  const AssemblyOptions& base = {}) {
  AssemblyOptions opt;
  opt.flip = base.flip;
  for (double e : vielbein) opt.axis_weights.push_back(e * e);
  const OperatorFamily d = build_d(mesh, opt);
  OperatorFamily family;
  for (int k = 0; k <= mesh.dim; ++k) {
    SectorOperator op = detail::empty_operator(mesh, OpTag::Codiff, k, k - 1);
    if (k > 0) op.matrix = d[static_cast<std::size_t>(k - 1)].matrix.transpose();
    family.push_back(std::move(op));
  }
  return family;
}

/// Interior multiplication iota_F : Omega^k -> Omega^{k-1}. The contracted
/// axis is interpolated back from the midpoints, and F^i is sampled at the
/// target sector's points.
inline OperatorFamily build_interior(const TorusMesh& mesh, const FlowSpec& flow, const AssemblyOptions& opt = {}) {
  if (flow.dim() != mesh.dim)
    throw Error(ErrorCode::DimensionMismatch,
                "flow has " + std::to_string(flow.dim()) + " components, mesh D=" + std::to_string(mesh.dim));
  std::vector<SparseReal> avg;
  for (int a = 0; a < mesh.dim; ++a) avg.push_back(midpoint_average(mesh, a));

  // F^a sampled on the points of every target mask.
  std::vector<std::vector<Eigen::VectorXd>> coeff(std::size_t{1} << mesh.dim);
  for (GhostMask m = 0; m < (1u << mesh.dim); ++m) {
    for (int a = 0; a < mesh.dim; ++a) {
      Eigen::VectorXd f(static_cast<Eigen::Index>(mesh.n_grid));
      for (std::size_t p = 0; p < mesh.n_grid; ++p) {
        const auto x = mesh.point(p, m);
        f[static_cast<Eigen::Index>(p)] = flow.eval(a, std::span<const double>(x.data(), static_cast<std::size_t>(mesh.dim)));
      }
      coeff[m].push_back(std::move(f));
    }
  }

  OperatorFamily family;
  for (int k = 0; k <= mesh.dim; ++k) {
    SectorOperator op = detail::empty_operator(mesh, OpTag::Interior, k, k - 1);
    if (k > 0) {
      std::vector<Eigen::Triplet<double>> entries;
      for (std::size_t cs = 0; cs < op.source_masks.size(); ++cs) {
        const GhostMask s = op.source_masks[cs];
        for (int a = 0; a < mesh.dim; ++a) {
          if (!has_axis(s, a)) continue;
          const GhostMask t = s & ~(1u << a);
          const std::size_t rs = mask_slot(mesh.dim, t);
          const double sign = slot_sign(s, a) * detail::flip_factor(opt, OpTag::Interior, s, a);
          const Eigen::VectorXd& f = coeff[t][static_cast<std::size_t>(a)];
          const SparseReal& A = avg[static_cast<std::size_t>(a)];
          for (int c = 0; c < A.outerSize(); ++c)
            for (SparseReal::InnerIterator it(A, c); it; ++it) {
              const double v = sign * f[it.row()] * it.value();
              if (v != 0.0)
                entries.emplace_back(static_cast<int>(rs * mesh.n_grid + static_cast<std::size_t>(it.row())),
                                     static_cast<int>(cs * mesh.n_grid + static_cast<std::size_t>(it.col())), v);
            }
        }
      }
      op.matrix.setFromTriplets(entries.begin(), entries.end());
      op.matrix.prune(0.0);
    }
    family.push_back(std::move(op));
  }
  return family;
}

/// Applies the family member matching each stored degree block.
inline FormField apply(const OperatorFamily& family, const FormField& form) {
  const TorusMesh& mesh = form.mesh();
  if (form.is_full()) {
    FormField out = FormField::zeros_full(mesh);
    for (int k = 0; k <= mesh.dim; ++k) {
      const SectorOperator& op = family[static_cast<std::size_t>(k)];
      if (op.target_degree < 0 || op.target_degree > mesh.dim || op.empty()) continue;
      out.set_degree_block(op.target_degree, out.degree_block(op.target_degree) + susyflow::apply(op, form.degree_block(k)));
    }
    return out;
  }
  const SectorOperator& op = family[static_cast<std::size_t>(form.degree())];
  if (op.target_degree < 0 || op.target_degree > mesh.dim)
    return FormField::zeros(mesh, std::clamp(op.target_degree, 0, mesh.dim));
  return FormField::from_block(mesh, op.target_degree, susyflow::apply(op, form.coeffs()));
}

/// Pointwise graded product of a p-form and a q-form.
inline FormField wedge(const FormField& alpha, const FormField& beta) {
  if (!(alpha.mesh() == beta.mesh())) throw Error(ErrorCode::MeshMismatch, "wedge across meshes");
  const TorusMesh& mesh = alpha.mesh();
  const int p = alpha.effective_degree();
  const int q = beta.effective_degree();
  if (p < 0 || q < 0) throw Error(ErrorCode::DegreeOverflow, "wedge needs homogeneous forms");
  if (p + q > mesh.dim)
    throw Error(ErrorCode::DegreeOverflow, std::to_string(p) + "+" + std::to_string(q) + " > D=" + std::to_string(mesh.dim));
  FormField out = FormField::zeros(mesh, p + q);
  for (GhostMask s : masks_of_degree(mesh.dim, p))
    for (GhostMask t : masks_of_degree(mesh.dim, q)) {
      const double sign = merge_sign(s, t);
      if (sign == 0.0) continue;
      for (std::size_t i = 0; i < mesh.n_grid; ++i) out.at(s | t, i) += sign * alpha.at(s, i) * beta.at(t, i);
    }
  return out;
}

/// (prod h) * sum of the top-sector coefficient.
inline Complex integrate_top(const FormField& omega) {
  const TorusMesh& mesh = omega.mesh();
  bool top_only = omega.is_full() || omega.degree() == mesh.dim;
  if (omega.is_full())
    for (int k = 0; k < mesh.dim; ++k)
      if (omega.degree_block(k).cwiseAbs().maxCoeff() > 0.0) top_only = false;
  if (!top_only) throw Error(ErrorCode::NotTopDegree, "form has components below degree D=" + std::to_string(mesh.dim));
  const GhostMask top = (1u << mesh.dim) - 1u;
  Complex s = 0.0;
  for (std::size_t p = 0; p < mesh.n_grid; ++p) s += omega.at(top, p);
  return s * mesh.cell_volume();
}

/// Periodic Gaussian of unit mass on [0, 2pi).
inline double wrapped_gaussian(double x, double center, double width) {
  double s = 0.0;
  for (int m = -4; m <= 4; ++m) {
    const double u = x - center + two_pi * m;
    s += std::exp(-0.5 * u * u / (width * width));
  }
  return s / (std::sqrt(two_pi) * width);
}

/// Mollified Poincare dual of the cycle spanned by `axes` through
/// `position` (one value per transverse axis, ascending axis order).
inline FormField init_poincare_dual(const TorusMesh& mesh, std::span<const int> axes, std::span<const double> position,
                                    double width) {
  GhostMask along = 0;
  for (int a : axes) {
    if (a < 0 || a >= mesh.dim) throw Error(ErrorCode::AxisOutOfRange, "axis " + std::to_string(a));
    along |= 1u << a;
  }
  const GhostMask transverse = ((1u << mesh.dim) - 1u) & ~along;
  if (static_cast<int>(position.size()) != ghost_degree(transverse))
    throw Error(ErrorCode::DimensionMismatch, "need one position per transverse axis");
  if (!(width >= 2.0 * mesh.h_max()))
    throw Error(ErrorCode::WidthTooNarrow, "width " + std::to_string(width) + " < 2 h_max");
  std::vector<int> trans_axes;
  for (int a = 0; a < mesh.dim; ++a)
    if (has_axis(transverse, a)) trans_axes.push_back(a);
  return FormField::from_function(mesh, transverse, [&](const std::array<double, 3>& x) {
    double v = 1.0;
    for (std::size_t i = 0; i < trans_axes.size(); ++i)
      v *= wrapped_gaussian(x[static_cast<std::size_t>(trans_axes[i])], position[i], width);
    return Complex(v, 0.0);
  });
}

/// Realizes a degree-k coefficient block as a (D-k)-form by complementary
/// masks, signed so that integrate_top(wedge(result, beta)) equals
/// (prod h) * sum(block * beta) for every degree-k beta.
inline FormField complement_realization(const TorusMesh& mesh, int degree, const CVector& block) {
  const GhostMask full = (1u << mesh.dim) - 1u;
  FormField out = FormField::zeros(mesh, mesh.dim - degree);
  const auto masks = masks_of_degree(mesh.dim, degree);
  for (std::size_t slot = 0; slot < masks.size(); ++slot) {
    const GhostMask s = masks[slot];
    const double sign = merge_sign(full & ~s, s);
    for (std::size_t p = 0; p < mesh.n_grid; ++p)
      out.at(full & ~s, p) = sign * block[static_cast<Eigen::Index>(slot * mesh.n_grid + p)];
  }
  return out;
}

/// CSV rows: sector_bitmask, grid multi-index..., re, im.
inline void write_form_csv(std::ostream& os, const FormField& f) {
  const TorusMesh& mesh = f.mesh();
  os << "sector_bitmask";
  for (int a = 0; a < mesh.dim; ++a) os << ",i" << a;
  os << ",re,im\n";
  os.precision(17);
  for (GhostMask m : f.masks())
    for (std::size_t p = 0; p < mesh.n_grid; ++p) {
      const auto mi = mesh.multi_index(p);
      os << m;
      for (int a = 0; a < mesh.dim; ++a) os << ',' << mi[a];
      const Complex c = f.at(m, p);
      os << ',' << c.real() << ',' << c.imag() << '\n';
    }
}

}  // namespace susyflow
