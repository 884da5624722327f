#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/SparseCore>

#include "susyflow/error.hpp"
#include "susyflow/ghost.hpp"

namespace susyflow {

using SparseReal = Eigen::SparseMatrix<double>;

inline constexpr double two_pi = 2.0 * std::numbers::pi;

/// Uniform periodic grid on the flat torus T^D, D <= 3.
///
/// Grid points sit at x_j = j*h. Storage is axis-0-fastest. A ghost sector
/// S lives on the points shifted by h_i/2 along every axis i in S (cochain
/// staggering), see `point`.
struct TorusMesh {
  int dim = 1;
  std::array<int, 3> n{1, 1, 1};
  std::array<double, 3> h{two_pi, two_pi, two_pi};
  int stencil_order = 4;
  std::size_t n_grid = 1;

  std::array<int, 3> multi_index(std::size_t p) const {
    std::array<int, 3> m{0, 0, 0};
    for (int a = 0; a < dim; ++a) {
      m[a] = static_cast<int>(p % static_cast<std::size_t>(n[a]));
      p /= static_cast<std::size_t>(n[a]);
    }
    return m;
  }

  std::size_t linear_index(const std::array<int, 3>& m) const {
    std::size_t p = 0;
    for (int a = dim - 1; a >= 0; --a) {
      const int w = ((m[a] % n[a]) + n[a]) % n[a];
      p = p * static_cast<std::size_t>(n[a]) + static_cast<std::size_t>(w);
    }
    return p;
  }

  /// Index of the point reached by moving `offset` cells along `axis`.
  std::size_t shifted(std::size_t p, int axis, int offset) const {
    auto m = multi_index(p);
    m[axis] += offset;
    return linear_index(m);
  }

  /// Physical coordinates of grid point p for storage in sector `mask`.
  std::array<double, 3> point(std::size_t p, GhostMask mask = 0) const {
    const auto m = multi_index(p);
    std::array<double, 3> x{0.0, 0.0, 0.0};
    for (int a = 0; a < dim; ++a) x[a] = (m[a] + (has_axis(mask, a) ? 0.5 : 0.0)) * h[a];
    return x;
  }

  double cell_volume() const {
    double v = 1.0;
    for (int a = 0; a < dim; ++a) v *= h[a];
    return v;
  }

  double h_max() const {
    double m = 0.0;
    for (int a = 0; a < dim; ++a) m = std::max(m, h[a]);
    return m;
  }

  bool operator==(const TorusMesh& o) const {
    if (dim != o.dim || stencil_order != o.stencil_order) return false;
    for (int a = 0; a < dim; ++a)
      if (n[a] != o.n[a]) return false;
    return true;
  }
};

inline TorusMesh build_mesh(int dim, std::span<const int> n, int stencil_order = 4) {
  if (dim < 1 || dim > 3)
    throw Error(ErrorCode::DimensionUnsupported, "D=" + std::to_string(dim) + " (supported: 1, 2, 3)");
  if (static_cast<int>(n.size()) != dim)
    throw Error(ErrorCode::DimensionUnsupported,
                "expected " + std::to_string(dim) + " per-axis counts, got " + std::to_string(n.size()));
  if (stencil_order != 2 && stencil_order != 4)
    throw Error(ErrorCode::BadStencilOrder, "stencil_order=" + std::to_string(stencil_order));
  TorusMesh mesh;
  mesh.dim = dim;
  mesh.stencil_order = stencil_order;
  mesh.n_grid = 1;
  for (int a = 0; a < dim; ++a) {
    if (n[a] < 8)
      throw Error(ErrorCode::GridTooCoarse,
                  "n[" + std::to_string(a) + "]=" + std::to_string(n[a]) + " (minimum 8)");
    mesh.n[a] = n[a];
    mesh.h[a] = two_pi / n[a];
    mesh.n_grid *= static_cast<std::size_t>(n[a]);
  }
  return mesh;
}

inline TorusMesh build_mesh(int dim, std::initializer_list<int> n, int stencil_order = 4) {
  const std::vector<int> v(n);
  return build_mesh(dim, std::span<const int>(v), stencil_order);
}

using StencilTaps = std::vector<std::pair<int, double>>;

/// (M f)_p = sum_o c_o f_{p + o e_axis} with periodic wraparound.
inline SparseReal axis_circulant(const TorusMesh& mesh, int axis, const StencilTaps& taps) {
  if (axis < 0 || axis >= mesh.dim)
    throw Error(ErrorCode::AxisOutOfRange, "axis=" + std::to_string(axis) + ", D=" + std::to_string(mesh.dim));
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(mesh.n_grid * taps.size());
  for (std::size_t p = 0; p < mesh.n_grid; ++p)
    for (const auto& [offset, c] : taps)
      entries.emplace_back(static_cast<int>(p), static_cast<int>(mesh.shifted(p, axis, offset)), c);
  SparseReal m(static_cast<Eigen::Index>(mesh.n_grid), static_cast<Eigen::Index>(mesh.n_grid));
  m.setFromTriplets(entries.begin(), entries.end());
  m.prune(0.0);
  return m;
}

/// Centered collocated derivative (antisymmetric circulant).
inline StencilTaps centered_taps(int order, double h) {
  if (order == 2) return {{-1, -0.5 / h}, {1, 0.5 / h}};
  return {{-2, 1.0 / (12 * h)}, {-1, -8.0 / (12 * h)}, {1, 8.0 / (12 * h)}, {2, -1.0 / (12 * h)}};
}

/// Point-to-midpoint difference: value at x_j + h/2 from point samples.
inline StencilTaps staggered_difference_taps(int order, double h) {
  if (order == 2) return {{0, -1.0 / h}, {1, 1.0 / h}};
  return {{-1, 1.0 / (24 * h)}, {0, -27.0 / (24 * h)}, {1, 27.0 / (24 * h)}, {2, -1.0 / (24 * h)}};
}

/// Midpoint-to-point interpolation: value at x_j from samples at x_i + h/2.
inline StencilTaps midpoint_average_taps(int order) {
  if (order == 2) return {{-1, 0.5}, {0, 0.5}};
  return {{-2, -1.0 / 16}, {-1, 9.0 / 16}, {0, 9.0 / 16}, {1, -1.0 / 16}};
}

inline SparseReal derivative_matrix(const TorusMesh& mesh, int axis) {
  if (axis < 0 || axis >= mesh.dim)
    throw Error(ErrorCode::AxisOutOfRange, "axis=" + std::to_string(axis) + ", D=" + std::to_string(mesh.dim));
  return axis_circulant(mesh, axis, centered_taps(mesh.stencil_order, mesh.h[axis]));
}

inline SparseReal staggered_difference(const TorusMesh& mesh, int axis) {
  if (axis < 0 || axis >= mesh.dim)
    throw Error(ErrorCode::AxisOutOfRange, "axis=" + std::to_string(axis) + ", D=" + std::to_string(mesh.dim));
  return axis_circulant(mesh, axis, staggered_difference_taps(mesh.stencil_order, mesh.h[axis]));
}

inline SparseReal midpoint_average(const TorusMesh& mesh, int axis) {
  if (axis < 0 || axis >= mesh.dim)
    throw Error(ErrorCode::AxisOutOfRange, "axis=" + std::to_string(axis) + ", D=" + std::to_string(mesh.dim));
  return axis_circulant(mesh, axis, midpoint_average_taps(mesh.stencil_order));
}

}  // namespace susyflow
