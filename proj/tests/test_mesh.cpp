#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "susyflow/mesh.hpp"

using namespace susyflow;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

Eigen::VectorXd sample(const TorusMesh& m, double (*f)(double), double shift = 0.0) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(m.n_grid));
  for (std::size_t p = 0; p < m.n_grid; ++p) v[static_cast<Eigen::Index>(p)] = f(m.point(p)[0] + shift);
  return v;
}

}  // namespace

TEST_CASE("mesh construction rejects invalid input") {
  CHECK_THROWS_AS(build_mesh(4, {8, 8, 8, 8}), Error);
  try {
    build_mesh(1, {7});
    FAIL("coarse grid accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::GridTooCoarse);
  }
  try {
    build_mesh(1, {16}, 3);
    FAIL("order 3 accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::BadStencilOrder);
  }
  try {
    build_mesh(2, {16});
    FAIL("count mismatch accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DimensionUnsupported);
  }
  const auto m = build_mesh(2, {8, 10});
  try {
    derivative_matrix(m, 2);
    FAIL("axis 2 accepted for D=2");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::AxisOutOfRange);
  }
}

TEST_CASE("index maps are mutually inverse and periodic") {
  const auto m = build_mesh(3, {8, 9, 10});
  CHECK(m.n_grid == 720);
  for (std::size_t p = 0; p < m.n_grid; p += 7) CHECK(m.linear_index(m.multi_index(p)) == p);
  const auto p = m.linear_index({7, 8, 9});
  CHECK(m.shifted(p, 0, 1) == m.linear_index({0, 8, 9}));
  CHECK(m.shifted(p, 2, -10) == p);
  CHECK_THAT(m.point(0, 0b010)[1], WithinAbs(0.5 * two_pi / 9, 1e-15));
  CHECK_THAT(m.cell_volume(), WithinRel(std::pow(two_pi, 3) / 720, 1e-14));
}

TEST_CASE("centered derivative is antisymmetric with the expected modified wavenumber") {
  for (int order : {2, 4}) {
    const auto m = build_mesh(1, {32}, order);
    const SparseReal d = derivative_matrix(m, 0);
    const SparseReal sum = SparseReal(d) + SparseReal(d.transpose());
    CHECK(sum.norm() < 1e-12);
    const double h = m.h[0];
    for (int k : {1, 3, 7}) {
      // D e^{ikx} = i kappa(k) e^{ikx}
      const double kappa = order == 2 ? std::sin(k * h) / h : (8 * std::sin(k * h) - std::sin(2 * k * h)) / (6 * h);
      Eigen::VectorXd s(32), c(32);
      for (int j = 0; j < 32; ++j) {
        s[j] = std::sin(k * j * h);
        c[j] = std::cos(k * j * h);
      }
      CHECK((d * s - kappa * c).norm() < 1e-12 * std::sqrt(32.0));
    }
  }
}

TEST_CASE("fourth-order stencils converge at fourth order") {
  double prev_c = 0.0, prev_s = 0.0;
  for (int n : {16, 32, 64}) {
    const auto m = build_mesh(1, {n}, 4);
    const double ec = (derivative_matrix(m, 0) * sample(m, [](double x) { return std::sin(x); }) -
                       sample(m, [](double x) { return std::cos(x); }))
                          .lpNorm<Eigen::Infinity>();
    const double es = (staggered_difference(m, 0) * sample(m, [](double x) { return std::sin(x); }) -
                       sample(m, [](double x) { return std::cos(x); }, 0.5 * m.h[0]))
                          .lpNorm<Eigen::Infinity>();
    if (prev_c > 0.0) {
      CHECK(prev_c / ec > 14.0);
      CHECK(prev_s / es > 14.0);
    }
    prev_c = ec;
    prev_s = es;
  }
}

TEST_CASE("second-order average of the staggered difference equals the centered derivative") {
  const auto m = build_mesh(2, {10, 12}, 2);
  for (int a = 0; a < 2; ++a) {
    const SparseReal diff = SparseReal(midpoint_average(m, a) * staggered_difference(m, a)) - derivative_matrix(m, a);
    CHECK(diff.norm() < 1e-12);
  }
}

TEST_CASE("midpoint average interpolates smooth data") {
  const auto m = build_mesh(1, {64}, 4);
  // samples at x_j + h/2 mapped back to x_j
  const Eigen::VectorXd mid = sample(m, [](double x) { return std::cos(2 * x); }, 0.5 * m.h[0]);
  const Eigen::VectorXd err = midpoint_average(m, 0) * mid - sample(m, [](double x) { return std::cos(2 * x); });
  CHECK(err.lpNorm<Eigen::Infinity>() < 1e-4);
}
