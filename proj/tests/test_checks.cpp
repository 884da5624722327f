#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "susyflow/checks.hpp"

using namespace susyflow;

TEST_CASE("fast invariant suite passes on the unmodified operators") {
  const auto rows = run_checks({});
  CHECK(rows.size() >= 10);
  for (const auto& r : rows) {
    INFO(r.name << " measured " << r.measured << " threshold " << r.threshold << " " << r.detail);
    CHECK(r.pass);
  }
  CHECK(all_passed(rows));
  std::ostringstream os;
  print_check_table(os, rows);
  CHECK(os.str().find("PASS") != std::string::npos);
}

TEST_CASE("single sign flips are caught") {
  const std::vector<SignFlip> flips{{OpTag::D, 0b000, 0}, {OpTag::D, 0b010, 2}, {OpTag::D, 0b001, 1},
                                    {OpTag::Interior, 0b011, 0}, {OpTag::Interior, 0b111, 2}, {OpTag::Interior, 0b100, 2}};
  for (const auto& f : flips) {
    CheckOptions o;
    o.flip = f;
    INFO("op " << op_tag_name(f.op) << " mask " << f.mask << " axis " << f.axis);
    CHECK_FALSE(all_passed(run_checks(o)));
  }
}

TEST_CASE("drift symbol helper agrees with direct evaluation") {
  // order 2 on n = 16: (T/2) 2(1 - cos th)/h^2 + i v sin th / h
  const double h = two_pi / 16;
  for (int m : {0, 1, 5, 8}) {
    const Complex want(0.25 * 2.0 * (1.0 - std::cos(m * h)) / (h * h), 1.5 * std::sin(m * h) / h);
    CHECK(std::abs(drift_symbol(2, 16, 1.5, 0.5, m) - want) < 1e-12);
  }
}
