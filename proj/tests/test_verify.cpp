#include <doctest.h>

#include <set>

#include "xtl/verify.hpp"

using namespace xtl;

TEST_CASE("gradcheck passes for every loss case on three seeds") {
  GradCheckOptions opts;  // widths {8,8,8}, seeds {1,2,3}, tol 1e-4
  const auto rows = run_gradcheck(opts);
  REQUIRE(rows.size() == 12);
  std::set<std::string> names;
  std::set<std::uint64_t> seeds;
  for (const auto& row : rows) {
    INFO(row.case_name, " seed ", row.seed, " err ", row.max_rel_err, " at ",
         row.worst_param);
    CHECK(row.pass);
    CHECK(row.max_rel_err < opts.tolerance);
    names.insert(row.case_name);
    seeds.insert(row.seed);
  }
  CHECK(names == std::set<std::string>{"label_loss", "cross_triplet(full)",
                                       "cross_triplet(full,literal)", "total_loss"});
  CHECK(seeds == std::set<std::uint64_t>{1, 2, 3});
  CHECK(gradcheck_passed(rows));
}

TEST_CASE("corrupted analytic gradients are caught") {
  GradCheckOptions opts;
  opts.seeds = {1};
  opts.corrupt = true;
  const auto rows = run_gradcheck(opts);
  CHECK_FALSE(gradcheck_passed(rows));
  bool named = false;
  for (const auto& row : rows) {
    if (!row.pass) named = !row.worst_param.empty();
  }
  CHECK(named);
}

TEST_CASE("gradcheck respects custom widths and seeds") {
  GradCheckOptions opts;
  opts.widths = {6, 5};
  opts.seeds = {9, 10};
  const auto rows = run_gradcheck(opts);
  REQUIRE(rows.size() == 8);
  for (const auto& row : rows) {
    INFO(row.case_name, " seed ", row.seed, " err ", row.max_rel_err);
    CHECK(row.pass);
  }
}
