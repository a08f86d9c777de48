#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace xtl {

struct GradCheckRow {
  std::string case_name;
  std::uint64_t seed = 0;
  double max_rel_err = 0.0;
  std::string worst_param;
  bool pass = false;
};

struct GradCheckOptions {
  std::vector<std::size_t> widths = {8, 8, 8};
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  double tolerance = 1e-4;
  /// Negative-control hook: perturbs one analytic gradient entry so the
  /// check must fail.
  bool corrupt = false;
};

/// Finite-difference verification of the analytic gradients of every loss
/// component through both branches, at reduced widths. Cases: label_loss,
/// cross_triplet(full) under both hinge readings, and total_loss; one row per
/// case per seed. Evaluation points that sit too close to a relu or hinge
/// kink for the difference stencil are rejected and redrawn deterministically.
std::vector<GradCheckRow> run_gradcheck(const GradCheckOptions& opts);

bool gradcheck_passed(const std::vector<GradCheckRow>& rows);

}  // namespace xtl
