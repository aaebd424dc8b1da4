#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace uat::adiff {

struct OpCheckResult {
    std::string op;
    std::size_t points = 0;
    double max_rel_error = 0.0;
    bool passed = false;
};

/// Names of every op kind covered by the finite-difference suite.
std::vector<std::string> gradcheck_op_kinds();

/// Compares reverse-mode directional derivatives against central finite
/// differences, at `points` random inputs per op. The error per point is
/// |analytic − fd| / (|analytic| + 1e-12). An empty `ops` list runs all kinds;
/// unknown names throw ConfigError.
std::vector<OpCheckResult> finite_difference_suite(const std::vector<std::string>& ops,
                                                   std::size_t points, std::uint64_t seed,
                                                   double step = 1e-5, double tolerance = 1e-5);

}  // namespace uat::adiff
