#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace lmfs {

// One line of the verification table.
struct CheckRow {
    std::string name;
    std::size_t cases = 0;
    double max_rel_err = 0.0;
    bool pass = false;
};

struct GradCheckOptions {
    std::size_t cases = 50;    // random instances per row
    std::uint64_t seed = 2024;
    double tolerance = 1e-6;   // relative error bar per component
    double abs_floor = 1e-9;   // discrepancies below this always pass
    // Name of one row whose analytic gradient gets deliberately perturbed;
    // the negative control proving the harness can fail.
    std::string corrupt;
};

// Runs every analytic-vs-central-difference gradient check and every exact
// identity the library claims (pull/push gradient decomposition, linear form
// of the euclidean prototype classifier, zero-margin reductions of the
// angular losses), one table row per check. Deterministic for a given seed.
std::vector<CheckRow> run_gradient_checks(const GradCheckOptions& opts);

bool all_pass(const std::vector<CheckRow>& rows);

}  // namespace lmfs
