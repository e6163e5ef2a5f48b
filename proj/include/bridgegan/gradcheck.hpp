#pragma once

#include <string>
#include <vector>

namespace bridgegan {

struct GradCheckResult {
    std::string name;
    double max_rel_err = 0.0;
    double threshold = 0.0;
    bool passed() const { return max_rel_err < threshold; }
};

// Central finite-difference audit of every differentiable op (threshold 1e-3)
// and every loss term (1e-2, looser for deep composition). Seeded and
// deterministic. filter, when nonempty, selects one named check.
std::vector<GradCheckResult> run_gradcheck(const std::string& filter = "");

// Names all checks run_gradcheck knows, in execution order.
std::vector<std::string> gradcheck_names();

bool gradcheck_passed(const std::vector<GradCheckResult>& results);
std::string format_gradcheck(const std::vector<GradCheckResult>& results);

// Test fixture: inflates the named check's analytic gradient so the suite
// fails, exercising the nonzero-exit path. Empty disables.
void set_gradcheck_corruption(const std::string& name);

}  // namespace bridgegan
