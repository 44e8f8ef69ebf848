#pragma once

#include <optional>
#include <string>
#include <vector>

namespace caada {

struct GradCheckOptions {
    double eps = 1e-5;  // central-difference step
    // Pass threshold for every component when set; otherwise component
    // kernels are held to 1e-5 and the composite model to 1e-4.
    std::optional<double> tolerance;
    bool corrupt_coral = false;  // test fixture: inject a wrong coral gradient
};

struct ComponentCheck {
    std::string name;
    double max_rel_error = 0.0;
    double threshold = 0.0;
    bool passed = false;
};

// Finite-difference certification of every analytic gradient: the affine and
// relu layers, the classification and coral losses, the reversal behavior of
// the GRL, and the full combined objective on a tiny two-stream model checked
// group by group (extractors and head against the reversed-sign scalar, the
// discriminator against its own loss). Component kernels are held to 1e-5,
// the composite to the overall tolerance.
std::vector<ComponentCheck> run_gradient_suite(const GradCheckOptions& options = {});

bool all_passed(const std::vector<ComponentCheck>& checks);

}  // namespace caada
