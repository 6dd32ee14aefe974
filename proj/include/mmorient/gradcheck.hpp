#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "mmorient/learner.hpp"
#include "mmorient/numerics.hpp"

namespace mmorient {

struct GradCheckOptions {
    double eps = 1e-5;
    /// Coordinates sampled per tensor; 0 checks every coordinate.
    std::size_t coords_per_tensor = 0;
    std::uint64_t seed = 0;
    double tolerance = 1e-4;
    /// Denominator floor of the relative error. Central differences of a loss
    /// near 6 carry about 1e-10 of roundoff at eps = 1e-5, so gradients
    /// smaller than this are compared in absolute terms.
    double floor = 1e-5;
};

/// Analytic gradient provider; the default is loss_and_gradient. Tests swap
/// in a deliberately broken one as a negative control.
using GradientFn =
    std::function<void(const ModelConfig&, const ModelParams&, const Batch&, ModelParams&)>;

/// One report per trainable tensor, in named_tensors order.
std::vector<GradCheckReport> check_gradients(const ModelConfig& config, const ModelParams& params,
                                             const Batch& batch, const GradCheckOptions& options,
                                             const GradientFn& analytic = {});

bool gradients_pass(const std::vector<GradCheckReport>& reports, double tolerance);

}  // namespace mmorient
