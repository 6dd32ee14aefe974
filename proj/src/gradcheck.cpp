#include "mmorient/gradcheck.hpp"

#include <algorithm>
#include <random>
#include <utility>

namespace mmorient {

std::vector<GradCheckReport> check_gradients(const ModelConfig& config, const ModelParams& params,
                                             const Batch& batch, const GradCheckOptions& options,
                                             const GradientFn& analytic) {
    ModelParams grads;
    if (analytic) {
        grads = ModelParams::zeros(config);
        analytic(config, params, batch, grads);
    } else {
        loss_and_gradient(config, params, batch, grads);
    }

    std::mt19937_64 rng(options.seed);
    const auto grad_tensors = named_tensors(std::as_const(grads), config);
    const auto param_tensors = named_tensors(params, config);

    std::vector<GradCheckReport> reports;
    for (std::size_t t = 0; t < param_tensors.size(); ++t) {
        const Matrix& tensor = *param_tensors[t].tensor;
        GradCheckReport report;
        report.name = param_tensors[t].name;

        std::vector<std::size_t> all(tensor.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        if (options.coords_per_tensor == 0 || options.coords_per_tensor >= all.size()) {
            report.coords = all;
        } else {
            for (std::size_t i = 0; i < options.coords_per_tensor; ++i) {
                std::swap(all[i], all[i + rng() % (all.size() - i)]);
            }
            report.coords.assign(all.begin(),
                                 all.begin() + static_cast<std::ptrdiff_t>(options.coords_per_tensor));
            std::sort(report.coords.begin(), report.coords.end());
        }

        ModelParams probe = params;
        Matrix* target = named_tensors(probe, config)[t].tensor;
        const auto loss_at = [&](std::span<const double> values) {
            std::copy(values.begin(), values.end(), target->values().begin());
            return batch_loss(config, probe, batch);
        };
        report.numeric = finite_diff_gradient(loss_at, tensor.values(), options.eps, report.coords);

        const auto analytic_values = grad_tensors[t].tensor->values();
        for (std::size_t c = 0; c < report.coords.size(); ++c) {
            report.analytic.push_back(analytic_values[report.coords[c]]);
            report.max_relative_error =
                std::max(report.max_relative_error,
                         relative_error(report.analytic[c], report.numeric[c], options.floor));
        }
        reports.push_back(std::move(report));
    }
    return reports;
}

bool gradients_pass(const std::vector<GradCheckReport>& reports, double tolerance) {
    return std::all_of(reports.begin(), reports.end(), [tolerance](const GradCheckReport& r) {
        return r.max_relative_error <= tolerance;
    });
}

}  // namespace mmorient
