#include "nutmeg/imputation.hpp"

#include <algorithm>
#include <stdexcept>
#include <vector>

namespace nutmeg {

PosteriorTable impute(const PosteriorTable& fitted, std::span<const double> truth_prior,
                      const ImputationPolicy& policy) {
    if (policy.min_support < 1) throw ValidationError({"min_support must be at least 1"});
    PosteriorTable out = fitted;
    const std::size_t n_items = fitted.n_items();
    const std::size_t n_subpops = fitted.n_subpops();
    const std::size_t n_labels = fitted.n_labels();

    for (std::size_t i = 0; i < n_items; ++i)
        for (std::size_t k = 0; k < n_subpops; ++k)
            if (fitted.status(i, k) != CellStatus::Observed) out.set_status(i, k, CellStatus::Missing);
    if (policy.mode == ImputationMode::LeaveMissing) return out;

    std::vector<double> mean(n_labels);
    for (std::size_t i = 0; i < n_items; ++i) {
        for (std::size_t k = 0; k < n_subpops; ++k) {
            if (fitted.status(i, k) == CellStatus::Observed) continue;

            std::fill(mean.begin(), mean.end(), 0.0);
            std::size_t support = 0;
            for (std::size_t other = 0; other < n_items; ++other) {
                if (fitted.status(other, k) != CellStatus::Observed) continue;
                bool matches = true;
                for (std::size_t g = 0; g < n_subpops && matches; ++g) {
                    if (g == k || fitted.status(i, g) != CellStatus::Observed) continue;
                    matches = fitted.status(other, g) == CellStatus::Observed &&
                              fitted.decoded(other, g) == fitted.decoded(i, g);
                }
                if (!matches) continue;
                const auto cell = fitted.cell(other, k);
                for (std::size_t l = 0; l < n_labels; ++l) mean[l] += cell[l];
                ++support;
            }

            auto target = out.cell(i, k);
            if (support >= policy.min_support) {
                for (std::size_t l = 0; l < n_labels; ++l) target[l] = mean[l] / static_cast<double>(support);
                out.set_status(i, k, CellStatus::Imputed);
            } else {
                std::copy(truth_prior.begin(), truth_prior.end(), target.begin());
                out.set_status(i, k, CellStatus::Fallback);
            }
        }
    }
    out.redecode();
    return out;
}

PosteriorTable impute(const FitResult& fit, const FitConfig& config, const ImputationPolicy& policy) {
    const auto prior = config.resolved_truth_prior(fit.posterior.n_labels());
    return impute(fit.posterior, prior, policy);
}

}  // namespace nutmeg
