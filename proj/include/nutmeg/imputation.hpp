#pragma once
// Fills (item, subpopulation) cells nobody from the group annotated.
//
// For an unobserved cell (i, k): collect items whose decoded labels agree with
// item i on every subpopulation observed for i, and which were themselves
// annotated by group k. The cell takes the mean of their group-k posteriors.

#include <cstddef>
#include <span>

#include "nutmeg/dataset.hpp"
#include "nutmeg/inference.hpp"
#include "nutmeg/types.hpp"

namespace nutmeg {

enum class ImputationMode { Impute, LeaveMissing };

struct ImputationPolicy {
    ImputationMode mode = ImputationMode::Impute;
    std::size_t min_support = 1;
};

// Observed cells are copied unchanged. Cells with fewer than min_support
// matches receive `truth_prior` and are flagged Fallback.
PosteriorTable impute(const PosteriorTable& fitted, std::span<const double> truth_prior,
                      const ImputationPolicy& policy = {});

PosteriorTable impute(const FitResult& fit, const FitConfig& config, const ImputationPolicy& policy = {});

}  // namespace nutmeg
