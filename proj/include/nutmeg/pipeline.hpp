#pragma once
// Method dispatch shared by the CLI, the sweep runner and the Python module.

#include <optional>
#include <string>
#include <vector>

#include "nutmeg/baselines.hpp"
#include "nutmeg/dataset.hpp"
#include "nutmeg/imputation.hpp"
#include "nutmeg/inference.hpp"
#include "nutmeg/metrics.hpp"
#include "nutmeg/simulator.hpp"

namespace nutmeg {

enum class Method { Nutmeg, Mace, Majority, DawidSkene };

Method parse_method(const std::string& name);  // throws ValidationError
const char* to_string(Method method) noexcept;
bool is_single_truth(Method method) noexcept;

// Name used in place of a subpopulation for single-truth methods.
inline constexpr const char* kAllSubpopulations = "all";

struct AggregateOutput {
    Method method = Method::Nutmeg;
    std::vector<std::string> subpopulations;  // {"all"} for single-truth methods
    PosteriorTable posterior;                 // imputation already applied
    std::optional<CompetenceTable> competence;
};

AggregateOutput aggregate(const Dataset& data, Method method, const FitConfig& config,
                          const ImputationPolicy& policy = {});

// Repeats a one-column table across `n_subpops` groups.
PosteriorTable broadcast(const PosteriorTable& single, std::size_t n_subpops);

struct MetricRow {
    std::string method;
    std::string metric;
    std::optional<double> value;
    std::string status;  // "ok", "undefined" or "error: ..."
};

// Metric names available for a two-group world, in canonical order.
std::vector<std::string> metric_names(const std::vector<std::string>& subpopulations);

// Fits every method on the world and reports the requested metrics. Never
// throws for per-method failures; those become rows with an error status.
std::vector<MetricRow> evaluate_methods(const SyntheticWorld& world, const std::vector<Method>& methods,
                                        const std::vector<std::string>& metrics, const FitConfig& config,
                                        const ImputationPolicy& policy = {});

}  // namespace nutmeg
