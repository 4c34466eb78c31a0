#pragma once
// Evaluation against synthetic ground truth: per-group accuracy, estimated
// divisiveness, competence correlation, and Jensen-Shannon divergence to the
// empirical label distribution.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nutmeg/dataset.hpp"
#include "nutmeg/simulator.hpp"
#include "nutmeg/types.hpp"

namespace nutmeg {

enum class LogBase { Natural, Two };

// 0.5 KL(p || m) + 0.5 KL(q || m), m = (p + q) / 2, with 0 log 0 = 0.
double jsd(std::span<const double> p, std::span<const double> q, LogBase base = LogBase::Natural);

// Fraction of decoded cells equal to `truth` (N x P, row-major), per group.
// Missing cells never count; imputed/fallback cells only when asked.
// Groups with nothing to evaluate yield nullopt.
std::vector<std::optional<double>> subpop_accuracy(const PosteriorTable& table, std::span<const std::size_t> truth,
                                                   bool include_imputed = true);

// Fraction of items whose two decoded group labels differ; items with a
// Missing cell are skipped. Requires exactly two groups.
std::optional<double> divisiveness_estimate(const PosteriorTable& table);

// Pearson correlation; nullopt when either side has zero variance.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

// theta_j against 1 - true spam rate, over annotators present in the data.
std::optional<double> competence_correlation(const CompetenceTable& fitted, const SyntheticWorld& world);

// Per-group mean over observed cells of jsd(posterior, empirical labels).
std::vector<std::optional<double>> mean_jsd_by_subpop(const PosteriorTable& table, const Dataset& data,
                                                      LogBase base = LogBase::Natural);

struct EvalReport {
    std::vector<std::string> subpopulations;
    std::vector<std::optional<double>> accuracy;           // imputed cells included
    std::vector<std::optional<double>> accuracy_observed;  // imputed cells excluded
    std::vector<std::size_t> cells_evaluated;
    std::vector<std::size_t> cells_observed;
    std::optional<double> divisiveness_estimate;
    std::optional<double> competence_pearson;
    std::vector<std::optional<double>> jsd;
};

// `competence` may be null for methods without annotator parameters.
EvalReport evaluate(const PosteriorTable& table, const Dataset& data, const SyntheticWorld& world,
                    const CompetenceTable* competence, LogBase base = LogBase::Natural);

}  // namespace nutmeg
