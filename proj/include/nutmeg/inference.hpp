#pragma once
// Variational-Bayes EM for the subpopulation truth model.
//
// Each annotator j belongs to one subpopulation k. For item i the annotator
// either reports the group truth T_ik (probability theta_j) or spams, drawing
// a label from xi_j. Because annotators never cross groups the posterior
// factorizes over subpopulations, so each group is fit on its own; a fit with
// one group is MACE.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "nutmeg/dataset.hpp"
#include "nutmeg/types.hpp"

namespace nutmeg {

enum class TrainingMode {
    Variational,  // mean-field VB: digamma-weighted pseudo-counts
    Smoothed,     // point-estimate EM with additive prior smoothing
};

struct BetaPrior {
    double a = 0.5;
    double b = 0.5;
};

struct FitConfig {
    int max_iterations = 50;
    double convergence_tol = 1e-6;  // relative objective change
    int restarts = 10;
    std::uint64_t seed = 0;
    BetaPrior theta_prior;
    double xi_prior = 0.5;           // symmetric Dirichlet concentration
    std::vector<double> truth_prior;  // empty means uniform
    TrainingMode mode = TrainingMode::Variational;
    int threads = 1;  // restarts run concurrently; results do not depend on it

    // Throws ValidationError on non-positive priors, tolerances or counts.
    void check(std::size_t n_labels) const;
    std::vector<double> resolved_truth_prior(std::size_t n_labels) const;
};

// Per-record emission terms in log space:
//   P(A = a | T = t) = truthful_j [a == t] + spam_j * xi_j[a]
// For point parameters truthful = theta and spam = 1 - theta. Under VB they
// are the sub-normalized geometric means exp(E[log theta]) etc.
struct EmissionWeights {
    std::vector<double> log_truthful;
    std::vector<double> log_spam;
    std::vector<double> log_xi;  // M x L
    std::size_t n_labels = 0;

    static EmissionWeights from(const CompetenceTable& params);
};

struct EStepResult {
    PosteriorTable posterior;          // observed cells only; others Missing
    std::vector<double> spam_posterior;  // q(S = 1) per record
    double log_evidence = 0.0;         // sum over observed cells of log sum_t prior(t) prod emission
};

EStepResult e_step(const Dataset& data, const EmissionWeights& weights, std::span<const double> truth_prior);
EStepResult e_step(const Dataset& data, const CompetenceTable& params, std::span<const double> truth_prior);

struct ExpectedCounts {
    std::vector<double> truthful;        // sum of 1 - q(S) per annotator
    std::vector<double> spam_emissions;  // M x L, sum of q(S) per emitted label
    std::size_t n_labels = 0;

    static ExpectedCounts from(const Dataset& data, std::span<const double> spam_posterior);
};

struct MStepResult {
    CompetenceTable competence;  // posterior means (VB) or smoothed estimates
    EmissionWeights weights;     // what the next E-step consumes
    double prior_term = 0.0;     // -KL(q || prior) under VB, log prior otherwise
};

MStepResult m_step(const ExpectedCounts& counts, const FitConfig& config);

struct SubpopFit {
    std::vector<double> objective_trace;  // chosen restart, one value per iteration
    std::size_t chosen_restart = 0;
    double objective = 0.0;
    bool fitted = false;  // false when the group has no records
};

struct FitResult {
    PosteriorTable posterior;  // unobserved cells are Missing
    CompetenceTable competence;
    std::vector<double> spam_posterior;  // per record of the input dataset
    std::vector<SubpopFit> subpop_fits;
    double objective = 0.0;  // sum over subpopulations
};

// Throws ValidationError for bad configs and NumericalError on a non-finite
// objective. Deterministic for a given (dataset, config).
FitResult fit(const Dataset& data, const FitConfig& config);

// Hard labels per (item, subpopulation) cell, lowest index on ties.
std::vector<std::size_t> decode(const PosteriorTable& posterior);

}  // namespace nutmeg
