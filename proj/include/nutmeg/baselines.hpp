#pragma once
// Single-truth aggregators: majority vote, Dawid-Skene, and MACE (the
// subpopulation model with every annotator in one group).

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "nutmeg/dataset.hpp"
#include "nutmeg/inference.hpp"
#include "nutmeg/types.hpp"

namespace nutmeg {

struct BaselineResult {
    std::string method;
    std::size_t n_labels = 0;
    std::vector<double> posterior;  // N x L
    std::vector<std::size_t> decoded;

    std::size_t n_items() const noexcept { return decoded.size(); }
    std::span<const double> cell(std::size_t item) const noexcept {
        return {posterior.data() + item * n_labels, n_labels};
    }

    // Same single truth repeated for each of `n_subpops` groups.
    PosteriorTable broadcast(std::size_t n_subpops) const;
};

BaselineResult majority_vote(const Dataset& data);

struct DawidSkeneModel {
    std::size_t n_labels = 0;
    std::vector<double> class_prior;  // L
    std::vector<double> confusion;    // M x L x L; [j][true][emitted]

    double at(std::size_t annotator, std::size_t truth, std::size_t emitted) const noexcept {
        return confusion[(annotator * n_labels + truth) * n_labels + emitted];
    }
};

struct DawidSkeneEStep {
    std::vector<double> posterior;  // N x L
    double log_likelihood = 0.0;
};

DawidSkeneEStep dawid_skene_e_step(const Dataset& data, const DawidSkeneModel& model);

struct DawidSkeneFit {
    BaselineResult result;
    DawidSkeneModel model;
    std::vector<double> objective_trace;
    std::size_t chosen_restart = 0;
};

inline constexpr double kDawidSkeneSmoothing = 0.01;

// Restart, convergence and seeding follow FitConfig exactly as in fit().
DawidSkeneFit dawid_skene(const Dataset& data, const FitConfig& config, double smoothing = kDawidSkeneSmoothing);

// Collapses all annotators into one group and runs the subpopulation model.
FitResult mace(const Dataset& data, const FitConfig& config);
Dataset single_population(const Dataset& data);

}  // namespace nutmeg
