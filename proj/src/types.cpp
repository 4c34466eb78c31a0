#include "nutmeg/types.hpp"

#include <algorithm>
#include <cmath>

namespace nutmeg {

namespace {

std::string join_issues(const std::vector<std::string>& issues) {
    std::string out = "validation failed";
    for (const auto& issue : issues) {
        out += "\n  ";
        out += issue;
    }
    return out;
}

}  // namespace

ValidationError::ValidationError(std::vector<std::string> issues)
    : std::runtime_error(join_issues(issues)), issues_(std::move(issues)) {}

std::optional<std::size_t> LabelSpace::index_of(const std::string& label) const {
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == label) return i;
    }
    return std::nullopt;
}

SubpopulationMap SubpopulationMap::single(const AnnotationSet& annotations, const std::string& name) {
    SubpopulationMap map;
    map.subpopulations.push_back(name);
    for (const auto& a : annotations.annotators) map.assignment.emplace(a, 0);
    return map;
}

const char* to_string(CellStatus status) noexcept {
    switch (status) {
        case CellStatus::Observed: return "observed";
        case CellStatus::Imputed: return "imputed";
        case CellStatus::Fallback: return "fallback";
        case CellStatus::Missing: return "missing";
    }
    return "unknown";
}

PosteriorTable::PosteriorTable(std::size_t n_items, std::size_t n_subpops, std::size_t n_labels)
    : n_items_(n_items),
      n_subpops_(n_subpops),
      n_labels_(n_labels),
      probs_(n_items * n_subpops * n_labels, n_labels ? 1.0 / static_cast<double>(n_labels) : 0.0),
      status_(n_items * n_subpops, CellStatus::Missing),
      decoded_(n_items * n_subpops, 0) {}

std::span<double> PosteriorTable::cell(std::size_t item, std::size_t subpop) noexcept {
    return {probs_.data() + (item * n_subpops_ + subpop) * n_labels_, n_labels_};
}

std::span<const double> PosteriorTable::cell(std::size_t item, std::size_t subpop) const noexcept {
    return {probs_.data() + (item * n_subpops_ + subpop) * n_labels_, n_labels_};
}

void PosteriorTable::redecode() {
    for (std::size_t i = 0; i < n_items_; ++i)
        for (std::size_t k = 0; k < n_subpops_; ++k)
            decoded_[i * n_subpops_ + k] = argmax(cell(i, k));
}

std::size_t argmax(std::span<const double> dist) noexcept {
    std::size_t best = 0;
    for (std::size_t l = 1; l < dist.size(); ++l)
        if (dist[l] > dist[best]) best = l;
    return best;
}

double confidence(std::span<const double> dist) {
    if (dist.size() < 2) return 1.0;
    double entropy = 0.0;
    for (double p : dist)
        if (p > 0.0) entropy -= p * std::log(p);
    const double c = 1.0 - entropy / std::log(static_cast<double>(dist.size()));
    return std::clamp(c, 0.0, 1.0);
}

}  // namespace nutmeg
