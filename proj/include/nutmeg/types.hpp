#pragma once
// Shared data model: labels, annotations, subpopulations, posteriors and
// annotator parameters. Labels are carried as indices into a LabelSpace;
// string identifiers only appear at the I/O boundary.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace nutmeg {

class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(std::vector<std::string> issues);

    const std::vector<std::string>& issues() const noexcept { return issues_; }

private:
    std::vector<std::string> issues_;
};

// Non-finite objective, degenerate priors, or otherwise unusable numerics.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct LabelSpace {
    std::vector<std::string> labels;

    std::size_t size() const noexcept { return labels.size(); }
    std::optional<std::size_t> index_of(const std::string& label) const;
};

struct Annotation {
    std::size_t item = 0;
    std::size_t annotator = 0;
    std::size_t label = 0;

    friend bool operator==(const Annotation&, const Annotation&) = default;
};

struct AnnotationSet {
    std::vector<std::string> items;
    std::vector<std::string> annotators;
    std::vector<Annotation> records;
    LabelSpace label_space;
};

struct SubpopulationMap {
    std::vector<std::string> subpopulations;
    std::unordered_map<std::string, std::size_t> assignment;  // annotator id -> subpopulation index

    // Every annotator in one group named `name`.
    static SubpopulationMap single(const AnnotationSet& annotations, const std::string& name = "all");
};

enum class CellStatus : std::uint8_t {
    Observed,  // at least one annotator of the subpopulation labeled the item
    Imputed,   // filled from label-matched items
    Fallback,  // no usable match; holds the truth prior
    Missing,   // left unestimated
};

const char* to_string(CellStatus status) noexcept;

// N x P grid of categorical distributions over L labels.
class PosteriorTable {
public:
    PosteriorTable() = default;
    PosteriorTable(std::size_t n_items, std::size_t n_subpops, std::size_t n_labels);

    std::size_t n_items() const noexcept { return n_items_; }
    std::size_t n_subpops() const noexcept { return n_subpops_; }
    std::size_t n_labels() const noexcept { return n_labels_; }

    std::span<double> cell(std::size_t item, std::size_t subpop) noexcept;
    std::span<const double> cell(std::size_t item, std::size_t subpop) const noexcept;

    CellStatus status(std::size_t item, std::size_t subpop) const noexcept {
        return status_[item * n_subpops_ + subpop];
    }
    void set_status(std::size_t item, std::size_t subpop, CellStatus s) noexcept {
        status_[item * n_subpops_ + subpop] = s;
    }
    // True iff no annotator of the subpopulation labeled the item.
    bool imputed(std::size_t item, std::size_t subpop) const noexcept {
        return status(item, subpop) != CellStatus::Observed;
    }

    std::size_t decoded(std::size_t item, std::size_t subpop) const noexcept {
        return decoded_[item * n_subpops_ + subpop];
    }
    // Recomputes every decoded label from the current entries.
    void redecode();

    const std::vector<double>& raw() const noexcept { return probs_; }

private:
    std::size_t n_items_ = 0;
    std::size_t n_subpops_ = 0;
    std::size_t n_labels_ = 0;
    std::vector<double> probs_;
    std::vector<CellStatus> status_;
    std::vector<std::size_t> decoded_;
};

struct CompetenceTable {
    std::vector<double> theta;  // probability of not spamming, per annotator
    std::vector<double> xi;     // M x L spam-emission distributions, row-major
    std::size_t n_labels = 0;

    std::size_t n_annotators() const noexcept { return theta.size(); }
    std::span<const double> spam_emission(std::size_t annotator) const noexcept {
        return {xi.data() + annotator * n_labels, n_labels};
    }
    std::span<double> spam_emission(std::size_t annotator) noexcept {
        return {xi.data() + annotator * n_labels, n_labels};
    }
};

// Argmax with ties broken by the lowest index.
std::size_t argmax(std::span<const double> dist) noexcept;

// 1 - H(q) / log L, in [0, 1].
double confidence(std::span<const double> dist);

}  // namespace nutmeg
