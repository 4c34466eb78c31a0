#pragma once
// Validated, immutable view of an annotation set plus its subpopulation map.

#include <cstddef>
#include <vector>

#include "nutmeg/types.hpp"

namespace nutmeg {

class Dataset {
public:
    // Throws ValidationError listing every violated invariant.
    static Dataset validate(AnnotationSet annotations, const SubpopulationMap& subpops);

    const AnnotationSet& annotations() const noexcept { return annotations_; }
    const std::vector<std::string>& subpopulations() const noexcept { return subpop_names_; }

    std::size_t n_items() const noexcept { return annotations_.items.size(); }
    std::size_t n_annotators() const noexcept { return annotations_.annotators.size(); }
    std::size_t n_labels() const noexcept { return annotations_.label_space.size(); }
    std::size_t n_subpops() const noexcept { return subpop_names_.size(); }
    std::size_t n_records() const noexcept { return annotations_.records.size(); }

    const std::vector<Annotation>& records() const noexcept { return annotations_.records; }
    std::size_t subpop_of(std::size_t annotator) const noexcept { return annotator_subpop_[annotator]; }

    // Record indices per item, in input order.
    const std::vector<std::size_t>& item_records(std::size_t item) const noexcept {
        return item_records_[item];
    }
    // Whether any annotator of `subpop` labeled `item`.
    bool observed(std::size_t item, std::size_t subpop) const noexcept {
        return observed_[item * subpop_names_.size() + subpop] != 0;
    }

    // Records of one subpopulation only, as a single-subpopulation dataset.
    // Item and annotator order is preserved; items without any record from
    // the group are dropped. `item_map`/`annotator_map` receive the original
    // indices of the kept entries.
    Dataset restrict_to(std::size_t subpop, std::vector<std::size_t>* item_map = nullptr,
                        std::vector<std::size_t>* annotator_map = nullptr) const;

private:
    Dataset() = default;

    AnnotationSet annotations_;
    std::vector<std::string> subpop_names_;
    std::vector<std::size_t> annotator_subpop_;
    std::vector<std::vector<std::size_t>> item_records_;
    std::vector<char> observed_;
};

struct CountsSummary {
    std::size_t n_subpops = 0;
    std::vector<std::size_t> item_subpop;  // N x P counts, row-major
    std::vector<std::size_t> per_item;
    std::vector<std::size_t> per_annotator;
    std::size_t total = 0;

    std::size_t at(std::size_t item, std::size_t subpop) const noexcept {
        return item_subpop[item * n_subpops + subpop];
    }
    double mean_items_per_annotator() const noexcept;
};

CountsSummary counts_summary(const Dataset& dataset);

}  // namespace nutmeg
