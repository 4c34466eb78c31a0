#include "nutmeg/dataset.hpp"

#include <set>
#include <unordered_set>
#include <utility>

namespace nutmeg {

Dataset Dataset::validate(AnnotationSet annotations, const SubpopulationMap& subpops) {
    std::vector<std::string> issues;
    const std::size_t n_items = annotations.items.size();
    const std::size_t n_annotators = annotations.annotators.size();
    const std::size_t n_labels = annotations.label_space.size();

    if (n_labels < 2) issues.push_back("label space must contain at least 2 labels");
    {
        std::unordered_set<std::string> seen;
        for (const auto& l : annotations.label_space.labels)
            if (!seen.insert(l).second) issues.push_back("duplicate label '" + l + "'");
    }
    {
        std::unordered_set<std::string> seen;
        for (const auto& id : annotations.items)
            if (!seen.insert(id).second) issues.push_back("duplicate item id '" + id + "'");
    }
    {
        std::unordered_set<std::string> seen;
        for (const auto& id : annotations.annotators)
            if (!seen.insert(id).second) issues.push_back("duplicate annotator id '" + id + "'");
    }
    if (subpops.subpopulations.empty()) issues.push_back("subpopulation map has no subpopulations");

    std::vector<std::size_t> annotator_subpop(n_annotators, 0);
    for (std::size_t j = 0; j < n_annotators; ++j) {
        const auto it = subpops.assignment.find(annotations.annotators[j]);
        if (it == subpops.assignment.end()) {
            issues.push_back("annotator '" + annotations.annotators[j] + "' has no subpopulation");
        } else if (it->second >= subpops.subpopulations.size()) {
            issues.push_back("annotator '" + annotations.annotators[j] + "' assigned to unknown subpopulation index " +
                             std::to_string(it->second));
        } else {
            annotator_subpop[j] = it->second;
        }
    }

    std::vector<std::size_t> item_count(n_items, 0);
    std::vector<std::size_t> annotator_count(n_annotators, 0);
    std::set<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t r = 0; r < annotations.records.size(); ++r) {
        const auto& rec = annotations.records[r];
        bool in_range = true;
        if (rec.item >= n_items) {
            issues.push_back("record " + std::to_string(r) + ": item index out of range");
            in_range = false;
        }
        if (rec.annotator >= n_annotators) {
            issues.push_back("record " + std::to_string(r) + ": annotator index out of range");
            in_range = false;
        }
        if (rec.label >= n_labels) issues.push_back("record " + std::to_string(r) + ": unknown label index " +
                                                    std::to_string(rec.label));
        if (!in_range) continue;
        ++item_count[rec.item];
        ++annotator_count[rec.annotator];
        if (!pairs.emplace(rec.item, rec.annotator).second)
            issues.push_back("duplicate record for item '" + annotations.items[rec.item] + "' and annotator '" +
                             annotations.annotators[rec.annotator] + "'");
    }
    for (std::size_t i = 0; i < n_items; ++i)
        if (item_count[i] == 0) issues.push_back("item '" + annotations.items[i] + "' has no records");
    for (std::size_t j = 0; j < n_annotators; ++j)
        if (annotator_count[j] == 0) issues.push_back("annotator '" + annotations.annotators[j] + "' has no records");

    if (!issues.empty()) throw ValidationError(std::move(issues));

    Dataset ds;
    ds.subpop_names_ = subpops.subpopulations;
    ds.annotator_subpop_ = std::move(annotator_subpop);
    const std::size_t n_subpops = ds.subpop_names_.size();
    ds.item_records_.resize(n_items);
    ds.observed_.assign(n_items * n_subpops, 0);
    for (std::size_t r = 0; r < annotations.records.size(); ++r) {
        const auto& rec = annotations.records[r];
        ds.item_records_[rec.item].push_back(r);
        ds.observed_[rec.item * n_subpops + ds.annotator_subpop_[rec.annotator]] = 1;
    }
    ds.annotations_ = std::move(annotations);
    return ds;
}

Dataset Dataset::restrict_to(std::size_t subpop, std::vector<std::size_t>* item_map,
                             std::vector<std::size_t>* annotator_map) const {
    constexpr std::size_t none = static_cast<std::size_t>(-1);
    std::vector<std::size_t> item_index(n_items(), none);
    std::vector<std::size_t> annotator_index(n_annotators(), none);

    Dataset sub;
    sub.annotations_.label_space = annotations_.label_space;
    sub.subpop_names_ = {subpop_names_[subpop]};
    std::vector<std::size_t> items_kept;
    std::vector<std::size_t> annotators_kept;
    for (std::size_t j = 0; j < n_annotators(); ++j) {
        if (annotator_subpop_[j] != subpop) continue;
        annotator_index[j] = annotators_kept.size();
        annotators_kept.push_back(j);
        sub.annotations_.annotators.push_back(annotations_.annotators[j]);
    }
    for (std::size_t i = 0; i < n_items(); ++i) {
        if (!observed(i, subpop)) continue;
        item_index[i] = items_kept.size();
        items_kept.push_back(i);
        sub.annotations_.items.push_back(annotations_.items[i]);
    }
    for (const auto& rec : annotations_.records) {
        if (annotator_subpop_[rec.annotator] != subpop) continue;
        sub.annotations_.records.push_back({item_index[rec.item], annotator_index[rec.annotator], rec.label});
    }

    sub.annotator_subpop_.assign(annotators_kept.size(), 0);
    sub.item_records_.resize(items_kept.size());
    sub.observed_.assign(items_kept.size(), 1);
    for (std::size_t r = 0; r < sub.annotations_.records.size(); ++r)
        sub.item_records_[sub.annotations_.records[r].item].push_back(r);

    if (item_map) *item_map = std::move(items_kept);
    if (annotator_map) *annotator_map = std::move(annotators_kept);
    return sub;
}

double CountsSummary::mean_items_per_annotator() const noexcept {
    if (per_annotator.empty()) return 0.0;
    return static_cast<double>(total) / static_cast<double>(per_annotator.size());
}

CountsSummary counts_summary(const Dataset& dataset) {
    CountsSummary summary;
    summary.n_subpops = dataset.n_subpops();
    summary.item_subpop.assign(dataset.n_items() * dataset.n_subpops(), 0);
    summary.per_item.assign(dataset.n_items(), 0);
    summary.per_annotator.assign(dataset.n_annotators(), 0);
    for (const auto& rec : dataset.records()) {
        ++summary.item_subpop[rec.item * summary.n_subpops + dataset.subpop_of(rec.annotator)];
        ++summary.per_item[rec.item];
        ++summary.per_annotator[rec.annotator];
    }
    summary.total = dataset.n_records();
    return summary;
}

}  // namespace nutmeg
