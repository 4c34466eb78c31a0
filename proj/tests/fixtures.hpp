#pragma once

#include <string>
#include <tuple>
#include <vector>

#include "nutmeg/dataset.hpp"

namespace nutmeg::testing {

// Builds a dataset from (item, annotator, label) string triples and
// (annotator, subpopulation) pairs. Labels default to {"0", "1"}.
inline Dataset make_dataset(const std::vector<std::tuple<std::string, std::string, std::string>>& rows,
                            const std::vector<std::pair<std::string, std::string>>& groups,
                            std::vector<std::string> labels = {"0", "1"}) {
    AnnotationSet set;
    set.label_space.labels = std::move(labels);
    auto index = [](std::vector<std::string>& v, const std::string& id) {
        for (std::size_t x = 0; x < v.size(); ++x)
            if (v[x] == id) return x;
        v.push_back(id);
        return v.size() - 1;
    };
    for (const auto& [item, annotator, label] : rows) {
        const auto i = index(set.items, item);
        const auto j = index(set.annotators, annotator);
        set.records.push_back({i, j, *set.label_space.index_of(label)});
    }
    SubpopulationMap map;
    for (const auto& [annotator, group] : groups) map.assignment[annotator] = index(map.subpopulations, group);
    return Dataset::validate(std::move(set), map);
}

}  // namespace nutmeg::testing
