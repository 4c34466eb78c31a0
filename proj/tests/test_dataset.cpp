#include "doctest.h"

#include <algorithm>
#include <random>

#include "fixtures.hpp"
#include "nutmeg/dataset.hpp"
#include "nutmeg/simulator.hpp"

using namespace nutmeg;

namespace {

AnnotationSet two_by_two() {
    AnnotationSet set;
    set.label_space.labels = {"0", "1"};
    set.items = {"i0", "i1"};
    set.annotators = {"a0", "a1"};
    set.records = {{0, 0, 1}, {0, 1, 1}, {1, 0, 0}, {1, 1, 1}};
    return set;
}

SubpopulationMap groups_for(const AnnotationSet& set) {
    SubpopulationMap map;
    map.subpopulations = {"g0", "g1"};
    map.assignment = {{set.annotators[0], 0}, {set.annotators[1], 1}};
    return map;
}

std::vector<std::string> issues_of(const AnnotationSet& set, const SubpopulationMap& map) {
    try {
        Dataset::validate(set, map);
    } catch (const ValidationError& e) {
        return e.issues();
    }
    return {};
}

bool mentions(const std::vector<std::string>& issues, const std::string& needle) {
    return std::any_of(issues.begin(), issues.end(),
                       [&](const std::string& s) { return s.find(needle) != std::string::npos; });
}

}  // namespace

TEST_CASE("validate accepts a well-formed minimal dataset") {
    const auto set = two_by_two();
    const auto ds = Dataset::validate(set, groups_for(set));
    CHECK(ds.n_items() == 2);
    CHECK(ds.n_annotators() == 2);
    CHECK(ds.n_subpops() == 2);
    CHECK(ds.observed(0, 0));
    CHECK(ds.observed(1, 1));
}

TEST_CASE("validate reports an annotator without subpopulation") {
    const auto set = two_by_two();
    auto map = groups_for(set);
    map.assignment.erase("a1");
    const auto issues = issues_of(set, map);
    REQUIRE(issues.size() == 1);
    CHECK(mentions(issues, "'a1' has no subpopulation"));
}

TEST_CASE("validate reports duplicate records") {
    auto set = two_by_two();
    set.records.push_back({0, 0, 0});
    CHECK(mentions(issues_of(set, groups_for(set)), "duplicate record"));
}

TEST_CASE("validate reports every violation at once") {
    auto set = two_by_two();
    set.records.push_back({0, 0, 0});  // duplicate
    set.records.push_back({1, 0, 7});  // unknown label, also duplicate
    set.items.push_back("i2");         // empty item
    set.annotators.push_back("a2");    // empty annotator, no group
    const auto issues = issues_of(set, groups_for(set));
    CHECK(mentions(issues, "duplicate record"));
    CHECK(mentions(issues, "unknown label"));
    CHECK(mentions(issues, "item 'i2' has no records"));
    CHECK(mentions(issues, "annotator 'a2' has no records"));
    CHECK(mentions(issues, "'a2' has no subpopulation"));
}

TEST_CASE("validate rejects a single-label space") {
    auto set = two_by_two();
    set.label_space.labels = {"0"};
    CHECK(mentions(issues_of(set, groups_for(set)), "at least 2 labels"));
}

TEST_CASE("counts_summary on the default simulation") {
    const auto world = generate(SimConfig{});
    const auto ds = world.dataset();
    const auto counts = counts_summary(ds);
    CHECK(counts.total == 2500);
    // Every annotator labels at least one item at these settings.
    CHECK(ds.n_annotators() == 150);
    CHECK(counts.mean_items_per_annotator() == doctest::Approx(16.6667).epsilon(1e-4));
}

TEST_CASE("counts_summary edge cases") {
    using testing::make_dataset;
    SUBCASE("single annotator labeling every item") {
        const auto ds = make_dataset({{"i0", "a", "0"}, {"i1", "a", "1"}, {"i2", "a", "0"}}, {{"a", "g"}});
        const auto counts = counts_summary(ds);
        CHECK(counts.per_annotator[0] == 3);
    }
    SUBCASE("uncovered subpopulation cell counts zero") {
        const auto ds = make_dataset({{"i0", "a", "0"}, {"i1", "b", "1"}}, {{"a", "g"}, {"b", "h"}});
        const auto counts = counts_summary(ds);
        CHECK(counts.at(0, 1) == 0);
        CHECK(counts.at(1, 0) == 0);
        CHECK(counts.at(0, 0) == 1);
    }
}

TEST_CASE("counts_summary marginals agree with the record count") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        SimConfig config;
        config.n_items = 40 + trial;
        config.n_annotators = 12;
        config.annotations_per_item = 1 + trial % 6;
        config.seed = rng();
        const auto ds = generate(config).dataset();
        const auto counts = counts_summary(ds);
        std::size_t by_item = 0, by_annotator = 0, by_cell = 0;
        for (auto c : counts.per_item) by_item += c;
        for (auto c : counts.per_annotator) by_annotator += c;
        for (auto c : counts.item_subpop) by_cell += c;
        CHECK(by_item == ds.n_records());
        CHECK(by_annotator == ds.n_records());
        CHECK(by_cell == ds.n_records());
    }
}

TEST_CASE("restrict_to keeps one group's records in order") {
    using testing::make_dataset;
    const auto ds = make_dataset({{"i0", "a", "0"}, {"i0", "b", "1"}, {"i1", "b", "0"}, {"i2", "a", "1"}},
                                 {{"a", "g"}, {"b", "h"}});
    std::vector<std::size_t> items, annotators;
    const auto sub = ds.restrict_to(0, &items, &annotators);
    CHECK(sub.n_subpops() == 1);
    CHECK(items == std::vector<std::size_t>{0, 2});
    CHECK(annotators == std::vector<std::size_t>{0});
    REQUIRE(sub.n_records() == 2);
    CHECK(sub.records()[1].item == 1);
    CHECK(sub.records()[1].label == 1);
}

TEST_CASE("argmax breaks ties toward the lowest index and confidence spans [0, 1]") {
    const std::vector<double> tie{0.5, 0.5};
    const std::vector<double> skew{0.7, 0.3};
    const std::vector<double> point{0.0, 1.0, 0.0};
    const std::vector<double> uniform{1.0 / 3, 1.0 / 3, 1.0 / 3};
    CHECK(argmax(tie) == 0);
    CHECK(argmax(skew) == 0);
    CHECK(confidence(point) == doctest::Approx(1.0));
    CHECK(confidence(uniform) == doctest::Approx(0.0).epsilon(1e-12));
}
