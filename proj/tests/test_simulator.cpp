#include "doctest.h"

#include <numeric>
#include <set>

#include "nutmeg/simulator.hpp"
#include "nutmeg/types.hpp"

using namespace nutmeg;

TEST_CASE("default world shape") {
    const auto world = generate(SimConfig{});
    CHECK(world.annotations.records.size() == 2500);
    CHECK(world.annotations.items.size() == 500);
    CHECK(world.annotator_ids.size() == 150);
    CHECK(world.divisive_items.size() == 100);
    CHECK(std::count(world.annotator_subpop.begin(), world.annotator_subpop.end(), kMinority) == 30);
    CHECK(world.annotations.items[0] == "i000");
    CHECK(world.annotator_ids[0] == "a000");
    const double mean = std::accumulate(world.true_spam_rates.begin(), world.true_spam_rates.end(), 0.0) / 150.0;
    CHECK(mean == doctest::Approx(0.1).epsilon(0.2));  // within 0.02
    CHECK(std::abs(mean - 0.1) <= 0.02);
}

TEST_CASE("items get distinct annotators and truthful records match the group truth") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        SimConfig config;
        config.seed = seed;
        config.n_labels = 3;
        const auto world = generate(config);
        const auto& ann = world.annotations;
        std::vector<std::set<std::size_t>> seen(ann.items.size());
        std::size_t spam = 0;
        for (std::size_t r = 0; r < ann.records.size(); ++r) {
            const auto& rec = ann.records[r];
            CHECK(seen[rec.item].insert(rec.annotator).second);
            const std::size_t g = world.annotator_subpop[world.annotator_origin[rec.annotator]];
            if (world.spam_draws[r]) ++spam;
            else CHECK(rec.label == world.true_label(rec.item, g));
        }
        for (const auto& s : seen) CHECK(s.size() == 5);
        CHECK(std::abs(double(spam) / ann.records.size() - 0.1) <= 0.02);
    }
}

TEST_CASE("divisive items are exactly those whose group labels differ") {
    SimConfig config;
    config.divisiveness_rate = 0.3;
    const auto world = generate(config);
    std::set<std::size_t> divisive(world.divisive_items.begin(), world.divisive_items.end());
    for (std::size_t i = 0; i < config.n_items; ++i)
        CHECK((world.true_label(i, kMajority) != world.true_label(i, kMinority)) == (divisive.count(i) == 1));
}

TEST_CASE("noise-free world has every annotator agreeing with their group") {
    SimConfig config;
    config.global_spam_rate = 0.0;
    config.divisiveness_rate = 0.0;
    const auto world = generate(config);
    for (double s : world.true_spam_rates) CHECK(s == 0.0);
    for (const auto& rec : world.annotations.records) CHECK(rec.label == world.true_label(rec.item, kMajority));
}

TEST_CASE("constant spam rate") {
    SimConfig config;
    config.constant_spam_rate = true;
    config.global_spam_rate = 0.25;
    for (double s : generate(config).true_spam_rates) CHECK(s == 0.25);
}

TEST_CASE("generation is deterministic in the seed") {
    SimConfig config;
    config.seed = 99;
    const auto a = generate(config);
    const auto b = generate(config);
    CHECK(a.annotations.records == b.annotations.records);
    CHECK(a.true_spam_rates == b.true_spam_rates);
    config.seed = 100;
    CHECK(generate(config).annotations.records != a.annotations.records);
}

TEST_CASE("infeasible configs are rejected") {
    SimConfig config;
    config.annotations_per_item = 200;
    CHECK_THROWS_AS(generate(config), ValidationError);
    config = {};
    config.global_spam_rate = 1.5;
    CHECK_THROWS_AS(generate(config), ValidationError);
    config = {};
    config.n_labels = 1;
    CHECK_THROWS_AS(generate(config), ValidationError);
    config = {};
    config.minority_proportion = -0.1;
    CHECK_THROWS_AS(generate(config), ValidationError);
}

TEST_CASE("sweep grid ordering and seeds") {
    const std::vector<GridAxis> axes{{"divisiveness_rate", {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0}},
                                     {"global_spam_rate", {0.0, 0.1, 0.25}},
                                     {"minority_proportion", {0.2, 0.3}}};
    const auto cells = sweep_grid(SimConfig{}, axes, 1, 0);
    CHECK(cells.size() == 66);
    CHECK(cells[0].config.divisiveness_rate == 0.0);
    CHECK(cells[1].config.minority_proportion == 0.3);
    CHECK(cells[65].config.divisiveness_rate == 1.0);
    std::set<std::uint64_t> seeds;
    for (const auto& c : cells) seeds.insert(c.config.seed);
    CHECK(seeds.size() == 66);
    CHECK(sweep_grid(SimConfig{}, axes, 1, 0)[7].config.seed == cells[7].config.seed);
    CHECK(sweep_grid(SimConfig{}, axes, 1, 1)[7].config.seed != cells[7].config.seed);

    const auto reps = sweep_grid(SimConfig{}, {axes[1]}, 5, 0);
    CHECK(reps.size() == 15);
    CHECK(reps[4].replicate == 4);
    CHECK(reps[5].coords[0] == 1);
    CHECK_THROWS_AS(sweep_grid(SimConfig{}, {{"seed", {1}}}, 1, 0), ValidationError);
    CHECK_THROWS_AS(sweep_grid(SimConfig{}, {{"bogus", {1}}}, 1, 0), ValidationError);
}

TEST_CASE("field accessors round trip") {
    SimConfig c;
    for (const auto& f : sim_config_fields()) {
        if (f == "seed") continue;
        const double v = get_field(c, f);
        set_field(c, f, v);
        CHECK(get_field(c, f) == v);
    }
    CHECK_THROWS_AS(set_field(c, "n_items", 2.5), ValidationError);
}
