#include "doctest.h"

#include <random>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "nutmeg/baselines.hpp"
#include "nutmeg/metrics.hpp"
#include "nutmeg/simulator.hpp"

using namespace nutmeg;
using testing::make_dataset;

TEST_CASE("majority vote frequencies and tie-break") {
    const auto ds = make_dataset({{"i0", "a", "1"}, {"i0", "b", "1"}, {"i0", "c", "0"}, {"i1", "a", "0"}, {"i1", "b", "1"}},
                                 {{"a", "g"}, {"b", "g"}, {"c", "g"}});
    const auto mv = majority_vote(ds);
    CHECK(mv.decoded[0] == 1);
    CHECK(mv.cell(0)[0] == doctest::Approx(1.0 / 3));
    CHECK(mv.cell(0)[1] == doctest::Approx(2.0 / 3));
    CHECK(mv.decoded[1] == 0);
}

TEST_CASE("majority vote against the minority truth loses the divisive items") {
    SimConfig sim;
    sim.global_spam_rate = 0.0;
    sim.divisiveness_rate = 0.4;
    sim.seed = 12;
    const auto world = generate(sim);
    const auto ds = world.dataset();
    const auto table = majority_vote(ds).broadcast(2);
    const auto acc = subpop_accuracy(table, world.true_labels);
    // Majority annotators dominate most items; minority accuracy is close to
    // the non-divisive share.
    CHECK(*acc[kMinority] == doctest::Approx(0.6).epsilon(0.1));
}

TEST_CASE("dawid-skene E-step matches enumeration") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.05, 1.0);
    for (int trial = 0; trial < 30; ++trial) {
        const auto inst = testing::random_tiny_instance(rng, 3, 3, 2, 1, 9);
        const auto ds = Dataset::validate(inst.annotations, inst.subpops);
        DawidSkeneModel model;
        model.n_labels = 2;
        const double p = u(rng);
        model.class_prior = {p / (p + 0.5), 0.5 / (p + 0.5)};
        for (std::size_t j = 0; j < ds.n_annotators() * 2; ++j) {
            const double d = u(rng);
            model.confusion.push_back(d / (d + 0.4));
            model.confusion.push_back(0.4 / (d + 0.4));
        }
        const auto e = dawid_skene_e_step(ds, model);
        const auto oracle = testing::brute_force_dawid_skene(ds, model);
        for (std::size_t x = 0; x < oracle.size(); ++x) CHECK(e.posterior[x] == doctest::Approx(oracle[x]).epsilon(1e-9));
    }
}

TEST_CASE("dawid-skene on unanimous data") {
    const auto ds = make_dataset({{"i0", "a", "1"}, {"i0", "b", "1"}, {"i1", "a", "0"}, {"i1", "b", "0"},
                                  {"i2", "a", "1"}, {"i2", "b", "1"}, {"i3", "a", "0"}, {"i3", "b", "0"}},
                                 {{"a", "g"}, {"b", "g"}});
    const auto fit = dawid_skene(ds, FitConfig{});
    CHECK(fit.result.decoded == std::vector<std::size_t>{1, 0, 1, 0});
    for (std::size_t j = 0; j < 2; ++j)
        for (std::size_t t = 0; t < 2; ++t) CHECK(fit.model.at(j, t, t) > 0.9);
}

TEST_CASE("dawid-skene is exact on noise-free data and its objective climbs") {
    SimConfig sim;
    sim.global_spam_rate = 0.0;
    sim.divisiveness_rate = 0.0;
    sim.seed = 5;
    const auto world = generate(sim);
    const auto ds = world.dataset();
    FitConfig config;
    config.convergence_tol = 1e-12;
    config.max_iterations = 60;
    const auto fit = dawid_skene(ds, config);
    const auto acc = subpop_accuracy(fit.result.broadcast(2), world.true_labels);
    CHECK(*acc[kMajority] == 1.0);
    CHECK(*acc[kMinority] == 1.0);
    for (std::size_t t = 1; t < fit.objective_trace.size(); ++t)
        CHECK(fit.objective_trace[t] >= fit.objective_trace[t - 1] - 1e-8);
}

TEST_CASE("mace collapses every annotator into one group") {
    SimConfig sim;
    sim.n_items = 60;
    sim.n_annotators = 20;
    const auto ds = generate(sim).dataset();
    FitConfig config;
    config.restarts = 2;
    const auto result = mace(ds, config);
    CHECK(result.posterior.n_subpops() == 1);
    CHECK(result.competence.n_annotators() == ds.n_annotators());
}
