#include "doctest.h"

#include <cmath>
#include <random>

#include "nutmeg/metrics.hpp"
#include "nutmeg/pipeline.hpp"
#include "nutmeg/simulator.hpp"

using namespace nutmeg;

TEST_CASE("jsd reference values") {
    const std::vector<double> a{0.3, 0.7}, b{1.0, 0.0}, c{0.0, 1.0}, h{0.5, 0.5};
    CHECK(jsd(a, a) == doctest::Approx(0.0));
    CHECK(jsd(b, c) == doctest::Approx(std::log(2.0)));
    CHECK(jsd(b, c, LogBase::Two) == doctest::Approx(1.0));
    CHECK(jsd(h, b) == doctest::Approx(0.2157616).epsilon(1e-6));
    CHECK(jsd(h, b) == doctest::Approx(jsd(b, h)));
}

TEST_CASE("accuracy per group") {
    PosteriorTable t(4, 2, 2);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t k = 0; k < 2; ++k) {
            t.cell(i, k)[0] = i % 2 == 0 ? 0.9 : 0.1;
            t.cell(i, k)[1] = 1.0 - t.cell(i, k)[0];
            t.set_status(i, k, CellStatus::Observed);
        }
    t.set_status(3, 1, CellStatus::Imputed);
    t.set_status(2, 1, CellStatus::Missing);
    t.redecode();
    const std::vector<std::size_t> truth{0, 0, 1, 1, 0, 0, 1, 0};
    const auto all = subpop_accuracy(t, truth);
    CHECK(*all[0] == doctest::Approx(1.0));
    CHECK(*all[1] == doctest::Approx(2.0 / 3));
    const auto observed = subpop_accuracy(t, truth, false);
    CHECK(*observed[1] == doctest::Approx(1.0));

    PosteriorTable empty(2, 2, 2);
    const std::vector<std::size_t> truth2(4, 0);
    const auto undefined = subpop_accuracy(empty, truth2);
    CHECK(!undefined[0].has_value());
}

TEST_CASE("pearson") {
    const std::vector<double> x{1, 2, 3, 4}, y{2, 4, 6, 8}, flat{1, 1, 1, 1};
    CHECK(*pearson(x, y) == doctest::Approx(1.0));
    CHECK(!pearson(x, flat).has_value());
}

TEST_CASE("divisiveness estimate on truth posteriors equals the true rate") {
    SimConfig config;
    config.divisiveness_rate = 0.35;
    const auto world = generate(config);
    PosteriorTable t(config.n_items, 2, 2);
    for (std::size_t i = 0; i < config.n_items; ++i)
        for (std::size_t k = 0; k < 2; ++k) {
            const std::size_t l = world.true_label(i, k);
            t.cell(i, k)[l] = 1.0;
            t.cell(i, k)[1 - l] = 0.0;
            t.set_status(i, k, CellStatus::Observed);
        }
    t.redecode();
    CHECK(*divisiveness_estimate(t) == doctest::Approx(0.35));
}

TEST_CASE("metrics are invariant under relabeling") {
    SimConfig config;
    config.seed = 3;
    const auto world = generate(config);
    const auto ds = world.dataset();
    FitConfig fit;
    fit.restarts = 2;
    const auto out = aggregate(ds, Method::Nutmeg, fit);
    const auto acc = subpop_accuracy(out.posterior, world.true_labels);

    PosteriorTable swapped(out.posterior.n_items(), 2, 2);
    std::vector<std::size_t> truth(world.true_labels.size());
    for (std::size_t i = 0; i < swapped.n_items(); ++i)
        for (std::size_t k = 0; k < 2; ++k) {
            swapped.cell(i, k)[0] = out.posterior.cell(i, k)[1];
            swapped.cell(i, k)[1] = out.posterior.cell(i, k)[0];
            swapped.set_status(i, k, out.posterior.status(i, k));
            truth[i * 2 + k] = 1 - world.true_labels[i * 2 + k];
        }
    swapped.redecode();
    // Exact ties decode to the lowest index, so compare away from ties only.
    const auto acc2 = subpop_accuracy(swapped, truth);
    CHECK(*acc2[0] == doctest::Approx(*acc[0]).epsilon(0.01));
    CHECK(*acc2[1] == doctest::Approx(*acc[1]).epsilon(0.01));
    CHECK(*divisiveness_estimate(swapped) == doctest::Approx(*divisiveness_estimate(out.posterior)).epsilon(0.01));
}

TEST_CASE("competence correlation is undefined without spam variance") {
    SimConfig config;
    config.global_spam_rate = 0.0;
    const auto world = generate(config);
    CompetenceTable c;
    c.n_labels = 2;
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u;
    for (std::size_t j = 0; j < world.annotations.annotators.size(); ++j) {
        c.theta.push_back(u(rng));
        c.xi.push_back(0.5);
        c.xi.push_back(0.5);
    }
    CHECK(!competence_correlation(c, world).has_value());
}
