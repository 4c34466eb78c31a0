#include "doctest.h"

#include <random>

#include "nutmeg/baselines.hpp"
#include "nutmeg/imputation.hpp"
#include "nutmeg/simulator.hpp"

using namespace nutmeg;

namespace {

void set_cell(PosteriorTable& t, std::size_t i, std::size_t k, double p0) {
    t.cell(i, k)[0] = p0;
    t.cell(i, k)[1] = 1.0 - p0;
    t.set_status(i, k, CellStatus::Observed);
}

}  // namespace

TEST_CASE("impute averages the minority posteriors of label-matched items") {
    // Item 0: minority unobserved, majority decodes to label 0.
    // Items 1..10: majority label 0, minority posteriors averaging (0.8, 0.2).
    // Items 11..12: majority label 1, must not be matched.
    PosteriorTable t(13, 2, 2);
    set_cell(t, 0, 0, 0.9);
    const double minority[10] = {0.9, 0.7, 0.8, 0.85, 0.75, 0.6, 1.0, 0.8, 0.8, 0.8};
    double expected = 0.0;
    for (std::size_t i = 1; i <= 10; ++i) {
        set_cell(t, i, 0, 0.95);
        set_cell(t, i, 1, minority[i - 1]);
        expected += minority[i - 1];
    }
    expected /= 10.0;
    for (std::size_t i = 11; i <= 12; ++i) {
        set_cell(t, i, 0, 0.1);
        set_cell(t, i, 1, 0.0);
    }
    t.redecode();
    REQUIRE(expected == doctest::Approx(0.8));

    const std::vector<double> prior{0.5, 0.5};
    const auto out = impute(t, prior);
    CHECK(out.status(0, 1) == CellStatus::Imputed);
    CHECK(out.imputed(0, 1));
    CHECK(out.cell(0, 1)[0] == doctest::Approx(0.8));
    CHECK(out.cell(0, 1)[1] == doctest::Approx(0.2));
    // Observed cells untouched.
    for (std::size_t i = 1; i <= 12; ++i)
        for (std::size_t k = 0; k < 2; ++k) CHECK(out.cell(i, k)[0] == t.cell(i, k)[0]);
}

TEST_CASE("impute falls back to the truth prior without matches") {
    PosteriorTable t(2, 2, 2);
    set_cell(t, 0, 0, 0.9);  // label 0, minority unobserved
    set_cell(t, 1, 0, 0.1);  // label 1
    set_cell(t, 1, 1, 0.3);
    t.redecode();
    const std::vector<double> prior{0.25, 0.75};
    const auto out = impute(t, prior);
    CHECK(out.status(0, 1) == CellStatus::Fallback);
    CHECK(out.cell(0, 1)[0] == doctest::Approx(0.25));

    SUBCASE("min_support above the match count also falls back") {
        PosteriorTable u(3, 2, 2);
        set_cell(u, 0, 0, 0.9);
        set_cell(u, 1, 0, 0.9);
        set_cell(u, 1, 1, 0.2);
        set_cell(u, 2, 0, 0.1);
        u.redecode();
        CHECK(impute(u, prior, {ImputationMode::Impute, 1}).status(0, 1) == CellStatus::Imputed);
        CHECK(impute(u, prior, {ImputationMode::Impute, 2}).status(0, 1) == CellStatus::Fallback);
        CHECK(impute(u, prior, {ImputationMode::Impute, 2}).status(2, 1) == CellStatus::Fallback);
    }
}

TEST_CASE("leave_missing only flags cells") {
    SimConfig sim;
    sim.n_items = 80;
    sim.n_annotators = 30;
    sim.seed = 4;
    const auto ds = generate(sim).dataset();
    FitConfig config;
    config.restarts = 2;
    const auto result = fit(ds, config);
    const auto out = impute(result, config, {ImputationMode::LeaveMissing, 1});
    CHECK(out.raw() == result.posterior.raw());
    std::size_t missing = 0;
    for (std::size_t i = 0; i < ds.n_items(); ++i)
        for (std::size_t k = 0; k < 2; ++k) {
            CHECK((out.status(i, k) == CellStatus::Missing) == !ds.observed(i, k));
            missing += out.status(i, k) == CellStatus::Missing;
        }
    CHECK(missing > 0);
}

TEST_CASE("single-group fits never impute") {
    SimConfig sim;
    sim.n_items = 60;
    sim.n_annotators = 20;
    const auto ds = single_population(generate(sim).dataset());
    FitConfig config;
    config.restarts = 1;
    const auto out = impute(fit(ds, config), config);
    for (std::size_t i = 0; i < ds.n_items(); ++i) CHECK(out.status(i, 0) == CellStatus::Observed);
}

TEST_CASE("imputed cells lie in the hull of observed same-group posteriors") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 10; ++trial) {
        SimConfig sim;
        sim.n_items = 60;
        sim.n_annotators = 20;
        sim.annotations_per_item = 2;
        sim.seed = rng();
        const auto ds = generate(sim).dataset();
        FitConfig config;
        config.restarts = 1;
        const auto result = fit(ds, config);
        const auto out = impute(result, config);
        for (std::size_t k = 0; k < 2; ++k) {
            double lo = 1.0, hi = 0.0;
            for (std::size_t i = 0; i < ds.n_items(); ++i)
                if (ds.observed(i, k)) {
                    lo = std::min(lo, result.posterior.cell(i, k)[0]);
                    hi = std::max(hi, result.posterior.cell(i, k)[0]);
                }
            for (std::size_t i = 0; i < ds.n_items(); ++i) {
                if (out.status(i, k) != CellStatus::Imputed) continue;
                const auto c = out.cell(i, k);
                CHECK(c[0] + c[1] == doctest::Approx(1.0).epsilon(1e-12));
                CHECK(c[0] >= lo - 1e-12);
                CHECK(c[0] <= hi + 1e-12);
            }
        }
    }
}
