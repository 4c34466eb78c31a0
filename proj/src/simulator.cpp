#include "nutmeg/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "nutmeg/numeric.hpp"

namespace nutmeg {

void SimConfig::check() const {
    std::vector<std::string> issues;
    auto in_unit = [&](double v, const char* name) {
        if (!(v >= 0.0 && v <= 1.0)) issues.push_back(std::string(name) + " must lie in [0, 1]");
    };
    if (n_annotators < 1) issues.push_back("n_annotators must be positive");
    if (n_items < 1) issues.push_back("n_items must be positive");
    if (n_labels < 2) issues.push_back("n_labels must be at least 2");
    if (!(minority_proportion > 0.0 && minority_proportion <= 0.5))
        issues.push_back("minority_proportion must lie in (0, 0.5]");
    in_unit(global_spam_rate, "global_spam_rate");
    in_unit(divisiveness_rate, "divisiveness_rate");
    if (annotations_per_item < 1) issues.push_back("annotations_per_item must be positive");
    if (annotations_per_item > n_annotators)
        issues.push_back("annotations_per_item (" + std::to_string(annotations_per_item) + ") exceeds n_annotators (" +
                         std::to_string(n_annotators) + ")");
    if (!constant_spam_rate && !(spam_rate_concentration > 0.0))
        issues.push_back("spam_rate_concentration must be positive");
    if (!issues.empty()) throw ValidationError(std::move(issues));
}

namespace {

std::string padded_id(char prefix, std::size_t index, std::size_t count) {
    const auto width = std::to_string(count > 0 ? count - 1 : 0).size();
    auto digits = std::to_string(index);
    return std::string(1, prefix) + std::string(width - std::min(width, digits.size()), '0') + digits;
}

std::vector<double> draw_spam_rates(std::mt19937_64& rng, const SimConfig& config) {
    const double mean = config.global_spam_rate;
    std::vector<double> rates(config.n_annotators, mean);
    if (config.constant_spam_rate || mean <= 0.0 || mean >= 1.0) return rates;

    const double c = config.spam_rate_concentration;
    for (double& r : rates) r = numeric::sample_beta(rng, c * mean, c * (1.0 - mean));
    // Shift onto the requested mean; clipping at the bounds can take a few passes.
    for (int pass = 0; pass < 100; ++pass) {
        const double current = std::accumulate(rates.begin(), rates.end(), 0.0) / static_cast<double>(rates.size());
        const double delta = mean - current;
        if (std::abs(delta) < 1e-12) break;
        for (double& r : rates) r = std::clamp(r + delta, 0.0, 1.0);
    }
    return rates;
}

}  // namespace

SyntheticWorld generate(const SimConfig& config) {
    config.check();
    std::mt19937_64 rng(config.seed);
    const std::size_t n_annotators = config.n_annotators;
    const std::size_t n_items = config.n_items;
    const std::size_t n_labels = config.n_labels;

    SyntheticWorld world;
    world.config = config;

    // Subpopulations: exact rounded minority count over a random permutation.
    std::vector<std::size_t> order(n_annotators);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    const auto n_minority =
        static_cast<std::size_t>(std::llround(config.minority_proportion * static_cast<double>(n_annotators)));
    world.annotator_subpop.assign(n_annotators, kMajority);
    for (std::size_t x = 0; x < n_minority; ++x) world.annotator_subpop[order[x]] = kMinority;
    for (std::size_t j = 0; j < n_annotators; ++j) world.annotator_ids.push_back(padded_id('a', j, n_annotators));

    world.true_spam_rates = draw_spam_rates(rng, config);

    // Truths.
    std::vector<std::size_t> item_order(n_items);
    std::iota(item_order.begin(), item_order.end(), 0);
    std::shuffle(item_order.begin(), item_order.end(), rng);
    const auto n_divisive =
        static_cast<std::size_t>(std::llround(config.divisiveness_rate * static_cast<double>(n_items)));
    std::vector<char> divisive(n_items, 0);
    for (std::size_t x = 0; x < n_divisive; ++x) divisive[item_order[x]] = 1;
    for (std::size_t i = 0; i < n_items; ++i)
        if (divisive[i]) world.divisive_items.push_back(i);

    std::uniform_int_distribution<std::size_t> label_draw(0, n_labels - 1);
    std::uniform_int_distribution<std::size_t> other_draw(0, n_labels - 2);
    world.true_labels.resize(n_items * 2);
    for (std::size_t i = 0; i < n_items; ++i) {
        const std::size_t major = label_draw(rng);
        std::size_t minor = major;
        if (divisive[i]) {
            minor = other_draw(rng);
            if (minor >= major) ++minor;
        }
        world.true_labels[i * 2 + kMajority] = major;
        world.true_labels[i * 2 + kMinority] = minor;
    }

    // Annotation: distinct annotators per item, each spamming at their own rate.
    struct Raw {
        std::size_t item, annotator, label;
    };
    std::vector<Raw> raw;
    raw.reserve(n_items * config.annotations_per_item);
    std::vector<std::size_t> pool(n_annotators);
    std::iota(pool.begin(), pool.end(), 0);
    std::vector<std::size_t> chosen(config.annotations_per_item);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t i = 0; i < n_items; ++i) {
        // Partial Fisher-Yates over the pool.
        for (std::size_t x = 0; x < config.annotations_per_item; ++x) {
            std::uniform_int_distribution<std::size_t> pick(x, n_annotators - 1);
            std::swap(pool[x], pool[pick(rng)]);
            chosen[x] = pool[x];
        }
        for (std::size_t j : chosen) {
            const bool spam = unit(rng) < world.true_spam_rates[j];
            const std::size_t label = spam ? label_draw(rng) : world.true_labels[i * 2 + world.annotator_subpop[j]];
            raw.push_back({i, j, label});
            world.spam_draws.push_back(spam ? 1 : 0);
        }
    }

    auto& ann = world.annotations;
    for (std::size_t l = 0; l < n_labels; ++l) ann.label_space.labels.push_back(std::to_string(l));
    for (std::size_t i = 0; i < n_items; ++i) ann.items.push_back(padded_id('i', i, n_items));
    std::vector<char> used(n_annotators, 0);
    for (const auto& r : raw) used[r.annotator] = 1;
    constexpr std::size_t none = static_cast<std::size_t>(-1);
    std::vector<std::size_t> compact(n_annotators, none);
    for (std::size_t j = 0; j < n_annotators; ++j) {
        if (!used[j]) continue;
        compact[j] = ann.annotators.size();
        ann.annotators.push_back(world.annotator_ids[j]);
        world.annotator_origin.push_back(j);
    }
    ann.records.reserve(raw.size());
    for (const auto& r : raw) ann.records.push_back({r.item, compact[r.annotator], r.label});

    world.subpops.subpopulations = {"majority", "minority"};
    for (std::size_t j = 0; j < n_annotators; ++j)
        world.subpops.assignment.emplace(world.annotator_ids[j], world.annotator_subpop[j]);
    return world;
}

Dataset SyntheticWorld::dataset() const { return Dataset::validate(annotations, subpops); }

const std::vector<std::string>& sim_config_fields() {
    static const std::vector<std::string> fields = {
        "n_annotators",     "minority_proportion",  "n_items", "n_labels", "global_spam_rate",
        "divisiveness_rate", "annotations_per_item", "seed",    "spam_rate_concentration", "constant_spam_rate"};
    return fields;
}

namespace {

std::size_t as_count(const std::string& field, double value) {
    if (!(value >= 0.0) || value != std::floor(value) || value > 1e15)
        throw ValidationError({"field '" + field + "' expects a non-negative integer, got " + std::to_string(value)});
    return static_cast<std::size_t>(value);
}

}  // namespace

void set_field(SimConfig& config, const std::string& field, double value) {
    if (field == "n_annotators") config.n_annotators = as_count(field, value);
    else if (field == "minority_proportion") config.minority_proportion = value;
    else if (field == "n_items") config.n_items = as_count(field, value);
    else if (field == "n_labels") config.n_labels = as_count(field, value);
    else if (field == "global_spam_rate") config.global_spam_rate = value;
    else if (field == "divisiveness_rate") config.divisiveness_rate = value;
    else if (field == "annotations_per_item") config.annotations_per_item = as_count(field, value);
    else if (field == "seed") config.seed = as_count(field, value);
    else if (field == "spam_rate_concentration") config.spam_rate_concentration = value;
    else if (field == "constant_spam_rate") config.constant_spam_rate = value != 0.0;
    else throw ValidationError({"unknown simulation field '" + field + "'"});
}

double get_field(const SimConfig& config, const std::string& field) {
    if (field == "n_annotators") return static_cast<double>(config.n_annotators);
    if (field == "minority_proportion") return config.minority_proportion;
    if (field == "n_items") return static_cast<double>(config.n_items);
    if (field == "n_labels") return static_cast<double>(config.n_labels);
    if (field == "global_spam_rate") return config.global_spam_rate;
    if (field == "divisiveness_rate") return config.divisiveness_rate;
    if (field == "annotations_per_item") return static_cast<double>(config.annotations_per_item);
    if (field == "seed") return static_cast<double>(config.seed);
    if (field == "spam_rate_concentration") return config.spam_rate_concentration;
    if (field == "constant_spam_rate") return config.constant_spam_rate ? 1.0 : 0.0;
    throw ValidationError({"unknown simulation field '" + field + "'"});
}

std::uint64_t cell_seed(std::uint64_t base_seed, const std::vector<std::size_t>& coords, std::size_t replicate) {
    std::uint64_t s = numeric::splitmix64(base_seed);
    for (std::size_t c : coords) s = numeric::mix_seed(s, c);
    return numeric::mix_seed(s, 0x5eedULL + replicate);
}

std::vector<SweepCell> sweep_grid(const SimConfig& base, const std::vector<GridAxis>& axes, std::size_t replicates,
                                  std::uint64_t base_seed) {
    std::size_t n_cells = 1;
    for (const auto& axis : axes) {
        if (axis.field == "seed") throw ValidationError({"seed cannot be a sweep axis; use the base seed"});
        if (axis.values.empty()) throw ValidationError({"grid axis '" + axis.field + "' has no values"});
        n_cells *= axis.values.size();
    }

    std::vector<SweepCell> cells;
    cells.reserve(n_cells * replicates);
    std::vector<std::size_t> coords(axes.size(), 0);
    for (std::size_t cell = 0; cell < n_cells; ++cell) {
        std::size_t rest = cell;
        for (std::size_t a = axes.size(); a-- > 0;) {
            coords[a] = rest % axes[a].values.size();
            rest /= axes[a].values.size();
        }
        SimConfig config = base;
        for (std::size_t a = 0; a < axes.size(); ++a) set_field(config, axes[a].field, axes[a].values[coords[a]]);
        for (std::size_t r = 0; r < replicates; ++r) {
            SweepCell out{cell, coords, r, config};
            out.config.seed = cell_seed(base_seed, coords, r);
            cells.push_back(std::move(out));
        }
    }
    return cells;
}

}  // namespace nutmeg
