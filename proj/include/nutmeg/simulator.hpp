#pragma once
// Synthetic crowd-annotation worlds with two subpopulations, per-annotator
// spam rates and a controlled fraction of divisive items.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "nutmeg/dataset.hpp"
#include "nutmeg/types.hpp"

namespace nutmeg {

struct SimConfig {
    std::size_t n_annotators = 150;
    double minority_proportion = 0.2;
    std::size_t n_items = 500;
    std::size_t n_labels = 2;
    double global_spam_rate = 0.1;
    double divisiveness_rate = 0.2;
    std::size_t annotations_per_item = 5;
    std::uint64_t seed = 0;
    // Per-annotator spam rates ~ Beta(c m, c (1 - m)) with m the global rate.
    double spam_rate_concentration = 5.0;
    bool constant_spam_rate = false;  // every annotator gets exactly m

    void check() const;  // throws ValidationError
};

inline constexpr std::size_t kMajority = 0;
inline constexpr std::size_t kMinority = 1;

struct SyntheticWorld {
    SimConfig config;
    AnnotationSet annotations;  // annotators without any record are omitted
    SubpopulationMap subpops;   // "majority", "minority"

    // Indexed over all generated annotators.
    std::vector<std::string> annotator_ids;
    std::vector<std::size_t> annotator_subpop;
    std::vector<double> true_spam_rates;

    std::vector<std::size_t> true_labels;  // N x 2, row-major
    std::vector<std::size_t> divisive_items;
    std::vector<char> spam_draws;  // per record, whether the annotator spammed

    std::size_t true_label(std::size_t item, std::size_t subpop) const noexcept {
        return true_labels[item * 2 + subpop];
    }
    // Generated-annotator index of each annotator in `annotations`.
    std::vector<std::size_t> annotator_origin;

    Dataset dataset() const;
};

// Deterministic in config.seed. Throws ValidationError on infeasible configs.
SyntheticWorld generate(const SimConfig& config);

struct GridAxis {
    std::string field;  // SimConfig field name, snake_case
    std::vector<double> values;
};

struct SweepCell {
    std::size_t cell_index = 0;
    std::vector<std::size_t> coords;  // one index per axis
    std::size_t replicate = 0;
    SimConfig config;  // seed already derived
};

// Sets a numeric SimConfig field by name; throws ValidationError on unknown
// fields or values that do not fit the field's type.
void set_field(SimConfig& config, const std::string& field, double value);
double get_field(const SimConfig& config, const std::string& field);
const std::vector<std::string>& sim_config_fields();

std::uint64_t cell_seed(std::uint64_t base_seed, const std::vector<std::size_t>& coords, std::size_t replicate);

// Cartesian product over the axes (first axis slowest), replicates innermost.
// Worlds are generated on demand with generate(cell.config).
std::vector<SweepCell> sweep_grid(const SimConfig& base, const std::vector<GridAxis>& axes, std::size_t replicates,
                                  std::uint64_t base_seed);

}  // namespace nutmeg
