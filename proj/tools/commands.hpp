#pragma once
// Command implementations behind the `nutmeg` executable. Each command writes
// its outputs plus a manifest.json that is enough to replay it with `rerun`.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "nutmeg/imputation.hpp"
#include "nutmeg/inference.hpp"
#include "nutmeg/simulator.hpp"

namespace nutmeg::cli {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr const char* kToolVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kValidationFailure = 1, kNumericalFailure = 2, kIoFailure = 3 };

struct AggregateOptions {
    fs::path annotations;
    fs::path annotators;  // required for nutmeg
    std::string method = "nutmeg";
    std::vector<std::string> labels;  // empty: inferred from the data
    FitConfig fit;
    ImputationPolicy imputation;
    fs::path out;
};

struct SimulateOptions {
    SimConfig sim;
    fs::path out;
};

struct EvaluateOptions {
    fs::path labels;
    fs::path truth_labels;
    fs::path truth_spam;   // optional, with competence
    fs::path competence;   // optional
    fs::path posteriors;   // optional, with annotations + annotators, enables JSD
    fs::path annotations;
    fs::path annotators;
    std::string log_base = "e";
    fs::path out;  // optional; metrics.json and manifest.json go here
};

struct SweepOptions {
    fs::path grid;
    json grid_spec;  // loaded from `grid` unless already set
    std::vector<std::string> methods = {"nutmeg", "mace", "majority", "dawid-skene"};
    std::vector<std::string> metrics;  // empty: all
    std::size_t replicates = 5;
    std::uint64_t seed = 0;
    SimConfig base;
    FitConfig fit;
    ImputationPolicy imputation;
    int threads = 1;
    fs::path out;
};

void cmd_aggregate(const AggregateOptions& options);
void cmd_simulate(const SimulateOptions& options);
json cmd_evaluate(const EvaluateOptions& options);
void cmd_sweep(const SweepOptions& options);
// Verifies input digests, then replays the recorded command into `out`
// (defaults to the manifest's directory).
void cmd_rerun(const fs::path& manifest, const std::optional<fs::path>& out);

json to_json(const FitConfig& config);
FitConfig fit_config_from_json(const json& j);
json to_json(const SimConfig& config);
SimConfig sim_config_from_json(const json& j);

// Parses argv, runs the command, maps exceptions to exit codes.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);

}  // namespace nutmeg::cli
