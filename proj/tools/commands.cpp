#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "CLI11.hpp"

#include "nutmeg/dataset.hpp"
#include "nutmeg/io.hpp"
#include "nutmeg/metrics.hpp"
#include "nutmeg/pipeline.hpp"

namespace nutmeg::cli {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string absolute_string(const fs::path& p) {
    if (p.empty()) return {};
    return fs::absolute(p).lexically_normal().string();
}

json input_entry(const fs::path& p) {
    return {{"path", absolute_string(p)}, {"sha256", io::sha256_file(p)}};
}

void write_manifest(const fs::path& out, const std::string& command, const json& config, std::uint64_t seed,
                    const json& inputs, const std::vector<std::string>& outputs, double seconds) {
    json manifest;
    manifest["tool"] = "nutmeg";
    manifest["tool_version"] = kToolVersion;
    manifest["command"] = command;
    manifest["seed"] = seed;
    manifest["config"] = config;
    manifest["inputs"] = inputs.is_null() ? json::object() : inputs;
    json digests = json::object();
    for (const auto& name : outputs) digests[name] = io::sha256_file(out / name);
    manifest["outputs"] = digests;
    manifest["duration_seconds"] = seconds;
    io::write_file(out / "manifest.json", manifest.dump(2) + "\n");
}

const char* training_name(TrainingMode mode) { return mode == TrainingMode::Variational ? "vb" : "map"; }

TrainingMode parse_training(const std::string& name) {
    if (name == "vb") return TrainingMode::Variational;
    if (name == "map") return TrainingMode::Smoothed;
    throw ValidationError({"unknown training mode '" + name + "' (expected vb or map)"});
}

const char* imputation_name(ImputationMode mode) { return mode == ImputationMode::Impute ? "impute" : "leave-missing"; }

ImputationMode parse_imputation(const std::string& name) {
    if (name == "impute") return ImputationMode::Impute;
    if (name == "leave-missing" || name == "leave_missing") return ImputationMode::LeaveMissing;
    throw ValidationError({"unknown imputation mode '" + name + "' (expected impute or leave-missing)"});
}

json imputation_json(const ImputationPolicy& policy) {
    return {{"mode", imputation_name(policy.mode)}, {"min_support", policy.min_support}};
}

ImputationPolicy imputation_from_json(const json& j) {
    ImputationPolicy policy;
    policy.mode = parse_imputation(j.at("mode").get<std::string>());
    policy.min_support = j.at("min_support").get<std::size_t>();
    return policy;
}

std::string sanitize(std::string s) {
    for (char& c : s) {
        if (c == ',') c = ';';
        if (c == '\n' || c == '\r') c = ' ';
    }
    return s;
}

}  // namespace

json to_json(const FitConfig& config) {
    return {{"max_iterations", config.max_iterations},
            {"convergence_tol", config.convergence_tol},
            {"restarts", config.restarts},
            {"seed", config.seed},
            {"theta_prior", {config.theta_prior.a, config.theta_prior.b}},
            {"xi_prior", config.xi_prior},
            {"truth_prior", config.truth_prior},
            {"training", training_name(config.mode)},
            {"threads", config.threads}};
}

FitConfig fit_config_from_json(const json& j) {
    FitConfig config;
    config.max_iterations = j.at("max_iterations").get<int>();
    config.convergence_tol = j.at("convergence_tol").get<double>();
    config.restarts = j.at("restarts").get<int>();
    config.seed = j.at("seed").get<std::uint64_t>();
    config.theta_prior = {j.at("theta_prior").at(0).get<double>(), j.at("theta_prior").at(1).get<double>()};
    config.xi_prior = j.at("xi_prior").get<double>();
    config.truth_prior = j.at("truth_prior").get<std::vector<double>>();
    config.mode = parse_training(j.at("training").get<std::string>());
    config.threads = j.at("threads").get<int>();
    return config;
}

json to_json(const SimConfig& config) {
    return {{"n_annotators", config.n_annotators},
            {"minority_proportion", config.minority_proportion},
            {"n_items", config.n_items},
            {"n_labels", config.n_labels},
            {"global_spam_rate", config.global_spam_rate},
            {"divisiveness_rate", config.divisiveness_rate},
            {"annotations_per_item", config.annotations_per_item},
            {"seed", config.seed},
            {"spam_rate_concentration", config.spam_rate_concentration},
            {"constant_spam_rate", config.constant_spam_rate}};
}

SimConfig sim_config_from_json(const json& j) {
    SimConfig config;
    config.n_annotators = j.at("n_annotators").get<std::size_t>();
    config.minority_proportion = j.at("minority_proportion").get<double>();
    config.n_items = j.at("n_items").get<std::size_t>();
    config.n_labels = j.at("n_labels").get<std::size_t>();
    config.global_spam_rate = j.at("global_spam_rate").get<double>();
    config.divisiveness_rate = j.at("divisiveness_rate").get<double>();
    config.annotations_per_item = j.at("annotations_per_item").get<std::size_t>();
    config.seed = j.at("seed").get<std::uint64_t>();
    config.spam_rate_concentration = j.at("spam_rate_concentration").get<double>();
    config.constant_spam_rate = j.at("constant_spam_rate").get<bool>();
    return config;
}

// ---------------------------------------------------------------- aggregate

namespace {

json aggregate_config(const AggregateOptions& o) {
    return {{"annotations", absolute_string(o.annotations)},
            {"annotators", absolute_string(o.annotators)},
            {"method", o.method},
            {"labels", o.labels},
            {"fit", to_json(o.fit)},
            {"imputation", imputation_json(o.imputation)}};
}

AggregateOptions aggregate_from_json(const json& j) {
    AggregateOptions o;
    o.annotations = j.at("annotations").get<std::string>();
    o.annotators = j.at("annotators").get<std::string>();
    o.method = j.at("method").get<std::string>();
    o.labels = j.at("labels").get<std::vector<std::string>>();
    o.fit = fit_config_from_json(j.at("fit"));
    o.imputation = imputation_from_json(j.at("imputation"));
    return o;
}

}  // namespace

void cmd_aggregate(const AggregateOptions& options) {
    const auto start = Clock::now();
    const Method method = parse_method(options.method);
    if (options.out.empty()) throw ValidationError({"--out is required"});

    std::optional<std::vector<std::string>> labels;
    if (!options.labels.empty()) labels = options.labels;
    AnnotationSet annotations = io::read_annotations(options.annotations, labels);
    json inputs = {{"annotations", input_entry(options.annotations)}};

    SubpopulationMap subpops;
    if (method == Method::Nutmeg) {
        if (options.annotators.empty()) throw ValidationError({"--annotators is required for method nutmeg"});
        subpops = io::read_annotators(options.annotators);
        inputs["annotators"] = input_entry(options.annotators);
    } else {
        subpops = SubpopulationMap::single(annotations, kAllSubpopulations);
    }
    const Dataset data = Dataset::validate(std::move(annotations), subpops);
    const auto output = aggregate(data, method, options.fit, options.imputation);

    std::vector<std::string> outputs = {"labels.csv", "posteriors.csv"};
    io::write_file(options.out / "labels.csv", io::labels_csv(data.annotations(), output));
    io::write_file(options.out / "posteriors.csv", io::posteriors_csv(data.annotations(), output));
    if (output.competence) {
        io::write_file(options.out / "competence.csv", io::competence_csv(data.annotations(), *output.competence));
        outputs.push_back("competence.csv");
    }
    write_manifest(options.out, "aggregate", aggregate_config(options), options.fit.seed, inputs, outputs,
                   seconds_since(start));
}

// ----------------------------------------------------------------- simulate

void cmd_simulate(const SimulateOptions& options) {
    const auto start = Clock::now();
    if (options.out.empty()) throw ValidationError({"--out is required"});
    const SyntheticWorld world = generate(options.sim);
    io::write_file(options.out / "annotations.csv", io::annotations_csv(world.annotations));
    io::write_file(options.out / "annotators.csv",
                   io::annotators_csv(world.annotator_ids, world.annotator_subpop, world.subpops.subpopulations));
    io::write_file(options.out / "truth_labels.csv", io::truth_labels_csv(world));
    io::write_file(options.out / "truth_spam.csv", io::truth_spam_csv(world));
    write_manifest(options.out, "simulate", {{"sim", to_json(options.sim)}}, options.sim.seed, json::object(),
                   {"annotations.csv", "annotators.csv", "truth_labels.csv", "truth_spam.csv"}, seconds_since(start));
}

// ----------------------------------------------------------------- evaluate

namespace {

struct Prediction {
    std::string label;
    std::string imputed;  // "true", "false" or "missing"
};

using CellKey = std::pair<std::string, std::string>;  // item, subpopulation

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json evaluate_config(const EvaluateOptions& o) {
    return {{"labels", absolute_string(o.labels)},           {"truth_labels", absolute_string(o.truth_labels)},
            {"truth_spam", absolute_string(o.truth_spam)},   {"competence", absolute_string(o.competence)},
            {"posteriors", absolute_string(o.posteriors)},   {"annotations", absolute_string(o.annotations)},
            {"annotators", absolute_string(o.annotators)},   {"log_base", o.log_base}};
}

EvaluateOptions evaluate_from_json(const json& j) {
    EvaluateOptions o;
    o.labels = j.at("labels").get<std::string>();
    o.truth_labels = j.at("truth_labels").get<std::string>();
    o.truth_spam = j.at("truth_spam").get<std::string>();
    o.competence = j.at("competence").get<std::string>();
    o.posteriors = j.at("posteriors").get<std::string>();
    o.annotations = j.at("annotations").get<std::string>();
    o.annotators = j.at("annotators").get<std::string>();
    o.log_base = j.at("log_base").get<std::string>();
    return o;
}

}  // namespace

json cmd_evaluate(const EvaluateOptions& options) {
    const auto start = Clock::now();
    LogBase base = LogBase::Natural;
    if (options.log_base == "2") base = LogBase::Two;
    else if (options.log_base != "e") throw ValidationError({"--log-base must be e or 2"});

    json inputs = {{"labels", input_entry(options.labels)}, {"truth_labels", input_entry(options.truth_labels)}};

    // Truth.
    const auto truth_table = io::read_csv(options.truth_labels);
    const auto t_item = truth_table.column("item_id");
    const auto t_sub = truth_table.column("subpopulation");
    const auto t_label = truth_table.column("true_label");
    std::vector<std::string> groups;
    std::vector<std::string> truth_items;
    std::map<CellKey, std::string> truth;
    for (std::size_t r = 0; r < truth_table.rows.size(); ++r) {
        const auto& row = truth_table.rows[r];
        if (std::find(groups.begin(), groups.end(), row[t_sub]) == groups.end()) groups.push_back(row[t_sub]);
        if (!truth.emplace(CellKey{row[t_item], row[t_sub]}, row[t_label]).second)
            truth_table.fail(r, "duplicate truth for item '" + row[t_item] + "'");
        if (truth_items.empty() || truth_items.back() != row[t_item]) truth_items.push_back(row[t_item]);
    }
    std::set<std::string> truth_item_set(truth_items.begin(), truth_items.end());

    // Predictions.
    const auto label_table = io::read_csv(options.labels);
    const auto l_item = label_table.column("item_id");
    const auto l_sub = label_table.column("subpopulation");
    const auto l_label = label_table.column("label");
    const auto l_imputed = label_table.column("imputed");
    std::map<CellKey, Prediction> predictions;
    std::set<std::string> predicted_items;
    for (std::size_t r = 0; r < label_table.rows.size(); ++r) {
        const auto& row = label_table.rows[r];
        const auto& flag = row[l_imputed];
        if (flag != "true" && flag != "false" && flag != "missing")
            label_table.fail(r, "imputed must be true, false or missing");
        if (!predictions.emplace(CellKey{row[l_item], row[l_sub]}, Prediction{row[l_label], flag}).second)
            label_table.fail(r, "duplicate prediction for item '" + row[l_item] + "'");
        predicted_items.insert(row[l_item]);
    }

    std::vector<std::string> only_predicted;
    std::vector<std::string> only_truth;
    std::vector<std::string> shared;
    for (const auto& item : predicted_items)
        if (!truth_item_set.count(item)) only_predicted.push_back(item);
    for (const auto& item : truth_items) {
        if (predicted_items.count(item)) shared.push_back(item);
        else only_truth.push_back(item);
    }
    if (shared.empty())
        throw ValidationError({"labels and truth share no item identifiers (" + std::to_string(predicted_items.size()) +
                               " predicted, " + std::to_string(truth_items.size()) + " in truth)"});

    auto lookup = [&](const std::string& item, const std::string& group) -> const Prediction* {
        auto it = predictions.find({item, group});
        if (it == predictions.end()) it = predictions.find({item, kAllSubpopulations});
        if (it == predictions.end() || it->second.imputed == "missing") return nullptr;
        return &it->second;
    };

    json report;
    json accuracy = json::object();
    json accuracy_observed = json::object();
    json cells_evaluated = json::object();
    json cells_observed = json::object();
    for (const auto& group : groups) {
        std::size_t total = 0, correct = 0, obs_total = 0, obs_correct = 0;
        for (const auto& item : shared) {
            const auto t = truth.find({item, group});
            if (t == truth.end()) continue;
            const Prediction* p = lookup(item, group);
            if (!p) continue;
            const bool hit = p->label == t->second;
            ++total;
            correct += hit;
            if (p->imputed == "false") {
                ++obs_total;
                obs_correct += hit;
            }
        }
        accuracy[group] = total ? json(static_cast<double>(correct) / static_cast<double>(total)) : json(nullptr);
        accuracy_observed[group] =
            obs_total ? json(static_cast<double>(obs_correct) / static_cast<double>(obs_total)) : json(nullptr);
        cells_evaluated[group] = total;
        cells_observed[group] = obs_total;
    }
    report["accuracy"] = accuracy;
    report["accuracy_observed"] = accuracy_observed;
    report["cells_evaluated"] = cells_evaluated;
    report["cells_observed"] = cells_observed;

    report["divisiveness_estimate"] = nullptr;
    if (groups.size() == 2) {
        std::size_t total = 0, differ = 0;
        for (const auto& item : shared) {
            const Prediction* a = lookup(item, groups[0]);
            const Prediction* b = lookup(item, groups[1]);
            if (!a || !b) continue;
            ++total;
            differ += a->label != b->label;
        }
        if (total) report["divisiveness_estimate"] = static_cast<double>(differ) / static_cast<double>(total);
    }

    report["competence_pearson"] = nullptr;
    if (!options.competence.empty() && !options.truth_spam.empty()) {
        inputs["competence"] = input_entry(options.competence);
        inputs["truth_spam"] = input_entry(options.truth_spam);
        const auto comp = io::read_csv(options.competence);
        const auto spam = io::read_csv(options.truth_spam);
        const auto c_id = comp.column("annotator_id");
        const auto c_theta = comp.column("theta");
        const auto s_id = spam.column("annotator_id");
        const auto s_rate = spam.column("true_spam_rate");
        std::unordered_map<std::string, double> rates;
        for (std::size_t r = 0; r < spam.rows.size(); ++r) {
            try {
                rates[spam.rows[r][s_id]] = std::stod(spam.rows[r][s_rate]);
            } catch (const std::exception&) {
                spam.fail(r, "invalid spam rate");
            }
        }
        std::vector<double> fitted, actual;
        for (std::size_t r = 0; r < comp.rows.size(); ++r) {
            const auto it = rates.find(comp.rows[r][c_id]);
            if (it == rates.end()) continue;
            try {
                fitted.push_back(std::stod(comp.rows[r][c_theta]));
            } catch (const std::exception&) {
                comp.fail(r, "invalid theta");
            }
            actual.push_back(1.0 - it->second);
        }
        if (fitted.empty()) throw ValidationError({"competence and truth_spam share no annotator identifiers"});
        report["competence_pearson"] = optional_json(pearson(fitted, actual));
    }

    report["jsd"] = nullptr;
    if (!options.posteriors.empty() && !options.annotations.empty() && !options.annotators.empty()) {
        inputs["posteriors"] = input_entry(options.posteriors);
        inputs["annotations"] = input_entry(options.annotations);
        inputs["annotators"] = input_entry(options.annotators);
        const auto annotations = io::read_annotations(options.annotations);
        const auto subpops = io::read_annotators(options.annotators);
        const auto& label_names = annotations.label_space.labels;
        const std::size_t n_labels = label_names.size();

        std::map<CellKey, std::vector<double>> empirical;
        for (const auto& rec : annotations.records) {
            const auto a = subpops.assignment.find(annotations.annotators[rec.annotator]);
            if (a == subpops.assignment.end())
                throw ValidationError({"annotator '" + annotations.annotators[rec.annotator] + "' has no subpopulation"});
            auto& counts = empirical[{annotations.items[rec.item], subpops.subpopulations[a->second]}];
            counts.resize(n_labels, 0.0);
            counts[rec.label] += 1.0;
        }

        const auto post = io::read_csv(options.posteriors);
        const auto p_item = post.column("item_id");
        const auto p_sub = post.column("subpopulation");
        const auto p_label = post.column("label");
        const auto p_prob = post.column("probability");
        std::map<CellKey, std::vector<double>> predicted;
        for (std::size_t r = 0; r < post.rows.size(); ++r) {
            const auto& row = post.rows[r];
            const auto l = annotations.label_space.index_of(row[p_label]);
            if (!l) post.fail(r, "label '" + row[p_label] + "' does not occur in the annotations");
            auto& dist = predicted[{row[p_item], row[p_sub]}];
            dist.resize(n_labels, 0.0);
            try {
                dist[*l] = std::stod(row[p_prob]);
            } catch (const std::exception&) {
                post.fail(r, "invalid probability");
            }
        }

        json jsd_json = json::object();
        for (const auto& group : groups) {
            double sum = 0.0;
            std::size_t count = 0;
            for (const auto& item : shared) {
                const auto e = empirical.find({item, group});
                if (e == empirical.end()) continue;
                auto p = predicted.find({item, group});
                if (p == predicted.end()) p = predicted.find({item, kAllSubpopulations});
                if (p == predicted.end()) continue;
                const Prediction* flag = lookup(item, group);
                if (flag && flag->imputed != "false") continue;
                std::vector<double> emp = e->second;
                double n = 0.0;
                for (double v : emp) n += v;
                for (double& v : emp) v /= n;
                sum += jsd(p->second, emp, base);
                ++count;
            }
            jsd_json[group] = count ? json(sum / static_cast<double>(count)) : json(nullptr);
        }
        report["jsd"] = jsd_json;
    }
    report["log_base"] = options.log_base;
    report["identifier_mismatch"] = {{"items_only_in_labels", only_predicted.size()},
                                     {"items_only_in_truth", only_truth.size()},
                                     {"items_evaluated", shared.size()}};

    if (!options.out.empty()) {
        io::write_file(options.out / "metrics.json", report.dump(2) + "\n");
        write_manifest(options.out, "evaluate", evaluate_config(options), 0, inputs, {"metrics.json"},
                       seconds_since(start));
    }
    return report;
}

// -------------------------------------------------------------------- sweep

namespace {

json sweep_config(const SweepOptions& o, const std::vector<std::string>& metrics) {
    return {{"grid", absolute_string(o.grid)},
            {"grid_spec", o.grid_spec},
            {"methods", o.methods},
            {"metrics", metrics},
            {"replicates", o.replicates},
            {"seed", o.seed},
            {"base", to_json(o.base)},
            {"fit", to_json(o.fit)},
            {"imputation", imputation_json(o.imputation)},
            {"threads", o.threads}};
}

SweepOptions sweep_from_json(const json& j) {
    SweepOptions o;
    o.grid = j.at("grid").get<std::string>();
    o.grid_spec = j.at("grid_spec");
    o.methods = j.at("methods").get<std::vector<std::string>>();
    o.metrics = j.at("metrics").get<std::vector<std::string>>();
    o.replicates = j.at("replicates").get<std::size_t>();
    o.seed = j.at("seed").get<std::uint64_t>();
    o.base = sim_config_from_json(j.at("base"));
    o.fit = fit_config_from_json(j.at("fit"));
    o.imputation = imputation_from_json(j.at("imputation"));
    o.threads = j.at("threads").get<int>();
    return o;
}

std::vector<GridAxis> axes_from_json(const json& spec) {
    if (!spec.is_object()) throw ValidationError({"grid spec must be a JSON object mapping field to value list"});
    std::vector<GridAxis> axes;
    for (const auto& [field, values] : spec.items()) {
        if (!values.is_array()) throw ValidationError({"grid field '" + field + "' must map to a list"});
        GridAxis axis{field, {}};
        for (const auto& v : values) {
            if (v.is_boolean()) axis.values.push_back(v.get<bool>() ? 1.0 : 0.0);
            else if (v.is_number()) axis.values.push_back(v.get<double>());
            else throw ValidationError({"grid field '" + field + "' has a non-numeric value"});
        }
        axes.push_back(std::move(axis));
    }
    return axes;
}

std::string results_header() {
    std::string header = "cell,replicate";
    for (const auto& f : sim_config_fields()) header += "," + f;
    header += ",method,metric_name,value,status";
    return header;
}

using GroupKey = std::pair<std::size_t, std::size_t>;  // cell, replicate

// Complete (cell, replicate) blocks of an existing results file.
std::map<GroupKey, std::vector<std::string>> read_blocks(const fs::path& path, std::size_t block_size) {
    std::map<GroupKey, std::vector<std::string>> blocks;
    if (!fs::exists(path)) return blocks;
    const std::string content = io::read_file(path);
    std::size_t pos = 0;
    bool header = true;
    while (pos < content.size()) {
        const auto nl = content.find('\n', pos);
        if (nl == std::string::npos) break;  // partial trailing line
        std::string line = content.substr(pos, nl - pos);
        pos = nl + 1;
        if (header) {
            header = false;
            if (line != results_header()) return {};
            continue;
        }
        const auto c1 = line.find(',');
        const auto c2 = c1 == std::string::npos ? std::string::npos : line.find(',', c1 + 1);
        if (c2 == std::string::npos) continue;
        try {
            GroupKey key{std::stoul(line.substr(0, c1)), std::stoul(line.substr(c1 + 1, c2 - c1 - 1))};
            blocks[key].push_back(std::move(line));
        } catch (const std::exception&) {
        }
    }
    for (auto it = blocks.begin(); it != blocks.end();) {
        if (it->second.size() != block_size) it = blocks.erase(it);
        else ++it;
    }
    return blocks;
}

}  // namespace

void cmd_sweep(const SweepOptions& input) {
    const auto start = Clock::now();
    SweepOptions options = input;
    if (options.out.empty()) throw ValidationError({"--out is required"});
    json inputs = json::object();
    if (options.grid_spec.is_null()) {
        if (options.grid.empty()) throw ValidationError({"--grid is required"});
        try {
            options.grid_spec = json::parse(io::read_file(options.grid));
        } catch (const json::parse_error& e) {
            throw io::ParseError(options.grid.string() + ": " + e.what());
        }
    }
    if (!options.grid.empty() && fs::exists(options.grid)) inputs["grid"] = input_entry(options.grid);
    if (options.replicates < 1) throw ValidationError({"--replicates must be positive"});
    if (options.threads < 1) throw ValidationError({"--threads must be positive"});

    std::vector<Method> methods;
    for (const auto& m : options.methods) methods.push_back(parse_method(m));
    if (methods.empty()) throw ValidationError({"--methods must name at least one method"});
    const auto all_metrics = metric_names({"majority", "minority"});
    std::vector<std::string> metrics = options.metrics.empty() ? all_metrics : options.metrics;
    for (const auto& m : metrics)
        if (std::find(all_metrics.begin(), all_metrics.end(), m) == all_metrics.end())
            throw ValidationError({"unknown metric '" + m + "'"});
    options.fit.check(2);

    const auto cells = sweep_grid(options.base, axes_from_json(options.grid_spec), options.replicates, options.seed);
    const std::size_t block_size = methods.size() * metrics.size();

    // Resume only when the previous run used the same configuration.
    json state = sweep_config(options, metrics);
    state.erase("threads");
    state.erase("grid");
    const fs::path results = options.out / "results.csv";
    const fs::path state_path = options.out / "sweep_state.json";
    std::map<GroupKey, std::vector<std::string>> done;
    if (fs::exists(state_path)) {
        json previous;
        try {
            previous = json::parse(io::read_file(state_path));
        } catch (const json::parse_error&) {
        }
        if (previous == state) done = read_blocks(results, block_size);
    }
    io::write_file(state_path, state.dump(2) + "\n");
    {
        std::string content = results_header() + "\n";
        for (const auto& [key, lines] : done)
            for (const auto& line : lines) content += line + "\n";
        io::write_file(results, content);
    }

    std::FILE* sink = std::fopen(results.c_str(), "ab");
    if (!sink) throw io::IoError("cannot open '" + results.string() + "' for appending");
    std::mutex sink_mutex;
    std::atomic<std::size_t> next{0};
    std::atomic<bool> write_failed{false};

    auto work = [&] {
        for (std::size_t x = next++; x < cells.size(); x = next++) {
            const auto& cell = cells[x];
            if (done.count({cell.cell_index, cell.replicate})) continue;

            std::vector<MetricRow> rows;
            try {
                const auto world = generate(cell.config);
                FitConfig fit = options.fit;
                fit.seed = cell.config.seed;
                fit.threads = 1;
                rows = evaluate_methods(world, methods, metrics, fit, options.imputation);
            } catch (const std::exception& e) {
                rows.clear();
                for (const auto& m : options.methods)
                    for (const auto& metric : metrics)
                        rows.push_back({m, metric, std::nullopt, std::string("error: ") + e.what()});
            }

            std::string prefix = std::to_string(cell.cell_index) + "," + std::to_string(cell.replicate);
            for (const auto& f : sim_config_fields()) {
                if (f == "seed") prefix += "," + std::to_string(cell.config.seed);
                else prefix += "," + io::format_double(get_field(cell.config, f));
            }
            std::string block;
            for (const auto& row : rows)
                block += prefix + "," + row.method + "," + row.metric + "," +
                         (row.value ? io::format_double(*row.value) : std::string()) + "," + sanitize(row.status) +
                         "\n";

            std::lock_guard lock(sink_mutex);
            if (std::fwrite(block.data(), 1, block.size(), sink) != block.size() || std::fflush(sink) != 0)
                write_failed = true;
        }
    };
    {
        std::vector<std::jthread> pool;
        for (int t = 0; t < options.threads; ++t) pool.emplace_back(work);
    }
    std::fclose(sink);
    if (write_failed) throw io::IoError("error appending to '" + results.string() + "'");

    // Canonical order regardless of scheduling.
    const auto blocks = read_blocks(results, block_size);
    std::string content = results_header() + "\n";
    for (const auto& [key, lines] : blocks)
        for (const auto& line : lines) content += line + "\n";
    io::write_file(results, content);

    write_manifest(options.out, "sweep", sweep_config(options, metrics), options.seed, inputs, {"results.csv"},
                   seconds_since(start));
}

// -------------------------------------------------------------------- rerun

void cmd_rerun(const fs::path& manifest_path, const std::optional<fs::path>& out) {
    json manifest;
    try {
        manifest = json::parse(io::read_file(manifest_path));
    } catch (const json::parse_error& e) {
        throw io::ParseError(manifest_path.string() + ": " + e.what());
    }
    const fs::path target = out ? *out : fs::absolute(manifest_path).parent_path();

    std::vector<std::string> drift;
    for (const auto& [name, entry] : manifest.at("inputs").items()) {
        const fs::path p = entry.at("path").get<std::string>();
        if (!fs::exists(p)) {
            drift.push_back("input '" + name + "' (" + p.string() + ") no longer exists");
        } else if (io::sha256_file(p) != entry.at("sha256").get<std::string>()) {
            drift.push_back("input '" + name + "' (" + p.string() + ") changed since the recorded run");
        }
    }
    if (!drift.empty()) throw ValidationError(std::move(drift));

    const auto command = manifest.at("command").get<std::string>();
    const auto& config = manifest.at("config");
    if (command == "aggregate") {
        auto o = aggregate_from_json(config);
        o.out = target;
        cmd_aggregate(o);
    } else if (command == "simulate") {
        cmd_simulate({sim_config_from_json(config.at("sim")), target});
    } else if (command == "evaluate") {
        auto o = evaluate_from_json(config);
        o.out = target;
        cmd_evaluate(o);
    } else if (command == "sweep") {
        auto o = sweep_from_json(config);
        o.out = target;
        cmd_sweep(o);
    } else {
        throw ValidationError({"manifest names unknown command '" + command + "'"});
    }
}

// ---------------------------------------------------------------------- CLI

namespace {

struct FitFlags {
    std::vector<double> theta_prior = {0.5, 0.5};
    std::string training = "vb";
    std::string imputation = "impute";
};

void add_fit_options(CLI::App* app, FitConfig& fit, FitFlags& flags) {
    app->add_option("--max-iterations", fit.max_iterations, "EM iterations per restart")->capture_default_str();
    app->add_option("--convergence-tol", fit.convergence_tol, "Relative objective change to stop")
        ->capture_default_str();
    app->add_option("--restarts", fit.restarts, "Random restarts")->capture_default_str();
    app->add_option("--theta-prior", flags.theta_prior, "Beta prior on competence (a b)")
        ->expected(2)
        ->capture_default_str();
    app->add_option("--xi-prior", fit.xi_prior, "Symmetric Dirichlet prior on spam emissions")->capture_default_str();
    app->add_option("--truth-prior", fit.truth_prior, "Prior over labels (default uniform)")->delimiter(',');
    app->add_option("--training", flags.training, "vb or map")->capture_default_str();
}

void add_imputation_options(CLI::App* app, ImputationPolicy& policy, FitFlags& flags) {
    app->add_option("--imputation", flags.imputation, "impute or leave-missing")->capture_default_str();
    app->add_option("--min-support", policy.min_support, "Matching items needed to impute")->capture_default_str();
}

void apply_flags(FitConfig& fit, ImputationPolicy& policy, const FitFlags& flags) {
    fit.theta_prior = {flags.theta_prior.at(0), flags.theta_prior.at(1)};
    fit.mode = parse_training(flags.training);
    policy.mode = parse_imputation(flags.imputation);
}

void add_sim_options(CLI::App* app, SimConfig& sim) {
    app->add_option("--n-annotators", sim.n_annotators)->capture_default_str();
    app->add_option("--minority-proportion", sim.minority_proportion)->capture_default_str();
    app->add_option("--n-items", sim.n_items)->capture_default_str();
    app->add_option("--n-labels", sim.n_labels)->capture_default_str();
    app->add_option("--global-spam-rate,--spam-rate", sim.global_spam_rate)->capture_default_str();
    app->add_option("--divisiveness-rate,--divisiveness", sim.divisiveness_rate)->capture_default_str();
    app->add_option("--annotations-per-item", sim.annotations_per_item)->capture_default_str();
    app->add_option("--spam-rate-concentration", sim.spam_rate_concentration)->capture_default_str();
    app->add_flag("--constant-spam-rate", sim.constant_spam_rate, "Give every annotator the global rate");
}

int report_error(const std::string& what, int code) {
    std::cerr << "nutmeg: " << what << "\n";
    return code;
}

}  // namespace

int run(int argc, const char* const* argv) {
    CLI::App app{"Subpopulation-aware label aggregation"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);

    AggregateOptions agg;
    FitFlags agg_flags;
    std::string agg_labels;
    auto* aggregate_cmd = app.add_subcommand("aggregate", "Infer labels from an annotation file");
    aggregate_cmd->add_option("--annotations", agg.annotations, "item_id,annotator_id,label CSV")->required();
    aggregate_cmd->add_option("--annotators", agg.annotators, "annotator_id,subpopulation CSV");
    aggregate_cmd->add_option("--method", agg.method, "nutmeg, mace, majority or dawid-skene")->capture_default_str();
    aggregate_cmd->add_option("--labels", agg.labels, "Label space, comma separated")->delimiter(',');
    aggregate_cmd->add_option("--seed", agg.fit.seed)->capture_default_str();
    aggregate_cmd->add_option("--threads", agg.fit.threads)->capture_default_str();
    aggregate_cmd->add_option("--out", agg.out, "Output directory")->required();
    add_fit_options(aggregate_cmd, agg.fit, agg_flags);
    add_imputation_options(aggregate_cmd, agg.imputation, agg_flags);

    SimulateOptions sim;
    auto* simulate_cmd = app.add_subcommand("simulate", "Generate a synthetic annotation world");
    add_sim_options(simulate_cmd, sim.sim);
    simulate_cmd->add_option("--seed", sim.sim.seed)->capture_default_str();
    simulate_cmd->add_option("--out", sim.out, "Output directory")->required();

    EvaluateOptions eval;
    auto* evaluate_cmd = app.add_subcommand("evaluate", "Score labels against synthetic truth");
    evaluate_cmd->add_option("--labels", eval.labels, "labels.csv from aggregate")->required();
    evaluate_cmd->add_option("--truth-labels", eval.truth_labels, "truth_labels.csv from simulate")->required();
    evaluate_cmd->add_option("--truth-spam", eval.truth_spam, "truth_spam.csv from simulate");
    evaluate_cmd->add_option("--competence", eval.competence, "competence.csv from aggregate");
    evaluate_cmd->add_option("--posteriors", eval.posteriors, "posteriors.csv from aggregate");
    evaluate_cmd->add_option("--annotations", eval.annotations, "annotations used for the empirical distribution");
    evaluate_cmd->add_option("--annotators", eval.annotators, "annotator subpopulations");
    evaluate_cmd->add_option("--log-base", eval.log_base, "e or 2")->capture_default_str();
    evaluate_cmd->add_option("--out", eval.out, "Directory for metrics.json and manifest.json");

    SweepOptions sweep;
    FitFlags sweep_flags;
    auto* sweep_cmd = app.add_subcommand("sweep", "Run methods over a simulation grid");
    sweep_cmd->add_option("--grid", sweep.grid, "JSON object: field -> list of values")->required();
    sweep_cmd->add_option("--methods", sweep.methods, "Comma separated methods")->delimiter(',')->capture_default_str();
    sweep_cmd->add_option("--metrics", sweep.metrics, "Comma separated metric names (default all)")->delimiter(',');
    sweep_cmd->add_option("--replicates", sweep.replicates)->capture_default_str();
    sweep_cmd->add_option("--seed", sweep.seed)->capture_default_str();
    sweep_cmd->add_option("--threads", sweep.threads)->capture_default_str();
    sweep_cmd->add_option("--out", sweep.out, "Output directory")->required();
    add_sim_options(sweep_cmd, sweep.base);
    add_fit_options(sweep_cmd, sweep.fit, sweep_flags);
    add_imputation_options(sweep_cmd, sweep.imputation, sweep_flags);

    fs::path rerun_manifest;
    fs::path rerun_out;
    auto* rerun_cmd = app.add_subcommand("rerun", "Replay a command from its manifest.json");
    rerun_cmd->add_option("manifest", rerun_manifest, "manifest.json")->required();
    rerun_cmd->add_option("--out", rerun_out, "Output directory (default: the manifest's)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kValidationFailure;
    }

    try {
        if (*aggregate_cmd) {
            apply_flags(agg.fit, agg.imputation, agg_flags);
            cmd_aggregate(agg);
        } else if (*simulate_cmd) {
            cmd_simulate(sim);
        } else if (*evaluate_cmd) {
            std::cout << cmd_evaluate(eval).dump(2) << "\n";
        } else if (*sweep_cmd) {
            apply_flags(sweep.fit, sweep.imputation, sweep_flags);
            cmd_sweep(sweep);
        } else if (*rerun_cmd) {
            cmd_rerun(rerun_manifest, rerun_out.empty() ? std::nullopt : std::optional<fs::path>(rerun_out));
        }
    } catch (const ValidationError& e) {
        return report_error(e.what(), kValidationFailure);
    } catch (const io::ParseError& e) {
        return report_error(e.what(), kValidationFailure);
    } catch (const NumericalError& e) {
        return report_error(e.what(), kNumericalFailure);
    } catch (const io::IoError& e) {
        return report_error(e.what(), kIoFailure);
    } catch (const fs::filesystem_error& e) {
        return report_error(e.what(), kIoFailure);
    } catch (const json::exception& e) {
        return report_error(e.what(), kValidationFailure);
    } catch (const std::exception& e) {
        return report_error(e.what(), kValidationFailure);
    }
    return kOk;
}

int run(const std::vector<std::string>& args) {
    std::vector<const char*> argv;
    argv.push_back("nutmeg");
    for (const auto& a : args) argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace nutmeg::cli
