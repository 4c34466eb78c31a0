#include "nutmeg/pipeline.hpp"

#include <algorithm>
#include <map>

namespace nutmeg {

Method parse_method(const std::string& name) {
    if (name == "nutmeg") return Method::Nutmeg;
    if (name == "mace") return Method::Mace;
    if (name == "majority") return Method::Majority;
    if (name == "dawid-skene") return Method::DawidSkene;
    throw ValidationError({"unknown method '" + name + "' (expected nutmeg, mace, majority or dawid-skene)"});
}

const char* to_string(Method method) noexcept {
    switch (method) {
        case Method::Nutmeg: return "nutmeg";
        case Method::Mace: return "mace";
        case Method::Majority: return "majority";
        case Method::DawidSkene: return "dawid-skene";
    }
    return "unknown";
}

bool is_single_truth(Method method) noexcept { return method != Method::Nutmeg; }

namespace {

PosteriorTable as_table(const BaselineResult& result) { return result.broadcast(1); }

}  // namespace

AggregateOutput aggregate(const Dataset& data, Method method, const FitConfig& config,
                          const ImputationPolicy& policy) {
    AggregateOutput out;
    out.method = method;
    switch (method) {
        case Method::Nutmeg: {
            auto result = fit(data, config);
            out.subpopulations = data.subpopulations();
            out.posterior = impute(result, config, policy);
            out.competence = std::move(result.competence);
            break;
        }
        case Method::Mace: {
            auto result = mace(data, config);
            out.subpopulations = {kAllSubpopulations};
            out.posterior = std::move(result.posterior);
            out.competence = std::move(result.competence);
            break;
        }
        case Method::Majority:
            out.subpopulations = {kAllSubpopulations};
            out.posterior = as_table(majority_vote(data));
            break;
        case Method::DawidSkene:
            out.subpopulations = {kAllSubpopulations};
            out.posterior = as_table(dawid_skene(data, config).result);
            break;
    }
    return out;
}

PosteriorTable broadcast(const PosteriorTable& single, std::size_t n_subpops) {
    PosteriorTable table(single.n_items(), n_subpops, single.n_labels());
    for (std::size_t i = 0; i < single.n_items(); ++i) {
        for (std::size_t k = 0; k < n_subpops; ++k) {
            const auto src = single.cell(i, 0);
            std::copy(src.begin(), src.end(), table.cell(i, k).begin());
            table.set_status(i, k, single.status(i, 0));
        }
    }
    table.redecode();
    return table;
}

std::vector<std::string> metric_names(const std::vector<std::string>& subpopulations) {
    std::vector<std::string> names;
    for (const auto& s : subpopulations) names.push_back("accuracy_" + s);
    for (const auto& s : subpopulations) names.push_back("accuracy_observed_" + s);
    names.push_back("divisiveness_estimate");
    names.push_back("competence_pearson");
    for (const auto& s : subpopulations) names.push_back("jsd_" + s);
    return names;
}

std::vector<MetricRow> evaluate_methods(const SyntheticWorld& world, const std::vector<Method>& methods,
                                        const std::vector<std::string>& metrics, const FitConfig& config,
                                        const ImputationPolicy& policy) {
    std::vector<MetricRow> rows;
    auto fail_all = [&](const std::string& method, const std::string& what) {
        for (const auto& metric : metrics) rows.push_back({method, metric, std::nullopt, "error: " + what});
    };

    std::optional<Dataset> data;
    try {
        data.emplace(world.dataset());
    } catch (const std::exception& e) {
        for (Method m : methods) fail_all(to_string(m), e.what());
        return rows;
    }

    const auto& groups = world.subpops.subpopulations;
    for (Method method : methods) {
        try {
            auto output = aggregate(*data, method, config, policy);
            const auto table = output.posterior.n_subpops() == groups.size()
                                   ? output.posterior
                                   : broadcast(output.posterior, groups.size());
            const auto report = evaluate(table, *data, world, output.competence ? &*output.competence : nullptr);

            std::map<std::string, std::optional<double>> values;
            for (std::size_t k = 0; k < groups.size(); ++k) {
                values["accuracy_" + groups[k]] = report.accuracy[k];
                values["accuracy_observed_" + groups[k]] = report.accuracy_observed[k];
                values["jsd_" + groups[k]] = report.jsd[k];
            }
            values["divisiveness_estimate"] = report.divisiveness_estimate;
            values["competence_pearson"] = report.competence_pearson;

            for (const auto& metric : metrics) {
                const auto it = values.find(metric);
                if (it == values.end()) {
                    rows.push_back({to_string(method), metric, std::nullopt, "error: unknown metric"});
                } else if (it->second) {
                    rows.push_back({to_string(method), metric, it->second, "ok"});
                } else {
                    rows.push_back({to_string(method), metric, std::nullopt, "undefined"});
                }
            }
        } catch (const std::exception& e) {
            fail_all(to_string(method), e.what());
        }
    }
    return rows;
}

}  // namespace nutmeg
