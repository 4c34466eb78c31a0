#include "nutmeg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace nutmeg {

double jsd(std::span<const double> p, std::span<const double> q, LogBase base) {
    double total = 0.0;
    for (std::size_t l = 0; l < p.size(); ++l) {
        const double m = 0.5 * (p[l] + q[l]);
        if (p[l] > 0.0) total += 0.5 * p[l] * std::log(p[l] / m);
        if (q[l] > 0.0) total += 0.5 * q[l] * std::log(q[l] / m);
    }
    total = std::max(total, 0.0);
    return base == LogBase::Two ? total / std::numbers::ln2 : total;
}

std::vector<std::optional<double>> subpop_accuracy(const PosteriorTable& table, std::span<const std::size_t> truth,
                                                   bool include_imputed) {
    const std::size_t n_subpops = table.n_subpops();
    std::vector<std::size_t> correct(n_subpops, 0);
    std::vector<std::size_t> total(n_subpops, 0);
    for (std::size_t i = 0; i < table.n_items(); ++i) {
        for (std::size_t k = 0; k < n_subpops; ++k) {
            const auto status = table.status(i, k);
            if (status == CellStatus::Missing) continue;
            if (status != CellStatus::Observed && !include_imputed) continue;
            ++total[k];
            if (table.decoded(i, k) == truth[i * n_subpops + k]) ++correct[k];
        }
    }
    std::vector<std::optional<double>> out(n_subpops);
    for (std::size_t k = 0; k < n_subpops; ++k)
        if (total[k] > 0) out[k] = static_cast<double>(correct[k]) / static_cast<double>(total[k]);
    return out;
}

std::optional<double> divisiveness_estimate(const PosteriorTable& table) {
    if (table.n_subpops() != 2) throw ValidationError({"divisiveness estimate requires exactly two subpopulations"});
    std::size_t differ = 0;
    std::size_t total = 0;
    for (std::size_t i = 0; i < table.n_items(); ++i) {
        if (table.status(i, 0) == CellStatus::Missing || table.status(i, 1) == CellStatus::Missing) continue;
        ++total;
        if (table.decoded(i, 0) != table.decoded(i, 1)) ++differ;
    }
    if (total == 0) return std::nullopt;
    return static_cast<double>(differ) / static_cast<double>(total);
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    if (n < 2 || y.size() != n) return std::nullopt;
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::optional<double> competence_correlation(const CompetenceTable& fitted, const SyntheticWorld& world) {
    std::vector<double> true_competence;
    true_competence.reserve(world.annotator_origin.size());
    for (std::size_t origin : world.annotator_origin) true_competence.push_back(1.0 - world.true_spam_rates[origin]);
    return pearson(fitted.theta, true_competence);
}

std::vector<std::optional<double>> mean_jsd_by_subpop(const PosteriorTable& table, const Dataset& data, LogBase base) {
    const std::size_t n_subpops = table.n_subpops();
    const std::size_t n_labels = table.n_labels();
    std::vector<double> sum(n_subpops, 0.0);
    std::vector<std::size_t> count(n_subpops, 0);
    std::vector<double> empirical(n_subpops * n_labels);
    std::vector<std::size_t> per_group(n_subpops);
    for (std::size_t i = 0; i < table.n_items(); ++i) {
        std::fill(empirical.begin(), empirical.end(), 0.0);
        std::fill(per_group.begin(), per_group.end(), 0);
        for (std::size_t r : data.item_records(i)) {
            const auto& rec = data.records()[r];
            const std::size_t k = data.subpop_of(rec.annotator);
            empirical[k * n_labels + rec.label] += 1.0;
            ++per_group[k];
        }
        for (std::size_t k = 0; k < n_subpops; ++k) {
            if (per_group[k] == 0 || table.status(i, k) != CellStatus::Observed) continue;
            std::span<double> emp(empirical.data() + k * n_labels, n_labels);
            for (double& v : emp) v /= static_cast<double>(per_group[k]);
            sum[k] += jsd(table.cell(i, k), emp, base);
            ++count[k];
        }
    }
    std::vector<std::optional<double>> out(n_subpops);
    for (std::size_t k = 0; k < n_subpops; ++k)
        if (count[k] > 0) out[k] = sum[k] / static_cast<double>(count[k]);
    return out;
}

EvalReport evaluate(const PosteriorTable& table, const Dataset& data, const SyntheticWorld& world,
                    const CompetenceTable* competence, LogBase base) {
    EvalReport report;
    report.subpopulations = world.subpops.subpopulations;
    report.accuracy = subpop_accuracy(table, world.true_labels, true);
    report.accuracy_observed = subpop_accuracy(table, world.true_labels, false);
    report.cells_evaluated.assign(table.n_subpops(), 0);
    report.cells_observed.assign(table.n_subpops(), 0);
    for (std::size_t i = 0; i < table.n_items(); ++i) {
        for (std::size_t k = 0; k < table.n_subpops(); ++k) {
            const auto s = table.status(i, k);
            if (s != CellStatus::Missing) ++report.cells_evaluated[k];
            if (s == CellStatus::Observed) ++report.cells_observed[k];
        }
    }
    if (table.n_subpops() == 2) report.divisiveness_estimate = divisiveness_estimate(table);
    if (competence) report.competence_pearson = competence_correlation(*competence, world);
    report.jsd = mean_jsd_by_subpop(table, data, base);
    return report;
}

}  // namespace nutmeg
