#include "nutmeg/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "nutmeg/numeric.hpp"

namespace nutmeg {

PosteriorTable BaselineResult::broadcast(std::size_t n_subpops) const {
    PosteriorTable table(n_items(), n_subpops, n_labels);
    for (std::size_t i = 0; i < n_items(); ++i) {
        for (std::size_t k = 0; k < n_subpops; ++k) {
            const auto src = cell(i);
            std::copy(src.begin(), src.end(), table.cell(i, k).begin());
            table.set_status(i, k, CellStatus::Observed);
        }
    }
    table.redecode();
    return table;
}

BaselineResult majority_vote(const Dataset& data) {
    const std::size_t n_labels = data.n_labels();
    BaselineResult out{"majority", n_labels, std::vector<double>(data.n_items() * n_labels, 0.0),
                       std::vector<std::size_t>(data.n_items(), 0)};
    for (std::size_t i = 0; i < data.n_items(); ++i) {
        const auto& recs = data.item_records(i);
        double* row = out.posterior.data() + i * n_labels;
        for (std::size_t r : recs) row[data.records()[r].label] += 1.0;
        for (std::size_t l = 0; l < n_labels; ++l) row[l] /= static_cast<double>(recs.size());
        out.decoded[i] = argmax(out.cell(i));
    }
    return out;
}

DawidSkeneEStep dawid_skene_e_step(const Dataset& data, const DawidSkeneModel& model) {
    const std::size_t n_labels = model.n_labels;
    DawidSkeneEStep out{std::vector<double>(data.n_items() * n_labels), 0.0};
    for (std::size_t i = 0; i < data.n_items(); ++i) {
        std::span<double> row(out.posterior.data() + i * n_labels, n_labels);
        for (std::size_t t = 0; t < n_labels; ++t) row[t] = std::log(model.class_prior[t]);
        for (std::size_t r : data.item_records(i)) {
            const auto& rec = data.records()[r];
            for (std::size_t t = 0; t < n_labels; ++t) row[t] += std::log(model.at(rec.annotator, t, rec.label));
        }
        const double lse = numeric::normalize_log(row);
        if (!std::isfinite(lse)) throw NumericalError("non-finite Dawid-Skene likelihood");
        out.log_likelihood += lse;
    }
    return out;
}

namespace {

struct DsStep {
    DawidSkeneModel model;
    double log_prior = 0.0;
};

DsStep ds_m_step(const Dataset& data, std::span<const double> posterior, std::size_t n_labels, double smoothing) {
    DsStep out;
    auto& model = out.model;
    model.n_labels = n_labels;
    model.class_prior.assign(n_labels, smoothing);
    model.confusion.assign(data.n_annotators() * n_labels * n_labels, smoothing);
    for (std::size_t i = 0; i < data.n_items(); ++i)
        for (std::size_t t = 0; t < n_labels; ++t) model.class_prior[t] += posterior[i * n_labels + t];
    for (const auto& rec : data.records())
        for (std::size_t t = 0; t < n_labels; ++t)
            model.confusion[(rec.annotator * n_labels + t) * n_labels + rec.label] += posterior[rec.item * n_labels + t];

    auto normalize = [&](std::span<double> row) {
        double total = 0.0;
        for (double v : row) total += v;
        for (double& v : row) {
            v /= total;
            out.log_prior += smoothing * std::log(v);
        }
    };
    normalize(model.class_prior);
    for (std::size_t row = 0; row < data.n_annotators() * n_labels; ++row)
        normalize({model.confusion.data() + row * n_labels, n_labels});
    return out;
}

DawidSkeneModel ds_initial_model(std::size_t n_annotators, std::size_t n_labels, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> diag_draw(0.4, 1.0);
    DawidSkeneModel model;
    model.n_labels = n_labels;
    model.class_prior.assign(n_labels, 1.0 / static_cast<double>(n_labels));
    model.confusion.resize(n_annotators * n_labels * n_labels);
    const double others = static_cast<double>(n_labels - 1);
    for (std::size_t j = 0; j < n_annotators; ++j) {
        const double diag = diag_draw(rng);
        for (std::size_t t = 0; t < n_labels; ++t)
            for (std::size_t a = 0; a < n_labels; ++a)
                model.confusion[(j * n_labels + t) * n_labels + a] = t == a ? diag : (1.0 - diag) / others;
    }
    return model;
}

}  // namespace

DawidSkeneFit dawid_skene(const Dataset& data, const FitConfig& config, double smoothing) {
    config.check(data.n_labels());
    if (!(smoothing > 0.0)) throw ValidationError({"Dawid-Skene smoothing must be positive"});
    const std::size_t n_labels = data.n_labels();

    DawidSkeneFit best;
    bool have_best = false;
    for (int r = 0; r < config.restarts; ++r) {
        DawidSkeneModel model = ds_initial_model(data.n_annotators(), n_labels, config.seed + static_cast<std::uint64_t>(r));
        auto estep = dawid_skene_e_step(data, model);
        std::vector<double> trace;
        for (int it = 0; it < config.max_iterations; ++it) {
            auto m = ds_m_step(data, estep.posterior, n_labels, smoothing);
            estep = dawid_skene_e_step(data, m.model);
            model = std::move(m.model);
            const double objective = estep.log_likelihood + m.log_prior;
            if (!std::isfinite(objective)) throw NumericalError("non-finite Dawid-Skene objective");
            trace.push_back(objective);
            if (trace.size() >= 2) {
                const double prev = trace[trace.size() - 2];
                if (std::abs(objective - prev) / std::max(std::abs(prev), 1e-300) < config.convergence_tol) break;
            }
        }
        if (!have_best || trace.back() > best.objective_trace.back()) {
            have_best = true;
            best.chosen_restart = static_cast<std::size_t>(r);
            best.model = std::move(model);
            best.objective_trace = std::move(trace);
            best.result.posterior = std::move(estep.posterior);
        }
    }

    best.result.method = "dawid-skene";
    best.result.n_labels = n_labels;
    best.result.decoded.resize(data.n_items());
    for (std::size_t i = 0; i < data.n_items(); ++i) best.result.decoded[i] = argmax(best.result.cell(i));
    return best;
}

Dataset single_population(const Dataset& data) {
    return Dataset::validate(data.annotations(), SubpopulationMap::single(data.annotations()));
}

FitResult mace(const Dataset& data, const FitConfig& config) { return fit(single_population(data), config); }

}  // namespace nutmeg
