#include "nutmeg/inference.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <random>
#include <string>
#include <thread>

#include "nutmeg/numeric.hpp"

namespace nutmeg {

using numeric::neg_inf;

void FitConfig::check(std::size_t n_labels) const {
    std::vector<std::string> issues;
    if (n_labels < 2) issues.push_back("label space must contain at least 2 labels");
    if (max_iterations < 1) issues.push_back("max_iterations must be positive");
    if (restarts < 1) issues.push_back("restarts must be positive");
    if (!(convergence_tol > 0.0)) issues.push_back("convergence_tol must be positive");
    if (!(theta_prior.a > 0.0) || !(theta_prior.b > 0.0)) issues.push_back("theta prior parameters must be positive");
    if (!(xi_prior > 0.0)) issues.push_back("xi prior concentration must be positive");
    if (threads < 1) issues.push_back("threads must be positive");
    if (!truth_prior.empty()) {
        if (truth_prior.size() != n_labels) {
            issues.push_back("truth prior has " + std::to_string(truth_prior.size()) + " entries, expected " +
                             std::to_string(n_labels));
        }
        for (double p : truth_prior)
            if (!(p > 0.0) || !std::isfinite(p)) {
                issues.push_back("truth prior entries must be positive and finite");
                break;
            }
    }
    if (!issues.empty()) throw ValidationError(std::move(issues));
}

std::vector<double> FitConfig::resolved_truth_prior(std::size_t n_labels) const {
    if (truth_prior.empty()) return std::vector<double>(n_labels, 1.0 / static_cast<double>(n_labels));
    std::vector<double> prior = truth_prior;
    double total = 0.0;
    for (double p : prior) total += p;
    for (double& p : prior) p /= total;
    return prior;
}

EmissionWeights EmissionWeights::from(const CompetenceTable& params) {
    EmissionWeights w;
    w.n_labels = params.n_labels;
    w.log_truthful.resize(params.n_annotators());
    w.log_spam.resize(params.n_annotators());
    w.log_xi.resize(params.xi.size());
    for (std::size_t j = 0; j < params.n_annotators(); ++j) {
        w.log_truthful[j] = std::log(params.theta[j]);
        w.log_spam[j] = std::log1p(-params.theta[j]);
    }
    for (std::size_t x = 0; x < params.xi.size(); ++x) w.log_xi[x] = std::log(params.xi[x]);
    return w;
}

namespace {

double log_emission(const EmissionWeights& w, const Annotation& rec, std::size_t truth) noexcept {
    const double spam = w.log_spam[rec.annotator] + w.log_xi[rec.annotator * w.n_labels + rec.label];
    const double truthful = rec.label == truth ? w.log_truthful[rec.annotator] : neg_inf;
    return numeric::log_add(truthful, spam);
}

}  // namespace

EStepResult e_step(const Dataset& data, const EmissionWeights& weights, std::span<const double> truth_prior) {
    const std::size_t n_labels = data.n_labels();
    const std::size_t n_subpops = data.n_subpops();
    EStepResult out{PosteriorTable(data.n_items(), n_subpops, n_labels), std::vector<double>(data.n_records(), 0.0),
                    0.0};

    std::vector<double> log_prior(n_labels);
    for (std::size_t t = 0; t < n_labels; ++t) log_prior[t] = std::log(truth_prior[t]);

    std::vector<double> scratch(n_subpops * n_labels);
    for (std::size_t i = 0; i < data.n_items(); ++i) {
        for (std::size_t k = 0; k < n_subpops; ++k)
            std::copy(log_prior.begin(), log_prior.end(), scratch.begin() + static_cast<std::ptrdiff_t>(k * n_labels));

        for (std::size_t r : data.item_records(i)) {
            const auto& rec = data.records()[r];
            double* row = scratch.data() + data.subpop_of(rec.annotator) * n_labels;
            for (std::size_t t = 0; t < n_labels; ++t) row[t] += log_emission(weights, rec, t);
        }

        for (std::size_t k = 0; k < n_subpops; ++k) {
            if (!data.observed(i, k)) {
                auto cell = out.posterior.cell(i, k);
                std::copy(truth_prior.begin(), truth_prior.end(), cell.begin());
                continue;
            }
            std::span<double> row(scratch.data() + k * n_labels, n_labels);
            const double lse = numeric::normalize_log(row);
            if (!std::isfinite(lse))
                throw NumericalError("non-finite evidence for item '" + data.annotations().items[i] + "'");
            out.log_evidence += lse;
            std::copy(row.begin(), row.end(), out.posterior.cell(i, k).begin());
            out.posterior.set_status(i, k, CellStatus::Observed);
        }

        for (std::size_t r : data.item_records(i)) {
            const auto& rec = data.records()[r];
            const auto q = out.posterior.cell(i, data.subpop_of(rec.annotator));
            const double log_spam = weights.log_spam[rec.annotator] + weights.log_xi[rec.annotator * n_labels + rec.label];
            double s = 0.0;
            for (std::size_t t = 0; t < n_labels; ++t) {
                if (q[t] == 0.0) continue;
                s += q[t] * std::exp(log_spam - log_emission(weights, rec, t));
            }
            out.spam_posterior[r] = std::clamp(s, 0.0, 1.0);
        }
    }
    out.posterior.redecode();
    return out;
}

EStepResult e_step(const Dataset& data, const CompetenceTable& params, std::span<const double> truth_prior) {
    return e_step(data, EmissionWeights::from(params), truth_prior);
}

ExpectedCounts ExpectedCounts::from(const Dataset& data, std::span<const double> spam_posterior) {
    ExpectedCounts counts;
    counts.n_labels = data.n_labels();
    counts.truthful.assign(data.n_annotators(), 0.0);
    counts.spam_emissions.assign(data.n_annotators() * data.n_labels(), 0.0);
    for (std::size_t r = 0; r < data.n_records(); ++r) {
        const auto& rec = data.records()[r];
        counts.truthful[rec.annotator] += 1.0 - spam_posterior[r];
        counts.spam_emissions[rec.annotator * counts.n_labels + rec.label] += spam_posterior[r];
    }
    return counts;
}

MStepResult m_step(const ExpectedCounts& counts, const FitConfig& config) {
    const std::size_t n_annotators = counts.truthful.size();
    const std::size_t n_labels = counts.n_labels;
    const double a = config.theta_prior.a;
    const double b = config.theta_prior.b;
    const double c = config.xi_prior;

    MStepResult out;
    auto& comp = out.competence;
    comp.n_labels = n_labels;
    comp.theta.resize(n_annotators);
    comp.xi.resize(n_annotators * n_labels);
    auto& w = out.weights;
    w.n_labels = n_labels;
    w.log_truthful.resize(n_annotators);
    w.log_spam.resize(n_annotators);
    w.log_xi.resize(n_annotators * n_labels);

    std::vector<double> post(n_labels);
    const std::vector<double> prior(n_labels, c);
    for (std::size_t j = 0; j < n_annotators; ++j) {
        double spam_total = 0.0;
        for (std::size_t l = 0; l < n_labels; ++l) spam_total += counts.spam_emissions[j * n_labels + l];
        const double alpha_truthful = counts.truthful[j] + a;
        const double alpha_spam = spam_total + b;
        double post_sum = 0.0;
        for (std::size_t l = 0; l < n_labels; ++l) {
            post[l] = counts.spam_emissions[j * n_labels + l] + c;
            post_sum += post[l];
        }

        comp.theta[j] = alpha_truthful / (alpha_truthful + alpha_spam);
        for (std::size_t l = 0; l < n_labels; ++l) comp.xi[j * n_labels + l] = post[l] / post_sum;

        if (config.mode == TrainingMode::Variational) {
            const double psi_total = numeric::digamma(alpha_truthful + alpha_spam);
            w.log_truthful[j] = numeric::digamma(alpha_truthful) - psi_total;
            w.log_spam[j] = numeric::digamma(alpha_spam) - psi_total;
            const double psi_post = numeric::digamma(post_sum);
            for (std::size_t l = 0; l < n_labels; ++l) w.log_xi[j * n_labels + l] = numeric::digamma(post[l]) - psi_post;
            out.prior_term += numeric::neg_kl_beta(alpha_truthful, alpha_spam, a, b);
            out.prior_term += numeric::neg_kl_dirichlet(post, prior);
        } else {
            w.log_truthful[j] = std::log(comp.theta[j]);
            w.log_spam[j] = std::log1p(-comp.theta[j]);
            out.prior_term += a * w.log_truthful[j] + b * w.log_spam[j];
            for (std::size_t l = 0; l < n_labels; ++l) {
                w.log_xi[j * n_labels + l] = std::log(comp.xi[j * n_labels + l]);
                out.prior_term += c * w.log_xi[j * n_labels + l];
            }
        }
    }
    return out;
}

namespace {

struct RestartOutcome {
    EStepResult estep;
    CompetenceTable competence;
    std::vector<double> trace;
};

CompetenceTable initial_parameters(std::size_t n_annotators, std::size_t n_labels, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> theta_draw(0.4, 1.0);
    CompetenceTable params;
    params.n_labels = n_labels;
    params.theta.resize(n_annotators);
    params.xi.resize(n_annotators * n_labels);
    for (std::size_t j = 0; j < n_annotators; ++j) {
        params.theta[j] = theta_draw(rng);
        const auto xi = numeric::sample_dirichlet(rng, n_labels, 1.0);
        std::copy(xi.begin(), xi.end(), params.xi.begin() + static_cast<std::ptrdiff_t>(j * n_labels));
    }
    return params;
}

RestartOutcome run_restart(const Dataset& data, const FitConfig& config, std::span<const double> truth_prior,
                           std::uint64_t seed) {
    RestartOutcome out;
    out.competence = initial_parameters(data.n_annotators(), data.n_labels(), seed);
    out.estep = e_step(data, out.competence, truth_prior);

    for (int it = 0; it < config.max_iterations; ++it) {
        auto m = m_step(ExpectedCounts::from(data, out.estep.spam_posterior), config);
        out.estep = e_step(data, m.weights, truth_prior);
        out.competence = std::move(m.competence);
        const double objective = out.estep.log_evidence + m.prior_term;
        if (!std::isfinite(objective)) throw NumericalError("non-finite objective");
        out.trace.push_back(objective);
        if (out.trace.size() >= 2) {
            const double prev = out.trace[out.trace.size() - 2];
            const double scale = std::max(std::abs(prev), 1e-300);
            if (std::abs(objective - prev) / scale < config.convergence_tol) break;
        }
    }
    return out;
}

// Runs every restart, concurrently when config.threads > 1, and returns them
// in restart order.
std::vector<RestartOutcome> run_restarts(const Dataset& data, const FitConfig& config,
                                         std::span<const double> truth_prior) {
    const auto n = static_cast<std::size_t>(config.restarts);
    std::vector<RestartOutcome> outcomes(n);
    std::vector<std::exception_ptr> errors(n);
    auto work = [&](std::size_t r) {
        try {
            outcomes[r] = run_restart(data, config, truth_prior, config.seed + r);
        } catch (...) {
            errors[r] = std::current_exception();
        }
    };

    const auto n_threads = std::min<std::size_t>(static_cast<std::size_t>(config.threads), n);
    if (n_threads <= 1) {
        for (std::size_t r = 0; r < n; ++r) work(r);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < n_threads; ++t)
            pool.emplace_back([&] {
                for (std::size_t r = next++; r < n; r = next++) work(r);
            });
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return outcomes;
}

}  // namespace

FitResult fit(const Dataset& data, const FitConfig& config) {
    config.check(data.n_labels());
    const auto truth_prior = config.resolved_truth_prior(data.n_labels());
    const std::size_t n_labels = data.n_labels();
    const std::size_t n_subpops = data.n_subpops();

    FitResult result;
    result.posterior = PosteriorTable(data.n_items(), n_subpops, n_labels);
    for (std::size_t i = 0; i < data.n_items(); ++i)
        for (std::size_t k = 0; k < n_subpops; ++k)
            std::copy(truth_prior.begin(), truth_prior.end(), result.posterior.cell(i, k).begin());
    result.competence.n_labels = n_labels;
    result.competence.theta.assign(data.n_annotators(), 0.0);
    result.competence.xi.assign(data.n_annotators() * n_labels, 0.0);
    result.spam_posterior.assign(data.n_records(), 0.0);
    result.subpop_fits.resize(n_subpops);

    for (std::size_t k = 0; k < n_subpops; ++k) {
        std::vector<std::size_t> item_map;
        std::vector<std::size_t> annotator_map;
        const Dataset sub = data.restrict_to(k, &item_map, &annotator_map);
        if (sub.n_records() == 0) continue;

        auto outcomes = run_restarts(sub, config, truth_prior);
        std::size_t best = 0;
        for (std::size_t r = 1; r < outcomes.size(); ++r)
            if (outcomes[r].trace.back() > outcomes[best].trace.back()) best = r;
        auto& chosen = outcomes[best];

        auto& summary = result.subpop_fits[k];
        summary.fitted = true;
        summary.chosen_restart = best;
        summary.objective = chosen.trace.back();
        summary.objective_trace = std::move(chosen.trace);
        result.objective += summary.objective;

        for (std::size_t i = 0; i < item_map.size(); ++i) {
            const auto src = chosen.estep.posterior.cell(i, 0);
            std::copy(src.begin(), src.end(), result.posterior.cell(item_map[i], k).begin());
            result.posterior.set_status(item_map[i], k, CellStatus::Observed);
        }
        for (std::size_t j = 0; j < annotator_map.size(); ++j) {
            result.competence.theta[annotator_map[j]] = chosen.competence.theta[j];
            const auto src = chosen.competence.spam_emission(j);
            std::copy(src.begin(), src.end(), result.competence.spam_emission(annotator_map[j]).begin());
        }
        std::size_t sub_record = 0;
        for (std::size_t r = 0; r < data.n_records(); ++r)
            if (data.subpop_of(data.records()[r].annotator) == k)
                result.spam_posterior[r] = chosen.estep.spam_posterior[sub_record++];
    }
    result.posterior.redecode();
    return result;
}

std::vector<std::size_t> decode(const PosteriorTable& posterior) {
    std::vector<std::size_t> labels(posterior.n_items() * posterior.n_subpops());
    for (std::size_t i = 0; i < posterior.n_items(); ++i)
        for (std::size_t k = 0; k < posterior.n_subpops(); ++k)
            labels[i * posterior.n_subpops() + k] = argmax(posterior.cell(i, k));
    return labels;
}

}  // namespace nutmeg
