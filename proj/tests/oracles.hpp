#pragma once
// Test-only reference computations. They enumerate every latent assignment
// in linear space and share no code with the library's log-space E-steps.

#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

#include "nutmeg/baselines.hpp"
#include "nutmeg/dataset.hpp"
#include "nutmeg/types.hpp"

namespace nutmeg::testing {

struct BruteForcePosterior {
    std::vector<double> truth;  // N x P x L; unobserved cells left at zero
    std::vector<double> spam;   // per record
};

// Sums P(A, T, S) over T in L^(observed cells) and S in {0,1}^records.
inline BruteForcePosterior brute_force_nutmeg(const Dataset& data, const CompetenceTable& params,
                                              const std::vector<double>& prior) {
    const std::size_t L = data.n_labels();
    const std::size_t P = data.n_subpops();
    std::vector<std::pair<std::size_t, std::size_t>> cells;
    for (std::size_t i = 0; i < data.n_items(); ++i)
        for (std::size_t k = 0; k < P; ++k)
            if (data.observed(i, k)) cells.emplace_back(i, k);
    const std::size_t R = data.n_records();

    std::size_t n_truth = 1;
    for (std::size_t c = 0; c < cells.size(); ++c) n_truth *= L;
    const std::size_t n_spam = std::size_t{1} << R;

    BruteForcePosterior out{std::vector<double>(data.n_items() * P * L, 0.0), std::vector<double>(R, 0.0)};
    std::vector<std::size_t> t_cell(cells.size());
    std::vector<std::size_t> cell_of(data.n_items() * P, 0);
    for (std::size_t c = 0; c < cells.size(); ++c) cell_of[cells[c].first * P + cells[c].second] = c;

    double z = 0.0;
    for (std::size_t tc = 0; tc < n_truth; ++tc) {
        std::size_t rest = tc;
        double p_truth = 1.0;
        for (std::size_t c = 0; c < cells.size(); ++c) {
            t_cell[c] = rest % L;
            rest /= L;
            p_truth *= prior[t_cell[c]];
        }
        for (std::size_t sc = 0; sc < n_spam; ++sc) {
            double p = p_truth;
            for (std::size_t r = 0; r < R && p > 0.0; ++r) {
                const auto& rec = data.records()[r];
                const bool spam = (sc >> r) & 1U;
                const double theta = params.theta[rec.annotator];
                const std::size_t truth = t_cell[cell_of[rec.item * P + data.subpop_of(rec.annotator)]];
                if (spam) p *= (1.0 - theta) * params.xi[rec.annotator * L + rec.label];
                else p *= rec.label == truth ? theta : 0.0;
            }
            if (p == 0.0) continue;
            z += p;
            for (std::size_t c = 0; c < cells.size(); ++c)
                out.truth[(cells[c].first * P + cells[c].second) * L + t_cell[c]] += p;
            for (std::size_t r = 0; r < R; ++r)
                if ((sc >> r) & 1U) out.spam[r] += p;
        }
    }
    for (double& v : out.truth) v /= z;
    for (double& v : out.spam) v /= z;
    return out;
}

// Sums over T in L^N for the confusion-matrix model.
inline std::vector<double> brute_force_dawid_skene(const Dataset& data, const DawidSkeneModel& model) {
    const std::size_t L = model.n_labels;
    const std::size_t N = data.n_items();
    std::size_t n_truth = 1;
    for (std::size_t i = 0; i < N; ++i) n_truth *= L;
    std::vector<double> post(N * L, 0.0);
    std::vector<std::size_t> t(N);
    double z = 0.0;
    for (std::size_t tc = 0; tc < n_truth; ++tc) {
        std::size_t rest = tc;
        double p = 1.0;
        for (std::size_t i = 0; i < N; ++i) {
            t[i] = rest % L;
            rest /= L;
            p *= model.class_prior[t[i]];
        }
        for (const auto& rec : data.records()) p *= model.at(rec.annotator, t[rec.item], rec.label);
        z += p;
        for (std::size_t i = 0; i < N; ++i) post[i * L + t[i]] += p;
    }
    for (double& v : post) v /= z;
    return post;
}

// Asymptotic series with recurrence; independent of the library's digamma.
inline double reference_digamma(double x) {
    double result = 0.0;
    while (x < 10.0) {
        result -= 1.0 / x;
        x += 1.0;
    }
    const double f = 1.0 / (x * x);
    result += std::log(x) - 0.5 / x -
              f * (1.0 / 12 - f * (1.0 / 120 - f * (1.0 / 252 - f * (1.0 / 240 - f * (1.0 / 132)))));
    return result;
}

// Random tiny instance: every item and annotator gets at least one record.
struct TinyInstance {
    AnnotationSet annotations;
    SubpopulationMap subpops;
};

inline TinyInstance random_tiny_instance(std::mt19937_64& rng, std::size_t max_items, std::size_t max_annotators,
                                         std::size_t n_labels, std::size_t max_subpops, std::size_t max_records) {
    std::uniform_int_distribution<std::size_t> n_items_draw(1, max_items);
    std::uniform_int_distribution<std::size_t> n_ann_draw(1, max_annotators);
    std::uniform_int_distribution<std::size_t> n_sub_draw(1, max_subpops);
    std::uniform_int_distribution<std::size_t> label_draw(0, n_labels - 1);
    std::bernoulli_distribution coin(0.5);
    while (true) {
        const std::size_t N = n_items_draw(rng);
        const std::size_t M = n_ann_draw(rng);
        const std::size_t P = std::min(n_sub_draw(rng), M);
        TinyInstance inst;
        for (std::size_t l = 0; l < n_labels; ++l) inst.annotations.label_space.labels.push_back(std::to_string(l));
        for (std::size_t i = 0; i < N; ++i) inst.annotations.items.push_back("i" + std::to_string(i));
        for (std::size_t j = 0; j < M; ++j) inst.annotations.annotators.push_back("a" + std::to_string(j));
        for (std::size_t k = 0; k < P; ++k) inst.subpops.subpopulations.push_back("g" + std::to_string(k));
        std::uniform_int_distribution<std::size_t> group_draw(0, P - 1);
        for (std::size_t j = 0; j < M; ++j) inst.subpops.assignment["a" + std::to_string(j)] = j < P ? j : group_draw(rng);

        std::vector<char> item_hit(N, 0), ann_hit(M, 0);
        for (std::size_t i = 0; i < N; ++i)
            for (std::size_t j = 0; j < M; ++j)
                if (coin(rng) && inst.annotations.records.size() < max_records) {
                    inst.annotations.records.push_back({i, j, label_draw(rng)});
                    item_hit[i] = ann_hit[j] = 1;
                }
        bool ok = true;
        for (char h : item_hit) ok &= h != 0;
        for (char h : ann_hit) ok &= h != 0;
        if (ok) return inst;
    }
}

inline CompetenceTable random_competence(std::mt19937_64& rng, std::size_t M, std::size_t L) {
    std::uniform_real_distribution<double> u(0.05, 0.95);
    CompetenceTable c;
    c.n_labels = L;
    for (std::size_t j = 0; j < M; ++j) {
        c.theta.push_back(u(rng));
        double total = 0.0;
        std::vector<double> row(L);
        for (double& v : row) {
            v = u(rng);
            total += v;
        }
        for (double v : row) c.xi.push_back(v / total);
    }
    return c;
}

}  // namespace nutmeg::testing
