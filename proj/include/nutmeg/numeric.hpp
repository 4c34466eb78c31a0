#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <vector>

namespace nutmeg::numeric {

inline constexpr double neg_inf = -std::numeric_limits<double>::infinity();

// log(exp(a) + exp(b)) without overflow; handles -inf operands.
inline double log_add(double a, double b) noexcept {
    if (a == neg_inf) return b;
    if (b == neg_inf) return a;
    if (a < b) std::swap(a, b);
    return a + std::log1p(std::exp(b - a));
}

// Normalizes log-weights in place into probabilities; returns log-sum.
double normalize_log(std::span<double> values) noexcept;

double digamma(double x);
double log_beta(double a, double b);

// -KL(Beta(post_a, post_b) || Beta(a, b))
double neg_kl_beta(double post_a, double post_b, double a, double b);
// -KL(Dir(post) || Dir(prior))
double neg_kl_dirichlet(std::span<const double> post, std::span<const double> prior);

std::uint64_t splitmix64(std::uint64_t x) noexcept;
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t value) noexcept;

std::vector<double> sample_dirichlet(std::mt19937_64& rng, std::size_t n, double concentration);
double sample_beta(std::mt19937_64& rng, double a, double b);

}  // namespace nutmeg::numeric
