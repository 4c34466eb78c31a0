#include "nutmeg/numeric.hpp"

#include <algorithm>

#include <boost/math/special_functions/digamma.hpp>

namespace nutmeg::numeric {

double normalize_log(std::span<double> values) noexcept {
    double peak = neg_inf;
    for (double v : values) peak = std::max(peak, v);
    if (peak == neg_inf || !std::isfinite(peak)) {
        for (double& v : values) v = std::numeric_limits<double>::quiet_NaN();
        return peak;
    }
    double total = 0.0;
    for (double& v : values) {
        v = std::exp(v - peak);
        total += v;
    }
    for (double& v : values) v /= total;
    return peak + std::log(total);
}

double digamma(double x) { return boost::math::digamma(x); }

double log_beta(double a, double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); }

double neg_kl_beta(double post_a, double post_b, double a, double b) {
    const double kl = log_beta(a, b) - log_beta(post_a, post_b) + (post_a - a) * digamma(post_a) +
                      (post_b - b) * digamma(post_b) - (post_a + post_b - a - b) * digamma(post_a + post_b);
    return -kl;
}

double neg_kl_dirichlet(std::span<const double> post, std::span<const double> prior) {
    double post_sum = 0.0;
    double prior_sum = 0.0;
    for (std::size_t l = 0; l < post.size(); ++l) {
        post_sum += post[l];
        prior_sum += prior[l];
    }
    const double psi_sum = digamma(post_sum);
    double kl = std::lgamma(post_sum) - std::lgamma(prior_sum);
    for (std::size_t l = 0; l < post.size(); ++l) {
        kl += std::lgamma(prior[l]) - std::lgamma(post[l]);
        kl += (post[l] - prior[l]) * (digamma(post[l]) - psi_sum);
    }
    return -kl;
}

std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t value) noexcept {
    return splitmix64(seed ^ splitmix64(value + 0x632be59bd9b4e019ULL));
}

std::vector<double> sample_dirichlet(std::mt19937_64& rng, std::size_t n, double concentration) {
    std::gamma_distribution<double> gamma(concentration, 1.0);
    std::vector<double> out(n);
    double total = 0.0;
    for (double& v : out) {
        v = gamma(rng);
        total += v;
    }
    if (total <= 0.0) {
        std::fill(out.begin(), out.end(), 1.0 / static_cast<double>(n));
        return out;
    }
    for (double& v : out) v /= total;
    return out;
}

double sample_beta(std::mt19937_64& rng, double a, double b) {
    std::gamma_distribution<double> ga(a, 1.0);
    std::gamma_distribution<double> gb(b, 1.0);
    const double x = ga(rng);
    const double y = gb(rng);
    if (x + y <= 0.0) return a / (a + b);
    return x / (x + y);
}

}  // namespace nutmeg::numeric
