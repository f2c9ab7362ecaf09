#include "mortjump/rng.hpp"

#include <cmath>
#include <vector>

#include <boost/math/distributions/normal.hpp>
#include <boost/random/beta_distribution.hpp>
#include <boost/random/chi_squared_distribution.hpp>
#include <boost/random/gamma_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/seed_seq.hpp>
#include <boost/random/uniform_01.hpp>

namespace mortjump {

Rng make_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) {
    std::vector<std::uint32_t> words;
    words.reserve(2 + 2 * tags.size());
    auto push = [&](std::uint64_t v) {
        words.push_back(static_cast<std::uint32_t>(v & 0xffffffffu));
        words.push_back(static_cast<std::uint32_t>(v >> 32));
    };
    push(seed);
    for (auto t : tags) push(t);
    boost::random::seed_seq seq(words.begin(), words.end());
    return Rng(seq);
}

namespace rnd {

double uniform(Rng& rng) {
    boost::random::uniform_01<double> dist;
    double u = dist(rng);
    while (u <= 0.0) u = dist(rng);
    return u;
}

double standard_normal(Rng& rng) {
    boost::random::normal_distribution<double> dist(0.0, 1.0);
    return dist(rng);
}

double normal(Rng& rng, double mean, double sd) { return mean + sd * standard_normal(rng); }

double gamma(Rng& rng, double shape) {
    boost::random::gamma_distribution<double> dist(shape, 1.0);
    return dist(rng);
}

double beta(Rng& rng, double a, double b) {
    boost::random::beta_distribution<double> dist(a, b);
    return dist(rng);
}

double chi_squared(Rng& rng, double dof) {
    boost::random::chi_squared_distribution<double> dist(dof);
    return dist(rng);
}

bool bernoulli(Rng& rng, double p) { return uniform(rng) < p; }

double positive_truncated_normal_quantile(double u, double mean, double sd) {
    const boost::math::normal_distribution<double> std_normal;
    const double alpha = -mean / sd;
    // Invert the survival function: S(z) = u * S(alpha) keeps accuracy in both tails.
    const double tail = boost::math::cdf(boost::math::complement(std_normal, alpha));
    double z;
    if (u * tail > 0.0) {
        z = boost::math::quantile(boost::math::complement(std_normal, u * tail));
    } else {
        z = alpha - std::log(u) / alpha;  // exponential tail approximation
    }
    const double y = mean + sd * z;
    return y > 0.0 ? y : std::nextafter(0.0, 1.0);
}

double positive_truncated_normal(Rng& rng, double mean, double sd) {
    return positive_truncated_normal_quantile(uniform(rng), mean, sd);
}

double normal_quantile(double u, double mean, double sd) {
    const boost::math::normal_distribution<double> std_normal;
    return mean + sd * boost::math::quantile(std_normal, u);
}

}  // namespace rnd
}  // namespace mortjump
