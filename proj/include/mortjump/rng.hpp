#pragma once

#include <cstdint>
#include <initializer_list>

#include <boost/random/mersenne_twister.hpp>

namespace mortjump {

// 64-bit Mersenne Twister. The engine sequence is fixed by the C++ standard and
// all distributions below are implemented in-tree or via Boost.Random, so a
// given (seed, stream) pair yields the same numbers on every platform.
using Rng = boost::random::mt19937_64;

/// Independent stream derived from a master seed and a list of stream tags
/// (e.g. {chain} or {stream_kind, draw_index}).
Rng make_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> tags);

namespace rnd {

double uniform(Rng& rng);           // (0, 1), never returns 0
double standard_normal(Rng& rng);
double normal(Rng& rng, double mean, double sd);
double gamma(Rng& rng, double shape);  // scale 1
double beta(Rng& rng, double a, double b);
double chi_squared(Rng& rng, double dof);
bool bernoulli(Rng& rng, double p);

/// Normal(mean, sd) truncated to (0, inf), drawn by inversion from one uniform.
double positive_truncated_normal(Rng& rng, double mean, double sd);
/// Quantile of Normal(mean, sd) truncated to (0, inf) at u in (0, 1).
double positive_truncated_normal_quantile(double u, double mean, double sd);
double normal_quantile(double u, double mean, double sd);

}  // namespace rnd
}  // namespace mortjump
