#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace svsl {

/// All stochastic components draw from this engine; a run is reproducible
/// given its seed.
using Rng = std::mt19937_64;

/// Weight vector on the probability simplex, one component per value.
using Weights = std::vector<double>;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

double dot(std::span<const double> a, std::span<const double> b);

/// Index of the maximum element; the first one wins on ties.
std::size_t argmax(std::span<const double> v);
std::size_t argmin(std::span<const double> v);

std::vector<double> softmax(std::span<const double> logits);

/// Uniform integer in [0, n).
std::size_t uniform_index(Rng& rng, std::size_t n);
double uniform01(Rng& rng);
double standard_normal(Rng& rng);

/// Samples k distinct indices from [0, n) in random order.
std::vector<std::size_t> sample_without_replacement(Rng& rng, std::size_t n, std::size_t k);

/// Uniform random point on the (m-1)-simplex.
Weights random_simplex_weight(Rng& rng, int m);

/// Equally spaced weights on the simplex. For m = 2 this is
/// {(k/(n-1), 1-k/(n-1))}; for m > 2 a lattice with at least n points.
std::vector<Weights> equally_spaced_weights(int m, int n);

/// Tiny stderr logger. Verbosity comes from SVSL_LOG (0 = quiet, 1 = warn, 2 = info).
namespace log {
void warn(const std::string& msg);
void info(const std::string& msg);
int level();
}  // namespace log

}  // namespace svsl
