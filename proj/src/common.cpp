#include "svsl/common.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <numbers>
#include <numeric>

namespace svsl {

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

std::size_t argmax(std::span<const double> v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

std::size_t argmin(std::span<const double> v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] < v[best]) best = i;
    return best;
}

std::vector<double> softmax(std::span<const double> logits) {
    std::vector<double> out(logits.begin(), logits.end());
    if (out.empty()) return out;
    const double mx = *std::max_element(out.begin(), out.end());
    double z = 0.0;
    for (double& x : out) {
        x = std::exp(x - mx);
        z += x;
    }
    for (double& x : out) x /= z;
    return out;
}

std::size_t uniform_index(Rng& rng, std::size_t n) {
    if (n == 0) throw Error("uniform_index: empty range");
    const unsigned __int128 prod = static_cast<unsigned __int128>(rng()) * n;
    return static_cast<std::size_t>(prod >> 64);
}

double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double standard_normal(Rng& rng) {
    // Box-Muller without caching the second variate keeps draws stateless.
    double u1 = uniform01(rng);
    while (u1 <= 0.0) u1 = uniform01(rng);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::vector<std::size_t> sample_without_replacement(Rng& rng, std::size_t n, std::size_t k) {
    k = std::min(k, n);
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + uniform_index(rng, n - i);
        std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    return idx;
}

Weights random_simplex_weight(Rng& rng, int m) {
    Weights w(static_cast<std::size_t>(m));
    double total = 0.0;
    for (double& x : w) {
        double u = uniform01(rng);
        while (u <= 0.0) u = uniform01(rng);
        x = -std::log(u);
        total += x;
    }
    for (double& x : w) x /= total;
    return w;
}

namespace {

void lattice(int m, int resolution, std::vector<int>& prefix, int remaining,
             std::vector<Weights>& out) {
    if (static_cast<int>(prefix.size()) == m - 1) {
        Weights w;
        for (int c : prefix) w.push_back(static_cast<double>(c) / resolution);
        w.push_back(static_cast<double>(remaining) / resolution);
        out.push_back(std::move(w));
        return;
    }
    for (int c = 0; c <= remaining; ++c) {
        prefix.push_back(c);
        lattice(m, resolution, prefix, remaining - c, out);
        prefix.pop_back();
    }
}

double binomial(int n, int k) {
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

}  // namespace

std::vector<Weights> equally_spaced_weights(int m, int n) {
    if (m < 1 || n < 1) throw Error("equally_spaced_weights: bad arguments");
    if (m == 1) return {Weights{1.0}};
    if (m == 2) {
        std::vector<Weights> out;
        if (n == 1) return {Weights{0.5, 0.5}};
        for (int k = 0; k < n; ++k) {
            const double w1 = static_cast<double>(k) / (n - 1);
            out.push_back({w1, 1.0 - w1});
        }
        return out;
    }
    int resolution = 1;
    while (binomial(resolution + m - 1, m - 1) < n) ++resolution;
    std::vector<Weights> out;
    std::vector<int> prefix;
    lattice(m, resolution, prefix, resolution, out);
    return out;
}

namespace log {

int level() {
    static const int lvl = [] {
        const char* env = std::getenv("SVSL_LOG");
        return env ? std::atoi(env) : 1;
    }();
    return lvl;
}

void warn(const std::string& msg) {
    if (level() >= 1) std::cerr << "[svsl:warn] " << msg << '\n';
}

void info(const std::string& msg) {
    if (level() >= 2) std::cerr << "[svsl:info] " << msg << '\n';
}

}  // namespace log

}  // namespace svsl
