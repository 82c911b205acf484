#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <utility>
#include <vector>

namespace leakguard {

std::uint64_t splitmix64(std::uint64_t x);

/// Order-sensitive combination of seed components into one 64-bit substream
/// seed. Used for every (master seed, fold, model, replicate) unit so results
/// never depend on evaluation order or worker count.
std::uint64_t mix64(std::initializer_list<std::uint64_t> parts);

/// Seeded random source. Draw algorithms are fixed here rather than taken
/// from <random> distributions, whose output differs across standard
/// library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

    /// Uniform on [0, 1) with 53 random bits.
    double uniform();
    /// Uniform integer on [0, n); n must be positive.
    std::size_t index(std::size_t n);
    double normal();
    double normal(double mean, double sd) { return mean + sd * normal(); }
    double exponential(double rate);

    template <class T>
    void shuffle(std::vector<T>& values) {
        for (std::size_t i = values.size(); i > 1; --i) {
            std::size_t j = index(i);
            std::swap(values[i - 1], values[j]);
        }
    }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace leakguard
