#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace ccvl {

using Rng = std::mt19937_64;

/// Uniform draw in [0, 1) with 53 bits of the raw stream. Hand-rolled so the
/// byte-level output stream never depends on the standard library's
/// distribution internals.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Samples an index from an (unnormalized is fine) nonnegative weight vector.
inline int sample_categorical(std::span<const double> weights, Rng& rng) {
    double total = 0.0;
    for (double w : weights) total += w;
    double u = uniform01(rng) * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        acc += weights[i];
        if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(weights.size()) - 1;  // u landed on accumulated rounding
}

}  // namespace ccvl
