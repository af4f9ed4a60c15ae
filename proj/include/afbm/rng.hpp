// rng.hpp - seeded random streams and QPSK symbol helpers.

#pragma once

#include "afbm/types.hpp"

#include <cstdint>
#include <random>

namespace afbm {

using Rng = std::mt19937_64;

/// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Independent stream for work item `index` of an experiment seeded with
/// `seed`. `domain` separates unrelated uses of the same (seed, index) pair.
/// The result depends only on its arguments, never on scheduling.
Rng derive_stream(std::uint64_t seed, std::uint64_t index, std::uint64_t domain = 0);

/// Circularly-symmetric complex Gaussian draw with E|z|^2 = variance.
Complex complex_gaussian(Rng& rng, double variance = 1.0);

ComplexVector complex_gaussian_vector(Rng& rng, Index n, double variance = 1.0);

/// Uniform random bits, two per QPSK symbol.
Bits random_bits(Rng& rng, Index count);

/// Gray QPSK: bit0 selects the sign of the real part, bit1 the imaginary part,
/// with a set bit meaning negative. Amplitude per component is sqrt(E_S/2).
ComplexVector qpsk_modulate(const Bits& bits, double symbol_energy);

}  // namespace afbm
