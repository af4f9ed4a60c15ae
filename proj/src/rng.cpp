#include "afbm/rng.hpp"

#include <cmath>

namespace afbm {

std::uint64_t mix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

Rng derive_stream(std::uint64_t seed, std::uint64_t index, std::uint64_t domain) {
    const std::uint64_t a = mix64(seed);
    const std::uint64_t b = mix64(a ^ mix64(index + 0x632BE59BD9B4E019ULL));
    const std::uint64_t c = mix64(b ^ mix64(domain + 0x85EBCA77C2B2AE63ULL));
    std::seed_seq seq{static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32),
                      static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(c >> 32)};
    return Rng(seq);
}

Complex complex_gaussian(Rng& rng, double variance) {
    std::normal_distribution<double> normal(0.0, std::sqrt(variance / 2.0));
    const double re = normal(rng);
    const double im = normal(rng);
    return {re, im};
}

ComplexVector complex_gaussian_vector(Rng& rng, Index n, double variance) {
    std::normal_distribution<double> normal(0.0, std::sqrt(variance / 2.0));
    ComplexVector v(n);
    for (Index i = 0; i < n; ++i) {
        const double re = normal(rng);
        const double im = normal(rng);
        v[i] = {re, im};
    }
    return v;
}

Bits random_bits(Rng& rng, Index count) {
    Bits bits(static_cast<std::size_t>(count));
    std::uint64_t word = 0;
    int left = 0;
    for (auto& b : bits) {
        if (left == 0) {
            word = rng();
            left = 64;
        }
        b = static_cast<std::uint8_t>(word & 1U);
        word >>= 1;
        --left;
    }
    return bits;
}

ComplexVector qpsk_modulate(const Bits& bits, double symbol_energy) {
    if (bits.size() % 2 != 0) {
        throw DimensionError("qpsk_modulate: bit count must be even");
    }
    const double cx = std::sqrt(symbol_energy / 2.0);
    ComplexVector x(static_cast<Index>(bits.size() / 2));
    for (Index i = 0; i < x.size(); ++i) {
        const double re = bits[2 * i] ? -cx : cx;
        const double im = bits[2 * i + 1] ? -cx : cx;
        x[i] = {re, im};
    }
    return x;
}

}  // namespace afbm
