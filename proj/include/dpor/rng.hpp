#pragma once

#include <gmpxx.h>

#include <random>

#include "dpor/bytes.hpp"

namespace dpor {

/// Seedable randomness source. All parameter generation and challenge
/// sampling draws from a caller-supplied instance so runs are reproducible.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(gmp_randinit_mt) { state_.seed(seed); }

    /// Nondeterministic seed from the OS.
    static Rng from_entropy() {
        std::random_device rd;
        return Rng(uint64_t(rd()) << 32 | rd());
    }

    /// Uniform in [0, bound).
    mpz_class below(const mpz_class& bound) { return state_.get_z_range(bound); }

    /// Uniform in [1, bound).
    mpz_class nonzero_below(const mpz_class& bound) {
        mpz_class v;
        do {
            v = below(bound);
        } while (v == 0);
        return v;
    }

    /// Uniform k-bit integer (top bit not forced).
    mpz_class bits(unsigned k) { return state_.get_z_bits(k); }

    /// Uniform in [0, n).
    size_t index(size_t n) {
        mpz_class v = below(mpz_class(static_cast<unsigned long>(n)));
        return mpz_get_ui(v.get_mpz_t());
    }

    Bytes bytes(size_t len) {
        Bytes out(len);
        for (auto& b : out) b = static_cast<uint8_t>(index(256));
        return out;
    }

private:
    gmp_randclass state_;
};

}  // namespace dpor
