#pragma once

#include "dpor/field.hpp"
#include "dpor/params.hpp"

namespace dpor {

/// Element of the order-q subgroup of Z_p*.
struct HashValue {
    mpz_class v;

    bool operator==(const HashValue&) const = default;

    void encode(Bytes& out) const { put_mpz_lp(out, v); }
    static HashValue decode(Cursor& c) { return {take_mpz_lp(c)}; }
};

inline HashValue identity_hash() { return {mpz_class(1)}; }

/// h(B) = prod g_i^{b_i} mod p. Accepts any vector up to m+2 segments;
/// missing trailing segments hash as zero exponents.
inline HashValue hash_block(const SystemParams& P, const Vec& b) {
    if (b.size() > P.gens.size()) throw std::invalid_argument("vector longer than generator list");
    mpz_class acc = 1;
    for (size_t i = 0; i < b.size(); ++i) {
        if (b[i] == 0) continue;
        acc = mulmod(acc, powmod(P.gens[i], b[i], P.p), P.p);
    }
    return {acc};
}

/// h1^{a1} * h2^{a2} mod p (the tag-side form of a linear combination).
inline HashValue combine(const SystemParams& P, const HashValue& h1, const mpz_class& a1,
                         const HashValue& h2, const mpz_class& a2) {
    return {mulmod(powmod(h1.v, a1 % P.q, P.p), powmod(h2.v, a2 % P.q, P.p), P.p)};
}

/// h^a mod p (the tag-side form of a scalar multiple).
inline HashValue scale(const SystemParams& P, const HashValue& h, const mpz_class& a) {
    return {powmod(h.v, a % P.q, P.p)};
}

}  // namespace dpor
