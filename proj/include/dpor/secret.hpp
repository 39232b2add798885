#pragma once

// Marks translation units that can reach secret state; the publicness test
// asserts this macro is absent from verifier-only builds.
#define DPOR_SECRET_INCLUDED 1

#include "dpor/rng.hpp"
#include "dpor/sigtag.hpp"

namespace dpor {

/// Client-held secrets: signing key, base generator and the exponent vector
/// behind the public generators (g_i = g^{gamma_i} mod p).
struct SecretState {
    Bytes ssk;
    mpz_class g;
    std::vector<mpz_class> gamma;  // m + kMetaSegments entries
};

struct SetupOptions {
    unsigned lambda = 8;
    unsigned lambda_p = 64;
    uint64_t n = 4;
    size_t m = 2;
    std::string sig_scheme = "ed25519";
    unsigned retry_bound = 1u << 20;  // prime-search attempts before giving up
};

inline SetupOptions setup_options_for(const std::string& profile_name, uint64_t n, size_t m = 0) {
    Profile pr = named_profile(profile_name);
    SetupOptions o;
    o.lambda = pr.lambda;
    o.lambda_p = pr.lambda_p;
    o.n = n;
    o.m = m ? m : pr.default_m;
    return o;
}

struct SetupError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Generates the full parameter set: primes q = a·2n+1 and p with q | p-1,
/// generators via secret exponents, and an order-2n root of unity in Z_q*.
inline std::pair<SystemParams, SecretState> setup(const SetupOptions& opt, Rng& rng) {
    if (!is_power_of_two(opt.n)) throw std::invalid_argument("n must be a power of two");
    if (opt.lambda < 8) throw std::invalid_argument("lambda must be at least 8");
    if (opt.m < 1) throw std::invalid_argument("m must be at least 1");

    SystemParams P;
    SecretState S;
    P.lambda = opt.lambda;
    P.lambda_q = 2 * opt.lambda + 1;
    P.lambda_p = opt.lambda_p;
    if (P.lambda_p < P.lambda_q + 2) throw std::invalid_argument("lambda_p too small for lambda_q");
    P.m = opt.m;
    P.n = opt.n;
    P.sig_scheme = opt.sig_scheme;

    const mpz_class two_n = mpz_class(2) * mpz_class(static_cast<unsigned long>(P.n));

    // q = a·2n + 1 with |q| = lambda_q bits
    mpz_class lo_q = mpz_class(1) << (P.lambda_q - 1);
    mpz_class hi_q = (mpz_class(1) << P.lambda_q) - 1;
    mpz_class a_lo = lo_q / two_n + 1, a_hi = hi_q / two_n;
    if (a_lo > a_hi) throw SetupError("lambda_q too small for 2n | q-1");
    unsigned tries = 0;
    for (;; ++tries) {
        if (tries > opt.retry_bound) throw SetupError("prime search for q exhausted retry bound");
        mpz_class a = a_lo + rng.below(a_hi - a_lo + 1);
        P.q = a * two_n + 1;
        if (probably_prime(P.q)) break;
    }
    if (P.q <= mpz_class(static_cast<unsigned long>(P.n)) + kMetaSegments + 2)
        throw SetupError("q too small to encode record metadata; raise lambda");

    // p = k·q + 1 with |p| = lambda_p bits
    mpz_class lo_p = mpz_class(1) << (P.lambda_p - 1);
    mpz_class hi_p = (mpz_class(1) << P.lambda_p) - 1;
    mpz_class k_lo = lo_p / P.q + 1, k_hi = hi_p / P.q;
    for (tries = 0;; ++tries) {
        if (tries > opt.retry_bound) throw SetupError("prime search for p exhausted retry bound");
        mpz_class k = k_lo + rng.below(k_hi - k_lo + 1);
        P.p = k * P.q + 1;
        if (probably_prime(P.p)) break;
    }

    // base generator of the order-q subgroup
    mpz_class cofactor = (P.p - 1) / P.q;
    do {
        mpz_class u = 2 + rng.below(P.p - 3);
        S.g = powmod(u, cofactor, P.p);
    } while (S.g == 1);

    // omega of order exactly 2n in Z_q*
    mpz_class q_cof = (P.q - 1) / two_n;
    for (;;) {
        mpz_class u = 2 + rng.below(P.q - 3);
        P.omega = powmod(u, q_cof, P.q);
        if (P.omega != 1 && powmod(P.omega, two_n / 2, P.q) != 1) break;
    }

    S.gamma.resize(P.record_segments());
    P.gens.resize(P.record_segments());
    for (size_t i = 0; i < S.gamma.size(); ++i) {
        S.gamma[i] = rng.nonzero_below(P.q);
        P.gens[i] = powmod(S.g, S.gamma[i], P.p);
    }

    P.fid = rng.bytes(kFidBytes);
    auto [psk, ssk] = signature_scheme(P.sig_scheme).keygen(rng.bytes(32));
    P.psk = psk;
    S.ssk = ssk;

    validate_params(P);
    return {P, S};
}

/// h(B) = g^{sum gamma_i·b_i mod q} mod p: one exponentiation. Equals
/// hash_block on every input when the secret matches the public generators.
inline HashValue hash_block_secret(const SystemParams& P, const SecretState& S, const Vec& b) {
    if (b.size() > S.gamma.size()) throw std::invalid_argument("vector longer than gamma");
    mpz_class e = 0;
    for (size_t i = 0; i < b.size(); ++i) e = addmod(e, mulmod(S.gamma[i], b[i], P.q), P.q);
    return {powmod(S.g, e, P.p)};
}

/// Signs an already-known hash value at (addr, epoch), for when the hash
/// is obtained homomorphically instead of from the block itself.
inline AuthTag sign_tag(const SystemParams& P, const SecretState& S, const HashValue& h,
                        const Address& addr, uint64_t epoch) {
    Bytes msg = canonical_message(h, P.fid, addr, epoch);
    return {h, signature_scheme(P.sig_scheme).sign(S.ssk, msg)};
}

/// Full authentication tag for a vector bound to (fid, addr, epoch).
inline AuthTag make_tag(const SystemParams& P, const SecretState& S, const Vec& b,
                        const Address& addr, uint64_t epoch) {
    return sign_tag(P, S, hash_block_secret(P, S, b), addr, epoch);
}

// ---------------------------------------------------------------------------
// Secret key file: plaintext with a warning banner.

inline void write_secret(std::ostream& out, const SecretState& S) {
    out << "# WARNING: plaintext signing key and hash trapdoor. Do not share.\n";
    out << "ssk=" << to_hex(S.ssk) << "\n";
    out << "g=" << mpz_hex(S.g) << "\n";
    out << "gamma=";
    for (size_t i = 0; i < S.gamma.size(); ++i) out << (i ? "," : "") << mpz_hex(S.gamma[i]);
    out << "\n";
}

inline SecretState read_secret(std::istream& in) {
    auto kv = parse_kv(in);
    SecretState S;
    S.ssk = from_hex(kv_get(kv, "ssk"));
    S.g = hex_mpz(kv_get(kv, "g"));
    std::stringstream gs(kv_get(kv, "gamma"));
    std::string tok;
    while (std::getline(gs, tok, ',')) S.gamma.push_back(hex_mpz(tok));
    return S;
}

}  // namespace dpor
