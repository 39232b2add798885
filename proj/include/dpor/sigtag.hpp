#pragma once

#include <sodium.h>

#include <memory>
#include <mutex>

#include "dpor/homhash.hpp"
#include "dpor/params.hpp"

namespace dpor {

inline void sodium_ready() {
    static std::once_flag once;
    std::call_once(once, [] {
        if (sodium_init() < 0) throw std::runtime_error("libsodium init failed");
    });
}

/// Pluggable EUF-CMA signature backend. Keys are opaque byte strings.
class SignatureScheme {
public:
    virtual ~SignatureScheme() = default;
    virtual std::string name() const = 0;
    virtual size_t signature_bytes() const = 0;
    virtual std::pair<Bytes, Bytes> keygen(const Bytes& seed) const = 0;  // (psk, ssk)
    virtual Bytes sign(const Bytes& ssk, const Bytes& msg) const = 0;
    virtual bool verify(const Bytes& psk, const Bytes& msg, const Bytes& sig) const = 0;
};

/// Ed25519: deterministic, 64-byte signatures (4λ bits at λ=128).
class Ed25519Scheme final : public SignatureScheme {
public:
    std::string name() const override { return "ed25519"; }
    size_t signature_bytes() const override { return crypto_sign_BYTES; }

    std::pair<Bytes, Bytes> keygen(const Bytes& seed) const override {
        sodium_ready();
        if (seed.size() != crypto_sign_SEEDBYTES) throw std::invalid_argument("ed25519 seed must be 32 bytes");
        Bytes psk(crypto_sign_PUBLICKEYBYTES), ssk(crypto_sign_SECRETKEYBYTES);
        crypto_sign_seed_keypair(psk.data(), ssk.data(), seed.data());
        return {psk, ssk};
    }

    Bytes sign(const Bytes& ssk, const Bytes& msg) const override {
        sodium_ready();
        if (ssk.size() != crypto_sign_SECRETKEYBYTES) throw std::invalid_argument("bad ed25519 signing key");
        Bytes sig(crypto_sign_BYTES);
        crypto_sign_detached(sig.data(), nullptr, msg.data(), msg.size(), ssk.data());
        return sig;
    }

    bool verify(const Bytes& psk, const Bytes& msg, const Bytes& sig) const override {
        sodium_ready();
        if (psk.size() != crypto_sign_PUBLICKEYBYTES || sig.size() != crypto_sign_BYTES) return false;
        return crypto_sign_verify_detached(sig.data(), msg.data(), msg.size(), psk.data()) == 0;
    }
};

inline const SignatureScheme& signature_scheme(const std::string& name) {
    static const Ed25519Scheme ed25519;
    if (name == "ed25519") return ed25519;
    throw std::invalid_argument("unknown sig_scheme: " + name);
}

// ---------------------------------------------------------------------------

/// (homomorphic hash, signature over hash‖fid‖addr‖epoch).
struct AuthTag {
    HashValue hash;
    Bytes signature;

    bool operator==(const AuthTag&) const = default;

    /// Wire form: hash (length-prefixed) ‖ signature (length-prefixed).
    void encode(Bytes& out) const {
        hash.encode(out);
        put_lp(out, signature);
    }
    static AuthTag decode(Cursor& c) {
        AuthTag t;
        t.hash = HashValue::decode(c);
        t.signature = c.lp();
        return t;
    }
    Bytes bytes() const {
        Bytes out;
        encode(out);
        return out;
    }

    /// Nominal size: fixed-width hash (lambda_p bits) plus signature.
    static size_t nominal_size(const SystemParams& P) {
        return (P.lambda_p + 7) / 8 + signature_scheme(P.sig_scheme).signature_bytes();
    }
};

/// Deterministic signing payload:
/// hash (length-prefixed) ‖ fid ‖ structure ‖ level ‖ side ‖ slot ‖ epoch.
inline Bytes canonical_message(const HashValue& hash, const Bytes& fid, const Address& addr,
                               uint64_t epoch) {
    if (fid.size() != kFidBytes) throw std::invalid_argument("fid must be 16 bytes");
    Bytes msg;
    hash.encode(msg);
    put_bytes(msg, fid);
    addr.encode(msg);
    put_u64be(msg, epoch);
    return msg;
}

/// Accept iff the tag's signature verifies for exactly (fid, addr, epoch).
/// Malformed tags reject, never throw.
inline bool check_tag(const SystemParams& P, const AuthTag& tag, const Address& addr,
                      uint64_t epoch) {
    try {
        if (tag.hash.v <= 0 || tag.hash.v >= P.p) return false;
        Bytes msg = canonical_message(tag.hash, P.fid, addr, epoch);
        return signature_scheme(P.sig_scheme).verify(P.psk, msg, tag.signature);
    } catch (const std::exception&) {
        return false;
    }
}

}  // namespace dpor
