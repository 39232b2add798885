#pragma once

#include "dpor/fftcode.hpp"
#include "dpor/merkle.hpp"
#include "dpor/rng.hpp"

namespace dpor {

/// Set bits of w: the levels of H currently holding an encoded batch.
inline std::vector<unsigned> occupied_levels(const SystemParams& P, uint64_t w) {
    if (w >= P.n) throw std::domain_error("write counter out of period");
    std::vector<unsigned> out;
    for (unsigned l = 0; l <= P.levels(); ++l)
        if (w >> l & 1) out.push_back(l);
    return out;
}

/// Deterministic last-write time of a slot, computable by any verifier from
/// (addr, W): H level l carries the counter value at its last fill, C the
/// counter at its last rebuild. U slots are not covered (their epochs live in
/// the client's position map).
inline uint64_t slot_epoch(const SystemParams& P, const Address& addr, uint64_t W) {
    uint64_t w = W % P.n;
    switch (addr.structure) {
        case Address::Structure::H:
            return W - w + epoch_of_level(w, addr.level);
        case Address::Structure::C:
            return W / P.n * P.n;
        default:
            throw std::domain_error("slot_epoch: U epochs are client state");
    }
}

/// First arrival index (mod n) of the batch held by H level l at counter w.
inline uint64_t level_twist_base(uint64_t w, unsigned l) {
    return epoch_of_level(w, l) - (uint64_t(1) << l);
}

/// c distinct uniform slots from each occupied H level plus c from C's 2n
/// slots, capped at each structure's slot count.
inline std::vector<Address> audit_addresses(const SystemParams& P, uint64_t w, unsigned c,
                                            Rng& rng) {
    if (c < 1) throw std::invalid_argument("per-level challenge count must be >= 1");
    std::vector<Address> out;
    auto sample = [&](uint64_t slots, auto make_addr) {
        uint64_t take = std::min<uint64_t>(c, slots);
        // partial Fisher-Yates over the slot index space
        std::map<uint64_t, uint64_t> perm;
        for (uint64_t i = 0; i < take; ++i) {
            uint64_t j = i + rng.index(slots - i);
            uint64_t vi = perm.count(i) ? perm[i] : i;
            uint64_t vj = perm.count(j) ? perm[j] : j;
            perm[i] = vj;
            perm[j] = vi;
            out.push_back(make_addr(perm[i]));
        }
    };
    for (unsigned l : occupied_levels(P, w)) {
        uint64_t half = uint64_t(1) << l;
        sample(2 * half, [&](uint64_t s) {
            return Address::h(static_cast<uint8_t>(l),
                              s < half ? Address::Side::X : Address::Side::Y, s % half);
        });
    }
    sample(2 * P.n, [&](uint64_t s) {
        return Address::c(s < P.n ? Address::Side::X : Address::Side::Y, s % P.n);
    });
    return out;
}

// ---------------------------------------------------------------------------
// Signed counter statement: the verifier's time source.

struct CounterStatement {
    Bytes fid;        // 16 bytes
    uint64_t W = 0;   // global write counter
    uint64_t size = 0;  // current logical file size in blocks
    Digest digest{};  // Merkle root over U's tags
    Bytes signature;

    Bytes message() const {
        Bytes msg;
        put_bytes(msg, fid);
        put_u64be(msg, W);
        put_u64be(msg, size);
        msg.insert(msg.end(), digest.begin(), digest.end());
        return msg;
    }

    /// Wire form: fid ‖ W ‖ size ‖ digMHT ‖ signature.
    void encode(Bytes& out) const {
        put_bytes(out, message());
        put_lp(out, signature);
    }
    static CounterStatement decode(Cursor& c) {
        CounterStatement st;
        st.fid = c.take(kFidBytes);
        st.W = c.u64be();
        st.size = c.u64be();
        st.digest = digest_from(c.take(kDigestBytes));
        st.signature = c.lp();
        return st;
    }
};

inline bool verify_statement(const SystemParams& P, const CounterStatement& st) {
    if (st.fid != P.fid) return false;
    return signature_scheme(P.sig_scheme).verify(P.psk, st.message(), st.signature);
}

}  // namespace dpor
