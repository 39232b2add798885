#pragma once

#include "dpor/wire.hpp"

namespace dpor {

/// Challenge over the occupied structures: coefficients from [1, q), c
/// distinct addresses per occupied level plus c from C. Refuses to run from
/// an unverifiable counter statement.
inline Challenge gen_challenge(const SystemParams& P, const CounterStatement& st, unsigned c,
                               Rng& rng) {
    if (!verify_statement(P, st))
        throw std::invalid_argument("counter statement does not verify; refusing to audit");
    Challenge q;
    q.W = st.W;
    for (const Address& a : audit_addresses(P, st.W % P.n, c, rng))
        q.entries.emplace_back(rng.nonzero_below(P.q), a);
    return q;
}

struct AuditOutcome {
    bool ok = false;
    bool vacuous = false;  // nothing challengeable (server holds no structures)
    std::string reason;
};

/// Eq-style verification: every tag must verify at its slot's derived epoch,
/// and the homomorphic hash of B* must equal the product of challenged tag
/// hashes raised to the coefficients. Public inputs only.
inline AuditOutcome verify_proof(const SystemParams& P, const Challenge& q,
                                 const AuditProof& proof) {
    AuditOutcome out;
    if (q.entries.empty()) {
        out.ok = true;
        out.vacuous = true;
        return out;
    }
    if (proof.W != q.W) {
        out.reason = "proof counter mismatch";
        return out;
    }
    if (proof.tags.size() != q.entries.size()) {
        out.reason = "tag count mismatch";
        return out;
    }
    if (proof.bstar.size() != P.record_segments()) {
        out.reason = "malformed combined block";
        return out;
    }
    for (const auto& s : proof.bstar)
        if (s < 0 || s >= P.q) {
            out.reason = "combined block segment out of range";
            return out;
        }
    mpz_class hstar = 1;
    for (size_t i = 0; i < q.entries.size(); ++i) {
        const auto& [nu, addr] = q.entries[i];
        uint64_t epoch;
        try {
            epoch = slot_epoch(P, addr, q.W);
        } catch (const std::exception&) {
            out.reason = "challenge address has no derivable epoch";
            return out;
        }
        if (!check_tag(P, proof.tags[i], addr, epoch)) {
            out.reason = "tag rejected at " + addr.str();
            return out;
        }
        hstar = mulmod(hstar, powmod(proof.tags[i].hash.v, nu, P.p), P.p);
    }
    if (!(hash_block(P, proof.bstar).v == hstar)) {
        out.reason = "combined hash mismatch";
        return out;
    }
    out.ok = true;
    return out;
}

/// Fetches the latest statement from the server and verifies it.
inline CounterStatement fetch_statement(const SystemParams& P, Endpoint& ep) {
    Bytes resp = ep.call(FrameType::StmtGet, {}, FrameType::StmtGetResp);
    Cursor c(resp);
    CounterStatement st = CounterStatement::decode(c);
    c.expect_done();
    if (!verify_statement(P, st)) throw std::invalid_argument("counter statement does not verify");
    return st;
}

/// One full audit round against a live endpoint. Protocol errors from the
/// server count as failed audits.
inline AuditOutcome run_audit(const SystemParams& P, Endpoint& ep, const CounterStatement& st,
                              unsigned c, Rng& rng) {
    MeterScope scope(ep.meter(), ByteMeter::Op::Audit);
    Challenge q = gen_challenge(P, st, c, rng);
    AuditProof proof;
    try {
        Bytes resp = ep.call(FrameType::AuditReq, q.encode(), FrameType::AuditResp);
        Cursor cur(resp);
        proof = AuditProof::decode(P, cur);
        cur.expect_done();
    } catch (const RemoteError& e) {
        return {false, false, std::string("server error: ") + e.what()};
    } catch (const DecodeError& e) {
        return {false, false, std::string("malformed proof: ") + e.what()};
    }
    return verify_proof(P, q, proof);
}

}  // namespace dpor
