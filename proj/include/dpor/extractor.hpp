#pragma once

#include "dpor/auditor.hpp"
#include "dpor/server.hpp"

namespace dpor {

/// Challenge-only view of the storage party. The security game fixes the
/// server's final state, so the snapshot oracle audits a value copy.
class ServerOracle {
public:
    virtual ~ServerOracle() = default;
    /// May throw RemoteError; the extractor treats that as a refused challenge.
    virtual AuditProof audit(const Challenge& q) = 0;
};

class SnapshotOracle final : public ServerOracle {
public:
    explicit SnapshotOracle(PorServer snapshot) : snap_(std::move(snapshot)) {}
    AuditProof audit(const Challenge& q) override { return snap_.handle_audit(q); }
    const PorServer& server() const { return snap_; }

private:
    PorServer snap_;
};

class LinkOracle final : public ServerOracle {
public:
    LinkOracle(const SystemParams& P, Endpoint& ep) : P_(P), ep_(ep) {}
    AuditProof audit(const Challenge& q) override {
        Bytes resp = ep_.call(FrameType::AuditReq, q.encode(), FrameType::AuditResp);
        Cursor c(resp);
        AuditProof pr = AuditProof::decode(P_, c);
        c.expect_done();
        return pr;
    }

private:
    const SystemParams& P_;
    Endpoint& ep_;
};

struct ExtractOptions {
    unsigned extra_attempts = 64;  // rank loop budget beyond |J|
    unsigned probe_attempts = 2;   // singleton probes per address
};

struct StructureReport {
    std::string structure;  // "H" or "C"
    int level = -1;
    uint64_t slots = 0;
    uint64_t responsive = 0;
    uint64_t attempts = 0;  // rank-loop challenges issued
    uint64_t rank = 0;
    bool ok = false;
};

struct ExtractionFailure : std::runtime_error {
    StructureReport report;
    explicit ExtractionFailure(StructureReport r)
        : std::runtime_error("extraction failed at " + r.structure +
                             (r.level >= 0 ? std::to_string(r.level) : "") + ": rank " +
                             std::to_string(r.rank) + "/" + std::to_string(r.slots / 2) +
                             " after " + std::to_string(r.attempts) + " attempts"),
          report(std::move(r)) {}
};

/// Accumulates independent coefficient rows over a fixed challenged set J
/// until the system is solvable, then recovers the vectors at J. Every
/// solved vector must hash-match its (already epoch-checked) tag.
inline std::optional<std::vector<Vec>> extract_blocks(const SystemParams& P, ServerOracle& oracle,
                                                      const std::vector<Address>& J, uint64_t W,
                                                      unsigned max_attempts, Rng& rng,
                                                      StructureReport* report = nullptr) {
    if (J.empty()) throw std::invalid_argument("extract_blocks needs a nonempty address set");
    RowSpace space(P.q);
    std::vector<std::vector<mpz_class>> rows;
    std::vector<Vec> rhs;
    std::vector<AuthTag> tags;
    for (unsigned attempt = 0; attempt < max_attempts && space.rank() < J.size(); ++attempt) {
        if (report) ++report->attempts;
        Challenge q;
        q.W = W;
        std::vector<mpz_class> coeffs;
        coeffs.reserve(J.size());
        for (const Address& a : J) {
            mpz_class nu = rng.nonzero_below(P.q);
            coeffs.push_back(nu);
            q.entries.emplace_back(std::move(nu), a);
        }
        AuditProof proof;
        try {
            proof = oracle.audit(q);
        } catch (const RemoteError&) {
            continue;
        }
        if (!verify_proof(P, q, proof).ok) continue;
        if (!space.try_add(coeffs)) continue;
        rows.push_back(std::move(coeffs));
        rhs.push_back(proof.bstar);
        if (tags.empty()) tags = proof.tags;
    }
    if (report) report->rank = space.rank();
    if (space.rank() < J.size()) return std::nullopt;

    const size_t segs = P.record_segments();
    std::vector<Vec> blocks(J.size(), Vec(segs));
    std::vector<mpz_class> b(J.size());
    for (size_t s = 0; s < segs; ++s) {
        for (size_t r = 0; r < J.size(); ++r) b[r] = rhs[r][s];
        auto x = solve_mod(rows, b, P.q);
        for (size_t j = 0; j < J.size(); ++j) blocks[j][s] = x[j];
    }
    for (size_t j = 0; j < J.size(); ++j)
        if (!(hash_block(P, blocks[j]) == tags[j].hash))
            throw std::logic_error("solved block does not match its authenticated hash");
    return blocks;
}

namespace detail {

inline uint64_t codeword_position(const Address& a, uint64_t half) {
    return (a.side == Address::Side::X ? 0 : half) + a.slot;
}

/// Finds addresses the oracle answers verifiably for, one singleton
/// challenge at a time.
inline std::vector<Address> probe_responsive(const SystemParams& P, ServerOracle& oracle,
                                             const std::vector<Address>& all, uint64_t W,
                                             unsigned probe_attempts, Rng& rng) {
    std::vector<Address> good;
    for (const Address& a : all) {
        for (unsigned t = 0; t < probe_attempts; ++t) {
            Challenge q;
            q.W = W;
            q.entries.emplace_back(rng.nonzero_below(P.q), a);
            try {
                if (verify_proof(P, q, oracle.audit(q)).ok) {
                    good.push_back(a);
                    break;
                }
            } catch (const RemoteError&) {
            }
        }
    }
    return good;
}

/// Extracts one coded structure (an H level or C): probes for responsive
/// positions, runs the rank loop over 2^l of them, erasure-decodes.
inline std::vector<Vec> extract_structure(const SystemParams& P, ServerOracle& oracle, unsigned l,
                                          bool is_c, uint64_t twist_base, uint64_t W,
                                          const ExtractOptions& opt, Rng& rng,
                                          std::vector<StructureReport>& reports) {
    const uint64_t half = uint64_t(1) << l;
    StructureReport rep;
    rep.structure = is_c ? "C" : "H";
    rep.level = is_c ? -1 : int(l);
    rep.slots = 2 * half;
    std::vector<Address> all;
    for (uint64_t s = 0; s < half; ++s)
        all.push_back(is_c ? Address::c(Address::Side::X, s)
                           : Address::h(static_cast<uint8_t>(l), Address::Side::X, s));
    for (uint64_t s = 0; s < half; ++s)
        all.push_back(is_c ? Address::c(Address::Side::Y, s)
                           : Address::h(static_cast<uint8_t>(l), Address::Side::Y, s));
    std::vector<Address> good = probe_responsive(P, oracle, all, W, opt.probe_attempts, rng);
    rep.responsive = good.size();
    if (good.size() < half) {
        reports.push_back(rep);
        throw ExtractionFailure(rep);
    }
    good.resize(half);
    auto blocks = extract_blocks(P, oracle, good, W, static_cast<unsigned>(good.size()) + opt.extra_attempts,
                                 rng, &rep);
    if (!blocks) {
        reports.push_back(rep);
        throw ExtractionFailure(rep);
    }
    std::vector<std::pair<uint64_t, Vec>> known;
    known.reserve(half);
    for (size_t i = 0; i < good.size(); ++i)
        known.emplace_back(codeword_position(good[i], half), (*blocks)[i]);
    rep.ok = true;
    reports.push_back(rep);
    return decode(P, l, known, twist_base);
}

}  // namespace detail

struct ExtractResult {
    std::vector<Vec> blocks;  // the latest logical file, m segments each
    std::vector<StructureReport> reports;
};

/// Full-file extraction: erasure-decodes C and every occupied level of H via
/// repeated audits, then replays the recovered write records (oldest first)
/// over the decoded snapshot of U.
inline ExtractResult extract_all(const SystemParams& P, ServerOracle& oracle,
                                 const CounterStatement& st, const ExtractOptions& opt, Rng& rng) {
    if (!verify_statement(P, st))
        throw std::invalid_argument("counter statement does not verify; refusing to extract");
    ExtractResult result;
    const uint64_t W = st.W;
    const uint64_t w = W % P.n;

    // write records from H, keyed by arrival index for replay order
    std::vector<std::pair<uint64_t, WriteRecord>> records;
    for (unsigned l : occupied_levels(P, w)) {
        uint64_t base = level_twist_base(w, l);
        auto inputs =
            detail::extract_structure(P, oracle, l, false, base, W, opt, rng, result.reports);
        for (size_t j = 0; j < inputs.size(); ++j)
            records.emplace_back(base + j, WriteRecord::from_vector(P, inputs[j]));
    }
    std::sort(records.begin(), records.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    // the logical file at the last C rebuild
    auto cells = detail::extract_structure(P, oracle, P.levels(), true, 0, W, opt, rng,
                                           result.reports);
    int64_t delta = 0;
    for (const auto& [t, r] : records) {
        if (r.type == UpdType::Insert) ++delta;
        if (r.type == UpdType::Delete) --delta;
    }
    int64_t size0 = static_cast<int64_t>(st.size) - delta;
    if (size0 < 0 || size0 > int64_t(P.n))
        throw std::logic_error("replay deltas give an impossible base size");
    std::vector<Vec> file;
    file.reserve(st.size);
    for (int64_t i = 0; i < size0; ++i)
        file.emplace_back(cells[i].begin(), cells[i].begin() + P.m);

    for (const auto& [t, r] : records) {
        switch (r.type) {
            case UpdType::Insert:
                if (r.logical_index + 1 < 0 || r.logical_index + 1 > int64_t(file.size()))
                    throw std::logic_error("replayed insert out of range");
                file.insert(file.begin() + (r.logical_index + 1), r.payload);
                break;
            case UpdType::Delete:
                if (r.logical_index < 0 || r.logical_index >= int64_t(file.size()))
                    throw std::logic_error("replayed delete out of range");
                file.erase(file.begin() + r.logical_index);
                break;
            case UpdType::Modify:
                if (r.logical_index < 0 || r.logical_index >= int64_t(file.size()))
                    throw std::logic_error("replayed modify out of range");
                file[r.logical_index] = r.payload;
                break;
            default:
                throw std::logic_error("replayed record has no type");
        }
    }
    if (file.size() != st.size) throw std::logic_error("replayed file size disagrees with statement");
    result.blocks = std::move(file);
    return result;
}

}  // namespace dpor
