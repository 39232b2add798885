#pragma once

#include "dpor/client.hpp"
#include "dpor/extractor.hpp"
#include "dpor/server.hpp"

namespace dpor {

struct BenchResult {
    uint64_t n = 0;
    size_t m = 0;
    uint64_t beta_wire = 0;     // bytes of one block field on the wire
    uint64_t read_bytes = 0;    // one authenticated read
    double write_avg = 0;       // mean over one full n-write period (incl. tag rebuilds)
    uint64_t audit_bytes = 0;   // one audit at w = n-1 (all levels occupied)
    uint64_t audit_entries = 0; // challenge size r
    uint64_t tag_nominal = 0;   // fixed-width hash + signature
    uint64_t tag_wire = 0;      // tag bytes as framed on the wire
    unsigned levels = 0;        // k = log2 n

    double write_residual() const { return write_avg - double(beta_wire); }
    double audit_residual() const { return double(audit_bytes) - double(beta_wire); }
};

/// Measures read / write / audit transfer costs at one capacity, driving a
/// full write period over the loopback transport.
inline BenchResult run_bench(const std::string& profile, uint64_t n, size_t m, unsigned c,
                             uint64_t seed) {
    Rng rng(seed);
    auto [P, S] = setup(setup_options_for(profile, n, m), rng);

    PorServer server(seed + 1);
    LoopbackLink link([&](const Frame& f) { return server.handle_frame(f); });
    ByteMeter meter;
    Endpoint ep(link, meter);

    Bytes file = rng.bytes(P.block_bytes() * n);
    PorClient client = PorClient::init(P, S, file, ep, rng);
    const SystemParams& params = client.state().params;

    BenchResult r;
    r.n = n;
    r.m = m;
    r.levels = params.levels();
    r.beta_wire = params.m * params.segment_wire_bytes();
    r.tag_nominal = AuthTag::nominal_size(params);
    {
        AuthTag t = make_tag(params, client.state().secret,
                             segment_block(params, rng.bytes(params.block_bytes())),
                             Address::u(0), 0);
        r.tag_wire = t.bytes().size();
    }

    meter.reset();
    client.read(0);
    r.read_bytes = meter.of(ByteMeter::Op::Read).total();

    // one full period of modifies; audit once just before the closing write
    meter.reset();
    uint64_t write_bytes = 0;
    for (uint64_t w = 0; w < n; ++w) {
        if (w == n - 1) {
            ByteMeter audit_meter;
            Endpoint audit_ep(link, audit_meter);
            CounterStatement st = fetch_statement(params, audit_ep);
            audit_meter.reset();
            Challenge q = gen_challenge(params, st, c, rng);
            r.audit_entries = q.entries.size();
            AuditOutcome out = run_audit(params, audit_ep, st, c, rng);
            if (!out.ok) throw std::logic_error("bench audit failed: " + out.reason);
            r.audit_bytes = audit_meter.of(ByteMeter::Op::Audit).total();
        }
        WriteRecord op;
        op.type = UpdType::Modify;
        op.logical_index = static_cast<int64_t>(rng.index(client.state().size()));
        op.payload = segment_block(params, rng.bytes(params.block_bytes()));
        client.write(op);
    }
    write_bytes = meter.of(ByteMeter::Op::Write).total() +
                  meter.of(ByteMeter::Op::RebuildTags).total();
    r.write_avg = double(write_bytes) / double(n);
    return r;
}

}  // namespace dpor
