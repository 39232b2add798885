#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "dpor/auditor.hpp"
#include "dpor/secret.hpp"
#include "toy.hpp"

using namespace dpor;

namespace {
/// Hand-built challenge/proof pair over C slots at W=0 (epoch 0).
struct Fixture {
    SystemParams P;
    SecretState S;
    Fixture() {
        auto [p, s] = toy::make();
        P = p;
        S = s;
    }
    AuthTag tag_for(const Vec& record, uint64_t slot) const {
        return make_tag(P, S, record, Address::c(Address::Side::X, slot), 0);
    }
};
}  // namespace

TEST_CASE("verify_proof accepts the worked single-entry example") {
    Fixture f;
    Vec b{2, 3, 0, 0};
    Challenge q;
    q.W = 0;
    q.entries.emplace_back(1, Address::c(Address::Side::X, 0));
    AuditProof pr;
    pr.W = 0;
    pr.bstar = b;
    pr.tags = {f.tag_for(b, 0)};
    CHECK(pr.tags[0].hash.v == 76);  // h([2,3]) = 79^2 * 9^3 mod 103
    AuditOutcome out = verify_proof(f.P, q, pr);
    CHECK(out.ok);
    CHECK_FALSE(out.vacuous);
}

TEST_CASE("verify_proof accepts the worked two-entry combination") {
    Fixture f;
    Vec b1{1, 0, 0, 0}, b2{0, 1, 0, 0};
    Challenge q;
    q.W = 0;
    q.entries.emplace_back(2, Address::c(Address::Side::X, 0));
    q.entries.emplace_back(3, Address::c(Address::Side::X, 1));
    AuditProof pr;
    pr.W = 0;
    pr.bstar = Vec{2, 3, 0, 0};  // 2*[1,0] + 3*[0,1]
    pr.tags = {f.tag_for(b1, 0), f.tag_for(b2, 1)};
    // h* = 79^2 * 9^3 mod 103 = 76 = h(Bstar)
    CHECK(mulmod(powmod(pr.tags[0].hash.v, 2, f.P.p), powmod(pr.tags[1].hash.v, 3, f.P.p),
                 f.P.p) == 76);
    CHECK(verify_proof(f.P, q, pr).ok);

    SECTION("a substituted block is caught by the combined hash") {
        // server pretends b2' = [1,1]: Bstar becomes [5,3]
        AuditProof forged = pr;
        forged.bstar = Vec{5, 3, 0, 0};
        AuditOutcome out = verify_proof(f.P, q, forged);
        CHECK_FALSE(out.ok);
        CHECK(out.reason == "combined hash mismatch");
    }
    SECTION("a tag at the wrong epoch is caught first") {
        AuditProof stale = pr;
        stale.tags[0] = make_tag(f.P, f.S, b1, Address::c(Address::Side::X, 0), 99);
        AuditOutcome out = verify_proof(f.P, q, stale);
        CHECK_FALSE(out.ok);
        CHECK(out.reason.find("tag rejected") == 0);
    }
    SECTION("tag count mismatch and malformed combined block reject") {
        AuditProof short_tags = pr;
        short_tags.tags.pop_back();
        CHECK_FALSE(verify_proof(f.P, q, short_tags).ok);
        AuditProof bad_b = pr;
        bad_b.bstar.pop_back();
        CHECK_FALSE(verify_proof(f.P, q, bad_b).ok);
        AuditProof big_seg = pr;
        big_seg.bstar[0] = f.P.q + 1;
        CHECK_FALSE(verify_proof(f.P, q, big_seg).ok);
    }
    SECTION("counter mismatch rejects") {
        AuditProof wrong_w = pr;
        wrong_w.W = 1;
        CHECK_FALSE(verify_proof(f.P, q, wrong_w).ok);
    }
}

TEST_CASE("gen_challenge refuses a forged statement") {
    Fixture f;
    CounterStatement st;
    st.fid = f.P.fid;
    st.W = 3;
    st.size = 1;
    st.digest = zero_digest();
    st.signature = signature_scheme(f.P.sig_scheme).sign(f.S.ssk, st.message());
    Rng rng(71);
    CHECK_NOTHROW(gen_challenge(f.P, st, 2, rng));
    st.W = 4;  // forged counter, stale signature
    CHECK_THROWS_AS(gen_challenge(f.P, st, 2, rng), std::invalid_argument);
}

TEST_CASE("challenge coefficients are nonzero and addresses distinct") {
    Fixture f;
    CounterStatement st;
    st.fid = f.P.fid;
    st.W = 3;  // levels 0 and 1 occupied at n=4
    st.size = 4;
    st.digest = zero_digest();
    st.signature = signature_scheme(f.P.sig_scheme).sign(f.S.ssk, st.message());
    Rng rng(72);
    for (int t = 0; t < 50; ++t) {
        Challenge q = gen_challenge(f.P, st, 2, rng);
        CHECK(q.W == 3);
        std::set<Address> seen;
        for (const auto& [nu, addr] : q.entries) {
            CHECK(nu != 0);
            CHECK(nu < f.P.q);
            seen.insert(addr);
        }
        CHECK(seen.size() == q.entries.size());
    }
}

TEST_CASE("empty challenges verify vacuously") {
    Fixture f;
    Challenge q;
    AuditProof pr;
    AuditOutcome out = verify_proof(f.P, q, pr);
    CHECK(out.ok);
    CHECK(out.vacuous);
}
