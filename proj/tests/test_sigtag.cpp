#include <catch2/catch_amalgamated.hpp>

#include "dpor/secret.hpp"
#include "toy.hpp"

using namespace dpor;

TEST_CASE("canonical message layout") {
    auto [P, S] = toy::make();
    HashValue h{42};
    Bytes msg = canonical_message(h, P.fid, Address::h(2, Address::Side::X, 3), 4);
    // hash: 2-byte length prefix + magnitude
    REQUIRE(msg.size() == 2 + 1 + kFidBytes + 3 + 8 + 8);
    CHECK(msg[0] == 0);
    CHECK(msg[1] == 1);
    CHECK(msg[2] == 42);
    // trailer: structure 01, level 02, side 00, slot, epoch
    size_t t = 3 + kFidBytes;
    CHECK(msg[t] == 0x01);
    CHECK(msg[t + 1] == 0x02);
    CHECK(msg[t + 2] == 0x00);
    Bytes slot(msg.begin() + t + 3, msg.begin() + t + 11);
    CHECK(slot == Bytes{0, 0, 0, 0, 0, 0, 0, 3});
    Bytes epoch(msg.begin() + t + 11, msg.begin() + t + 19);
    CHECK(epoch == Bytes{0, 0, 0, 0, 0, 0, 0, 4});

    SECTION("determinism and injectivity over the side field") {
        Bytes again = canonical_message(h, P.fid, Address::h(2, Address::Side::X, 3), 4);
        CHECK(again == msg);
        Bytes other = canonical_message(h, P.fid, Address::h(2, Address::Side::Y, 3), 4);
        CHECK(other != msg);
    }
    SECTION("U and C addresses mark unused fields with 0xFF") {
        Bytes u = canonical_message(h, P.fid, Address::u(1), 0);
        CHECK(u[t] == 0x00);
        CHECK(u[t + 1] == 0xFF);  // level
        CHECK(u[t + 2] == 0xFF);  // side
        Bytes c = canonical_message(h, P.fid, Address::c(Address::Side::Y, 1), 0);
        CHECK(c[t] == 0x02);
        CHECK(c[t + 1] == 0xFF);
        CHECK(c[t + 2] == 0x01);
    }
}

TEST_CASE("tag round-trip and strict (addr, epoch) binding") {
    auto [P, S] = toy::make();
    Rng rng(31);
    for (int i = 0; i < 300; ++i) {
        Vec b{rng.below(P.q), rng.below(P.q)};
        Address a = i % 2 ? Address::u(rng.index(16))
                          : Address::h(uint8_t(rng.index(3)),
                                       rng.index(2) ? Address::Side::X : Address::Side::Y,
                                       rng.index(8));
        uint64_t epoch = rng.index(1000);
        AuthTag tag = make_tag(P, S, b, a, epoch);
        CHECK(check_tag(P, tag, a, epoch));
        CHECK_FALSE(check_tag(P, tag, a, epoch + 1));
        Address other = Address::u(a.slot + 1);
        CHECK_FALSE(check_tag(P, tag, other, epoch));
    }
}

TEST_CASE("distinct epochs give distinct, epoch-bound signatures") {
    auto [P, S] = toy::make();
    Vec b{3, 9};
    Address a = Address::u(0);
    AuthTag t1 = make_tag(P, S, b, a, 1);
    AuthTag t2 = make_tag(P, S, b, a, 2);
    CHECK(t1.hash == t2.hash);
    CHECK(t1.signature != t2.signature);
    CHECK(check_tag(P, t1, a, 1));
    CHECK_FALSE(check_tag(P, t1, a, 2));
    CHECK(check_tag(P, t2, a, 2));
}

TEST_CASE("malformed tags reject without crashing") {
    auto [P, S] = toy::make();
    AuthTag tag = make_tag(P, S, Vec{1, 2}, Address::u(0), 0);
    SECTION("truncated signature") {
        AuthTag bad = tag;
        bad.signature.resize(bad.signature.size() / 2);
        CHECK_FALSE(check_tag(P, bad, Address::u(0), 0));
    }
    SECTION("hash out of group range") {
        AuthTag bad = tag;
        bad.hash.v = P.p + 5;
        CHECK_FALSE(check_tag(P, bad, Address::u(0), 0));
    }
    SECTION("empty tag") { CHECK_FALSE(check_tag(P, AuthTag{}, Address::u(0), 0)); }
}

TEST_CASE("tag wire form round-trips") {
    auto [P, S] = toy::make();
    AuthTag tag = make_tag(P, S, Vec{7, 1}, Address::u(3), 9);
    Bytes wire = tag.bytes();
    Cursor c(wire);
    AuthTag back = AuthTag::decode(c);
    c.expect_done();
    CHECK(back == tag);
}

TEST_CASE("nominal tag size is 192 bytes at the paper profile") {
    SystemParams P;
    P.lambda_p = 1024;
    P.sig_scheme = "ed25519";
    CHECK(AuthTag::nominal_size(P) == 192);  // 128-byte hash + 64-byte signature
}

TEST_CASE("ed25519 scheme basics") {
    const SignatureScheme& s = signature_scheme("ed25519");
    auto [psk, ssk] = s.keygen(Bytes(32, 1));
    Bytes msg{1, 2, 3};
    Bytes sig = s.sign(ssk, msg);
    CHECK(sig.size() == 64);
    CHECK(s.verify(psk, msg, sig));
    Bytes tampered = msg;
    tampered[0] ^= 1;
    CHECK_FALSE(s.verify(psk, tampered, sig));
    CHECK(s.sign(ssk, msg) == sig);  // deterministic
    CHECK_THROWS(signature_scheme("rsa"));
}
