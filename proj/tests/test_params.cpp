#include <catch2/catch_amalgamated.hpp>

#include "dpor/secret.hpp"
#include "toy.hpp"

using namespace dpor;

TEST_CASE("hand-built toy parameters satisfy every invariant") {
    auto [P, S] = toy::make();
    REQUIRE_NOTHROW(validate_params(P));
    CHECK(P.gens[0] == 79);
    CHECK(P.gens[1] == 9);
    // omega has order exactly 2n = 8 mod 17: all proper powers differ from 1
    for (unsigned j = 1; j < 8; ++j) CHECK(powmod(P.omega, j, P.q) != 1);
    CHECK(powmod(P.omega, 8, P.q) == 1);
}

TEST_CASE("setup generates valid parameters and consistent secrets") {
    Rng rng(1);
    SetupOptions o;
    o.lambda = 8;
    o.lambda_p = 64;
    o.n = 8;
    o.m = 3;
    auto [P, S] = setup(o, rng);
    REQUIRE_NOTHROW(validate_params(P));
    CHECK(P.lambda_q == 17);
    CHECK(P.q % (2 * P.n) == 1);
    CHECK((P.p - 1) % P.q == 0);
    REQUIRE(S.gamma.size() == P.m + kMetaSegments);
    for (size_t i = 0; i < S.gamma.size(); ++i) CHECK(P.gens[i] == powmod(S.g, S.gamma[i], P.p));
}

TEST_CASE("setup rejects a non-power-of-two capacity") {
    Rng rng(2);
    SetupOptions o;
    o.n = 3;
    CHECK_THROWS_AS(setup(o, rng), std::invalid_argument);
}

TEST_CASE("setup fails cleanly when the prime search cannot succeed") {
    Rng rng(2);
    SetupOptions o;
    o.lambda = 8;       // 17-bit q
    o.n = uint64_t(1) << 20;  // 2n | q-1 is unsatisfiable at this width
    CHECK_THROWS_AS(setup(o, rng), SetupError);
}

TEST_CASE("paper profile shape") {
    Profile pr = named_profile("paper");
    CHECK(pr.lambda == 128);
    CHECK(pr.lambda_p == 1024);
    CHECK(pr.lambda_q == 257);
    CHECK(pr.lambda_q == 2 * pr.lambda + 1);
    CHECK(pr.default_m == 128);
    CHECK_THROWS(named_profile("nope"));
}

TEST_CASE("segment_block slices MSB-first into (lambda_q-1)-bit segments") {
    auto [P, S] = toy::make();
    SECTION("empty input gives the all-zero block") {
        Vec b = segment_block(P, {});
        CHECK(b == Vec{0, 0});
    }
    SECTION("one byte 0x05 splits into high then low nibble") {
        Vec b = segment_block(P, {0x05});
        CHECK(b[0] == 0);
        CHECK(b[1] == 5);
    }
    SECTION("oversize input is rejected") {
        CHECK_THROWS_AS(segment_block(P, Bytes(P.block_bytes() + 1, 0)), std::length_error);
    }
}

TEST_CASE("segment/byte round-trip is the identity on padded input") {
    auto [P, S] = toy::make_random(8, 5, 99);
    Rng rng(3);
    for (int i = 0; i < 1000; ++i) {
        size_t len = rng.index(P.block_bytes() + 1);
        Bytes data = rng.bytes(len);
        Vec block = segment_block(P, data);
        Bytes back = block_to_bytes(P, block);
        REQUIRE(back.size() == P.block_bytes());
        CHECK(std::equal(data.begin(), data.end(), back.begin()));
        for (size_t j = len; j < back.size(); ++j) CHECK(back[j] == 0);
        for (const auto& s : block) CHECK(s < P.q);
    }
}

TEST_CASE("epoch_of_level clears the bits below the level") {
    CHECK(epoch_of_level(5, 0) == 5);
    CHECK(epoch_of_level(5, 2) == 4);
    CHECK_THROWS_AS(epoch_of_level(5, 1), std::domain_error);
    // always a multiple of 2^l and never above w
    Rng rng(4);
    for (int i = 0; i < 200; ++i) {
        uint64_t w = rng.index(1 << 12);
        for (unsigned l = 0; l < 12; ++l) {
            if (!(w >> l & 1)) continue;
            uint64_t e = epoch_of_level(w, l);
            CHECK(e % (uint64_t(1) << l) == 0);
            CHECK(e <= w);
        }
    }
}

TEST_CASE("record vectors round-trip through the coded form") {
    auto [P, S] = toy::make();
    WriteRecord r;
    r.type = UpdType::Insert;
    r.logical_index = 2;
    r.payload = {5, 11};
    Vec v = r.to_vector(P);
    REQUIRE(v.size() == P.record_segments());
    WriteRecord back = WriteRecord::from_vector(P, v);
    CHECK(back.type == r.type);
    CHECK(back.logical_index == r.logical_index);
    CHECK(back.payload == r.payload);
    SECTION("delete records survive with a nonzero marker") {
        WriteRecord d{UpdType::Delete, 0, Vec(P.m, mpz_class(0))};
        Vec dv = d.to_vector(P);
        CHECK(dv != zero_vector(P));
    }
}

TEST_CASE("parameter files round-trip") {
    auto [P, S] = toy::make();
    std::stringstream buf;
    write_params(buf, P);
    SystemParams Q = read_params(buf);
    CHECK(Q.p == P.p);
    CHECK(Q.q == P.q);
    CHECK(Q.gens == P.gens);
    CHECK(Q.omega == P.omega);
    CHECK(Q.fid == P.fid);
    CHECK(Q.psk == P.psk);
    CHECK(Q.n == P.n);
    CHECK(Q.m == P.m);

    std::stringstream sbuf;
    write_secret(sbuf, S);
    SecretState T = read_secret(sbuf);
    CHECK(T.ssk == S.ssk);
    CHECK(T.g == S.g);
    CHECK(T.gamma == S.gamma);
}
