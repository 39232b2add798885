#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dpor/bytes.hpp"
#include "dpor/field.hpp"

namespace dpor {

using Vec = std::vector<mpz_class>;  // per-segment residues mod q

constexpr size_t kFidBytes = 16;
constexpr size_t kDigestBytes = 32;

/// Extra segments appended to a payload vector when it is stored in the
/// coded buffers: [payload_0..payload_{m-1}, updtype, index+1].
constexpr size_t kMetaSegments = 2;

enum class UpdType : uint8_t { None = 0, Insert = 1, Delete = 2, Modify = 3 };

struct Address {
    enum class Structure : uint8_t { U = 0, H = 1, C = 2 };
    enum class Side : uint8_t { X = 0, Y = 1 };

    Structure structure = Structure::U;
    uint8_t level = 0;  // H only
    Side side = Side::X;  // H and C
    uint64_t slot = 0;

    static Address u(uint64_t slot) { return {Structure::U, 0, Side::X, slot}; }
    static Address h(uint8_t level, Side side, uint64_t slot) {
        return {Structure::H, level, side, slot};
    }
    static Address c(Side side, uint64_t slot) { return {Structure::C, 0, side, slot}; }

    bool operator==(const Address&) const = default;
    auto operator<=>(const Address&) const = default;

    void encode(Bytes& out) const {
        put_u8(out, static_cast<uint8_t>(structure));
        put_u8(out, structure == Structure::H ? level : 0xFF);
        put_u8(out, structure == Structure::U ? 0xFF : static_cast<uint8_t>(side));
        put_u64be(out, slot);
    }
    static Address decode(Cursor& c) {
        Address a;
        uint8_t s = c.u8();
        if (s > 2) throw DecodeError("bad address structure tag");
        a.structure = static_cast<Structure>(s);
        uint8_t lvl = c.u8();
        uint8_t side = c.u8();
        a.level = a.structure == Structure::H ? lvl : 0;
        if (a.structure != Structure::U) {
            if (side > 1) throw DecodeError("bad address side");
            a.side = static_cast<Side>(side);
        }
        a.slot = c.u64be();
        return a;
    }

    std::string str() const {
        std::ostringstream os;
        switch (structure) {
            case Structure::U: os << "U[" << slot << "]"; break;
            case Structure::H:
                os << "H" << int(level) << (side == Side::X ? ".X[" : ".Y[") << slot << "]";
                break;
            case Structure::C: os << (side == Side::X ? "C.X[" : "C.Y[") << slot << "]"; break;
        }
        return os.str();
    }
};

struct SystemParams {
    unsigned lambda = 0;    // security parameter, bits
    unsigned lambda_p = 0;  // |p| in bits
    unsigned lambda_q = 0;  // |q| in bits
    mpz_class p;
    mpz_class q;
    size_t m = 0;    // payload segments per block
    uint64_t n = 0;  // capacity in blocks, power of two
    mpz_class omega;              // order-2n element of Z_q*
    std::vector<mpz_class> gens;  // m + kMetaSegments generators of G_q
    Bytes fid;                    // 16-byte file identifier
    Bytes psk;                    // signature verification key
    std::string sig_scheme = "ed25519";

    unsigned segment_bits() const { return lambda_q - 1; }
    size_t block_bytes() const { return m * segment_bits() / 8; }
    unsigned levels() const {  // k = log2(n)
        unsigned k = 0;
        while ((uint64_t(1) << k) < n) ++k;
        return k;
    }
    size_t record_segments() const { return m + kMetaSegments; }
    /// Fixed serialized width of one segment.
    size_t segment_wire_bytes() const { return (lambda_q + 7) / 8; }
};

inline bool is_power_of_two(uint64_t v) { return v != 0 && (v & (v - 1)) == 0; }

/// Checks every algebraic invariant of a parameter set; throws on violation.
inline void validate_params(const SystemParams& P) {
    auto fail = [](const std::string& why) { throw std::invalid_argument("invalid params: " + why); };
    if (!is_power_of_two(P.n)) fail("n not a power of two");
    if (P.m < 1) fail("m < 1");
    if (!probably_prime(P.p)) fail("p not prime");
    if (!probably_prime(P.q)) fail("q not prime");
    if ((P.p - 1) % P.q != 0) fail("q does not divide p-1");
    mpz_class two_n = mpz_class(2) * mpz_class(static_cast<unsigned long>(P.n));
    if ((P.q - 1) % two_n != 0) fail("2n does not divide q-1");
    if (P.q <= mpz_class(static_cast<unsigned long>(P.n)) + kMetaSegments + 2)
        fail("q too small for record metadata");
    if (P.gens.size() != P.record_segments()) fail("generator count != m+2");
    for (const auto& g : P.gens) {
        if (g <= 1 || g >= P.p) fail("generator out of range");
        if (powmod(g, P.q, P.p) != 1) fail("generator order does not divide q");
    }
    // omega's order divides 2n (a power of two), so order == 2n iff omega^n != 1.
    if (P.omega <= 1 || P.omega >= P.q) fail("omega out of range");
    if (powmod(P.omega, two_n, P.q) != 1) fail("omega^(2n) != 1");
    if (powmod(P.omega, two_n / 2, P.q) == 1) fail("omega order below 2n");
}

// ---------------------------------------------------------------------------
// Blocks and records

/// Slices a byte string MSB-first into m segments of (lambda_q - 1) bits.
/// Input shorter than the block capacity is zero-padded on the right.
inline Vec segment_block(const SystemParams& P, const Bytes& data) {
    if (data.size() > P.block_bytes())
        throw std::length_error("data exceeds block capacity of " + std::to_string(P.block_bytes()) +
                                " bytes");
    const unsigned sb = P.segment_bits();
    Vec segs(P.m, mpz_class(0));
    size_t bit = 0;
    for (size_t i = 0; i < P.m; ++i) {
        mpz_class v = 0;
        for (unsigned j = 0; j < sb; ++j, ++bit) {
            v <<= 1;
            size_t byte = bit / 8;
            if (byte < data.size() && (data[byte] >> (7 - bit % 8) & 1)) v |= 1;
        }
        segs[i] = v;
    }
    return segs;
}

/// Inverse of segment_block; always returns the full padded width.
inline Bytes block_to_bytes(const SystemParams& P, const Vec& block) {
    if (block.size() < P.m) throw std::invalid_argument("short block");
    const unsigned sb = P.segment_bits();
    Bytes out(P.block_bytes(), 0);
    size_t bit = 0;
    for (size_t i = 0; i < P.m; ++i) {
        for (unsigned j = 0; j < sb; ++j, ++bit) {
            if (mpz_tstbit(block[i].get_mpz_t(), sb - 1 - j))
                out[bit / 8] |= uint8_t(1) << (7 - bit % 8);
        }
    }
    return out;
}

/// A write operation as issued by the data owner.
struct WriteRecord {
    UpdType type = UpdType::Modify;
    /// Logical position. For Insert this is "insert after index i", with
    /// i == -1 meaning prepend; for Delete/Modify the target index.
    int64_t logical_index = 0;
    Vec payload;  // m segments; all-zero for Delete

    /// Coded-buffer form: payload extended with [updtype, index+1].
    Vec to_vector(const SystemParams& P) const {
        Vec v = payload;
        if (v.size() != P.m) throw std::invalid_argument("record payload shape");
        v.emplace_back(static_cast<unsigned long>(type));
        v.emplace_back(static_cast<unsigned long>(logical_index + 1));
        return v;
    }

    static WriteRecord from_vector(const SystemParams& P, const Vec& v) {
        if (v.size() != P.record_segments()) throw std::invalid_argument("record vector shape");
        WriteRecord r;
        unsigned long t = mpz_get_ui(v[P.m].get_mpz_t());
        if (t < 1 || t > 3) throw DecodeError("bad record updtype marker");
        r.type = static_cast<UpdType>(t);
        r.logical_index = static_cast<int64_t>(mpz_get_ui(v[P.m + 1].get_mpz_t())) - 1;
        r.payload.assign(v.begin(), v.begin() + P.m);
        return r;
    }
};

/// Zero-extends an m-segment payload vector to coded-buffer shape.
inline Vec data_vector(const SystemParams& P, const Vec& payload) {
    Vec v = payload;
    if (v.size() != P.m) throw std::invalid_argument("payload shape");
    v.resize(P.record_segments(), mpz_class(0));
    return v;
}

inline Vec zero_vector(const SystemParams& P) { return Vec(P.record_segments(), mpz_class(0)); }

// ---------------------------------------------------------------------------
// Epoch arithmetic

/// Counter value at which level l was last filled: w with bits below l cleared.
/// Requires bit l of w set (level occupied).
inline uint64_t epoch_of_level(uint64_t w, unsigned l) {
    if (!(w >> l & 1)) throw std::domain_error("level " + std::to_string(l) + " is empty at w=" + std::to_string(w));
    return w >> l << l;
}

// ---------------------------------------------------------------------------
// Parameter file I/O: line-oriented key=value, big integers as lowercase hex.

inline std::string mpz_hex(const mpz_class& v) { return v.get_str(16); }
inline mpz_class hex_mpz(const std::string& s) { return mpz_class(s, 16); }

inline std::map<std::string, std::string> parse_kv(std::istream& in) {
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) throw DecodeError("bad key=value line: " + line);
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return kv;
}

inline const std::string& kv_get(const std::map<std::string, std::string>& kv, const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw DecodeError("missing key: " + key);
    return it->second;
}

inline void write_params(std::ostream& out, const SystemParams& P) {
    out << "lambda=" << P.lambda << "\n";
    out << "lambda_p=" << P.lambda_p << "\n";
    out << "lambda_q=" << P.lambda_q << "\n";
    out << "p=" << mpz_hex(P.p) << "\n";
    out << "q=" << mpz_hex(P.q) << "\n";
    out << "m=" << P.m << "\n";
    out << "n=" << P.n << "\n";
    out << "omega=" << mpz_hex(P.omega) << "\n";
    out << "fid=" << to_hex(P.fid) << "\n";
    out << "psk=" << to_hex(P.psk) << "\n";
    out << "sig_scheme=" << P.sig_scheme << "\n";
    out << "generators=";
    for (size_t i = 0; i < P.gens.size(); ++i) out << (i ? "," : "") << mpz_hex(P.gens[i]);
    out << "\n";
}

inline SystemParams read_params(std::istream& in) {
    auto kv = parse_kv(in);
    SystemParams P;
    P.lambda = std::stoul(kv_get(kv, "lambda"));
    P.lambda_p = std::stoul(kv_get(kv, "lambda_p"));
    P.lambda_q = std::stoul(kv_get(kv, "lambda_q"));
    P.p = hex_mpz(kv_get(kv, "p"));
    P.q = hex_mpz(kv_get(kv, "q"));
    P.m = std::stoul(kv_get(kv, "m"));
    P.n = std::stoull(kv_get(kv, "n"));
    P.omega = hex_mpz(kv_get(kv, "omega"));
    P.fid = from_hex(kv_get(kv, "fid"));
    P.psk = from_hex(kv_get(kv, "psk"));
    P.sig_scheme = kv_get(kv, "sig_scheme");
    std::stringstream gs(kv_get(kv, "generators"));
    std::string tok;
    while (std::getline(gs, tok, ',')) P.gens.push_back(hex_mpz(tok));
    return P;
}

struct Profile {
    unsigned lambda, lambda_p, lambda_q;
    size_t default_m;
};

/// Named parameter profiles selectable from config.
inline Profile named_profile(const std::string& name) {
    if (name == "toy") return {8, 64, 17, 2};
    if (name == "paper") return {128, 1024, 257, 128};
    throw std::invalid_argument("unknown profile: " + name);
}

}  // namespace dpor
