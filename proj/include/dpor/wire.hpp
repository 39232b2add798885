#pragma once

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstring>
#include <functional>
#include <optional>

#include "dpor/hierlog.hpp"

namespace dpor {

// ---------------------------------------------------------------------------
// Frame: type (1 byte) ‖ length (4 bytes BE) ‖ payload. Normative layout.

enum class FrameType : uint8_t {
    ReadReq = 0x01,
    ReadResp = 0x02,
    ProofReq = 0x03,
    ProofResp = 0x04,
    WriteUReq = 0x05,
    WriteUResp = 0x06,
    RebuildReq = 0x07,
    RebuildResp = 0x08,
    TagsReq = 0x09,
    TagsResp = 0x0A,
    StoreTagsReq = 0x0B,
    StoreTagsResp = 0x0C,
    AuditReq = 0x0D,
    AuditResp = 0x0E,
    StmtPut = 0x0F,
    StmtPutResp = 0x10,
    StmtGet = 0x11,
    StmtGetResp = 0x12,
    InitReq = 0x13,
    InitResp = 0x14,
    AttackReq = 0x15,
    AttackResp = 0x16,
    Error = 0x7F,
};

struct Frame {
    FrameType type;
    Bytes payload;
};

inline Bytes frame_bytes(const Frame& f) {
    Bytes out;
    put_u8(out, static_cast<uint8_t>(f.type));
    put_u32be(out, static_cast<uint32_t>(f.payload.size()));
    put_bytes(out, f.payload);
    return out;
}

inline size_t frame_size(const Frame& f) { return 5 + f.payload.size(); }

/// Protocol-level failure carried in an Error frame. Codes follow the CLI
/// exit convention: 2 = verification failure, 3 = protocol error.
struct RemoteError : std::runtime_error {
    int code;
    RemoteError(int code, const std::string& msg) : std::runtime_error(msg), code(code) {}
};

inline Frame error_frame(int code, const std::string& msg) {
    Bytes p;
    put_u8(p, static_cast<uint8_t>(code));
    put_lp(p, Bytes(msg.begin(), msg.end()));
    return {FrameType::Error, std::move(p)};
}

[[noreturn]] inline void throw_error_frame(const Frame& f) {
    Cursor c(f.payload);
    int code = c.u8();
    Bytes msg = c.lp();
    throw RemoteError(code, std::string(msg.begin(), msg.end()));
}

// ---------------------------------------------------------------------------
// Segment-vector fields: fixed-width big-endian segments, count from context.

inline void put_vec(Bytes& out, const SystemParams& P, const Vec& v) {
    const size_t width = P.segment_wire_bytes();
    for (const auto& s : v) put_bytes(out, mpz_to_fixed(s, width));
}

inline Vec take_vec(const SystemParams& P, Cursor& c, size_t count) {
    const size_t width = P.segment_wire_bytes();
    Vec v(count);
    for (auto& s : v) {
        s = bytes_to_mpz(c.take(width));
        if (s >= P.q) throw DecodeError("segment not reduced mod q");
    }
    return v;
}

// ---------------------------------------------------------------------------
// Protocol messages

struct ReadProof {
    Vec block;  // m segments
    AuthTag tag;
    MerkleProof proof;

    Bytes encode(const SystemParams& P) const {
        Bytes out;
        put_vec(out, P, block);
        tag.encode(out);
        proof.encode(out);
        return out;
    }
    static ReadProof decode(const SystemParams& P, Cursor& c) {
        ReadProof r;
        r.block = take_vec(P, c, P.m);
        r.tag = AuthTag::decode(c);
        r.proof = MerkleProof::decode(c);
        return r;
    }
};

/// A write as shipped to the server: the Merkle/U mutation plus fresh tags.
struct WriteUOp {
    UpdType type = UpdType::Modify;
    int64_t logical_index = 0;      // position-map coordinate of the op
    uint64_t slot = 0;              // physical target (modify/delete)
    std::optional<Vec> block;       // m segments (insert/modify)
    std::optional<AuthTag> tag;     // tag of the written / moved leaf

    Bytes encode(const SystemParams& P) const {
        Bytes out;
        put_u8(out, static_cast<uint8_t>(type));
        put_u64be(out, static_cast<uint64_t>(logical_index + 1));
        put_u64be(out, slot);
        put_u8(out, (block ? 1 : 0) | (tag ? 2 : 0));
        if (block) put_vec(out, P, *block);
        if (tag) tag->encode(out);
        return out;
    }
    static WriteUOp decode(const SystemParams& P, Cursor& c) {
        WriteUOp op;
        uint8_t t = c.u8();
        if (t < 1 || t > 3) throw DecodeError("bad write op type");
        op.type = static_cast<UpdType>(t);
        op.logical_index = static_cast<int64_t>(c.u64be()) - 1;
        op.slot = c.u64be();
        uint8_t flags = c.u8();
        if (flags & 1) op.block = take_vec(P, c, P.m);
        if (flags & 2) op.tag = AuthTag::decode(c);
        return op;
    }
};

/// What the server's block-side rebuild did; the client replays the same
/// cascade in hash space.
struct RebuildTranscript {
    uint64_t w = 0;
    uint8_t filled_level = 0;  // target level; 0xFF if skipped (period end)
    bool c_rebuilt = false;

    Bytes encode() const {
        Bytes out;
        put_u64be(out, w);
        put_u8(out, filled_level);
        put_u8(out, c_rebuilt ? 1 : 0);
        return out;
    }
    static RebuildTranscript decode(Cursor& c) {
        RebuildTranscript t;
        t.w = c.u64be();
        t.filled_level = c.u8();
        t.c_rebuilt = c.u8() != 0;
        return t;
    }
};

struct Challenge {
    uint64_t W = 0;  // from the verified counter statement
    std::vector<std::pair<mpz_class, Address>> entries;  // (nu, addr), nu in [1,q)

    Bytes encode() const {
        Bytes out;
        put_u64be(out, W);
        put_u32be(out, static_cast<uint32_t>(entries.size()));
        for (const auto& [nu, addr] : entries) {
            put_mpz_lp(out, nu);
            addr.encode(out);
        }
        return out;
    }
    static Challenge decode(Cursor& c) {
        Challenge q;
        q.W = c.u64be();
        uint32_t count = c.u32be();
        q.entries.reserve(count);
        for (uint32_t i = 0; i < count; ++i) {
            mpz_class nu = take_mpz_lp(c);
            q.entries.emplace_back(std::move(nu), Address::decode(c));
        }
        return q;
    }
};

struct AuditProof {
    Vec bstar;  // record_segments; empty for a vacuous audit
    std::vector<AuthTag> tags;
    uint64_t W = 0;

    Bytes encode(const SystemParams& P) const {
        Bytes out;
        put_u64be(out, W);
        put_u8(out, bstar.empty() ? 0 : 1);
        if (!bstar.empty()) put_vec(out, P, bstar);
        put_u32be(out, static_cast<uint32_t>(tags.size()));
        for (const auto& t : tags) t.encode(out);
        return out;
    }
    static AuditProof decode(const SystemParams& P, Cursor& c) {
        AuditProof pr;
        pr.W = c.u64be();
        if (c.u8()) pr.bstar = take_vec(P, c, P.record_segments());
        uint32_t count = c.u32be();
        pr.tags.reserve(count);
        for (uint32_t i = 0; i < count; ++i) pr.tags.push_back(AuthTag::decode(c));
        return pr;
    }
};

struct TagRequest {
    std::vector<Address> addrs;

    Bytes encode() const {
        Bytes out;
        put_u32be(out, static_cast<uint32_t>(addrs.size()));
        for (const auto& a : addrs) a.encode(out);
        return out;
    }
    static TagRequest decode(Cursor& c) {
        TagRequest r;
        uint32_t count = c.u32be();
        r.addrs.reserve(count);
        for (uint32_t i = 0; i < count; ++i) r.addrs.push_back(Address::decode(c));
        return r;
    }
};

struct TagList {
    std::vector<AuthTag> tags;

    Bytes encode() const {
        Bytes out;
        put_u32be(out, static_cast<uint32_t>(tags.size()));
        for (const auto& t : tags) t.encode(out);
        return out;
    }
    static TagList decode(Cursor& c) {
        TagList r;
        uint32_t count = c.u32be();
        r.tags.reserve(count);
        for (uint32_t i = 0; i < count; ++i) r.tags.push_back(AuthTag::decode(c));
        return r;
    }
};

struct StoreTags {
    std::vector<std::pair<Address, AuthTag>> items;

    Bytes encode() const {
        Bytes out;
        put_u32be(out, static_cast<uint32_t>(items.size()));
        for (const auto& [a, t] : items) {
            a.encode(out);
            t.encode(out);
        }
        return out;
    }
    static StoreTags decode(Cursor& c) {
        StoreTags r;
        uint32_t count = c.u32be();
        r.items.reserve(count);
        for (uint32_t i = 0; i < count; ++i) {
            Address a = Address::decode(c);
            r.items.emplace_back(a, AuthTag::decode(c));
        }
        return r;
    }
};

struct InitPayload {
    std::string params_text;  // public parameter file contents
    std::vector<std::pair<Vec, AuthTag>> u;  // logical order
    LevelPair<Vec> c_blocks;                 // record-shaped vectors, n per side
    LevelPair<AuthTag> c_tags;
    CounterStatement statement;

    Bytes encode(const SystemParams& P) const {
        Bytes out;
        put_u32be(out, static_cast<uint32_t>(params_text.size()));
        out.insert(out.end(), params_text.begin(), params_text.end());
        put_u32be(out, static_cast<uint32_t>(u.size()));
        for (const auto& [b, t] : u) {
            put_vec(out, P, b);
            t.encode(out);
        }
        put_u32be(out, static_cast<uint32_t>(c_blocks.X.size()));
        for (const auto& v : c_blocks.X) put_vec(out, P, v);
        for (const auto& v : c_blocks.Y) put_vec(out, P, v);
        for (const auto& t : c_tags.X) t.encode(out);
        for (const auto& t : c_tags.Y) t.encode(out);
        statement.encode(out);
        return out;
    }
    /// Self-describing decode: the leading parameter text supplies the field
    /// widths for everything after it.
    static InitPayload decode(Cursor& c, SystemParams& P_out) {
        InitPayload init;
        uint32_t plen = c.u32be();
        Bytes ptext = c.take(plen);
        init.params_text.assign(ptext.begin(), ptext.end());
        std::istringstream ps(init.params_text);
        SystemParams P = read_params(ps);
        validate_params(P);
        P_out = P;
        uint32_t ucount = c.u32be();
        for (uint32_t i = 0; i < ucount; ++i) {
            Vec b = take_vec(P, c, P.m);
            init.u.emplace_back(std::move(b), AuthTag::decode(c));
        }
        uint32_t half = c.u32be();
        init.c_blocks.X.resize(half);
        init.c_blocks.Y.resize(half);
        for (auto& v : init.c_blocks.X) v = take_vec(P, c, P.record_segments());
        for (auto& v : init.c_blocks.Y) v = take_vec(P, c, P.record_segments());
        init.c_tags.X.resize(half);
        init.c_tags.Y.resize(half);
        for (auto& t : init.c_tags.X) t = AuthTag::decode(c);
        for (auto& t : init.c_tags.Y) t = AuthTag::decode(c);
        init.statement = CounterStatement::decode(c);
        return init;
    }
};

// ---------------------------------------------------------------------------
// Byte accounting

/// Per-operation transfer counters. Also tracks whether any payload-class
/// frame (one carrying block data) moved during the operation.
class ByteMeter {
public:
    enum class Op { Read, Write, Audit, RebuildTags, Init, Other };

    struct Counters {
        uint64_t sent = 0, received = 0, payload_frames = 0;
        uint64_t total() const { return sent + received; }
    };

    void set_op(Op op) { current_ = op; }
    Op op() const { return current_; }

    void count_sent(const Frame& f) {
        counters_[current_].sent += frame_size(f);
        if (is_payload_class(f.type)) ++counters_[current_].payload_frames;
    }
    void count_received(const Frame& f) {
        counters_[current_].received += frame_size(f);
        if (is_payload_class(f.type)) ++counters_[current_].payload_frames;
    }

    const Counters& of(Op op) const { return counters_[op]; }
    void reset() { counters_.clear(); }

    uint64_t grand_total() const {
        uint64_t t = 0;
        for (const auto& [op, c] : counters_) t += c.total();
        return t;
    }

    /// Frames that carry block data (β-class traffic).
    static bool is_payload_class(FrameType t) {
        switch (t) {
            case FrameType::ReadResp:
            case FrameType::WriteUReq:
            case FrameType::AuditResp:
            case FrameType::InitReq:
                return true;
            default:
                return false;
        }
    }

private:
    Op current_ = Op::Other;
    mutable std::map<Op, Counters> counters_;
};

/// RAII op-label scope for the meter.
class MeterScope {
public:
    MeterScope(ByteMeter& m, ByteMeter::Op op) : m_(m), prev_(m.op()) { m_.set_op(op); }
    ~MeterScope() { m_.set_op(prev_); }

private:
    ByteMeter& m_;
    ByteMeter::Op prev_;
};

// ---------------------------------------------------------------------------
// Transports. Both move the identical frame bytes; the loopback one hands
// them to an in-process dispatcher, the TCP one to a socket.

using FrameHandler = std::function<Frame(const Frame&)>;

class Link {
public:
    virtual ~Link() = default;
    virtual Frame roundtrip(const Frame& req) = 0;

    /// Raw byte counters maintained by the transport itself, independent of
    /// any ByteMeter, for cross-checking.
    uint64_t raw_sent = 0, raw_received = 0;
};

class LoopbackLink final : public Link {
public:
    explicit LoopbackLink(FrameHandler handler) : handler_(std::move(handler)) {}

    Frame roundtrip(const Frame& req) override {
        Bytes wire = frame_bytes(req);
        raw_sent += wire.size();
        // re-decode so the dispatcher sees exactly what TCP would deliver
        Cursor c(wire);
        FrameType t = static_cast<FrameType>(c.u8());
        uint32_t len = c.u32be();
        Frame decoded{t, c.take(len)};
        c.expect_done();
        Frame resp = handler_(decoded);
        Bytes resp_wire = frame_bytes(resp);
        raw_received += resp_wire.size();
        return resp;
    }

private:
    FrameHandler handler_;
};

namespace detail {
inline void write_all(int fd, const uint8_t* data, size_t len) {
    while (len) {
        ssize_t k = ::write(fd, data, len);
        if (k <= 0) throw std::runtime_error("socket write failed");
        data += k;
        len -= static_cast<size_t>(k);
    }
}
inline bool read_all(int fd, uint8_t* data, size_t len) {
    while (len) {
        ssize_t k = ::read(fd, data, len);
        if (k == 0) return false;
        if (k < 0) throw std::runtime_error("socket read failed");
        data += k;
        len -= static_cast<size_t>(k);
    }
    return true;
}
}  // namespace detail

class TcpLink final : public Link {
public:
    TcpLink(const std::string& host, uint16_t port) {
        fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
        if (fd_ < 0) throw std::runtime_error("socket() failed");
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_port = htons(port);
        if (inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1)
            throw std::runtime_error("bad host address: " + host);
        if (::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0)
            throw std::runtime_error("connect to " + host + ":" + std::to_string(port) + " failed");
    }
    ~TcpLink() override {
        if (fd_ >= 0) ::close(fd_);
    }
    TcpLink(const TcpLink&) = delete;
    TcpLink& operator=(const TcpLink&) = delete;

    Frame roundtrip(const Frame& req) override {
        Bytes wire = frame_bytes(req);
        detail::write_all(fd_, wire.data(), wire.size());
        raw_sent += wire.size();
        uint8_t hdr[5];
        if (!detail::read_all(fd_, hdr, 5)) throw std::runtime_error("server closed connection");
        uint32_t len = uint32_t(hdr[1]) << 24 | uint32_t(hdr[2]) << 16 | uint32_t(hdr[3]) << 8 | hdr[4];
        Frame resp{static_cast<FrameType>(hdr[0]), Bytes(len)};
        if (len && !detail::read_all(fd_, resp.payload.data(), len))
            throw std::runtime_error("truncated response frame");
        raw_received += 5 + len;
        return resp;
    }

private:
    int fd_ = -1;
};

/// Single-connection, strictly alternating request/response server loop.
/// Returns when `stop` (checked between connections) is true or, with
/// max_connections > 0, after that many connections.
inline void serve_tcp(uint16_t port, const FrameHandler& handler,
                      const std::function<bool()>& stop = {}, int max_connections = 0) {
    int lfd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (lfd < 0) throw std::runtime_error("socket() failed");
    int one = 1;
    ::setsockopt(lfd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    if (::bind(lfd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
        ::close(lfd);
        throw std::runtime_error("bind to port " + std::to_string(port) + " failed");
    }
    if (::listen(lfd, 4) != 0) {
        ::close(lfd);
        throw std::runtime_error("listen failed");
    }
    int served = 0;
    while (!(stop && stop()) && (max_connections == 0 || served < max_connections)) {
        int cfd = ::accept(lfd, nullptr, nullptr);
        if (cfd < 0) break;
        ++served;
        for (;;) {
            uint8_t hdr[5];
            if (!detail::read_all(cfd, hdr, 5)) break;
            uint32_t len =
                uint32_t(hdr[1]) << 24 | uint32_t(hdr[2]) << 16 | uint32_t(hdr[3]) << 8 | hdr[4];
            Frame req{static_cast<FrameType>(hdr[0]), Bytes(len)};
            if (len && !detail::read_all(cfd, req.payload.data(), len)) break;
            Frame resp = handler(req);
            Bytes wire = frame_bytes(resp);
            detail::write_all(cfd, wire.data(), wire.size());
        }
        ::close(cfd);
    }
    ::close(lfd);
}

/// Client-side frame endpoint: encodes, meters, raises Error frames.
class Endpoint {
public:
    Endpoint(Link& link, ByteMeter& meter) : link_(link), meter_(meter) {}

    Bytes call(FrameType type, Bytes payload, FrameType expect) {
        Frame req{type, std::move(payload)};
        meter_.count_sent(req);
        Frame resp = link_.roundtrip(req);
        meter_.count_received(resp);
        if (resp.type == FrameType::Error) throw_error_frame(resp);
        if (resp.type != expect) throw RemoteError(3, "unexpected response frame type");
        return std::move(resp.payload);
    }

    ByteMeter& meter() { return meter_; }
    Link& link() { return link_; }

private:
    Link& link_;
    ByteMeter& meter_;
};

}  // namespace dpor
