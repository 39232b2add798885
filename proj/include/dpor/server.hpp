#pragma once

#include <algorithm>
#include <cmath>
#include <set>

#include "dpor/wire.hpp"

namespace dpor {

/// Misbehavior injected for the security-game tests. Fixed per session:
/// set once, then audited/extracted against.
struct AdversaryMode {
    enum class Kind { Honest, Delete, Stale, BitFlip };
    static constexpr int kLevelC = -1;    // delete targets C
    static constexpr int kLevelAll = -2;  // delete targets every level and C

    Kind kind = Kind::Honest;
    int level = 0;          // Delete
    double fraction = 0.0;  // Delete
    Address addr;           // Stale / BitFlip
    size_t segment = 0;     // BitFlip

    static AdversaryMode parse(const std::string& spec);
    std::string str() const;
};

/// The storage party. Holds U, H, C and the tag mirrors, executes block-side
/// rebuilds itself, and answers read / write / tag / audit requests. Never
/// sees signing keys or hash trapdoors. Value-copyable: a copy is the fixed
/// snapshot the extractor interrogates.
class PorServer {
public:
    PorServer() = default;
    explicit PorServer(uint64_t attack_seed) : rng_seed_(attack_seed) {}

    bool initialized() const { return initialized_; }
    const SystemParams& params() const { return P_; }
    uint64_t write_counter() const { return W_; }
    Digest merkle_root() const { return merkle_.root(); }
    size_t u_size() const { return u_.size(); }

    // --- protocol handlers -------------------------------------------------

    void handle_init(const InitPayload& init, const SystemParams& P) {
        if (init.u.size() > P.n) throw RemoteError(3, "file exceeds capacity");
        if (init.c_blocks.X.size() != P.n || init.c_blocks.Y.size() != P.n ||
            init.c_tags.X.size() != P.n || init.c_tags.Y.size() != P.n)
            throw RemoteError(3, "C upload must cover all n slots per side");
        P_ = P;
        params_text_ = init.params_text;
        u_ = init.u;
        position_map_.resize(u_.size());
        for (size_t i = 0; i < u_.size(); ++i) position_map_[i] = i;
        std::vector<Bytes> leaves;
        leaves.reserve(u_.size());
        for (const auto& [b, t] : u_) leaves.push_back(t.bytes());
        merkle_ = leaves.empty() ? MerkleTree() : MerkleTree::build(std::move(leaves));
        h_.assign(P_.levels() + 1, {});
        htags_.assign(P_.levels() + 1, {});
        c_ = init.c_blocks;
        ctags_ = init.c_tags;
        W_ = 0;
        statement_ = init.statement;
        pending_record_.reset();
        pending_tag_slots_.clear();
        pending_ctag_ = false;
        mode_ = AdversaryMode{};
        stale_.clear();
        initialized_ = true;
    }

    ReadProof handle_read(uint64_t slot) const {
        require_init();
        if (slot >= u_.size()) throw RemoteError(3, "read slot out of range");
        ReadProof r;
        if (auto st = stale_lookup(Address::u(slot))) {
            r.block.assign(st->first.begin(), st->first.begin() + P_.m);
            r.tag = st->second;
        } else {
            r.block = u_[slot].first;
            r.tag = u_[slot].second;
        }
        r.proof = merkle_.prove(slot);
        return r;
    }

    MerkleProof handle_proof(uint64_t slot) const {
        require_init();
        if (slot >= u_.size()) throw RemoteError(3, "proof slot out of range");
        return merkle_.prove(slot);
    }

    /// Applies the U/Merkle mutation and returns digMHT_server.
    Digest handle_write_u(const WriteUOp& op) {
        require_init();
        if (pending_record_) throw RemoteError(3, "previous write has no rebuild yet");
        switch (op.type) {
            case UpdType::Insert: {
                if (!op.block || !op.tag) throw RemoteError(3, "insert needs block and tag");
                if (u_.size() >= P_.n) throw RemoteError(3, "capacity exhausted");
                if (op.logical_index + 1 < 0 ||
                    static_cast<uint64_t>(op.logical_index + 1) > position_map_.size())
                    throw RemoteError(3, "insert position out of range");
                u_.emplace_back(*op.block, *op.tag);
                merkle_.append(op.tag->bytes());
                position_map_.insert(position_map_.begin() + (op.logical_index + 1), u_.size() - 1);
                break;
            }
            case UpdType::Modify: {
                if (!op.block || !op.tag) throw RemoteError(3, "modify needs block and tag");
                if (op.slot >= u_.size()) throw RemoteError(3, "modify slot out of range");
                u_[op.slot] = {*op.block, *op.tag};
                merkle_.modify(op.slot, op.tag->bytes());
                break;
            }
            case UpdType::Delete: {
                if (op.slot >= u_.size()) throw RemoteError(3, "delete slot out of range");
                uint64_t last = u_.size() - 1;
                if (op.slot != last) {
                    if (!op.tag) throw RemoteError(3, "delete needs the moved block's new tag");
                    u_[op.slot] = {u_[last].first, *op.tag};
                }
                u_.pop_back();
                merkle_.remove(op.slot);
                // the moved block is re-signed for its new address
                if (op.slot != u_.size()) merkle_.modify(op.slot, op.tag->bytes());
                std::erase(position_map_, op.slot);
                for (auto& p : position_map_)
                    if (p == last) p = op.slot;
                break;
            }
            default:
                throw RemoteError(3, "bad write type");
        }
        pending_record_ = WriteRecord{op.type, op.logical_index,
                                      op.type == UpdType::Delete ? Vec(P_.m, mpz_class(0))
                                                                 : *op.block};
        return merkle_.root();
    }

    /// Block-side rebuild for write w: cascades the pending record into
    /// target_level(w). The period's last write rebuilds C from U instead
    /// (the transient top level would be discarded immediately) and empties H.
    RebuildTranscript handle_block_rebuild(uint64_t w) {
        require_init();
        if (w != W_ % P_.n) throw RemoteError(3, "rebuild counter mismatch");
        if (!pending_record_) throw RemoteError(3, "no pending write to rebuild");
        RebuildTranscript tr;
        tr.w = w;
        VectorOps ops{&P_};
        if (w == P_.n - 1) {
            c_ = encode_full(P_, ops, logical_inputs());
            for (auto& lvl : h_) lvl.clear();
            for (auto& lvl : htags_) lvl.clear();
            tr.filled_level = 0xFF;
            tr.c_rebuilt = true;
            pending_tag_slots_ = c_addresses();
            pending_ctag_ = true;
        } else {
            unsigned l = hierlog_insert(P_, ops, h_, w, pending_record_->to_vector(P_));
            for (unsigned i = 0; i < l; ++i) htags_[i].clear();
            tr.filled_level = static_cast<uint8_t>(l);
            tr.c_rebuilt = false;
            pending_tag_slots_ = level_addresses(l);
            pending_ctag_ = false;
        }
        pending_record_.reset();
        ++W_;
        return tr;
    }

    std::vector<AuthTag> serve_tags(const std::vector<Address>& addrs) const {
        require_init();
        std::vector<AuthTag> out;
        out.reserve(addrs.size());
        for (const auto& a : addrs) {
            if (auto st = stale_lookup(a))
                out.push_back(st->second);
            else
                out.push_back(tag_at(a));
        }
        return out;
    }

    void handle_store_tags(const StoreTags& incoming) {
        require_init();
        if (incoming.items.size() != pending_tag_slots_.size())
            throw RemoteError(3, "tag store count does not match pending rebuild");
        for (size_t i = 0; i < incoming.items.size(); ++i)
            if (incoming.items[i].first != pending_tag_slots_[i])
                throw RemoteError(3, "tag store address does not match pending rebuild: " +
                                         incoming.items[i].first.str());
        if (pending_ctag_) {
            ctags_.X.assign(P_.n, AuthTag{});
            ctags_.Y.assign(P_.n, AuthTag{});
        }
        for (const auto& [a, t] : incoming.items) {
            if (a.structure == Address::Structure::H) {
                auto& lvl = htags_[a.level];
                uint64_t half = uint64_t(1) << a.level;
                if (!lvl.occupied()) {
                    lvl.X.assign(half, AuthTag{});
                    lvl.Y.assign(half, AuthTag{});
                }
                (a.side == Address::Side::X ? lvl.X : lvl.Y)[a.slot] = t;
            } else {
                (a.side == Address::Side::X ? ctags_.X : ctags_.Y)[a.slot] = t;
            }
        }
        pending_tag_slots_.clear();
        pending_ctag_ = false;
    }

    AuditProof handle_audit(const Challenge& q) const {
        require_init();
        if (q.W != W_) throw RemoteError(3, "challenge counter does not match server state");
        AuditProof pr;
        pr.W = W_;
        if (q.entries.empty()) return pr;
        VectorOps ops{&P_};
        Vec acc = ops.zero();
        for (const auto& [nu, addr] : q.entries) {
            if (auto st = stale_lookup(addr)) {
                acc = ops.add(acc, ops.smul(nu, st->first));
                pr.tags.push_back(st->second);
            } else {
                acc = ops.add(acc, ops.smul(nu, vector_at(addr)));
                pr.tags.push_back(tag_at(addr));
            }
        }
        pr.bstar = std::move(acc);
        return pr;
    }

    void handle_statement_put(const CounterStatement& st) {
        require_init();
        if (!verify_statement(P_, st)) throw RemoteError(2, "counter statement signature invalid");
        if (st.W != W_) throw RemoteError(3, "counter statement W mismatch");
        statement_ = st;
    }

    const CounterStatement& handle_statement_get() const {
        require_init();
        return statement_;
    }

    /// Installs a misbehavior mode against the current state.
    void set_mode(const AdversaryMode& mode);
    const AdversaryMode& mode() const { return mode_; }

    /// Frame dispatcher shared by the loopback and TCP transports.
    Frame handle_frame(const Frame& req);

    // --- inspection / persistence ------------------------------------------

    /// Structural parallelism plus (optionally) the tag/block coherence scan.
    void validate_store(bool check_hashes) const;

    const std::vector<std::pair<Vec, AuthTag>>& u_store() const { return u_; }
    const std::vector<LevelPair<Vec>>& h_store() const { return h_; }
    const LevelPair<Vec>& c_store() const { return c_; }
    const std::vector<LevelPair<AuthTag>>& htag_store() const { return htags_; }
    const LevelPair<AuthTag>& ctag_store() const { return ctags_; }
    const std::vector<uint64_t>& position_map() const { return position_map_; }

    void save(std::ostream& out) const;
    static PorServer load(std::istream& in);

private:
    void require_init() const {
        if (!initialized_) throw RemoteError(3, "server holds no file");
    }

    bool occupied(const Address& a) const {
        switch (a.structure) {
            case Address::Structure::U:
                return a.slot < u_.size();
            case Address::Structure::H: {
                if (a.level >= h_.size()) return false;
                const auto& lvl = h_[a.level];
                return lvl.occupied() &&
                       a.slot < (a.side == Address::Side::X ? lvl.X : lvl.Y).size();
            }
            case Address::Structure::C:
                return a.slot < (a.side == Address::Side::X ? c_.X : c_.Y).size();
        }
        return false;
    }

    /// Coded vector stored at an H or C address (record-shaped).
    const Vec& vector_at(const Address& a) const {
        if (a.structure == Address::Structure::U || !occupied(a))
            throw RemoteError(3, "unoccupied address " + a.str());
        if (a.structure == Address::Structure::H) {
            const auto& lvl = h_[a.level];
            return (a.side == Address::Side::X ? lvl.X : lvl.Y)[a.slot];
        }
        return (a.side == Address::Side::X ? c_.X : c_.Y)[a.slot];
    }

    const AuthTag& tag_at(const Address& a) const {
        if (!occupied(a)) throw RemoteError(3, "unoccupied address " + a.str());
        switch (a.structure) {
            case Address::Structure::U:
                return u_[a.slot].second;
            case Address::Structure::H: {
                const auto& lvl = htags_[a.level];
                if (!lvl.occupied()) throw RemoteError(3, "tag level empty at " + a.str());
                return (a.side == Address::Side::X ? lvl.X : lvl.Y)[a.slot];
            }
            default:
                return (a.side == Address::Side::X ? ctags_.X : ctags_.Y)[a.slot];
        }
    }

    std::optional<std::pair<Vec, AuthTag>> stale_lookup(const Address& a) const {
        if (mode_.kind != AdversaryMode::Kind::Stale) return std::nullopt;
        auto it = stale_.find(a);
        if (it == stale_.end()) return std::nullopt;
        return it->second;
    }

    /// U's blocks in logical order, record-shaped and padded to capacity.
    std::vector<Vec> logical_inputs() const {
        std::vector<Vec> in;
        in.reserve(P_.n);
        for (uint64_t phys : position_map_) in.push_back(data_vector(P_, u_[phys].first));
        while (in.size() < P_.n) in.push_back(zero_vector(P_));
        return in;
    }

    std::vector<Address> level_addresses(unsigned l) const {
        std::vector<Address> out;
        uint64_t half = uint64_t(1) << l;
        for (uint64_t s = 0; s < half; ++s) out.push_back(Address::h(l, Address::Side::X, s));
        for (uint64_t s = 0; s < half; ++s) out.push_back(Address::h(l, Address::Side::Y, s));
        return out;
    }
    std::vector<Address> c_addresses() const {
        std::vector<Address> out;
        for (uint64_t s = 0; s < P_.n; ++s) out.push_back(Address::c(Address::Side::X, s));
        for (uint64_t s = 0; s < P_.n; ++s) out.push_back(Address::c(Address::Side::Y, s));
        return out;
    }

    bool initialized_ = false;
    SystemParams P_;
    std::string params_text_;
    std::vector<std::pair<Vec, AuthTag>> u_;  // physical order
    MerkleTree merkle_;                       // over u_'s tag bytes
    std::vector<LevelPair<Vec>> h_;
    LevelPair<Vec> c_;
    std::vector<LevelPair<AuthTag>> htags_;
    LevelPair<AuthTag> ctags_;
    uint64_t W_ = 0;
    std::vector<uint64_t> position_map_;  // logical -> physical, mirrored from the client
    CounterStatement statement_;

    std::optional<WriteRecord> pending_record_;
    std::vector<Address> pending_tag_slots_;
    bool pending_ctag_ = false;

    AdversaryMode mode_;
    std::map<Address, std::pair<Vec, AuthTag>> stale_;  // retained superseded pairs
    uint64_t rng_seed_ = 0x5eed;
};

// ---------------------------------------------------------------------------

inline void PorServer::set_mode(const AdversaryMode& mode) {
    require_init();
    mode_ = mode;
    stale_.clear();
    switch (mode.kind) {
        case AdversaryMode::Kind::Honest:
            break;
        case AdversaryMode::Kind::Stale: {
            if (!occupied(mode.addr)) throw RemoteError(3, "stale address unoccupied");
            if (mode.addr.structure == Address::Structure::U)
                stale_[mode.addr] = {data_vector(P_, u_[mode.addr.slot].first),
                                     u_[mode.addr.slot].second};
            else
                stale_[mode.addr] = {vector_at(mode.addr), tag_at(mode.addr)};
            break;
        }
        case AdversaryMode::Kind::BitFlip: {
            if (!occupied(mode.addr)) throw RemoteError(3, "bitflip address unoccupied");
            if (mode.addr.structure == Address::Structure::U) {
                Vec& v = u_[mode.addr.slot].first;
                if (mode.segment >= v.size()) throw RemoteError(3, "bitflip segment out of range");
                v[mode.segment] = addmod(v[mode.segment], 1, P_.q);
            } else {
                Vec& v = const_cast<Vec&>(vector_at(mode.addr));
                if (mode.segment >= v.size()) throw RemoteError(3, "bitflip segment out of range");
                v[mode.segment] = addmod(v[mode.segment], 1, P_.q);
            }
            break;
        }
        case AdversaryMode::Kind::Delete: {
            Rng rng(rng_seed_ ^ W_);
            auto zap_structure = [&](LevelPair<Vec>& pair, Address::Structure s, unsigned level) {
                uint64_t half = pair.X.size();
                uint64_t slots = 2 * half;
                uint64_t kill = static_cast<uint64_t>(std::ceil(mode.fraction * double(slots)));
                std::vector<uint64_t> idx(slots);
                for (uint64_t i = 0; i < slots; ++i) idx[i] = i;
                for (uint64_t i = 0; i < kill; ++i) {
                    uint64_t j = i + rng.index(slots - i);
                    std::swap(idx[i], idx[j]);
                    Vec& v = (idx[i] < half ? pair.X : pair.Y)[idx[i] % half];
                    std::fill(v.begin(), v.end(), mpz_class(0));
                    (void)s;
                    (void)level;
                }
            };
            for (unsigned l = 0; l <= P_.levels(); ++l) {
                if (!h_[l].occupied()) continue;
                if (mode.level == AdversaryMode::kLevelAll || mode.level == int(l))
                    zap_structure(h_[l], Address::Structure::H, l);
            }
            if (mode.level == AdversaryMode::kLevelAll || mode.level == AdversaryMode::kLevelC)
                zap_structure(c_, Address::Structure::C, 0);
            break;
        }
    }
}

inline void PorServer::validate_store(bool check_hashes) const {
    require_init();
    auto fail = [](const std::string& why) { throw std::logic_error("store invariant: " + why); };
    if (h_.size() != htags_.size()) fail("level counts differ");
    for (size_t l = 0; l < h_.size(); ++l) {
        if (h_[l].occupied() != htags_[l].occupied()) fail("occupancy mismatch at level " + std::to_string(l));
        if (!h_[l].occupied()) continue;
        uint64_t half = uint64_t(1) << l;
        if (h_[l].X.size() != half || h_[l].Y.size() != half) fail("level shape");
        if (htags_[l].X.size() != half || htags_[l].Y.size() != half) fail("tag level shape");
    }
    if (c_.X.size() != P_.n || c_.Y.size() != P_.n) fail("C shape");
    if (ctags_.X.size() != P_.n || ctags_.Y.size() != P_.n) fail("C tag shape");
    if (u_.size() != position_map_.size()) fail("position map size");
    if (!check_hashes) return;
    for (const auto& [b, t] : u_)
        if (!(hash_block(P_, b) == t.hash)) fail("U tag hash mismatch");
    for (size_t l = 0; l < h_.size(); ++l) {
        if (!h_[l].occupied()) continue;
        for (size_t i = 0; i < h_[l].X.size(); ++i) {
            if (!(hash_block(P_, h_[l].X[i]) == htags_[l].X[i].hash)) fail("H.X tag hash mismatch");
            if (!(hash_block(P_, h_[l].Y[i]) == htags_[l].Y[i].hash)) fail("H.Y tag hash mismatch");
        }
    }
    for (size_t i = 0; i < c_.X.size(); ++i) {
        if (!(hash_block(P_, c_.X[i]) == ctags_.X[i].hash)) fail("C.X tag hash mismatch");
        if (!(hash_block(P_, c_.Y[i]) == ctags_.Y[i].hash)) fail("C.Y tag hash mismatch");
    }
}

inline Frame PorServer::handle_frame(const Frame& req) {
    try {
        Cursor c(req.payload);
        switch (req.type) {
            case FrameType::InitReq: {
                SystemParams P;
                InitPayload init = InitPayload::decode(c, P);
                c.expect_done();
                handle_init(init, P);
                return {FrameType::InitResp, digest_bytes(merkle_root())};
            }
            case FrameType::ReadReq: {
                uint64_t slot = c.u64be();
                c.expect_done();
                return {FrameType::ReadResp, handle_read(slot).encode(P_)};
            }
            case FrameType::ProofReq: {
                uint64_t slot = c.u64be();
                c.expect_done();
                Bytes out;
                handle_proof(slot).encode(out);
                return {FrameType::ProofResp, std::move(out)};
            }
            case FrameType::WriteUReq: {
                require_init();
                WriteUOp op = WriteUOp::decode(P_, c);
                c.expect_done();
                Digest d = handle_write_u(op);
                return {FrameType::WriteUResp, digest_bytes(d)};
            }
            case FrameType::RebuildReq: {
                uint64_t w = c.u64be();
                c.expect_done();
                return {FrameType::RebuildResp, handle_block_rebuild(w).encode()};
            }
            case FrameType::TagsReq: {
                TagRequest r = TagRequest::decode(c);
                c.expect_done();
                TagList resp{serve_tags(r.addrs)};
                return {FrameType::TagsResp, resp.encode()};
            }
            case FrameType::StoreTagsReq: {
                StoreTags st = StoreTags::decode(c);
                c.expect_done();
                handle_store_tags(st);
                return {FrameType::StoreTagsResp, {}};
            }
            case FrameType::AuditReq: {
                require_init();
                Challenge q = Challenge::decode(c);
                c.expect_done();
                return {FrameType::AuditResp, handle_audit(q).encode(P_)};
            }
            case FrameType::StmtPut: {
                CounterStatement st = CounterStatement::decode(c);
                c.expect_done();
                handle_statement_put(st);
                return {FrameType::StmtPutResp, {}};
            }
            case FrameType::StmtGet: {
                c.expect_done();
                Bytes out;
                handle_statement_get().encode(out);
                return {FrameType::StmtGetResp, std::move(out)};
            }
            case FrameType::AttackReq: {
                Bytes spec = c.lp();
                c.expect_done();
                set_mode(AdversaryMode::parse(std::string(spec.begin(), spec.end())));
                return {FrameType::AttackResp, {}};
            }
            default:
                return error_frame(3, "unknown frame type");
        }
    } catch (const RemoteError& e) {
        return error_frame(e.code, e.what());
    } catch (const DecodeError& e) {
        return error_frame(3, std::string("decode: ") + e.what());
    } catch (const std::exception& e) {
        return error_frame(3, e.what());
    }
}

// ---------------------------------------------------------------------------
// Adversary mode syntax: honest | delete:<level|C|all>:<fraction> |
// stale:<addr> | bitflip:<addr>:<segment>, addr = U:slot | H:l:X|Y:slot |
// C:X|Y:slot.

namespace detail {
inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, sep)) out.push_back(tok);
    return out;
}

inline Address parse_addr(const std::vector<std::string>& parts, size_t from, size_t count) {
    if (count < 2) throw std::invalid_argument("bad address");
    const std::string& s = parts[from];
    if (s == "U") {
        if (count != 2) throw std::invalid_argument("U address is U:slot");
        return Address::u(std::stoull(parts[from + 1]));
    }
    auto side = [](const std::string& t) {
        if (t == "X" || t == "x") return Address::Side::X;
        if (t == "Y" || t == "y") return Address::Side::Y;
        throw std::invalid_argument("side must be X or Y");
    };
    if (s == "H") {
        if (count != 4) throw std::invalid_argument("H address is H:level:side:slot");
        return Address::h(static_cast<uint8_t>(std::stoul(parts[from + 1])), side(parts[from + 2]),
                          std::stoull(parts[from + 3]));
    }
    if (s == "C") {
        if (count != 3) throw std::invalid_argument("C address is C:side:slot");
        return Address::c(side(parts[from + 1]), std::stoull(parts[from + 2]));
    }
    throw std::invalid_argument("address structure must be U, H or C");
}
}  // namespace detail

inline AdversaryMode AdversaryMode::parse(const std::string& spec) {
    auto parts = detail::split(spec, ':');
    if (parts.empty()) throw std::invalid_argument("empty adversary mode");
    AdversaryMode m;
    if (parts[0] == "honest") {
        m.kind = Kind::Honest;
    } else if (parts[0] == "delete") {
        if (parts.size() != 3) throw std::invalid_argument("delete mode is delete:<level|C|all>:<fraction>");
        m.kind = Kind::Delete;
        m.level = parts[1] == "C" ? kLevelC : parts[1] == "all" ? kLevelAll : std::stoi(parts[1]);
        m.fraction = std::stod(parts[2]);
        if (m.fraction < 0 || m.fraction > 1) throw std::invalid_argument("fraction must be in [0,1]");
    } else if (parts[0] == "stale") {
        m.kind = Kind::Stale;
        m.addr = detail::parse_addr(parts, 1, parts.size() - 1);
    } else if (parts[0] == "bitflip") {
        if (parts.size() < 4) throw std::invalid_argument("bitflip mode is bitflip:<addr>:<segment>");
        m.kind = Kind::BitFlip;
        m.addr = detail::parse_addr(parts, 1, parts.size() - 2);
        m.segment = std::stoull(parts.back());
    } else {
        throw std::invalid_argument("unknown adversary mode: " + parts[0]);
    }
    return m;
}

inline std::string AdversaryMode::str() const {
    std::ostringstream os;
    auto addr_str = [](const Address& a) {
        std::ostringstream s;
        switch (a.structure) {
            case Address::Structure::U: s << "U:" << a.slot; break;
            case Address::Structure::H:
                s << "H:" << int(a.level) << ':' << (a.side == Address::Side::X ? 'X' : 'Y') << ':'
                  << a.slot;
                break;
            case Address::Structure::C:
                s << "C:" << (a.side == Address::Side::X ? 'X' : 'Y') << ':' << a.slot;
                break;
        }
        return s.str();
    };
    switch (kind) {
        case Kind::Honest: os << "honest"; break;
        case Kind::Delete:
            os << "delete:"
               << (level == kLevelC ? std::string("C")
                                    : level == kLevelAll ? std::string("all") : std::to_string(level))
               << ':' << fraction;
            break;
        case Kind::Stale: os << "stale:" << addr_str(addr); break;
        case Kind::BitFlip: os << "bitflip:" << addr_str(addr) << ':' << segment; break;
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Snapshot persistence: one binary file, reusing the wire field encodings.

inline void PorServer::save(std::ostream& out) const {
    Bytes b;
    const char magic[] = "DPORSNAP1";
    b.insert(b.end(), magic, magic + sizeof magic - 1);
    put_u8(b, initialized_ ? 1 : 0);
    if (!initialized_) {
        out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
        return;
    }
    Bytes pt(params_text_.begin(), params_text_.end());
    put_u32be(b, static_cast<uint32_t>(pt.size()));
    put_bytes(b, pt);
    put_u64be(b, W_);
    put_u32be(b, static_cast<uint32_t>(u_.size()));
    for (const auto& [blk, tag] : u_) {
        put_vec(b, P_, blk);
        tag.encode(b);
    }
    put_u32be(b, static_cast<uint32_t>(position_map_.size()));
    for (uint64_t p : position_map_) put_u64be(b, p);
    for (size_t l = 0; l < h_.size(); ++l) {
        put_u8(b, h_[l].occupied() ? 1 : 0);
        if (!h_[l].occupied()) continue;
        for (const auto& v : h_[l].X) put_vec(b, P_, v);
        for (const auto& v : h_[l].Y) put_vec(b, P_, v);
        for (const auto& t : htags_[l].X) t.encode(b);
        for (const auto& t : htags_[l].Y) t.encode(b);
    }
    for (const auto& v : c_.X) put_vec(b, P_, v);
    for (const auto& v : c_.Y) put_vec(b, P_, v);
    for (const auto& t : ctags_.X) t.encode(b);
    for (const auto& t : ctags_.Y) t.encode(b);
    statement_.encode(b);
    std::string ms = mode_.str();
    put_lp(b, Bytes(ms.begin(), ms.end()));
    put_u32be(b, static_cast<uint32_t>(stale_.size()));
    for (const auto& [a, pair] : stale_) {
        a.encode(b);
        put_vec(b, P_, pair.first);
        pair.second.encode(b);
    }
    put_u64be(b, rng_seed_);
    out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

inline PorServer PorServer::load(std::istream& in) {
    Bytes all{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    Cursor c(all);
    Bytes magic = c.take(9);
    if (std::string(magic.begin(), magic.end()) != "DPORSNAP1")
        throw DecodeError("not a server snapshot file");
    PorServer srv;
    if (!c.u8()) return srv;
    uint32_t plen = c.u32be();
    Bytes pt = c.take(plen);
    srv.params_text_.assign(pt.begin(), pt.end());
    {
        std::istringstream ps(srv.params_text_);
        srv.P_ = read_params(ps);
        validate_params(srv.P_);
    }
    const SystemParams& P = srv.P_;
    srv.W_ = c.u64be();
    uint32_t ucount = c.u32be();
    for (uint32_t i = 0; i < ucount; ++i) {
        Vec blk = take_vec(P, c, P.m);
        srv.u_.emplace_back(std::move(blk), AuthTag::decode(c));
    }
    uint32_t pcount = c.u32be();
    srv.position_map_.resize(pcount);
    for (auto& p : srv.position_map_) p = c.u64be();
    srv.h_.assign(P.levels() + 1, {});
    srv.htags_.assign(P.levels() + 1, {});
    for (size_t l = 0; l <= P.levels(); ++l) {
        if (!c.u8()) continue;
        uint64_t half = uint64_t(1) << l;
        srv.h_[l].X.resize(half);
        srv.h_[l].Y.resize(half);
        srv.htags_[l].X.resize(half);
        srv.htags_[l].Y.resize(half);
        for (auto& v : srv.h_[l].X) v = take_vec(P, c, P.record_segments());
        for (auto& v : srv.h_[l].Y) v = take_vec(P, c, P.record_segments());
        for (auto& t : srv.htags_[l].X) t = AuthTag::decode(c);
        for (auto& t : srv.htags_[l].Y) t = AuthTag::decode(c);
    }
    srv.c_.X.resize(P.n);
    srv.c_.Y.resize(P.n);
    srv.ctags_.X.resize(P.n);
    srv.ctags_.Y.resize(P.n);
    for (auto& v : srv.c_.X) v = take_vec(P, c, P.record_segments());
    for (auto& v : srv.c_.Y) v = take_vec(P, c, P.record_segments());
    for (auto& t : srv.ctags_.X) t = AuthTag::decode(c);
    for (auto& t : srv.ctags_.Y) t = AuthTag::decode(c);
    srv.statement_ = CounterStatement::decode(c);
    Bytes ms = c.lp();
    srv.mode_ = AdversaryMode::parse(std::string(ms.begin(), ms.end()));
    uint32_t scount = c.u32be();
    for (uint32_t i = 0; i < scount; ++i) {
        Address a = Address::decode(c);
        Vec v = take_vec(P, c, P.record_segments());
        srv.stale_[a] = {std::move(v), AuthTag::decode(c)};
    }
    srv.rng_seed_ = c.u64be();
    c.expect_done();
    std::vector<Bytes> leaves;
    for (const auto& [blk, tag] : srv.u_) leaves.push_back(tag.bytes());
    srv.merkle_ = leaves.empty() ? MerkleTree() : MerkleTree::build(std::move(leaves));
    srv.initialized_ = true;
    return srv;
}

}  // namespace dpor
