#pragma once

#include "dpor/secret.hpp"
#include "dpor/wire.hpp"

namespace dpor {

/// Client-side verification failure: the server's response contradicts the
/// client's authenticated state. Maps to exit code 2.
struct AbortError : std::runtime_error {
    explicit AbortError(const std::string& why) : std::runtime_error("abort: " + why) {}
};

/// Everything the data owner persists between operations. No block data:
/// secrets, the Merkle root, the counter and the position map.
struct ClientState {
    SystemParams params;
    SecretState secret;
    Digest digmht{};
    uint64_t W = 0;

    struct MapEntry {
        uint64_t physical;  // U slot holding this logical block
        uint64_t epoch;     // counter value of its last write
    };
    std::vector<MapEntry> map;  // logical order

    uint64_t size() const { return map.size(); }
};

/// The data owner: init / read / write orchestration, Merkle root custody,
/// and the hash-space tag rebuilds that mirror the server's block rebuilds.
class PorClient {
public:
    PorClient(ClientState st, Endpoint& ep) : st_(std::move(st)), ep_(ep) {}

    const ClientState& state() const { return st_; }
    ClientState& state() { return st_; }

    /// Segments the file, tags every block at epoch 0, builds C and its tag
    /// mirror, and uploads the lot. Assigns a fresh fid.
    static PorClient init(SystemParams P, SecretState S, const Bytes& file, Endpoint& ep,
                          Rng& rng) {
        if (file.size() > P.block_bytes() * P.n) throw std::invalid_argument("file exceeds capacity");
        P.fid = rng.bytes(kFidBytes);

        ClientState st;
        st.params = P;
        st.secret = std::move(S);
        st.W = 0;

        MeterScope scope(ep.meter(), ByteMeter::Op::Init);
        InitPayload init;
        {
            std::ostringstream ps;
            write_params(ps, P);
            init.params_text = ps.str();
        }
        const size_t bb = P.block_bytes();
        const size_t count = bb ? (file.size() + bb - 1) / bb : 0;
        std::vector<Bytes> leaves;
        std::vector<HashValue> tag_hashes;
        for (size_t i = 0; i < count; ++i) {
            Bytes chunk(file.begin() + i * bb,
                        file.begin() + std::min(file.size(), (i + 1) * bb));
            Vec block = segment_block(P, chunk);
            AuthTag tag = make_tag(P, st.secret, block, Address::u(i), 0);
            leaves.push_back(tag.bytes());
            tag_hashes.push_back(tag.hash);
            init.u.emplace_back(std::move(block), std::move(tag));
            st.map.push_back({i, 0});
        }
        st.digmht = leaves.empty() ? zero_digest() : MerkleTree::build(leaves).root();

        // block-side C, computed here and uploaded (the server trusts only this
        // initial upload; later rebuilds it runs itself)
        {
            VectorOps ops{&P};
            std::vector<Vec> inputs;
            inputs.reserve(P.n);
            for (const auto& [b, t] : init.u) inputs.push_back(data_vector(P, b));
            while (inputs.size() < P.n) inputs.push_back(zero_vector(P));
            init.c_blocks = encode_full(P, ops, inputs);
        }
        // tag-side C via the hash-space cascade, signed at C addresses, epoch 0
        init.c_tags = sign_c_tags(P, st.secret, tag_hashes, 0);

        init.statement = make_statement(st);
        Bytes resp = ep.call(FrameType::InitReq, init.encode(P), FrameType::InitResp);
        if (digest_from(resp) != st.digmht)
            throw AbortError("server's initial root digest disagrees");
        return PorClient(std::move(st), ep);
    }

    /// Authenticated read of logical block i. Aborts unless the tag is fresh
    /// at this position's epoch, the block matches the tag's hash, and the
    /// membership proof matches the current root digest.
    Vec read(uint64_t i) {
        const SystemParams& P = st_.params;
        if (i >= st_.map.size()) throw std::out_of_range("logical index out of range");
        MeterScope scope(ep_.meter(), ByteMeter::Op::Read);
        auto [phys, epoch] = st_.map[i];
        Bytes req;
        put_u64be(req, phys);
        Bytes resp = ep_.call(FrameType::ReadReq, std::move(req), FrameType::ReadResp);
        Cursor c(resp);
        ReadProof r = ReadProof::decode(P, c);
        c.expect_done();
        if (!check_tag(P, r.tag, Address::u(phys), epoch))
            throw AbortError("tag rejected at the recorded epoch (stale or forged)");
        if (!(hash_block(P, r.block) == r.tag.hash)) throw AbortError("block hash mismatch");
        if (r.proof.leaf != r.tag.bytes() ||
            !verify(st_.digmht, phys, st_.map.size(), r.proof))
            throw AbortError("membership proof rejected");
        return r.block;
    }

    /// One full write: authenticated proof fetch, root prediction, the U
    /// write (aborting on digest mismatch), then the tag-side rebuild and a
    /// fresh signed counter statement.
    void write(const WriteRecord& op) {
        const SystemParams& P = st_.params;
        const uint64_t w = st_.W % P.n;
        const uint64_t new_epoch = st_.W + 1;
        const unsigned target = target_level(P, w);
        const bool period_end = w == P.n - 1;

        // H̃ sources must be fetched (and checked) before the server's rebuild
        // consumes the levels they live in.
        std::vector<LevelPair<HashValue>> source_hashes;
        if (!period_end && target > 0) source_hashes = fetch_level_hashes(target);

        ep_.meter().set_op(ByteMeter::Op::Write);
        WriteUOp wire_op;
        wire_op.type = op.type;
        wire_op.logical_index = op.logical_index;
        Digest predicted;
        ClientState::MapEntry new_entry{0, new_epoch};
        uint64_t erased_physical = 0;

        switch (op.type) {
            case UpdType::Modify: {
                if (op.logical_index < 0 || uint64_t(op.logical_index) >= st_.map.size())
                    throw std::out_of_range("modify index out of range");
                auto [phys, old_epoch] = st_.map[op.logical_index];
                (void)old_epoch;
                MerkleProof proof = fetch_proof(phys);
                AuthTag tag = make_tag(P, st_.secret, op.payload, Address::u(phys), new_epoch);
                predicted = predict_modify(st_.digmht, st_.map.size(), phys, proof, tag.bytes());
                wire_op.slot = phys;
                wire_op.block = op.payload;
                wire_op.tag = tag;
                new_entry.physical = phys;
                break;
            }
            case UpdType::Insert: {
                if (op.logical_index < -1 || op.logical_index + 1 > int64_t(st_.map.size()))
                    throw std::out_of_range("insert position out of range");
                if (st_.map.size() >= P.n) throw std::invalid_argument("capacity exhausted");
                uint64_t phys = st_.map.size();
                std::optional<MerkleProof> last;
                if (phys > 0) last = fetch_proof(phys - 1);
                AuthTag tag = make_tag(P, st_.secret, op.payload, Address::u(phys), new_epoch);
                predicted = predict_append(st_.digmht, st_.map.size(), last, tag.bytes());
                wire_op.block = op.payload;
                wire_op.tag = tag;
                new_entry.physical = phys;
                break;
            }
            case UpdType::Delete: {
                if (op.logical_index < 0 || uint64_t(op.logical_index) >= st_.map.size())
                    throw std::out_of_range("delete index out of range");
                uint64_t phys = st_.map[op.logical_index].physical;
                uint64_t last_phys = st_.map.size() - 1;
                MerkleProof target_proof = fetch_proof(phys);
                if (phys != last_phys) {
                    MerkleProof last_proof = fetch_proof(last_phys);
                    // the block moving into `phys` keeps its hash but needs a
                    // signature binding its new address
                    auto moved = logical_of_physical(last_phys);
                    AuthTag old_tag = decode_tag(last_proof.leaf);
                    if (!check_tag(P, old_tag, Address::u(last_phys), st_.map[moved].epoch))
                        throw AbortError("moved block's tag rejected at its recorded epoch");
                    AuthTag moved_tag =
                        sign_tag(P, st_.secret, old_tag.hash, Address::u(phys), new_epoch);
                    predicted = predict_remove(st_.digmht, st_.map.size(), phys, target_proof,
                                               last_proof, moved_tag.bytes());
                    wire_op.tag = moved_tag;
                } else {
                    predicted = predict_remove(st_.digmht, st_.map.size(), phys, target_proof,
                                               target_proof);
                }
                wire_op.slot = phys;
                erased_physical = phys;
                break;
            }
            default:
                throw std::invalid_argument("bad write type");
        }

        Bytes resp =
            ep_.call(FrameType::WriteUReq, wire_op.encode(P), FrameType::WriteUResp);
        Digest server_digest = digest_from(resp);
        if (server_digest != predicted)
            throw AbortError("server root digest does not match the predicted one");
        st_.digmht = predicted;

        // position map mirror
        switch (op.type) {
            case UpdType::Modify:
                st_.map[op.logical_index] = new_entry;
                break;
            case UpdType::Insert:
                st_.map.insert(st_.map.begin() + (op.logical_index + 1), new_entry);
                break;
            case UpdType::Delete: {
                uint64_t last_phys = st_.map.size() - 1;
                st_.map.erase(st_.map.begin() + op.logical_index);
                for (auto& e : st_.map)
                    if (e.physical == last_phys && last_phys != erased_physical)
                        e = {erased_physical, new_epoch};
                break;
            }
            default:
                break;
        }

        // server-side block rebuild
        Bytes rb_req;
        put_u64be(rb_req, w);
        Bytes rb = ep_.call(FrameType::RebuildReq, std::move(rb_req), FrameType::RebuildResp);
        Cursor rc(rb);
        RebuildTranscript tr = RebuildTranscript::decode(rc);
        rc.expect_done();
        if (tr.w != w || tr.c_rebuilt != period_end ||
            (!period_end && tr.filled_level != target))
            throw AbortError("rebuild transcript disagrees with the schedule");

        // tag-side rebuild in hash space
        {
            MeterScope scope(ep_.meter(), ByteMeter::Op::RebuildTags);
            if (period_end)
                rebuild_c_tags(new_epoch);
            else
                rebuild_level_tags(op, w, target, source_hashes, new_epoch);
        }

        st_.W = new_epoch;
        ep_.meter().set_op(ByteMeter::Op::Write);
        CounterStatement st = make_statement(st_);
        ep_.call(FrameType::StmtPut, [&] {
            Bytes b;
            st.encode(b);
            return b;
        }(), FrameType::StmtPutResp);
        ep_.meter().set_op(ByteMeter::Op::Other);
    }

    CounterStatement publish_counter() {
        CounterStatement st = make_statement(st_);
        ep_.call(FrameType::StmtPut, [&] {
            Bytes b;
            st.encode(b);
            return b;
        }(), FrameType::StmtPutResp);
        return st;
    }

    static CounterStatement make_statement(const ClientState& st) {
        CounterStatement s;
        s.fid = st.params.fid;
        s.W = st.W;
        s.size = st.map.size();
        s.digest = st.digmht;
        s.signature = signature_scheme(st.params.sig_scheme).sign(st.secret.ssk, s.message());
        return s;
    }

    // --- state file --------------------------------------------------------

    void save(std::ostream& out) const {
        out << "# WARNING: plaintext client state including secret key material.\n";
        std::ostringstream ps;
        write_params(ps, st_.params);
        std::string pt = ps.str();
        out << "params_hex=" << to_hex(Bytes(pt.begin(), pt.end())) << "\n";
        std::ostringstream ss;
        write_secret(ss, st_.secret);
        std::string sct = ss.str();
        out << "secret_hex=" << to_hex(Bytes(sct.begin(), sct.end())) << "\n";
        out << "digmht=" << to_hex(digest_bytes(st_.digmht)) << "\n";
        out << "W=" << st_.W << "\n";
        out << "map=";
        for (size_t i = 0; i < st_.map.size(); ++i)
            out << (i ? "," : "") << st_.map[i].physical << ':' << st_.map[i].epoch;
        out << "\n";
    }

    static ClientState load_state(std::istream& in) {
        auto kv = parse_kv(in);
        ClientState st;
        {
            Bytes pt = from_hex(kv_get(kv, "params_hex"));
            std::istringstream ps(std::string(pt.begin(), pt.end()));
            st.params = read_params(ps);
        }
        {
            Bytes sct = from_hex(kv_get(kv, "secret_hex"));
            std::istringstream ss(std::string(sct.begin(), sct.end()));
            st.secret = read_secret(ss);
        }
        st.digmht = digest_from(from_hex(kv_get(kv, "digmht")));
        st.W = std::stoull(kv_get(kv, "W"));
        const std::string& m = kv_get(kv, "map");
        std::stringstream ms(m);
        std::string tok;
        while (std::getline(ms, tok, ',')) {
            auto colon = tok.find(':');
            if (colon == std::string::npos) throw DecodeError("bad map entry");
            st.map.push_back(
                {std::stoull(tok.substr(0, colon)), std::stoull(tok.substr(colon + 1))});
        }
        return st;
    }

private:
    MerkleProof fetch_proof(uint64_t slot) {
        Bytes req;
        put_u64be(req, slot);
        Bytes resp = ep_.call(FrameType::ProofReq, std::move(req), FrameType::ProofResp);
        Cursor c(resp);
        MerkleProof p = MerkleProof::decode(c);
        c.expect_done();
        if (!verify(st_.digmht, slot, st_.map.size(), p))
            throw AbortError("membership proof rejected");
        return p;
    }

    uint64_t logical_of_physical(uint64_t phys) const {
        for (size_t i = 0; i < st_.map.size(); ++i)
            if (st_.map[i].physical == phys) return i;
        throw std::logic_error("position map has no entry for physical slot");
    }

    static AuthTag decode_tag(const Bytes& b) {
        Cursor c(b);
        AuthTag t = AuthTag::decode(c);
        c.expect_done();
        return t;
    }

    /// Downloads and verifies the tags of H levels 0..target-1, returning
    /// their hash values arranged for the cascade.
    std::vector<LevelPair<HashValue>> fetch_level_hashes(unsigned target) {
        const SystemParams& P = st_.params;
        MeterScope scope(ep_.meter(), ByteMeter::Op::RebuildTags);
        TagRequest req;
        for (unsigned l = 0; l < target; ++l) {
            uint64_t half = uint64_t(1) << l;
            for (uint64_t s = 0; s < half; ++s) req.addrs.push_back(Address::h(l, Address::Side::X, s));
            for (uint64_t s = 0; s < half; ++s) req.addrs.push_back(Address::h(l, Address::Side::Y, s));
        }
        Bytes resp = ep_.call(FrameType::TagsReq, req.encode(), FrameType::TagsResp);
        Cursor c(resp);
        TagList tags = TagList::decode(c);
        c.expect_done();
        if (tags.tags.size() != req.addrs.size()) throw AbortError("tag list count mismatch");
        std::vector<LevelPair<HashValue>> out(target);
        size_t at = 0;
        for (unsigned l = 0; l < target; ++l) {
            uint64_t half = uint64_t(1) << l;
            out[l].X.resize(half);
            out[l].Y.resize(half);
            for (uint64_t s = 0; s < 2 * half; ++s, ++at) {
                const Address& a = req.addrs[at];
                uint64_t epoch = slot_epoch(P, a, st_.W);
                if (!check_tag(P, tags.tags[at], a, epoch))
                    throw AbortError("source tag rejected at " + a.str());
                (s < half ? out[l].X : out[l].Y)[s % half] = tags.tags[at].hash;
            }
        }
        return out;
    }

    /// Replays the level rebuild on hash values and uploads the re-signed
    /// level tags. No block ever travels here.
    void rebuild_level_tags(const WriteRecord& op, uint64_t w, unsigned target,
                            const std::vector<LevelPair<HashValue>>& sources, uint64_t new_epoch) {
        const SystemParams& P = st_.params;
        HashOps ops{&P};
        Vec record = op.to_vector(P);
        HashValue incoming = hash_block_secret(P, st_.secret, record);
        std::vector<const std::vector<HashValue>*> xs, ys;
        for (unsigned l = 0; l < target; ++l) {
            xs.push_back(&sources[l].X);
            ys.push_back(&sources[l].Y);
        }
        auto x_new = rebuild_side(P, ops, xs, incoming, target);
        auto y_new =
            rebuild_side(P, ops, ys, ops.smul(arrival_twist(P, w), incoming), target);
        StoreTags st;
        uint64_t half = uint64_t(1) << target;
        for (uint64_t s = 0; s < half; ++s) {
            Address a = Address::h(target, Address::Side::X, s);
            st.items.emplace_back(a, sign_tag(P, st_.secret, x_new[s], a, new_epoch));
        }
        for (uint64_t s = 0; s < half; ++s) {
            Address a = Address::h(target, Address::Side::Y, s);
            st.items.emplace_back(a, sign_tag(P, st_.secret, y_new[s], a, new_epoch));
        }
        ep_.call(FrameType::StoreTagsReq, st.encode(), FrameType::StoreTagsResp);
    }

    /// Every n-th write: sources the (verified) U tags in logical order, runs
    /// the full hash-space encode and uploads 2n fresh C tags.
    void rebuild_c_tags(uint64_t new_epoch) {
        const SystemParams& P = st_.params;
        TagRequest req;
        for (const auto& e : st_.map) req.addrs.push_back(Address::u(e.physical));
        Bytes resp = ep_.call(FrameType::TagsReq, req.encode(), FrameType::TagsResp);
        Cursor c(resp);
        TagList tags = TagList::decode(c);
        c.expect_done();
        if (tags.tags.size() != st_.map.size()) throw AbortError("U tag list count mismatch");
        std::vector<HashValue> hashes;
        hashes.reserve(P.n);
        for (size_t i = 0; i < st_.map.size(); ++i) {
            if (!check_tag(P, tags.tags[i], Address::u(st_.map[i].physical), st_.map[i].epoch))
                throw AbortError("U tag rejected at logical index " + std::to_string(i));
            hashes.push_back(tags.tags[i].hash);
        }
        StoreTags st;
        LevelPair<AuthTag> ct = sign_c_tags(P, st_.secret, hashes, new_epoch);
        for (uint64_t s = 0; s < P.n; ++s)
            st.items.emplace_back(Address::c(Address::Side::X, s), ct.X[s]);
        for (uint64_t s = 0; s < P.n; ++s)
            st.items.emplace_back(Address::c(Address::Side::Y, s), ct.Y[s]);
        ep_.call(FrameType::StoreTagsReq, st.encode(), FrameType::StoreTagsResp);
    }

    static LevelPair<AuthTag> sign_c_tags(const SystemParams& P, const SecretState& S,
                                          const std::vector<HashValue>& u_hashes, uint64_t epoch) {
        HashOps ops{&P};
        std::vector<HashValue> inputs = u_hashes;
        while (inputs.size() < P.n) inputs.push_back(identity_hash());
        LevelPair<HashValue> enc = encode_full(P, ops, inputs);
        LevelPair<AuthTag> out;
        out.X.reserve(P.n);
        out.Y.reserve(P.n);
        for (uint64_t s = 0; s < P.n; ++s)
            out.X.push_back(sign_tag(P, S, enc.X[s], Address::c(Address::Side::X, s), epoch));
        for (uint64_t s = 0; s < P.n; ++s)
            out.Y.push_back(sign_tag(P, S, enc.Y[s], Address::c(Address::Side::Y, s), epoch));
        return out;
    }

    ClientState st_;
    Endpoint& ep_;
};

}  // namespace dpor
