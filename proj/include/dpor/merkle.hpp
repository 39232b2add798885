#pragma once

#include <sodium.h>

#include <array>
#include <map>
#include <optional>

#include "dpor/bytes.hpp"
#include "dpor/sigtag.hpp"

namespace dpor {

using Digest = std::array<uint8_t, kDigestBytes>;

inline Digest zero_digest() { return Digest{}; }

inline Bytes digest_bytes(const Digest& d) { return Bytes(d.begin(), d.end()); }
inline Digest digest_from(const Bytes& b) {
    if (b.size() != kDigestBytes) throw DecodeError("bad digest length");
    Digest d;
    std::copy(b.begin(), b.end(), d.begin());
    return d;
}

/// Domain-separated SHA-256: leaves hash as 0x00 ‖ payload, internal nodes
/// as 0x01 ‖ left ‖ right. Odd nodes at a level promote unchanged.
inline Digest leaf_label(const Bytes& payload) {
    sodium_ready();
    Digest d;
    crypto_hash_sha256_state st;
    crypto_hash_sha256_init(&st);
    uint8_t tag = 0x00;
    crypto_hash_sha256_update(&st, &tag, 1);
    crypto_hash_sha256_update(&st, payload.data(), payload.size());
    crypto_hash_sha256_final(&st, d.data());
    return d;
}

inline Digest node_label(const Digest& left, const Digest& right) {
    sodium_ready();
    Digest d;
    crypto_hash_sha256_state st;
    crypto_hash_sha256_init(&st);
    uint8_t tag = 0x01;
    crypto_hash_sha256_update(&st, &tag, 1);
    crypto_hash_sha256_update(&st, left.data(), left.size());
    crypto_hash_sha256_update(&st, right.data(), right.size());
    crypto_hash_sha256_final(&st, d.data());
    return d;
}

struct MerkleProof {
    Bytes leaf;  // leaf payload
    struct PathEntry {
        bool sibling_on_left = false;
        Digest label{};
    };
    std::vector<PathEntry> path;  // bottom-up; promoted levels contribute no entry

    /// Wire form: leaf (length-prefixed) ‖ count byte ‖ (orientation ‖ label)*.
    void encode(Bytes& out) const {
        put_lp(out, leaf);
        if (path.size() > 0xFF) throw std::length_error("proof too deep");
        put_u8(out, static_cast<uint8_t>(path.size()));
        for (const auto& e : path) {
            put_u8(out, e.sibling_on_left ? 1 : 0);
            out.insert(out.end(), e.label.begin(), e.label.end());
        }
    }
    static MerkleProof decode(Cursor& c) {
        MerkleProof p;
        p.leaf = c.lp();
        uint8_t count = c.u8();
        p.path.resize(count);
        for (auto& e : p.path) {
            uint8_t o = c.u8();
            if (o > 1) throw DecodeError("bad proof orientation byte");
            e.sibling_on_left = o == 1;
            e.label = digest_from(c.take(kDigestBytes));
        }
        return p;
    }
};

namespace detail {
/// Successive level lengths of a tree with `count` leaves.
inline std::vector<uint64_t> level_lengths(uint64_t count) {
    std::vector<uint64_t> lens{count};
    while (lens.back() > 1) lens.push_back((lens.back() + 1) / 2);
    return lens;
}
}  // namespace detail

/// Index-addressable Merkle tree over opaque leaf payloads.
class MerkleTree {
public:
    MerkleTree() = default;

    static MerkleTree build(std::vector<Bytes> leaves) {
        if (leaves.empty()) throw std::invalid_argument("merkle build requires at least one leaf");
        MerkleTree t;
        t.leaves_ = std::move(leaves);
        t.rebuild();
        return t;
    }

    size_t leaf_count() const { return leaves_.size(); }
    const Bytes& leaf(size_t i) const { return leaves_.at(i); }

    Digest root() const {
        if (leaves_.empty()) return zero_digest();
        return levels_.back()[0];
    }

    MerkleProof prove(size_t i) const {
        if (i >= leaves_.size()) throw std::out_of_range("leaf index out of range");
        MerkleProof p;
        p.leaf = leaves_[i];
        uint64_t pos = i;
        for (size_t j = 0; j + 1 < levels_.size(); ++j) {
            uint64_t sib = pos ^ 1;
            if (sib < levels_[j].size())
                p.path.push_back({sib < pos, levels_[j][sib]});
            pos >>= 1;
        }
        return p;
    }

    void modify(size_t i, Bytes payload) {
        if (i >= leaves_.size()) throw std::out_of_range("leaf index out of range");
        leaves_[i] = std::move(payload);
        levels_[0][i] = leaf_label(leaves_[i]);
        uint64_t pos = i;
        for (size_t j = 0; j + 1 < levels_.size(); ++j) {
            uint64_t parent = pos >> 1;
            uint64_t l = parent << 1, r = l + 1;
            levels_[j + 1][parent] =
                r < levels_[j].size() ? node_label(levels_[j][l], levels_[j][r]) : levels_[j][l];
            pos = parent;
        }
    }

    void append(Bytes payload) {
        leaves_.push_back(std::move(payload));
        rebuild();
    }

    /// Swap-and-truncate removal: leaf i takes the last payload, tree shrinks.
    void remove(size_t i) {
        if (i >= leaves_.size()) throw std::out_of_range("leaf index out of range");
        leaves_[i] = std::move(leaves_.back());
        leaves_.pop_back();
        rebuild();
    }

private:
    void rebuild() {
        levels_.clear();
        if (leaves_.empty()) return;
        std::vector<Digest> cur(leaves_.size());
        for (size_t i = 0; i < leaves_.size(); ++i) cur[i] = leaf_label(leaves_[i]);
        levels_.push_back(cur);
        while (levels_.back().size() > 1) {
            const auto& below = levels_.back();
            std::vector<Digest> up((below.size() + 1) / 2);
            for (size_t i = 0; i < up.size(); ++i) {
                size_t l = 2 * i, r = l + 1;
                up[i] = r < below.size() ? node_label(below[l], below[r]) : below[l];
            }
            levels_.push_back(std::move(up));
        }
    }

    std::vector<Bytes> leaves_;
    std::vector<std::vector<Digest>> levels_;  // levels_[0] = leaf labels
};

/// Accept iff recomputing leaf i's path over a `leaf_count`-leaf tree yields
/// `root`. The caller supplies the tree size; the promotion pattern (and so
/// the index binding) depends on it.
inline bool verify(const Digest& root, uint64_t i, uint64_t leaf_count, const MerkleProof& proof) {
    if (i >= leaf_count || leaf_count == 0) return false;
    Digest cur = leaf_label(proof.leaf);
    auto lens = detail::level_lengths(leaf_count);
    size_t used = 0;
    uint64_t pos = i;
    for (size_t j = 0; j + 1 < lens.size(); ++j) {
        uint64_t sib = pos ^ 1;
        if (sib < lens[j]) {
            if (used >= proof.path.size()) return false;
            const auto& e = proof.path[used++];
            if (e.sibling_on_left != (sib < pos)) return false;
            cur = e.sibling_on_left ? node_label(e.label, cur) : node_label(cur, e.label);
        }
        pos >>= 1;
    }
    return used == proof.path.size() && cur == root;
}

// ---------------------------------------------------------------------------
// Client-side root prediction without tree access.

namespace detail {

using LabelMap = std::map<std::pair<size_t, uint64_t>, Digest>;

/// Folds a proof, recording every label it pins: the leaf, the siblings, and
/// the computed path nodes. Returns false if the fold disagrees with `root`.
inline bool harvest(const Digest& root, uint64_t i, uint64_t leaf_count, const MerkleProof& proof,
                    LabelMap& known) {
    if (!verify(root, i, leaf_count, proof)) return false;
    auto lens = level_lengths(leaf_count);
    Digest cur = leaf_label(proof.leaf);
    known[{0, i}] = cur;
    size_t used = 0;
    uint64_t pos = i;
    for (size_t j = 0; j + 1 < lens.size(); ++j) {
        uint64_t sib = pos ^ 1;
        if (sib < lens[j]) {
            const auto& e = proof.path[used++];
            known[{j, sib}] = e.label;
            cur = e.sibling_on_left ? node_label(e.label, cur) : node_label(cur, e.label);
        }
        pos >>= 1;
        known[{j + 1, pos}] = cur;
    }
    return true;
}

/// Root of the tree with `new_count` leaves obtained from an old tree of
/// `old_count` leaves by rewriting the level-0 labels in `changed`, given the
/// old labels pinned in `known`. Throws if a needed label is missing.
inline Digest fold_prediction(uint64_t old_count, uint64_t new_count, LabelMap known,
                              std::map<uint64_t, Digest> changed) {
    if (new_count == 0) return zero_digest();
    auto old_lens = level_lengths(old_count);
    auto new_lens = level_lengths(new_count);
    auto label_of = [&](size_t level, uint64_t pos, const std::map<uint64_t, Digest>& chg) {
        if (auto it = chg.find(pos); it != chg.end()) return it->second;
        auto it = known.find({level, pos});
        if (it == known.end())
            throw std::logic_error("root prediction needs a label the proofs did not pin");
        return it->second;
    };
    for (size_t j = 0; j + 1 < new_lens.size(); ++j) {
        std::map<uint64_t, Digest> up;
        std::vector<uint64_t> parents;
        for (const auto& [pos, lab] : changed) {
            (void)lab;
            if (parents.empty() || parents.back() != pos >> 1) parents.push_back(pos >> 1);
        }
        // The last node of the next level needs a recompute when the size
        // change alters its child set (a sibling appearing or vanishing, or
        // the node being new); untouched-subtree nodes must not be, since the
        // proofs pin them only as whole labels.
        uint64_t old_len = j < old_lens.size() ? old_lens[j] : 0;
        uint64_t old_len_up = j + 1 < old_lens.size() ? old_lens[j + 1] : 0;
        uint64_t tail = (new_lens[j] - 1) >> 1;
        bool tail_new = tail >= old_len_up;
        bool sibling_shape_changed =
            (2 * tail + 1 < old_len) != (2 * tail + 1 < new_lens[j]);
        if ((tail_new || sibling_shape_changed) &&
            (parents.empty() || parents.back() != tail))
            parents.push_back(tail);
        for (uint64_t p : parents) {
            if (p >= new_lens[j + 1]) continue;
            uint64_t l = p << 1, r = l + 1;
            Digest lab = label_of(j, l, changed);
            if (r < new_lens[j]) lab = node_label(lab, label_of(j, r, changed));
            up[p] = lab;
        }
        changed = std::move(up);
    }
    if (auto it = changed.find(0); it != changed.end()) return it->second;
    auto it = known.find({new_lens.size() - 1, 0});
    if (it == known.end()) throw std::logic_error("root prediction found no root label");
    return it->second;
}

}  // namespace detail

struct ProofRejected : std::runtime_error {
    ProofRejected() : std::runtime_error("merkle proof does not verify against the current root") {}
};

/// Root after modify(i, payload), from leaf i's proof alone.
inline Digest predict_modify(const Digest& root, uint64_t leaf_count, uint64_t i,
                             const MerkleProof& proof, const Bytes& payload) {
    detail::LabelMap known;
    if (!detail::harvest(root, i, leaf_count, proof, known)) throw ProofRejected();
    return detail::fold_prediction(leaf_count, leaf_count, std::move(known),
                                   {{i, leaf_label(payload)}});
}

/// Root after append(payload); `last_proof` is for leaf leaf_count-1 and may
/// be omitted only for the empty tree.
inline Digest predict_append(const Digest& root, uint64_t leaf_count,
                             const std::optional<MerkleProof>& last_proof, const Bytes& payload) {
    detail::LabelMap known;
    if (leaf_count == 0) return leaf_label(payload);
    if (!last_proof || !detail::harvest(root, leaf_count - 1, leaf_count, *last_proof, known))
        throw ProofRejected();
    return detail::fold_prediction(leaf_count, leaf_count + 1, std::move(known),
                                   {{leaf_count, leaf_label(payload)}});
}

/// Root after remove(i) (swap with last, truncate), from proofs of the target
/// and of the last leaf. The two coincide when i == leaf_count-1. The slot the
/// last leaf moves into may take a replacement payload (a re-signed tag).
inline Digest predict_remove(const Digest& root, uint64_t leaf_count, uint64_t i,
                             const MerkleProof& target_proof, const MerkleProof& last_proof,
                             const std::optional<Bytes>& moved_payload = std::nullopt) {
    detail::LabelMap known;
    if (!detail::harvest(root, i, leaf_count, target_proof, known)) throw ProofRejected();
    if (!detail::harvest(root, leaf_count - 1, leaf_count, last_proof, known)) throw ProofRejected();
    std::map<uint64_t, Digest> changed;
    if (i != leaf_count - 1)
        changed[i] = leaf_label(moved_payload ? *moved_payload : last_proof.leaf);
    return detail::fold_prediction(leaf_count, leaf_count - 1, std::move(known), changed);
}

}  // namespace dpor
