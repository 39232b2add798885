#pragma once

#include "dpor/homhash.hpp"
#include "dpor/params.hpp"

namespace dpor {

/// psi(t): value of t's `width`-bit binary representation reversed.
inline uint64_t bit_reverse(uint64_t t, unsigned width) {
    if (width < 64 && t >> width) throw std::domain_error("bit_reverse: t out of range");
    uint64_t r = 0;
    for (unsigned i = 0; i < width; ++i) r |= (t >> i & 1) << (width - 1 - i);
    return r;
}

/// omega_l = omega^(2n / 2^(l+1)) mod q, a 2^(l+1)-th root of unity.
inline mpz_class level_root(const SystemParams& P, unsigned l) {
    uint64_t e = 2 * P.n >> (l + 1);
    if (e == 0) throw std::domain_error("level exceeds capacity");
    return powmod(P.omega, mpz_class(static_cast<unsigned long>(e)), P.q);
}

/// Y-side input twist for the write arriving at index t (mod n).
inline mpz_class arrival_twist(const SystemParams& P, uint64_t t) {
    uint64_t psi = bit_reverse(t % P.n, P.levels());
    return powmod(P.omega, mpz_class(static_cast<unsigned long>(psi)), P.q);
}

// ---------------------------------------------------------------------------
// Linear-module operations. The identical cascade runs on segment vectors
// (per-segment arithmetic mod q) and on hash values (combine/scale mod p).

struct VectorOps {
    const SystemParams* P;
    using El = Vec;

    El zero() const { return zero_vector(*P); }
    El add(const El& a, const El& b) const {
        El r(a.size());
        for (size_t i = 0; i < a.size(); ++i) r[i] = addmod(a[i], b[i], P->q);
        return r;
    }
    El smul(const mpz_class& s, const El& a) const {
        El r(a.size());
        for (size_t i = 0; i < a.size(); ++i) r[i] = mulmod(s % P->q, a[i], P->q);
        return r;
    }
    El neg(const El& a) const {
        El r(a.size());
        for (size_t i = 0; i < a.size(); ++i) r[i] = submod(mpz_class(0), a[i], P->q);
        return r;
    }
};

struct HashOps {
    const SystemParams* P;
    using El = HashValue;

    El zero() const { return identity_hash(); }
    El add(const El& a, const El& b) const { return {mulmod(a.v, b.v, P->p)}; }
    El smul(const mpz_class& s, const El& a) const { return scale(*P, a, s); }
    El neg(const El& a) const { return {invmod(a.v, P->p)}; }
};

/// Scalar instantiation used by the generator-matrix oracle: each element is
/// the coefficient row of one codeword entry over the original inputs.
struct CoeffOps {
    const mpz_class* q;
    size_t dim;
    using El = std::vector<mpz_class>;

    El zero() const { return El(dim, mpz_class(0)); }
    El add(const El& a, const El& b) const {
        El r(dim);
        for (size_t i = 0; i < dim; ++i) r[i] = addmod(a[i], b[i], *q);
        return r;
    }
    El smul(const mpz_class& s, const El& a) const {
        El r(dim);
        for (size_t i = 0; i < dim; ++i) r[i] = mulmod(s % *q, a[i], *q);
        return r;
    }
    El neg(const El& a) const {
        El r(dim);
        for (size_t i = 0; i < dim; ++i) r[i] = submod(mpz_class(0), a[i], *q);
        return r;
    }
};

template <class El>
struct LevelPair {
    std::vector<El> X, Y;
    bool occupied() const { return !X.empty(); }
    void clear() {
        X.clear();
        Y.clear();
    }
};

// ---------------------------------------------------------------------------

/// The butterfly step: out[i] = A0[i] + w_l^i·A1[i], out[i+2^l] = A0[i] - w_l^i·A1[i].
template <class Ops>
std::vector<typename Ops::El> mix(const SystemParams& P, const Ops& ops,
                                  const std::vector<typename Ops::El>& A0,
                                  const std::vector<typename Ops::El>& A1, unsigned l) {
    const size_t half = size_t(1) << l;
    if (A0.size() != half || A1.size() != half)
        throw std::invalid_argument("mix: arrays must have length 2^l");
    mpz_class wl = level_root(P, l);
    std::vector<typename Ops::El> out(2 * half, ops.zero());
    mpz_class wi = 1;
    for (size_t i = 0; i < half; ++i) {
        auto t = ops.smul(wi, A1[i]);
        out[i] = ops.add(A0[i], t);
        out[i + half] = ops.add(A0[i], ops.neg(t));
        wi = mulmod(wi, wl, P.q);
    }
    return out;
}

/// Cascade of Fig-style merges: combines full levels 0..l-1 with the incoming
/// element into the new level-l array. `sides` indexes one side (X or Y) of
/// each lower level; the caller pre-twists the Y incoming element.
template <class Ops>
std::vector<typename Ops::El> rebuild_side(const SystemParams& P, const Ops& ops,
                                           const std::vector<const std::vector<typename Ops::El>*>& sides,
                                           const typename Ops::El& incoming, unsigned l) {
    if (sides.size() != l) throw std::invalid_argument("rebuild needs levels 0..l-1");
    std::vector<typename Ops::El> acc{incoming};
    if (l == 0) return acc;
    for (unsigned i = 0; i < l; ++i) {
        if (!sides[i] || sides[i]->size() != size_t(1) << i)
            throw std::invalid_argument("rebuild: level " + std::to_string(i) + " not full");
        acc = mix(P, ops, *sides[i], acc, i);
    }
    return acc;
}

/// Lowest clear bit of w: the level that absorbs this write's merge cascade.
/// At w = n-1 this is k and the caller must follow with a full-buffer rebuild.
inline unsigned target_level(const SystemParams& P, uint64_t w) {
    if (w >= P.n) throw std::domain_error("write counter out of period");
    unsigned l = 0;
    while (w >> l & 1) ++l;
    return l;
}

/// Inserts one element into the hierarchical log: fills target_level(w) from
/// the lower levels plus the incoming element and empties them. The Y side
/// runs the same cascade with the incoming element twisted by omega^psi(w).
template <class Ops>
unsigned hierlog_insert(const SystemParams& P, const Ops& ops,
                        std::vector<LevelPair<typename Ops::El>>& levels, uint64_t w,
                        const typename Ops::El& incoming) {
    const unsigned l = target_level(P, w);
    if (levels.size() < l + 1) levels.resize(P.levels() + 1);
    if (levels[l].occupied()) throw std::logic_error("target level already occupied");
    std::vector<const std::vector<typename Ops::El>*> xs, ys;
    for (unsigned i = 0; i < l; ++i) {
        xs.push_back(&levels[i].X);
        ys.push_back(&levels[i].Y);
    }
    auto x_new = rebuild_side(P, ops, xs, incoming, l);
    auto y_new = rebuild_side(P, ops, ys, ops.smul(arrival_twist(P, w), incoming), l);
    levels[l].X = std::move(x_new);
    levels[l].Y = std::move(y_new);
    for (unsigned i = 0; i < l; ++i) levels[i].clear();
    return l;
}

/// Feeds all n inputs through the cascade, producing the full-capacity
/// codeword (X, Y of n elements each). Input t is Y-twisted by omega^psi(t).
template <class Ops>
LevelPair<typename Ops::El> encode_full(const SystemParams& P, const Ops& ops,
                                        const std::vector<typename Ops::El>& inputs) {
    if (inputs.size() != P.n) throw std::invalid_argument("encode_full requires exactly n inputs");
    std::vector<LevelPair<typename Ops::El>> levels(P.levels() + 1);
    for (uint64_t t = 0; t < P.n; ++t) hierlog_insert(P, ops, levels, t, inputs[t]);
    return std::move(levels[P.levels()]);
}

// ---------------------------------------------------------------------------
// Generator-matrix oracle and decoding.

/// rows[j][pos] = contribution of input j to codeword position pos, where
/// positions 0..2^l-1 are the X side and 2^l..2^(l+1)-1 the Y side. A level
/// instance whose first element arrived at write index `twist_base` has its
/// Y half scaled by the constant omega^psi(twist_base) relative to base 0;
/// feeding unit coefficient rows through the real cascade reproduces this.
inline std::vector<std::vector<mpz_class>> generator_matrix(const SystemParams& P, unsigned l,
                                                            uint64_t twist_base = 0) {
    const size_t k = size_t(1) << l;
    // A level-l instance starts at an arrival index with bits 0..l clear.
    if (twist_base % (2 * k)) throw std::invalid_argument("twist_base must be a multiple of 2^(l+1)");
    CoeffOps ops{&P.q, k};
    std::vector<LevelPair<CoeffOps::El>> levels(P.levels() + 1);
    for (uint64_t j = 0; j < k; ++j) {
        CoeffOps::El unit = ops.zero();
        unit[j] = 1;
        hierlog_insert(P, ops, levels, (twist_base + j) % P.n, unit);
    }
    // After 2^l arrivals starting at a multiple of 2^l, exactly level l is full.
    auto& pair = levels[l];
    std::vector<std::vector<mpz_class>> rows(k, std::vector<mpz_class>(2 * k));
    for (size_t j = 0; j < k; ++j)
        for (size_t i = 0; i < k; ++i) {
            rows[j][i] = pair.X[i][j];
            rows[j][k + i] = pair.Y[i][j];
        }
    return rows;
}

/// Debug rendering: one row per input, hex entries, comma-separated.
inline std::string matrix_csv(const std::vector<std::vector<mpz_class>>& G) {
    std::string out;
    for (const auto& row : G) {
        for (size_t i = 0; i < row.size(); ++i) {
            if (i) out += ',';
            out += row[i].get_str(16);
        }
        out += '\n';
    }
    return out;
}

/// Recovers the 2^l original inputs from any 2^l known codeword positions by
/// Gaussian elimination mod q, per segment.
inline std::vector<Vec> decode(const SystemParams& P, unsigned l,
                               const std::vector<std::pair<uint64_t, Vec>>& known,
                               uint64_t twist_base = 0) {
    const size_t k = size_t(1) << l;
    if (known.size() < k) throw std::invalid_argument("decode: not enough known positions");
    auto rows = generator_matrix(P, l, twist_base);
    std::vector<std::vector<mpz_class>> A(k, std::vector<mpz_class>(k));
    for (size_t r = 0; r < k; ++r) {
        uint64_t pos = known[r].first;
        if (pos >= 2 * k) throw std::out_of_range("decode: position out of range");
        for (size_t r2 = 0; r2 < r; ++r2)
            if (known[r2].first == pos) throw std::invalid_argument("decode: duplicate position");
        for (size_t j = 0; j < k; ++j) A[r][j] = rows[j][pos];
    }
    const size_t segs = known[0].second.size();
    std::vector<Vec> inputs(k, Vec(segs));
    std::vector<mpz_class> b(k);
    for (size_t s = 0; s < segs; ++s) {
        for (size_t r = 0; r < k; ++r) {
            if (known[r].second.size() != segs) throw std::invalid_argument("decode: ragged elements");
            b[r] = known[r].second[s];
        }
        auto x = solve_mod(A, b, P.q);  // singular cannot happen for an MDS matrix
        for (size_t j = 0; j < k; ++j) inputs[j][s] = x[j];
    }
    return inputs;
}

}  // namespace dpor
