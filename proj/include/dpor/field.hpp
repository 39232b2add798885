#pragma once

#include <gmpxx.h>

#include <stdexcept>
#include <string>
#include <vector>

#include "dpor/bytes.hpp"

namespace dpor {

inline mpz_class powmod(const mpz_class& base, const mpz_class& exp, const mpz_class& mod) {
    mpz_class r;
    mpz_powm(r.get_mpz_t(), base.get_mpz_t(), exp.get_mpz_t(), mod.get_mpz_t());
    return r;
}

inline mpz_class invmod(const mpz_class& a, const mpz_class& mod) {
    mpz_class r;
    if (!mpz_invert(r.get_mpz_t(), a.get_mpz_t(), mod.get_mpz_t()))
        throw std::domain_error("not invertible mod " + mod.get_str());
    return r;
}

inline mpz_class mulmod(const mpz_class& a, const mpz_class& b, const mpz_class& mod) {
    mpz_class r = a * b;
    r %= mod;
    return r;
}

/// a - b reduced into [0, mod).
inline mpz_class submod(const mpz_class& a, const mpz_class& b, const mpz_class& mod) {
    mpz_class r = a - b;
    r %= mod;
    if (r < 0) r += mod;
    return r;
}

inline mpz_class addmod(const mpz_class& a, const mpz_class& b, const mpz_class& mod) {
    mpz_class r = a + b;
    r %= mod;
    return r;
}

inline bool probably_prime(const mpz_class& n) {
    return mpz_probab_prime_p(n.get_mpz_t(), 32) != 0;
}

/// Big-endian magnitude, empty for zero.
inline Bytes mpz_to_bytes(const mpz_class& v) {
    if (v < 0) throw std::domain_error("negative value");
    size_t count = 0;
    Bytes out((mpz_sizeinbase(v.get_mpz_t(), 2) + 7) / 8);
    if (v == 0) return {};
    mpz_export(out.data(), &count, 1, 1, 1, 0, v.get_mpz_t());
    out.resize(count);
    return out;
}

inline mpz_class bytes_to_mpz(const Bytes& b) {
    mpz_class v;
    if (!b.empty()) mpz_import(v.get_mpz_t(), b.size(), 1, 1, 1, 0, b.data());
    return v;
}

/// Big-endian magnitude padded on the left to exactly `width` bytes.
inline Bytes mpz_to_fixed(const mpz_class& v, size_t width) {
    Bytes mag = mpz_to_bytes(v);
    if (mag.size() > width) throw std::length_error("value wider than field width");
    Bytes out(width - mag.size(), 0);
    put_bytes(out, mag);
    return out;
}

/// Length-prefixed big integer: 2-byte BE length + BE magnitude.
inline void put_mpz_lp(Bytes& out, const mpz_class& v) { put_lp(out, mpz_to_bytes(v)); }

inline mpz_class take_mpz_lp(Cursor& c) { return bytes_to_mpz(c.lp()); }

/// Solve A·x = b mod q by Gaussian elimination with first-nonzero pivoting.
/// A is row-major square; throws on a singular system.
inline std::vector<mpz_class> solve_mod(std::vector<std::vector<mpz_class>> A,
                                        std::vector<mpz_class> b, const mpz_class& q) {
    const size_t n = A.size();
    if (b.size() != n) throw std::invalid_argument("solve_mod: shape mismatch");
    for (size_t col = 0; col < n; ++col) {
        size_t piv = col;
        while (piv < n && A[piv][col] % q == 0) ++piv;
        if (piv == n) throw std::domain_error("solve_mod: singular system");
        std::swap(A[piv], A[col]);
        std::swap(b[piv], b[col]);
        mpz_class inv = invmod(A[col][col], q);
        for (size_t j = col; j < n; ++j) A[col][j] = mulmod(A[col][j], inv, q);
        b[col] = mulmod(b[col], inv, q);
        for (size_t row = 0; row < n; ++row) {
            if (row == col) continue;
            mpz_class f = A[row][col] % q;
            if (f == 0) continue;
            for (size_t j = col; j < n; ++j) A[row][j] = submod(A[row][j], mulmod(f, A[col][j], q), q);
            b[row] = submod(b[row], mulmod(f, b[col], q), q);
        }
    }
    return b;
}

/// Rank of a matrix mod q (used for MDS submatrix checks).
inline size_t rank_mod(std::vector<std::vector<mpz_class>> A, const mpz_class& q) {
    if (A.empty()) return 0;
    const size_t rows = A.size(), cols = A[0].size();
    size_t rank = 0;
    for (size_t col = 0; col < cols && rank < rows; ++col) {
        size_t piv = rank;
        while (piv < rows && A[piv][col] % q == 0) ++piv;
        if (piv == rows) continue;
        std::swap(A[piv], A[rank]);
        mpz_class inv = invmod(A[rank][col], q);
        for (size_t j = col; j < cols; ++j) A[rank][j] = mulmod(A[rank][j], inv, q);
        for (size_t row = 0; row < rows; ++row) {
            if (row == rank) continue;
            mpz_class f = A[row][col] % q;
            if (f == 0) continue;
            for (size_t j = col; j < cols; ++j)
                A[row][j] = submod(A[row][j], mulmod(f, A[rank][j], q), q);
        }
        ++rank;
    }
    return rank;
}

/// Incremental row-independence tracker over Z_q: keeps a reduced basis.
class RowSpace {
public:
    explicit RowSpace(mpz_class q) : q_(std::move(q)) {}

    size_t rank() const { return basis_.size(); }

    /// Returns true (and absorbs the row) iff `row` is independent of the basis.
    bool try_add(std::vector<mpz_class> row) {
        for (auto& v : row) {
            v %= q_;
            if (v < 0) v += q_;
        }
        for (const auto& [lead, vec] : basis_) {
            if (row[lead] == 0) continue;
            mpz_class f = row[lead];
            for (size_t j = 0; j < row.size(); ++j) row[j] = submod(row[j], mulmod(f, vec[j], q_), q_);
        }
        size_t lead = 0;
        while (lead < row.size() && row[lead] == 0) ++lead;
        if (lead == row.size()) return false;
        mpz_class inv = invmod(row[lead], q_);
        for (auto& v : row) v = mulmod(v, inv, q_);
        basis_.emplace_back(lead, std::move(row));
        return true;
    }

private:
    mpz_class q_;
    std::vector<std::pair<size_t, std::vector<mpz_class>>> basis_;
};

}  // namespace dpor
