#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <utility>
#include <vector>

#include <gmpxx.h>

#include "errors.hpp"

namespace gurevich {

/// Arbitrary-precision integer used for exact periodic-point counts.
using BigInt = mpz_class;

/// A subshift of finite type on a finite alphabet {0, ..., k-1} with a
/// 0/1 transition matrix.  Immutable after construction.
class Sft {
public:
    Sft(int alphabet_size, const std::vector<std::vector<int>>& transitions) {
        if (alphabet_size < 1) throw NonSquare("alphabet_size must be >= 1");
        k_ = alphabet_size;
        if (static_cast<int>(transitions.size()) != k_)
            throw NonSquare("transition matrix has " + std::to_string(transitions.size()) +
                            " rows, expected " + std::to_string(k_));
        a_.assign(static_cast<std::size_t>(k_) * k_, 0);
        for (int i = 0; i < k_; ++i) {
            if (static_cast<int>(transitions[i].size()) != k_)
                throw NonSquare("row " + std::to_string(i) + " has wrong length");
            for (int j = 0; j < k_; ++j) {
                int v = transitions[i][j];
                if (v != 0 && v != 1) throw NonSquare("matrix entries must be 0 or 1");
                a_[static_cast<std::size_t>(i) * k_ + j] = static_cast<std::uint8_t>(v);
            }
        }
        finish_construction();
    }

    /// Builds the full shift on k symbols (all transitions allowed).
    static Sft full_shift(int k) {
        std::vector<std::vector<int>> t(k, std::vector<int>(k, 1));
        return Sft(k, t);
    }

    /// Builds an SFT from the list of allowed (i, j) pairs, 0-indexed.
    static Sft from_pairs(int alphabet_size, const std::vector<std::pair<int, int>>& allowed) {
        if (alphabet_size < 1) throw NonSquare("alphabet_size must be >= 1");
        std::vector<std::vector<int>> t(alphabet_size, std::vector<int>(alphabet_size, 0));
        for (auto [i, j] : allowed) {
            if (i < 0 || i >= alphabet_size || j < 0 || j >= alphabet_size)
                throw ValidationError("transition (" + std::to_string(i) + ", " + std::to_string(j) +
                                      ") is outside the alphabet");
            t[i][j] = 1;
        }
        return Sft(alphabet_size, t);
    }

    int alphabet_size() const { return k_; }

    bool allowed(int i, int j) const { return a_[static_cast<std::size_t>(i) * k_ + j] != 0; }

    /// Index of edge (i, j) in edges(), or -1 when the transition is forbidden.
    int edge_index(int i, int j) const { return edge_index_[static_cast<std::size_t>(i) * k_ + j]; }

    int edge_count() const { return static_cast<int>(edges_.size()); }

    /// Allowed transitions in row-major (lexicographic) order.
    const std::vector<std::pair<int, int>>& edges() const { return edges_; }

    bool is_full_shift() const { return edge_count() == k_ * k_; }

    bool operator==(const Sft& o) const { return k_ == o.k_ && a_ == o.a_; }

private:
    void finish_construction() {
        for (int i = 0; i < k_; ++i) {
            bool row = false, col = false;
            for (int j = 0; j < k_; ++j) {
                row = row || allowed(i, j);
                col = col || allowed(j, i);
            }
            if (!row) throw EmptyRowOrColumn("symbol " + std::to_string(i) + " has no successor");
            if (!col) throw EmptyRowOrColumn("symbol " + std::to_string(i) + " has no predecessor");
        }
        edge_index_.assign(static_cast<std::size_t>(k_) * k_, -1);
        for (int i = 0; i < k_; ++i)
            for (int j = 0; j < k_; ++j)
                if (allowed(i, j)) {
                    edge_index_[static_cast<std::size_t>(i) * k_ + j] = static_cast<int>(edges_.size());
                    edges_.emplace_back(i, j);
                }
    }

    int k_ = 0;
    std::vector<std::uint8_t> a_;
    std::vector<int> edge_index_;
    std::vector<std::pair<int, int>> edges_;
};

/// A periodic point of period n, stored as the based vertex sequence
/// (x0, ..., x_{n-1}); the wrap-around transition is allowed by construction.
struct Loop {
    std::vector<int> vertices;
    int length() const { return static_cast<int>(vertices.size()); }
};

struct Irreducibility {
    bool irreducible = false;
    int period = 1;
};

namespace detail {

inline std::vector<std::vector<char>> reach_table(const Sft& s, int max_len) {
    // reach[m][i*k+j] = 1 iff there is a path of length exactly m from i to j.
    int k = s.alphabet_size();
    std::vector<std::vector<char>> reach(static_cast<std::size_t>(max_len) + 1,
                                         std::vector<char>(static_cast<std::size_t>(k) * k, 0));
    for (int i = 0; i < k; ++i) reach[0][static_cast<std::size_t>(i) * k + i] = 1;
    for (int m = 1; m <= max_len; ++m)
        for (int i = 0; i < k; ++i)
            for (int j = 0; j < k; ++j) {
                char v = 0;
                for (int l = 0; l < k && !v; ++l)
                    v = static_cast<char>(s.allowed(i, l) && reach[m - 1][static_cast<std::size_t>(l) * k + j]);
                reach[m][static_cast<std::size_t>(i) * k + j] = v;
            }
    return reach;
}

}  // namespace detail

/// Strong connectivity of the transition digraph together with its period
/// (gcd of cycle lengths).  For a non-irreducible shift the period reports 1.
inline Irreducibility irreducibility(const Sft& s) {
    int k = s.alphabet_size();
    auto bfs = [&](bool forward) {
        std::vector<char> seen(k, 0);
        std::vector<int> stack{0};
        seen[0] = 1;
        while (!stack.empty()) {
            int v = stack.back();
            stack.pop_back();
            for (int w = 0; w < k; ++w) {
                bool edge = forward ? s.allowed(v, w) : s.allowed(w, v);
                if (edge && !seen[w]) {
                    seen[w] = 1;
                    stack.push_back(w);
                }
            }
        }
        return seen;
    };
    auto fwd = bfs(true), bwd = bfs(false);
    for (int v = 0; v < k; ++v)
        if (!fwd[v] || !bwd[v]) return {false, 1};

    // Level layering from vertex 0; the period is the gcd of l(u)+1-l(v)
    // over all edges (u, v).
    std::vector<long long> level(k, -1);
    std::vector<int> queue{0};
    level[0] = 0;
    for (std::size_t h = 0; h < queue.size(); ++h) {
        int u = queue[h];
        for (int v = 0; v < k; ++v)
            if (s.allowed(u, v) && level[v] < 0) {
                level[v] = level[u] + 1;
                queue.push_back(v);
            }
    }
    long long g = 0;
    for (int u = 0; u < k; ++u)
        for (int v = 0; v < k; ++v)
            if (s.allowed(u, v)) g = std::gcd(g, level[u] + 1 - level[v]);
    if (g == 0) g = 1;
    return {true, static_cast<int>(g < 0 ? -g : g)};
}

inline bool is_aperiodic(const Sft& s) {
    auto r = irreducibility(s);
    return r.irreducible && r.period == 1;
}

/// trace(A^n) in exact integer arithmetic: the number of periodic points of
/// period n, counted as based sequences.
inline BigInt count_periodic_big(const Sft& s, int n) {
    if (n < 1) throw Error("count_periodic requires n >= 1");
    int k = s.alphabet_size();
    using Mat = std::vector<BigInt>;
    auto mul = [k](const Mat& x, const Mat& y) {
        Mat r(static_cast<std::size_t>(k) * k, BigInt(0));
        for (int i = 0; i < k; ++i)
            for (int l = 0; l < k; ++l) {
                const BigInt& xv = x[static_cast<std::size_t>(i) * k + l];
                if (xv == 0) continue;
                for (int j = 0; j < k; ++j)
                    r[static_cast<std::size_t>(i) * k + j] += xv * y[static_cast<std::size_t>(l) * k + j];
            }
        return r;
    };
    Mat base(static_cast<std::size_t>(k) * k, BigInt(0));
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j)
            if (s.allowed(i, j)) base[static_cast<std::size_t>(i) * k + j] = 1;
    Mat acc(static_cast<std::size_t>(k) * k, BigInt(0));
    for (int i = 0; i < k; ++i) acc[static_cast<std::size_t>(i) * k + i] = 1;
    int e = n;
    while (e > 0) {
        if (e & 1) acc = mul(acc, base);
        base = mul(base, base);
        e >>= 1;
    }
    BigInt tr = 0;
    for (int i = 0; i < k; ++i) tr += acc[static_cast<std::size_t>(i) * k + i];
    return tr;
}

/// Same as count_periodic_big but returned in machine width; signals
/// Overflow when the count does not fit.
inline std::uint64_t count_periodic(const Sft& s, int n) {
    BigInt tr = count_periodic_big(s, n);
    if (!tr.fits_ulong_p())
        throw Overflow("periodic-point count at n=" + std::to_string(n) +
                       " exceeds the machine width; use count_periodic_big");
    return static_cast<std::uint64_t>(mpz_get_ui(tr.get_mpz_t()));
}

/// Visits every periodic point of period n exactly once, as a based vertex
/// sequence, in lexicographic order.  Rotations are distinct periodic points
/// and are visited separately.
template <class Visitor>
void for_each_loop(const Sft& s, int n, Visitor&& visit) {
    if (n < 1) throw Error("loop enumeration requires n >= 1");
    int k = s.alphabet_size();
    auto reach = detail::reach_table(s, n);
    std::vector<int> word(n);
    for (int start = 0; start < k; ++start) {
        word[0] = start;
        // DFS over positions 1..n-1; position p holds the next symbol to try.
        int depth = 1;
        std::vector<int> next(n + 1, 0);
        if (n == 1) {
            if (s.allowed(start, start)) {
                Loop loop{word};
                visit(loop);
            }
            continue;
        }
        next[1] = 0;
        while (depth >= 1) {
            if (depth == n) {
                if (s.allowed(word[n - 1], start)) {
                    Loop loop{word};
                    visit(loop);
                }
                --depth;
                continue;
            }
            int cur = word[depth - 1];
            int cand = next[depth];
            bool advanced = false;
            for (; cand < k; ++cand) {
                // Must be able to get back to the start in the remaining steps.
                if (s.allowed(cur, cand) &&
                    reach[n - depth - 1][static_cast<std::size_t>(cand) * k + start]) {
                    word[depth] = cand;
                    next[depth] = cand + 1;
                    ++depth;
                    next[depth] = 0;
                    advanced = true;
                    break;
                }
            }
            if (!advanced) --depth;
        }
    }
}

inline std::vector<Loop> enumerate_loops(const Sft& s, int n) {
    std::vector<Loop> out;
    for_each_loop(s, n, [&](const Loop& l) { out.push_back(l); });
    return out;
}

namespace detail {

/// Row-major sparse matrix with nonnegative entries.
struct SparseMatrix {
    int n = 0;
    std::vector<int> row_ptr;  // size n + 1
    std::vector<int> col;
    std::vector<double> val;
};

struct PerronData {
    double lambda = 0.0;
    std::vector<double> right;
    int iterations = 0;
};

/// Power iteration on (I + M); the shift removes periodic oscillation.
/// Stops when successive eigenvalue estimates differ by less than 1e-13.
inline PerronData perron(const SparseMatrix& m) {
    const double tol = 1e-13;
    const int max_iter = 100000;
    int n = m.n;
    std::vector<double> x(n, 1.0), y(n, 0.0);
    double lambda_prev = -1.0;
    for (int it = 1; it <= max_iter; ++it) {
        for (int i = 0; i < n; ++i) {
            double acc = x[i];
            for (int p = m.row_ptr[i]; p < m.row_ptr[i + 1]; ++p)
                acc += m.val[p] * x[m.col[p]];
            y[i] = acc;
        }
        double norm = 0.0;
        for (double v : y) norm = std::max(norm, v);
        if (norm <= 0.0) throw NoConvergence("power iteration collapsed to zero");
        for (int i = 0; i < n; ++i) x[i] = y[i] / norm;
        double lambda = norm - 1.0;
        if (it > 1 && std::abs(lambda - lambda_prev) < tol * std::max(1.0, std::abs(lambda)))
            return {lambda, x, it};
        lambda_prev = lambda;
    }
    throw NoConvergence("power iteration did not converge within 100000 steps");
}

}  // namespace detail

/// log of the Perron eigenvalue of the transition matrix.
inline double topological_entropy(const Sft& s) {
    auto irr = irreducibility(s);
    if (!irr.irreducible) throw NotIrreducible("topological_entropy requires an irreducible shift");
    int k = s.alphabet_size();
    detail::SparseMatrix m;
    m.n = k;
    m.row_ptr.assign(k + 1, 0);
    for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j)
            if (s.allowed(i, j)) {
                m.col.push_back(j);
                m.val.push_back(1.0);
            }
        m.row_ptr[i + 1] = static_cast<int>(m.col.size());
    }
    return std::log(detail::perron(m).lambda);
}

}  // namespace gurevich
