#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <set>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "errors.hpp"

namespace gurevich {

/// Requirements on a group implementation: immutable value elements with a
/// total order, group arithmetic, a distinguished generator list, and an
/// abelianization onto an integer lattice (torsion dropped).
template <class G>
concept GroupLike = requires(const G& g, const typename G::Element& a, const typename G::Element& b) {
    typename G::Element;
    { g.identity() } -> std::same_as<typename G::Element>;
    { g.multiply(a, b) } -> std::same_as<typename G::Element>;
    { g.inverse(a) } -> std::same_as<typename G::Element>;
    { g.generators() } -> std::same_as<const std::vector<typename G::Element>&>;
    { g.abelian_rank() } -> std::same_as<int>;
    { g.abelianize(a) } -> std::same_as<std::vector<std::int64_t>>;
    { g.norm_lower_bound(a) } -> std::same_as<std::int64_t>;
    { g.describe(a) } -> std::same_as<std::string>;
    { a < b } -> std::convertible_to<bool>;
    { a == b } -> std::convertible_to<bool>;
};

/// Z^a with the standard basis as default generators.
class LatticeGroup {
public:
    using Element = std::vector<std::int64_t>;

    explicit LatticeGroup(int rank) : rank_(rank) {
        if (rank < 0) throw ValidationError("lattice rank must be >= 0");
        for (int i = 0; i < rank; ++i) {
            Element e(rank, 0);
            e[i] = 1;
            gens_.push_back(std::move(e));
        }
        max_gen_norm_ = rank > 0 ? 1 : 0;
    }

    LatticeGroup(int rank, std::vector<Element> generators) : rank_(rank), gens_(std::move(generators)) {
        for (const auto& g : gens_) {
            if (static_cast<int>(g.size()) != rank_) throw KindMismatch("generator rank mismatch");
            max_gen_norm_ = std::max(max_gen_norm_, l1(g));
        }
    }

    int rank() const { return rank_; }

    Element identity() const { return Element(rank_, 0); }

    Element multiply(const Element& a, const Element& b) const {
        check(a);
        check(b);
        Element r(rank_);
        for (int i = 0; i < rank_; ++i) r[i] = a[i] + b[i];
        return r;
    }

    Element inverse(const Element& a) const {
        check(a);
        Element r(rank_);
        for (int i = 0; i < rank_; ++i) r[i] = -a[i];
        return r;
    }

    const std::vector<Element>& generators() const { return gens_; }

    int abelian_rank() const { return rank_; }
    std::vector<std::int64_t> abelianize(const Element& a) const {
        check(a);
        return a;
    }

    /// Lower bound on the generator word length of a.
    std::int64_t norm_lower_bound(const Element& a) const {
        if (max_gen_norm_ <= 0) return 0;
        return (l1(a) + max_gen_norm_ - 1) / max_gen_norm_;
    }

    std::string describe(const Element& a) const {
        std::string s = "(";
        for (int i = 0; i < rank_; ++i) s += (i ? "," : "") + std::to_string(a[i]);
        return s + ")";
    }

private:
    static std::int64_t l1(const Element& a) {
        std::int64_t n = 0;
        for (auto v : a) n += v < 0 ? -v : v;
        return n;
    }
    void check(const Element& a) const {
        if (static_cast<int>(a.size()) != rank_) throw KindMismatch("lattice element rank mismatch");
    }

    int rank_ = 0;
    std::vector<Element> gens_;
    std::int64_t max_gen_norm_ = 0;
};

/// A finite group given by its multiplication table.  The table is fully
/// validated (closure, identity, inverses, associativity) at construction.
class FiniteGroup {
public:
    using Element = std::int32_t;

    explicit FiniteGroup(const std::vector<std::vector<int>>& table) {
        n_ = static_cast<int>(table.size());
        if (n_ < 1) throw ValidationError("finite group table is empty");
        table_.assign(static_cast<std::size_t>(n_) * n_, 0);
        for (int i = 0; i < n_; ++i) {
            if (static_cast<int>(table[i].size()) != n_)
                throw ValidationError("finite group table is not square");
            for (int j = 0; j < n_; ++j) {
                int v = table[i][j];
                if (v < 0 || v >= n_) throw ValidationError("finite group table entry out of range");
                table_[static_cast<std::size_t>(i) * n_ + j] = v;
            }
        }
        identity_ = -1;
        for (int e = 0; e < n_; ++e) {
            bool is_id = true;
            for (int g = 0; g < n_ && is_id; ++g)
                is_id = mul(e, g) == g && mul(g, e) == g;
            if (is_id) {
                identity_ = e;
                break;
            }
        }
        if (identity_ < 0) throw ValidationError("finite group table has no identity");
        inv_.assign(n_, -1);
        for (int g = 0; g < n_; ++g) {
            for (int h = 0; h < n_; ++h)
                if (mul(g, h) == identity_ && mul(h, g) == identity_) {
                    inv_[g] = h;
                    break;
                }
            if (inv_[g] < 0) throw ValidationError("finite group element without inverse");
        }
        for (int a = 0; a < n_; ++a)
            for (int b = 0; b < n_; ++b)
                for (int c = 0; c < n_; ++c)
                    if (mul(mul(a, b), c) != mul(a, mul(b, c)))
                        throw ValidationError("finite group table is not associative");
        for (int g = 0; g < n_; ++g)
            if (g != identity_) gens_.push_back(g);
        if (gens_.empty()) gens_.push_back(identity_);
    }

    int order() const { return n_; }

    Element identity() const { return identity_; }
    Element multiply(const Element& a, const Element& b) const {
        check(a);
        check(b);
        return mul(a, b);
    }
    Element inverse(const Element& a) const {
        check(a);
        return inv_[a];
    }

    const std::vector<Element>& generators() const { return gens_; }

    int abelian_rank() const { return 0; }
    std::vector<std::int64_t> abelianize(const Element& a) const {
        check(a);
        return {};
    }

    std::int64_t norm_lower_bound(const Element&) const { return 0; }

    std::string describe(const Element& a) const { return std::to_string(a); }

private:
    int mul(int a, int b) const { return table_[static_cast<std::size_t>(a) * n_ + b]; }
    void check(const Element& a) const {
        if (a < 0 || a >= n_) throw KindMismatch("finite group element out of range");
    }

    int n_ = 0;
    int identity_ = 0;
    std::vector<int> table_;
    std::vector<int> inv_;
    std::vector<Element> gens_;
};

/// The free group F_k.  Elements are reduced words of nonzero signed letters:
/// +i is generator i (1-based), -i its inverse.
class FreeGroup {
public:
    using Element = std::vector<std::int32_t>;

    explicit FreeGroup(int rank) : rank_(rank) {
        if (rank < 1) throw ValidationError("free rank must be >= 1");
        for (int i = 1; i <= rank; ++i) gens_.push_back(Element{i});
    }

    int rank() const { return rank_; }

    Element identity() const { return {}; }

    Element multiply(const Element& a, const Element& b) const {
        check(a);
        check(b);
        Element r = a;
        for (auto letter : b) {
            if (!r.empty() && r.back() == -letter)
                r.pop_back();
            else
                r.push_back(letter);
        }
        return r;
    }

    Element inverse(const Element& a) const {
        check(a);
        Element r(a.rbegin(), a.rend());
        for (auto& l : r) l = -l;
        return r;
    }

    const std::vector<Element>& generators() const { return gens_; }

    int abelian_rank() const { return rank_; }
    std::vector<std::int64_t> abelianize(const Element& a) const {
        check(a);
        std::vector<std::int64_t> v(rank_, 0);
        for (auto l : a) v[std::abs(l) - 1] += l > 0 ? 1 : -1;
        return v;
    }

    /// Word length of a reduced word is its exact generator norm.
    std::int64_t norm_lower_bound(const Element& a) const { return static_cast<std::int64_t>(a.size()); }

    std::string describe(const Element& a) const {
        if (a.empty()) return "e";
        std::string s;
        for (auto l : a) {
            char c = static_cast<char>('a' + std::abs(l) - 1);
            s += l > 0 ? c : static_cast<char>(std::toupper(c));
        }
        return s;
    }

private:
    void check(const Element& a) const {
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (a[i] == 0 || std::abs(a[i]) > rank_) throw KindMismatch("free group letter out of range");
            if (i + 1 < a.size() && a[i] == -a[i + 1]) throw KindMismatch("free group word is not reduced");
        }
    }

    int rank_ = 0;
    std::vector<Element> gens_;
};

/// The discrete Heisenberg group in the upper-triangular integer model:
/// (a,b,c) (a',b',c') = (a+a', b+b', c+c'+a b').  Default generators are
/// x = (1,0,0) and y = (0,1,0); abelianization drops the center.
class HeisenbergGroup {
public:
    using Element = std::array<std::int64_t, 3>;

    HeisenbergGroup() {
        gens_ = {Element{1, 0, 0}, Element{0, 1, 0}};
        standard_generators_ = true;
    }

    explicit HeisenbergGroup(std::vector<Element> generators) : gens_(std::move(generators)) {
        standard_generators_ =
            gens_.size() == 2 && gens_[0] == Element{1, 0, 0} && gens_[1] == Element{0, 1, 0};
        for (const auto& g : gens_) max_gen_ab_ = std::max(max_gen_ab_, std::abs(g[0]) + std::abs(g[1]));
        if (standard_generators_) max_gen_ab_ = 1;
    }

    Element identity() const { return {0, 0, 0}; }

    Element multiply(const Element& a, const Element& b) const {
        return {a[0] + b[0], a[1] + b[1], a[2] + b[2] + a[0] * b[1]};
    }

    Element inverse(const Element& a) const { return {-a[0], -a[1], -a[2] + a[0] * a[1]}; }

    const std::vector<Element>& generators() const { return gens_; }

    int abelian_rank() const { return 2; }
    std::vector<std::int64_t> abelianize(const Element& a) const { return {a[0], a[1]}; }

    /// Lower bound on word length: a product of m standard generators has
    /// |a| + |b| <= m and |c| <= m(m-1)/2.
    std::int64_t norm_lower_bound(const Element& g) const {
        std::int64_t ab = std::abs(g[0]) + std::abs(g[1]);
        if (!standard_generators_)
            return max_gen_ab_ > 0 ? (ab + max_gen_ab_ - 1) / max_gen_ab_ : 0;
        std::int64_t c = std::abs(g[2]);
        std::int64_t m = ab;
        while (m * (m - 1) / 2 < c) ++m;
        return m;
    }

    std::string describe(const Element& a) const {
        return "(" + std::to_string(a[0]) + "," + std::to_string(a[1]) + "," + std::to_string(a[2]) + ")";
    }

private:
    std::vector<Element> gens_;
    bool standard_generators_ = true;
    std::int64_t max_gen_ab_ = 1;
};

/// Ordered left-to-right product of (inverse-)generators.  A word is a list
/// of nonzero signed 1-based generator indices.
template <GroupLike G>
typename G::Element evaluate_word(const G& g, std::span<const std::int32_t> word) {
    auto acc = g.identity();
    const auto& gens = g.generators();
    for (auto idx : word) {
        if (idx == 0 || static_cast<std::size_t>(std::abs(idx)) > gens.size())
            throw IndexOutOfRange("generator index " + std::to_string(idx) + " out of range (have " +
                                  std::to_string(gens.size()) + " generators)");
        const auto& gen = gens[std::abs(idx) - 1];
        acc = g.multiply(acc, idx > 0 ? gen : g.inverse(gen));
    }
    return acc;
}

template <GroupLike G>
typename G::Element evaluate_word(const G& g, const std::vector<std::int32_t>& word) {
    return evaluate_word(g, std::span<const std::int32_t>(word.data(), word.size()));
}

/// All elements expressible as products of at most `radius` generators or
/// inverse generators, in sorted order.
template <GroupLike G>
std::vector<typename G::Element> ball(const G& g, int radius, std::size_t cap = 100000000) {
    if (radius < 0) throw Error("ball radius must be >= 0");
    if (g.generators().empty()) throw Error("ball requires a nonempty generator list");
    std::vector<typename G::Element> steps;
    for (const auto& s : g.generators()) {
        steps.push_back(s);
        steps.push_back(g.inverse(s));
    }
    std::set<typename G::Element> seen{g.identity()};
    std::vector<typename G::Element> frontier{g.identity()};
    for (int r = 1; r <= radius && !frontier.empty(); ++r) {
        std::vector<typename G::Element> next;
        for (const auto& e : frontier)
            for (const auto& s : steps) {
                auto t = g.multiply(e, s);
                if (seen.insert(t).second) {
                    next.push_back(std::move(t));
                    if (seen.size() > cap)
                        throw BallTooLarge("ball exceeded cap of " + std::to_string(cap) +
                                           " elements at radius " + std::to_string(r));
                }
            }
        frontier = std::move(next);
    }
    return std::vector<typename G::Element>(seen.begin(), seen.end());
}

// ---------------------------------------------------------------------------
// Dynamic dispatch over the four kinds, for configuration-driven call sites.

enum class GroupKind { Lattice, FiniteTable, Free, Heisenberg };

using AnyGroup = std::variant<LatticeGroup, FiniteGroup, FreeGroup, HeisenbergGroup>;

inline GroupKind kind_of(const AnyGroup& g) {
    return static_cast<GroupKind>(g.index());
}

inline const char* kind_name(GroupKind k) {
    switch (k) {
        case GroupKind::Lattice: return "lattice";
        case GroupKind::FiniteTable: return "finite";
        case GroupKind::Free: return "free";
        case GroupKind::Heisenberg: return "heisenberg";
    }
    return "?";
}

}  // namespace gurevich
