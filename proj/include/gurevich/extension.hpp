#pragma once

#include <chrono>
#include <future>
#include <map>
#include <optional>
#include <thread>

#include "groups.hpp"
#include "thermo.hpp"

namespace gurevich {

/// A skew-product extension of a subshift by a group: every allowed
/// transition (i, j) carries a label psi(i, j), and a periodic point has
/// trivial holonomy when the ordered product of its labels is the identity.
template <GroupLike G>
struct SkewSystem {
    Sft base;
    G group;
    std::vector<typename G::Element> labels;  // indexed by base edge order

    const typename G::Element& label(int i, int j) const { return labels[base.edge_index(i, j)]; }
};

/// Validates that the labels cover exactly the allowed transitions.
template <GroupLike G>
SkewSystem<G> make_skew(const Sft& base, const G& group,
                        const std::vector<std::tuple<int, int, typename G::Element>>& labels) {
    std::vector<typename G::Element> by_edge(base.edge_count(), group.identity());
    std::vector<char> set(base.edge_count(), 0);
    for (const auto& [i, j, g] : labels) {
        if (i < 0 || i >= base.alphabet_size() || j < 0 || j >= base.alphabet_size())
            throw ExtraLabel("label on (" + std::to_string(i) + ", " + std::to_string(j) +
                             "): symbol outside the alphabet");
        int e = base.edge_index(i, j);
        if (e < 0)
            throw ExtraLabel("label on forbidden transition (" + std::to_string(i) + ", " +
                             std::to_string(j) + ")");
        if (set[e])
            throw ExtraLabel("duplicate label on (" + std::to_string(i) + ", " + std::to_string(j) + ")");
        by_edge[e] = g;
        set[e] = 1;
    }
    for (int e = 0; e < base.edge_count(); ++e)
        if (!set[e])
            throw MissingLabel("no label on allowed transition (" +
                               std::to_string(base.edges()[e].first) + ", " +
                               std::to_string(base.edges()[e].second) + ")");
    return SkewSystem<G>{base, group, std::move(by_edge)};
}

/// The abelianized system: every label mapped through the projection onto
/// the free part of G^ab.
template <GroupLike G>
SkewSystem<LatticeGroup> abelianize(const SkewSystem<G>& s) {
    LatticeGroup ab(s.group.abelian_rank());
    std::vector<LatticeGroup::Element> labels;
    labels.reserve(s.labels.size());
    for (const auto& g : s.labels) labels.push_back(s.group.abelianize(g));
    return SkewSystem<LatticeGroup>{s.base, std::move(ab), std::move(labels)};
}

/// Per-operation resource limits and the worker cap.
struct CountOptions {
    std::size_t state_cap = 100000000;
    int threads = 0;  // 0 = one worker per hardware thread, capped at 16
};

/// Outcome of the transitivity check.  Lattice extensions are decided
/// exactly; other kinds get a depth-bounded semi-decision with an explicit
/// Unknown outcome.
struct TransitivityResult {
    enum class Kind { Transitive, Intransitive, Unknown };
    Kind kind = Kind::Unknown;
    std::string witness;
    int depth = 0;

    bool transitive() const { return kind == Kind::Transitive; }
};

namespace detail {

inline int resolve_threads(int requested) {
    int hw = static_cast<int>(std::thread::hardware_concurrency());
    if (hw <= 0) hw = 1;
    int t = requested > 0 ? requested : hw;
    return std::clamp(t, 1, 16);
}

/// Labels depending only on the first symbol of the transition, or nullopt.
template <GroupLike G>
std::optional<std::vector<typename G::Element>> first_symbol_labels(const SkewSystem<G>& s) {
    int k = s.base.alphabet_size();
    std::vector<typename G::Element> per(static_cast<std::size_t>(k), s.group.identity());
    for (int i = 0; i < k; ++i) {
        bool found = false;
        for (int j = 0; j < k; ++j) {
            int e = s.base.edge_index(i, j);
            if (e < 0) continue;
            if (!found) {
                per[i] = s.labels[e];
                found = true;
            } else if (!(s.labels[e] == per[i])) {
                return std::nullopt;
            }
        }
    }
    return per;
}

inline std::optional<std::vector<double>> first_symbol_values(const Sft& base, const EdgePotential& f) {
    int k = base.alphabet_size();
    std::vector<double> per(static_cast<std::size_t>(k), 0.0);
    for (int i = 0; i < k; ++i) {
        bool found = false;
        for (int j = 0; j < k; ++j) {
            int e = base.edge_index(i, j);
            if (e < 0) continue;
            if (!found) {
                per[i] = f[e];
                found = true;
            } else if (f[e] != per[i]) {
                return std::nullopt;
            }
        }
    }
    return per;
}

// -------------------------------------------------------------------------
// Walk engine.  For a full shift whose labels (and weights) depend only on
// the first symbol, the trivial-holonomy count Z_n equals the number of
// length-n words whose label product is the identity.  The DP state is the
// group element alone, and one pass yields Z_n for every n <= n_max.

constexpr std::int64_t kPackedFieldOffset = std::int64_t{1} << 20;
constexpr std::int64_t kPackedFieldMax = kPackedFieldOffset - 1;

/// Coordinates packed into disjoint 21-bit fields of a uint64; the packing
/// is lexicographic-order preserving.
struct PackedWalkOps {
    using Key = std::uint64_t;
    int rank = 0;
    bool heisenberg = false;
    std::vector<std::array<std::int64_t, 3>> delta;  // per symbol

    static Key pack3(std::int64_t a, std::int64_t b, std::int64_t c) {
        return (static_cast<Key>(a + kPackedFieldOffset) << 42) |
               (static_cast<Key>(b + kPackedFieldOffset) << 21) |
               static_cast<Key>(c + kPackedFieldOffset);
    }
    static void unpack3(Key k, std::int64_t& a, std::int64_t& b, std::int64_t& c) {
        a = static_cast<std::int64_t>((k >> 42) & 0x1fffff) - kPackedFieldOffset;
        b = static_cast<std::int64_t>((k >> 21) & 0x1fffff) - kPackedFieldOffset;
        c = static_cast<std::int64_t>(k & 0x1fffff) - kPackedFieldOffset;
    }

    Key initial() const { return pack3(0, 0, 0); }

    Key apply(Key k, int sym) const {
        std::int64_t a, b, c;
        unpack3(k, a, b, c);
        const auto& d = delta[sym];
        if (heisenberg)
            return pack3(a + d[0], b + d[1], c + d[2] + a * d[1]);
        return pack3(a + d[0], b + d[1], c + d[2]);
    }
};

template <GroupLike G>
struct BoxedWalkOps {
    using Key = typename G::Element;
    const G* group;
    std::vector<Key> step;  // per symbol

    Key initial() const { return group->identity(); }
    Key apply(const Key& k, int sym) const { return group->multiply(k, step[sym]); }
};

template <class W>
struct WalkTable {
    std::vector<W> z;                   // z[n] for n = 0..n_max
    std::vector<std::size_t> ball;      // frontier size after each step
    std::vector<std::int64_t> wall_ms;  // per-step wall time
};

/// One merge-based DP step.  apply(., sym) is strictly monotone in the key
/// for the packed ops, so each per-symbol image stream of a sorted frontier
/// is itself sorted and a single S-way merge produces the next frontier.
/// Workers split the output key range; concatenation in worker order equals
/// the single-worker result exactly.
template <class Ops, class W>
void walk_step_monotone(const Ops& ops, int S, const std::vector<typename Ops::Key>& keys,
                        const std::vector<W>& vals, const std::vector<double>* symw,
                        std::vector<typename Ops::Key>& out_keys, std::vector<W>& out_vals,
                        int threads) {
    using Key = typename Ops::Key;
    std::size_t n = keys.size();
    auto merge_range = [&](const std::vector<std::size_t>& lo, const std::vector<std::size_t>& hi,
                           std::vector<Key>& okeys, std::vector<W>& ovals) {
        std::vector<std::size_t> pos = lo;
        std::vector<Key> cur(S);
        for (int s = 0; s < S; ++s)
            if (pos[s] < hi[s]) cur[s] = ops.apply(keys[pos[s]], s);
        for (;;) {
            bool any = false;
            Key m{};
            for (int s = 0; s < S; ++s)
                if (pos[s] < hi[s] && (!any || cur[s] < m)) {
                    m = cur[s];
                    any = true;
                }
            if (!any) break;
            W acc{};
            for (int s = 0; s < S; ++s)
                if (pos[s] < hi[s] && cur[s] == m) {
                    if constexpr (std::is_same_v<W, double>)
                        acc += vals[pos[s]] * (*symw)[s];
                    else
                        acc += vals[pos[s]];
                    ++pos[s];
                    if (pos[s] < hi[s]) cur[s] = ops.apply(keys[pos[s]], s);
                }
            okeys.push_back(m);
            ovals.push_back(std::move(acc));
        }
    };

    int workers = std::max(1, std::min<int>(threads, static_cast<int>(n / 4096) + 1));
    out_keys.clear();
    out_vals.clear();
    if (workers == 1) {
        std::vector<std::size_t> lo(S, 0), hi(S, n);
        merge_range(lo, hi, out_keys, out_vals);
        return;
    }
    // Output key-space boundaries; any choice of boundaries yields the same
    // concatenated output, so the split may depend on the worker count.
    std::vector<Key> bounds;
    for (int w = 1; w < workers; ++w) bounds.push_back(ops.apply(keys[n * w / workers], 0));
    std::sort(bounds.begin(), bounds.end());
    bounds.erase(std::unique(bounds.begin(), bounds.end()), bounds.end());
    int parts = static_cast<int>(bounds.size()) + 1;

    auto stream_lower = [&](int s, const Key& bound) {
        // first index i with apply(keys[i], s) >= bound
        std::size_t a = 0, b = n;
        while (a < b) {
            std::size_t mid = (a + b) / 2;
            if (ops.apply(keys[mid], s) < bound)
                a = mid + 1;
            else
                b = mid;
        }
        return a;
    };

    std::vector<std::vector<Key>> part_keys(parts);
    std::vector<std::vector<W>> part_vals(parts);
    std::vector<std::future<void>> futs;
    for (int p = 0; p < parts; ++p) {
        futs.push_back(std::async(std::launch::async, [&, p] {
            std::vector<std::size_t> lo(S), hi(S);
            for (int s = 0; s < S; ++s) {
                lo[s] = p == 0 ? 0 : stream_lower(s, bounds[p - 1]);
                hi[s] = p == parts - 1 ? n : stream_lower(s, bounds[p]);
            }
            merge_range(lo, hi, part_keys[p], part_vals[p]);
        }));
    }
    for (auto& f : futs) f.get();
    std::size_t total = 0;
    for (auto& pk : part_keys) total += pk.size();
    out_keys.reserve(total);
    out_vals.reserve(total);
    for (int p = 0; p < parts; ++p) {
        out_keys.insert(out_keys.end(), part_keys[p].begin(), part_keys[p].end());
        for (auto& v : part_vals[p]) out_vals.push_back(std::move(v));
    }
}

/// Sort-based DP step for ops without monotone apply (boxed elements).
template <class Ops, class W>
void walk_step_sorted(const Ops& ops, int S, const std::vector<typename Ops::Key>& keys,
                      const std::vector<W>& vals, const std::vector<double>* symw,
                      std::vector<typename Ops::Key>& out_keys, std::vector<W>& out_vals) {
    using Key = typename Ops::Key;
    struct Entry {
        Key k;
        std::uint32_t src;
        std::uint16_t sym;
    };
    std::vector<Entry> emission;
    emission.reserve(keys.size() * static_cast<std::size_t>(S));
    for (int s = 0; s < S; ++s)
        for (std::size_t i = 0; i < keys.size(); ++i)
            emission.push_back({ops.apply(keys[i], s), static_cast<std::uint32_t>(i),
                                static_cast<std::uint16_t>(s)});
    std::stable_sort(emission.begin(), emission.end(),
                     [](const Entry& a, const Entry& b) { return a.k < b.k; });
    out_keys.clear();
    out_vals.clear();
    std::size_t i = 0;
    while (i < emission.size()) {
        std::size_t j = i;
        W acc{};
        while (j < emission.size() && emission[j].k == emission[i].k) {
            if constexpr (std::is_same_v<W, double>)
                acc += vals[emission[j].src] * (*symw)[emission[j].sym];
            else
                acc += vals[emission[j].src];
            ++j;
        }
        out_keys.push_back(emission[i].k);
        out_vals.push_back(std::move(acc));
        i = j;
    }
}

template <class Ops, class W, bool Monotone>
WalkTable<W> walk_table(const Ops& ops, int S, int n_max, const std::vector<double>* symw,
                        std::size_t cap, int threads) {
    using Key = typename Ops::Key;
    WalkTable<W> table;
    table.z.assign(n_max + 1, W{});
    table.ball.assign(n_max + 1, 1);
    table.wall_ms.assign(n_max + 1, 0);
    if constexpr (std::is_same_v<W, double>)
        table.z[0] = 1.0;
    else
        table.z[0] = 1;

    std::vector<Key> keys{ops.initial()};
    std::vector<W> vals;
    vals.push_back(table.z[0]);
    std::vector<Key> nkeys;
    std::vector<W> nvals;
    Key id = ops.initial();
    for (int t = 1; t <= n_max; ++t) {
        auto t0 = std::chrono::steady_clock::now();
        if constexpr (Monotone)
            walk_step_monotone(ops, S, keys, vals, symw, nkeys, nvals, threads);
        else
            walk_step_sorted(ops, S, keys, vals, symw, nkeys, nvals);
        keys.swap(nkeys);
        vals.swap(nvals);
        if (keys.size() > cap)
            throw BallTooLarge("walk DP frontier has " + std::to_string(keys.size()) +
                               " states at step " + std::to_string(t) + ", exceeding the cap of " +
                               std::to_string(cap));
        auto it = std::lower_bound(keys.begin(), keys.end(), id);
        if (it != keys.end() && *it == id) table.z[t] = vals[it - keys.begin()];
        table.ball[t] = keys.size();
        table.wall_ms[t] = std::chrono::duration_cast<std::chrono::milliseconds>(
                               std::chrono::steady_clock::now() - t0)
                               .count();
    }
    return table;
}

// -------------------------------------------------------------------------
// Generic engine over (vertex, element) states with per-start-vertex rows.
// Used for systems without the full-shift first-symbol structure; state
// counts stay small there.  Norm pruning drops states that provably cannot
// return to the identity within the remaining steps.

template <GroupLike G, class W>
struct GenericFrontier {
    std::vector<std::pair<int, typename G::Element>> states;  // sorted
    std::vector<W> rows;                                      // states.size() * k, row-major
};

template <GroupLike G, class W>
GenericFrontier<G, W> generic_run(const SkewSystem<G>& sk, int n, const std::vector<double>* edge_logw,
                                  std::size_t cap, bool prune_to_identity = true) {
    using Elem = typename G::Element;
    int k = sk.base.alphabet_size();
    std::int64_t max_label_norm = 0;
    for (const auto& l : sk.labels)
        max_label_norm = std::max(max_label_norm, sk.group.norm_lower_bound(l));

    GenericFrontier<G, W> f;
    for (int v = 0; v < k; ++v) f.states.emplace_back(v, sk.group.identity());
    f.rows.assign(f.states.size() * static_cast<std::size_t>(k), W{});
    for (int v = 0; v < k; ++v) {
        if constexpr (std::is_same_v<W, double>)
            f.rows[static_cast<std::size_t>(v) * k + v] = 1.0;
        else
            f.rows[static_cast<std::size_t>(v) * k + v] = 1;
    }

    struct Entry {
        std::pair<int, Elem> state;
        std::uint32_t src;
        std::uint16_t edge;
    };
    std::vector<Entry> emission;
    for (int t = 1; t <= n; ++t) {
        emission.clear();
        std::int64_t budget = static_cast<std::int64_t>(n - t) * std::max<std::int64_t>(1, max_label_norm);
        for (std::size_t i = 0; i < f.states.size(); ++i) {
            auto [v, g] = f.states[i];
            for (int j = 0; j < k; ++j) {
                int e = sk.base.edge_index(v, j);
                if (e < 0) continue;
                Elem h = sk.group.multiply(g, sk.labels[e]);
                if (prune_to_identity && sk.group.norm_lower_bound(h) > budget) continue;
                emission.push_back({{j, std::move(h)}, static_cast<std::uint32_t>(i),
                                    static_cast<std::uint16_t>(e)});
            }
        }
        std::stable_sort(emission.begin(), emission.end(),
                         [](const Entry& a, const Entry& b) { return a.state < b.state; });
        GenericFrontier<G, W> nf;
        std::size_t i = 0;
        while (i < emission.size()) {
            std::size_t j = i;
            std::vector<W> row(k, W{});
            while (j < emission.size() && emission[j].state == emission[i].state) {
                const auto& en = emission[j];
                for (int s = 0; s < k; ++s) {
                    const W& w = f.rows[static_cast<std::size_t>(en.src) * k + s];
                    if constexpr (std::is_same_v<W, double>)
                        row[s] += w * std::exp((*edge_logw)[en.edge]);
                    else
                        row[s] += w;
                }
                ++j;
            }
            nf.states.push_back(emission[i].state);
            for (int s = 0; s < k; ++s) nf.rows.push_back(std::move(row[s]));
            i = j;
        }
        f = std::move(nf);
        if (f.states.size() > cap)
            throw BallTooLarge("DP frontier has " + std::to_string(f.states.size()) +
                               " states at step " + std::to_string(t) + ", exceeding the cap of " +
                               std::to_string(cap));
    }
    return f;
}

template <GroupLike G, class W>
W generic_count(const SkewSystem<G>& sk, int n, const std::vector<double>* edge_logw, std::size_t cap,
                std::size_t* ball_size = nullptr) {
    int k = sk.base.alphabet_size();
    auto f = generic_run<G, W>(sk, n, edge_logw, cap);
    if (ball_size) *ball_size = f.states.size();
    W total{};
    auto id = sk.group.identity();
    for (std::size_t i = 0; i < f.states.size(); ++i)
        if (f.states[i].second == id) total += f.rows[i * static_cast<std::size_t>(k) + f.states[i].first];
    return total;
}

/// Walk-mode selection: packed when the group is a rank <= 3 lattice or the
/// Heisenberg group and every coordinate provably stays inside the 21-bit
/// packed fields for n_max steps.
template <GroupLike G>
std::optional<PackedWalkOps> packed_walk_ops(const G& group,
                                             const std::vector<typename G::Element>& steps, int n_max) {
    PackedWalkOps ops;
    if constexpr (std::is_same_v<G, LatticeGroup>) {
        if (group.rank() > 3) return std::nullopt;
        ops.rank = group.rank();
        ops.heisenberg = false;
        std::int64_t mx = 0;
        for (const auto& s : steps) {
            std::array<std::int64_t, 3> d{0, 0, 0};
            for (int i = 0; i < group.rank(); ++i) d[i] = s[i];
            for (int i = 0; i < 3; ++i) mx = std::max(mx, std::abs(d[i]));
            ops.delta.push_back(d);
        }
        if (static_cast<std::int64_t>(n_max) * mx > kPackedFieldMax) return std::nullopt;
        return ops;
    } else if constexpr (std::is_same_v<G, HeisenbergGroup>) {
        ops.rank = 3;
        ops.heisenberg = true;
        std::int64_t mab = 0, mc = 0;
        for (const auto& s : steps) {
            ops.delta.push_back({s[0], s[1], s[2]});
            mab = std::max({mab, std::abs(s[0]), std::abs(s[1])});
            mc = std::max(mc, std::abs(s[2]));
        }
        std::int64_t nm = n_max;
        if (nm * mab > kPackedFieldMax) return std::nullopt;
        if (nm * mc + mab * mab * nm * (nm + 1) / 2 > kPackedFieldMax) return std::nullopt;
        return ops;
    } else {
        (void)steps;
        (void)n_max;
        return std::nullopt;
    }
}

}  // namespace detail

/// Result of counting trivial-holonomy periodic points for all n <= n_max.
struct CountTable {
    std::vector<BigInt> counts;          // counts[n], n = 0..n_max; counts[0] = 1
    std::vector<std::size_t> ball_sizes; // DP state-space size per n
    std::vector<std::int64_t> wall_ms;   // per-n wall time
};

struct WeightedCountTable {
    std::vector<double> counts;
    std::vector<std::size_t> ball_sizes;
    std::vector<std::int64_t> wall_ms;
};

/// Exact number of periodic points of period n with trivial holonomy,
/// for every n up to n_max.
template <GroupLike G>
CountTable count_trivial_table(const SkewSystem<G>& sk, int n_max, const CountOptions& opts = {}) {
    if (n_max < 1) throw Error("count_trivial_table requires n_max >= 1");
    int threads = detail::resolve_threads(opts.threads);
    CountTable out;
    auto per = detail::first_symbol_labels(sk);
    if (sk.base.is_full_shift() && per) {
        if (auto packed = detail::packed_walk_ops(sk.group, *per, n_max)) {
            auto t = detail::walk_table<detail::PackedWalkOps, BigInt, true>(
                *packed, sk.base.alphabet_size(), n_max, nullptr, opts.state_cap, threads);
            out.counts = std::move(t.z);
            out.ball_sizes = std::move(t.ball);
            out.wall_ms = std::move(t.wall_ms);
            return out;
        }
        detail::BoxedWalkOps<G> ops{&sk.group, *per};
        auto t = detail::walk_table<detail::BoxedWalkOps<G>, BigInt, false>(
            ops, sk.base.alphabet_size(), n_max, nullptr, opts.state_cap, threads);
        out.counts = std::move(t.z);
        out.ball_sizes = std::move(t.ball);
        out.wall_ms = std::move(t.wall_ms);
        return out;
    }
    out.counts.assign(n_max + 1, BigInt(0));
    out.counts[0] = 1;
    out.ball_sizes.assign(n_max + 1, 0);
    out.wall_ms.assign(n_max + 1, 0);
    for (int n = 1; n <= n_max; ++n) {
        auto t0 = std::chrono::steady_clock::now();
        std::size_t ball = 0;
        out.counts[n] = detail::generic_count<G, BigInt>(sk, n, nullptr, opts.state_cap, &ball);
        out.ball_sizes[n] = ball;
        out.wall_ms[n] =
            std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0)
                .count();
    }
    return out;
}

/// Exact count of trivial-holonomy periodic points of period n.
template <GroupLike G>
BigInt count_trivial(const SkewSystem<G>& sk, int n, const CountOptions& opts = {}) {
    if (n < 1) throw Error("count_trivial requires n >= 1");
    auto per = detail::first_symbol_labels(sk);
    if (sk.base.is_full_shift() && per) return count_trivial_table(sk, n, opts).counts[n];
    return detail::generic_count<G, BigInt>(sk, n, nullptr, opts.state_cap);
}

/// e^{f^n}-weighted trivial-holonomy sum Z_n(f); deterministic compensated
/// reduction in a fixed state order.
template <GroupLike G>
double count_trivial(const SkewSystem<G>& sk, int n, const EdgePotential& f,
                     const CountOptions& opts = {}) {
    if (n < 1) throw Error("count_trivial requires n >= 1");
    int threads = detail::resolve_threads(opts.threads);
    auto per = detail::first_symbol_labels(sk);
    auto perf = detail::first_symbol_values(sk.base, f);
    if (sk.base.is_full_shift() && per && perf) {
        std::vector<double> symw(perf->size());
        for (std::size_t i = 0; i < symw.size(); ++i) symw[i] = std::exp((*perf)[i]);
        if (auto packed = detail::packed_walk_ops(sk.group, *per, n)) {
            auto t = detail::walk_table<detail::PackedWalkOps, double, true>(
                *packed, sk.base.alphabet_size(), n, &symw, opts.state_cap, threads);
            return t.z[n];
        }
        detail::BoxedWalkOps<G> ops{&sk.group, *per};
        auto t = detail::walk_table<detail::BoxedWalkOps<G>, double, false>(
            ops, sk.base.alphabet_size(), n, &symw, opts.state_cap, threads);
        return t.z[n];
    }
    std::vector<double> logw(f.size());
    for (std::size_t e = 0; e < f.size(); ++e) logw[e] = f[static_cast<int>(e)];
    return detail::generic_count<G, double>(sk, n, &logw, opts.state_cap);
}

/// Weighted table for all n <= n_max.
template <GroupLike G>
WeightedCountTable count_trivial_table(const SkewSystem<G>& sk, int n_max, const EdgePotential& f,
                                       const CountOptions& opts = {}) {
    if (n_max < 1) throw Error("count_trivial_table requires n_max >= 1");
    int threads = detail::resolve_threads(opts.threads);
    WeightedCountTable out;
    auto per = detail::first_symbol_labels(sk);
    auto perf = detail::first_symbol_values(sk.base, f);
    if (sk.base.is_full_shift() && per && perf) {
        std::vector<double> symw(perf->size());
        for (std::size_t i = 0; i < symw.size(); ++i) symw[i] = std::exp((*perf)[i]);
        if (auto packed = detail::packed_walk_ops(sk.group, *per, n_max)) {
            auto t = detail::walk_table<detail::PackedWalkOps, double, true>(
                *packed, sk.base.alphabet_size(), n_max, &symw, opts.state_cap, threads);
            out.counts = std::move(t.z);
            out.ball_sizes = std::move(t.ball);
            out.wall_ms = std::move(t.wall_ms);
            return out;
        }
        detail::BoxedWalkOps<G> ops{&sk.group, *per};
        auto t = detail::walk_table<detail::BoxedWalkOps<G>, double, false>(
            ops, sk.base.alphabet_size(), n_max, &symw, opts.state_cap, threads);
        out.counts = std::move(t.z);
        out.ball_sizes = std::move(t.ball);
        out.wall_ms = std::move(t.wall_ms);
        return out;
    }
    out.counts.assign(n_max + 1, 0.0);
    out.counts[0] = 1.0;
    out.ball_sizes.assign(n_max + 1, 0);
    out.wall_ms.assign(n_max + 1, 0);
    std::vector<double> logw(f.size());
    for (std::size_t e = 0; e < f.size(); ++e) logw[e] = f[static_cast<int>(e)];
    for (int n = 1; n <= n_max; ++n) {
        auto t0 = std::chrono::steady_clock::now();
        std::size_t ball = 0;
        out.counts[n] = detail::generic_count<G, double>(sk, n, &logw, opts.state_cap, &ball);
        out.ball_sizes[n] = ball;
        out.wall_ms[n] =
            std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0)
                .count();
    }
    return out;
}

/// Counts of period-n points grouped by holonomy value.  Pruning is off:
/// every holonomy matters here, not only the identity.
template <GroupLike G>
std::map<typename G::Element, BigInt> count_by_holonomy(const SkewSystem<G>& sk, int n,
                                                        const CountOptions& opts = {}) {
    if (n < 1) throw Error("count_by_holonomy requires n >= 1");
    std::map<typename G::Element, BigInt> out;
    int k = sk.base.alphabet_size();
    auto f = detail::generic_run<G, BigInt>(sk, n, nullptr, opts.state_cap, false);
    for (std::size_t i = 0; i < f.states.size(); ++i) {
        const auto& [v, g] = f.states[i];
        BigInt w = f.rows[i * static_cast<std::size_t>(k) + v];
        if (w != 0) out[g] += w;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Transitivity.

namespace detail {

/// Visits every directed simple cycle exactly once as its vertex path
/// (v0, ..., vm) with closing edge (vm, v0); v0 is the minimal vertex.
template <class Visit>
void for_each_simple_cycle(const Sft& s, Visit&& visit) {
    int k = s.alphabet_size();
    std::vector<int> path;
    std::vector<char> onpath(static_cast<std::size_t>(k), 0);
    auto dfs = [&](auto&& self, int start, int v) -> void {
        for (int w = start; w < k; ++w) {
            if (!s.allowed(v, w)) continue;
            if (w == start)
                visit(path);
            else if (!onpath[w]) {
                onpath[w] = 1;
                path.push_back(w);
                self(self, start, w);
                path.pop_back();
                onpath[w] = 0;
            }
        }
    };
    for (int start = 0; start < k; ++start) {
        path.assign(1, start);
        std::fill(onpath.begin(), onpath.end(), 0);
        onpath[start] = 1;
        dfs(dfs, start, start);
    }
}

inline std::vector<std::vector<std::int64_t>> simple_cycle_holonomies(
    const SkewSystem<LatticeGroup>& sk) {
    std::vector<std::vector<std::int64_t>> out;
    int rank = sk.group.rank();
    for_each_simple_cycle(sk.base, [&](const std::vector<int>& path) {
        std::vector<std::int64_t> h(static_cast<std::size_t>(rank), 0);
        for (std::size_t i = 0; i < path.size(); ++i) {
            const auto& l = sk.label(path[i], path[(i + 1) % path.size()]);
            for (int c = 0; c < rank; ++c) h[c] += l[c];
        }
        out.push_back(std::move(h));
    });
    return out;
}

/// True iff the integer row span of `rows` is all of Z^rank, via triangular
/// gcd elimination (the pivot product is the sublattice index).
inline bool generates_full_lattice(std::vector<std::vector<std::int64_t>> rows, int rank) {
    if (rank == 0) return true;
    std::size_t r = 0;
    std::int64_t det = 1;
    for (int c = 0; c < rank; ++c) {
        for (;;) {
            std::size_t piv = rows.size();
            for (std::size_t i = r; i < rows.size(); ++i)
                if (rows[i][c] != 0 && (piv == rows.size() || std::abs(rows[i][c]) < std::abs(rows[piv][c])))
                    piv = i;
            if (piv == rows.size()) return false;  // rank deficiency
            std::swap(rows[r], rows[piv]);
            bool clean = true;
            for (std::size_t i = r + 1; i < rows.size(); ++i) {
                if (rows[i][c] == 0) continue;
                std::int64_t q = rows[i][c] / rows[r][c];
                for (int cc = 0; cc < rank; ++cc) rows[i][cc] -= q * rows[r][cc];
                if (rows[i][c] != 0) clean = false;
            }
            if (clean) break;
        }
        det *= rows[r][c];
        ++r;
    }
    return det == 1 || det == -1;
}

/// When the nonzero vectors of C all lie in a closed half-space
/// {x : <t, x> >= 0}, returns such a normal t; supports rank <= 3.
inline std::optional<std::vector<std::int64_t>> containing_halfspace(
    const std::vector<std::vector<std::int64_t>>& cycles, int rank) {
    std::vector<std::vector<std::int64_t>> c;
    for (const auto& v : cycles) {
        bool nonzero = false;
        for (auto x : v) nonzero = nonzero || x != 0;
        if (nonzero) c.push_back(v);
    }
    if (rank == 0) return std::nullopt;
    if (c.empty()) {
        std::vector<std::int64_t> t(static_cast<std::size_t>(rank), 0);
        t[0] = 1;
        return t;
    }
    auto dot = [&](const std::vector<std::int64_t>& t, const std::vector<std::int64_t>& v) {
        std::int64_t s = 0;
        for (int i = 0; i < rank; ++i) s += t[i] * v[i];
        return s;
    };
    auto feasible = [&](const std::vector<std::int64_t>& t) {
        bool nonzero = false;
        for (auto x : t) nonzero = nonzero || x != 0;
        if (!nonzero) return false;
        for (const auto& v : c)
            if (dot(t, v) < 0) return false;
        return true;
    };
    std::vector<std::vector<std::int64_t>> candidates;
    if (rank == 1) {
        candidates = {{1}, {-1}};
    } else if (rank == 2) {
        for (const auto& v : c) {
            candidates.push_back({-v[1], v[0]});
            candidates.push_back({v[1], -v[0]});
            candidates.push_back(v);
            candidates.push_back({-v[0], -v[1]});
        }
    } else if (rank == 3) {
        for (std::size_t i = 0; i < c.size(); ++i)
            for (std::size_t j = i + 1; j < c.size(); ++j) {
                std::vector<std::int64_t> t{c[i][1] * c[j][2] - c[i][2] * c[j][1],
                                            c[i][2] * c[j][0] - c[i][0] * c[j][2],
                                            c[i][0] * c[j][1] - c[i][1] * c[j][0]};
                candidates.push_back(t);
                candidates.push_back({-t[0], -t[1], -t[2]});
            }
    } else {
        throw Error("half-space test is implemented for lattice rank <= 3");
    }
    for (const auto& t : candidates)
        if (feasible(t)) return t;
    return std::nullopt;
}

inline std::string vec_to_string(const std::vector<std::int64_t>& v) {
    std::string s = "(";
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s + ")";
}

}  // namespace detail

/// Exact transitivity for lattice extensions: T is transitive iff the simple
/// cycle holonomies generate Z^a as a group and are not contained in a closed
/// half-space.
inline TransitivityResult check_transitivity(const SkewSystem<LatticeGroup>& sk, int depth = 0) {
    if (!irreducibility(sk.base).irreducible)
        throw NotIrreducible("check_transitivity requires an irreducible base");
    (void)depth;
    int rank = sk.group.rank();
    if (rank == 0) return {TransitivityResult::Kind::Transitive, "", 0};
    auto cycles = detail::simple_cycle_holonomies(sk);
    if (rank > 3)
        return {TransitivityResult::Kind::Unknown,
                "exact lattice transitivity is implemented for rank <= 3", 0};
    if (!detail::generates_full_lattice(cycles, rank))
        return {TransitivityResult::Kind::Intransitive,
                "cycle holonomies generate a proper subgroup of Z^" + std::to_string(rank), 0};
    if (auto t = detail::containing_halfspace(cycles, rank))
        return {TransitivityResult::Kind::Intransitive,
                "cycle holonomies lie in the closed half-space with normal " + detail::vec_to_string(*t),
                0};
    return {TransitivityResult::Kind::Transitive, "", 0};
}

/// Depth-bounded semi-decision for non-lattice groups: BFS over
/// (vertex, element) states from (0, e).  Transitive when every
/// (vertex, ball(depth/2)) state is reached; Intransitive when the reachable
/// set provably closes without covering them; Unknown otherwise.
template <GroupLike G>
    requires(!std::is_same_v<G, LatticeGroup>)
TransitivityResult check_transitivity(const SkewSystem<G>& sk, int depth = 8,
                                      const CountOptions& opts = {}) {
    if (!irreducibility(sk.base).irreducible)
        throw NotIrreducible("check_transitivity requires an irreducible base");
    using Elem = typename G::Element;
    int k = sk.base.alphabet_size();
    auto targets = ball(sk.group, depth / 2, opts.state_cap);

    std::set<std::pair<int, Elem>> seen;
    std::vector<std::pair<int, Elem>> frontier{{0, sk.group.identity()}};
    seen.insert(frontier[0]);
    bool closed = false;
    for (int d = 0; d < depth && !frontier.empty(); ++d) {
        std::vector<std::pair<int, Elem>> next;
        for (const auto& [v, g] : frontier)
            for (int j = 0; j < k; ++j) {
                int e = sk.base.edge_index(v, j);
                if (e < 0) continue;
                std::pair<int, Elem> st{j, sk.group.multiply(g, sk.labels[e])};
                if (seen.insert(st).second) next.push_back(std::move(st));
            }
        if (seen.size() > opts.state_cap)
            return {TransitivityResult::Kind::Unknown, "state cap exceeded during BFS", depth};
        frontier = std::move(next);
        if (frontier.empty()) closed = true;
    }
    std::string missing;
    bool covered = true;
    for (int v = 0; v < k && covered; ++v)
        for (const auto& g : targets)
            if (!seen.count({v, g})) {
                covered = false;
                missing = "state (" + std::to_string(v) + ", " + sk.group.describe(g) + ")";
                break;
            }
    if (covered && closed) return {TransitivityResult::Kind::Transitive, "", depth};
    if (covered) return {TransitivityResult::Kind::Transitive, "", depth};
    if (closed)
        return {TransitivityResult::Kind::Intransitive, missing + " is unreachable (orbit closure is finite)",
                depth};
    return {TransitivityResult::Kind::Unknown, missing + " not reached within depth", depth};
}

// ---------------------------------------------------------------------------
// Radial specialization for free-group walks.

namespace detail {

/// Walk-return counts on the Cayley tree of F_k: from distance d > 0 one
/// generator steps toward the identity and 2k-1 step away; from the identity
/// all 2k step away.  z[n] = closed walks of length n.
inline std::vector<BigInt> radial_free_counts(int free_rank, int n_max) {
    int twok = 2 * free_rank;
    std::vector<BigInt> cur(n_max + 2, BigInt(0)), nxt(n_max + 2, BigInt(0));
    cur[0] = 1;
    std::vector<BigInt> z(n_max + 1, BigInt(0));
    z[0] = 1;
    for (int t = 1; t <= n_max; ++t) {
        for (int d = 0; d <= t; ++d) {
            BigInt acc = cur[d + 1];  // one step toward the identity
            if (d == 1)
                acc += cur[0] * twok;
            else if (d >= 2)
                acc += cur[d - 1] * (twok - 1);
            nxt[d] = std::move(acc);
        }
        for (int d = t + 1; d <= n_max + 1; ++d) nxt[d] = 0;
        cur.swap(nxt);
        z[t] = cur[0];
    }
    return z;
}

/// Checks the radial preconditions: free group, full 2k-shift, labels by
/// first symbol forming exactly the generators and their inverses.
inline void require_radial_shape(const SkewSystem<FreeGroup>& sk) {
    int k2 = 2 * sk.group.rank();
    if (sk.base.alphabet_size() != k2 || !sk.base.is_full_shift())
        throw UnsupportedShape("radial counting requires the full " + std::to_string(k2) + "-shift");
    auto per = first_symbol_labels(sk);
    if (!per) throw UnsupportedShape("radial counting requires labels depending on the first symbol");
    std::vector<FreeGroup::Element> expected;
    for (int i = 1; i <= sk.group.rank(); ++i) {
        expected.push_back({static_cast<std::int32_t>(i)});
        expected.push_back({static_cast<std::int32_t>(-i)});
    }
    auto sorted = *per;
    std::sort(sorted.begin(), sorted.end());
    std::sort(expected.begin(), expected.end());
    if (sorted != expected)
        throw UnsupportedShape("radial counting requires each generator and inverse exactly once");
}

}  // namespace detail

/// Trivial-holonomy count for full-shift free-group walks via the
/// distance-from-identity recursion; O(n^2) time.
inline BigInt count_trivial_radial_free(const SkewSystem<FreeGroup>& sk, int n) {
    if (n < 1) throw Error("count_trivial_radial_free requires n >= 1");
    detail::require_radial_shape(sk);
    return detail::radial_free_counts(sk.group.rank(), n)[n];
}

inline CountTable count_trivial_radial_free_table(const SkewSystem<FreeGroup>& sk, int n_max) {
    if (n_max < 1) throw Error("count_trivial_radial_free_table requires n_max >= 1");
    detail::require_radial_shape(sk);
    CountTable out;
    auto t0 = std::chrono::steady_clock::now();
    out.counts = detail::radial_free_counts(sk.group.rank(), n_max);
    out.ball_sizes.assign(n_max + 1, 0);
    for (int nn = 0; nn <= n_max; ++nn) out.ball_sizes[nn] = static_cast<std::size_t>(nn) + 1;
    out.wall_ms.assign(n_max + 1, 0);
    out.wall_ms[n_max] =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0)
            .count();
    return out;
}

// ---------------------------------------------------------------------------
// Growth-rate estimation.

/// A fitted exponential growth law Z_n ~ C e^{rate n} n^{-kappa}.
struct GrowthEstimate {
    double rate = 0.0;
    double poly_exponent = 0.0;  // kappa
    int n_lo = 0, n_hi = 0;      // fit window
    double residual = 0.0;       // rms residual of the log fit
    std::vector<BigInt> counts;  // counts[n] for n = 0..n_max
};

namespace detail {

inline double log_big(const BigInt& z) {
    signed long exp2 = 0;
    double d = mpz_get_d_2exp(&exp2, z.get_mpz_t());
    return std::log(d) + static_cast<double>(exp2) * std::log(2.0);
}

/// Least squares for y = rate*n - kappa*log n + c.  Returns (rate, kappa, c)
/// and the rms residual.
inline std::array<double, 4> fit_rate_kappa(const std::vector<std::pair<double, double>>& pts) {
    double m[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
    double b[3] = {0, 0, 0};
    for (auto [n, y] : pts) {
        double row[3] = {n, -std::log(n), 1.0};
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) m[i][j] += row[i] * row[j];
            b[i] += row[i] * y;
        }
    }
    // Gaussian elimination with partial pivoting on the 3x3 normal system.
    int idx[3] = {0, 1, 2};
    for (int col = 0; col < 3; ++col) {
        int piv = col;
        for (int r = col + 1; r < 3; ++r)
            if (std::abs(m[idx[r]][col]) > std::abs(m[idx[piv]][col])) piv = r;
        std::swap(idx[col], idx[piv]);
        for (int r = col + 1; r < 3; ++r) {
            double factor = m[idx[r]][col] / m[idx[col]][col];
            for (int c = col; c < 3; ++c) m[idx[r]][c] -= factor * m[idx[col]][c];
            b[idx[r]] -= factor * b[idx[col]];
        }
    }
    double x[3];
    for (int col = 2; col >= 0; --col) {
        double acc = b[idx[col]];
        for (int c = col + 1; c < 3; ++c) acc -= m[idx[col]][c] * x[c];
        x[col] = acc / m[idx[col]][col];
    }
    double ss = 0.0;
    for (auto [n, y] : pts) {
        double r = y - (x[0] * n - x[1] * std::log(n) + x[2]);
        ss += r * r;
    }
    return {x[0], x[1], x[2], std::sqrt(ss / static_cast<double>(pts.size()))};
}

}  // namespace detail

/// Fits log Z_n = n*rate - kappa*log n + c over the n in [n_max/2, n_max]
/// with Z_n > 0.  Structural zeros (parity classes) are skipped.
template <GroupLike G>
GrowthEstimate estimate_gurevich(const SkewSystem<G>& sk, int n_max, const CountOptions& opts = {}) {
    CountTable table;
    if constexpr (std::is_same_v<G, FreeGroup>) {
        bool radial = true;
        try {
            detail::require_radial_shape(sk);
        } catch (const UnsupportedShape&) {
            radial = false;
        }
        table = radial ? count_trivial_radial_free_table(sk, n_max) : count_trivial_table(sk, n_max, opts);
    } else {
        table = count_trivial_table(sk, n_max, opts);
    }
    GrowthEstimate est;
    est.n_lo = (n_max + 1) / 2;
    est.n_hi = n_max;
    std::vector<std::pair<double, double>> pts;
    for (int n = est.n_lo; n <= est.n_hi; ++n)
        if (table.counts[n] > 0) pts.emplace_back(static_cast<double>(n), detail::log_big(table.counts[n]));
    if (pts.size() < 3) {
        bool any = false;
        for (int n = 1; n <= n_max; ++n) any = any || table.counts[n] > 0;
        throw AllZeroCounts(any ? "fewer than 3 nonzero counts in the fit window [" +
                                      std::to_string(est.n_lo) + ", " + std::to_string(est.n_hi) + "]"
                                : "all trivial-holonomy counts vanish up to n_max = " +
                                      std::to_string(n_max) +
                                      "; the extension is intransitive or structurally obstructed");
    }
    auto fit = detail::fit_rate_kappa(pts);
    est.rate = fit[0];
    est.poly_exponent = fit[1];
    est.residual = fit[3];
    est.counts = std::move(table.counts);
    return est;
}

// ---------------------------------------------------------------------------
// Truncated transfer operator.

/// log spectral radius of the weighted adjacency on (vertex, element) states
/// with the element restricted to ball(R); transitions leaving the ball are
/// deleted.  Monotone nondecreasing in R, and a lower bound for the
/// l^2-operator value.
template <GroupLike G>
double truncated_transfer_spr(const SkewSystem<G>& sk, const EdgePotential& f, int radius,
                              const CountOptions& opts = {}) {
    if (radius < 0) throw Error("truncated_transfer_spr requires radius >= 0");
    auto elems = ball(sk.group, radius, opts.state_cap);
    int k = sk.base.alphabet_size();
    std::size_t m = elems.size();
    auto elem_index = [&](const typename G::Element& g) -> std::int64_t {
        auto it = std::lower_bound(elems.begin(), elems.end(), g);
        if (it == elems.end() || !(*it == g)) return -1;
        return it - elems.begin();
    };
    detail::SparseMatrix mat;
    mat.n = static_cast<int>(m * k);
    mat.row_ptr.assign(mat.n + 1, 0);
    for (std::size_t gi = 0; gi < m; ++gi)
        for (int i = 0; i < k; ++i) {
            for (int j = 0; j < k; ++j) {
                int e = sk.base.edge_index(i, j);
                if (e < 0) continue;
                auto target = sk.group.multiply(elems[gi], sk.labels[e]);
                auto ti = elem_index(target);
                if (ti < 0) continue;
                mat.col.push_back(static_cast<int>(ti * k + j));
                mat.val.push_back(std::exp(f[e]));
            }
            mat.row_ptr[gi * k + i + 1] = static_cast<int>(mat.col.size());
        }
    return std::log(detail::perron(mat).lambda);
}

}  // namespace gurevich
