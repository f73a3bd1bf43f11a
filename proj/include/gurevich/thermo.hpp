#pragma once

#include <cmath>
#include <optional>
#include <tuple>
#include <vector>

#include "sft.hpp"

namespace gurevich {

/// A real weight per allowed transition.  Serves both as a potential f and,
/// when strictly positive, as a roof function r.  Values are indexed by the
/// owning shift's edge order.
class EdgePotential {
public:
    EdgePotential() = default;

    static EdgePotential constant(const Sft& s, double c) {
        EdgePotential p;
        p.v_.assign(static_cast<std::size_t>(s.edge_count()), c);
        return p;
    }

    static EdgePotential zero(const Sft& s) { return constant(s, 0.0); }

    /// Builds from (i, j, value) triples; edges not named take the default
    /// value when one is given, otherwise every edge must be covered.
    static EdgePotential from_triples(const Sft& s,
                                      const std::vector<std::tuple<int, int, double>>& triples,
                                      std::optional<double> default_value = std::nullopt) {
        EdgePotential p;
        p.v_.assign(static_cast<std::size_t>(s.edge_count()),
                    default_value.value_or(std::numeric_limits<double>::quiet_NaN()));
        std::vector<char> set(s.edge_count(), default_value.has_value() ? 1 : 0);
        for (auto [i, j, val] : triples) {
            if (i < 0 || i >= s.alphabet_size() || j < 0 || j >= s.alphabet_size())
                throw ValidationError("potential entry (" + std::to_string(i) + ", " + std::to_string(j) +
                                      ") is outside the alphabet");
            int e = s.edge_index(i, j);
            if (e < 0)
                throw ValidationError("potential entry on forbidden transition (" + std::to_string(i) +
                                      ", " + std::to_string(j) + ")");
            p.v_[e] = val;
            set[e] = 1;
        }
        for (int e = 0; e < s.edge_count(); ++e)
            if (!set[e])
                throw ValidationError("potential misses edge (" + std::to_string(s.edges()[e].first) +
                                      ", " + std::to_string(s.edges()[e].second) +
                                      ") and no default value was given");
        return p;
    }

    double operator[](int edge) const { return v_[edge]; }
    double& operator[](int edge) { return v_[edge]; }
    std::size_t size() const { return v_.size(); }

    double min_value() const {
        double m = std::numeric_limits<double>::infinity();
        for (double x : v_) m = std::min(m, x);
        return m;
    }
    double max_value() const {
        double m = -std::numeric_limits<double>::infinity();
        for (double x : v_) m = std::max(m, x);
        return m;
    }
    double max_abs() const { return std::max(std::abs(min_value()), std::abs(max_value())); }

    bool operator==(const EdgePotential& o) const { return v_ == o.v_; }

private:
    std::vector<double> v_;
};

/// A stationary Markov measure: probability vector over symbols plus a
/// row-stochastic kernel supported on the allowed transitions.
struct MarkovMeasure {
    int alphabet_size = 0;
    std::vector<double> stationary;  // size k
    std::vector<double> kernel;      // k*k row-major; zero off the allowed edges

    double p(int i) const { return stationary[i]; }
    double P(int i, int j) const { return kernel[static_cast<std::size_t>(i) * alphabet_size + j]; }
    /// Mass of the 2-cylinder [i j].
    double edge_mass(int i, int j) const { return p(i) * P(i, j); }
};

namespace detail {

inline SparseMatrix weighted_matrix(const Sft& s, const EdgePotential& f) {
    int k = s.alphabet_size();
    SparseMatrix m;
    m.n = k;
    m.row_ptr.assign(k + 1, 0);
    for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j)
            if (s.allowed(i, j)) {
                m.col.push_back(j);
                m.val.push_back(std::exp(f[s.edge_index(i, j)]));
            }
        m.row_ptr[i + 1] = static_cast<int>(m.col.size());
    }
    return m;
}

inline SparseMatrix transpose(const SparseMatrix& m) {
    SparseMatrix t;
    t.n = m.n;
    t.row_ptr.assign(m.n + 1, 0);
    for (int c : m.col) ++t.row_ptr[c + 1];
    for (int i = 0; i < m.n; ++i) t.row_ptr[i + 1] += t.row_ptr[i];
    t.col.resize(m.col.size());
    t.val.resize(m.val.size());
    std::vector<int> cursor(t.row_ptr.begin(), t.row_ptr.end() - 1);
    for (int i = 0; i < m.n; ++i)
        for (int p = m.row_ptr[i]; p < m.row_ptr[i + 1]; ++p) {
            int pos = cursor[m.col[p]]++;
            t.col[pos] = i;
            t.val[pos] = m.val[p];
        }
    return t;
}

inline void require_aperiodic(const Sft& s, const char* op) {
    auto irr = irreducibility(s);
    if (!irr.irreducible)
        throw NotAperiodic(std::string(op) + " requires an aperiodic shift (matrix is not irreducible)");
    if (irr.period != 1)
        throw NotAperiodic(std::string(op) + " requires an aperiodic shift (period " +
                           std::to_string(irr.period) + ")");
}

}  // namespace detail

/// Pressure of a locally constant potential: log of the Perron eigenvalue of
/// M(i,j) = A(i,j) e^{f(i,j)}.
inline double pressure(const Sft& s, const EdgePotential& f) {
    detail::require_aperiodic(s, "pressure");
    return std::log(detail::perron(detail::weighted_matrix(s, f)).lambda);
}

/// The equilibrium state of f as an explicit Markov measure, built from the
/// Perron data of the weighted matrix: P(i,j) = M(i,j) v_j / (lambda v_i),
/// stationary vector p_i proportional to u_i v_i.
inline MarkovMeasure equilibrium_measure(const Sft& s, const EdgePotential& f) {
    detail::require_aperiodic(s, "equilibrium_measure");
    int k = s.alphabet_size();
    auto m = detail::weighted_matrix(s, f);
    auto right = detail::perron(m);
    auto left = detail::perron(detail::transpose(m));
    const auto& v = right.right;
    const auto& u = left.right;
    double lambda = right.lambda;

    MarkovMeasure mm;
    mm.alphabet_size = k;
    mm.kernel.assign(static_cast<std::size_t>(k) * k, 0.0);
    for (int i = 0; i < k; ++i) {
        double row = 0.0;
        for (int p = m.row_ptr[i]; p < m.row_ptr[i + 1]; ++p) {
            int j = m.col[p];
            double val = m.val[p] * v[j] / (lambda * v[i]);
            mm.kernel[static_cast<std::size_t>(i) * k + j] = val;
            row += val;
        }
        for (int j = 0; j < k; ++j) mm.kernel[static_cast<std::size_t>(i) * k + j] /= row;
    }
    mm.stationary.assign(k, 0.0);
    double total = 0.0;
    for (int i = 0; i < k; ++i) {
        mm.stationary[i] = u[i] * v[i];
        total += mm.stationary[i];
    }
    for (int i = 0; i < k; ++i) mm.stationary[i] /= total;
    return mm;
}

/// Shannon entropy rate of a stationary Markov measure, with 0 log 0 = 0.
inline double measure_entropy(const MarkovMeasure& mm) {
    double h = 0.0;
    int k = mm.alphabet_size;
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) {
            double w = mm.edge_mass(i, j);
            if (w > 0.0) h -= w * std::log(mm.P(i, j));
        }
    return h;
}

/// Integral of an edge function against the 2-cylinder marginal.
inline double integrate_edge(const Sft& s, const MarkovMeasure& mm, const EdgePotential& g) {
    double acc = 0.0;
    for (int e = 0; e < s.edge_count(); ++e) {
        auto [i, j] = s.edges()[e];
        acc += mm.edge_mass(i, j) * g[e];
    }
    return acc;
}

/// Componentwise integral of a vector-valued edge function; component c of
/// edge e is values[e][c].
inline std::vector<double> integrate_edge_vector(const Sft& s, const MarkovMeasure& mm,
                                                 const std::vector<std::vector<double>>& values) {
    if (values.empty()) return {};
    std::size_t dim = values[0].size();
    std::vector<double> acc(dim, 0.0);
    for (int e = 0; e < s.edge_count(); ++e) {
        auto [i, j] = s.edges()[e];
        double w = mm.edge_mass(i, j);
        for (std::size_t c = 0; c < dim; ++c) acc[c] += w * values[e][c];
    }
    return acc;
}

/// The unique s* with pressure(-s* r + f) = 0, for a strictly positive roof.
/// Bisection to absolute tolerance 1e-10; the initial bracket comes from the
/// bound P(-s r + f) in [h + min f - s max r, h + max f - s min r].
inline double pressure_root(const Sft& s, const EdgePotential& roof, const EdgePotential* offset = nullptr) {
    if (roof.min_value() <= 0.0) throw ValidationError("pressure_root requires a strictly positive roof");
    detail::require_aperiodic(s, "pressure_root");
    EdgePotential f = offset ? *offset : EdgePotential::zero(s);
    double h = topological_entropy(s);
    double bound = (f.max_abs() + std::abs(h)) / roof.min_value() + 1.0;

    auto eval = [&](double t) {
        EdgePotential g = f;
        for (std::size_t e = 0; e < g.size(); ++e) g[e] -= t * roof[static_cast<int>(e)];
        return pressure(s, g);
    };
    double lo = -bound, hi = bound;
    double plo = eval(lo), phi = eval(hi);
    if (!(plo > 0.0 && phi < 0.0))
        throw BracketFailure("no sign change of s -> P(-s r + f) on [" + std::to_string(lo) + ", " +
                             std::to_string(hi) + "]");
    while (hi - lo > 1e-10) {
        double mid = 0.5 * (lo + hi);
        if (eval(mid) > 0.0)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace gurevich
