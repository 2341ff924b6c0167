#pragma once
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

#include "rcslab/geometry.hpp"
#include "rcslab/unionfind.hpp"

namespace rcslab {

inline constexpr u32 ENUM_EDGE_CAP = 24;

struct ModelParams {
    double p = 0.5;
    double q = 1.0;
    bool wired = false;
    std::vector<double> edge_p;  // when non-empty, per-edge probabilities override p

    double prob_of_edge(u32 e) const { return edge_p.empty() ? p : edge_p[e]; }
};

using BondConfig = std::vector<u8>;

inline BondConfig config_from_bits(u64 bits, u32 edge_count) {
    BondConfig c(edge_count, 0);
    for (u32 e = 0; e < edge_count; ++e) c[e] = (bits >> e) & 1;
    return c;
}

inline u64 bits_from_config(const BondConfig& c) {
    u64 b = 0;
    for (u32 e = 0; e < c.size(); ++e)
        if (c[e]) b |= (u64)1 << e;
    return b;
}

// Cluster count of an edge configuration; wired merges every boundary
// vertex through a ghost (clusters touching the boundary count as one).
inline u32 cluster_count(const Graph& g, const BondConfig& open, bool wired) {
    UnionFind uf(g.n + (wired ? 1 : 0));
    u32 ghost = g.n;
    for (u32 e = 0; e < g.edges.size(); ++e)
        if (open[e]) uf.unite(g.edges[e].first, g.edges[e].second);
    if (wired)
        for (u32 v = 0; v < g.n; ++v)
            if (g.on_boundary[v]) uf.unite(v, ghost);
    return (u32)uf.components();
}

inline u32 cluster_count_bits(const Graph& g, u64 bits, bool wired) {
    return cluster_count(g, config_from_bits(bits, g.edge_count()), wired);
}

inline double config_weight(const Graph& g, const ModelParams& mp, const BondConfig& open) {
    double w = 1.0;
    for (u32 e = 0; e < g.edges.size(); ++e) {
        double pe = mp.prob_of_edge(e);
        w *= open[e] ? pe : 1.0 - pe;
    }
    u32 k = cluster_count(g, open, mp.wired);
    return w * std::pow(mp.q, (double)k);
}

inline void check_enumerable(const Graph& g) {
    if (g.edge_count() > ENUM_EDGE_CAP)
        throw std::length_error("graph has " + std::to_string(g.edge_count()) +
                                " edges; exact enumeration is capped at " + std::to_string(ENUM_EDGE_CAP));
}

inline double partition_function(const Graph& g, const ModelParams& mp) {
    check_enumerable(g);
    double z = 0;
    u64 total = (u64)1 << g.edge_count();
    for (u64 b = 0; b < total; ++b) z += config_weight(g, mp, config_from_bits(b, g.edge_count()));
    return z;
}

inline double exact_event_probability(const Graph& g, const ModelParams& mp,
                                      const std::function<bool(u64)>& event) {
    check_enumerable(g);
    double z = 0, hit = 0;
    u64 total = (u64)1 << g.edge_count();
    for (u64 b = 0; b < total; ++b) {
        double w = config_weight(g, mp, config_from_bits(b, g.edge_count()));
        z += w;
        if (event(b)) hit += w;
    }
    return hit / z;
}

inline double exact_expectation(const Graph& g, const ModelParams& mp,
                                const std::function<double(u64)>& f) {
    check_enumerable(g);
    double z = 0, acc = 0;
    u64 total = (u64)1 << g.edge_count();
    for (u64 b = 0; b < total; ++b) {
        double w = config_weight(g, mp, config_from_bits(b, g.edge_count()));
        z += w;
        acc += w * f(b);
    }
    return acc / z;
}

// connectivity inside one configuration given as a bit mask
inline bool connected_bits(const Graph& g, u64 bits, u32 x, u32 y) {
    if (x == y) return true;
    std::vector<u8> seen(g.n, 0);
    std::vector<u32> stack{x};
    seen[x] = 1;
    while (!stack.empty()) {
        u32 v = stack.back();
        stack.pop_back();
        for (u32 h = g.adj_off[v]; h < g.adj_off[v + 1]; ++h) {
            if (!((bits >> g.adj_edge[h]) & 1)) continue;
            u32 w = g.adj_vert[h];
            if (seen[w]) continue;
            if (w == y) return true;
            seen[w] = 1;
            stack.push_back(w);
        }
    }
    return false;
}

// Hamming distance to an event, tabulated for every configuration by a
// breadth-first sweep of the edge-flip hypercube.
inline std::vector<u8> hamming_table(u32 edge_count, const std::vector<u8>& in_event) {
    u64 total = (u64)1 << edge_count;
    if (in_event.size() != total) throw std::invalid_argument("event table size mismatch");
    std::vector<u8> dist(total, 0xFF);
    std::queue<u64> bfs;
    for (u64 b = 0; b < total; ++b)
        if (in_event[b]) {
            dist[b] = 0;
            bfs.push(b);
        }
    if (bfs.empty()) throw std::invalid_argument("Hamming distance to the empty event is undefined");
    while (!bfs.empty()) {
        u64 b = bfs.front();
        bfs.pop();
        for (u32 e = 0; e < edge_count; ++e) {
            u64 nb = b ^ ((u64)1 << e);
            if (dist[nb] == 0xFF) {
                dist[nb] = dist[b] + 1;
                bfs.push(nb);
            }
        }
    }
    return dist;
}

inline double exact_hamming_expectation(const Graph& g, const ModelParams& mp,
                                        const std::vector<u8>& in_event) {
    check_enumerable(g);
    auto dist = hamming_table(g.edge_count(), in_event);
    double z = 0, acc = 0;
    for (u64 b = 0; b < dist.size(); ++b) {
        double w = config_weight(g, mp, config_from_bits(b, g.edge_count()));
        z += w;
        acc += w * dist[b];
    }
    return acc / z;
}

// single-bit-flip scan: is the tabulated event monotone increasing?
inline bool is_increasing_event(u32 edge_count, const std::vector<u8>& in_event) {
    u64 total = (u64)1 << edge_count;
    for (u64 b = 0; b < total; ++b)
        if (in_event[b])
            for (u32 e = 0; e < edge_count; ++e)
                if (!in_event[b | ((u64)1 << e)]) return false;
    return true;
}

// ---- Potts side ----

// spin inner product: 1 on equal colors, -1/(q-1) otherwise
inline double potts_dot(u32 a, u32 b, u32 q) { return a == b ? 1.0 : -1.0 / (double)(q - 1); }

inline double es_p_of_beta(double beta, double q) {
    return 1.0 - std::exp(-q * beta / (q - 1.0));
}

// E[sigma_x . sigma_y] under the q-color Potts measure with coupling beta,
// free boundary, by enumeration of all q^n spin configurations.
inline double exact_potts_two_point(const Graph& g, u32 q, double beta, u32 x, u32 y) {
    if (q < 2) throw std::invalid_argument("Potts needs q >= 2");
    double states = std::pow((double)q, (double)g.n);
    if (states > 2e7) throw std::length_error("too many spin states to enumerate");
    std::vector<u32> sigma(g.n, 0);
    double z = 0, num = 0;
    while (true) {
        double h = 0;
        for (auto& e : g.edges) h -= potts_dot(sigma[e.first], sigma[e.second], q);
        double w = std::exp(-beta * h);
        z += w;
        num += w * potts_dot(sigma[x], sigma[y], q);
        u32 i = 0;
        while (i < g.n && ++sigma[i] == q) sigma[i++] = 0;
        if (i == g.n) break;
    }
    return num / z;
}

// ---- builtin graphs for oracle-vs-sampler tests ----

inline Graph plain_graph(u32 n, std::vector<std::pair<u32, u32>> edges) {
    Graph g;
    g.n = n;
    g.edges = std::move(edges);
    g.on_boundary.assign(n, 1);  // every vertex is exposed on these tiny graphs
    g.build_adjacency();
    return g;
}

inline Graph builtin_graph(const std::string& name) {
    if (name == "edge1") return plain_graph(2, {{0, 1}});
    if (name == "path3") return plain_graph(3, {{0, 1}, {1, 2}});
    if (name == "triangle") return plain_graph(3, {{0, 1}, {0, 2}, {1, 2}});
    if (name == "square4") return plain_graph(4, {{0, 1}, {1, 2}, {2, 3}, {0, 3}});
    if (name == "diag5") return plain_graph(4, {{0, 1}, {0, 2}, {1, 2}, {2, 3}, {0, 3}});
    if (name == "k4") return plain_graph(4, {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}});
    if (name == "slab21k2") return build_slab({0, 1, 0, 0}, fiber_k2()).g;
    if (name == "ladder23") return build_slab({0, 2, 0, 0}, fiber_k2()).g;
    if (name == "slab22k2") return build_slab({0, 1, 0, 1}, fiber_k2()).g;
    if (name == "grid33") return build_slab({0, 2, 0, 2}, fiber_trivial()).g;
    throw std::invalid_argument("unknown builtin graph: " + name);
}

inline const std::vector<std::string>& builtin_graph_names() {
    static const std::vector<std::string> names = {
        "edge1", "path3", "triangle", "square4", "diag5",
        "k4", "slab21k2", "ladder23", "slab22k2", "grid33",
    };
    return names;
}

// ---- exhaustive monotone-event machinery (graphs with <= 6 edges) ----
//
// An increasing event on k+1 edges is a pair of increasing events (A0, A1)
// on k edges with A0 a subset of A1 (slices by the state of the last edge),
// so the full list doubles up from one edge. Events are stored as bitmask
// tables over the 2^E configurations.
inline std::vector<u64> all_increasing_events(u32 edge_count) {
    if (edge_count > 6) throw std::length_error("monotone-event enumeration capped at 6 edges");
    std::vector<u64> cur{0, 1};
    for (u32 k = 0; k < edge_count; ++k) {
        u64 width = (u64)1 << k;
        std::vector<u64> next;
        for (u64 hi : cur)
            for (u64 lo : cur)
                if ((lo & ~hi) == 0) next.push_back(lo | (hi << width));
        cur.swap(next);
    }
    return cur;
}

struct MaskWeights {
    double w[64] = {};
    double lut[8][256];  // per-byte partial sums for fast mask-restricted totals
    double z = 0;

    void build() {
        z = 0;
        for (int i = 0; i < 64; ++i) z += w[i];
        for (int blk = 0; blk < 8; ++blk)
            for (int pat = 0; pat < 256; ++pat) {
                double s = 0;
                for (int bit = 0; bit < 8; ++bit)
                    if (pat & (1 << bit)) s += w[8 * blk + bit];
                lut[blk][pat] = s;
            }
    }
    double sum(u64 mask) const {
        double s = 0;
        for (int blk = 0; blk < 8; ++blk) s += lut[blk][(mask >> (8 * blk)) & 0xFF];
        return s;
    }
    double prob(u64 mask) const { return sum(mask) / z; }
};

inline MaskWeights mask_weights(const Graph& g, const ModelParams& mp) {
    if (g.edge_count() > 6) throw std::length_error("mask weights need <= 6 edges");
    MaskWeights mw;
    u64 total = (u64)1 << g.edge_count();
    for (u64 b = 0; b < total; ++b) mw.w[b] = config_weight(g, mp, config_from_bits(b, g.edge_count()));
    mw.build();
    return mw;
}

struct HypercubeShifts {
    u32 edge_count;
    u64 full;
    u64 lo_mask[6];  // configurations in which edge e is closed

    explicit HypercubeShifts(u32 E) : edge_count(E) {
        if (E > 6) throw std::length_error("bit-parallel hypercube capped at 6 edges");
        u64 total = (u64)1 << E;
        full = (total == 64) ? ~0ULL : (((u64)1 << total) - 1);
        for (u32 e = 0; e < E; ++e) {
            lo_mask[e] = 0;
            for (u64 b = 0; b < total; ++b)
                if (!((b >> e) & 1)) lo_mask[e] |= (u64)1 << b;
        }
    }

    u64 grow(u64 m) const {  // one Hamming step in every direction
        u64 out = m;
        for (u32 e = 0; e < edge_count; ++e) {
            u64 step = (u64)1 << e;  // flipping edge e moves a config index by 2^e
            out |= (m & lo_mask[e]) << step;
            out |= (m & ~lo_mask[e]) >> step;
        }
        return out;
    }
};

// Integrated differential-inequality suite over every increasing event (and
// every decreasing one, via complements): the two Hamming exponential bounds
// plus the distance-to-event bound with a constant depending on (p, p', q).
struct InequalityReport {
    u64 events_checked = 0;
    u64 violations = 0;
    double worst_margin = 1e300;  // min over checks of (slack), negative = violation
    std::string first_violation;
};

inline InequalityReport verify_inequalities(const Graph& g, double p, double pp, double q,
                                            const std::vector<u32>& ks) {
    if (!(0 < p && p < pp && pp < 1)) throw std::invalid_argument("need 0 < p < p' < 1");
    ModelParams mp_lo{p, q, false, {}};
    ModelParams mp_hi{pp, q, false, {}};
    MaskWeights wl = mask_weights(g, mp_lo);
    MaskWeights wh = mask_weights(g, mp_hi);
    HypercubeShifts hs(g.edge_count());
    double bigC = q * q * (1 - p) / ((pp - p) * (pp + q * (1 - p)));
    auto events = all_increasing_events(g.edge_count());

    InequalityReport rep;
    auto note = [&](double slack, const char* what, u64 ev) {
        if (slack < rep.worst_margin) rep.worst_margin = slack;
        if (slack < -1e-12) {
            ++rep.violations;
            if (rep.first_violation.empty())
                rep.first_violation = std::string(what) + " event mask " + std::to_string(ev);
        }
    };

    for (u64 A : events) {
        if (A == 0) continue;  // Hamming distance to the empty event is undefined
        ++rep.events_checked;

        // layer masks: L[t] = configurations within Hamming distance t of A
        double phiA_lo = wl.prob(A), phiA_hi = wh.prob(A);
        double expHA_hi = 0;
        {
            u64 layer = A;
            std::vector<double> cum_lo;
            while (true) {
                expHA_hi += 1.0 - wh.prob(layer);
                cum_lo.push_back(wl.prob(layer));
                if (layer == hs.full) break;
                layer = hs.grow(layer);
            }
            // increasing bound: phi_{p'}(A) >= phi_p(A) exp(4 (p'-p) E_{p'}[H_A])
            double rhs = phiA_lo * std::exp(4 * (pp - p) * expHA_hi);
            note(phiA_hi - rhs, "hamming-increasing", A);
            // distance bound: phi_p(H_A <= k) <= C^k phi_{p'}(A)
            for (u32 k : ks) {
                double lhs = k < cum_lo.size() ? cum_lo[k] : 1.0;
                note(std::pow(bigC, (double)k) * phiA_hi - lhs, "distance-bound", A);
            }
        }

        // the complement is decreasing: phi_{p'}(D) <= phi_p(D) exp(-4 (p'-p) E_p[H_D])
        u64 D = ~A & hs.full;
        if (D != 0) {
            double phiD_lo = wl.prob(D), phiD_hi = wh.prob(D);
            double expHD_lo = 0;
            u64 layer = D;
            while (true) {
                expHD_lo += 1.0 - wl.prob(layer);
                if (layer == hs.full) break;
                layer = hs.grow(layer);
            }
            double rhs = phiD_lo * std::exp(-4 * (pp - p) * expHD_lo);
            note(rhs - phiD_hi, "hamming-decreasing", A);
        }
    }
    return rep;
}

} // namespace rcslab
