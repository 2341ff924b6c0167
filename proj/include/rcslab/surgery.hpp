#pragma once
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rcslab/connectivity.hpp"
#include "rcslab/dynamics.hpp"
#include "rcslab/exact.hpp"
#include "rcslab/geometry.hpp"
#include "rcslab/rng.hpp"

namespace rcslab {

// Total order on oriented edges. Orientation 0 traverses the stored edge
// low vertex -> high vertex, orientation 1 the reverse.
struct EdgeOrdering {
    std::vector<u32> rank;  // size 2E

    u32 rank_of(const Graph& g, u32 e, u32 tail) const {
        return rank[2 * e + (tail == g.edges[e].first ? 0 : 1)];
    }
};

inline EdgeOrdering canonical_ordering(const Graph& g) {
    EdgeOrdering o;
    o.rank.resize(2 * g.edge_count());
    std::iota(o.rank.begin(), o.rank.end(), 0);
    return o;
}

inline EdgeOrdering random_ordering(const Graph& g, Rng& rng) {
    EdgeOrdering o = canonical_ordering(g);
    for (std::size_t i = o.rank.size(); i > 1; --i) std::swap(o.rank[i - 1], o.rank[rng.below(i)]);
    return o;
}

struct Path {
    std::vector<u32> verts;
    std::vector<u32> eids;  // eids[k] joins verts[k] and verts[k+1]
    bool found = false;

    std::vector<u32> rank_seq(const Graph& g, const EdgeOrdering& ord) const {
        std::vector<u32> r(eids.size());
        for (std::size_t k = 0; k < eids.size(); ++k) r[k] = ord.rank_of(g, eids[k], verts[k]);
        return r;
    }
};

// lexicographic on rank sequences, a strict prefix preceding its extensions
inline int cmp_rank_seq(const std::vector<u32>& a, const std::vector<u32>& b) {
    for (std::size_t k = 0; k < a.size() && k < b.size(); ++k) {
        if (a[k] != b[k]) return a[k] < b[k] ? -1 : 1;
    }
    if (a.size() == b.size()) return 0;
    return a.size() < b.size() ? -1 : 1;
}

inline u32 edge_between(const Graph& g, u32 u, u32 v) {
    for (u32 h = g.adj_off[u]; h < g.adj_off[u + 1]; ++h)
        if (g.adj_vert[h] == v) return g.adj_edge[h];
    return NPOS32;
}

namespace detail {
// is there an open path w -> target using only unblocked D-vertices?
inline bool reach(const Graph& g, const BondConfig& open, u32 w, const std::vector<u8>& target,
                  const std::vector<u8>* D, const std::vector<u8>& blocked) {
    if (target[w]) return true;
    std::vector<u8> seen(g.n, 0);
    std::vector<u32> stack{w};
    seen[w] = 1;
    while (!stack.empty()) {
        u32 v = stack.back();
        stack.pop_back();
        for (u32 h = g.adj_off[v]; h < g.adj_off[v + 1]; ++h) {
            if (!open[g.adj_edge[h]]) continue;
            u32 x = g.adj_vert[h];
            if (seen[x] || blocked[x]) continue;
            if (D && !(*D)[x]) continue;
            if (target[x]) return true;
            seen[x] = 1;
            stack.push_back(x);
        }
    }
    return false;
}
} // namespace detail

// The minimal open self-avoiding path from a vertex of `from` to a vertex of
// `to` inside D, in the order induced by `ord` on oriented-edge sequences.
// Greedy: at each step take the least-ranked edge that still admits a
// completion; a realized arrival beats every extension.
inline Path lex_min_open_path(const Graph& g, const BondConfig& open, const EdgeOrdering& ord,
                              const std::vector<u8>* D, const std::vector<u32>& from,
                              const std::vector<u32>& to) {
    Path p;
    std::vector<u8> tgt(g.n, 0);
    for (u32 v : to)
        if (!D || (*D)[v]) tgt[v] = 1;

    u32 best0 = NPOS32;
    for (u32 v : from)
        if ((!D || (*D)[v]) && tgt[v]) best0 = std::min(best0, v);
    if (best0 != NPOS32) {
        p.verts = {best0};
        p.found = true;
        return p;
    }

    std::vector<u8> blocked(g.n, 0);
    struct Cand {
        u32 rank, v, w, e;
        bool operator<(const Cand& o) const { return rank < o.rank; }
    };
    std::vector<Cand> cands;
    std::vector<u8> in_from(g.n, 0);
    for (u32 v : from)
        if (!D || (*D)[v]) in_from[v] = 1;
    for (u32 v = 0; v < g.n; ++v) {
        if (!in_from[v]) continue;
        for (u32 h = g.adj_off[v]; h < g.adj_off[v + 1]; ++h) {
            u32 e = g.adj_edge[h];
            if (!open[e]) continue;
            u32 w = g.adj_vert[h];
            if (D && !(*D)[w]) continue;
            cands.push_back({ord.rank_of(g, e, v), v, w, e});
        }
    }
    std::sort(cands.begin(), cands.end());
    for (const Cand& c : cands) {
        blocked[c.v] = 1;
        if (tgt[c.w] || detail::reach(g, open, c.w, tgt, D, blocked)) {
            p.verts = {c.v, c.w};
            p.eids = {c.e};
            break;
        }
        blocked[c.v] = 0;
    }
    if (p.verts.empty()) return p;

    blocked.assign(g.n, 0);
    blocked[p.verts[0]] = 1;
    while (!tgt[p.verts.back()]) {
        u32 u = p.verts.back();
        blocked[u] = 1;
        cands.clear();
        for (u32 h = g.adj_off[u]; h < g.adj_off[u + 1]; ++h) {
            u32 e = g.adj_edge[h];
            if (!open[e]) continue;
            u32 w = g.adj_vert[h];
            if (blocked[w]) continue;
            if (D && !(*D)[w]) continue;
            cands.push_back({ord.rank_of(g, e, u), u, w, e});
        }
        std::sort(cands.begin(), cands.end());
        bool advanced = false;
        for (const Cand& c : cands) {
            if (tgt[c.w] || detail::reach(g, open, c.w, tgt, D, blocked)) {
                p.verts.push_back(c.w);
                p.eids.push_back(c.e);
                advanced = true;
                break;
            }
        }
        if (!advanced) return Path{};  // cannot happen after a feasible step
    }
    p.found = true;
    return p;
}

// Exhaustive oracle for the same minimum; enumeration of all simple open
// paths, capped by the number of open edges.
inline Path lex_min_open_path_exhaustive(const Graph& g, const BondConfig& open,
                                         const EdgeOrdering& ord, const std::vector<u8>* D,
                                         const std::vector<u32>& from, const std::vector<u32>& to,
                                         u32 max_open_edges = 12) {
    u32 open_edges = 0;
    for (u32 e = 0; e < g.edge_count(); ++e) open_edges += open[e];
    if (open_edges > max_open_edges)
        throw std::length_error("path enumeration wants at most " + std::to_string(max_open_edges) +
                                " open edges, got " + std::to_string(open_edges));
    std::vector<u8> tgt(g.n, 0);
    for (u32 v : to)
        if (!D || (*D)[v]) tgt[v] = 1;

    Path best;
    std::vector<u32> best_seq;
    auto consider = [&](const Path& cand) {
        auto seq = cand.rank_seq(g, ord);
        if (!best.found || cmp_rank_seq(seq, best_seq) < 0 ||
            (cmp_rank_seq(seq, best_seq) == 0 && cand.verts[0] < best.verts[0])) {
            best = cand;
            best.found = true;
            best_seq = seq;
        }
    };

    std::vector<u8> used(g.n, 0);
    Path cur;
    std::function<void()> dfs = [&]() {
        u32 u = cur.verts.back();
        if (tgt[u]) consider(cur);
        for (u32 h = g.adj_off[u]; h < g.adj_off[u + 1]; ++h) {
            u32 e = g.adj_edge[h];
            if (!open[e]) continue;
            u32 w = g.adj_vert[h];
            if (used[w]) continue;
            if (D && !(*D)[w]) continue;
            used[w] = 1;
            cur.verts.push_back(w);
            cur.eids.push_back(e);
            dfs();
            cur.verts.pop_back();
            cur.eids.pop_back();
            used[w] = 0;
        }
    };
    for (u32 v : from) {
        if (D && !(*D)[v]) continue;
        used.assign(g.n, 0);
        used[v] = 1;
        cur.verts = {v};
        cur.eids.clear();
        dfs();
    }
    return best;
}

// ---- gluing instances ----

struct GluingInstance {
    SlabGraph slab;  // the ambient graph is the fattened D'
    RectRegion D, Dp;
    std::vector<std::pair<int, int>> A0, A1, A2, B1, B2;
    std::vector<u8> maskD, maskDp;
    std::vector<u32> A0f, A1f, A2f, B1f, B2f;
    std::vector<u8> inA0, inA1, inA2, inB1, inB2;
    bool rect_certificate = false;  // A1/A2/B1/B2 on the four sides of D

    const std::vector<u32>& Bf(int which) const { return which == 1 ? B1f : B2f; }
};

inline std::vector<u8> mask_of(const std::vector<u32>& vids, u32 n) {
    std::vector<u8> m(n, 0);
    for (u32 v : vids) m[v] = 1;
    return m;
}

inline GluingInstance make_gluing_instance(SlabGraph slab, RectRegion D, RectRegion Dp,
                                           std::vector<std::pair<int, int>> A0,
                                           std::vector<std::pair<int, int>> A1,
                                           std::vector<std::pair<int, int>> A2,
                                           std::vector<std::pair<int, int>> B1,
                                           std::vector<std::pair<int, int>> B2) {
    D.validate();
    Dp.validate();
    for (auto& [x, y] : A1)
        if (!D.contains(x, y)) throw std::invalid_argument("A1 must sit inside D");
    for (auto& [x, y] : A2)
        if (!D.contains(x, y)) throw std::invalid_argument("A2 must sit inside D");
    for (auto& [x, y] : B1)
        if (!D.contains(x, y)) throw std::invalid_argument("B1 must sit inside D");
    for (auto& [x, y] : B2)
        if (!D.contains(x, y)) throw std::invalid_argument("B2 must sit inside D");
    for (auto& [x, y] : A0)
        if (!Dp.contains(x, y)) throw std::invalid_argument("A0 must sit inside D'");
    GluingInstance gi;
    gi.slab = std::move(slab);
    gi.D = D;
    gi.Dp = Dp;
    gi.A0 = std::move(A0);
    gi.A1 = std::move(A1);
    gi.A2 = std::move(A2);
    gi.B1 = std::move(B1);
    gi.B2 = std::move(B2);
    gi.maskD = region_mask(gi.slab, D);
    gi.maskDp = region_mask(gi.slab, Dp);
    gi.A0f = gi.slab.fatten(gi.A0);
    gi.A1f = gi.slab.fatten(gi.A1);
    gi.A2f = gi.slab.fatten(gi.A2);
    gi.B1f = gi.slab.fatten(gi.B1);
    gi.B2f = gi.slab.fatten(gi.B2);
    u32 n = gi.slab.g.n;
    gi.inA0 = mask_of(gi.A0f, n);
    gi.inA1 = mask_of(gi.A1f, n);
    gi.inA2 = mask_of(gi.A2f, n);
    gi.inB1 = mask_of(gi.B1f, n);
    gi.inB2 = mask_of(gi.B2f, n);

    auto within = [](const std::vector<std::pair<int, int>>& pts,
                     const std::vector<std::pair<int, int>>& side) {
        for (auto& p : pts)
            if (std::find(side.begin(), side.end(), p) == side.end()) return false;
        return !pts.empty();
    };
    gi.rect_certificate = within(gi.A1, D.top_side()) && within(gi.A2, D.bottom_side()) &&
                          within(gi.B1, D.left_side()) && within(gi.B2, D.right_side());
    return gi;
}

// D = [0,n]^2 crossed top-to-bottom, D' extends to the right, with the
// attachment zone A0 on the far right edge.
inline GluingInstance standard_crossing_instance(int n, const FiberGraph& fiber) {
    if (n < 1) throw std::invalid_argument("instance size must be >= 1");
    SlabGraph slab = build_slab({0, 2 * n, 0, n}, fiber);
    RectRegion D{0, n, 0, n};
    RectRegion Dp{0, 2 * n, 0, n};
    std::vector<std::pair<int, int>> A0, A1, A2, B1, B2;
    for (int y = 0; y <= n; ++y) {
        A0.push_back({2 * n, y});
        B1.push_back({0, y});
        B2.push_back({n, y});
    }
    for (int x = 0; x <= n; ++x) {
        A1.push_back({x, n});
        A2.push_back({x, 0});
    }
    return make_gluing_instance(std::move(slab), D, Dp, A0, A1, A2, B1, B2);
}

inline GluingInstance minimal_gluing_instance(const FiberGraph& fiber) {
    return standard_crossing_instance(1, fiber);
}

// Every A1-A2 path of D meets every B1-B2 path of D (paths at the base
// level). Certified either by the four-sides-of-a-rectangle layout or by
// exhaustive enumeration of simple base paths on small D.
inline bool verify_topological_condition(const GluingInstance& gi, u32 cap_base_points = 12) {
    if (gi.rect_certificate) return true;

    std::vector<std::pair<int, int>> pts;
    for (auto& p : gi.D.all_points())
        if (gi.slab.alive_at(p.first, p.second)) pts.push_back(p);
    if (pts.size() > cap_base_points)
        throw std::length_error("topological condition: D has " + std::to_string(pts.size()) +
                                " base points, exhaustive scan capped at " + std::to_string(cap_base_points));
    if (pts.size() > 64) throw std::length_error("topological condition scan needs <= 64 base points");
    auto idx_of = [&](int x, int y) -> int {
        for (std::size_t i = 0; i < pts.size(); ++i)
            if (pts[i] == std::pair{x, y}) return (int)i;
        return -1;
    };

    auto paths_between = [&](const std::vector<std::pair<int, int>>& S,
                             const std::vector<std::pair<int, int>>& T) {
        std::vector<u64> out;
        std::vector<u8> is_t(pts.size(), 0);
        for (auto& p : T) {
            int i = idx_of(p.first, p.second);
            if (i >= 0) is_t[i] = 1;
        }
        std::vector<u8> used(pts.size(), 0);
        std::function<void(int, u64)> dfs = [&](int i, u64 mask) {
            if (is_t[i]) out.push_back(mask);
            auto [x, y] = pts[i];
            for (auto [dx, dy] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}}) {
                int j = idx_of(x + dx, y + dy);
                if (j < 0 || used[j]) continue;
                used[j] = 1;
                dfs(j, mask | ((u64)1 << j));
                used[j] = 0;
            }
        };
        for (auto& p : S) {
            int i = idx_of(p.first, p.second);
            if (i < 0) continue;
            used.assign(pts.size(), 0);
            used[i] = 1;
            dfs(i, (u64)1 << i);
        }
        return out;
    };
    auto pa = paths_between(gi.A1, gi.A2);
    auto pb = paths_between(gi.B1, gi.B2);
    if (pa.empty() || pb.empty()) return false;
    for (u64 ma : pa)
        for (u64 mb : pb)
            if ((ma & mb) == 0) return false;
    return true;
}

// ---- the four events ----

struct EventEval {
    bool A = false;   // a D-bar cluster crosses A1-A2 and reaches A0 inside D'-bar
    bool B = false;   // a D-bar cluster joins B1-bar and B2-bar
    bool X = false;   // the B1-B2 crossing cluster itself reaches A0 inside D'-bar
    bool Y = false;   // (A and B) minus X
    bool Y1 = false;  // Y with an A-crossing cluster avoiding B1-bar
    bool Y2 = false;  // Y with an A-crossing cluster avoiding B2-bar
};

inline EventEval evaluate_events(const GluingInstance& gi, const BondConfig& open) {
    const Graph& g = gi.slab.g;
    auto labD = components(g, open, &gi.maskD);
    auto labDp = components(g, open, &gi.maskDp);
    std::vector<u8> fA1(labD.count, 0), fA2(labD.count, 0), fB1(labD.count, 0), fB2(labD.count, 0);
    std::vector<u32> dp_of(labD.count, NPOS32);
    for (u32 v = 0; v < g.n; ++v) {
        u32 L = labD.label[v];
        if (L == NPOS32) continue;
        dp_of[L] = labDp.label[v];
        if (gi.inA1[v]) fA1[L] = 1;
        if (gi.inA2[v]) fA2[L] = 1;
        if (gi.inB1[v]) fB1[L] = 1;
        if (gi.inB2[v]) fB2[L] = 1;
    }
    std::vector<u8> a0dp(labDp.count, 0);
    for (u32 v : gi.A0f)
        if (labDp.label[v] != NPOS32) a0dp[labDp.label[v]] = 1;

    EventEval ev;
    bool cross1 = false, cross2 = false;
    for (u32 L = 0; L < labD.count; ++L) {
        bool toA0 = dp_of[L] != NPOS32 && a0dp[dp_of[L]];
        if (fA1[L] && fA2[L] && toA0) {
            ev.A = true;
            if (!fB1[L]) cross1 = true;
            if (!fB2[L]) cross2 = true;
        }
        if (fB1[L] && fB2[L]) {
            ev.B = true;
            if (toA0) ev.X = true;
        }
    }
    ev.Y = ev.A && ev.B && !ev.X;
    ev.Y1 = ev.Y && cross1;
    ev.Y2 = ev.Y && cross2;
    return ev;
}

// gamma(i): the minimal open path of D-bar, from B1-bar to B2-bar for i = 1
// and the reverse for i = 2, under the given oriented-edge order.
inline Path gamma_path(const GluingInstance& gi, const BondConfig& open, int which,
                       const EdgeOrdering& ord) {
    if (which != 1 && which != 2) throw std::invalid_argument("which must be 1 or 2");
    const auto& from = which == 1 ? gi.B1f : gi.B2f;
    const auto& to = which == 1 ? gi.B2f : gi.B1f;
    return lex_min_open_path(gi.slab.g, open, ord, &gi.maskD, from, to);
}

namespace detail {
// flags per D-bar cluster: crosses A1-A2, avoids the chosen B-bar, and its
// D'-bar cluster reaches A0-bar
inline std::vector<u8> qualifying_clusters(const GluingInstance& gi, const BondConfig& open,
                                           const ClusterLabeling& labD, int which) {
    const Graph& g = gi.slab.g;
    auto labDp = components(g, open, &gi.maskDp);
    std::vector<u8> fA1(labD.count, 0), fA2(labD.count, 0), fB(labD.count, 0);
    std::vector<u32> dp_of(labD.count, NPOS32);
    const std::vector<u8>& inB = which == 1 ? gi.inB1 : gi.inB2;
    for (u32 v = 0; v < g.n; ++v) {
        u32 L = labD.label[v];
        if (L == NPOS32) continue;
        dp_of[L] = labDp.label[v];
        if (gi.inA1[v]) fA1[L] = 1;
        if (gi.inA2[v]) fA2[L] = 1;
        if (inB[v]) fB[L] = 1;
    }
    std::vector<u8> a0dp(labDp.count, 0);
    for (u32 v : gi.A0f)
        if (labDp.label[v] != NPOS32) a0dp[labDp.label[v]] = 1;
    std::vector<u8> qual(labD.count, 0);
    for (u32 L = 0; L < labD.count; ++L)
        qual[L] = fA1[L] && fA2[L] && !fB[L] && dp_of[L] != NPOS32 && a0dp[dp_of[L]];
    return qual;
}
} // namespace detail

// Overlap points: base points whose fiber meets both gamma and a qualifying
// crossing cluster. Result is a sorted list of window indices.
inline std::vector<u32> overlap_points(const GluingInstance& gi, const BondConfig& open, int which,
                                       const Path& gamma) {
    if (!gamma.found)
        throw std::invalid_argument("overlap scan requires a B1-B2 crossing (omega outside the event)");
    const Graph& g = gi.slab.g;
    auto labD = components(g, open, &gi.maskD);
    auto qual = detail::qualifying_clusters(gi, open, labD, which);
    std::vector<u8> on_gamma(g.n, 0);
    for (u32 v : gamma.verts) on_gamma[v] = 1;

    std::vector<u32> W;
    for (u32 r = 0; r < gi.slab.base_count(); ++r) {
        u32 w = gi.slab.rank_widx[r];
        auto [x, y] = gi.slab.base.point(w);
        if (!gi.D.contains(x, y)) continue;
        bool meets_gamma = false, meets_cluster = false;
        for (u32 s = 0; s < gi.slab.fiber.n; ++s) {
            u32 v = r * gi.slab.fiber.n + s;
            if (on_gamma[v]) meets_gamma = true;
            u32 L = labD.label[v];
            if (L != NPOS32 && qual[L]) meets_cluster = true;
        }
        if (meets_gamma && meets_cluster) W.push_back(w);
    }
    return W;
}

struct UWitness {
    u32 z_widx = NPOS32;
    u32 s = 0, sp = 0;   // fiber levels: (z,s) on gamma, (z,sp) off gamma
    u32 zp_widx = NPOS32;  // the l1-neighbor carrying the attachment vertex (zp,sp)
};

// Almost overlap points with their canonical witnesses: the witness
// minimizes the fiber distance d(s,sp), ties broken by (s, sp, zp).
inline std::vector<UWitness> almost_overlap_witnesses(const GluingInstance& gi,
                                                      const BondConfig& open, int which,
                                                      const Path& gamma) {
    if (!gamma.found)
        throw std::invalid_argument("overlap scan requires a B1-B2 crossing (omega outside the event)");
    const Graph& g = gi.slab.g;
    const FiberGraph& fib = gi.slab.fiber;
    std::vector<u8> on_gamma(g.n, 0);
    for (u32 v : gamma.verts) on_gamma[v] = 1;
    const std::vector<u32>& Bf = gi.Bf(which);

    std::vector<UWitness> out;
    for (u32 r = 0; r < gi.slab.base_count(); ++r) {
        u32 zw = gi.slab.rank_widx[r];
        auto [x, y] = gi.slab.base.point(zw);
        if (!gi.D.contains(x, y)) continue;
        bool zbar_on_gamma = false;
        for (u32 s = 0; s < fib.n; ++s) zbar_on_gamma |= on_gamma[r * fib.n + s] != 0;
        if (!zbar_on_gamma) continue;

        // ambient for the attachment: D'-bar minus the fiber over z
        std::vector<u8> dp_minus_z = gi.maskDp;
        for (u32 s = 0; s < fib.n; ++s) dp_minus_z[r * fib.n + s] = 0;

        UWitness best;
        u32 best_d = NPOS32;
        std::vector<u32> nbrs{zw};
        for (auto [dx, dy] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}})
            if (gi.slab.alive_at(x + dx, y + dy)) nbrs.push_back(gi.slab.base.index(x + dx, y + dy));
        std::sort(nbrs.begin(), nbrs.end());

        for (u32 s = 0; s < fib.n; ++s) {
            if (!on_gamma[r * fib.n + s]) continue;
            for (u32 sp = 0; sp < fib.n; ++sp) {
                if (on_gamma[r * fib.n + sp]) continue;
                u32 d = fib.distance(s, sp);
                if (d > best_d) continue;
                for (u32 zpw : nbrs) {
                    if (d == best_d && best.zp_widx != NPOS32 &&
                        std::tuple(d, s, sp, zpw) >= std::tuple(best_d, best.s, best.sp, best.zp_widx))
                        continue;
                    u32 att = gi.slab.vid_widx(zpw, sp);
                    if (!connected_in(g, open, {att}, gi.A0f, &dp_minus_z, true)) continue;
                    if (connected_in(g, open, {att}, Bf, &gi.maskD, true)) continue;
                    best = {zw, s, sp, zpw};
                    best_d = d;
                }
            }
        }
        if (best.z_widx != NPOS32) out.push_back(best);
    }
    return out;
}

inline std::vector<u32> almost_overlap_points(const GluingInstance& gi, const BondConfig& open,
                                              int which, const Path& gamma) {
    auto wit = almost_overlap_witnesses(gi, open, which, gamma);
    std::vector<u32> U;
    for (auto& w : wit) U.push_back(w.z_widx);
#ifndef NDEBUG
    auto W = overlap_points(gi, open, which, gamma);
    if (!std::includes(U.begin(), U.end(), W.begin(), W.end()))
        throw std::logic_error("overlap points escaped the almost-overlap set");
#endif
    return U;
}

// Good points: almost overlap points whose canonical witness survives the
// two path-local conditions along the fiber geodesic from s to sp.
inline std::vector<u32> good_almost_overlap_points(const GluingInstance& gi, const BondConfig& open,
                                                   int which, const Path& gamma,
                                                   const EdgeOrdering& ord) {
    const Graph& g = gi.slab.g;
    const FiberGraph& fib = gi.slab.fiber;
    auto wit = almost_overlap_witnesses(gi, open, which, gamma);
    std::vector<u8> on_gamma(g.n, 0);
    for (u32 v : gamma.verts) on_gamma[v] = 1;

    std::vector<u32> V;
    for (auto& w : wit) {
        u32 r = gi.slab.rank[w.z_widx];
        auto geo = fib.geodesic(w.s, w.sp);
        bool good = true;
        for (std::size_t k = 1; k + 1 < geo.size(); ++k)
            if (on_gamma[r * fib.n + geo[k]]) good = false;
        if (good && geo.size() >= 2) {
            u32 vz = r * fib.n + w.s;
            std::size_t j = std::find(gamma.verts.begin(), gamma.verts.end(), vz) - gamma.verts.begin();
            if (j + 1 < gamma.verts.size()) {
                u32 e_next = gamma.eids[j];
                u32 e_fib = edge_between(g, vz, r * fib.n + geo[1]);
                if (ord.rank_of(g, e_next, vz) > ord.rank_of(g, e_fib, vz)) good = false;
            }
        }
        if (good) V.push_back(w.z_widx);
    }
    return V;
}

// ---- the reconnection surgery ----

struct SurgeryResult {
    bool ok = false;
    BondConfig sigma;
    std::vector<u32> new_path;  // predicted minimal B1-B2 path of sigma
    std::string failure;
    bool used_edge_disjoint_fallback = false;
};

namespace detail {
inline std::string dump_ball(const GluingInstance& gi, const BondConfig& open,
                             const std::vector<u8>& in_ball) {
    std::ostringstream os;
    const Graph& g = gi.slab.g;
    for (u32 e = 0; e < g.edge_count(); ++e) {
        auto [a, b] = g.edges[e];
        if (!in_ball[a] && !in_ball[b]) continue;
        os << " e" << e << "(" << a << "," << b << ")=" << (open[e] ? 1 : 0);
    }
    return os.str();
}
} // namespace detail

// Rewires the radius-1 ball around overlap point z so that the crossing
// cluster and the A0-connected cluster merge into one B1-B2 crossing hooked
// to A0, while the minimal path of the result is forced to be
// gamma[0..i] . g . gamma[j..n]. Everything outside the ball is untouched.
inline SurgeryResult connecting_surgery(const GluingInstance& gi, const BondConfig& open, u32 z_widx,
                                        int which, const EdgeOrdering& ord) {
    const Graph& g = gi.slab.g;
    const FiberGraph& fib = gi.slab.fiber;
    EventEval ev = evaluate_events(gi, open);
    bool inY = which == 1 ? ev.Y1 : ev.Y2;
    if (!inY)
        throw std::invalid_argument("surgery precondition: configuration not in the one-sided gap event");
    Path gamma = gamma_path(gi, open, which, ord);
    auto W = overlap_points(gi, open, which, gamma);
    if (!std::binary_search(W.begin(), W.end(), z_widx))
        throw std::invalid_argument("surgery precondition: z is not an overlap point");

    u32 zr = gi.slab.rank[z_widx];
    auto [zx, zy] = gi.slab.base.point(z_widx);
    auto bs = box(gi.slab, zr * fib.n, 1);
    std::vector<u8> in_ball = mask_of(bs.ball, g.n);
    std::vector<u8> in_zbar(g.n, 0);
    for (u32 s = 0; s < fib.n; ++s) in_zbar[zr * fib.n + s] = 1;

    // gamma's last meeting with the fiber over z, and the contiguous in-ball
    // visit around it: the preferred stretch to cut out and replace.
    std::size_t anchor = gamma.verts.size();
    for (std::size_t k = gamma.verts.size(); k-- > 0;) {
        if (in_zbar[gamma.verts[k]]) { anchor = k; break; }
    }
    if (anchor >= gamma.verts.size())
        return {false, {}, {}, "gamma does not meet the ball at z", false};
    std::size_t ic = anchor, jc = anchor;
    while (ic > 0 && in_ball[gamma.verts[ic - 1]]) --ic;
    while (jc + 1 < gamma.verts.size() && in_ball[gamma.verts[jc + 1]]) ++jc;

    // That window is not forced. When gamma clips the ball several times, a
    // kept excursion between clips can undercut the rebuilt path in the
    // minimal-path order (its edges stay open), and only a wider cut that
    // swallows the excursion works; the reverse also happens. Fall back to
    // every window whose junction vertices are in the ball or adjacent to it,
    // shortest first. An out-of-ball junction means the rebuilt segment meets
    // the kept path there through a fresh ball-incident edge instead of
    // gamma's own entry or exit edge; cutting that edge out is sometimes the
    // only way to strand a cheaper competing start.
    auto near_ball = [&](u32 v) {
        if (in_ball[v]) return true;
        for (u32 h = g.adj_off[v]; h < g.adj_off[v + 1]; ++h)
            if (in_ball[g.adj_vert[h]]) return true;
        return false;
    };
    struct Win {
        std::size_t i, j;
    };
    std::vector<Win> wins{{ic, jc}};
    for (std::size_t wi = 0; wi < gamma.verts.size(); ++wi) {
        if (!near_ball(gamma.verts[wi])) continue;
        for (std::size_t wj = wi; wj < gamma.verts.size(); ++wj) {
            if (!near_ball(gamma.verts[wj])) continue;
            if (wi == wj && !in_ball[gamma.verts[wi]]) continue;
            if (!(wi == ic && wj == jc)) wins.push_back({wi, wj});
        }
    }
    std::sort(wins.begin() + 1, wins.end(), [](const Win& a, const Win& b) {
        return a.j - a.i != b.j - b.i ? a.j - a.i < b.j - b.i : a.i < b.i;
    });
    std::size_t i = 0, j = 0;

    // vertices connected to A0-bar outside the ball
    std::vector<u8> r_set(g.n, 0);
    {
        std::vector<u32> stack;
        for (u32 v : gi.A0f)
            if (!in_ball[v] && !r_set[v]) {
                r_set[v] = 1;
                stack.push_back(v);
            }
        while (!stack.empty()) {
            u32 v = stack.back();
            stack.pop_back();
            for (u32 h = g.adj_off[v]; h < g.adj_off[v + 1]; ++h) {
                if (!open[g.adj_edge[h]]) continue;
                u32 w2 = g.adj_vert[h];
                if (in_ball[w2] || r_set[w2] || !gi.maskDp[w2]) continue;
                r_set[w2] = 1;
                stack.push_back(w2);
            }
        }
    }

    // candidate attachment points on the sphere. The edge hooking the sphere
    // to the A0-connected exterior gets opened by the surgery, so closed
    // edges qualify too; already-open ones are tried first.
    struct Attach {
        u32 a0, a1;  // a1 = NPOS32 when a0 already sits in A0-bar
        u32 edge;
    };
    std::vector<Attach> attach;
    for (int want_open = 1; want_open >= 0; --want_open) {
        for (u32 v : bs.sphere) {
            if (in_zbar[v]) continue;
            if (gi.inA0[v]) {
                if (want_open) attach.push_back({v, NPOS32, NPOS32});
                continue;
            }
            for (u32 h = g.adj_off[v]; h < g.adj_off[v + 1]; ++h) {
                u32 e = g.adj_edge[h];
                if ((open[e] ? 1 : 0) != want_open) continue;
                u32 w2 = g.adj_vert[h];
                if (in_ball[w2] || !r_set[w2]) continue;
                attach.push_back({v, w2, e});
            }
        }
    }
    if (attach.empty())
        return {false, {}, {},
                "no attachment to A0 on the sphere around z=(" + std::to_string(zx) + "," +
                    std::to_string(zy) + ");" + detail::dump_ball(gi, open, in_ball),
                false};

    u32 exit_e = NPOS32;
    u32 gi_v = 0, gj_v = 0;

    // enumerate candidate paths g (inside ball and D-bar, pivot on the fiber
    // over z) in ascending rank order, then h from the pivot to a0
    auto build_sigma = [&](const std::vector<u32>& gverts, const std::vector<u32>& geids,
                           const std::vector<u32>& heids, const Attach& at) {
        BondConfig sigma = open;
        for (u32 e = 0; e < g.edge_count(); ++e) {
            auto [a, b] = g.edges[e];
            int inside = (in_ball[a] ? 1 : 0) + (in_ball[b] ? 1 : 0);
            if (inside == 0) continue;
            sigma[e] = 0;
        }
        // every gamma edge outside the replaced window stays open, including
        // edges from earlier clips of the ball (covers entry and exit too)
        for (std::size_t k = 0; k < gamma.eids.size(); ++k)
            if (k < i || k >= j) sigma[gamma.eids[k]] = 1;
        if (at.edge != NPOS32) sigma[at.edge] = 1;
        for (u32 e : geids) sigma[e] = 1;
        for (u32 e : heids) sigma[e] = 1;
        (void)gverts;
        return sigma;
    };

    std::vector<u32> predicted;
    auto predict = [&](const std::vector<u32>& gverts) {
        predicted.clear();
        for (std::size_t k = 0; k < i; ++k) predicted.push_back(gamma.verts[k]);
        for (u32 v : gverts) predicted.push_back(v);
        for (std::size_t k = j + 1; k < gamma.verts.size(); ++k) predicted.push_back(gamma.verts[k]);
    };

    SurgeryResult res;
    auto try_pair = [&](const std::vector<u32>& gverts, const std::vector<u32>& geids,
                        const std::vector<u32>& hverts, const std::vector<u32>& heids,
                        const Attach& at, bool fallback) {
        BondConfig sigma = build_sigma(gverts, geids, heids, at);
        EventEval ev2 = evaluate_events(gi, sigma);
        if (!ev2.X) return false;
        predict(gverts);
        Path check = gamma_path(gi, sigma, which, ord);
        if (!check.found || check.verts != predicted) return false;
        (void)hverts;
        res.ok = true;
        res.sigma = std::move(sigma);
        res.new_path = predicted;
        res.used_edge_disjoint_fallback = fallback;
        return true;
    };

    // in-ball vertices of gamma's kept prefix and suffix: the attachment may
    // hang straight off the surviving path when no branch h can reach it
    std::vector<u8> chi_keep(g.n, 0);

    // the minimal path stops at its first vertex in gamma's terminal side, so
    // g may not run through that side; when gamma ended inside the ball the
    // rebuilt crossing may finish at a different terminal vertex instead
    const std::vector<u8>& gend = which == 1 ? gi.inB2 : gi.inB1;
    bool suffix_empty = false;

    // pass 0: h vertex-disjoint from g; pass 1: h only edge-disjoint;
    // pass 2: no h, the attachment point lies on the new path itself;
    // pass 3: a bridge from a0 through the ball onto any vertex of the new
    // path, including its out-of-ball stretches. Later passes run only after
    // the stricter shapes failed on every window.
    for (int pass = 0; pass < 4 && !res.ok; ++pass) {
        bool fallback = pass >= 1;
        for (const Win& w : wins) {
            if (res.ok) break;
            i = w.i;
            j = w.j;
            exit_e = j + 1 < gamma.verts.size() ? gamma.eids[j] : NPOS32;
            gi_v = gamma.verts[i];
            gj_v = gamma.verts[j];
            suffix_empty = j + 1 >= gamma.verts.size();
            std::fill(chi_keep.begin(), chi_keep.end(), 0);
            for (std::size_t k = 0; k < gamma.verts.size(); ++k)
                if ((k < i || k > j) && in_ball[gamma.verts[k]]) chi_keep[gamma.verts[k]] = 1;

            for (const Attach& at : attach) {
                if (res.ok) break;
                // DFS over simple paths gi_v -> gj_v inside ball and D-bar
                std::vector<u32> gverts{gi_v}, geids;
                std::vector<u8> used(g.n, 0);
                used[gi_v] = 1;
                // pivots: g-vertices on the fiber over z. h branches off there, and
                // its first edge must rank above whatever the glued path does next
                // from that vertex (g's next edge, or gamma's exit edge at the end;
                // nothing competes when gamma terminates at the pivot).
                auto try_pivots = [&]() -> bool {
                    for (std::size_t t = 0; t < gverts.size(); ++t) {
                        if (!in_zbar[gverts[t]]) continue;
                        u32 limit = NPOS32;
                        if (t + 1 < gverts.size())
                            limit = ord.rank_of(g, geids[t], gverts[t]);
                        else if (exit_e != NPOS32)
                            limit = ord.rank_of(g, exit_e, gverts[t]);
                        // DFS for h from the pivot to a0; each arrival is
                        // postchecked, rejects backtrack into the next candidate
                        std::vector<u32> hverts{gverts[t]}, heids;
                        std::vector<u8> hused(g.n, 0);
                        for (std::size_t k = 0; k < gverts.size(); ++k)
                            if (k != t) hused[gverts[k]] = fallback ? 0 : 1;
                        if (!fallback)
                            for (u32 v = 0; v < g.n; ++v)
                                if (chi_keep[v]) hused[v] = 1;
                        hused[gverts[t]] = 1;
                        std::vector<u8> gedge(g.edge_count(), 0);
                        for (u32 e : geids) gedge[e] = 1;
                        std::function<bool()> dfs_h = [&]() -> bool {
                            u32 hu = hverts.back();
                            if (hu == at.a0)
                                return try_pair(gverts, geids, hverts, heids, at, fallback);
                            struct C {
                                u32 rank, w, e;
                                bool operator<(const C& o) const { return rank < o.rank; }
                            };
                            std::vector<C> cs;
                            for (u32 h = g.adj_off[hu]; h < g.adj_off[hu + 1]; ++h) {
                                u32 e = g.adj_edge[h];
                                u32 w2 = g.adj_vert[h];
                                if (!in_ball[w2] || hused[w2] || gedge[e]) continue;
                                u32 rk = ord.rank_of(g, e, hu);
                                if (hverts.size() == 1 && limit != NPOS32 && rk <= limit) continue;
                                cs.push_back({rk, w2, e});
                            }
                            std::sort(cs.begin(), cs.end());
                            for (auto& c : cs) {
                                hused[c.w] = 1;
                                hverts.push_back(c.w);
                                heids.push_back(c.e);
                                if (dfs_h()) return true;
                                hverts.pop_back();
                                heids.pop_back();
                                hused[c.w] = 0;
                            }
                            return false;
                        };
                        if (dfs_h()) return true;
                    }
                    return false;
                };
                // bridge from a0 over ball vertices off the rebuilt crossing,
                // landing on any of its vertices; the landing edge may leave
                // the ball. Covers attachments that hook onto the kept prefix
                // or suffix where no pivot branch can reach a0.
                auto try_bridge = [&]() -> bool {
                    predict(gverts);
                    std::vector<u8> on_chi(g.n, 0);
                    for (u32 v : predicted) on_chi[v] = 1;
                    if (on_chi[at.a0]) return false;  // pass 2 shape, already tried
                    std::vector<u32> hverts{at.a0}, heids;
                    std::vector<u8> hused(g.n, 0);
                    hused[at.a0] = 1;
                    std::function<bool()> dfs_b = [&]() -> bool {
                        u32 hu = hverts.back();
                        struct C {
                            u32 rank, w, e;
                            u8 land;
                            bool operator<(const C& o) const { return rank < o.rank; }
                        };
                        std::vector<C> cs;
                        for (u32 h = g.adj_off[hu]; h < g.adj_off[hu + 1]; ++h) {
                            u32 e = g.adj_edge[h];
                            u32 w2 = g.adj_vert[h];
                            if (hused[w2]) continue;
                            if (on_chi[w2]) cs.push_back({ord.rank_of(g, e, hu), w2, e, 1});
                            else if (in_ball[w2]) cs.push_back({ord.rank_of(g, e, hu), w2, e, 0});
                        }
                        std::sort(cs.begin(), cs.end());
                        for (auto& c : cs) {
                            hused[c.w] = 1;
                            hverts.push_back(c.w);
                            heids.push_back(c.e);
                            bool hit = c.land ? try_pair(gverts, geids, hverts, heids, at, true) : dfs_b();
                            if (hit) return true;
                            hverts.pop_back();
                            heids.pop_back();
                            hused[c.w] = 0;
                        }
                        return false;
                    };
                    return dfs_b();
                };
                std::function<bool()> dfs_g = [&]() -> bool {
                    u32 u = gverts.back();
                    if (u == gj_v || (pass >= 2 && suffix_empty && gend[u])) {
                        if (pass < 2) return try_pivots();
                        if (pass == 3) return try_bridge();
                        if (used[at.a0] || chi_keep[at.a0])
                            return try_pair(gverts, geids, {}, {}, at, true);
                        return false;
                    }
                    struct C {
                        u32 rank, w, e;
                        bool operator<(const C& o) const { return rank < o.rank; }
                    };
                    std::vector<C> cs;
                    for (u32 h = g.adj_off[u]; h < g.adj_off[u + 1]; ++h) {
                        u32 e = g.adj_edge[h];
                        u32 w2 = g.adj_vert[h];
                        if (w2 == gj_v) {
                            // only edges touching the ball may be rewired
                            if (used[w2] || (!in_ball[w2] && !in_ball[u])) continue;
                        } else {
                            if (!in_ball[w2] || !gi.maskD[w2] || used[w2] || chi_keep[w2]) continue;
                            if (gend[w2] && !(pass >= 2 && suffix_empty)) continue;
                        }
                        cs.push_back({ord.rank_of(g, e, u), w2, e});
                    }
                    std::sort(cs.begin(), cs.end());
                    for (auto& c : cs) {
                        used[c.w] = 1;
                        gverts.push_back(c.w);
                        geids.push_back(c.e);
                        if (dfs_g()) return true;
                        gverts.pop_back();
                        geids.pop_back();
                        used[c.w] = 0;
                    }
                    return false;
                };
                dfs_g();
            }
        }
    }
    if (!res.ok) {
        res.failure = "no valid reconnection at z=(" + std::to_string(zx) + "," + std::to_string(zy) +
                      "), which=" + std::to_string(which) + ";" + detail::dump_ball(gi, open, in_ball);
    }
    return res;
}

// ---- sampling estimate of the gluing inequality ----

struct GluingEstimate {
    double phiX = 0, phiA = 0, phiB = 0;
    Interval ciX{0, 1}, ciA{0, 1}, ciB{0, 1};
    double c_hat = 0;
    Interval ciC{0, 0};
    bool c_unbounded = false;
    double beta_hat = 0;
    u64 samples = 0;
    std::vector<u8> logA, logB, logX;  // per-sample event log
};

inline GluingEstimate gluing_estimate(const GluingInstance& gi, const ModelParams& mp, u64 samples,
                                      u64 seed, bool use_sw = false, bool keep_log = false) {
    ChainSpec cs;
    cs.sweeps = samples;
    cs.use_sw = use_sw;
    cs.master_seed = seed;
    cs.keep_series = keep_log;
    std::vector<Observable> obs;
    obs.push_back({"gluingA", [&gi](const BondConfig& w) { return evaluate_events(gi, w).A ? 1.0 : 0.0; }, true});
    obs.push_back({"gluingB", [&gi](const BondConfig& w) { return evaluate_events(gi, w).B ? 1.0 : 0.0; }, true});
    obs.push_back({"gluingX", [&gi](const BondConfig& w) { return evaluate_events(gi, w).X ? 1.0 : 0.0; }, true});
    ChainResult r = run_chain(gi.slab.g, mp, cs, obs);

    GluingEstimate est;
    est.samples = samples;
    est.phiA = r.stats[0].mean;
    est.phiB = r.stats[1].mean;
    est.phiX = r.stats[2].mean;
    est.ciA = r.stats[0].ci;
    est.ciB = r.stats[1].ci;
    est.ciX = r.stats[2].ci;
    double denom = est.phiA * est.phiB;
    est.c_hat = denom > 0 ? est.phiX / denom : (est.phiX > 0 ? INFINITY : 0.0);
    double dlo = est.ciA.lo * est.ciB.lo;
    if (dlo <= 0) {
        est.c_unbounded = true;
        est.ciC = {denom > 0 ? est.ciX.lo / (est.ciA.hi * est.ciB.hi) : 0.0, INFINITY};
    } else {
        est.ciC = {est.ciX.lo / (est.ciA.hi * est.ciB.hi), est.ciX.hi / dlo};
    }
    double arg = est.phiA * est.phiB - est.phiX;
    est.beta_hat = (arg > 0 && est.phiA < 1) ? std::log(arg) / std::log(1 - est.phiA) : INFINITY;
    if (keep_log) {
        est.logA.reserve(samples);
        for (double v : r.series[0]) est.logA.push_back(v > 0.5);
        for (double v : r.series[1]) est.logB.push_back(v > 0.5);
        for (double v : r.series[2]) est.logX.push_back(v > 0.5);
    }
    return est;
}

// exact event probabilities by enumeration, for oracle-tractable instances
struct ExactGluing {
    double phiA = 0, phiB = 0, phiX = 0, c = 0;
};

inline ExactGluing exact_gluing(const GluingInstance& gi, const ModelParams& mp) {
    const Graph& g = gi.slab.g;
    check_enumerable(g);
    double z = 0, a = 0, b = 0, x = 0;
    u64 total = (u64)1 << g.edge_count();
    for (u64 bits = 0; bits < total; ++bits) {
        BondConfig c = config_from_bits(bits, g.edge_count());
        double w = config_weight(g, mp, c);
        z += w;
        EventEval ev = evaluate_events(gi, c);
        if (ev.A) a += w;
        if (ev.B) b += w;
        if (ev.X) x += w;
    }
    ExactGluing out;
    out.phiA = a / z;
    out.phiB = b / z;
    out.phiX = x / z;
    out.c = out.phiA * out.phiB > 0 ? out.phiX / (out.phiA * out.phiB) : 0;
    return out;
}

} // namespace rcslab
