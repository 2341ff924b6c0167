#pragma once
#include <algorithm>
#include <cstdint>
#include <string>
#include <tuple>
#include <vector>

#include "rcslab/exact.hpp"
#include "rcslab/geometry.hpp"

namespace rcslab {

struct ClusterLabeling {
    std::vector<u32> label;  // NPOS32 outside the queried region
    u32 count = 0;
};

// Open-edge components, optionally restricted to a vertex region. Labels are
// assigned in ascending order of the smallest vertex id they contain.
inline ClusterLabeling components(const Graph& g, const BondConfig& open,
                                  const std::vector<u8>* region = nullptr) {
    ClusterLabeling out;
    out.label.assign(g.n, NPOS32);
    std::vector<u32> stack;
    for (u32 v0 = 0; v0 < g.n; ++v0) {
        if (region && !(*region)[v0]) continue;
        if (out.label[v0] != NPOS32) continue;
        u32 id = out.count++;
        out.label[v0] = id;
        stack.assign(1, v0);
        while (!stack.empty()) {
            u32 v = stack.back();
            stack.pop_back();
            for (u32 h = g.adj_off[v]; h < g.adj_off[v + 1]; ++h) {
                if (!open[g.adj_edge[h]]) continue;
                u32 w = g.adj_vert[h];
                if (region && !(*region)[w]) continue;
                if (out.label[w] != NPOS32) continue;
                out.label[w] = id;
                stack.push_back(w);
            }
        }
    }
    return out;
}

// Open path from A to B with every vertex in the region D. With exempt_start,
// the starting vertices of A may sit outside D (used for connectivity "in
// D' minus a column" queried from a vertex of that column).
inline bool connected_in(const Graph& g, const BondConfig& open, const std::vector<u32>& A,
                         const std::vector<u32>& B, const std::vector<u8>* D = nullptr,
                         bool exempt_start = false) {
    std::vector<u8> target(g.n, 0);
    for (u32 v : B)
        if (!D || (*D)[v]) target[v] = 1;
    if (exempt_start)
        for (u32 v : B) target[v] = 1;  // a start vertex that is itself in B counts
    std::vector<u8> seen(g.n, 0);
    std::vector<u32> stack;
    for (u32 v : A) {
        if (!exempt_start && D && !(*D)[v]) continue;
        if (target[v]) return true;
        if (!seen[v]) {
            seen[v] = 1;
            stack.push_back(v);
        }
    }
    // after the start, only D-vertices may be traversed
    std::vector<u8> targetD(g.n, 0);
    for (u32 v : B)
        if (!D || (*D)[v]) targetD[v] = 1;
    while (!stack.empty()) {
        u32 v = stack.back();
        stack.pop_back();
        for (u32 h = g.adj_off[v]; h < g.adj_off[v + 1]; ++h) {
            if (!open[g.adj_edge[h]]) continue;
            u32 w = g.adj_vert[h];
            if (D && !(*D)[w]) continue;
            if (targetD[w]) return true;
            if (seen[w]) continue;
            seen[w] = 1;
            stack.push_back(w);
        }
    }
    return false;
}

inline char hard_direction(const RectRegion& r) { return (r.b - r.a) >= (r.d - r.c) ? 'h' : 'v'; }

inline bool has_crossing(const SlabGraph& s, const BondConfig& open, const RectRegion& rect,
                         char direction) {
    auto mask = region_mask(s, rect);
    std::vector<u32> from, to;
    if (direction == 'h') {
        from = s.fatten(rect.left_side());
        to = s.fatten(rect.right_side());
    } else {
        from = s.fatten(rect.bottom_side());
        to = s.fatten(rect.top_side());
    }
    return connected_in(s.g, open, from, to, &mask);
}

struct SeparationReport {
    u32 K = 0;
    std::vector<u32> witnesses;  // cluster labels, left to right
    u32 hamming_lb = 0;
};

// Greedy maximal family of vertical crossings whose fattened base projections
// live in pairwise distinct clusters of omega restricted to the rectangle.
// Greedy order: leftmost base column of the cluster, then lowest base y
// reached in that column, then smallest vertex id.
inline SeparationReport strongly_separated_crossings(const SlabGraph& s, const BondConfig& open,
                                                     const RectRegion& rect) {
    auto mask = region_mask(s, rect);
    auto lab = components(s.g, open, &mask);
    u32 C = lab.count;
    std::vector<int> min_x(C, INT32_MAX), min_y(C, INT32_MAX);
    std::vector<u32> min_vid(C, NPOS32);
    std::vector<u8> hits_bottom(C, 0), hits_top(C, 0);
    std::vector<std::vector<u32>> members(C);
    for (u32 v = 0; v < s.g.n; ++v) {
        u32 id = lab.label[v];
        if (id == NPOS32) continue;
        auto [x, y] = s.base_of(v);
        if (x < min_x[id] || (x == min_x[id] && y < min_y[id])) {
            min_x[id] = x;
            min_y[id] = y;
        }
        if (min_vid[id] == NPOS32) min_vid[id] = v;
        if (y == rect.c) hits_bottom[id] = 1;
        if (y == rect.d) hits_top[id] = 1;
        members[id].push_back(v);
    }

    std::vector<u32> candidates;
    for (u32 id = 0; id < C; ++id)
        if (hits_bottom[id] && hits_top[id]) candidates.push_back(id);
    std::sort(candidates.begin(), candidates.end(), [&](u32 a, u32 b) {
        return std::tuple(min_x[a], min_y[a], min_vid[a]) < std::tuple(min_x[b], min_y[b], min_vid[b]);
    });

    SeparationReport rep;
    std::vector<u8> used(C, 0);
    std::vector<u8> col_seen(s.base.count(), 0);
    for (u32 id : candidates) {
        // labels met by the fattened base projection of this cluster
        std::vector<u32> proj_labels;
        std::vector<u32> cols;
        for (u32 v : members[id]) {
            u32 w = s.base_widx_of(v);
            if (col_seen[w]) continue;
            col_seen[w] = 1;
            cols.push_back(w);
            for (u32 f = 0; f < s.fiber.n; ++f) {
                u32 u = s.vid_widx(w, f);
                if (lab.label[u] != NPOS32) proj_labels.push_back(lab.label[u]);
            }
        }
        for (u32 w : cols) col_seen[w] = 0;
        bool clash = false;
        for (u32 l : proj_labels)
            if (used[l]) clash = true;
        if (clash) continue;
        for (u32 l : proj_labels) used[l] = 1;
        rep.witnesses.push_back(id);
    }
    rep.K = (u32)rep.witnesses.size();
    rep.hamming_lb = rep.K > 0 ? rep.K - 1 : 0;
    return rep;
}

} // namespace rcslab
