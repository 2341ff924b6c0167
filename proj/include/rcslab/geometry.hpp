#pragma once
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <map>
#include <queue>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace rcslab {

using u8 = std::uint8_t;
using u32 = std::uint32_t;
using u64 = std::uint64_t;
inline constexpr u32 NPOS32 = 0xFFFFFFFFu;

inline u64 fnv1a(u64 h, u64 x) {
    for (int i = 0; i < 8; ++i) {
        h ^= (x >> (8 * i)) & 0xFF;
        h *= 0x100000001B3ULL;
    }
    return h;
}
inline constexpr u64 FNV_SEED = 0xCBF29CE484222325ULL;

// Fiber: the finite connected graph S the base gets multiplied by.
struct FiberGraph {
    u32 n = 1;
    std::vector<std::pair<u32, u32>> edges;
    std::string id = "trivial";
    std::vector<std::vector<u32>> adj;
    std::vector<std::vector<u32>> dist;

    void finalize() {
        for (auto& e : edges) {
            if (e.first > e.second) std::swap(e.first, e.second);
            if (e.first == e.second) throw std::invalid_argument("fiber " + id + ": self-loop at vertex " + std::to_string(e.first));
            if (e.second >= n) throw std::invalid_argument("fiber " + id + ": edge endpoint " + std::to_string(e.second) + " out of range");
        }
        std::sort(edges.begin(), edges.end());
        if (std::adjacent_find(edges.begin(), edges.end()) != edges.end())
            throw std::invalid_argument("fiber " + id + ": duplicate edge");
        adj.assign(n, {});
        for (auto& e : edges) {
            adj[e.first].push_back(e.second);
            adj[e.second].push_back(e.first);
        }
        for (auto& a : adj) std::sort(a.begin(), a.end());
        dist.assign(n, std::vector<u32>(n, NPOS32));
        for (u32 s = 0; s < n; ++s) {
            dist[s][s] = 0;
            std::queue<u32> bfs;
            bfs.push(s);
            while (!bfs.empty()) {
                u32 v = bfs.front();
                bfs.pop();
                for (u32 w : adj[v])
                    if (dist[s][w] == NPOS32) {
                        dist[s][w] = dist[s][v] + 1;
                        bfs.push(w);
                    }
            }
        }
        for (u32 v = 0; v < n; ++v)
            if (dist[0][v] == NPOS32) {
                std::string comp;
                for (u32 w = 0; w < n; ++w)
                    if (dist[v][w] != NPOS32) comp += (comp.empty() ? "" : " ") + std::to_string(w);
                throw std::invalid_argument("fiber " + id + " is disconnected; offending component: {" + comp + "}");
            }
    }

    u32 distance(u32 a, u32 b) const { return dist[a][b]; }

    // canonical geodesic step: smallest-index neighbor strictly closer to t
    u32 next_toward(u32 s, u32 t) const {
        if (s == t) return s;
        for (u32 w : adj[s])
            if (dist[w][t] + 1 == dist[s][t]) return w;
        return s; // unreachable for connected fibers
    }

    std::vector<u32> geodesic(u32 s, u32 t) const {
        std::vector<u32> path{s};
        while (s != t) {
            s = next_toward(s, t);
            path.push_back(s);
        }
        return path;
    }
};

inline FiberGraph finalized(FiberGraph f) {
    f.finalize();
    return f;
}

inline FiberGraph fiber_trivial() { return finalized({1, {}, "trivial", {}, {}}); }
inline FiberGraph fiber_k2() { return finalized({2, {{0, 1}}, "k2", {}, {}}); }

inline FiberGraph fiber_path(u32 k) {
    FiberGraph f;
    f.n = k;
    f.id = "path" + std::to_string(k);
    for (u32 i = 0; i + 1 < k; ++i) f.edges.push_back({i, i + 1});
    f.finalize();
    return f;
}

inline FiberGraph fiber_cycle(u32 k) {
    if (k < 3) throw std::invalid_argument("cycle fiber needs at least 3 vertices");
    FiberGraph f;
    f.n = k;
    f.id = "cycle" + std::to_string(k);
    for (u32 i = 0; i < k; ++i) f.edges.push_back({i, (i + 1) % k});
    f.finalize();
    return f;
}

// Plain text format: first line vertex count, one "u v" pair per line.
inline FiberGraph fiber_from_stream(std::istream& in, const std::string& id) {
    FiberGraph f;
    f.id = id;
    if (!(in >> f.n) || f.n == 0) throw std::invalid_argument("fiber file " + id + ": bad vertex count");
    u32 a, b;
    while (in >> a >> b) f.edges.push_back({a, b});
    f.finalize();
    return f;
}

inline FiberGraph fiber_from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open fiber file: " + path);
    return fiber_from_stream(in, path);
}

// "trivial", "k2", "pathK", "cycleK", or "file:PATH"
inline FiberGraph fiber_by_name(const std::string& name) {
    if (name == "trivial" || name == "point") return fiber_trivial();
    if (name == "k2") return fiber_k2();
    if (name.rfind("path", 0) == 0) return fiber_path((u32)std::strtoul(name.c_str() + 4, nullptr, 10));
    if (name.rfind("cycle", 0) == 0) return fiber_cycle((u32)std::strtoul(name.c_str() + 5, nullptr, 10));
    if (name.rfind("file:", 0) == 0) return fiber_from_file(name.substr(5));
    throw std::invalid_argument("unknown fiber '" + name + "' (expected trivial|k2|pathK|cycleK|file:PATH)");
}

// Inclusive integer rectangle of the square lattice, indexed x-major.
struct BaseWindow {
    int x0 = 0, x1 = 0, y0 = 0, y1 = 0;

    int nx() const { return x1 - x0 + 1; }
    int ny() const { return y1 - y0 + 1; }
    u32 count() const { return (u32)nx() * (u32)ny(); }
    bool contains(int x, int y) const { return x >= x0 && x <= x1 && y >= y0 && y <= y1; }
    u32 index(int x, int y) const { return (u32)(x - x0) * (u32)ny() + (u32)(y - y0); }
    std::pair<int, int> point(u32 idx) const {
        return {x0 + (int)(idx / (u32)ny()), y0 + (int)(idx % (u32)ny())};
    }

    void validate() const {
        if (x1 < x0 || y1 < y0) throw std::invalid_argument("empty base window");
    }
};

inline int l1(int ax, int ay, int bx, int by) { return std::abs(ax - bx) + std::abs(ay - by); }

struct Graph {
    u32 n = 0;
    std::vector<std::pair<u32, u32>> edges;
    std::vector<u32> adj_off;   // CSR offsets, size n+1
    std::vector<u32> adj_vert;  // neighbor vertex per half-edge
    std::vector<u32> adj_edge;  // edge id per half-edge
    std::vector<u8> on_boundary;
    u64 hash = 0;

    u32 edge_count() const { return (u32)edges.size(); }

    void build_adjacency() {
        adj_off.assign(n + 1, 0);
        for (auto& e : edges) {
            ++adj_off[e.first + 1];
            ++adj_off[e.second + 1];
        }
        for (u32 v = 0; v < n; ++v) adj_off[v + 1] += adj_off[v];
        adj_vert.assign(2 * edges.size(), 0);
        adj_edge.assign(2 * edges.size(), 0);
        std::vector<u32> cursor(adj_off.begin(), adj_off.end() - 1);
        for (u32 e = 0; e < edges.size(); ++e) {
            auto [a, b] = edges[e];
            adj_vert[cursor[a]] = b;
            adj_edge[cursor[a]++] = e;
            adj_vert[cursor[b]] = a;
            adj_edge[cursor[b]++] = e;
        }
        if (on_boundary.size() != n) on_boundary.assign(n, 0);
        hash = FNV_SEED;
        hash = fnv1a(hash, n);
        for (auto& e : edges) hash = fnv1a(fnv1a(hash, e.first), e.second);
        for (u32 v = 0; v < n; ++v)
            if (on_boundary[v]) hash = fnv1a(hash, v);
    }
};

struct SlabEdgeInfo {
    u8 kind;  // 0 = fiber-edge copy, 1 = base-edge copy
    u8 dir;   // for base edges: 1 = +x, 2 = +y
    u32 base_widx;
    u32 fiber_a, fiber_b;  // fiber endpoints (equal for base edges)
};

// Product graph over an optionally masked window. Vertices are
// (alive base point, fiber index); vid = base_rank * |S| + s.
struct SlabGraph {
    Graph g;
    BaseWindow base;
    FiberGraph fiber;
    std::vector<u8> alive;         // by window index
    std::vector<u32> rank;         // window index -> dense base rank (NPOS32 if dead)
    std::vector<u32> rank_widx;    // dense base rank -> window index
    std::vector<SlabEdgeInfo> einfo;
    u32 base_edge_count = 0;

    u32 base_count() const { return (u32)rank_widx.size(); }

    bool alive_at(int x, int y) const { return base.contains(x, y) && alive[base.index(x, y)]; }

    u32 vid(int x, int y, u32 s) const { return rank[base.index(x, y)] * fiber.n + s; }
    u32 vid_widx(u32 widx, u32 s) const { return rank[widx] * fiber.n + s; }

    std::pair<int, int> base_of(u32 v) const { return base.point(rank_widx[v / fiber.n]); }
    u32 base_widx_of(u32 v) const { return rank_widx[v / fiber.n]; }
    u32 fiber_of(u32 v) const { return v % fiber.n; }

    // fattened set over a list of base points
    std::vector<u32> fatten(const std::vector<std::pair<int, int>>& pts) const {
        std::vector<u32> out;
        out.reserve(pts.size() * fiber.n);
        for (auto& [x, y] : pts)
            if (alive_at(x, y))
                for (u32 s = 0; s < fiber.n; ++s) out.push_back(vid(x, y, s));
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }
};

inline SlabGraph build_slab(const BaseWindow& base, const FiberGraph& fiber,
                            const std::vector<u8>& mask = {}) {
    base.validate();
    if (fiber.adj.size() != fiber.n) throw std::invalid_argument("fiber not finalized");
    SlabGraph s;
    s.base = base;
    s.fiber = fiber;
    s.alive = mask.empty() ? std::vector<u8>(base.count(), 1) : mask;
    if (s.alive.size() != base.count()) throw std::invalid_argument("mask size mismatch");
    s.rank.assign(base.count(), NPOS32);
    for (u32 w = 0; w < base.count(); ++w)
        if (s.alive[w]) {
            s.rank[w] = (u32)s.rank_widx.size();
            s.rank_widx.push_back(w);
        }
    if (s.rank_widx.empty()) throw std::invalid_argument("mask kills the whole window");
    s.g.n = s.base_count() * fiber.n;

    // edge ids: lexicographic on (base point, direction, fiber index);
    // direction order is fiber edges, then +x, then +y
    for (u32 r = 0; r < s.base_count(); ++r) {
        u32 w = s.rank_widx[r];
        auto [x, y] = base.point(w);
        for (u32 fe = 0; fe < fiber.edges.size(); ++fe) {
            auto [a, b] = fiber.edges[fe];
            s.g.edges.push_back({r * fiber.n + a, r * fiber.n + b});
            s.einfo.push_back({0, 0, w, a, b});
        }
        if (s.alive_at(x + 1, y)) {
            u32 r2 = s.rank[base.index(x + 1, y)];
            for (u32 f = 0; f < fiber.n; ++f) {
                s.g.edges.push_back({r * fiber.n + f, r2 * fiber.n + f});
                s.einfo.push_back({1, 1, w, f, f});
                ++s.base_edge_count;
            }
        }
        if (s.alive_at(x, y + 1)) {
            u32 r2 = s.rank[base.index(x, y + 1)];
            for (u32 f = 0; f < fiber.n; ++f) {
                s.g.edges.push_back({r * fiber.n + f, r2 * fiber.n + f});
                s.einfo.push_back({1, 2, w, f, f});
                ++s.base_edge_count;
            }
        }
    }

    // wired boundary = fibers over base points with a missing lattice neighbor
    s.g.on_boundary.assign(s.g.n, 0);
    for (u32 r = 0; r < s.base_count(); ++r) {
        auto [x, y] = base.point(s.rank_widx[r]);
        bool edge_of_domain = !s.alive_at(x + 1, y) || !s.alive_at(x - 1, y) ||
                              !s.alive_at(x, y + 1) || !s.alive_at(x, y - 1);
        if (edge_of_domain)
            for (u32 f = 0; f < fiber.n; ++f) s.g.on_boundary[r * fiber.n + f] = 1;
    }
    s.g.build_adjacency();
    return s;
}

// l1 ball mask helper for one-arm domains
inline std::vector<u8> l1_ball_mask(const BaseWindow& w, int cx, int cy, int R) {
    std::vector<u8> m(w.count(), 0);
    for (int x = w.x0; x <= w.x1; ++x)
        for (int y = w.y0; y <= w.y1; ++y)
            if (l1(x, y, cx, cy) <= R) m[w.index(x, y)] = 1;
    return m;
}

struct BoxSets {
    std::vector<u32> ball;    // fattened Lambda_R(z)
    std::vector<u32> sphere;  // fattened base points at distance exactly R
};

inline BoxSets box(const SlabGraph& s, u32 z, int R) {
    if (R < 0) throw std::invalid_argument("box radius must be >= 0");
    auto [cx, cy] = s.base_of(z);
    BoxSets out;
    for (int x = cx - R; x <= cx + R; ++x)
        for (int y = cy - R; y <= cy + R; ++y) {
            if (!s.alive_at(x, y)) continue;
            int d = l1(x, y, cx, cy);
            if (d > R) continue;
            for (u32 f = 0; f < s.fiber.n; ++f) {
                out.ball.push_back(s.vid(x, y, f));
                if (d == R) out.sphere.push_back(s.vid(x, y, f));
            }
        }
    std::sort(out.ball.begin(), out.ball.end());
    std::sort(out.sphere.begin(), out.sphere.end());
    if (R == 0) out.sphere = out.ball;
    return out;
}

// Rectangle of the base, usually read fattened ("bar" of [a,b]x[c,d]).
struct RectRegion {
    int a = 0, b = 0, c = 0, d = 0;
    bool fattened = true;

    void validate() const {
        if (a > b || c > d) throw std::invalid_argument("bad rectangle");
    }
    bool contains(int x, int y) const { return x >= a && x <= b && y >= c && y <= d; }

    std::vector<std::pair<int, int>> left_side() const {
        std::vector<std::pair<int, int>> v;
        for (int y = c; y <= d; ++y) v.push_back({a, y});
        return v;
    }
    std::vector<std::pair<int, int>> right_side() const {
        std::vector<std::pair<int, int>> v;
        for (int y = c; y <= d; ++y) v.push_back({b, y});
        return v;
    }
    std::vector<std::pair<int, int>> bottom_side() const {
        std::vector<std::pair<int, int>> v;
        for (int x = a; x <= b; ++x) v.push_back({x, c});
        return v;
    }
    std::vector<std::pair<int, int>> top_side() const {
        std::vector<std::pair<int, int>> v;
        for (int x = a; x <= b; ++x) v.push_back({x, d});
        return v;
    }
    std::vector<std::pair<int, int>> all_points() const {
        std::vector<std::pair<int, int>> v;
        for (int x = a; x <= b; ++x)
            for (int y = c; y <= d; ++y) v.push_back({x, y});
        return v;
    }
};

// membership mask over slab vertices for an (implicitly fattened) rectangle
inline std::vector<u8> region_mask(const SlabGraph& s, const RectRegion& r) {
    std::vector<u8> m(s.g.n, 0);
    for (u32 v = 0; v < s.g.n; ++v) {
        auto [x, y] = s.base_of(v);
        if (r.contains(x, y)) m[v] = 1;
    }
    return m;
}

// Finite-range translation-invariant coupling on the base lattice.
struct CouplingJ {
    int M = 1;
    std::map<std::pair<int, int>, double> table;

    double at(int dx, int dy) const {
        auto it = table.find({dx, dy});
        return it == table.end() ? 0.0 : it->second;
    }

    void validate() const {
        if (M < 1) throw std::invalid_argument("coupling cutoff must be >= 1");
        for (auto& [d, j] : table) {
            auto [dx, dy] = d;
            if (j < 0) throw std::invalid_argument("negative coupling");
            if (j > 0 && std::abs(dx) + std::abs(dy) > M)
                throw std::invalid_argument("coupling positive beyond cutoff");
            for (auto [sx, sy] : {std::pair{-dx, -dy}, {dx, -dy}, {-dx, dy}, {-dy, dx}})
                if (at(sx, sy) != j)
                    throw std::invalid_argument("coupling table breaks lattice symmetry at (" +
                                                std::to_string(dx) + "," + std::to_string(dy) + ")");
        }
    }
};

struct WeightedGraph {
    Graph g;
    BaseWindow base;
    std::vector<double> coupling;  // per edge

    // beta,q -> per-edge open probability p_e = 1 - exp(-beta J_e)
    std::vector<double> edge_probs(double beta) const {
        std::vector<double> p(coupling.size());
        for (std::size_t e = 0; e < coupling.size(); ++e)
            p[e] = 1.0 - std::exp(-beta * coupling[e]);
        return p;
    }
};

inline WeightedGraph build_long_range(const BaseWindow& base, const CouplingJ& coupling) {
    base.validate();
    coupling.validate();
    WeightedGraph w;
    w.base = base;
    w.g.n = base.count();

    // displacements with J>0, deduplicated to one orientation, sorted
    std::vector<std::pair<int, int>> disp;
    for (auto& [d, j] : coupling.table)
        if (j > 0 && (d.first > 0 || (d.first == 0 && d.second > 0))) disp.push_back(d);
    std::sort(disp.begin(), disp.end());

    for (u32 idx = 0; idx < base.count(); ++idx) {
        auto [x, y] = base.point(idx);
        for (auto [dx, dy] : disp) {
            if (!base.contains(x + dx, y + dy)) continue;
            w.g.edges.push_back({idx, base.index(x + dx, y + dy)});
            w.coupling.push_back(coupling.at(dx, dy));
        }
    }
    w.g.on_boundary.assign(w.g.n, 0);
    for (u32 idx = 0; idx < base.count(); ++idx) {
        auto [x, y] = base.point(idx);
        if (x == base.x0 || x == base.x1 || y == base.y0 || y == base.y1) w.g.on_boundary[idx] = 1;
    }
    w.g.build_adjacency();
    return w;
}

} // namespace rcslab
