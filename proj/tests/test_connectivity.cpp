#include <catch2/catch_amalgamated.hpp>

#include "rcslab/connectivity.hpp"
#include "rcslab/rng.hpp"

using namespace rcslab;

namespace {

u32 eid_of(const Graph& g, u32 a, u32 b) {
    if (a > b) std::swap(a, b);
    for (u32 e = 0; e < g.edge_count(); ++e)
        if (g.edges[e] == std::make_pair(a, b)) return e;
    throw std::logic_error("no such edge in test fixture");
}

void open_edge(const SlabGraph& s, BondConfig& open, u32 a, u32 b) {
    open[eid_of(s.g, a, b)] = 1;
}

}  // namespace

TEST_CASE("component labels ascend with the smallest member vid") {
    SlabGraph s = build_slab({0, 2, 0, 2}, fiber_trivial());
    BondConfig open(s.g.edge_count(), 0);
    auto all_closed = components(s.g, open);
    REQUIRE(all_closed.count == 9);
    for (u32 v = 0; v < 9; ++v) REQUIRE(all_closed.label[v] == v);

    open_edge(s, open, s.vid(1, 0, 0), s.vid(1, 1, 0));
    auto lab = components(s.g, open);
    REQUIRE(lab.count == 8);
    REQUIRE(lab.label[s.vid(1, 0, 0)] == lab.label[s.vid(1, 1, 0)]);
    REQUIRE(lab.label[s.vid(1, 2, 0)] == lab.label[s.vid(1, 1, 0)] + 1);
    REQUIRE(lab.label[s.vid(2, 2, 0)] == 7);
}

TEST_CASE("component labeling respects a vertex region") {
    SlabGraph s = build_slab({0, 2, 0, 2}, fiber_trivial());
    BondConfig open(s.g.edge_count(), 1);
    std::vector<u8> region(s.g.n, 0);
    for (int x = 0; x <= 1; ++x)
        for (int y = 0; y <= 2; ++y) region[s.vid(x, y, 0)] = 1;
    auto lab = components(s.g, open, &region);
    REQUIRE(lab.count == 1);
    for (int y = 0; y <= 2; ++y) REQUIRE(lab.label[s.vid(2, y, 0)] == NPOS32);
    REQUIRE(lab.label[s.vid(0, 0, 0)] == 0);
    REQUIRE(lab.label[s.vid(1, 2, 0)] == 0);
}

TEST_CASE("point to point connectivity with a region constraint") {
    SlabGraph s = build_slab({0, 2, 0, 0}, fiber_trivial());  // path 0 - 1 - 2
    u32 v0 = s.vid(0, 0, 0), v1 = s.vid(1, 0, 0), v2 = s.vid(2, 0, 0);
    BondConfig open(s.g.edge_count(), 1);

    REQUIRE(connected_in(s.g, open, {v0}, {v2}));
    BondConfig cut = open;
    cut[eid_of(s.g, v1, v2)] = 0;
    REQUIRE_FALSE(connected_in(s.g, cut, {v0}, {v2}));

    // a shared vertex connects at distance zero, open edges or not
    BondConfig closed(s.g.edge_count(), 0);
    REQUIRE(connected_in(s.g, closed, {v1}, {v1, v2}));

    // region excluding the middle vertex blocks the only route
    std::vector<u8> D(s.g.n, 1);
    D[v1] = 0;
    REQUIRE_FALSE(connected_in(s.g, open, {v0}, {v2}, &D));
}

TEST_CASE("exempt start lets the source sit outside the region") {
    SlabGraph s = build_slab({0, 2, 0, 0}, fiber_trivial());
    u32 v0 = s.vid(0, 0, 0), v1 = s.vid(1, 0, 0), v2 = s.vid(2, 0, 0);
    BondConfig open(s.g.edge_count(), 1);
    std::vector<u8> D(s.g.n, 1);
    D[v0] = 0;
    REQUIRE_FALSE(connected_in(s.g, open, {v0}, {v2}, &D));
    REQUIRE(connected_in(s.g, open, {v0}, {v2}, &D, true));
    // but intermediate vertices must still lie inside the region
    std::vector<u8> Dmid(s.g.n, 1);
    Dmid[v1] = 0;
    REQUIRE_FALSE(connected_in(s.g, open, {v0}, {v2}, &Dmid, true));
    // and a start vertex that is itself a target short-circuits
    REQUIRE(connected_in(s.g, BondConfig(s.g.edge_count(), 0), {v0}, {v0}, &D, true));
}

TEST_CASE("hard direction is the long way across") {
    REQUIRE(hard_direction({0, 5, 0, 3}) == 'h');
    REQUIRE(hard_direction({0, 2, 0, 4}) == 'v');
    REQUIRE(hard_direction({0, 3, 0, 3}) == 'h');
}

TEST_CASE("crossings follow drawn paths") {
    SlabGraph s = build_slab({0, 2, 0, 2}, fiber_trivial());
    RectRegion rect{0, 2, 0, 2};
    BondConfig open(s.g.edge_count(), 0);
    REQUIRE_FALSE(has_crossing(s, open, rect, 'h'));

    // horizontal path along the middle row
    open_edge(s, open, s.vid(0, 1, 0), s.vid(1, 1, 0));
    open_edge(s, open, s.vid(1, 1, 0), s.vid(2, 1, 0));
    REQUIRE(has_crossing(s, open, rect, 'h'));
    REQUIRE_FALSE(has_crossing(s, open, rect, 'v'));

    // break it
    BondConfig broken = open;
    broken[eid_of(s.g, s.vid(1, 1, 0), s.vid(2, 1, 0))] = 0;
    REQUIRE_FALSE(has_crossing(s, broken, rect, 'h'));

    // an L through the corner crosses both ways
    BondConfig ell(s.g.edge_count(), 0);
    open_edge(s, ell, s.vid(0, 0, 0), s.vid(1, 0, 0));
    open_edge(s, ell, s.vid(1, 0, 0), s.vid(2, 0, 0));
    open_edge(s, ell, s.vid(2, 0, 0), s.vid(2, 1, 0));
    open_edge(s, ell, s.vid(2, 1, 0), s.vid(2, 2, 0));
    REQUIRE(has_crossing(s, ell, rect, 'h'));
    REQUIRE(has_crossing(s, ell, rect, 'v'));

    // a path that works in the full window fails in a sub-rectangle it exits
    RectRegion top{0, 2, 1, 2};
    REQUIRE_FALSE(has_crossing(s, ell, top, 'h'));
}

TEST_CASE("crossings can run through the fiber") {
    SlabGraph s = build_slab({0, 1, 0, 0}, fiber_k2());
    RectRegion rect{0, 1, 0, 0};
    // (0,0,0) - (0,0,1) - (1,0,1): reaches the right side on the other layer
    BondConfig open(s.g.edge_count(), 0);
    open_edge(s, open, s.vid(0, 0, 0), s.vid(0, 0, 1));
    open_edge(s, open, s.vid(0, 0, 1), s.vid(1, 0, 1));
    REQUIRE(has_crossing(s, open, rect, 'h'));
}

TEST_CASE("two far open columns are strongly separated") {
    SlabGraph s = build_slab({0, 7, 0, 2}, fiber_trivial());
    RectRegion rect{0, 7, 0, 2};
    BondConfig open(s.g.edge_count(), 0);
    for (int x : {1, 5})
        for (int y = 0; y < 2; ++y) open_edge(s, open, s.vid(x, y, 0), s.vid(x, y + 1, 0));
    auto rep = strongly_separated_crossings(s, open, rect);
    REQUIRE(rep.K == 2);
    REQUIRE(rep.hamming_lb == 1);
    REQUIRE(rep.witnesses.size() == 2);

    // all open: one giant cluster, one witness, vacuous bound
    BondConfig full(s.g.edge_count(), 1);
    auto one = strongly_separated_crossings(s, full, rect);
    REQUIRE(one.K == 1);
    REQUIRE(one.hamming_lb == 0);

    // all closed: nothing crosses
    BondConfig none(s.g.edge_count(), 0);
    auto zero = strongly_separated_crossings(s, none, rect);
    REQUIRE(zero.K == 0);
    REQUIRE(zero.hamming_lb == 0);
}

TEST_CASE("overlapping fiber layers collapse to one witness") {
    SlabGraph s = build_slab({0, 3, 0, 2}, fiber_k2());
    RectRegion rect{0, 3, 0, 2};
    // both fiber layers of column x = 1 cross vertically, but they project to
    // the same base points, so only one can be kept
    BondConfig open(s.g.edge_count(), 0);
    for (u32 layer : {0u, 1u})
        for (int y = 0; y < 2; ++y)
            open_edge(s, open, s.vid(1, y, layer), s.vid(1, y + 1, layer));
    auto rep = strongly_separated_crossings(s, open, rect);
    REQUIRE(rep.K == 1);

    // columns at different x in different layers keep disjoint projections
    BondConfig apart(s.g.edge_count(), 0);
    for (int y = 0; y < 2; ++y) {
        open_edge(s, apart, s.vid(0, y, 0), s.vid(0, y + 1, 0));
        open_edge(s, apart, s.vid(3, y, 1), s.vid(3, y + 1, 1));
    }
    auto two = strongly_separated_crossings(s, apart, rect);
    REQUIRE(two.K == 2);
    REQUIRE(two.hamming_lb == 1);
}

TEST_CASE("separation bounds the flip distance to a crossing, exhaustively") {
    for (int b : {2, 3}) {
        SlabGraph s = build_slab({0, b, 0, 1}, fiber_trivial());
        RectRegion rect{0, b, 0, 1};
        u32 E = s.g.edge_count();
        u64 total = (u64)1 << E;
        std::vector<u8> in_event(total, 0);
        for (u64 bits = 0; bits < total; ++bits)
            in_event[bits] = has_crossing(s, config_from_bits(bits, E), rect, 'h');
        auto dist = hamming_table(E, in_event);
        for (u64 bits = 0; bits < total; ++bits) {
            auto rep = strongly_separated_crossings(s, config_from_bits(bits, E), rect);
            REQUIRE(dist[bits] >= rep.hamming_lb);
        }
    }
}

TEST_CASE("separation bound sampled on a bilayer window") {
    SlabGraph s = build_slab({0, 2, 0, 1}, fiber_k2());
    RectRegion rect{0, 2, 0, 1};
    u32 E = s.g.edge_count();
    REQUIRE(E == 20);
    u64 total = (u64)1 << E;
    std::vector<u8> in_event(total, 0);
    for (u64 bits = 0; bits < total; ++bits)
        in_event[bits] = has_crossing(s, config_from_bits(bits, E), rect, 'h');
    auto dist = hamming_table(E, in_event);
    Rng rng(2026);
    u32 max_lb_seen = 0;
    for (int t = 0; t < 4000; ++t) {
        u64 bits = rng.next() & (total - 1);
        auto rep = strongly_separated_crossings(s, config_from_bits(bits, E), rect);
        REQUIRE(dist[bits] >= rep.hamming_lb);
        max_lb_seen = std::max(max_lb_seen, rep.hamming_lb);
    }
    REQUIRE(max_lb_seen >= 1);  // the sample must exercise a nontrivial bound
}
