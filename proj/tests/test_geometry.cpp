#include <catch2/catch_amalgamated.hpp>

#include <fstream>
#include <set>

#include "rcslab/connectivity.hpp"
#include "rcslab/geometry.hpp"

using namespace rcslab;

TEST_CASE("fiber builders") {
    FiberGraph t = fiber_trivial();
    REQUIRE(t.n == 1);
    REQUIRE(t.edges.empty());

    FiberGraph k2 = fiber_k2();
    REQUIRE(k2.n == 2);
    REQUIRE(k2.edges.size() == 1);
    REQUIRE(k2.distance(0, 1) == 1);

    FiberGraph p4 = fiber_by_name("path4");
    REQUIRE(p4.n == 4);
    REQUIRE(p4.distance(0, 3) == 3);

    FiberGraph c5 = fiber_by_name("cycle5");
    REQUIRE(c5.n == 5);
    REQUIRE(c5.distance(0, 3) == 2);  // around the short way

    REQUIRE_THROWS_AS(fiber_by_name("blob"), std::invalid_argument);
}

TEST_CASE("fiber geodesics are canonical and valid") {
    FiberGraph c6 = fiber_cycle(6);
    auto g = c6.geodesic(0, 3);
    REQUIRE(g.size() == 4);
    REQUIRE(g.front() == 0);
    REQUIRE(g.back() == 3);
    for (std::size_t i = 0; i + 1 < g.size(); ++i)
        REQUIRE(c6.distance(g[i], 3) == c6.distance(g[i + 1], 3) + 1);
    // deterministic: next_toward picks the smallest-index closer neighbor
    REQUIRE(c6.geodesic(0, 3) == c6.geodesic(0, 3));
    REQUIRE(c6.geodesic(2, 2) == std::vector<u32>{2});
}

TEST_CASE("disconnected fiber is rejected and names a component") {
    std::string path = "/tmp/rcslab_fiber_disc.txt";
    {
        std::ofstream f(path);
        f << "4\n0 1\n2 3\n";
    }
    try {
        fiber_by_name("file:" + path);
        FAIL("expected a rejection");
    } catch (const std::invalid_argument& e) {
        std::string msg = e.what();
        REQUIRE(msg.find("disconnected") != std::string::npos);
        REQUIRE(msg.find("{") != std::string::npos);
    }
}

TEST_CASE("fiber file roundtrip") {
    std::string path = "/tmp/rcslab_fiber_tri.txt";
    {
        std::ofstream f(path);
        f << "3\n0 1\n1 2\n0 2\n";
    }
    FiberGraph f = fiber_by_name("file:" + path);
    REQUIRE(f.n == 3);
    REQUIRE(f.edges.size() == 3);
    REQUIRE(f.distance(0, 2) == 1);
}

TEST_CASE("window indexing roundtrip") {
    BaseWindow w{-2, 3, 1, 4};
    REQUIRE(w.nx() == 6);
    REQUIRE(w.ny() == 4);
    REQUIRE(w.count() == 24);
    for (u32 i = 0; i < w.count(); ++i) {
        auto [x, y] = w.point(i);
        REQUIRE(w.contains(x, y));
        REQUIRE(w.index(x, y) == i);
    }
    REQUIRE_FALSE(w.contains(4, 2));
}

TEST_CASE("slab edge count matches the product formula") {
    // |E(G x S)| = |V_base| |E_fiber| + |E_base| |V_fiber|
    struct Case {
        BaseWindow w;
        FiberGraph f;
    };
    for (auto& [w, f] : {Case{{0, 3, 0, 2}, fiber_k2()},
                         Case{{0, 1, 0, 0}, fiber_k2()},
                         Case{{0, 4, 0, 4}, fiber_trivial()},
                         Case{{-1, 1, -1, 1}, fiber_cycle(4)},
                         Case{{0, 2, 0, 1}, fiber_path(3)}}) {
        SlabGraph s = build_slab(w, f);
        u64 vb = w.count();
        u64 eb = (u64)(w.nx() - 1) * w.ny() + (u64)w.nx() * (w.ny() - 1);
        REQUIRE(s.g.edge_count() == vb * f.edges.size() + eb * f.n);
        REQUIRE(s.g.n == vb * f.n);
    }
}

TEST_CASE("slab projections invert the vertex id") {
    SlabGraph s = build_slab({0, 3, 0, 2}, fiber_path(3));
    for (u32 v = 0; v < s.g.n; ++v) {
        auto [x, y] = s.base_of(v);
        REQUIRE(s.vid(x, y, s.fiber_of(v)) == v);
    }
}

TEST_CASE("edges are stored with ordered endpoints exactly once") {
    SlabGraph s = build_slab({0, 2, 0, 2}, fiber_k2());
    std::set<std::pair<u32, u32>> seen;
    for (auto& [a, b] : s.g.edges) {
        REQUIRE(a < b);
        REQUIRE(seen.insert({a, b}).second);
    }
}

TEST_CASE("fattening is monotone and commutes with union") {
    SlabGraph s = build_slab({0, 3, 0, 3}, fiber_k2());
    std::vector<std::pair<int, int>> A{{0, 0}, {1, 1}}, B{{1, 1}, {2, 3}}, AB;
    AB = A;
    AB.insert(AB.end(), B.begin(), B.end());
    auto fa = s.fatten(A), fb = s.fatten(B), fab = s.fatten(AB);
    REQUIRE(std::includes(fab.begin(), fab.end(), fa.begin(), fa.end()));
    std::vector<u32> uni;
    std::set_union(fa.begin(), fa.end(), fb.begin(), fb.end(), std::back_inserter(uni));
    REQUIRE(uni == fab);
    // fattening multiplies points by the fiber size
    REQUIRE(fa.size() == 2 * 2);
}

TEST_CASE("l1 ball masks count the right base points") {
    BaseWindow w{-3, 3, -3, 3};
    auto m1 = l1_ball_mask(w, 0, 0, 1);
    auto m2 = l1_ball_mask(w, 0, 0, 2);
    int c1 = 0, c2 = 0;
    for (u8 b : m1) c1 += b;
    for (u8 b : m2) c2 += b;
    REQUIRE(c1 == 5);   // plus shape
    REQUIRE(c2 == 13);  // 1 + 4 + 8
    SlabGraph s2 = build_slab(w, fiber_k2(), m2);
    REQUIRE(s2.g.n == 26);
}

TEST_CASE("exact-distance sphere at radius one is the punctured ball") {
    BaseWindow w{-2, 2, -2, 2};
    SlabGraph s = build_slab(w, fiber_trivial());
    u32 center = s.vid(0, 0, 0);
    BoxSets b = box(s, center, 1);
    REQUIRE(b.ball.size() == 5);
    REQUIRE(b.sphere.size() == 4);
    for (u32 v : b.sphere) REQUIRE(v != center);
    // sphere = ball minus the fattened center
    std::vector<u32> punctured;
    for (u32 v : b.ball)
        if (v != center) punctured.push_back(v);
    REQUIRE(b.sphere == punctured);
}

TEST_CASE("boxes nest and spheres use exact distance") {
    SlabGraph s = build_slab({-4, 4, -4, 4}, fiber_k2());
    u32 z = s.vid(0, 0, 0);
    BoxSets b1 = box(s, z, 1), b2 = box(s, z, 2);
    REQUIRE(std::includes(b2.ball.begin(), b2.ball.end(), b1.ball.begin(), b1.ball.end()));
    for (u32 v : b2.sphere) {
        auto [x, y] = s.base_of(v);
        REQUIRE(std::abs(x) + std::abs(y) == 2);
    }
    REQUIRE(b2.ball.size() == 13 * 2);
    REQUIRE(b2.sphere.size() == 8 * 2);
}

TEST_CASE("window boundary marks points with a missing lattice neighbor") {
    SlabGraph s = build_slab({0, 3, 0, 2}, fiber_k2());
    for (u32 v = 0; v < s.g.n; ++v) {
        auto [x, y] = s.base_of(v);
        bool edge_of_window = x == 0 || x == 3 || y == 0 || y == 2;
        REQUIRE((s.g.on_boundary[v] != 0) == edge_of_window);
    }
}

TEST_CASE("masked slabs mark mask-boundary points too") {
    BaseWindow w{-2, 2, -2, 2};
    SlabGraph s = build_slab(w, fiber_trivial(), l1_ball_mask(w, 0, 0, 2));
    // every point of the diamond except the center misses some neighbor
    for (u32 v = 0; v < s.g.n; ++v) {
        auto [x, y] = s.base_of(v);
        if (x == 0 && y == 0) REQUIRE(s.g.on_boundary[v] == 0);
        if (std::abs(x) + std::abs(y) == 2) REQUIRE(s.g.on_boundary[v] == 1);
    }
}

TEST_CASE("rect regions expose their sides") {
    RectRegion r{1, 5, 0, 3};
    REQUIRE(r.left_side().size() == 4);
    REQUIRE(r.right_side().size() == 4);
    REQUIRE(r.bottom_side().size() == 5);
    REQUIRE(r.top_side().size() == 5);
    REQUIRE(hard_direction(r) == 'h');
    RectRegion tall{0, 1, 0, 5};
    REQUIRE(hard_direction(tall) == 'v');
}

TEST_CASE("graph hash separates structure and boundary") {
    SlabGraph a = build_slab({0, 2, 0, 2}, fiber_trivial());
    SlabGraph b = build_slab({0, 2, 0, 2}, fiber_trivial());
    REQUIRE(a.g.hash == b.g.hash);
    SlabGraph c = build_slab({0, 2, 0, 1}, fiber_trivial());
    REQUIRE(a.g.hash != c.g.hash);
    Graph d = a.g;
    d.on_boundary[4] ^= 1;
    d.build_adjacency();
    REQUIRE(d.hash != a.g.hash);
}

TEST_CASE("coupling tables enforce lattice symmetry") {
    CouplingJ J;
    J.M = 2;
    for (auto [dx, dy] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}}) J.table[{dx, dy}] = 1.0;
    REQUIRE_NOTHROW(J.validate());
    J.table[{2, 0}] = 0.5;  // missing the rotated copies
    REQUIRE_THROWS_AS(J.validate(), std::invalid_argument);
    for (auto [dx, dy] : {std::pair{-2, 0}, {0, 2}, {0, -2}}) J.table[{dx, dy}] = 0.5;
    REQUIRE_NOTHROW(J.validate());
    CouplingJ far;
    far.M = 1;
    for (auto [dx, dy] : {std::pair{2, 0}, {-2, 0}, {0, 2}, {0, -2}}) far.table[{dx, dy}] = 1.0;
    REQUIRE_THROWS_AS(far.validate(), std::invalid_argument);
}

TEST_CASE("nearest-neighbour coupling reproduces the plain lattice") {
    BaseWindow w{0, 3, 0, 2};
    CouplingJ J;
    J.M = 1;
    for (auto [dx, dy] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}}) J.table[{dx, dy}] = 1.0;
    WeightedGraph wg = build_long_range(w, J);
    SlabGraph s = build_slab(w, fiber_trivial());
    REQUIRE(wg.g.n == s.g.n);
    std::set<std::pair<u32, u32>> a(wg.g.edges.begin(), wg.g.edges.end());
    std::set<std::pair<u32, u32>> b(s.g.edges.begin(), s.g.edges.end());
    REQUIRE(a == b);
    for (double j : wg.coupling) REQUIRE(j == 1.0);
    auto probs = wg.edge_probs(0.5);
    for (double p : probs) REQUIRE(p == Catch::Approx(1.0 - std::exp(-0.5)));
}

TEST_CASE("long-range graphs include diagonal and range-two bonds") {
    BaseWindow w{0, 2, 0, 2};
    CouplingJ J;
    J.M = 2;
    for (auto [dx, dy] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}}) J.table[{dx, dy}] = 1.0;
    for (auto [dx, dy] : {std::pair{1, 1}, {1, -1}, {-1, 1}, {-1, -1}}) J.table[{dx, dy}] = 0.25;
    WeightedGraph wg = build_long_range(w, J);
    // 12 axis bonds plus 8 diagonals on a 3x3 window
    REQUIRE(wg.g.edge_count() == 20);
    int diag = 0;
    for (std::size_t e = 0; e < wg.coupling.size(); ++e)
        if (wg.coupling[e] == 0.25) ++diag;
    REQUIRE(diag == 8);
}
