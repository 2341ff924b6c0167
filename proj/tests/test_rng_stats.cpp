#include <catch2/catch_amalgamated.hpp>

#include "rcslab/rng.hpp"
#include "rcslab/stats.hpp"

using namespace rcslab;
using u64 = std::uint64_t;

TEST_CASE("derived seeds differ by stream and master") {
    u64 m = 0x1234;
    REQUIRE(derive_seed(m, 0) != derive_seed(m, 1));
    REQUIRE(derive_seed(m, 0) != derive_seed(m + 1, 0));
    REQUIRE(derive_seed(m, 7) == derive_seed(m, 7));
}

TEST_CASE("generator replays from a seed") {
    Rng a(99), b(99);
    for (int i = 0; i < 1000; ++i) REQUIRE(a.next() == b.next());
}

TEST_CASE("u01 stays in the half-open unit interval") {
    Rng r(5);
    for (int i = 0; i < 20000; ++i) {
        double x = r.u01();
        REQUIRE(x >= 0.0);
        REQUIRE(x < 1.0);
    }
}

TEST_CASE("below never reaches its bound and covers small ranges") {
    Rng r(6);
    bool seen[7] = {};
    for (int i = 0; i < 20000; ++i) {
        u64 v = r.below(7);
        REQUIRE(v < 7);
        seen[v] = true;
    }
    for (bool s : seen) REQUIRE(s);
}

TEST_CASE("bernoulli frequency tracks its parameter") {
    Rng r(7);
    int n = 100000, hits = 0;
    for (int i = 0; i < n; ++i) hits += r.bernoulli(0.3);
    double ph = hits / (double)n;
    // 5 sigma of a fair coin-ish draw
    REQUIRE(std::abs(ph - 0.3) < 5 * std::sqrt(0.3 * 0.7 / n));
    int all = 0, none = 0;
    for (int i = 0; i < 100; ++i) {
        all += r.bernoulli(1.0);
        none += r.bernoulli(0.0);
    }
    REQUIRE(all == 100);
    REQUIRE(none == 0);
}

TEST_CASE("state save and restore resumes the exact stream") {
    Rng r(123);
    for (int i = 0; i < 37; ++i) r.next();
    std::string s = r.save();
    std::vector<u64> ahead;
    for (int i = 0; i < 10; ++i) ahead.push_back(r.next());
    Rng fresh(1);
    fresh.restore(s);
    for (int i = 0; i < 10; ++i) REQUIRE(fresh.next() == ahead[i]);
}

TEST_CASE("wilson interval basics") {
    Interval i = wilson(50, 100);
    REQUIRE(i.contains(0.5));
    REQUIRE(i.lo > 0.39);
    REQUIRE(i.hi < 0.61);
    Interval zero = wilson(0, 1000);
    REQUIRE(zero.lo <= 1e-15);
    REQUIRE(zero.hi < 0.01);
    Interval full = wilson(1000, 1000);
    REQUIRE(full.hi == 1.0);
    REQUIRE(full.lo > 0.99);
    // effective (fractional) sample sizes are allowed
    Interval frac = wilson(12.5, 25.0);
    REQUIRE(frac.contains(0.5));
    Interval empty = wilson(0, 0);
    REQUIRE(empty.lo == 0.0);
    REQUIRE(empty.hi == 1.0);
}

TEST_CASE("autocorrelation time is 1/2 for iid and grows with duplication") {
    Rng r(8);
    std::vector<double> iid;
    for (int i = 0; i < 4000; ++i) iid.push_back(r.u01());
    double tau = integrated_autocorr_time(iid);
    REQUIRE(tau < 1.5);

    // duplicate every draw 8 times: tau should land near 4
    std::vector<double> dup;
    for (int i = 0; i < 500; ++i) {
        double x = r.u01();
        for (int k = 0; k < 8; ++k) dup.push_back(x);
    }
    double tau8 = integrated_autocorr_time(dup);
    REQUIRE(tau8 > 2.5);

    std::vector<double> constant(100, 3.0);
    REQUIRE(integrated_autocorr_time(constant) == 0.5);
}

TEST_CASE("effective sample size clamps into [1, n]") {
    REQUIRE(effective_sample_size(1000.0, 0.5) == 1000.0);
    REQUIRE(effective_sample_size(1000.0, 4.0) == 125.0);
    REQUIRE(effective_sample_size(10.0, 1e9) == 1.0);
    REQUIRE(effective_sample_size(0.0, 1.0) == 0.0);
}

TEST_CASE("line fit recovers an exact affine relation") {
    std::vector<double> x{1, 2, 3, 4, 5}, y;
    for (double v : x) y.push_back(2.0 + 3.0 * v);
    LineFit f = fit_line(x, y);
    REQUIRE(f.slope == Catch::Approx(3.0).epsilon(1e-12));
    REQUIRE(f.intercept == Catch::Approx(2.0).epsilon(1e-12));
    REQUIRE(f.r2 == Catch::Approx(1.0).epsilon(1e-12));
    REQUIRE(f.points == 5);

    LineFit degenerate = fit_line({1.0}, {2.0});
    REQUIRE(degenerate.points == 1);
    REQUIRE(degenerate.slope == 0.0);
}
