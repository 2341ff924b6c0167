#pragma once
#include <cassert>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rcslab/exact.hpp"
#include "rcslab/geometry.hpp"
#include "rcslab/rng.hpp"
#include "rcslab/stats.hpp"
#include "rcslab/unionfind.hpp"

namespace rcslab {

inline double conditional_open_prob(bool connected_without_e, double p_e, double q) {
    return connected_without_e ? p_e : p_e / (p_e + q * (1.0 - p_e));
}

inline Interval finite_energy_band(double p_e, double q) {
    return {p_e / (p_e + q * (1.0 - p_e)), p_e};
}

// Scratch for the bidirectional search over open edges. Vertex marks are
// stamped with the query number so nothing is cleared between calls.
struct ConnScratch {
    std::vector<u64> mark;
    std::vector<u32> fr[2], nxt;
    u64 stamp = 0;
};

// Is x connected to y in (omega minus edge skip_e)? Wired counts the
// boundary as one vertex, so two boundary touches also connect.
inline bool bidir_connected(const Graph& g, const BondConfig& open, u32 x, u32 y, u32 skip_e,
                            bool wired, ConnScratch& sc) {
    if (x == y) return true;
    if (wired && g.on_boundary[x] && g.on_boundary[y]) return true;
    if (sc.mark.size() != g.n) {
        sc.mark.assign(g.n, 0);
        sc.stamp = 0;
    }
    sc.stamp += 2;
    const u64 mstamp[2] = {sc.stamp, sc.stamp | 1};
    sc.fr[0].assign(1, x);
    sc.fr[1].assign(1, y);
    sc.mark[x] = mstamp[0];
    sc.mark[y] = mstamp[1];
    bool btouch[2] = {wired && g.on_boundary[x] != 0, wired && g.on_boundary[y] != 0};

    auto expand = [&](int s) -> int {  // 1 = connected, 0 = keep going, -1 = side exhausted
        sc.nxt.clear();
        for (u32 v : sc.fr[s]) {
            for (u32 h = g.adj_off[v]; h < g.adj_off[v + 1]; ++h) {
                u32 e = g.adj_edge[h];
                if (e == skip_e || !open[e]) continue;
                u32 w = g.adj_vert[h];
                u64 m = sc.mark[w];
                if (m == mstamp[1 - s]) return 1;
                if (m == mstamp[s]) continue;
                sc.mark[w] = mstamp[s];
                sc.nxt.push_back(w);
                if (wired && g.on_boundary[w]) {
                    btouch[s] = true;
                    if (btouch[1 - s]) return 1;
                }
            }
        }
        sc.fr[s].swap(sc.nxt);
        return sc.fr[s].empty() ? -1 : 0;
    };

    while (true) {
        int s = sc.fr[0].size() <= sc.fr[1].size() ? 0 : 1;
        int r = expand(s);
        if (r == 1) return true;
        if (r == -1) {
            // side s saw its whole cluster; only the wired boundary can still help
            if (!wired || !btouch[s]) return false;
            while (!sc.fr[1 - s].empty()) {
                int r2 = expand(1 - s);
                if (r2 == 1) return true;
                if (btouch[1 - s]) return true;
                if (r2 == -1) break;
            }
            return false;
        }
    }
}

// slow fallback used to cross-check the bidirectional search
inline bool connected_without_edge_rebuild(const Graph& g, const BondConfig& open, u32 x, u32 y,
                                           u32 skip_e, bool wired) {
    UnionFind uf(g.n + 1);
    u32 ghost = g.n;
    for (u32 e = 0; e < g.edge_count(); ++e)
        if (open[e] && e != skip_e) uf.unite(g.edges[e].first, g.edges[e].second);
    if (wired)
        for (u32 v = 0; v < g.n; ++v)
            if (g.on_boundary[v]) uf.unite(v, ghost);
    return uf.connected(x, y);
}

// One heat-bath sweep in ascending edge-id order. Returns edge updates done.
inline u64 heat_bath_sweep(const Graph& g, const ModelParams& mp, BondConfig& open, Rng& rng,
                           ConnScratch& sc) {
    const bool q_is_one = mp.q == 1.0;
    for (u32 e = 0; e < g.edge_count(); ++e) {
        double pe = mp.prob_of_edge(e);
        double pr;
        if (q_is_one) {
            pr = pe;
        } else {
            bool conn = bidir_connected(g, open, g.edges[e].first, g.edges[e].second, e, mp.wired, sc);
            pr = conditional_open_prob(conn, pe, mp.q);
        }
#ifndef NDEBUG
        Interval band = finite_energy_band(pe, mp.q);
        assert(pr >= band.lo - 1e-12 && pr <= band.hi + 1e-12);
#endif
        open[e] = rng.bernoulli(pr) ? 1 : 0;
    }
    return g.edge_count();
}

struct SwScratch {
    UnionFind uf;
    std::vector<u32> color;
};

// One Swendsen-Wang step; integer q only. The ghost cluster (wired) is
// pinned to color 0, other cluster colors are drawn in ascending order of
// the smallest vertex of the cluster.
inline u64 swendsen_wang_step(const Graph& g, const ModelParams& mp, BondConfig& open, Rng& rng,
                              SwScratch& sc) {
    double qr = std::round(mp.q);
    if (std::abs(mp.q - qr) > 1e-9 || qr < 1)
        throw std::invalid_argument("Swendsen-Wang needs integer q >= 1, got " + std::to_string(mp.q));
    u32 q = (u32)qr;
    u32 ghost = g.n;
    sc.uf.reset(g.n + 1);
    for (u32 e = 0; e < g.edge_count(); ++e)
        if (open[e]) sc.uf.unite(g.edges[e].first, g.edges[e].second);
    if (mp.wired)
        for (u32 v = 0; v < g.n; ++v)
            if (g.on_boundary[v]) sc.uf.unite(v, ghost);

    sc.color.assign(g.n + 1, NPOS32);
    if (mp.wired) sc.color[sc.uf.find(ghost)] = 0;
    for (u32 v = 0; v < g.n; ++v) {
        u32 r = sc.uf.find(v);
        if (sc.color[r] == NPOS32) sc.color[r] = (u32)rng.below(q);
    }
    for (u32 e = 0; e < g.edge_count(); ++e) {
        auto [a, b] = g.edges[e];
        open[e] = (sc.color[sc.uf.find(a)] == sc.color[sc.uf.find(b)] && rng.bernoulli(mp.prob_of_edge(e)))
                      ? 1
                      : 0;
    }
    return g.edge_count();
}

struct Observable {
    std::string name;
    std::function<double(const BondConfig&)> eval;
    bool indicator = true;
};

struct ChainSpec {
    u64 sweeps = 10000;      // measured samples
    long long burn_in = -1;  // sweeps to discard; -1 = adaptive
    u64 thin = 1;            // sweeps between measurements
    bool use_sw = false;
    u64 master_seed = 0x5EEDULL;
    u64 chain_index = 0;
    bool keep_series = false;
};

struct SeriesStats {
    std::string name;
    u64 n = 0;
    double mean = 0, tau = 0.5, ess = 0;
    Interval ci{0, 1};
    bool indicator = true;
};

struct ChainResult {
    std::vector<SeriesStats> stats;
    std::vector<std::vector<double>> series;  // kept only on request
    u64 burn_in_used = 0;
    bool burn_in_capped = false;
    u64 edge_updates = 0;
    double seconds = 0;
    BondConfig final_config;
};

inline SeriesStats summarize_series(const std::string& name, const std::vector<double>& v,
                                    bool indicator) {
    SeriesStats st;
    st.name = name;
    st.indicator = indicator;
    st.n = v.size();
    st.mean = mean(v);
    st.tau = integrated_autocorr_time(v);
    st.ess = effective_sample_size((u64)v.size(), st.tau);
    if (indicator) {
        st.ci = wilson(st.mean * st.ess, st.ess);
    } else {
        double s2 = 0;
        for (double x : v) s2 += (x - st.mean) * (x - st.mean);
        s2 = v.size() > 1 ? s2 / (double)(v.size() - 1) : 0.0;
        double half = 1.959963984540054 * std::sqrt(s2 / std::max(1.0, st.ess));
        st.ci = {st.mean - half, st.mean + half};
    }
    return st;
}

inline u64 kBurnInCap = 16384;

// Adaptive burn-in: keep doubling the window until the means over its two
// halves agree within two joint standard errors; at least 1000 sweeps, at
// most kBurnInCap in total.
inline bool burn_in_halves_ok(const std::vector<double>& window) {
    u64 half = window.size() / 2;
    std::vector<double> h1(window.begin(), window.begin() + half);
    std::vector<double> h2(window.begin() + half, window.end());
    double m1 = mean(h1), m2 = mean(h2);
    auto se = [&](const std::vector<double>& h, double m) {
        double s2 = 0;
        for (double x : h) s2 += (x - m) * (x - m);
        s2 = h.size() > 1 ? s2 / (double)(h.size() - 1) : 0.0;
        double ess = effective_sample_size((u64)h.size(), integrated_autocorr_time(h));
        return std::sqrt(s2 / std::max(1.0, ess));
    };
    double sd = std::sqrt(se(h1, m1) * se(h1, m1) + se(h2, m2) * se(h2, m2));
    if (sd == 0) return m1 == m2;
    return std::abs(m1 - m2) < 2 * sd;
}

inline ChainResult run_chain(const Graph& g, const ModelParams& mp, const ChainSpec& spec,
                             const std::vector<Observable>& obs, const BondConfig* init = nullptr) {
    auto t0 = std::chrono::steady_clock::now();
    Rng rng(derive_seed(spec.master_seed, spec.chain_index));
    ChainResult out;
    BondConfig open(g.edge_count(), 0);
    if (init) {
        if (init->size() != g.edge_count()) throw std::invalid_argument("init config size mismatch");
        open = *init;
    } else {
        for (u32 e = 0; e < g.edge_count(); ++e) open[e] = rng.bernoulli(mp.prob_of_edge(e)) ? 1 : 0;
    }
    ConnScratch sc;
    SwScratch sw;
    u64 sweep_no = 0;

    auto one_sweep = [&]() {
        out.edge_updates += spec.use_sw ? swendsen_wang_step(g, mp, open, rng, sw)
                                        : heat_bath_sweep(g, mp, open, rng, sc);
        ++sweep_no;
    };

    auto eval_obs = [&](std::size_t i) -> double {
        try {
            return obs[i].eval(open);
        } catch (const std::exception& ex) {
            throw std::runtime_error("observable '" + obs[i].name + "' failed at sweep " +
                                     std::to_string(sweep_no) + " (master seed " +
                                     std::to_string(spec.master_seed) + ", chain " +
                                     std::to_string(spec.chain_index) + "): " + ex.what());
        }
    };

    // burn-in
    if (spec.burn_in >= 0) {
        for (long long i = 0; i < spec.burn_in; ++i) one_sweep();
        out.burn_in_used = (u64)spec.burn_in;
    } else {
        u64 window = 1024;
        std::vector<double> diag;
        while (true) {
            diag.clear();
            diag.reserve(window);
            for (u64 i = 0; i < window; ++i) {
                one_sweep();
                diag.push_back(obs.empty() ? 0.0 : eval_obs(0));
            }
            out.burn_in_used += window;
            if (burn_in_halves_ok(diag)) break;
            if (out.burn_in_used + 2 * window > kBurnInCap) {
                out.burn_in_capped = true;
                break;
            }
            window *= 2;
        }
    }

    // measurement
    std::vector<std::vector<double>> series(obs.size());
    for (auto& s : series) s.reserve(spec.sweeps);
    for (u64 m = 0; m < spec.sweeps; ++m) {
        for (u64 t = 0; t < spec.thin; ++t) one_sweep();
        for (std::size_t i = 0; i < obs.size(); ++i) series[i].push_back(eval_obs(i));
    }

    for (std::size_t i = 0; i < obs.size(); ++i)
        out.stats.push_back(summarize_series(obs[i].name, series[i], obs[i].indicator));
    if (spec.keep_series) out.series = std::move(series);
    out.final_config = std::move(open);
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

// ---- checkpoints ----

struct Checkpoint {
    u64 graph_hash = 0;
    u64 sweeps_done = 0;
    std::string rng_state;
    BondConfig open;
};

inline constexpr u32 kCheckpointMagic = 0x52434B50;  // "RCKP"
inline constexpr u32 kCheckpointVersion = 1;

inline void save_checkpoint(const std::string& path, const Checkpoint& cp) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write checkpoint: " + path);
    auto put32 = [&](u32 x) { f.write((const char*)&x, 4); };
    auto put64 = [&](u64 x) { f.write((const char*)&x, 8); };
    put32(kCheckpointMagic);
    put32(kCheckpointVersion);
    put64(cp.graph_hash);
    put64(cp.sweeps_done);
    put32((u32)cp.open.size());
    std::vector<u8> packed((cp.open.size() + 7) / 8, 0);
    for (std::size_t e = 0; e < cp.open.size(); ++e)
        if (cp.open[e]) packed[e / 8] |= (u8)(1 << (e % 8));
    f.write((const char*)packed.data(), (std::streamsize)packed.size());
    put32((u32)cp.rng_state.size());
    f.write(cp.rng_state.data(), (std::streamsize)cp.rng_state.size());
    if (!f) throw std::runtime_error("short write on checkpoint: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path, const Graph& g) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read checkpoint: " + path);
    auto get32 = [&]() { u32 x = 0; f.read((char*)&x, 4); return x; };
    auto get64 = [&]() { u64 x = 0; f.read((char*)&x, 8); return x; };
    if (get32() != kCheckpointMagic) throw std::runtime_error("not a checkpoint file: " + path);
    u32 ver = get32();
    if (ver != kCheckpointVersion)
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(ver));
    Checkpoint cp;
    cp.graph_hash = get64();
    if (cp.graph_hash != g.hash)
        throw std::runtime_error("checkpoint graph hash mismatch: file holds " +
                                 std::to_string(cp.graph_hash) + ", graph is " + std::to_string(g.hash));
    cp.sweeps_done = get64();
    u32 ecount = get32();
    if (ecount != g.edge_count()) throw std::runtime_error("checkpoint edge count mismatch");
    std::vector<u8> packed((ecount + 7) / 8);
    f.read((char*)packed.data(), (std::streamsize)packed.size());
    cp.open.assign(ecount, 0);
    for (u32 e = 0; e < ecount; ++e) cp.open[e] = (packed[e / 8] >> (e % 8)) & 1;
    u32 rlen = get32();
    cp.rng_state.resize(rlen);
    f.read(cp.rng_state.data(), rlen);
    if (!f) throw std::runtime_error("truncated checkpoint: " + path);
    return cp;
}

// Exhaustive check that the heat-bath conditional equals the true conditional
// probability and sits inside the finite-energy band, edge by edge.
struct FiniteEnergyReport {
    u64 checks = 0;
    u64 violations = 0;
    double worst_dev = 0;
};

inline FiniteEnergyReport verify_finite_energy(const Graph& g, const ModelParams& mp) {
    check_enumerable(g);
    FiniteEnergyReport rep;
    u32 E = g.edge_count();
    u64 total = (u64)1 << E;
    for (u32 e = 0; e < E; ++e) {
        double pe = mp.prob_of_edge(e);
        Interval band = finite_energy_band(pe, mp.q);
        for (u64 rest = 0; rest < total; ++rest) {
            if ((rest >> e) & 1) continue;  // enumerate the other edges only
            u64 lo = rest, hi = rest | ((u64)1 << e);
            double w0 = config_weight(g, mp, config_from_bits(lo, E));
            double w1 = config_weight(g, mp, config_from_bits(hi, E));
            double cond = w1 / (w0 + w1);
            u32 kc = cluster_count_bits(g, lo, mp.wired);
            u32 ko = cluster_count_bits(g, hi, mp.wired);
            double formula = conditional_open_prob(kc == ko, pe, mp.q);
            double dev = std::abs(cond - formula);
            double out_of_band = std::max(band.lo - cond, cond - band.hi);
            rep.worst_dev = std::max({rep.worst_dev, dev, out_of_band});
            ++rep.checks;
            if (dev > 1e-10 || out_of_band > 1e-12) ++rep.violations;
        }
    }
    return rep;
}

} // namespace rcslab
