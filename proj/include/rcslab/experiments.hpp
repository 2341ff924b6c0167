#pragma once
#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "rcslab/connectivity.hpp"
#include "rcslab/dynamics.hpp"
#include "rcslab/exact.hpp"
#include "rcslab/geometry.hpp"
#include "rcslab/stats.hpp"

namespace rcslab {

inline u64 fnv1a_str(u64 h, const std::string& s) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

// per-tuple seed so experiment jobs can run in any order or in parallel
inline u64 job_seed(u64 master, const std::string& tag) {
    return derive_seed(master, fnv1a_str(FNV_SEED, tag));
}

inline void parallel_for(std::size_t jobs, int threads, const std::function<void(std::size_t)>& body) {
    if (threads <= 1 || jobs <= 1) {
        for (std::size_t i = 0; i < jobs; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        while (true) {
            std::size_t i = next.fetch_add(1);
            if (i >= jobs) return;
            body(i);
        }
    };
    std::vector<std::thread> pool;
    int nth = std::min<std::size_t>(threads, jobs);
    for (int t = 0; t < nth; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
}

// one CSV row of the shared estimate schema
struct EstimateRecord {
    std::string experiment;
    double q = 1, p = 0, beta = 0;
    int n = 0;
    std::string fiber_id = "trivial", bc = "free", direction = "", event = "";
    double hits = 0;
    u64 samples = 0;
    double mean = 0, ci_lo = 0, ci_hi = 0;
    u64 seed = 0;
};

inline std::string fmt_num(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", x);
    return buf;
}

inline std::string record_csv_header() {
    return "experiment,q,p,beta,n,fiber_id,bc,direction,event,hits,samples,mean,ci_lo,ci_hi,seed";
}

inline std::string record_csv_row(const EstimateRecord& r) {
    std::string s;
    s += r.experiment;
    s += ',' + fmt_num(r.q) + ',' + fmt_num(r.p) + ',' + fmt_num(r.beta) + ',' + std::to_string(r.n);
    s += ',' + r.fiber_id + ',' + r.bc + ',' + r.direction + ',' + r.event;
    s += ',' + fmt_num(r.hits) + ',' + std::to_string(r.samples);
    s += ',' + fmt_num(r.mean) + ',' + fmt_num(r.ci_lo) + ',' + fmt_num(r.ci_hi);
    s += ',' + std::to_string(r.seed);
    return s;
}

// ---- the sampling workhorse ----

struct EstimatorOpts {
    u64 base_samples = 10000;
    double ci_half_target = 0.01;  // doubling rule from the pipeline defaults
    u64 min_hits = 0;              // extra doubling for rare events (decay fits)
    u64 max_samples = (u64)1 << 22;
    u64 zero_hit_stop = (u64)1 << 17;  // give up pushing for hits on dead events
    bool use_sw = false;
};

struct EventEstimate {
    double mean = 0;
    Interval ci{0, 1};
    double hits = 0;
    u64 samples = 0;
    double tau = 0.5, ess = 0;
    u64 seed = 0;
};

inline EventEstimate estimate_event(const Graph& g, const ModelParams& mp, const Observable& ob,
                                    u64 seed, const EstimatorOpts& opt) {
    u64 S = std::max<u64>(1, opt.base_samples);
    while (true) {
        ChainSpec cs;
        cs.sweeps = S;
        cs.use_sw = opt.use_sw;
        cs.master_seed = seed;
        ChainResult r = run_chain(g, mp, cs, {ob});
        const SeriesStats& st = r.stats[0];
        double hits = st.mean * (double)st.n;
        bool ok_ci = st.ci.width() / 2 <= opt.ci_half_target;
        bool ok_hits = opt.min_hits == 0 || hits >= (double)opt.min_hits ||
                       (hits == 0 && S >= opt.zero_hit_stop);
        if ((ok_ci && ok_hits) || S >= opt.max_samples) {
            EventEstimate out;
            out.mean = st.mean;
            out.ci = st.ci;
            out.hits = hits;
            out.samples = st.n;
            out.tau = st.tau;
            out.ess = st.ess;
            out.seed = seed;
            return out;
        }
        S = std::min(opt.max_samples, S * 2);
    }
}

inline bool sw_applicable(double q) { return q >= 2 && std::abs(q - std::round(q)) < 1e-9; }

// crossing probability of the [0,b]x[0,d] window, fattened by the fiber
inline EventEstimate estimate_crossing(int b, int d, const FiberGraph& fiber, const ModelParams& mp,
                                       char direction, u64 seed, const EstimatorOpts& opt) {
    SlabGraph slab = build_slab({0, b, 0, d}, fiber);
    RectRegion rect{0, b, 0, d};
    Observable ob{"crossing", [&](const BondConfig& w) {
                      return has_crossing(slab, w, rect, direction) ? 1.0 : 0.0;
                  },
                  true};
    return estimate_event(slab.g, mp, ob, seed, opt);
}

// ---- crossing curves ----

struct CrossingCurveSpec {
    double q = 1;
    FiberGraph fiber;
    bool wired = false;
    std::vector<int> n_list;
    double aspect = 2.0;
    char direction = 'h';
    std::vector<double> p_grid;
    u64 samples = 10000;
    u64 seed = 0x5EEDULL;
    int threads = 1;

    void validate() const {
        if (n_list.empty() || p_grid.empty()) throw std::invalid_argument("crossing spec needs n and p values");
        for (int n : n_list)
            if (n < 2 || n % 2) throw std::invalid_argument("crossing n values must be even and >= 2");
        if (!std::is_sorted(p_grid.begin(), p_grid.end()))
            throw std::invalid_argument("crossing p grid must be sorted");
        for (double p : p_grid)
            if (p < 0 || p > 1) throw std::invalid_argument("p must lie in [0,1]");
        if (aspect < 1) throw std::invalid_argument("aspect must be >= 1");
        if (direction != 'h' && direction != 'v') throw std::invalid_argument("direction must be h or v");
    }
};

inline std::vector<EstimateRecord> crossing_curve(const CrossingCurveSpec& spec) {
    spec.validate();
    struct Job {
        int n;
        double p;
    };
    std::vector<Job> jobs;
    for (int n : spec.n_list)
        for (double p : spec.p_grid) jobs.push_back({n, p});
    std::vector<EstimateRecord> recs(jobs.size());
    EstimatorOpts opt;
    opt.base_samples = spec.samples;
    opt.use_sw = sw_applicable(spec.q);

    parallel_for(jobs.size(), spec.threads, [&](std::size_t i) {
        auto [n, p] = jobs[i];
        int b = (int)std::llround(spec.aspect * n);
        ModelParams mp{p, spec.q, spec.wired, {}};
        std::string tag = "crossing|q=" + fmt_num(spec.q) + "|p=" + fmt_num(p) + "|n=" +
                          std::to_string(n) + "|" + spec.direction + "|" + spec.fiber.id;
        EventEstimate est = estimate_crossing(b, n, spec.fiber, mp, spec.direction,
                                              job_seed(spec.seed, tag), opt);
        EstimateRecord r;
        r.experiment = "crossing";
        r.q = spec.q;
        r.p = p;
        r.n = n;
        r.fiber_id = spec.fiber.id;
        r.bc = spec.wired ? "wired" : "free";
        r.direction = std::string(1, spec.direction);
        r.event = "cross_" + std::string(1, spec.direction) + "(" + std::to_string(b) + "," +
                  std::to_string(n) + ")";
        r.hits = est.hits;
        r.samples = est.samples;
        r.mean = est.mean;
        r.ci_lo = est.ci.lo;
        r.ci_hi = est.ci.hi;
        r.seed = est.seed;
        recs[i] = std::move(r);
    });
    return recs;
}

// ---- critical point scan ----

struct ScanPcResult {
    double p_c = 0;
    double err = 0;
    std::vector<std::pair<int, double>> per_n;  // (n, half-point estimate)
    std::vector<EstimateRecord> records;
    std::vector<std::string> log;
};

// Bisection on p for the self-crossing half point phi_p(C_h(n+1,n)) = 1/2.
// The bracket moves only when the Wilson interval at the midpoint excludes
// 1/2; otherwise the sample size doubles, and an undecidable midpoint ends
// the bisection at the current bracket.
inline ScanPcResult scan_pc(double q, const FiberGraph& fiber, const std::vector<int>& n_list,
                            double tolerance, u64 seed, u64 base_samples = 2000, int threads = 1) {
    if (!std::is_sorted(n_list.begin(), n_list.end()) || n_list.empty())
        throw std::invalid_argument("scan needs an increasing n list");
    if (tolerance <= 0) throw std::invalid_argument("tolerance must be positive");
    ScanPcResult res;
    res.per_n.resize(n_list.size());
    std::vector<std::vector<EstimateRecord>> recs(n_list.size());
    std::vector<std::vector<std::string>> logs(n_list.size());
    bool use_sw = sw_applicable(q);

    parallel_for(n_list.size(), threads, [&](std::size_t ni) {
        int n = n_list[ni];
        auto phat = [&](double p, u64 samples, u64& used, Interval& ci) {
            ModelParams mp{p, q, false, {}};
            EstimatorOpts opt;
            opt.base_samples = samples;
            opt.max_samples = samples;  // one shot; the caller controls doubling
            opt.ci_half_target = 1.0;
            opt.use_sw = use_sw;
            std::string tag = "scanpc|q=" + fmt_num(q) + "|n=" + std::to_string(n) + "|p=" + fmt_num(p) +
                              "|" + fiber.id;
            EventEstimate est = estimate_crossing(n + 1, n, fiber, mp, 'h', job_seed(seed, tag), opt);
            used = est.samples;
            ci = est.ci;
            EstimateRecord r;
            r.experiment = "scan_pc";
            r.q = q;
            r.p = p;
            r.n = n;
            r.fiber_id = fiber.id;
            r.event = "cross_h(" + std::to_string(n + 1) + "," + std::to_string(n) + ")";
            r.hits = est.hits;
            r.samples = est.samples;
            r.mean = est.mean;
            r.ci_lo = est.ci.lo;
            r.ci_hi = est.ci.hi;
            r.seed = est.seed;
            recs[ni].push_back(std::move(r));
            return est.mean;
        };

        double lo = 0.05, hi = 0.95;
        u64 used;
        Interval ci;
        // widen a wrong-sided bracket instead of trusting it
        for (int guard = 0; guard < 6; ++guard) {
            if (phat(lo, base_samples, used, ci) <= 0.5) break;
            logs[ni].push_back("n=" + std::to_string(n) + ": bracket low end " + fmt_num(lo) +
                               " sat above 1/2, widening");
            lo /= 2;
        }
        for (int guard = 0; guard < 6; ++guard) {
            if (phat(hi, base_samples, used, ci) >= 0.5) break;
            logs[ni].push_back("n=" + std::to_string(n) + ": bracket high end " + fmt_num(hi) +
                               " sat below 1/2, widening");
            hi = (1 + hi) / 2;
        }
        double value = (lo + hi) / 2;
        while (hi - lo > 2 * tolerance) {
            double mid = (lo + hi) / 2;
            u64 samples = base_samples;
            bool decided = false;
            while (samples <= base_samples * 64) {
                phat(mid, samples, used, ci);
                if (ci.lo > 0.5) {
                    hi = mid;
                    decided = true;
                    break;
                }
                if (ci.hi < 0.5) {
                    lo = mid;
                    decided = true;
                    break;
                }
                samples *= 2;
            }
            value = (lo + hi) / 2;
            if (!decided) {
                // the crossing probability sits at 1/2 within noise, so the
                // midpoint is already the half-point estimate
                value = mid;
                logs[ni].push_back("n=" + std::to_string(n) + ": midpoint " + fmt_num(mid) +
                                   " undecidable at " + std::to_string(samples / 2) +
                                   " samples, adopting it with bracket width " + fmt_num(hi - lo));
                break;
            }
        }
        res.per_n[ni] = {n, value};
    });

    for (auto& v : recs)
        for (auto& r : v) res.records.push_back(std::move(r));
    for (auto& v : logs)
        for (auto& s : v) res.log.push_back(std::move(s));
    res.p_c = res.per_n.back().second;
    double spread = 0;
    for (auto& [n1, v1] : res.per_n)
        for (auto& [n2, v2] : res.per_n) spread = std::max(spread, std::abs(v1 - v2));
    res.err = std::max(spread, tolerance);
    return res;
}

// ---- one-arm decay ----

struct DecayResult {
    double c_hat = 0;  // decay rate per unit distance
    double r2 = 0;
    LineFit fit;
    std::vector<int> used_n, truncated_n;
    std::vector<EstimateRecord> records;
};

// -log phi(0-bar <-> sphere of the l1 ball of radius n), least squares in n.
// Zero-hit radii are dropped from the fit and reported as truncated.
inline DecayResult decay_rate(double p, double q, const FiberGraph& fiber,
                              const std::vector<int>& n_list, u64 samples, u64 seed,
                              u64 max_samples_per_n = (u64)1 << 20, int threads = 1) {
    if (n_list.empty()) throw std::invalid_argument("decay needs radii");
    DecayResult res;
    res.records.resize(n_list.size());
    std::vector<double> phats(n_list.size(), 0);
    bool use_sw = sw_applicable(q);

    parallel_for(n_list.size(), threads, [&](std::size_t ni) {
        int n = n_list[ni];
        if (n < 1) throw std::invalid_argument("decay radius must be >= 1");
        BaseWindow w{-n, n, -n, n};
        SlabGraph slab = build_slab(w, fiber, l1_ball_mask(w, 0, 0, n));
        auto center = slab.fatten({{0, 0}});
        auto sphere = box(slab, slab.vid(0, 0, 0), n).sphere;
        ModelParams mp{p, q, false, {}};
        Observable ob{"one_arm", [&](const BondConfig& om) {
                          return connected_in(slab.g, om, center, sphere) ? 1.0 : 0.0;
                      },
                      true};
        EstimatorOpts opt;
        opt.base_samples = samples;
        opt.min_hits = 32;
        opt.max_samples = max_samples_per_n;
        opt.use_sw = use_sw;
        std::string tag = "decay|q=" + fmt_num(q) + "|p=" + fmt_num(p) + "|n=" + std::to_string(n) +
                          "|" + fiber.id;
        EventEstimate est = estimate_event(slab.g, mp, ob, job_seed(seed, tag), opt);
        phats[ni] = est.mean;
        EstimateRecord r;
        r.experiment = "decay";
        r.q = q;
        r.p = p;
        r.n = n;
        r.fiber_id = fiber.id;
        r.event = "one_arm";
        r.hits = est.hits;
        r.samples = est.samples;
        r.mean = est.mean;
        r.ci_lo = est.ci.lo;
        r.ci_hi = est.ci.hi;
        r.seed = est.seed;
        res.records[ni] = std::move(r);
    });

    std::vector<double> xs, ys;
    for (std::size_t ni = 0; ni < n_list.size(); ++ni) {
        if (phats[ni] > 0) {
            xs.push_back(n_list[ni]);
            ys.push_back(-std::log(phats[ni]));
            res.used_n.push_back(n_list[ni]);
        } else {
            res.truncated_n.push_back(n_list[ni]);
        }
    }
    if (xs.size() < 2) {
        res.c_hat = INFINITY;  // nothing ever connects (or a single usable radius)
        res.r2 = 0;
        return res;
    }
    res.fit = fit_line(xs, ys);
    res.c_hat = res.fit.slope;
    res.r2 = res.fit.r2;
    return res;
}

// ---- sharp convergence of crossing probabilities ----

struct SharpnessRow {
    double p = 0;
    int n = 0;
    double phat = 0;
    Interval ci{0, 1};
    double threshold = 0;
    bool satisfied = false;
};

struct SharpnessResult {
    std::vector<SharpnessRow> rows;
    std::vector<std::pair<double, bool>> verdict_per_p;
    std::vector<EstimateRecord> records;
};

inline SharpnessResult sharp_convergence_check(const std::vector<double>& p_list, double q,
                                               const FiberGraph& fiber, double delta,
                                               const std::vector<int>& n_list, u64 samples, u64 seed,
                                               int threads = 1) {
    if (delta <= 0) throw std::invalid_argument("exponent must be positive");
    SharpnessResult res;
    struct Job {
        double p;
        int n;
    };
    std::vector<Job> jobs;
    for (double p : p_list)
        for (int n : n_list) jobs.push_back({p, n});
    res.rows.resize(jobs.size());
    res.records.resize(jobs.size());
    bool use_sw = sw_applicable(q);

    parallel_for(jobs.size(), threads, [&](std::size_t i) {
        auto [p, n] = jobs[i];
        ModelParams mp{p, q, false, {}};
        EstimatorOpts opt;
        opt.base_samples = samples;
        opt.use_sw = use_sw;
        std::string tag = "sharp|q=" + fmt_num(q) + "|p=" + fmt_num(p) + "|n=" + std::to_string(n) +
                          "|" + fiber.id;
        EventEstimate est = estimate_crossing(2 * n, n, fiber, mp, 'h', job_seed(seed, tag), opt);
        SharpnessRow row;
        row.p = p;
        row.n = n;
        row.phat = est.mean;
        row.ci = est.ci;
        row.threshold = 1.0 - std::pow((double)n, -delta);
        row.satisfied = est.mean >= row.threshold;
        res.rows[i] = row;
        EstimateRecord r;
        r.experiment = "sharpness";
        r.q = q;
        r.p = p;
        r.n = n;
        r.fiber_id = fiber.id;
        r.direction = "h";
        r.event = "cross_h(" + std::to_string(2 * n) + "," + std::to_string(n) + ")";
        r.hits = est.hits;
        r.samples = est.samples;
        r.mean = est.mean;
        r.ci_lo = est.ci.lo;
        r.ci_hi = est.ci.hi;
        r.seed = est.seed;
        res.records[i] = std::move(r);
    });
    for (double p : p_list) {
        bool all = true;
        for (auto& row : res.rows)
            if (row.p == p && !row.satisfied) all = false;
        res.verdict_per_p.push_back({p, all});
    }
    return res;
}

// ---- Potts two-point function via the bond representation ----

inline EstimateRecord potts_two_point_mc(double beta, u32 q, const FiberGraph& fiber,
                                         const BaseWindow& window, u32 x, u32 y, u64 samples,
                                         u64 seed, const EstimatorOpts* opts = nullptr) {
    if (q < 2) throw std::invalid_argument("Potts needs q >= 2");
    if (beta < 0) throw std::invalid_argument("beta must be >= 0");
    SlabGraph slab = build_slab(window, fiber);
    if (x >= slab.g.n || y >= slab.g.n) throw std::invalid_argument("Potts endpoints out of range");
    double p = es_p_of_beta(beta, q);
    ModelParams mp{p, (double)q, false, {}};
    Observable ob{"two_point", [&](const BondConfig& w) {
                      return connected_in(slab.g, w, {x}, {y}) ? 1.0 : 0.0;
                  },
                  true};
    EstimatorOpts opt = opts ? *opts : EstimatorOpts{};
    opt.base_samples = samples;
    opt.use_sw = true;
    std::string tag = "potts|q=" + std::to_string(q) + "|beta=" + fmt_num(beta) + "|" +
                      std::to_string(x) + "-" + std::to_string(y) + "|" + fiber.id;
    EventEstimate est = estimate_event(slab.g, mp, ob, job_seed(seed, tag), opt);
    EstimateRecord r;
    r.experiment = "potts";
    r.q = q;
    r.p = p;
    r.beta = beta;
    r.n = window.nx();
    r.fiber_id = fiber.id;
    r.event = "connect_" + std::to_string(x) + "_" + std::to_string(y);
    r.hits = est.hits;
    r.samples = est.samples;
    r.mean = est.mean;
    r.ci_lo = est.ci.lo;
    r.ci_hi = est.ci.hi;
    r.seed = est.seed;
    return r;
}

// ---- Hamming lower-bound profile ----

struct HammingProfileRow {
    int width = 0, height = 0;
    double mean_lb = 0;  // mean of max(K-1, 0)
    Interval ci{0, 0};
    u64 samples = 0;
};

inline std::vector<HammingProfileRow> hamming_profile(double p, double q, const FiberGraph& fiber,
                                                      const std::vector<std::pair<int, int>>& rects,
                                                      u64 samples, u64 seed,
                                                      std::vector<EstimateRecord>* records = nullptr,
                                                      int threads = 1) {
    std::vector<HammingProfileRow> rows(rects.size());
    std::vector<EstimateRecord> recs(rects.size());
    bool use_sw = sw_applicable(q);
    parallel_for(rects.size(), threads, [&](std::size_t i) {
        auto [wd, ht] = rects[i];
        if (wd < 1 || ht < 1) throw std::invalid_argument("bad rect in hamming profile");
        SlabGraph slab = build_slab({0, wd, 0, ht}, fiber);
        RectRegion rect{0, wd, 0, ht};
        ModelParams mp{p, q, false, {}};
        Observable ob{"sep_lb", [&](const BondConfig& w) {
                          return (double)strongly_separated_crossings(slab, w, rect).hamming_lb;
                      },
                      false};
        ChainSpec cs;
        cs.sweeps = samples;
        cs.use_sw = use_sw;
        cs.master_seed = job_seed(seed, "hamming|q=" + fmt_num(q) + "|p=" + fmt_num(p) + "|" +
                                            std::to_string(wd) + "x" + std::to_string(ht) + "|" + fiber.id);
        ChainResult cr = run_chain(slab.g, mp, cs, {ob});
        rows[i] = {wd, ht, cr.stats[0].mean, cr.stats[0].ci, cr.stats[0].n};
        EstimateRecord r;
        r.experiment = "hamming";
        r.q = q;
        r.p = p;
        r.n = wd;
        r.fiber_id = fiber.id;
        r.event = "sep_lb_" + std::to_string(wd) + "x" + std::to_string(ht);
        r.hits = cr.stats[0].mean * cr.stats[0].n;
        r.samples = cr.stats[0].n;
        r.mean = cr.stats[0].mean;
        r.ci_lo = cr.stats[0].ci.lo;
        r.ci_hi = cr.stats[0].ci.hi;
        r.seed = cs.master_seed;
        recs[i] = std::move(r);
    });
    if (records)
        for (auto& r : recs) records->push_back(std::move(r));
    return rows;
}

} // namespace rcslab
