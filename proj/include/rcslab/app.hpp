#pragma once
#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "rcslab/config.hpp"
#include "rcslab/dynamics.hpp"
#include "rcslab/exact.hpp"
#include "rcslab/experiments.hpp"
#include "rcslab/surgery.hpp"
#include "rcslab/svg.hpp"

namespace rcslab {

inline const char* cli_usage() {
    return
        "usage: rcslab <subcommand> [--config FILE] [--seed N] [--threads N] [--out DIR] [--plot]\n"
        "subcommands:\n"
        "  sample        chain summary of a standard observable battery\n"
        "  crossing      crossing probability curves over a p grid\n"
        "  scan-pc       bisection estimate of the crossing half point\n"
        "  decay         one-arm decay rate fit\n"
        "  sharpness     threshold check for crossing probabilities\n"
        "  potts         Potts two-point function via the bond representation\n"
        "  gluing-demo   crossing-gluing estimate on the standard instance\n"
        "  verify-exact  exact-enumeration identity checks\n"
        "  hamming       separated-crossing lower bound profile\n"
        "seed precedence: config [output] seed, then --seed, then RC_SEED, then built-in\n";
}

namespace cliapp {

struct Out {
    std::string dir;
    u64 hash = 0, seed = 0;

    std::string header() const {
        char buf[80];
        std::snprintf(buf, sizeof(buf), "# config_hash=%016llx master_seed=%llu\n",
                      (unsigned long long)hash, (unsigned long long)seed);
        return buf;
    }
    std::string path(const std::string& name) const { return dir + "/" + name; }
    void write_records(const std::string& name, const std::vector<EstimateRecord>& recs,
                       const std::vector<std::string>& comments = {}) const {
        std::string body = header();
        for (auto& c : comments) body += "# " + c + "\n";
        body += record_csv_header() + "\n";
        for (auto& r : recs) body += record_csv_row(r) + "\n";
        write_text_atomic(path(name), body);
        std::cout << "wrote " << path(name) << " (" << recs.size() << " rows)\n";
    }
    void write_plot(const std::string& name, const std::string& title,
                    const std::vector<PlotSeries>& series, const std::string& xl,
                    const std::string& yl) const {
        std::string body = "<!-- config_hash + master_seed below -->\n<!-- " + header() + " -->\n";
        body += render_svg_plot(title, series, xl, yl);
        write_text_atomic(path(name), body);
        std::cout << "wrote " << path(name) << "\n";
    }
};

// "nn" or "file:PATH"; file lines are "M" then "dx dy J" triples
inline CouplingJ parse_coupling(const std::string& spec) {
    CouplingJ J;
    if (spec == "nn") {
        J.M = 1;
        for (auto [dx, dy] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}}) J.table[{dx, dy}] = 1.0;
    } else if (spec.rfind("file:", 0) == 0) {
        std::ifstream in(spec.substr(5));
        if (!in) throw ConfigError("cannot open coupling file '" + spec.substr(5) + "'");
        if (!(in >> J.M) || J.M < 1) throw ConfigError("coupling file must start with a range M >= 1");
        int dx, dy;
        double j;
        while (in >> dx >> dy >> j) J.table[{dx, dy}] = j;
        if (!in.eof()) throw ConfigError("coupling file has a malformed 'dx dy J' line");
    } else {
        throw ConfigError("geometry.coupling must be 'nn' or 'file:PATH'");
    }
    try {
        J.validate();
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    return J;
}

inline int cmd_sample(const RunConfig& cfg, const Out& out) {
    std::vector<EstimateRecord> recs;
    auto push = [&](const SeriesStats& st, double p, double beta, u64 seed) {
        EstimateRecord r;
        r.experiment = "sample";
        r.q = cfg.q;
        r.p = p;
        r.beta = beta;
        r.n = cfg.width;
        r.fiber_id = cfg.fiber.id;
        r.bc = cfg.wired ? "wired" : "free";
        r.event = st.name;
        r.hits = st.indicator ? st.mean * st.n : 0;
        r.samples = st.n;
        r.mean = st.mean;
        r.ci_lo = st.ci.lo;
        r.ci_hi = st.ci.hi;
        r.seed = seed;
        recs.push_back(r);
    };

    ChainSpec cs;
    cs.sweeps = cfg.samples;
    cs.master_seed = derive_seed(cfg.seed, fnv1a_str(FNV_SEED, "sample"));
    cs.use_sw = sw_applicable(cfg.q);

    if (cfg.coupling.empty()) {
        SlabGraph slab = build_slab({0, cfg.width - 1, 0, cfg.height - 1}, cfg.fiber);
        RectRegion rect{0, cfg.width - 1, 0, cfg.height - 1};
        ModelParams mp{cfg.p, cfg.q, cfg.wired, {}};
        std::vector<Observable> obs;
        obs.push_back({"edge_density", [&](const BondConfig& w) {
                           double o = 0;
                           for (u8 b : w) o += b;
                           return o / (double)w.size();
                       },
                       false});
        obs.push_back({"cross_h", [&](const BondConfig& w) {
                           return has_crossing(slab, w, rect, 'h') ? 1.0 : 0.0;
                       },
                       true});
        obs.push_back({"cross_v", [&](const BondConfig& w) {
                           return has_crossing(slab, w, rect, 'v') ? 1.0 : 0.0;
                       },
                       true});
        obs.push_back({"max_cluster_frac", [&](const BondConfig& w) {
                           ClusterLabeling lab = components(slab.g, w);
                           std::vector<u32> sz(lab.count, 0);
                           for (u32 v = 0; v < slab.g.n; ++v)
                               if (lab.label[v] != NPOS32) sz[lab.label[v]]++;
                           u32 best = 0;
                           for (u32 s : sz) best = std::max(best, s);
                           return (double)best / (double)slab.g.n;
                       },
                       false});
        ChainResult cr = run_chain(slab.g, mp, cs, obs);
        for (auto& st : cr.stats) push(st, cfg.p, 0, cs.master_seed);
    } else {
        BaseWindow w{0, cfg.width - 1, 0, cfg.height - 1};
        CouplingJ J = parse_coupling(cfg.coupling);
        WeightedGraph wg = build_long_range(w, J);
        ModelParams mp{0, cfg.q, cfg.wired, wg.edge_probs(cfg.beta)};
        u32 far = wg.g.n - 1;
        std::vector<Observable> obs;
        obs.push_back({"edge_density", [&](const BondConfig& om) {
                           double o = 0;
                           for (u8 b : om) o += b;
                           return o / (double)om.size();
                       },
                       false});
        obs.push_back({"corner_two_point", [&](const BondConfig& om) {
                           return connected_in(wg.g, om, {0}, {far}) ? 1.0 : 0.0;
                       },
                       true});
        ChainResult cr = run_chain(wg.g, mp, cs, obs);
        for (auto& st : cr.stats) push(st, 0, cfg.beta, cs.master_seed);
    }
    out.write_records("sample.csv", recs, cfg.echo);
    return 0;
}

inline int cmd_crossing(const RunConfig& cfg, const Out& out) {
    if (cfg.p_grid.empty()) throw ConfigError("crossing needs experiment.p_grid");
    if (cfg.n_list.empty()) throw ConfigError("crossing needs experiment.n_list");
    CrossingCurveSpec spec;
    spec.q = cfg.q;
    spec.fiber = cfg.fiber;
    spec.wired = cfg.wired;
    spec.n_list = cfg.n_list;
    spec.aspect = cfg.aspect;
    spec.direction = cfg.direction;
    spec.p_grid = cfg.p_grid;
    spec.samples = cfg.samples;
    spec.seed = cfg.seed;
    spec.threads = cfg.threads;
    try {
        spec.validate();
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    auto recs = crossing_curve(spec);
    out.write_records("crossing.csv", recs, cfg.echo);
    if (cfg.plot) {
        std::vector<PlotSeries> series;
        for (int n : spec.n_list) {
            PlotSeries s;
            s.label = "n=" + std::to_string(n);
            for (auto& r : recs)
                if (r.n == n) s.pts.push_back({r.p, r.mean});
            series.push_back(std::move(s));
        }
        out.write_plot("crossing.svg", "crossing probability", series, "p", "estimate");
    }
    return 0;
}

inline int cmd_scan_pc(const RunConfig& cfg, const Out& out) {
    if (cfg.n_list.empty()) throw ConfigError("scan-pc needs experiment.n_list");
    ScanPcResult res = scan_pc(cfg.q, cfg.fiber, cfg.n_list, cfg.tolerance, cfg.seed,
                               std::max<u64>(500, cfg.samples / 4), cfg.threads);
    std::vector<std::string> comments = cfg.echo;
    for (auto& [n, v] : res.per_n) comments.push_back("half point n=" + std::to_string(n) + ": " + fmt_num(v));
    comments.push_back("p_c estimate " + fmt_num(res.p_c) + " +- " + fmt_num(res.err));
    for (auto& l : res.log) comments.push_back("log: " + l);
    out.write_records("scan_pc.csv", res.records, comments);
    std::cout << "p_c ~= " << fmt_num(res.p_c) << " +- " << fmt_num(res.err) << "\n";
    if (cfg.plot) {
        PlotSeries s;
        s.label = "half point";
        for (auto& [n, v] : res.per_n) s.pts.push_back({(double)n, v});
        out.write_plot("scan_pc.svg", "crossing half point by size", {s}, "n", "p");
    }
    return 0;
}

inline int cmd_decay(const RunConfig& cfg, const Out& out) {
    if (cfg.n_list.empty()) throw ConfigError("decay needs experiment.n_list");
    DecayResult res = decay_rate(cfg.p, cfg.q, cfg.fiber, cfg.n_list, cfg.samples, cfg.seed,
                                 (u64)1 << 20, cfg.threads);
    std::vector<std::string> comments = cfg.echo;
    comments.push_back("rate " + fmt_num(res.c_hat) + " r2 " + fmt_num(res.r2));
    if (!res.truncated_n.empty()) {
        std::string t = "truncated radii (no hits):";
        for (int n : res.truncated_n) t += " " + std::to_string(n);
        comments.push_back(t);
    }
    out.write_records("decay.csv", res.records, comments);
    std::cout << "decay rate ~= " << fmt_num(res.c_hat) << " (r2 " << fmt_num(res.r2) << ")\n";
    if (cfg.plot) {
        PlotSeries data{"-log estimate", {}}, fitline{"fit", {}};
        for (auto& r : res.records)
            if (r.mean > 0) data.pts.push_back({(double)r.n, -std::log(r.mean)});
        if (std::isfinite(res.c_hat) && !res.used_n.empty()) {
            double n0 = res.used_n.front(), n1 = res.used_n.back();
            fitline.pts = {{n0, res.fit.intercept + res.fit.slope * n0},
                           {n1, res.fit.intercept + res.fit.slope * n1}};
        }
        out.write_plot("decay.svg", "one-arm decay", {data, fitline}, "n", "-log p");
    }
    return 0;
}

inline int cmd_sharpness(const RunConfig& cfg, const Out& out) {
    if (cfg.p_list.empty()) throw ConfigError("sharpness needs experiment.p_list");
    if (cfg.n_list.empty()) throw ConfigError("sharpness needs experiment.n_list");
    SharpnessResult res = sharp_convergence_check(cfg.p_list, cfg.q, cfg.fiber, cfg.delta,
                                                  cfg.n_list, cfg.samples, cfg.seed, cfg.threads);
    std::vector<std::string> comments = cfg.echo;
    for (auto& [p, ok] : res.verdict_per_p) {
        std::string line = "p=" + fmt_num(p) + (ok ? " satisfies" : " fails") + " the 1-n^-delta threshold";
        comments.push_back(line);
        std::cout << line << "\n";
    }
    out.write_records("sharpness.csv", res.records, comments);
    return 0;
}

inline int cmd_potts(const RunConfig& cfg, const Out& out) {
    double qr = std::round(cfg.q);
    if (cfg.q < 2 || std::abs(cfg.q - qr) > 1e-9)
        throw ConfigError("potts needs integer q >= 2");
    BaseWindow w{0, cfg.width - 1, 0, cfg.height - 1};
    SlabGraph slab = build_slab(w, cfg.fiber);
    long long base = (long long)slab.base_count();
    long long xw = cfg.x, yw = cfg.y < 0 ? base - 1 : cfg.y;
    if (xw < 0 || xw >= base || yw < 0 || yw >= base)
        throw ConfigError("potts endpoints must index base points of the window");
    u32 xv = slab.vid_widx((u32)xw, 0), yv = slab.vid_widx((u32)yw, 0);
    EstimateRecord r = potts_two_point_mc(cfg.beta, (u32)qr, cfg.fiber, w, xv, yv, cfg.samples, cfg.seed);
    out.write_records("potts.csv", {r}, cfg.echo);
    std::cout << "two-point estimate " << fmt_num(r.mean) << " in [" << fmt_num(r.ci_lo) << ", "
              << fmt_num(r.ci_hi) << "]\n";
    return 0;
}

inline int cmd_gluing_demo(const RunConfig& cfg, const Out& out) {
    GluingInstance gi = standard_crossing_instance(cfg.gluing_n, cfg.fiber);
    if (!verify_topological_condition(gi))
        throw std::runtime_error("standard instance failed the path-intersection condition");
    ModelParams mp{cfg.p, cfg.q, cfg.wired, {}};
    GluingEstimate ge = gluing_estimate(gi, mp, cfg.samples, cfg.seed, sw_applicable(cfg.q), true);
    std::vector<EstimateRecord> recs;
    auto push = [&](const std::string& ev, double mean, Interval ci) {
        EstimateRecord r;
        r.experiment = "gluing";
        r.q = cfg.q;
        r.p = cfg.p;
        r.n = cfg.gluing_n;
        r.fiber_id = cfg.fiber.id;
        r.bc = cfg.wired ? "wired" : "free";
        r.event = ev;
        r.samples = ge.samples;
        if (mean >= 0 && mean <= 1) r.hits = mean * (double)ge.samples;
        r.mean = mean;
        r.ci_lo = ci.lo;
        r.ci_hi = ci.hi;
        r.seed = cfg.seed;
        recs.push_back(r);
    };
    push("crossing_with_anchor", ge.phiA, ge.ciA);
    push("bridge", ge.phiB, ge.ciB);
    push("glued", ge.phiX, ge.ciX);
    push("c_hat", ge.c_hat, ge.ciC);
    push("beta_hat", ge.beta_hat, {ge.beta_hat, ge.beta_hat});
    if (gi.slab.g.edge_count() <= 20) {
        ExactGluing ex = exact_gluing(gi, mp);
        push("exact_crossing_with_anchor", ex.phiA, {ex.phiA, ex.phiA});
        push("exact_bridge", ex.phiB, {ex.phiB, ex.phiB});
        push("exact_glued", ex.phiX, {ex.phiX, ex.phiX});
        push("exact_c", ex.c, {ex.c, ex.c});
    }
    out.write_records("gluing_demo.csv", recs, cfg.echo);
    std::string log = out.header();
    log += "sample,crossing_with_anchor,bridge,glued\n";
    for (std::size_t i = 0; i < ge.logA.size(); ++i)
        log += std::to_string(i) + "," + std::to_string((int)ge.logA[i]) + "," +
               std::to_string((int)ge.logB[i]) + "," + std::to_string((int)ge.logX[i]) + "\n";
    write_text_atomic(out.path("gluing_events.csv"), log);
    std::cout << "wrote " << out.path("gluing_events.csv") << "\n";
    std::cout << "c_hat " << fmt_num(ge.c_hat) << ", beta_hat " << fmt_num(ge.beta_hat) << "\n";
    return 0;
}

inline int cmd_verify_exact(const RunConfig&, const Out& out) {
    struct Row {
        std::string check, graph;
        double lhs, rhs, margin;
        bool pass;
    };
    std::vector<Row> rows;
    auto add = [&](const std::string& c, const std::string& g, double lhs, double rhs, double tol) {
        double m = std::abs(lhs - rhs);
        rows.push_back({c, g, lhs, rhs, m, m <= tol});
    };

    for (auto& name : builtin_graph_names()) {
        Graph g = builtin_graph(name);
        // product measure marginals at q=1
        double worst = 0;
        ModelParams mp{0.37, 1.0, false, {}};
        for (u32 e = 0; e < g.edge_count(); ++e) {
            double lhs = exact_event_probability(g, mp, [&](u64 bits) { return (bits >> e) & 1; });
            worst = std::max(worst, std::abs(lhs - 0.37));
        }
        add("product_q1", name, worst, 0.0, 1e-12);
    }
    for (auto& name : builtin_graph_names()) {
        Graph g = builtin_graph(name);
        if (g.edge_count() > 10) continue;
        for (u32 q : {2u, 3u}) {
            double beta = 0.7;
            ModelParams mp{es_p_of_beta(beta, q), (double)q, false, {}};
            u32 x = 0, y = g.n - 1;
            double lhs = exact_event_probability(
                g, mp, [&](u64 bits) { return connected_bits(g, bits, x, y); });
            double rhs = exact_potts_two_point(g, q, beta, x, y);
            add("potts_identity_q" + std::to_string(q), name, lhs, rhs, 1e-10);
        }
    }
    for (auto& name : {std::string("square4"), std::string("slab21k2"), std::string("k4")}) {
        Graph g = builtin_graph(name);
        InequalityReport rep = verify_inequalities(g, 0.3, 0.5, 2.0, {0, 1, 2});
        add("monotone_bounds", name, (double)rep.violations, 0.0, 0.5);
    }
    for (auto& name : {std::string("triangle"), std::string("slab21k2")}) {
        Graph g = builtin_graph(name);
        ModelParams mp{0.4, 1.5, false, {}};
        FiniteEnergyReport rep = verify_finite_energy(g, mp);
        add("finite_energy", name, rep.worst_dev, 0.0, 1e-10);
    }

    std::string body = out.header();
    body += "check_name,graph_id,lhs,rhs,margin,pass\n";
    bool all = true;
    for (auto& r : rows) {
        body += r.check + "," + r.graph + "," + fmt_num(r.lhs) + "," + fmt_num(r.rhs) + "," +
                fmt_num(r.margin) + "," + (r.pass ? "1" : "0") + "\n";
        all = all && r.pass;
    }
    write_text_atomic(out.path("verify_exact.csv"), body);
    std::cout << "wrote " << out.path("verify_exact.csv") << " (" << rows.size() << " checks, "
              << (all ? "all pass" : "FAILURES") << ")\n";
    return all ? 0 : 1;
}

inline int cmd_hamming(const RunConfig& cfg, const Out& out) {
    if (cfg.rects.empty()) throw ConfigError("hamming needs experiment.rects (like 8x4,12x4)");
    std::vector<EstimateRecord> recs;
    auto rows = hamming_profile(cfg.p, cfg.q, cfg.fiber, cfg.rects, cfg.samples, cfg.seed, &recs,
                                cfg.threads);
    out.write_records("hamming.csv", recs, cfg.echo);
    for (auto& r : rows)
        std::cout << r.width << "x" << r.height << ": separated-crossing bound " << fmt_num(r.mean_lb)
                  << " in [" << fmt_num(r.ci.lo) << ", " << fmt_num(r.ci.hi) << "]\n";
    return 0;
}

} // namespace cliapp

inline int run_cli(int argc, char** argv) {
    using namespace cliapp;
    std::vector<std::string> args(argv + 1, argv + argc);
    if (args.empty() || args[0] == "--help" || args[0] == "-h" || args[0] == "help") {
        std::cout << cli_usage();
        return args.empty() ? 2 : 0;
    }
    std::string sub = args[0];
    const std::vector<std::string> known = {"sample",     "crossing", "scan-pc",      "decay",
                                            "sharpness",  "potts",    "gluing-demo",  "verify-exact",
                                            "hamming"};
    if (std::find(known.begin(), known.end(), sub) == known.end()) {
        std::cerr << "config error: unknown subcommand '" << sub << "'\n" << cli_usage();
        return 2;
    }

    std::string config_path, out_flag;
    bool seed_flag_set = false, plot_flag = false, threads_flag_set = false;
    u64 seed_flag = 0;
    int threads_flag = 1;
    try {
        for (std::size_t i = 1; i < args.size(); ++i) {
            auto need = [&](const char* name) -> std::string {
                if (i + 1 >= args.size()) throw ConfigError(std::string(name) + " needs a value");
                return args[++i];
            };
            if (args[i] == "--config") config_path = need("--config");
            else if (args[i] == "--seed") { seed_flag = detail::parse_u64("--seed", need("--seed")); seed_flag_set = true; }
            else if (args[i] == "--threads") { threads_flag = (int)detail::parse_int("--threads", need("--threads")); threads_flag_set = true; }
            else if (args[i] == "--out") out_flag = need("--out");
            else if (args[i] == "--plot") plot_flag = true;
            else throw ConfigError("unknown flag '" + args[i] + "'");
        }

        RunConfig cfg;
        cfg.subcommand = sub;
        bool seed_from_config = false;
        if (!config_path.empty()) {
            IniFile ini = parse_ini_file(config_path);
            seed_from_config = ini.has("output.seed");
            cfg = apply_ini(ini, cfg);
            cfg.subcommand = sub;
        }
        if (!seed_from_config) {
            if (seed_flag_set) {
                cfg.seed = seed_flag;
            } else if (const char* env = std::getenv("RC_SEED")) {
                cfg.seed = detail::parse_u64("RC_SEED", env);
            }
        }
        if (threads_flag_set) cfg.threads = threads_flag;
        if (!out_flag.empty()) cfg.out_dir = out_flag;
        if (plot_flag) cfg.plot = true;
        validate_config(cfg);

        Out out;
        out.dir = cfg.out_dir;
        out.hash = config_hash(cfg);
        out.seed = cfg.seed;
        for (auto& e : cfg.echo) std::cerr << "[config] " << e << "\n";

        try {
            if (sub == "sample") return cmd_sample(cfg, out);
            if (sub == "crossing") return cmd_crossing(cfg, out);
            if (sub == "scan-pc") return cmd_scan_pc(cfg, out);
            if (sub == "decay") return cmd_decay(cfg, out);
            if (sub == "sharpness") return cmd_sharpness(cfg, out);
            if (sub == "potts") return cmd_potts(cfg, out);
            if (sub == "gluing-demo") return cmd_gluing_demo(cfg, out);
            if (sub == "verify-exact") return cmd_verify_exact(cfg, out);
            if (sub == "hamming") return cmd_hamming(cfg, out);
        } catch (const ConfigError&) {
            throw;
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
            return 1;
        }
        return 1;  // unreachable
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }
}

} // namespace rcslab
