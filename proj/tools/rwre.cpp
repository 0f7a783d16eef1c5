#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rws/lyap.hpp"
#include "rws/potential.hpp"
#include "rws/walk.hpp"

namespace {

constexpr const char* kVersion = "1.0.0";
constexpr std::uint64_t kDefaultSeed = 20240901;

using nlohmann::json;
using namespace rws;

struct Options {
    std::string spec_path;
    std::uint64_t seed = kDefaultSeed;
    std::vector<long long> t_list;
    int envs = 20;
    int walks = 20;
    double delta = 0.1;
    double gamma = 0.1;
    double tol = 1e-8;
    std::string out_path;
    std::string format = "rows";
    int workers = 1;
    bool with_timestamps = false;
};

void add_common_flags(CLI::App& app, Options& opt, bool needs_spec) {
    auto* spec = app.add_option("--spec", opt.spec_path, "environment spec file");
    if (needs_spec) spec->required();
    app.add_option("--seed", opt.seed, "environment / experiment seed");
    app.add_option("--t", opt.t_list, "time horizon (repeatable)");
    app.add_option("--envs", opt.envs, "number of sampled environments");
    app.add_option("--walks", opt.walks, "walks per environment");
    app.add_option("--delta", opt.delta, "valley certificate delta");
    app.add_option("--gamma", opt.gamma, "localization window gamma");
    app.add_option("--tol", opt.tol, "numeric tolerance");
    app.add_option("--out", opt.out_path, "output file (default stdout)");
    app.add_option("--format", opt.format, "rows | structured")
        ->check(CLI::IsMember({"rows", "structured"}));
    app.add_option("--workers", opt.workers, "worker threads (never affects results)");
    app.add_flag("--with-timestamps", opt.with_timestamps,
                 "emit a timestamp header line");
}

std::string timestamp_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&tt));
    return buf;
}

// Streams rows with a comment header, or collects everything into one
// JSON document; payload bytes depend only on (config, seed).
class Emitter {
  public:
    Emitter(const Options& opt, const std::string& subcommand,
            const std::string& digest)
        : structured_(opt.format == "structured") {
        if (!opt.out_path.empty()) {
            file_.open(opt.out_path);
            if (!file_)
                throw std::runtime_error("cannot open output file: " + opt.out_path);
        }
        doc_["tool"] = "rwre";
        doc_["version"] = kVersion;
        doc_["subcommand"] = subcommand;
        doc_["spec_digest"] = digest;
        doc_["seed"] = opt.seed;
        if (opt.with_timestamps) doc_["timestamp"] = timestamp_now();
        if (!structured_) {
            out() << "# rwre " << subcommand << " version=" << kVersion << "\n";
            out() << "# digest=" << digest << " seed=" << opt.seed << "\n";
            if (opt.with_timestamps)
                out() << "# timestamp=" << timestamp_now() << "\n";
        }
    }

    std::ostream& out() { return file_.is_open() ? file_ : std::cout; }
    bool structured() const { return structured_; }
    json& doc() { return doc_; }

    void columns(const std::string& header) {
        if (!structured_) out() << header << "\n";
    }
    void row(const std::string& line) {
        if (!structured_) out() << line << "\n";
    }
    void finish() {
        if (structured_) out() << doc_.dump(2) << "\n";
    }

  private:
    bool structured_;
    std::ofstream file_;
    json doc_;
};

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

long long single_t(const Options& opt, long long fallback) {
    return opt.t_list.empty() ? fallback : opt.t_list.front();
}

int run_validate(const Options& opt) {
    envgen::EnvSpec spec = envgen::load_spec(opt.spec_path);
    Emitter em(opt, "validate", envgen::spec_digest(opt.spec_path));
    em.columns("atom\tr_power_norm\tp_min_entry\tq_min_entry\tjal_distance\tc2_ok");
    std::vector<envgen::Triple> atoms;
    if (spec.kind == envgen::EnvSpec::Kind::Discrete)
        for (const auto& [t, prob] : spec.support) atoms.push_back(t);
    else
        for (long long n = 0; n < 16; ++n)
            atoms.push_back(spec.sample_triple(opt.seed, n));
    bool all_ok = true;
    std::string first_failure;
    json jatoms = json::array();
    for (std::size_t k = 0; k < atoms.size(); ++k) {
        auto rep = envgen::validate_condition_c2(atoms[k], spec.epsilon, spec.l);
        double jal = 0.0;
        std::string fail;
        if (!rep.r_power_ok) fail = "r_power";
        else if (!rep.p_entries_ok) fail = "p_entries";
        else if (!rep.q_entries_ok) fail = "q_entries";
        if (fail.empty()) {
            try {
                jal = envgen::jal_distance(atoms[k]);
            } catch (const std::exception&) {
                fail = "stationary_pi";
            }
        }
        if (!fail.empty() && first_failure.empty())
            first_failure = "atom " + std::to_string(k) + " fails C2 clause: " + fail;
        all_ok = all_ok && fail.empty();
        std::ostringstream line;
        line << k << '\t' << fmt(rep.r_power_norm) << '\t' << fmt(rep.p_min_entry)
             << '\t' << fmt(rep.q_min_entry) << '\t' << fmt(jal) << '\t'
             << (fail.empty() ? "ok" : fail);
        em.row(line.str());
        jatoms.push_back({{"atom", k},
                          {"r_power_norm", rep.r_power_norm},
                          {"p_min_entry", rep.p_min_entry},
                          {"q_min_entry", rep.q_min_entry},
                          {"jal_distance", jal},
                          {"c2", fail.empty() ? "ok" : fail}});
    }
    em.doc()["atoms"] = jatoms;
    em.doc()["ok"] = all_ok;
    em.finish();
    if (!all_ok) {
        std::cerr << "validate: " << first_failure << "\n";
        return 2;
    }
    return 0;
}

int run_classify(const Options& opt) {
    envgen::EnvSpec spec = envgen::load_spec(opt.spec_path);
    const long long n = single_t(opt, 1000000);
    auto est = lyap::lyapunov_estimate(spec, n, opt.seed, 1000);
    auto regime = lyap::classify_regime(est, 3.0, spec.analytic_lambda_zero());
    Emitter em(opt, "classify", envgen::spec_digest(opt.spec_path));
    em.columns("lambda_hat\tstd_error\tn_steps\tregime");
    em.row(fmt(est.lambda_hat) + "\t" + fmt(est.std_error) + "\t" +
           std::to_string(est.n_steps) + "\t" + lyap::to_string(regime));
    em.doc()["lambda_hat"] = est.lambda_hat;
    em.doc()["std_error"] = est.std_error;
    em.doc()["n_steps"] = est.n_steps;
    em.doc()["regime"] = lyap::to_string(regime);
    em.finish();
    return 0;
}

int run_potential(const Options& opt) {
    envgen::EnvSpec spec = envgen::load_spec(opt.spec_path);
    const long long half = single_t(opt, 1000);
    const long long margin = std::max<long long>(64, half / 4);
    auto w = envgen::sample_window(spec, opt.seed, -half - margin, half + margin);
    auto prof = potential::potential_profile(w, -half, half, opt.tol);
    Emitter em(opt, "potential", envgen::spec_digest(opt.spec_path));
    em.columns("n\tphi\tphi_minus");
    json rows = json::array();
    for (long long n = -half; n <= half; ++n) {
        em.row(std::to_string(n) + "\t" + fmt(prof.phi_at(n)) + "\t" +
               fmt(prof.phi_minus_at(n)));
        if (em.structured())
            rows.push_back({{"n", n},
                            {"phi", prof.phi_at(n)},
                            {"phi_minus", prof.phi_minus_at(n)}});
    }
    em.doc()["profile"] = rows;
    em.finish();
    return 0;
}

int run_valley(const Options& opt) {
    envgen::EnvSpec spec = envgen::load_spec(opt.spec_path);
    const long long t = single_t(opt, 1000000);
    auto pred = potential::predict_b_t(spec, opt.seed, t, opt.delta, opt.gamma,
                                       opt.tol);
    Emitter em(opt, "valley", envgen::spec_digest(opt.spec_path));
    em.columns(
        "t\tfound\ta_t\tb_t\tc_t\tdepth_log_t\test1\test2\test3\test4\test5\twindow");
    std::ostringstream line;
    em.doc()["t"] = t;
    em.doc()["window"] = {pred.window_a, pred.window_b};
    if (pred.valley) {
        const auto& v = *pred.valley;
        line << t << "\t1\t" << v.a_t << '\t' << v.b_t << '\t' << v.c_t << '\t'
             << fmt(v.depth_log_t) << '\t' << v.est1 << '\t' << v.est2 << '\t'
             << v.est3 << '\t' << v.est4 << '\t' << v.est5 << '\t'
             << pred.window_a << ".." << pred.window_b;
        em.doc()["valley"] = {{"a_t", v.a_t},       {"b_t", v.b_t},
                              {"c_t", v.c_t},       {"depth_log_t", v.depth_log_t},
                              {"est1", v.est1},     {"est2", v.est2},
                              {"est3", v.est3},     {"est4", v.est4},
                              {"est5", v.est5},
                              {"certified", v.certificate_ok()}};
    } else {
        line << t << "\t0\t-\t-\t-\t-\t-\t-\t-\t-\t-\t" << pred.window_a << ".."
             << pred.window_b;
        em.doc()["valley"] = nullptr;
    }
    em.row(line.str());
    em.finish();
    return 0;
}

int run_sinai(const Options& opt) {
    envgen::EnvSpec spec = envgen::load_spec(opt.spec_path);
    std::vector<long long> ts = opt.t_list;
    if (ts.empty()) ts.push_back(1000000);
    auto res = walk::sinai_experiment(spec, ts, opt.envs, opt.walks, opt.delta,
                                      opt.gamma, opt.seed, opt.workers);
    Emitter em(opt, "sinai", envgen::spec_digest(opt.spec_path));
    em.columns("env\tenv_seed\tt\twalk\tendpoint\tb_t\tin_gamma_window\tin_valley");
    json rows = json::array();
    for (const auto& r : res.rows) {
        std::ostringstream line;
        line << r.env_index << '\t' << r.env_seed << '\t' << r.t << '\t'
             << r.walk_id << '\t' << r.endpoint << '\t' << r.b_t << '\t'
             << r.in_gamma_window << '\t' << r.in_valley;
        em.row(line.str());
        if (em.structured())
            rows.push_back({{"env", r.env_index},
                            {"env_seed", r.env_seed},
                            {"t", r.t},
                            {"walk", r.walk_id},
                            {"endpoint", r.endpoint},
                            {"b_t", r.b_t},
                            {"in_gamma_window", r.in_gamma_window},
                            {"in_valley", r.in_valley}});
    }
    em.columns(
        "# summary: t n_envs_with_valley n_envs_no_valley n_certified n_walks "
        "frac_in_gamma_window frac_in_valley too_small_t");
    json summaries = json::array();
    for (const auto& s : res.summaries) {
        std::ostringstream line;
        line << "summary\t" << s.t << '\t' << s.n_envs_with_valley << '\t'
             << s.n_envs_no_valley << '\t' << s.n_certified << '\t' << s.n_walks
             << '\t' << fmt(s.frac_in_gamma_window) << '\t'
             << fmt(s.frac_in_valley) << '\t' << s.too_small_t;
        em.row(line.str());
        summaries.push_back({{"t", s.t},
                             {"n_envs_with_valley", s.n_envs_with_valley},
                             {"n_envs_no_valley", s.n_envs_no_valley},
                             {"n_certified", s.n_certified},
                             {"n_walks", s.n_walks},
                             {"frac_in_gamma_window", s.frac_in_gamma_window},
                             {"frac_in_valley", s.frac_in_valley},
                             {"too_small_t", s.too_small_t}});
    }
    em.doc()["rows"] = rows;
    em.doc()["summaries"] = summaries;
    em.finish();
    return 0;
}

int run_clt(const Options& opt) {
    envgen::EnvSpec spec = envgen::load_spec(opt.spec_path);
    if (spec.kind != envgen::EnvSpec::Kind::Lifted1D)
        throw std::invalid_argument("clt: spec must be a 1d law");
    const long long t = single_t(opt, 10000);
    Emitter em(opt, "clt", envgen::spec_digest(opt.spec_path));
    em.columns("mode\tenv_seed\tsigma2_hat\tks\tmin_step_var\tmax_step_var");
    json rows = json::array();
    auto emit = [&](const std::string& mode, std::uint64_t env_seed,
                    const walk::CltResult& r) {
        std::ostringstream line;
        line << mode << '\t' << env_seed << '\t' << fmt(r.sigma2_hat) << '\t'
             << fmt(r.ks_statistic) << '\t' << fmt(r.min_step_variance) << '\t'
             << fmt(r.max_step_variance);
        em.row(line.str());
        rows.push_back({{"mode", mode},
                        {"env_seed", env_seed},
                        {"sigma2_hat", r.sigma2_hat},
                        {"ks", r.ks_statistic},
                        {"min_step_variance", r.min_step_variance},
                        {"max_step_variance", r.max_step_variance}});
    };
    emit("annealed", 0, walk::clt_experiment(spec.oned, t, opt.walks, opt.seed));
    for (int e = 0; e < opt.envs; ++e) {
        const std::uint64_t env_seed =
            Rng(opt.seed, static_cast<std::uint64_t>(e)).next_u64();
        emit("quenched", env_seed,
             walk::clt_experiment(spec.oned, t, opt.walks, opt.seed, env_seed));
    }
    em.doc()["runs"] = rows;
    em.finish();
    return 0;
}

int run_hitting(const Options& opt) {
    envgen::EnvSpec spec = envgen::load_spec(opt.spec_path);
    const long long half = single_t(opt, 20);
    auto w = envgen::sample_window(spec, opt.seed, -half, half);
    walk::ReflectedWindow rw(w, -half, half);
    auto sol = walk::solve_all(rw);
    Emitter em(opt, "hitting", envgen::spec_digest(opt.spec_path));
    em.columns("k\tlane\th\te\tpi");
    json rows = json::array();
    for (long long k = -half; k <= half; ++k)
        for (Index i = 0; i < spec.m; ++i) {
            em.row(std::to_string(k) + "\t" + std::to_string(i + 1) + "\t" +
                   fmt(sol.h_at(k)(i)) + "\t" + fmt(sol.e_at(k)(i)) + "\t" +
                   fmt(sol.pi_at(k)(i)));
            if (em.structured())
                rows.push_back({{"k", k},
                                {"lane", i + 1},
                                {"h", sol.h_at(k)(i)},
                                {"e", sol.e_at(k)(i)},
                                {"pi", sol.pi_at(k)(i)}});
        }
    em.doc()["solution"] = rows;
    em.finish();
    return 0;
}

int run_selftest(const Options& opt) {
    Emitter em(opt, "selftest",
               opt.spec_path.empty() ? "-" : envgen::spec_digest(opt.spec_path));
    int failures = 0;
    json checks = json::array();
    auto check = [&](const std::string& name, bool ok) {
        em.row(name + "\t" + (ok ? "pass" : "FAIL"));
        checks.push_back({{"name", name}, {"ok", ok}});
        if (!ok) ++failures;
    };

    envgen::EnvSpec spec;
    spec.m = 1;
    {
        envgen::Triple t;
        t.P = Mat::Constant(1, 1, 0.3);
        t.Q = Mat::Constant(1, 1, 0.7);
        t.R = Mat::Zero(1, 1);
        envgen::Triple t2{Mat::Constant(1, 1, 0.7), Mat::Constant(1, 1, 0.3),
                          Mat::Zero(1, 1)};
        spec.support.emplace_back(t, 0.5);
        spec.support.emplace_back(t2, 0.5);
    }
    {
        auto w1 = envgen::sample_window(spec, 7, -50, 50);
        auto w2 = envgen::sample_window(spec, 7, -10, 50);
        bool same = true;
        for (long long n = -10; n <= 50; ++n)
            same = same && w1.triple(n).P(0, 0) == w2.triple(n).P(0, 0);
        check("window_regeneration_determinism", same);
    }
    {
        auto w = envgen::sample_window(spec, 9, -200, 100);
        auto seq = zeta::zeta_sequence(w, -50, 100, 1e-10);
        bool ok = true;
        for (long long n = -50; n <= 100; ++n)
            ok = ok && std::abs(seq.zeta_at(n)(0, 0) - 1.0) <= 1e-12;
        check("zeta_scalar_identity", ok);
    }
    {
        envgen::EnvSpec half;
        half.m = 1;
        envgen::Triple t{Mat::Constant(1, 1, 0.5), Mat::Constant(1, 1, 0.5),
                         Mat::Zero(1, 1)};
        half.support.emplace_back(t, 1.0);
        auto w = envgen::sample_window(half, 1, -15, 15);
        walk::ReflectedWindow rw(w, -10, 12);
        auto e = walk::expected_exit_time(rw);
        bool ok = true;
        for (long long k = -10; k <= 12; ++k)
            ok = ok && std::abs(e[static_cast<std::size_t>(k + 10)](0) -
                                static_cast<double>((k + 10) * (12 - k))) <= 1e-9;
        check("symmetric_exit_time_closed_form", ok);
        auto pi = walk::stationary_measure_reflected(rw);
        double tot = 0.0;
        for (const auto& row : pi) tot += row.sum();
        check("reflected_stationary_normalized", std::abs(tot - 1.0) <= 1e-10);
    }
    {
        auto est = lyap::lyapunov_estimate(spec, 100000, 3, 500);
        check("scalar_symmetric_lambda_near_zero",
              std::abs(est.lambda_hat) <= 3.0 * est.std_error);
    }
    em.doc()["checks"] = checks;
    em.doc()["ok"] = failures == 0;
    em.finish();
    if (failures > 0) {
        std::cerr << "selftest: " << failures << " check(s) failed\n";
        return 2;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::string> known = {"validate", "classify", "potential",
                                            "valley",   "sinai",    "clt",
                                            "hitting",  "selftest"};
    if (argc < 2) {
        std::cerr << "usage: rwre <subcommand> [options]\nsubcommands:";
        for (const auto& s : known) std::cerr << ' ' << s;
        std::cerr << "\n";
        return 64;
    }
    const std::string sub = argv[1];
    if (sub == "--help" || sub == "-h") {
        std::cout << "usage: rwre <subcommand> [options]\nsubcommands:";
        for (const auto& s : known) std::cout << ' ' << s;
        std::cout << "\n";
        return 0;
    }
    if (std::find(known.begin(), known.end(), sub) == known.end()) {
        std::cerr << "rwre: unknown subcommand '" << sub << "'\n";
        return 64;
    }

    Options opt;
    CLI::App app{"random-walk-in-random-environment toolkit", "rwre " + sub};
    add_common_flags(app, opt, sub != "selftest");
    try {
        app.parse(argc - 1, argv + 1);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (sub == "validate") return run_validate(opt);
        if (sub == "classify") return run_classify(opt);
        if (sub == "potential") return run_potential(opt);
        if (sub == "valley") return run_valley(opt);
        if (sub == "sinai") return run_sinai(opt);
        if (sub == "clt") return run_clt(opt);
        if (sub == "hitting") return run_hitting(opt);
        if (sub == "selftest") return run_selftest(opt);
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "rwre: spec file is not valid: " << e.what() << "\n";
        return 66;
    } catch (const std::runtime_error& e) {
        const std::string msg = e.what();
        if (msg.rfind("cannot read spec file", 0) == 0) {
            std::cerr << "rwre: " << msg << "\n";
            return 66;
        }
        std::cerr << "rwre: " << msg << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "rwre: " << e.what() << "\n";
        return 2;
    }
    return 64;
}
