#include "rws/walk.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

namespace rws {
namespace walk {

ReflectedWindow::ReflectedWindow(const envgen::EnvWindow& base, long long a,
                                 long long b)
    : base_(&base), a_(a), b_(b) {
    if (b - a < 2)
        throw std::invalid_argument("ReflectedWindow: b - a >= 2 required");
    if (base.a() > a || base.b() < b)
        throw std::invalid_argument("ReflectedWindow: base window too small");
    const Index m = base.m();
    left_ = {Mat::Identity(m, m), Mat::Zero(m, m), Mat::Zero(m, m)};
    right_ = {Mat::Zero(m, m), Mat::Identity(m, m), Mat::Zero(m, m)};
}

const envgen::Triple& ReflectedWindow::triple(long long n) const {
    if (n == a_) return left_;
    if (n == b_) return right_;
    return base_->triple(n);
}

WalkState step(const envgen::Triple& t, const WalkState& s, double u) {
    const Index m = t.m();
    const Index i = s.lane - 1;
    double acc = 0.0;
    for (Index j = 0; j < m; ++j) {
        acc += t.P(i, j);
        if (u < acc) return {s.layer + 1, static_cast<int>(j) + 1};
    }
    for (Index j = 0; j < m; ++j) {
        acc += t.R(i, j);
        if (u < acc) return {s.layer, static_cast<int>(j) + 1};
    }
    for (Index j = 0; j < m - 1; ++j) {
        acc += t.Q(i, j);
        if (u < acc) return {s.layer - 1, static_cast<int>(j) + 1};
    }
    return {s.layer - 1, static_cast<int>(m)};
}

namespace {

// Flat row CDFs over the canonical outcome order; one linear scan per
// step.
struct CompiledWindow {
    long long a = 0, b = 0;
    Index m = 1;
    std::vector<double> cdf;  // ((n-a)*m + lane) * 3m entries

    template <class W>
    static CompiledWindow build(const W& w, long long a, long long b) {
        CompiledWindow c;
        c.a = a;
        c.b = b;
        c.m = w.m();
        const Index m = c.m;
        c.cdf.assign(static_cast<std::size_t>((b - a + 1) * m * 3 * m), 0.0);
        for (long long n = a; n <= b; ++n) {
            const envgen::Triple& t = w.triple(n);
            for (Index i = 0; i < m; ++i) {
                double acc = 0.0;
                double* row = c.row(n, static_cast<int>(i) + 1);
                for (Index j = 0; j < m; ++j) row[j] = acc += t.P(i, j);
                for (Index j = 0; j < m; ++j) row[m + j] = acc += t.R(i, j);
                for (Index j = 0; j < m; ++j) row[2 * m + j] = acc += t.Q(i, j);
            }
        }
        return c;
    }

    double* row(long long n, int lane) {
        return cdf.data() +
               static_cast<std::size_t>(((n - a) * m + lane - 1) * 3 * m);
    }
    const double* row(long long n, int lane) const {
        return cdf.data() +
               static_cast<std::size_t>(((n - a) * m + lane - 1) * 3 * m);
    }

    WalkState step(const WalkState& s, double u) const {
        const double* r = row(s.layer, s.lane);
        const Index mm = 3 * m;
        Index k = 0;
        while (k < mm - 1 && u >= r[k]) ++k;
        if (k < m) return {s.layer + 1, static_cast<int>(k) + 1};
        if (k < 2 * m) return {s.layer, static_cast<int>(k - m) + 1};
        return {s.layer - 1, static_cast<int>(k - 2 * m) + 1};
    }
};

WalkSummary run_compiled(const CompiledWindow& c, WalkState z0, long long t,
                         Rng rng, bool bounded, bool with_occupation) {
    WalkSummary out;
    out.min_layer = out.max_layer = z0.layer;
    if (with_occupation)
        out.occupation.assign(
            static_cast<std::size_t>((c.b - c.a + 1) * c.m), 0);
    WalkState s = z0;
    auto occupy = [&](const WalkState& z) {
        if (with_occupation)
            ++out.occupation[static_cast<std::size_t>((z.layer - c.a) * c.m +
                                                      z.lane - 1)];
    };
    occupy(s);
    for (long long k = 0; k < t; ++k) {
        if (!bounded && (s.layer < c.a || s.layer > c.b))
            throw WindowExhausted(s.layer);
        s = c.step(s, rng.next_double());
        out.min_layer = std::min(out.min_layer, s.layer);
        out.max_layer = std::max(out.max_layer, s.layer);
        occupy(s);
    }
    out.endpoint = s;
    return out;
}

}  // namespace

WalkSummary simulate(const envgen::EnvWindow& w, WalkState z0, long long t,
                     Rng rng, bool with_occupation) {
    CompiledWindow c = CompiledWindow::build(w, w.a(), w.b());
    return run_compiled(c, z0, t, rng, /*bounded=*/false, with_occupation);
}

WalkSummary simulate(const ReflectedWindow& w, WalkState z0, long long t,
                     Rng rng, bool with_occupation) {
    CompiledWindow c = CompiledWindow::build(w, w.a(), w.b());
    return run_compiled(c, z0, t, rng, /*bounded=*/true, with_occupation);
}

namespace {

RowVec left_fixed_vector(const Mat& s) {
    const Index m = s.rows();
    if (m == 1) return RowVec::Ones(1);
    Mat a = (s - Mat::Identity(m, m)).transpose();
    Eigen::FullPivLU<Mat> rank_lu(a);
    rank_lu.setThreshold(1e-10);
    if (rank_lu.rank() < m - 1)
        throw std::runtime_error("left_fixed_vector: matrix not irreducible");
    Mat bm = a;
    bm.row(m - 1) = RowVec::Ones(m);
    Vec rhs = Vec::Zero(m);
    rhs(m - 1) = 1.0;
    Eigen::PartialPivLU<Mat> lu(bm);
    Vec v = lu.solve(rhs);
    v += lu.solve(rhs - bm * v);
    return v.transpose();
}

}  // namespace

std::vector<RowVec> stationary_measure_reflected(const ReflectedWindow& rw) {
    const long long a = rw.a(), b = rw.b();
    const Index m = rw.m();
    // psi sweep with psi_{a+1} = I (the reflecting layer a forces it)
    std::vector<Mat> inv;  // (I - R_k - Q_k psi_k)^{-1} for k = a+1..b-1
    inv.reserve(static_cast<std::size_t>(b - a - 1));
    Mat psi = Mat::Identity(m, m);
    Mat psi_b;
    for (long long k = a + 1; k <= b - 1; ++k) {
        const envgen::Triple& t = rw.triple(k);
        Mat lhs = Mat::Identity(m, m) - t.R - t.Q * psi;
        Mat lhs_inv = Eigen::PartialPivLU<Mat>(lhs).inverse();
        inv.push_back(lhs_inv);
        psi = lhs_inv * t.P;
        // psi is an exit-probability matrix, hence stochastic; project
        // back per row, the recursion is unstable transverse to that
        Vec rowsum = psi.rowwise().sum();
        if ((rowsum.array() - 1.0).abs().maxCoeff() > 1e-9)
            throw std::runtime_error(
                "stationary_measure_reflected: psi sweep lost stochasticity");
        psi.array().colwise() /= rowsum.array();
    }
    psi_b = psi;

    // nu_b, then nu_k = nu_{k+1} alpha_k; kept per-layer normalized
    // with a running log scale so deep potentials cannot overflow
    const std::size_t len = static_cast<std::size_t>(b - a + 1);
    std::vector<RowVec> dir(len);
    std::vector<double> logw(len, 0.0);
    auto idx = [&](long long k) { return static_cast<std::size_t>(k - a); };
    RowVec nu_b = left_fixed_vector(psi_b);
    dir[idx(b)] = nu_b / nu_b.sum();
    logw[idx(b)] = 0.0;
    RowVec cur = dir[idx(b)];
    for (long long k = b - 1; k >= a; --k) {
        RowVec next;
        if (k == a) {
            next = cur * rw.triple(a + 1).Q;  // alpha_a = Q_{a+1}
        } else {
            next = cur * rw.triple(k + 1).Q * inv[static_cast<std::size_t>(k - a - 1)];
        }
        const double s = next.sum();
        dir[idx(k)] = next / s;
        logw[idx(k)] = logw[idx(k + 1)] + std::log(s);
        cur = dir[idx(k)];
    }
    const double log_max = *std::max_element(logw.begin(), logw.end());
    double z = 0.0;
    for (std::size_t i = 0; i < len; ++i) z += std::exp(logw[i] - log_max);
    std::vector<RowVec> pi(len);
    for (std::size_t i = 0; i < len; ++i)
        pi[i] = dir[i] * (std::exp(logw[i] - log_max) / z);

    // verify the full balance system in the local scale
    for (long long k = a; k <= b; ++k) {
        RowVec rhs;
        double scale;
        if (k == a) {
            rhs = pi[idx(a + 1)] * rw.triple(a + 1).Q;
            scale = std::max(pi[idx(a)].sum(), rhs.sum());
        } else if (k == b) {
            rhs = pi[idx(b - 1)] * rw.triple(b - 1).P;
            scale = std::max(pi[idx(b)].sum(), rhs.sum());
        } else {
            rhs = pi[idx(k - 1)] * rw.triple(k - 1).P +
                  pi[idx(k)] * rw.triple(k).R +
                  pi[idx(k + 1)] * rw.triple(k + 1).Q;
            scale = std::max(pi[idx(k)].sum(), rhs.sum());
        }
        if (!(max_norm(RowVec(pi[idx(k)] - rhs)) <= 1e-10 * std::max(1.0, scale)))
            throw std::runtime_error(
                "stationary_measure_reflected: balance residual too large");
    }
    return pi;
}

std::vector<Vec> hitting_probabilities(const ReflectedWindow& rw) {
    const long long a = rw.a(), b = rw.b();
    const Index m = rw.m();
    // phi_{k+1} = (I - Q_k phi_k - R_k)^{-1} P_k with phi_{a+1} = 0
    std::vector<Mat> phis(static_cast<std::size_t>(b - a + 1));
    auto idx = [&](long long k) { return static_cast<std::size_t>(k - a); };
    phis[idx(a + 1)] = Mat::Zero(m, m);
    for (long long k = a + 1; k <= b - 1; ++k) {
        const envgen::Triple& t = rw.triple(k);
        Mat lhs = Mat::Identity(m, m) - t.Q * phis[idx(k)] - t.R;
        phis[idx(k + 1)] = Eigen::PartialPivLU<Mat>(lhs).solve(t.P);
    }
    std::vector<Vec> h(static_cast<std::size_t>(b - a + 1));
    h[idx(b)] = Vec::Ones(m);
    for (long long k = b - 1; k >= a + 1; --k)
        h[idx(k)] = phis[idx(k + 1)] * h[idx(k + 1)];
    h[idx(a)] = Vec::Zero(m);
    return h;
}

std::vector<Vec> expected_exit_time(const ReflectedWindow& rw) {
    const long long a = rw.a(), b = rw.b();
    const Index m = rw.m();
    auto idx = [&](long long k) { return static_cast<std::size_t>(k - a); };
    std::vector<Mat> phis(static_cast<std::size_t>(b - a + 1));
    std::vector<Vec> d(static_cast<std::size_t>(b - a + 1));
    phis[idx(a + 1)] = Mat::Zero(m, m);
    d[idx(a)] = Vec::Zero(m);
    for (long long k = a + 1; k <= b - 1; ++k) {
        const envgen::Triple& t = rw.triple(k);
        Mat lhs = Mat::Identity(m, m) - t.Q * phis[idx(k)] - t.R;
        Eigen::PartialPivLU<Mat> lu(lhs);
        phis[idx(k + 1)] = lu.solve(t.P);
        Vec u = lu.solve(Vec::Ones(m));
        Mat bk = lu.solve(t.Q);
        d[idx(k)] = bk * d[idx(k - 1)] + u;
    }
    std::vector<Vec> e(static_cast<std::size_t>(b - a + 1));
    e[idx(b)] = Vec::Zero(m);
    for (long long k = b - 1; k >= a + 1; --k)
        e[idx(k)] = phis[idx(k + 1)] * e[idx(k + 1)] + d[idx(k)];
    e[idx(a)] = Vec::Zero(m);

    // substitute back into the defining equations
    for (long long k = a + 1; k <= b - 1; ++k) {
        const envgen::Triple& t = rw.triple(k);
        Vec rhs = t.P * e[idx(k + 1)] + t.R * e[idx(k)] + t.Q * e[idx(k - 1)] +
                  Vec::Ones(m);
        const double scale = std::max(1.0, max_norm(e[idx(k)]));
        if (max_norm(Vec(e[idx(k)] - rhs)) > 1e-9 * scale)
            throw std::runtime_error("expected_exit_time: residual too large");
    }
    return e;
}

HittingSolution solve_all(const ReflectedWindow& rw) {
    HittingSolution sol;
    sol.a = rw.a();
    sol.b = rw.b();
    sol.h = hitting_probabilities(rw);
    sol.e = expected_exit_time(rw);
    sol.pi = stationary_measure_reflected(rw);
    return sol;
}

namespace {

struct EnvTask {
    std::vector<SinaiRow> rows;
    // per t: valley found / certified flags
    std::vector<int> found, certified;
};

EnvTask run_sinai_env(const envgen::EnvSpec& spec, std::uint64_t env_seed,
                      int env_index, const std::vector<long long>& t_list,
                      int n_walks, double delta, double gamma) {
    EnvTask task;
    task.found.assign(t_list.size(), 0);
    task.certified.assign(t_list.size(), 0);
    for (std::size_t ti = 0; ti < t_list.size(); ++ti) {
        const long long t = t_list[ti];
        potential::Prediction pred =
            potential::predict_b_t(spec, env_seed, t, delta, gamma);
        if (!pred.valley) continue;
        task.found[ti] = 1;
        if (pred.valley->certificate_ok()) task.certified[ti] = 1;
        const double logt = std::log(static_cast<double>(t));
        const double gwin = gamma * logt * logt;
        long long half = pred.window_b;
        envgen::EnvWindow w = envgen::sample_window(spec, env_seed, -half, half);
        CompiledWindow compiled = CompiledWindow::build(w, -half, half);
        for (int wid = 0; wid < n_walks; ++wid) {
            const std::uint64_t stream =
                env_seed ^ Rng::mix(static_cast<std::uint64_t>(t));
            WalkState z0{0, 1 + wid % static_cast<int>(spec.m)};
            WalkSummary sum;
            while (true) {
                try {
                    sum = run_compiled(compiled, z0, t,
                                       walk_rng(stream, static_cast<std::uint64_t>(wid)),
                                       false, false);
                    break;
                } catch (const WindowExhausted&) {
                    half *= 2;
                    w = envgen::sample_window(spec, env_seed, -half, half);
                    compiled = CompiledWindow::build(w, -half, half);
                }
            }
            SinaiRow row;
            row.env_index = env_index;
            row.env_seed = env_seed;
            row.t = t;
            row.walk_id = wid;
            row.endpoint = sum.endpoint.layer;
            row.b_t = pred.valley->b_t;
            row.in_gamma_window =
                std::abs(static_cast<double>(row.endpoint - row.b_t)) <= gwin;
            row.in_valley =
                pred.valley->a_t <= row.endpoint && row.endpoint <= pred.valley->c_t;
            task.rows.push_back(row);
        }
    }
    return task;
}

}  // namespace

SinaiResult sinai_experiment(const envgen::EnvSpec& spec,
                             const std::vector<long long>& t_list, int n_envs,
                             int n_walks, double delta, double gamma,
                             std::uint64_t seed, int workers) {
    spec.validate();
    std::vector<EnvTask> tasks(static_cast<std::size_t>(n_envs));
    workers = std::max(1, workers);
    std::vector<std::thread> pool;
    std::atomic<int> next_env{0};
    auto worker = [&]() {
        while (true) {
            const int e = next_env.fetch_add(1);
            if (e >= n_envs) break;
            const std::uint64_t env_seed = Rng(seed, static_cast<std::uint64_t>(e)).next_u64();
            tasks[static_cast<std::size_t>(e)] =
                run_sinai_env(spec, env_seed, e, t_list, n_walks, delta, gamma);
        }
    };
    for (int k = 0; k < workers; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();

    SinaiResult out;
    for (const auto& task : tasks)
        out.rows.insert(out.rows.end(), task.rows.begin(), task.rows.end());
    for (std::size_t ti = 0; ti < t_list.size(); ++ti) {
        SinaiSummary s;
        s.t = t_list[ti];
        long long in_g = 0, in_v = 0;
        for (const auto& task : tasks) {
            s.n_envs_with_valley += task.found[ti];
            s.n_envs_no_valley += 1 - task.found[ti];
            s.n_certified += task.certified[ti];
        }
        for (const auto& row : out.rows) {
            if (row.t != s.t) continue;
            ++s.n_walks;
            in_g += row.in_gamma_window;
            in_v += row.in_valley;
        }
        if (s.n_walks > 0) {
            s.frac_in_gamma_window =
                static_cast<double>(in_g) / static_cast<double>(s.n_walks);
            s.frac_in_valley =
                static_cast<double>(in_v) / static_cast<double>(s.n_walks);
        }
        s.too_small_t =
            s.n_certified * 2 < s.n_envs_with_valley + s.n_envs_no_valley;
        out.summaries.push_back(s);
    }
    return out;
}

Vec sample_site_1d(const envgen::OneDSpec& oned, std::uint64_t seed,
                   long long x) {
    return envgen::sample_site(oned, seed, x);
}

namespace {

// lazily grown per-site CDFs and step variances for the 1D walk
struct SiteCache {
    const envgen::OneDSpec* spec;
    std::uint64_t seed;
    long long lo = 0, hi = -1;
    std::vector<Vec> cdfs;
    std::vector<double> vars;

    void ensure(long long x) {
        if (lo <= x && x <= hi) return;
        long long nlo = lo, nhi = hi;
        if (hi < lo) { nlo = x - 64; nhi = x + 64; }
        while (x < nlo) nlo = x - (hi - lo + 128);
        while (x > nhi) nhi = x + (hi - lo + 128);
        std::vector<Vec> cdfs2(static_cast<std::size_t>(nhi - nlo + 1));
        std::vector<double> vars2(static_cast<std::size_t>(nhi - nlo + 1), -1.0);
        for (long long y = lo; y <= hi; ++y) {
            cdfs2[static_cast<std::size_t>(y - nlo)] =
                std::move(cdfs[static_cast<std::size_t>(y - lo)]);
            vars2[static_cast<std::size_t>(y - nlo)] =
                vars[static_cast<std::size_t>(y - lo)];
        }
        cdfs = std::move(cdfs2);
        vars = std::move(vars2);
        lo = nlo;
        hi = nhi;
    }

    void materialize(long long x) {
        ensure(x);
        auto& slot = cdfs[static_cast<std::size_t>(x - lo)];
        if (slot.size() > 0) return;
        Vec p = envgen::sample_site(*spec, seed, x);
        Vec cdf(p.size());
        double acc = 0.0, var = 0.0;
        const int m = spec->m;
        for (Index k = 0; k < p.size(); ++k) {
            acc += p(k);
            cdf(k) = acc;
            const double j = static_cast<double>(k) - m;
            var += j * j * p(k);
        }
        slot = std::move(cdf);
        vars[static_cast<std::size_t>(x - lo)] = var;
    }

    const Vec& cdf(long long x) {
        materialize(x);
        return cdfs[static_cast<std::size_t>(x - lo)];
    }
    double variance(long long x) {
        materialize(x);
        return vars[static_cast<std::size_t>(x - lo)];
    }
};

}  // namespace

CltResult clt_experiment(const envgen::OneDSpec& spec1d, long long t,
                         int n_walks, std::uint64_t seed,
                         std::optional<std::uint64_t> quenched_env_seed) {
    spec1d.validate();
    for (const auto& [p, prob] : spec1d.support)
        if (std::abs(envgen::jal1d_drift(p, spec1d.m)) > 1e-12)
            throw std::invalid_argument(
                "clt_experiment: support vector with nonzero drift");
    CltResult out;
    out.min_step_variance = std::numeric_limits<double>::infinity();
    out.max_step_variance = 0.0;
    const int m = spec1d.m;
    SiteCache shared{&spec1d, quenched_env_seed.value_or(0)};
    for (int wid = 0; wid < n_walks; ++wid) {
        SiteCache local{&spec1d, 0};
        SiteCache* cache;
        if (quenched_env_seed) {
            cache = &shared;
        } else {
            local.seed = Rng(seed, 0xc17ULL + 2 * static_cast<std::uint64_t>(wid))
                             .next_u64();
            cache = &local;
        }
        Rng rng = walk_rng(quenched_env_seed ? *quenched_env_seed : seed,
                           static_cast<std::uint64_t>(wid));
        long long x = 0;
        for (long long k = 0; k < t; ++k) {
            const Vec& cdf = cache->cdf(x);
            out.min_step_variance =
                std::min(out.min_step_variance, cache->variance(x));
            out.max_step_variance =
                std::max(out.max_step_variance, cache->variance(x));
            const double u = rng.next_double();
            Index j = 0;
            while (j < cdf.size() - 1 && u >= cdf(j)) ++j;
            x += static_cast<long long>(j) - m;
        }
        out.endpoints.push_back(static_cast<double>(x));
    }
    double mu = 0.0;
    for (double v : out.endpoints) mu += v;
    mu /= static_cast<double>(out.endpoints.size());
    double var = 0.0;
    for (double v : out.endpoints) var += (v - mu) * (v - mu);
    var /= static_cast<double>(out.endpoints.size() - 1);
    out.sigma2_hat = var / static_cast<double>(t);
    const double sd = std::sqrt(var);
    std::vector<double> scaled;
    scaled.reserve(out.endpoints.size());
    for (double v : out.endpoints) scaled.push_back(v / sd);
    out.ks_statistic = 0.0;
    if (sd > 0) {
        std::sort(scaled.begin(), scaled.end());
        const double n = static_cast<double>(scaled.size());
        for (std::size_t i = 0; i < scaled.size(); ++i) {
            const double cdf = 0.5 * std::erfc(-scaled[i] / std::sqrt(2.0));
            out.ks_statistic = std::max(
                out.ks_statistic, std::abs(cdf - static_cast<double>(i) / n));
            out.ks_statistic = std::max(
                out.ks_statistic, std::abs(static_cast<double>(i + 1) / n - cdf));
        }
    }
    return out;
}

}  // namespace walk
}  // namespace rws
