#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>

#include "rws/walk.hpp"

using namespace rws;
using envgen::EnvSpec;
using envgen::OneDSpec;
using envgen::Triple;
using walk::WalkState;

namespace {

Triple scalar_triple(double p, double q, double r) {
    Triple t;
    t.P = Mat::Constant(1, 1, p);
    t.Q = Mat::Constant(1, 1, q);
    t.R = Mat::Constant(1, 1, r);
    return t;
}

EnvSpec constant_scalar(double p, double r = 0.0) {
    EnvSpec spec;
    spec.m = 1;
    spec.support.emplace_back(scalar_triple(p, 1.0 - p - r, r), 1.0);
    return spec;
}

Triple random_c2_triple(Index m, Rng& rng) {
    Triple t;
    t.P = Mat(m, m);
    t.Q = Mat(m, m);
    t.R = Mat(m, m);
    for (Index i = 0; i < m; ++i) {
        Vec row(3 * m);
        for (Index k = 0; k < 3 * m; ++k) row(k) = 0.05 + rng.next_double();
        row /= row.sum();
        t.P.row(i) = row.segment(0, m).transpose();
        t.R.row(i) = row.segment(m, m).transpose();
        t.Q.row(i) = row.segment(2 * m, m).transpose();
    }
    return t;
}

EnvSpec two_atom_spec(Index m, std::uint64_t mix_seed) {
    EnvSpec spec;
    spec.m = m;
    spec.epsilon = 0.02;
    spec.l = 2;
    Rng rng(mix_seed);
    spec.support.emplace_back(random_c2_triple(m, rng), 0.5);
    spec.support.emplace_back(random_c2_triple(m, rng), 0.5);
    return spec;
}

// dense assembly oracle: solve the full (b-a+1)m x (b-a+1)m harmonic
// system for hitting probabilities and exit times
std::pair<std::vector<Vec>, std::vector<Vec>> brute_force_h_e(
    const walk::ReflectedWindow& rw) {
    const long long a = rw.a(), b = rw.b();
    const Index m = rw.m();
    const Index dim = static_cast<Index>(b - a + 1) * m;
    auto id = [&](long long k, Index i) {
        return static_cast<Index>(k - a) * m + i;
    };
    Mat sys = Mat::Zero(dim, dim);
    Vec rhs_h = Vec::Zero(dim), rhs_e = Vec::Zero(dim);
    for (long long k = a; k <= b; ++k) {
        for (Index i = 0; i < m; ++i) {
            const Index row = id(k, i);
            if (k == a || k == b) {
                sys(row, row) = 1.0;
                rhs_h(row) = (k == b) ? 1.0 : 0.0;
                rhs_e(row) = 0.0;
                continue;
            }
            const Triple& t = rw.triple(k);
            sys(row, row) = 1.0;
            for (Index j = 0; j < m; ++j) {
                sys(row, id(k + 1, j)) -= t.P(i, j);
                sys(row, id(k, j)) -= t.R(i, j);
                sys(row, id(k - 1, j)) -= t.Q(i, j);
            }
            rhs_e(row) = 1.0;
        }
    }
    Eigen::PartialPivLU<Mat> lu(sys);
    Vec h = lu.solve(rhs_h), e = lu.solve(rhs_e);
    std::vector<Vec> hv, ev;
    for (long long k = a; k <= b; ++k) {
        hv.push_back(h.segment(id(k, 0), m));
        ev.push_back(e.segment(id(k, 0), m));
    }
    return {hv, ev};
}

}  // namespace

TEST_CASE("step honors the canonical P-R-Q block CDF") {
    Triple t;
    t.P = Mat(2, 2);
    t.Q = Mat(2, 2);
    t.R = Mat(2, 2);
    t.P << 0.2, 0.1, 0.05, 0.15;
    t.R << 0.1, 0.2, 0.3, 0.1;
    t.Q << 0.25, 0.15, 0.2, 0.2;
    WalkState s{0, 1};
    CHECK(walk::step(t, s, 0.1).layer == 1);   // P block
    CHECK(walk::step(t, s, 0.1).lane == 1);
    CHECK(walk::step(t, s, 0.25).lane == 2);   // still P
    CHECK(walk::step(t, s, 0.35).layer == 0);  // R block
    CHECK(walk::step(t, s, 0.55).lane == 2);
    CHECK(walk::step(t, s, 0.7).layer == -1);  // Q block
    CHECK(walk::step(t, s, 0.999).lane == 2);
    // deterministic right-mover
    Triple d = scalar_triple(1.0, 0.0, 0.0);
    CHECK(walk::step(d, WalkState{5, 1}, 0.7).layer == 6);
}

TEST_CASE("one-step frequencies match the row within 4 sigma") {
    Rng mix(55);
    Triple t = random_c2_triple(2, mix);
    const int n = 1000000;
    Rng rng(77);
    std::map<std::pair<long long, int>, int> counts;
    for (int k = 0; k < n; ++k) {
        WalkState z = walk::step(t, WalkState{0, 2}, rng.next_double());
        ++counts[{z.layer, z.lane}];
    }
    auto check = [&](long long layer, int lane, double p) {
        const double sd = std::sqrt(n * p * (1.0 - p));
        CHECK(std::abs(counts[{layer, lane}] - n * p) <= 4.0 * sd);
    };
    for (int j = 0; j < 2; ++j) {
        check(1, j + 1, t.P(1, j));
        check(0, j + 1, t.R(1, j));
        check(-1, j + 1, t.Q(1, j));
    }
}

TEST_CASE("simulate trivial cases") {
    EnvSpec spec = constant_scalar(0.5);
    auto w = envgen::sample_window(spec, 1, -200, 200);
    auto s0 = walk::simulate(w, WalkState{3, 1}, 0, walk_rng(1, 0));
    CHECK(s0.endpoint.layer == 3);

    EnvSpec right;
    right.m = 1;
    right.support.emplace_back(scalar_triple(1.0, 0.0, 0.0), 1.0);
    auto wr = envgen::sample_window(right, 1, -5, 200);
    auto s1 = walk::simulate(wr, WalkState{0, 1}, 100, walk_rng(1, 0));
    CHECK(s1.endpoint.layer == 100);
    CHECK(s1.max_layer == 100);
    CHECK(s1.min_layer == 0);
}

TEST_CASE("window exhaustion is signaled, never clamped") {
    EnvSpec right;
    right.m = 1;
    right.support.emplace_back(scalar_triple(1.0, 0.0, 0.0), 1.0);
    auto w = envgen::sample_window(right, 1, -5, 50);
    CHECK_THROWS_AS(walk::simulate(w, WalkState{0, 1}, 100, walk_rng(1, 0)),
                    walk::WindowExhausted);
}

TEST_CASE("simple-walk endpoint law passes a KS check") {
    EnvSpec spec = constant_scalar(0.5);
    auto w = envgen::sample_window(spec, 1, -400, 400);
    const int walks = 10000, t = 100;
    std::vector<double> xs;
    for (int wid = 0; wid < walks; ++wid) {
        auto s = walk::simulate(w, WalkState{0, 1}, t,
                                walk_rng(1, static_cast<std::uint64_t>(wid)));
        xs.push_back(static_cast<double>(s.endpoint.layer) / std::sqrt(1.0 * t));
    }
    // binomial-derived law: KS against N(0,1) at t=100 is ~0.008 + lattice
    std::sort(xs.begin(), xs.end());
    double ks = 0.0;
    const double n = static_cast<double>(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double cdf = 0.5 * std::erfc(-xs[i] / std::sqrt(2.0));
        ks = std::max(ks, std::abs(cdf - i / n));
        ks = std::max(ks, std::abs((i + 1) / n - cdf));
    }
    CHECK(ks <= 0.06);  // lattice discreteness dominates at t=100
}

TEST_CASE("reproducibility per (seed, walk id)") {
    EnvSpec spec = two_atom_spec(2, 99);
    auto w = envgen::sample_window(spec, 5, -500, 500);
    auto s1 = walk::simulate(w, WalkState{0, 1}, 5000, walk_rng(5, 3));
    auto s2 = walk::simulate(w, WalkState{0, 1}, 5000, walk_rng(5, 3));
    CHECK(s1.endpoint.layer == s2.endpoint.layer);
    CHECK(s1.endpoint.lane == s2.endpoint.lane);
    auto s3 = walk::simulate(w, WalkState{0, 1}, 5000, walk_rng(5, 4));
    CHECK((s3.endpoint.layer != s1.endpoint.layer ||
           s3.endpoint.lane != s1.endpoint.lane));
}

TEST_CASE("reflected boundaries bounce deterministically") {
    EnvSpec spec = constant_scalar(0.5);
    auto w = envgen::sample_window(spec, 1, -10, 10);
    walk::ReflectedWindow rw(w, -3, 3);
    CHECK(rw.triple(-3).P(0, 0) == 1.0);  // (I, 0, 0)
    CHECK(rw.triple(3).Q(0, 0) == 1.0);   // (0, I, 0)
    auto s = walk::simulate(rw, WalkState{0, 1}, 100000, walk_rng(2, 0));
    CHECK(s.min_layer >= -3);
    CHECK(s.max_layer <= 3);
}

TEST_CASE("gambler's ruin closed forms at m=1") {
    for (double p : {0.3, 0.45, 0.62}) {
        EnvSpec spec = constant_scalar(p);
        auto w = envgen::sample_window(spec, 1, -20, 20);
        walk::ReflectedWindow rw(w, -12, 15);
        auto h = walk::hitting_probabilities(rw);
        const double rho = (1.0 - p) / p;
        const long long a = -12, b = 15;
        for (long long k = a; k <= b; ++k) {
            const double want =
                (1.0 - std::pow(rho, static_cast<double>(k - a))) /
                (1.0 - std::pow(rho, static_cast<double>(b - a)));
            CHECK(std::abs(h[static_cast<std::size_t>(k - a)](0) - want) <= 1e-12);
        }
    }
}

TEST_CASE("symmetric exit time is (k-a)(b-k)") {
    EnvSpec spec = constant_scalar(0.5);
    auto w = envgen::sample_window(spec, 1, -30, 30);
    walk::ReflectedWindow rw(w, -20, 25);
    auto e = walk::expected_exit_time(rw);
    for (long long k = -20; k <= 25; ++k) {
        const double want = static_cast<double>((k + 20) * (25 - k));
        CHECK(std::abs(e[static_cast<std::size_t>(k + 20)](0) - want) <=
              1e-12 * std::max(1.0, want));
    }
    // p = 1/2 hitting is the linear harmonic function
    auto h = walk::hitting_probabilities(rw);
    for (long long k = -20; k <= 25; ++k)
        CHECK(h[static_cast<std::size_t>(k + 20)](0) ==
              doctest::Approx((k + 20.0) / 45.0).epsilon(1e-12));
}

TEST_CASE("solvers match the dense assembly oracle on random windows") {
    Rng seed_mix(2025);
    for (int rep = 0; rep < 50; ++rep) {
        const Index m = 1 + static_cast<Index>(seed_mix.next_u64() % 3);
        const long long span = 4 + static_cast<long long>(seed_mix.next_u64() % 27);
        EnvSpec spec = two_atom_spec(m, 1000 + static_cast<std::uint64_t>(rep));
        auto w = envgen::sample_window(spec, 77 + static_cast<std::uint64_t>(rep),
                                       -span, span);
        walk::ReflectedWindow rw(w, -span / 2 - 1, span / 2 + 1);
        auto sol = walk::solve_all(rw);
        auto [h_oracle, e_oracle] = brute_force_h_e(rw);
        for (std::size_t k = 0; k < h_oracle.size(); ++k) {
            CHECK(max_norm(Vec(sol.h[k] - h_oracle[k])) <= 1e-10);
            CHECK(max_norm(Vec(sol.e[k] - e_oracle[k])) <=
                  1e-10 * std::max(1.0, max_norm(e_oracle[k])));
        }
        // boundary contracts
        CHECK(max_norm(sol.h.front()) == 0.0);
        CHECK(Vec(sol.h.back() - Vec::Ones(m)).cwiseAbs().maxCoeff() <= 1e-12);
        CHECK(max_norm(sol.e.front()) == 0.0);
        CHECK(max_norm(sol.e.back()) == 0.0);
        double total = 0.0;
        for (const auto& row : sol.pi) {
            CHECK(row.minCoeff() >= 0.0);
            total += row.sum();
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-10));
    }
}

TEST_CASE("scalar reflected stationary weights: interior flat, boundary half") {
    EnvSpec spec = constant_scalar(0.5);
    auto w = envgen::sample_window(spec, 1, -10, 10);
    walk::ReflectedWindow rw(w, 0, 8);
    auto pi = walk::stationary_measure_reflected(rw);
    const double interior = pi[3](0);
    for (std::size_t k = 1; k + 1 < pi.size(); ++k)
        CHECK(pi[k](0) == doctest::Approx(interior).epsilon(1e-10));
    CHECK(pi.front()(0) == doctest::Approx(interior / 2.0).epsilon(1e-10));
    CHECK(pi.back()(0) == doctest::Approx(interior / 2.0).epsilon(1e-10));
}

TEST_CASE("occupation of a long reflected run approaches pi") {
    EnvSpec spec = two_atom_spec(2, 7);
    auto w = envgen::sample_window(spec, 3, -12, 12);
    walk::ReflectedWindow rw(w, -8, 8);
    auto pi = walk::stationary_measure_reflected(rw);
    auto sum = walk::simulate(rw, WalkState{0, 1}, 1000000, walk_rng(9, 0), true);
    double tv = 0.0;
    const double steps = 1000001.0;
    for (long long k = -8; k <= 8; ++k)
        for (Index i = 0; i < 2; ++i) {
            const double emp =
                sum.occupation[static_cast<std::size_t>((k + 8) * 2 + i)] / steps;
            tv += std::abs(emp - pi[static_cast<std::size_t>(k + 8)](i));
        }
    CHECK(tv / 2.0 <= 0.02);
}

TEST_CASE("MC first-passage and exit-time cross-checks at m=2") {
    EnvSpec spec = two_atom_spec(2, 401);
    auto w = envgen::sample_window(spec, 13, -10, 10);
    const long long a = -6, b = 7;
    walk::ReflectedWindow rw(w, a, b);
    auto sol = walk::solve_all(rw);
    // absorbing MC runs: stop at layer a or b
    struct Probe { long long k; int lane; };
    const Probe probes[] = {{0, 1}, {0, 2}, {-3, 1}, {4, 2}, {2, 1}};
    const int trials = 100000;
    int probe_id = 0;
    for (const auto& probe : probes) {
        ++probe_id;
        int hit_b = 0;
        double total_time = 0.0;
        Rng rng(walk_rng(31, static_cast<std::uint64_t>(probe_id)));
        for (int trial = 0; trial < trials; ++trial) {
            WalkState z{probe.k, probe.lane};
            long long steps = 0;
            while (z.layer != a && z.layer != b) {
                z = walk::step(w.triple(z.layer), z, rng.next_double());
                ++steps;
            }
            if (z.layer == b) ++hit_b;
            total_time += static_cast<double>(steps);
        }
        const double want_h = sol.h_at(probe.k)(probe.lane - 1);
        const double se_h = std::sqrt(want_h * (1.0 - want_h) / trials);
        CHECK(std::abs(hit_b / static_cast<double>(trials) - want_h) <=
              3.0 * se_h + 1e-9);
        const double want_e = sol.e_at(probe.k)(probe.lane - 1);
        // crude SE bound: exit time of a window this size has sd <= ~e
        const double se_e = want_e / std::sqrt(static_cast<double>(trials));
        CHECK(std::abs(total_time / trials - want_e) <= 4.0 * se_e);
    }
}

TEST_CASE("1D and lifted-strip walks are pathwise identical") {
    OneDSpec oned;
    oned.m = 2;
    Vec p1(5), p2(5);
    p1 << 0.25, 0.25, 0.0, 0.25, 0.25;
    p2 << 0.1, 0.3, 0.2, 0.2, 0.2;
    oned.support.emplace_back(p1, 0.5);
    oned.support.emplace_back(p2, 0.5);
    EnvSpec spec = envgen::lift_1d(oned);
    const std::uint64_t env_seed = 42;
    auto w = envgen::sample_window(spec, env_seed, -600, 600);
    // 1D oracle: same site vectors, CDF built in the strip's canonical
    // block order, state mapped through x = n*m + i
    auto step_1d = [&](long long x, double u) {
        const long long n = (x - 1) >= 0 ? (x - 1) / 2 : -((1 - x) / 2 + ((1 - x) % 2 ? 1 : 0));
        const int i = static_cast<int>(x - n * 2);
        Vec site = envgen::sample_site(oned, env_seed, x);
        auto prob = [&](int off) {
            return (off < -2 || off > 2) ? 0.0 : site(off + 2);
        };
        double acc = 0.0;
        for (int blk = 0; blk < 3; ++blk)
            for (int j = 1; j <= 2; ++j) {
                const int off = (blk == 0 ? 2 : blk == 1 ? 0 : -2) + j - i;
                acc += prob(off);
                const bool last = blk == 2 && j == 2;
                if (u < acc || last) return x + off;
            }
        return x;  // unreachable
    };
    Rng rng = walk_rng(env_seed, 0);
    WalkState z{0, 2};  // x = 0*2 + 2 = 2
    long long x = 2;
    for (int k = 0; k < 20000; ++k) {
        const double u = rng.next_double();
        z = walk::step(w.triple(z.layer), z, u);
        x = step_1d(x, u);
        REQUIRE(x == z.layer * 2 + z.lane);
    }
}

TEST_CASE("sinai experiment runs end to end and is worker-invariant") {
    EnvSpec spec;
    spec.m = 1;
    spec.epsilon = 0.05;
    spec.support.emplace_back(scalar_triple(0.3, 0.7, 0.0), 0.5);
    spec.support.emplace_back(scalar_triple(0.7, 0.3, 0.0), 0.5);
    auto res1 = walk::sinai_experiment(spec, {100000}, 8, 4, 0.1, 0.1, 11, 1);
    auto res4 = walk::sinai_experiment(spec, {100000}, 8, 4, 0.1, 0.1, 11, 4);
    REQUIRE(res1.rows.size() == res4.rows.size());
    for (std::size_t k = 0; k < res1.rows.size(); ++k) {
        CHECK(res1.rows[k].endpoint == res4.rows[k].endpoint);
        CHECK(res1.rows[k].b_t == res4.rows[k].b_t);
        CHECK(res1.rows[k].env_seed == res4.rows[k].env_seed);
    }
    REQUIRE(res1.summaries.size() == 1);
    CHECK(res1.summaries[0].n_envs_with_valley +
              res1.summaries[0].n_envs_no_valley == 8);
}

TEST_CASE("small t raises the too-small flag") {
    EnvSpec spec;
    spec.m = 1;
    spec.epsilon = 0.05;
    spec.support.emplace_back(scalar_triple(0.3, 0.7, 0.0), 0.5);
    spec.support.emplace_back(scalar_triple(0.7, 0.3, 0.0), 0.5);
    auto res = walk::sinai_experiment(spec, {1000}, 10, 2, 0.1, 0.1, 21, 1);
    CHECK(res.summaries[0].too_small_t);
}

TEST_CASE("clt_experiment on the simple walk") {
    OneDSpec oned;
    oned.m = 1;
    Vec p(3);
    p << 0.5, 0.0, 0.5;
    oned.support.emplace_back(p, 1.0);
    auto res = walk::clt_experiment(oned, 10000, 10000, 3);
    CHECK(res.ks_statistic <= 0.02);
    CHECK(res.sigma2_hat == doctest::Approx(1.0).epsilon(0.05));
    CHECK(res.min_step_variance == doctest::Approx(1.0));
    CHECK(res.max_step_variance == doctest::Approx(1.0));
}

TEST_CASE("clt_experiment rejects drifting support") {
    OneDSpec oned;
    oned.m = 1;
    Vec p(3);
    p << 0.3, 0.0, 0.7;
    oned.support.emplace_back(p, 1.0);
    CHECK_THROWS(walk::clt_experiment(oned, 100, 10, 3));
}

TEST_CASE("per-step variance of the two-range jump law") {
    OneDSpec oned;
    oned.m = 2;
    Vec p(5);
    p << 0.25, 0.25, 0.0, 0.25, 0.25;
    oned.support.emplace_back(p, 1.0);
    auto res = walk::clt_experiment(oned, 2000, 4000, 5);
    CHECK(res.min_step_variance == doctest::Approx(2.5));
    CHECK(std::abs(res.sigma2_hat - 2.5) <= 0.125);
    CHECK(res.ks_statistic <= 0.05);
}
