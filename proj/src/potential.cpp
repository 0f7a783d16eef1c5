#include "rws/potential.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace rws {
namespace potential {

PotentialProfile potential_profile(const envgen::EnvWindow& w, long long a,
                                   long long b, double tol) {
    if (!(a <= 0 && 0 <= b))
        throw std::invalid_argument("potential_profile: range must contain layer 0");
    if (w.a() >= a || w.b() <= b)
        throw std::runtime_error("potential_profile: insufficient burn-in margin");
    const Index m = w.m();
    zeta::ZetaSeq fwd = zeta::zeta_sequence(w, a, b, tol);
    zeta::ZetaSeq bwd = zeta::zeta_minus_sequence(w, a, b, tol);

    PotentialProfile prof;
    prof.a = a;
    prof.b = b;
    const std::size_t len = static_cast<std::size_t>(b - a + 1);
    prof.phi.assign(len, 0.0);
    prof.phi_minus.assign(len, 0.0);
    auto idx = [&](long long n) { return static_cast<std::size_t>(n - a); };

    // phi, n >= 1: vector-tracked log||A_n ... A_1 y_1||
    for (long long n = 1; n <= b; ++n)
        prof.phi[idx(n)] =
            prof.phi[idx(n - 1)] + std::log(max_norm(fwd.a_at(n) * fwd.y_at(n)));
    // phi, n <= -1: -log||A_0 ... A_{n+1}||, row-tracked (weighted row
    // sums; exact for m = 1, bounded slack otherwise)
    {
        RowVec u = RowVec::Constant(m, 1.0 / static_cast<double>(m));
        for (long long n = -1; n >= a; --n) {
            RowVec ua = u * fwd.a_at(n + 1);
            const double s = ua.sum();
            prof.phi[idx(n)] = prof.phi[idx(n + 1)] - std::log(s);
            u = ua / s;
        }
    }
    // phi_minus, n <= -1: log||A^-_n ... A^-_{-1} y^-_{-1}||
    for (long long n = -1; n >= a; --n)
        prof.phi_minus[idx(n)] =
            prof.phi_minus[idx(n + 1)] +
            std::log(max_norm(bwd.a_at(n) * bwd.y_at(n)));
    // phi_minus, n >= 1: -log||A^-_0 ... A^-_{n-1}||, row-tracked
    {
        RowVec u = RowVec::Constant(m, 1.0 / static_cast<double>(m));
        for (long long n = 1; n <= b; ++n) {
            RowVec ua = u * bwd.a_at(n - 1);
            const double s = ua.sum();
            prof.phi_minus[idx(n)] = prof.phi_minus[idx(n - 1)] - std::log(s);
            u = ua / s;
        }
    }
    return prof;
}

PotentialProfile potential_profile(const envgen::EnvWindow& w, double tol) {
    const long long width = w.b() - w.a();
    const long long margin = std::max<long long>(8, std::min<long long>(1024, width / 4));
    return potential_profile(w, w.a() + margin, w.b() - margin, tol);
}

std::optional<Valley> find_valley(const PotentialProfile& prof, long long t,
                                  double delta, double gamma) {
    if (t < 3) return std::nullopt;
    const double depth = std::log(static_cast<double>(t));
    auto phi = [&](long long n) { return prof.phi_at(n); };

    // argmin over [lo, hi], ties toward the layer nearest 0 then the
    // smallest index. Values within tie_tol are treated as equal so
    // that last-bit differences between equivalent phi accumulations
    // cannot change the result.
    constexpr double tie_tol = 1e-9;
    auto argmin = [&](long long lo, long long hi) {
        long long best = lo;
        for (long long n = lo + 1; n <= hi; ++n) {
            const double v = phi(n), bv = phi(best);
            if (v < bv - tie_tol ||
                (v <= bv + tie_tol && (std::llabs(n) < std::llabs(best) ||
                                       (std::llabs(n) == std::llabs(best) && n < best))))
                best = n;
        }
        return best;
    };

    long long lo = 0, hi = 0;
    long long bottom = 0;
    long long at = 0, ct = 0;
    while (true) {
        while (true) {
            bottom = argmin(lo, hi);
            const bool need_left = phi(lo) - phi(bottom) < depth;
            const bool need_right = phi(hi) - phi(bottom) < depth;
            if (!need_left && !need_right) break;
            if (need_left) {
                if (lo == prof.a) return std::nullopt;  // window exhausted
                --lo;
            }
            if (need_right) {
                if (hi == prof.b) return std::nullopt;
                ++hi;
            }
        }
        // extend outward to the first delta log t overshoot above the rim
        at = lo;
        ct = hi;
        while (at > prof.a && phi(at) < phi(lo) + delta * depth) --at;
        while (ct < prof.b && phi(ct) < phi(hi) + delta * depth) ++ct;
        // the extension may expose a deeper bottom; re-anchor on it so
        // phi(b_t) is the minimum over the whole [a_t, c_t]
        const long long nb = argmin(at, ct);
        if (phi(nb) < phi(bottom)) {
            lo = at;
            hi = ct;
            continue;
        }
        bottom = nb;
        break;
    }
    // operational settle point: the walk occupies the layers it can hit
    // by time ~t, and sits at the deepest of them. Expected hitting
    // times come from the birth-death formulas with resistance e^{phi}
    // and mass e^{-phi}, so barrier heights and trap prefactors are
    // both accounted for.
    {
        const double budget = static_cast<double>(t);
        // normalize against the interval minimum so the exponentials
        // stay finite; the normalization cancels in every product
        const double ref = phi(bottom);
        auto res = [&](long long n) { return std::exp(phi(n) - ref); };
        auto mass = [&](long long n) { return std::exp(ref - phi(n)); };
        long long v_lo = 0, v_hi = 0;
        double elapsed = 0.0, visited_mass = mass(0);
        while (true) {
            const double inf = std::numeric_limits<double>::infinity();
            const double cost_r = v_hi < ct ? res(v_hi) * visited_mass : inf;
            const double cost_l = v_lo > at ? res(v_lo - 1) * visited_mass : inf;
            const double c = std::min(cost_r, cost_l);
            // tolerant comparisons: keep the greedy path stable under
            // last-bit perturbations of phi (ties go right)
            if (!(elapsed + c <= budget * (1.0 + 1e-9))) break;
            elapsed += c;
            if (cost_r <= cost_l * (1.0 + 1e-9))
                visited_mass += mass(++v_hi);
            else
                visited_mass += mass(--v_lo);
        }
        bottom = argmin(v_lo, v_hi);
    }

    Valley v;
    v.t = t;
    v.b_t = bottom;
    v.delta = delta;
    v.gamma = gamma;
    v.depth_log_t = (std::min(phi(at), phi(ct)) - phi(bottom)) / depth;
    v.a_t = at;
    v.c_t = ct;
    v.est1 = phi(at) >= phi(lo) + delta * depth && phi(ct) >= phi(hi) + delta * depth;

    // max drawdown right of the bottom: sup_{b <= x < y <= c_t} phi(x)-phi(y)
    {
        double run_max = phi(bottom), dd = 0.0;
        for (long long n = bottom; n <= ct; ++n) {
            run_max = std::max(run_max, phi(n));
            dd = std::max(dd, run_max - phi(n));
        }
        v.est2 = dd <= (1.0 - delta) * depth;
    }
    // max rise left of the bottom: sup_{a_t <= y < x <= b} phi(x)-phi(y)
    {
        double run_min = phi(at), dd = 0.0;
        for (long long n = at; n <= bottom; ++n) {
            run_min = std::min(run_min, phi(n));
            dd = std::max(dd, phi(n) - run_min);
        }
        v.est3 = dd <= (1.0 - delta) * depth;
    }
    // floor outside the gamma log^2 t neighbourhood of the bottom
    {
        const double w = gamma * depth * depth;
        double floor_min = std::numeric_limits<double>::infinity();
        for (long long n = at; n <= ct; ++n) {
            if (static_cast<double>(std::llabs(n - bottom)) <= w) continue;
            floor_min = std::min(floor_min, phi(n));
        }
        v.est4 = floor_min >= phi(bottom) + delta * depth;
    }
    v.est5 = std::min(phi(at), phi(ct)) - phi(bottom) >= (1.0 + delta) * depth;
    return v;
}

Prediction predict_b_t(const envgen::EnvSpec& spec, std::uint64_t seed,
                       long long t, double delta, double gamma, double tol,
                       long long max_halfwidth) {
    const double logt = std::log(static_cast<double>(t));
    long long half = std::max<long long>(64, 4 * static_cast<long long>(logt * logt));
    long long margin = 256;
    while (true) {
        try {
            envgen::EnvWindow w =
                envgen::sample_window(spec, seed, -half - margin, half + margin);
            PotentialProfile prof = potential_profile(w, -half, half, tol);
            std::optional<Valley> v = find_valley(prof, t, delta, gamma);
            if (v) return {v, -half, half};
        } catch (const std::runtime_error&) {
            margin *= 2;  // burn-in certification failed, widen and retry
            if (margin > max_halfwidth) throw;
            continue;
        }
        if (half >= max_halfwidth) return {std::nullopt, -half, half};
        half = std::min(max_halfwidth, half * 2);
    }
}

}  // namespace potential
}  // namespace rws
