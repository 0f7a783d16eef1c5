#pragma once

#include <optional>

#include "rws/envgen.hpp"
#include "rws/zeta.hpp"

namespace rws {
namespace potential {

// Two-sided potential, anchored at layer 0. phi is accumulated from
// the A-products of the zeta sequence, phi_minus from the mirror
// A^- products; both agree up to a bounded constant.
struct PotentialProfile {
    long long a = 0, b = 0;
    std::vector<double> phi;
    std::vector<double> phi_minus;
    double lambda_used = 0.0;

    double phi_at(long long n) const { return phi[idx(n)]; }
    double phi_minus_at(long long n) const { return phi_minus[idx(n)]; }

  private:
    std::size_t idx(long long n) const {
        return static_cast<std::size_t>(n - a);
    }
};

PotentialProfile potential_profile(const envgen::EnvWindow& w, long long a,
                                   long long b, double tol);
// convenience: target range inferred from the window with a burn-in
// margin on each side
PotentialProfile potential_profile(const envgen::EnvWindow& w, double tol);

struct Valley {
    long long t = 0;
    long long a_t = 0, b_t = 0, c_t = 0;
    double delta = 0.0, gamma = 0.0;
    double depth_log_t = 0.0;
    // certificate booleans for the depth/drawdown inequalities
    bool est1 = false;  // delta-extended endpoints inside the profile span
    bool est2 = false;  // right drawdown <= (1-delta) log t
    bool est3 = false;  // left drawdown <= (1-delta) log t
    bool est4 = false;  // floor outside b +- gamma log^2 t
    bool est5 = false;  // endpoint depth >= (1+delta) log t
    bool certificate_ok() const { return est1 && est2 && est3 && est4 && est5; }
};

// Smallest interval around 0 of depth log t with bottom b_t; endpoints
// extended to the first delta log t overshoot. Empty when the profile
// never reaches the depth.
std::optional<Valley> find_valley(const PotentialProfile& prof, long long t,
                                  double delta, double gamma);

struct Prediction {
    std::optional<Valley> valley;
    long long window_a = 0, window_b = 0;
};

// Grows the window until find_valley succeeds (or the cap is hit).
Prediction predict_b_t(const envgen::EnvSpec& spec, std::uint64_t seed,
                       long long t, double delta, double gamma,
                       double tol = 1e-8, long long max_halfwidth = 2000000);

}  // namespace potential
}  // namespace rws
