#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "rws/envgen.hpp"
#include "rws/potential.hpp"
#include "rws/rng.hpp"

namespace rws {
namespace walk {

struct WalkState {
    long long layer = 0;
    int lane = 1;  // 1-based, in [1, m]
};

struct WindowExhausted : std::runtime_error {
    explicit WindowExhausted(long long layer)
        : std::runtime_error("walk left the environment window"), layer(layer) {}
    long long layer;
};

// Finite strip with reflecting boundary layers: triple a is (I,0,0),
// triple b is (0,I,0), interior triples come from the base window.
class ReflectedWindow {
  public:
    ReflectedWindow(const envgen::EnvWindow& base, long long a, long long b);

    const envgen::Triple& triple(long long n) const;
    long long a() const { return a_; }
    long long b() const { return b_; }
    Index m() const { return base_->m(); }
    const envgen::EnvWindow& base() const { return *base_; }

  private:
    const envgen::EnvWindow* base_;
    long long a_, b_;
    envgen::Triple left_, right_;
};

// One transition from the canonical row CDF: P-block, R-block,
// Q-block, lanes in order inside each block.
WalkState step(const envgen::Triple& t, const WalkState& s, double u);

struct WalkSummary {
    WalkState endpoint;
    long long min_layer = 0, max_layer = 0;
    // occupation counts per (layer - a)*m + (lane-1), when requested
    std::vector<std::uint64_t> occupation;
};

// Quenched walk of exactly `t` steps. Walkers on an unbounded window
// signal WindowExhausted; callers widen and rerun.
WalkSummary simulate(const envgen::EnvWindow& w, WalkState z0, long long t,
                     Rng rng, bool with_occupation = false);
WalkSummary simulate(const ReflectedWindow& w, WalkState z0, long long t,
                     Rng rng, bool with_occupation = false);

struct HittingSolution {
    long long a = 0, b = 0;
    std::vector<Vec> h;      // reach L_b before L_a, per layer
    std::vector<Vec> e;      // expected exit time of (L_a, L_b)
    std::vector<RowVec> pi;  // stationary weights, sums to 1 overall

    const Vec& h_at(long long k) const { return h[static_cast<std::size_t>(k - a)]; }
    const Vec& e_at(long long k) const { return e[static_cast<std::size_t>(k - a)]; }
    const RowVec& pi_at(long long k) const { return pi[static_cast<std::size_t>(k - a)]; }
};

// nu_b from the left Perron vector of psi_b, back-propagated through
// the alpha matrices and normalized; residual of the balance
// equations is checked to 1e-10.
std::vector<RowVec> stationary_measure_reflected(const ReflectedWindow& rw);

// phi recursion with phi_{a+1} = 0, then h_k = phi_{k+1} ... phi_b 1.
std::vector<Vec> hitting_probabilities(const ReflectedWindow& rw);

// forward phi/d sweep, e(a) = e(b) = 0; residual of the defining
// linear system verified to 1e-9.
std::vector<Vec> expected_exit_time(const ReflectedWindow& rw);

HittingSolution solve_all(const ReflectedWindow& rw);

struct SinaiRow {
    int env_index = 0;
    std::uint64_t env_seed = 0;
    long long t = 0;
    int walk_id = 0;
    long long endpoint = 0;
    long long b_t = 0;
    bool in_gamma_window = false;
    bool in_valley = false;
};

struct SinaiSummary {
    long long t = 0;
    int n_envs_with_valley = 0;
    int n_envs_no_valley = 0;
    int n_certified = 0;
    long long n_walks = 0;
    double frac_in_gamma_window = 0.0;
    double frac_in_valley = 0.0;
    bool too_small_t = false;  // certificate pass-rate below half
};

struct SinaiResult {
    std::vector<SinaiRow> rows;
    std::vector<SinaiSummary> summaries;  // one per t
};

SinaiResult sinai_experiment(const envgen::EnvSpec& spec,
                             const std::vector<long long>& t_list, int n_envs,
                             int n_walks, double delta, double gamma,
                             std::uint64_t seed, int workers = 1);

struct CltResult {
    std::vector<double> endpoints;     // xi(t) over walks
    double sigma2_hat = 0.0;           // Var(xi(t)) / t
    double ks_statistic = 0.0;         // against N(0,1) after rescaling
    double min_step_variance = 0.0;    // over visited sites
    double max_step_variance = 0.0;
};

// Direct 1D simulation; every support vector must have zero drift.
// quenched_env_seed fixes one environment for all walks; otherwise
// each walk gets its own (annealed).
CltResult clt_experiment(const envgen::OneDSpec& spec1d, long long t,
                         int n_walks, std::uint64_t seed,
                         std::optional<std::uint64_t> quenched_env_seed = {});

// Site vector of the 1D law at x (pure in (seed, x)).
Vec sample_site_1d(const envgen::OneDSpec& oned, std::uint64_t seed,
                   long long x);

}  // namespace walk
}  // namespace rws
