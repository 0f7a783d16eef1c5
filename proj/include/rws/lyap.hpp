#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rws/envgen.hpp"
#include "rws/zeta.hpp"

namespace rws {
namespace lyap {

struct LyapEstimate {
    double lambda_hat = 0.0;
    double std_error = 0.0;
    long long n_steps = 0;
    std::string method;  // "sequential" or "batch-mean"
};

// lambda_hat = mean of log||B_k x_k|| along the psi-chain after
// burn-in; standard error by batch means.
LyapEstimate lyapunov_estimate(const envgen::EnvSpec& spec, long long n,
                               std::uint64_t seed, long long burnin);

struct CenteredSeries {
    std::vector<double> values;  // S_1 .. S_n
    double lambda_used = 0.0;
};

// S_k = sum of (log||B_j x_j|| - lambda), accumulated along the chain
// started from `start` at the window's left edge.
CenteredSeries centered_series(const envgen::EnvWindow& w,
                               const zeta::PsiState& start, double lambda);

struct Sigma2Estimate {
    double sigma2_hat = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    int n_batches = 0;
};

// Batch-means estimator of lim Var(S_n)/n with jackknife CI.
Sigma2Estimate sigma2_estimate(const CenteredSeries& series,
                               long long batch_len);

enum class Regime {
    RecurrentCandidate,
    TransientRight,
    TransientLeft,
    Inconclusive,
};

std::string to_string(Regime r);

// Sign convention from the recurrence dichotomy: lambda < 0 means the
// walk drifts to +infinity. `analytic_zero` is the spec-level exact
// lambda = 0 certificate.
Regime classify_regime(const LyapEstimate& est, double z, bool analytic_zero);

struct IpDiagnostic {
    std::vector<double> path;  // v_n(k/n)/sigma at k = 0..n
    double endpoint = 0.0;     // v_n(1)/sigma
    bool degenerate = false;
};

IpDiagnostic ip_diagnostic(const CenteredSeries& series, double sigma);

// One-sample Kolmogorov-Smirnov distance against the standard normal.
double ks_normal(std::vector<double> samples);
double normal_cdf(double x);

}  // namespace lyap
}  // namespace rws
