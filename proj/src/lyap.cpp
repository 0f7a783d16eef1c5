#include "rws/lyap.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rws {
namespace lyap {

LyapEstimate lyapunov_estimate(const envgen::EnvSpec& spec, long long n,
                               std::uint64_t seed, long long burnin) {
    spec.validate();
    if (n < 1) throw std::invalid_argument("lyapunov_estimate: n >= 1 required");
    zeta::PsiState s = zeta::PsiState::identity_start(spec.m);
    for (long long k = 0; k < burnin; ++k)
        s = zeta::psi_step(spec.sample_triple(seed, k - burnin), s).next;
    double sum = 0.0;
    std::vector<double> increments;
    increments.reserve(static_cast<std::size_t>(n));
    for (long long k = 0; k < n; ++k) {
        auto [next, f] = zeta::psi_step(spec.sample_triple(seed, k), s);
        s = std::move(next);
        sum += f;
        increments.push_back(f);
    }
    LyapEstimate est;
    est.lambda_hat = sum / static_cast<double>(n);
    est.n_steps = n;
    est.method = "batch-mean";
    // batch-means standard error of the mean
    const int nb = static_cast<int>(std::min<long long>(32, n));
    const long long bl = n / nb;
    if (bl >= 2 && nb >= 2) {
        std::vector<double> means(nb, 0.0);
        for (int b = 0; b < nb; ++b) {
            for (long long k = 0; k < bl; ++k)
                means[b] += increments[static_cast<std::size_t>(b * bl + k)];
            means[b] /= static_cast<double>(bl);
        }
        double mu = 0.0;
        for (double v : means) mu += v;
        mu /= nb;
        double var = 0.0;
        for (double v : means) var += (v - mu) * (v - mu);
        var /= (nb - 1);
        est.std_error = std::sqrt(var / nb);
    } else {
        est.method = "sequential";
    }
    return est;
}

CenteredSeries centered_series(const envgen::EnvWindow& w,
                               const zeta::PsiState& start, double lambda) {
    CenteredSeries out;
    out.lambda_used = lambda;
    zeta::PsiState s = start;
    double acc = 0.0;
    out.values.reserve(static_cast<std::size_t>(w.b() - w.a() + 1));
    for (long long n = w.a(); n <= w.b(); ++n) {
        auto [next, f] = zeta::psi_step(w.triple(n), s);
        s = std::move(next);
        acc += f - lambda;
        out.values.push_back(acc);
    }
    return out;
}

Sigma2Estimate sigma2_estimate(const CenteredSeries& series,
                               long long batch_len) {
    const long long n = static_cast<long long>(series.values.size());
    if (batch_len < 1 || n < 10 * batch_len)
        throw std::invalid_argument("sigma2_estimate: series too short for batch length");
    const int nb = static_cast<int>(n / batch_len);
    // batch increments of S over disjoint blocks
    std::vector<double> incr(nb);
    for (int b = 0; b < nb; ++b) {
        const double hi = series.values[static_cast<std::size_t>((b + 1) * batch_len - 1)];
        const double lo = b == 0 ? 0.0
                                 : series.values[static_cast<std::size_t>(b * batch_len - 1)];
        incr[b] = hi - lo;
    }
    double mu = 0.0;
    for (double v : incr) mu += v;
    mu /= nb;
    double var = 0.0;
    for (double v : incr) var += (v - mu) * (v - mu);
    var /= (nb - 1);
    Sigma2Estimate out;
    out.sigma2_hat = var / static_cast<double>(batch_len);
    out.n_batches = nb;
    // jackknife over batches
    std::vector<double> jack(nb);
    for (int d = 0; d < nb; ++d) {
        double mu_d = (mu * nb - incr[d]) / (nb - 1);
        double var_d = 0.0;
        for (int b = 0; b < nb; ++b) {
            if (b == d) continue;
            var_d += (incr[b] - mu_d) * (incr[b] - mu_d);
        }
        var_d /= (nb - 2);
        jack[d] = var_d / static_cast<double>(batch_len);
    }
    double jmu = 0.0;
    for (double v : jack) jmu += v;
    jmu /= nb;
    double jvar = 0.0;
    for (double v : jack) jvar += (v - jmu) * (v - jmu);
    jvar *= static_cast<double>(nb - 1) / nb;
    const double half = 1.96 * std::sqrt(jvar);
    out.ci_low = out.sigma2_hat - half;
    out.ci_high = out.sigma2_hat + half;
    return out;
}

std::string to_string(Regime r) {
    switch (r) {
        case Regime::RecurrentCandidate: return "recurrent_candidate";
        case Regime::TransientRight: return "transient_right";
        case Regime::TransientLeft: return "transient_left";
        case Regime::Inconclusive: return "inconclusive";
    }
    return "?";
}

Regime classify_regime(const LyapEstimate& est, double z, bool analytic_zero) {
    if (est.lambda_hat + z * est.std_error < 0.0) return Regime::TransientRight;
    if (est.lambda_hat - z * est.std_error > 0.0) return Regime::TransientLeft;
    return analytic_zero ? Regime::RecurrentCandidate : Regime::Inconclusive;
}

IpDiagnostic ip_diagnostic(const CenteredSeries& series, double sigma) {
    if (!(sigma > 0.0)) throw std::invalid_argument("ip_diagnostic: sigma > 0 required");
    IpDiagnostic out;
    const std::size_t n = series.values.size();
    const double scale = 1.0 / (sigma * std::sqrt(static_cast<double>(n)));
    out.path.reserve(n + 1);
    out.path.push_back(0.0);
    for (double s : series.values) out.path.push_back(s * scale);
    out.endpoint = out.path.back();
    double span = 0.0;
    for (double v : out.path) span = std::max(span, std::abs(v));
    out.degenerate = span < 1e-6;
    return out;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double ks_normal(std::vector<double> samples) {
    if (samples.empty()) throw std::invalid_argument("ks_normal: empty sample");
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double cdf = normal_cdf(samples[i]);
        d = std::max(d, std::abs(cdf - static_cast<double>(i) / n));
        d = std::max(d, std::abs(static_cast<double>(i + 1) / n - cdf));
    }
    return d;
}

}  // namespace lyap
}  // namespace rws
