#pragma once

#include <vector>

#include "rws/envgen.hpp"
#include "rws/types.hpp"

namespace rws {
namespace zeta {

// One state of the exit-probability recursion: a stochastic matrix
// and a tracked unit direction (max-norm 1).
struct PsiState {
    Mat psi;
    Vec x;

    static PsiState identity_start(Index m);
    static PsiState uniform_start(Index m);
};

// distance ||psi - psi'|| + ||x - x'||
double state_distance(const PsiState& a, const PsiState& b);

struct StepResult {
    PsiState next;
    double log_bx_norm;  // discarded norm of Bx, feeds the centered series
};

// (psi', x') = ((I-R-Q psi)^{-1} P, normalized (I-R-Q psi)^{-1} Q x)
StepResult psi_step(const envgen::Triple& t, const PsiState& s);

// Converged zeta(n), y(n), A(n) over a target range, certified by a
// dual-start run from the window's left margin.
struct ZetaSeq {
    long long a = 0, b = 0;         // target range
    long long burnin = 0;           // layers consumed as burn-in
    double certified_tol = 0.0;     // dual-start disagreement at n = a
    std::vector<Mat> zetas;         // zeta(n), n in [a, b]
    std::vector<Vec> ys;            // y(n)
    std::vector<Mat> as;            // A(n) = (I - R_n - Q_n zeta(n))^{-1} Q_n

    const Mat& zeta_at(long long n) const { return zetas[idx(n)]; }
    const Vec& y_at(long long n) const { return ys[idx(n)]; }
    const Mat& a_at(long long n) const { return as[idx(n)]; }

  private:
    std::size_t idx(long long n) const {
        return static_cast<std::size_t>(n - a);
    }
};

ZetaSeq zeta_sequence(const envgen::EnvWindow& w, long long a, long long b,
                      double tol);

// Mirror: P and Q exchange roles and the recursion runs leftward;
// A^-(n) = (I - R_n - P_n zeta^-(n))^{-1} P_n.
ZetaSeq zeta_minus_sequence(const envgen::EnvWindow& w, long long a,
                            long long b, double tol);

struct FixedPoint {
    Mat zeta;
    Vec y;
    double lambda = 0.0;
    double residual = 0.0;
    bool converged = false;
};

// Constant-environment fixed point: zeta = (I-R-Q zeta)^{-1} P and the
// dominant eigenpair A y = e^lambda y by power iteration.
FixedPoint fixed_point_constant(const envgen::Triple& t, double tol,
                                int max_iter = 100000);

// rho_k between two orbits driven by the same window, k = 0..n.
std::vector<double> contraction_profile(const envgen::EnvWindow& w,
                                        PsiState s1, PsiState s2, int n);

}  // namespace zeta
}  // namespace rws
