#include "rws/zeta.hpp"

#include <cmath>
#include <stdexcept>

namespace rws {
namespace zeta {

PsiState PsiState::identity_start(Index m) {
    return {Mat::Identity(m, m), Vec::Ones(m)};
}

PsiState PsiState::uniform_start(Index m) {
    return {Mat::Constant(m, m, 1.0 / static_cast<double>(m)), Vec::Ones(m)};
}

double state_distance(const PsiState& a, const PsiState& b) {
    return op_norm(a.psi - b.psi) + max_norm(a.x - b.x);
}

StepResult psi_step(const envgen::Triple& t, const PsiState& s) {
    const Index m = t.m();
    Mat lhs = Mat::Identity(m, m) - t.R - t.Q * s.psi;
    Eigen::PartialPivLU<Mat> lu(lhs);
    Mat psi_next = lu.solve(t.P);
    psi_next += lu.solve(t.P - lhs * psi_next);  // one refinement pass
    Vec rowsum = psi_next.rowwise().sum();
    if ((rowsum.array() - 1.0).abs().maxCoeff() > 1e-9)
        throw std::runtime_error("psi_step: singular solve, environment violates C2");
    // re-project onto the stochastic manifold: the recursion is only
    // stable along it, and rounding drift transverse to it is amplified
    psi_next.array().colwise() /= rowsum.array();
    Mat b = lu.solve(t.Q);
    Vec bx = b * s.x;
    const double norm = max_norm(bx);
    if (!(norm > 0.0))
        throw std::runtime_error("psi_step: Bx vanished, environment violates C2");
    return {{std::move(psi_next), bx / norm}, std::log(norm)};
}

namespace {

// Shared by the forward and mirror runs. `triple_at(k)` supplies the
// k-th factor, already role-swapped for the mirror; steps go
// k = 0, 1, ... and the state after step k corresponds to layer
// direction(k+1).
struct DualRun {
    PsiState s1, s2;

    void step(const envgen::Triple& t) {
        s1 = psi_step(t, s1).next;
        s2 = psi_step(t, s2).next;
    }
    double gap() const { return state_distance(s1, s2); }
};

envgen::Triple mirrored(const envgen::Triple& t) { return {t.Q, t.P, t.R}; }

}  // namespace

ZetaSeq zeta_sequence(const envgen::EnvWindow& w, long long a, long long b,
                      double tol) {
    if (a > b) throw std::invalid_argument("zeta_sequence: a <= b required");
    if (w.a() >= a || w.b() < b)
        throw std::invalid_argument("zeta_sequence: window must cover burn-in margin and range");
    const Index m = w.m();
    DualRun run{PsiState::identity_start(m), PsiState::uniform_start(m)};
    // burn-in from the window's left edge up to layer a
    for (long long n = w.a(); n < a; ++n) run.step(w.triple(n));
    const double gap = run.gap();
    if (gap > tol)
        throw std::runtime_error("zeta_sequence: window too small for requested tol");

    ZetaSeq out;
    out.a = a;
    out.b = b;
    out.burnin = a - w.a();
    out.certified_tol = gap;
    const std::size_t len = static_cast<std::size_t>(b - a + 1);
    out.zetas.reserve(len);
    out.ys.reserve(len);
    out.as.reserve(len);
    PsiState s = run.s1;
    for (long long n = a; n <= b; ++n) {
        const envgen::Triple& t = w.triple(n);
        Mat lhs = Mat::Identity(m, m) - t.R - t.Q * s.psi;
        Mat an = Eigen::PartialPivLU<Mat>(lhs).solve(t.Q);
        out.zetas.push_back(s.psi);
        out.ys.push_back(s.x);
        out.as.push_back(std::move(an));
        if (n < b) s = psi_step(t, s).next;
    }
    return out;
}

ZetaSeq zeta_minus_sequence(const envgen::EnvWindow& w, long long a,
                            long long b, double tol) {
    if (a > b) throw std::invalid_argument("zeta_minus_sequence: a <= b required");
    if (w.b() <= b || w.a() > a)
        throw std::invalid_argument(
            "zeta_minus_sequence: window must cover burn-in margin and range");
    const Index m = w.m();
    DualRun run{PsiState::identity_start(m), PsiState::uniform_start(m)};
    // burn-in leftward from the window's right edge down to layer b
    for (long long n = w.b(); n > b; --n) run.step(mirrored(w.triple(n)));
    const double gap = run.gap();
    if (gap > tol)
        throw std::runtime_error("zeta_minus_sequence: window too small for requested tol");

    ZetaSeq out;
    out.a = a;
    out.b = b;
    out.burnin = w.b() - b;
    out.certified_tol = gap;
    const std::size_t len = static_cast<std::size_t>(b - a + 1);
    out.zetas.assign(len, Mat());
    out.ys.assign(len, Vec());
    out.as.assign(len, Mat());
    PsiState s = run.s1;
    for (long long n = b; n >= a; --n) {
        const envgen::Triple& t = w.triple(n);
        Mat lhs = Mat::Identity(m, m) - t.R - t.P * s.psi;
        Mat an = Eigen::PartialPivLU<Mat>(lhs).solve(t.P);
        const std::size_t i = static_cast<std::size_t>(n - a);
        out.zetas[i] = s.psi;
        out.ys[i] = s.x;
        out.as[i] = std::move(an);
        if (n > a) s = psi_step(mirrored(t), s).next;
    }
    return out;
}

FixedPoint fixed_point_constant(const envgen::Triple& t, double tol,
                                int max_iter) {
    const Index m = t.m();
    FixedPoint fp;
    PsiState s = PsiState::identity_start(m);
    for (int k = 0; k < max_iter; ++k) {
        PsiState next = psi_step(t, s).next;
        const double delta = op_norm(next.psi - s.psi);
        s = std::move(next);
        if (delta <= tol * 0.01) {
            fp.converged = true;
            break;
        }
    }
    fp.zeta = s.psi;
    Mat lhs = Mat::Identity(m, m) - t.R - t.Q * fp.zeta;
    Mat a = Eigen::PartialPivLU<Mat>(lhs).solve(t.Q);
    // power iteration; A is strictly positive under C2, so the
    // dominant eigenpair is simple and the iteration converges
    Vec y = Vec::Ones(m);
    double lambda = 0.0;
    bool eig_ok = false;
    for (int k = 0; k < max_iter; ++k) {
        Vec ay = a * y;
        const double norm = max_norm(ay);
        ay /= norm;
        const double lam = std::log(norm);
        if (k > 0 && std::abs(lam - lambda) <= tol * 0.1 &&
            max_norm(ay - y) <= tol * 0.1) {
            y = std::move(ay);
            lambda = lam;
            eig_ok = true;
            break;
        }
        y = std::move(ay);
        lambda = lam;
    }
    fp.y = y;
    fp.lambda = lambda;
    fp.residual = max_norm(a * y - std::exp(lambda) * y);
    fp.converged = fp.converged && eig_ok;
    return fp;
}

std::vector<double> contraction_profile(const envgen::EnvWindow& w,
                                        PsiState s1, PsiState s2, int n) {
    std::vector<double> rho;
    rho.reserve(static_cast<std::size_t>(n) + 1);
    rho.push_back(state_distance(s1, s2));
    long long layer = w.a();
    for (int k = 0; k < n; ++k, ++layer) {
        const envgen::Triple& t = w.triple(layer);
        s1 = psi_step(t, s1).next;
        s2 = psi_step(t, s2).next;
        rho.push_back(state_distance(s1, s2));
    }
    return rho;
}

}  // namespace zeta
}  // namespace rws
