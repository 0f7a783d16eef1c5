#include "rws/envgen.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace rws {
namespace envgen {

using nlohmann::json;

void Triple::validate(double tol) const {
    const Index mm = P.rows();
    if (mm < 1 || P.cols() != mm || Q.rows() != mm || Q.cols() != mm ||
        R.rows() != mm || R.cols() != mm)
        throw std::invalid_argument("Triple: P, Q, R must be square of equal size");
    if (P.minCoeff() < 0 || Q.minCoeff() < 0 || R.minCoeff() < 0)
        throw std::invalid_argument("Triple: negative entry");
    Vec rowsum = (P + Q + R) * Vec::Ones(mm);
    if ((rowsum.array() - 1.0).abs().maxCoeff() > tol)
        throw std::invalid_argument("Triple: P+Q+R is not stochastic");
}

C2Report validate_condition_c2(const Triple& t, double epsilon, int l) {
    C2Report rep;
    const Index m = t.m();
    Mat ir = Mat::Identity(m, m) - t.R;
    Eigen::FullPivLU<Mat> lu(ir);
    lu.setThreshold(1e-12);
    if (!lu.isInvertible()) {
        rep.singular = true;
        rep.r_power_norm = 1.0;
        return rep;  // fails the ||R^l|| test by convention
    }
    Mat rl = Mat::Identity(m, m);
    for (int k = 0; k < l; ++k) rl = rl * t.R;
    rep.r_power_norm = op_norm(rl);
    rep.r_power_ok = rep.r_power_norm <= 1.0 - epsilon;
    Mat fp = lu.solve(t.P);
    Mat fq = lu.solve(t.Q);
    rep.p_min_entry = fp.minCoeff();
    rep.q_min_entry = fq.minCoeff();
    rep.p_entries_ok = rep.p_min_entry >= epsilon;
    rep.q_entries_ok = rep.q_min_entry >= epsilon;
    return rep;
}

RowVec stationary_pi(const Triple& t) {
    const Index m = t.m();
    Mat s = t.P + t.Q + t.R;
    if (m == 1) return RowVec::Ones(1);
    Mat a = (s - Mat::Identity(m, m)).transpose();
    Eigen::FullPivLU<Mat> rank_lu(a);
    rank_lu.setThreshold(1e-10);
    if (rank_lu.rank() < m - 1)
        throw std::runtime_error("stationary_pi: P+Q+R not irreducible, multiple solutions");
    Mat b = a;
    b.row(m - 1) = RowVec::Ones(m);
    Vec rhs = Vec::Zero(m);
    rhs(m - 1) = 1.0;
    Eigen::PartialPivLU<Mat> lu(b);
    Vec pi = lu.solve(rhs);
    pi += lu.solve(rhs - b * pi);  // one refinement pass
    RowVec res = pi.transpose() * s - pi.transpose();
    if (max_norm(res) > 1e-10)
        throw std::runtime_error("stationary_pi: residual too large");
    return pi.transpose();
}

double jal_distance(const Triple& t) {
    RowVec pi = stationary_pi(t);
    return pi * (t.P - t.Q) * Vec::Ones(t.m());
}

void OneDSpec::validate(double tol) const {
    if (m < 1) throw std::invalid_argument("OneDSpec: m >= 1 required");
    double psum = 0.0;
    for (const auto& [p, prob] : support) {
        if (p.size() != 2 * m + 1)
            throw std::invalid_argument("OneDSpec: p vector must have 2m+1 entries");
        if (p.minCoeff() < 0)
            throw std::invalid_argument("OneDSpec: negative probability");
        if (std::abs(p.sum() - 1.0) > tol)
            throw std::invalid_argument("OneDSpec: p does not sum to 1");
        if (prob < 0) throw std::invalid_argument("OneDSpec: negative atom probability");
        psum += prob;
    }
    if (std::abs(psum - 1.0) > tol)
        throw std::invalid_argument("OneDSpec: atom probabilities do not sum to 1");
}

double jal1d_drift(const Vec& p, int m) {
    if (p.size() != 2 * m + 1)
        throw std::invalid_argument("jal1d_drift: p vector must have 2m+1 entries");
    double drift = 0.0;
    for (int j = -m; j <= m; ++j) drift += j * p(j + m);
    return drift;
}

Triple lift_1d_layer(const std::vector<Vec>& site_vectors, int m) {
    if (static_cast<int>(site_vectors.size()) != m)
        throw std::invalid_argument("lift_1d_layer: need m site vectors");
    auto at = [&](int i, int offset) -> double {
        // offset outside [-m, m] carries probability 0
        if (offset < -m || offset > m) return 0.0;
        return site_vectors[static_cast<std::size_t>(i - 1)](offset + m);
    };
    Triple t;
    t.P = Mat::Zero(m, m);
    t.Q = Mat::Zero(m, m);
    t.R = Mat::Zero(m, m);
    for (int i = 1; i <= m; ++i) {
        for (int j = 1; j <= m; ++j) {
            t.P(i - 1, j - 1) = at(i, m + j - i);
            t.R(i - 1, j - 1) = at(i, j - i);
            t.Q(i - 1, j - 1) = at(i, -m + j - i);
        }
    }
    t.validate();
    return t;
}

EnvSpec lift_1d(const OneDSpec& spec1d) {
    spec1d.validate();
    EnvSpec spec;
    spec.kind = EnvSpec::Kind::Lifted1D;
    spec.m = spec1d.m;
    spec.oned = spec1d;
    return spec;
}

void EnvSpec::validate() const {
    if (m < 1) throw std::invalid_argument("EnvSpec: m >= 1 required");
    switch (kind) {
        case Kind::Discrete: {
            if (support.empty()) throw std::invalid_argument("EnvSpec: empty support");
            double psum = 0.0;
            for (const auto& [t, prob] : support) {
                if (t.m() != m) throw std::invalid_argument("EnvSpec: atom dimension mismatch");
                t.validate();
                if (prob < 0) throw std::invalid_argument("EnvSpec: negative probability");
                psum += prob;
            }
            if (std::abs(psum - 1.0) > 1e-12)
                throw std::invalid_argument("EnvSpec: probabilities do not sum to 1");
            break;
        }
        case Kind::Dirichlet: {
            if (!(epsilon > 0) || epsilon > 1.0 / (2.2 * static_cast<double>(m)))
                throw std::invalid_argument(
                    "EnvSpec: Dirichlet family needs 0 < epsilon <= 1/(2.2 m)");
            break;
        }
        case Kind::Lifted1D:
            oned.validate();
            if (m != oned.m) throw std::invalid_argument("EnvSpec: m mismatch with 1D law");
            break;
    }
}

Vec sample_site(const OneDSpec& oned, std::uint64_t seed, long long x) {
    if (oned.support.size() == 1) return oned.support[0].first;
    double u = site_rng(seed, x).next_double();
    double acc = 0.0;
    for (const auto& [p, prob] : oned.support) {
        acc += prob;
        if (u < acc) return p;
    }
    return oned.support.back().first;
}

namespace {

Triple sample_dirichlet_triple(Index m, double epsilon, std::uint64_t seed,
                               long long n) {
    Rng rng = layer_rng(seed, n);
    // floor mixing weight: P and Q entries end up >= theta/(2m) >= eps
    const double theta = std::min(1.0, 2.1 * static_cast<double>(m) * epsilon);
    Triple t;
    t.P = Mat::Zero(m, m);
    t.Q = Mat::Zero(m, m);
    t.R = Mat::Zero(m, m);
    const double floor_pq = theta / (2.0 * static_cast<double>(m));
    for (Index i = 0; i < m; ++i) {
        Vec e(3 * m);
        for (Index k = 0; k < 3 * m; ++k) e(k) = -std::log(rng.next_double_pos());
        e /= e.sum();
        for (Index j = 0; j < m; ++j) {
            t.P(i, j) = (1.0 - theta) * e(j) + floor_pq;
            t.R(i, j) = (1.0 - theta) * e(m + j);
            t.Q(i, j) = (1.0 - theta) * e(2 * m + j) + floor_pq;
        }
    }
    return t;
}

}  // namespace

Triple EnvSpec::sample_triple(std::uint64_t seed, long long n) const {
    switch (kind) {
        case Kind::Discrete: {
            if (support.size() == 1) return support[0].first;
            double u = layer_rng(seed, n).next_double();
            double acc = 0.0;
            for (const auto& [t, prob] : support) {
                acc += prob;
                if (u < acc) return t;
            }
            return support.back().first;
        }
        case Kind::Dirichlet:
            return sample_dirichlet_triple(m, epsilon, seed, n);
        case Kind::Lifted1D: {
            std::vector<Vec> sites;
            sites.reserve(static_cast<std::size_t>(m));
            for (Index i = 1; i <= m; ++i)
                sites.push_back(sample_site(oned, seed, n * m + i));
            return lift_1d_layer(sites, static_cast<int>(m));
        }
    }
    throw std::logic_error("EnvSpec: unknown kind");
}

bool EnvSpec::analytic_lambda_zero() const {
    if (kind == Kind::Lifted1D) {
        // zero drift on the whole support: the walk is a martingale
        for (const auto& [p, prob] : oned.support)
            if (std::abs(jal1d_drift(p, oned.m)) > 1e-12) return false;
        return true;
    }
    if (kind != Kind::Discrete) return false;
    if (m == 1) {
        // lambda = E log(q/p) in closed form
        double e = 0.0;
        for (const auto& [t, prob] : support) {
            double p = t.P(0, 0), q = t.Q(0, 0);
            if (!(p > 0) || !(q > 0)) return false;
            e += prob * std::log(q / p);
        }
        return std::abs(e) <= 1e-12;
    }
    if (support.size() == 1)
        return std::abs(jal_distance(support[0].first)) <= jal_tol;
    // a law invariant under exchanging P and Q equals its own mirror,
    // whose exponent is -lambda, so lambda = 0
    for (const auto& [t, prob] : support) {
        bool matched = false;
        for (const auto& [s, sprob] : support)
            if (std::abs(prob - sprob) <= 1e-15 &&
                max_norm(Mat(t.P - s.Q)) <= 1e-15 &&
                max_norm(Mat(t.Q - s.P)) <= 1e-15 &&
                max_norm(Mat(t.R - s.R)) <= 1e-15) {
                matched = true;
                break;
            }
        if (!matched) return false;
    }
    return true;
}

EnvWindow::EnvWindow(EnvSpec spec, std::uint64_t seed, long long a, long long b)
    : spec_(std::move(spec)), seed_(seed), a_(a), b_(b) {
    if (a > b) throw std::invalid_argument("EnvWindow: a <= b required");
    spec_.validate();
    triples_.reserve(static_cast<std::size_t>(b - a + 1));
    for (long long n = a; n <= b; ++n)
        triples_.push_back(spec_.sample_triple(seed_, n));
}

EnvWindow EnvWindow::widened(long long a, long long b) const {
    return EnvWindow(spec_, seed_, a, b);
}

EnvWindow sample_window(const EnvSpec& spec, std::uint64_t seed, long long a,
                        long long b) {
    return EnvWindow(spec, seed, a, b);
}

namespace {

Mat parse_matrix(const json& j, Index m) {
    Mat a(m, m);
    if (static_cast<Index>(j.size()) != m)
        throw std::invalid_argument("spec file: matrix row count mismatch");
    for (Index i = 0; i < m; ++i) {
        if (static_cast<Index>(j[i].size()) != m)
            throw std::invalid_argument("spec file: matrix column count mismatch");
        for (Index k = 0; k < m; ++k) a(i, k) = j[i][k].get<double>();
    }
    return a;
}

}  // namespace

EnvSpec load_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read spec file: " + path);
    json j = json::parse(in);
    EnvSpec spec;
    const std::string type = j.at("type").get<std::string>();
    spec.m = j.at("m").get<Index>();
    spec.epsilon = j.value("epsilon", 0.0);
    spec.l = j.value("l", 1);
    spec.jal_tol = j.value("jal_tol", 1e-10);
    if (type == "strip") {
        spec.kind = EnvSpec::Kind::Discrete;
        for (const auto& atom : j.at("atoms")) {
            Triple t;
            t.P = parse_matrix(atom.at("P"), spec.m);
            t.Q = parse_matrix(atom.at("Q"), spec.m);
            t.R = parse_matrix(atom.at("R"), spec.m);
            spec.support.emplace_back(std::move(t), atom.at("prob").get<double>());
        }
    } else if (type == "1d") {
        spec.kind = EnvSpec::Kind::Lifted1D;
        spec.oned.m = static_cast<int>(spec.m);
        for (const auto& atom : j.at("atoms")) {
            const auto& pv = atom.at("p");
            Vec p(static_cast<Index>(pv.size()));
            for (Index k = 0; k < p.size(); ++k) p(k) = pv[k].get<double>();
            spec.oned.support.emplace_back(std::move(p), atom.at("prob").get<double>());
        }
    } else if (type == "dirichlet") {
        spec.kind = EnvSpec::Kind::Dirichlet;
    } else {
        throw std::invalid_argument("spec file: unknown type '" + type + "'");
    }
    spec.validate();
    return spec;
}

std::string spec_digest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read spec file: " + path);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char c;
    while (in.get(c)) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    std::ostringstream os;
    os << std::hex << h;
    return os.str();
}

}  // namespace envgen
}  // namespace rws
