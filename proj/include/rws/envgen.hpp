#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rws/rng.hpp"
#include "rws/types.hpp"

namespace rws {
namespace envgen {

// One layer of the environment: transition weights to the next layer
// (P), the previous layer (Q) and within the layer (R). P+Q+R is
// stochastic.
struct Triple {
    Mat P, Q, R;

    Index m() const { return P.rows(); }
    void validate(double tol = 1e-12) const;
};

struct C2Report {
    bool r_power_ok = false;   // ||R^l|| <= 1 - eps
    bool p_entries_ok = false; // min entry of (I-R)^{-1}P >= eps
    bool q_entries_ok = false; // min entry of (I-R)^{-1}Q >= eps
    double r_power_norm = 0.0;
    double p_min_entry = 0.0;
    double q_min_entry = 0.0;
    bool singular = false;     // (I-R) numerically singular
    bool ok() const { return r_power_ok && p_entries_ok && q_entries_ok; }
};

C2Report validate_condition_c2(const Triple& t, double epsilon, int l);

// Unique left fixed probability vector of P+Q+R.
RowVec stationary_pi(const Triple& t);

// pi (P - Q) 1; zero characterizes membership in the algebraic
// surface J_al.
double jal_distance(const Triple& t);

// 1D bounded-jump law: probability vector over offsets -m..m.
struct OneDSpec {
    int m = 1;
    std::vector<std::pair<Vec, double>> support;  // (p(-m..m), probability)

    void validate(double tol = 1e-12) const;
};

// sum_j j p(j) for a vector indexed -m..m
double jal1d_drift(const Vec& p, int m);

// Site vector of the 1D law at x; pure in (seed, x).
Vec sample_site(const OneDSpec& oned, std::uint64_t seed, long long x);

// Law of the i.i.d. triples. Either a finite list of atoms or the
// Dirichlet-with-floor continuous family. For specs built from a 1D
// law the per-site vectors are sampled independently, so the lifted
// triples keep the pathwise correspondence x = n*m + i.
struct EnvSpec {
    enum class Kind { Discrete, Dirichlet, Lifted1D };

    Kind kind = Kind::Discrete;
    Index m = 1;
    double epsilon = 0.0;
    int l = 1;
    double jal_tol = 1e-10;
    std::vector<std::pair<Triple, double>> support;  // Discrete
    OneDSpec oned;                                   // Lifted1D

    void validate() const;
    Triple sample_triple(std::uint64_t seed, long long n) const;
    bool is_constant() const {
        return kind == Kind::Discrete && support.size() == 1;
    }
    // exact lambda = 0 certificate, when the law admits one
    bool analytic_lambda_zero() const;
};

// A reproducible finite slice of the environment. triple(n) is a pure
// function of (seed, n); any sub-range regenerates bit-for-bit.
class EnvWindow {
  public:
    EnvWindow(EnvSpec spec, std::uint64_t seed, long long a, long long b);

    const Triple& triple(long long n) const {
        if (n < a_ || n > b_)
            throw std::out_of_range("EnvWindow: layer outside window");
        return triples_[static_cast<std::size_t>(n - a_)];
    }
    long long a() const { return a_; }
    long long b() const { return b_; }
    Index m() const { return spec_.m; }
    const EnvSpec& spec() const { return spec_; }
    std::uint64_t seed() const { return seed_; }

    // same (spec, seed), wider range
    EnvWindow widened(long long a, long long b) const;

  private:
    EnvSpec spec_;
    std::uint64_t seed_ = 0;
    long long a_ = 0, b_ = 0;
    std::vector<Triple> triples_;
};

EnvWindow sample_window(const EnvSpec& spec, std::uint64_t seed, long long a,
                        long long b);

// Strip triple for layer n assembled from m consecutive site vectors
// p(nm+1, .) .. p(nm+m, .); offsets outside [-m, m] read as 0.
Triple lift_1d_layer(const std::vector<Vec>& site_vectors, int m);
EnvSpec lift_1d(const OneDSpec& spec1d);

// Spec file I/O (JSON; format documented in the README)
EnvSpec load_spec(const std::string& path);
std::string spec_digest(const std::string& path);

}  // namespace envgen
}  // namespace rws
