#pragma once

#include <functional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "rws/types.hpp"

namespace rws {
namespace matops {

// min over (i,j,k) of a(i,j)b(j,k) / sum_j a(i,j)b(j,k).
// Both matrices must be strictly positive and of equal size; the
// result lies in (0, 1/m].
double delta_coefficient(const Mat& a, const Mat& b);

// Running decomposition of a right-product H_n = a_1 a_2 ... a_n of
// strictly positive matrices into a scale, a rank-one stochastic part
// and a residual whose norm is controlled by the delta coefficients of
// adjacent factors.
class PosProductState {
  public:
    explicit PosProductState(Index m);

    // Append factor `a`; pass the following factor as `next` (when
    // known) so the residual bound can absorb the adjacent-pair delta.
    void step(const Mat& a, const Mat* next = nullptr);

    Index dim() const { return normalized_.rows(); }
    Index count() const { return count_; }
    double log_scale() const { return log_scale_; }
    double residual_bound() const { return residual_bound_; }

    // c_n(j), bracketed per the last appended factor; sums to 1.
    Vec c() const;
    // bracket [min_i a~(i,j), max_i a~(i,j)] from the row-normalized
    // last factor
    std::pair<Vec, Vec> c_bracket() const;
    // normalized image H_n 1 / ||H_n 1||
    Vec direction() const;
    // H_n recovered as exp(log_scale) * normalized product
    Mat reconstruct() const;
    // measured residual: stochastic normalization minus rank-one(c)
    double residual_norm() const;

  private:
    Mat normalized_;       // H_n / exp(log_scale_), max row sum kept at 1
    Mat last_rownorm_;     // last factor with rows normalized to sum 1
    double log_scale_ = 0.0;
    double residual_bound_ = 1.0;
    Index count_ = 0;
};

// log ||A_n ... A_1 x0|| with per-step renormalization; never forms
// the full product. Returns the log-norm and the normalized image.
std::pair<double, Vec> log_norm_product(std::span<const Mat> factors,
                                        const Vec& x0);

// Distances r_k between two orbits x_{k+1} = b_k(x_k) and
// x'_{k+1} = b'_k(x'_k). Diagnostic only; pass/fail judged by the
// caller against the geometric envelope.
template <class X>
std::vector<double> stability_decay(
    std::span<const std::function<X(const X&)>> maps,
    std::span<const std::function<X(const X&)>> maps_perturbed, X x1, X x1p,
    const std::function<double(const X&, const X&)>& dist) {
    if (maps.size() != maps_perturbed.size())
        throw std::invalid_argument("stability_decay: length mismatch");
    std::vector<double> r;
    r.reserve(maps.size() + 1);
    r.push_back(dist(x1, x1p));
    for (std::size_t k = 0; k < maps.size(); ++k) {
        x1 = maps[k](x1);
        x1p = maps_perturbed[k](x1p);
        r.push_back(dist(x1, x1p));
    }
    return r;
}

void require_strictly_positive(const Mat& a, const char* who);

}  // namespace matops
}  // namespace rws
