#include "rws/matops.hpp"

#include <cmath>

namespace rws {
namespace matops {

void require_strictly_positive(const Mat& a, const char* who) {
    if (a.rows() < 1 || a.rows() != a.cols())
        throw std::invalid_argument(std::string(who) + ": matrix must be square, m >= 1");
    if (a.minCoeff() < kPositivityFloor)
        throw std::invalid_argument(std::string(who) + ": entries must be strictly positive");
}

double delta_coefficient(const Mat& a, const Mat& b) {
    require_strictly_positive(a, "delta_coefficient");
    require_strictly_positive(b, "delta_coefficient");
    if (a.rows() != b.rows())
        throw std::invalid_argument("delta_coefficient: dimension mismatch");
    const Index m = a.rows();
    double delta = 1.0;
    for (Index i = 0; i < m; ++i) {
        for (Index k = 0; k < m; ++k) {
            double denom = 0.0;
            for (Index j = 0; j < m; ++j) denom += a(i, j) * b(j, k);
            for (Index j = 0; j < m; ++j)
                delta = std::min(delta, a(i, j) * b(j, k) / denom);
        }
    }
    return delta;
}

PosProductState::PosProductState(Index m)
    : normalized_(Mat::Identity(m, m)), last_rownorm_(Mat::Identity(m, m)) {
    if (m < 1) throw std::invalid_argument("PosProductState: m >= 1 required");
}

void PosProductState::step(const Mat& a, const Mat* next) {
    require_strictly_positive(a, "PosProductState::step");
    if (a.rows() != normalized_.rows())
        throw std::invalid_argument("PosProductState::step: dimension mismatch");
    normalized_ = normalized_ * a;
    const double s = op_norm(normalized_);
    normalized_ /= s;
    log_scale_ += std::log(s);
    last_rownorm_ = a.array().colwise() / a.rowwise().sum().array();
    if (next != nullptr && count_ >= 0) {
        // adjacent-pair coefficient delta_r for the factor just added
        residual_bound_ *= 1.0 - static_cast<double>(a.rows()) * delta_coefficient(a, *next);
    }
    ++count_;
}

std::pair<Vec, Vec> PosProductState::c_bracket() const {
    return {last_rownorm_.colwise().minCoeff().transpose(),
            last_rownorm_.colwise().maxCoeff().transpose()};
}

Vec PosProductState::c() const {
    // rows of the row-stochastic normalization all lie inside the
    // bracket; the midpoint of their column ranges does too
    Mat t = normalized_.array().colwise() / normalized_.rowwise().sum().array();
    Vec c = 0.5 * (t.colwise().minCoeff() + t.colwise().maxCoeff()).transpose();
    return c / c.sum();
}

Vec PosProductState::direction() const {
    Vec v = normalized_ * Vec::Ones(normalized_.cols());
    return v / max_norm(v);
}

Mat PosProductState::reconstruct() const {
    return std::exp(log_scale_) * normalized_;
}

double PosProductState::residual_norm() const {
    Mat t = normalized_.array().colwise() / normalized_.rowwise().sum().array();
    Mat phi = t - Vec::Ones(t.rows()) * c().transpose();
    return op_norm(phi);
}

std::pair<double, Vec> log_norm_product(std::span<const Mat> factors,
                                        const Vec& x0) {
    Vec v = x0;
    double acc = 0.0;
    for (const Mat& a : factors) {
        v = a * v;
        const double s = max_norm(v);
        if (!(s > 0.0))
            throw std::runtime_error("log_norm_product: image vanished (degenerate environment)");
        v /= s;
        acc += std::log(s);
    }
    return {acc, v};
}

}  // namespace matops
}  // namespace rws
