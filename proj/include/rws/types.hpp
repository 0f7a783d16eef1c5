#pragma once

#include <Eigen/Dense>

namespace rws {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using RowVec = Eigen::RowVectorXd;
using Index = Eigen::Index;

// All norms in this project follow a single convention:
// vectors carry the max-norm, matrices the induced operator norm
// (maximal absolute row sum).
template <class Derived>
double max_norm(const Eigen::MatrixBase<Derived>& x) {
    return x.cwiseAbs().maxCoeff();
}
inline double op_norm(const Mat& a) {
    return a.cwiseAbs().rowwise().sum().maxCoeff();
}

inline Vec unit_ones(Index m) { return Vec::Ones(m); }

// Entries below this threshold are treated as zero when strict
// positivity is required.
inline constexpr double kPositivityFloor = 1e-300;

}  // namespace rws
