#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <stdexcept>
#include <string>

namespace cntco {

template <typename Scalar>
using VecX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
// Trial-major storage: one row per region/arc/transistor, one column per trial,
// so a single row (all trials of one quantity) is contiguous.
template <typename Scalar>
using RowMatX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using SpMatX = Eigen::SparseMatrix<Scalar, Eigen::RowMajor>;

using Vec = VecX<double>;
using Mat = MatX<double>;
using RowMat = RowMatX<double>;
using SpMat = SpMatX<double>;
using IntRowMat = RowMatX<int>;
using Triplet = Eigen::Triplet<double>;

// Malformed input: bad files, violated preconditions on user data.
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numerical breakdown (non-PSD covariance, no surviving trials, ...).
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace cntco
