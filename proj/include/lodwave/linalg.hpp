#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace lodwave {

using SpMat = Eigen::SparseMatrix<double>;
using Vec = Eigen::VectorXd;
using Triplet = Eigen::Triplet<double>;

} // namespace lodwave
