#pragma once

#include <Eigen/Dense>
#include <cstdint>

namespace gckn {

using Index = std::int32_t;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

}  // namespace gckn
