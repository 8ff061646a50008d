#pragma once

#include <Eigen/Core>

namespace sstempo {

/// Row-major float matrix; rows are time frames throughout the DSP code.
using MatrixRF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using VectorF = Eigen::VectorXf;

}  // namespace sstempo
