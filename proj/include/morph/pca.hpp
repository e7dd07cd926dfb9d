#pragma once

#include <cstddef>
#include <vector>

#include "morph/linalg.hpp"

namespace morph::pca {

enum class PcaMode { covariance, correlation };

struct PcaResult {
    la::Mat loadings;              // columns are components, orthonormal
    std::vector<double> eigenvalues; // descending
    std::vector<double> prop_var;
    std::vector<double> cum_prop;
    PcaMode mode = PcaMode::covariance;
};

/// Jacobi eigendecomposition of a symmetric matrix; eigenvalues descending,
/// eigenvectors as columns.
void symmetric_eigen(const la::Mat& A, std::vector<double>& values, la::Mat& vectors);

/// Sample covariance (divisor n-1) or correlation matrix of columns.
la::Mat sample_covariance(const la::Mat& data);
la::Mat sample_correlation(const la::Mat& data);

/// PCA of an n x q data matrix (rows are observations). Sign convention:
/// each component column is flipped so its largest-magnitude entry is
/// positive. Requires n >= 5 and, in correlation mode, positive variance in
/// every column.
PcaResult pca(const la::Mat& data, PcaMode mode);

} // namespace morph::pca
