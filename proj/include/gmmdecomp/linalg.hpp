#pragma once

#include "gmmdecomp/core.hpp"

namespace gmmdecomp {

/// |A - A^T|_max <= rel_tol * max(1, |A|_max)
bool is_symmetric(const Mat& a, double rel_tol);

/// Ascending eigenvalues of the symmetric part of a.
Vec symmetric_eigenvalues(const Mat& a);

/// Symmetric PSD square root of a symmetric matrix. Eigenvalues of `a` are
/// clamped below at `eigen_floor` (>= 0) before taking the root.
Mat symmetric_sqrt(const Mat& a, double eigen_floor = 0.0);

/// Lower Cholesky factor of an SPD matrix; throws std::domain_error if the
/// factorization fails.
Mat lower_cholesky(const Mat& spd);

}  // namespace gmmdecomp
