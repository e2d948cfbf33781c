#pragma once

#include <cstdint>

#include "casebench/linalg.hpp"

namespace casebench {

struct LsaModel {
  Index rank = 0;
  Eigen::VectorXd singular_values;
  Eigen::MatrixXd components;  // rank x n_features (Vt)
};

/// Top-`rank` right singular vectors of the training matrix. Throws DataError
/// naming the achievable rank when fewer than `rank` singular values are
/// numerically nonzero.
LsaModel lsa_fit(const SpMat& x, Index rank, std::uint64_t seed, const SvdOptions& options = {});

/// X V: projection onto the fitted right singular vectors.
Eigen::MatrixXd lsa_transform(const LsaModel& model, const SpMat& x);

}  // namespace casebench
