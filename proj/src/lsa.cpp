#include "casebench/lsa.hpp"

#include <limits>
#include <stdexcept>
#include <string>

#include "casebench/errors.hpp"

namespace casebench {

LsaModel lsa_fit(const SpMat& x, Index rank, std::uint64_t seed, const SvdOptions& options) {
  const Index min_dim = std::min(x.rows(), x.cols());
  if (rank < 1) throw std::invalid_argument("lsa_fit: rank must be at least 1");
  if (rank > min_dim) {
    throw DataError("lsa_fit: rank " + std::to_string(rank) + " exceeds the achievable rank " + std::to_string(min_dim));
  }
  const auto svd = truncated_svd<double>(x, rank, seed, options);
  const double tol = svd.S.size() > 0 ? svd.S[0] * 1e-10 : 0.0;
  Index achievable = 0;
  while (achievable < svd.S.size() && svd.S[achievable] > tol) ++achievable;
  if (achievable < rank) {
    throw DataError("lsa_fit: training matrix has rank " + std::to_string(achievable) + ", below the requested " +
                    std::to_string(rank));
  }
  return {rank, svd.S, svd.Vt};
}

Eigen::MatrixXd lsa_transform(const LsaModel& model, const SpMat& x) {
  if (x.cols() != model.components.cols()) throw std::invalid_argument("lsa_transform: feature count mismatch");
  return x * model.components.transpose();
}

}  // namespace casebench
