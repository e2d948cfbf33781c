#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "casebench/rng.hpp"

namespace casebench {

template <typename Scalar>
using SparseRows = Eigen::SparseMatrix<Scalar, Eigen::RowMajor>;
template <typename Scalar>
using SparseCols = Eigen::SparseMatrix<Scalar, Eigen::ColMajor>;
template <typename Scalar>
using Dense = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using SpMat = SparseRows<double>;
using Index = Eigen::Index;

namespace detail {
inline void require_dims(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(std::string("dimension mismatch in ") + what);
}
}  // namespace detail

/// y = M x
template <typename Scalar>
Vec<Scalar> spmv(const SparseRows<Scalar>& m, const Vec<Scalar>& x) {
  detail::require_dims(m.cols() == x.size(), "spmv");
  Vec<Scalar> y = Vec<Scalar>::Zero(m.rows());
  for (Index r = 0; r < m.outerSize(); ++r) {
    Scalar acc = 0;
    for (typename SparseRows<Scalar>::InnerIterator it(m, r); it; ++it) acc += it.value() * x[it.col()];
    y[r] = acc;
  }
  return y;
}

/// y = M^T x
template <typename Scalar>
Vec<Scalar> spmtv(const SparseRows<Scalar>& m, const Vec<Scalar>& x) {
  detail::require_dims(m.rows() == x.size(), "spmtv");
  Vec<Scalar> y = Vec<Scalar>::Zero(m.cols());
  for (Index r = 0; r < m.outerSize(); ++r) {
    const Scalar xr = x[r];
    if (xr == Scalar(0)) continue;
    for (typename SparseRows<Scalar>::InnerIterator it(m, r); it; ++it) y[it.col()] += it.value() * xr;
  }
  return y;
}

template <typename Scalar>
Scalar dot(const Vec<Scalar>& a, const Vec<Scalar>& b) {
  detail::require_dims(a.size() == b.size(), "dot");
  return a.dot(b);
}

template <typename Scalar>
Scalar norm(const Vec<Scalar>& a) {
  return a.norm();
}

/// y += alpha x
template <typename Scalar>
void axpy(Scalar alpha, const Vec<Scalar>& x, Vec<Scalar>& y) {
  detail::require_dims(x.size() == y.size(), "axpy");
  y.noalias() += alpha * x;
}

/// Keeps only the listed columns, in the listed order.
template <typename Scalar>
SparseRows<Scalar> select_columns(const SparseRows<Scalar>& m, const std::vector<Index>& columns) {
  std::vector<Index> remap(static_cast<std::size_t>(m.cols()), -1);
  for (std::size_t k = 0; k < columns.size(); ++k) {
    detail::require_dims(columns[k] >= 0 && columns[k] < m.cols(), "select_columns");
    remap[static_cast<std::size_t>(columns[k])] = static_cast<Index>(k);
  }
  std::vector<Eigen::Triplet<Scalar>> triplets;
  for (Index r = 0; r < m.outerSize(); ++r) {
    for (typename SparseRows<Scalar>::InnerIterator it(m, r); it; ++it) {
      const Index c = remap[static_cast<std::size_t>(it.col())];
      if (c >= 0) triplets.emplace_back(r, c, it.value());
    }
  }
  SparseRows<Scalar> out(m.rows(), static_cast<Index>(columns.size()));
  out.setFromTriplets(triplets.begin(), triplets.end());
  return out;
}

template <typename Scalar>
SparseRows<Scalar> select_rows(const SparseRows<Scalar>& m, const std::vector<Index>& rows) {
  SparseRows<Scalar> out(static_cast<Index>(rows.size()), m.cols());
  Eigen::VectorXi reserve(static_cast<Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    detail::require_dims(rows[k] >= 0 && rows[k] < m.rows(), "select_rows");
    reserve[static_cast<Index>(k)] = static_cast<int>(m.row(rows[k]).nonZeros());
  }
  out.reserve(reserve);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    for (typename SparseRows<Scalar>::InnerIterator it(m, rows[k]); it; ++it) {
      out.insert(static_cast<Index>(k), it.col()) = it.value();
    }
  }
  out.makeCompressed();
  return out;
}

struct SvdOptions {
  Index n_oversample = 10;
  Index n_power_iters = 4;
};

template <typename Scalar>
struct TruncatedSvd {
  Dense<Scalar> U;   // rows x rank
  Vec<Scalar> S;     // nonincreasing
  Dense<Scalar> Vt;  // rank x cols
};

namespace detail {

template <typename Scalar>
Dense<Scalar> orthonormal_basis(const Dense<Scalar>& y) {
  Eigen::HouseholderQR<Dense<Scalar>> qr(y);
  return qr.householderQ() * Dense<Scalar>::Identity(y.rows(), y.cols());
}

// Randomized factorization of the transpose of a tall row-major matrix
// `tall` (long x short). The power iterations are orthonormalized on the
// short side only; the long side is factored once by a thin QR of
// tall * Q = Q2 R, giving Q^T tall^T = R^T Q2^T. Returns (short-side factor,
// singular values, long-side factor) in the `U`, `S`, `Vt` slots.
// out = a * b for sparse row-major a and dense row-major b, one output row
// at a time.
template <typename Scalar, typename RowDense>
void sparse_times_dense(const SparseRows<Scalar>& a, const RowDense& b, RowDense& out) {
  out.setZero(a.rows(), b.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    auto row = out.row(i);
    for (typename SparseRows<Scalar>::InnerIterator it(a, i); it; ++it) row += it.value() * b.row(it.index());
  }
}

template <typename Scalar>
TruncatedSvd<Scalar> randomized_svd_tall(const SparseRows<Scalar>& tall, Index rank, Index width,
                                         Index n_power_iters, Rng& rng) {
  // Row-major dense operands let both products stream.
  using RowDense = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  // The Gaussian test matrix lives on the short side and is pushed through
  // tall^T tall once, which is cheaper than drawing it over the long side.
  RowDense g(tall.cols(), width);
  for (Index i = 0; i < tall.cols(); ++i)
    for (Index j = 0; j < width; ++j) g(i, j) = static_cast<Scalar>(rng.normal());

  RowDense z;
  sparse_times_dense(tall, g, z);
  RowDense y = tall.transpose() * z;
  RowDense q = orthonormal_basis<Scalar>(y);
  for (Index it = 0; it < n_power_iters; ++it) {
    sparse_times_dense(tall, q, z);
    y = tall.transpose() * z;
    q = orthonormal_basis<Scalar>(y);
  }

  sparse_times_dense(tall, q, z);
  const Dense<Scalar> c = z;
  Eigen::HouseholderQR<Dense<Scalar>> qr(c);
  const Dense<Scalar> r = qr.matrixQR().topRows(width).template triangularView<Eigen::Upper>();
  Eigen::JacobiSVD<Dense<Scalar>> svd(r.transpose(), Eigen::ComputeFullU | Eigen::ComputeFullV);

  TruncatedSvd<Scalar> out;
  out.S = svd.singularValues().head(rank);
  out.U = q * svd.matrixU().leftCols(rank);
  Dense<Scalar> v = Dense<Scalar>::Zero(tall.rows(), rank);
  v.topRows(width) = svd.matrixV().leftCols(rank);
  v.applyOnTheLeft(qr.householderQ());
  out.Vt = v.transpose();
  return out;
}

}  // namespace detail

/// Randomized range-finder SVD with a seeded Gaussian test matrix and
/// QR-stabilized power iterations. When rank plus oversampling reaches the
/// smaller dimension the dense one-sided Jacobi SVD is used instead. Each
/// right singular vector is signed so that its largest-magnitude entry is
/// positive.
template <typename Scalar>
TruncatedSvd<Scalar> truncated_svd(const SparseRows<Scalar>& m, Index rank, std::uint64_t seed,
                                   const SvdOptions& options = {}) {
  const Index min_dim = std::min(m.rows(), m.cols());
  if (rank < 1 || rank > min_dim) {
    throw std::invalid_argument("truncated_svd: rank " + std::to_string(rank) + " outside [1, " +
                                std::to_string(min_dim) + "]");
  }
  const Index width = std::min(rank + std::max<Index>(options.n_oversample, 0), min_dim);
  const Index iters = std::max<Index>(options.n_power_iters, 0);

  Rng rng(seed);
  TruncatedSvd<Scalar> out;
  if (width == min_dim) {
    // The sketch would span the whole short side, so factor directly.
    const Dense<Scalar> dense(m);
    Eigen::JacobiSVD<Dense<Scalar>> svd(dense, Eigen::ComputeThinU | Eigen::ComputeThinV);
    out.S = svd.singularValues().head(rank);
    out.U = svd.matrixU().leftCols(rank);
    out.Vt = svd.matrixV().leftCols(rank).transpose();
  } else if (m.rows() <= m.cols()) {
    const SparseRows<Scalar> tall = m.transpose();
    out = detail::randomized_svd_tall<Scalar>(tall, rank, width, iters, rng);
  } else {
    TruncatedSvd<Scalar> t = detail::randomized_svd_tall<Scalar>(m, rank, width, iters, rng);
    out.S = std::move(t.S);
    out.U = t.Vt.transpose();
    out.Vt = t.U.transpose();
  }
  for (Index k = 0; k < rank; ++k) {
    Index arg = 0;
    out.Vt.row(k).cwiseAbs().maxCoeff(&arg);
    if (out.Vt(k, arg) < Scalar(0)) {
      out.Vt.row(k) *= Scalar(-1);
      out.U.col(k) *= Scalar(-1);
    }
  }
  return out;
}

}  // namespace casebench
