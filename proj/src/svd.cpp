#include "auscnmf/svd.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

namespace auscnmf {

namespace {

// Tall case: x = Q R, R = P S W^T  =>  x = (Q P) S W^T.
SvdFactors tall_svd(const Matrix& x, Eigen::Index k) {
  const Eigen::Index n = x.cols();
  Eigen::HouseholderQR<Matrix> qr(x);
  const Matrix r = qr.matrixQR().topRows(n).triangularView<Eigen::Upper>();
  Eigen::BDCSVD<Matrix> small(r, Eigen::ComputeFullU | Eigen::ComputeFullV);

  SvdFactors out;
  out.values = small.singularValues().head(k);
  out.right = small.matrixV().leftCols(k);
  Matrix padded = Matrix::Zero(x.rows(), k);
  padded.topRows(n) = small.matrixU().leftCols(k);
  out.left = qr.householderQ() * padded;
  return out;
}

}  // namespace

SvdFactors truncated_svd(const Matrix& x, Eigen::Index k) {
  const Eigen::Index limit = std::min(x.rows(), x.cols());
  if (k < 1 || k > limit) {
    throw InvalidInput("truncated_svd: rank " + std::to_string(k) + " outside [1, " +
                       std::to_string(limit) + "]");
  }
  if (!x.allFinite()) throw InvalidInput("truncated_svd: matrix has non-finite entries");

  if (x.rows() >= x.cols()) return tall_svd(x, k);
  SvdFactors t = tall_svd(x.transpose(), k);
  std::swap(t.left, t.right);
  return t;
}

BasisInit init_bases_from_svd(const SvdFactors& svd, Eigen::Index source_bases,
                              Eigen::Index noise_bases) {
  if (source_bases < 0 || noise_bases < 0 || source_bases + noise_bases > svd.rank_budget()) {
    throw InvalidInput("init_bases_from_svd: need " + std::to_string(source_bases + noise_bases) +
                       " singular triplets, have " + std::to_string(svd.rank_budget()));
  }
  const Eigen::Index total = source_bases + noise_bases;
  Matrix combined(svd.left.rows(), total);
  for (Eigen::Index j = 0; j < total; ++j) {
    combined.col(j) = svd.left.col(j).cwiseAbs() * std::sqrt(std::max(svd.values(j), 0.0));
  }
  combined = combined.cwiseMax(kFloor);
  return {combined.leftCols(source_bases), combined.rightCols(noise_bases)};
}

}  // namespace auscnmf
