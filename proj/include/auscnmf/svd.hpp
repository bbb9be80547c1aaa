#pragma once

#include <utility>

#include "auscnmf/types.hpp"

namespace auscnmf {

/// Leading singular triplets of a matrix, values non-increasing.
struct SvdFactors {
  Matrix left;    ///< rows x k, orthonormal columns
  Vector values;  ///< k singular values
  Matrix right;   ///< cols x k, orthonormal columns

  Eigen::Index rank_budget() const noexcept { return values.size(); }
};

/// The k leading singular triplets of `x` (1 <= k <= min(rows, cols)).
///
/// The long dimension is first reduced with a Householder QR, then the small
/// square factor is decomposed with a divide-and-conquer SVD.
SvdFactors truncated_svd(const Matrix& x, Eigen::Index k);

struct BasisInit {
  Matrix source;  ///< F x K_S
  Matrix noise;   ///< F x K_V
};

/// Column j of the combined initialization is |u_j| * sqrt(alpha_j), floored;
/// the first K_S columns go to the source bases, the next K_V to the noise bases.
BasisInit init_bases_from_svd(const SvdFactors& svd, Eigen::Index source_bases,
                              Eigen::Index noise_bases);

}  // namespace auscnmf
