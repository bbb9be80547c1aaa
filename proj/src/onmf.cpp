#include <cmath>
#include <limits>

#include "auscnmf/nmf.hpp"

namespace auscnmf {

namespace {

// num / den with 0 / 0 -> 0; denominators are otherwise strictly positive.
Matrix safe_ratio(const Matrix& num, const Matrix& den) {
  return num.binaryExpr(den, [](double a, double b) {
    return a / std::max(b, std::numeric_limits<double>::min());
  });
}

}  // namespace

OnmfFactors onmf_update(const Matrix& bases, const Matrix& gains, const Matrix& x) {
  if (bases.cols() != gains.rows() || bases.rows() != x.rows() || gains.cols() != x.cols()) {
    throw InvalidInput("onmf_update: inconsistent shapes");
  }
  const Matrix xgt = x * gains.transpose();
  const Matrix den_b = bases * (bases.transpose() * xgt);
  OnmfFactors out;
  out.bases = bases.cwiseProduct(safe_ratio(xgt, den_b).cwiseSqrt()).cwiseMax(kFloor);

  const Matrix& b = out.bases;
  const Matrix den_g = (b.transpose() * b) * gains;
  out.gains = gains.cwiseProduct(safe_ratio(b.transpose() * x, den_g)).cwiseMax(kFloor);
  if (!out.bases.allFinite() || !out.gains.allFinite()) {
    throw NumericalError("onmf_update produced non-finite factors", 0);
  }
  return out;
}

}  // namespace auscnmf
