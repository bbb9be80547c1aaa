#include "auscnmf/nmf.hpp"

namespace auscnmf::reference {

// Direct transcription of the update rules with explicit all-ones matrices.
NmfModel update_step(const NmfModel& model, const Matrix& x, const Matrix& y) {
  model.check_shapes();
  const auto f = model.num_bins();
  const auto t = model.num_frames();
  const auto ks = model.source_bases.cols();
  const double beta = model.beta_ortho;
  const Matrix ones_ft = Matrix::Ones(f, t);
  const Matrix ones_kk = Matrix::Ones(ks, ks);

  NmfModel m = model;
  Matrix xhat = m.source_bases * m.source_gains + m.noise_bases * m.noise_gains;
  Matrix yhat = m.noise_bases * m.external_gains;
  Matrix rx = x.cwiseQuotient(xhat);
  Matrix ry = y.cwiseQuotient(yhat);

  const Matrix num_s = rx * m.source_gains.transpose() + beta * m.source_bases;
  const Matrix den_s = ones_ft * m.source_gains.transpose() + beta * m.source_bases * ones_kk;
  const Matrix num_v = rx * m.noise_gains.transpose() + ry * m.external_gains.transpose();
  const Matrix den_v = ones_ft * m.noise_gains.transpose() + ones_ft * m.external_gains.transpose();
  m.source_bases = m.source_bases.cwiseProduct(num_s.cwiseQuotient(den_s)).cwiseMax(kFloor);
  m.noise_bases = m.noise_bases.cwiseProduct(num_v.cwiseQuotient(den_v)).cwiseMax(kFloor);

  xhat = m.source_bases * m.source_gains + m.noise_bases * m.noise_gains;
  yhat = m.noise_bases * m.external_gains;
  rx = x.cwiseQuotient(xhat);
  ry = y.cwiseQuotient(yhat);

  const Matrix gs = m.source_gains.cwiseProduct(
      (m.source_bases.transpose() * rx).cwiseQuotient(m.source_bases.transpose() * ones_ft));
  const Matrix gv = m.noise_gains.cwiseProduct(
      (m.noise_bases.transpose() * rx).cwiseQuotient(m.noise_bases.transpose() * ones_ft));
  const Matrix hv = m.external_gains.cwiseProduct(
      (m.noise_bases.transpose() * ry).cwiseQuotient(m.noise_bases.transpose() * ones_ft));
  m.source_gains = gs.cwiseMax(kFloor);
  m.noise_gains = gv.cwiseMax(kFloor);
  m.external_gains = hv.cwiseMax(kFloor);
  return m;
}

}  // namespace auscnmf::reference
