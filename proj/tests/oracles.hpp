#pragma once

// Independent reference computations for the tests: plain scalar loops over
// std::vector-backed data, sharing no code with the library kernels.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "auscnmf/nmf.hpp"

namespace oracle {

using auscnmf::Matrix;
using auscnmf::NmfModel;

inline Matrix random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double lo = 0.05,
                            double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = u(rng);
  return m;
}

inline NmfModel random_model(std::mt19937_64& rng, Eigen::Index f, Eigen::Index t, Eigen::Index ks,
                             Eigen::Index kv, double beta) {
  NmfModel m;
  m.source_bases = random_matrix(rng, f, ks);
  m.noise_bases = random_matrix(rng, f, kv);
  m.source_gains = random_matrix(rng, ks, t);
  m.noise_gains = random_matrix(rng, kv, t);
  m.external_gains = random_matrix(rng, kv, t);
  m.beta_ortho = beta;
  return m;
}

inline Matrix product(const Matrix& a, const Matrix& b) {
  Matrix c = Matrix::Zero(a.rows(), b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (Eigen::Index k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  return c;
}

inline Matrix xhat(const NmfModel& m) {
  Matrix a = product(m.source_bases, m.source_gains);
  const Matrix b = product(m.noise_bases, m.noise_gains);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] += b.data()[i];
  return a;
}

inline Matrix yhat(const NmfModel& m) { return product(m.noise_bases, m.external_gains); }

inline double kl(const Matrix& z, const Matrix& zh) {
  double s = 0.0;
  for (Eigen::Index j = 0; j < z.cols(); ++j)
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      const double a = z(i, j), b = zh(i, j);
      s += (a > 0.0 ? a * std::log(a / b) : 0.0) - a + b;
    }
  return s;
}

inline double penalty(const Matrix& bs, double beta) {
  double s = 0.0;
  for (Eigen::Index k = 0; k < bs.cols(); ++k)
    for (Eigen::Index l = 0; l < bs.cols(); ++l) {
      if (k == l) continue;
      for (Eigen::Index f = 0; f < bs.rows(); ++f) s += bs(f, k) * bs(f, l);
    }
  return beta * s;
}

inline double cost(const NmfModel& m, const Matrix& x, const Matrix& y) {
  return kl(x, xhat(m)) + kl(y, yhat(m)) + penalty(m.source_bases, m.beta_ortho);
}

inline Matrix ratio(const Matrix& z, const Matrix& zh) {
  Matrix r(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.size(); ++i) r.data()[i] = z.data()[i] / zh.data()[i];
  return r;
}

/// Literal scalar transcription of the joint update order: B_S and B_V from
/// the same ratios, recompute, then G_S, G_V, H_V from the new bases.
inline NmfModel update_step(NmfModel m, const Matrix& x, const Matrix& y) {
  const Eigen::Index F = x.rows(), T = x.cols(), KS = m.source_bases.cols(), KV = m.noise_bases.cols();
  const double beta = m.beta_ortho;
  {
    const Matrix rx = ratio(x, xhat(m));
    const Matrix ry = ratio(y, yhat(m));
    Matrix bs = m.source_bases, bv = m.noise_bases;
    for (Eigen::Index f = 0; f < F; ++f) {
      for (Eigen::Index k = 0; k < KS; ++k) {
        double num = 0.0, den = 0.0;
        for (Eigen::Index t = 0; t < T; ++t) {
          num += rx(f, t) * m.source_gains(k, t);
          den += m.source_gains(k, t);  // 1_{FT} G_S^T
        }
        num += beta * m.source_bases(f, k);
        for (Eigen::Index l = 0; l < KS; ++l) den += beta * m.source_bases(f, l);  // B_S 1_{KK}
        bs(f, k) = std::max(m.source_bases(f, k) * num / den, auscnmf::kFloor);
      }
      for (Eigen::Index k = 0; k < KV; ++k) {
        double num = 0.0, den = 0.0;
        for (Eigen::Index t = 0; t < T; ++t) {
          num += rx(f, t) * m.noise_gains(k, t) + ry(f, t) * m.external_gains(k, t);
          den += m.noise_gains(k, t) + m.external_gains(k, t);
        }
        bv(f, k) = std::max(m.noise_bases(f, k) * num / den, auscnmf::kFloor);
      }
    }
    m.source_bases = bs;
    m.noise_bases = bv;
  }
  const Matrix rx = ratio(x, xhat(m));
  const Matrix ry = ratio(y, yhat(m));
  Matrix gs = m.source_gains, gv = m.noise_gains, hv = m.external_gains;
  for (Eigen::Index t = 0; t < T; ++t) {
    for (Eigen::Index k = 0; k < KS; ++k) {
      double num = 0.0, den = 0.0;
      for (Eigen::Index f = 0; f < F; ++f) {
        num += m.source_bases(f, k) * rx(f, t);
        den += m.source_bases(f, k);
      }
      gs(k, t) = std::max(m.source_gains(k, t) * num / den, auscnmf::kFloor);
    }
    for (Eigen::Index k = 0; k < KV; ++k) {
      double nv = 0.0, nh = 0.0, den = 0.0;
      for (Eigen::Index f = 0; f < F; ++f) {
        nv += m.noise_bases(f, k) * rx(f, t);
        nh += m.noise_bases(f, k) * ry(f, t);
        den += m.noise_bases(f, k);
      }
      gv(k, t) = std::max(m.noise_gains(k, t) * nv / den, auscnmf::kFloor);
      hv(k, t) = std::max(m.external_gains(k, t) * nh / den, auscnmf::kFloor);
    }
  }
  m.source_gains = gs;
  m.noise_gains = gv;
  m.external_gains = hv;
  return m;
}

/// Scalar single-channel orthogonal NMF step: B first, then G with the new B.
inline auscnmf::OnmfFactors onmf_update(const Matrix& b0, const Matrix& g, const Matrix& x) {
  const Eigen::Index F = x.rows(), T = x.cols(), K = b0.cols();
  // X G^T
  Matrix xg = Matrix::Zero(F, K);
  for (Eigen::Index f = 0; f < F; ++f)
    for (Eigen::Index k = 0; k < K; ++k)
      for (Eigen::Index t = 0; t < T; ++t) xg(f, k) += x(f, t) * g(k, t);
  // B (B^T X G^T)
  Matrix btxg = Matrix::Zero(K, K);
  for (Eigen::Index i = 0; i < K; ++i)
    for (Eigen::Index k = 0; k < K; ++k)
      for (Eigen::Index f = 0; f < F; ++f) btxg(i, k) += b0(f, i) * xg(f, k);
  Matrix b = b0;
  for (Eigen::Index f = 0; f < F; ++f)
    for (Eigen::Index k = 0; k < K; ++k) {
      double den = 0.0;
      for (Eigen::Index i = 0; i < K; ++i) den += b0(f, i) * btxg(i, k);
      b(f, k) = std::max(b0(f, k) * std::sqrt(xg(f, k) / std::max(den, 1e-300)), auscnmf::kFloor);
    }
  // G <- G (B^T X) / (B^T B G)
  Matrix btx = Matrix::Zero(K, T), btb = Matrix::Zero(K, K);
  for (Eigen::Index k = 0; k < K; ++k) {
    for (Eigen::Index t = 0; t < T; ++t)
      for (Eigen::Index f = 0; f < F; ++f) btx(k, t) += b(f, k) * x(f, t);
    for (Eigen::Index l = 0; l < K; ++l)
      for (Eigen::Index f = 0; f < F; ++f) btb(k, l) += b(f, k) * b(f, l);
  }
  Matrix gn = g;
  for (Eigen::Index k = 0; k < K; ++k)
    for (Eigen::Index t = 0; t < T; ++t) {
      double den = 0.0;
      for (Eigen::Index l = 0; l < K; ++l) den += btb(k, l) * g(l, t);
      gn(k, t) = std::max(g(k, t) * btx(k, t) / std::max(den, 1e-300), auscnmf::kFloor);
    }
  return {b, gn};
}

/// Gini via the trapezoidal area under the Lorenz curve: 1 - 2A.
inline double lorenz_gini(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const double n = static_cast<double>(v.size());
  double total = 0.0;
  for (double x : v) total += x;
  if (total <= 0.0) return 0.0;
  double area = 0.0, prev = 0.0, cum = 0.0;
  for (double x : v) {
    cum += x;
    const double l = cum / total;
    area += (prev + l) / (2.0 * n);
    prev = l;
  }
  return 1.0 - 2.0 * area;
}

/// Gini via the mean absolute difference over all pairs.
inline double pairwise_gini(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  double total = 0.0, diff = 0.0;
  for (double a : v) {
    total += a;
    for (double b : v) diff += std::abs(a - b);
  }
  return total > 0.0 ? diff / (2.0 * n * total) : 0.0;
}

inline double max_rel_diff(const Matrix& a, const Matrix& b) {
  const double scale = std::max(a.cwiseAbs().maxCoeff(), 1e-300);
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

}  // namespace oracle
