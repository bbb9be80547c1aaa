#include "auscnmf/nmf.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <random>

#include "auscnmf/svd.hpp"

namespace auscnmf {

namespace {

// Block shapes are fixed so that every thread count produces the same sums.
constexpr Eigen::Index kRowBlock = 32;
constexpr Eigen::Index kColBlock = 64;

// Per-block KL contribution; ratio = z / zhat has already been formed.
double kl_block(const Eigen::Ref<const Matrix>& z, const Matrix& zhat,
                const Eigen::Ref<const Matrix>& ratio) {
  double acc = 0.0;
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      const double zi = z(i, j);
      acc += (zi > 0.0 ? zi * std::log(ratio(i, j)) : 0.0) - zi + zhat(i, j);
    }
  }
  return acc;
}

double sum_in_order(const std::vector<double>& parts) {
  double s = 0.0;
  for (double p : parts) s += p;
  return s;
}

/// Holds the ratio matrices X / Xhat and Y / Yhat between the two half-steps so
/// each iteration forms every model product exactly twice.
class JointSolver {
 public:
  JointSolver(NmfModel& model, const Matrix& x, const Matrix& y, Parallelism par)
      : m_(model), x_(x), y_(y), par_(par) {
    ratio_x_.resize(x.rows(), x.cols());
    ratio_y_.resize(y.rows(), y.cols());
    const auto blocks = block_count(x.cols(), kColBlock);
    kl_x_.assign(static_cast<std::size_t>(blocks), 0.0);
    kl_y_.assign(static_cast<std::size_t>(blocks), 0.0);
  }

  /// Forms the ratios for the current model and returns its cost.
  CostTerms refresh(int iteration) {
    for_each_block(x_.cols(), kColBlock, par_, [&](Eigen::Index c0, Eigen::Index c1, Eigen::Index b) {
      refresh_block(c0, c1 - c0, b, iteration);
    });
    return cost();
  }

  /// One full update. Requires the ratios to match the current model.
  CostTerms step(int iteration) {
    update_bases(iteration);
    update_gains(iteration);
    return cost();
  }

 private:
  CostTerms cost() const {
    CostTerms c;
    c.kl_internal = sum_in_order(kl_x_);
    c.kl_external = sum_in_order(kl_y_);
    c.penalty = orthogonality_penalty(m_.source_bases, m_.beta_ortho);
    c.total = c.kl_internal + c.kl_external + c.penalty;
    return c;
  }

  void refresh_block(Eigen::Index c0, Eigen::Index n, Eigen::Index b, int iteration) {
    const Matrix xhat = m_.source_bases * m_.source_gains.middleCols(c0, n) +
                        m_.noise_bases * m_.noise_gains.middleCols(c0, n);
    const Matrix yhat = m_.noise_bases * m_.external_gains.middleCols(c0, n);
    if (!xhat.allFinite() || !yhat.allFinite()) {
      throw NumericalError("non-finite model estimate", iteration);
    }
    ratio_x_.middleCols(c0, n) = x_.middleCols(c0, n).cwiseQuotient(xhat);
    ratio_y_.middleCols(c0, n) = y_.middleCols(c0, n).cwiseQuotient(yhat);
    kl_x_[b] = kl_block(x_.middleCols(c0, n), xhat, ratio_x_.middleCols(c0, n));
    kl_y_[b] = kl_block(y_.middleCols(c0, n), yhat, ratio_y_.middleCols(c0, n));
  }

  // B_S and B_V from the same (pre-update) ratios. Rows are independent.
  void update_bases(int iteration) {
    const Vector gs_rows = m_.source_gains.rowwise().sum();
    const Vector gv_rows = m_.noise_gains.rowwise().sum() + m_.external_gains.rowwise().sum();
    const double beta = m_.beta_ortho;
    Matrix& bs = m_.source_bases;
    Matrix& bv = m_.noise_bases;

    for_each_block(x_.rows(), kRowBlock, par_, [&](Eigen::Index r0, Eigen::Index r1, Eigen::Index) {
      const Eigen::Index n = r1 - r0;
      const Matrix num_s = ratio_x_.middleRows(r0, n) * m_.source_gains.transpose();
      const Matrix num_v = ratio_x_.middleRows(r0, n) * m_.noise_gains.transpose() +
                           ratio_y_.middleRows(r0, n) * m_.external_gains.transpose();
      for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::Index f = r0 + i;
        const double row_sum = bs.row(f).sum();
        for (Eigen::Index k = 0; k < bs.cols(); ++k) {
          const double old = bs(f, k);
          const double num = num_s(i, k) + beta * old;
          const double den = gs_rows(k) + beta * row_sum;
          bs(f, k) = std::max(old * num / den, kFloor);
        }
        for (Eigen::Index k = 0; k < bv.cols(); ++k) {
          bv(f, k) = std::max(bv(f, k) * num_v(i, k) / gv_rows(k), kFloor);
        }
      }
      if (!bs.middleRows(r0, n).allFinite() || !bv.middleRows(r0, n).allFinite()) {
        throw NumericalError("non-finite basis update", iteration);
      }
    });
  }

  // G_S, G_V and H_V from ratios formed with the new bases, then the ratios are
  // refreshed for the next iteration. Columns are independent.
  void update_gains(int iteration) {
    const Eigen::RowVectorXd bs_cols = m_.source_bases.colwise().sum();
    const Eigen::RowVectorXd bv_cols = m_.noise_bases.colwise().sum();
    const Vector inv_s = bs_cols.transpose().cwiseInverse();
    const Vector inv_v = bv_cols.transpose().cwiseInverse();

    for_each_block(x_.cols(), kColBlock, par_, [&](Eigen::Index c0, Eigen::Index c1, Eigen::Index b) {
      const Eigen::Index n = c1 - c0;
      const Matrix xhat = m_.source_bases * m_.source_gains.middleCols(c0, n) +
                          m_.noise_bases * m_.noise_gains.middleCols(c0, n);
      const Matrix yhat = m_.noise_bases * m_.external_gains.middleCols(c0, n);
      const Matrix rx = x_.middleCols(c0, n).cwiseQuotient(xhat);
      const Matrix ry = y_.middleCols(c0, n).cwiseQuotient(yhat);

      auto gs = m_.source_gains.middleCols(c0, n);
      auto gv = m_.noise_gains.middleCols(c0, n);
      auto hv = m_.external_gains.middleCols(c0, n);
      const Matrix ms = m_.source_bases.transpose() * rx;
      const Matrix mv = m_.noise_bases.transpose() * rx;
      const Matrix mh = m_.noise_bases.transpose() * ry;
      gs = (gs.array() * ms.array() * inv_s.replicate(1, n).array()).cwiseMax(kFloor);
      gv = (gv.array() * mv.array() * inv_v.replicate(1, n).array()).cwiseMax(kFloor);
      hv = (hv.array() * mh.array() * inv_v.replicate(1, n).array()).cwiseMax(kFloor);
      if (!gs.allFinite() || !gv.allFinite() || !hv.allFinite()) {
        throw NumericalError("non-finite gain update", iteration);
      }
      refresh_block(c0, n, b, iteration);
    });
  }

  NmfModel& m_;
  const Matrix& x_;
  const Matrix& y_;
  Parallelism par_;
  Matrix ratio_x_;
  Matrix ratio_y_;
  std::vector<double> kl_x_;
  std::vector<double> kl_y_;
};

void check_data(const NmfModel& model, const Matrix& x, const Matrix& y) {
  model.check_shapes();
  if (x.rows() != model.num_bins() || x.cols() != model.num_frames() || y.rows() != x.rows() ||
      y.cols() != x.cols()) {
    throw InvalidInput("data matrices " + std::to_string(x.rows()) + "x" + std::to_string(x.cols()) +
                       " / " + std::to_string(y.rows()) + "x" + std::to_string(y.cols()) +
                       " do not match model " + std::to_string(model.num_bins()) + "x" +
                       std::to_string(model.num_frames()));
  }
}

}  // namespace

void NmfModel::check_shapes() const {
  const auto f = source_bases.rows();
  const auto t = source_gains.cols();
  const bool ok = noise_bases.rows() == f && source_gains.rows() == source_bases.cols() &&
                  noise_gains.rows() == noise_bases.cols() && noise_gains.cols() == t &&
                  external_gains.rows() == noise_bases.cols() && external_gains.cols() == t;
  if (!ok) throw InvalidInput("NmfModel factor shapes are inconsistent");
}

double NmfModel::min_entry() const {
  return std::min({source_bases.minCoeff(), noise_bases.minCoeff(), source_gains.minCoeff(),
                   noise_gains.minCoeff(), external_gains.minCoeff()});
}

void FactorizationConfig::validate() const {
  if (source_bases < 2 || source_bases % 2 != 0) {
    throw ConfigError("source_bases (K_S) must be a positive even number, got " +
                      std::to_string(source_bases));
  }
  if (noise_bases < 1) throw ConfigError("noise_bases (K_V) must be positive");
  if (max_iters < 1) throw ConfigError("max_iters must be at least 1");
  if (!(beta_ortho >= 0.0) || !std::isfinite(beta_ortho)) {
    throw ConfigError("beta_ortho must be finite and non-negative");
  }
  if (!(convergence_tol >= 0.0)) throw ConfigError("convergence_tol must be non-negative");
}

void write_cost_trace_csv(const CostTrace& trace, std::ostream& os) {
  os << "iteration,kl_internal,kl_external,penalty,total\n";
  os << std::setprecision(17);
  for (std::size_t i = 0; i < trace.entries.size(); ++i) {
    const auto& e = trace.entries[i];
    os << i << ',' << e.kl_internal << ',' << e.kl_external << ',' << e.penalty << ',' << e.total
       << '\n';
  }
}

Matrix random_uniform_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    const double u = static_cast<double>(rng() >> 11) * 0x1p-53;  // [0, 1)
    m.data()[i] = 1.0 - u * (1.0 - kFloor);                      // (kFloor, 1]
  }
  return m;
}

Gains init_gains_random(Eigen::Index source_bases, Eigen::Index noise_bases, Eigen::Index frames,
                        std::uint64_t seed) {
  if (source_bases < 1 || noise_bases < 1 || frames < 1) {
    throw InvalidInput("init_gains_random: dimensions must be positive");
  }
  const Matrix all = random_uniform_matrix(source_bases + 2 * noise_bases, frames, seed);
  return {all.topRows(source_bases), all.middleRows(source_bases, noise_bases),
          all.bottomRows(noise_bases)};
}

double kl_divergence(const Matrix& z, const Matrix& zhat) {
  if (z.rows() != zhat.rows() || z.cols() != zhat.cols()) {
    throw InvalidInput("kl_divergence: shape mismatch");
  }
  double acc = 0.0;
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      const double a = z(i, j);
      const double b = zhat(i, j);
      if (a < 0.0) throw InvalidInput("kl_divergence: data must be non-negative");
      if (!(b > 0.0)) throw InvalidInput("kl_divergence: estimate must be positive");
      acc += (a > 0.0 ? a * std::log(a / b) : 0.0) - a + b;
    }
  }
  return acc;
}

double orthogonality_penalty(const Matrix& source_bases, double beta) {
  if (!(beta >= 0.0)) throw InvalidInput("orthogonality_penalty: beta must be non-negative");
  if (beta == 0.0) return 0.0;
  const Matrix gram = source_bases.transpose() * source_bases;
  return beta * (gram.sum() - gram.trace());
}

CostTerms total_cost(const NmfModel& model, const Matrix& x, const Matrix& y) {
  check_data(model, x, y);
  CostTerms c;
  c.kl_internal = kl_divergence(x, model.internal_model());
  c.kl_external = kl_divergence(y, model.external_model());
  c.penalty = orthogonality_penalty(model.source_bases, model.beta_ortho);
  c.total = c.kl_internal + c.kl_external + c.penalty;
  return c;
}

NmfModel update_step(NmfModel model, const Matrix& x, const Matrix& y, Parallelism par) {
  check_data(model, x, y);
  JointSolver solver(model, x, y, par);
  solver.refresh(0);
  solver.step(1);
  return model;
}

NmfModel initialize_model(const Matrix& x, const FactorizationConfig& cfg) {
  cfg.validate();
  const Eigen::Index k = cfg.source_bases + cfg.noise_bases;
  if (k > std::min(x.rows(), x.cols())) {
    throw InvalidInput("K_S + K_V = " + std::to_string(k) + " exceeds min(F, T) = " +
                       std::to_string(std::min(x.rows(), x.cols())));
  }
  if ((x.array() < 0.0).any()) throw InvalidInput("factorize: internal spectrogram is negative");

  NmfModel model;
  model.beta_ortho = cfg.beta_ortho;
  if (cfg.init == InitKind::Svd) {
    auto bases = init_bases_from_svd(truncated_svd(x, k), cfg.source_bases, cfg.noise_bases);
    model.source_bases = std::move(bases.source);
    model.noise_bases = std::move(bases.noise);
  } else {
    // Scaled so the expected initial estimate matches the data mean.
    const double mean = x.mean();
    const double scale = mean > 0.0 ? 4.0 * mean / static_cast<double>(k) : 1.0;
    const Matrix b = random_uniform_matrix(x.rows(), k, cfg.seed ^ 0x9e3779b97f4a7c15ULL) * scale;
    model.source_bases = b.leftCols(cfg.source_bases).cwiseMax(kFloor);
    model.noise_bases = b.rightCols(cfg.noise_bases).cwiseMax(kFloor);
  }
  auto gains = init_gains_random(cfg.source_bases, cfg.noise_bases, x.cols(), cfg.seed);
  model.source_gains = std::move(gains.source);
  model.noise_gains = std::move(gains.noise);
  model.external_gains = std::move(gains.external);
  return model;
}

FactorizationResult refine(NmfModel model, const Matrix& x, const Matrix& y,
                           const FactorizationConfig& cfg, Parallelism par) {
  cfg.validate();
  check_data(model, x, y);
  if ((y.array() < 0.0).any()) throw InvalidInput("factorize: external spectrogram is negative");

  FactorizationResult out;
  JointSolver solver(model, x, y, par);
  out.trace.entries.reserve(static_cast<std::size_t>(cfg.max_iters) + 1);
  out.trace.entries.push_back(solver.refresh(0));

  constexpr int kStableRun = 5;
  int stable = 0;
  for (int iter = 1; iter <= cfg.max_iters; ++iter) {
    const double before = out.trace.entries.back().total;
    const CostTerms now = solver.step(iter);
    out.trace.entries.push_back(now);
    const double scale = std::max(std::abs(before), std::numeric_limits<double>::min());
    if (now.total - before > 1e-6 * scale) out.trace.increases.push_back(iter);
    if (cfg.early_stop) {
      stable = std::abs(before - now.total) / scale < cfg.convergence_tol ? stable + 1 : 0;
      if (stable >= kStableRun) {
        out.trace.converged = true;
        break;
      }
    }
  }
  out.model = std::move(model);
  return out;
}

FactorizationResult factorize(const Matrix& x, const Matrix& y, const FactorizationConfig& cfg,
                              Parallelism par) {
  return refine(initialize_model(x, cfg), x, y, cfg, par);
}

}  // namespace auscnmf
