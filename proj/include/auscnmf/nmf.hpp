#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "auscnmf/parallel.hpp"
#include "auscnmf/types.hpp"

namespace auscnmf {

/// Joint two-channel decomposition
///
///   internal  X ~ Xhat = B_S G_S + B_V G_V
///   external  Y ~ Yhat = B_V H_V
///
/// with the noise dictionary B_V shared by both channels.
struct NmfModel {
  Matrix source_bases;    ///< B_S, F x K_S
  Matrix noise_bases;     ///< B_V, F x K_V
  Matrix source_gains;    ///< G_S, K_S x T
  Matrix noise_gains;     ///< G_V, K_V x T (internal channel)
  Matrix external_gains;  ///< H_V, K_V x T (external channel)
  double beta_ortho = 1.0;

  Eigen::Index num_bins() const noexcept { return source_bases.rows(); }
  Eigen::Index num_frames() const noexcept { return source_gains.cols(); }

  Matrix source_model() const { return source_bases * source_gains; }
  Matrix noise_model() const { return noise_bases * noise_gains; }
  Matrix internal_model() const { return source_model() + noise_model(); }
  Matrix external_model() const { return noise_bases * external_gains; }

  /// Throws InvalidInput if the five matrices do not share one (F, T, K_S, K_V).
  void check_shapes() const;
  double min_entry() const;
};

enum class InitKind { Svd, Random };

struct FactorizationConfig {
  int source_bases = 16;  ///< K_S, positive and even
  int noise_bases = 16;   ///< K_V
  int max_iters = 100;
  double beta_ortho = 1.0;
  double convergence_tol = 1e-4;
  bool early_stop = false;
  std::uint64_t seed = 0;
  InitKind init = InitKind::Svd;

  void validate() const;
};

struct CostTerms {
  double kl_internal = 0.0;
  double kl_external = 0.0;
  double penalty = 0.0;
  double total = 0.0;
};

/// Entry 0 is the cost of the initial model, entry i the cost after update i.
struct CostTrace {
  std::vector<CostTerms> entries;
  std::vector<int> increases;  ///< iterations whose total rose by more than 1e-6 relative
  bool converged = false;

  int iterations() const noexcept { return entries.empty() ? 0 : static_cast<int>(entries.size()) - 1; }
};

void write_cost_trace_csv(const CostTrace& trace, std::ostream& os);

struct Gains {
  Matrix source;    ///< G_S
  Matrix noise;     ///< G_V
  Matrix external;  ///< H_V
};

/// I.i.d. uniform entries on (kFloor, 1], deterministic in `seed`.
Gains init_gains_random(Eigen::Index source_bases, Eigen::Index noise_bases, Eigen::Index frames,
                        std::uint64_t seed);

/// Uniform (kFloor, 1] matrix from a seed; the building block of random initialization.
Matrix random_uniform_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed);

/// Generalized KL divergence sum(z log(z/zhat) - z + zhat), with 0 log 0 = 0.
double kl_divergence(const Matrix& z, const Matrix& zhat);

/// beta * (sum of all entries of B_S^T B_S minus its trace).
double orthogonality_penalty(const Matrix& source_bases, double beta);

CostTerms total_cost(const NmfModel& model, const Matrix& x, const Matrix& y);

/// One full pass of the multiplicative updates: B_S, B_V, then G_S, G_V, H_V.
///
/// Blocked OpenMP kernel; the result does not depend on par.threads.
NmfModel update_step(NmfModel model, const Matrix& x, const Matrix& y, Parallelism par = {});

struct FactorizationResult {
  NmfModel model;
  CostTrace trace;
};

/// SVD (or random) initialization followed by up to cfg.max_iters update steps.
FactorizationResult factorize(const Matrix& x, const Matrix& y, const FactorizationConfig& cfg,
                              Parallelism par = {});

/// Builds the initial model for `cfg` without iterating.
NmfModel initialize_model(const Matrix& x, const FactorizationConfig& cfg);

/// Runs cfg.max_iters updates from a given model.
FactorizationResult refine(NmfModel model, const Matrix& x, const Matrix& y,
                           const FactorizationConfig& cfg, Parallelism par = {});

struct OnmfFactors {
  Matrix bases;  ///< F x K
  Matrix gains;  ///< K x T
};

/// Single-channel orthogonal NMF baseline: B <- B * sqrt(X G^T / (B B^T X G^T)),
/// then G <- G * (B^T X) / (B^T B G) with the updated B.
OnmfFactors onmf_update(const Matrix& bases, const Matrix& gains, const Matrix& x);

namespace reference {

/// Serial whole-matrix formulation of update_step, kept for testing and benchmarking.
NmfModel update_step(const NmfModel& model, const Matrix& x, const Matrix& y);

}  // namespace reference

}  // namespace auscnmf
