#pragma once

#include <span>
#include <vector>

#include <json.hpp>

#include "auscnmf/nmf.hpp"
#include "auscnmf/parallel.hpp"
#include "auscnmf/types.hpp"

namespace auscnmf {

/// Default decision threshold on the Gini index of the wheeze energy profile.
inline constexpr double kDefaultGammaPrime = 0.5;

/// Gini sparsity of a non-negative vector, in [0, 1].
///
/// The values are sorted ascending and scored as
///   (F + 1) / F - (2 / F) * sum_f (F + 1 - f) b_(f) / sum_f b_(f),
/// so a uniform vector scores 0 and a one-hot vector (F - 1) / F.
/// An all-zero vector scores 0.
double gini_index(std::span<const double> values);
double gini_index(const Vector& values);

struct GiniScores {
  Vector scores;     ///< one per source basis
  double threshold;  ///< median of scores
};

struct WheezeSelection {
  std::vector<Eigen::Index> indices;  ///< ascending column indices into B_S
  Matrix bases;                       ///< B_W, F x K_S/2
  Matrix gains;                       ///< G_W, K_S/2 x T
  Matrix spectrogram;                 ///< X_W = B_W G_W
};

struct Clustering {
  GiniScores gini;
  WheezeSelection selection;
};

/// Scores every column of B_S and keeps the K_S/2 most sparse ones. Ties go to
/// the lower column index.
Clustering cluster_bases(const Matrix& source_bases, const Matrix& source_gains,
                         Parallelism par = {});

/// Row sums of the wheeze spectrogram.
Vector spectral_energy(const Matrix& wheeze_spectrogram);

/// 1 iff gini_index(profile) >= gamma_prime.
int classify(const Vector& profile, double gamma_prime = kDefaultGammaPrime);

struct DetectionResult {
  GiniScores gini;
  WheezeSelection selection;
  Vector energy_profile;
  double profile_gini = 0.0;
  int omega = 0;
};

DetectionResult detect(const NmfModel& model, double gamma_prime = kDefaultGammaPrime,
                       Parallelism par = {});

/// scores, threshold, selected indices, energy profile, profile Gini and omega.
nlohmann::json to_json(const DetectionResult& result);

}  // namespace auscnmf
