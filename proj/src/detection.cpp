#include "auscnmf/detection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace auscnmf {

double gini_index(std::span<const double> values) {
  const auto n = values.size();
  if (n == 0) throw InvalidInput("gini_index: empty vector");
  std::vector<double> sorted(values.begin(), values.end());
  for (double v : sorted) {
    if (!(std::isfinite(v) && v >= 0.0)) throw InvalidInput("gini_index: entries must be finite and non-negative");
  }
  std::sort(sorted.begin(), sorted.end());

  // (F + 1)/F - (2/F) sum (F + 1 - f) b_f / sum b equals
  // sum (2f - F - 1) b_f / (F sum b); mirrored order statistics share one weight.
  double total = 0.0;
  for (double v : sorted) total += v;
  if (total <= 0.0) return 0.0;
  double spread = 0.0;
  for (std::size_t i = 0; i < n / 2; ++i) {
    spread += static_cast<double>(n - 1 - 2 * i) * ((sorted[n - 1 - i] - sorted[i]) / total);
  }
  const double g = spread / static_cast<double>(n);
  return std::clamp(g, 0.0, 1.0);
}

double gini_index(const Vector& values) {
  return gini_index(std::span<const double>(values.data(), static_cast<std::size_t>(values.size())));
}

Clustering cluster_bases(const Matrix& source_bases, const Matrix& source_gains, Parallelism par) {
  const Eigen::Index ks = source_bases.cols();
  if (ks < 2 || ks % 2 != 0) {
    throw InvalidInput("cluster_bases: K_S must be even and >= 2, got " + std::to_string(ks));
  }
  if (source_gains.rows() != ks) throw InvalidInput("cluster_bases: gains do not match bases");

  Clustering out;
  out.gini.scores.resize(ks);
  for_each_block(ks, 1, par, [&](Eigen::Index k, Eigen::Index, Eigen::Index) {
    out.gini.scores(k) = gini_index(Vector(source_bases.col(k)));
  });

  std::vector<double> sorted(out.gini.scores.data(), out.gini.scores.data() + ks);
  std::sort(sorted.begin(), sorted.end());
  out.gini.threshold = 0.5 * (sorted[ks / 2 - 1] + sorted[ks / 2]);

  std::vector<Eigen::Index> order(static_cast<std::size_t>(ks));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return out.gini.scores(a) > out.gini.scores(b);
  });
  auto& sel = out.selection;
  sel.indices.assign(order.begin(), order.begin() + ks / 2);
  std::sort(sel.indices.begin(), sel.indices.end());

  const auto kw = static_cast<Eigen::Index>(sel.indices.size());
  sel.bases.resize(source_bases.rows(), kw);
  sel.gains.resize(kw, source_gains.cols());
  for (Eigen::Index j = 0; j < kw; ++j) {
    sel.bases.col(j) = source_bases.col(sel.indices[j]);
    sel.gains.row(j) = source_gains.row(sel.indices[j]);
  }
  sel.spectrogram = sel.bases * sel.gains;
  return out;
}

Vector spectral_energy(const Matrix& wheeze_spectrogram) {
  return wheeze_spectrogram.rowwise().sum();
}

int classify(const Vector& profile, double gamma_prime) {
  return gini_index(profile) >= gamma_prime ? 1 : 0;
}

DetectionResult detect(const NmfModel& model, double gamma_prime, Parallelism par) {
  auto clustering = cluster_bases(model.source_bases, model.source_gains, par);
  DetectionResult r;
  r.gini = std::move(clustering.gini);
  r.selection = std::move(clustering.selection);
  r.energy_profile = spectral_energy(r.selection.spectrogram);
  r.profile_gini = gini_index(r.energy_profile);
  r.omega = r.profile_gini >= gamma_prime ? 1 : 0;
  return r;
}

nlohmann::json to_json(const DetectionResult& result) {
  const auto& s = result.gini.scores;
  nlohmann::json j;
  j["gini_scores"] = std::vector<double>(s.data(), s.data() + s.size());
  j["gini_threshold"] = result.gini.threshold;
  j["selected_indices"] = result.selection.indices;
  j["energy_profile"] = std::vector<double>(result.energy_profile.data(),
                                            result.energy_profile.data() + result.energy_profile.size());
  j["profile_gini"] = result.profile_gini;
  j["omega"] = result.omega;
  return j;
}

}  // namespace auscnmf
