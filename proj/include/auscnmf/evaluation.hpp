#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "auscnmf/dataset.hpp"
#include "auscnmf/pipeline.hpp"

namespace auscnmf {

/// Contingency counts with wheeze as the positive class.
struct ConfusionCounts {
  int tp = 0;
  int fn = 0;
  int fp = 0;
  int tn = 0;

  int total() const noexcept { return tp + fn + fp + tn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o) noexcept;
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

/// Entries must be 0 or 1.
ConfusionCounts score(std::span<const int> predictions, std::span<const int> labels);

/// Percentages; empty when the denominator is zero.
struct Metrics {
  std::optional<double> se;
  std::optional<double> sp;
  std::optional<double> acc;
};

Metrics metrics(const ConfusionCounts& counts);

struct ExperimentRecord {
  std::string noise_kind;  ///< "mean" for the per-SNR average over noise kinds
  double snr_db = 0.0;
  ConfusionCounts counts;
  Metrics metrics;
  int failures = 0;  ///< items that raised instead of producing a decision
};

struct ItemOutcome {
  std::string id;
  std::string noise_kind;
  double snr_db = 0.0;
  Label label = Label::Normal;
  std::optional<int> omega;  ///< empty on failure
  double profile_gini = 0.0;
  std::string error;
};

struct SweepResult {
  std::vector<ExperimentRecord> cells;  ///< one per (noise kind, snr), kinds in corpus order
  std::vector<ExperimentRecord> means;  ///< one per snr
  std::vector<ItemOutcome> items;

  /// cells followed by means, the row order of the CSV.
  std::vector<ExperimentRecord> records() const;
};

/// Remixes every corpus item at every grid SNR, runs the pipeline and scores
/// one decision per recording. With cfg.threads > 1 items run concurrently,
/// each single-threaded. Failures are recorded and the sweep continues.
SweepResult run_snr_sweep(const std::vector<CorpusItem>& corpus, const PipelineConfig& cfg,
                          const std::vector<double>& snr_grid);

SweepResult run_snr_sweep(const std::filesystem::path& manifest, const PipelineConfig& cfg,
                          const std::vector<double>& snr_grid);

struct BenchRecord {
  std::string stage;  ///< stft, svd, nmf, detect or total
  double duration_s = 0.0;
  int threads = 1;
  double wall_time_s = 0.0;
  double speedup = 1.0;
  double efficiency = 1.0;
};

/// Times each stage on generated audio, median of `repetitions` runs per
/// (duration, threads) cell. Speedup and efficiency are relative to the
/// single-thread run of the same duration, which is always measured.
std::vector<BenchRecord> run_scaling_benchmark(const std::vector<double>& durations,
                                               const std::vector<int>& thread_counts,
                                               const PipelineConfig& cfg, int repetitions = 5);

inline constexpr const char* kSweepCsvHeader = "noise_kind,snr_db,tp,fn,fp,tn,se,sp,acc,failures";
inline constexpr const char* kBenchCsvHeader = "stage,duration_s,threads,wall_time_s,speedup,efficiency";

/// Undefined metrics are written as NA.
void write_sweep_csv(const std::vector<ExperimentRecord>& records, std::ostream& os);
void write_bench_csv(const std::vector<BenchRecord>& records, std::ostream& os);

/// Undefined metrics are null.
nlohmann::json to_json(const ExperimentRecord& record);
nlohmann::json to_json(const BenchRecord& record);
nlohmann::json to_json(const SweepResult& result);

}  // namespace auscnmf
