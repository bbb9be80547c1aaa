#include "auscnmf/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <map>
#include <ostream>

namespace auscnmf {

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& o) noexcept {
  tp += o.tp;
  fn += o.fn;
  fp += o.fp;
  tn += o.tn;
  return *this;
}

ConfusionCounts score(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) {
    throw InvalidInput("score: " + std::to_string(predictions.size()) + " predictions for " +
                       std::to_string(labels.size()) + " labels");
  }
  ConfusionCounts c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int p = predictions[i];
    const int l = labels[i];
    if ((p != 0 && p != 1) || (l != 0 && l != 1)) {
      throw InvalidInput("score: entry " + std::to_string(i) + " is not binary");
    }
    if (l == 1) (p == 1 ? c.tp : c.fn) += 1;
    else (p == 1 ? c.fp : c.tn) += 1;
  }
  return c;
}

Metrics metrics(const ConfusionCounts& c) {
  Metrics m;
  if (c.tp + c.fn > 0) m.se = 100.0 * c.tp / (c.tp + c.fn);
  if (c.tn + c.fp > 0) m.sp = 100.0 * c.tn / (c.tn + c.fp);
  if (c.total() > 0) m.acc = 100.0 * (c.tp + c.tn) / c.total();
  return m;
}

std::vector<ExperimentRecord> SweepResult::records() const {
  std::vector<ExperimentRecord> out = cells;
  out.insert(out.end(), means.begin(), means.end());
  return out;
}

namespace {

using Clock = std::chrono::steady_clock;

std::optional<double> mean_of(const std::vector<std::optional<double>>& values) {
  double sum = 0.0;
  int n = 0;
  for (const auto& v : values) {
    if (v) {
      sum += *v;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / n;
}

TwoChannelRecording mix_item(const CorpusItem& item, double snr) {
  if (mean_power(item.noise.samples) == 0.0 && !item.source.samples.empty()) {
    // Silent noise: nothing to scale, the mixture is the source alone.
    TwoChannelRecording rec;
    rec.internal = item.source;
    rec.external.sample_rate = item.source.sample_rate;
    rec.external.samples.assign(item.source.samples.size(), 0.0);
    rec.info.label = item.label;
    rec.info.target_snr_db = snr;
    rec.info.noise_gain = 0.0;
    return rec;
  }
  MixtureSpec spec;
  spec.source = item.source;
  spec.noise = item.noise;
  spec.target_snr_db = snr;
  spec.label = item.label;
  return mix_at_snr(spec);
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void write_optional(std::ostream& os, const std::optional<double>& v) {
  if (v) os << *v;
  else os << "NA";
}

nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace

SweepResult run_snr_sweep(const std::vector<CorpusItem>& corpus, const PipelineConfig& cfg,
                          const std::vector<double>& snr_grid) {
  if (corpus.empty()) throw InvalidInput("run_snr_sweep: empty corpus");
  if (snr_grid.empty()) throw InvalidInput("run_snr_sweep: empty SNR grid");
  cfg.validate();

  const std::size_t n_items = corpus.size();
  const std::size_t n_tasks = n_items * snr_grid.size();
  std::vector<ItemOutcome> outcomes(n_tasks);

  PipelineConfig inner = cfg;
  inner.threads = 1;
  auto run_task = [&](std::size_t task) {
    const std::size_t si = task / n_items;
    const CorpusItem& item = corpus[task % n_items];
    ItemOutcome& o = outcomes[task];
    o.id = item.id;
    o.noise_kind = to_string(item.noise_kind);
    o.snr_db = snr_grid[si];
    o.label = item.label;
    try {
      const auto rec = mix_item(item, snr_grid[si]);
      const auto a = analyze(rec.internal, rec.external, inner);
      o.omega = a.detection.omega;
      o.profile_gini = a.detection.profile_gini;
    } catch (const std::exception& e) {
      o.error = e.what();
    }
  };
  const Parallelism outer{cfg.threads};
  for_each_block(n_tasks, 1, outer, [&](std::size_t begin, std::size_t end, std::size_t) {
    for (std::size_t t = begin; t < end; ++t) run_task(t);
  });

  // Noise kinds in order of first appearance in the corpus.
  std::vector<std::string> kinds;
  for (const auto& item : corpus) {
    const auto k = to_string(item.noise_kind);
    if (std::find(kinds.begin(), kinds.end(), k) == kinds.end()) kinds.push_back(k);
  }

  SweepResult result;
  result.items = outcomes;
  for (std::size_t si = 0; si < snr_grid.size(); ++si) {
    std::vector<std::optional<double>> se, sp, acc;
    ExperimentRecord mean;
    mean.noise_kind = "mean";
    mean.snr_db = snr_grid[si];
    for (const auto& kind : kinds) {
      std::vector<int> pred, lab;
      ExperimentRecord r;
      r.noise_kind = kind;
      r.snr_db = snr_grid[si];
      for (std::size_t i = 0; i < n_items; ++i) {
        const auto& o = outcomes[si * n_items + i];
        if (o.noise_kind != kind) continue;
        if (!o.omega) {
          ++r.failures;
          continue;
        }
        pred.push_back(*o.omega);
        lab.push_back(o.label == Label::Wheeze ? 1 : 0);
      }
      r.counts = score(pred, lab);
      r.metrics = metrics(r.counts);
      se.push_back(r.metrics.se);
      sp.push_back(r.metrics.sp);
      acc.push_back(r.metrics.acc);
      mean.counts += r.counts;
      mean.failures += r.failures;
      result.cells.push_back(std::move(r));
    }
    mean.metrics = {mean_of(se), mean_of(sp), mean_of(acc)};
    result.means.push_back(std::move(mean));
  }
  return result;
}

SweepResult run_snr_sweep(const std::filesystem::path& manifest, const PipelineConfig& cfg,
                          const std::vector<double>& snr_grid) {
  return run_snr_sweep(load_manifest(manifest), cfg, snr_grid);
}

std::vector<BenchRecord> run_scaling_benchmark(const std::vector<double>& durations,
                                               const std::vector<int>& thread_counts,
                                               const PipelineConfig& cfg, int repetitions) {
  if (repetitions < 1) throw InvalidInput("run_scaling_benchmark: repetitions must be positive");
  for (int p : thread_counts) {
    if (p < 1) throw InvalidInput("run_scaling_benchmark: thread counts must be positive");
  }
  std::vector<int> threads{1};
  for (int p : thread_counts) {
    if (std::find(threads.begin(), threads.end(), p) == threads.end()) threads.push_back(p);
  }
  static const char* const kStages[] = {"stft", "svd", "nmf", "detect", "total"};

  std::vector<BenchRecord> out;
  for (double duration : durations) {
    const auto rec = generate_benchmark_audio(duration, kDefaultSampleRate, cfg.nmf.seed);
    std::map<std::string, double> baseline;
    for (int p : threads) {
      PipelineConfig run = cfg;
      run.threads = p;
      std::map<std::string, std::vector<double>> samples;
      for (int r = 0; r < repetitions; ++r) {
        const auto t = analyze(rec.internal, rec.external, run).times;
        samples["stft"].push_back(t.stft);
        samples["svd"].push_back(t.svd);
        samples["nmf"].push_back(t.nmf);
        samples["detect"].push_back(t.detect);
        samples["total"].push_back(t.total);
      }
      for (const char* stage : kStages) {
        BenchRecord b;
        b.stage = stage;
        b.duration_s = duration;
        b.threads = p;
        b.wall_time_s = median(samples[stage]);
        if (p == 1) {
          baseline[stage] = b.wall_time_s;
          b.speedup = 1.0;
          b.efficiency = 1.0;
        } else {
          b.speedup = b.wall_time_s > 0.0 ? baseline[stage] / b.wall_time_s : 1.0;
          b.efficiency = b.speedup / p;
        }
        out.push_back(b);
      }
    }
  }
  return out;
}

void write_sweep_csv(const std::vector<ExperimentRecord>& records, std::ostream& os) {
  os << kSweepCsvHeader << '\n';
  for (const auto& r : records) {
    os << r.noise_kind << ',' << r.snr_db << ',' << r.counts.tp << ',' << r.counts.fn << ','
       << r.counts.fp << ',' << r.counts.tn << ',';
    write_optional(os, r.metrics.se);
    os << ',';
    write_optional(os, r.metrics.sp);
    os << ',';
    write_optional(os, r.metrics.acc);
    os << ',' << r.failures << '\n';
  }
}

void write_bench_csv(const std::vector<BenchRecord>& records, std::ostream& os) {
  os << kBenchCsvHeader << '\n';
  for (const auto& r : records) {
    os << r.stage << ',' << r.duration_s << ',' << r.threads << ',' << r.wall_time_s << ','
       << r.speedup << ',' << r.efficiency << '\n';
  }
}

nlohmann::json to_json(const ExperimentRecord& r) {
  return {{"noise_kind", r.noise_kind},
          {"snr_db", r.snr_db},
          {"tp", r.counts.tp},
          {"fn", r.counts.fn},
          {"fp", r.counts.fp},
          {"tn", r.counts.tn},
          {"se", optional_json(r.metrics.se)},
          {"sp", optional_json(r.metrics.sp)},
          {"acc", optional_json(r.metrics.acc)},
          {"failures", r.failures}};
}

nlohmann::json to_json(const BenchRecord& r) {
  return {{"stage", r.stage},           {"duration_s", r.duration_s}, {"threads", r.threads},
          {"wall_time_s", r.wall_time_s}, {"speedup", r.speedup},       {"efficiency", r.efficiency}};
}

nlohmann::json to_json(const SweepResult& result) {
  nlohmann::json records = nlohmann::json::array();
  for (const auto& r : result.records()) records.push_back(to_json(r));
  nlohmann::json items = nlohmann::json::array();
  for (const auto& o : result.items) {
    items.push_back({{"id", o.id},
                     {"noise_kind", o.noise_kind},
                     {"snr_db", o.snr_db},
                     {"label", to_string(o.label)},
                     {"omega", o.omega ? nlohmann::json(*o.omega) : nlohmann::json(nullptr)},
                     {"profile_gini", o.profile_gini},
                     {"error", o.error}});
  }
  return {{"records", records}, {"items", items}};
}

}  // namespace auscnmf
