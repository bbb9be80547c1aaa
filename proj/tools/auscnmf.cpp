// auscnmf: wheeze detection and denoising for two-channel auscultation recordings.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "auscnmf/dataset.hpp"
#include "auscnmf/evaluation.hpp"
#include "auscnmf/pipeline.hpp"
#include "auscnmf/wav.hpp"

namespace fs = std::filesystem;
using namespace auscnmf;

namespace {

enum Exit { kOk = 0, kUsage = 1, kIo = 2, kNumerical = 3 };

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> out_dir;
  std::vector<std::string> settings;
};

struct InputOptions {
  std::string internal;
  std::string external;
  std::string stereo;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config_path, "key = value configuration file");
  cmd->add_option("--seed", o.seed, "seed for every random draw");
  cmd->add_option("--threads", o.threads, "worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--out-dir", o.out_dir, "directory for output files");
  cmd->add_option("--set", o.settings, "override one config entry, key=value");
}

void add_inputs(CLI::App* cmd, InputOptions& in) {
  auto* i = cmd->add_option("--internal", in.internal, "internal (stethoscope) mono WAV");
  auto* e = cmd->add_option("--external", in.external, "external (ambient) mono WAV");
  auto* s = cmd->add_option("--input", in.stereo, "stereo WAV, channel 0 internal, channel 1 external");
  i->needs(e);
  e->needs(i);
  s->excludes(i)->excludes(e);
}

PipelineConfig resolve_config(const CommonOptions& o) {
  PipelineConfig cfg;
  if (!o.config_path.empty()) cfg = load_config(o.config_path, cfg);
  for (const auto& s : o.settings) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
    apply_setting(cfg, s.substr(0, eq), s.substr(eq + 1));
  }
  if (o.seed) cfg.nmf.seed = *o.seed;
  if (o.threads) cfg.threads = *o.threads;
  if (o.out_dir) cfg.out_dir = *o.out_dir;
  cfg.validate();
  return cfg;
}

ChannelPair read_inputs(const InputOptions& in) {
  ChannelPair p;
  if (!in.stereo.empty()) {
    p = load_two_channel(in.stereo);
  } else if (!in.internal.empty()) {
    p.internal = load_wav(in.internal);
    p.external = load_wav(in.external);
  } else {
    throw ConfigError("give --internal and --external, or --input");
  }
  if (p.internal.sample_rate != p.external.sample_rate) {
    throw FormatError("sample rates differ: internal " + std::to_string(p.internal.sample_rate) +
                      " Hz, external " + std::to_string(p.external.sample_rate) + " Hz");
  }
  auto& a = p.internal.samples;
  auto& b = p.external.samples;
  if (a.size() != b.size()) {
    std::cerr << "warning: channel lengths differ (" << a.size() << " vs " << b.size()
              << " samples); zero-padding the shorter one\n";
    const auto n = std::max(a.size(), b.size());
    a.resize(n, 0.0);
    b.resize(n, 0.0);
  }
  return p;
}

fs::path output_dir(const PipelineConfig& cfg) {
  fs::path dir(cfg.out_dir);
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
}

template <typename Writer>
void write_stream(const fs::path& path, Writer&& writer) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  writer(out);
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw ConfigError("bad number '" + item + "' in list '" + text + "'");
    }
  }
  if (v.empty()) throw ConfigError("empty list");
  return v;
}

int cmd_detect(const CommonOptions& common, const InputOptions& inputs) {
  const auto cfg = resolve_config(common);
  const auto pair = read_inputs(inputs);
  const auto a = analyze(pair.internal, pair.external, cfg);
  const auto dir = output_dir(cfg);
  auto j = to_json(a.detection);
  j["iterations"] = a.factorization.trace.iterations();
  j["final_cost"] = a.factorization.trace.entries.back().total;
  write_text(dir / "detection.json", j.dump(2) + "\n");
  write_stream(dir / "cost_trace.csv", [&](std::ostream& os) { write_cost_trace_csv(a.factorization.trace, os); });
  std::cout << "omega " << a.detection.omega << " (profile gini " << a.detection.profile_gini << ")\n";
  return kOk;
}

int cmd_denoise(const CommonOptions& common, const InputOptions& inputs) {
  const auto cfg = resolve_config(common);
  const auto pair = read_inputs(inputs);
  const auto a = analyze(pair.internal, pair.external, cfg);
  const auto d = denoise(a, cfg);
  const auto dir = output_dir(cfg);
  if (d.silent_reference) std::cerr << "warning: external channel is silent; no noise attributed\n";
  save_wav(d.source, dir / "source.wav");
  save_wav(d.noise, dir / "noise.wav");
  std::cout << "wrote " << (dir / "source.wav").string() << " and " << (dir / "noise.wav").string() << '\n';
  return kOk;
}

int cmd_mix(const CommonOptions& common, const std::string& source, const std::string& noise, double snr,
            bool stereo) {
  const auto cfg = resolve_config(common);
  MixtureSpec spec;
  spec.source = load_wav(source);
  spec.noise = load_wav(noise);
  spec.target_snr_db = snr;
  const auto rec = mix_at_snr(spec);
  const auto dir = output_dir(cfg);
  if (stereo) {
    save_two_channel(rec.internal, rec.external, dir / "mixture.wav");
  } else {
    save_wav(rec.internal, dir / "internal.wav");
    save_wav(rec.external, dir / "external.wav");
  }
  nlohmann::json j = rec.info;
  write_text(dir / "mixture.json", j.dump(2) + "\n");
  std::cout << "gain " << rec.info.noise_gain << " (achieved snr " << rec.info.achieved_snr_db << " dB)\n";
  return kOk;
}

int cmd_corpus(const CommonOptions& common, CorpusConfig corpus) {
  const auto cfg = resolve_config(common);
  corpus.seed = cfg.nmf.seed;
  const auto items = generate_corpus(corpus);
  const auto manifest = write_corpus(items, output_dir(cfg));
  std::cout << "wrote " << items.size() << " items, manifest " << manifest.string() << '\n';
  return kOk;
}

int cmd_sweep(const CommonOptions& common, const std::string& manifest, const std::string& snrs) {
  const auto cfg = resolve_config(common);
  const auto grid = parse_list(snrs);
  const auto result = run_snr_sweep(fs::path(manifest), cfg, grid);
  const auto dir = output_dir(cfg);
  const auto records = result.records();
  write_stream(dir / "sweep.csv", [&](std::ostream& os) { write_sweep_csv(records, os); });
  write_text(dir / "sweep.json", to_json(result).dump(2) + "\n");
  write_sweep_csv(result.means, std::cout);
  for (const auto& o : result.items) {
    if (!o.error.empty()) std::cerr << "item " << o.id << " at " << o.snr_db << " dB failed: " << o.error << '\n';
  }
  return kOk;
}

int cmd_bench(const CommonOptions& common, const std::string& durations, const std::string& threads,
              int repetitions) {
  const auto cfg = resolve_config(common);
  std::vector<int> counts;
  for (double p : parse_list(threads)) {
    if (p < 1 || p != static_cast<int>(p)) throw ConfigError("thread counts must be positive integers");
    counts.push_back(static_cast<int>(p));
  }
  const auto records = run_scaling_benchmark(parse_list(durations), counts, cfg, repetitions);
  const auto dir = output_dir(cfg);
  write_stream(dir / "bench.csv", [&](std::ostream& os) { write_bench_csv(records, os); });
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : records) j.push_back(to_json(r));
  write_text(dir / "bench.json", j.dump(2) + "\n");
  write_bench_csv(records, std::cout);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wheeze detection and denoising for two-channel auscultation recordings"};
  app.require_subcommand(0, 1);
  bool print = false;
  CommonOptions print_opts;
  app.add_flag("--print-config", print, "print every setting with its effective value and exit");
  app.add_option("--config", print_opts.config_path, "configuration file applied before --print-config");

  CommonOptions common;
  InputOptions inputs;

  auto* detect_cmd = app.add_subcommand("detect", "decide wheeze (omega = 1) or normal (omega = 0)");
  add_common(detect_cmd, common);
  add_inputs(detect_cmd, inputs);

  auto* denoise_cmd = app.add_subcommand("denoise", "write source.wav and noise.wav estimates");
  add_common(denoise_cmd, common);
  add_inputs(denoise_cmd, inputs);

  std::string mix_source, mix_noise;
  double mix_snr = 0.0;
  bool mix_stereo = false;
  auto* mix_cmd = app.add_subcommand("mix", "mix a source and a noise WAV at a target SNR");
  add_common(mix_cmd, common);
  mix_cmd->add_option("--source", mix_source, "respiratory sound WAV")->required();
  mix_cmd->add_option("--noise", mix_noise, "ambient noise WAV, at least as long")->required();
  mix_cmd->add_option("--snr", mix_snr, "target SNR in dB");
  mix_cmd->add_flag("--stereo", mix_stereo, "write one stereo mixture.wav");

  CorpusConfig corpus;
  auto* corpus_cmd = app.add_subcommand("corpus", "generate a synthetic labelled corpus");
  add_common(corpus_cmd, common);
  corpus_cmd->add_option("--wheeze", corpus.wheeze_items, "wheeze items")->check(CLI::NonNegativeNumber);
  corpus_cmd->add_option("--normal", corpus.normal_items, "normal items")->check(CLI::NonNegativeNumber);
  corpus_cmd->add_option("--duration", corpus.duration_s, "seconds per item")->check(CLI::PositiveNumber);

  std::string manifest, snrs = "-10,-5,0,5,10";
  auto* sweep_cmd = app.add_subcommand("sweep", "detection metrics over a corpus and an SNR grid");
  add_common(sweep_cmd, common);
  sweep_cmd->add_option("--manifest", manifest, "corpus manifest.json")->required();
  sweep_cmd->add_option("--snr", snrs, "comma-separated SNR grid in dB");

  std::string durations = "60,120,300", thread_counts = "1,2,4";
  int repetitions = 5;
  auto* bench_cmd = app.add_subcommand("bench", "per-stage timing over durations and thread counts");
  add_common(bench_cmd, common);
  bench_cmd->add_option("--durations", durations, "comma-separated audio durations in s (60..900)");
  bench_cmd->add_option("--thread-counts", thread_counts, "comma-separated thread counts");
  bench_cmd->add_option("--repetitions", repetitions, "runs per cell, median reported")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (print) {
      print_config(resolve_config(print_opts), std::cout);
      return kOk;
    }
    if (*detect_cmd) return cmd_detect(common, inputs);
    if (*denoise_cmd) return cmd_denoise(common, inputs);
    if (*mix_cmd) return cmd_mix(common, mix_source, mix_noise, mix_snr, mix_stereo);
    if (*corpus_cmd) return cmd_corpus(common, corpus);
    if (*sweep_cmd) return cmd_sweep(common, manifest, snrs);
    if (*bench_cmd) return cmd_bench(common, durations, thread_counts, repetitions);
    std::cerr << app.help();
    return kUsage;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  }
}
