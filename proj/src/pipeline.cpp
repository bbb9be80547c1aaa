#include "auscnmf/pipeline.hpp"

#include <chrono>
#include <fstream>
#include <ostream>
#include <sstream>

#include "auscnmf/svd.hpp"

namespace auscnmf {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  std::istringstream in(value);
  T v{};
  in >> v;
  if (in.fail() || !in.eof()) throw ConfigError("bad value '" + value + "' for '" + key + "'");
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  throw ConfigError("bad boolean '" + value + "' for '" + key + "'");
}

}  // namespace

void PipelineConfig::validate() const {
  stft.validate();
  nmf.validate();
  if (threads < 1) throw ConfigError("threads must be at least 1");
  if (!std::isfinite(gamma_prime)) throw ConfigError("gamma_prime must be finite");
}

void apply_setting(PipelineConfig& cfg, const std::string& key, const std::string& raw) {
  const std::string value = trim(raw);
  if (key == "window_length") cfg.stft.window_length = parse_number<int>(key, value);
  else if (key == "hop_length") cfg.stft.hop_length = parse_number<int>(key, value);
  else if (key == "fft_length") cfg.stft.fft_length = parse_number<int>(key, value);
  else if (key == "window") cfg.stft.window = window_from_string(value);
  else if (key == "source_bases") cfg.nmf.source_bases = parse_number<int>(key, value);
  else if (key == "noise_bases") cfg.nmf.noise_bases = parse_number<int>(key, value);
  else if (key == "max_iters") cfg.nmf.max_iters = parse_number<int>(key, value);
  else if (key == "beta_ortho") cfg.nmf.beta_ortho = parse_number<double>(key, value);
  else if (key == "convergence_tol") cfg.nmf.convergence_tol = parse_number<double>(key, value);
  else if (key == "early_stop") cfg.nmf.early_stop = parse_bool(key, value);
  else if (key == "seed") cfg.nmf.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "init") {
    if (value == "svd") cfg.nmf.init = InitKind::Svd;
    else if (value == "random") cfg.nmf.init = InitKind::Random;
    else throw ConfigError("bad value '" + value + "' for 'init' (svd|random)");
  } else if (key == "gamma_prime") cfg.gamma_prime = parse_number<double>(key, value);
  else if (key == "threads") cfg.threads = parse_number<int>(key, value);
  else if (key == "out_dir") cfg.out_dir = value;
  else throw ConfigError("unknown config key '" + key + "'");
}

PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig base) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(number) + ": expected key = value");
    }
    apply_setting(base, trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  return base;
}

void print_config(const PipelineConfig& cfg, std::ostream& os) {
  os << "window_length = " << cfg.stft.window_length << '\n'
     << "hop_length = " << cfg.stft.hop_length << '\n'
     << "fft_length = " << cfg.stft.fft_length << '\n'
     << "window = " << to_string(cfg.stft.window) << '\n'
     << "source_bases = " << cfg.nmf.source_bases << '\n'
     << "noise_bases = " << cfg.nmf.noise_bases << '\n'
     << "max_iters = " << cfg.nmf.max_iters << '\n'
     << "beta_ortho = " << cfg.nmf.beta_ortho << '\n'
     << "convergence_tol = " << cfg.nmf.convergence_tol << '\n'
     << "early_stop = " << (cfg.nmf.early_stop ? "true" : "false") << '\n'
     << "init = " << (cfg.nmf.init == InitKind::Svd ? "svd" : "random") << '\n'
     << "seed = " << cfg.nmf.seed << '\n'
     << "gamma_prime = " << cfg.gamma_prime << '\n'
     << "threads = " << cfg.threads << '\n'
     << "out_dir = " << cfg.out_dir << '\n';
}

AudioBuffer pad_for_analysis(const AudioBuffer& audio, const StftConfig& cfg) {
  const auto n = static_cast<std::size_t>(cfg.window_length);
  const auto h = static_cast<std::size_t>(cfg.hop_length);
  const std::size_t len = audio.samples.size();
  // Back padding of at least one window, rounded so the last frame ends flush.
  const std::size_t back = n + (h - (len + n) % h) % h;
  AudioBuffer out;
  out.sample_rate = audio.sample_rate;
  out.samples.assign(n + len + back, 0.0);
  std::copy(audio.samples.begin(), audio.samples.end(), out.samples.begin() + static_cast<std::ptrdiff_t>(n));
  return out;
}

Analysis analyze(const AudioBuffer& internal, const AudioBuffer& external, const PipelineConfig& cfg) {
  cfg.validate();
  if (internal.samples.size() != external.samples.size()) {
    throw InvalidInput("internal and external channels differ in length (" +
                       std::to_string(internal.samples.size()) + " vs " +
                       std::to_string(external.samples.size()) + ")");
  }
  if (internal.sample_rate != external.sample_rate) {
    throw InvalidInput("internal and external channels differ in sample rate");
  }
  if (internal.samples.empty()) throw InvalidInput("empty recording");
  const Parallelism par = cfg.parallelism();
  const auto start = Clock::now();

  Analysis a;
  a.original_length = internal.samples.size();
  a.pad_front = static_cast<std::size_t>(cfg.stft.window_length);
  a.sample_rate = internal.sample_rate;

  auto t = Clock::now();
  {
    const StftEngine engine(cfg.stft);
    const AudioBuffer xi = pad_for_analysis(internal, cfg.stft);
    a.padded_length = xi.samples.size();
    a.internal = engine.forward(xi, par);
    a.external = engine.forward(pad_for_analysis(external, cfg.stft), par);
  }
  a.times.stft = seconds_since(t);

  const Matrix& x = a.internal.magnitude;
  const Matrix& y = a.external.magnitude;
  const auto& ncfg = cfg.nmf;
  ncfg.validate();
  const Eigen::Index k = ncfg.source_bases + ncfg.noise_bases;
  if (k > std::min(x.rows(), x.cols())) {
    throw InvalidInput("recording too short: K_S + K_V = " + std::to_string(k) +
                       " exceeds min(bins, frames) = " + std::to_string(std::min(x.rows(), x.cols())));
  }

  NmfModel model;
  model.beta_ortho = ncfg.beta_ortho;
  t = Clock::now();
  if (ncfg.init == InitKind::Svd) {
    auto bases = init_bases_from_svd(truncated_svd(x, k), ncfg.source_bases, ncfg.noise_bases);
    model.source_bases = std::move(bases.source);
    model.noise_bases = std::move(bases.noise);
  }
  a.times.svd = seconds_since(t);

  t = Clock::now();
  if (ncfg.init != InitKind::Svd) {
    NmfModel init = initialize_model(x, ncfg);
    model.source_bases = std::move(init.source_bases);
    model.noise_bases = std::move(init.noise_bases);
  }
  auto gains = init_gains_random(ncfg.source_bases, ncfg.noise_bases, x.cols(), ncfg.seed);
  model.source_gains = std::move(gains.source);
  model.noise_gains = std::move(gains.noise);
  model.external_gains = std::move(gains.external);
  a.factorization = refine(std::move(model), x, y, ncfg, par);
  a.times.nmf = seconds_since(t);

  t = Clock::now();
  a.detection = detect(a.factorization.model, cfg.gamma_prime, par);
  a.times.detect = seconds_since(t);

  a.times.total = seconds_since(start);
  return a;
}

DenoisedPair denoise(const Analysis& analysis, const PipelineConfig& cfg) {
  const auto& model = analysis.factorization.model;
  const auto par = cfg.parallelism();
  DenoisedPair out;
  out.silent_reference = analysis.external.magnitude.maxCoeff() == 0.0;

  MaskPair masks;
  if (out.silent_reference) {
    masks.source = Matrix::Ones(model.num_bins(), model.num_frames());
    masks.noise = Matrix::Zero(model.num_bins(), model.num_frames());
  } else {
    masks = wiener_masks(model.source_model(), model.noise_model());
  }
  const auto trim_to_original = [&](AudioBuffer padded) {
    AudioBuffer b;
    b.sample_rate = analysis.sample_rate;
    const auto first = padded.samples.begin() + static_cast<std::ptrdiff_t>(analysis.pad_front);
    b.samples.assign(first, first + static_cast<std::ptrdiff_t>(analysis.original_length));
    return b;
  };
  out.source = trim_to_original(apply_mask_and_synthesize(
      analysis.internal, masks.source, cfg.stft, analysis.padded_length, analysis.sample_rate, par));
  out.noise = trim_to_original(apply_mask_and_synthesize(
      analysis.internal, masks.noise, cfg.stft, analysis.padded_length, analysis.sample_rate, par));
  return out;
}

}  // namespace auscnmf
