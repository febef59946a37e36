#pragma once

// Command-line front end: segment, features, train, infer, eval.
// Exit codes: 0 ok, 1 usage, 2 data, 3 internal. The first stderr line of
// a failure is "error: <kind>: <message>".

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vocalbeat/vocalbeat.hpp"

namespace vocalbeat::cli {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kInternal = 3 };

// Raised for argument combinations CLI11 cannot express.
class UsageError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "usage"; }
};

namespace detail {

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

inline std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

inline nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("invalid JSON in " + path.string() + ": " + e.what());
  }
}

// One manifest per run, next to its outputs.
struct Manifest {
  ordered_json j;

  Manifest(const std::string& command, const std::vector<std::string>& argv) {
    j["command"] = command;
    j["version"] = VOCALBEAT_VERSION;
    j["argv"] = argv;
    j["created_utc"] = utc_now();
  }
  void write(const fs::path& path, double wall_seconds) {
    j["wall_seconds"] = wall_seconds;
    write_text(path, j.dump(2) + "\n");
  }
};

inline bool has_extension(const fs::path& p, std::string_view ext) {
  std::string e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return e == ext;
}

// Output path for input `in`: `out` when given (single input only), else
// out_dir/<stem><ext>.
inline std::vector<fs::path> output_paths(const std::vector<std::string>& inputs, const std::string& out,
                                          const std::string& out_dir, const std::string& ext) {
  if (out.empty() == out_dir.empty()) throw UsageError("give exactly one of --out and --out-dir");
  if (!out.empty() && inputs.size() != 1) throw UsageError("--out takes a single --in; use --out-dir");
  std::vector<fs::path> paths;
  for (const auto& in : inputs) paths.push_back(out.empty() ? fs::path(out_dir) / (fs::path(in).stem().string() + ext) : fs::path(out));
  std::vector<fs::path> sorted = paths;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw UsageError("two inputs map to the same output name");
  return paths;
}

inline ordered_json decoder_json(const DecoderConfig& c) {
  return {{"fps", c.fps},
          {"min_bpm", c.min_bpm},
          {"max_bpm", c.max_bpm},
          {"transition_lambda", c.transition_lambda},
          {"observation_lambda", c.observation_lambda}};
}

inline ordered_json model_json(const ModelConfig& c) {
  return {{"input_dim", c.input_dim}, {"model_dim", c.model_dim},       {"heads", c.heads},
          {"head_dim", c.head_dim},   {"ffn_dim", c.ffn_dim},           {"input_layers", c.input_layers},
          {"seed", c.seed}};
}

inline SpectralConfig spectral_config(int sample_rate) {
  SpectralConfig c;
  c.sample_rate = sample_rate;
  return c;
}

inline ordered_json spectral_json(const SpectralConfig& c) {
  return {{"sample_rate", c.sample_rate}, {"window_sizes", c.window_sizes}, {"fps", c.mel.fps},
          {"n_mels", c.mel.n_mels},       {"fmin", c.mel.fmin},             {"fmax", c.mel.fmax},
          {"log_offset", c.mel.log_offset}, {"rectify_diff", c.rectify_diff}};
}

// Features for one input file: spectral features for audio, stored
// embeddings for SSLB.
inline EmbeddingTensor load_input(const fs::path& in, const std::string& frontend, const SpectralConfig& spec) {
  if (has_extension(in, ".sslb")) {
    auto e = read_embeddings(in.string());
    e.validate();
    return e;
  }
  if (frontend == "ssl")
    throw UsageError(in.string() + ": the ssl front end reads SSLB files written by the embedding exporter");
  return EmbeddingTensor::from_features(spectral_features(load_audio(in.string()), spec));
}

// ---- segment ----------------------------------------------------------------

struct SegmentArgs {
  std::string in, beats, out_dir;
  double rms_threshold = 0.01;
  double min_silence = 8.0;
};

inline void run_segment(const SegmentArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  const auto t0 = Clock::now();
  SegmentationConfig cfg;
  cfg.rms_threshold = a.rms_threshold;
  cfg.min_silence_seconds = a.min_silence;
  if (!(cfg.rms_threshold >= 0.0)) throw UsageError("--rms-threshold must be non-negative");
  if (!(cfg.min_silence_seconds > 0.0)) throw UsageError("--min-silence must be positive");

  const auto wave = normalize_rms(load_audio(a.in));
  const auto beats = read_beats(a.beats);
  const auto segments = split_silence(wave, beats, cfg);
  const std::string stem = fs::path(a.in).stem().string();
  fs::create_directories(a.out_dir);

  Manifest m("segment", argv);
  m.j["config"] = {{"rms_threshold", cfg.rms_threshold},
                   {"min_silence_seconds", cfg.min_silence_seconds},
                   {"window_seconds", cfg.window_seconds},
                   {"hop_seconds", cfg.hop_seconds},
                   {"rms_normalized", true},
                   {"sample_format", "float32"}};
  m.j["inputs"] = {{"audio", a.in}, {"beats", a.beats}};
  m.j["source_duration_seconds"] = wave.duration();
  m.j["source_beats"] = beats.size();
  ordered_json list = ordered_json::array();
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto& s = segments[i];
    const std::string name = stem + "_seg" + std::to_string(i);
    const fs::path wav = fs::path(a.out_dir) / (name + ".wav"), bts = fs::path(a.out_dir) / (name + ".beats");
    write_wav(wav.string(), s.waveform, SampleFormat::kFloat32);
    write_beats(bts.string(), s.beats);
    list.push_back({{"index", i},
                    {"audio", wav.string()},
                    {"beats", bts.string()},
                    {"source_offset_seconds", s.source_offset_seconds},
                    {"duration_seconds", s.waveform.duration()},
                    {"n_beats", s.beats.size()}});
  }
  m.j["segments"] = list;
  m.write(fs::path(a.out_dir) / (stem + ".manifest.json"), seconds_since(t0));
  out << segments.size() << " segment(s) written to " << a.out_dir << "\n";
}

// ---- features ---------------------------------------------------------------

struct FeaturesArgs {
  std::string frontend;
  std::vector<std::string> in;
  std::string out, out_dir;
  int sample_rate = 44100;
  int threads = 1;
};

inline void run_features(const FeaturesArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  const auto t0 = Clock::now();
  const auto outputs = output_paths(a.in, a.out, a.out_dir, ".sslb");
  const auto spec = spectral_config(a.sample_rate);
  for (const auto& in : a.in) {
    const bool sslb = has_extension(in, ".sslb");
    if (a.frontend == "spec" && sslb) throw UsageError(in + ": the spec front end reads audio, not SSLB");
    if (a.frontend == "ssl" && !sslb)
      throw UsageError(in + ": the ssl front end reads SSLB files written by the embedding exporter");
  }
  std::vector<ordered_json> rows(a.in.size());
  parallel_for(a.in.size(), a.threads, [&](std::size_t i) {
    const auto e = load_input(a.in[i], a.frontend, spec);
    if (outputs[i].has_parent_path()) fs::create_directories(outputs[i].parent_path());
    write_embeddings(outputs[i].string(), e);
    rows[i] = {{"input", a.in[i]},     {"output", outputs[i].string()}, {"n_layers", e.n_layers()},
               {"n_frames", e.n_frames()}, {"dim", e.dim()},            {"fps", e.fps}};
  });
  Manifest m("features", argv);
  m.j["config"] = {{"frontend", a.frontend}, {"threads", a.threads}};
  if (a.frontend == "spec") m.j["config"]["spectral"] = spectral_json(spec);
  m.j["files"] = rows;
  const fs::path mpath = a.out.empty() ? fs::path(a.out_dir) / "features.manifest.json" : fs::path(a.out + ".manifest.json");
  m.write(mpath, seconds_since(t0));
  out << a.in.size() << " feature file(s) written\n";
}

// ---- train ------------------------------------------------------------------

struct TrainArgs {
  std::string frontend, data, out, log;
  std::uint64_t seed = 0;
  int epochs = 100;
  int batches_per_epoch = 200;
  int batch_size = 10;
  double excerpt_seconds = 15.0;
  double lr = 5e-5;
  int patience = 20;
  int threads = 1;
  double max_minutes = 0.0;  // 0: no cap
  int model_dim = 768, heads = 4, head_dim = 192, ffn_dim = 1024;
};

struct DataEntry {
  std::string id;
  fs::path features, beats;
  std::optional<std::string> split;
};

struct DataManifest {
  std::vector<DataEntry> tracks;
  double train_fraction = 0.8;
  std::uint64_t split_seed = 0;
};

// Either {"tracks": [...], "train_fraction": f, "split_seed": s} or a bare
// list of track objects {"features": path, "beats": path, "id"?, "split"?}.
// Relative paths resolve against the manifest's directory.
inline DataManifest parse_data_manifest(const fs::path& path) {
  const auto j = read_json(path);
  DataManifest d;
  const nlohmann::json* list = &j;
  try {
    if (j.is_object()) {
      if (!j.contains("tracks")) throw DataError(path.string() + ": missing \"tracks\"");
      list = &j.at("tracks");
      d.train_fraction = j.value("train_fraction", 0.8);
      d.split_seed = j.value("split_seed", std::uint64_t{0});
    }
    if (!list->is_array()) throw DataError(path.string() + ": tracks must be a list");
    const fs::path base = path.parent_path();
    auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };
    for (const auto& t : *list) {
      DataEntry e;
      e.features = resolve(t.at("features").get<std::string>());
      e.beats = resolve(t.at("beats").get<std::string>());
      e.id = t.value("id", e.features.stem().string());
      if (t.contains("split")) {
        e.split = t.at("split").get<std::string>();
        if (*e.split != "train" && *e.split != "validation")
          throw DataError(path.string() + ": split must be \"train\" or \"validation\"");
      }
      d.tracks.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  if (d.tracks.empty()) throw DataError(path.string() + ": no tracks");
  const auto with_split = std::count_if(d.tracks.begin(), d.tracks.end(), [](const DataEntry& e) { return e.split.has_value(); });
  if (with_split != 0 && with_split != static_cast<std::ptrdiff_t>(d.tracks.size()))
    throw DataError(path.string() + ": either every track or no track has a split field");
  return d;
}

inline void run_train(const TrainArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  const auto t0 = Clock::now();
  const auto data = parse_data_manifest(a.data);

  std::vector<TrainingTrack> tracks(data.tracks.size());
  parallel_for(tracks.size(), a.threads, [&](std::size_t i) {
    const auto& e = data.tracks[i];
    tracks[i].input = read_embeddings(e.features.string());
    tracks[i].input.validate();
    tracks[i].beats = read_beats(e.beats.string());
  });

  const auto& first = tracks.front().input;
  ModelConfig mc;
  mc.input_dim = static_cast<int>(first.dim());
  mc.model_dim = a.model_dim;
  mc.heads = a.heads;
  mc.head_dim = a.head_dim;
  mc.ffn_dim = a.ffn_dim;
  mc.seed = a.seed;
  if (a.frontend == "spec") {
    mc.input_layers = 0;
  } else {
    mc.input_layers = static_cast<int>(first.n_layers());
  }
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    const auto& in = tracks[i].input;
    const std::string& id = data.tracks[i].id;
    if (a.frontend == "spec" && in.n_layers() != 1)
      throw DataError(id + ": spec features must have one layer, got " + std::to_string(in.n_layers()));
    if (in.n_layers() != first.n_layers() || in.dim() != first.dim() || in.fps != first.fps)
      throw DataError(id + ": feature shape or fps differs from the first track");
  }
  try {
    mc.validate();
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }

  std::vector<std::size_t> tr_idx, va_idx;
  if (data.tracks.front().split) {
    for (std::size_t i = 0; i < data.tracks.size(); ++i) (*data.tracks[i].split == "train" ? tr_idx : va_idx).push_back(i);
  } else {
    const auto s = split_indices(data.tracks.size(), data.train_fraction, data.split_seed);
    tr_idx = s.train;
    va_idx = s.validation;
  }
  if (tr_idx.empty() || va_idx.empty()) throw DataError("train and validation splits must both be non-empty");
  std::vector<TrainingTrack> train_set, val_set;
  for (auto i : tr_idx) train_set.push_back(std::move(tracks[i]));
  for (auto i : va_idx) val_set.push_back(std::move(tracks[i]));

  TrainConfig tc;
  tc.epochs = a.epochs;
  tc.batches_per_epoch = a.batches_per_epoch;
  tc.batch_size = a.batch_size;
  tc.excerpt_seconds = a.excerpt_seconds;
  tc.adam.lr = a.lr;
  tc.patience = a.patience;
  tc.seed = a.seed;
  tc.threads = a.threads;
  if (a.max_minutes > 0.0) tc.max_wall_seconds = 60.0 * a.max_minutes;

  const fs::path log_path = a.log.empty() ? fs::path(a.out + ".log.jsonl") : fs::path(a.log);
  if (log_path.has_parent_path()) fs::create_directories(log_path.parent_path());
  std::ofstream log(log_path, std::ios::trunc);
  if (!log) throw IoError("cannot open " + log_path.string());
  const auto result = train(train_set, val_set, mc, tc, [&](const EpochRecord& r) {
    ordered_json line{{"epoch", r.epoch}, {"train_loss", r.train_loss}, {"val_loss", r.val_loss}, {"wall_seconds", r.wall_seconds}};
    log << line.dump() << '\n' << std::flush;
    out << "epoch " << r.epoch << " train " << r.train_loss << " val " << r.val_loss << "\n";
  });

  const fs::path ckpt(a.out);
  if (ckpt.has_parent_path()) fs::create_directories(ckpt.parent_path());
  save_checkpoint(a.out, result.params);

  Manifest m("train", argv);
  m.j["config"] = {{"frontend", a.frontend},
                   {"model", model_json(mc)},
                   {"epochs", tc.epochs},
                   {"batches_per_epoch", tc.batches_per_epoch},
                   {"batch_size", tc.batch_size},
                   {"excerpt_seconds", tc.excerpt_seconds},
                   {"adam", {{"lr", tc.adam.lr}, {"beta1", tc.adam.beta1}, {"beta2", tc.adam.beta2}, {"epsilon", tc.adam.epsilon}}},
                   {"patience", tc.patience},
                   {"seed", tc.seed},
                   {"threads", tc.threads},
                   {"max_wall_seconds", a.max_minutes > 0.0 ? ordered_json(tc.max_wall_seconds) : ordered_json(nullptr)},
                   {"train_fraction", data.train_fraction},
                   {"split_seed", data.split_seed}};
  m.j["seed"] = a.seed;
  ordered_json train_ids = ordered_json::array(), val_ids = ordered_json::array();
  for (auto i : tr_idx) train_ids.push_back(data.tracks[i].id);
  for (auto i : va_idx) val_ids.push_back(data.tracks[i].id);
  m.j["inputs"] = {{"data", a.data}, {"train", train_ids}, {"validation", val_ids}};
  m.j["outputs"] = {{"checkpoint", a.out}, {"log", log_path.string()}};
  m.j["best_epoch"] = result.best_epoch;
  m.j["best_val_loss"] = result.best_val_loss;
  m.j["epochs_run"] = result.history.size();
  if (mc.input_layers > 0) {
    const Eigen::Index n = result.params.layer_weights.cols();
    LayerWeights w(static_cast<std::size_t>(n));
    for (Eigen::Index l = 0; l < n; ++l) w[static_cast<std::size_t>(l)] = result.params.layer_weights(0, l);
    const fs::path report = a.out + ".layers.json";
    write_text(report, layer_weight_report(w).dump(2) + "\n");
    m.j["outputs"]["layer_weights"] = report.string();
    out << layer_weight_text(w);
  }
  m.write(a.out + ".manifest.json", seconds_since(t0));
  out << "best epoch " << result.best_epoch << " val " << result.best_val_loss << "\n";
}

// ---- infer ------------------------------------------------------------------

struct InferArgs {
  std::string model;
  std::vector<std::string> in;
  std::string out, out_dir;
  DecoderConfig decoder;
  int sample_rate = 44100;
  int threads = 1;
  bool save_activations = false;
};

inline void run_infer(const InferArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  const auto t0 = Clock::now();
  try {
    a.decoder.validate();
    build_state_space(a.decoder);
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
  const auto outputs = output_paths(a.in, a.out, a.out_dir, ".beats");
  const auto params = load_checkpoint(a.model);
  const auto spec = spectral_config(a.sample_rate);
  const std::string frontend = params.config.input_layers > 0 ? "ssl" : "spec";

  std::vector<ordered_json> rows(a.in.size());
  parallel_for(a.in.size(), a.threads, [&](std::size_t i) {
    const auto ts = Clock::now();
    const auto input = load_input(a.in[i], frontend, spec);
    if (input.fps != a.decoder.fps)
      throw DataError(a.in[i] + ": features run at " + std::to_string(input.fps) + " fps but the decoder expects " +
                      std::to_string(a.decoder.fps) + " (set --fps)");
    const auto act = forward(params, input);
    const auto beats = decode_beats(act.salience, input.fps, a.decoder);
    const double secs = seconds_since(ts);
    if (outputs[i].has_parent_path()) fs::create_directories(outputs[i].parent_path());
    write_beats(outputs[i].string(), beats);
    if (a.save_activations) {
      std::string text;
      char buf[32];
      for (double v : act.salience) {
        std::snprintf(buf, sizeof buf, "%.6f\n", v);
        text += buf;
      }
      write_text(fs::path(outputs[i]).replace_extension(".act"), text);
    }
    rows[i] = {{"id", outputs[i].stem().string()}, {"input", a.in[i]},     {"output", outputs[i].string()},
               {"n_frames", input.n_frames()},     {"n_beats", beats.size()}, {"compute_seconds", secs}};
  });

  Manifest m("infer", argv);
  m.j["config"] = {{"model", a.model}, {"model_config", model_json(params.config)}, {"decoder", decoder_json(a.decoder)},
                   {"threads", a.threads}};
  if (frontend == "spec") m.j["config"]["spectral"] = spectral_json(spec);
  m.j["tracks"] = rows;
  const fs::path mpath = a.out.empty() ? fs::path(a.out_dir) / "infer.manifest.json" : fs::path(a.out + ".manifest.json");
  m.write(mpath, seconds_since(t0));
  out << a.in.size() << " track(s) decoded\n";
}

// ---- eval -------------------------------------------------------------------

struct EvalArgs {
  std::string ref_dir, est_dir, report, csv;
  bool pi = false;
  int threads = 1;
  MetricConfig metrics;
};

// compute_seconds recorded by `infer` for each estimate id in est_dir.
inline std::map<std::string, double> compute_times(const fs::path& est_dir) {
  std::map<std::string, double> times;
  for (const auto& entry : fs::directory_iterator(est_dir)) {
    const auto name = entry.path().filename().string();
    if (!entry.is_regular_file() || !name.ends_with(".manifest.json")) continue;
    nlohmann::json j;
    try {
      j = read_json(entry.path());
    } catch (const DataError&) {
      continue;
    }
    if (j.value("command", "") != "infer" || !j.contains("tracks")) continue;
    for (const auto& t : j["tracks"])
      if (t.contains("id") && t.contains("compute_seconds")) times[t["id"].get<std::string>()] = t["compute_seconds"].get<double>();
  }
  return times;
}

inline void run_eval(const EvalArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  const auto t0 = Clock::now();
  for (const auto& d : {a.ref_dir, a.est_dir})
    if (!fs::is_directory(d)) throw IoError(d + " is not a directory");
  std::vector<fs::path> refs;
  for (const auto& entry : fs::directory_iterator(a.ref_dir))
    if (entry.is_regular_file() && has_extension(entry.path(), ".beats")) refs.push_back(entry.path());
  std::sort(refs.begin(), refs.end());
  if (refs.empty()) throw DataError(a.ref_dir + " holds no .beats files");
  const auto times = compute_times(a.est_dir);

  std::vector<EvaluationInput> inputs(refs.size());
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const std::string id = refs[i].stem().string();
    const fs::path est = fs::path(a.est_dir) / (id + ".beats");
    if (!fs::exists(est)) throw DataError("no estimate for " + id + " in " + a.est_dir);
    inputs[i].id = id;
    inputs[i].ref = read_beats(refs[i].string());
    inputs[i].est = read_beats(est.string());
    if (auto it = times.find(id); it != times.end()) inputs[i].compute_seconds = it->second;
  }
  const auto rep = evaluate_corpus(inputs, a.metrics, a.threads);
  write_text(a.report, report_json(rep, a.pi).dump(2) + "\n");
  if (!a.csv.empty()) write_text(a.csv, report_csv(rep, a.pi));

  Manifest m("eval", argv);
  m.j["config"] = {{"pi", a.pi},
                   {"f_tolerance", a.metrics.f_tolerance},
                   {"cemgil_sigma", a.metrics.cemgil_sigma},
                   {"p_window_fraction", a.metrics.p_window_fraction},
                   {"goto_phase_threshold", a.metrics.goto_phase_threshold},
                   {"goto_mu", a.metrics.goto_mu},
                   {"goto_sigma", a.metrics.goto_sigma},
                   {"goto_min_coverage", a.metrics.goto_min_coverage},
                   {"threads", a.threads}};
  m.j["inputs"] = {{"ref_dir", a.ref_dir}, {"est_dir", a.est_dir}, {"n_tracks", refs.size()}};
  m.j["outputs"] = {{"report", a.report}};
  if (!a.csv.empty()) m.j["outputs"]["csv"] = a.csv;
  m.write(a.report + ".manifest.json", seconds_since(t0));

  const auto& s = rep.mean;
  out << "tracks " << rep.tracks.size() << "  F " << s.f_measure << "  P " << s.p_score << "  Cemgil " << s.cemgil
      << "  Goto " << s.goto_score;
  if (a.pi) out << "  PI-F " << s.pi_f_measure;
  out << "\n";
}

}  // namespace detail

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  using namespace detail;
  CLI::App app{"Beat tracking for isolated singing voices", "vocalbeat"};
  app.set_version_flag("--version", VOCALBEAT_VERSION);
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  const std::vector<std::string> args(argv, argv + argc);
  const int default_threads = default_thread_count();

  SegmentArgs seg;
  auto* s = app.add_subcommand("segment", "RMS-normalize a vocal track and cut out long silences");
  s->add_option("--in", seg.in, "input WAV")->required();
  s->add_option("--beats", seg.beats, "beat annotation (one time in seconds per line)")->required();
  s->add_option("--out-dir", seg.out_dir, "output directory")->required();
  s->add_option("--rms-threshold", seg.rms_threshold, "frame RMS below this is silent")->capture_default_str();
  s->add_option("--min-silence", seg.min_silence, "shortest silence removed, seconds")->capture_default_str();

  FeaturesArgs feat;
  feat.threads = default_threads;
  auto* f = app.add_subcommand("features", "Compute or import per-frame features as SSLB");
  f->add_option("--frontend", feat.frontend, "spec (audio in) or ssl (SSLB in)")->required()->check(CLI::IsMember({"spec", "ssl"}));
  f->add_option("--in", feat.in, "input WAV or SSLB files")->required();
  f->add_option("--out", feat.out, "output SSLB (single input)");
  f->add_option("--out-dir", feat.out_dir, "output directory, <stem>.sslb per input");
  f->add_option("--sample-rate", feat.sample_rate, "analysis sample rate")->capture_default_str();
  f->add_option("--threads", feat.threads, "worker threads")->check(CLI::PositiveNumber);

  TrainArgs tr;
  tr.threads = default_threads;
  auto* t = app.add_subcommand("train", "Train the beat activation network");
  t->add_option("--frontend", tr.frontend, "spec or ssl")->required()->check(CLI::IsMember({"spec", "ssl"}));
  t->add_option("--data", tr.data, "JSON data manifest")->required();
  t->add_option("--out", tr.out, "output checkpoint")->required();
  t->add_option("--seed", tr.seed, "initialization and sampling seed")->capture_default_str();
  t->add_option("--epochs", tr.epochs, "maximum epochs")->capture_default_str()->check(CLI::PositiveNumber);
  t->add_option("--batches-per-epoch", tr.batches_per_epoch)->capture_default_str()->check(CLI::PositiveNumber);
  t->add_option("--batch-size", tr.batch_size)->capture_default_str()->check(CLI::PositiveNumber);
  t->add_option("--excerpt-seconds", tr.excerpt_seconds)->capture_default_str()->check(CLI::PositiveNumber);
  t->add_option("--lr", tr.lr, "Adam learning rate")->capture_default_str()->check(CLI::NonNegativeNumber);
  t->add_option("--patience", tr.patience, "epochs without validation improvement before stopping")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  t->add_option("--max-minutes", tr.max_minutes, "wall-clock cap, 0 for none")->capture_default_str()->check(CLI::NonNegativeNumber);
  t->add_option("--threads", tr.threads)->check(CLI::PositiveNumber);
  t->add_option("--log", tr.log, "JSON-lines training log (default <out>.log.jsonl)");
  t->add_option("--model-dim", tr.model_dim)->capture_default_str()->check(CLI::PositiveNumber);
  t->add_option("--heads", tr.heads)->capture_default_str()->check(CLI::PositiveNumber);
  t->add_option("--head-dim", tr.head_dim)->capture_default_str()->check(CLI::PositiveNumber);
  t->add_option("--ffn-dim", tr.ffn_dim)->capture_default_str()->check(CLI::PositiveNumber);

  InferArgs inf;
  inf.threads = default_threads;
  auto* i = app.add_subcommand("infer", "Predict beats with a trained model");
  i->add_option("--model", inf.model, "checkpoint")->required();
  i->add_option("--in", inf.in, "input WAV or SSLB files")->required();
  i->add_option("--out", inf.out, "output beats file (single input)");
  i->add_option("--out-dir", inf.out_dir, "output directory, <stem>.beats per input");
  i->add_option("--fps", inf.decoder.fps)->capture_default_str();
  i->add_option("--min-bpm", inf.decoder.min_bpm)->capture_default_str();
  i->add_option("--max-bpm", inf.decoder.max_bpm)->capture_default_str();
  i->add_option("--transition-lambda", inf.decoder.transition_lambda)->capture_default_str();
  i->add_option("--observation-lambda", inf.decoder.observation_lambda)->capture_default_str();
  i->add_option("--sample-rate", inf.sample_rate, "analysis sample rate for audio input")->capture_default_str();
  i->add_option("--threads", inf.threads)->check(CLI::PositiveNumber);
  i->add_flag("--save-activations", inf.save_activations, "also write <stem>.act with the per-frame salience");

  EvalArgs ev;
  ev.threads = default_threads;
  auto* e = app.add_subcommand("eval", "Score estimated beats against references");
  e->add_option("--ref-dir", ev.ref_dir, "reference .beats files")->required();
  e->add_option("--est-dir", ev.est_dir, "estimated .beats files with the same names")->required();
  e->add_option("--report", ev.report, "JSON report")->required();
  e->add_flag("--pi", ev.pi, "add phase-inclusive scores");
  e->add_option("--csv", ev.csv, "also write a CSV table");
  e->add_option("--f-tolerance", ev.metrics.f_tolerance, "F-measure tolerance, seconds")->capture_default_str();
  e->add_option("--threads", ev.threads)->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& ex) {
    if (ex.get_exit_code() == 0) {
      app.exit(ex, out, err);
      return kOk;
    }
    err << "error: usage: " << ex.what() << "\n";
    app.exit(ex, out, err);
    return kUsage;
  }

  try {
    if (*s) run_segment(seg, args, out);
    if (*f) run_features(feat, args, out);
    if (*t) run_train(tr, args, out);
    if (*i) run_infer(inf, args, out);
    if (*e) run_eval(ev, args, out);
  } catch (const UsageError& ex) {
    err << "error: usage: " << ex.what() << "\n";
    return kUsage;
  } catch (const DataError& ex) {
    err << "error: " << ex.kind() << ": " << ex.what() << "\n";
    return kData;
  } catch (const InvalidArgument& ex) {
    // flags are checked up front, so this comes from the input data
    err << "error: " << ex.kind() << ": " << ex.what() << "\n";
    return kData;
  } catch (const fs::filesystem_error& ex) {
    err << "error: io_error: " << ex.what() << "\n";
    return kData;
  } catch (const Error& ex) {
    err << "error: " << ex.kind() << ": " << ex.what() << "\n";
    return kInternal;
  } catch (const std::exception& ex) {
    err << "error: internal: " << ex.what() << "\n";
    return kInternal;
  }
  return kOk;
}

}  // namespace vocalbeat::cli
