#include "tinyshape/experiment.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "json.hpp"
#include "tinyshape/adaptation.hpp"
#include "tinyshape/checkpoint.hpp"
#include "tinyshape/polyfilter.hpp"
#include "tinyshape/rng.hpp"

namespace tinyshape {

namespace {

using json = nlohmann::json;

// A JSON object being consumed; every key must be read before finish().
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("'" + display() + "' must be an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  Section child(const std::string& key) {
    used_.insert(key);
    return Section(j_.at(key), join(key));
  }

  const json& raw(const std::string& key) {
    used_.insert(key);
    return j_.at(key);
  }

  template <typename T>
  void read(const std::string& key, T& dst) {
    if (!j_.contains(key)) return;
    used_.insert(key);
    dst = convert<T>(j_.at(key), join(key));
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!used_.count(key)) throw ConfigError("unknown config key '" + join(key) + "'");
    }
  }

  std::string join(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  template <typename T>
  static T convert(const json& v, const std::string& path) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError("config key '" + path + "' must be a boolean");
      return v.get<bool>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ConfigError("config key '" + path + "' must be an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (v.get<long long>() < 0 && !v.is_number_unsigned()) {
          throw ConfigError("config key '" + path + "' must be >= 0");
        }
        return static_cast<T>(v.get<std::uint64_t>());
      } else {
        return v.get<T>();
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError("config key '" + path + "' must be a number");
      return v.get<T>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError("config key '" + path + "' must be a string");
      return v.get<std::string>();
    } else {
      static_assert(sizeof(T) == 0, "unsupported config type");
    }
  }

 private:
  std::string display() const { return path_.empty() ? "<root>" : path_; }

  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

template <typename T>
std::vector<T> read_list(const json& v, const std::string& path) {
  if (!v.is_array()) throw ConfigError("config key '" + path + "' must be an array");
  std::vector<T> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(Section::convert<T>(v[i], fmt::format("{}[{}]", path, i)));
  return out;
}

template <typename Fn>
auto with_key(const std::string& path, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError("config key '" + path + "': " + e.what());
  }
}

void parse_chain(Section s, ChainConfig& c) {
  s.read("n_data", c.n_data);
  s.read("n_se", c.n_se);
  s.read("n_fft", c.n_fft);
  s.read("oversample", c.oversample);
  s.read("bandwidth_hz", c.bandwidth_hz);
  s.read("scs_hz", c.scs_hz);
  s.finish();
}

void parse_train(Section s, TrainConfig& t) {
  s.read("n_blocks", t.n_blocks);
  s.read("batch_size", t.batch_size);
  s.read("epochs", t.epochs);
  s.read("lr", t.adam.lr);
  s.read("weight_decay", t.adam.weight_decay);
  s.read("beta1", t.adam.beta1);
  s.read("beta2", t.adam.beta2);
  s.read("eps", t.adam.eps);
  if (s.has("prune")) {
    auto p = s.child("prune");
    std::string mode;
    p.read("mode", mode);
    if (!mode.empty()) {
      if (mode == "target") {
        t.prune.mode = PruneMode::target;
      } else if (mode == "per_epoch") {
        t.prune.mode = PruneMode::per_epoch;
      } else {
        throw ConfigError("config key '" + p.join("mode") + "' must be 'target' or 'per_epoch'");
      }
    }
    p.read("per_epoch_fraction", t.prune.per_epoch_fraction);
    p.read("target_sparsity", t.prune.target_sparsity);
    p.read("ramp_per_epoch", t.prune.ramp_per_epoch);
    p.finish();
  }
  if (s.has("snr_range_db")) {
    const auto r = read_list<double>(s.raw("snr_range_db"), s.join("snr_range_db"));
    if (r.size() != 2) throw ConfigError("config key '" + s.join("snr_range_db") + "' must be [lo, hi]");
    t.snr_lo_db = r[0];
    t.snr_hi_db = r[1];
  }
  if (s.has("channel_mix")) {
    auto m = s.child("channel_mix");
    t.channel_mix.awgn = t.channel_mix.rayleigh = t.channel_mix.rician = 0.0;
    m.read("awgn", t.channel_mix.awgn);
    m.read("rayleigh", t.channel_mix.rayleigh);
    m.read("rician", t.channel_mix.rician);
    m.finish();
  }
  s.read("rician_k_db", t.channel_mix.rician_k_db);
  if (s.has("mod_mix")) {
    auto m = s.child("mod_mix");
    t.mod_mix.qpsk = t.mod_mix.qam16 = 0.0;
    m.read("qpsk", t.mod_mix.qpsk);
    m.read("qam16", t.mod_mix.qam16);
    m.finish();
  }
  s.read("hidden_width", t.hidden_width);
  s.read("n_coeffs", t.n_coeffs);
  s.read("x0_db", t.x0_db);
  s.read("sharpness", t.sharpness);
  s.read("grad_clip", t.grad_clip);
  s.finish();
}

void parse_eval(Section s, EvalConfig& e) {
  s.read("ccdf_blocks", e.ccdf_blocks);
  s.read("ccdf_snr_db", e.ccdf_snr_db);
  if (s.has("ccdf_modulation")) {
    const auto path = s.join("ccdf_modulation");
    const auto name = Section::convert<std::string>(s.raw("ccdf_modulation"), path);
    e.ccdf_mod = with_key(path, [&] { return parse_modulation(name); });
  }
  if (s.has("snr_db")) e.snr_db = read_list<double>(s.raw("snr_db"), s.join("snr_db"));
  if (s.has("channels")) {
    const auto path = s.join("channels");
    e.channels.clear();
    for (const auto& name : read_list<std::string>(s.raw("channels"), path)) {
      e.channels.push_back(with_key(path, [&] { return parse_channel_model(name); }));
    }
  }
  s.read("rician_k_db", e.rician_k_db);
  if (s.has("modulations")) {
    const auto path = s.join("modulations");
    e.mods.clear();
    for (const auto& name : read_list<std::string>(s.raw("modulations"), path)) {
      e.mods.push_back(with_key(path, [&] { return parse_modulation(name); }));
    }
  }
  s.read("ser_blocks", e.ser_blocks);
  s.read("paired_blocks", e.paired_blocks);
  s.read("oobe_blocks", e.oobe_blocks);
  if (s.has("ccdf_grid_db")) {
    const auto g = read_list<double>(s.raw("ccdf_grid_db"), s.join("ccdf_grid_db"));
    if (g.size() != 3) throw ConfigError("config key '" + s.join("ccdf_grid_db") + "' must be [lo, hi, step]");
    e.ccdf_lo_db = g[0];
    e.ccdf_hi_db = g[1];
    e.ccdf_step_db = g[2];
  }
  s.finish();
}

void parse_baselines(Section s, ExperimentConfig& cfg) {
  s.read("rrc_rolloff", cfg.rrc_rolloff);
  if (s.has("clf")) {
    auto c = s.child("clf");
    c.read("clip_ratio_db", cfg.clf.clip_ratio_db);
    c.read("iterations", cfg.clf.iterations);
    c.finish();
  }
  if (s.has("slm")) {
    auto c = s.child("slm");
    c.read("num_candidates", cfg.slm.num_candidates);
    c.finish();
    if (cfg.slm.num_candidates < 2) throw ConfigError("config key '" + c.join("num_candidates") + "' must be >= 2");
  }
  s.finish();
}

void parse_adapt(Section s, AdaptSettings& a) {
  if (s.has("preset")) {
    std::string p;
    s.read("preset", p);
    a.preset = p;
  }
  if (s.has("trace")) {
    std::string t;
    s.read("trace", t);
    a.trace = t;
  }
  s.read("blocks_per_tick", a.blocks_per_tick);
  s.read("period_ms", a.period_ms);
  if (s.has("modulation")) {
    const auto path = s.join("modulation");
    const auto name = Section::convert<std::string>(s.raw("modulation"), path);
    a.modulation = with_key(path, [&] { return parse_modulation(name); });
  }
  s.finish();
}

std::filesystem::path prepare_out(const ExperimentConfig& cfg) {
  std::filesystem::path dir(cfg.output_dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string fmt_num(double v) { return fmt::format("{:.6f}", v); }

class CsvFile {
 public:
  CsvFile(const std::filesystem::path& path, std::string_view header) : path_(path.string()), out_(path_) {
    if (!out_) throw std::runtime_error("cannot open '" + path_ + "' for writing");
    out_ << header << '\n';
  }
  template <typename... Args>
  void row(fmt::format_string<Args...> f, Args&&... args) {
    out_ << fmt::format(f, std::forward<Args>(args)...) << '\n';
  }
  std::string close() {
    out_.close();
    if (!out_) throw std::runtime_error("write failed for '" + path_ + "'");
    return path_;
  }

 private:
  std::string path_;
  std::ofstream out_;
};

void write_json(const std::filesystem::path& path, const json& j, CommandResult& result) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << j.dump(2) << '\n';
  out.close();
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
  result.files.push_back(path.string());
}

void write_scheme_files(const std::filesystem::path& dir, const EvalReport& report, CommandResult& result) {
  CsvFile ccdf(dir / "ccdf.csv", "scheme,threshold_db,ccdf");
  for (const auto& name : report.scheme_order) {
    for (const auto& p : report.schemes.at(name).ccdf) ccdf.row("{},{:.2f},{}", name, p.threshold_db, fmt_num(p.probability));
  }
  result.files.push_back(ccdf.close());

  CsvFile blocks(dir / "papr_vs_blocks.csv", "scheme,block_index,papr_db");
  for (const auto& name : report.scheme_order) {
    const auto& s = report.schemes.at(name);
    for (std::size_t i = 0; i < s.paired_papr.size(); ++i) blocks.row("{},{},{}", name, i, fmt_num(s.paired_papr[i]));
  }
  result.files.push_back(blocks.close());

  CsvFile oobe(dir / "oobe.csv", "scheme,oobe_db");
  for (const auto& name : report.scheme_order) oobe.row("{},{}", name, fmt_num(report.schemes.at(name).oobe_db));
  result.files.push_back(oobe.close());
}

void write_cell_files(const std::filesystem::path& dir, const EvalReport& report, CommandResult& result) {
  CsvFile ser(dir / "ser_vs_snr.csv", "scheme,channel,mod,snr_db,ser,sem");
  for (const auto& c : report.cells) {
    ser.row("{},{},{},{},{},{}", c.scheme, to_string(c.channel), to_string(c.mod), fmt_num(c.snr_db),
            fmt::format("{:.8f}", c.metrics.ser), fmt::format("{:.8f}", c.metrics.ser_sem));
  }
  result.files.push_back(ser.close());

  CsvFile papr(dir / "papr_vs_snr.csv", "scheme,channel,mod,snr_db,mean_papr_db,tail_p,mse");
  for (const auto& c : report.cells) {
    papr.row("{},{},{},{},{},{},{}", c.scheme, to_string(c.channel), to_string(c.mod), fmt_num(c.snr_db),
             fmt_num(c.metrics.mean_papr_db), fmt_num(c.metrics.tail_p), fmt::format("{:.8f}", c.metrics.mse_e));
  }
  result.files.push_back(papr.close());
}

json summary_entry(const SchemeSummary& s, double rrc_at_1e3) {
  return json{{"papr_at_ccdf_1e3_db", s.papr_at_1e3_db},
              {"mean_papr_db", s.mean_papr_db},
              {"paired_mean_papr_db", s.paired_mean_papr_db},
              {"oobe_db", s.oobe_db},
              {"delta_vs_rrc_db", s.papr_at_1e3_db - rrc_at_1e3}};
}

InferenceNet load_net(const std::string& checkpoint_path, const ChainConfig& chain, Checkpoint* out = nullptr) {
  if (!std::filesystem::exists(checkpoint_path)) {
    throw std::runtime_error("checkpoint not found: '" + checkpoint_path + "'");
  }
  Checkpoint ckpt = load_checkpoint(checkpoint_path);
  if (ckpt.params.shape().input != chain.n_sk() + 1) {
    throw std::runtime_error(fmt::format("checkpoint expects {} input features but the chain has {} subcarriers",
                                         ckpt.params.shape().input, chain.n_sk()));
  }
  InferenceNet net(ckpt.qnet);
  if (out) *out = std::move(ckpt);
  return net;
}

}  // namespace

void ExperimentConfig::finalize() {
  chain.validate();
  if (chain.n_sk() < 2) throw ConfigError("chain: need at least 2 occupied subcarriers");
  train.seed = seed;
  train.threads = threads;
  eval.seed = seed;
  eval.threads = threads;
  slm.seed = seed;
  with_key("train", [&] { train.validate(); return 0; });
  with_key("eval", [&] { eval.validate(); return 0; });
  with_key("baselines.clf", [&] { clf.validate(); return 0; });
  with_key("baselines.slm", [&] { slm.validate(); return 0; });
  if (!(rrc_rolloff >= 0.0 && rrc_rolloff <= 1.0)) throw ConfigError("config key 'baselines.rrc_rolloff' must be in [0, 1]");
  if (adapt.blocks_per_tick == 0) throw ConfigError("config key 'adapt.blocks_per_tick' must be >= 1");
  if (!(adapt.period_ms > 0.0)) throw ConfigError("config key 'adapt.period_ms' must be > 0");
  if (sweep_hidden_widths.empty()) throw ConfigError("config key 'sweep.hidden_widths' must not be empty");
}

ExperimentConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig cfg;
  Section s(root, "");
  s.read("seed", cfg.seed);
  s.read("output_dir", cfg.output_dir);
  s.read("threads", cfg.threads);
  if (s.has("chain")) parse_chain(s.child("chain"), cfg.chain);
  if (s.has("train")) parse_train(s.child("train"), cfg.train);
  if (s.has("eval")) parse_eval(s.child("eval"), cfg.eval);
  if (s.has("baselines")) parse_baselines(s.child("baselines"), cfg);
  if (s.has("adapt")) parse_adapt(s.child("adapt"), cfg.adapt);
  if (s.has("sweep")) {
    auto sw = s.child("sweep");
    if (sw.has("hidden_widths")) {
      cfg.sweep_hidden_widths = read_list<std::size_t>(sw.raw("hidden_widths"), sw.join("hidden_widths"));
    }
    sw.finish();
  }
  s.finish();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::vector<Scheme> baseline_schemes(const ExperimentConfig& cfg) {
  const ChainConfig plain = cfg.chain.without_extension();
  std::vector<Scheme> out;
  out.push_back(static_scheme("rrc", rrc_taps(cfg.chain.n_sk(), cfg.rrc_rolloff), cfg.chain));
  out.push_back(static_scheme("dftsofdm", unit_taps(plain.n_sk()), plain));
  out.push_back(clf_scheme("clf", cfg.clf, plain));
  out.push_back(slm_scheme("slm", cfg.slm, plain));
  return out;
}

CommandResult cmd_train(const ExperimentConfig& cfg) {
  const auto dir = prepare_out(cfg);
  const auto trained = train(cfg.train, cfg.chain);
  CommandResult result;
  const auto ckpt_path = (dir / kCheckpointFile).string();
  save_checkpoint(ckpt_path, trained.checkpoint);
  result.files.push_back(ckpt_path);

  CsvFile hist(dir / "history.csv", "epoch,mean_loss,mse_term,tail_term,sparsity,wall_seconds");
  for (const auto& h : trained.checkpoint.history) {
    hist.row("{},{},{},{},{},{:.3f}", h.epoch, fmt::format("{:.8f}", h.mean_loss), fmt::format("{:.8f}", h.mse_term),
             fmt::format("{:.8f}", h.tail_term), fmt_num(h.sparsity), h.wall_seconds);
  }
  result.files.push_back(hist.close());
  return result;
}

CommandResult cmd_eval(const ExperimentConfig& cfg, const std::string& checkpoint_path) {
  Checkpoint ckpt;
  InferenceNet net = load_net(checkpoint_path, cfg.chain, &ckpt);
  const auto dir = prepare_out(cfg);

  std::vector<Scheme> schemes;
  schemes.push_back(network_scheme("tinyml", std::move(net), cfg.chain));
  for (auto& s : baseline_schemes(cfg)) schemes.push_back(std::move(s));
  const auto report = evaluate(schemes, cfg.eval);

  CommandResult result;
  write_scheme_files(dir, report, result);
  write_cell_files(dir, report, result);

  const double rrc = report.schemes.at("rrc").papr_at_1e3_db;
  json summary;
  summary["reference_scheme"] = "rrc";
  summary["ccdf_blocks"] = cfg.eval.ccdf_blocks;
  summary["ccdf_snr_db"] = cfg.eval.ccdf_snr_db;
  summary["ccdf_modulation"] = std::string(to_string(cfg.eval.ccdf_mod));
  summary["seed"] = cfg.seed;
  summary["live_weights"] = ckpt.params.live_weight_count();
  summary["sparsity"] = ckpt.params.sparsity();
  json schemes_json = json::object();
  for (const auto& name : report.scheme_order) schemes_json[name] = summary_entry(report.schemes.at(name), rrc);
  summary["schemes"] = schemes_json;
  write_json(dir / "summary.json", summary, result);
  return result;
}

CommandResult cmd_sweep(const ExperimentConfig& cfg) {
  const auto dir = prepare_out(cfg);
  const RVec grid = cfg.eval.ccdf_grid();
  const std::uint64_t seed = derive_seed(cfg.seed, Stream::eval_cell, 0x1000);
  const auto mod = cfg.eval.ccdf_mod;

  std::vector<std::string> names;
  std::vector<std::vector<CcdfPoint>> columns;
  for (std::size_t width : cfg.sweep_hidden_widths) {
    TrainConfig tc = cfg.train;
    tc.hidden_width = width;
    const auto trained = train(tc, cfg.chain);
    const auto scheme = network_scheme(width == 0 ? "tinyml_perceptron" : fmt::format("tinyml_h{}", width),
                                       InferenceNet(trained.checkpoint.qnet), cfg.chain);
    const auto samples = papr_samples(scheme, mod, cfg.eval.ccdf_snr_db, cfg.eval.ccdf_blocks, seed, cfg.threads);
    names.push_back(scheme.name);
    columns.push_back(empirical_ccdf(samples, grid));
  }
  for (const auto& s : baseline_schemes(cfg)) {
    if (s.name != "rrc" && s.name != "dftsofdm") continue;
    const auto samples = papr_samples(s, mod, cfg.eval.ccdf_snr_db, cfg.eval.ccdf_blocks, seed, cfg.threads);
    names.push_back(s.name);
    columns.push_back(empirical_ccdf(samples, grid));
  }

  std::string header = "threshold_db";
  for (const auto& n : names) header += "," + n;
  CsvFile out(dir / "sweep_ccdf.csv", header);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    std::string line = fmt::format("{:.2f}", grid[i]);
    for (const auto& col : columns) line += "," + fmt_num(col[i].probability);
    out.row("{}", line);
  }
  CommandResult result;
  result.files.push_back(out.close());
  return result;
}

CommandResult cmd_adapt(const ExperimentConfig& cfg, const std::string& checkpoint_path) {
  InferenceNet net = load_net(checkpoint_path, cfg.chain);
  std::vector<TracePoint> trace;
  if (cfg.adapt.trace) {
    trace = load_trace(*cfg.adapt.trace);
  } else if (cfg.adapt.preset) {
    trace = preset_trace(*cfg.adapt.preset);
  } else {
    throw ConfigError("config key 'adapt': either 'trace' or 'preset' is required");
  }
  const auto dir = prepare_out(cfg);
  ScenarioConfig sc;
  sc.period_ms = cfg.adapt.period_ms;
  sc.blocks_per_tick = cfg.adapt.blocks_per_tick;
  sc.seed = cfg.seed;
  const TrafficGenerator traffic(cfg.seed, cfg.adapt.modulation, cfg.chain);
  const auto res = run_scenario(trace, net, traffic, cfg.chain, sc);

  CsvFile log(dir / "adapt_events.csv", "t_ms,snr_db,lambda,papr_db,ser_window");
  for (const auto& t : res.ticks) {
    log.row("{},{},{},{},{}", fmt::format("{:.1f}", t.t_ms), fmt_num(t.snr_db), fmt::format("{:.2f}", t.lambda),
            fmt_num(t.papr_db), fmt::format("{:.8f}", t.ser_window));
  }
  CommandResult result;
  result.files.push_back(log.close());
  return result;
}

CommandResult cmd_baselines(const ExperimentConfig& cfg) {
  const auto dir = prepare_out(cfg);
  const auto schemes = baseline_schemes(cfg);
  EvalConfig ec = cfg.eval;
  ec.channels.clear();
  const auto report = evaluate(schemes, ec);
  CommandResult result;
  write_scheme_files(dir, report, result);
  const double rrc = report.schemes.at("rrc").papr_at_1e3_db;
  json j;
  j["reference_scheme"] = "rrc";
  j["ccdf_blocks"] = cfg.eval.ccdf_blocks;
  j["seed"] = cfg.seed;
  json schemes_json = json::object();
  for (const auto& name : report.scheme_order) schemes_json[name] = summary_entry(report.schemes.at(name), rrc);
  j["schemes"] = schemes_json;
  write_json(dir / "baselines.json", j, result);
  return result;
}

}  // namespace tinyshape
