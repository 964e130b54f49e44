#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "tinyshape/experiment.hpp"

using namespace tinyshape;
namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::string error_of(const std::string& json_text) {
  try {
    auto c = parse_config(json_text);
    c.finalize();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

ExperimentConfig tiny(const fs::path& out) {
  auto c = parse_config(R"({
    "seed": 3,
    "train": {"n_blocks": 64, "epochs": 1},
    "eval": {"ccdf_blocks": 200, "snr_db": [10], "channels": ["awgn"], "modulations": ["qpsk"],
             "ser_blocks": 4, "paired_blocks": 50, "oobe_blocks": 10},
    "sweep": {"hidden_widths": [10, 0]}
  })");
  c.output_dir = out.string();
  c.finalize();
  return c;
}

}  // namespace

TEST_CASE("parse_config: defaults and overrides") {
  const auto c = parse_config("{}");
  CHECK(c.seed == 1);
  CHECK(c.chain.n_sk() == 240);
  CHECK(c.train.n_blocks == 10000);
  CHECK(c.rrc_rolloff == 0.25);
  const auto d = parse_config(R"({"seed": 9, "train": {"lr": 0.002, "prune": {"mode": "per_epoch"}},
                                 "eval": {"channels": ["rayleigh"], "ccdf_grid_db": [2, 10, 0.5]}})");
  CHECK(d.seed == 9);
  CHECK(d.train.adam.lr == 0.002);
  CHECK(d.train.prune.mode == PruneMode::per_epoch);
  CHECK(d.eval.channels == std::vector<ChannelModel>{ChannelModel::rayleigh});
  CHECK(d.eval.ccdf_step_db == 0.5);
}

TEST_CASE("parse_config: errors name the offending key") {
  CHECK(error_of(R"({"train": {"learning_rate": 0.1}})").find("train.learning_rate") != std::string::npos);
  CHECK(error_of(R"({"bogus": 1})").find("bogus") != std::string::npos);
  CHECK(error_of(R"({"train": {"lr": "fast"}})").find("train.lr") != std::string::npos);
  CHECK(error_of(R"({"train": {"epochs": -1}})").find("train.epochs") != std::string::npos);
  CHECK(error_of(R"({"eval": {"channels": ["moon"]}})").find("eval.channels") != std::string::npos);
  CHECK(error_of(R"({"train": {"channel_mix": {"awgn": 0.2}}})").find("train") != std::string::npos);
  CHECK(error_of(R"({"baselines": {"slm": {"num_candidates": 1}}})").find("num_candidates") != std::string::npos);
  CHECK(error_of("{not json").find("JSON") != std::string::npos);
  CHECK_THROWS_AS(load_config("/nonexistent.json"), ConfigError);
}

TEST_CASE("commands: train, eval, sweep, adapt, baselines") {
  const auto dir = fs::temp_directory_path() / "tinyshape_cmd_test";
  fs::remove_all(dir);
  const auto cfg = tiny(dir / "nested");

  const auto tr = cmd_train(cfg);
  CHECK(fs::exists(dir / "nested" / "checkpoint.tsck"));
  const auto hist = lines(read_file(dir / "nested" / "history.csv"));
  CHECK(hist[0] == "epoch,mean_loss,mse_term,tail_term,sparsity,wall_seconds");
  CHECK(hist.size() == 2);

  const auto ck = (dir / "nested" / "checkpoint.tsck").string();
  cmd_eval(cfg, ck);
  const auto summary = nlohmann::json::parse(read_file(dir / "nested" / "summary.json"));
  for (const char* s : {"tinyml", "rrc", "dftsofdm", "clf", "slm"}) {
    CHECK(summary["schemes"].contains(s));
    CHECK(summary["schemes"][s]["papr_at_ccdf_1e3_db"].is_number());
  }
  CHECK(lines(read_file(dir / "nested" / "ccdf.csv"))[0] == "scheme,threshold_db,ccdf");
  CHECK(lines(read_file(dir / "nested" / "ser_vs_snr.csv"))[0] == "scheme,channel,mod,snr_db,ser,sem");
  CHECK(lines(read_file(dir / "nested" / "papr_vs_blocks.csv"))[0] == "scheme,block_index,papr_db");

  // The width-10 sweep column reproduces the evaluated tinyml curve.
  cmd_sweep(cfg);
  const auto sweep = lines(read_file(dir / "nested" / "sweep_ccdf.csv"));
  CHECK(sweep[0] == "threshold_db,tinyml_h10,tinyml_perceptron,rrc,dftsofdm");
  std::map<std::string, std::string> tinyml;
  for (const auto& l : lines(read_file(dir / "nested" / "ccdf.csv"))) {
    if (l.rfind("tinyml,", 0) == 0) {
      const auto rest = l.substr(7);
      const auto comma = rest.find(',');
      tinyml[rest.substr(0, comma)] = rest.substr(comma + 1);
    }
  }
  for (std::size_t i = 1; i < sweep.size(); ++i) {
    std::istringstream row(sweep[i]);
    std::string th, h10;
    std::getline(row, th, ',');
    std::getline(row, h10, ',');
    CHECK(tinyml.at(th) == h10);
  }

  cmd_adapt(cfg, ck);
  const auto ev = lines(read_file(dir / "nested" / "adapt_events.csv"));
  CHECK(ev[0] == "t_ms,snr_db,lambda,papr_db,ser_window");
  CHECK(ev.size() == 12);
  for (std::size_t i = 1; i < ev.size(); ++i) CHECK(ev[i].find(",0.30,") != std::string::npos);

  cmd_baselines(cfg);
  CHECK(fs::exists(dir / "nested" / "baselines.json"));

  CHECK_THROWS(cmd_eval(cfg, (dir / "missing.tsck").string()));
  fs::remove_all(dir);
}
