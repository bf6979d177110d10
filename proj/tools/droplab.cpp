// droplab: command-line front end for the experiment layer.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "droplab/experiments.hpp"

namespace {

using droplab::ExperimentConfig;

struct Subcommand {
  CLI::App* app = nullptr;
  ExperimentConfig cfg;
  std::optional<double> rate;  // variance / entropy / regcheck: shorthand for a one-point grid
  std::string config_file;
  std::string out;
  std::size_t jobs = 1;
};

bool has(std::initializer_list<std::string_view> list, std::string_view c) {
  for (auto x : list)
    if (x == c) return true;
  return false;
}

void add_options(Subcommand& s) {
  CLI::App& a = *s.app;
  ExperimentConfig& c = s.cfg;
  const std::string& cmd = c.command;
  const bool training = has({"train", "sweep", "robustness", "rewire", "oversmooth", "diversity"}, cmd);

  a.add_option("--out", s.out, "Output directory")->required();
  a.add_option("--jobs", s.jobs, "Worker threads (results do not depend on it)")->capture_default_str();
  a.add_option("--config", s.config_file, "Re-run from a config.json echo; only --out and --jobs may be combined");
  a.add_option("--seed", c.seed, "Root seed (env DROPLAB_SEED overrides)")->capture_default_str();

  if (training) {
    a.add_option("--data", c.data, "Dataset directory");
    a.add_option("--model", c.model, "gcn | appnp")->capture_default_str();
    a.add_option("--placement", c.placement, "message | input")->capture_default_str();
    a.add_option("--epochs", c.epochs)->capture_default_str();
    a.add_option("--lr", c.lr)->capture_default_str();
    a.add_option("--weight-decay", c.weight_decay)->capture_default_str();
    a.add_option("--hidden", c.hidden)->capture_default_str();
    a.add_option("--alpha", c.alpha, "APPNP teleport probability")->capture_default_str();
    a.add_option("--k-steps", c.k_steps, "APPNP propagation steps")->capture_default_str();
    a.add_option("--seeds", c.seeds, "Independent runs per cell")->capture_default_str();
  }
  if (has({"train", "sweep", "robustness", "rewire", "diversity"}, cmd))
    a.add_option("--layers", c.layers, "GCN depth")->capture_default_str();
  if (has({"train", "sweep", "robustness", "rewire", "oversmooth", "variance", "regcheck"}, cmd))
    a.add_option("--drop", c.drops, "none | dropout | dropedge | dropnode | dropmessage (comma list)")
        ->delimiter(',')
        ->capture_default_str();
  if (has({"train", "robustness", "rewire", "oversmooth"}, cmd))
    a.add_option("--rate", c.rate, "Dropping rate")->capture_default_str();
  if (has({"variance", "entropy", "regcheck"}, cmd)) a.add_option("--rate", s.rate, "Single dropping rate");
  if (has({"sweep", "variance", "entropy", "regcheck"}, cmd))
    a.add_option("--rates", c.rates, "Dropping-rate grid (comma list)")->delimiter(',')->capture_default_str();
  if (cmd == "train") a.add_flag("--nodewise", c.nodewise, "Per-node dropmessage rates at the diversity bound");
  if (has({"robustness", "rewire"}, cmd))
    a.add_option("--ratios", c.ratios, "Edge perturbation ratios")->delimiter(',')->capture_default_str();
  if (cmd == "oversmooth") {
    a.add_option("--depths", c.depths, "GCN depths")->delimiter(',')->capture_default_str();
    a.add_option("--near-max", c.near_max, "Largest hop distance of a near pair")->capture_default_str();
    a.add_option("--far-min", c.far_min, "Smallest hop distance of a far pair")->capture_default_str();
  }
  if (cmd == "diversity") {
    a.add_option("--avg-center", c.avg_center, "Center of the AVG arm rates; nan selects the mean nodewise bound")
        ->capture_default_str();
    a.add_option("--avg-spread", c.avg_spread, "Half-width of the AVG arm noise")->capture_default_str();
  }
  if (cmd == "gen") {
    a.add_option("--kind", c.kind, "sbm | regular")->capture_default_str();
    a.add_option("--blocks", c.blocks)->capture_default_str();
    a.add_option("--p-in", c.p_in)->capture_default_str();
    a.add_option("--p-out", c.p_out)->capture_default_str();
    a.add_option("--noise", c.noise, "Feature noise standard deviation")->capture_default_str();
  }
  if (has({"gen", "variance"}, cmd)) {
    a.add_option("--n", c.n, "Node count")->capture_default_str();
    a.add_option("--dim", c.dim, "Feature dimension")->capture_default_str();
    a.add_option("--degree", c.degree, "Degree of the regular graph")->capture_default_str();
  }
  if (has({"variance", "regcheck"}, cmd)) a.add_option("--trials", c.trials)->capture_default_str();
  if (cmd == "entropy") {
    a.add_option("--p", c.p, "Message-type proportions")->delimiter(',')->capture_default_str();
    a.add_option("--senders", c.senders, "Sender count per type")->delimiter(',')->capture_default_str();
    a.add_option("--deliveries", c.deliveries, "Delivery count per type")->delimiter(',')->capture_default_str();
    a.add_option("--msg-dim", c.msg_dim, "Message dimension")->capture_default_str();
  }
  if (cmd == "regcheck") {
    a.add_option("--weight", c.weight, "Weight magnitude of the fixture")->capture_default_str();
    a.add_option("--var-source", c.var_source, "mc | closed_form")->capture_default_str();
  }
}

ExperimentConfig resolve(Subcommand& s) {
  ExperimentConfig cfg;
  if (!s.config_file.empty()) {
    for (const CLI::Option* opt : s.app->get_options()) {
      const std::string name = opt->get_name();
      if (opt->count() == 0 || name == "--out" || name == "--jobs" || name == "--config" || name == "--help") continue;
      throw std::invalid_argument(name + " cannot be combined with --config");
    }
    std::ifstream in(s.config_file, std::ios::binary);
    if (!in) throw std::invalid_argument("cannot read " + s.config_file);
    std::stringstream text;
    text << in.rdbuf();
    cfg = ExperimentConfig::from_json(text.str());
    if (cfg.command != s.cfg.command)
      throw std::invalid_argument(s.config_file + " is a '" + cfg.command + "' config, not '" + s.cfg.command + "'");
  } else {
    cfg = s.cfg;
    if (s.rate) cfg.rates = {*s.rate};
  }
  if (const char* env = std::getenv("DROPLAB_SEED"); env && *env) {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(env, &used);
    if (used != std::string(env).size()) throw std::invalid_argument("DROPLAB_SEED must be an unsigned integer");
    cfg.seed = v;
  }
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"droplab: random dropping on message matrices of graph neural networks"};
  app.require_subcommand(1);
  std::vector<std::unique_ptr<Subcommand>> subs;
  const std::pair<std::string_view, const char*> help[] = {
      {"gen", "Generate a synthetic dataset (sbm | regular)"},
      {"train", "Train one configuration over --seeds runs"},
      {"sweep", "Dropping-rate grid per method"},
      {"robustness", "Accuracy under randomly added edges"},
      {"rewire", "Accuracy under removed-then-added edges"},
      {"oversmooth", "MADGap and accuracy versus depth"},
      {"variance", "Sample variance: Monte Carlo versus closed form"},
      {"entropy", "Expected message entropy per method"},
      {"regcheck", "Second-order regularization identity"},
      {"diversity", "Nodewise versus average dropmessage rates"},
  };
  for (const auto& [name, text] : help) {
    auto s = std::make_unique<Subcommand>();
    s->cfg = ExperimentConfig::defaults(name);
    s->app = app.add_subcommand(std::string(name), text);
    add_options(*s);
    subs.push_back(std::move(s));
  }
  CLI11_PARSE(app, argc, argv);

  for (auto& s : subs) {
    if (!s->app->parsed()) continue;
    try {
      const ExperimentConfig cfg = resolve(*s);
      droplab::run_experiment(cfg, s->out, s->jobs, std::cerr);
    } catch (const std::exception& e) {
      std::cerr << "droplab " << s->cfg.command << ": error: " << e.what() << '\n';
      return 1;
    }
  }
  return 0;
}
