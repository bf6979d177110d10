#include "droplab/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <charconv>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <functional>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "droplab/dataset.hpp"
#include "droplab/rng.hpp"
#include "droplab/stats.hpp"
#include "droplab/theory.hpp"

namespace droplab {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

bool is_command(std::string_view s) {
  return std::find(std::begin(kCommands), std::end(kCommands), s) != std::end(kCommands);
}

namespace {

const std::vector<std::string> kAllDrops = {"none", "dropout", "dropedge", "dropnode", "dropmessage"};
const std::vector<std::string> kDroppers = {"dropout", "dropedge", "dropnode", "dropmessage"};

std::vector<double> grid(int from, int to, double step_den) {
  std::vector<double> g;
  for (int i = from; i <= to; ++i) g.push_back(i / step_den);
  return g;
}

bool training_command(std::string_view c) {
  return c == "train" || c == "sweep" || c == "robustness" || c == "rewire" || c == "oversmooth" || c == "diversity";
}

// One config key: the commands it belongs to and its JSON conversions.
struct Field {
  std::string name;
  std::vector<std::string_view> commands;  // empty: every command
  std::function<json(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const json&)> set;

  bool applies(std::string_view c) const {
    if (commands.empty()) return true;
    if (std::find(commands.begin(), commands.end(), c) != commands.end()) return true;
    return std::find(commands.begin(), commands.end(), "*train") != commands.end() && training_command(c);
  }
};

template <typename T>
Field field(std::string name, std::vector<std::string_view> commands, T ExperimentConfig::*member) {
  return Field{std::move(name), std::move(commands),
               [member](const ExperimentConfig& c) { return json(c.*member); },
               [member](ExperimentConfig& c, const json& j) { c.*member = j.get<T>(); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> f = [] {
    using C = ExperimentConfig;
    std::vector<Field> v;
    v.push_back(field("seed", {}, &C::seed));
    v.push_back(field("data", {"*train"}, &C::data));
    v.push_back(field("model", {"*train"}, &C::model));
    v.push_back(field("drops", {"train", "sweep", "robustness", "rewire", "oversmooth", "variance", "regcheck"},
                      &C::drops));
    v.push_back(field("rate", {"train", "robustness", "rewire", "oversmooth"}, &C::rate));
    v.push_back(field("rates", {"sweep", "variance", "entropy", "regcheck"}, &C::rates));
    v.push_back(field("nodewise", {"train"}, &C::nodewise));
    v.push_back(field("placement", {"*train"}, &C::placement));
    v.push_back(field("epochs", {"*train"}, &C::epochs));
    v.push_back(field("lr", {"*train"}, &C::lr));
    v.push_back(field("weight_decay", {"*train"}, &C::weight_decay));
    v.push_back(field("hidden", {"*train"}, &C::hidden));
    v.push_back(field("layers", {"train", "sweep", "robustness", "rewire", "diversity"}, &C::layers));
    v.push_back(field("alpha", {"*train"}, &C::alpha));
    v.push_back(field("k_steps", {"*train"}, &C::k_steps));
    v.push_back(field("seeds", {"*train"}, &C::seeds));
    v.push_back(field("ratios", {"robustness", "rewire"}, &C::ratios));
    v.push_back(field("depths", {"oversmooth"}, &C::depths));
    v.push_back(field("near_max", {"oversmooth"}, &C::near_max));
    v.push_back(field("far_min", {"oversmooth"}, &C::far_min));
    v.push_back(Field{"avg_center",
                      {"diversity"},
                      [](const C& c) { return std::isnan(c.avg_center) ? json(nullptr) : json(c.avg_center); },
                      [](C& c, const json& j) {
                        c.avg_center = j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
                      }});
    v.push_back(field("avg_spread", {"diversity"}, &C::avg_spread));
    v.push_back(field("kind", {"gen"}, &C::kind));
    v.push_back(field("n", {"gen", "variance"}, &C::n));
    v.push_back(field("blocks", {"gen"}, &C::blocks));
    v.push_back(field("p_in", {"gen"}, &C::p_in));
    v.push_back(field("p_out", {"gen"}, &C::p_out));
    v.push_back(field("dim", {"gen", "variance"}, &C::dim));
    v.push_back(field("noise", {"gen"}, &C::noise));
    v.push_back(field("degree", {"gen", "variance"}, &C::degree));
    v.push_back(field("trials", {"variance", "regcheck"}, &C::trials));
    v.push_back(field("p", {"entropy"}, &C::p));
    v.push_back(field("senders", {"entropy"}, &C::senders));
    v.push_back(field("deliveries", {"entropy"}, &C::deliveries));
    v.push_back(field("msg_dim", {"entropy"}, &C::msg_dim));
    v.push_back(field("weight", {"regcheck"}, &C::weight));
    v.push_back(field("var_source", {"regcheck"}, &C::var_source));
    return v;
  }();
  return f;
}

DropKind drop_kind(const std::string& s) {
  const auto k = parse_drop_kind(s);
  if (!k) throw std::invalid_argument("unknown drop method '" + s + "'");
  return *k;
}

void check_unit_rate(double r, const std::string& what) {
  if (!(r >= 0.0 && r < 1.0)) throw std::invalid_argument(what + " must lie in [0, 1)");
}

}  // namespace

ExperimentConfig ExperimentConfig::defaults(std::string_view command) {
  if (!is_command(command)) throw std::invalid_argument("unknown command '" + std::string(command) + "'");
  ExperimentConfig c;
  c.command = std::string(command);
  if (command == "train") c.drops = {"none"};
  if (command == "sweep") {
    c.drops = kDroppers;
    c.rates = grid(1, 19, 20.0);
  }
  if (command == "robustness" || command == "rewire") {
    c.drops = kAllDrops;
    c.ratios = {0.0, 0.1, 0.2, 0.3};
  }
  if (command == "oversmooth") {
    c.drops = kAllDrops;
    c.depths = {1, 2, 3, 4, 5, 6, 7, 8};
  }
  if (command == "variance") {
    c.drops = kDroppers;
    c.rates = {0.5};
    c.n = 100;
    c.dim = 8;
    c.degree = 4;
  }
  if (command == "entropy") {
    c.p = {0.25, 0.25, 0.25, 0.25};
    c.senders = {2, 2, 2, 2};
    c.deliveries = {8, 8, 8, 8};
    c.rates = grid(1, 9, 10.0);
  }
  if (command == "regcheck") {
    c.drops = kDroppers;
    c.rates = {0.1};
  }
  return c;
}

ExperimentConfig ExperimentConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  if (!j.is_object() || !j.contains("command") || !j["command"].is_string())
    throw std::invalid_argument("config: missing \"command\"");
  ExperimentConfig c = defaults(j["command"].get<std::string>());
  for (const auto& [key, value] : j.items()) {
    if (key == "command") continue;
    if (key == "generator") {
      if (value != std::string(kGeneratorName))
        throw std::invalid_argument("config: generator '" + value.dump() + "' is not " + std::string(kGeneratorName));
      continue;
    }
    const auto& fs_ = fields();
    const auto it = std::find_if(fs_.begin(), fs_.end(), [&](const Field& f) { return f.name == key; });
    if (it == fs_.end() || !it->applies(c.command))
      throw std::invalid_argument("config: key '" + key + "' does not apply to '" + c.command + "'");
    try {
      it->set(c, value);
    } catch (const json::exception& e) {
      throw std::invalid_argument("config: bad value for '" + key + "': " + e.what());
    }
  }
  c.validate();
  return c;
}

std::string ExperimentConfig::to_json() const {
  json j;
  j["command"] = command;
  j["generator"] = std::string(kGeneratorName);
  for (const auto& f : fields())
    if (f.applies(command)) j[f.name] = f.get(*this);
  return j.dump(2) + "\n";
}

void ExperimentConfig::validate() const {
  if (!is_command(command)) throw std::invalid_argument("unknown command '" + command + "'");
  if (training_command(command)) {
    if (data.empty()) throw std::invalid_argument(command + ": --data is required");
    if (!parse_model_kind(model)) throw std::invalid_argument("unknown model '" + model + "'");
    if (!parse_placement(placement)) throw std::invalid_argument("unknown placement '" + placement + "'");
    if (seeds == 0) throw std::invalid_argument("--seeds must be at least 1");
    if (!(lr > 0.0)) throw std::invalid_argument("--lr must be positive");
    if (!(weight_decay >= 0.0)) throw std::invalid_argument("--weight-decay must be non-negative");
    if (layers == 0) throw std::invalid_argument("--layers must be at least 1");
    if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in (0, 1]");
    if (k_steps == 0) throw std::invalid_argument("k_steps must be at least 1");
  }
  for (const auto& d : drops) {
    const DropKind k = drop_kind(d);
    if (placement == "input" && k == DropKind::kDropMessage && training_command(command))
      throw std::invalid_argument("placement=input is only defined for dropout, dropedge and dropnode");
  }
  if (command == "train" && drops.size() != 1) throw std::invalid_argument("train takes exactly one --drop method");
  if (nodewise && (drops.size() != 1 || drops[0] != "dropmessage"))
    throw std::invalid_argument("--nodewise requires --drop dropmessage");
  if (command == "train" || command == "robustness" || command == "rewire" || command == "oversmooth")
    check_unit_rate(rate, "--rate");
  for (double r : rates) check_unit_rate(r, "every rate");
  for (double r : ratios)
    if (!(r >= 0.0)) throw std::invalid_argument("perturbation ratios must be non-negative");
  for (std::size_t d : depths)
    if (d == 0) throw std::invalid_argument("depths must be at least 1");
  if (command == "variance" || command == "regcheck") {
    if (drops.empty()) throw std::invalid_argument(command + ": no drop methods");
    if (rates.empty()) throw std::invalid_argument(command + ": no rates");
  }
  if (command == "variance" && trials < 2) throw std::invalid_argument("--trials must be at least 2");
  if (command == "regcheck") {
    if (trials < 100) throw std::invalid_argument("--trials must be at least 100");
    if (var_source != "mc" && var_source != "closed_form")
      throw std::invalid_argument("--var-source must be mc or closed_form");
  }
  if (command == "gen" && kind != "sbm" && kind != "regular") throw std::invalid_argument("--kind must be sbm or regular");
  if (command == "diversity") {
    if (!std::isnan(avg_center)) check_unit_rate(avg_center, "--avg-center");
    if (!(avg_spread >= 0.0)) throw std::invalid_argument("--avg-spread must be non-negative");
  }
}

TrainConfig ExperimentConfig::train_config(DropKind drop, double drop_rate, std::uint64_t run_seed) const {
  TrainConfig t;
  t.model = *parse_model_kind(model);
  t.epochs = epochs;
  t.lr = lr;
  t.weight_decay = weight_decay;
  t.hidden = hidden;
  t.layers = layers;
  t.alpha = alpha;
  t.k_steps = k_steps;
  t.drop.kind = drop;
  t.drop.rate = drop == DropKind::kNone ? 0.0 : drop_rate;
  t.placement = *parse_placement(placement);
  if (drop == DropKind::kDropMessage) t.placement = Placement::kMessage;
  t.seed = run_seed;
  return t;
}

std::uint64_t trial_seed(std::uint64_t root, std::size_t trial) { return derive_seed(root, "trial", trial); }

double StudyCell::mean_test_acc() const {
  std::vector<double> v;
  for (const auto& t : trials) v.push_back(t.test_acc);
  return mean(v);
}
double StudyCell::std_test_acc() const {
  std::vector<double> v;
  for (const auto& t : trials) v.push_back(t.test_acc);
  return sample_std(v);
}
double StudyCell::mean_madgap() const {
  std::vector<double> v;
  for (const auto& t : trials) v.push_back(t.madgap);
  return mean(v);
}
double StudyCell::std_madgap() const {
  std::vector<double> v;
  for (const auto& t : trials) v.push_back(t.madgap);
  return sample_std(v);
}

void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, count));
  if (jobs == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(count);
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < jobs; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

namespace {

TrialResult summarize(const RunReport& r, std::uint64_t seed, double mean_rate) {
  TrialResult t;
  t.seed = seed;
  t.best_epoch = r.best_epoch;
  t.val_acc = r.best_val_acc;
  t.test_acc = r.test_acc;
  t.test_macro_f1 = r.test_macro_f1;
  t.mean_rate = mean_rate;
  return t;
}

// Runs every (cell, trial) pair; `run` fills one TrialResult.
void run_cells(std::vector<StudyCell>& cells, std::size_t seeds, std::size_t jobs,
               const std::function<TrialResult(const StudyCell&, std::size_t)>& run) {
  for (auto& c : cells) c.trials.assign(seeds, TrialResult{});
  parallel_for(cells.size() * seeds, jobs, [&](std::size_t task) {
    StudyCell& cell = cells[task / seeds];
    cell.trials[task % seeds] = run(cell, task % seeds);
  });
}

std::uint64_t bits(double x) { return std::bit_cast<std::uint64_t>(x); }

double mean_of(const std::vector<double>& v) { return mean(v); }

}  // namespace

std::vector<StudyCell> run_train_study(const Graph& g, const ExperimentConfig& cfg, std::size_t jobs,
                                       std::vector<RunReport>* reports) {
  const DropKind kind = drop_kind(cfg.drops.at(0));
  std::vector<double> node_rates;
  if (cfg.nodewise) node_rates = diversity_rate_bound(g, g.feature_dim());
  std::vector<StudyCell> cells(1);
  cells[0].method = cfg.drops[0];
  cells[0].rate = kind == DropKind::kNone ? 0.0 : cfg.rate;
  if (reports) reports->assign(cfg.seeds, RunReport{});
  run_cells(cells, cfg.seeds, jobs, [&](const StudyCell&, std::size_t i) {
    const std::uint64_t seed = trial_seed(cfg.seed, i);
    TrainConfig t = cfg.train_config(kind, cfg.rate, seed);
    t.drop.node_rates = node_rates;
    RunReport r = train(g, t);
    const TrialResult out = summarize(r, seed, node_rates.empty() ? t.drop.rate : mean_of(node_rates));
    if (reports) (*reports)[i] = std::move(r);
    return out;
  });
  return cells;
}

std::vector<StudyCell> run_sweep(const Graph& g, const ExperimentConfig& cfg, std::size_t jobs) {
  std::vector<StudyCell> cells;
  for (const auto& d : cfg.drops) {
    if (drop_kind(d) == DropKind::kNone) {
      cells.push_back(StudyCell{d, "", 0.0, 0.0, 0, {}});
      continue;
    }
    for (double r : cfg.rates) cells.push_back(StudyCell{d, "", r, 0.0, 0, {}});
  }
  run_cells(cells, cfg.seeds, jobs, [&](const StudyCell& c, std::size_t i) {
    const std::uint64_t seed = trial_seed(cfg.seed, i);
    return summarize(train(g, cfg.train_config(drop_kind(c.method), c.rate, seed)), seed, c.rate);
  });
  return cells;
}

std::vector<StudyCell> run_perturbation(const Graph& g, const ExperimentConfig& cfg, bool rewire_edges,
                                        std::size_t jobs) {
  std::vector<StudyCell> cells;
  for (const auto& d : cfg.drops)
    for (double ratio : cfg.ratios)
      cells.push_back(StudyCell{d, "", drop_kind(d) == DropKind::kNone ? 0.0 : cfg.rate, ratio, 0, {}});
  const std::string_view label = rewire_edges ? "rewire" : "add-edges";
  run_cells(cells, cfg.seeds, jobs, [&](const StudyCell& c, std::size_t i) {
    const std::uint64_t seed = trial_seed(cfg.seed, i);
    const TrainConfig t = cfg.train_config(drop_kind(c.method), c.rate, seed);
    if (c.ratio == 0.0) return summarize(train(g, t), seed, c.rate);
    // The perturbed graph depends only on (ratio, trial), so every method sees the same graph.
    const std::uint64_t gseed = derive_seed(cfg.seed, label, bits(c.ratio), i);
    const Graph pg = rewire_edges ? rewire(g, c.ratio, gseed) : perturb_add_edges(g, c.ratio, gseed);
    return summarize(train(pg, t), seed, c.rate);
  });
  return cells;
}

std::vector<StudyCell> run_oversmooth(const Graph& g, const ExperimentConfig& cfg, std::size_t jobs) {
  std::vector<StudyCell> cells;
  for (const auto& d : cfg.drops)
    for (std::size_t depth : cfg.depths)
      cells.push_back(StudyCell{d, "", drop_kind(d) == DropKind::kNone ? 0.0 : cfg.rate, 0.0, depth, {}});
  const PairClasses pairs = hop_distance_classes(g, cfg.near_max, cfg.far_min);
  run_cells(cells, cfg.seeds, jobs, [&](const StudyCell& c, std::size_t i) {
    const std::uint64_t seed = trial_seed(cfg.seed, i);
    TrainConfig t = cfg.train_config(drop_kind(c.method), c.rate, seed);
    t.layers = c.depth;
    const RunReport r = train(g, t);
    TrialResult out = summarize(r, seed, c.rate);
    out.madgap = madgap(r.final_hidden, pairs);
    return out;
  });
  return cells;
}

std::vector<StudyCell> run_diversity(const Graph& g, const ExperimentConfig& cfg, std::size_t jobs,
                                     std::ostream* warnings) {
  std::vector<std::size_t> isolated;
  const std::vector<double> bound = diversity_rate_bound(g, g.feature_dim(), &isolated);
  if (warnings && !isolated.empty())
    *warnings << "warning: " << isolated.size() << " isolated node(s) get rate 0 in the nodewise arm\n";
  const double center = std::isnan(cfg.avg_center) ? mean(bound) : cfg.avg_center;

  std::vector<StudyCell> cells = {StudyCell{"dropmessage", "NW", mean(bound), 0.0, 0, {}},
                                  StudyCell{"dropmessage", "AVG", center, 0.0, 0, {}}};
  run_cells(cells, cfg.seeds, jobs, [&](const StudyCell& c, std::size_t i) {
    const std::uint64_t seed = trial_seed(cfg.seed, i);
    TrainConfig t = cfg.train_config(DropKind::kDropMessage, 0.0, seed);
    if (c.arm == "NW") {
      t.drop.node_rates = bound;
    } else {
      Rng rng(derive_seed(cfg.seed, "avg-rates", i));
      t.drop.node_rates.resize(g.n);
      for (double& r : t.drop.node_rates)
        r = std::clamp(center + (2.0 * rng.uniform() - 1.0) * cfg.avg_spread, 0.0, 0.999);
    }
    return summarize(train(g, t), seed, mean(t.drop.node_rates));
  });
  return cells;
}

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

class Csv {
 public:
  Csv(const fs::path& file, std::initializer_list<std::string_view> header) : out_(file, std::ios::binary) {
    if (!out_) throw std::runtime_error("cannot write " + file.string());
    bool first = true;
    for (auto h : header) {
      if (!first) out_ << ',';
      out_ << h;
      first = false;
    }
    out_ << '\n';
  }
  template <typename... Ts>
  void row(const Ts&... xs) {
    bool first = true;
    ((out_ << (first ? "" : ",") << cell(xs), first = false), ...);
    out_ << '\n';
  }

 private:
  static std::string cell(double v) { return num(v); }
  static std::string cell(const std::string& s) { return s; }
  static std::string cell(const char* s) { return s; }
  static std::string cell(std::size_t v) { return std::to_string(v); }
  static std::string cell(bool b) { return b ? "1" : "0"; }
  std::ofstream out_;
};

void write_text(const fs::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << text;
}

void write_runs(const fs::path& file, const std::vector<StudyCell>& cells) {
  Csv csv(file, {"method", "arm", "rate", "ratio", "depth", "seed_index", "seed", "best_epoch", "val_acc", "test_acc",
                 "test_macro_f1", "madgap", "mean_rate"});
  for (const auto& c : cells)
    for (std::size_t i = 0; i < c.trials.size(); ++i) {
      const auto& t = c.trials[i];
      csv.row(c.method, c.arm, c.rate, c.ratio, c.depth, i, std::to_string(t.seed), t.best_epoch, t.val_acc,
              t.test_acc, t.test_macro_f1, t.madgap, t.mean_rate);
    }
}

Graph load_training_graph(const ExperimentConfig& cfg) {
  Graph g = load_dataset(cfg.data);
  if (!g.features) throw std::invalid_argument(cfg.data + ": dataset has no features.tsv");
  if (g.labels.empty() || g.split.empty()) throw std::invalid_argument(cfg.data + ": dataset needs labels and splits");
  return g;
}

void cmd_gen(const ExperimentConfig& cfg, const fs::path& out) {
  Graph g;
  if (cfg.kind == "sbm") {
    SbmParams p;
    p.n = cfg.n;
    p.num_blocks = cfg.blocks;
    p.p_in = cfg.p_in;
    p.p_out = cfg.p_out;
    p.feature_dim = cfg.dim;
    p.feature_noise_sigma = cfg.noise;
    g = make_sbm(p, cfg.seed);
  } else {
    g = make_regular_graph(cfg.n, cfg.degree, cfg.seed);
  }
  save_dataset(g, out);
}

void cmd_train(const ExperimentConfig& cfg, const fs::path& out, std::size_t jobs, std::ostream& log) {
  const Graph g = load_training_graph(cfg);
  std::vector<RunReport> reports;
  const auto cells = run_train_study(g, cfg, jobs, cfg.seeds > 0 ? &reports : nullptr);
  const StudyCell& cell = cells[0];

  // Per-epoch means over seeds (the values themselves for one seed).
  Csv metrics(out / "metrics.csv", {"epoch", "train_loss", "train_acc", "val_acc", "test_acc"});
  for (std::size_t e = 0; e < reports[0].epochs.size(); ++e) {
    std::vector<double> loss, tr, va, te;
    for (const auto& r : reports) {
      loss.push_back(r.epochs[e].train_loss);
      tr.push_back(r.epochs[e].train_acc);
      va.push_back(r.epochs[e].val_acc);
      te.push_back(r.epochs[e].test_acc);
    }
    metrics.row(e, mean(loss), mean(tr), mean(va), mean(te));
  }
  write_runs(out / "runs.csv", cells);

  json report;
  report["config"] = json::parse(cfg.to_json());
  report["runs"] = json::array();
  std::vector<double> f1;
  for (const auto& t : cell.trials) {
    report["runs"].push_back({{"seed", t.seed},
                              {"best_epoch", t.best_epoch},
                              {"val_acc", t.val_acc},
                              {"test_acc", t.test_acc},
                              {"test_macro_f1", t.test_macro_f1}});
    f1.push_back(t.test_macro_f1);
  }
  report["summary"] = {{"seeds", cell.trials.size()},
                       {"test_acc_mean", cell.mean_test_acc()},
                       {"test_acc_std", cell.std_test_acc()},
                       {"test_macro_f1_mean", mean(f1)},
                       {"test_macro_f1_std", sample_std(f1)},
                       {"mean_rate", cell.trials[0].mean_rate}};
  write_text(out / "report.json", report.dump(2) + "\n");
  log << "test accuracy " << num(cell.mean_test_acc()) << " +- " << num(cell.std_test_acc()) << " over "
      << cell.trials.size() << " seed(s)\n";
}

void cmd_sweep(const ExperimentConfig& cfg, const fs::path& out, std::size_t jobs) {
  const auto cells = run_sweep(load_training_graph(cfg), cfg, jobs);
  Csv csv(out / "sweep.csv", {"method", "rate", "test_acc_mean", "test_acc_std", "seeds"});
  for (const auto& c : cells) csv.row(c.method, c.rate, c.mean_test_acc(), c.std_test_acc(), c.trials.size());
  write_runs(out / "runs.csv", cells);
}

void cmd_perturb(const ExperimentConfig& cfg, const fs::path& out, std::size_t jobs, bool rewire_edges) {
  const auto cells = run_perturbation(load_training_graph(cfg), cfg, rewire_edges, jobs);
  Csv csv(out / (rewire_edges ? "rewire.csv" : "robustness.csv"),
          {"method", "rate", "ratio", "test_acc_mean", "test_acc_std", "seeds"});
  for (const auto& c : cells)
    csv.row(c.method, c.rate, c.ratio, c.mean_test_acc(), c.std_test_acc(), c.trials.size());
  write_runs(out / "runs.csv", cells);
}

void cmd_oversmooth(const ExperimentConfig& cfg, const fs::path& out, std::size_t jobs) {
  const auto cells = run_oversmooth(load_training_graph(cfg), cfg, jobs);
  Csv csv(out / "oversmooth.csv",
          {"method", "rate", "depth", "madgap_mean", "madgap_std", "test_acc_mean", "test_acc_std", "seeds"});
  for (const auto& c : cells)
    csv.row(c.method, c.rate, c.depth, c.mean_madgap(), c.std_madgap(), c.mean_test_acc(), c.std_test_acc(),
            c.trials.size());
  write_runs(out / "runs.csv", cells);
}

void cmd_diversity(const ExperimentConfig& cfg, const fs::path& out, std::size_t jobs, std::ostream& log) {
  const auto cells = run_diversity(load_training_graph(cfg), cfg, jobs, &log);
  Csv csv(out / "diversity.csv", {"arm", "mean_rate", "test_acc_mean", "test_acc_std", "seeds"});
  for (const auto& c : cells) {
    std::vector<double> rates;
    for (const auto& t : c.trials) rates.push_back(t.mean_rate);
    csv.row(c.arm, mean(rates), c.mean_test_acc(), c.std_test_acc(), c.trials.size());
  }
  write_runs(out / "runs.csv", cells);
}

void cmd_variance(const ExperimentConfig& cfg, const fs::path& out, std::size_t jobs) {
  const Graph g = make_regular_graph(cfg.n, cfg.degree, derive_seed(cfg.seed, "regular"));
  std::vector<std::pair<double, DropKind>> cells;
  for (double r : cfg.rates)
    for (const auto& d : cfg.drops) cells.emplace_back(r, drop_kind(d));
  std::vector<VarianceReport> reports(cells.size());
  parallel_for(cells.size(), jobs, [&](std::size_t i) {
    const auto [rate, kind] = cells[i];
    reports[i] = variance_monte_carlo(kind, g, cfg.dim, rate, cfg.trials,
                                      derive_seed(cfg.seed, "variance", static_cast<std::uint64_t>(kind), bits(rate)));
  });
  Csv csv(out / "variance.csv",
          {"method", "n", "c", "d", "delta", "closed_form", "mc_estimate", "mc_std_error", "trials", "z_score"});
  for (const auto& r : reports) {
    const double z = r.mc_std_error > 0.0 ? (r.mc_estimate - r.closed_form) / r.mc_std_error : 0.0;
    csv.row(std::string(to_string(r.method)), r.n, r.c, r.d, r.delta, r.closed_form, r.mc_estimate, r.mc_std_error,
            r.mc_trials, z);
  }
}

void cmd_entropy(const ExperimentConfig& cfg, const fs::path& out) {
  EntropyInputs in{cfg.p, cfg.senders, cfg.deliveries, cfg.msg_dim, 0.0};
  in.validate();
  Csv csv(out / "entropy.csv", {"delta", "clean", "dropout", "dropedge", "dropnode", "dropmessage", "dm_ge_dropout",
                                "dm_ge_dropedge", "dm_ge_dropnode", "all_ge_clean"});
  for (const auto& r : entropy_ordering_scan(in, cfg.rates))
    csv.row(r.delta, r.clean, r.dropout, r.dropedge, r.dropnode, r.dropmessage, r.dm_ge_dropout(),
            r.dm_ge_dropedge(), r.dm_ge_dropnode(), r.all_ge_clean());
}

void cmd_regcheck(const ExperimentConfig& cfg, const fs::path& out, std::size_t jobs) {
  const RegFixture fx = regularization_fixture(cfg.weight);
  const VarSource source = cfg.var_source == "closed_form" ? VarSource::kClosedForm : VarSource::kMonteCarlo;
  std::vector<std::pair<double, DropKind>> cells;
  for (double r : cfg.rates)
    for (const auto& d : cfg.drops) cells.emplace_back(r, drop_kind(d));
  std::vector<RegCheckReport> reports(cells.size());
  parallel_for(cells.size(), jobs, [&](std::size_t i) {
    const auto [rate, kind] = cells[i];
    const DropSpec spec{kind, rate, {}, 0};
    reports[i] = regularization_check(
        fx, spec, cfg.trials, derive_seed(cfg.seed, "regcheck", static_cast<std::uint64_t>(kind), bits(rate)), source);
  });
  Csv csv(out / "regcheck.csv",
          {"method", "delta", "trials", "var_source", "base_loss", "mc_expected_loss", "mc_std_error", "gap",
           "gap_std_error", "taylor_term", "residual", "residual_std_error", "relative_residual"});
  for (const auto& r : reports)
    csv.row(std::string(to_string(r.method)), r.delta, r.trials, std::string(to_string(r.var_source)), r.base_loss,
            r.mc_expected_loss, r.mc_std_error, r.gap, r.gap_std_error, r.taylor_term, r.residual,
            r.residual_std_error, r.relative_residual());
}

}  // namespace

void run_experiment(const ExperimentConfig& cfg, const fs::path& out, std::size_t jobs, std::ostream& log) {
  cfg.validate();
  fs::create_directories(out);
  write_text(out / "config.json", cfg.to_json());
  const auto start = std::chrono::steady_clock::now();
  const std::string& c = cfg.command;
  if (c == "gen") cmd_gen(cfg, out);
  else if (c == "train") cmd_train(cfg, out, jobs, log);
  else if (c == "sweep") cmd_sweep(cfg, out, jobs);
  else if (c == "robustness") cmd_perturb(cfg, out, jobs, false);
  else if (c == "rewire") cmd_perturb(cfg, out, jobs, true);
  else if (c == "oversmooth") cmd_oversmooth(cfg, out, jobs);
  else if (c == "variance") cmd_variance(cfg, out, jobs);
  else if (c == "entropy") cmd_entropy(cfg, out);
  else if (c == "regcheck") cmd_regcheck(cfg, out, jobs);
  else if (c == "diversity") cmd_diversity(cfg, out, jobs, log);
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
  log << c << ": wrote " << out.string() << " in " << num(elapsed.count()) << " s\n";
}

}  // namespace droplab
