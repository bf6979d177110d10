#include "droplab/models.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "droplab/rng.hpp"

namespace droplab {

std::string_view to_string(ModelKind m) { return m == ModelKind::kAppnp ? "appnp" : "gcn"; }

std::optional<ModelKind> parse_model_kind(std::string_view s) {
  if (s == "gcn") return ModelKind::kGcn;
  if (s == "appnp") return ModelKind::kAppnp;
  return std::nullopt;
}

std::string_view to_string(Placement p) { return p == Placement::kInput ? "input" : "message"; }

std::optional<Placement> parse_placement(std::string_view s) {
  if (s == "message") return Placement::kMessage;
  if (s == "input") return Placement::kInput;
  return std::nullopt;
}

void ModelShape::validate() const {
  if (in_dim == 0 || classes == 0) throw std::invalid_argument("model needs positive input and class dimensions");
  if (kind == ModelKind::kGcn) {
    if (layers == 0) throw std::invalid_argument("gcn needs at least one layer");
    if (layers > 1 && hidden == 0) throw std::invalid_argument("gcn hidden size must be positive");
  } else {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("appnp alpha must lie in (0, 1]");
    if (k_steps == 0) throw std::invalid_argument("appnp needs K >= 1 propagation steps");
  }
}

std::vector<Parameter> init_parameters(const ModelShape& shape, std::uint64_t seed) {
  shape.validate();
  std::vector<Parameter> params;
  if (shape.kind == ModelKind::kAppnp) {
    params.push_back({"W", glorot_init(shape.in_dim, shape.classes, derive_seed(seed, "init", 0))});
    return params;
  }
  for (std::size_t l = 0; l < shape.layers; ++l) {
    const std::size_t in = l == 0 ? shape.in_dim : shape.hidden;
    const std::size_t out = l + 1 == shape.layers ? shape.classes : shape.hidden;
    params.push_back({"W" + std::to_string(l), glorot_init(in, out, derive_seed(seed, "init", l))});
    params.push_back({"b" + std::to_string(l), Tensor(1, out)});
  }
  return params;
}

std::uint64_t Perturbation::layer_stream(std::size_t layer) const {
  return derive_seed(spec.stream, "mask", layer, epoch);
}

namespace {

bool active(const Perturbation* p) { return p != nullptr && p->spec.kind != DropKind::kNone; }

// Mask for the message matrix of layer `layer`, or nullopt when that layer
// is left untouched.
std::optional<DropMask> layer_mask(const Perturbation* p, const MessageLayout& layout, std::size_t cols,
                                   std::size_t layer) {
  if (!active(p)) return std::nullopt;
  if (p->placement == Placement::kMessage) {
    Rng rng(p->layer_stream(layer));
    return sample_mask(p->spec, layout, cols, rng);
  }
  if (p->spec.kind == DropKind::kDropEdge) {
    // Same edge draw in every layer: the edges are removed from the input graph.
    Rng rng(p->layer_stream(0));
    return sample_mask(p->spec, layout, cols, rng);
  }
  return std::nullopt;
}

Var perturb_input(Tape& tape, const Tensor& x, const Perturbation* p) {
  Var h = tape.constant(x);
  if (!active(p) || p->placement != Placement::kInput || p->spec.kind == DropKind::kDropEdge) return h;
  Rng rng(p->layer_stream(0));
  return hadamard_const(h, sample_input_factor(p->spec.kind, p->spec.rate, x.rows, x.cols, rng));
}

Var propagate(const MessageLayout& layout, Var h, const Perturbation* p, std::size_t layer) {
  MessageFrame frame = build_messages(layout, h);
  if (auto mask = layer_mask(p, layout, h.cols(), layer)) frame = apply_mask(frame, *mask);
  return aggregate(frame);
}

}  // namespace

ForwardResult forward(Tape& tape, const ModelShape& shape, const MessageLayout& layout, const Tensor& x,
                      std::span<const Var> params, const Perturbation* perturb) {
  if (x.rows != layout.n || x.cols != shape.in_dim)
    throw std::invalid_argument("forward: features " + x.shape_str() + " do not match " +
                                std::to_string(layout.n) + " nodes x " + std::to_string(shape.in_dim));
  Var h = perturb_input(tape, x, perturb);

  if (shape.kind == ModelKind::kAppnp) {
    if (params.size() != 1) throw std::invalid_argument("forward: appnp expects one parameter");
    const Var h0 = matmul(h, params[0]);
    Var z = h0;
    for (std::size_t t = 0; t < shape.k_steps; ++t)
      z = add(scale(propagate(layout, z, perturb, t), 1.0 - shape.alpha), scale(h0, shape.alpha));
    return {z, z};
  }

  if (params.size() != 2 * shape.layers) throw std::invalid_argument("forward: gcn parameter count mismatch");
  Var last_hidden = h;
  for (std::size_t l = 0; l < shape.layers; ++l) {
    last_hidden = h;
    Var z = add_rowvec(matmul(propagate(layout, h, perturb, l), params[2 * l]), params[2 * l + 1]);
    h = l + 1 < shape.layers ? relu(z) : z;
  }
  return {h, last_hidden};
}

Tensor predict(const ModelShape& shape, const MessageLayout& layout, const Tensor& x,
               std::span<const Parameter> params, Tensor* last_hidden) {
  Tape tape;
  std::vector<Var> vars;
  for (const auto& p : params) vars.push_back(tape.constant(p.value));
  const ForwardResult out = forward(tape, shape, layout, x, vars, nullptr);
  if (last_hidden) *last_hidden = out.last_hidden.value();
  return out.logits.value();
}

namespace {

std::size_t argmax_row(const Tensor& t, std::size_t i) {
  const double* r = t.row(i);
  return static_cast<std::size_t>(std::max_element(r, r + t.cols) - r);
}

double mean_ce(const Tensor& logits, std::span<const int> labels, std::span<const std::uint8_t> mask) {
  double loss = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < logits.rows; ++i) {
    if (!mask[i]) continue;
    const double* r = logits.row(i);
    const double mx = *std::max_element(r, r + logits.cols);
    double se = 0.0;
    for (std::size_t c = 0; c < logits.cols; ++c) se += std::exp(r[c] - mx);
    loss += mx + std::log(se) - r[labels[i]];
    ++count;
  }
  return loss / static_cast<double>(count);
}

}  // namespace

double evaluate(const Tensor& logits, std::span<const int> labels, std::span<const std::uint8_t> mask,
                Metric metric) {
  if (labels.size() != logits.rows || mask.size() != logits.rows)
    throw std::invalid_argument("evaluate: label/mask length does not match logits rows");
  const std::size_t classes = logits.cols;
  std::vector<std::size_t> tp(classes), fp(classes), fn(classes);
  std::size_t count = 0, correct = 0;
  for (std::size_t i = 0; i < logits.rows; ++i) {
    if (!mask[i]) continue;
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= classes)
      throw std::invalid_argument("evaluate: invalid label " + std::to_string(y) + " on node " + std::to_string(i));
    const std::size_t pred = argmax_row(logits, i);
    ++count;
    if (pred == static_cast<std::size_t>(y)) {
      ++correct;
      ++tp[pred];
    } else {
      ++fp[pred];
      ++fn[static_cast<std::size_t>(y)];
    }
  }
  if (count == 0) throw std::invalid_argument("evaluate: empty mask");
  if (metric == Metric::kAccuracy) return static_cast<double>(correct) / static_cast<double>(count);
  double f1_sum = 0.0;
  for (std::size_t c = 0; c < classes; ++c) {
    const double denom = static_cast<double>(2 * tp[c] + fp[c] + fn[c]);
    if (tp[c] > 0) f1_sum += 2.0 * static_cast<double>(tp[c]) / denom;
  }
  return f1_sum / static_cast<double>(classes);
}

void TrainConfig::validate(std::size_t n) const {
  if (lr <= 0.0 || !std::isfinite(lr)) throw std::invalid_argument("learning rate must be positive");
  if (weight_decay < 0.0) throw std::invalid_argument("weight decay must be non-negative");
  drop.validate(n);
  if (placement == Placement::kInput && drop.kind == DropKind::kDropMessage)
    throw std::invalid_argument("placement=input is only defined for dropout, dropedge and dropnode");
}

namespace {

ModelShape shape_for(const Graph& g, const TrainConfig& cfg) {
  ModelShape s;
  s.kind = cfg.model;
  s.in_dim = g.feature_dim();
  s.hidden = cfg.hidden;
  s.classes = g.num_classes();
  s.layers = cfg.layers;
  s.alpha = cfg.alpha;
  s.k_steps = cfg.k_steps;
  return s;
}

std::size_t require_nonempty(const std::vector<std::uint8_t>& mask, Split s) {
  const auto c = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1));
  if (c == 0) throw std::invalid_argument("train: empty " + std::string(to_string(s)) + " split");
  return c;
}

}  // namespace

RunReport train(const Graph& g, const TrainConfig& cfg) {
  if (!g.features) throw std::invalid_argument("train: graph has no features");
  if (g.labels.size() != g.n || g.split.size() != g.n)
    throw std::invalid_argument("train: graph needs labels and splits for every node");
  cfg.validate(g.n);
  const ModelShape shape = shape_for(g, cfg);
  shape.validate();

  const Graph looped = add_self_loops(g);
  const MessageLayout layout = MessageLayout::normalized(looped);
  const Tensor& x = *g.features;
  const auto train_mask = g.split_mask(Split::kTrain);
  const auto val_mask = g.split_mask(Split::kVal);
  const auto test_mask = g.split_mask(Split::kTest);
  require_nonempty(train_mask, Split::kTrain);
  require_nonempty(val_mask, Split::kVal);
  require_nonempty(test_mask, Split::kTest);

  std::vector<Parameter> params = init_parameters(shape, derive_seed(cfg.seed, "init"));
  AdamState adam;
  const AdamConfig acfg{cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay};
  Perturbation perturb{cfg.drop, cfg.placement, 0};
  perturb.spec.stream = derive_seed(cfg.seed, "drop");

  RunReport report;
  Tensor best_logits;
  auto record = [&](std::size_t epoch, double train_loss) {
    Tensor hidden;
    Tensor logits = predict(shape, layout, x, params, &hidden);
    EpochRecord r{epoch, train_loss, evaluate(logits, g.labels, train_mask, Metric::kAccuracy),
                  evaluate(logits, g.labels, val_mask, Metric::kAccuracy),
                  evaluate(logits, g.labels, test_mask, Metric::kAccuracy)};
    if (epoch == 0) r.train_loss = mean_ce(logits, g.labels, train_mask);
    if (report.epochs.empty() || r.val_acc > report.best_val_acc) {
      report.best_epoch = epoch;
      report.best_val_acc = r.val_acc;
      report.test_acc = r.test_acc;
      best_logits = logits;
    }
    report.epochs.push_back(r);
    report.final_logits = std::move(logits);
    report.final_hidden = std::move(hidden);
  };

  record(0, 0.0);
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Tape tape;
    std::vector<Var> vars;
    vars.reserve(params.size());
    for (const auto& p : params) vars.push_back(tape.variable(p.value));
    perturb.epoch = epoch;
    const ForwardResult out = forward(tape, shape, layout, x, vars, &perturb);
    const Var loss = masked_softmax_ce(out.logits, g.labels, train_mask);
    const double loss_value = loss.value().data[0];
    if (!std::isfinite(loss_value)) throw TrainingDiverged(epoch);
    tape.backward(loss);
    std::vector<Tensor> grads;
    grads.reserve(vars.size());
    for (const Var& v : vars) grads.push_back(v.grad());
    try {
      adam_step(params, grads, adam, acfg);
    } catch (const NonFiniteGradient&) {
      throw TrainingDiverged(epoch);
    }
    record(epoch, loss_value);
  }
  report.test_macro_f1 = evaluate(best_logits, g.labels, test_mask, Metric::kMacroF1);
  return report;
}

LossWithGrad training_loss(const ModelShape& shape, const MessageLayout& layout, const Tensor& x,
                           std::span<const int> labels, std::span<const std::uint8_t> train_mask,
                           std::optional<Perturbation> perturb) {
  return [shape, &layout, x, y = std::vector<int>(labels.begin(), labels.end()),
          m = std::vector<std::uint8_t>(train_mask.begin(), train_mask.end()),
          perturb](const std::vector<Tensor>& params, std::vector<Tensor>* grads) {
    Tape tape;
    std::vector<Var> vars;
    for (const auto& p : params) vars.push_back(tape.variable(p));
    const ForwardResult out = forward(tape, shape, layout, x, vars, perturb ? &*perturb : nullptr);
    const Var loss = masked_softmax_ce(out.logits, y, m);
    if (grads) {
      tape.backward(loss);
      grads->clear();
      for (const Var& v : vars) grads->push_back(v.grad());
    }
    return loss.value().data[0];
  };
}

}  // namespace droplab
