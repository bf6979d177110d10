#pragma once

// GCN and APPNP backbones over the message matrix, plus training and
// evaluation. Every stochastic perturbation goes through the drop engine.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "droplab/drop.hpp"
#include "droplab/graph.hpp"
#include "droplab/optim.hpp"
#include "droplab/tape.hpp"
#include "droplab/tensor.hpp"

namespace droplab {

enum class ModelKind { kGcn, kAppnp };
std::string_view to_string(ModelKind m);
std::optional<ModelKind> parse_model_kind(std::string_view s);

/// Where the training-time perturbation is applied.
///   message  fresh mask on the message matrix of every layer / step
///   input    dropout and dropnode mask the feature matrix once; dropedge
///            drops the same edge set in every layer / step
enum class Placement { kMessage, kInput };
std::string_view to_string(Placement p);
std::optional<Placement> parse_placement(std::string_view s);

struct ModelShape {
  ModelKind kind = ModelKind::kGcn;
  std::size_t in_dim = 0;
  std::size_t hidden = 16;
  std::size_t classes = 0;
  std::size_t layers = 2;  // GCN only
  double alpha = 0.1;      // APPNP only
  std::size_t k_steps = 10;  // APPNP only

  void validate() const;
};

/// GCN: W0, b0, ..., W{L-1}, b{L-1}. APPNP: a single W (in_dim x classes).
std::vector<Parameter> init_parameters(const ModelShape& shape, std::uint64_t seed);

/// Training-time perturbation for one forward pass.
struct Perturbation {
  DropSpec spec;  // spec.stream is the root of the per-layer mask streams
  Placement placement = Placement::kMessage;
  std::uint64_t epoch = 0;

  /// Stream for layer (or propagation step) `layer`.
  std::uint64_t layer_stream(std::size_t layer) const;
};

struct ForwardResult {
  Var logits;
  Var last_hidden;  // GCN: input to the last layer; APPNP: the logits
};

/// Runs the model on a tape. `layout` must be the normalized layout of the
/// graph with self-loops. `perturb == nullptr` is the evaluation path.
ForwardResult forward(Tape& tape, const ModelShape& shape, const MessageLayout& layout, const Tensor& x,
                      std::span<const Var> params, const Perturbation* perturb);

/// Convenience: evaluation logits for fixed parameters.
Tensor predict(const ModelShape& shape, const MessageLayout& layout, const Tensor& x,
               std::span<const Parameter> params, Tensor* last_hidden = nullptr);

enum class Metric { kAccuracy, kMacroF1 };

/// Score of argmax(logits) over the masked rows. Throws on an empty mask.
double evaluate(const Tensor& logits, std::span<const int> labels, std::span<const std::uint8_t> mask,
                Metric metric);

struct TrainConfig {
  ModelKind model = ModelKind::kGcn;
  std::size_t epochs = 200;
  double lr = 0.005;
  double weight_decay = 5e-4;
  std::size_t hidden = 16;
  std::size_t layers = 2;
  double alpha = 0.1;
  std::size_t k_steps = 10;
  DropSpec drop;
  Placement placement = Placement::kMessage;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument on illegal combinations.
  void validate(std::size_t n) const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
  double test_acc = 0.0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct RunReport {
  std::vector<EpochRecord> epochs;  // epoch 0 is the initial evaluation
  std::size_t best_epoch = 0;       // earliest epoch with the highest val accuracy
  double best_val_acc = 0.0;
  double test_acc = 0.0;            // at best_epoch
  double test_macro_f1 = 0.0;       // at best_epoch
  Tensor final_logits;              // evaluation logits after the last epoch
  Tensor final_hidden;              // evaluation input to the last layer after the last epoch

  friend bool operator==(const RunReport&, const RunReport&) = default;
};

class TrainingDiverged : public std::runtime_error {
 public:
  explicit TrainingDiverged(std::size_t epoch)
      : std::runtime_error("non-finite training loss at epoch " + std::to_string(epoch)), epoch_(epoch) {}
  std::size_t epoch() const { return epoch_; }

 private:
  std::size_t epoch_;
};

/// Full-batch training with Adam on the train split. The graph must be
/// loop-free with features, labels and splits; self-loops are added here.
RunReport train(const Graph& g, const TrainConfig& cfg);

/// Mean-form softmax cross-entropy on the train split with a frozen
/// perturbation (or none), as a LossWithGrad for grad_check. `layout` is
/// held by reference and must outlive the returned function.
LossWithGrad training_loss(const ModelShape& shape, const MessageLayout& layout, const Tensor& x,
                           std::span<const int> labels, std::span<const std::uint8_t> train_mask,
                           std::optional<Perturbation> perturb);

}  // namespace droplab
