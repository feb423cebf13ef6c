#pragma once

#include <array>
#include <string>
#include <vector>

#include "navpruner/navigator.hpp"
#include "navpruner/text_encoder.hpp"
#include "navpruner/world.hpp"

namespace navpruner {

// MLP scoring head over frozen hashed-text features: for each direction,
// logit = W2 . relu(W1 [u; z_k] + b1) + b2 with u the context embedding and
// z_k the sector text embedding. Weights are double precision.
struct RetrieverModel {
  EncoderConfig encoder_config;
  int hidden = 128;
  std::vector<double> w1;  // hidden x 2*dim, row-major
  std::vector<double> b1;  // hidden
  std::vector<double> w2;  // hidden
  double b2 = 0.0;

  int input_dim() const { return 2 * encoder_config.dim; }
  void check_shapes() const;  // throws DimensionMismatch
};

struct TrainingExample {
  std::string context;
  std::array<std::string, kNumSectors> direction_texts;  // "" where masked
  std::array<bool, kNumSectors> mask{};                  // true = non-empty
  int label = 0;  // sector containing the next reference viewpoint
};

struct DirectionScores {
  std::array<double, kNumSectors> logits{};  // -inf where masked
  std::array<bool, kNumSectors> mask{};
};

struct PruneSelection {
  std::vector<int> indices;  // ascending subset of 0..7
};

struct ModelGradients {
  std::vector<double> w1;
  std::vector<double> b1;
  std::vector<double> w2;
  double b2 = 0.0;
};

struct TrainingConfig {
  EncoderConfig encoder;
  int hidden = 128;
  int epochs = 10;
  int batch_size = 32;
  double learning_rate = 1e-3;  // the transformer-tuning preset 2e-5 also works
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Instruction plus the history scratchpad, newline separated.
std::string build_context(const std::string& instruction,
                          const History& history);

// Scores the 8 sectors of an observation; sectors with no navigable
// viewpoints are masked to -inf.
DirectionScores score_directions(const RetrieverModel& model,
                                 const std::string& context,
                                 const Observation& observation);

// Indices of the k largest unmasked logits; exact ties keep the lower
// sector index. Returns all unmasked indices when fewer than k exist.
PruneSelection select_topk(const DirectionScores& scores, int k = 5);

// Keeps the scene summary and the selected sectors in ascending index order.
PrunedObservation prune_observation(const Observation& observation,
                                    const PruneSelection& sel);

// Replays reference paths with oracle heading updates and emits one example
// per non-terminal step, labeled with the sector of the next viewpoint.
std::vector<TrainingExample> make_training_examples(
    const World& world, const std::vector<Episode>& episodes,
    int history_window = 5);

// Mean masked cross-entropy over the batch and exact gradients; the text
// encoder is frozen so gradients cover only the MLP head.
std::pair<double, ModelGradients> loss_and_grad(
    const RetrieverModel& model, const std::vector<TrainingExample>& batch);

struct TrainingRun {
  RetrieverModel model;
  std::vector<double> epoch_losses;  // per-epoch mean loss
};

// Xavier-uniform init, per-epoch shuffling, AdamW minibatch updates.
// Deterministic for a fixed (dataset, config, seed).
TrainingRun train_retriever(const std::vector<TrainingExample>& dataset,
                            const TrainingConfig& config, std::uint64_t seed);

// Model file: JSON with a version header and base64 little-endian float64
// parameter blobs; round-trips bit-exactly.
void save_model(const RetrieverModel& model, const std::string& path);
RetrieverModel load_model(const std::string& path);

// JSON-lines dump of training examples for offline inspection.
void save_training_examples(const std::vector<TrainingExample>& examples,
                            const std::string& path);

}  // namespace navpruner
