#ifndef PARACON_TRAINING_HPP_
#define PARACON_TRAINING_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "paracon/curation.hpp"
#include "paracon/data_model.hpp"
#include "paracon/losses.hpp"
#include "paracon/network.hpp"

namespace paracon {

enum class Scheme { kAlternate, kJoint, kPretrainFinetune };

std::string_view to_string(Scheme scheme);
Scheme parse_scheme(std::string_view name);

struct TrainPlan {
  Scheme scheme = Scheme::kAlternate;
  std::int64_t total_iters = 2000;
  std::int64_t n_ce = 4;          // alternate: every n_ce-th iteration is contrastive
  double beta = 0.5;              // joint: weight of the contrastive gradient
  std::int64_t n_pretrain = 0;    // pretrain-finetune: contrastive-only iterations
  std::int64_t n_finetune = 0;    // pretrain-finetune: cross-entropy iterations
  std::size_t n_references = 70;  // curated batch holds 6 * n_references samples
  std::size_t ce_batch_size = 420;
  NegativeWeights weights;
  ContrastiveConfig contrastive;
  LrSchedule schedule;
  AdamConfig adam;
  std::uint64_t seed = 0;
  std::int64_t eval_every = 0;  // 0: max(1, iterations / 20)
  std::size_t k_max = 4;

  void validate() const;
  // Optimizer steps the plan performs.
  std::int64_t iterations() const;
};

enum class LossKind { kCe, kSsc, kJoint };

std::string_view to_string(LossKind kind);

struct IterationRecord {
  std::int64_t iteration = 0;  // 1-based
  LossKind kind = LossKind::kCe;
  double loss = 0.0;
  double lr = 0.0;
  std::optional<double> grad_alignment;
};

struct EvalRecord {
  std::int64_t iteration = 0;
  double accuracy = 0.0;
  std::vector<double> consensus;  // CS(1..k_max)
};

struct RunLog {
  std::vector<IterationRecord> iterations;
  std::vector<EvalRecord> evals;
};

void write_run_log(std::ostream& out, const RunLog& log);
RunLog read_run_log(std::istream& in);

// Optional hooks. on_checkpoint fires at phase boundaries and at the end.
struct TrainHooks {
  const IndexedDataset* eval_set = nullptr;
  std::function<void(std::string_view tag, const NetworkState&)> on_checkpoint;
};

struct TrainResult {
  NetworkState state;
  RunLog log;
};

TrainResult train_alternate(const TrainPlan& plan, const IndexedDataset& idx, NetworkState state,
                            const TrainHooks& hooks = {});
TrainResult train_joint(const TrainPlan& plan, const IndexedDataset& idx, NetworkState state,
                        const TrainHooks& hooks = {});
TrainResult train_pretrain_finetune(const TrainPlan& plan, const IndexedDataset& idx,
                                    NetworkState state, const TrainHooks& hooks = {});
TrainResult train(const TrainPlan& plan, const IndexedDataset& idx, NetworkState state,
                  const TrainHooks& hooks = {});

// Loss kind of every alternate iteration 1..n: contrastive when i % n_ce == 0.
std::vector<LossKind> alternate_schedule(std::int64_t n, std::int64_t n_ce);

// Un-normalized dot product of two gradients of equal shape.
double grad_alignment(std::span<const double> grad_a, std::span<const double> grad_b);

// Building blocks shared by the schemes, exposed for verification.

// Row-wise concat(image_features, question_embedding).
Matrix gather_inputs(const IndexedDataset& idx, std::span<const SampleIndex> batch);

// Argmax of the classifier logits for every listed sample.
std::vector<int> predict_labels(const NetworkState& state, const IndexedDataset& idx,
                                std::span<const SampleIndex> samples);

struct LossGradients {
  double loss = 0.0;
  Gradients grads;
};

// Mean cross-entropy over the batch; gradients reach encoder and classifier.
LossGradients ce_gradients(const NetworkState& state, const IndexedDataset& idx,
                           std::span<const SampleIndex> batch);

// Scaled supervised contrastive loss over a curated batch; gradients reach
// encoder and projection.
LossGradients ssc_gradients(const NetworkState& state, const IndexedDataset& idx,
                            const CuratedBatch& batch, const ContrastiveConfig& cfg);

// beta * a + (1 - beta) * b, elementwise.
Gradients combine_gradients(const Gradients& ssc, const Gradients& ce, double beta);

// Random streams used by every scheme. Cross-entropy batches and curated
// batches draw from separate streams so schemes see identical CE batches for
// a given seed.
struct TrainStreams {
  Rng ce;
  Rng curation;

  explicit TrainStreams(std::uint64_t seed);
};

}  // namespace paracon

#endif  // PARACON_TRAINING_HPP_
