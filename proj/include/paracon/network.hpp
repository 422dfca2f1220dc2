#ifndef PARACON_NETWORK_HPP_
#define PARACON_NETWORK_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "paracon/matrix.hpp"

namespace paracon {

struct NetworkDims {
  std::size_t d_v = 0;
  std::size_t d_q = 0;
  std::size_t d_h = 64;
  std::size_t d_z = 128;
  std::size_t num_labels = 0;

  std::size_t input_dim() const { return d_v + d_q; }
  bool operator==(const NetworkDims&) const = default;
};

enum class ParamGroup { kEncoder = 0, kProjection = 1, kClassifier = 2 };

std::string_view to_string(ParamGroup group);

// Which parameter groups an optimizer step touches.
struct GroupMask {
  bool encoder = false;
  bool projection = false;
  bool classifier = false;

  bool contains(ParamGroup g) const;
  static GroupMask all() { return {true, true, true}; }
};

struct ParamTensor {
  std::string name;
  ParamGroup group = ParamGroup::kEncoder;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> value;
  std::vector<double> m;  // Adam first moment
  std::vector<double> v;  // Adam second moment

  bool operator==(const ParamTensor&) const = default;
};

// Encoder f: two tanh affine layers over concat(image_features, question).
// Projection g: affine, tanh, affine, then L2 normalization.
// Classifier f^c: one affine layer reading h.
class NetworkState {
 public:
  // Parameter slots, in storage order.
  enum Slot : std::size_t {
    kEncW1, kEncB1, kEncW2, kEncB2,
    kProjW1, kProjB1, kProjW2, kProjB2,
    kClsW, kClsB,
    kNumSlots
  };

  static NetworkState initialize(const NetworkDims& dims, std::uint64_t seed);
  static NetworkState zeros(const NetworkDims& dims);

  const NetworkDims& dims() const { return dims_; }
  std::int64_t iteration() const { return iteration_; }
  void set_iteration(std::int64_t it) { iteration_ = it; }

  std::vector<ParamTensor>& params() { return params_; }
  const std::vector<ParamTensor>& params() const { return params_; }
  ParamTensor& param(Slot s) { return params_[s]; }
  const ParamTensor& param(Slot s) const { return params_[s]; }

  std::size_t parameter_count() const;
  // FNV hash over the raw bytes of one group's values; used to detect changes.
  std::uint64_t group_hash(ParamGroup group) const;

  bool operator==(const NetworkState&) const = default;

 private:
  NetworkDims dims_;
  std::vector<ParamTensor> params_;
  std::int64_t iteration_ = 0;
};

struct ForwardCache {
  Matrix input;
  Matrix h1;      // first encoder layer activations
  Matrix h;       // joint representation
  Matrix g1;      // projection hidden activations
  Matrix proj;    // projection output before normalization
  std::vector<double> proj_norm;
  std::vector<std::uint8_t> proj_fallback;  // 1 where the safe-norm fallback fired
  Matrix z;
  Matrix logits;
};

// Below this norm the projection output is replaced by e_1.
inline constexpr double kSafeNormFloor = 1e-12;

// inputs: one row per sample, the concatenation of image features and the
// question embedding. Heads left out of `heads` are not computed and their
// cache entries stay empty; the encoder always runs.
ForwardCache forward(const NetworkState& state, const Matrix& inputs,
                     GroupMask heads = GroupMask::all());

// Parameter gradients laid out like NetworkState::params().
struct Gradients {
  std::vector<std::vector<double>> values;

  static Gradients zeros_like(const NetworkState& state);
  std::vector<double> flatten(ParamGroup group) const;
  std::vector<double> flatten_all() const;
  double norm() const;
};

// Backpropagates upstream gradients on z and/or logits. A null pointer means
// that head receives no gradient, so its parameters get exact zeros.
Gradients backward(const NetworkState& state, const ForwardCache& cache,
                   const Matrix* grad_z, const Matrix* grad_logits);

struct LrSchedule {
  double base_lr = 2e-4;
  double warmup_factor = 0.1;
  std::int64_t warmup_iters = 4266;
  double decay_factor = 0.2;
  std::vector<std::int64_t> decay_steps = {10665, 14931};

  static constexpr std::int64_t kReferenceIterations = 25000;

  void validate() const;
  // Same shape with every step count multiplied by total_iters / 25000.
  LrSchedule scaled_to(std::int64_t total_iters) const;
};

// Linear warmup from warmup_factor * base_lr to base_lr over warmup_iters,
// then one decay_factor multiplication per decay step passed.
double lr_at(std::int64_t iteration, const LrSchedule& schedule);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 0.25;  // global L2 norm; <= 0 disables clipping
};

// One bias-corrected Adam update; step is 1-based.
void adam_update(std::span<double> param, std::span<const double> grad, std::span<double> m,
                 std::span<double> v, double lr, std::int64_t step, const AdamConfig& cfg);

// Scales all gradients so their global L2 norm is at most max_norm. Returns
// the norm before clipping.
double clip_grad_norm(Gradients& grads, double max_norm);

// Clips, then applies Adam at lr_at(state.iteration()) to the groups in mask,
// then advances the iteration counter. Throws naming the parameter if any
// gradient is non-finite.
void apply_step(NetworkState& state, Gradients grads, const LrSchedule& schedule,
                const AdamConfig& cfg, GroupMask mask);

// backward() followed by apply_step() over the groups that received gradient.
void backward_and_step(NetworkState& state, const ForwardCache& cache, const Matrix* grad_z,
                       const Matrix* grad_logits, const LrSchedule& schedule,
                       const AdamConfig& cfg);

void save_checkpoint(std::ostream& out, const NetworkState& state);
NetworkState load_checkpoint(std::istream& in);
void save_checkpoint_file(const std::string& path, const NetworkState& state);
NetworkState load_checkpoint_file(const std::string& path);

}  // namespace paracon

#endif  // PARACON_NETWORK_HPP_
