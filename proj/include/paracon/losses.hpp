#ifndef PARACON_LOSSES_HPP_
#define PARACON_LOSSES_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "paracon/matrix.hpp"

namespace paracon {

struct CrossEntropyResult {
  double loss = 0.0;
  std::vector<double> grad;  // d loss / d logits
};

// -log softmax(logits)[label], max-shift stabilized.
CrossEntropyResult cross_entropy(std::span<const double> logits, int label);

// In-batch positive structure. Entry (i, p) of paraphrase_mask is set when the
// two batch elements share a paraphrase group; positive_mask when they share
// an answer label. Both have a zero diagonal.
struct BatchRelations {
  std::size_t n = 0;
  std::vector<int> labels;
  std::vector<std::string> group_ids;
  std::vector<std::uint8_t> paraphrase_mask;
  std::vector<std::uint8_t> positive_mask;

  static BatchRelations build(std::vector<int> labels, std::vector<std::string> group_ids);

  bool paraphrase(std::size_t i, std::size_t p) const { return paraphrase_mask[i * n + p] != 0; }
  bool positive(std::size_t i, std::size_t p) const { return positive_mask[i * n + p] != 0; }
  std::size_t positive_count(std::size_t i) const;
};

enum class AlphaMode { kConstant, kDynamic };

std::string to_string(AlphaMode mode);
AlphaMode parse_alpha_mode(const std::string& name);

struct ContrastiveConfig {
  double tau = 0.1;
  double s = 20.0;
  AlphaMode alpha_mode = AlphaMode::kConstant;

  void validate() const;
};

// Whether contrastive losses insist on unit-norm inputs. Gradients always
// include the normalization inside the cosine similarity; kSkip exists so
// finite-difference probes may step off the sphere.
enum class NormCheck { kEnforce, kSkip };

struct ContrastiveResult {
  double loss = 0.0;
  Matrix grad;                     // d loss / d z, one row per batch element
  std::vector<double> per_sample;  // L^i / sum_p alpha_ip, zero without positives
};

// Pair weight: s for paraphrase pairs, 1 for other positives; dynamic mode
// multiplies by the cosine distance 1 - cos(z_i, z_p).
double alpha(std::size_t i, std::size_t p, const BatchRelations& rel,
             const ContrastiveConfig& cfg, const Matrix& z);

// Single-pair InfoNCE with anchor i and positive p; the denominator runs over
// every k != i.
ContrastiveResult info_nce(const Matrix& z, std::size_t i, std::size_t p, double tau,
                           NormCheck check = NormCheck::kEnforce);

// Supervised contrastive loss: every positive weighted 1, each anchor's term
// normalized by its positive count, averaged over anchors with positives.
ContrastiveResult supervised_contrastive(const Matrix& z, const BatchRelations& rel,
                                         double tau, NormCheck check = NormCheck::kEnforce);

// Scaled supervised contrastive loss. Per anchor,
//   L^i = -sum_p alpha_ip * log(exp(cos(z_i,z_p)/tau) / sum_{k!=i} exp(cos(z_i,z_k)/tau))
// and the loss is the mean of L^i / sum_p alpha_ip over anchors with a
// positive (and a positive total weight).
ContrastiveResult scaled_supervised_contrastive(const Matrix& z, const BatchRelations& rel,
                                                const ContrastiveConfig& cfg,
                                                NormCheck check = NormCheck::kEnforce);

struct ValueAndGradient {
  double value = 0.0;
  std::vector<double> grad;
};

using DifferentiableFn = std::function<ValueAndGradient(std::span<const double>)>;

// Max over coordinates of |analytic - numeric| / max(1e-8, |analytic| + |numeric|)
// with numeric from the fourth-order central difference
//   (8 (f(x+h) - f(x-h)) - (f(x+2h) - f(x-2h))) / 12h.
double finite_difference_check(const DifferentiableFn& fn, std::span<const double> inputs,
                               double h);

}  // namespace paracon

#endif  // PARACON_LOSSES_HPP_
