#ifndef PARACON_SYNTHETIC_TASK_HPP_
#define PARACON_SYNTHETIC_TASK_HPP_

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "paracon/data_model.hpp"

namespace paracon {

// Generator parameters. Every image carries a latent class whose prototype,
// plus gaussian noise, forms its features. Each image asks groups_per_image
// question templates; template t answers (class + t * stride) mod num_labels,
// so the answer depends on both modalities.
struct SynthSpec {
  int num_labels = 16;
  std::size_t num_images = 128;
  std::size_t groups_per_image = 4;
  std::size_t paraphrases_per_group = 3;
  std::size_t d_v = 32;
  double feature_noise = 0.05;
  double perturb_rate = 0.3;
  std::uint64_t seed = 7;

  void validate() const;
};

Dataset generate(const SynthSpec& spec);

// Moves every sample of round(fraction * #images) images, chosen by a seeded
// hash of image_id, into the second dataset.
std::pair<Dataset, Dataset> split_by_image(const Dataset& dataset, double fraction,
                                           std::uint64_t seed);

}  // namespace paracon

#endif  // PARACON_SYNTHETIC_TASK_HPP_
