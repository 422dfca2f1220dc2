#ifndef PARACON_CURATION_HPP_
#define PARACON_CURATION_HPP_

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "paracon/data_model.hpp"
#include "paracon/losses.hpp"
#include "paracon/rng.hpp"

namespace paracon {

struct NegativeWeights {
  double img = 0.25;
  double que = 0.25;
  double rand = 0.5;

  void validate() const;
  double weight(NegativeType t) const;
};

NegativeType sample_negative_type(const NegativeWeights& w, Rng& rng);

enum class BatchRole { kReference, kIntraClassPositive, kNegative, kParaphrasedPositive };

std::string_view to_string(BatchRole role);

// Output of batch curation. The first 3*N_r entries are (reference,
// intra-class positive, negative) triplets; entry 3*N_r + j is a paraphrase of
// entry j.
struct CuratedBatch {
  std::vector<SampleIndex> samples;
  std::vector<BatchRole> roles;
  std::vector<NegativeType> sampled_types;  // per reference, drawn from Cat(w)
  std::vector<NegativeType> negative_types;  // per reference, type actually used
  std::size_t fallbacks = 0;                 // references whose sampled pool was empty
  BatchRelations relations;

  std::size_t num_references() const { return sampled_types.size(); }
};

// Draw attempts per slot before a pool is declared starved.
inline constexpr int kMaxCurationAttempts = 100;

class CurationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

CuratedBatch curate(std::size_t num_references, const IndexedDataset& idx,
                    const NegativeWeights& w, Rng& rng);

// Uniform without replacement over every sample, originals and paraphrases.
std::vector<SampleIndex> sample_ce_batch(const IndexedDataset& idx, std::size_t size, Rng& rng);

BatchRelations relations_for(const IndexedDataset& idx, std::span<const SampleIndex> batch);

// One line per batch element: {position, sample_id, role}.
void write_batch_dump(std::ostream& out, const CuratedBatch& batch, const IndexedDataset& idx);

}  // namespace paracon

#endif  // PARACON_CURATION_HPP_
