#include "paracon/curation.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

#include "json.hpp"

namespace paracon {

void NegativeWeights::validate() const {
  if (img < 0.0 || que < 0.0 || rand < 0.0) {
    throw std::invalid_argument("negative weights must be non-negative");
  }
  const double sum = img + que + rand;
  if (std::abs(sum - 1.0) > 1e-9) {
    throw std::invalid_argument("negative weights must sum to 1 (got " + std::to_string(sum) +
                                ")");
  }
}

double NegativeWeights::weight(NegativeType t) const {
  switch (t) {
    case NegativeType::kImg:
      return img;
    case NegativeType::kQue:
      return que;
    case NegativeType::kRand:
      return rand;
  }
  return 0.0;
}

NegativeType sample_negative_type(const NegativeWeights& w, Rng& rng) {
  w.validate();
  const double u = rng.uniform();
  if (u < w.img) return NegativeType::kImg;
  if (u < w.img + w.que) return NegativeType::kQue;
  // Guard against a zero rand weight with u landing in the rounding gap.
  if (w.rand == 0.0) return w.que > 0.0 ? NegativeType::kQue : NegativeType::kImg;
  return NegativeType::kRand;
}

std::string_view to_string(BatchRole role) {
  switch (role) {
    case BatchRole::kReference:
      return "reference";
    case BatchRole::kIntraClassPositive:
      return "intra_class_positive";
    case BatchRole::kNegative:
      return "negative";
    case BatchRole::kParaphrasedPositive:
      return "paraphrased_positive";
  }
  return "?";
}

namespace {

bool has_paraphrase(const IndexedDataset& idx, SampleIndex i) {
  return idx.group_of(i).size() >= 2;
}

[[noreturn]] void starved(const std::string& pool, const IndexedDataset& idx, SampleIndex x) {
  throw CurationError("curate: starved pool '" + pool + "' for reference '" +
                      idx.sample(x).sample_id + "' after " +
                      std::to_string(kMaxCurationAttempts) + " attempts");
}

// Uniform draw from X+_cls(x) restricted to samples that have a paraphrase.
SampleIndex draw_intra_class(const IndexedDataset& idx, SampleIndex x, Rng& rng) {
  const auto same_label = idx.with_label(idx.label(x));
  const std::size_t group = idx.group_index(x);
  for (int attempt = 0; attempt < kMaxCurationAttempts;) {
    const SampleIndex j = same_label[rng.below(same_label.size())];
    if (idx.group_index(j) == group) continue;  // outside X+_cls, not an attempt
    ++attempt;
    if (has_paraphrase(idx, j)) return j;
  }
  starved("intra_class_positive", idx, x);
}

SampleIndex draw_negative_once(const IndexedDataset& idx, SampleIndex x, NegativeType t,
                               Rng& rng) {
  switch (t) {
    case NegativeType::kImg: {
      std::vector<SampleIndex> pool;
      for (SampleIndex j : idx.image_of(x)) {
        if (idx.label(j) != idx.label(x)) pool.push_back(j);
      }
      return pool[rng.below(pool.size())];
    }
    case NegativeType::kQue: {
      const auto pool = idx.question_negatives(x);
      return pool[rng.below(pool.size())];
    }
    case NegativeType::kRand: {
      // Rejection sampling is exactly uniform over the pool; enumerate only
      // when the pool is a tiny fraction of the dataset.
      const auto que = idx.question_negatives(x);
      for (int tries = 0; tries < 1000; ++tries) {
        const auto j = static_cast<SampleIndex>(rng.below(idx.size()));
        if (idx.label(j) == idx.label(x) || idx.image_index(j) == idx.image_index(x)) continue;
        if (std::binary_search(que.begin(), que.end(), j)) continue;
        return j;
      }
      const auto pool = idx.negatives(x, NegativeType::kRand);
      return pool[rng.below(pool.size())];
    }
  }
  return x;
}

SampleIndex draw_negative(const IndexedDataset& idx, SampleIndex x, NegativeType t, Rng& rng) {
  for (int attempt = 0; attempt < kMaxCurationAttempts; ++attempt) {
    const SampleIndex j = draw_negative_once(idx, x, t, rng);
    if (has_paraphrase(idx, j)) return j;
  }
  starved("negative:" + std::string(to_string(t)), idx, x);
}

// Renormalizes w over the non-empty pools other than `empty`; uniform over
// them when they carry no weight.
NegativeType fallback_type(const IndexedDataset& idx, SampleIndex x, const NegativeWeights& w,
                           NegativeType empty, Rng& rng) {
  std::vector<NegativeType> options;
  double total = 0.0;
  for (NegativeType t : kAllNegativeTypes) {
    if (t == empty || idx.negative_count(x, t) == 0) continue;
    options.push_back(t);
    total += w.weight(t);
  }
  if (options.empty()) starved("negative", idx, x);
  if (total <= 0.0) return options[rng.below(options.size())];
  const double u = rng.uniform() * total;
  double acc = 0.0;
  for (NegativeType t : options) {
    acc += w.weight(t);
    if (u < acc) return t;
  }
  return options.back();
}

bool eligible_reference(const IndexedDataset& idx, SampleIndex x) {
  const auto group = idx.group_of(x);
  if (group.size() < 2) return false;
  const std::size_t same_label = idx.with_label(idx.label(x)).size();
  if (same_label <= group.size()) return false;
  return same_label < idx.size();
}

}  // namespace

BatchRelations relations_for(const IndexedDataset& idx, std::span<const SampleIndex> batch) {
  std::vector<int> labels;
  std::vector<std::string> groups;
  labels.reserve(batch.size());
  groups.reserve(batch.size());
  for (SampleIndex i : batch) {
    labels.push_back(idx.label(i));
    groups.push_back(idx.sample(i).group_id);
  }
  return BatchRelations::build(std::move(labels), std::move(groups));
}

CuratedBatch curate(std::size_t num_references, const IndexedDataset& idx,
                    const NegativeWeights& w, Rng& rng) {
  if (num_references < 1) throw std::invalid_argument("curate: N_r must be >= 1");
  w.validate();
  const auto& originals = idx.originals();
  if (num_references > originals.size()) {
    throw CurationError("curate: N_r = " + std::to_string(num_references) + " exceeds the " +
                        std::to_string(originals.size()) + " original samples");
  }

  CuratedBatch batch;
  batch.samples.reserve(6 * num_references);
  batch.roles.reserve(6 * num_references);
  std::vector<std::uint8_t> used(originals.size(), 0);

  for (std::size_t r = 0; r < num_references; ++r) {
    SampleIndex x = 0;
    bool found = false;
    for (int attempt = 0; attempt < kMaxCurationAttempts && !found; ++attempt) {
      const std::size_t pos = rng.below(originals.size());
      if (used[pos]) continue;
      if (!eligible_reference(idx, originals[pos])) continue;
      used[pos] = 1;
      x = originals[pos];
      found = true;
    }
    if (!found) {
      throw CurationError("curate: starved pool 'reference' after " +
                          std::to_string(kMaxCurationAttempts) + " attempts");
    }

    const SampleIndex positive = draw_intra_class(idx, x, rng);
    const NegativeType sampled = sample_negative_type(w, rng);
    NegativeType used_type = sampled;
    if (idx.negative_count(x, sampled) == 0) {
      used_type = fallback_type(idx, x, w, sampled, rng);
      ++batch.fallbacks;
    }
    const SampleIndex negative = draw_negative(idx, x, used_type, rng);

    batch.samples.insert(batch.samples.end(), {x, positive, negative});
    batch.roles.insert(batch.roles.end(), {BatchRole::kReference,
                                           BatchRole::kIntraClassPositive,
                                           BatchRole::kNegative});
    batch.sampled_types.push_back(sampled);
    batch.negative_types.push_back(used_type);
  }

  const std::size_t first_half = batch.samples.size();
  for (std::size_t j = 0; j < first_half; ++j) {
    const SampleIndex anchor = batch.samples[j];
    const auto group = idx.group_of(anchor);
    SampleIndex mate = anchor;
    // Group size >= 2 is guaranteed by the phase-one draws.
    while (mate == anchor) mate = group[rng.below(group.size())];
    batch.samples.push_back(mate);
    batch.roles.push_back(BatchRole::kParaphrasedPositive);
  }

  batch.relations = relations_for(idx, batch.samples);
  return batch;
}

std::vector<SampleIndex> sample_ce_batch(const IndexedDataset& idx, std::size_t size, Rng& rng) {
  if (size > idx.size()) {
    throw std::invalid_argument("sample_ce_batch: batch of " + std::to_string(size) +
                                " exceeds the " + std::to_string(idx.size()) + " samples");
  }
  std::vector<SampleIndex> order(idx.size());
  for (SampleIndex i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t i = 0; i < size; ++i) {
    std::swap(order[i], order[i + rng.below(order.size() - i)]);
  }
  order.resize(size);
  return order;
}

void write_batch_dump(std::ostream& out, const CuratedBatch& batch, const IndexedDataset& idx) {
  for (std::size_t j = 0; j < batch.samples.size(); ++j) {
    nlohmann::ordered_json rec;
    rec["position"] = j;
    rec["sample_id"] = idx.sample(batch.samples[j]).sample_id;
    rec["role"] = to_string(batch.roles[j]);
    out << rec.dump() << '\n';
  }
}

}  // namespace paracon
