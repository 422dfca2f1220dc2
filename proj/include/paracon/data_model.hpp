#ifndef PARACON_DATA_MODEL_HPP_
#define PARACON_DATA_MODEL_HPP_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "paracon/similarity.hpp"

namespace paracon {

using SampleIndex = std::uint32_t;

// One (image, question, answer) record. Samples sharing group_id are
// paraphrases of one another; exactly one of them is the original.
struct Sample {
  std::string sample_id;
  std::string image_id;
  std::vector<double> image_features;
  std::string question_text;
  std::vector<double> question_embedding;  // filled by build_indices
  int answer_label = 0;
  std::string group_id;
  bool is_paraphrase = false;
};

struct DatasetHeader {
  std::size_t d_v = 0;
  int num_labels = 0;

  bool operator==(const DatasetHeader&) const = default;
};

struct Dataset {
  DatasetHeader header;
  std::vector<Sample> samples;
};

enum class NegativeType { kImg, kQue, kRand };

inline constexpr NegativeType kAllNegativeTypes[] = {NegativeType::kImg, NegativeType::kQue,
                                                     NegativeType::kRand};

std::string_view to_string(NegativeType type);
NegativeType parse_negative_type(std::string_view name);

struct Positives {
  std::vector<SampleIndex> paraphrased;  // group-mates of x
  std::vector<SampleIndex> intra_class;  // same label, outside x's group
};

// The augmented dataset plus the lookups behind positive and negative sets.
// Immutable once built; all queries are const and thread-safe.
class IndexedDataset {
 public:
  static IndexedDataset build(std::vector<Sample> samples, DatasetHeader header,
                              double epsilon, const QuestionEmbedder& embedder);

  const DatasetHeader& header() const { return header_; }
  double epsilon() const { return epsilon_; }
  std::size_t size() const { return samples_.size(); }
  std::size_t d_q() const { return d_q_; }

  const std::vector<Sample>& samples() const { return samples_; }
  const Sample& sample(SampleIndex i) const { return samples_.at(i); }
  int label(SampleIndex i) const { return samples_[i].answer_label; }

  // Throws std::out_of_range naming the id when unknown.
  SampleIndex index_of(std::string_view sample_id) const;

  const std::vector<SampleIndex>& originals() const { return originals_; }
  std::span<const SampleIndex> with_label(int label) const;
  std::span<const SampleIndex> group_of(SampleIndex i) const;
  std::span<const SampleIndex> image_of(SampleIndex i) const;
  // Differently-answered samples on another image whose question similarity
  // exceeds epsilon. Sorted ascending.
  std::span<const SampleIndex> question_negatives(SampleIndex i) const;

  std::size_t num_groups() const { return group_members_.size(); }
  std::size_t group_index(SampleIndex i) const { return sample_group_[i]; }
  std::size_t image_index(SampleIndex i) const { return sample_image_[i]; }
  std::span<const SampleIndex> group_members(std::size_t group) const {
    return group_members_[group];
  }

  // Negative type of xbar relative to reference x, with precedence
  // img > que > rand. Throws if the two share an answer label.
  NegativeType classify_negative(SampleIndex x, SampleIndex xbar) const;

  Positives positives(SampleIndex x) const;
  std::vector<SampleIndex> negatives(SampleIndex x, NegativeType type) const;
  std::size_t negative_count(SampleIndex x, NegativeType type) const;

 private:
  void check_index(SampleIndex i) const;

  DatasetHeader header_;
  double epsilon_ = 0.0;
  std::size_t d_q_ = 0;
  std::vector<Sample> samples_;
  std::unordered_map<std::string, SampleIndex> by_id_;
  std::vector<std::vector<SampleIndex>> by_label_;
  std::vector<std::vector<SampleIndex>> group_members_;
  std::vector<std::vector<SampleIndex>> image_members_;
  std::vector<std::size_t> sample_group_;
  std::vector<std::size_t> sample_image_;
  std::vector<std::vector<SampleIndex>> que_negatives_;
  std::vector<std::size_t> img_negative_count_;
  std::vector<SampleIndex> originals_;
};

// Line-delimited dataset file: a header object {d_v, num_labels} followed by
// one record per sample with exactly the fields
// {sample_id, image_id, image_features, question_text, answer_label,
//  group_id, is_paraphrase}.
void write_dataset(std::ostream& out, const Dataset& dataset);
Dataset read_dataset(std::istream& in);
void write_dataset_file(const std::string& path, const Dataset& dataset);
Dataset read_dataset_file(const std::string& path);

}  // namespace paracon

#endif  // PARACON_DATA_MODEL_HPP_
