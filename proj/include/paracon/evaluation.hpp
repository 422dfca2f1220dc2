#ifndef PARACON_EVALUATION_HPP_
#define PARACON_EVALUATION_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "paracon/data_model.hpp"
#include "paracon/network.hpp"

namespace paracon {

// Exact-match answer score.
double vqa_score(int predicted_label, int ground_truth);

// Conventional soft accuracy against a list of annotator answers:
// min(#matches / 3, 1).
double soft_vqa_score(int predicted_label, std::span<const int> reference_answers);

// Pluggable scorer; receives the prediction and the sample being answered.
using AnswerScorer = std::function<double(int predicted_label, const Sample& sample)>;

AnswerScorer exact_match_scorer();

struct PredictionEntry {
  std::string sample_id;
  int predicted_label = 0;
  double score = 0.0;
};

// A question and its paraphrases, answered by one model.
struct PredictionGroup {
  std::string group_id;
  std::vector<PredictionEntry> entries;
};

// C(n, k) as an exact integer. Throws on overflow.
std::uint64_t binomial(std::uint64_t n, std::uint64_t k);

// Fraction of size-k subsets of an n-member group whose members all scored
// above zero, given `correct` such members: C(correct, k) / C(n, k).
double group_consensus(std::size_t n, std::size_t correct, std::size_t k);

struct ConsensusResult {
  double value = 0.0;             // mean over eligible groups (0 when none)
  std::size_t eligible_groups = 0;
  std::size_t skipped_groups = 0;  // groups with fewer than k members
};

ConsensusResult consensus_score(std::span<const PredictionGroup> groups, std::size_t k);

struct ConsensusReport {
  std::vector<double> consensus;  // index k-1 holds CS(k)
  std::vector<std::size_t> eligible_groups;
  std::vector<std::size_t> skipped_groups;
  double accuracy = 0.0;
  std::size_t num_groups = 0;
  std::size_t num_questions = 0;
  std::vector<std::size_t> group_sizes;  // per group, in group order
};

ConsensusReport consensus_report(std::span<const PredictionGroup> groups, std::size_t k_max);

struct Evaluation {
  ConsensusReport report;
  std::vector<PredictionGroup> groups;
};

// Runs the encoder and classifier over every sample, groups predictions by
// paraphrase group and scores them.
Evaluation evaluate(const NetworkState& state, const IndexedDataset& dataset, std::size_t k_max,
                    const AnswerScorer& scorer = exact_match_scorer());

void write_predictions(std::ostream& out, std::span<const PredictionGroup> groups);
// "key value" lines.
void write_report_text(std::ostream& out, const ConsensusReport& report);
void write_report_json(std::ostream& out, const ConsensusReport& report);

}  // namespace paracon

#endif  // PARACON_EVALUATION_HPP_
