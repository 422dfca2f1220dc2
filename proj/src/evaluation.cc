#include "paracon/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "json.hpp"
#include "paracon/training.hpp"

namespace paracon {

double vqa_score(int predicted_label, int ground_truth) {
  return predicted_label == ground_truth ? 1.0 : 0.0;
}

double soft_vqa_score(int predicted_label, std::span<const int> reference_answers) {
  const auto matches = std::count(reference_answers.begin(), reference_answers.end(),
                                  predicted_label);
  return std::min(static_cast<double>(matches) / 3.0, 1.0);
}

AnswerScorer exact_match_scorer() {
  return [](int predicted, const Sample& sample) {
    return vqa_score(predicted, sample.answer_label);
  };
}

std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t result = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    // result * (n - k + i) / i is exact at every step.
    const std::uint64_t factor = n - k + i;
    if (result > std::numeric_limits<std::uint64_t>::max() / factor) {
      throw std::overflow_error("binomial: overflow");
    }
    result = result * factor / i;
  }
  return result;
}

double group_consensus(std::size_t n, std::size_t correct, std::size_t k) {
  if (k < 1) throw std::invalid_argument("consensus: k must be >= 1");
  if (k > n) throw std::invalid_argument("consensus: k exceeds the group size");
  if (correct > n) throw std::invalid_argument("consensus: more correct answers than members");
  return static_cast<double>(binomial(correct, k)) / static_cast<double>(binomial(n, k));
}

ConsensusResult consensus_score(std::span<const PredictionGroup> groups, std::size_t k) {
  if (k < 1) throw std::invalid_argument("consensus_score: k must be >= 1");
  ConsensusResult out;
  double sum = 0.0;
  for (const auto& g : groups) {
    if (g.entries.empty()) {
      throw std::invalid_argument("consensus_score: group '" + g.group_id + "' is empty");
    }
    if (g.entries.size() < k) {
      ++out.skipped_groups;
      continue;
    }
    std::size_t correct = 0;
    for (const auto& e : g.entries) {
      if (e.score < 0.0 || e.score > 1.0) {
        throw std::invalid_argument("consensus_score: score outside [0, 1] in group '" +
                                    g.group_id + "'");
      }
      if (e.score > 0.0) ++correct;
    }
    sum += group_consensus(g.entries.size(), correct, k);
    ++out.eligible_groups;
  }
  if (out.eligible_groups > 0) out.value = sum / static_cast<double>(out.eligible_groups);
  return out;
}

ConsensusReport consensus_report(std::span<const PredictionGroup> groups, std::size_t k_max) {
  ConsensusReport report;
  report.num_groups = groups.size();
  double score_sum = 0.0;
  for (const auto& g : groups) {
    report.group_sizes.push_back(g.entries.size());
    report.num_questions += g.entries.size();
    for (const auto& e : g.entries) score_sum += e.score;
  }
  if (report.num_questions > 0) {
    report.accuracy = score_sum / static_cast<double>(report.num_questions);
  }
  for (std::size_t k = 1; k <= k_max; ++k) {
    const auto cs = consensus_score(groups, k);
    report.consensus.push_back(cs.value);
    report.eligible_groups.push_back(cs.eligible_groups);
    report.skipped_groups.push_back(cs.skipped_groups);
  }
  return report;
}

Evaluation evaluate(const NetworkState& state, const IndexedDataset& dataset, std::size_t k_max,
                    const AnswerScorer& scorer) {
  std::vector<SampleIndex> all(dataset.size());
  for (SampleIndex i = 0; i < all.size(); ++i) all[i] = i;
  const auto predictions = predict_labels(state, dataset, all);

  Evaluation out;
  out.groups.resize(dataset.num_groups());
  for (std::size_t g = 0; g < dataset.num_groups(); ++g) {
    const auto members = dataset.group_members(g);
    auto& group = out.groups[g];
    group.group_id = dataset.sample(members.front()).group_id;
    for (SampleIndex i : members) {
      const Sample& s = dataset.sample(i);
      group.entries.push_back({s.sample_id, predictions[i], scorer(predictions[i], s)});
    }
  }
  out.report = consensus_report(out.groups, k_max);
  return out;
}

void write_predictions(std::ostream& out, std::span<const PredictionGroup> groups) {
  for (const auto& g : groups) {
    for (const auto& e : g.entries) {
      nlohmann::ordered_json j;
      j["group_id"] = g.group_id;
      j["sample_id"] = e.sample_id;
      j["predicted_label"] = e.predicted_label;
      j["score"] = e.score;
      out << j.dump() << '\n';
    }
  }
}

void write_report_text(std::ostream& out, const ConsensusReport& report) {
  char buf[64];
  auto fmt = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return std::string(buf);
  };
  out << "accuracy " << fmt(report.accuracy) << '\n';
  for (std::size_t k = 0; k < report.consensus.size(); ++k) {
    out << "cs" << (k + 1) << ' ' << fmt(report.consensus[k]) << '\n';
  }
  out << "groups " << report.num_groups << '\n';
  out << "questions " << report.num_questions << '\n';
  for (std::size_t k = 0; k < report.skipped_groups.size(); ++k) {
    out << "skipped_groups_k" << (k + 1) << ' ' << report.skipped_groups[k] << '\n';
  }
}

void write_report_json(std::ostream& out, const ConsensusReport& report) {
  nlohmann::ordered_json j;
  j["accuracy"] = report.accuracy;
  j["consensus"] = report.consensus;
  j["eligible_groups"] = report.eligible_groups;
  j["skipped_groups"] = report.skipped_groups;
  j["num_groups"] = report.num_groups;
  j["num_questions"] = report.num_questions;
  out << j.dump() << '\n';
}

}  // namespace paracon
