#include "paracon/similarity.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <unordered_set>

#include "json.hpp"
#include "paracon/rng.hpp"

namespace paracon {

namespace {

std::vector<std::string> split_tokens(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : text) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

}  // namespace

TokenHashEmbedder::TokenHashEmbedder(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw std::invalid_argument("TokenHashEmbedder: dim must be positive");
}

std::vector<double> TokenHashEmbedder::embed(std::string_view text) const {
  const auto tokens = split_tokens(text);
  if (tokens.empty()) throw std::invalid_argument("embed: empty question text");
  std::vector<double> out(dim_, 0.0);
  for (const auto& token : tokens) {
    const std::uint64_t h = splitmix64(stable_hash(token));
    const double sign = (h >> 63) ? -1.0 : 1.0;
    out[h % dim_] += sign;
  }
  double norm2 = 0.0;
  for (double x : out) norm2 += x * x;
  if (norm2 == 0.0) {
    // All tokens cancelled out; fall back to a basis vector keyed on the
    // joined token sequence.
    std::string joined;
    for (const auto& token : tokens) joined += token + ' ';
    out[splitmix64(stable_hash(joined)) % dim_] = 1.0;
    return out;
  }
  const double inv = 1.0 / std::sqrt(norm2);
  for (double& x : out) x *= inv;
  return out;
}

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw std::invalid_argument("cosine_similarity: dimension mismatch");
  }
  double uv = 0.0, uu = 0.0, vv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    uv += u[i] * v[i];
    uu += u[i] * u[i];
    vv += v[i] * v[i];
  }
  if (uu == 0.0 || vv == 0.0) {
    throw std::invalid_argument("cosine_similarity: zero vector");
  }
  return std::clamp(uv / (std::sqrt(uu) * std::sqrt(vv)), -1.0, 1.0);
}

std::vector<double> embed_question(std::string_view text,
                                   const QuestionEmbedder& embedder) {
  if (casefold_trim(text).empty()) {
    throw std::invalid_argument("embed_question: empty question text");
  }
  auto out = embedder.embed(text);
  if (out.size() != embedder.dim()) {
    throw std::runtime_error("embed_question: embedder returned wrong dimension");
  }
  double norm2 = 0.0;
  for (double x : out) norm2 += x * x;
  if (std::abs(std::sqrt(norm2) - 1.0) > 1e-9) {
    throw std::runtime_error("embed_question: embedder output is not unit norm");
  }
  return out;
}

void FilterPolicy::validate() const {
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    throw std::invalid_argument("FilterPolicy: threshold must be in (0, 1]");
  }
  if (max_keep < 1) throw std::invalid_argument("FilterPolicy: max_keep must be >= 1");
}

std::string casefold_trim(std::string_view text) {
  std::size_t begin = 0;
  std::size_t end = text.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(text[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(text[end - 1]))) --end;
  std::string out;
  out.reserve(end - begin);
  for (std::size_t i = begin; i < end; ++i) {
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(text[i]))));
  }
  return out;
}

std::vector<std::string> filter_paraphrases(std::string_view original,
                                            std::span<const std::string> candidates,
                                            const FilterPolicy& policy,
                                            const QuestionEmbedder& embedder) {
  policy.validate();
  const std::string original_key = casefold_trim(original);
  if (original_key.empty()) {
    throw std::invalid_argument("filter_paraphrases: empty original question");
  }
  const auto original_vec = embed_question(original, embedder);

  std::unordered_set<std::string> seen{original_key};
  std::vector<std::string> survivors;
  for (const auto& candidate : candidates) {
    std::string key = casefold_trim(candidate);
    if (key.empty() || !seen.insert(key).second) continue;
    const auto vec = embed_question(candidate, embedder);
    if (cosine_similarity(original_vec, vec) >= policy.threshold) {
      // Keep the caller's casing, trimmed.
      const auto first = candidate.find_first_not_of(" \t\r\n\f\v");
      const auto last = candidate.find_last_not_of(" \t\r\n\f\v");
      survivors.push_back(candidate.substr(first, last - first + 1));
    }
  }
  if (survivors.size() <= policy.max_keep) return survivors;

  // Partial Fisher-Yates over positions, then restore candidate order.
  Rng rng(policy.rng_seed);
  std::vector<std::size_t> order(survivors.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t i = 0; i < policy.max_keep; ++i) {
    std::swap(order[i], order[i + rng.below(order.size() - i)]);
  }
  order.resize(policy.max_keep);
  std::sort(order.begin(), order.end());
  std::vector<std::string> kept;
  kept.reserve(order.size());
  for (std::size_t pos : order) kept.push_back(std::move(survivors[pos]));
  return kept;
}

std::vector<ParaphraseRecord> read_paraphrases(std::istream& in) {
  std::vector<ParaphraseRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw std::runtime_error("paraphrase file line " + std::to_string(line_no) +
                               ": " + e.what());
    }
    if (!j.is_object() || j.size() != 2 || !j.contains("group_id") ||
        !j.contains("paraphrase_text") || !j["group_id"].is_string() ||
        !j["paraphrase_text"].is_string()) {
      throw std::runtime_error("paraphrase file line " + std::to_string(line_no) +
                               ": expected exactly {group_id, paraphrase_text}");
    }
    records.push_back({j["group_id"].get<std::string>(),
                       j["paraphrase_text"].get<std::string>()});
  }
  return records;
}

void write_paraphrases(std::ostream& out, std::span<const ParaphraseRecord> records) {
  for (const auto& r : records) {
    nlohmann::ordered_json j;
    j["group_id"] = r.group_id;
    j["paraphrase_text"] = r.paraphrase_text;
    out << j.dump() << '\n';
  }
}

}  // namespace paracon
