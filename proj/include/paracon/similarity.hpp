#ifndef PARACON_SIMILARITY_HPP_
#define PARACON_SIMILARITY_HPP_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace paracon {

// Maps question text to a unit-norm vector. Implementations must be
// deterministic and safe to call concurrently.
class QuestionEmbedder {
 public:
  virtual ~QuestionEmbedder() = default;
  virtual std::string_view name() const = 0;
  virtual std::size_t dim() const = 0;
  virtual std::vector<double> embed(std::string_view text) const = 0;
};

// Bag-of-tokens embedder: lowercase, split on whitespace, hash each token to a
// signed basis vector, sum, normalize. Word order is ignored.
class TokenHashEmbedder final : public QuestionEmbedder {
 public:
  static constexpr std::size_t kDefaultDim = 64;

  explicit TokenHashEmbedder(std::size_t dim = kDefaultDim);

  std::string_view name() const override { return "token-hash"; }
  std::size_t dim() const override { return dim_; }
  std::vector<double> embed(std::string_view text) const override;

 private:
  std::size_t dim_;
};

// u.v / (|u||v|), clamped to [-1, 1]. Throws on size mismatch or a zero vector.
double cosine_similarity(std::span<const double> u, std::span<const double> v);

// Validated embedding: rejects blank text and checks the unit-norm contract.
std::vector<double> embed_question(std::string_view text,
                                   const QuestionEmbedder& embedder);

struct FilterPolicy {
  double threshold = 0.95;
  std::size_t max_keep = 3;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

// Trimmed, lowercased text. Used as the dedup key for paraphrase candidates.
std::string casefold_trim(std::string_view text);

// Keeps unique candidates whose similarity to the original is >= threshold,
// then draws at most max_keep of them without replacement. Survivors keep the
// order in which they appeared among the candidates.
std::vector<std::string> filter_paraphrases(std::string_view original,
                                            std::span<const std::string> candidates,
                                            const FilterPolicy& policy,
                                            const QuestionEmbedder& embedder);

struct ParaphraseRecord {
  std::string group_id;
  std::string paraphrase_text;

  bool operator==(const ParaphraseRecord&) const = default;
};

std::vector<ParaphraseRecord> read_paraphrases(std::istream& in);
void write_paraphrases(std::ostream& out, std::span<const ParaphraseRecord> records);

}  // namespace paracon

#endif  // PARACON_SIMILARITY_HPP_
