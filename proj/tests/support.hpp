#ifndef PARACON_TESTS_SUPPORT_HPP_
#define PARACON_TESTS_SUPPORT_HPP_

// Helpers and independent reference implementations shared by the unit and
// acceptance tests. Nothing here calls into the library's loss code.

#include <bit>
#include <cmath>
#include <cstdint>
#include <utility>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "paracon/data_model.hpp"
#include "paracon/losses.hpp"
#include "paracon/matrix.hpp"
#include "paracon/rng.hpp"

namespace testsupport {

inline paracon::Matrix random_matrix(std::size_t rows, std::size_t cols, paracon::Rng& rng,
                                     bool unit_rows) {
  paracon::Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    double n2 = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      m(r, c) = rng.normal();
      n2 += m(r, c) * m(r, c);
    }
    if (unit_rows) {
      for (std::size_t c = 0; c < cols; ++c) m(r, c) /= std::sqrt(n2);
    }
  }
  return m;
}

inline double cosine(const paracon::Matrix& z, std::size_t a, std::size_t b) {
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t d = 0; d < z.cols(); ++d) {
    ab += z(a, d) * z(b, d);
    aa += z(a, d) * z(a, d);
    bb += z(b, d) * z(b, d);
  }
  return ab / std::sqrt(aa * bb);
}

// log sum_{k != i} exp(cos(z_i, z_k) / tau), computed directly.
inline double log_denominator(const paracon::Matrix& z, std::size_t i, double tau) {
  double sum = 0.0;
  for (std::size_t k = 0; k < z.rows(); ++k) {
    if (k != i) sum += std::exp(cosine(z, i, k) / tau);
  }
  return std::log(sum);
}

struct PairRelation {
  std::vector<int> labels;
  std::vector<std::string> groups;
  bool positive(std::size_t i, std::size_t p) const { return i != p && labels[i] == labels[p]; }
  bool paraphrase(std::size_t i, std::size_t p) const {
    return positive(i, p) && groups[i] == groups[p];
  }
};

// Reference scaled supervised contrastive loss: mean over anchors with a
// positive of sum_p alpha_ip * (-log softmax) / sum_p alpha_ip.
inline double reference_sscl(const paracon::Matrix& z, const PairRelation& rel, double tau,
                             double s, bool dynamic) {
  double total = 0.0;
  std::size_t anchors = 0;
  for (std::size_t i = 0; i < z.rows(); ++i) {
    double weighted = 0.0, weights = 0.0;
    const double lden = log_denominator(z, i, tau);
    for (std::size_t p = 0; p < z.rows(); ++p) {
      if (!rel.positive(i, p)) continue;
      double a = rel.paraphrase(i, p) ? s : 1.0;
      if (dynamic) a *= 1.0 - cosine(z, i, p);
      weighted += a * (lden - cosine(z, i, p) / tau);
      weights += a;
    }
    if (weights > 0.0) {
      total += weighted / weights;
      ++anchors;
    }
  }
  return anchors ? total / static_cast<double>(anchors) : 0.0;
}

inline double reference_info_nce(const paracon::Matrix& z, std::size_t i, std::size_t p,
                                 double tau) {
  return log_denominator(z, i, tau) - cosine(z, i, p) / tau;
}

inline double reference_ce(const std::vector<double>& logits, int label) {
  double sum = 0.0;
  for (double l : logits) sum += std::exp(l);
  return std::log(sum) - logits[static_cast<std::size_t>(label)];
}

// Central-difference gradient of a scalar function, second order.
inline std::vector<double> numeric_gradient(const std::function<double(const std::vector<double>&)>& f,
                                            std::vector<double> x, double h) {
  std::vector<double> g(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double saved = x[j];
    x[j] = saved + h;
    const double up = f(x);
    x[j] = saved - h;
    const double down = f(x);
    x[j] = saved;
    g[j] = (up - down) / (2.0 * h);
  }
  return g;
}

// A labelled sample with a fixed-size feature vector derived from `seed`.
inline paracon::Sample make_sample(const std::string& id, const std::string& image,
                                   const std::string& group, const std::string& text, int label,
                                   bool paraphrase, std::size_t d_v = 4) {
  paracon::Sample s;
  s.sample_id = id;
  s.image_id = image;
  s.group_id = group;
  s.question_text = text;
  s.answer_label = label;
  s.is_paraphrase = paraphrase;
  paracon::Rng rng(paracon::stable_hash(image));
  s.image_features.resize(d_v);
  for (double& x : s.image_features) x = rng.normal();
  return s;
}

// Subset enumeration over an n-member group whose first `correct` members are
// right: {k-subsets that are all correct, all k-subsets}.
inline std::pair<std::uint64_t, std::uint64_t> enumerate_consensus(unsigned n, unsigned correct,
                                                                   unsigned k) {
  std::uint64_t good = 0, total = 0;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    if (static_cast<unsigned>(std::popcount(mask)) != k) continue;
    ++total;
    if ((mask >> correct) == 0) ++good;
  }
  return {good, total};
}

}  // namespace testsupport

#endif  // PARACON_TESTS_SUPPORT_HPP_
