#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "paracon/commands.hpp"
#include "paracon/losses.hpp"
#include "paracon/rng.hpp"

namespace paracon {

namespace {

constexpr double kStep = 1e-3;

Matrix random_unit_rows(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix z(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    double n2 = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      z(r, c) = rng.normal();
      n2 += z(r, c) * z(r, c);
    }
    const double inv = 1.0 / std::sqrt(n2);
    for (std::size_t c = 0; c < cols; ++c) z(r, c) *= inv;
  }
  return z;
}

// Random labels and groups with at least one positive pair. Group members
// always share a label.
BatchRelations random_relations(std::size_t k, Rng& rng) {
  while (true) {
    std::vector<int> labels(k);
    std::vector<std::string> groups(k);
    for (std::size_t i = 0; i < k; ++i) {
      const auto group = rng.below(std::max<std::size_t>(1, k / 2));
      labels[i] = static_cast<int>(group % 3);
      groups[i] = "g" + std::to_string(group);
    }
    auto rel = BatchRelations::build(std::move(labels), std::move(groups));
    for (std::size_t i = 0; i < k; ++i) {
      if (rel.positive_count(i) > 0) return rel;
    }
  }
}

using ZLoss = std::function<ContrastiveResult(const Matrix&)>;

double check_z_loss(const ZLoss& loss, const Matrix& z0) {
  const std::size_t rows = z0.rows();
  const std::size_t cols = z0.cols();
  const DifferentiableFn fn = [&](std::span<const double> flat) {
    Matrix z(rows, cols);
    std::copy(flat.begin(), flat.end(), z.flat().begin());
    const auto r = loss(z);
    return ValueAndGradient{r.loss, std::vector<double>(r.grad.flat().begin(), r.grad.flat().end())};
  };
  return finite_difference_check(fn, z0.flat(), kStep);
}

}  // namespace

std::vector<GradcheckRow> run_gradcheck(std::size_t instances, double tolerance,
                                        std::uint64_t seed) {
  const Rng root(seed);
  std::vector<GradcheckRow> rows = {{"cross_entropy"},       {"info_nce"},
                                    {"supervised_contrastive"}, {"sscl_constant"},
                                    {"sscl_dynamic"}};
  for (std::size_t n = 0; n < instances; ++n) {
    Rng rng = root.stream(n);
    // k = 2 makes every contrastive loss identically zero, leaving only
    // roundoff to compare against.
    const std::size_t k = 3 + rng.below(10);    // 3..12
    const std::size_t dim = 2 + rng.below(7);   // 2..8
    const double tau = 0.1 + 0.9 * rng.uniform();
    const double s = 1.0 + 19.0 * rng.uniform();

    std::vector<double> logits(k);
    for (double& x : logits) x = 3.0 * rng.normal();
    const int label = static_cast<int>(rng.below(k));
    const DifferentiableFn ce = [label](std::span<const double> x) {
      const auto r = cross_entropy(x, label);
      return ValueAndGradient{r.loss, r.grad};
    };
    rows[0].max_rel_error = std::max(rows[0].max_rel_error,
                                     finite_difference_check(ce, logits, kStep));

    const Matrix z = random_unit_rows(k, dim, rng);
    const std::size_t anchor = rng.below(k);
    const std::size_t positive = (anchor + 1 + rng.below(k - 1)) % k;
    rows[1].max_rel_error = std::max(
        rows[1].max_rel_error, check_z_loss(
                                   [&](const Matrix& m) {
                                     return info_nce(m, anchor, positive, tau, NormCheck::kSkip);
                                   },
                                   z));

    const BatchRelations rel = random_relations(k, rng);
    rows[2].max_rel_error = std::max(
        rows[2].max_rel_error,
        check_z_loss(
            [&](const Matrix& m) { return supervised_contrastive(m, rel, tau, NormCheck::kSkip); },
            z));
    for (const AlphaMode mode : {AlphaMode::kConstant, AlphaMode::kDynamic}) {
      const ContrastiveConfig cfg{tau, s, mode};
      auto& row = rows[mode == AlphaMode::kConstant ? 3 : 4];
      row.max_rel_error = std::max(
          row.max_rel_error,
          check_z_loss(
              [&](const Matrix& m) {
                return scaled_supervised_contrastive(m, rel, cfg, NormCheck::kSkip);
              },
              z));
    }
  }
  for (auto& row : rows) {
    row.instances = instances;
    row.pass = row.max_rel_error <= tolerance;
  }
  return rows;
}

}  // namespace paracon
