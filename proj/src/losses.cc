#include "paracon/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace paracon {

CrossEntropyResult cross_entropy(std::span<const double> logits, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= logits.size()) {
    throw std::invalid_argument("cross_entropy: label " + std::to_string(label) +
                                " outside [0, " + std::to_string(logits.size()) + ")");
  }
  const double shift = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double l : logits) sum += std::exp(l - shift);
  const double log_z = shift + std::log(sum);

  CrossEntropyResult out;
  out.loss = log_z - logits[static_cast<std::size_t>(label)];
  out.grad.resize(logits.size());
  for (std::size_t a = 0; a < logits.size(); ++a) {
    out.grad[a] = std::exp(logits[a] - log_z);
  }
  out.grad[static_cast<std::size_t>(label)] -= 1.0;
  return out;
}

BatchRelations BatchRelations::build(std::vector<int> labels,
                                     std::vector<std::string> group_ids) {
  if (labels.size() != group_ids.size()) {
    throw std::invalid_argument("BatchRelations: labels and group_ids differ in length");
  }
  BatchRelations rel;
  rel.n = labels.size();
  rel.labels = std::move(labels);
  rel.group_ids = std::move(group_ids);
  rel.paraphrase_mask.assign(rel.n * rel.n, 0);
  rel.positive_mask.assign(rel.n * rel.n, 0);
  for (std::size_t i = 0; i < rel.n; ++i) {
    for (std::size_t p = 0; p < rel.n; ++p) {
      if (i == p) continue;
      const bool same_label = rel.labels[i] == rel.labels[p];
      // Group members share a label by construction; the conjunction keeps
      // paraphrase => positive even for hand-built relations.
      rel.positive_mask[i * rel.n + p] = same_label;
      rel.paraphrase_mask[i * rel.n + p] = same_label && rel.group_ids[i] == rel.group_ids[p];
    }
  }
  return rel;
}

std::size_t BatchRelations::positive_count(std::size_t i) const {
  std::size_t count = 0;
  for (std::size_t p = 0; p < n; ++p) count += positive_mask[i * n + p];
  return count;
}

std::string to_string(AlphaMode mode) {
  return mode == AlphaMode::kConstant ? "constant" : "dynamic";
}

AlphaMode parse_alpha_mode(const std::string& name) {
  if (name == "constant") return AlphaMode::kConstant;
  if (name == "dynamic") return AlphaMode::kDynamic;
  throw std::invalid_argument("unknown alpha mode '" + name + "'");
}

void ContrastiveConfig::validate() const {
  if (!(tau > 0.0)) throw std::invalid_argument("contrastive: tau must be positive");
  if (!(s >= 1.0)) throw std::invalid_argument("contrastive: scaling factor s must be >= 1");
}

namespace {

struct PairTerm {
  std::size_t p;
  double scale;  // alpha for constant weights; multiplier of (1 - cos) for dynamic
};

// Shared engine behind InfoNCE, SCL and SSCL. terms[i] lists the positives of
// anchor i. Accumulation is index-ascending throughout.
ContrastiveResult weighted_contrastive(const Matrix& z,
                                       const std::vector<std::vector<PairTerm>>& terms,
                                       double tau, bool dynamic, NormCheck check) {
  const std::size_t k_count = z.rows();
  const std::size_t dim = z.cols();
  if (k_count < 2) throw std::invalid_argument("contrastive loss needs at least 2 samples");
  if (!(tau > 0.0)) throw std::invalid_argument("contrastive loss: tau must be positive");

  std::vector<double> norms(k_count);
  Matrix u(k_count, dim);
  for (std::size_t i = 0; i < k_count; ++i) {
    const double norm = std::sqrt(dot(z.row(i), z.row(i)));
    if (norm == 0.0 || !std::isfinite(norm)) {
      throw std::invalid_argument("contrastive loss: zero or non-finite embedding at row " +
                                  std::to_string(i));
    }
    if (check == NormCheck::kEnforce && std::abs(norm - 1.0) > 1e-6) {
      throw std::invalid_argument("contrastive loss: embedding row " + std::to_string(i) +
                                  " is not unit norm");
    }
    norms[i] = norm;
    for (std::size_t d = 0; d < dim; ++d) u(i, d) = z(i, d) / norm;
  }

  // sim = u u^T, accumulated over dimensions in ascending order so that
  // sim(i, k) and sim(k, i) are the same floating-point sum.
  Matrix ut(dim, k_count);
  for (std::size_t i = 0; i < k_count; ++i) {
    for (std::size_t d = 0; d < dim; ++d) ut(d, i) = u(i, d);
  }
  Matrix sim(k_count, k_count);
  for (std::size_t i = 0; i < k_count; ++i) {
    double* row = sim.row(i).data();
    for (std::size_t d = 0; d < dim; ++d) {
      const double a = u(i, d);
      const double* col = ut.row(d).data();
      for (std::size_t k = 0; k < k_count; ++k) row[k] += a * col[k];
    }
  }

  ContrastiveResult out;
  out.per_sample.assign(k_count, 0.0);
  out.grad = Matrix(k_count, dim);
  Matrix dsim(k_count, k_count);  // d(sum of contributions) / d sim(i, k)
  std::size_t contributing = 0;
  double total = 0.0;
  std::vector<double> softmax(k_count);
  std::vector<double> weights;
  std::vector<double> losses;

  for (std::size_t i = 0; i < k_count; ++i) {
    const auto& anchor_terms = terms[i];
    if (anchor_terms.empty()) continue;

    double shift = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < k_count; ++k) {
      if (k != i) shift = std::max(shift, sim(i, k) / tau);
    }
    double sum = 0.0;
    for (std::size_t k = 0; k < k_count; ++k) {
      softmax[k] = k == i ? 0.0 : std::exp(sim(i, k) / tau - shift);
      sum += softmax[k];
    }
    const double lse = shift + std::log(sum);
    for (std::size_t k = 0; k < k_count; ++k) softmax[k] /= sum;

    weights.clear();
    losses.clear();
    double weight_sum = 0.0;
    double weighted_loss = 0.0;
    for (const PairTerm& t : anchor_terms) {
      const double w = dynamic ? t.scale * (1.0 - sim(i, t.p)) : t.scale;
      const double l = lse - sim(i, t.p) / tau;
      weights.push_back(w);
      losses.push_back(l);
      weight_sum += w;
      weighted_loss += w * l;
    }
    if (!(weight_sum > 0.0)) continue;

    const double contribution = weighted_loss / weight_sum;
    out.per_sample[i] = contribution;
    total += contribution;
    ++contributing;

    for (std::size_t k = 0; k < k_count; ++k) {
      if (k != i) dsim(i, k) += softmax[k] / tau;
    }
    for (std::size_t j = 0; j < anchor_terms.size(); ++j) {
      const PairTerm& t = anchor_terms[j];
      const double dweight = dynamic ? -t.scale : 0.0;
      dsim(i, t.p) += (-weights[j] / tau + (losses[j] - contribution) * dweight) / weight_sum;
    }
  }

  if (contributing == 0) return out;
  const double inv_m = 1.0 / static_cast<double>(contributing);
  out.loss = total * inv_m;

  Matrix du(k_count, dim);
  for (std::size_t i = 0; i < k_count; ++i) {
    for (std::size_t k = 0; k < k_count; ++k) {
      // sim is symmetric, so both (i, k) and (k, i) reach u_i through u_k.
      const double g = (dsim(i, k) + dsim(k, i)) * inv_m;
      if (g == 0.0) continue;
      const double* uk = u.row(k).data();
      double* dui = du.row(i).data();
      for (std::size_t d = 0; d < dim; ++d) dui[d] += g * uk[d];
    }
  }
  // Through u = z / |z|: dz = (du - u (u . du)) / |z|.
  for (std::size_t i = 0; i < k_count; ++i) {
    const double radial = dot(u.row(i), du.row(i));
    for (std::size_t d = 0; d < dim; ++d) {
      out.grad(i, d) = (du(i, d) - u(i, d) * radial) / norms[i];
    }
  }
  return out;
}

void check_relations(const Matrix& z, const BatchRelations& rel) {
  if (rel.n != z.rows()) {
    throw std::invalid_argument("contrastive loss: relations describe " +
                                std::to_string(rel.n) + " samples, batch has " +
                                std::to_string(z.rows()));
  }
}

}  // namespace

double alpha(std::size_t i, std::size_t p, const BatchRelations& rel,
             const ContrastiveConfig& cfg, const Matrix& z) {
  if (i >= rel.n || p >= rel.n || !rel.positive(i, p)) {
    throw std::invalid_argument("alpha: (" + std::to_string(i) + ", " + std::to_string(p) +
                                ") is not a positive pair");
  }
  const double scale = rel.paraphrase(i, p) ? cfg.s : 1.0;
  if (cfg.alpha_mode == AlphaMode::kConstant) return scale;
  const auto zi = z.row(i);
  const auto zp = z.row(p);
  const double cos = dot(zi, zp) / std::sqrt(dot(zi, zi) * dot(zp, zp));
  return scale * (1.0 - cos);
}

ContrastiveResult info_nce(const Matrix& z, std::size_t i, std::size_t p, double tau,
                           NormCheck check) {
  if (i >= z.rows() || p >= z.rows()) throw std::invalid_argument("info_nce: index out of range");
  if (i == p) throw std::invalid_argument("info_nce: positive must differ from the anchor");
  std::vector<std::vector<PairTerm>> terms(z.rows());
  terms[i].push_back({p, 1.0});
  return weighted_contrastive(z, terms, tau, false, check);
}

ContrastiveResult supervised_contrastive(const Matrix& z, const BatchRelations& rel,
                                         double tau, NormCheck check) {
  check_relations(z, rel);
  std::vector<std::vector<PairTerm>> terms(rel.n);
  for (std::size_t i = 0; i < rel.n; ++i) {
    for (std::size_t p = 0; p < rel.n; ++p) {
      if (rel.positive(i, p)) terms[i].push_back({p, 1.0});
    }
  }
  return weighted_contrastive(z, terms, tau, false, check);
}

ContrastiveResult scaled_supervised_contrastive(const Matrix& z, const BatchRelations& rel,
                                                const ContrastiveConfig& cfg,
                                                NormCheck check) {
  cfg.validate();
  check_relations(z, rel);
  std::vector<std::vector<PairTerm>> terms(rel.n);
  for (std::size_t i = 0; i < rel.n; ++i) {
    for (std::size_t p = 0; p < rel.n; ++p) {
      if (rel.positive(i, p)) terms[i].push_back({p, rel.paraphrase(i, p) ? cfg.s : 1.0});
    }
  }
  return weighted_contrastive(z, terms, cfg.tau, cfg.alpha_mode == AlphaMode::kDynamic,
                              check);
}

double finite_difference_check(const DifferentiableFn& fn, std::span<const double> inputs,
                               double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_difference_check: h must be positive");
  const ValueAndGradient at = fn(inputs);
  if (at.grad.size() != inputs.size()) {
    throw std::invalid_argument("finite_difference_check: gradient size mismatch");
  }
  std::vector<double> probe(inputs.begin(), inputs.end());
  double worst = 0.0;
  for (std::size_t j = 0; j < probe.size(); ++j) {
    const double saved = probe[j];
    const auto at_offset = [&](double offset) {
      probe[j] = saved + offset;
      return fn(probe).value;
    };
    const double up1 = at_offset(h);
    const double down1 = at_offset(-h);
    const double up2 = at_offset(2.0 * h);
    const double down2 = at_offset(-2.0 * h);
    probe[j] = saved;
    const double numeric = (8.0 * (up1 - down1) - (up2 - down2)) / (12.0 * h);
    const double analytic = at.grad[j];
    const double err =
        std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace paracon
