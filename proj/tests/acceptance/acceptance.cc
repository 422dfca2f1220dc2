// Runs every acceptance criterion and prints one PASS/FAIL line for each.
// Usage: paracon_acceptance [criterion numbers...]   (default: all)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "paracon/commands.hpp"
#include "paracon/config.hpp"
#include "paracon/curation.hpp"
#include "paracon/evaluation.hpp"
#include "paracon/losses.hpp"
#include "paracon/network.hpp"
#include "paracon/similarity.hpp"
#include "paracon/synthetic_task.hpp"
#include "paracon/training.hpp"
#include "support.hpp"

using namespace paracon;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

double rel_error(double a, double b) {
  return std::abs(a - b) / std::max(1e-8, std::abs(a) + std::abs(b));
}

// Fourth-order central difference of f at x, coordinate by coordinate,
// compared against `analytic`. Returns the worst relative error.
double fd_max_rel_error(const std::function<double(const std::vector<double>&)>& f,
                        std::vector<double> x, const std::vector<double>& analytic, double h) {
  double worst = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double saved = x[j];
    auto at = [&](double off) {
      x[j] = saved + off;
      return f(x);
    };
    const double numeric = (8.0 * (at(h) - at(-h)) - (at(2 * h) - at(-2 * h))) / (12.0 * h);
    x[j] = saved;
    worst = std::max(worst, rel_error(analytic[j], numeric));
  }
  return worst;
}

std::vector<double> flat(const Matrix& m) { return {m.flat().begin(), m.flat().end()}; }

Matrix from_flat(const std::vector<double>& v, std::size_t rows, std::size_t cols) {
  Matrix m(rows, cols);
  std::copy(v.begin(), v.end(), m.flat().begin());
  return m;
}

// Labels and groups with at least one positive pair; group members share a label.
testsupport::PairRelation random_relation(std::size_t k, Rng& rng) {
  while (true) {
    testsupport::PairRelation rel;
    for (std::size_t i = 0; i < k; ++i) {
      const auto group = rng.below(std::max<std::size_t>(1, k / 2));
      rel.labels.push_back(static_cast<int>(group % 3));
      rel.groups.push_back("g" + std::to_string(group));
    }
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t p = 0; p < k; ++p) {
        if (rel.positive(i, p)) return rel;
      }
    }
  }
}

// ---------------------------------------------------------------------------
// 1. Gradient suite.

Outcome criterion_gradients() {
  const auto t0 = Clock::now();
  constexpr double kTol = 1e-5;
  constexpr double kStep = 1e-3;
  const char* names[] = {"CE", "InfoNCE", "SCL", "SSCL-const", "SSCL-dyn"};
  double worst[5] = {0, 0, 0, 0, 0};
  Rng rng(2024);
  for (int n = 0; n < 100; ++n) {
    // With k = 2 the contrastive losses are constant and relative error is undefined.
    const std::size_t k = 3 + rng.below(10);
    const std::size_t dim = 2 + rng.below(7);
    const double tau = 0.1 + 0.9 * rng.uniform();
    const double s = 1.0 + 19.0 * rng.uniform();

    std::vector<double> logits(k);
    for (double& x : logits) x = 3.0 * rng.normal();
    const int label = static_cast<int>(rng.below(k));
    worst[0] = std::max(worst[0], fd_max_rel_error(
                                      [&](const std::vector<double>& x) {
                                        return testsupport::reference_ce(x, label);
                                      },
                                      logits, cross_entropy(logits, label).grad, kStep));

    const Matrix z = testsupport::random_matrix(k, dim, rng, true);
    const auto ref_of = [&](auto fn) {
      return [&, fn](const std::vector<double>& x) { return fn(from_flat(x, k, dim)); };
    };
    const std::size_t a = rng.below(k);
    const std::size_t p = (a + 1 + rng.below(k - 1)) % k;
    worst[1] = std::max(
        worst[1],
        fd_max_rel_error(ref_of([&](const Matrix& m) {
                           return testsupport::reference_info_nce(m, a, p, tau);
                         }),
                         flat(z), flat(info_nce(z, a, p, tau).grad), kStep));

    const auto rel = random_relation(k, rng);
    const auto batch = BatchRelations::build(rel.labels, rel.groups);
    worst[2] = std::max(
        worst[2],
        fd_max_rel_error(ref_of([&](const Matrix& m) {
                           return testsupport::reference_sscl(m, rel, tau, 1.0, false);
                         }),
                         flat(z), flat(supervised_contrastive(z, batch, tau).grad), kStep));
    for (const bool dynamic : {false, true}) {
      const ContrastiveConfig cfg{tau, s, dynamic ? AlphaMode::kDynamic : AlphaMode::kConstant};
      double& w = worst[dynamic ? 4 : 3];
      w = std::max(w, fd_max_rel_error(ref_of([&](const Matrix& m) {
                                         return testsupport::reference_sscl(m, rel, tau, s,
                                                                            dynamic);
                                       }),
                                       flat(z),
                                       flat(scaled_supervised_contrastive(z, batch, cfg).grad),
                                       kStep));
    }
  }
  // The suite shipped with the command line must agree.
  const auto rows = run_gradcheck(100, kTol, 1);
  bool suite_pass = true;
  for (const auto& r : rows) suite_pass = suite_pass && r.pass;

  const double secs = seconds_since(t0);
  bool pass = suite_pass && secs < 60.0;
  std::string detail;
  for (int i = 0; i < 5; ++i) {
    pass = pass && worst[i] <= kTol;
    detail += fmt("%s %.2e; ", names[i], worst[i]);
  }
  detail += fmt("cli suite %s; %.1fs", suite_pass ? "pass" : "FAIL", secs);
  return {pass, detail};
}

// ---------------------------------------------------------------------------
// 2. Equivalence identities.

double max_abs_diff(const Matrix& a, const Matrix& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.flat().size(); ++i) {
    d = std::max(d, std::abs(a.flat()[i] - b.flat()[i]));
  }
  return d;
}

Outcome criterion_identities() {
  constexpr double kTol = 1e-12;
  double worst_scl = 0.0, worst_infonce = 0.0, worst_alpha = 0.0, worst_shift = 0.0;
  Rng rng(77);
  for (int n = 0; n < 100; ++n) {
    const std::size_t k = 2 + rng.below(11);
    const std::size_t dim = 2 + rng.below(7);
    const double tau = 0.05 + rng.uniform();
    const Matrix z = testsupport::random_matrix(k, dim, rng, true);

    // SSCL with s = 1 and constant weights is SCL.
    const auto rel = random_relation(k, rng);
    const auto batch = BatchRelations::build(rel.labels, rel.groups);
    const auto sscl = scaled_supervised_contrastive(z, batch, {tau, 1.0, AlphaMode::kConstant});
    const auto scl = supervised_contrastive(z, batch, tau);
    worst_scl = std::max({worst_scl, std::abs(sscl.loss - scl.loss), max_abs_diff(sscl.grad, scl.grad)});

    // Singleton positives: disjoint label pairs, so SCL is the mean InfoNCE.
    const std::size_t pairs = 1 + rng.below(6);
    const Matrix zp = testsupport::random_matrix(2 * pairs, dim, rng, true);
    std::vector<int> labels;
    std::vector<std::string> groups;
    for (std::size_t i = 0; i < 2 * pairs; ++i) {
      labels.push_back(static_cast<int>(i / 2));
      groups.push_back("g" + std::to_string(i));
    }
    const auto singles = supervised_contrastive(zp, BatchRelations::build(labels, groups), tau);
    double mean = 0.0;
    Matrix mean_grad(2 * pairs, dim);
    for (std::size_t i = 0; i < 2 * pairs; ++i) {
      const auto r = info_nce(zp, i, i ^ 1u, tau);
      mean += r.loss / static_cast<double>(2 * pairs);
      for (std::size_t j = 0; j < mean_grad.flat().size(); ++j) {
        mean_grad.flat()[j] += r.grad.flat()[j] / static_cast<double>(2 * pairs);
      }
    }
    worst_infonce = std::max({worst_infonce, std::abs(singles.loss - mean),
                              max_abs_diff(singles.grad, mean_grad)});

    // Every positive a paraphrase: all weights share the factor s, which
    // must cancel in both weighting modes.
    std::vector<int> pl;
    std::vector<std::string> pg;
    for (std::size_t i = 0; i < k; ++i) {
      pl.push_back(static_cast<int>(i / 2));
      pg.push_back("p" + std::to_string(i / 2));
    }
    const auto para = BatchRelations::build(pl, pg);
    for (const AlphaMode mode : {AlphaMode::kConstant, AlphaMode::kDynamic}) {
      const auto base = scaled_supervised_contrastive(z, para, {tau, 1.0, mode});
      const double s = 1.0 + 50.0 * rng.uniform();
      const auto scaled = scaled_supervised_contrastive(z, para, {tau, s, mode});
      worst_alpha = std::max({worst_alpha, std::abs(base.loss - scaled.loss),
                              max_abs_diff(base.grad, scaled.grad)});
    }

    // Cross-entropy ignores a common logit shift.
    std::vector<double> logits(k);
    for (double& x : logits) x = 3.0 * rng.normal();
    const int label = static_cast<int>(rng.below(k));
    const double shift = 20.0 * rng.normal();
    std::vector<double> shifted = logits;
    for (double& x : shifted) x += shift;
    const auto a = cross_entropy(logits, label);
    const auto b = cross_entropy(shifted, label);
    worst_shift = std::max(worst_shift, std::abs(a.loss - b.loss));
    for (std::size_t j = 0; j < k; ++j) worst_shift = std::max(worst_shift, std::abs(a.grad[j] - b.grad[j]));
  }
  const bool pass = worst_scl <= kTol && worst_infonce <= kTol && worst_alpha <= kTol &&
                    worst_shift <= kTol;
  return {pass, fmt("SSCL(s=1)=SCL %.1e; singleton SCL=InfoNCE %.1e; alpha scaling %.1e; "
                    "CE shift %.1e",
                    worst_scl, worst_infonce, worst_alpha, worst_shift)};
}

// ---------------------------------------------------------------------------
// 3. Consensus oracle.

Outcome criterion_consensus() {
  const auto t0 = Clock::now();
  std::size_t cases = 0, agree = 0;
  for (unsigned n = 1; n <= 8; ++n) {
    for (unsigned c = 0; c <= n; ++c) {
      for (unsigned k = 1; k <= n; ++k) {
        ++cases;
        const auto [good, total] = testsupport::enumerate_consensus(n, c, k);
        // Score pattern with exactly c correct members, scored through the
        // group-level API as well as the closed form.
        PredictionGroup g{"g", {}};
        for (unsigned i = 0; i < n; ++i) g.entries.push_back({"s", 0, i < c ? 1.0 : 0.0});
        const std::vector<PredictionGroup> groups = {g};
        const double expected = static_cast<double>(good) / static_cast<double>(total);
        if (group_consensus(n, c, k) == expected && consensus_score(groups, k).value == expected) {
          ++agree;
        }
      }
    }
  }
  const double secs = seconds_since(t0);
  return {agree == cases && secs < 1.0, fmt("%zu/%zu agree; %.3fs", agree, cases, secs)};
}

// ---------------------------------------------------------------------------
// 4. Batch composition.

IndexedDataset default_index(const Dataset& data) {
  return IndexedDataset::build(data.samples, data.header, 0.95, TokenHashEmbedder());
}

Outcome criterion_batches() {
  const auto data = generate(SynthSpec{});
  const auto idx = default_index(data);
  constexpr std::size_t kNr = 70;
  bool layout_ok = true;
  std::size_t counts[3] = {0, 0, 0};
  std::size_t batches_with_fallback = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    Rng rng(seed);
    const auto batch = curate(kNr, idx, NegativeWeights{}, rng);
    std::size_t roles[4] = {0, 0, 0, 0};
    for (BatchRole r : batch.roles) ++roles[static_cast<int>(r)];
    layout_ok = layout_ok && batch.samples.size() == 6 * kNr && roles[0] == kNr &&
                roles[1] == kNr && roles[2] == kNr && roles[3] == 3 * kNr;
    if (batch.fallbacks > 0) {
      ++batches_with_fallback;
      continue;
    }
    for (NegativeType t : batch.negative_types) ++counts[static_cast<int>(t)];
  }
  const double total = static_cast<double>(counts[0] + counts[1] + counts[2]);
  const double expected[3] = {0.25 * total, 0.25 * total, 0.5 * total};
  double chi2 = 0.0;
  for (int i = 0; i < 3; ++i) {
    chi2 += (counts[i] - expected[i]) * (counts[i] - expected[i]) / expected[i];
  }
  const double p = std::exp(-chi2 / 2.0);  // chi-square survival function, 2 dof
  return {layout_ok && total > 0 && p > 0.001,
          fmt("size %zu, roles ok %s; img/que/rand %zu/%zu/%zu; chi2 %.3f p %.3f; "
              "%zu batches with fallback excluded",
              6 * kNr, layout_ok ? "yes" : "no", counts[0], counts[1], counts[2], chi2, p,
              batches_with_fallback)};
}

// ---------------------------------------------------------------------------
// 5. Schedule.

SynthSpec tiny_spec() {
  SynthSpec spec;
  spec.num_labels = 4;
  spec.num_images = 24;
  spec.d_v = 6;
  return spec;
}

TrainPlan tiny_plan(Scheme scheme, std::int64_t iters) {
  TrainPlan plan;
  plan.scheme = scheme;
  plan.total_iters = iters;
  plan.n_references = 8;
  plan.ce_batch_size = 48;
  plan.schedule.base_lr = 1e-3;
  plan.schedule = plan.schedule.scaled_to(iters);
  plan.seed = 11;
  return plan;
}

Outcome criterion_schedule() {
  const auto data = generate(tiny_spec());
  const auto idx = default_index(data);
  auto plan = tiny_plan(Scheme::kAlternate, 20);
  const auto result =
      train(plan, idx, NetworkState::initialize({6, idx.d_q(), 16, 8, 4}, 1));
  std::vector<std::int64_t> ssc;
  for (const auto& r : result.log.iterations) {
    if (r.kind == LossKind::kSsc) ssc.push_back(r.iteration);
  }
  const std::vector<std::int64_t> want = {4, 8, 12, 16, 20};
  const LrSchedule s;
  const bool lr_ok = lr_at(0, s) == 2e-5 && lr_at(4266, s) == 2e-4 && lr_at(10665, s) == 4e-5 &&
                     lr_at(14931, s) == 8e-6;
  std::string got;
  for (auto i : ssc) got += std::to_string(i) + " ";
  return {ssc == want && result.log.iterations.size() == 20 && lr_ok,
          fmt("SSCL iterations { %s}; lr %.17g %.17g %.17g %.17g", got.c_str(), lr_at(0, s),
              lr_at(4266, s), lr_at(10665, s), lr_at(14931, s))};
}

// ---------------------------------------------------------------------------
// 6. Joint update.

// Gradient of the blended objective accumulated through separate backward
// passes with pre-scaled upstream gradients.
Gradients accumulated_joint_gradient(const NetworkState& state, const IndexedDataset& idx,
                                     const CuratedBatch& curated,
                                     std::span<const SampleIndex> ce_batch,
                                     const ContrastiveConfig& cfg, double beta) {
  const auto c1 = forward(state, gather_inputs(idx, curated.samples));
  Matrix gz = scaled_supervised_contrastive(c1.z, curated.relations, cfg).grad;
  for (double& g : gz.flat()) g *= beta;
  auto total = backward(state, c1, &gz, nullptr);

  const auto c2 = forward(state, gather_inputs(idx, ce_batch));
  Matrix gl(ce_batch.size(), c2.logits.cols());
  for (std::size_t r = 0; r < ce_batch.size(); ++r) {
    std::vector<double> logits(c2.logits.row(r).begin(), c2.logits.row(r).end());
    const double p_max = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double& l : logits) sum += (l = std::exp(l - p_max));
    for (std::size_t a = 0; a < logits.size(); ++a) {
      const double softmax = logits[a] / sum;
      const double onehot = static_cast<int>(a) == idx.label(ce_batch[r]) ? 1.0 : 0.0;
      gl(r, a) = (1.0 - beta) * (softmax - onehot) / static_cast<double>(ce_batch.size());
    }
  }
  const auto ce_part = backward(state, c2, nullptr, &gl);
  for (std::size_t s = 0; s < total.values.size(); ++s) {
    for (std::size_t i = 0; i < total.values[s].size(); ++i) total.values[s][i] += ce_part.values[s][i];
  }
  return total;
}

Outcome criterion_joint() {
  const auto data = generate(tiny_spec());
  const auto idx = default_index(data);
  const NetworkDims dims{6, idx.d_q(), 16, 8, 4};
  Rng rng(5);
  double worst_grad = 0.0;
  double worst_step = 0.0;
  for (int n = 0; n < 10; ++n) {
    const double beta = rng.uniform();
    auto plan = tiny_plan(Scheme::kJoint, 1);
    plan.beta = beta;
    plan.seed = 100 + n;
    const auto init = NetworkState::initialize(dims, 30 + n);

    TrainStreams streams(plan.seed);
    const auto curated = curate(plan.n_references, idx, plan.weights, streams.curation);
    const auto ce_batch = sample_ce_batch(idx, plan.ce_batch_size, streams.ce);
    const auto oracle = accumulated_joint_gradient(init, idx, curated, ce_batch, plan.contrastive, beta);
    const auto combined =
        combine_gradients(ssc_gradients(init, idx, curated, plan.contrastive).grads,
                          ce_gradients(init, idx, ce_batch).grads, beta);
    for (std::size_t s = 0; s < oracle.values.size(); ++s) {
      for (std::size_t i = 0; i < oracle.values[s].size(); ++i) {
        worst_grad = std::max(worst_grad, std::abs(oracle.values[s][i] - combined.values[s][i]));
      }
    }

    // One joint iteration equals one optimizer step on the oracle gradient.
    auto manual = init;
    apply_step(manual, oracle, plan.schedule, plan.adam, GroupMask::all());
    const auto trained = train(plan, idx, init);
    for (std::size_t s = 0; s < manual.params().size(); ++s) {
      for (std::size_t i = 0; i < manual.params()[s].value.size(); ++i) {
        worst_step = std::max(worst_step, std::abs(manual.params()[s].value[i] -
                                                   trained.state.params()[s].value[i]));
      }
    }
  }

  // beta = 0 and beta = 1 trajectories equal single-loss runs bit for bit.
  bool bitwise = true;
  for (const double beta : {0.0, 1.0}) {
    auto joint_plan = tiny_plan(Scheme::kJoint, 25);
    joint_plan.beta = beta;
    auto single_plan = tiny_plan(Scheme::kPretrainFinetune, 25);
    single_plan.n_pretrain = beta == 1.0 ? 25 : 0;
    single_plan.n_finetune = 25 - single_plan.n_pretrain;
    const auto init = NetworkState::initialize(dims, 9);
    for (std::int64_t steps : {1, 7, 25}) {
      joint_plan.total_iters = steps;
      single_plan.n_pretrain = beta == 1.0 ? steps : 0;
      single_plan.n_finetune = steps - single_plan.n_pretrain;
      const auto a = train(joint_plan, idx, init);
      const auto b = train(single_plan, idx, init);
      for (std::size_t s = 0; s < a.state.params().size(); ++s) {
        bitwise = bitwise && a.state.params()[s].value == b.state.params()[s].value;
      }
      for (std::size_t i = 0; i < a.log.iterations.size(); ++i) {
        bitwise = bitwise && a.log.iterations[i].loss == b.log.iterations[i].loss;
      }
    }
  }
  return {worst_grad <= 1e-12 && worst_step <= 1e-12 && bitwise,
          fmt("blend vs accumulated gradient %.1e; step %.1e; beta in {0,1} bitwise %s",
              worst_grad, worst_step, bitwise ? "yes" : "no")};
}

// ---------------------------------------------------------------------------
// 7. End-to-end direction check.

struct SeedResult {
  double cs3 = 0.0;
  double accuracy = 0.0;
};

Outcome criterion_direction() {
  const auto t0 = Clock::now();
  RunConfig base;  // default synthetic task and reference hyperparameters
  const auto data = generate(base.synth);
  const auto [train_set, eval_set] = split_by_image(data, base.eval_fraction, base.split_seed);
  const auto train_idx = default_index(train_set);
  const auto eval_idx = default_index(eval_set);
  const NetworkDims dims{base.synth.d_v, train_idx.d_q(), base.d_h, base.d_z,
                         static_cast<std::size_t>(base.synth.num_labels)};

  // Desk-scale run length and batch size.
  constexpr std::int64_t kIters = 4000;
  constexpr std::size_t kNr = 35;
  const auto plan_for = [&](Scheme scheme, std::uint64_t seed) {
    TrainPlan plan = base.plan;
    plan.scheme = scheme;
    plan.total_iters = kIters;
    plan.n_references = kNr;
    plan.ce_batch_size = 6 * kNr;
    plan.schedule.base_lr = 1e-3;
    plan.seed = seed;
    return plan;
  };
  const auto run = [&](TrainPlan plan) {
    plan.schedule = plan.schedule.scaled_to(plan.iterations());
    const auto result = train(plan, train_idx, NetworkState::initialize(dims, plan.seed));
    const auto ev = evaluate(result.state, eval_idx, 4);
    return SeedResult{ev.report.consensus[2], ev.report.accuracy};
  };

  struct Row {
    std::string name;
    std::vector<SeedResult> seeds;
  };
  std::vector<Row> rows = {{"CE only", {}}, {"alternate", {}}, {"joint", {}},
                           {"pretrain-finetune", {}}};
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto ce = plan_for(Scheme::kPretrainFinetune, seed);
    ce.n_pretrain = 0;
    ce.n_finetune = kIters;
    rows[0].seeds.push_back(run(ce));
    rows[1].seeds.push_back(run(plan_for(Scheme::kAlternate, seed)));
    // Same number of contrastive steps as the alternate run.
    auto joint = plan_for(Scheme::kJoint, seed);
    joint.total_iters = kIters / joint.n_ce;
    rows[2].seeds.push_back(run(joint));
    auto pf = plan_for(Scheme::kPretrainFinetune, seed);
    pf.n_pretrain = kIters / pf.n_ce;
    pf.n_finetune = kIters - pf.n_pretrain;
    rows[3].seeds.push_back(run(pf));
  }

  std::printf("  %-18s %-44s %8s %8s\n", "scheme", "CS(3) per seed", "mean", "acc");
  for (const auto& row : rows) {
    std::string per;
    double mean = 0.0, acc = 0.0;
    for (const auto& s : row.seeds) {
      per += fmt("%.4f ", s.cs3);
      mean += s.cs3 / 5.0;
      acc += s.accuracy / 5.0;
    }
    std::printf("  %-18s %-44s %8.4f %8.4f\n", row.name.c_str(), per.c_str(), mean, acc);
  }
  std::size_t wins = 0;
  double delta = 0.0;
  for (std::size_t i = 0; i < 5; ++i) {
    const double d = rows[1].seeds[i].cs3 - rows[0].seeds[i].cs3;
    wins += d > 0.0;
    delta += d / 5.0;
  }
  const double secs = seconds_since(t0);
  return {wins >= 3 && delta >= 0.0 && secs <= 600.0,
          fmt("alternate beats CE-only on CS(3) in %zu/5 seeds; mean delta %+.4f; %.0fs", wins,
              delta, secs)};
}

// ---------------------------------------------------------------------------
// 8. CLI determinism.

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Every file except metadata.txt, by relative path.
std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file() || e.path().filename() == "metadata.txt") continue;
    out[fs::relative(e.path(), dir).string()] = slurp(e.path());
  }
  return out;
}

Outcome criterion_cli() {
  const fs::path root = fs::temp_directory_path() / "paracon_acceptance_cli";
  fs::remove_all(root);
  fs::create_directories(root);
  const fs::path cfg = root / "run.cfg";
  {
    std::ofstream f(cfg);
    f << "synth.num_labels = 4\nsynth.num_images = 24\nsynth.d_v = 6\n"
         "d_h = 16\nd_z = 8\ntotal_iters = 12\nn_r = 6\nce_batch_size = 36\n"
         "gradcheck.instances = 10\n";
  }
  const std::string cli = PARACON_CLI_PATH;
  const auto invoke = [&](const std::string& cmd, const fs::path& out, const std::string& extra) {
    const std::string line = "\"" + cli + "\" " + cmd + " --config \"" + cfg.string() +
                             "\" --seed 3 --out \"" + out.string() + "\" " + extra +
                             " > \"" + (root / "stdout.txt").string() + "\" 2>&1";
    return std::system(line.c_str()) == 0;
  };

  // Inputs some commands consume.
  bool ok = invoke("synth", root / "base_synth", "") && invoke("train", root / "base_train", "");
  const fs::path candidates = root / "candidates.jsonl";
  {
    std::ofstream f(candidates);
    f << R"({"group_id":"img0_q0","paraphrase_text":"what colour is the car"})" "\n"
      << R"({"group_id":"img0_q0","paraphrase_text":"which is the hue of the car"})" "\n"
      << R"({"group_id":"img1_q1","paraphrase_text":"something else entirely"})" "\n";
  }
  const std::string dataset = (root / "base_synth" / "dataset.jsonl").string();
  const std::string checkpoint = (root / "base_train" / "checkpoint_final.txt").string();

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"synth", ""},
      {"filter", "--set dataset=" + dataset + " --set paraphrases=" + candidates.string() +
                     " --set filter.threshold=0.2"},
      {"train", ""},
      {"eval", "--set checkpoint=" + checkpoint},
      {"gradcheck", ""},
      {"report", "--set runs=" + (root / "base_train").string()},
  };
  std::string detail;
  for (const auto& [cmd, extra] : commands) {
    const fs::path out = root / cmd;
    bool ran = invoke(cmd, out, extra);
    const auto a = ran ? snapshot(out) : std::map<std::string, std::string>{};
    fs::remove_all(out);
    ran = ran && invoke(cmd, out, extra);
    const auto b = ran ? snapshot(out) : std::map<std::string, std::string>{};
    const bool same = ran && !a.empty() && a == b;
    ok = ok && same;
    detail += cmd + (same ? " identical" : " DIFFERS") + fmt(" (%zu files); ", a.size());
  }
  return {ok, detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"gradient suite", criterion_gradients},
      {"equivalence identities", criterion_identities},
      {"consensus oracle", criterion_consensus},
      {"batch composition", criterion_batches},
      {"schedule", criterion_schedule},
      {"joint update", criterion_joint},
      {"direction check", criterion_direction},
      {"CLI determinism", criterion_cli},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int number = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(number)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", number,
                criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
    failures += !o.pass;
  }
  return failures == 0 ? 0 : 1;
}
