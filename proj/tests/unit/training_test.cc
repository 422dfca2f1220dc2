#include <sstream>

#include "doctest.h"
#include "paracon/similarity.hpp"
#include "paracon/synthetic_task.hpp"
#include "paracon/training.hpp"

using namespace paracon;

namespace {

const IndexedDataset& tiny_index() {
  static const IndexedDataset idx = [] {
    SynthSpec spec;
    spec.num_labels = 4;
    spec.num_images = 24;
    spec.d_v = 6;
    const auto data = generate(spec);
    return IndexedDataset::build(data.samples, data.header, 0.95, TokenHashEmbedder());
  }();
  return idx;
}

NetworkState fresh_state(std::uint64_t seed = 1) {
  return NetworkState::initialize({6, tiny_index().d_q(), 16, 8, 4}, seed);
}

TrainPlan small_plan(Scheme scheme, std::int64_t iters) {
  TrainPlan plan;
  plan.scheme = scheme;
  plan.total_iters = iters;
  plan.n_references = 8;
  plan.ce_batch_size = 48;
  plan.schedule.base_lr = 1e-3;
  plan.schedule = plan.schedule.scaled_to(iters);
  plan.seed = 5;
  return plan;
}

TrainPlan single_loss(Scheme base, std::int64_t iters, bool contrastive) {
  auto plan = small_plan(base, iters);
  plan.scheme = Scheme::kPretrainFinetune;
  plan.n_pretrain = contrastive ? iters : 0;
  plan.n_finetune = contrastive ? 0 : iters;
  return plan;
}

}  // namespace

TEST_SUITE("training") {

TEST_CASE("alternate schedule puts every n_ce-th iteration on the contrastive loss") {
  const auto kinds = alternate_schedule(20, 4);
  for (std::int64_t i = 1; i <= 20; ++i) {
    CHECK((kinds[i - 1] == LossKind::kSsc) == (i % 4 == 0));
  }
  CHECK(alternate_schedule(0, 4).empty());
  CHECK_THROWS(alternate_schedule(5, 0));
}

TEST_CASE("alternate training logs the 3:1 mix and leaves idle heads untouched") {
  const auto plan = small_plan(Scheme::kAlternate, 12);
  const auto result = train(plan, tiny_index(), fresh_state());
  REQUIRE(result.log.iterations.size() == 12);
  for (const auto& r : result.log.iterations) {
    CHECK((r.kind == LossKind::kSsc) == (r.iteration % 4 == 0));
    CHECK(std::isfinite(r.loss));
  }
  CHECK(result.state.iteration() == 12);

  const auto init = fresh_state();
  const auto ce_only = train(single_loss(Scheme::kAlternate, 6, false), tiny_index(), init);
  CHECK(ce_only.state.group_hash(ParamGroup::kProjection) ==
        init.group_hash(ParamGroup::kProjection));
  CHECK(ce_only.state.group_hash(ParamGroup::kEncoder) != init.group_hash(ParamGroup::kEncoder));
  const auto ssc_only = train(single_loss(Scheme::kAlternate, 6, true), tiny_index(), init);
  CHECK(ssc_only.state.group_hash(ParamGroup::kClassifier) ==
        init.group_hash(ParamGroup::kClassifier));
}

TEST_CASE("training is deterministic for a seed") {
  for (Scheme s : {Scheme::kAlternate, Scheme::kJoint}) {
    const auto plan = small_plan(s, 8);
    const auto a = train(plan, tiny_index(), fresh_state());
    const auto b = train(plan, tiny_index(), fresh_state());
    CHECK(a.state == b.state);
    std::stringstream la, lb;
    write_run_log(la, a.log);
    write_run_log(lb, b.log);
    CHECK(la.str() == lb.str());
  }
}

TEST_CASE("joint training with beta at the ends reproduces single-loss runs bitwise") {
  for (const double beta : {0.0, 1.0}) {
    auto plan = small_plan(Scheme::kJoint, 6);
    plan.beta = beta;
    const auto joint = train(plan, tiny_index(), fresh_state());
    const auto single = train(single_loss(Scheme::kJoint, 6, beta == 1.0), tiny_index(),
                              fresh_state());
    for (std::size_t s = 0; s < joint.state.params().size(); ++s) {
      CHECK(joint.state.params()[s].value == single.state.params()[s].value);
    }
  }
}

TEST_CASE("joint gradient is the beta blend of the two losses") {
  const auto& idx = tiny_index();
  const auto state = fresh_state();
  Rng rng(3);
  const auto batch = curate(8, idx, NegativeWeights{}, rng);
  const auto ssc = ssc_gradients(state, idx, batch, ContrastiveConfig{});
  const auto ce = ce_gradients(state, idx, batch.samples);
  const auto mixed = combine_gradients(ssc.grads, ce.grads, 0.3);
  for (std::size_t s = 0; s < mixed.values.size(); ++s) {
    for (std::size_t i = 0; i < mixed.values[s].size(); ++i) {
      CHECK(mixed.values[s][i] ==
            doctest::Approx(0.3 * ssc.grads.values[s][i] + 0.7 * ce.grads.values[s][i])
                .epsilon(1e-12));
    }
  }
  for (double g : ssc.grads.values[NetworkState::kClsW]) CHECK(g == 0.0);
  for (double g : ce.grads.values[NetworkState::kProjW1]) CHECK(g == 0.0);
}

TEST_CASE("joint runs log gradient alignment") {
  const auto result = train(small_plan(Scheme::kJoint, 3), tiny_index(), fresh_state());
  for (const auto& r : result.log.iterations) {
    CHECK(r.kind == LossKind::kJoint);
    CHECK(r.grad_alignment.has_value());
  }
  const std::vector<double> a = {1.0, 2.0}, b = {3.0, -1.0};
  CHECK(grad_alignment(a, b) == 1.0);
  CHECK_THROWS(grad_alignment(a, std::vector<double>{1.0}));
}

TEST_CASE("pretrain-finetune switches losses at the boundary and checkpoints there") {
  auto plan = small_plan(Scheme::kPretrainFinetune, 0);
  plan.n_pretrain = 3;
  plan.n_finetune = 4;
  plan.schedule = LrSchedule{}.scaled_to(plan.iterations());
  std::vector<std::string> tags;
  TrainHooks hooks;
  hooks.on_checkpoint = [&](std::string_view tag, const NetworkState&) {
    tags.emplace_back(tag);
  };
  hooks.eval_set = &tiny_index();
  const auto result = train(plan, tiny_index(), fresh_state(), hooks);
  REQUIRE(result.log.iterations.size() == 7);
  for (const auto& r : result.log.iterations) {
    CHECK((r.kind == LossKind::kSsc) == (r.iteration <= 3));
  }
  CHECK(tags == std::vector<std::string>{"pretrain", "final"});
  CHECK_FALSE(result.log.evals.empty());
  CHECK(result.log.evals.back().iteration == 7);
}

TEST_CASE("run logs round-trip") {
  RunLog log;
  log.iterations.push_back({1, LossKind::kCe, 1.25, 2e-5, std::nullopt});
  log.iterations.push_back({2, LossKind::kJoint, 0.1 + 0.2, 3e-5, -0.5});
  log.evals.push_back({2, 0.5, {0.5, 0.25}});
  std::stringstream buf;
  write_run_log(buf, log);
  const auto back = read_run_log(buf);
  REQUIRE(back.iterations.size() == 2);
  CHECK(back.iterations[1].loss == 0.1 + 0.2);
  CHECK(back.iterations[1].grad_alignment == -0.5);
  CHECK_FALSE(back.iterations[0].grad_alignment.has_value());
  CHECK(back.evals[0].consensus == log.evals[0].consensus);
  std::stringstream bad("{\"type\":\"other\"}\n");
  CHECK_THROWS(read_run_log(bad));
}

TEST_CASE("plans are validated") {
  auto plan = small_plan(Scheme::kAlternate, 4);
  plan.n_ce = 1;
  CHECK_THROWS(plan.validate());
  plan = small_plan(Scheme::kJoint, 4);
  plan.beta = 1.5;
  CHECK_THROWS(plan.validate());
  plan = small_plan(Scheme::kAlternate, 4);
  CHECK_THROWS(train_joint(plan, tiny_index(), fresh_state()));
  CHECK(parse_scheme("pretrain_finetune") == Scheme::kPretrainFinetune);
  CHECK_THROWS(parse_scheme("mixed"));
}

}  // TEST_SUITE
