#include "paracon/training.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "json.hpp"
#include "paracon/evaluation.hpp"

namespace paracon {

std::string_view to_string(Scheme scheme) {
  switch (scheme) {
    case Scheme::kAlternate:
      return "alternate";
    case Scheme::kJoint:
      return "joint";
    case Scheme::kPretrainFinetune:
      return "pretrain_finetune";
  }
  return "?";
}

Scheme parse_scheme(std::string_view name) {
  if (name == "alternate") return Scheme::kAlternate;
  if (name == "joint") return Scheme::kJoint;
  if (name == "pretrain_finetune") return Scheme::kPretrainFinetune;
  throw std::invalid_argument("unknown training scheme '" + std::string(name) + "'");
}

std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::kCe:
      return "CE";
    case LossKind::kSsc:
      return "SSC";
    case LossKind::kJoint:
      return "JOINT";
  }
  return "?";
}

namespace {

LossKind parse_loss_kind(std::string_view name) {
  if (name == "CE") return LossKind::kCe;
  if (name == "SSC") return LossKind::kSsc;
  if (name == "JOINT") return LossKind::kJoint;
  throw std::invalid_argument("unknown loss kind '" + std::string(name) + "'");
}

}  // namespace

void TrainPlan::validate() const {
  if (total_iters < 0) throw std::invalid_argument("plan: total_iters must be >= 0");
  if (scheme == Scheme::kAlternate && n_ce < 2) {
    throw std::invalid_argument("plan: n_ce must be >= 2 for alternate training");
  }
  if (scheme == Scheme::kJoint && !(beta >= 0.0 && beta <= 1.0)) {
    throw std::invalid_argument("plan: beta must be in [0, 1]");
  }
  if (scheme == Scheme::kPretrainFinetune && (n_pretrain < 0 || n_finetune < 0)) {
    throw std::invalid_argument("plan: n_pretrain and n_finetune must be >= 0");
  }
  if (n_references < 1) throw std::invalid_argument("plan: n_r must be >= 1");
  if (ce_batch_size < 1) throw std::invalid_argument("plan: ce_batch_size must be >= 1");
  if (k_max < 1) throw std::invalid_argument("plan: k_max must be >= 1");
  weights.validate();
  contrastive.validate();
  schedule.validate();
}

std::int64_t TrainPlan::iterations() const {
  return scheme == Scheme::kPretrainFinetune ? n_pretrain + n_finetune : total_iters;
}

TrainStreams::TrainStreams(std::uint64_t seed)
    : ce(Rng(seed).stream(1)), curation(Rng(seed).stream(2)) {}

std::vector<LossKind> alternate_schedule(std::int64_t n, std::int64_t n_ce) {
  if (n_ce < 1) throw std::invalid_argument("alternate_schedule: n_ce must be >= 1");
  std::vector<LossKind> kinds;
  kinds.reserve(static_cast<std::size_t>(std::max<std::int64_t>(n, 0)));
  for (std::int64_t i = 1; i <= n; ++i) {
    kinds.push_back(i % n_ce == 0 ? LossKind::kSsc : LossKind::kCe);
  }
  return kinds;
}

double grad_alignment(std::span<const double> grad_a, std::span<const double> grad_b) {
  if (grad_a.size() != grad_b.size()) {
    throw std::invalid_argument("grad_alignment: gradients differ in shape");
  }
  return dot(grad_a, grad_b);
}

Matrix gather_inputs(const IndexedDataset& idx, std::span<const SampleIndex> batch) {
  const std::size_t d_v = idx.header().d_v;
  Matrix inputs(batch.size(), d_v + idx.d_q());
  for (std::size_t r = 0; r < batch.size(); ++r) {
    const Sample& s = idx.sample(batch[r]);
    auto row = inputs.row(r);
    std::copy(s.image_features.begin(), s.image_features.end(), row.begin());
    std::copy(s.question_embedding.begin(), s.question_embedding.end(), row.begin() + d_v);
  }
  return inputs;
}

std::vector<int> predict_labels(const NetworkState& state, const IndexedDataset& idx,
                                std::span<const SampleIndex> samples) {
  constexpr std::size_t kChunk = 1024;
  std::vector<int> out(idx.size(), -1);
  for (std::size_t begin = 0; begin < samples.size(); begin += kChunk) {
    const auto chunk = samples.subspan(begin, std::min(kChunk, samples.size() - begin));
    const auto cache = forward(state, gather_inputs(idx, chunk), {false, false, true});
    for (std::size_t r = 0; r < chunk.size(); ++r) {
      const auto logits = cache.logits.row(r);
      out[chunk[r]] = static_cast<int>(std::max_element(logits.begin(), logits.end()) -
                                       logits.begin());
    }
  }
  return out;
}

LossGradients ce_gradients(const NetworkState& state, const IndexedDataset& idx,
                           std::span<const SampleIndex> batch) {
  if (batch.empty()) throw std::invalid_argument("ce_gradients: empty batch");
  const auto cache = forward(state, gather_inputs(idx, batch), {true, false, true});
  Matrix dlogits(batch.size(), cache.logits.cols());
  const double inv = 1.0 / static_cast<double>(batch.size());
  LossGradients out;
  for (std::size_t r = 0; r < batch.size(); ++r) {
    const auto ce = cross_entropy(cache.logits.row(r), idx.label(batch[r]));
    out.loss += ce.loss * inv;
    for (std::size_t a = 0; a < ce.grad.size(); ++a) dlogits(r, a) = ce.grad[a] * inv;
  }
  out.grads = backward(state, cache, nullptr, &dlogits);
  return out;
}

LossGradients ssc_gradients(const NetworkState& state, const IndexedDataset& idx,
                            const CuratedBatch& batch, const ContrastiveConfig& cfg) {
  const auto cache = forward(state, gather_inputs(idx, batch.samples), {true, true, false});
  const auto result = scaled_supervised_contrastive(cache.z, batch.relations, cfg);
  LossGradients out;
  out.loss = result.loss;
  out.grads = backward(state, cache, &result.grad, nullptr);
  return out;
}

Gradients combine_gradients(const Gradients& ssc, const Gradients& ce, double beta) {
  if (ssc.values.size() != ce.values.size()) {
    throw std::invalid_argument("combine_gradients: layouts differ");
  }
  Gradients out = ssc;
  for (std::size_t s = 0; s < out.values.size(); ++s) {
    if (ssc.values[s].size() != ce.values[s].size()) {
      throw std::invalid_argument("combine_gradients: layouts differ");
    }
    for (std::size_t i = 0; i < out.values[s].size(); ++i) {
      out.values[s][i] = beta * ssc.values[s][i] + (1.0 - beta) * ce.values[s][i];
    }
  }
  return out;
}

namespace {

constexpr GroupMask kCeMask{true, false, true};
constexpr GroupMask kSscMask{true, true, false};

// Shared bookkeeping: evaluation cadence and log records.
class RunRecorder {
 public:
  RunRecorder(const TrainPlan& plan, const TrainHooks& hooks)
      : plan_(plan), hooks_(hooks), total_(plan.iterations()) {
    every_ = plan.eval_every > 0 ? plan.eval_every : std::max<std::int64_t>(1, total_ / 20);
  }

  void record(const NetworkState& state, std::int64_t i, LossKind kind, double loss, double lr,
              std::optional<double> alignment = std::nullopt) {
    if (!std::isfinite(loss)) {
      throw std::runtime_error("training: non-finite loss at iteration " + std::to_string(i));
    }
    log_.iterations.push_back({i, kind, loss, lr, alignment});
    if (hooks_.eval_set && (i % every_ == 0 || i == total_)) {
      const auto ev = evaluate(state, *hooks_.eval_set, plan_.k_max);
      log_.evals.push_back({i, ev.report.accuracy, ev.report.consensus});
    }
  }

  void checkpoint(std::string_view tag, const NetworkState& state) const {
    if (hooks_.on_checkpoint) hooks_.on_checkpoint(tag, state);
  }

  RunLog take() { return std::move(log_); }

 private:
  const TrainPlan& plan_;
  const TrainHooks& hooks_;
  std::int64_t total_;
  std::int64_t every_;
  RunLog log_;
};

void require_scheme(const TrainPlan& plan, Scheme scheme) {
  if (plan.scheme != scheme) {
    throw std::invalid_argument("plan scheme is " + std::string(to_string(plan.scheme)) +
                                ", expected " + std::string(to_string(scheme)));
  }
  plan.validate();
}

void ce_step(const TrainPlan& plan, const IndexedDataset& idx, NetworkState& state,
             TrainStreams& streams, RunRecorder& rec, std::int64_t i) {
  const auto batch = sample_ce_batch(idx, plan.ce_batch_size, streams.ce);
  auto lg = ce_gradients(state, idx, batch);
  const double lr = lr_at(state.iteration(), plan.schedule);
  apply_step(state, std::move(lg.grads), plan.schedule, plan.adam, kCeMask);
  rec.record(state, i, LossKind::kCe, lg.loss, lr);
}

void ssc_step(const TrainPlan& plan, const IndexedDataset& idx, NetworkState& state,
              TrainStreams& streams, RunRecorder& rec, std::int64_t i) {
  const auto batch = curate(plan.n_references, idx, plan.weights, streams.curation);
  auto lg = ssc_gradients(state, idx, batch, plan.contrastive);
  const double lr = lr_at(state.iteration(), plan.schedule);
  apply_step(state, std::move(lg.grads), plan.schedule, plan.adam, kSscMask);
  rec.record(state, i, LossKind::kSsc, lg.loss, lr);
}

}  // namespace

TrainResult train_alternate(const TrainPlan& plan, const IndexedDataset& idx, NetworkState state,
                            const TrainHooks& hooks) {
  require_scheme(plan, Scheme::kAlternate);
  TrainStreams streams(plan.seed);
  RunRecorder rec(plan, hooks);
  const auto kinds = alternate_schedule(plan.total_iters, plan.n_ce);
  for (std::int64_t i = 1; i <= plan.total_iters; ++i) {
    if (kinds[static_cast<std::size_t>(i - 1)] == LossKind::kSsc) {
      ssc_step(plan, idx, state, streams, rec, i);
    } else {
      ce_step(plan, idx, state, streams, rec, i);
    }
  }
  rec.checkpoint("final", state);
  return {std::move(state), rec.take()};
}

TrainResult train_joint(const TrainPlan& plan, const IndexedDataset& idx, NetworkState state,
                        const TrainHooks& hooks) {
  require_scheme(plan, Scheme::kJoint);
  TrainStreams streams(plan.seed);
  RunRecorder rec(plan, hooks);
  for (std::int64_t i = 1; i <= plan.total_iters; ++i) {
    const auto curated = curate(plan.n_references, idx, plan.weights, streams.curation);
    const auto ce_batch = sample_ce_batch(idx, plan.ce_batch_size, streams.ce);
    const auto ssc = ssc_gradients(state, idx, curated, plan.contrastive);
    const auto ce = ce_gradients(state, idx, ce_batch);
    const double alignment = grad_alignment(ssc.grads.flatten(ParamGroup::kEncoder),
                                            ce.grads.flatten(ParamGroup::kEncoder));
    const double loss = plan.beta * ssc.loss + (1.0 - plan.beta) * ce.loss;
    const double lr = lr_at(state.iteration(), plan.schedule);
    apply_step(state, combine_gradients(ssc.grads, ce.grads, plan.beta), plan.schedule,
               plan.adam, GroupMask::all());
    rec.record(state, i, LossKind::kJoint, loss, lr, alignment);
  }
  rec.checkpoint("final", state);
  return {std::move(state), rec.take()};
}

TrainResult train_pretrain_finetune(const TrainPlan& plan, const IndexedDataset& idx,
                                    NetworkState state, const TrainHooks& hooks) {
  require_scheme(plan, Scheme::kPretrainFinetune);
  TrainStreams streams(plan.seed);
  RunRecorder rec(plan, hooks);
  std::int64_t i = 1;
  for (std::int64_t p = 0; p < plan.n_pretrain; ++p, ++i) {
    ssc_step(plan, idx, state, streams, rec, i);
  }
  rec.checkpoint("pretrain", state);
  for (std::int64_t f = 0; f < plan.n_finetune; ++f, ++i) {
    ce_step(plan, idx, state, streams, rec, i);
  }
  rec.checkpoint("final", state);
  return {std::move(state), rec.take()};
}

TrainResult train(const TrainPlan& plan, const IndexedDataset& idx, NetworkState state,
                  const TrainHooks& hooks) {
  switch (plan.scheme) {
    case Scheme::kAlternate:
      return train_alternate(plan, idx, std::move(state), hooks);
    case Scheme::kJoint:
      return train_joint(plan, idx, std::move(state), hooks);
    case Scheme::kPretrainFinetune:
      return train_pretrain_finetune(plan, idx, std::move(state), hooks);
  }
  throw std::invalid_argument("train: unknown scheme");
}

void write_run_log(std::ostream& out, const RunLog& log) {
  for (const auto& r : log.iterations) {
    nlohmann::ordered_json j;
    j["type"] = "iteration";
    j["iteration"] = r.iteration;
    j["loss_kind"] = to_string(r.kind);
    j["loss"] = r.loss;
    j["lr"] = r.lr;
    if (r.grad_alignment) j["grad_alignment"] = *r.grad_alignment;
    out << j.dump() << '\n';
  }
  for (const auto& e : log.evals) {
    nlohmann::ordered_json j;
    j["type"] = "eval";
    j["iteration"] = e.iteration;
    j["accuracy"] = e.accuracy;
    j["consensus"] = e.consensus;
    out << j.dump() << '\n';
  }
}

RunLog read_run_log(std::istream& in) {
  RunLog log;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    const auto type = j.at("type").get<std::string>();
    if (type == "iteration") {
      IterationRecord r;
      r.iteration = j.at("iteration").get<std::int64_t>();
      r.kind = parse_loss_kind(j.at("loss_kind").get<std::string>());
      r.loss = j.at("loss").get<double>();
      r.lr = j.at("lr").get<double>();
      if (j.contains("grad_alignment")) r.grad_alignment = j["grad_alignment"].get<double>();
      log.iterations.push_back(r);
    } else if (type == "eval") {
      EvalRecord e;
      e.iteration = j.at("iteration").get<std::int64_t>();
      e.accuracy = j.at("accuracy").get<double>();
      e.consensus = j.at("consensus").get<std::vector<double>>();
      log.evals.push_back(std::move(e));
    } else {
      throw std::runtime_error("run log: unknown record type '" + type + "'");
    }
  }
  return log;
}

}  // namespace paracon
