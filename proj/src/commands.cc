#include "paracon/commands.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "paracon/evaluation.hpp"
#include "paracon/network.hpp"
#include "paracon/rng.hpp"
#include "paracon/similarity.hpp"
#include "paracon/synthetic_task.hpp"
#include "paracon/training.hpp"

namespace paracon {

namespace fs = std::filesystem;

namespace {

std::string out_path(const RunConfig& cfg, const std::string& name) {
  return (fs::path(cfg.out) / name).string();
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  return out;
}

// Prepares the output directory and records the configuration; writes the
// wall-clock metadata file when the command finishes.
class RunDirectory {
 public:
  RunDirectory(const RunConfig& cfg, std::string command)
      : cfg_(cfg), command_(std::move(command)), start_(std::chrono::system_clock::now()) {
    cfg.validate();
    fs::create_directories(cfg.out);
    open_out(out_path(cfg, "config.txt")) << config_to_text(cfg);
  }

  ~RunDirectory() {
    const auto end = std::chrono::system_clock::now();
    const std::time_t started = std::chrono::system_clock::to_time_t(start_);
    std::tm tm{};
    gmtime_r(&started, &tm);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &tm);
    std::ofstream meta(out_path(cfg_, "metadata.txt"));
    meta << "command " << command_ << "\nstarted " << stamp << "\nelapsed_seconds "
         << std::chrono::duration<double>(end - start_).count() << '\n';
  }

  RunDirectory(const RunDirectory&) = delete;
  RunDirectory& operator=(const RunDirectory&) = delete;

 private:
  const RunConfig& cfg_;
  std::string command_;
  std::chrono::system_clock::time_point start_;
};

IndexedDataset index(const RunConfig& cfg, const Dataset& data) {
  return IndexedDataset::build(data.samples, data.header, cfg.epsilon, TokenHashEmbedder());
}

NetworkDims dims_for(const RunConfig& cfg, const IndexedDataset& idx) {
  return {idx.header().d_v, idx.d_q(), cfg.d_h, cfg.d_z,
          static_cast<std::size_t>(idx.header().num_labels)};
}

void write_evaluation(const RunConfig& cfg, const Evaluation& ev, bool with_predictions) {
  {
    auto out = open_out(out_path(cfg, "report.txt"));
    write_report_text(out, ev.report);
  }
  {
    auto out = open_out(out_path(cfg, "report.json"));
    write_report_json(out, ev.report);
  }
  if (with_predictions) {
    auto out = open_out(out_path(cfg, "predictions.jsonl"));
    write_predictions(out, ev.groups);
  }
}

}  // namespace

Dataset load_run_dataset(const RunConfig& cfg) {
  if (cfg.dataset.empty()) return generate(cfg.synth);
  return read_dataset_file(cfg.dataset);
}

std::pair<Dataset, Dataset> split_run_dataset(const RunConfig& cfg, const Dataset& data) {
  if (cfg.eval_fraction == 0.0) return {data, Dataset{data.header, {}}};
  return split_by_image(data, cfg.eval_fraction, cfg.split_seed);
}

void cmd_synth(const RunConfig& cfg) {
  RunDirectory dir(cfg, "synth");
  write_dataset_file(out_path(cfg, "dataset.jsonl"), generate(cfg.synth));
}

void cmd_filter(const RunConfig& cfg) {
  if (cfg.paraphrases.empty()) {
    throw ConfigError("config key 'paraphrases': required by the filter command");
  }
  RunDirectory dir(cfg, "filter");
  Dataset data = load_run_dataset(cfg);

  std::map<std::string, std::size_t> original_of;  // group_id -> sample position
  std::set<std::string> ids;
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    const auto& s = data.samples[i];
    ids.insert(s.sample_id);
    if (!s.is_paraphrase) original_of.emplace(s.group_id, i);
  }

  std::ifstream in(cfg.paraphrases);
  if (!in) throw std::runtime_error("cannot open paraphrase file '" + cfg.paraphrases + "'");
  const auto records = read_paraphrases(in);

  std::vector<std::string> group_order;
  std::map<std::string, std::vector<std::string>> candidates;
  for (const auto& r : records) {
    if (!original_of.count(r.group_id)) {
      throw std::runtime_error("paraphrase file names unknown group '" + r.group_id + "'");
    }
    auto& list = candidates[r.group_id];
    if (list.empty()) group_order.push_back(r.group_id);
    list.push_back(r.paraphrase_text);
  }

  const TokenHashEmbedder embedder;
  std::vector<ParaphraseRecord> accepted;
  for (const auto& group : group_order) {
    const Sample& original = data.samples[original_of.at(group)];
    FilterPolicy policy = cfg.filter;
    policy.rng_seed = splitmix64(cfg.seed() ^ stable_hash(group));
    const auto kept =
        filter_paraphrases(original.question_text, candidates.at(group), policy, embedder);
    for (std::size_t j = 0; j < kept.size(); ++j) {
      accepted.push_back({group, kept[j]});
      Sample s = original;
      s.sample_id = group + "_f" + std::to_string(j);
      if (!ids.insert(s.sample_id).second) {
        throw std::runtime_error("filtered paraphrase id '" + s.sample_id +
                                 "' collides with an existing sample");
      }
      s.question_text = kept[j];
      s.question_embedding.clear();
      s.is_paraphrase = true;
      data.samples.push_back(std::move(s));
    }
  }
  {
    auto out = open_out(out_path(cfg, "paraphrases.jsonl"));
    write_paraphrases(out, accepted);
  }
  write_dataset_file(out_path(cfg, "dataset.jsonl"), data);
}

void cmd_train(const RunConfig& cfg) {
  RunDirectory dir(cfg, "train");
  const auto [train_data, eval_data] = split_run_dataset(cfg, load_run_dataset(cfg));
  const IndexedDataset train_idx = index(cfg, train_data);
  const bool held_out = !eval_data.samples.empty();
  const IndexedDataset eval_idx = held_out ? index(cfg, eval_data) : train_idx;

  TrainHooks hooks;
  hooks.eval_set = &eval_idx;
  hooks.on_checkpoint = [&](std::string_view tag, const NetworkState& state) {
    save_checkpoint_file(out_path(cfg, "checkpoint_" + std::string(tag) + ".txt"), state);
  };
  const auto plan = cfg.effective_plan();
  const auto result = train(plan, train_idx,
                            NetworkState::initialize(dims_for(cfg, train_idx), plan.seed), hooks);
  {
    auto out = open_out(out_path(cfg, "runlog.jsonl"));
    write_run_log(out, result.log);
  }
  write_evaluation(cfg, evaluate(result.state, eval_idx, plan.k_max), false);
}

void cmd_eval(const RunConfig& cfg) {
  RunDirectory dir(cfg, "eval");
  const auto [train_data, eval_data] = split_run_dataset(cfg, load_run_dataset(cfg));
  const IndexedDataset idx = index(cfg, eval_data.samples.empty() ? train_data : eval_data);
  const NetworkDims dims = dims_for(cfg, idx);
  NetworkState state = cfg.checkpoint.empty() ? NetworkState::initialize(dims, cfg.seed())
                                              : load_checkpoint_file(cfg.checkpoint);
  const auto& got = state.dims();
  if (got.d_v != dims.d_v || got.d_q != dims.d_q || got.num_labels != dims.num_labels) {
    throw std::runtime_error("checkpoint '" + cfg.checkpoint +
                             "' does not match the dataset dimensions");
  }
  write_evaluation(cfg, evaluate(state, idx, cfg.plan.k_max), true);
}

bool cmd_gradcheck(const RunConfig& cfg) {
  RunDirectory dir(cfg, "gradcheck");
  const auto rows =
      run_gradcheck(cfg.gradcheck_instances, cfg.gradcheck_tolerance, cfg.gradcheck_seed);
  auto out = open_out(out_path(cfg, "gradcheck.txt"));
  char line[160];
  std::snprintf(line, sizeof line, "%-24s %9s %14s %s\n", "loss", "instances", "max_rel_error",
                "status");
  out << line;
  bool all = true;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%-24s %9zu %14.3e %s\n", r.loss.c_str(), r.instances,
                  r.max_rel_error, r.pass ? "PASS" : "FAIL");
    out << line;
    all = all && r.pass;
  }
  std::snprintf(line, sizeof line, "tolerance %.3e\n", cfg.gradcheck_tolerance);
  out << line;
  return all;
}

namespace {

struct RunSummary {
  std::string name;
  RunConfig cfg;
  nlohmann::json report;
};

std::string losses_column(const TrainPlan& p) {
  bool ssc = false;
  bool ce = false;
  switch (p.scheme) {
    case Scheme::kAlternate:
      ssc = p.n_ce <= p.total_iters;
      ce = p.total_iters > 0;
      break;
    case Scheme::kJoint:
      ssc = p.total_iters > 0 && p.beta > 0.0;
      ce = p.total_iters > 0 && p.beta < 1.0;
      break;
    case Scheme::kPretrainFinetune:
      ssc = p.n_pretrain > 0;
      ce = p.n_finetune > 0;
      break;
  }
  if (ssc && ce) return "SSC + CE";
  if (ssc) return "SSC";
  if (ce) return "CE";
  return "-";
}

std::string scaling_column(const TrainPlan& p) {
  if (losses_column(p).find("SSC") == std::string::npos) return "-";
  char buf[48];
  if (p.contrastive.alpha_mode == AlphaMode::kDynamic) {
    std::snprintf(buf, sizeof buf, "dynamic s=%g", p.contrastive.s);
  } else if (p.contrastive.s == 1.0) {
    return "none";
  } else {
    std::snprintf(buf, sizeof buf, "s=%g", p.contrastive.s);
  }
  return buf;
}

std::string negatives_column(const TrainPlan& p) {
  if (losses_column(p).find("SSC") == std::string::npos) return "-";
  std::string out;
  for (const NegativeType t : kAllNegativeTypes) {
    if (p.weights.weight(t) <= 0.0) continue;
    if (!out.empty()) out += '+';
    out += std::string(to_string(t));
  }
  return out;
}

std::string scheme_column(const TrainPlan& p) {
  char buf[48];
  switch (p.scheme) {
    case Scheme::kAlternate:
      std::snprintf(buf, sizeof buf, "alternate n_ce=%lld", static_cast<long long>(p.n_ce));
      return buf;
    case Scheme::kJoint:
      std::snprintf(buf, sizeof buf, "joint beta=%g", p.beta);
      return buf;
    case Scheme::kPretrainFinetune:
      std::snprintf(buf, sizeof buf, "pretrain-finetune %lld/%lld",
                    static_cast<long long>(p.n_pretrain), static_cast<long long>(p.n_finetune));
      return buf;
  }
  return "?";
}

std::string percent(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * x);
  return buf;
}

}  // namespace

void cmd_report(const RunConfig& cfg) {
  if (cfg.runs.empty()) throw ConfigError("config key 'runs': required by the report command");
  RunDirectory dir(cfg, "report");
  std::vector<RunSummary> runs;
  std::size_t k_max = 0;
  for (const auto& run : cfg.runs) {
    RunSummary s;
    fs::path path(run);
    s.name = (path.has_filename() ? path.filename() : path.parent_path().filename()).string();
    s.cfg = load_config_file((path / "config.txt").string());
    std::ifstream in(path / "report.json");
    if (!in) throw std::runtime_error("run '" + run + "' has no report.json");
    try {
      in >> s.report;
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error("run '" + run + "': malformed report.json: " + e.what());
    }
    k_max = std::max(k_max, s.report.at("consensus").size());
    runs.push_back(std::move(s));
  }

  std::ostringstream table;
  table << "| Run | Loss(es) | Scaling | N-Type | Train Scheme |";
  for (std::size_t k = 1; k <= k_max; ++k) table << " CS(" << k << ") |";
  table << " Acc |\n|---|---|---|---|---|";
  for (std::size_t k = 0; k <= k_max; ++k) table << "---|";
  table << '\n';
  for (const auto& r : runs) {
    const TrainPlan p = r.cfg.effective_plan();
    table << "| " << r.name << " | " << losses_column(p) << " | " << scaling_column(p) << " | "
          << negatives_column(p) << " | " << scheme_column(p) << " |";
    const auto& cs = r.report.at("consensus");
    for (std::size_t k = 0; k < k_max; ++k) {
      table << ' ' << (k < cs.size() ? percent(cs[k].get<double>()) : "-") << " |";
    }
    table << ' ' << percent(r.report.at("accuracy").get<double>()) << " |\n";
  }
  open_out(out_path(cfg, "comparison.md")) << table.str();
}

}  // namespace paracon
