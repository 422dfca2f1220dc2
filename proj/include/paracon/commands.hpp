#ifndef PARACON_COMMANDS_HPP_
#define PARACON_COMMANDS_HPP_

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "paracon/config.hpp"
#include "paracon/data_model.hpp"

namespace paracon {

// Every command writes only under cfg.out and records the configuration it
// ran with in <out>/config.txt. Wall-clock information goes to
// <out>/metadata.txt and nowhere else.

// <out>/dataset.jsonl
void cmd_synth(const RunConfig& cfg);

// Reads cfg.dataset for the originals and cfg.paraphrases for candidates.
// Writes <out>/paraphrases.jsonl (accepted records) and
// <out>/dataset.jsonl (originals plus accepted paraphrases as samples).
void cmd_filter(const RunConfig& cfg);

// Writes <out>/runlog.jsonl, <out>/checkpoint_final.txt (plus
// checkpoint_pretrain.txt at the pretrain/finetune boundary) and the final
// evaluation as <out>/report.txt and <out>/report.json.
void cmd_train(const RunConfig& cfg);

// Evaluates cfg.checkpoint, or a freshly initialized network when empty, on
// the evaluation split (all samples when eval_fraction is 0). Writes
// report.txt, report.json and predictions.jsonl.
void cmd_eval(const RunConfig& cfg);

struct GradcheckRow {
  std::string loss;
  double max_rel_error = 0.0;
  std::size_t instances = 0;
  bool pass = false;
};

// Finite-difference check of every loss on random instances.
std::vector<GradcheckRow> run_gradcheck(std::size_t instances, double tolerance,
                                        std::uint64_t seed);

// Writes <out>/gradcheck.txt; returns false when any loss fails.
bool cmd_gradcheck(const RunConfig& cfg);

// Reads config.txt and report.json from each directory in cfg.runs and writes
// a comparison table to <out>/comparison.md.
void cmd_report(const RunConfig& cfg);

// Dataset selected by the config: the file at cfg.dataset, or the synthetic
// generator output.
Dataset load_run_dataset(const RunConfig& cfg);

// (train, eval) split by image.
std::pair<Dataset, Dataset> split_run_dataset(const RunConfig& cfg, const Dataset& data);

}  // namespace paracon

#endif  // PARACON_COMMANDS_HPP_
