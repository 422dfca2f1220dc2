#ifndef PARACON_CONFIG_HPP_
#define PARACON_CONFIG_HPP_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "paracon/similarity.hpp"
#include "paracon/synthetic_task.hpp"
#include "paracon/training.hpp"

namespace paracon {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Every tunable of a run. Loaded from a flat "key = value" file; see
// config_keys() for the accepted keys.
struct RunConfig {
  // Data. An empty dataset path means "generate from synth".
  std::string dataset;
  SynthSpec synth;
  double eval_fraction = 0.25;  // share of images held out for evaluation
  std::uint64_t split_seed = 0;
  double epsilon = 0.95;  // question-negative similarity threshold

  // Paraphrase filtering.
  std::string paraphrases;
  FilterPolicy filter;

  // Model.
  std::size_t d_h = 64;
  std::size_t d_z = 128;

  // Training. plan.schedule holds the reference step counts; effective_plan()
  // rescales them to the run length unless they were set explicitly.
  TrainPlan plan;
  bool schedule_steps_explicit = false;

  // Gradient check.
  std::size_t gradcheck_instances = 100;
  double gradcheck_tolerance = 1e-5;
  std::uint64_t gradcheck_seed = 1;

  // Evaluation and reporting.
  std::string checkpoint;
  std::vector<std::string> runs;

  std::string out = "out";

  std::uint64_t seed() const { return plan.seed; }
  TrainPlan effective_plan() const;
  void validate() const;
};

struct ConfigKey {
  std::string_view name;
  std::string_view doc;
};

const std::vector<ConfigKey>& config_keys();

// Applies "key = value" lines on top of `base`. Blank lines and lines starting
// with '#' are skipped. Unknown keys, repeated keys and malformed values throw
// ConfigError naming the key and line.
RunConfig parse_config(std::istream& in, RunConfig base = {});
RunConfig load_config_file(const std::string& path);

// Sets one key; throws ConfigError on an unknown key or bad value.
void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value);

// Canonical listing of every key, one per line, that parse_config reads back
// to an identical configuration.
std::string config_to_text(const RunConfig& cfg);

}  // namespace paracon

#endif  // PARACON_CONFIG_HPP_
