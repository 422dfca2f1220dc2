#include "paracon/config.hpp"

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <istream>
#include <set>
#include <sstream>

namespace paracon {

namespace {

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view want) {
  throw ConfigError("config key '" + std::string(key) + "': invalid value '" +
                    std::string(value) + "' (expected " + std::string(want) + ")");
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename Int>
Int parse_integer(std::string_view key, std::string_view value) {
  Int out{};
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (value.empty() || ec != std::errc() || ptr != end) bad_value(key, value, "an integer");
  return out;
}

double parse_double(std::string_view key, std::string_view value) {
  const std::string text(value);
  char* end = nullptr;
  const double out = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size()) bad_value(key, value, "a number");
  return out;
}

std::vector<std::string> parse_list(std::string_view value) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= value.size()) {
    const auto comma = value.find(',', start);
    const auto piece = trim(value.substr(start, comma == std::string_view::npos
                                                    ? std::string_view::npos
                                                    : comma - start));
    if (!piece.empty()) out.emplace_back(piece);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ',';
    out += items[i];
  }
  return out;
}

struct Field {
  ConfigKey key;
  std::function<void(RunConfig&, std::string_view key, std::string_view value)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
Field int_field(std::string_view name, std::string_view doc, T RunConfig::*member) {
  return {{name, doc},
          [member](RunConfig& c, std::string_view k, std::string_view v) {
            c.*member = parse_integer<T>(k, v);
          },
          [member](const RunConfig& c) { return std::to_string(c.*member); }};
}

template <typename T>
Field plan_int_field(std::string_view name, std::string_view doc, T TrainPlan::*member) {
  return {{name, doc},
          [member](RunConfig& c, std::string_view k, std::string_view v) {
            c.plan.*member = parse_integer<T>(k, v);
          },
          [member](const RunConfig& c) { return std::to_string(c.plan.*member); }};
}

Field double_field(std::string_view name, std::string_view doc,
                   std::function<double&(RunConfig&)> ref) {
  return {{name, doc},
          [ref](RunConfig& c, std::string_view k, std::string_view v) {
            ref(c) = parse_double(k, v);
          },
          [ref](const RunConfig& c) { return format_double(ref(const_cast<RunConfig&>(c))); }};
}

Field string_field(std::string_view name, std::string_view doc, std::string RunConfig::*member) {
  return {{name, doc},
          [member](RunConfig& c, std::string_view, std::string_view v) { c.*member = v; },
          [member](const RunConfig& c) { return c.*member; }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back(string_field("dataset", "dataset file; empty generates from synth.*",
                             &RunConfig::dataset));
    f.push_back({{"synth.num_labels", "number of answer classes"},
                 [](RunConfig& c, std::string_view k, std::string_view v) {
                   c.synth.num_labels = parse_integer<int>(k, v);
                 },
                 [](const RunConfig& c) { return std::to_string(c.synth.num_labels); }});
    const auto synth_size = [](std::string_view name, std::string_view doc,
                               std::size_t SynthSpec::*member) {
      return Field{{name, doc},
                   [member](RunConfig& c, std::string_view k, std::string_view v) {
                     c.synth.*member = parse_integer<std::size_t>(k, v);
                   },
                   [member](const RunConfig& c) { return std::to_string(c.synth.*member); }};
    };
    f.push_back(synth_size("synth.num_images", "number of images", &SynthSpec::num_images));
    f.push_back(synth_size("synth.groups_per_image", "question templates per image",
                           &SynthSpec::groups_per_image));
    f.push_back(synth_size("synth.paraphrases_per_group", "paraphrases per question",
                           &SynthSpec::paraphrases_per_group));
    f.push_back(synth_size("synth.d_v", "image feature dimension", &SynthSpec::d_v));
    f.push_back(double_field("synth.feature_noise", "std-dev of image feature noise",
                             [](RunConfig& c) -> double& { return c.synth.feature_noise; }));
    f.push_back(double_field("synth.perturb_rate", "paraphrase token perturbation rate",
                             [](RunConfig& c) -> double& { return c.synth.perturb_rate; }));
    f.push_back({{"synth.seed", "generator seed"},
                 [](RunConfig& c, std::string_view k, std::string_view v) {
                   c.synth.seed = parse_integer<std::uint64_t>(k, v);
                 },
                 [](const RunConfig& c) { return std::to_string(c.synth.seed); }});
    f.push_back(double_field("eval_fraction", "share of images held out for evaluation",
                             [](RunConfig& c) -> double& { return c.eval_fraction; }));
    f.push_back(int_field("split_seed", "seed of the train/eval image split",
                          &RunConfig::split_seed));
    f.push_back(double_field("epsilon", "question-negative similarity threshold",
                             [](RunConfig& c) -> double& { return c.epsilon; }));

    f.push_back(string_field("paraphrases", "paraphrase candidate file for filter",
                             &RunConfig::paraphrases));
    f.push_back(double_field("filter.threshold", "minimum similarity to the original",
                             [](RunConfig& c) -> double& { return c.filter.threshold; }));
    f.push_back({{"filter.max_keep", "paraphrases kept per question"},
                 [](RunConfig& c, std::string_view k, std::string_view v) {
                   c.filter.max_keep = parse_integer<std::size_t>(k, v);
                 },
                 [](const RunConfig& c) { return std::to_string(c.filter.max_keep); }});

    f.push_back(int_field("d_h", "encoder width", &RunConfig::d_h));
    f.push_back(int_field("d_z", "projection dimension", &RunConfig::d_z));

    f.push_back({{"scheme", "alternate | joint | pretrain_finetune"},
                 [](RunConfig& c, std::string_view k, std::string_view v) {
                   try {
                     c.plan.scheme = parse_scheme(v);
                   } catch (const std::exception&) {
                     bad_value(k, v, "alternate, joint or pretrain_finetune");
                   }
                 },
                 [](const RunConfig& c) { return std::string(to_string(c.plan.scheme)); }});
    f.push_back(plan_int_field("total_iters", "iterations for alternate and joint",
                               &TrainPlan::total_iters));
    f.push_back(plan_int_field("n_ce", "alternate: every n_ce-th iteration is contrastive",
                               &TrainPlan::n_ce));
    f.push_back(double_field("beta", "joint: contrastive gradient weight",
                             [](RunConfig& c) -> double& { return c.plan.beta; }));
    f.push_back(plan_int_field("n_pretrain", "pretrain_finetune: contrastive iterations",
                               &TrainPlan::n_pretrain));
    f.push_back(plan_int_field("n_finetune", "pretrain_finetune: cross-entropy iterations",
                               &TrainPlan::n_finetune));
    f.push_back(plan_int_field("n_r", "curated batch references (batch holds 6 n_r)",
                               &TrainPlan::n_references));
    f.push_back(plan_int_field("ce_batch_size", "cross-entropy batch size",
                               &TrainPlan::ce_batch_size));
    f.push_back(double_field("w_img", "negative type weight: same image",
                             [](RunConfig& c) -> double& { return c.plan.weights.img; }));
    f.push_back(double_field("w_que", "negative type weight: similar question",
                             [](RunConfig& c) -> double& { return c.plan.weights.que; }));
    f.push_back(double_field("w_rand", "negative type weight: random",
                             [](RunConfig& c) -> double& { return c.plan.weights.rand; }));
    f.push_back(double_field("tau", "contrastive temperature",
                             [](RunConfig& c) -> double& { return c.plan.contrastive.tau; }));
    f.push_back(double_field("s", "paraphrase pair scaling factor",
                             [](RunConfig& c) -> double& { return c.plan.contrastive.s; }));
    f.push_back({{"alpha_mode", "constant | dynamic"},
                 [](RunConfig& c, std::string_view k, std::string_view v) {
                   try {
                     c.plan.contrastive.alpha_mode = parse_alpha_mode(std::string(v));
                   } catch (const std::exception&) {
                     bad_value(k, v, "constant or dynamic");
                   }
                 },
                 [](const RunConfig& c) { return to_string(c.plan.contrastive.alpha_mode); }});

    f.push_back(double_field("lr.base", "peak learning rate",
                             [](RunConfig& c) -> double& { return c.plan.schedule.base_lr; }));
    f.push_back(double_field(
        "lr.warmup_factor", "initial fraction of the peak learning rate",
        [](RunConfig& c) -> double& { return c.plan.schedule.warmup_factor; }));
    f.push_back({{"lr.warmup_iters", "warmup length; unset scales 4266 by total/25000"},
                 [](RunConfig& c, std::string_view k, std::string_view v) {
                   c.plan.schedule.warmup_iters = parse_integer<std::int64_t>(k, v);
                   c.schedule_steps_explicit = true;
                 },
                 [](const RunConfig& c) {
                   return std::to_string(c.plan.schedule.warmup_iters);
                 }});
    f.push_back(double_field(
        "lr.decay_factor", "multiplier applied at each decay step",
        [](RunConfig& c) -> double& { return c.plan.schedule.decay_factor; }));
    f.push_back({{"lr.decay_steps", "comma list; unset scales 10665,14931 by total/25000"},
                 [](RunConfig& c, std::string_view k, std::string_view v) {
                   std::vector<std::int64_t> steps;
                   for (const auto& piece : parse_list(v)) {
                     steps.push_back(parse_integer<std::int64_t>(k, piece));
                   }
                   c.plan.schedule.decay_steps = steps;
                   c.schedule_steps_explicit = true;
                 },
                 [](const RunConfig& c) {
                   std::vector<std::string> items;
                   for (auto s : c.plan.schedule.decay_steps) items.push_back(std::to_string(s));
                   return join(items);
                 }});
    f.push_back({{"lr.steps_explicit", "0: rescale warmup and decay steps to the run length"},
                 [](RunConfig& c, std::string_view k, std::string_view v) {
                   if (v != "0" && v != "1") bad_value(k, v, "0 or 1");
                   c.schedule_steps_explicit = v == "1";
                 },
                 [](const RunConfig& c) {
                   return std::string(c.schedule_steps_explicit ? "1" : "0");
                 }});
    f.push_back(double_field("adam.beta1", "Adam first-moment decay",
                             [](RunConfig& c) -> double& { return c.plan.adam.beta1; }));
    f.push_back(double_field("adam.beta2", "Adam second-moment decay",
                             [](RunConfig& c) -> double& { return c.plan.adam.beta2; }));
    f.push_back(double_field("adam.eps", "Adam epsilon",
                             [](RunConfig& c) -> double& { return c.plan.adam.eps; }));
    f.push_back(double_field("clip_norm", "global gradient L2 clip; <= 0 disables",
                             [](RunConfig& c) -> double& { return c.plan.adam.clip_norm; }));
    f.push_back(plan_int_field("seed", "run seed (initialization and batch sampling)",
                               &TrainPlan::seed));
    f.push_back(plan_int_field("eval_every", "evaluation cadence; 0 is max(1, N/20)",
                               &TrainPlan::eval_every));
    f.push_back(plan_int_field("k_max", "largest consensus subset size", &TrainPlan::k_max));

    f.push_back(int_field("gradcheck.instances", "random instances per loss",
                          &RunConfig::gradcheck_instances));
    f.push_back(double_field("gradcheck.tolerance", "max relative error",
                             [](RunConfig& c) -> double& { return c.gradcheck_tolerance; }));
    f.push_back(int_field("gradcheck.seed", "seed of the random instances",
                          &RunConfig::gradcheck_seed));

    f.push_back(string_field("checkpoint", "checkpoint for eval; empty evaluates a fresh model",
                             &RunConfig::checkpoint));
    f.push_back({{"runs", "comma list of run directories for report"},
                 [](RunConfig& c, std::string_view, std::string_view v) { c.runs = parse_list(v); },
                 [](const RunConfig& c) { return join(c.runs); }});
    f.push_back(string_field("out", "output directory", &RunConfig::out));
    return f;
  }();
  return table;
}

}  // namespace

TrainPlan RunConfig::effective_plan() const {
  TrainPlan p = plan;
  if (!schedule_steps_explicit) p.schedule = plan.schedule.scaled_to(plan.iterations());
  return p;
}

void RunConfig::validate() const {
  const auto wrap = [](const char* key, const auto& fn) {
    try {
      fn();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("config ") + key + ": " + e.what());
    }
  };
  wrap("synth.*", [&] { synth.validate(); });
  wrap("filter.*", [&] { filter.validate(); });
  wrap("training", [&] { effective_plan().validate(); });
  if (!(eval_fraction >= 0.0 && eval_fraction < 1.0)) {
    throw ConfigError("config key 'eval_fraction': must be in [0, 1)");
  }
  if (!(epsilon > 0.0 && epsilon <= 1.0)) {
    throw ConfigError("config key 'epsilon': must be in (0, 1]");
  }
  if (d_h < 1) throw ConfigError("config key 'd_h': must be >= 1");
  if (d_z < 1) throw ConfigError("config key 'd_z': must be >= 1");
  if (gradcheck_instances < 1) throw ConfigError("config key 'gradcheck.instances': must be >= 1");
  if (!(gradcheck_tolerance > 0.0)) {
    throw ConfigError("config key 'gradcheck.tolerance': must be positive");
  }
  if (out.empty()) throw ConfigError("config key 'out': must not be empty");
}

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> out;
    for (const auto& f : fields()) out.push_back(f.key);
    return out;
  }();
  return keys;
}

void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value) {
  for (const auto& f : fields()) {
    if (f.key.name == key) {
      f.set(cfg, key, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

RunConfig parse_config(std::istream& in, RunConfig base) {
  std::set<std::string, std::less<>> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = trim(line);
    if (text.empty() || text.front() == '#') continue;
    const auto eq = text.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const auto key = trim(text.substr(0, eq));
    const auto value = trim(text.substr(eq + 1));
    if (!seen.insert(std::string(key)).second) {
      throw ConfigError("config line " + std::to_string(line_no) + ": key '" +
                        std::string(key) + "' repeated");
    }
    try {
      set_config_value(base, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return base;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse_config(in);
}

std::string config_to_text(const RunConfig& cfg) {
  std::ostringstream out;
  for (const auto& f : fields()) out << f.key.name << " = " << f.get(cfg) << '\n';
  return out.str();
}

}  // namespace paracon
