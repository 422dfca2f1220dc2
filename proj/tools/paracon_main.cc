#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "paracon/commands.hpp"
#include "paracon/config.hpp"
#include "paracon/curation.hpp"

namespace {

struct CommonFlags {
  std::string config_path;
  std::string out;
  std::vector<std::string> sets;
  std::int64_t seed = -1;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "key = value configuration file");
  cmd->add_option("--seed", flags.seed, "run seed, overrides the config")->check(CLI::NonNegativeNumber);
  cmd->add_option("--out", flags.out, "output directory, overrides the config");
  cmd->add_option("--set", flags.sets, "extra key=value override (repeatable)");
}

paracon::RunConfig resolve(const CommonFlags& flags) {
  paracon::RunConfig cfg;
  if (!flags.config_path.empty()) cfg = paracon::load_config_file(flags.config_path);
  for (const auto& kv : flags.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      throw paracon::ConfigError("--set expects key=value, got '" + kv + "'");
    }
    const auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t");
      const auto b = s.find_last_not_of(" \t");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    paracon::set_config_value(cfg, trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
  }
  if (flags.seed >= 0) cfg.plan.seed = static_cast<std::uint64_t>(flags.seed);
  if (!flags.out.empty()) cfg.out = flags.out;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"paracon: paraphrase-aware contrastive training toolkit"};
  app.require_subcommand(1);

  CommonFlags flags;
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  auto* filter = app.add_subcommand("filter", "filter paraphrase candidates by similarity");
  auto* train = app.add_subcommand("train", "train a model");
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of every loss");
  auto* report = app.add_subcommand("report", "compare finished runs");
  auto* keys = app.add_subcommand("keys", "list configuration keys");
  for (auto* cmd : {synth, filter, train, eval, gradcheck, report}) add_common(cmd, flags);

  CLI11_PARSE(app, argc, argv);

  try {
    if (keys->parsed()) {
      for (const auto& k : paracon::config_keys()) {
        std::printf("%-28s %s\n", std::string(k.name).c_str(), std::string(k.doc).c_str());
      }
      return 0;
    }
    const paracon::RunConfig cfg = resolve(flags);
    if (synth->parsed()) {
      paracon::cmd_synth(cfg);
    } else if (filter->parsed()) {
      paracon::cmd_filter(cfg);
    } else if (train->parsed()) {
      paracon::cmd_train(cfg);
    } else if (eval->parsed()) {
      paracon::cmd_eval(cfg);
    } else if (gradcheck->parsed()) {
      const bool ok = paracon::cmd_gradcheck(cfg);
      std::ifstream table(cfg.out + "/gradcheck.txt");
      std::cout << table.rdbuf();
      if (!ok) {
        std::cerr << "gradcheck: at least one loss exceeds the tolerance\n";
        return 3;
      }
    } else if (report->parsed()) {
      paracon::cmd_report(cfg);
      std::ifstream table(cfg.out + "/comparison.md");
      std::cout << table.rdbuf();
    }
  } catch (const paracon::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const paracon::CurationError& e) {
    std::cerr << "error: curation: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
