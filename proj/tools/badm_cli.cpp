#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "badm/harness.hpp"

namespace {

// Applies "a.b.c=value" overrides to the raw config JSON before parsing.
void apply_overrides(nlohmann::json& j, const std::vector<std::string>& sets) {
  for (const std::string& kv : sets) {
    auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw badm::ConfigError("--set expects key=value, got '" + kv + "'");
    std::string key = kv.substr(0, eq);
    std::string value = kv.substr(eq + 1);
    std::string pointer = "/";
    for (char c : key) pointer += (c == '.') ? '/' : c;
    nlohmann::json parsed;
    try {
      parsed = nlohmann::json::parse(value);
    } catch (const nlohmann::json::exception&) {
      parsed = value;  // plain string
    }
    j[nlohmann::json::json_pointer(pointer)] = parsed;
  }
}

int dispatch(int argc, char** argv) {
  CLI::App app{
      "badm: batch-ADMM trainer, SGD-family baselines, and convergence certificates.\n"
      "Environment: BADM_OUTPUT_DIR overrides the configured output directory;\n"
      "BADM_THREADS overrides the sub-batch thread count."};
  app.require_subcommand(1);

  std::string config_path, trace_dir, preset_name;
  std::vector<std::string> sets;
  std::uint64_t seed = 0;
  bool seed_given = false;

  CLI::App* run_cmd = app.add_subcommand("run", "Run the experiment described by a JSON config");
  run_cmd->add_option("config", config_path, "path to the experiment config")->required();
  run_cmd->add_option("--set", sets, "override a config key, e.g. --set epochs=20 or --set dataset.n=500");
  run_cmd->add_option("--seed", seed, "override the config seed")->each([&](const std::string&) {
    seed_given = true;
  });

  CLI::App* cert_cmd =
      app.add_subcommand("certify", "Re-check BADM certificates from a finished run directory");
  cert_cmd->add_option("trace-dir", trace_dir, "output directory of a previous run")->required();

  CLI::App* grad_cmd = app.add_subcommand(
      "gradcheck", "Compare analytic gradients against central differences for a config");
  grad_cmd->add_option("config", config_path, "path to the experiment config")->required();

  CLI::App* presets_cmd = app.add_subcommand("presets", "Inspect the shipped hyperparameter presets");
  CLI::App* presets_list_cmd = presets_cmd->add_subcommand("list", "print the preset table");
  CLI::App* presets_show_cmd =
      presets_cmd->add_subcommand("show", "emit a config skeleton for a preset");
  presets_show_cmd->add_option("name", preset_name, "preset name")->required();
  presets_cmd->require_subcommand(1);

  CLI11_PARSE(app, argc, argv);

  auto load = [&]() {
    std::ifstream in(config_path);
    if (!in) throw badm::ConfigError("cannot open config file " + config_path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw badm::ConfigError("invalid JSON in " + config_path + ": " + std::string(e.what()));
    }
    apply_overrides(j, sets);
    if (seed_given) j["seed"] = seed;
    return badm::parse_config(j);
  };

  if (run_cmd->parsed()) return badm::run_experiment(load());
  if (cert_cmd->parsed()) return badm::certify(trace_dir);
  if (grad_cmd->parsed()) return badm::gradcheck(load());
  if (presets_list_cmd->parsed()) {
    badm::presets_list(std::cout);
    return badm::exit_ok;
  }
  if (presets_show_cmd->parsed()) return badm::presets_show(preset_name, std::cout);
  return badm::exit_usage;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const badm::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return badm::exit_usage;
  } catch (const badm::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return badm::exit_data;
  } catch (const badm::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return badm::exit_numeric;
  } catch (const badm::ContractViolation& e) {
    std::cerr << "contract violation: " << e.what() << "\n";
    return badm::exit_numeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return badm::exit_numeric;
  }
}
