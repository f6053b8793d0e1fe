// flexsched: identify, run, bench and export from a JSON configuration.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "flexsched/errors.hpp"
#include "flexsched/experiment.hpp"

namespace fs = std::filesystem;
using namespace flexsched;

namespace {

using Command = std::vector<std::string> (*)(const ExperimentConfig&, const fs::path&,
                                             std::vector<std::string>&);

int execute(const std::string& name, Command command, const std::string& config_path,
            std::optional<std::uint64_t> seed, const fs::path& out) {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentConfig config = config_path.empty() ? ExperimentConfig{} : load_config(config_path);
  if (seed) config.seed = *seed;
  config.validate();

  Manifest manifest;
  manifest.command = name;
  manifest.seed = config.seed;
  manifest.config_hash = sha256_hex(config_to_json(config));
  manifest.outputs = command(config, out, manifest.warnings);
  manifest.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_manifest(manifest, config, out / "manifest.json");

  for (const auto& w : manifest.warnings) std::cerr << "warning: " << w << '\n';
  if (name == "run") {
    std::ifstream table(out / "metrics_table.txt");
    std::cout << table.rdbuf();
  }
  std::cout << name << ": " << manifest.outputs.size() << " outputs in " << out.string()
            << " (config " << manifest.config_hash.substr(0, 12) << ", "
            << manifest.seconds << " s)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Flexibility-envelope scheduling experiments"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  struct Sub {
    const char* name;
    const char* help;
    Command command;
  };
  const Sub subs[] = {
      {"identify", "Collect logs and fit per-building storage models", cmd_identify},
      {"run", "Simulate the test period and report metrics", cmd_run},
      {"bench", "Time problem construction and solving versus pool size", cmd_bench},
      {"export", "Write scheduling problems as LP files", cmd_export},
  };
  std::vector<CLI::App*> apps;
  for (const auto& s : subs) {
    auto* sub = app.add_subcommand(s.name, s.help);
    sub->add_option("--config", config_path, "JSON configuration file");
    sub->add_option("--seed", seed, "Master seed (overrides the configuration)");
    sub->add_option("--out", out, "Output directory")->capture_default_str();
    apps.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "flexsched: " << to_string(ErrorCategory::Config) << ": " << e.what() << '\n';
    return static_cast<int>(ErrorCategory::Config);
  }

  try {
    for (std::size_t i = 0; i < apps.size(); ++i) {
      if (apps[i]->parsed()) return execute(subs[i].name, subs[i].command, config_path, seed, out);
    }
  } catch (const Error& e) {
    std::cerr << "flexsched: " << to_string(e.category()) << ": " << e.what() << '\n';
    return static_cast<int>(e.category());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "flexsched: " << to_string(ErrorCategory::Io) << ": " << e.what() << '\n';
    return static_cast<int>(ErrorCategory::Io);
  } catch (const std::exception& e) {
    std::cerr << "flexsched: " << to_string(ErrorCategory::Internal) << ": " << e.what() << '\n';
    return static_cast<int>(ErrorCategory::Internal);
  }
  return static_cast<int>(ErrorCategory::Internal);
}
