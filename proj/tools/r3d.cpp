// Command-line front end: runs pipeline stages from one config file.
#include "r3d/config.hpp"
#include "r3d/runner.hpp"

#include "CLI11.hpp"

#include <iostream>

namespace {

struct Args {
  std::string config_path;
  std::vector<std::string> overrides;
  bool force = false;
  bool quiet = false;
};

r3d::RunConfig Resolve(const Args& args) {
  r3d::RunConfig config =
      args.config_path.empty() ? r3d::RunConfig{} : r3d::LoadConfig(args.config_path);
  for (const std::string& item : args.overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) {
      throw r3d::ConfigError({"--set expects section.key=value, got '" + item + "'"});
    }
    r3d::SetConfigValue(config, item.substr(0, eq), item.substr(eq + 1));
  }
  if (auto errors = r3d::ValidateConfig(config); !errors.empty()) {
    throw r3d::ConfigError(std::move(errors));
  }
  return config;
}

int RunStages(const Args& args, const std::vector<std::string>& stages) {
  const r3d::RunConfig config = Resolve(args);
  r3d::StageOptions options;
  options.force = args.force;
  options.log = args.quiet ? nullptr : &std::cerr;
  for (const std::string& stage : stages) r3d::RunStage(stage, config, options);
  return r3d::kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Repeatability pipeline: synth, detect, paint, label, eval, report"};
  app.require_subcommand(1);
  Args args;
  app.add_option("-c,--config", args.config_path, "Config file (key = value with [sections])");
  app.add_option("-s,--set", args.overrides, "Override one key: section.key=value")
      ->allow_extra_args(false);
  app.add_flag("-f,--force", args.force, "Replace outputs that are stale");
  app.add_flag("-q,--quiet", args.quiet, "No progress messages");

  std::vector<std::string> stages;
  for (const std::string& name : r3d::StageNames()) {
    app.add_subcommand(name, "Run the " + name + " stage")->callback([&stages, name] {
      stages = {name};
    });
  }
  app.add_subcommand("all", "Run every stage in order")->callback([&stages] {
    stages = r3d::StageNames();
  });
  bool print_config = false;
  app.add_subcommand("config", "Print the resolved config")->callback([&print_config] {
    print_config = true;
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? r3d::kExitOk : r3d::kExitUsage;
  }

  try {
    if (print_config) {
      std::cout << r3d::FormatConfig(Resolve(args));
      return r3d::kExitOk;
    }
    return RunStages(args, stages);
  } catch (const r3d::ConfigError& e) {
    std::cerr << e.what() << "\n";
    return r3d::kExitUsage;
  } catch (const r3d::StageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code();
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return r3d::kExitInternal;
  }
}
