#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hgf/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Hyperbolic geometric flow solver and verification harness"};
  std::string command_name;
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir;
  std::uint64_t seed = 0;
  app.add_option("command", command_name,
                 "run | verify-exact | verify-curvature | verify-symmetric-system | stability | convergence")
      ->required();
  app.add_option("--config", config_path, "section.key = value configuration file");
  app.add_option("--set", overrides, "override one key, e.g. --set run.t_end=2");
  auto* out_opt = app.add_option("--out", out_dir, "output directory (overrides output.dir)");
  auto* seed_opt = app.add_option("--seed", seed, "seed (overrides run.seed)");
  CLI11_PARSE(app, argc, argv);

  const auto command = hgf::cli::parse_command(command_name);
  if (!command) {
    std::cerr << "error: unknown command '" << command_name << "'\n";
    return 2;
  }
  std::string text;
  if (!config_path.empty()) {
    std::ifstream f(config_path);
    if (!f) {
      std::cerr << "error: cannot read " << config_path << '\n';
      return 2;
    }
    std::ostringstream buf;
    buf << f.rdbuf();
    text = buf.str();
  }
  if (*out_opt) overrides.push_back("output.dir=" + out_dir);
  if (*seed_opt) overrides.push_back("run.seed=" + std::to_string(seed));

  auto parsed = hgf::cli::parse_config(text, overrides);
  if (!parsed.config) {
    for (const auto& issue : parsed.issues) {
      std::cerr << (issue.line ? config_path + ":" + std::to_string(issue.line) : std::string("--set")) << ": "
                << issue.kind << ": " << issue.message << '\n';
    }
    return 2;
  }
  parsed.config->command = *command;
  return hgf::cli::dispatch(*parsed.config, std::cout, std::cerr);
}
