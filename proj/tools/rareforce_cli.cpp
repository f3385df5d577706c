// rareforce: reference solutions, control optimization and reweighted
// estimators for rare-event statistics of 1D Langevin dynamics.

#include <CLI11.hpp>
#include <fmt/format.h>
#include <iostream>

#include "rareforce/pipeline.hpp"

using namespace rareforce;

namespace {

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<unsigned> workers;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* app, CommonOptions& o) {
  app->add_option("--config", o.config_path, "JSON config file (defaults reproduce the double-well experiment)");
  app->add_option("--seed", o.seed, "master seed");
  app->add_option("--out", o.out, "output directory");
  app->add_option("--workers", o.workers, "worker threads for path batches");
  app->add_option("--set", o.overrides, "override a config key, e.g. --set descent.grad_tol=0.02");
}

RunConfig resolve(const CommonOptions& o) {
  nlohmann::json doc = nlohmann::json::object();
  if (!o.config_path.empty()) doc = read_json_file(o.config_path);
  for (const auto& s : o.overrides) apply_override(doc, s);
  if (o.seed) doc["seed"] = *o.seed;
  if (o.out) doc["output_dir"] = *o.out;
  if (o.workers) doc["workers"] = *o.workers;
  return config_from_json(doc);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rare-event sampling by optimal control of Langevin dynamics"};
  app.require_subcommand(1);
  CommonOptions opts;

  using Command = int (*)(const Experiment&, const std::filesystem::path&);
  const std::vector<std::tuple<const char*, const char*, Command>> commands = {
      {"reference", "grid solutions for psi, F and the MFPT; writes reference.csv", cmd_reference},
      {"optimize", "gradient descent (or milestoning) for the ansatz; writes ansatz.json, trace.csv", cmd_optimize},
      {"estimate", "reweighted MFPT and psi estimates; writes estimates.json", cmd_estimate},
      {"gradcheck", "fixed-horizon gradient vs finite differences; writes gradcheck.json", cmd_gradcheck},
      {"compare", "checks artifacts against the reference; writes compare.json", cmd_compare},
  };
  Command selected = nullptr;
  for (const auto& [name, help, fn] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    add_common(sub, opts);
    sub->callback([&selected, f = fn] { selected = f; });
  }
  CLI::App* show = app.add_subcommand("config", "print the resolved config");
  add_common(show, opts);
  bool show_config = false;
  show->callback([&] { show_config = true; });

  CLI11_PARSE(app, argc, argv);

  try {
    const RunConfig cfg = resolve(opts);
    if (show_config) {
      std::cout << to_json(cfg).dump(2) << "\n";
      return 0;
    }
    const Experiment exp = make_experiment(cfg);
    return selected(exp, cfg.output_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
