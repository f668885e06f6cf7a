// plb: command-line driver. Exit codes: 0 success, 2 config error, 3 runtime error.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "plb/experiment.hpp"

namespace {

struct Options {
  std::string config;
  std::string out;
  std::optional<unsigned> workers;
  std::optional<std::uint64_t> seed;
  std::string from_stack;
};

void add_common(CLI::App* sub, Options& o, bool stack) {
  sub->add_option("--config", o.config, "experiment config (JSON)")->required();
  sub->add_option("--out", o.out, "output directory (overrides the config)");
  sub->add_option("--workers", o.workers, "worker threads (0 = hardware concurrency)");
  sub->add_option("--seed", o.seed, "base seed (overrides the config)");
  if (stack) sub->add_option("--from-stack", o.from_stack, "read images from a manifest instead of rendering");
}

plb::ExperimentConfig load(const Options& o) {
  plb::ExperimentConfig cfg = plb::load_experiment(o.config);
  if (!o.out.empty()) cfg.output = o.out;
  if (o.workers) plb::set_workers(cfg, *o.workers);
  if (o.seed) plb::set_seed(cfg, *o.seed);
  return cfg;
}

std::optional<std::filesystem::path> stack_path(const Options& o) {
  if (o.from_stack.empty()) return std::nullopt;
  return std::filesystem::path(o.from_stack);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Estimation bounds for scene parameters from Monte-Carlo renderings"};
  app.require_subcommand(1);
  Options o;
  auto* render = app.add_subcommand("render", "render the bounds stack to PFM files and a manifest");
  auto* bounds = app.add_subcommand("bounds", "HCR and CR bounds over the sweep");
  auto* fisher = app.add_subcommand("fisher", "pixel-wise Fisher information maps");
  auto* viewgrid = app.add_subcommand("viewgrid", "mean Fisher information per camera offset");
  auto* intervals = app.add_subcommand("intervals", "direct and bias-corrected HCR intervals");
  auto* variance = app.add_subcommand("validate-variance", "fit the rendering-variance decay exponent");
  auto* mle = app.add_subcommand("mle", "maximum-likelihood trials against the bounds");
  add_common(render, o, false);
  add_common(bounds, o, true);
  add_common(fisher, o, true);
  add_common(viewgrid, o, false);
  add_common(intervals, o, true);
  add_common(variance, o, false);
  add_common(mle, o, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    const plb::ExperimentConfig cfg = load(o);
    if (render->parsed()) {
      const auto s = plb::cmd_render(cfg);
      std::cout << "wrote " << s.images << " images, manifest " << s.manifest.string() << "\n";
    } else if (bounds->parsed()) {
      const auto rows = plb::cmd_bounds(cfg, stack_path(o));
      std::cout << "wrote " << rows.size() << " rows to " << (cfg.output / "bounds.csv").string() << "\n";
    } else if (fisher->parsed()) {
      const auto rows = plb::cmd_fisher(cfg, stack_path(o));
      std::cout << "wrote " << rows.size() << " rows to " << (cfg.output / "fisher.csv").string() << "\n";
    } else if (viewgrid->parsed()) {
      const auto pts = plb::cmd_viewgrid(cfg);
      std::cout << "wrote " << pts.size() << " viewpoints to " << (cfg.output / "viewgrid_points.csv").string() << "\n";
    } else if (intervals->parsed()) {
      const auto rows = plb::cmd_intervals(cfg, stack_path(o));
      std::cout << "wrote " << rows.size() << " intervals under " << cfg.output.string() << "\n";
    } else if (variance->parsed()) {
      const auto fit = plb::cmd_validate_variance(cfg);
      std::cout << "median p_opt " << plb::format_double(fit.median_p()) << " over " << fit.fits.size() << " draws\n";
    } else if (mle->parsed()) {
      const auto rows = plb::cmd_mle(cfg);
      std::cout << "wrote " << rows.size() << " rows to " << (cfg.output / "mle.csv").string() << "\n";
    }
  } catch (const plb::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const plb::SchemaError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
