#include "sedtomo/pipeline.hpp"

#include "CLI11.hpp"

#include <iostream>

namespace {

enum Exit { kOk = 0, kConfigError = 2, kNumericalError = 3 };

struct Common {
  std::string config;
  std::string out;
  long long seed = -1;
  int workers = -1;
  double beta = -1.0;
  sedtomo::CommandPaths paths;
};

sedtomo::PipelineConfig load(const Common& c) {
  sedtomo::PipelineConfig cfg =
      c.config.empty() ? sedtomo::parse_pipeline_config("{}") : sedtomo::load_pipeline_config(c.config);
  if (!c.out.empty()) cfg.output = c.out;
  if (c.seed >= 0) cfg.seed = std::uint64_t(c.seed);
  if (c.workers >= 0) cfg.workers = c.workers;
  if (c.beta >= 0.0) cfg.recon.beta = c.beta;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Strain tomography from scanning (precession) electron diffraction"};
  app.require_subcommand(1);
  Common common;
  app.add_option("-c,--config", common.config, "Pipeline configuration (JSON)");
  app.add_option("-o,--out", common.out, "Output directory");
  app.add_option("--seed", common.seed, "Master random seed");
  app.add_option("-j,--workers", common.workers, "Worker threads (0: all cores)");
  app.add_option("--beta", common.beta, "TV weight, overrides the config")->check(CLI::NonNegativeNumber);

  using Cmd = void (*)(const sedtomo::PipelineConfig&, const sedtomo::CommandPaths&, std::ostream&);
  struct Entry {
    const char* name;
    const char* help;
    Cmd fn;
  };
  const Entry entries[] = {
      {"phantom", "Build a layered or dislocation phantom", sedtomo::cmd_phantom},
      {"simulate", "Simulate (precessed) diffraction over the scan and tilts", sedtomo::cmd_simulate},
      {"detect", "Detect disk centres and assemble tensor sinograms", sedtomo::cmd_detect},
      {"project", "Project the phantom with the transverse ray transform", sedtomo::cmd_project},
      {"reconstruct", "TV-regularised tensor reconstruction", sedtomo::cmd_reconstruct},
      {"evaluate", "Compare a reconstruction with the truth", sedtomo::cmd_evaluate},
      {"pipeline", "Run every stage from one config", sedtomo::cmd_pipeline},
  };
  Cmd selected = nullptr;
  for (const Entry& e : entries) {
    CLI::App* sub = app.add_subcommand(e.name, e.help);
    sub->add_option("--phantom", common.paths.phantom, "Phantom (TVF deformation volume)");
    sub->add_option("--truth", common.paths.truth, "Truth tensor volume");
    sub->add_option("--geometry", common.paths.geometry, "Acquisition geometry (JSON)");
    sub->add_option("--sinogram", common.paths.sinogram, "Tensor sinogram (TVF)");
    sub->add_option("--recon", common.paths.recon, "Reconstructed tensor volume");
    sub->add_option("--support", common.paths.support, "Support mask (TVF scalar volume)");
    sub->callback([&selected, fn = e.fn] { selected = fn; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    const sedtomo::PipelineConfig cfg = load(common);
    common.paths.out = cfg.output;
    selected(cfg, common.paths, std::cout);
  } catch (const sedtomo::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const sedtomo::FormatError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumericalError;
  }
  return kOk;
}
