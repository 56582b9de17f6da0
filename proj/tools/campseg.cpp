// campseg: dwelling segmentation workflow from one config file.
//
//   campseg prepare   --config run.ini   scene rasters + patch sets
//   campseg upscale   --config run.ini   upscale small training patches (trains EDSR if asked)
//   campseg train     --config run.ini   best.ckpt, last.ckpt, epochs.csv
//   campseg infer     --config run.ini   pred/<region>.tif for test regions
//   campseg eval      --config run.ini   metrics.csv
//   campseg vectorize --config run.ini   vector/<region>.shp
//   campseg report    --config run.ini   per-epoch IoU table
//
// CAMPSEG_THREADS sets the OpenMP thread count.

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "campseg/error.hpp"
#include "campseg/kernels.hpp"
#include "campseg/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Refugee-dwelling segmentation workflow"};
  app.require_subcommand(1);

  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;

  struct Command {
    const char* name;
    const char* help;
    void (*run)(const campseg::PipelineConfig&);
  };
  const Command commands[] = {
      {"prepare", "Write scene rasters and tile every region into patch sets", campseg::cmd_prepare},
      {"upscale", "Upscale small training patches; trains EDSR when selected", campseg::cmd_upscale},
      {"train", "Train the configured model and keep the best epoch", campseg::cmd_train},
      {"infer", "Stitch sliding-window predictions over the test regions", campseg::cmd_infer},
      {"eval", "Score predictions against the ground truth", campseg::cmd_eval},
      {"vectorize", "Turn predicted masks into shapefiles", campseg::cmd_vectorize},
      {"report", "Print the per-epoch validation IoU table",
       [](const campseg::PipelineConfig& c) { std::cout << campseg::cmd_report(c); }},
  };
  for (const auto& c : commands) {
    auto* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("--config", config, "INI run configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Override [run] seed");
    sub->add_option("--out", out, "Override [run] out directory");
  }

  CLI11_PARSE(app, argc, argv);

  try {
    campseg::kernels::configure_threads_from_env();
    const auto cfg = campseg::load_config(config, seed, out ? std::optional<std::filesystem::path>(*out) : std::nullopt);
    for (const auto& c : commands)
      if (app.got_subcommand(c.name)) c.run(cfg);
  } catch (const campseg::Error& e) {
    std::cerr << "campseg: error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "campseg: unexpected failure: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
