#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "hasim/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Trace-driven HTTP adaptive streaming simulator"};
  app.require_subcommand(1);

  std::string config_path, out_dir, bundle_dir, plot_out;
  CLI::App* run = app.add_subcommand("run", "Run the experiment matrix");
  run->add_option("--config", config_path, "Experiment config (JSON)")
      ->required();
  run->add_option("--out", out_dir, "Output directory")->required();

  CLI::App* validate =
      app.add_subcommand("validate", "Replay the controlled profile checks");
  validate->add_option("--out", out_dir, "Output directory")->required();

  CLI::App* plot =
      app.add_subcommand("plot", "Emit plot-ready CSVs from a result bundle");
  plot->add_option("--bundle", bundle_dir, "Directory holding bundle.json")
      ->required();
  plot->add_option("--out", plot_out, "Output directory (default <bundle>/plots)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      hasim::ExperimentConfig cfg = hasim::load_config(config_path);
      hasim::MatrixSummary sum = hasim::run_matrix(cfg, out_dir);
      std::printf("cells=%d sessions=%d flagged=%d\n", sum.cells, sum.sessions,
                  sum.flagged);
      return sum.flagged > 0 ? 2 : 0;
    }
    if (validate->parsed()) {
      hasim::ValidationReport report = hasim::validate_controlled(out_dir);
      for (const auto& c : report.checks)
        std::printf("%s: %s (%s)\n", c.name.c_str(),
                    c.pass ? "pass" : "FAIL", c.detail.c_str());
      return report.all_pass() ? 0 : 2;
    }
    if (plot->parsed()) {
      std::string out = plot_out.empty() ? bundle_dir + "/plots" : plot_out;
      hasim::emit_plot_data(bundle_dir, out);
      std::printf("wrote plot data to %s\n", out.c_str());
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
