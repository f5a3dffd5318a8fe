// headhunt: command-line front end for the offline and online pipeline.
//
// Settings resolve in three layers: built-in defaults, then --config
// (a PipelineConfig JSON file), then explicit flags.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "headhunt/error.hpp"
#include "headhunt/pipeline.hpp"

namespace hh = headhunt;
namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kValidation = 2, kNumerical = 3 };

struct ConfigFlags {
  std::string config_path;
  std::optional<double> lambda;
  std::optional<int> top_k;
  std::optional<double> bandwidth;
  std::optional<double> l2;
  std::optional<double> tolerance;
  std::optional<int> max_iter;
  std::optional<std::string> train_prompt;
  std::optional<std::string> grid_sigma;
  std::optional<std::string> grid_tau;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;

  hh::PipelineConfig resolve() const {
    hh::PipelineConfig c;
    if (!config_path.empty()) c = hh::config_from_json(hh::read_file(config_path));
    if (lambda) c.lambda = *lambda;
    if (top_k) c.top_k = *top_k;
    if (bandwidth) c.bandwidth = *bandwidth;
    if (l2) c.l2 = *l2;
    if (tolerance) c.tolerance = *tolerance;
    if (max_iter) c.max_iter = *max_iter;
    if (train_prompt) c.train_prompt = *train_prompt;
    if (grid_sigma) c.grid.sigmas = hh::parse_range(*grid_sigma);
    if (grid_tau) c.grid.taus = hh::parse_range(*grid_tau);
    if (seed) c.seed = *seed;
    if (workers) c.workers = *workers;
    c.validate();
    return c;
  }
};

void add_common(CLI::App* cmd, ConfigFlags& f) {
  cmd->add_option("--config", f.config_path, "PipelineConfig JSON file; flags take precedence");
  cmd->add_option("--seed", f.seed, "Base seed");
  cmd->add_option("--workers", f.workers, "Worker threads (results do not depend on it)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"headhunt: robust expert-head anomaly detection toolkit"};
  app.require_subcommand(1);
  ConfigFlags flags;

  std::string bank, experts, scorer, locator, detect_dir, out, spec_path;
  std::optional<std::string> opt_experts, opt_bank;
  std::optional<std::uint64_t> gen_seed;

  auto* gen = app.add_subcommand("gen", "Generate a synthetic calibration bank, or a segment split with --experts");
  gen->add_option("--spec", spec_path, "Plant spec JSON (default: recovery layout from --seed)");
  gen->add_option("--seed", gen_seed, "Seed for the default layout; overrides the spec's seed");
  gen->add_option("--experts", opt_experts, "experts.json; writes a segment validation split");
  gen->add_option("--out", out, "Destination bank directory")->required();

  auto* hunt = app.add_subcommand("hunt", "Score heads on a calibration bank and select experts");
  hunt->add_option("--bank", bank, "Calibration bank directory")->required();
  hunt->add_option("--lambda", flags.lambda, "Stability penalty");
  hunt->add_option("--top-k", flags.top_k, "Number of expert heads");
  hunt->add_option("--bandwidth", flags.bandwidth, "Fixed MMD kernel bandwidth (default: median heuristic)");
  hunt->add_option("--out", out, "Output directory for experts.json and saliency.json")->required();
  add_common(hunt, flags);

  auto* train = app.add_subcommand("train-scorer", "Fit the logistic anomaly scorer on expert features");
  train->add_option("--bank", bank, "Calibration bank directory")->required();
  train->add_option("--experts", experts, "experts.json")->required();
  train->add_option("--l2", flags.l2, "L2 penalty on the weights");
  train->add_option("--tolerance", flags.tolerance, "Gradient-norm tolerance");
  train->add_option("--max-iter", flags.max_iter, "Iteration cap");
  train->add_option("--train-prompt", flags.train_prompt, "Train on one prompt's records only");
  train->add_option("--out", out, "Output scorer.json")->required();
  add_common(train, flags);

  auto* calib = app.add_subcommand("calibrate", "Grid-search the locator on a validation split");
  calib->add_option("--bank", bank, "Segment bank with ground truth")->required();
  calib->add_option("--scorer", scorer, "scorer.json")->required();
  calib->add_option("--grid-sigma", flags.grid_sigma, "sigma_g grid, start:step:stop or a single value");
  calib->add_option("--grid-tau", flags.grid_tau, "tau grid, start:step:stop or a single value");
  calib->add_option("--out", out, "Output locator.json")->required();
  add_common(calib, flags);

  auto* det = app.add_subcommand("detect", "Score, smooth and threshold every video of a segment bank");
  det->add_option("--bank", bank, "Segment bank")->required();
  det->add_option("--scorer", scorer, "scorer.json")->required();
  det->add_option("--locator", locator, "locator.json")->required();
  det->add_option("--out", out, "Output directory for curves/ and events.json")->required();

  auto* rep = app.add_subcommand("report", "Summarize detections; frame AUC/AP/F1 when ground truth is given");
  rep->add_option("--detect", detect_dir, "Directory written by detect")->required();
  rep->add_option("--bank", opt_bank, "Bank whose manifest carries ground truth");
  rep->add_option("--out", out, "Also write the summary to this file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  try {
    if (*gen) {
      auto spec = spec_path.empty() ? hh::PlantSpec::recovery_default(gen_seed.value_or(0))
                                    : hh::plant_spec_from_json(hh::read_file(spec_path));
      if (gen_seed) spec.seed = *gen_seed;
      hh::cmd_gen(spec, opt_experts ? std::optional<fs::path>(*opt_experts) : std::nullopt, out);
    } else if (*hunt) {
      hh::cmd_hunt(bank, flags.resolve(), out);
    } else if (*train) {
      hh::cmd_train_scorer(bank, experts, flags.resolve(), out);
    } else if (*calib) {
      hh::cmd_calibrate(bank, scorer, flags.resolve(), out);
    } else if (*det) {
      hh::cmd_detect(bank, scorer, locator, out);
    } else if (*rep) {
      const auto text = hh::cmd_report(detect_dir, opt_bank ? std::optional<fs::path>(*opt_bank) : std::nullopt);
      std::cout << text;
      if (!out.empty()) hh::write_file(out, text);
    }
  } catch (const hh::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kNumerical;
  } catch (const hh::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  }
  return kOk;
}
