#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "uncseg/bridge.hpp"
#include "uncseg/error.hpp"
#include "uncseg/frame.hpp"
#include "uncseg/harness.hpp"
#include "uncseg/scene_io.hpp"

using namespace uncseg;

namespace {

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed, const std::string& out) {
  ExperimentConfig config = config_path.empty() ? ExperimentConfig{} : load_config(config_path);
  if (seed) config.seed = *seed;
  const auto records = run_experiment(config);
  write_outputs(records, config, out);
  std::cout << format_report(aggregate(records, config.steps));
  return 0;
}

int cmd_eval(const std::string& pred_path, const std::string& gt_path) {
  const LabelImage pred = read_label_pgm(pred_path);
  const LabelImage gt = read_label_pgm(gt_path);
  if (pred.shape != gt.shape) throw Error("label maps have different sizes");
  const auto pm = labels_to_masks(pred.shape, pred.labels);
  const auto gm = labels_to_masks(gt.shape, gt.labels);
  const SegEval e = evaluate(pm, gm);
  std::cout << "N_s,N_g,P_n,R_n,F_n,P,R,F\n"
            << pm.size() << "," << gm.size() << "," << format_double(e.osn_precision) << ","
            << format_double(e.osn_recall) << "," << format_double(e.osn_f) << "," << format_double(e.precision)
            << "," << format_double(e.recall) << "," << format_double(e.f) << "\n";
  return 0;
}

int cmd_demo(const std::string& scene_path, const std::string& config_path, std::uint64_t seed,
             const std::string& out) {
  namespace fs = std::filesystem;
  const ExperimentConfig config = config_path.empty() ? ExperimentConfig{} : load_config(config_path);
  const Scene scene = load_scene(scene_path);
  auto store = std::make_shared<FrameStore>();
  OracleSegmenter segmenter(store, config.oracle);
  const auto frame = store->add(scene, config.resolution);
  Rng rng = make_rng(seed, "segmenter");
  const UncosResult result = uncos(frame->obs, segmenter, config.uncos, rng);

  fs::create_directories(out);
  const GridShape shape = frame->obs.shape;
  auto path = [&](const std::string& name) { return (fs::path(out) / name).string(); };
  write_depth_pgm(path("depth.pgm"), shape, frame->obs.depth);
  write_label_pgm(path("truth.pgm"), shape, frame->obs.labels);
  write_label_pgm(path("confident.pgm"), shape, masks_to_labels(shape, result.confident));
  write_label_pgm(path("most_likely.pgm"), shape, masks_to_labels(shape, most_likely_masks(result)));
  std::printf("%zu confident objects, %zu uncertain regions\n", result.confident.size(), result.uncertain.size());
  for (std::size_t r = 0; r < result.uncertain.size(); ++r) {
    const auto& u = result.uncertain[r];
    std::printf("region %zu: %zu pixels\n", r, u.region.footprint.size());
    for (std::size_t h = 0; h < u.hypotheses.size(); ++h) {
      const auto& hyp = u.hypotheses[h];
      std::printf("  hypothesis %zu: weight %.3f, %zu objects%s\n", h, hyp.weight, hyp.masks.size(),
                  hyp.partial ? ", partial" : "");
      write_label_pgm(path("region" + std::to_string(r) + "_hyp" + std::to_string(h) + ".pgm"), shape,
                      masks_to_labels(shape, hyp.masks));
    }
  }
  std::ofstream(path("result.json")) << to_json(result) << "\n";
  return 0;
}

int cmd_bridge_oracle(const std::string& config_path, std::optional<double> resolution) {
  ExperimentConfig config = config_path.empty() ? ExperimentConfig{} : load_config(config_path);
  if (resolution) config.resolution = *resolution;
  serve_oracle(std::cin, std::cout, config.oracle, config.resolution);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Uncertainty-aware tabletop segmentation laboratory"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run the interactive disambiguation experiment");
  std::string config_path, out = "out";
  std::optional<std::uint64_t> seed;
  run->add_option("--config", config_path, "Config file (section.key = value lines)");
  run->add_option("--seed", seed, "Master seed, overrides the config");
  run->add_option("--out", out, "Output directory");

  auto* eval = app.add_subcommand("eval", "Score a predicted label map against ground truth");
  std::string pred, gt;
  eval->add_option("--pred", pred, "Predicted label map (PGM)")->required();
  eval->add_option("--gt", gt, "Ground-truth label map (PGM)")->required();

  auto* demo = app.add_subcommand("demo", "Segment one scene and dump hypothesis label maps");
  std::string scene_path, demo_config, demo_out = "demo";
  std::uint64_t demo_seed = 0;
  demo->add_option("--scene", scene_path, "Scene file")->required();
  demo->add_option("--config", demo_config, "Config file for oracle and segmentation parameters");
  demo->add_option("--seed", demo_seed, "Segmenter seed");
  demo->add_option("--out", demo_out, "Output directory");

  auto* bridge = app.add_subcommand("bridge-oracle", "Serve the oracle segmenter over stdin/stdout JSON lines");
  std::string bridge_config;
  std::optional<double> bridge_resolution;
  bridge->add_option("--config", bridge_config, "Config file for oracle parameters and resolution");
  bridge->add_option("--resolution", bridge_resolution, "Grid resolution in meters, overrides the config");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(config_path, seed, out);
    if (*eval) return cmd_eval(pred, gt);
    if (*demo) return cmd_demo(scene_path, demo_config, demo_seed, demo_out);
    if (*bridge) return cmd_bridge_oracle(bridge_config, bridge_resolution);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
