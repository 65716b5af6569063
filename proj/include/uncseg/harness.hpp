#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "uncseg/belief.hpp"
#include "uncseg/metrics.hpp"
#include "uncseg/planner.hpp"
#include "uncseg/scene.hpp"
#include "uncseg/segmenter.hpp"
#include "uncseg/uncos.hpp"
#include "uncseg/update.hpp"

namespace uncseg {

enum class Method { eos, random, final_frame };

std::string_view to_string(Method method);
Method method_from_string(std::string_view text);

struct ExperimentConfig {
  SceneGenConfig scene;
  OracleConfig oracle;
  UncosParams uncos;
  BeliefParams belief;
  PlannerParams planner;
  TrackerConfig tracker;
  UpdateParams update;
  double resolution = 0.0025;
  int steps = 3;
  int scenes = 20;
  std::vector<Method> methods{Method::eos, Method::random, Method::final_frame};
  std::uint64_t seed = 0;
  /// Worker threads for scenes; 0 uses the hardware concurrency.
  int threads = 0;
  /// Write per-step label maps next to records.csv.
  bool write_label_maps = true;
  /// Whitespace-separated command of a segmenter bridge; empty runs the
  /// oracle in process. Every scene starts its own bridge process.
  std::string bridge;
};

void validate(const ExperimentConfig& config);

/// Flat `section.key = value` lines; '#' starts a comment. Unknown keys and
/// malformed values are errors. Keys not mentioned keep their defaults.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::string& path);
/// The full key set with current values, in the format parse_config reads.
std::string format_config(const ExperimentConfig& config);

struct StepRecord {
  int scene = 0;
  Method method = Method::eos;
  int step = 0;
  double osn_precision = 0.0;
  double osn_recall = 0.0;
  double osn_f = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f = 0.0;
  std::optional<PushAction> action;
  std::vector<int> kappa;
  double wall_time = 0.0;
  /// "ok", "no-ambiguity" (planner found nothing to disambiguate, no
  /// action taken) or "error: <diagnostic>".
  std::string status = "ok";
  /// Predicted and ground-truth masks, kept only when label maps are
  /// written.
  std::vector<Mask> predicted;
  std::vector<Mask> truth;
};

/// Runs every configured method on one scene. finalFrame replays the random
/// method's trajectory, so both are evaluated on the same frames. Records
/// are ordered by method (in config order) and step.
std::vector<StepRecord> run_scene(const Scene& scene, int scene_id, const ExperimentConfig& config);

/// Convenience wrapper returning the records of a single method.
std::vector<StepRecord> run_episode(const Scene& scene, int scene_id, Method method, const ExperimentConfig& config);

Scene experiment_scene(const ExperimentConfig& config, int scene_id);

/// All scenes, sorted by (scene, method, step).
std::vector<StepRecord> run_experiment(const ExperimentConfig& config);

struct MethodSummary {
  Method method = Method::eos;
  /// Mean F and F_n per step across scenes that completed that step.
  std::vector<double> mean_f;
  std::vector<double> mean_osn_f;
  /// Step-0 to final-step change: mean and standard error.
  double delta_f_mean = 0.0;
  double delta_f_se = 0.0;
  double delta_osn_f_mean = 0.0;
  double delta_osn_f_se = 0.0;
  int samples = 0;
  int failures = 0;
};

struct Report {
  std::vector<MethodSummary> methods;
  int steps = 0;
};

Report aggregate(const std::vector<StepRecord>& records, int steps);
std::string format_report(const Report& report);
std::string format_report_csv(const Report& report);

/// CSV columns: scene, method, step, P_n, R_n, F_n, P, R, F, action, kappa,
/// wall_time, status. Timing is zeroed when `with_timing` is false so
/// that repeated runs compare byte for byte.
std::string records_to_csv(const std::vector<StepRecord>& records, bool with_timing = true);
std::vector<StepRecord> records_from_csv(std::string_view text);

/// Writes records.csv, report.txt, report.csv and (optionally) label maps.
void write_outputs(const std::vector<StepRecord>& records, const ExperimentConfig& config,
                   const std::string& out_dir);

}  // namespace uncseg
