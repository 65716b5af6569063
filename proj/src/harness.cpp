#include "uncseg/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <numbers>
#include <sstream>
#include <thread>

#include "uncseg/bridge.hpp"
#include "uncseg/error.hpp"
#include "uncseg/frame.hpp"
#include "uncseg/scene_io.hpp"

namespace uncseg {

std::string_view to_string(Method method) {
  switch (method) {
    case Method::eos:
      return "eos";
    case Method::random:
      return "random";
    case Method::final_frame:
      return "finalFrame";
  }
  return "?";
}

Method method_from_string(std::string_view text) {
  if (text == "eos") return Method::eos;
  if (text == "random") return Method::random;
  if (text == "finalFrame") return Method::final_frame;
  throw Error("unknown method: " + std::string(text));
}

// ---------------------------------------------------------------------------
// Configuration

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(std::string_view text, std::string_view key) {
  T value{};
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) throw Error("bad value for " + std::string(key) + ": " + std::string(text));
  return value;
}

bool parse_bool(std::string_view text, std::string_view key) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw Error("bad value for " + std::string(key) + ": " + std::string(text));
}

std::string format_methods(const std::vector<Method>& methods) {
  std::string out;
  for (std::size_t i = 0; i < methods.size(); ++i) out += (i ? "," : "") + std::string(to_string(methods[i]));
  return out;
}

std::vector<Method> parse_methods(std::string_view text) {
  std::vector<Method> out;
  while (!text.empty()) {
    const auto comma = text.find(',');
    const auto item = trim(text.substr(0, comma));
    if (item.empty()) throw Error("empty method name");
    const Method m = method_from_string(item);
    if (std::find(out.begin(), out.end(), m) != out.end()) throw Error("duplicate method: " + std::string(item));
    out.push_back(m);
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  if (out.empty()) throw Error("no methods configured");
  return out;
}

struct Key {
  std::string name;
  std::function<void(ExperimentConfig&, std::string_view)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <typename T>
Key bind(std::string name, T ExperimentConfig::*section, double T::*field) {
  return {name, [=](ExperimentConfig& c, std::string_view v) { c.*section.*field = parse_number<double>(v, name); },
          [=](const ExperimentConfig& c) { return format_double(c.*section.*field); }};
}

template <typename T>
Key bind(std::string name, T ExperimentConfig::*section, int T::*field) {
  return {name, [=](ExperimentConfig& c, std::string_view v) { c.*section.*field = parse_number<int>(v, name); },
          [=](const ExperimentConfig& c) { return std::to_string(c.*section.*field); }};
}

const std::vector<Key>& keys() {
  using C = ExperimentConfig;
  static const std::vector<Key> table = [] {
    std::vector<Key> k;
    k.push_back(bind("scene.min_bodies", &C::scene, &SceneGenConfig::min_bodies));
    k.push_back(bind("scene.max_bodies", &C::scene, &SceneGenConfig::max_bodies));
    k.push_back(bind("scene.min_parts", &C::scene, &SceneGenConfig::min_parts));
    k.push_back(bind("scene.max_parts", &C::scene, &SceneGenConfig::max_parts));
    k.push_back(bind("scene.min_extent", &C::scene, &SceneGenConfig::min_extent));
    k.push_back(bind("scene.max_extent", &C::scene, &SceneGenConfig::max_extent));
    k.push_back(bind("scene.min_height", &C::scene, &SceneGenConfig::min_height));
    k.push_back(bind("scene.max_height", &C::scene, &SceneGenConfig::max_height));
    k.push_back(bind("scene.clutter", &C::scene, &SceneGenConfig::clutter));
    k.push_back(bind("scene.table_size", &C::scene, &SceneGenConfig::table_size));
    k.push_back(bind("scene.margin", &C::scene, &SceneGenConfig::margin));
    k.push_back(bind("scene.clearance", &C::scene, &SceneGenConfig::clearance));
    k.push_back(bind("scene.quantum", &C::scene, &SceneGenConfig::quantum));
    k.push_back(bind("scene.max_retries", &C::scene, &SceneGenConfig::max_retries));
    k.push_back(bind("oracle.p_part", &C::oracle, &OracleConfig::p_part));
    k.push_back(bind("oracle.p_merge", &C::oracle, &OracleConfig::p_merge));
    k.push_back(bind("oracle.boundary_noise", &C::oracle, &OracleConfig::boundary_noise));
    k.push_back(bind("oracle.td_recall", &C::oracle, &OracleConfig::td_recall));
    k.push_back(bind("oracle.td_merge", &C::oracle, &OracleConfig::td_merge));
    k.push_back(bind("oracle.seeds_per_body", &C::oracle, &OracleConfig::seeds_per_body));
    k.push_back(bind("uncos.gamma", &C::uncos, &UncosParams::gamma));
    k.push_back(bind("uncos.sigma_m", &C::uncos, &UncosParams::sigma_m));
    k.push_back(bind("uncos.sigma_u", &C::uncos, &UncosParams::sigma_u));
    k.push_back(bind("uncos.verify_prompts", &C::uncos, &UncosParams::verify_prompts));
    k.push_back(bind("uncos.num_hypotheses", &C::uncos, &UncosParams::num_hypotheses));
    k.push_back(bind("uncos.alpha_frac", &C::uncos, &UncosParams::alpha_frac));
    k.push_back(bind("uncos.beta", &C::uncos, &UncosParams::beta));
    k.push_back(bind("uncos.dup_iou", &C::uncos, &UncosParams::dup_iou));
    k.push_back(bind("uncos.thickness", &C::uncos, &UncosParams::thickness));
    k.push_back(bind("uncos.seed_nms_iou", &C::uncos, &UncosParams::seed_nms_iou));
    k.push_back(bind("uncos.attempt_budget", &C::uncos, &UncosParams::attempt_budget));
    k.push_back(bind("uncos.plane_iters", &C::uncos, &UncosParams::plane_iters));
    k.push_back(bind("uncos.plane_inlier_dist", &C::uncos, &UncosParams::plane_inlier_dist));
    k.push_back(bind("uncos.background_fraction", &C::uncos, &UncosParams::background_fraction));
    k.push_back(bind("belief.lambda", &C::belief, &BeliefParams::lambda));
    k.push_back(bind("belief.delta", &C::belief, &BeliefParams::delta));
    k.push_back(bind("belief.p0", &C::belief, &BeliefParams::p0));
    k.push_back(bind("belief.eps_w", &C::belief, &BeliefParams::eps_w));
    k.push_back(bind("belief.kappa_rot", &C::belief, &BeliefParams::kappa_rot));
    k.push_back(bind("belief.prior_weight", &C::belief, &BeliefParams::prior_weight));
    k.push_back(bind("belief.rigid_fraction", &C::belief, &BeliefParams::rigid_fraction));
    k.push_back(bind("planner.k", &C::planner, &PlannerParams::k));
    k.push_back(bind("planner.world_cap", &C::planner, &PlannerParams::world_cap));
    k.push_back(bind("planner.push_distance", &C::planner, &PlannerParams::push_distance));
    k.push_back(bind("planner.standoff_px", &C::planner, &PlannerParams::standoff_px));
    k.push_back(bind("tracker.dropout", &C::tracker, &TrackerConfig::dropout));
    k.push_back(bind("tracker.jitter", &C::tracker, &TrackerConfig::jitter));
    k.push_back(bind("update.reg_iters", &C::update, &UpdateParams::reg_iters));
    k.push_back(bind("update.inlier_dist", &C::update, &UpdateParams::inlier_dist));
    k.push_back(bind("update.voxel", &C::update, &UpdateParams::voxel));
    k.push_back({"experiment.resolution",
                 [](C& c, std::string_view v) { c.resolution = parse_number<double>(v, "experiment.resolution"); },
                 [](const C& c) { return format_double(c.resolution); }});
    k.push_back({"experiment.steps", [](C& c, std::string_view v) { c.steps = parse_number<int>(v, "experiment.steps"); },
                 [](const C& c) { return std::to_string(c.steps); }});
    k.push_back({"experiment.scenes",
                 [](C& c, std::string_view v) { c.scenes = parse_number<int>(v, "experiment.scenes"); },
                 [](const C& c) { return std::to_string(c.scenes); }});
    k.push_back({"experiment.methods", [](C& c, std::string_view v) { c.methods = parse_methods(v); },
                 [](const C& c) { return format_methods(c.methods); }});
    k.push_back({"experiment.seed",
                 [](C& c, std::string_view v) { c.seed = parse_number<std::uint64_t>(v, "experiment.seed"); },
                 [](const C& c) { return std::to_string(c.seed); }});
    k.push_back({"experiment.threads",
                 [](C& c, std::string_view v) { c.threads = parse_number<int>(v, "experiment.threads"); },
                 [](const C& c) { return std::to_string(c.threads); }});
    k.push_back({"experiment.write_label_maps",
                 [](C& c, std::string_view v) { c.write_label_maps = parse_bool(v, "experiment.write_label_maps"); },
                 [](const C& c) { return std::string(c.write_label_maps ? "true" : "false"); }});
    k.push_back({"experiment.bridge", [](C& c, std::string_view v) { c.bridge = std::string(v); },
                 [](const C& c) { return c.bridge; }});
    return k;
  }();
  return table;
}

}  // namespace

void validate(const ExperimentConfig& c) {
  if (c.steps < 0) throw Error("experiment steps must be non-negative");
  if (c.scenes < 1) throw Error("experiment scenes must be positive");
  if (!(c.resolution > 0)) throw Error("experiment resolution must be positive");
  if (c.methods.empty()) throw Error("no methods configured");
  if (c.threads < 0) throw Error("experiment threads must be non-negative");
  validate(c.oracle);
  validate(c.uncos);
  validate(c.belief);
  validate(c.planner);
  validate(c.tracker);
  validate(c.update);
}

ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig c;
  int line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw Error("config line " + std::to_string(line_no) + ": expected key = value");
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    const auto& table = keys();
    auto it = std::find_if(table.begin(), table.end(), [&](const Key& k) { return k.name == key; });
    if (it == table.end()) throw Error("config line " + std::to_string(line_no) + ": unknown key " + std::string(key));
    it->set(c, value);
  }
  validate(c);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string format_config(const ExperimentConfig& config) {
  std::string out;
  for (const auto& k : keys()) out += k.name + " = " + k.get(config) + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Episodes

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string sanitize(std::string s) {
  for (char& ch : s)
    if (ch == ',' || ch == '\n' || ch == '\r' || ch == '"') ch = ';';
  return s;
}

std::vector<Mask> truth_masks(const Observation& obs) {
  std::vector<Mask> out;
  for (auto& [id, m] : obs.body_masks()) out.push_back(std::move(m));
  return out;
}

std::vector<int> kappas(const Belief& belief) {
  std::vector<int> out;
  for (const auto& r : belief.regions)
    out.push_back(region_uncertainty(r, belief.params.lambda, belief.params.delta));
  return out;
}

void score(StepRecord& rec, const std::vector<Mask>& pred, const Observation& obs, bool keep_masks) {
  const std::vector<Mask> gt = truth_masks(obs);
  const SegEval e = evaluate(pred, gt);
  rec.osn_precision = e.osn_precision;
  rec.osn_recall = e.osn_recall;
  rec.osn_f = e.osn_f;
  rec.precision = e.precision;
  rec.recall = e.recall;
  rec.f = e.f;
  if (keep_masks) {
    rec.predicted = pred;
    rec.truth = gt;
  }
}

/// Everything one scene needs: its own frame store and segmenter, so scenes
/// share no mutable state.
class SceneRun {
 public:
  SceneRun(const Scene& scene, int id, const ExperimentConfig& config)
      : config_(config),
        id_(id),
        store_(std::make_shared<FrameStore>()),
        tracker_(store_, config.tracker) {
    initial_ = store_->add(scene, config.resolution);
  }

  std::unique_ptr<Segmenter> make_segmenter() const {
    if (config_.bridge.empty()) return std::make_unique<OracleSegmenter>(store_, config_.oracle);
    std::istringstream words(config_.bridge);
    std::vector<std::string> argv{std::istream_iterator<std::string>(words), std::istream_iterator<std::string>()};
    auto client = std::make_shared<BridgeClient>(std::make_unique<ChildProcessTransport>(argv));
    return std::make_unique<BridgeSegmenter>(std::move(client), store_);
  }

  std::vector<StepRecord> run() {
    const bool want_random = has(Method::random) || has(Method::final_frame);
    std::vector<StepRecord> out;
    StepRecord first;
    first.scene = id_;
    Belief belief;
    try {
      const auto t0 = Clock::now();
      Rng rng = make_rng(config_.seed, "segmenter", static_cast<std::uint64_t>(id_));
      segmenter_ = make_segmenter();
      const UncosResult result = uncos(initial_->obs, *segmenter_, config_.uncos, rng);
      belief = init_belief(result, initial_->obs, config_.belief);
      score(first, project_to_masks(most_likely(belief), initial_->obs), initial_->obs, config_.write_label_maps);
      first.kappa = kappas(belief);
      first.wall_time = seconds_since(t0);
    } catch (const std::exception& e) {
      first.status = "error: " + sanitize(e.what());
      for (Method m : config_.methods) {
        first.method = m;
        out.push_back(first);
      }
      return out;
    }

    std::vector<StepRecord> eos, random, final_frame;
    std::vector<std::shared_ptr<const Frame>> trajectory{initial_};
    if (has(Method::eos)) eos = interactive(Method::eos, first, belief, nullptr);
    if (want_random) random = interactive(Method::random, first, belief, &trajectory);
    if (has(Method::final_frame)) final_frame = replay(first, random, trajectory);

    for (Method m : config_.methods) {
      auto& src = m == Method::eos ? eos : m == Method::random ? random : final_frame;
      out.insert(out.end(), src.begin(), src.end());
    }
    return out;
  }

 private:
  bool has(Method m) const { return std::find(config_.methods.begin(), config_.methods.end(), m) != config_.methods.end(); }

  std::optional<PushAction> choose_eos(const Belief& belief, const Observation& obs, Rng& rng) {
    const auto target = select_target_region(belief);
    if (!target) return std::nullopt;
    const double distance =
        config_.planner.push_distance > 0 ? config_.planner.push_distance : default_push_distance(belief, obs);
    const auto candidates = sample_actions(belief, *target, obs, config_.planner, distance, rng);
    if (candidates.empty()) return std::nullopt;
    const auto worlds = construct_worlds(belief, obs, config_.planner.world_cap);
    return candidates[select_action(worlds, candidates, obs).index].action;
  }

  std::optional<PushAction> choose_random(const Belief& belief, const Observation& obs, Rng& rng) {
    // Any object of any hypothesis, as in the planner's own sampling.
    std::vector<ObjectHypothesis> objects = belief.confident;
    for (const auto& r : belief.regions)
      for (const auto& h : r.hypotheses) objects.insert(objects.end(), h.objects.begin(), h.objects.end());
    std::erase_if(objects, [](const ObjectHypothesis& o) { return o.mask.empty(); });
    if (objects.empty()) return std::nullopt;
    const double distance =
        config_.planner.push_distance > 0 ? config_.planner.push_distance : default_push_distance(belief, obs);
    const auto& o = objects[uniform_index(rng, objects.size())];
    const double theta = 2.0 * std::numbers::pi * uniform01(rng);
    return push_through(o.mask, obs, {std::cos(theta), std::sin(theta)}, distance, config_.planner.standoff_px);
  }

  std::vector<StepRecord> interactive(Method method, StepRecord first, Belief belief,
                                      std::vector<std::shared_ptr<const Frame>>* trajectory) {
    const std::string tag(to_string(method));
    Rng planner = make_rng(config_.seed, "planner/" + tag, static_cast<std::uint64_t>(id_));
    Rng tracker = make_rng(config_.seed, "tracker/" + tag, static_cast<std::uint64_t>(id_));
    first.method = method;
    std::vector<StepRecord> out{first};
    auto frame = initial_;
    for (int t = 1; t <= config_.steps; ++t) {
      StepRecord rec;
      rec.scene = id_;
      rec.method = method;
      rec.step = t;
      const auto t0 = Clock::now();
      try {
        rec.action = method == Method::eos ? choose_eos(belief, frame->obs, planner)
                                           : choose_random(belief, frame->obs, planner);
        if (rec.action) {
          const Scene next = apply_push(frame->scene, *rec.action).scene;
          auto next_frame = store_->add(next, config_.resolution);
          belief = update_belief(belief, frame->obs, next_frame->obs, tracker_, config_.update, t, tracker);
          frame = next_frame;
        } else {
          rec.status = "no-ambiguity";
        }
        score(rec, project_to_masks(most_likely(belief), frame->obs), frame->obs, config_.write_label_maps);
        rec.kappa = kappas(belief);
      } catch (const std::exception& e) {
        rec.status = "error: " + sanitize(e.what());
        rec.wall_time = seconds_since(t0);
        out.push_back(rec);
        break;
      }
      rec.wall_time = seconds_since(t0);
      out.push_back(rec);
      if (trajectory) trajectory->push_back(frame);
    }
    return out;
  }

  /// Full re-segmentation of every frame of the random trajectory.
  std::vector<StepRecord> replay(StepRecord first, const std::vector<StepRecord>& random,
                                 const std::vector<std::shared_ptr<const Frame>>& trajectory) {
    Rng rng = make_rng(config_.seed, "segmenter/finalFrame", static_cast<std::uint64_t>(id_));
    first.method = Method::final_frame;
    std::vector<StepRecord> out{first};
    for (int t = 1; t <= config_.steps; ++t) {
      StepRecord rec;
      rec.scene = id_;
      rec.method = Method::final_frame;
      rec.step = t;
      if (t >= static_cast<int>(trajectory.size())) {
        rec.status = "error: random trajectory aborted";
        out.push_back(rec);
        break;
      }
      rec.action = random[t].action;
      if (random[t].status == "no-ambiguity") rec.status = random[t].status;
      const auto t0 = Clock::now();
      try {
        const auto& obs = trajectory[t]->obs;
        const UncosResult result = uncos(obs, *segmenter_, config_.uncos, rng);
        score(rec, most_likely_masks(result), obs, config_.write_label_maps);
        for (const auto& u : result.uncertain) rec.kappa.push_back(static_cast<int>(u.hypotheses.size()));
      } catch (const std::exception& e) {
        rec.status = "error: " + sanitize(e.what());
        rec.wall_time = seconds_since(t0);
        out.push_back(rec);
        break;
      }
      rec.wall_time = seconds_since(t0);
      out.push_back(rec);
    }
    return out;
  }

  const ExperimentConfig& config_;
  int id_;
  std::shared_ptr<FrameStore> store_;
  std::unique_ptr<Segmenter> segmenter_;
  SimTracker tracker_;
  std::shared_ptr<const Frame> initial_;
};

int method_rank(Method m) { return static_cast<int>(m); }

}  // namespace

std::vector<StepRecord> run_scene(const Scene& scene, int scene_id, const ExperimentConfig& config) {
  validate(config);
  return SceneRun(scene, scene_id, config).run();
}

std::vector<StepRecord> run_episode(const Scene& scene, int scene_id, Method method, const ExperimentConfig& config) {
  ExperimentConfig c = config;
  c.methods = {method};
  return run_scene(scene, scene_id, c);
}

Scene experiment_scene(const ExperimentConfig& config, int scene_id) {
  Rng rng = make_rng(config.seed, "scene-gen", static_cast<std::uint64_t>(scene_id));
  return generate_scene(config.scene, rng);
}

std::vector<StepRecord> run_experiment(const ExperimentConfig& config) {
  validate(config);
  std::vector<std::vector<StepRecord>> per_scene(config.scenes);
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < config.scenes; i = next++) {
      try {
        per_scene[i] = run_scene(experiment_scene(config, i), i, config);
      } catch (const std::exception& e) {
        // Scene generation failed: one diagnostic record per method.
        for (Method m : config.methods) {
          StepRecord rec;
          rec.scene = i;
          rec.method = m;
          rec.status = "error: " + sanitize(e.what());
          per_scene[i].push_back(rec);
        }
      }
    }
  };
  int threads = config.threads > 0 ? config.threads : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::clamp(threads, 1, config.scenes);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  std::vector<StepRecord> out;
  for (auto& v : per_scene) out.insert(out.end(), std::make_move_iterator(v.begin()), std::make_move_iterator(v.end()));
  std::stable_sort(out.begin(), out.end(), [](const StepRecord& a, const StepRecord& b) {
    return std::tuple(a.scene, method_rank(a.method), a.step) < std::tuple(b.scene, method_rank(b.method), b.step);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Reporting

Report aggregate(const std::vector<StepRecord>& records, int steps) {
  Report report;
  report.steps = steps;
  std::vector<Method> order;
  for (const auto& r : records)
    if (std::find(order.begin(), order.end(), r.method) == order.end()) order.push_back(r.method);
  std::sort(order.begin(), order.end(), [](Method a, Method b) { return method_rank(a) < method_rank(b); });

  for (Method m : order) {
    MethodSummary s;
    s.method = m;
    std::vector<double> sum_f(steps + 1, 0.0), sum_fn(steps + 1, 0.0);
    std::vector<int> count(steps + 1, 0);
    // Per scene: step -> record.
    std::map<int, std::map<int, const StepRecord*>> by_scene;
    for (const auto& r : records) {
      if (r.method != m) continue;
      if (r.status.rfind("error", 0) == 0) {
        ++s.failures;
        continue;
      }
      if (r.step < 0 || r.step > steps) continue;
      sum_f[r.step] += r.f;
      sum_fn[r.step] += r.osn_f;
      ++count[r.step];
      by_scene[r.scene][r.step] = &r;
    }
    for (int t = 0; t <= steps; ++t) {
      s.mean_f.push_back(count[t] ? sum_f[t] / count[t] : 0.0);
      s.mean_osn_f.push_back(count[t] ? sum_fn[t] / count[t] : 0.0);
    }
    std::vector<double> df, dfn;
    for (const auto& [scene, st] : by_scene) {
      auto a = st.find(0), b = st.find(steps);
      if (a == st.end() || b == st.end()) continue;
      df.push_back(b->second->f - a->second->f);
      dfn.push_back(b->second->osn_f - a->second->osn_f);
    }
    auto mean_se = [](const std::vector<double>& v) -> std::pair<double, double> {
      if (v.empty()) return {0.0, 0.0};
      double mean = 0;
      for (double x : v) mean += x;
      mean /= static_cast<double>(v.size());
      if (v.size() < 2) return {mean, 0.0};
      double ss = 0;
      for (double x : v) ss += (x - mean) * (x - mean);
      const double sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
      return {mean, sd / std::sqrt(static_cast<double>(v.size()))};
    };
    std::tie(s.delta_f_mean, s.delta_f_se) = mean_se(df);
    std::tie(s.delta_osn_f_mean, s.delta_osn_f_se) = mean_se(dfn);
    s.samples = static_cast<int>(df.size());
    report.methods.push_back(std::move(s));
  }
  return report;
}

std::string format_report(const Report& report) {
  std::ostringstream out;
  char buf[64];
  auto pct = [&](double v) {
    std::snprintf(buf, sizeof buf, "%7.2f", 100.0 * v);
    return std::string(buf);
  };
  out << "Scores in percent. Delta is final step minus step 0, per scene.\n\n";
  for (const char* metric : {"F_n", "F"}) {
    const bool osn = std::string_view(metric) == "F_n";
    out << "mean " << metric << " by step\n";
    out << "method     ";
    for (int t = 0; t <= report.steps; ++t) {
      std::snprintf(buf, sizeof buf, "  step %-3d", t);
      out << buf;
    }
    out << "   delta M   delta SE    n\n";
    for (const auto& s : report.methods) {
      std::snprintf(buf, sizeof buf, "%-11s", std::string(to_string(s.method)).c_str());
      out << buf;
      for (int t = 0; t <= report.steps; ++t) out << "   " << pct(osn ? s.mean_osn_f[t] : s.mean_f[t]);
      out << "   " << pct(osn ? s.delta_osn_f_mean : s.delta_f_mean) << "    "
          << pct(osn ? s.delta_osn_f_se : s.delta_f_se);
      std::snprintf(buf, sizeof buf, "  %3d", s.samples);
      out << buf;
      if (s.samples == 1) out << "  (single sample, SE not defined)";
      if (s.failures) out << "  (" << s.failures << " failed records)";
      out << "\n";
    }
    out << "\n";
  }
  return out.str();
}

std::string format_report_csv(const Report& report) {
  std::ostringstream out;
  out << "method,metric,step,mean\n";
  for (const auto& s : report.methods)
    for (int t = 0; t <= report.steps; ++t) {
      out << to_string(s.method) << ",F_n," << t << "," << format_double(s.mean_osn_f[t]) << "\n";
      out << to_string(s.method) << ",F," << t << "," << format_double(s.mean_f[t]) << "\n";
    }
  out << "method,metric,delta_mean,delta_se,samples\n";
  for (const auto& s : report.methods) {
    out << to_string(s.method) << ",F_n," << format_double(s.delta_osn_f_mean) << ","
        << format_double(s.delta_osn_f_se) << "," << s.samples << "\n";
    out << to_string(s.method) << ",F," << format_double(s.delta_f_mean) << "," << format_double(s.delta_f_se)
        << "," << s.samples << "\n";
  }
  return out.str();
}

namespace {

constexpr std::string_view kHeader = "scene,method,step,P_n,R_n,F_n,P,R,F,action,kappa,wall_time,status";

std::string format_action(const std::optional<PushAction>& a) {
  if (!a) return "none";
  return format_double(a->target.x()) + ";" + format_double(a->target.y()) + ";" + format_double(a->direction.x()) +
         ";" + format_double(a->direction.y()) + ";" + format_double(a->distance);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  while (true) {
    const auto p = s.find(sep);
    out.push_back(s.substr(0, p));
    if (p == std::string_view::npos) break;
    s.remove_prefix(p + 1);
  }
  return out;
}

}  // namespace

std::string records_to_csv(const std::vector<StepRecord>& records, bool with_timing) {
  std::string out(kHeader);
  out += "\n";
  for (const auto& r : records) {
    std::string kappa;
    for (std::size_t i = 0; i < r.kappa.size(); ++i) kappa += (i ? ";" : "") + std::to_string(r.kappa[i]);
    out += std::to_string(r.scene) + "," + std::string(to_string(r.method)) + "," + std::to_string(r.step) + "," +
           format_double(r.osn_precision) + "," + format_double(r.osn_recall) + "," + format_double(r.osn_f) + "," +
           format_double(r.precision) + "," + format_double(r.recall) + "," + format_double(r.f) + "," +
           format_action(r.action) + "," + kappa + "," + format_double(with_timing ? r.wall_time : 0.0) + "," +
           r.status + "\n";
  }
  return out;
}

std::vector<StepRecord> records_from_csv(std::string_view text) {
  std::vector<StepRecord> out;
  auto lines = split(text, '\n');
  if (lines.empty() || trim(lines[0]) != kHeader) throw Error("records csv: bad header");
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto line = trim(lines[i]);
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 13) throw Error("records csv: line " + std::to_string(i + 1) + " has " + std::to_string(f.size()) + " fields");
    StepRecord r;
    r.scene = parse_number<int>(f[0], "scene");
    r.method = method_from_string(f[1]);
    r.step = parse_number<int>(f[2], "step");
    r.osn_precision = parse_number<double>(f[3], "P_n");
    r.osn_recall = parse_number<double>(f[4], "R_n");
    r.osn_f = parse_number<double>(f[5], "F_n");
    r.precision = parse_number<double>(f[6], "P");
    r.recall = parse_number<double>(f[7], "R");
    r.f = parse_number<double>(f[8], "F");
    if (f[9] != "none") {
      const auto a = split(f[9], ';');
      if (a.size() != 5) throw Error("records csv: bad action");
      PushAction act;
      act.target = {parse_number<double>(a[0], "action"), parse_number<double>(a[1], "action")};
      act.direction = {parse_number<double>(a[2], "action"), parse_number<double>(a[3], "action")};
      act.distance = parse_number<double>(a[4], "action");
      r.action = act;
    }
    if (!f[10].empty())
      for (auto k : split(f[10], ';')) r.kappa.push_back(parse_number<int>(k, "kappa"));
    r.wall_time = parse_number<double>(f[11], "wall_time");
    r.status = std::string(f[12]);
    out.push_back(std::move(r));
  }
  return out;
}

void write_outputs(const std::vector<StepRecord>& records, const ExperimentConfig& config,
                   const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  auto write = [&](const std::string& name, const std::string& content) {
    std::ofstream f(fs::path(out_dir) / name);
    if (!f) throw Error("cannot write " + (fs::path(out_dir) / name).string());
    f << content;
  };
  write("records.csv", records_to_csv(records));
  const Report report = aggregate(records, config.steps);
  write("report.txt", format_report(report));
  write("report.csv", format_report_csv(report));
  write("config.txt", format_config(config));
  if (!config.write_label_maps) return;
  for (const auto& r : records) {
    if (r.truth.empty() && r.predicted.empty()) continue;
    const GridShape shape = !r.truth.empty() ? r.truth.front().shape() : r.predicted.front().shape();
    char dir[32];
    std::snprintf(dir, sizeof dir, "scene_%03d", r.scene);
    const fs::path base = fs::path(out_dir) / "labels" / dir;
    fs::create_directories(base);
    const std::string stem = std::string(to_string(r.method)) + "_step" + std::to_string(r.step);
    write_label_pgm((base / (stem + "_pred.pgm")).string(), shape, masks_to_labels(shape, r.predicted));
    write_label_pgm((base / (stem + "_gt.pgm")).string(), shape, masks_to_labels(shape, r.truth));
  }
}

}  // namespace uncseg
