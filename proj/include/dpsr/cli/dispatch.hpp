#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dpsr/composite/mixed_training.hpp"
#include "dpsr/diffusion/samplers.hpp"
#include "dpsr/synthdata/dataset.hpp"
#include "dpsr/tasks/hypotheses.hpp"
#include "dpsr/tasks/instances.hpp"
#include "json.hpp"

namespace dpsr::cli {

using nlohmann::json;
namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumeric = 3;

inline constexpr const char* kPrecedenceNote =
    "Value precedence: command-line flag > --config JSON file > built-in default. "
    "Config keys are the long flag names without the leading dashes (e.g. \"lr-final\"). "
    "A manifest.json from an earlier run is accepted as a config file. "
    "The seed falls back to the DPSRKIT_SEED environment variable, then 0.";

// Flag bindings whose unset values fall back to a JSON config.
class Options {
 public:
  explicit Options(CLI::App* app) : app_(app) {}

  template <class T>
  CLI::Option* add(const std::string& name, T& var, const std::string& desc) {
    CLI::Option* o = app_->add_option("--" + name, var, desc)->capture_default_str();
    binds_.push_back([o, name, &var](const json& cfg, json& resolved) {
      if (o->count() == 0 && cfg.contains(name)) var = cfg.at(name).get<T>();
      resolved[name] = var;
    });
    return o;
  }

  CLI::Option* flag(const std::string& name, bool& var, const std::string& desc) {
    CLI::Option* o = app_->add_flag("--" + name + ",!--no-" + name, var, desc);
    binds_.push_back([o, name, &var](const json& cfg, json& resolved) {
      if (o->count() == 0 && cfg.contains(name)) var = cfg.at(name).get<bool>();
      resolved[name] = var;
    });
    return o;
  }

  void resolve(const json& cfg, json& resolved) const {
    for (const auto& b : binds_) b(cfg, resolved);
  }

  CLI::App* app() const { return app_; }

 private:
  CLI::App* app_;
  std::vector<std::function<void(const json&, json&)>> binds_;
};

inline json read_json_file(const std::string& path) {
  const auto bytes = read_file(path);
  try {
    return json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
}

// Settings shared by every subcommand.
struct Common {
  std::string config;
  std::string out = "out";
  std::string seed;
  Index jobs = 1;

  void add_to(CLI::App* app) {
    app->add_option("--config", config, "JSON config file (see precedence note)");
    app->add_option("--out", out, "output directory")->capture_default_str();
    app->add_option("--seed", seed, "random seed (unsigned integer)");
    app->add_option("--jobs", jobs, "worker threads for hypotheses; 1 is the reproducible reference")
        ->capture_default_str();
  }

  json load_config() const {
    if (config.empty()) return json::object();
    json js = read_json_file(config);
    if (!js.is_object()) throw FormatError(config + ": config must be a JSON object");
    if (js.contains("command") && js.contains("config")) return js.at("config");  // a manifest
    return js;
  }
};

inline std::uint64_t parse_seed(const std::string& s, const char* where) {
  try {
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw UsageError(std::string("bad seed '") + s + "' from " + where);
  }
}

// Output directory, resolved configuration and the file hashes of one run.
class Run {
 public:
  Run(std::string command, const Common& common, const Options& opts) : command_(std::move(command)) {
    const json cfg = common.load_config();
    opts.resolve(cfg, config_);
    if (!common.seed.empty()) {
      seed_ = parse_seed(common.seed, "--seed");
    } else if (cfg.contains("seed")) {
      seed_ = cfg.at("seed").get<std::uint64_t>();
    } else if (const char* env = std::getenv("DPSRKIT_SEED")) {
      seed_ = parse_seed(env, "DPSRKIT_SEED");
    }
    jobs_ = common.jobs;
    if (cfg.contains("jobs") && common.jobs == 1) jobs_ = cfg.at("jobs").get<Index>();
    require(jobs_ >= 1, "--jobs must be >= 1");
    out_ = common.out.empty() ? fs::path(".") : fs::path(common.out);
    config_["seed"] = seed_;
    config_["jobs"] = jobs_;
    std::error_code ec;
    fs::create_directories(out_, ec);
    if (ec) throw FormatError("cannot create output directory " + out_.string() + ": " + ec.message());
  }

  std::uint64_t seed() const { return seed_; }
  Index jobs() const { return jobs_; }
  const json& config() const { return config_; }

  std::vector<std::uint8_t> input(const std::string& path) {
    auto bytes = read_file(path);
    inputs_[path] = hex_crc(bytes);
    return bytes;
  }

  std::string path(const std::string& name) const { return (out_ / name).string(); }

  void output(const std::string& name, const std::vector<std::uint8_t>& bytes) {
    write_file(path(name), bytes);
    outputs_[name] = hex_crc(bytes);
  }

  void output_text(const std::string& name, const std::string& text) {
    output(name, std::vector<std::uint8_t>(text.begin(), text.end()));
  }

  void finish() const {
    json m;
    m["format_version"] = 1;
    m["command"] = command_;
    m["config"] = config_;
    m["inputs"] = inputs_;
    m["outputs"] = outputs_;
    const std::string text = m.dump(2) + "\n";
    write_file(path("manifest.json"), std::vector<std::uint8_t>(text.begin(), text.end()));
  }

 private:
  std::string command_;
  json config_ = json::object();
  json inputs_ = json::object();
  json outputs_ = json::object();
  std::uint64_t seed_ = 0;
  Index jobs_ = 1;
  fs::path out_;
};

// A mixture spec file is either a full component list or the parameters of
// the default generator; an empty path means the default mixture.
inline MixtureSpec load_spec(const std::string& path, const ArticulatedModel& model, Run& run) {
  if (path.empty()) return make_default_mixture(model);
  const auto bytes = run.input(path);
  json js;
  try {
    js = json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
  try {
    MixtureSpec s = (js.contains("components") && js.at("components").is_array())
                        ? MixtureSpec::from_json(js)
                        : make_default_mixture(model, DefaultMixtureParams::from_json(js));
    require_dims(s.dim(), model.pose_dim(), "mixture spec");
    return s;
  } catch (const json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
}

inline std::unique_ptr<NoisePredictor> load_predictor(const std::string& path, Run& run) {
  const auto bytes = run.input(path);
  if (checkpoint_kind(bytes) == kKindComposite) return std::make_unique<CompositeNet>(decode_composite(bytes));
  return std::make_unique<NoiseNet>(decode_checkpoint(bytes));
}

inline std::string csv_number(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) out.push_back(item);
  return out;
}

// ----------------------------------------------------------------- gen-data

struct GenDataCmd {
  Common common;
  std::string spec;
  Index n = 20000, n_val = 0, n_test = 0;

  void setup(CLI::App& root, std::function<int()>& action) {
    CLI::App* app = root.add_subcommand("gen-data", "sample train/val/test pose datasets from a mixture spec");
    common.add_to(app);
    auto opts = std::make_shared<Options>(app);
    opts->add("spec", spec, "mixture spec JSON (empty: default mixture)");
    opts->add("n", n, "training samples");
    opts->add("n-val", n_val, "validation samples");
    opts->add("n-test", n_test, "test samples");
    app->callback([this, opts, &action] { action = [this, opts] { return run(*opts); }; });
  }

  int run(const Options& opts) {
    Run r("gen-data", common, opts);
    const ArticulatedModel model = default_model();
    const MixtureSpec s = load_spec(spec, model, r);
    require(n >= 1 && n_val >= 0 && n_test >= 0, "gen-data: sample counts must be positive");
    const DatasetSplits ds = generate_splits(s, n, n_val, n_test, r.seed());
    r.output_text("spec.json", s.to_json().dump(2) + "\n");
    r.output("train.dpsd", encode_dataset(ds.train));
    if (n_val > 0) r.output("val.dpsd", encode_dataset(ds.val));
    if (n_test > 0) r.output("test.dpsd", encode_dataset(ds.test));
    r.finish();
    return kExitOk;
  }
};

// -------------------------------------------------------------------- train

struct TrainCmd {
  Common common;
  std::string data, spec, variant, part = "whole", body, hand, face;
  Index n = 20000, iters = 5000, batch = 256, hidden = 256, blocks = 2, emb = 64;
  double lr = 1e-3, lr_final = 1e-4;

  void setup(CLI::App& root, std::function<int()>& action) {
    CLI::App* app = root.add_subcommand(
        "train", "train a noise network (whole or part) or the fused module of a composite prior");
    common.add_to(app);
    auto opts = std::make_shared<Options>(app);
    opts->add("data", data, "training dataset (.dpsd); empty: generate --n samples from --spec");
    opts->add("spec", spec, "mixture spec JSON used when --data is empty");
    opts->add("n", n, "generated training samples when --data is empty");
    opts->add("part", part, "whole | body | hand | face (ignored with --variant)");
    opts->add("variant", variant, "composite variant base | fused | mixed (needs --body --hand --face)");
    opts->add("body", body, "body part checkpoint for --variant");
    opts->add("hand", hand, "hand part checkpoint for --variant");
    opts->add("face", face, "face part checkpoint for --variant");
    opts->add("iters", iters, "optimizer steps (0 writes the initialization)");
    opts->add("batch", batch, "minibatch size");
    opts->add("lr", lr, "initial learning rate");
    opts->add("lr-final", lr_final, "final learning rate (linear decay)");
    opts->add("hidden", hidden, "hidden width");
    opts->add("blocks", blocks, "residual blocks");
    opts->add("emb", emb, "time embedding size");
    app->callback([this, opts, &action] { action = [this, opts] { return run(*opts); }; });
  }

  Dataset training_data(Run& r, const ArticulatedModel& model) {
    if (!data.empty()) return decode_dataset(r.input(data));
    const MixtureSpec s = load_spec(spec, model, r);
    return generate_splits(s, n, 0, 0, r.seed()).train;
  }

  TrainConfig train_config(std::uint64_t seed) const {
    TrainConfig tc;
    tc.batch_size = batch;
    tc.iterations = iters;
    tc.lr = lr;
    tc.lr_final = lr_final;
    tc.seed = seed;
    return tc;
  }

  static std::string loss_csv(const std::vector<double>& losses) {
    std::string s = "iter,loss\n";
    for (std::size_t i = 0; i < losses.size(); ++i) s += std::to_string(i) + "," + csv_number(losses[i]) + "\n";
    return s;
  }

  int run(const Options& opts) {
    Run r("train", common, opts);
    const ArticulatedModel model = default_model();
    const PartSplit split = PartSplit::from_model(model);
    const Rng root(r.seed());
    const Dataset ds = training_data(r, model);
    const TrainConfig tc = train_config(root.split(2).next_u64());
    tc.validate();
    if (!variant.empty()) {
      const Variant v = variant_from_name(variant);
      require(!body.empty() && !hand.empty() && !face.empty(), "train --variant needs --body, --hand and --face");
      require_dims(ds.dim(), split.total(), "composite training data");
      NoiseNet b = decode_checkpoint(r.input(body));
      NoiseNet h = decode_checkpoint(r.input(hand));
      NoiseNet f = decode_checkpoint(r.input(face));
      Rng init = root.split(1);
      CompositeNet net(split, std::move(b), std::move(h), std::move(f), v, FusedConfig{hidden, blocks, emb}, init);
      std::vector<double> losses;
      if (v != Variant::Base && iters > 0) {
        const Mat xn = normalize(ds.samples, net.stats());
        losses = train_fused(net, build_mixture_schedule(split, composite_sources(v, xn), masking(v)), tc);
      }
      r.output("model.ckpt", encode_composite(net));
      r.output_text("train_loss.csv", loss_csv(losses));
      r.finish();
      return kExitOk;
    }
    Mat raw = ds.samples;
    if (part != "whole") {
      require_dims(ds.dim(), split.total(), "part training data");
      const PartBlock p = part == "hand" ? PartBlock::LeftHand : block_from_name(part);
      require(p != PartBlock::RightHand, "train --part: use 'hand' for the shared hand network");
      raw = part_training_data(split, ds.samples, p);
    }
    const NormStats stats = part == "whole" ? ds.stats : compute_stats(raw);
    Rng init = root.split(1);
    NoiseNet net(NetConfig{raw.rows(), hidden, blocks, emb}, stats, Schedule{}, init);
    const auto losses = train(net, normalize(raw, stats), tc);
    r.output("model.ckpt", encode_checkpoint(net));
    r.output_text("train_loss.csv", loss_csv(losses));
    r.finish();
    return kExitOk;
  }

  // fused: whole-figure data only. mixed: half of the data stays whole, the
  // other half serves the part-only sources.
  static std::vector<MixedSource> composite_sources(Variant v, const Mat& xn) {
    if (v == Variant::Fused) return {{SourceTag::Whole, 1.0, xn}};
    require(xn.cols() >= 2, "train --variant mixed: need at least two samples");
    const Index half = xn.cols() / 2;
    const Mat whole = xn.leftCols(half), rest = xn.rightCols(xn.cols() - half);
    const auto& w = kDefaultSourceWeights;
    return {{SourceTag::Whole, w[0], whole},
            {SourceTag::BodyOnly, w[1], rest},
            {SourceTag::OneHand, w[2], rest},
            {SourceTag::TwoHand, w[3], rest},
            {SourceTag::FaceOnly, w[4], rest}};
  }

  static MixedMaskingConfig masking(Variant v) {
    MixedMaskingConfig m;
    if (v == Variant::Fused) m.event_prob = 0.0;
    return m;
  }
};

// ------------------------------------------------------------------- sample

struct SampleCmd {
  Common common;
  std::string model_path, sampler = "em";
  Index steps = 1000, n = 1000;
  double start_t = 1.0;

  void setup(CLI::App& root, std::function<int()>& action) {
    CLI::App* app = root.add_subcommand("sample", "draw unconditional samples from a trained prior");
    common.add_to(app);
    auto opts = std::make_shared<Options>(app);
    opts->add("model", model_path, "checkpoint (noise network or composite)");
    opts->add("sampler", sampler, "em | ddim");
    opts->add("steps", steps, "sampler steps");
    opts->add("n", n, "number of samples");
    opts->add("start-t", start_t, "DDIM start time in (0, 1]");
    app->callback([this, opts, &action] { action = [this, opts] { return run(*opts); }; });
  }

  int run(const Options& opts) {
    Run r("sample", common, opts);
    require(!model_path.empty(), "sample: --model is required");
    const auto net = load_predictor(model_path, r);
    Rng rng = Rng(r.seed()).split(3);
    Mat x;
    if (sampler == "em") {
      require(start_t == 1.0, "sample: --start-t applies to the ddim sampler only");
      x = sample_em(*net, steps, n, rng);
    } else if (sampler == "ddim") {
      x = sample_ddim(*net, steps, n, rng, start_t);
    } else {
      throw UsageError("unknown sampler '" + sampler + "' (expected em or ddim)");
    }
    Dataset ds{x, "samples", "", net->stats()};
    r.output("samples.dpsd", encode_dataset(ds));
    r.finish();
    return kExitOk;
  }
};

// -------------------------------------------------------------------- tasks

// One task problem together with its instance record and error measure.
struct TaskCase {
  json instance;
  std::unique_ptr<TaskProblem> problem;
  ErrorFn error;  // empty when the instance carries no ground truth
};

struct TaskOptions {
  std::string task, model_path, spec, instance_path, policy = "truncated";
  Index instances = 5, hypotheses = 10;
  TaskPreset preset;
  bool trace = false;
  // task-specific
  std::string hide = "left_hand";
  bool ends_only = true;
  double noise = 0.0;
  double occluded = 0.3, pixel_noise = 2.0;
  Index frames = 60;
  double rate = 0.1, w_temp = 0.5;

  // all_flags registers the task-specific flags of every task.
  void add_to(Options& o, const std::string& t, bool all_flags = false) {
    task = t;
    preset = task_preset(t);
    o.add("model", model_path, "prior checkpoint (noise network or composite)");
    o.add("spec", spec, "mixture spec JSON for synthetic instances (empty: default mixture)");
    o.add("instance", instance_path, "instance JSON (object or array); empty: synthesize --instances cases");
    o.add("instances", instances, "number of synthetic instances");
    o.add("hypotheses", hypotheses, "hypotheses per instance");
    o.add("lambda", preset.lambda_reg, "regularizer weight");
    o.add("lr", preset.lr, "Adam learning rate");
    o.add("lr-final", preset.lr_final, "final learning rate of a linear decay (< 0: constant)");
    o.add("iters", preset.iterations, "optimization iterations");
    o.add("t-max", preset.t_max, "upper end of the diffusion-time interval");
    o.add("t-min", preset.t_min, "lower end of the diffusion-time interval");
    o.add("policy", policy, "truncated | uniform | fixed | random");
    o.flag("trace", trace, "write per-iteration loss traces of hypothesis 0");
    auto on = [&](const char* name) { return all_flags || t == name; };
    if (on("complete")) o.add("hide", hide, "comma-separated hidden blocks: body, left_hand, right_hand, face");
    if (on("ik")) o.flag("ends-only", ends_only, "observe only the chain-end joints");
    if (on("ik") || on("denoise-motion"))
      o.add("noise", noise, "Gaussian noise std of observed joints (denoise-motion default 0.04)");
    if (on("fit2d")) {
      o.add("occluded", occluded, "fraction of keypoints with zero confidence");
      o.add("pixel-noise", pixel_noise, "keypoint noise std in pixels");
    }
    if (on("denoise-motion")) {
      o.add("frames", frames, "sequence length");
      o.add("rate", rate, "mean-reversion rate of the synthetic sequences");
      o.add("w-temp", w_temp, "temporal smoothness weight");
    }
  }

  SchedulePolicy schedule_policy(ScheduleMode mode) const {
    switch (mode) {
      case ScheduleMode::Truncated: return SchedulePolicy::truncated(preset.t_max, preset.t_min, preset.iterations);
      case ScheduleMode::Uniform: return SchedulePolicy::uniform(preset.iterations);
      case ScheduleMode::Fixed: return SchedulePolicy::fixed(0.5 * (preset.t_max + preset.t_min), preset.iterations);
      case ScheduleMode::Random: return SchedulePolicy::random(1.0, kMinScheduleTime, preset.iterations);
    }
    return SchedulePolicy::truncated(preset.t_max, preset.t_min, preset.iterations);
  }

  PriorConfig prior_config(std::uint64_t seed) const { return preset.prior_config(seed); }

  std::vector<TaskCase> build(const ArticulatedModel& model, const NoisePredictor& net, Run& r) const {
    std::vector<json> records;
    if (!instance_path.empty()) {
      json js;
      const auto bytes = r.input(instance_path);
      try {
        js = json::parse(bytes.begin(), bytes.end());
      } catch (const json::exception& e) {
        throw FormatError(instance_path + ": " + e.what());
      }
      if (js.is_array())
        records.assign(js.begin(), js.end());
      else
        records.push_back(js);
    } else {
      require(instances >= 1, "--instances must be >= 1");
      const MixtureSpec s = load_spec(spec, model, r);
      Rng gen = Rng(r.seed()).split(7);
      for (Index i = 0; i < instances; ++i) records.push_back(synthesize(model, s, net, gen));
    }
    std::vector<TaskCase> cases;
    try {
      for (const auto& js : records) cases.push_back(from_record(model, js));
    } catch (const json::exception& e) {
      throw FormatError(std::string("instance: ") + e.what());
    }
    return cases;
  }

  json synthesize(const ArticulatedModel& model, const MixtureSpec& s, const NoisePredictor& net, Rng& gen) const {
    if (task == "complete") {
      std::vector<PartBlock> hidden;
      for (const auto& name : split_list(hide)) hidden.push_back(block_from_name(name));
      return make_completion_instance(s, hidden, gen).to_json();
    }
    if (task == "ik") return make_ik_instance(model, s, ends_only, noise, gen).to_json();
    if (task == "fit2d") {
      Fit2dGenOptions g;
      g.occluded_fraction = occluded;
      g.pixel_noise = pixel_noise;
      return make_fit2d_instance(model, s, net.stats().mean, g, gen).to_json();
    }
    MotionInstance m = make_motion_instance(model, s, frames, noise, rate, gen);
    m.w_temp = w_temp;
    return m.to_json();
  }

  TaskCase from_record(const ArticulatedModel& model, const json& js) const {
    TaskCase c;
    c.instance = js;
    if (task == "complete") {
      const auto inst = std::make_shared<CompletionInstance>(CompletionInstance::from_json(js));
      c.problem = std::make_unique<CompletionProblem>(inst->problem());
      if (inst->gt.size())
        c.error = [&model, inst](const OptimizeResult& res) { return joint_error(model, res.poses, Mat(inst->gt)); };
    } else if (task == "ik") {
      const auto inst = std::make_shared<IkInstance>(IkInstance::from_json(js));
      c.problem = std::make_unique<IkProblem>(inst->problem(model));
      if (inst->gt.size())
        c.error = [&model, inst](const OptimizeResult& res) { return joint_error(model, res.poses, Mat(inst->gt)); };
    } else if (task == "fit2d") {
      const auto inst = std::make_shared<Fit2dInstance>(Fit2dInstance::from_json(js));
      c.problem = std::make_unique<Fit2dProblem>(inst->problem(model));
      if (inst->gt.size())
        c.error = [&model, inst](const OptimizeResult& res) { return fit2d_error(model, *inst, res.poses, res.aux); };
    } else {
      const auto inst = std::make_shared<MotionInstance>(MotionInstance::from_json(js));
      c.problem = std::make_unique<MotionProblem>(inst->problem(model));
      if (inst->gt.size())
        c.error = [&model, inst](const OptimizeResult& res) {
          return motion_error(model, res.poses, res.aux, inst->gt);
        };
    }
    return c;
  }
};

inline HypothesisSet solve_case(const TaskCase& c, const NoisePredictor& net, const TaskOptions& t, ScheduleMode mode,
                                const Run& r, Index index, const ArticulatedModel& model) {
  PriorStack stack{&net, t.schedule_policy(mode), t.prior_config(r.seed())};
  const Rng base = Rng(r.seed()).split(100 + static_cast<std::uint64_t>(index));
  return run_multi_hypothesis(*c.problem, stack, HypothesisOptions{t.hypotheses, r.jobs(), false}, base, c.error,
                              &model);
}

inline json solution_json(const Hypothesis& h) {
  return {{"seed", h.seed},
          {"error", h.error},
          {"final_task_loss", h.result.final_task_loss},
          {"poses", io::mat_json(h.result.poses)},
          {"aux", io::vec_json(h.result.aux)}};
}

struct TaskCmd {
  Common common;
  TaskOptions t;

  void setup(CLI::App& root, const std::string& name, const std::string& help, std::function<int()>& action) {
    CLI::App* app = root.add_subcommand(name, help);
    common.add_to(app);
    auto opts = std::make_shared<Options>(app);
    if (name == "denoise-motion") t.noise = 0.04;
    t.add_to(*opts, name);
    app->callback([this, opts, &action] { action = [this, opts] { return run(*opts); }; });
  }

  int run(const Options& opts) {
    Run r(t.task, common, opts);
    require(!t.model_path.empty(), t.task + ": --model is required");
    const ArticulatedModel model = default_model();
    const auto net = load_predictor(t.model_path, r);
    require_dims(net->dim(), model.pose_dim(), "prior dimension");
    const ScheduleMode mode = mode_from_name(t.policy);
    const auto cases = t.build(model, *net, r);
    std::string csv = "instance,min,mean,std,apd\n";
    json solutions = json::array();
    for (std::size_t i = 0; i < cases.size(); ++i) {
      const HypothesisSet hs = solve_case(cases[i], *net, t, mode, r, static_cast<Index>(i), model);
      const auto& s = hs.stats;
      csv += std::to_string(i) + "," + csv_number(s.min) + "," + csv_number(s.mean) + "," + csv_number(s.std) + "," +
             csv_number(s.apd) + "\n";
      json items = json::array();
      for (const auto& h : hs.items) items.push_back(solution_json(h));
      solutions.push_back({{"instance", cases[i].instance}, {"hypotheses", items}});
      if (t.trace) {
        std::ostringstream os;
        write_trace_csv(os, hs.items.front().result.trace);
        r.output_text("trace_" + std::to_string(i) + ".csv", os.str());
      }
    }
    r.output_text("results.csv", csv);
    r.output_text("solutions.json", solutions.dump() + "\n");
    r.finish();
    return kExitOk;
  }
};

// Runs the four scheduling policies on one task and tabulates the averages.
struct AblateCmd {
  Common common;
  std::string task = "complete";

  void setup(CLI::App& root, std::function<int()>& action) {
    CLI::App* app = root.add_subcommand("ablate-schedule",
                                        "compare random, fixed, uniform and truncated time scheduling on a task");
    common.add_to(app);
    auto opts = std::make_shared<Options>(app);
    opts->add("task", task, "complete | ik | fit2d | denoise-motion");
    // Task flags share one set of bindings; defaults come from the completion preset
    // and are replaced by the chosen task's preset unless given explicitly.
    auto t = std::make_shared<TaskOptions>();
    t->add_to(*opts, "complete", true);
    app->callback([this, opts, t, app, &action] {
      action = [this, opts, t, app] { return run(*opts, *t, *app); };
    });
  }

  int run(const Options& opts, TaskOptions& t, const CLI::App& app) {
    const json cfg = common.load_config();
    const std::string chosen = app.get_option("--task")->count() ? task : cfg.value("task", task);
    apply_preset(t, chosen, app, cfg);
    Run r("ablate-schedule", common, opts);
    require(!t.model_path.empty(), "ablate-schedule: --model is required");
    const ArticulatedModel model = default_model();
    const auto net = load_predictor(t.model_path, r);
    require_dims(net->dim(), model.pose_dim(), "prior dimension");
    const auto cases = t.build(model, *net, r);
    std::string csv = "policy,min,mean,std,apd\n";
    for (ScheduleMode mode : {ScheduleMode::Random, ScheduleMode::Fixed, ScheduleMode::Uniform, ScheduleMode::Truncated}) {
      double mn = 0.0, mean = 0.0, sd = 0.0, apd = 0.0;
      for (std::size_t i = 0; i < cases.size(); ++i) {
        const HypothesisSet hs = solve_case(cases[i], *net, t, mode, r, static_cast<Index>(i), model);
        mn += hs.stats.min;
        mean += hs.stats.mean;
        sd += hs.stats.std;
        apd += hs.stats.apd;
      }
      const double k = static_cast<double>(cases.size());
      csv += std::string(mode_name(mode)) + "," + csv_number(mn / k) + "," + csv_number(mean / k) + "," +
             csv_number(sd / k) + "," + csv_number(apd / k) + "\n";
    }
    r.output_text("ablation.csv", csv);
    r.finish();
    return kExitOk;
  }

  static void apply_preset(TaskOptions& t, const std::string& chosen, const CLI::App& app, const json& cfg) {
    if (chosen == t.task) return;
    const TaskPreset p = task_preset(chosen);
    auto unset = [&](const char* name) { return app.get_option(std::string("--") + name)->count() == 0 && !cfg.contains(name); };
    t.task = chosen;
    if (unset("lambda")) t.preset.lambda_reg = p.lambda_reg;
    if (unset("lr")) t.preset.lr = p.lr;
    if (unset("lr-final")) t.preset.lr_final = p.lr_final;
    if (unset("iters")) t.preset.iterations = p.iterations;
    if (unset("t-max")) t.preset.t_max = p.t_max;
    if (unset("t-min")) t.preset.t_min = p.t_min;
    if (chosen == "denoise-motion" && unset("noise")) t.noise = 0.04;
  }
};

// --------------------------------------------------------------------- eval

struct EvalCmd {
  Common common;
  std::string samples, reference;
  Index max_items = 2000, k = 3;

  void setup(CLI::App& root, std::function<int()>& action) {
    CLI::App* app = root.add_subcommand("eval", "compare generated samples against a reference dataset");
    common.add_to(app);
    auto opts = std::make_shared<Options>(app);
    opts->add("samples", samples, "generated samples (.dpsd)");
    opts->add("reference", reference, "reference dataset (.dpsd)");
    opts->add("max-items", max_items, "use at most this many items of each set");
    opts->add("k", k, "neighbour rank for precision/recall");
    app->callback([this, opts, &action] { action = [this, opts] { return run(*opts); }; });
  }

  int run(const Options& opts) {
    Run r("eval", common, opts);
    require(!samples.empty() && !reference.empty(), "eval: --samples and --reference are required");
    require(max_items >= 2, "eval: --max-items must be >= 2");
    const Dataset gen = decode_dataset(r.input(samples));
    const Dataset ref = decode_dataset(r.input(reference));
    require_dims(gen.dim(), ref.dim(), "eval datasets");
    const ArticulatedModel model = default_model();
    require_dims(gen.dim(), model.pose_dim(), "eval pose dimension");
    const Mat g = gen.samples.leftCols(std::min(max_items, gen.count()));
    const Mat f = ref.samples.leftCols(std::min(max_items, ref.count()));
    // distribution metrics on pose vectors normalized by the reference statistics
    const Mat gn = normalize(g, ref.stats), fn = normalize(f, ref.stats);
    MetricReport rep;
    rep.set("apd", apd(g, model), "length", g.cols());
    rep.set("d_nn", d_nn(g, f, model), "length", g.cols());
    rep.set("fid", fid(gn, fn), "normalized", g.cols());
    const PrecisionRecall pr = precision_recall(gn, fn, k);
    rep.set("precision", pr.precision, "fraction", g.cols());
    rep.set("recall", pr.recall, "fraction", f.cols());
    rep.validate();
    r.output_text("metrics.json", rep.to_json().dump(2) + "\n");
    r.output_text("metrics.csv", rep.csv_header() + "\n" + rep.csv_row() + "\n");
    r.finish();
    return kExitOk;
  }
};

// ----------------------------------------------------------------- dispatch

// Parses argv, runs one subcommand and maps failures to exit codes:
// 0 success, 2 usage/config/format error, 3 numeric failure, 1 anything else.
inline int dispatch(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{std::string("dpsrkit: diffusion pose prior toolkit.\n") + kPrecedenceNote, "dpsrkit"};
  app.require_subcommand(1);
  std::function<int()> action;
  GenDataCmd gen;
  TrainCmd tr;
  SampleCmd smp;
  TaskCmd complete, ik, fit2d, motion;
  AblateCmd ablate;
  EvalCmd ev;
  gen.setup(app, action);
  tr.setup(app, action);
  smp.setup(app, action);
  complete.setup(app, "complete", "fill in hidden pose blocks", action);
  ik.setup(app, "ik", "inverse kinematics from (partial) 3D joints", action);
  fit2d.setup(app, "fit2d", "fit pose, shape and camera-frame transform to 2D keypoints", action);
  motion.setup(app, "denoise-motion", "denoise a noisy joint sequence", action);
  ablate.setup(app, action);
  ev.setup(app, action);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }
  try {
    return action ? action() : kExitUsage;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const FormatError& e) {
    err << "format error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const json::exception& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace dpsr::cli
