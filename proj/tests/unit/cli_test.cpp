#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "dpsr/cli/dispatch.hpp"
#include "support/test_helpers.hpp"

using namespace dpsr;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome run(std::vector<std::string> args) {
  args.insert(args.begin(), "dpsrkit");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string dir(const std::string& name) {
  const std::string d = testkit::temp_path("cli_" + name);
  fs::remove_all(d);
  return d;
}

std::string slurp(const std::string& path) {
  const auto b = read_file(path);
  return {b.begin(), b.end()};
}

nlohmann::json manifest(const std::string& d) { return nlohmann::json::parse(slurp(d + "/manifest.json")); }

// Small dataset and whole-figure checkpoint shared by the task tests.
struct Fixture {
  std::string data, model;
  Fixture() {
    const std::string g = dir("fixture_data"), t = dir("fixture_model");
    EXPECT_EQ(run({"gen-data", "--n", "600", "--n-test", "200", "--seed", "5", "--out", g}).code, 0);
    EXPECT_EQ(run({"train", "--data", g + "/train.dpsd", "--iters", "30", "--hidden", "32", "--seed", "5", "--out", t})
                  .code,
              0);
    data = g;
    model = t + "/model.ckpt";
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

}  // namespace

TEST(Cli, GenDataIsByteIdenticalUnderFixedSeed) {
  const std::string a = dir("gen_a"), b = dir("gen_b");
  ASSERT_EQ(run({"gen-data", "--n", "500", "--n-val", "50", "--seed", "1", "--out", a}).code, 0);
  ASSERT_EQ(run({"gen-data", "--n", "500", "--n-val", "50", "--seed", "1", "--out", b}).code, 0);
  for (const char* f : {"train.dpsd", "val.dpsd", "spec.json", "manifest.json"}) EXPECT_EQ(slurp(a + "/" + f), slurp(b + "/" + f)) << f;
  const std::string c = dir("gen_c");
  ASSERT_EQ(run({"gen-data", "--n", "500", "--seed", "2", "--out", c}).code, 0);
  EXPECT_NE(slurp(a + "/train.dpsd"), slurp(c + "/train.dpsd"));
}

TEST(Cli, ManifestRecordsResolvedConfigAndHashes) {
  const std::string a = dir("manifest");
  ASSERT_EQ(run({"gen-data", "--n", "100", "--seed", "9", "--out", a}).code, 0);
  const auto m = manifest(a);
  EXPECT_EQ(m.at("command"), "gen-data");
  EXPECT_EQ(m.at("config").at("n"), 100);
  EXPECT_EQ(m.at("config").at("seed"), 9);
  EXPECT_EQ(m.at("outputs").at("train.dpsd"), hex_crc(read_file(a + "/train.dpsd")));
}

TEST(Cli, RunIsReproducibleFromItsManifest) {
  const std::string a = dir("rederive_a"), b = dir("rederive_b");
  ASSERT_EQ(run({"gen-data", "--n", "300", "--n-test", "20", "--seed", "13", "--out", a}).code, 0);
  ASSERT_EQ(run({"gen-data", "--config", a + "/manifest.json", "--out", b}).code, 0);
  EXPECT_EQ(slurp(a + "/train.dpsd"), slurp(b + "/train.dpsd"));
  EXPECT_EQ(slurp(a + "/test.dpsd"), slurp(b + "/test.dpsd"));
}

TEST(Cli, FlagsOverrideConfigFile) {
  const std::string cfg = testkit::temp_path("cli_cfg.json");
  write_file(cfg, [] {
    const std::string s = R"({"n": 120, "n-test": 30, "seed": 4})";
    return std::vector<std::uint8_t>(s.begin(), s.end());
  }());
  const std::string a = dir("cfg_a");
  ASSERT_EQ(run({"gen-data", "--config", cfg, "--n", "80", "--out", a}).code, 0);
  const auto m = manifest(a);
  EXPECT_EQ(m.at("config").at("n"), 80);
  EXPECT_EQ(m.at("config").at("n-test"), 30);
  EXPECT_EQ(m.at("config").at("seed"), 4);
  EXPECT_EQ(load_dataset(a + "/train.dpsd").count(), 80);
}

TEST(Cli, SeedFallsBackToEnvironment) {
  const std::string a = dir("env_a"), b = dir("env_b");
  ::setenv("DPSRKIT_SEED", "77", 1);
  ASSERT_EQ(run({"gen-data", "--n", "50", "--out", a}).code, 0);
  ASSERT_EQ(run({"gen-data", "--n", "50", "--seed", "3", "--out", b}).code, 0);
  ::unsetenv("DPSRKIT_SEED");
  EXPECT_EQ(manifest(a).at("config").at("seed"), 77);
  EXPECT_EQ(manifest(b).at("config").at("seed"), 3);
}

TEST(Cli, UsageErrorsExitWithTwo) {
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"no-such-command"}).code, 2);
  EXPECT_EQ(run({"gen-data", "--bogus-flag", "1"}).code, 2);
  EXPECT_EQ(run({"gen-data", "--n", "0", "--out", dir("bad_n")}).code, 2);
  EXPECT_EQ(run({"gen-data", "--seed", "x12", "--out", dir("bad_seed")}).code, 2);
  EXPECT_EQ(run({"sample", "--model", "/nonexistent/model.ckpt", "--out", dir("bad_model")}).code, 2);
  EXPECT_EQ(run({"train", "--variant", "fancy", "--out", dir("bad_variant"), "--n", "10"}).code, 2);
  EXPECT_EQ(run({"--help"}).code, 0);
}

TEST(Cli, HelpDocumentsPrecedence) {
  const Outcome o = run({"--help"});
  EXPECT_NE(o.out.find("precedence"), std::string::npos);
  EXPECT_NE(o.out.find("DPSRKIT_SEED"), std::string::npos);
}

TEST(Cli, TrainWithZeroItersWritesInitialization) {
  const std::string a = dir("iters0");
  ASSERT_EQ(run({"train", "--n", "200", "--iters", "0", "--hidden", "16", "--seed", "2", "--out", a}).code, 0);
  const NoiseNet net = load_checkpoint(a + "/model.ckpt");
  Rng rng(1);
  const Mat x = gaussian_matrix(rng, net.dim(), 5);
  EXPECT_EQ(net.predict(x, 0.3).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Cli, TrainingIsBitIdentical) {
  const std::string a = dir("train_a"), b = dir("train_b");
  const auto& f = fixture();
  for (const auto& d : {a, b})
    ASSERT_EQ(run({"train", "--data", f.data + "/train.dpsd", "--iters", "20", "--hidden", "16", "--seed", "6", "--out", d})
                  .code,
              0);
  EXPECT_EQ(slurp(a + "/model.ckpt"), slurp(b + "/model.ckpt"));
  EXPECT_EQ(slurp(a + "/train_loss.csv"), slurp(b + "/train_loss.csv"));
}

TEST(Cli, CorruptedCheckpointIsRejected) {
  const std::string a = dir("corrupt");
  fs::create_directories(a);
  auto bytes = read_file(fixture().model);
  bytes[bytes.size() / 2] ^= 0x10;
  write_file(a + "/bad.ckpt", bytes);
  const Outcome o = run({"sample", "--model", a + "/bad.ckpt", "--n", "4", "--steps", "3", "--out", a});
  EXPECT_EQ(o.code, 2);
  EXPECT_NE(o.err.find("checksum"), std::string::npos);
}

TEST(Cli, SampleBothSamplers) {
  const std::string a = dir("sample_em"), b = dir("sample_ddim");
  ASSERT_EQ(run({"sample", "--model", fixture().model, "--n", "6", "--steps", "10", "--out", a}).code, 0);
  ASSERT_EQ(run({"sample", "--model", fixture().model, "--sampler", "ddim", "--start-t", "0.5", "--n", "6", "--steps",
                 "10", "--out", b})
                .code,
            0);
  EXPECT_EQ(load_dataset(a + "/samples.dpsd").count(), 6);
  EXPECT_EQ(run({"sample", "--model", fixture().model, "--sampler", "heun", "--out", dir("sample_bad")}).code, 2);
}

TEST(Cli, TaskResultsAreBitIdenticalAndIndependentOfJobs) {
  const std::string a = dir("complete_a"), b = dir("complete_b"), c = dir("complete_c");
  const std::vector<std::string> base{"complete", "--model", fixture().model, "--instances", "2", "--hypotheses",
                                      "3", "--iters", "20", "--seed", "8"};
  auto with = [&](const std::string& out, const std::string& jobs) {
    auto v = base;
    v.insert(v.end(), {"--out", out, "--jobs", jobs});
    return run(v).code;
  };
  ASSERT_EQ(with(a, "1"), 0);
  ASSERT_EQ(with(b, "1"), 0);
  ASSERT_EQ(with(c, "3"), 0);
  EXPECT_EQ(slurp(a + "/results.csv"), slurp(b + "/results.csv"));
  EXPECT_EQ(slurp(a + "/solutions.json"), slurp(b + "/solutions.json"));
  EXPECT_EQ(slurp(a + "/results.csv"), slurp(c + "/results.csv"));
}

TEST(Cli, EveryTaskRuns) {
  for (const std::string task : {"ik", "fit2d", "denoise-motion"}) {
    const std::string a = dir("task_" + task);
    std::vector<std::string> args{task, "--model", fixture().model, "--instances", "1", "--hypotheses", "2", "--iters",
                                  "5", "--out", a, "--trace"};
    if (task == "denoise-motion") args.insert(args.end(), {"--frames", "4"});
    ASSERT_EQ(run(args).code, 0) << task;
    const std::string csv = slurp(a + "/results.csv");
    EXPECT_EQ(csv.rfind("instance,min,mean,std,apd\n", 0), 0u);
    EXPECT_TRUE(fs::exists(a + "/trace_0.csv"));
  }
}

TEST(Cli, InstanceFileRoundTrip) {
  const std::string a = dir("inst_a"), b = dir("inst_b");
  ASSERT_EQ(run({"complete", "--model", fixture().model, "--instances", "1", "--hypotheses", "2", "--iters", "10",
                 "--out", a})
                .code,
            0);
  const auto sol = nlohmann::json::parse(slurp(a + "/solutions.json"));
  const std::string inst = testkit::temp_path("cli_instance.json");
  const std::string text = sol.at(0).at("instance").dump();
  write_file(inst, std::vector<std::uint8_t>(text.begin(), text.end()));
  ASSERT_EQ(run({"complete", "--model", fixture().model, "--instance", inst, "--hypotheses", "2", "--iters", "10",
                 "--out", b})
                .code,
            0);
  EXPECT_EQ(slurp(a + "/results.csv"), slurp(b + "/results.csv"));
}

TEST(Cli, NumericFailureExitsWithThree) {
  const Outcome o = run({"complete", "--model", fixture().model, "--instances", "1", "--hypotheses", "1", "--iters",
                         "5", "--lr", "1e300", "--out", dir("numeric")});
  EXPECT_EQ(o.code, 3) << o.err;
}

TEST(Cli, AblateScheduleEmitsFourPolicies) {
  const std::string a = dir("ablate");
  ASSERT_EQ(run({"ablate-schedule", "--task", "complete", "--model", fixture().model, "--instances", "1",
                 "--hypotheses", "2", "--iters", "10", "--out", a})
                .code,
            0);
  std::istringstream csv(slurp(a + "/ablation.csv"));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "policy,min,mean,std,apd");
  std::vector<std::string> names;
  while (std::getline(csv, line)) {
    names.push_back(line.substr(0, line.find(',')));
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 4);
  }
  EXPECT_EQ(names, (std::vector<std::string>{"random", "fixed", "uniform", "truncated"}));
}

TEST(Cli, AblateUsesChosenTaskPreset) {
  const std::string a = dir("ablate_motion");
  ASSERT_EQ(run({"ablate-schedule", "--task", "denoise-motion", "--model", fixture().model, "--instances", "1",
                 "--hypotheses", "1", "--iters", "3", "--frames", "3", "--out", a})
                .code,
            0);
  const auto cfg = manifest(a).at("config");
  const TaskPreset p = task_preset("denoise-motion");
  EXPECT_EQ(cfg.at("t-max").get<double>(), p.t_max);
  EXPECT_EQ(cfg.at("lambda").get<double>(), p.lambda_reg);
  EXPECT_EQ(cfg.at("iters").get<Index>(), 3);
}

TEST(Cli, CompositeVariantsTrainAndLoad) {
  const auto& f = fixture();
  std::map<std::string, std::string> parts;
  for (const std::string p : {"body", "hand", "face"}) {
    parts[p] = dir("part_" + p);
    ASSERT_EQ(run({"train", "--data", f.data + "/train.dpsd", "--part", p, "--iters", "10", "--hidden", "16", "--out",
                   parts[p]})
                  .code,
              0);
  }
  for (const std::string v : {"base", "fused", "mixed"}) {
    const std::string a = dir("variant_" + v);
    ASSERT_EQ(run({"train", "--data", f.data + "/train.dpsd", "--variant", v, "--body", parts["body"] + "/model.ckpt",
                   "--hand", parts["hand"] + "/model.ckpt", "--face", parts["face"] + "/model.ckpt", "--iters", "5",
                   "--hidden", "16", "--out", a})
                  .code,
              0)
        << v;
    const CompositeNet net = load_composite(a + "/model.ckpt");
    EXPECT_EQ(variant_name(net.variant()), v);
  }
}

TEST(Cli, EvalWritesMetrics) {
  const std::string s = dir("eval_samples"), e = dir("eval");
  ASSERT_EQ(run({"sample", "--model", fixture().model, "--n", "40", "--steps", "10", "--out", s}).code, 0);
  ASSERT_EQ(run({"eval", "--samples", s + "/samples.dpsd", "--reference", fixture().data + "/test.dpsd", "--out", e})
                .code,
            0);
  const auto m = nlohmann::json::parse(slurp(e + "/metrics.json"));
  for (const char* k : {"apd", "d_nn", "fid", "precision", "recall"}) EXPECT_TRUE(m.contains(k)) << k;
}
