#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <sys/wait.h>
#include <unistd.h>

#include "tactile/ablation.hpp"
#include "tactile/artifacts.hpp"

using namespace tactile;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("tactile_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream o;
  o << f.rdbuf();
  return o.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(TACTILE_CLI) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

ExperimentConfig quick_config() {
  std::istringstream in(
      "experiment.objects = sphere, cuboid\n"
      "experiment.variants = grid, random\n"
      "experiment.seeds = 3\n"
      "eval.trials = 1\n"
      "eval.cap = 25\n");
  return parse_config(in);
}

}  // namespace

TEST(Config, UnknownKeyReportsLine) {
  std::istringstream in("# comment\neval.trials = 2\n\neval.bogus = 1\n");
  try {
    parse_config(in, "run.cfg");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 4u);
    EXPECT_NE(std::string(e.what()).find("run.cfg:4"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("eval.bogus"), std::string::npos);
  }
}

TEST(Config, SectionsAndBadValues) {
  std::istringstream in("[reward]\nbeta = 0.5\n[eval]\ncap.sphere = 40\n");
  const auto c = parse_config(in);
  EXPECT_EQ(c.reward.beta, 0.5);
  EXPECT_EQ(c.cap_for("sphere"), 40);
  EXPECT_EQ(c.cap_for("cuboid"), 150);
  std::istringstream bad("eval.trials = many\n");
  EXPECT_THROW(parse_config(bad), ParseError);
  std::istringstream noeq("eval.trials 3\n");
  EXPECT_THROW(parse_config(noeq), ParseError);
}

TEST(Config, DumpRoundTrips) {
  auto c = quick_config();
  c.reward.gamma = 2.5;
  c.hidden = {32, 16};
  c.checkpoints["TMB"] = "/tmp/x.bin";
  std::istringstream in(dump_config(c));
  const auto back = parse_config(in);
  EXPECT_EQ(dump_config(back), dump_config(c));
  EXPECT_EQ(config_digest(back), config_digest(c));
  EXPECT_NE(config_digest(back), config_digest(ExperimentConfig{}));
}

TEST(Config, Validation) {
  auto c = quick_config();
  EXPECT_NO_THROW(c.validate());
  c.variant = "XYZ";
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = quick_config();
  c.objects = {"teapot"};
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = quick_config();
  c.trials = 0;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = quick_config();
  c.reward.memory_penalty = 0.5;
  EXPECT_THROW(c.validate(), InvalidArgument);
}

TEST(Config, SchemaListsEveryDumpedKey) {
  const auto schema = config_schema();
  std::istringstream dump(dump_config(ExperimentConfig{}));
  std::string line;
  while (std::getline(dump, line)) {
    const auto key = line.substr(0, line.find(' '));
    bool found = false;
    for (const auto& [k, doc] : schema) found |= k == key;
    EXPECT_TRUE(found) << key;
  }
}

TEST(Evaluate, GridTouchesSphere) {
  const auto c = quick_config();
  auto ec = c.eval_config(1, "sphere");
  ec.trials = 2;
  const auto row = evaluate(PolicySource::grid(), builtin_object("sphere"), ec);
  EXPECT_GT(row.mean_iou, 0.0);
  EXPECT_EQ(row.trials, 2);
  EXPECT_EQ(row.seeds.size(), 2u);
  EXPECT_EQ(row.variant, "grid");
}

TEST(Evaluate, SingleTrialAndZeroCap) {
  const auto c = quick_config();
  auto ec = c.eval_config(2, "cuboid");
  ec.trials = 1;
  EXPECT_EQ(evaluate(PolicySource::random(), builtin_object("cuboid"), ec).trials, 1);
  ec.cap = 0;
  const auto row = evaluate(PolicySource::grid(), builtin_object("cuboid"), ec);
  EXPECT_EQ(row.mean_iou, 0.0);
  ec.trials = 0;
  EXPECT_THROW(evaluate(PolicySource::grid(), builtin_object("cuboid"), ec), InvalidArgument);
}

TEST(Evaluate, DigestMismatchIsVersionError) {
  const auto c = quick_config();
  auto ck = std::make_shared<Checkpoint>();
  ck->net = PolicyNet(kStateDim, c.hidden, kActions);
  ck->config_digest = 0xdeadbeef;
  auto ec = c.eval_config(0, "sphere");
  EXPECT_THROW(evaluate(PolicySource::network(ck, "TMB"), builtin_object("sphere"), ec), VersionError);
  ck->config_digest = policy_digest(ec.mask, ec.features, ec.env.hand, ec.hidden);
  EXPECT_NO_THROW(evaluate(PolicySource::network(ck, "TMB"), builtin_object("sphere"), ec));
}

TEST(Evaluate, RolloutRewardBreakdownOnRequest) {
  const auto c = quick_config();
  auto ec = c.eval_config(0, "sphere");
  const TactileEnv env(ec.env);
  int with = 0, without = 0;
  run_rollout(env, builtin_object("sphere"), 5, PolicySource::grid(), ec, [&](const RolloutStep& s) { without += s.reward.has_value(); });
  ec.reward = RewardConfig{};
  ec.reward->variant = RewardVariant::parse("TMB");
  run_rollout(env, builtin_object("sphere"), 5, PolicySource::grid(), ec, [&](const RolloutStep& s) { with += s.reward.has_value(); });
  EXPECT_EQ(without, 0);
  EXPECT_GT(with, 0);
}

TEST(Ablation, TwoByTwoRowsAndHeaders) {
  const auto res = run_ablation(quick_config());
  ASSERT_EQ(res.rows.size(), 4u);
  EXPECT_EQ(res.rows[0].variant, "grid");
  EXPECT_EQ(res.rows[0].object, "sphere");
  EXPECT_EQ(res.rows[3].variant, "random");
  EXPECT_EQ(res.rows[3].object, "cuboid");
  std::ostringstream o;
  write_results_csv(o, res.rows);
  EXPECT_EQ(o.str().substr(0, o.str().find('\n')), "variant,object,mean_IoU,mean_AUC,trials,seeds");
  const auto table = render_table(res);
  EXPECT_NE(table.find("sphere"), std::string::npos);
  EXPECT_NE(table.find("random"), std::string::npos);
}

TEST(Ablation, CsvBytesIndependentOfWorkers) {
  auto csv = [](int workers) {
    std::ostringstream o;
    write_results_csv(o, run_ablation(quick_config(), workers).rows);
    return o.str();
  };
  const auto a = csv(1);
  EXPECT_EQ(a, csv(1));
  EXPECT_EQ(a, csv(3));
}

TEST(Plots, EmptyCurveFileIsParseError) {
  std::istringstream empty("");
  EXPECT_THROW(read_curves(empty), ParseError);
}

TEST(Plots, BandSpansSeeds) {
  std::istringstream a("update,env_steps,mean_reward,mean_IoU,mean_AUC\n0,10,1.0,nan,nan\n1,20,2.0,0.1,nan\n");
  std::istringstream b("update,env_steps,mean_reward,mean_IoU,mean_AUC\n0,10,3.0,nan,nan\n1,20,4.0,0.3,nan\n");
  const std::vector<CurveTable> runs{read_curves(a), read_curves(b)};
  const auto s = aggregate_series("TMB", runs, "mean_reward");
  ASSERT_EQ(s.x.size(), 2u);
  EXPECT_EQ(s.mean[0], 2.0);
  EXPECT_EQ(s.lo[1], 2.0);
  EXPECT_EQ(s.hi[1], 4.0);
  const auto iou = aggregate_series("TMB", runs, "mean_IoU");
  ASSERT_EQ(iou.x.size(), 1u);  // NaN rows skipped
  EXPECT_NEAR(iou.mean[0], 0.2, 1e-15);
  const auto svg = render_svg({s}, "update", "mean_reward");
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find(">update</text>"), std::string::npos);
  EXPECT_NE(svg.find(">mean_reward</text>"), std::string::npos);
  EXPECT_NE(svg.find("<polygon"), std::string::npos);
  EXPECT_NE(svg.find(">TMB</text>"), std::string::npos);
}

TEST(Artifacts, Pgm16RoundTripInMillimetres) {
  DepthImage img(5, 3);
  img.at(0, 0) = 0.1234;
  img.at(4, 2) = 0.5;
  img.at(2, 1) = 70.0;  // saturates
  std::stringstream ss;
  write_pgm16(ss, img);
  const std::string raw = ss.str();
  EXPECT_EQ(raw.substr(0, 13), "P5\n5 3\n65535\n");
  EXPECT_EQ(raw[13], '\0');  // 123 mm, big-endian
  EXPECT_EQ(raw[14], '\x7b');
  const auto back = read_pgm16(ss);
  EXPECT_EQ(back.at(0, 0), 0.123);
  EXPECT_EQ(back.at(4, 2), 0.5);
  EXPECT_EQ(back.at(2, 1), 65.535);
  EXPECT_EQ(back.at(1, 1), 0.0);
  std::istringstream bad("P2\n1 1\n255\n0");
  EXPECT_THROW(read_pgm16(bad), ParseError);
}

TEST(Artifacts, ManifestFields) {
  Manifest m;
  m.command = "train";
  m.config_digest = 0xabc;
  m.seeds = {1, 2};
  m.workers = 4;
  m.outputs = {"a.csv"};
  const auto j = manifest_json(m);
  EXPECT_EQ(j["command"], "train");
  EXPECT_EQ(j["config_digest"], "0000000000000abc");
  EXPECT_EQ(j["seeds"].size(), 2u);
  EXPECT_EQ(j["workers"], 4);
  EXPECT_EQ(j["checkpoint_version"], kCheckpointVersion);
  EXPECT_EQ(j["outputs"][0], "a.csv");
}

TEST(Artifacts, StepJsonKeys) {
  const auto c = quick_config();
  auto ec = c.eval_config(0, "sphere");
  ec.reward = RewardConfig{};
  const TactileEnv env(ec.env);
  std::vector<Json> lines;
  run_rollout(env, builtin_object("sphere"), 1, PolicySource::grid(), ec, [&](const RolloutStep& s) { lines.push_back(rollout_step_json(s)); });
  ASSERT_FALSE(lines.empty());
  for (const char* k : {"t", "action", "wrist", "q", "touch", "new_contacts", "state", "reward", "terminated", "reason"})
    EXPECT_TRUE(lines[0].contains(k)) << k;
  EXPECT_EQ(lines[0]["touch"].size(), 20u);
  EXPECT_EQ(lines[0]["state"].size(), 38u);
  EXPECT_TRUE(lines.back()["terminated"].get<bool>());
}

TEST(Cli, UnknownOrMissingSubcommandFails) {
  EXPECT_NE(run_cli("frobnicate"), 0);
  EXPECT_NE(run_cli(""), 0);
  EXPECT_NE(run_cli("--workers 0 mesh-info sphere"), 0);
}

TEST(Cli, MeshInfoSucceeds) { EXPECT_EQ(run_cli("mesh-info cuboid"), 0); }

TEST(Cli, BadConfigKeyFails) {
  const auto d = scratch_dir("badcfg");
  std::ofstream(d / "x.cfg") << "eval.trials = 2\nnot.a.key = 3\n";
  EXPECT_EQ(run_cli("--config " + (d / "x.cfg").string() + " mesh-info sphere"), 2);
  fs::remove_all(d);
}

TEST(Cli, PoseOnDenseSphereCloud) {
  const auto d = scratch_dir("pose");
  const auto model = builtin_object("sphere");
  save_cloud(sample_mesh_surface(model->mesh, 1500, 3), (d / "cloud.ply").string());
  ASSERT_EQ(run_cli("--out-dir " + d.string() + " pose --object sphere --dump-depth --cloud " + (d / "cloud.ply").string()), 0);
  const auto j = Json::parse(slurp(d / "pose.json"));
  EXPECT_GE(j["auc"].get<double>(), 0.9);
  EXPECT_TRUE(fs::exists(d / "reconstruction.obj"));
  EXPECT_TRUE(fs::exists(d / "depth_0.pgm"));
  EXPECT_TRUE(fs::exists(d / "manifest.json"));
  fs::remove_all(d);
}

TEST(Cli, ExploreRepeatsUnderSameSeed) {
  const auto a = scratch_dir("explore_a"), b = scratch_dir("explore_b");
  ASSERT_EQ(run_cli("--seed 9 --out-dir " + a.string() + " explore --object cylinder --cap 60"), 0);
  ASSERT_EQ(run_cli("--seed 9 --out-dir " + b.string() + " explore --object cylinder --cap 60"), 0);
  const auto la = slurp(a / "explore.jsonl");
  EXPECT_FALSE(la.empty());
  EXPECT_EQ(la, slurp(b / "explore.jsonl"));
  EXPECT_EQ(slurp(a / "contacts.ply"), slurp(b / "contacts.ply"));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Cli, TrainWritesOneCurvePerSeed) {
  const auto d = scratch_dir("train");
  std::ofstream(d / "t.cfg") << "experiment.seeds = 1, 2, 3\ntrain.envs = 2\ntrain.rollout_steps = 32\ntrain.hidden = 8\n"
                                "train.monitor_auc = false\nppo.minibatch = 32\nppo.epochs = 1\n";
  ASSERT_EQ(run_cli("--config " + (d / "t.cfg").string() + " --out-dir " + d.string() + " train --variant TMB --budget 64"), 0);
  for (int s = 1; s <= 3; ++s) {
    EXPECT_TRUE(fs::exists(d / ("curves_TMB_seed" + std::to_string(s) + ".csv")));
    const auto ck = load_checkpoint((d / ("checkpoint_TMB_seed" + std::to_string(s) + ".bin")).string());
    EXPECT_EQ(ck.variant, "TMB");
    EXPECT_EQ(ck.env_steps, 64);
  }
  EXPECT_TRUE(fs::exists(d / "curve_mean_reward.svg"));
  const auto m = Json::parse(slurp(d / "manifest.json"));
  EXPECT_EQ(m["command"], "train");
  EXPECT_EQ(m["seeds"].size(), 3u);
  fs::remove_all(d);
}
