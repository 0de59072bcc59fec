// Drives the headpose-cli binary end to end.
#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "test_files.hpp"

namespace headpose {
namespace {

namespace fs = std::filesystem;

const std::string kCli = HEADPOSE_CLI_PATH;

int run(const std::string& args, const fs::path& log) {
  const std::string cmd = "'" + kCli + "' " + args + " >'" + log.string() + "' 2>&1";
  const int raw = std::system(cmd.c_str());
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

// Runs synth through report inside `root`; returns the first failing step.
std::string pipeline(const fs::path& root, const std::string& seed) {
  const fs::path log = root / "log.txt";
  const fs::path data = root / "data";
  const std::vector<std::pair<std::string, std::string>> steps{
      {"synth", "synth --out " + q(data) + " --seed " + seed + " --frames 60 --subjects 6 --swap 3"},
      {"pose", "pose --manifest " + q(data / "manifest.jsonl") + " --out " + q(root / "poses.jsonl")},
      {"features", "features --manifest " + q(data / "manifest.jsonl") + " --poses " +
                       q(root / "poses.jsonl") + " --out " + q(root / "features.csv")},
      {"split", "split --manifest " + q(data / "manifest.jsonl") + " --out " + q(root / "split") +
                    " --seed " + seed},
      {"train", "train --features " + q(root / "features.csv") + " --subset " +
                    q(root / "split/train.jsonl") + " --out " + q(root / "svm.json") + " --seed " + seed},
      {"evaluate", "evaluate --model " + q(root / "svm.json") + " --features " +
                       q(root / "features.csv") + " --subset " + q(root / "split/test.jsonl") +
                       " --out " + q(root / "eval")},
      {"report", "report --features " + q(root / "features.csv") + " --poses " +
                     q(root / "poses.jsonl") + " --scores " + q(root / "eval/scores.csv") +
                     " --manifest " + q(data / "manifest.jsonl") + " --out " + q(root / "report")},
  };
  for (const auto& [name, args] : steps) {
    if (run(args, log) != 0) return name + ": " + testing::read_file(log);
  }
  return {};
}

std::string summary_value(const fs::path& summary, const std::string& key) {
  std::istringstream in(testing::read_file(summary));
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind(key + ",", 0) == 0) return line.substr(key.size() + 1);
  }
  return {};
}

TEST(Cli, FullPipelineProducesFiniteAuc) {
  testing::TempDir dir;
  ASSERT_EQ(pipeline(dir.path(), "11"), "");
  const std::string auc = summary_value(dir / "eval/summary.csv", "auc");
  ASSERT_FALSE(auc.empty());
  EXPECT_TRUE(std::isfinite(std::stod(auc)));
  EXPECT_FALSE(summary_value(dir / "report/summary.csv", "inner_flip_share").empty());
}

TEST(Cli, RerunIsByteIdentical) {
  testing::TempDir a, b;
  ASSERT_EQ(pipeline(a.path(), "4"), "");
  ASSERT_EQ(pipeline(b.path(), "4"), "");
  size_t compared = 0;
  for (const auto& entry : fs::recursive_directory_iterator(a.path())) {
    if (!entry.is_regular_file() || entry.path().filename() == "log.txt") continue;
    const fs::path rel = fs::relative(entry.path(), a.path());
    EXPECT_EQ(testing::read_file(entry.path()), testing::read_file(b.path() / rel)) << rel;
    ++compared;
  }
  EXPECT_GT(compared, 60u);
}

TEST(Cli, RerunInPlaceIsIdempotent) {
  testing::TempDir dir;
  ASSERT_EQ(pipeline(dir.path(), "8"), "");
  const std::string poses = testing::read_file(dir / "poses.jsonl");
  const std::string svm = testing::read_file(dir / "svm.json");
  ASSERT_EQ(pipeline(dir.path(), "8"), "");
  EXPECT_EQ(testing::read_file(dir / "poses.jsonl"), poses);
  EXPECT_EQ(testing::read_file(dir / "svm.json"), svm);
}

size_t count_flipped(const fs::path& poses) {
  const std::string text = testing::read_file(poses);
  size_t n = 0;
  for (size_t at = text.find("\"flipped\":true"); at != std::string::npos;
       at = text.find("\"flipped\":true", at + 1)) {
    ++n;
  }
  return n;
}

TEST(Cli, CorrectionLowersFlipShare) {
  testing::TempDir dir;
  const fs::path log = dir / "log.txt";
  const fs::path manifest = dir / "data/manifest.jsonl";
  ASSERT_EQ(run("synth --out " + q(dir / "data") + " --seed 2 --frames 100 --subjects 10", log), 0);
  const std::string common = "pose --manifest " + q(manifest) + " --adversarial-init 0.5 --seed 3";
  ASSERT_EQ(run(common + " --no-correction --out " + q(dir / "raw.jsonl"), log), 0)
      << testing::read_file(log);
  ASSERT_EQ(run(common + " --out " + q(dir / "fixed.jsonl"), log), 0) << testing::read_file(log);
  const size_t raw = count_flipped(dir / "raw.jsonl");
  const size_t fixed = count_flipped(dir / "fixed.jsonl");
  EXPECT_GT(raw, fixed);
  EXPECT_GT(raw, 50u);
  EXPECT_EQ(fixed, 0u);
}

TEST(Cli, SingleClassTrainingFails) {
  testing::TempDir dir;
  const fs::path log = dir / "log.txt";
  testing::write_file(dir / "features.csv",
                      "frame_id,dr00,dr01,dr02,dr10,dr11,dr12,dr20,dr21,dr22,dtx,dty,dtz,"
                      "cosine_distance,inner_flipped,all_flipped,label,subject_ids\n"
                      "a,0,0,0,0,0,0,0,0,0,1,0,0,0,0,0,fake,s1\n"
                      "b,0,0,0,0,0,0,0,0,0,2,0,0,0,0,0,fake,s2\n");
  EXPECT_EQ(run("train --features " + q(dir / "features.csv") + " --out " + q(dir / "svm.json"), log), 7);
  EXPECT_NE(testing::read_file(log).find("single class"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir / "svm.json"));
}

TEST(Cli, ExitCodesForBadInvocations) {
  testing::TempDir dir;
  const fs::path log = dir / "log.txt";
  EXPECT_EQ(run("pose --manifest " + q(dir / "missing.jsonl") + " --out " + q(dir / "p.jsonl"), log), 3);
  EXPECT_NE(testing::read_file(log).find("missing.jsonl"), std::string::npos);
  EXPECT_EQ(run("pose --manifest x --out y --no-correction --correction-after 2", log), 64);
  EXPECT_EQ(run("split --manifest x --out y --mode sideways", log), 64);
  EXPECT_EQ(run("", log), 64);
  testing::write_file(dir / "bad.jsonl", "{\"frame_id\": \n");
  EXPECT_EQ(run("split --manifest " + q(dir / "bad.jsonl") + " --out " + q(dir / "s"), log), 2);
  EXPECT_NE(testing::read_file(log).find("bad.jsonl:1"), std::string::npos);
}

TEST(Cli, HelpDocumentsExitCodes) {
  testing::TempDir dir;
  EXPECT_EQ(run("--help", dir / "help.txt"), 0);
  const std::string help = testing::read_file(dir / "help.txt");
  for (const char* needle : {"Exit status", "64", "HEADPOSE_MODEL", "version 1"}) {
    EXPECT_NE(help.find(needle), std::string::npos) << needle;
  }
}

}  // namespace
}  // namespace headpose
