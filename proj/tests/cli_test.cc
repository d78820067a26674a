#include <gtest/gtest.h>

#include <sys/wait.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string &name) {
  fs::path p = fs::temp_directory_path() / ("atsen_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run(const std::string &args) {
  std::string cmd = std::string(ATSEN_CLI) + " " + args + " >/dev/null 2>&1";
  int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Small corpus and a short schedule so each command takes well under a second.
fs::path small_config(const fs::path &dir, const std::string &extra = "") {
  fs::path p = dir / "config.json";
  std::ofstream(p) << R"({
  "master_seed": 3,
  "data_dir": "data",
  "synth": {"train_sentences": 60, "dev_sentences": 15, "test_sentences": 15,
            "surface_forms_per_type": 30, "entity_words_per_type": 30, "context_words": 40)"
                   << extra << R"(},
  "taggers": [{"embed_dim": 6, "hidden_dim": 8}, {"embed_dim": 6, "hidden_dim": 7}],
  "trainer": {"pretrain_epochs": 2, "max_epochs": 2}
})";
  return p;
}

TEST(Cli, SynthIsByteIdenticalAndRoundTrips) {
  fs::path dir = scratch("synth");
  fs::path cfg = small_config(dir);
  ASSERT_EQ(run("synth --config " + cfg.string() + " --out " + (dir / "a").string()), 0);
  ASSERT_EQ(run("synth --config " + cfg.string() + " --out " + (dir / "b").string()), 0);
  for (const char *f : {"train.jsonl", "dev.jsonl", "test.jsonl", "dictionary.tsv", "meta.json"}) {
    EXPECT_FALSE(slurp(dir / "a" / f).empty()) << f;
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
  }
  auto meta = nlohmann::json::parse(slurp(dir / "a" / "meta.json"));
  EXPECT_EQ(meta["synth"]["train_sentences"], 60);
}

TEST(Cli, PerfectDictionaryReportsOnes) {
  fs::path dir = scratch("perfect");
  fs::path cfg = small_config(dir, R"(, "coverage": 1.0, "confusion": 0.0)");
  ASSERT_EQ(run("synth --config " + cfg.string() + " --out " + (dir / "data").string()), 0);
  auto meta = nlohmann::json::parse(slurp(dir / "data" / "meta.json"));
  EXPECT_EQ(meta["noise"]["label_precision"], 1.0);
  EXPECT_EQ(meta["noise"]["label_recall"], 1.0);
}

TEST(Cli, TrainRecordAndEval) {
  fs::path dir = scratch("train");
  fs::path cfg = small_config(dir);
  ASSERT_EQ(run("synth --config " + cfg.string() + " --out " + (dir / "data").string()), 0);
  ASSERT_EQ(run("train --config " + cfg.string() + " --out " + (dir / "run").string()), 0);
  auto rec = nlohmann::json::parse(slurp(dir / "run" / "record.json"));
  EXPECT_TRUE(rec["run"]["complete"].get<bool>());
  EXPECT_EQ(rec["run"]["epochs"].size(), 3u);
  EXPECT_EQ(rec["config"]["master_seed"], 3);
  EXPECT_TRUE(rec["derived_seeds"].contains("data"));
  for (const char *m : {"teacher1", "student1", "teacher2", "student2"}) {
    EXPECT_TRUE(rec["run"]["epochs"][1]["dev"].contains(m));
    EXPECT_TRUE(fs::exists(dir / "run" / (std::string(m) + ".ckpt")));
  }
  EXPECT_TRUE(fs::exists(dir / "run" / "best.ckpt"));

  std::string out = (dir / "eval.json").string();
  std::string cmd = std::string(ATSEN_CLI) + " eval --checkpoint " + (dir / "run" / "best.ckpt").string() +
                    " --data " + (dir / "data" / "test.jsonl").string() + " --json > " + out;
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  auto m = nlohmann::json::parse(slurp(out));
  EXPECT_EQ(m["f1"], rec["run"]["test"]["f1"]);
}

TEST(Cli, ZeroEpochsAndOverride) {
  fs::path dir = scratch("zero");
  fs::path cfg = small_config(dir);
  ASSERT_EQ(run("synth --config " + cfg.string() + " --out " + (dir / "data").string()), 0);
  ASSERT_EQ(run("train --config " + cfg.string() + " --set trainer.max_epochs=0 --out " +
                (dir / "run").string()),
            0);
  auto rec = nlohmann::json::parse(slurp(dir / "run" / "record.json"));
  EXPECT_EQ(rec["run"]["epochs"].size(), 1u);
  EXPECT_EQ(rec["config"]["trainer"]["max_epochs"], 0);
}

TEST(Cli, AblateReport) {
  fs::path dir = scratch("ablate");
  fs::path cfg = small_config(dir);
  ASSERT_EQ(run("synth --config " + cfg.string() + " --out " + (dir / "data").string()), 0);
  ASSERT_EQ(run("ablate --config " + cfg.string() + " --name fe --out " + (dir / "fe").string()), 0);
  auto rep = nlohmann::json::parse(slurp(dir / "fe" / "report.json"));
  EXPECT_EQ(rep["label"], "w/o FE");
  EXPECT_EQ(rep["changed_fields"].size(), 4u);
  EXPECT_EQ(rep["runs"].size(), 1u);
  EXPECT_TRUE(fs::exists(dir / "fe" / "table.txt"));
}

TEST(Cli, ExitCodes) {
  fs::path dir = scratch("codes");
  fs::path cfg = small_config(dir);
  EXPECT_EQ(run(""), 1);
  EXPECT_EQ(run("bogus"), 1);
  EXPECT_EQ(run("synth --out x"), 1);
  EXPECT_EQ(run("ablate --config " + cfg.string() + " --name nonsense --out " + (dir / "o").string()), 1);
  EXPECT_EQ(run("train --config " + cfg.string() + " --set trainer.learning_rate=-1 --out " +
                (dir / "o").string()),
            1);
  EXPECT_EQ(run("train --config " + cfg.string() + " --out " + (dir / "o").string()), 2);
  EXPECT_EQ(run("synth --config " + (dir / "missing.json").string() + " --out " + (dir / "o").string()), 2);
  std::ofstream(dir / "bad.json") << "{ not json";
  EXPECT_EQ(run("synth --config " + (dir / "bad.json").string() + " --out " + (dir / "o").string()), 2);
  std::ofstream(dir / "unknown.json") << R"({"trainer": {"speed": 1}})";
  EXPECT_EQ(run("synth --config " + (dir / "unknown.json").string() + " --out " + (dir / "o").string()), 1);
}

}  // namespace
