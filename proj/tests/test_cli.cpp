#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "stcnn/config.hpp"
#include "stcnn/data_model.hpp"
#include "stcnn/errors.hpp"

using namespace stcnn;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::stringstream s;
  s << std::ifstream(p, std::ios::binary).rdbuf();
  return s.str();
}

fs::path workdir() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "stcnn_test_cli";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

Result run(const std::string& args) {
  const fs::path out = workdir() / "stdout.txt", err = workdir() / "stderr.txt";
  const std::string cmd = std::string(STCNN_CLI) + " " + args + " >" + out.string() + " 2>" +
                          err.string();
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

// Small synthetic dataset shared by the command tests.
fs::path dataset() {
  static const fs::path root = [] {
    const fs::path r = workdir() / "data";
    const Result made = run("make-synthetic --set dataset_root=" + r.string() +
                            " --set synthetic_sequences=2 --set synthetic_frames=3"
                            " --set synthetic_height=48 --set synthetic_width=48 --seed 4");
    REQUIRE(made.code == 0);
    return r;
  }();
  return root;
}

std::string data_flag() { return " --set dataset_root=" + dataset().string(); }

}  // namespace

TEST_CASE("config parsing") {
  const RunConfig c = RunConfig::parse(
      "# comment\n\ndelta = 4\nonline_iterations=100\nsequences = a, b\nattention = false\n"
      "loss_reduction = sum\nscale_profile = tiny\n");
  CHECK(c.schedule.online_iterations == 100);
  CHECK(c.sequences == std::vector<std::string>{"a", "b"});
  CHECK_FALSE(c.attention);
  CHECK(c.schedule.reduction == LossReduction::Sum);
  CHECK_THROWS_AS(RunConfig::parse("bogus = 1\n"), ConfigError);
  CHECK_THROWS_AS(RunConfig::parse("delta = four\n"), ConfigError);
  CHECK_THROWS_AS(RunConfig::parse("attention = maybe\n"), ConfigError);
  CHECK_THROWS_AS(RunConfig::parse("no equals sign\n"), ConfigError);
  CHECK_THROWS_AS(RunConfig::load(workdir() / "absent.cfg"), ConfigError);
}

TEST_CASE("defaults are the published settings and dump round-trips") {
  const RunConfig c;
  CHECK(c.schedule.delta == 4);
  CHECK(c.schedule.lambda_adv == 0.001);
  CHECK(c.schedule.online_iterations == 400);
  CHECK(c.schedule.spatial_batch == 8);
  RunConfig changed;
  changed.set("offline_lr_spatial", "0.0025");
  changed.set("seed", "77");
  changed.set("lucid", "false");
  const RunConfig back = RunConfig::parse(changed.dump());
  CHECK(back.dump() == changed.dump());
  CHECK(back.schedule.offline_lr_spatial == 0.0025);
  CHECK(back.schedule.seed == 77);
  for (const std::string& key : RunConfig::keys()) {
    CAPTURE(key);
    CHECK(changed.dump().find(key + " = ") != std::string::npos);
  }
}

TEST_CASE("bad configuration exits with 2") {
  const Result r = run("pretrain-spatial --set bogus=1");
  CHECK(r.code == 2);
  CHECK(r.err.rfind("error: config: ", 0) == 0);
  CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);

  const fs::path cfg = workdir() / "bad.cfg";
  std::ofstream(cfg) << "online_iterations = 10\nno_such_key = 3\n";
  CHECK(run("segment --config " + cfg.string()).code == 2);
  CHECK(run("segment --iterations many").code == 2);
  CHECK(run("train-offline" + data_flag()).code == 2);
  CHECK(run("").code == 2);
}

TEST_CASE("missing data exits with 3") {
  const Result r = run("pretrain-spatial --set dataset_root=" + (workdir() / "nowhere").string());
  CHECK(r.code == 3);
  CHECK(r.err.rfind("error: not_found: ", 0) == 0);
  CHECK(run("pretrain-spatial" + data_flag() + " --set sequences=ghost").code == 3);
  CHECK(run("segment" + data_flag() + " --set checkpoint=" + (workdir() / "none.ckpt").string())
            .code == 3);
}

TEST_CASE("evaluating the ground truth against itself") {
  const fs::path gt = dataset() / "Annotations" / "480p";
  const fs::path out = workdir() / "eval";
  const Result r = run("evaluate --predictions " + gt.string() + " --gt " + gt.string() +
                       " --output " + out.string());
  REQUIRE(r.code == 0);
  CHECK(r.out.find("J,1.000,1.000,") != std::string::npos);
  CHECK(r.out.find("F,1.000,1.000,") != std::string::npos);
  CHECK(slurp(out / "summary.csv") == r.out);
  CHECK(slurp(out / "per_frame.csv").rfind("sequence,frame,J,F\n", 0) == 0);
}

TEST_CASE("training commands, segmentation and checkpoints") {
  const fs::path out = workdir() / "run";
  const std::string base = data_flag() + " --output " + out.string() + " --seed 3";
  REQUIRE(run("pretrain-spatial" + base + " --set pretrain_spatial_steps=2 --set spatial_batch=2")
              .code == 0);
  const fs::path ckpt = out / "pretrain_spatial.ckpt";
  REQUIRE(fs::exists(ckpt));
  const std::string before = slurp(ckpt);

  REQUIRE(run("train-offline" + base + " --set checkpoint=" + ckpt.string() +
              " --set offline_steps=2 --set alternation=1")
              .code == 0);
  CHECK(slurp(ckpt) == before);
  CHECK(fs::exists(out / "offline.ckpt"));
  CHECK(slurp(out / "losses.csv").rfind("step,phase,loss_name,value\n", 0) == 0);

  const std::string seg = "segment" + base + " --set checkpoint=" + (out / "offline.ckpt").string() +
                          " --iterations 2 --set online_set_size=3";
  REQUIRE(run(seg + " square00").code == 0);
  const fs::path masks = out / "masks" / "square00";
  REQUIRE(fs::exists(masks / "00002.png"));
  const std::string first = slurp(masks / "00002.png");
  REQUIRE(run(seg + " square00").code == 0);
  CHECK(slurp(masks / "00002.png") == first);
  CHECK(read_mask_png(masks / "00000.png") ==
        read_mask_png(dataset() / "Annotations" / "480p" / "square00" / "00000.png"));
}

TEST_CASE("a one-frame sequence gets its annotation back") {
  const fs::path root = workdir() / "single";
  const fs::path src = dataset();
  for (const char* kind : {"JPEGImages", "Annotations"}) {
    fs::create_directories(root / kind / "480p" / "one");
  }
  fs::copy_file(src / "JPEGImages" / "480p" / "square01" / "00000.jpg",
                root / "JPEGImages" / "480p" / "one" / "00000.jpg");
  fs::copy_file(src / "Annotations" / "480p" / "square01" / "00000.png",
                root / "Annotations" / "480p" / "one" / "00000.png");
  const fs::path out = workdir() / "single_out";
  const std::string base = " --set dataset_root=" + root.string() + " --output " + out.string();
  REQUIRE(run("pretrain-spatial" + base + " --set pretrain_spatial_steps=0").code == 0);
  REQUIRE(run("segment" + base + " --set checkpoint=" + (out / "pretrain_spatial.ckpt").string())
              .code == 0);
  CHECK(read_mask_png(out / "masks" / "one" / "00000.png") ==
        read_mask_png(root / "Annotations" / "480p" / "one" / "00000.png"));
}
