#include <doctest.h>

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "earlycorr/dataset_io.hpp"
#include "earlycorr/rng.hpp"
#include "fixtures.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
  int code = -1;
  std::string output;
};

std::string bin() {
  const char* b = std::getenv("EARLYCORR_BIN");
  REQUIRE_MESSAGE(b != nullptr, "EARLYCORR_BIN is not set");
  return b;
}

Result run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + (env.empty() ? "" : " ") + bin() + " " + args + " 2>&1";
  Result r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.output.append(buf, n);
  const int status = ::pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t count_lines(const std::string& s) {
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

fs::path write_config(const fs::path& dir, const json& j) {
  fs::create_directories(dir);
  auto p = dir / "config.json";
  std::ofstream(p) << j.dump(2);
  return p;
}

}  // namespace

TEST_CASE("synth writes a dataset and a run manifest") {
  auto out = fixtures::scratch("cli_synth");
  auto r = run("synth --pairs 5 --min-packets 8 --max-packets 20 --out " + out.string());
  INFO(r.output);
  CHECK(r.code == 0);
  CHECK(count_lines(slurp(out / earlycorr::kDatasetFile)) == 10);
  auto manifest = json::parse(slurp(out / "run_manifest.json"));
  CHECK(manifest["verb"] == "synth");
  CHECK(manifest["status"] == "ok");
  CHECK(manifest["versions"].contains("eigen"));
  CHECK(manifest["resolved"]["seed"] == 1);
  fs::remove_all(out);
}

TEST_CASE("unknown verbs and bad flags exit with code 2") {
  CHECK(run("frobnicate").code == 2);
  CHECK(run("").code == 2);
  CHECK(run("train").code == 2);
  CHECK(run("synth --pairs many").code == 2);
  CHECK(run("--version").code == 0);
  CHECK(run("synth --help").code == 0);
}

TEST_CASE("domain errors exit with code 1 and are recorded") {
  auto out = fixtures::scratch("cli_err");
  auto r = run("train --data /nonexistent/data --out " + out.string());
  CHECK(r.code == 1);
  CHECK(r.output.find("error") != std::string::npos);
  auto manifest = json::parse(slurp(out / "run_manifest.json"));
  CHECK(manifest["status"] == "failed");
  CHECK(run("synth --pairs 3 --repacket 2 --out " + out.string()).code == 1);
  fs::remove_all(out);
}

TEST_CASE("seed precedence: flag, then config, then environment") {
  auto out = fixtures::scratch("cli_seed");
  auto seed_of = [&] { return json::parse(slurp(out / "run_manifest.json"))["resolved"]["seed"].get<std::uint64_t>(); };
  const std::string base = "synth --pairs 2 --min-packets 8 --max-packets 10 --out " + out.string();
  REQUIRE(run(base, "EARLYCORR_SEED=77").code == 0);
  CHECK(seed_of() == 77);
  REQUIRE(run(base + " --seed 5", "EARLYCORR_SEED=77").code == 0);
  CHECK(seed_of() == 5);
  auto cfg = write_config(out / "cfg", {{"seed", 9}});
  REQUIRE(run(base + " --config " + cfg.string()).code == 0);
  CHECK(seed_of() == 9);
  CHECK(run(base, "EARLYCORR_SEED=abc").code == 1);
  fs::remove_all(out);
}

TEST_CASE("eval: one row per method and negative count; flag order does not matter") {
  auto root = fixtures::scratch("cli_eval");
  auto cfg = fixtures::small_experiment(root / "unused");
  cfg.n_neg = {2, 3, 4};
  json j = cfg.to_json();
  j.erase("out_dir");
  auto path = write_config(root, j);

  auto a = run("eval --config " + path.string() + " --out " + (root / "a").string());
  INFO(a.output);
  REQUIRE(a.code == 0);
  const std::string metrics = slurp(root / "a" / "metrics.csv");
  CHECK(count_lines(metrics) == 1 + 3 * 3);
  CHECK(a.output.find("method,view,n_neg,policy,acc,tpr,fpr,tau") != std::string::npos);

  auto b = run("eval --out " + (root / "b").string() + " --config " + path.string());
  REQUIRE(b.code == 0);
  CHECK(slurp(root / "b" / "metrics.csv") == metrics);

  // A different seed changes the run.
  auto c = run("eval --seed 2 --config " + path.string() + " --out " + (root / "c").string());
  REQUIRE(c.code == 0);
  CHECK(slurp(root / "c" / "metrics.csv") != metrics);
  fs::remove_all(root);
}

TEST_CASE("train, correlate and roc chain on a synthetic dataset") {
  auto root = fixtures::scratch("cli_chain");
  auto cfg = fixtures::small_experiment(root);
  json j = {{"model", cfg.model.to_json()}, {"windows", earlycorr::windows_to_json(cfg.windows)}};
  auto path = write_config(root, j);
  const std::string data = (root / "data").string();
  REQUIRE(run("synth --pairs 60 --min-packets 20 --max-packets 40 --out " + data).code == 0);

  auto t = run("train --config " + path.string() + " --data " + data + " --epochs 2 --batch 16 --out " +
               (root / "t").string());
  INFO(t.output);
  REQUIRE(t.code == 0);
  CHECK(fs::exists(root / "t" / "model" / "training_log.csv"));
  CHECK(count_lines(slurp(root / "t" / "model" / "training_log.csv")) == 4);

  auto c = run("correlate --checkpoint " + (root / "t" / "model").string() + " --data " + data +
               " --n-neg 3 --out " + (root / "c").string());
  INFO(c.output);
  REQUIRE(c.code == 0);
  CHECK(c.output.find("policy bayes") != std::string::npos);
  // 12 test entries, each against its exit and 3 decoys.
  CHECK(count_lines(slurp(root / "c" / "decisions.csv")) == 1 + 12 * 4);
  CHECK(fs::exists(root / "c" / "likelihood.json"));

  auto v = run("correlate --checkpoint " + (root / "t" / "model").string() + " --data " + data +
               " --n-neg 3 --policy vote:9 --out " + (root / "c").string());
  CHECK(v.code == 1);

  auto r = run("roc --decisions " + (root / "c" / "decisions.csv").string() + " --out " + (root / "r").string());
  INFO(r.output);
  REQUIRE(r.code == 0);
  CHECK(r.output.find("auc") != std::string::npos);
  CHECK(slurp(root / "r" / "roc.csv").rfind("tau,tpr,fpr\n", 0) == 0);
  fs::remove_all(root);
}

TEST_CASE("property: synth output depends only on its flags, not their order") {
  auto root = fixtures::scratch("cli_order");
  earlycorr::Rng rng(91);
  for (int c = 0; c < 200; ++c) {
    const std::uint64_t seed = rng.uniform_int(1000);
    std::vector<std::string> flags = {"--pairs " + std::to_string(1 + rng.uniform_int(3)),
                                      "--min-packets 8", "--max-packets " + std::to_string(8 + rng.uniform_int(6)),
                                      "--seed " + std::to_string(seed)};
    const std::string out_a = "--out " + (root / "a").string();
    const std::string out_b = "--out " + (root / "b").string();
    std::string args_a = "synth", args_b = "synth";
    for (const auto& f : flags) args_a += " " + f;
    args_a += " " + out_a;
    flags.push_back(out_b);
    for (std::size_t i = flags.size() - 1; i > 0; --i) std::swap(flags[i], flags[rng.uniform_int(i + 1)]);
    for (const auto& f : flags) args_b += " " + f;
    REQUIRE(run(args_a).code == 0);
    REQUIRE(run(args_b).code == 0);
    CHECK(slurp(root / "a" / earlycorr::kDatasetFile) == slurp(root / "b" / earlycorr::kDatasetFile));
    auto ma = json::parse(slurp(root / "a" / "run_manifest.json"));
    auto mb = json::parse(slurp(root / "b" / "run_manifest.json"));
    CHECK(ma["resolved"]["seed"] == seed);
    CHECK(ma["resolved"]["synth"] == mb["resolved"]["synth"]);
  }
  fs::remove_all(root);
}
