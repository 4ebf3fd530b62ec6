#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "dcmcl/cli.hpp"
#include "dcmcl/data.hpp"

namespace fs = std::filesystem;

namespace {

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "dcmcl");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return dcmcl::run(static_cast<int>(argv.size()), argv.data());
}

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("dcmcl_test_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::size_t line_count(const fs::path& p) {
  std::ifstream is(p);
  std::size_t n = 0;
  for (std::string line; std::getline(is, line);) ++n;
  return n;
}

const std::vector<std::string> kSmall = {"--vocab-size", "16", "--d-model", "16", "--d-hidden", "32", "--n-enc-layers", "1",
                                         "--n-dec-layers", "1", "--max-len", "12", "--max-decode-len", "10",
                                         "--token-budget", "48", "--warmup-steps", "5"};

std::vector<std::string> with_small(std::vector<std::string> args) {
  args.insert(args.end(), kSmall.begin(), kSmall.end());
  return args;
}

void gen(const fs::path& dir) {
  REQUIRE(cli({"gen-data", "--out-dir", dir.string(), "--task", "reverse", "--vocab-size", "16", "--max-len", "12",
               "--min-length", "2", "--max-length", "6", "--train", "40", "--valid", "6", "--test", "5"}) == 0);
}

}  // namespace

TEST_CASE("gradcheck exits 0 on the tiny model") {
  CHECK(cli({"gradcheck"}) == 0);
  // An impossible tolerance turns into a runtime failure code.
  CHECK(cli({"gradcheck", "--tolerance", "1e-30"}) == 2);
}

TEST_CASE("usage errors exit 1") {
  CHECK(cli({}) == 1);
  CHECK(cli({"transmogrify"}) == 1);
  CHECK(cli({"train", "--no-such-flag"}) == 1);
  CHECK(cli({"train", "--peak-lr", "fast", "--data-dir", "x"}) == 1);
  CHECK(cli({"ablate", "--axes", "se,bogus", "--data-dir", "x"}) == 1);
  CHECK(cli({"--help"}) == 0);
}

TEST_CASE("gen-data writes the splits and is seed reproducible") {
  const fs::path a = scratch("gen_a"), b = scratch("gen_b");
  gen(a);
  gen(b);
  for (const char* f : {"train.src", "train.tgt", "valid.src", "valid.tgt", "test.src", "test.tgt"}) {
    REQUIRE(fs::exists(a / f));
    std::ifstream x(a / f), y(b / f);
    CHECK(std::string(std::istreambuf_iterator<char>(x), {}) == std::string(std::istreambuf_iterator<char>(y), {}));
  }
  CHECK(line_count(a / "train.src") == 40);
  CHECK(line_count(a / "test.tgt") == 5);
  const dcmcl::ParallelCorpus t = dcmcl::read_corpus(a / "train", 16);
  for (std::size_t i = 0; i < t.size(); ++i) CHECK(t.tgt[i] == dcmcl::Sentence(t.src[i].rbegin(), t.src[i].rend()));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("train, evaluate, decode and distill") {
  const fs::path data = scratch("data"), run = scratch("run");
  gen(data);
  REQUIRE(cli(with_small({"train", "--data-dir", data.string(), "--out-dir", run.string(), "--max-steps", "20",
                          "--eval-every", "10", "--seed", "3"})) == 0);
  for (const char* f : {"config.txt", "metrics.jsonl", "model.ckpt", "averaged.ckpt", "final.json"}) CHECK(fs::exists(run / f));
  CHECK(line_count(run / "metrics.jsonl") == 2);

  const fs::path dec = scratch("decode");
  for (const char* mode : {"ar", "nar"}) {
    const fs::path out = dec / (std::string(mode) + ".txt");
    CHECK(cli({"decode", "--checkpoint", (run / "model.ckpt").string(), "--input", (data / "test.src").string(), "--out-dir",
               dec.string(), "--output", out.filename().string(), "--mode", mode}) == 0);
    CHECK(line_count(out) == line_count(data / "test.src"));
  }
  CHECK(cli({"decode", "--checkpoint", (run / "model.ckpt").string(), "--input", (data / "test.src").string(), "--out-dir",
             dec.string(), "--mode", "sideways"}) == 1);
  CHECK(cli({"decode", "--checkpoint", (run / "missing.ckpt").string(), "--input", (data / "test.src").string(),
             "--out-dir", dec.string()}) == 1);
  {
    std::ofstream bad(dec / "bad.ckpt", std::ios::binary);
    bad << "garbage";
  }
  CHECK(cli({"decode", "--checkpoint", (dec / "bad.ckpt").string(), "--input", (data / "test.src").string(), "--out-dir",
             dec.string()}) == 2);

  const fs::path ev = scratch("eval");
  CHECK(cli({"evaluate", "--checkpoint", (run / "averaged.ckpt").string(), "--data", (data / "test").string(), "--out-dir",
             ev.string(), "--iteration-sweep", "1,2"}) == 0);
  CHECK(line_count(ev / "evaluate.jsonl") >= 4);
  CHECK(fs::exists(ev / "iteration_sweep.csv"));

  const fs::path dist = scratch("distill");
  CHECK(cli({"distill", "--checkpoint", (run / "model.ckpt").string(), "--data", (data / "train").string(), "--out-dir",
             dist.string()}) == 0);
  CHECK(line_count(dist / "distill.src") == 40);
  CHECK(line_count(dist / "distill.tgt") == 40);

  // Same seed, same run.
  const fs::path again = scratch("run_again");
  REQUIRE(cli(with_small({"train", "--data-dir", data.string(), "--out-dir", again.string(), "--max-steps", "20",
                          "--eval-every", "10", "--seed", "3"})) == 0);
  std::ifstream x(run / "metrics.jsonl"), y(again / "metrics.jsonl");
  CHECK(std::string(std::istreambuf_iterator<char>(x), {}) == std::string(std::istreambuf_iterator<char>(y), {}));

  for (const auto& d : {data, run, dec, ev, dist, again}) fs::remove_all(d);
}

TEST_CASE("config file with flag overrides") {
  const fs::path dir = scratch("config");
  {
    std::ofstream cfg(dir / "tiny.cfg");
    cfg << "# gradient check settings\nseed = 4\n";
  }
  CHECK(cli({"gradcheck", "--config", (dir / "tiny.cfg").string(), "--richardson"}) == 0);
  CHECK(cli({"gradcheck", "--config", (dir / "absent.cfg").string()}) != 0);
  fs::remove_all(dir);
}

TEST_CASE("ablate over se,tml,scl writes eight runs") {
  const fs::path data = scratch("abl_data"), out = scratch("abl");
  gen(data);
  REQUIRE(cli(with_small({"ablate", "--axes", "se,tml,scl", "--data-dir", data.string(), "--out-dir", out.string(),
                          "--max-steps", "6", "--eval-every", "3", "--eval-sentences", "2"})) == 0);
  int logs = 0;
  for (const auto& e : fs::directory_iterator(out))
    if (e.is_directory() && fs::exists(e.path() / "metrics.jsonl")) {
      ++logs;
      CHECK(line_count(e.path() / "metrics.jsonl") == 2);
    }
  CHECK(logs == 8);
  CHECK(line_count(out / "ablation.csv") == 9);
  fs::remove_all(data);
  fs::remove_all(out);
}
