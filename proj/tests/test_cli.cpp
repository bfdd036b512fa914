#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "milmine/milmine.hpp"

namespace fs = std::filesystem;

namespace {

const char* kCli = MILMINE_CLI_PATH;

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("milmine-cli-test-" + std::to_string(::getpid()) + "-" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
  std::string file(const std::string& name) const {
    return (path / name).string();
  }
};

int run(const std::string& args) {
  const std::string cmd = std::string(kCli) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

}  // namespace

TEST_CASE("gen-data writes a deterministic corpus with sidecar config") {
  TempDir dir;
  const std::string a = dir.file("a.tsv"), b = dir.file("b.tsv");
  REQUIRE(run("gen-data --seed 5 --sentences 50 --out " + a) == 0);
  REQUIRE(run("gen-data --seed 5 --sentences 50 --out " + b) == 0);
  CHECK(slurp(a) == slurp(b));
  CHECK(fs::exists(a + ".config"));
  const std::string config = slurp(a + ".config");
  CHECK(config.find("seed=5") != std::string::npos);

  const std::string c = dir.file("c.tsv");
  REQUIRE(run("gen-data --seed 6 --sentences 50 --out " + c) == 0);
  CHECK(slurp(a) != slurp(c));
}

TEST_CASE("gen-data with error fraction zero emits only clean sentences") {
  TempDir dir;
  const std::string out = dir.file("clean.tsv");
  REQUIRE(run("gen-data --seed 1 --sentences 30 --error-fraction 0 --out " +
              out) == 0);
  std::ifstream in(out);
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    ++lines;
    CHECK(line.find("\t0\t") != std::string::npos);
  }
  CHECK(lines == 30);
}

TEST_CASE("train produces a checkpoint, history, and sidecar") {
  TempDir dir;
  const std::string corpus = dir.file("corpus.tsv");
  REQUIRE(run("gen-data --seed 2 --sentences 120 --vocab-size 30 --out " +
              corpus) == 0);
  const std::string ckpt = dir.file("model.bin");
  REQUIRE(run("train --corpus " + corpus + " --out " + ckpt +
              " --seed 2 --max-epochs 3") == 0);
  CHECK(fs::exists(ckpt));
  CHECK(fs::exists(ckpt + ".history"));
  CHECK(fs::exists(ckpt + ".config"));
  // checkpoint starts with the magic
  CHECK(slurp(ckpt).substr(0, 8) ==
        std::string(milmine::kCheckpointMagic, 8));

  // deterministic re-run
  const std::string ckpt2 = dir.file("model2.bin");
  REQUIRE(run("train --corpus " + corpus + " --out " + ckpt2 +
              " --seed 2 --max-epochs 3") == 0);
  CHECK(slurp(ckpt) == slurp(ckpt2));
  CHECK(slurp(ckpt + ".history") == slurp(ckpt2 + ".history"));
}

TEST_CASE("train --max-epochs 0 checkpoints the initialization") {
  TempDir dir;
  const std::string corpus = dir.file("corpus.tsv");
  REQUIRE(run("gen-data --seed 3 --sentences 60 --out " + corpus) == 0);
  const std::string ckpt = dir.file("init.bin");
  REQUIRE(run("train --corpus " + corpus + " --out " + ckpt +
              " --seed 3 --max-epochs 0") == 0);
  milmine::ModelParams params = milmine::load_checkpoint(ckpt);
  milmine::TrainConfig tc;
  tc.seed = 3;
  milmine::ModelParams expect = milmine::init_params(params.config, tc);
  for (std::size_t i = 0; i < params.tensors.size(); ++i)
    CHECK(params.tensors[i].data == expect.tensors[i].data);
}

TEST_CASE("eval writes a metrics report for a trained model") {
  TempDir dir;
  const std::string corpus = dir.file("corpus.tsv");
  const std::string test = dir.file("test.tsv");
  REQUIRE(run("gen-data --seed 4 --sentences 150 --vocab-size 30 --out " +
              corpus) == 0);
  REQUIRE(run("gen-data --seed 44 --sentences 40 --vocab-size 30 --out " +
              test) == 0);
  const std::string ckpt = dir.file("model.bin");
  REQUIRE(run("train --corpus " + corpus + " --out " + ckpt +
              " --seed 4 --max-epochs 3") == 0);
  const std::string report = dir.file("metrics.txt");
  REQUIRE(run("eval --checkpoint " + ckpt + " --corpus " + test + " --out " +
              report) == 0);
  const std::string text = slurp(report);
  for (const char* key :
       {"sentence_acc=", "word_p=", "word_r=", "word_f=", "word_acc="})
    CHECK(text.find(key) != std::string::npos);
}

TEST_CASE("mine exports ranked candidates deterministically") {
  TempDir dir;
  const std::string pool = dir.file("pool.tsv");
  REQUIRE(run("gen-data --seed 7 --sentences 200 --vocab-size 30 --out " +
              pool) == 0);
  const std::string cand1 = dir.file("cand1.tsv"), cand2 = dir.file("c2.tsv");
  const std::string base = "mine --pool " + pool +
                           " --seed-subset-size 80 --budget 15 --seed 7 "
                           "--max-epochs 3 --out-candidates ";
  REQUIRE(run(base + cand1) == 0);
  REQUIRE(run(base + cand2 + " --threads 4") == 0);
  CHECK(slurp(cand1) == slurp(cand2));
  CHECK(fs::exists(cand1 + ".report"));
  // 15 candidates plus the header comment
  std::istringstream in(slurp(cand1));
  std::string line;
  int rows = 0;
  while (std::getline(in, line))
    if (!line.empty() && line[0] != '#') ++rows;
  CHECK(rows == 15);
}

TEST_CASE("check-grad passes clean and fails when the vjp is corrupted") {
  CHECK(run("check-grad --seeds 1") == 0);
  CHECK(run("check-grad --seeds 1 --pooling sparse --head svm "
            "--corrupt-vjp") == 1);
}

TEST_CASE("exit codes") {
  TempDir dir;
  SECTION("usage errors return 64") {
    CHECK(run("gen-data --sentences 10") == 64);  // missing --out
    CHECK(run("no-such-command") == 64);
    CHECK(run("") == 64);
  }
  SECTION("missing input file returns 2") {
    CHECK(run("train --corpus " + dir.file("absent.tsv") + " --out " +
              dir.file("m.bin")) == 2);
  }
  SECTION("invalid corpus returns 3") {
    const std::string bad = dir.file("bad.tsv");
    std::ofstream(bad) << "s1\t1\tfoo bar\t0,0\n";  // label inconsistency
    CHECK(run("train --corpus " + bad + " --out " + dir.file("m.bin")) == 3);
  }
  SECTION("corrupt checkpoint returns 4") {
    const std::string corpus = dir.file("corpus.tsv");
    REQUIRE(run("gen-data --seed 1 --sentences 30 --out " + corpus) == 0);
    const std::string garbage = dir.file("garbage.bin");
    std::ofstream(garbage) << "not a checkpoint";
    CHECK(run("eval --checkpoint " + garbage + " --corpus " + corpus +
              " --out " + dir.file("r.txt")) == 4);
  }
  SECTION("bad mining parameters return 5") {
    const std::string pool = dir.file("pool.tsv");
    REQUIRE(run("gen-data --seed 1 --sentences 40 --out " + pool) == 0);
    CHECK(run("mine --pool " + pool +
              " --seed-subset-size 20 --budget 1000 --max-epochs 1 "
              "--out-candidates " +
              dir.file("c.tsv")) == 5);
  }
}

TEST_CASE("--version exits cleanly") { CHECK(run("--version") == 0); }
