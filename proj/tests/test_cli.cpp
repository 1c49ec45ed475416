/*
 * Copyright 2026 The PRISM Shape Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <doctest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "prism/cli.hpp"
#include "prism/io.hpp"

using namespace prism;
namespace fs = std::filesystem;

namespace {

fs::path work() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / ("prism_cli_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string at(const std::string& name) { return (work() / name).string(); }

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "prism");
  return cli::run(std::move(args));
}

// Tiny end-to-end pipeline shared by the cases below.
void ensure_model() {
  static bool done = false;
  if (done) return;
  REQUIRE(run({"generate", "--variant", "G", "--seed", "3", "--train-subjects", "12", "--test-subjects", "6",
               "--out", at("g.psd")}) == cli::kOk);
  REQUIRE(run({"train", "--dataset", at("g.psd"), "--out-dir", at("m"), "--epochs", "3", "--warm-epochs", "1",
               "--layers", "2", "--width", "16", "--seed", "3"}) == cli::kOk);
  REQUIRE(run({"train-inverse", "--ckpt", at("m/model.pck"), "--out-dir", at("m"), "--epochs", "1", "--steps", "20",
               "--layers", "2", "--width", "16", "--seed", "3"}) == cli::kOk);
  done = true;
}

}  // namespace

TEST_CASE("usage errors exit with 1") {
  CHECK(run({}) == cli::kUsage);
  CHECK(run({"no-such-command"}) == cli::kUsage);
  CHECK(run({"generate", "--variant", "X"}) == cli::kUsage);
  CHECK(run({"generate", "--bogus-flag", "1"}) == cli::kUsage);
  CHECK(run({"train", "--dataset", at("missing.psd")}) == cli::kUsage);
  CHECK(run({"train"}) == cli::kUsage);
  CHECK_FALSE(fs::exists(at("model.pck")));
}

TEST_CASE("runtime errors exit with 3") {
  {
    std::ofstream bad(at("bad.psd"));
    bad << "PRISM-PSD 1\n{\"dim\":2,\"t_min\":0,\"t_max\":1}\n{broken\n";
  }
  CHECK(run({"train", "--dataset", at("bad.psd"), "--out-dir", at("bad")}) == cli::kRuntimeError);
  {
    std::ofstream bad(at("bad.pck"));
    bad << "PRISM-PCK 1\n{}\n";
  }
  CHECK(run({"validate-fisher", "--ckpt", at("bad.pck"), "--out-dir", at("bad")}) == cli::kRuntimeError);
}

TEST_CASE("generate is deterministic") {
  REQUIRE(run({"generate", "--variant", "L", "--seed", "7", "--train-subjects", "5", "--test-subjects", "5", "--out",
               at("a.psd")}) == cli::kOk);
  REQUIRE(run({"generate", "--variant", "L", "--seed", "7", "--train-subjects", "5", "--test-subjects", "5", "--out",
               at("b.psd")}) == cli::kOk);
  CHECK(io::file_sha256(at("a.psd")) == io::file_sha256(at("b.psd")));
  REQUIRE(run({"generate", "--variant", "L", "--seed", "8", "--train-subjects", "5", "--test-subjects", "5", "--out",
               at("c.psd")}) == cli::kOk);
  CHECK(io::file_sha256(at("a.psd")) != io::file_sha256(at("c.psd")));
}

TEST_CASE("config file supplies flags and explicit flags win") {
  {
    std::ofstream cfg(at("gen.cfg"));
    cfg << "# generator settings\nvariant = L\nseed = 7\ntrain-subjects = 5\ntest-subjects = 5\n";
  }
  REQUIRE(run({"generate", "--config", at("gen.cfg"), "--out", at("cfg.psd")}) == cli::kOk);
  REQUIRE(run({"generate", "--variant", "L", "--seed", "7", "--train-subjects", "5", "--test-subjects", "5", "--out",
               at("flags.psd")}) == cli::kOk);
  CHECK(io::file_sha256(at("cfg.psd")) == io::file_sha256(at("flags.psd")));

  REQUIRE(run({"generate", "--config", at("gen.cfg"), "--seed", "8", "--out", at("cfg8.psd")}) == cli::kOk);
  REQUIRE(run({"generate", "--variant", "L", "--seed", "8", "--train-subjects", "5", "--test-subjects", "5", "--out",
               at("flags8.psd")}) == cli::kOk);
  CHECK(io::file_sha256(at("cfg8.psd")) == io::file_sha256(at("flags8.psd")));
  CHECK(run({"generate", "--config", at("nope.cfg")}) == cli::kUsage);
}

TEST_CASE("pipeline writes its artifacts") {
  ensure_model();
  CHECK(fs::exists(at("m/model.pck")));
  CHECK(fs::exists(at("m/model_inv.pck")));
  CHECK(fs::exists(at("m/train_log.csv")));
  CHECK(run({"train-inverse", "--ckpt", at("m/model_inv.pck"), "--out", at("m/model_inv.pck")}) == cli::kUsage);

  const std::string ckpt = at("m/model_inv.pck");
  CHECK(run({"report", "--ckpt", ckpt, "--dataset", at("g.psd"), "--out-dir", at("r")}) == cli::kOk);
  for (const char* f : {"table2.csv", "table3.csv", "table4.csv", "fig3.svg", "fig4.svg"}) {
    CHECK_MESSAGE(fs::exists(at(std::string("r/") + f)), f);
  }
  std::ifstream t2(at("r/table2.csv"));
  std::string first;
  std::getline(t2, first);
  CHECK(first.find("ckpt_sha256=" + io::file_sha256(ckpt)) != std::string::npos);
  CHECK(first.find("dataset_sha256=" + io::file_sha256(at("g.psd"))) != std::string::npos);

  CHECK(run({"infer-time", "--ckpt", ckpt, "--dataset", at("g.psd"), "--maps", "--out-dir", at("r")}) == cli::kOk);
  CHECK(fs::exists(at("r/time_maps.csv")));
  CHECK(run({"predict", "--ckpt", ckpt, "--dataset", at("g.psd"), "--subject", "12", "--t1", "0.9", "--out-dir",
             at("r")}) == cli::kOk);
  CHECK(fs::exists(at("r/prediction.csv")));
  CHECK(run({"ood", "--ckpt", ckpt, "--dataset", at("g.psd"), "--out-dir", at("r")}) == cli::kOk);
  CHECK(fs::exists(at("r/ood_scores.csv")));

  const int vf = run({"validate-fisher", "--ckpt", ckpt, "--grid", "3", "--mc-samples", "20000", "--out-dir", at("r")});
  CHECK((vf == cli::kOk || vf == cli::kValidationFailed));
  CHECK(fs::exists(at("r/fisher_grid.csv")));
  CHECK(run({"validate-fisher", "--ckpt", ckpt, "--mc-samples", "10", "--out-dir", at("r")}) == cli::kUsage);
}

TEST_CASE("commands are byte-for-byte reproducible") {
  ensure_model();
  const std::string ckpt = at("m/model_inv.pck");
  REQUIRE(run({"train", "--dataset", at("g.psd"), "--out-dir", at("m2"), "--epochs", "3", "--warm-epochs", "1",
               "--layers", "2", "--width", "16", "--seed", "3"}) == cli::kOk);
  CHECK(io::file_sha256(at("m/model.pck")) == io::file_sha256(at("m2/model.pck")));
  CHECK(io::file_sha256(at("m/train_log.csv")) == io::file_sha256(at("m2/train_log.csv")));

  for (const char* dir : {"x1", "x2"}) {
    REQUIRE(run({"report", "--ckpt", ckpt, "--dataset", at("g.psd"), "--out-dir", at(dir)}) == cli::kOk);
  }
  for (const char* f : {"table2.csv", "table3.csv", "table4.csv", "fig3.svg", "fig4.svg", "longitudinal.csv"}) {
    CHECK_MESSAGE(io::file_sha256(at(std::string("x1/") + f)) == io::file_sha256(at(std::string("x2/") + f)), f);
  }
}
