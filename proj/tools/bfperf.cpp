// Copyright 2026 The bfperf Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// bfperf validate <scenario>
// bfperf run <scenario> --out <dir> [--seed S] [--threads K] [--format csv|csv+svg]

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "bfperf/scenario.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// One JSON object on stderr per failure.
void report(const std::string& kind, const std::string& message, json extra = json::object()) {
  json rec = {{"error", kind}, {"message", message}};
  for (auto& [k, v] : extra.items()) rec[k] = v;
  std::cerr << rec.dump() << "\n";
}

int fail(const std::exception& ex) {
  using namespace bfperf;
  if (const auto* e = dynamic_cast<const ParseError*>(&ex)) {
    report(e->kind(), e->what(), {{"line", e->line()}, {"field", e->field()}});
    return 2;
  }
  if (const auto* e = dynamic_cast<const UnstableError*>(&ex)) {
    report(e->kind(), e->what(),
           {{"subset", format_subset(e->witness())}, {"margin", e->margin()}});
    return 1;
  }
  if (const auto* e = dynamic_cast<const GridUnstableError*>(&ex)) {
    report(e->kind(), e->what(), {{"profile", e->profile()}, {"margin", e->margin()}});
    return 1;
  }
  if (const auto* e = dynamic_cast<const NotPolySymmetric*>(&ex)) {
    report(e->kind(), e->what(),
           {{"first", format_subset(e->first())}, {"second", format_subset(e->second())}});
    return 1;
  }
  if (const auto* e = dynamic_cast<const InvalidRankError*>(&ex)) {
    report(e->kind(), e->what(),
           {{"first", format_subset(e->first())}, {"second", format_subset(e->second())}});
    return 1;
  }
  if (const auto* e = dynamic_cast<const Error*>(&ex)) {
    report(e->kind(), e->what());
    return 1;
  }
  report("internal", ex.what());
  return 1;
}

// All files are rendered in memory first, so a failed run leaves nothing
// behind; a failed write removes what it created.
void write_outputs(const fs::path& dir, const bfperf::Artifacts& art) {
  const bool existed = fs::exists(dir);
  std::vector<fs::path> written;
  try {
    fs::create_directories(dir);
    for (const auto& [name, body] : art.files) {
      fs::path p = dir / name;
      std::ofstream out(p, std::ios::binary);
      if (!out) throw bfperf::Error("io", "cannot write " + p.string());
      written.push_back(p);
      out << body;
      if (!out) throw bfperf::Error("io", "write failed for " + p.string());
    }
  } catch (...) {
    std::error_code ec;
    for (const auto& p : written) fs::remove(p, ec);
    if (!existed) fs::remove(dir, ec);
    throw;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Balanced-fairness performance of polymatroid capacity sets"};
  app.require_subcommand(1);

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "check a scenario without solving it");
  validate->add_option("scenario", validate_path, "scenario file")->required();

  std::string run_path, out_dir, format = "csv";
  std::uint64_t seed = 0;
  unsigned threads = 1;
  auto* run = app.add_subcommand("run", "solve a scenario and write its outputs");
  run->add_option("scenario", run_path, "scenario file")->required();
  run->add_option("--out", out_dir, "output directory")->required();
  auto* seed_opt = run->add_option("--seed", seed, "override the scenario seed");
  run->add_option("--threads", threads, "worker cap")->check(CLI::Range(1u, 1024u));
  run->add_option("--format", format, "csv or csv+svg")
      ->check(CLI::IsMember({"csv", "csv+svg"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    report("usage", e.what());
    return 2;
  }

  try {
    if (*validate) {
      auto sc = bfperf::load_scenario(validate_path);
      std::cout << bfperf::validate_scenario(sc);
      return 0;
    }
    auto sc = bfperf::load_scenario(run_path);
    bfperf::RunOptions opt;
    if (*seed_opt) opt.seed = seed;
    opt.threads = threads;
    opt.svg = format == "csv+svg";
    auto art = bfperf::run_scenario(sc, opt);
    write_outputs(out_dir, art);
    std::cout << art.summary;
    return 0;
  } catch (const std::exception& ex) {
    return fail(ex);
  }
}
