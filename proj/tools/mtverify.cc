// Copyright 2026 The mtverify Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// mtverify: run metamorphic suites over clean and mutant subjects.

#include <filesystem>
#include <iostream>
#include <numeric>

#include "CLI11.hpp"
#include "mtv/harness.h"

namespace {

namespace fs = std::filesystem;
using namespace mtv;
using nlohmann::ordered_json;

constexpr int kExitFailure = 3;

void print_status(const std::string& line) { std::cerr << line << '\n'; }

int cmd_run(const std::string& plan_path, const std::vector<std::string>& mutants,
            const std::vector<std::string>& mrs, const std::string& out, bool no_cache,
            bool quiet) {
  harness::RunPlan plan = harness::load_plan(plan_path);
  if (!mutants.empty()) plan.mutants = mutants;
  if (!mrs.empty()) {
    plan.mrs.clear();
    for (const auto& name : mrs) plan.mrs.push_back(metamorphic::mr_from_string(plan.family, name));
  }
  if (!out.empty()) plan.output_dir = out;
  plan.validate();

  harness::RunOptions options;
  options.workers = harness::workers_from_env();
  options.use_cache = !no_cache;
  if (!quiet) options.log = print_status;
  try {
    const harness::KillMatrix matrix = harness::run_suite(plan, options);
    harness::emit_report(matrix, plan.output_dir);
    std::cout << harness::matrix_to_text(matrix);
    return harness::kExitOk;
  } catch (const harness::BaselineKilled& e) {
    harness::emit_report(e.partial(), plan.output_dir);
    std::cerr << "error: " << e.what() << '\n' << harness::matrix_to_text(e.partial());
    return harness::kExitBaselineKilled;
  }
}

int cmd_mutants(const std::string& family, bool as_json) {
  if (as_json) {
    std::cout << faults::catalog_to_json() << '\n';
    return 0;
  }
  for (const auto& m : faults::list_mutants()) {
    if (!family.empty() && faults::to_string(m.target) != family) continue;
    std::cout << m.id << '\t' << faults::to_string(m.target);
    if (m.kernel) std::cout << '/' << svm::to_string(*m.kernel);
    std::cout << '\t' << faults::to_string(m.category) << '\t' << m.description << '\n';
  }
  return 0;
}

int cmd_report(const std::vector<std::string>& matrices, const std::string& format,
               bool summary) {
  std::vector<harness::KillMatrix> loaded;
  for (const auto& path : matrices) {
    const fs::path p = fs::is_directory(path) ? fs::path(path) / "matrix.json" : fs::path(path);
    try {
      loaded.push_back(harness::load_matrix(p.string()));
    } catch (const IoError& e) {
      throw ConfigError(e.what());
    }
  }
  if (summary) {
    std::cout << harness::summary_to_json(harness::summarize(loaded)).dump(2) << '\n';
    return 0;
  }
  const auto f = harness::report_format_from_string(format);
  for (const auto& m : loaded) std::cout << harness::render_report(m, f);
  return 0;
}

int cmd_equivariance(int trials, std::uint64_t seed, bool as_json) {
  const auto report = metamorphic::check_conv_equivariance(trials, seed);
  if (as_json) {
    std::cout << metamorphic::equivariance_to_json(report).dump(2) << '\n';
  } else {
    std::cout << "worked example: " << (report.worked_example ? "ok" : "MISMATCH") << '\n'
              << "conv checks: " << report.conv_checks << ", failures " << report.conv_failures
              << ", max relative error " << report.conv_max_error << '\n'
              << "network checks: " << report.network_checks << ", failures "
              << report.network_failures << ", max relative error " << report.network_max_error
              << '\n';
    for (const auto& f : report.failures) std::cout << "  " << f << '\n';
    std::cout << (report.passed() ? "PASS" : "FAIL") << '\n';
  }
  return report.passed() ? 0 : 1;
}

int cmd_synth(const std::string& out, std::size_t train_per_class, std::size_t test_per_class,
              std::uint64_t seed, std::size_t shards) {
  if (shards == 0) throw ConfigError("--shards must be positive");
  fs::create_directories(out);
  const auto train = dataset::make_synthetic_images(train_per_class, seed);
  const auto test = dataset::make_synthetic_images(test_per_class, seed + 1);
  ordered_json manifest;
  manifest["format"] = "cifar_binary";
  manifest["classes"] = dataset::kDefaultClasses;
  manifest["train"] = ordered_json::array();
  for (std::size_t f = 0; f < shards; ++f) {
    std::vector<std::size_t> idx(train.size() * (f + 1) / shards - train.size() * f / shards);
    std::iota(idx.begin(), idx.end(), train.size() * f / shards);
    const std::string name = "data_batch_" + std::to_string(f + 1) + ".bin";
    dataset::write_cifar_binary((fs::path(out) / name).string(), dataset::select(train, idx));
    manifest["train"].push_back(name);
  }
  dataset::write_cifar_binary((fs::path(out) / "test_batch.bin").string(), test);
  manifest["test"] = "test_batch.bin";
  write_file((fs::path(out) / "manifest.json").string(), manifest.dump(2) + "\n");
  std::cout << (fs::path(out) / "manifest.json").string() << '\n';
  return 0;
}

int cmd_calibrate(const std::string& plan_path, const std::string& out, double multiplier,
                  bool quiet) {
  harness::RunPlan plan = harness::load_plan(plan_path);
  if (!out.empty()) plan.output_dir = out;
  harness::RunOptions options;
  options.workers = harness::workers_from_env();
  if (!quiet) options.log = print_status;
  const auto result = harness::calibrate(plan, options, multiplier);
  ordered_json doc = ordered_json::array();
  for (const auto& c : result) {
    ordered_json sigmas = ordered_json::array();
    for (double s : c.sigma_max) sigmas.push_back(metamorphic::number_to_json(s));
    doc.push_back({{"mr", c.mr.to_string()},
                   {"seeds", c.seeds},
                   {"sigma_max", sigmas},
                   {"multiplier", c.multiplier},
                   {"threshold", c.threshold}});
  }
  fs::create_directories(plan.output_dir);
  write_file((fs::path(plan.output_dir) / "calibration.json").string(), doc.dump(2) + "\n");
  std::cout << doc.dump(2) << '\n';
  return 0;
}

int cmd_plan(const std::string& desk, const std::string& manifest) {
  harness::RunPlan plan;
  if (desk == "cnn") {
    plan = harness::desk_cnn_plan();
  } else if (desk == "svm-linear" || desk == "svm-rbf") {
    if (manifest.empty()) throw ConfigError("SVM desk plans need --manifest");
    plan = harness::desk_svm_plan(
        desk == "svm-linear" ? svm::KernelKind::kLinear : svm::KernelKind::kRbf, manifest);
  } else {
    throw ConfigError("unknown desk plan '" + desk + "'");
  }
  std::cout << harness::plan_to_json(plan).dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Metamorphic testing of SVM and CNN classifiers against injected faults"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run a suite plan and emit its kill matrix");
  std::string plan_path, out;
  std::vector<std::string> mutant_ids, mr_ids;
  bool no_cache = false, quiet = false;
  run->add_option("--plan", plan_path, "Plan JSON")->required();
  run->add_option("--mutant", mutant_ids, "Restrict to these mutants (repeatable)");
  run->add_option("--mr", mr_ids, "Restrict to these relations (repeatable)");
  run->add_option("--out", out, "Output directory (overrides the plan)");
  run->add_flag("--no-cache", no_cache, "Ignore and do not write cached cells");
  run->add_flag("-q,--quiet", quiet, "No progress output");

  auto* mutants = app.add_subcommand("mutants", "Mutant catalog");
  auto* list = mutants->add_subcommand("list", "List the mutants");
  mutants->require_subcommand(1);
  std::string family;
  bool json_out = false;
  list->add_option("--family", family, "svm or cnn")->check(CLI::IsMember({"svm", "cnn"}));
  list->add_flag("--json", json_out, "Print the catalog as JSON");

  auto* report = app.add_subcommand("report", "Render saved kill matrices");
  std::vector<std::string> matrices{"mtverify-out"};
  std::string format = "text";
  bool summary = false;
  report->add_option("--matrix", matrices, "matrix.json or its directory (repeatable)");
  report->add_option("--format", format, "json, csv or text")
      ->check(CLI::IsMember({"json", "csv", "text"}));
  report->add_flag("--summary", summary, "Print the combined kill summary");

  auto* equi = app.add_subcommand("equivariance", "Convolution equivariance suite");
  int trials = 100;
  std::uint64_t seed = 1;
  bool equi_json = false;
  equi->add_option("--trials", trials, "Random (I, W) trials")->check(CLI::NonNegativeNumber);
  equi->add_option("--seed", seed, "Seed");
  equi->add_flag("--json", equi_json, "JSON output");

  auto* synth = app.add_subcommand("synth-cifar", "Write a generated CIFAR-format corpus");
  std::string synth_out;
  std::size_t train_per_class = 50, test_per_class = 20, shards = 5;
  std::uint64_t synth_seed = 1;
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--train-per-class", train_per_class);
  synth->add_option("--test-per-class", test_per_class);
  synth->add_option("--shards", shards, "Training files");
  synth->add_option("--seed", synth_seed);

  auto* calib = app.add_subcommand("calibrate", "Clean sigma_max and derived thresholds");
  std::string calib_plan, calib_out;
  double multiplier = 3.0;
  bool calib_quiet = false;
  calib->add_option("--plan", calib_plan, "CNN plan JSON")->required();
  calib->add_option("--out", calib_out, "Output directory (overrides the plan)");
  calib->add_option("--multiplier", multiplier, "Threshold = multiplier x max sigma_max");
  calib->add_flag("-q,--quiet", calib_quiet);

  auto* plan_cmd = app.add_subcommand("plan", "Print a desk-scale plan");
  std::string desk, manifest;
  plan_cmd->add_option("desk", desk, "svm-linear, svm-rbf or cnn")->required();
  plan_cmd->add_option("--manifest", manifest, "Digits manifest for SVM plans");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : harness::kExitConfigError;
  }

  try {
    if (*run) return cmd_run(plan_path, mutant_ids, mr_ids, out, no_cache, quiet);
    if (*list) return cmd_mutants(family, json_out);
    if (*report) return cmd_report(matrices, format, summary);
    if (*equi) return cmd_equivariance(trials, seed, equi_json);
    if (*synth) return cmd_synth(synth_out, train_per_class, test_per_class, synth_seed, shards);
    if (*calib) return cmd_calibrate(calib_plan, calib_out, multiplier, calib_quiet);
    if (*plan_cmd) return cmd_plan(desk, manifest);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return harness::kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return harness::kExitConfigError;
}
