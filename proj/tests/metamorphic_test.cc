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

#include "mtv/metamorphic.h"

#include <cmath>
#include <limits>

#include "gtest/gtest.h"
#include "mtv/rng.h"

namespace mtv::metamorphic {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

dataset::VectorSplit digits_split() {
  const auto digits = dataset::load_digits_csv(std::string(MTV_TEST_DATA_DIR) + "/digits.csv");
  return dataset::split_stratified(dataset::subsample_stratified(digits, 0.12, 5), 0.25, 5);
}

VariantTrace trace_of(std::string id, std::vector<double> losses, bool diverged = false) {
  VariantTrace t;
  t.id = std::move(id);
  for (std::size_t i = 0; i < losses.size(); ++i) {
    t.trace.push_back({static_cast<std::int64_t>(i * 10), losses[i], 0.5});
  }
  t.diverged = diverged;
  return t;
}

// ---- verdict machinery -----------------------------------------------------

TEST(MrIdTest, NamesAndApplicability) {
  EXPECT_EQ(mr_from_string(Family::kSvm, "MR-3"), (MrId{Family::kSvm, 3}));
  EXPECT_EQ(mr_from_string(Family::kCnn, "mr2"), (MrId{Family::kCnn, 2}));
  EXPECT_EQ(mr_from_string(Family::kCnn, "4").to_string(), "MR-4");
  EXPECT_THROW(mr_from_string(Family::kSvm, "MR-5"), ConfigError);
  EXPECT_EQ((MrId{Family::kCnn, 1}).title(), "permute RGB");
  EXPECT_FALSE(is_applicable({Family::kSvm, 3}, svm::KernelKind::kLinear));
  EXPECT_FALSE(is_applicable({Family::kSvm, 4}, svm::KernelKind::kRbf));
  EXPECT_EQ(applicable_mrs(Family::kSvm, svm::KernelKind::kLinear).size(), 3u);
  EXPECT_EQ(applicable_mrs(Family::kSvm, svm::KernelKind::kRbf).back().index, 3);
  EXPECT_EQ(applicable_mrs(Family::kCnn).size(), 4u);
}

TEST(SigmaTest, PopulationConvention) {
  const std::vector<double> v{2, 4, 4, 4, 5, 5, 7, 9};
  EXPECT_DOUBLE_EQ(population_sigma(v), 2.0);
  EXPECT_EQ(population_sigma(std::vector<double>{3.0}), 0.0);
}

TEST(SigmaTest, MaximumOverSteps) {
  const std::vector<VariantTrace> traces{trace_of("a", {1, 2, 3}), trace_of("b", {1, 4, 3})};
  const auto r = sigma_max(traces, 0.5);
  EXPECT_EQ(r.sigmas, (std::vector<double>{0, 1, 0}));
  EXPECT_EQ(r.sigma_max, 1.0);
  EXPECT_EQ(r.argmax_step, 10);
  EXPECT_EQ(sigma_status(r.sigma_max, 0.5), Status::kKilled);
  EXPECT_EQ(sigma_status(r.sigma_max, 1.0), Status::kPass);
}

TEST(SigmaTest, DivergedVariantGivesInfinity) {
  const std::vector<VariantTrace> traces{trace_of("a", {1, 2, 3}), trace_of("b", {1}, true)};
  const auto r = sigma_max(traces, 9.0);
  EXPECT_EQ(r.steps.size(), 1u);  // common prefix
  EXPECT_EQ(r.sigma_max, kInf);
  EXPECT_EQ(r.diverged, (std::vector<std::string>{"b"}));
  EXPECT_EQ(sigma_status(r.sigma_max, 1e300), Status::kKilled);
}

TEST(SigmaTest, MismatchedCadenceIsRejected) {
  auto b = trace_of("b", {1, 2});
  b.trace[1].step = 11;
  const std::vector<VariantTrace> traces{trace_of("a", {1, 2}), b};
  EXPECT_THROW(sigma_max(traces, 1.0), ArgumentError);
}

TEST(SigmaTest, RaisingThresholdNeverKills) {
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const double sigma = rng.uniform() < 0.05 ? kInf : rng.uniform(0.0, 10.0);
    const double t1 = rng.uniform(0.0, 10.0);
    const double t2 = t1 + rng.uniform(0.0, 5.0);
    if (sigma_status(sigma, t1) == Status::kPass) {
      EXPECT_EQ(sigma_status(sigma, t2), Status::kPass);
    }
  }
}

TEST(VerdictJsonTest, RoundTripWithInfiniteEvidence) {
  MrVerdict v;
  v.mr = {Family::kCnn, 1};
  v.status = Status::kKilled;
  v.evidence_kind = "sigma_max";
  v.evidence = kInf;
  v.threshold = 0.25;
  v.triggering = {"BGR"};
  v.variants = {{"RGB", 1.5}, {"BGR", kInf}};
  v.note = "1 variant(s) diverged";
  const auto j = verdict_to_json(v);
  EXPECT_EQ(j["evidence"], "inf");
  EXPECT_EQ(verdict_from_json(nlohmann::ordered_json::parse(j.dump())), v);
  EXPECT_THROW(verdict_from_json(nlohmann::ordered_json::object()), FormatError);
}

TEST(SuiteJsonTest, RoundTripAndValidation) {
  SuiteConfig s;
  s.shift_k = 5.0;
  s.scale_ks = {0.25, 4.0};
  s.sigma_threshold_mr2 = 1.75;
  EXPECT_EQ(suite_from_json(suite_to_json(s)), s);
  EXPECT_EQ(suite_from_json(nlohmann::ordered_json::object()), SuiteConfig{});
  EXPECT_THROW(suite_from_json(nlohmann::ordered_json::parse(R"({"bogus": 1})")), ConfigError);
  EXPECT_THROW(suite_from_json(nlohmann::ordered_json::parse(R"({"scale_ks": [0, 2]})")),
               ConfigError);
  EXPECT_THROW(suite_from_json(nlohmann::ordered_json::parse(R"({"scale_pair": [1, 3]})")),
               ConfigError);
}

// ---- SVM relations ---------------------------------------------------------

class SvmRelationTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() { split_ = new dataset::VectorSplit(digits_split()); }
  static void TearDownTestSuite() { delete split_; }
  static dataset::VectorSplit* split_;
};
dataset::VectorSplit* SvmRelationTest::split_ = nullptr;

TEST_F(SvmRelationTest, CleanSubjectPassesEveryApplicableRelation) {
  for (auto kernel : {svm::KernelSpec::linear(), svm::KernelSpec::rbf(0.0)}) {
    faults::SvmSubject subject;
    subject.kernel = kernel;
    for (const MrId& mr : applicable_mrs(Family::kSvm, kernel.kind)) {
      const MrVerdict v = run_svm_mr(mr, *split_, subject, SuiteConfig{});
      EXPECT_EQ(v.status, Status::kPass) << svm::to_string(kernel.kind) << " " << mr.to_string()
                                         << " evidence " << v.evidence << " " << v.note;
      EXPECT_LE(v.evidence, 1e-6);
    }
  }
}

TEST_F(SvmRelationTest, WrongLabelColumnKilledByPermutationOnly) {
  faults::SvmSubject subject;
  subject.label_column = 1;
  const SuiteConfig suite;
  const MrVerdict mr1 = run_svm_mr({Family::kSvm, 1}, *split_, subject, suite);
  EXPECT_EQ(mr1.status, Status::kKilled);
  EXPECT_GT(mr1.evidence, 1e-6);
  EXPECT_EQ(mr1.triggering, (std::vector<std::string>{"permute_features"}));
  EXPECT_EQ(run_svm_mr({Family::kSvm, 2}, *split_, subject, suite).status, Status::kPass);
  EXPECT_EQ(run_svm_mr({Family::kSvm, 4}, *split_, subject, suite).status, Status::kPass);

  subject.kernel = svm::KernelSpec::rbf(0.0);
  EXPECT_EQ(run_svm_mr({Family::kSvm, 2}, *split_, subject, suite).status, Status::kPass);
  EXPECT_EQ(run_svm_mr({Family::kSvm, 3}, *split_, subject, suite).status, Status::kKilled);
}

TEST_F(SvmRelationTest, InapplicableRelationIsRejected) {
  faults::SvmSubject subject;
  EXPECT_THROW(run_svm_mr({Family::kSvm, 3}, *split_, subject, SuiteConfig{}), ArgumentError);
  EXPECT_THROW(run_svm_mr({Family::kCnn, 1}, *split_, subject, SuiteConfig{}), ArgumentError);
}

TEST_F(SvmRelationTest, SubjectFailureIsInconclusive) {
  faults::SvmSubject subject;
  subject.label_column = 0;  // always blank in the digits data: one class
  const MrVerdict v = run_svm_mr({Family::kSvm, 1}, *split_, subject, SuiteConfig{});
  EXPECT_EQ(v.status, Status::kInconclusive);
  EXPECT_NE(v.note.find("subject failed"), std::string::npos);
}

TEST_F(SvmRelationTest, VerdictsAreDeterministic) {
  faults::SvmSubject subject;
  subject.label_column = 20;
  const MrVerdict a = run_svm_mr({Family::kSvm, 1}, *split_, subject, SuiteConfig{});
  const MrVerdict b = run_svm_mr({Family::kSvm, 1}, *split_, subject, SuiteConfig{});
  EXPECT_EQ(a, b);
}

// ---- CNN relations ---------------------------------------------------------

dataset::ImageSplit small_images() {
  dataset::ImageSplit split;
  split.train = dataset::center_crop(dataset::make_synthetic_images(12, 31), 16);
  split.test = dataset::center_crop(dataset::make_synthetic_images(4, 32), 16);
  return split;
}

faults::CnnSubject small_subject() {
  faults::CnnSubject s;
  s.hyper.epochs = 2;
  s.hyper.batch_size = 24;
  s.hyper.eval_every = 3;
  return s;
}

TEST(CnnTrainingRelationTest, VariantListsMatchTheRelations) {
  const auto mr1 = cnn_training_variants({Family::kCnn, 1});
  const auto mr2 = cnn_training_variants({Family::kCnn, 2});
  ASSERT_EQ(mr1.size(), 6u);
  ASSERT_EQ(mr2.size(), 8u);
  EXPECT_EQ(mr1[0].label(), "RGB");
  EXPECT_EQ(mr2[0].label(), "identity");
  EXPECT_THROW(cnn_training_variants({Family::kCnn, 3}), ArgumentError);
}

TEST(CnnTrainingRelationTest, StubTrainerDrivesTheSigmaRule) {
  const auto split = small_images();
  SuiteConfig suite;
  suite.sigma_threshold_mr1 = 0.5;
  auto trainer = [](const TransformSpec& spec, const dataset::ImageSplit&) {
    VariantRun run;
    const double bump = spec.label() == "BGR" ? 3.0 : 0.0;
    run.trace = {{0, 2.0, 0.1}, {10, 1.0 + bump, 0.5}};
    return run;
  };
  const auto r = run_cnn_training_mr({Family::kCnn, 1}, split, trainer, suite);
  EXPECT_EQ(r.verdict.status, Status::kKilled);
  EXPECT_EQ(r.verdict.evidence_kind, "sigma_max");
  EXPECT_NEAR(r.verdict.evidence, std::sqrt(5.0 / 36.0 * 9.0), 1e-12);
  EXPECT_EQ(r.verdict.triggering, (std::vector<std::string>{"BGR"}));
  EXPECT_EQ(r.traces.size(), 6u);
}

TEST(CnnTrainingRelationTest, CrashIsInconclusiveAndDivergenceIsInfinite) {
  const auto split = small_images();
  SuiteConfig suite;
  suite.sigma_threshold_mr2 = 100.0;
  auto crashing = [](const TransformSpec&, const dataset::ImageSplit&) {
    VariantRun run;
    run.crash = "boom";
    return run;
  };
  const auto crashed = run_cnn_training_mr({Family::kCnn, 2}, split, crashing, suite);
  EXPECT_EQ(crashed.verdict.status, Status::kInconclusive);
  EXPECT_NE(crashed.verdict.note.find("boom"), std::string::npos);

  auto diverging = [](const TransformSpec& spec, const dataset::ImageSplit&) {
    VariantRun run;
    run.trace = {{0, 2.0, 0.1}};
    run.diverged = spec.label() == "R180";
    return run;
  };
  const auto diverged = run_cnn_training_mr({Family::kCnn, 2}, split, diverging, suite);
  EXPECT_EQ(diverged.verdict.status, Status::kKilled);
  EXPECT_EQ(diverged.verdict.evidence, kInf);
  EXPECT_EQ(diverged.verdict.triggering, (std::vector<std::string>{"R180"}));
}

TEST(CnnTrainingRelationTest, RealTrainingIsDeterministicAcrossWorkerCounts) {
  const auto split = small_images();
  const auto subject = small_subject();
  SuiteConfig one;
  SuiteConfig two;
  two.workers = 2;
  const auto a = run_cnn_training_mr({Family::kCnn, 2}, split, direct_trainer(subject, 4), one);
  const auto b = run_cnn_training_mr({Family::kCnn, 2}, split, direct_trainer(subject, 4), two);
  EXPECT_EQ(a.verdict, b.verdict);
  ASSERT_EQ(a.traces.size(), 8u);
  for (std::size_t i = 0; i < a.traces.size(); ++i) EXPECT_EQ(a.traces[i].trace, b.traces[i].trace);
  EXPECT_EQ(a.sigma.sigmas, b.sigma.sigmas);
  EXPECT_GT(a.sigma.sigma_max, 0.0);
}

class TestOnlyRelationTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    split_ = new dataset::ImageSplit(small_images());
    clean_ = new cnn::CnnModel<float>(faults::train_cnn_subject(small_subject(), *split_, 2).model);
    faults::CnnSubject padded = small_subject();
    padded.model.pipeline.stats_pad_value = 255.0f;
    padded_ = new cnn::CnnModel<float>(faults::train_cnn_subject(padded, *split_, 2).model);
  }
  static void TearDownTestSuite() {
    delete split_;
    delete clean_;
    delete padded_;
  }
  static dataset::ImageSplit* split_;
  static cnn::CnnModel<float>* clean_;
  static cnn::CnnModel<float>* padded_;
};
dataset::ImageSplit* TestOnlyRelationTest::split_ = nullptr;
cnn::CnnModel<float>* TestOnlyRelationTest::clean_ = nullptr;
cnn::CnnModel<float>* TestOnlyRelationTest::padded_ = nullptr;

TEST_F(TestOnlyRelationTest, CleanModelPassesForEveryScale) {
  SuiteConfig suite;
  suite.scale_ks = {1e-3, 0.5, 1.0, 2.0, 29.0, 1e3};
  for (int index : {3, 4}) {
    const MrVerdict v = run_cnn_test_only_mr({Family::kCnn, index}, *clean_, split_->test, suite);
    EXPECT_EQ(v.status, Status::kPass) << index;
    EXPECT_LT(v.evidence, 1e-4) << index;
    EXPECT_EQ(v.class_flips, 0u);
  }
}

TEST_F(TestOnlyRelationTest, PadBeforeStandardizationIsKilled) {
  const SuiteConfig suite;
  for (int index : {3, 4}) {
    const MrVerdict v = run_cnn_test_only_mr({Family::kCnn, index}, *padded_, split_->test, suite);
    EXPECT_EQ(v.status, Status::kKilled) << index;
    EXPECT_GE(v.evidence, 0.1) << index;
    EXPECT_FALSE(v.triggering.empty());
  }
}

TEST_F(TestOnlyRelationTest, ConstantImagesAreSkipped) {
  dataset::LabeledImageSet test = split_->test;
  std::fill(test.image(0).begin(), test.image(0).end(), 7.0f);
  const MrVerdict v = run_cnn_test_only_mr({Family::kCnn, 3}, *clean_, test, SuiteConfig{});
  EXPECT_EQ(v.status, Status::kPass);
  EXPECT_EQ(v.note, "1 constant image(s) skipped");
  EXPECT_THROW(run_cnn_test_only_mr({Family::kCnn, 1}, *clean_, test, SuiteConfig{}),
               ArgumentError);
}

// ---- equivariance ----------------------------------------------------------

TEST(EquivarianceTest, HundredTrialsPass) {
  const EquivarianceReport r = check_conv_equivariance(100, 1);
  EXPECT_TRUE(r.worked_example);
  EXPECT_EQ(r.conv_checks, 100u * 7u * 6u);
  EXPECT_EQ(r.conv_failures, 0u) << (r.failures.empty() ? "" : r.failures.front());
  EXPECT_LE(r.conv_max_error, kConvEquivarianceTolerance);
  EXPECT_GT(r.network_checks, 0u);
  EXPECT_EQ(r.network_failures, 0u) << (r.failures.empty() ? "" : r.failures.front());
  EXPECT_TRUE(r.passed());
  EXPECT_EQ(equivariance_to_json(r)["passed"], true);
}

TEST(EquivarianceTest, RelativeErrorDefinition) {
  const std::vector<float> a{1.0f, 2.0f};
  const std::vector<float> b{1.0f, 4.0f};
  EXPECT_DOUBLE_EQ(max_relative_error(a, b), 0.5);
  EXPECT_EQ(max_relative_error(a, a), 0.0);
}

}  // namespace
}  // namespace mtv::metamorphic
