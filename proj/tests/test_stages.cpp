/*
 * Copyright 2026 The inversedmix Authors
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
#include "invmix/errors.hpp"
#include "invmix/stages.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

namespace invmix {
namespace {

RefineConfig refine_config(int rounds, int cls_epochs, int gen_epochs) {
  RefineConfig c;
  c.schedule = {rounds, cls_epochs, gen_epochs};
  c.cls.batch_size = 4;
  c.cls.adam.lr = 1e-2;
  c.cls.seed = 3;
  c.gen.batch_size = 4;
  c.gen.adam.lr = 1e-2;
  c.gen.seed = 4;
  return c;
}

TEST(Align, ZeroEpochsReturnsAdaptorUnchanged) {
  const auto d = test::small_toy();
  const Vocabulary v = test::toy_vocab(d);
  const TinyDecoder dec = test::tiny_decoder(v);
  const TaskModel theta = test::tiny_model(v, toy::labels());
  const Adaptor phi0(AdaptorConfig{16, 16, 1, 0.02, true, 1});
  AlignConfig cfg;
  cfg.epochs = 0;
  const auto res = align_adaptor(d.unlabeled, theta, phi0, dec, test::inversion_template(), cfg);
  EXPECT_EQ(res.phi.checksum(), phi0.checksum());
  EXPECT_TRUE(res.report.gen_loss.empty());
}

TEST(Align, TouchesAdaptorOnly) {
  const auto& p = test::aligned_pipeline();
  ASSERT_EQ(p.align_report.phases.size(), 1u);
  const PhaseRecord& r = p.align_report.phases[0];
  EXPECT_EQ(r.theta_before, r.theta_after);
  EXPECT_EQ(r.psi_before, r.psi_after);
  EXPECT_NE(r.phi_before, r.phi_after);
}

TEST(Align, LossFallsBelowTwentyPercent) {
  const auto& r = test::aligned_pipeline().align_report;
  EXPECT_EQ(r.gen_loss.size(), 60u);
  for (double l : r.gen_loss) EXPECT_TRUE(std::isfinite(l));
  EXPECT_LT(r.final_gen_loss, 0.2 * r.initial_gen_loss);
}

TEST(Align, RejectsLabeledCorpus) {
  const auto d = test::small_toy();
  const Vocabulary v = test::toy_vocab(d);
  EXPECT_THROW(align_adaptor(d.task, test::tiny_model(v, toy::labels()), Adaptor(AdaptorConfig{16, 16}),
                             test::tiny_decoder(v), test::inversion_template(), AlignConfig{}),
               DomainError);
}

TEST(Align, DivergenceAbortsWithPartialReport) {
  const auto& p = test::aligned_pipeline();
  AlignConfig cfg;
  cfg.epochs = 20;
  cfg.adam.lr = 50.0;
  cfg.divergence_factor = 1.05;
  cfg.divergence_patience = 1;
  try {
    align_adaptor(p.data.unlabeled, p.theta, Adaptor(AdaptorConfig{16, 32, 1, 0.02, true, 1}), p.decoder, p.tmpl, cfg);
    FAIL() << "expected StageAborted";
  } catch (const StageAborted& e) {
    EXPECT_NE(e.report().abort_reason.find("diverged"), std::string::npos);
    EXPECT_FALSE(e.report().gen_loss.empty());
    EXPECT_LT(e.report().gen_loss.size(), 20u);
  }
}

TEST(Refine, ScheduleValidation) {
  EXPECT_THROW((RefineSchedule{0, 1, 1}.validate()), DomainError);
  EXPECT_THROW((RefineSchedule{1, -1, 1}.validate()), DomainError);
  EXPECT_NO_THROW((RefineSchedule{1, 0, 0}.validate()));
}

TEST(Refine, NoGenEpochsUpdatesThetaOnly) {
  const auto& p = test::aligned_pipeline();
  const auto res = refine(p.data.task, p.theta, p.phi, p.decoder, p.tmpl, refine_config(1, 1, 0));
  EXPECT_NE(res.theta.checksum(), p.theta.checksum());
  EXPECT_EQ(res.phi.checksum(), p.phi.checksum());
}

TEST(Refine, PhaseIsolationAndDriftRecovery) {
  const auto& p = test::aligned_pipeline();
  const auto psi = p.decoder.parameter_checksum();
  const auto res = refine(p.data.task, p.theta, p.phi, p.decoder, p.tmpl, refine_config(3, 10, 5));
  EXPECT_EQ(p.decoder.parameter_checksum(), psi);
  ASSERT_EQ(res.report.phases.size(), 6u);
  for (const PhaseRecord& r : res.report.phases) {
    EXPECT_EQ(r.psi_before, r.psi_after);
    if (r.phase == "cls") {
      EXPECT_EQ(r.phi_before, r.phi_after);
      EXPECT_NE(r.theta_before, r.theta_after);
    } else {
      EXPECT_EQ(r.theta_before, r.theta_after);
      EXPECT_NE(r.phi_before, r.phi_after);
    }
  }
  EXPECT_EQ(training_accuracy(res.theta, training_items(p.data.task)), 1.0);
  ASSERT_EQ(res.report.drift_gen_loss.size(), 3u);
  EXPECT_LT(res.report.final_gen_loss, res.report.drift_gen_loss.back());
  EXPECT_EQ(res.report.cls_loss.size(), 30u);
  EXPECT_EQ(res.report.gen_loss.size(), 15u);
}

TEST(Refine, Deterministic) {
  const auto& p = test::aligned_pipeline();
  const auto a = refine(p.data.task, p.theta, p.phi, p.decoder, p.tmpl, refine_config(2, 1, 1));
  const auto b = refine(p.data.task, p.theta, p.phi, p.decoder, p.tmpl, refine_config(2, 1, 1));
  EXPECT_EQ(a.theta.checksum(), b.theta.checksum());
  EXPECT_EQ(a.phi.checksum(), b.phi.checksum());
}

TEST(StageReport, JsonCarriesSeriesAndSeed) {
  const auto& r = test::aligned_pipeline().align_report;
  const auto j = r.to_json();
  EXPECT_EQ(j.at("stage"), "align");
  EXPECT_EQ(j.at("gen_loss").size(), r.gen_loss.size());
  EXPECT_EQ(j.at("seed"), 24);
}

}  // namespace
}  // namespace invmix
