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
#include "invmix/mixup.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>

namespace invmix {
namespace {

// Two-sample Kolmogorov-Smirnov statistic by merging sorted samples.
double ks_statistic(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / static_cast<double>(a.size()) -
                             static_cast<double>(j) / static_cast<double>(b.size())));
  }
  return d;
}

std::vector<double> draws(double alpha, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<double> v(static_cast<std::size_t>(n));
  for (auto& x : v) x = sample_lambda(alpha, rng);
  return v;
}

MixConfig greedy_mix(int n) {
  MixConfig c;
  c.num_samples = n;
  c.decode = {DecodeConfig::Mode::greedy, 1.0, 1.0, 40};
  c.seed = 13;
  return c;
}

TEST(SampleLambda, SupportIsUnitInterval) {
  for (double a : {0.05, 0.4, 1.0, 5.0}) {
    for (double x : draws(a, 20000, 1)) {
      EXPECT_GE(x, 0.0);
      EXPECT_LE(x, 1.0);
    }
  }
  std::mt19937_64 rng(1);
  EXPECT_THROW(sample_lambda(0.0, rng), DomainError);
}

TEST(SampleLambda, UniformMeanForAlphaOne) {
  const auto v = draws(1.0, 100000, 2);
  double mean = 0.0;
  for (double x : v) mean += x;
  EXPECT_NEAR(mean / static_cast<double>(v.size()), 0.5, 0.01);
}

TEST(SampleLambda, VarianceMatchesBeta) {
  for (double a : {0.2, 0.4, 2.0}) {
    const auto v = draws(a, 100000, 3);
    double m = 0.0, s = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    for (double x : v) s += (x - m) * (x - m);
    s /= static_cast<double>(v.size() - 1);
    EXPECT_NEAR(s, 1.0 / (4.0 * (2.0 * a + 1.0)), 0.005) << a;
  }
}

TEST(SampleLambda, SymmetricUnderReflection) {
  for (double a : {0.4, 1.0}) {
    const auto x = draws(a, 100000, 4);
    auto y = draws(a, 100000, 5);
    for (auto& v : y) v = 1.0 - v;
    EXPECT_LT(ks_statistic(x, y), 0.02) << a;
  }
}

TEST(MixEmbeddings, Endpoints) {
  std::mt19937_64 rng(6);
  const Embedding hi = test::random_matrix(1, 5, rng).row(0);
  const Embedding hj = test::random_matrix(1, 5, rng).row(0);
  EXPECT_EQ(mix_embeddings(hi, hj, 1.0).h_tilde, hi);
  EXPECT_EQ(mix_embeddings(hi, hj, 0.0).h_tilde, hj);
}

TEST(MixEmbeddings, Midpoint) {
  Embedding a(2), b(2);
  a << 1, 0;
  b << 0, 1;
  const auto m = mix_embeddings(a, b, 0.5, "i", "j");
  EXPECT_EQ(m.h_tilde(0), 0.5);
  EXPECT_EQ(m.h_tilde(1), 0.5);
  EXPECT_EQ(m.source_i, "i");
  EXPECT_EQ(m.lambda, 0.5);
}

TEST(MixEmbeddings, Errors) {
  EXPECT_THROW(mix_embeddings(Embedding::Zero(3), Embedding::Zero(4), 0.5), ShapeError);
  EXPECT_THROW(mix_embeddings(Embedding::Zero(3), Embedding::Zero(3), 1.5), DomainError);
}

TEST(MixLabels, HalfAndHalf) {
  const auto y = mix_labels(to_onehot(0, 3), to_onehot(2, 3), 0.5);
  EXPECT_EQ(y.probs, (std::vector<double>{0.5, 0.0, 0.5}));
}

TEST(MixLabels, SameClassKeepsOnehot) {
  for (double l : {0.0, 0.3, 0.77, 1.0}) EXPECT_EQ(mix_labels(to_onehot(1, 4), to_onehot(1, 4), l).probs, to_onehot(1, 4));
}

TEST(MixLabels, LocationNumericMass) {
  const LabelSpace trec = LabelSpace::builtin("trec");
  const int loc = *trec.find("Location");
  const int num = *trec.find("Numeric");
  const auto y = mix_labels(to_onehot(loc, 6), to_onehot(num, 6), 0.7);
  EXPECT_DOUBLE_EQ(y.probs[static_cast<std::size_t>(loc)], 0.7);
  EXPECT_DOUBLE_EQ(y.probs[static_cast<std::size_t>(num)], 1.0 - 0.7);
}

TEST(MixConfig, Validation) {
  MixConfig c;
  c.alpha = 0.0;
  EXPECT_THROW(c.validate(), DomainError);
  c = {};
  c.fixed_lambda = 1.2;
  EXPECT_THROW(c.validate(), DomainError);
  c = {};
  c.num_samples = -1;
  EXPECT_THROW(c.validate(), DomainError);
  EXPECT_EQ(pair_policy_from_string("cross_class_only"), PairPolicy::cross_class_only);
  EXPECT_THROW(pair_policy_from_string("random"), DomainError);
}

TEST(GenerateAugmented, ZeroSamplesIsEmpty) {
  const auto& p = test::aligned_pipeline();
  const auto r = generate_augmented_set(p.data.task, p.theta, p.phi, p.decoder, p.tmpl, greedy_mix(0));
  EXPECT_TRUE(r.augmented.empty());
  EXPECT_EQ(r.augmented.kind, CorpusKind::augmented);
}

TEST(GenerateAugmented, LambdaOneDegeneratesToInversion) {
  const auto& p = test::aligned_pipeline();
  MixConfig c = greedy_mix(12);
  c.fixed_lambda = 1.0;
  const auto r = generate_augmented_set(p.data.task, p.theta, p.phi, p.decoder, p.tmpl, c);
  ASSERT_EQ(r.augmented.synthetic.size(), 12u);
  for (const auto& s : r.augmented.synthetic) {
    const LabeledExample* src = p.data.task.find_labeled(s.source_i);
    ASSERT_NE(src, nullptr);
    std::mt19937_64 rng(0);
    EXPECT_EQ(s.text, invert(p.theta.embed(src->text), p.phi, p.decoder, p.tmpl, c.decode, rng));
    EXPECT_EQ(s.soft_label.probs, src->onehot);
  }
}

TEST(GenerateAugmented, CountsSchemaAndProvenance) {
  const auto& p = test::aligned_pipeline();
  MixConfig c = greedy_mix(120);
  c.decode = {DecodeConfig::Mode::sample, 1.0, 0.9, 40};
  const auto r = generate_augmented_set(p.data.task, p.theta, p.phi, p.decoder, p.tmpl, c);
  EXPECT_EQ(static_cast<int>(r.augmented.synthetic.size()) + r.skipped, 120);
  test::TempDir dir("mix");
  save_corpus(dir / "aug.jsonl", r.augmented);
  const Corpus back = load_corpus(dir / "aug.jsonl", CorpusKind::augmented, toy::labels());
  EXPECT_EQ(back, r.augmented);
  for (const auto& s : back.synthetic) {
    double sum = 0.0;
    for (double x : s.soft_label.probs) sum += x;
    EXPECT_NEAR(sum, 1.0, 1e-6);
    const LabeledExample* a = p.data.task.find_labeled(s.source_i);
    const LabeledExample* b = p.data.task.find_labeled(s.source_j);
    ASSERT_TRUE(a && b);
    EXPECT_EQ(mix_labels(a->onehot, b->onehot, s.lambda), s.soft_label);
  }
}

TEST(GenerateAugmented, IndependentOfThreadCount) {
  const auto& p = test::aligned_pipeline();
  MixConfig c = greedy_mix(16);
  c.decode = {DecodeConfig::Mode::sample, 1.0, 0.9, 40};
  const auto one = generate_augmented_set(p.data.task, p.theta, p.phi, p.decoder, p.tmpl, c);
  c.threads = 3;
  const auto three = generate_augmented_set(p.data.task, p.theta, p.phi, p.decoder, p.tmpl, c);
  EXPECT_EQ(one.augmented, three.augmented);
}

TEST(GenerateAugmented, CrossClassPolicy) {
  const auto& p = test::aligned_pipeline();
  MixConfig c = greedy_mix(20);
  c.pair_policy = PairPolicy::cross_class_only;
  const auto r = generate_augmented_set(p.data.task, p.theta, p.phi, p.decoder, p.tmpl, c);
  for (const auto& s : r.augmented.synthetic) {
    EXPECT_NE(p.data.task.find_labeled(s.source_i)->class_id, p.data.task.find_labeled(s.source_j)->class_id);
  }
}

TEST(UnionItems, OriginalsFirstThenSynthetic) {
  const auto& p = test::aligned_pipeline();
  const auto r = generate_augmented_set(p.data.task, p.theta, p.phi, p.decoder, p.tmpl, greedy_mix(5));
  const auto items = union_items(p.data.task, r.augmented, LabelMode::soft);
  ASSERT_EQ(items.size(), p.data.task.size() + r.augmented.size());
  EXPECT_EQ(items.front().text, p.data.task.labeled.front().text);
  EXPECT_EQ(items.back().text, r.augmented.synthetic.back().text);
  EXPECT_EQ(items.back().target, r.augmented.synthetic.back().soft_label.probs);
}

}  // namespace
}  // namespace invmix
