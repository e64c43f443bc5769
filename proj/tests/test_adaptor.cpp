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
#include "invmix/adaptor.hpp"
#include "invmix/errors.hpp"
#include "invmix/io.hpp"
#include "invmix/judge.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>

namespace invmix {
namespace {

using oracle::stepwise_nll;

using nlohmann::json;

// Context-free backend: every position predicts from the same logits row.
class FixedLogitsBackend final : public DecoderBackend {
 public:
  FixedLogitsBackend(Vocabulary v, Eigen::RowVectorXd logits) : vocab_(std::move(v)), logits_(std::move(logits)) {}
  std::string id() const override { return "fixed"; }
  unsigned capabilities() const override {
    return Capability::teacher_forced_logprob | Capability::embedding_injection | Capability::greedy;
  }
  int input_dim() const override { return 4; }
  const Vocabulary& vocabulary() const override { return vocab_; }
  ag::Var teacher_forced_nll(ag::Graph& g, const SoftPrompt& p, ag::Var) const override {
    ag::Matrix rows(static_cast<Eigen::Index>(p.target_tokens.size()), logits_.size());
    for (Eigen::Index r = 0; r < rows.rows(); ++r) rows.row(r) = logits_;
    return g.cross_entropy(g.input(rows), p.target_tokens);
  }

 private:
  Vocabulary vocab_;
  Eigen::RowVectorXd logits_;
};

Vocabulary prompt_vocab(const std::string& sentence) {
  const PromptTemplate t = test::inversion_template();
  const std::vector<std::string> texts{t.prefix(), t.suffix(), t.closing(), sentence};
  return Vocabulary::build(texts);
}

json prompt_json(const SoftPrompt& p, const Vocabulary& v) {
  auto words = [&](const std::vector<int>& ids) {
    std::vector<std::string> w;
    for (int id : ids) w.push_back(v.token(id));
    return w;
  };
  return {{"prefix_tokens", p.prefix_tokens},   {"prefix_words", words(p.prefix_tokens)},
          {"suffix_tokens", p.suffix_tokens},   {"suffix_words", words(p.suffix_tokens)},
          {"target_tokens", p.target_tokens},   {"target_words", words(p.target_tokens)},
          {"closing_tokens", p.closing_tokens}, {"slot_position", p.slot_position},
          {"slot_length", p.slot_length()}};
}

TEST(Adaptor, ZeroParametersGiveZeroSoftTokens) {
  Adaptor a(AdaptorConfig{8, 32, 1, 0.02, true, 1});
  a.weight().value.setZero();
  a.bias().value.setZero();
  std::mt19937_64 rng(1);
  EXPECT_EQ(a.adapt(test::random_matrix(1, 8, rng).row(0)).norm(), 0.0);
}

TEST(Adaptor, OutputShape) {
  const Adaptor a(AdaptorConfig{8, 32, 1, 0.02, true, 1});
  const ag::Matrix s = a.adapt(Embedding::Ones(8));
  EXPECT_EQ(s.rows(), 1);
  EXPECT_EQ(s.cols(), 32);
  EXPECT_THROW(a.adapt(Embedding::Ones(7)), ShapeError);
}

TEST(Adaptor, BiasFreeIsLinearOnMidpoints) {
  const Adaptor a(AdaptorConfig{12, 20, 2, 0.5, false, 3});
  std::mt19937_64 rng(4);
  for (int i = 0; i < 100; ++i) {
    const Embedding hi = test::random_matrix(1, 12, rng).row(0);
    const Embedding hj = test::random_matrix(1, 12, rng).row(0);
    const ag::Matrix d = a.adapt(0.5 * hi + 0.5 * hj) - 0.5 * (a.adapt(hi) + a.adapt(hj));
    EXPECT_LT(d.cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(Adaptor, GraphAndValueFormsAgree) {
  Adaptor a(AdaptorConfig{6, 5, 3, 0.3, true, 2});
  std::mt19937_64 rng(5);
  const Embedding h = test::random_matrix(1, 6, rng).row(0);
  ag::Graph g;
  ag::Var out = a.adapt(g, g.input(h), false);
  EXPECT_TRUE(g.value(out).isApprox(a.adapt(h), 1e-14));
}

TEST(Adaptor, CheckpointCarriesTemplateAndBackend) {
  const Adaptor a(AdaptorConfig{6, 5, 2, 0.3, false, 2});
  test::TempDir dir("phi");
  a.save(dir / "phi.json", "inversion", "tiny-decoder");
  const auto back = Adaptor::load(dir / "phi.json");
  EXPECT_EQ(back.template_name, "inversion");
  EXPECT_EQ(back.backend_id, "tiny-decoder");
  EXPECT_EQ(back.adaptor.checksum(), a.checksum());
  EXPECT_EQ(back.adaptor.config().n_soft_tokens, 2);
  EXPECT_FALSE(back.adaptor.config().bias);
}

TEST(BuildPrompt, InferencePromptHasNoTarget) {
  const Vocabulary v = prompt_vocab("a b c");
  const SoftPrompt p = build_prompt(test::inversion_template(), v, ag::Matrix::Zero(1, 4));
  EXPECT_TRUE(p.target_tokens.empty());
  EXPECT_EQ(p.slot_position, static_cast<int>(p.prefix_tokens.size()));
}

TEST(BuildPrompt, DeterministicIds) {
  const Vocabulary v = prompt_vocab("the match ended in a draw");
  const auto a = build_prompt(test::inversion_template(), v, ag::Matrix::Zero(1, 4), "the match ended in a draw");
  const auto b = build_prompt(test::inversion_template(), v, ag::Matrix::Zero(1, 4), "the match ended in a draw");
  EXPECT_EQ(a.prefix_tokens, b.prefix_tokens);
  EXPECT_EQ(a.suffix_tokens, b.suffix_tokens);
  EXPECT_EQ(a.target_tokens, b.target_tokens);
}

TEST(BuildPrompt, TargetEndsWithClosingAndEos) {
  const Vocabulary v = prompt_vocab("x y");
  const auto p = build_prompt(test::inversion_template(), v, ag::Matrix::Zero(1, 4), "x y");
  ASSERT_GE(p.target_tokens.size(), 3u);
  EXPECT_EQ(p.target_tokens.back(), Vocabulary::kEos);
  EXPECT_EQ(v.token(p.target_tokens[0]), "x");
  EXPECT_EQ(v.token(p.target_tokens[p.target_tokens.size() - 2]), ".");
}

TEST(BuildPrompt, TruncatesToContextAndFlags) {
  const std::string s = "w1 w2 w3 w4 w5 w6 w7 w8 w9 w10";
  const Vocabulary v = prompt_vocab(s);
  const auto full = build_prompt(test::inversion_template(), v, ag::Matrix::Zero(1, 4), s);
  EXPECT_FALSE(full.truncated);
  const int ctx = full.context_length() - 4;
  const auto cut = build_prompt(test::inversion_template(), v, ag::Matrix::Zero(1, 4), s, ctx);
  EXPECT_TRUE(cut.truncated);
  EXPECT_LE(cut.context_length() - 1, ctx);
  EXPECT_EQ(cut.target_tokens.back(), Vocabulary::kEos);
}

TEST(BuildPrompt, MatchesGoldenFixture) {
  const std::string sentence = "the striker scored twice as the league title race tightened";
  const Vocabulary v = prompt_vocab(sentence);
  const json got = prompt_json(build_prompt(test::inversion_template(), v, ag::Matrix::Zero(1, 8), sentence), v);
  const std::filesystem::path fixture = std::filesystem::path(INVMIX_FIXTURE_DIR) / "prompt_golden.json";
  if (std::getenv("INVMIX_UPDATE_GOLDEN")) write_file_atomic(fixture, got.dump(2) + "\n");
  ASSERT_TRUE(std::filesystem::exists(fixture)) << "run once with INVMIX_UPDATE_GOLDEN=1";
  EXPECT_EQ(json::parse(read_file(fixture)), got);
}

TEST(GenLoss, SingleTokenIsNegativeLogProbability) {
  Vocabulary v;
  const int w = v.add("word");
  Eigen::RowVectorXd logits = Eigen::RowVectorXd::Zero(v.size());
  logits(w) = 2.0;
  const double p = std::exp(2.0) / (std::exp(2.0) + v.size() - 1);
  const FixedLogitsBackend b(v, logits);
  SoftPrompt prompt;
  prompt.soft_vectors = ag::Matrix::Zero(1, 4);
  prompt.target_tokens = {w};
  EXPECT_NEAR(gen_loss(prompt, b), -std::log(p), 1e-12);
}

TEST(GenLoss, CertainTargetsGiveZero) {
  Vocabulary v;
  const int w = v.add("word");
  Eigen::RowVectorXd logits = Eigen::RowVectorXd::Constant(v.size(), -1e4);
  logits(w) = 1e4;
  const FixedLogitsBackend b(v, logits);
  SoftPrompt prompt;
  prompt.soft_vectors = ag::Matrix::Zero(1, 4);
  prompt.target_tokens = {w, w, w};
  EXPECT_EQ(gen_loss(prompt, b), 0.0);
}

TEST(GenLoss, MatchesStepwiseOracleOnTinyDecoder) {
  const auto d = test::small_toy();
  const Vocabulary v = test::toy_vocab(d);
  std::mt19937_64 rng(6);
  for (int i = 0; i < 100; ++i) {
    const TinyDecoder dec = test::tiny_decoder(v, 8, 100 + static_cast<std::uint64_t>(i));
    const auto& words = v.tokens();
    // A 3-token target: one word, the closing ".", then <eos>.
    const std::string w = words[Vocabulary::kNumSpecial + rng() % static_cast<std::uint64_t>(v.size() - Vocabulary::kNumSpecial)];
    const SoftPrompt p = build_prompt(test::inversion_template(), v, test::random_matrix(1, 8, rng), w);
    ASSERT_EQ(p.target_tokens.size(), 3u);
    EXPECT_NEAR(gen_loss(p, dec), stepwise_nll(dec, p), 1e-5);
  }
}

TEST(GenLoss, OneTermPerTargetTokenWhateverThePromptWording) {
  const auto d = test::small_toy();
  const Vocabulary v = test::toy_vocab(d);
  const TinyDecoder dec = test::tiny_decoder(v);
  std::mt19937_64 rng(7);
  const ag::Matrix soft = test::random_matrix(1, 16, rng);
  const std::string s = d.task.labeled[0].text;
  const PromptTemplate alt{"alt", "the {EMB} sentence: {TARGET} ."};
  for (const PromptTemplate& t : {test::inversion_template(), alt}) {
    const SoftPrompt p = build_prompt(t, v, soft, s);
    const auto lp = dec.target_logprobs(p);
    EXPECT_EQ(lp.size(), p.target_tokens.size());
    double sum = 0.0;
    for (double x : lp) sum -= x;
    EXPECT_NEAR(sum, gen_loss(p, dec), 1e-9);
  }
}

TEST(GenLoss, SoftTokenGradientMatchesFiniteDifferences) {
  const auto d = test::small_toy();
  const Vocabulary v = test::toy_vocab(d);
  const TinyDecoder dec = test::tiny_decoder(v, 8);
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 3; ++trial) {
    const ag::Matrix soft0 = test::random_matrix(2, 8, rng);
    const SoftPrompt p = build_prompt(test::inversion_template(), v, soft0, d.task.labeled[static_cast<std::size_t>(trial)].text);
    ag::Graph g;
    ag::Var s = g.input(soft0, true);
    g.backward(gen_loss(g, p, s, dec));
    const ag::Matrix analytic = g.grad(s);
    const double step = 1e-5;
    for (int i = 0; i < soft0.rows(); ++i) {
      for (int j = 0; j < soft0.cols(); ++j) {
        SoftPrompt hi = p, lo = p;
        hi.soft_vectors(i, j) += step;
        lo.soft_vectors(i, j) -= step;
        const double fd = (gen_loss(hi, dec) - gen_loss(lo, dec)) / (2 * step);
        EXPECT_LE(std::abs(fd - analytic(i, j)), 1e-3 * std::max(1e-2, std::abs(fd))) << i << "," << j;
      }
    }
  }
}

TEST(GenLoss, BackendWithoutLogProbsIsCapabilityError) {
  const KeywordJudge judge(toy::labels(), toy::lexicon());
  SoftPrompt p;
  p.soft_vectors = ag::Matrix::Zero(1, 4);
  p.target_tokens = {Vocabulary::kEos};
  EXPECT_THROW(gen_loss(p, judge), CapabilityError);
}

TEST(GenLoss, BackendStaysFrozen) {
  const auto d = test::small_toy();
  const Vocabulary v = test::toy_vocab(d);
  const TinyDecoder dec = test::tiny_decoder(v);
  TaskModel theta = test::tiny_model(v, toy::labels());
  Adaptor phi(AdaptorConfig{16, 16, 1, 0.02, true, 1});
  const auto before = dec.parameter_checksum();
  ag::Graph g;
  g.backward(gen_loss(g, d.task.labeled[0].text, theta, true, phi, true, dec, test::inversion_template()));
  EXPECT_EQ(dec.parameter_checksum(), before);
}

TEST(Invert, GreedyIsDeterministicAndSamplingIsLive) {
  const auto& p = test::aligned_pipeline();
  const Embedding h = p.theta.embed(p.data.unlabeled.unlabeled[0].text);
  const auto psi = p.decoder.parameter_checksum();
  std::mt19937_64 r1(1), r2(2);
  const DecodeConfig greedy{DecodeConfig::Mode::greedy, 1.0, 1.0, 40};
  EXPECT_EQ(invert(h, p.phi, p.decoder, p.tmpl, greedy, r1), invert(h, p.phi, p.decoder, p.tmpl, greedy, r2));
  const DecodeConfig sample{DecodeConfig::Mode::sample, 1.5, 1.0, 40};
  std::mt19937_64 s1(3), s2(4);
  EXPECT_FALSE(invert(h, p.phi, p.decoder, p.tmpl, sample, s1).empty());
  EXPECT_FALSE(invert(h, p.phi, p.decoder, p.tmpl, sample, s2).empty());
  EXPECT_EQ(p.decoder.parameter_checksum(), psi);
}

TEST(Invert, ReconstructsAlignedCorpus) {
  const auto& p = test::aligned_pipeline();
  int exact = 0;
  std::mt19937_64 rng(1);
  for (const auto& r : p.data.unlabeled.unlabeled) {
    exact += invert(p.theta.embed(r.text), p.phi, p.decoder, p.tmpl, {DecodeConfig::Mode::greedy, 1.0, 1.0, 40}, rng) ==
             r.text;
  }
  EXPECT_GE(exact, static_cast<int>(0.9 * static_cast<double>(p.data.unlabeled.size())));
}

TEST(Invert, TextOnlyBackendIsCapabilityError) {
  const KeywordJudge judge(toy::labels(), toy::lexicon());
  const Adaptor phi(AdaptorConfig{4, 4, 1, 0.02, true, 1});
  std::mt19937_64 rng(1);
  EXPECT_THROW(invert(Embedding::Zero(4), phi, judge, test::inversion_template(), {}, rng), CapabilityError);
}

TEST(Invert, ImmediateEndOfSentenceIsGenerationError) {
  const Vocabulary v = prompt_vocab("a");
  TinyDecoder dec = test::tiny_decoder(v, 4);
  for (ag::Parameter* prm : dec.parameters()) {
    if (prm->name == "dec.out.w") prm->value.setZero();
    if (prm->name == "dec.out.b") prm->value(0, Vocabulary::kEos) = 100.0;
  }
  const Adaptor phi(AdaptorConfig{4, 4, 1, 0.02, true, 1});
  std::mt19937_64 rng(1);
  try {
    invert(Embedding::Zero(4), phi, dec, test::inversion_template(), {DecodeConfig::Mode::greedy, 1.0, 1.0, 8}, rng);
    FAIL();
  } catch (const GenerationError& e) {
    EXPECT_TRUE(e.raw_output().empty());
  }
}

}  // namespace
}  // namespace invmix
