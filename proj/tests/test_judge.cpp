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
#include "invmix/judge.hpp"
#include "invmix/mixup.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

namespace invmix {
namespace {

const LabelSpace& trec() {
  static const LabelSpace ls = LabelSpace::builtin("trec");
  return ls;
}
int cls(const char* name) { return *trec().find(name); }

Corpus trec_task() {
  return Corpus::make_task(trec(), {LabeledExample::make("a", "where is the city", cls("Location"), 6),
                                    LabeledExample::make("b", "how many people live there", cls("Numeric"), 6),
                                    LabeledExample::make("c", "who founded the city", cls("Human"), 6)});
}

SyntheticExample mixed(std::string id, double lambda, const char* i = "a", const char* j = "b") {
  const Corpus t = trec_task();
  const auto& a = *t.find_labeled(i);
  const auto& b = *t.find_labeled(j);
  return {std::move(id), "a mixed question", mix_labels(a.onehot, b.onehot, lambda), std::nullopt, lambda, i, j};
}

bool is_validity(const std::string& p) { return p.find("Determine if the sentence") != std::string::npos; }

// Validity gets the first answer; the forced choice gets the second.
ScriptedJudge two_step(std::string first, std::string second) {
  return ScriptedJudge([=](const std::string& p, int) { return is_validity(p) ? first : second; });
}

TEST(PromptFields, LabelFormats) {
  const LabelSpace ls({"Location", "Numeric"}, {"places", "numbers"});
  EXPECT_EQ(label_list(ls), "\"Location\": \"places\",\n\"Numeric\": \"numbers\"");
  EXPECT_EQ(label_map(ls), "Location, Numeric");
  EXPECT_EQ(label_text(SoftLabel::from({0.3, 0.7}), ls), "Numeric (0.70) and Location (0.30)");
  EXPECT_EQ(label_text(SoftLabel::from({1.0, 0.0}), ls), "Location (1.00)");
}

TEST(ParseLabel, Fixtures) {
  EXPECT_EQ(parse_label("Location", trec()), cls("Location"));
  EXPECT_EQ(parse_label("  Location.\n", trec()), cls("Location"));
  EXPECT_EQ(parse_label("\"location\"", trec()), cls("Location"));
  EXPECT_EQ(parse_label("The label is Numeric", trec()), cls("Numeric"));
  EXPECT_EQ(parse_label("Paris is nice", trec()), std::nullopt);
  EXPECT_EQ(parse_label("Location or Numeric", trec()), std::nullopt);
  EXPECT_EQ(parse_label("", trec()), std::nullopt);
}

TEST(ParseYesNo, Fixtures) {
  EXPECT_EQ(parse_yes_no("Yes"), true);
  EXPECT_EQ(parse_yes_no(" no. "), false);
  EXPECT_EQ(parse_yes_no("Yes, it matches"), true);
  EXPECT_EQ(parse_yes_no("Maybe"), std::nullopt);
}

TEST(JudgeLabel, StubAnswer) {
  const ScriptedJudge j([](const std::string&, int) { return "Location"; });
  EXPECT_EQ(judge_label("where is it", trec(), j), cls("Location"));
  EXPECT_EQ(j.calls(), 1);
}

TEST(JudgeLabel, RetriesThenFails) {
  const ScriptedJudge j([](const std::string&, int) { return "Paris is nice"; });
  EXPECT_THROW(judge_label("where is it", trec(), j), JudgeError);
  EXPECT_EQ(j.calls(), 3);
}

TEST(JudgeLabel, RecoversOnRetry) {
  const ScriptedJudge j([](const std::string&, int call) { return call == 0 ? "hmm" : "Human"; });
  const auto o = try_judge_label("who is it", trec(), j);
  EXPECT_EQ(o.label, cls("Human"));
  EXPECT_EQ(o.attempts, 2);
}

TEST(JudgeLabel, PromptCarriesSentenceAndLabelList) {
  std::string seen;
  const ScriptedJudge j([&](const std::string& p, int) {
    seen = p;
    return "Human";
  });
  judge_label("who wrote it", trec(), j);
  EXPECT_NE(seen.find("who wrote it"), std::string::npos);
  EXPECT_NE(seen.find(label_list(trec())), std::string::npos);
}

TEST(JudgeIntrusion, YesIsNone) {
  const auto v = judge_intrusion(mixed("m0", 0.7), trec_task(), two_step("Yes", "Human"));
  ASSERT_TRUE(v);
  EXPECT_EQ(v->intrusion, Intrusion::none);
  EXPECT_EQ(v->judged_label, cls("Location"));
}

TEST(JudgeIntrusion, NoThenSourceClassIsInside) {
  const auto v = judge_intrusion(mixed("m0", 0.7), trec_task(), two_step("No", "Location"));
  ASSERT_TRUE(v);
  EXPECT_EQ(v->intrusion, Intrusion::inside);
  const auto w = judge_intrusion(mixed("m0", 0.7), trec_task(), two_step("No", "Numeric"));
  EXPECT_EQ(w->intrusion, Intrusion::inside);
}

TEST(JudgeIntrusion, NoThenThirdClassIsOutside) {
  const auto v = judge_intrusion(mixed("m0", 0.7), trec_task(), two_step("No", "Human"));
  ASSERT_TRUE(v);
  EXPECT_EQ(v->intrusion, Intrusion::outside);
  EXPECT_EQ(v->judged_label, cls("Human"));
}

TEST(JudgeIntrusion, UnparseableIsSkipped) {
  const auto v = judge_intrusion(mixed("m0", 0.7), trec_task(), two_step("Perhaps", "Human"));
  EXPECT_FALSE(v);
  Corpus aug = Corpus::make_augmented(trec(), {mixed("m0", 0.6), mixed("m1", 0.8)});
  const auto run = judge_intrusions(aug, trec_task(), two_step("Perhaps", "Human"));
  EXPECT_EQ(run.skipped, 2);
  EXPECT_TRUE(run.verdicts.empty());
}

TEST(IntrusionStats, AllNone) {
  std::vector<JudgeVerdict> v(100, JudgeVerdict{"x", Intrusion::none, 0, ""});
  std::vector<double> l(100, 0.5);
  const auto rows = intrusion_stats(v, l, default_lambda_buckets());
  const auto& all = rows.back();
  EXPECT_EQ(all.bucket, "overall");
  EXPECT_EQ(all.proportion(Intrusion::none), 1.0);
  EXPECT_EQ(all.proportion(Intrusion::inside), 0.0);
  EXPECT_EQ(all.proportion(Intrusion::outside), 0.0);
}

TEST(IntrusionStats, FortyFortyFiveFifteen) {
  std::vector<JudgeVerdict> v;
  std::vector<double> l;
  for (int i = 0; i < 100; ++i) {
    const Intrusion k = i < 40 ? Intrusion::none : i < 85 ? Intrusion::inside : Intrusion::outside;
    v.push_back({"m" + std::to_string(i), k, 0, ""});
    l.push_back(0.5 + 0.1 * (i % 5));
  }
  const auto rows = intrusion_stats(v, l, default_lambda_buckets());
  ASSERT_EQ(rows.size(), 6u);
  const auto& all = rows.back();
  EXPECT_EQ(all.total(), 100);
  EXPECT_DOUBLE_EQ(all.proportion(Intrusion::none), 0.40);
  EXPECT_DOUBLE_EQ(all.proportion(Intrusion::inside), 0.45);
  EXPECT_DOUBLE_EQ(all.proportion(Intrusion::outside), 0.15);
  for (std::size_t b = 0; b < 5; ++b) EXPECT_EQ(rows[b].total(), 20);
}

TEST(IntrusionStats, LambdaFoldsToNearestBucket) {
  std::vector<JudgeVerdict> v(4, JudgeVerdict{"x", Intrusion::inside, 0, ""});
  const std::vector<double> l{0.1, 0.9, 0.34, 0.52};
  const auto rows = intrusion_stats(v, l, default_lambda_buckets());
  EXPECT_EQ(rows[4].bucket, "0.9");
  EXPECT_EQ(rows[4].inside, 2);
  EXPECT_EQ(rows[2].inside, 1);  // 0.34 folds to 0.66, nearest 0.7
  EXPECT_EQ(rows[0].inside, 1);
}

TEST(IntrusionStats, EmptyAndMismatch) {
  EXPECT_TRUE(intrusion_stats({}, {}, default_lambda_buckets()).empty());
  std::vector<JudgeVerdict> v(2);
  std::vector<double> l(1, 0.5);
  EXPECT_THROW(intrusion_stats(v, l, default_lambda_buckets()), ShapeError);
}

TEST(Relabel, ArgmaxEchoKeepsArgmax) {
  std::vector<SyntheticExample> s;
  for (int i = 0; i < 10; ++i) {
    s.push_back(mixed("m" + std::to_string(i), 0.1 * i, i % 2 ? "a" : "c", "b"));
    s.back().text = "sample " + std::to_string(i);
  }
  const Corpus aug = Corpus::make_augmented(trec(), s);
  const ScriptedJudge echo([&](const std::string& p, int) {
    for (const auto& x : s)
      if (p.find("\"" + x.text + "\"") != std::string::npos) return trec().name(x.soft_label.argmax());
    return std::string("none");
  });
  const auto r = relabel_hard(aug, echo);
  EXPECT_EQ(r.failures, 0);
  ASSERT_EQ(r.corpus.synthetic.size(), 10u);
  for (const auto& x : r.corpus.synthetic) EXPECT_EQ(x.hard_label, x.soft_label.argmax());
}

TEST(Relabel, OutsideJudgementBecomesHardLabel) {
  const Corpus aug = Corpus::make_augmented(trec(), {mixed("m0", 0.6)});
  const ScriptedJudge j([](const std::string&, int) { return "Human"; });
  EXPECT_EQ(relabel_hard(aug, j).corpus.synthetic[0].hard_label, cls("Human"));
}

TEST(Relabel, RecordCountIsInputsMinusFailures) {
  std::vector<SyntheticExample> s;
  for (int i = 0; i < 100; ++i) {
    s.push_back(mixed("m" + std::to_string(i), 0.5));
    s.back().text = "sample " + std::to_string(i);
  }
  const Corpus aug = Corpus::make_augmented(trec(), s);
  // Every seventh sample is unanswerable.
  const ScriptedJudge j([](const std::string& p, int) {
    const auto pos = p.find("sample ");
    const int n = std::stoi(p.substr(pos + 7));
    return n % 7 == 0 ? std::string("no idea") : std::string("Entity");
  });
  const auto r = relabel_hard(aug, j);
  EXPECT_EQ(r.failures, 15);
  EXPECT_EQ(r.corpus.synthetic.size(), 85u);
}

TEST(Relabel, MajorityFailureIsJudgeError) {
  const Corpus aug = Corpus::make_augmented(trec(), {mixed("m0", 0.6), mixed("m1", 0.7)});
  const ScriptedJudge j([](const std::string&, int) { return "?"; });
  EXPECT_THROW(relabel_hard(aug, j), JudgeError);
}

TEST(KeywordJudge, LabelsAndValidity) {
  const KeywordJudge j(toy::labels(), toy::lexicon(), 0.3);
  const auto& kw = toy::keywords();
  const std::string sports = "the " + kw[0][0] + " and the " + kw[0][1];
  EXPECT_EQ(judge_label(sports, toy::labels(), j), 0);
  const Corpus task = Corpus::make_task(toy::labels(), {LabeledExample::make("x", kw[0][0], 0, 3),
                                                         LabeledExample::make("y", kw[1][0], 1, 3)});
  SyntheticExample s{"m0", sports, SoftLabel::from({0.9, 0.1, 0.0}), std::nullopt, 0.9, "x", "y"};
  EXPECT_EQ(judge_intrusion(s, task, j)->intrusion, Intrusion::none);
  s.soft_label = SoftLabel::from({0.1, 0.9, 0.0});
  EXPECT_EQ(judge_intrusion(s, task, j)->intrusion, Intrusion::inside);
  s.text = "the " + kw[2][0] + " and " + kw[2][1];
  EXPECT_EQ(judge_intrusion(s, task, j)->intrusion, Intrusion::outside);
}

TEST(Verdicts, JsonlSchema) {
  const std::vector<JudgeVerdict> v{{"m0", Intrusion::outside, cls("Human"), "No\nHuman"}};
  const auto line = nlohmann::json::parse(verdicts_to_jsonl(v, trec()));
  EXPECT_EQ(line.at("id"), "m0");
  EXPECT_EQ(line.at("intrusion"), "outside");
  EXPECT_EQ(line.at("judged_label"), "Human");
  EXPECT_EQ(line.at("raw_response"), "No\nHuman");
}

}  // namespace
}  // namespace invmix
