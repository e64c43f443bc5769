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
#include "invmix/datamodel.hpp"
#include "invmix/errors.hpp"
#include "invmix/io.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <set>
#include <sstream>

namespace invmix {
namespace {

const std::vector<std::string> kTrecWords{"what", "who", "where", "how", "when", "which"};

std::string trec_file(int n, int bad_line = 0) {
  const LabelSpace ls = LabelSpace::builtin("trec");
  std::ostringstream out;
  for (int i = 1; i <= n; ++i) {
    const std::string label = i == bad_line ? "Weather" : ls.name((i - 1) % ls.size());
    out << R"({"text": ")" << kTrecWords[static_cast<std::size_t>(i % 6)] << " question " << i << R"(", "label": ")"
        << label << "\"}\n";
  }
  return out.str();
}

Corpus parse(const std::string& s, CorpusKind kind, std::optional<LabelSpace> ls = std::nullopt) {
  std::istringstream in(s);
  return parse_corpus(in, kind, ls);
}

TEST(LabelSpace, BuiltinSizes) {
  EXPECT_EQ(LabelSpace::builtin("trec").size(), 6);
  EXPECT_EQ(LabelSpace::builtin("agnews").size(), 4);
  EXPECT_EQ(LabelSpace::builtin("yahoo").size(), 10);
  EXPECT_THROW(LabelSpace::builtin("imdb"), DomainError);
}

TEST(LabelSpace, RejectsDuplicatesAndMismatch) {
  EXPECT_THROW(LabelSpace({"a", "a"}, {"x", "y"}), DomainError);
  EXPECT_THROW(LabelSpace({"a", "b"}, {"x"}), DomainError);
  EXPECT_THROW(LabelSpace({"a"}, {"x"}), DomainError);
}

TEST(Onehot, SmallCases) {
  EXPECT_EQ(to_onehot(0, 2), (std::vector<double>{1, 0}));
  EXPECT_EQ(to_onehot(3, 4), (std::vector<double>{0, 0, 0, 1}));
  EXPECT_THROW(to_onehot(4, 4), DomainError);
}

TEST(Onehot, ArgmaxRoundTripExhaustive) {
  for (int K = 1; K <= 10; ++K) {
    for (int c = 0; c < K; ++c) {
      const auto v = to_onehot(c, K);
      EXPECT_EQ(std::max_element(v.begin(), v.end()) - v.begin(), c);
    }
  }
}

TEST(LoadCorpus, EmptyInputGivesEmptyCorpus) {
  const Corpus c = parse("", CorpusKind::task, LabelSpace::builtin("trec"));
  EXPECT_TRUE(c.empty());
  EXPECT_EQ(c.kind, CorpusKind::task);
}

TEST(LoadCorpus, TrecRecordHasSixWayOnehot) {
  const Corpus c = parse(R"({"text":"what is a quark","label":"Description"})", CorpusKind::task,
                         LabelSpace::builtin("trec"));
  ASSERT_EQ(c.labeled.size(), 1u);
  EXPECT_EQ(c.labeled[0].onehot, to_onehot(0, 6));
  EXPECT_EQ(c.labeled[0].text, "what is a quark");
}

TEST(LoadCorpus, BadLabelNamesItsLine) {
  try {
    parse(trec_file(30, 7), CorpusKind::task, LabelSpace::builtin("trec"));
    FAIL() << "expected LabelError";
  } catch (const LabelError& e) {
    EXPECT_EQ(e.line(), 7u);
    EXPECT_EQ(e.label(), "Weather");
    EXPECT_NE(std::string(e.what()).find("line 7"), std::string::npos);
  }
}

TEST(LoadCorpus, RejectsBlankTextAndStrayLabels) {
  EXPECT_THROW(parse(R"({"text":"   ","label":"Description"})", CorpusKind::task, LabelSpace::builtin("trec")),
               ParseError);
  EXPECT_THROW(parse(R"({"text":"hi","label":"Description"})", CorpusKind::unlabeled), ParseError);
  EXPECT_THROW(parse("{not json", CorpusKind::unlabeled), ParseError);
}

TEST(LoadCorpus, TrimsTextAndDefaultsIds) {
  const Corpus c = parse("{\"text\": \"  a b \"}\n\n{\"text\": \"c\", \"id\": \"x\"}\n", CorpusKind::unlabeled);
  ASSERT_EQ(c.unlabeled.size(), 2u);
  EXPECT_EQ(c.unlabeled[0], (TextRecord{"0", "a b"}));
  EXPECT_EQ(c.unlabeled[1], (TextRecord{"x", "c"}));
}

TEST(FewShot, PerClassCounts) {
  const Corpus c = parse(trec_file(60), CorpusKind::task, LabelSpace::builtin("trec"));
  const Corpus one = sample_few_shot(c, 1, 7);
  EXPECT_EQ(one.labeled.size(), 6u);
  std::set<int> classes;
  for (const auto& e : one.labeled) classes.insert(e.class_id);
  EXPECT_EQ(classes.size(), 6u);
  EXPECT_EQ(sample_few_shot(c, 5, 7).labeled.size(), 30u);
}

TEST(FewShot, SeededAndRepeatable) {
  const Corpus c = parse(trec_file(60), CorpusKind::task, LabelSpace::builtin("trec"));
  auto ids = [](const Corpus& x) {
    std::vector<std::string> v;
    for (const auto& e : x.labeled) v.push_back(e.id);
    return v;
  };
  EXPECT_EQ(ids(sample_few_shot(c, 2, 7)), ids(sample_few_shot(c, 2, 7)));
  bool differs = false;
  for (std::uint64_t s = 8; s < 20 && !differs; ++s) differs = ids(sample_few_shot(c, 2, 7)) != ids(sample_few_shot(c, 2, s));
  EXPECT_TRUE(differs);
}

TEST(FewShot, InsufficientClassNamed) {
  const Corpus c = parse(trec_file(6), CorpusKind::task, LabelSpace::builtin("trec"));
  try {
    sample_few_shot(c, 2, 1);
    FAIL();
  } catch (const InsufficientDataError& e) {
    EXPECT_EQ(e.class_name(), "Description");
  }
}

TEST(Subsample, KeepsOrderAndBound) {
  const Corpus c = toy::make_unlabeled(40, 1);
  const Corpus s = subsample(c, 10, 3);
  ASSERT_EQ(s.size(), 10u);
  std::vector<std::size_t> pos;
  for (const auto& r : s.unlabeled) {
    const auto it = std::find(c.unlabeled.begin(), c.unlabeled.end(), r);
    ASSERT_NE(it, c.unlabeled.end());
    pos.push_back(static_cast<std::size_t>(it - c.unlabeled.begin()));
  }
  EXPECT_TRUE(std::is_sorted(pos.begin(), pos.end()));
  EXPECT_EQ(subsample(c, 100, 3).size(), 40u);
}

TEST(SoftLabel, Validation) {
  EXPECT_NO_THROW(SoftLabel::from({0.25, 0.75}));
  EXPECT_THROW(SoftLabel::from({0.5, 0.6}), DomainError);
  EXPECT_THROW(SoftLabel::from({-0.1, 1.1}), DomainError);
  EXPECT_EQ(SoftLabel::from({0.2, 0.5, 0.3}).argmax(), 1);
}

TEST(AugmentedCorpus, RoundTripsThroughFile) {
  const LabelSpace ls = toy::labels();
  std::vector<SyntheticExample> s{
      {"m0", "a sentence", SoftLabel::from({0.7, 0.3, 0.0}), std::nullopt, 0.7, "t1", "t2"},
      {"m1", "another one", SoftLabel::from({0.0, 0.125, 0.875}), 2, 0.125, "t3", "t4"}};
  const Corpus c = Corpus::make_augmented(ls, s);
  test::TempDir dir("aug");
  save_corpus(dir / "aug.jsonl", c);
  EXPECT_EQ(load_corpus(dir / "aug.jsonl", CorpusKind::augmented, ls), c);
  const auto line = nlohmann::json::parse(read_file(dir / "aug.jsonl").substr(0, read_file(dir / "aug.jsonl").find('\n')));
  for (const char* key : {"text", "soft_label", "hard_label", "lambda", "source_i", "source_j"})
    EXPECT_TRUE(line.contains(key)) << key;
  EXPECT_TRUE(line["hard_label"].is_null());
}

TEST(AtomicWrite, LeavesNoTempFiles) {
  test::TempDir dir("atomic");
  write_file_atomic(dir / "f.txt", "one");
  write_file_atomic(dir / "f.txt", "two");
  EXPECT_EQ(read_file(dir / "f.txt"), "two");
  int files = 0;
  for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir.path())) ++files;
  EXPECT_EQ(files, 1);
}

}  // namespace
}  // namespace invmix
