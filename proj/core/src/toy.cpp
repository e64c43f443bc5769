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
#include "invmix/toy.hpp"

#include "invmix/errors.hpp"

#include <random>
#include <set>

namespace invmix::toy {

LabelSpace labels() {
  const LabelSpace ag = LabelSpace::builtin("agnews");
  std::vector<std::string> names, desc;
  for (const char* n : {"Sports", "Business", "Sci/Tech"}) {
    const int id = *ag.find(n);
    names.push_back(ag.name(id));
    desc.push_back(ag.descriptions()[static_cast<std::size_t>(id)]);
  }
  return LabelSpace(std::move(names), std::move(desc));
}

const std::vector<std::vector<std::string>>& keywords() {
  static const std::vector<std::vector<std::string>> kw{
      {"football", "tennis", "goalkeeper", "stadium", "referee", "tournament", "striker", "marathon", "coach",
       "league", "playoffs", "cricket"},
      {"stocks", "investors", "merger", "revenue", "profits", "bank", "shares", "market", "inflation", "startup",
       "dividend", "earnings"},
      {"software", "robots", "laptop", "satellite", "algorithm", "physics", "chips", "internet", "telescope",
       "battery", "genome", "browser"},
  };
  return kw;
}

const std::vector<std::string>& templates() {
  static const std::vector<std::string> t{
      "the {a} and the {b} made headlines today",
      "reports about {a} and {b} spread quickly",
      "people are talking about {a} and {b}",
      "a new story on {a} mentions {b}",
      "experts discussed {a} alongside {b}",
      "the article covers {a} with a focus on {b}",
      "yesterday the {a} news included {b}",
      "many readers asked about {a} and {b}",
  };
  return t;
}

std::map<std::string, int> lexicon() {
  std::map<std::string, int> out;
  const auto& kw = keywords();
  for (std::size_t c = 0; c < kw.size(); ++c)
    for (const auto& w : kw[c]) out.emplace(w, static_cast<int>(c));
  return out;
}

namespace {

std::string fill(std::string tmpl, const std::string& a, const std::string& b) {
  tmpl.replace(tmpl.find("{a}"), 3, a);
  tmpl.replace(tmpl.find("{b}"), 3, b);
  return tmpl;
}

std::string draw(int cls, std::mt19937_64& rng) {
  const auto& kw = keywords()[static_cast<std::size_t>(cls)];
  std::uniform_int_distribution<std::size_t> pick_t(0, templates().size() - 1);
  std::uniform_int_distribution<std::size_t> pick_k(0, kw.size() - 1);
  const std::size_t a = pick_k(rng);
  std::size_t b = pick_k(rng);
  while (b == a) b = pick_k(rng);
  return fill(templates()[pick_t(rng)], kw[a], kw[b]);
}

// Round-robin over classes so every split is balanced.
std::vector<std::pair<std::string, int>> draw_unique(int n, std::set<std::string>& seen, std::mt19937_64& rng) {
  std::vector<std::pair<std::string, int>> out;
  const int K = static_cast<int>(keywords().size());
  for (int i = 0; i < n; ++i) {
    const int cls = i % K;
    std::string s = draw(cls, rng);
    while (!seen.insert(s).second) s = draw(cls, rng);
    out.emplace_back(std::move(s), cls);
  }
  return out;
}

Corpus labeled(const std::vector<std::pair<std::string, int>>& rows, const std::string& prefix) {
  const LabelSpace ls = labels();
  std::vector<LabeledExample> ex;
  for (std::size_t i = 0; i < rows.size(); ++i)
    ex.push_back(LabeledExample::make(prefix + std::to_string(i), rows[i].first, rows[i].second, ls.size()));
  return Corpus::make_task(ls, std::move(ex));
}

}  // namespace

ToyData make(const ToyConfig& cfg) {
  if (cfg.n_unlabeled < 0 || cfg.n_task < 0 || cfg.n_test < 0) throw DomainError("toy split sizes must be >= 0");
  std::mt19937_64 rng(cfg.seed);
  std::set<std::string> seen;
  ToyData d;
  std::vector<TextRecord> u;
  for (auto& [s, c] : draw_unique(cfg.n_unlabeled, seen, rng)) u.push_back({"u" + std::to_string(u.size()), s});
  d.unlabeled = Corpus::make_unlabeled(std::move(u));
  d.task = labeled(draw_unique(cfg.n_task, seen, rng), "t");
  d.test = labeled(draw_unique(cfg.n_test, seen, rng), "e");
  return d;
}

Corpus make_unlabeled(int n, std::uint64_t seed) {
  return make(ToyConfig{n, 0, 0, seed}).unlabeled;
}

}  // namespace invmix::toy
