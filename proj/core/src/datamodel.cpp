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

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace invmix {

using nlohmann::json;

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n\f\v");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n\f\v");
  return std::string(s.substr(b, e - b + 1));
}

std::string require_text(const json& rec, std::size_t line) {
  if (!rec.contains("text") || !rec["text"].is_string()) throw ParseError("missing string field 'text'", line);
  std::string t = trim(rec["text"].get<std::string>());
  if (t.empty()) throw ParseError("text is empty after trimming", line);
  return t;
}

std::string record_id(const json& rec, std::size_t index, std::size_t line) {
  if (!rec.contains("id")) return std::to_string(index);
  if (!rec["id"].is_string()) throw ParseError("field 'id' must be a string", line);
  return rec["id"].get<std::string>();
}

}  // namespace

// --- LabelSpace -------------------------------------------------------------

LabelSpace::LabelSpace(std::vector<std::string> names, std::vector<std::string> descriptions)
    : names_(std::move(names)), descriptions_(std::move(descriptions)) {
  if (names_.size() < 2) throw DomainError("label space needs at least 2 classes");
  if (descriptions_.size() != names_.size()) {
    throw DomainError("label space has " + std::to_string(names_.size()) + " names but " +
                      std::to_string(descriptions_.size()) + " descriptions");
  }
  std::set<std::string> seen;
  for (const auto& n : names_) {
    if (trim(n).empty()) throw DomainError("label names must be non-empty");
    if (!seen.insert(n).second) throw DomainError("duplicate label name '" + n + "'");
  }
}

const std::string& LabelSpace::name(int class_id) const {
  if (class_id < 0 || class_id >= size()) throw DomainError("class id " + std::to_string(class_id) + " out of range");
  return names_[static_cast<std::size_t>(class_id)];
}

std::optional<int> LabelSpace::find(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return static_cast<int>(i);
  return std::nullopt;
}

LabelSpace LabelSpace::builtin(std::string_view which) {
  if (which == "trec") {
    return LabelSpace({"Description", "Numeric", "Entity", "Location", "Human", "Abbreviation"},
                      {"descriptions of objects, people, or events",
                       "numerical data such as dates, amounts, or quantities",
                       "specific named entities like objects, products, or organizations",
                       "geographical places, cities, countries, or regions",
                       "people, occupations, or human-related concepts",
                       "shortened forms of words or acronyms"});
  }
  if (which == "agnews") {
    return LabelSpace({"World", "Sports", "Business", "Sci/Tech"},
                      {"topics related to international events, diplomacy, or global issues",
                       "sports news, teams, players, or competitions",
                       "economic topics such as finance, companies, and markets",
                       "science, technology, innovation, or research topics"});
  }
  if (which == "yahoo") {
    return LabelSpace({"Culture", "Science", "Health", "Education", "Technology", "Sports", "Finance",
                       "Entertainment", "Relationship", "Politics"},
                      {"arts, traditions, beliefs, or societal norms",
                       "scientific research, discoveries, and theories",
                       "healthcare, medicine, wellness, or diseases",
                       "schools, learning systems, or educational content",
                       "technological tools, trends, and advancements",
                       "sports news, teams, players, or competitions",
                       "financial topics such as banking, investing, or economics",
                       "topics related to movies, music, celebrities, or pop culture",
                       "personal relationships, dating, or social interactions",
                       "government, political debates, or policy-making"});
  }
  throw DomainError("unknown built-in label space '" + std::string(which) + "'");
}

// --- labels -----------------------------------------------------------------

std::vector<double> to_onehot(int class_id, int K) {
  if (K <= 0) throw DomainError("K must be positive");
  if (class_id < 0 || class_id >= K) {
    throw DomainError("class id " + std::to_string(class_id) + " outside [0, " + std::to_string(K) + ")");
  }
  std::vector<double> v(static_cast<std::size_t>(K), 0.0);
  v[static_cast<std::size_t>(class_id)] = 1.0;
  return v;
}

LabeledExample LabeledExample::make(std::string id, std::string text, int class_id, int K) {
  std::string t = trim(text);
  if (t.empty()) throw DomainError("example text is empty after trimming");
  return LabeledExample{std::move(id), std::move(t), class_id, to_onehot(class_id, K)};
}

SoftLabel SoftLabel::from(std::vector<double> probs) {
  if (probs.empty()) throw DomainError("soft label is empty");
  double s = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("soft label entry outside [0,1]");
    s += p;
  }
  if (std::abs(s - 1.0) > 1e-6) throw DomainError("soft label sums to " + std::to_string(s));
  return SoftLabel{std::move(probs)};
}

int SoftLabel::argmax() const {
  return static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

// --- Corpus -----------------------------------------------------------------

std::string_view to_string(CorpusKind kind) {
  switch (kind) {
    case CorpusKind::unlabeled: return "unlabeled";
    case CorpusKind::task: return "task";
    case CorpusKind::augmented: return "augmented";
  }
  return "?";
}

CorpusKind corpus_kind_from_string(std::string_view s) {
  if (s == "unlabeled") return CorpusKind::unlabeled;
  if (s == "task") return CorpusKind::task;
  if (s == "augmented") return CorpusKind::augmented;
  throw DomainError("unknown corpus kind '" + std::string(s) + "'");
}

std::size_t Corpus::size() const noexcept {
  switch (kind) {
    case CorpusKind::unlabeled: return unlabeled.size();
    case CorpusKind::task: return labeled.size();
    case CorpusKind::augmented: return synthetic.size();
  }
  return 0;
}

std::vector<std::string> Corpus::texts() const {
  std::vector<std::string> out;
  out.reserve(size());
  for (const auto& r : unlabeled) out.push_back(r.text);
  for (const auto& r : labeled) out.push_back(r.text);
  for (const auto& r : synthetic) out.push_back(r.text);
  return out;
}

const LabeledExample* Corpus::find_labeled(std::string_view id) const {
  for (const auto& e : labeled)
    if (e.id == id) return &e;
  return nullptr;
}

void Corpus::validate() const {
  switch (kind) {
    case CorpusKind::unlabeled:
      if (!labeled.empty() || !synthetic.empty()) throw DomainError("unlabeled corpus carries labels");
      break;
    case CorpusKind::task: {
      if (!label_space) throw DomainError("task corpus needs a label space");
      if (!unlabeled.empty() || !synthetic.empty()) throw DomainError("task corpus holds foreign records");
      const int K = label_space->size();
      for (const auto& e : labeled) {
        if (e.class_id < 0 || e.class_id >= K) throw DomainError("example " + e.id + " has class outside label space");
        if (e.onehot != to_onehot(e.class_id, K)) throw DomainError("example " + e.id + " has an invalid one-hot");
      }
      break;
    }
    case CorpusKind::augmented: {
      if (!label_space) throw DomainError("augmented corpus needs a label space");
      if (!unlabeled.empty() || !labeled.empty()) throw DomainError("augmented corpus holds foreign records");
      const int K = label_space->size();
      for (const auto& s : synthetic) {
        if (s.soft_label.size() != K) throw DomainError("sample " + s.id + " soft label has wrong length");
        (void)SoftLabel::from(s.soft_label.probs);
        if (!(s.lambda >= 0.0 && s.lambda <= 1.0)) throw DomainError("sample " + s.id + " lambda outside [0,1]");
        if (s.hard_label && (*s.hard_label < 0 || *s.hard_label >= K))
          throw DomainError("sample " + s.id + " hard label out of range");
        if (s.source_i == s.source_j) throw DomainError("sample " + s.id + " mixes an example with itself");
      }
      break;
    }
  }
}

Corpus Corpus::make_unlabeled(std::vector<TextRecord> records) {
  Corpus c;
  c.kind = CorpusKind::unlabeled;
  c.unlabeled = std::move(records);
  return c;
}

Corpus Corpus::make_task(LabelSpace ls, std::vector<LabeledExample> examples) {
  Corpus c;
  c.kind = CorpusKind::task;
  c.label_space = std::move(ls);
  c.labeled = std::move(examples);
  c.validate();
  return c;
}

Corpus Corpus::make_augmented(LabelSpace ls, std::vector<SyntheticExample> samples) {
  Corpus c;
  c.kind = CorpusKind::augmented;
  c.label_space = std::move(ls);
  c.synthetic = std::move(samples);
  c.validate();
  return c;
}

// --- JSONL ------------------------------------------------------------------

Corpus parse_corpus(std::istream& in, CorpusKind kind, const std::optional<LabelSpace>& label_space) {
  if (kind != CorpusKind::unlabeled && !label_space) {
    throw DomainError(std::string(to_string(kind)) + " corpus requires a label space");
  }
  Corpus c;
  c.kind = kind;
  if (kind != CorpusKind::unlabeled) c.label_space = label_space;
  std::string line;
  std::size_t lineno = 0;
  std::size_t index = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("malformed JSON: ") + e.what(), lineno);
    }
    if (!rec.is_object()) throw ParseError("record is not an object", lineno);
    std::string id = record_id(rec, index, lineno);
    std::string text = require_text(rec, lineno);
    switch (kind) {
      case CorpusKind::unlabeled:
        if (rec.contains("label")) throw ParseError("unlabeled corpus record carries a label", lineno);
        c.unlabeled.push_back({std::move(id), std::move(text)});
        break;
      case CorpusKind::task: {
        if (!rec.contains("label") || !rec["label"].is_string()) throw ParseError("missing string field 'label'", lineno);
        const std::string name = rec["label"].get<std::string>();
        const auto cls = label_space->find(name);
        if (!cls) throw LabelError(name, lineno);
        c.labeled.push_back(LabeledExample::make(std::move(id), std::move(text), *cls, label_space->size()));
        break;
      }
      case CorpusKind::augmented: {
        SyntheticExample s;
        s.id = std::move(id);
        s.text = std::move(text);
        try {
          s.soft_label = SoftLabel::from(rec.at("soft_label").get<std::vector<double>>());
          if (s.soft_label.size() != label_space->size()) throw ParseError("soft_label length != K", lineno);
          const json& hl = rec.at("hard_label");
          if (!hl.is_null()) {
            const std::string name = hl.get<std::string>();
            const auto cls = label_space->find(name);
            if (!cls) throw LabelError(name, lineno);
            s.hard_label = *cls;
          }
          s.lambda = rec.at("lambda").get<double>();
          s.source_i = rec.at("source_i").get<std::string>();
          s.source_j = rec.at("source_j").get<std::string>();
        } catch (const json::exception& e) {
          throw ParseError(std::string("bad augmented record: ") + e.what(), lineno);
        } catch (const DomainError& e) {
          throw ParseError(e.what(), lineno);
        }
        if (!(s.lambda >= 0.0 && s.lambda <= 1.0)) throw ParseError("lambda outside [0,1]", lineno);
        c.synthetic.push_back(std::move(s));
        break;
      }
    }
    ++index;
  }
  return c;
}

Corpus load_corpus(const std::filesystem::path& path, CorpusKind kind, const std::optional<LabelSpace>& label_space) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open corpus " + path.string());
  return parse_corpus(in, kind, label_space);
}

std::string serialize_corpus(const Corpus& corpus) {
  std::ostringstream out;
  std::size_t index = 0;
  auto put_id = [&](json& rec, const std::string& id) {
    if (id != std::to_string(index)) rec["id"] = id;
  };
  switch (corpus.kind) {
    case CorpusKind::unlabeled:
      for (const auto& r : corpus.unlabeled) {
        json rec;
        rec["text"] = r.text;
        put_id(rec, r.id);
        out << rec.dump() << '\n';
        ++index;
      }
      break;
    case CorpusKind::task:
      for (const auto& e : corpus.labeled) {
        json rec;
        rec["text"] = e.text;
        rec["label"] = corpus.label_space->name(e.class_id);
        put_id(rec, e.id);
        out << rec.dump() << '\n';
        ++index;
      }
      break;
    case CorpusKind::augmented:
      for (const auto& s : corpus.synthetic) {
        json rec;
        rec["text"] = s.text;
        rec["soft_label"] = s.soft_label.probs;
        rec["hard_label"] = s.hard_label ? json(corpus.label_space->name(*s.hard_label)) : json(nullptr);
        rec["lambda"] = s.lambda;
        rec["source_i"] = s.source_i;
        rec["source_j"] = s.source_j;
        put_id(rec, s.id);
        out << rec.dump() << '\n';
        ++index;
      }
      break;
  }
  return out.str();
}

void save_corpus(const std::filesystem::path& path, const Corpus& corpus) {
  write_file_atomic(path, serialize_corpus(corpus));
}

// --- sampling ---------------------------------------------------------------

Corpus sample_few_shot(const Corpus& corpus, int k_shot, std::uint64_t seed) {
  if (corpus.kind != CorpusKind::task || !corpus.label_space) throw DomainError("few-shot sampling needs a task corpus");
  if (k_shot <= 0) throw DomainError("k_shot must be positive");
  const LabelSpace& ls = *corpus.label_space;
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(ls.size()));
  for (std::size_t i = 0; i < corpus.labeled.size(); ++i)
    by_class[static_cast<std::size_t>(corpus.labeled[i].class_id)].push_back(i);

  std::mt19937_64 rng(seed);
  std::vector<LabeledExample> picked;
  for (int k = 0; k < ls.size(); ++k) {
    auto& pool = by_class[static_cast<std::size_t>(k)];
    if (pool.size() < static_cast<std::size_t>(k_shot)) {
      throw InsufficientDataError(ls.name(k), pool.size(), static_cast<std::size_t>(k_shot));
    }
    std::shuffle(pool.begin(), pool.end(), rng);
    std::vector<std::size_t> chosen(pool.begin(), pool.begin() + k_shot);
    std::sort(chosen.begin(), chosen.end());
    for (std::size_t i : chosen) picked.push_back(corpus.labeled[i]);
  }
  return Corpus::make_task(ls, std::move(picked));
}

Corpus subsample(const Corpus& corpus, std::size_t n, std::uint64_t seed) {
  const std::size_t total = corpus.size();
  if (n >= total) return corpus;
  std::vector<std::size_t> idx(total);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(n);
  std::sort(idx.begin(), idx.end());
  Corpus out;
  out.kind = corpus.kind;
  out.label_space = corpus.label_space;
  for (std::size_t i : idx) {
    switch (corpus.kind) {
      case CorpusKind::unlabeled: out.unlabeled.push_back(corpus.unlabeled[i]); break;
      case CorpusKind::task: out.labeled.push_back(corpus.labeled[i]); break;
      case CorpusKind::augmented: out.synthetic.push_back(corpus.synthetic[i]); break;
    }
  }
  return out;
}

}  // namespace invmix
