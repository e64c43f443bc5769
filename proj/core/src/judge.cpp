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
#include "invmix/judge.hpp"

#include "invmix/errors.hpp"
#include "invmix/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <thread>

namespace invmix {

using nlohmann::json;

std::string_view to_string(Intrusion i) {
  switch (i) {
    case Intrusion::none: return "none";
    case Intrusion::inside: return "inside";
    case Intrusion::outside: return "outside";
  }
  return "none";
}

Intrusion intrusion_from_string(std::string_view s) {
  if (s == "none") return Intrusion::none;
  if (s == "inside") return Intrusion::inside;
  if (s == "outside") return Intrusion::outside;
  throw DomainError("unknown intrusion kind '" + std::string(s) + "'");
}

std::string label_list(const LabelSpace& ls) {
  std::string out;
  for (int k = 0; k < ls.size(); ++k) {
    if (k) out += ",\n";
    out += "\"" + ls.name(k) + "\": \"" + ls.descriptions()[static_cast<std::size_t>(k)] + "\"";
  }
  return out;
}

std::string label_map(const LabelSpace& ls) {
  std::string out;
  for (int k = 0; k < ls.size(); ++k) out += (k ? ", " : "") + ls.name(k);
  return out;
}

std::string label_text(const SoftLabel& y, const LabelSpace& ls) {
  if (y.size() != ls.size()) throw ShapeError("label_text: soft label size differs from label space");
  std::vector<int> order(static_cast<std::size_t>(y.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return y.probs[static_cast<std::size_t>(a)] > y.probs[static_cast<std::size_t>(b)]; });
  std::string out;
  for (int k : order) {
    const double p = y.probs[static_cast<std::size_t>(k)];
    if (p <= 0.0) continue;
    char buf[32];
    std::snprintf(buf, sizeof buf, " (%.2f)", p);
    if (!out.empty()) out += " and ";
    out += ls.name(k) + buf;
  }
  return out;
}

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string normalise(std::string_view s) {
  auto junk = [](unsigned char c) { return std::isspace(c) || (std::ispunct(c) && c != '/' && c != '&'); };
  std::size_t b = 0, e = s.size();
  while (b < e && junk(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && junk(static_cast<unsigned char>(s[e - 1]))) --e;
  return lower(s.substr(b, e - b));
}

std::string between(const std::string& s, std::string_view open, std::string_view close) {
  const std::size_t a = s.find(open);
  if (a == std::string::npos) return {};
  const std::size_t start = a + open.size();
  const std::size_t b = s.find(close, start);
  return b == std::string::npos ? std::string() : s.substr(start, b - start);
}

std::string join(const std::vector<std::string>& parts) {
  std::string out;
  for (const auto& p : parts) out += p;
  return out;
}

template <class Fn>
void for_each_index(std::size_t n, int threads, Fn fn) {
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, threads)), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < n; i += workers) fn(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

std::optional<int> parse_label(std::string_view response, const LabelSpace& ls) {
  if (auto k = ls.find(response)) return k;
  const std::string norm = normalise(response);
  for (int k = 0; k < ls.size(); ++k)
    if (lower(ls.name(k)) == norm) return k;
  std::optional<int> hit;
  const std::string low = lower(response);
  for (int k = 0; k < ls.size(); ++k) {
    if (low.find(lower(ls.name(k))) != std::string::npos) {
      if (hit) return std::nullopt;
      hit = k;
    }
  }
  return hit;
}

std::optional<bool> parse_yes_no(std::string_view response) {
  std::string norm = normalise(response);
  const std::size_t sp = norm.find_first_of(" \t\n,.;:!");
  const std::string first = sp == std::string::npos ? norm : norm.substr(0, sp);
  if (first == "yes") return true;
  if (first == "no") return false;
  return std::nullopt;
}

LabelOutcome try_judge_label(std::string_view text, const LabelSpace& ls, const DecoderBackend& judge,
                             const JudgeOptions& opts) {
  const std::string prompt = opts.catalog.get(PromptCatalog::kLabeling)
                                 .render({{"text", std::string(text)}, {"label_list", label_list(ls)}});
  LabelOutcome out;
  for (int a = 0; a < std::max(1, opts.retries); ++a) {
    out.attempts = a + 1;
    out.raw_response = judge.complete({prompt}, opts.decode);
    if ((out.label = parse_label(out.raw_response, ls))) break;
  }
  return out;
}

int judge_label(std::string_view text, const LabelSpace& ls, const DecoderBackend& judge, const JudgeOptions& opts) {
  LabelOutcome o = try_judge_label(text, ls, judge, opts);
  if (!o.label) {
    throw JudgeError("no label name in judge response after " + std::to_string(o.attempts) + " attempts: \"" +
                     o.raw_response + "\"");
  }
  return *o.label;
}

std::optional<JudgeVerdict> judge_intrusion(const SyntheticExample& sample, const Corpus& task,
                                            const DecoderBackend& judge, const JudgeOptions& opts) {
  if (!task.label_space) throw DomainError("judge_intrusion needs a labeled task corpus");
  const LabelSpace& ls = *task.label_space;
  const LabeledExample* si = task.find_labeled(sample.source_i);
  const LabeledExample* sj = task.find_labeled(sample.source_j);
  if (!si || !sj) throw DomainError("sources of " + sample.id + " are not in the task corpus");

  const std::string validity = opts.catalog.get(PromptCatalog::kIntrusionValidity)
                                   .render({{"text", sample.text}, {"label_text", label_text(sample.soft_label, ls)}});
  std::optional<bool> ok;
  std::string raw;
  for (int a = 0; a < std::max(1, opts.retries) && !ok; ++a) {
    raw = judge.complete({validity}, opts.decode);
    ok = parse_yes_no(raw);
  }
  if (!ok) return std::nullopt;
  if (*ok) return JudgeVerdict{sample.id, Intrusion::none, sample.soft_label.argmax(), raw};

  const std::string choice = opts.catalog.get(PromptCatalog::kIntrusionChoice)
                                 .render({{"text", sample.text}, {"label_map", label_map(ls)}});
  std::optional<int> picked;
  std::string raw2;
  for (int a = 0; a < std::max(1, opts.retries) && !picked; ++a) {
    raw2 = judge.complete({choice}, opts.decode);
    picked = parse_label(raw2, ls);
  }
  if (!picked) return std::nullopt;
  const bool inside = *picked == si->class_id || *picked == sj->class_id;
  return JudgeVerdict{sample.id, inside ? Intrusion::inside : Intrusion::outside, *picked, raw + "\n" + raw2};
}

IntrusionRun judge_intrusions(const Corpus& augmented, const Corpus& task, const DecoderBackend& judge,
                              const JudgeOptions& opts) {
  const auto& s = augmented.synthetic;
  std::vector<std::optional<JudgeVerdict>> slots(s.size());
  for_each_index(s.size(), opts.threads, [&](std::size_t i) { slots[i] = judge_intrusion(s[i], task, judge, opts); });
  IntrusionRun run;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (slots[i]) {
      run.verdicts.push_back(std::move(*slots[i]));
      run.lambdas.push_back(s[i].lambda);
    } else {
      ++run.skipped;
    }
  }
  return run;
}

double IntrusionReport::proportion(Intrusion i) const {
  const int t = total();
  if (t == 0) return 0.0;
  const int c = i == Intrusion::none ? none : i == Intrusion::inside ? inside : outside;
  return static_cast<double>(c) / t;
}

std::vector<double> default_lambda_buckets() { return {0.5, 0.6, 0.7, 0.8, 0.9}; }

std::vector<IntrusionReport> intrusion_stats(std::span<const JudgeVerdict> verdicts, std::span<const double> lambdas,
                                             std::span<const double> buckets) {
  if (verdicts.size() != lambdas.size()) throw ShapeError("intrusion_stats: verdicts and lambdas differ in length");
  if (verdicts.empty()) return {};
  if (buckets.empty()) throw DomainError("intrusion_stats: no lambda buckets");
  std::vector<IntrusionReport> rows(buckets.size() + 1);
  for (std::size_t b = 0; b < buckets.size(); ++b) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", buckets[b]);
    rows[b].bucket = buf;
  }
  rows.back().bucket = "overall";
  auto bump = [](IntrusionReport& r, Intrusion i) { (i == Intrusion::none ? r.none : i == Intrusion::inside ? r.inside : r.outside)++; };
  for (std::size_t v = 0; v < verdicts.size(); ++v) {
    const double l = std::max(lambdas[v], 1.0 - lambdas[v]);
    std::size_t best = 0;
    for (std::size_t b = 1; b < buckets.size(); ++b)
      if (std::abs(buckets[b] - l) < std::abs(buckets[best] - l)) best = b;
    bump(rows[best], verdicts[v].intrusion);
    bump(rows.back(), verdicts[v].intrusion);
  }
  return rows;
}

RelabelResult relabel_hard(const Corpus& augmented, const DecoderBackend& judge, const JudgeOptions& opts) {
  if (augmented.kind != CorpusKind::augmented || !augmented.label_space) {
    throw DomainError("relabel_hard expects an augmented corpus");
  }
  const auto& s = augmented.synthetic;
  std::vector<LabelOutcome> outcomes(s.size());
  for_each_index(s.size(), opts.threads,
                 [&](std::size_t i) { outcomes[i] = try_judge_label(s[i].text, *augmented.label_space, judge, opts); });
  RelabelResult r;
  r.corpus = Corpus::make_augmented(*augmented.label_space, {});
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!outcomes[i].label) {
      ++r.failures;
      continue;
    }
    SyntheticExample x = s[i];
    x.hard_label = outcomes[i].label;
    r.corpus.synthetic.push_back(std::move(x));
  }
  if (2 * r.failures > static_cast<int>(s.size())) {
    throw JudgeError("judge failed to label " + std::to_string(r.failures) + " of " + std::to_string(s.size()) +
                     " samples");
  }
  return r;
}

std::string verdicts_to_jsonl(std::span<const JudgeVerdict> verdicts, const LabelSpace& ls) {
  std::string out;
  for (const auto& v : verdicts) {
    json j{{"id", v.sample_id},
           {"intrusion", to_string(v.intrusion)},
           {"judged_label", ls.name(v.judged_label)},
           {"raw_response", v.raw_response}};
    out += j.dump() + "\n";
  }
  return out;
}

json report_to_json(std::span<const IntrusionReport> report) {
  json j = json::object();
  for (const auto& r : report) {
    j[r.bucket] = {{"counts", {{"none", r.none}, {"inside", r.inside}, {"outside", r.outside}}},
                   {"proportions",
                    {{"none", r.proportion(Intrusion::none)},
                     {"inside", r.proportion(Intrusion::inside)},
                     {"outside", r.proportion(Intrusion::outside)}}},
                   {"total", r.total()}};
  }
  return j;
}

// --- offline judges -------------------------------------------------------------

KeywordJudge::KeywordJudge(LabelSpace ls, std::map<std::string, int> lexicon, double tolerance)
    : ls_(std::move(ls)), lexicon_(std::move(lexicon)), tolerance_(tolerance) {
  for (const auto& [w, k] : lexicon_)
    if (k < 0 || k >= ls_.size()) throw DomainError("lexicon class out of range for '" + w + "'");
}

std::vector<int> KeywordJudge::hits(std::string_view sentence) const {
  std::vector<int> h(static_cast<std::size_t>(ls_.size()), 0);
  for (const auto& tok : tokenize(lower(sentence))) {
    if (auto it = lexicon_.find(tok); it != lexicon_.end()) ++h[static_cast<std::size_t>(it->second)];
  }
  return h;
}

std::string KeywordJudge::complete(const std::vector<std::string>& prompt_parts, const DecodeConfig&) const {
  const std::string prompt = join(prompt_parts);
  auto majority = [&](const std::string& sentence) -> std::string {
    const std::vector<int> h = hits(sentence);
    const auto best = std::max_element(h.begin(), h.end());
    if (*best == 0) return "I cannot tell.";
    return ls_.name(static_cast<int>(best - h.begin()));
  };
  if (prompt.find("Respond with only the label name") != std::string::npos) {
    return majority(between(prompt, "Sentence: \"", "\"\n"));
  }
  if (prompt.find("If it matches") != std::string::npos) {
    const std::string sentence = between(prompt, "the sentence \"", "\" can be labeled");
    const std::string text = between(prompt, "labeled as \n\n\"", "\".");
    std::vector<double> target(static_cast<std::size_t>(ls_.size()), 0.0);
    std::size_t pos = 0;
    while (pos < text.size()) {
      const std::size_t open = text.find(" (", pos);
      const std::size_t close = text.find(')', open == std::string::npos ? pos : open);
      if (open == std::string::npos || close == std::string::npos) break;
      std::string name = text.substr(pos, open - pos);
      if (auto k = ls_.find(name)) target[static_cast<std::size_t>(*k)] = std::stod(text.substr(open + 2, close - open - 2));
      pos = close + 1;
      if (text.compare(pos, 5, " and ") == 0) pos += 5;
    }
    const std::vector<int> h = hits(sentence);
    const int total = std::accumulate(h.begin(), h.end(), 0);
    if (total == 0) return "No";
    double tv = 0.0;
    for (std::size_t k = 0; k < h.size(); ++k) tv += std::abs(static_cast<double>(h[k]) / total - target[k]);
    return tv / 2.0 <= tolerance_ ? "Yes" : "No";
  }
  if (prompt.find("Choose one label") != std::string::npos) {
    return majority(between(prompt, "the sentence \"", "\" in \""));
  }
  return "I cannot tell.";
}

std::string ScriptedJudge::complete(const std::vector<std::string>& prompt_parts, const DecodeConfig&) const {
  const int call = calls_.fetch_add(1);
  return script_(join(prompt_parts), call);
}

}  // namespace invmix
