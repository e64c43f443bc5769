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
#include "invmix/eval.hpp"

#include "invmix/errors.hpp"
#include "invmix/io.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace invmix {

using nlohmann::json;

double accuracy(std::span<const int> predictions, std::span<const int> gold) {
  if (predictions.size() != gold.size()) throw ShapeError("accuracy: predictions and gold differ in length");
  if (gold.empty()) throw DomainError("accuracy of an empty set");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) hit += predictions[i] == gold[i];
  return static_cast<double>(hit) / static_cast<double>(gold.size());
}

double accuracy(const TaskModel& model, const Corpus& test) {
  std::vector<int> pred, gold;
  for (const auto& e : test.labeled) {
    pred.push_back(model.predict(e.text));
    gold.push_back(e.class_id);
  }
  return accuracy(pred, gold);
}

// --- Wilcoxon -------------------------------------------------------------------

WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("wilcoxon: samples differ in length");
  std::vector<double> d;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] - b[i] != 0.0) d.push_back(a[i] - b[i]);
  WilcoxonResult r;
  r.n = static_cast<int>(d.size());
  if (d.empty() && !a.empty()) {
    r.degenerate = true;
    r.exact = true;
    return r;
  }
  if (r.n < 5) throw DomainError("wilcoxon needs at least 5 non-zero differences, got " + std::to_string(r.n));

  std::vector<std::size_t> order(d.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return std::abs(d[x]) < std::abs(d[y]); });
  auto tied = [&](double x, double y) { return std::abs(x - y) <= 1e-12 * std::max(1.0, std::max(x, y)); };
  // Doubled ranks stay integral under averaging.
  std::vector<long> rank2(d.size());
  double tie_term = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i + 1;
    while (j < order.size() && tied(std::abs(d[order[i]]), std::abs(d[order[j]]))) ++j;
    const long avg2 = static_cast<long>(i + 1 + j);  // 2 * mean of ranks i+1..j
    for (std::size_t k = i; k < j; ++k) rank2[order[k]] = avg2;
    const double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    i = j;
  }
  long w2 = 0, total2 = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    total2 += rank2[i];
    if (d[i] > 0) w2 += rank2[i];
  }
  r.w_plus = w2 / 2.0;
  r.w_minus = (total2 - w2) / 2.0;

  if (r.n <= 12) {
    r.exact = true;
    const unsigned long combos = 1UL << r.n;
    unsigned long le = 0, ge = 0;
    for (unsigned long mask = 0; mask < combos; ++mask) {
      long s = 0;
      for (int i = 0; i < r.n; ++i)
        if (mask & (1UL << i)) s += rank2[static_cast<std::size_t>(i)];
      le += s <= w2;
      ge += s >= w2;
    }
    const double c = static_cast<double>(combos);
    r.p_value = std::min(1.0, 2.0 * std::min(le / c, ge / c));
  } else {
    const double n = r.n;
    const double mean = n * (n + 1) / 4.0;
    const double var = n * (n + 1) * (2 * n + 1) / 24.0 - tie_term / 48.0;
    const double diff = r.w_plus - mean;
    const double z = var > 0 ? (std::abs(diff) - 0.5) / std::sqrt(var) : 0.0;
    r.p_value = std::min(1.0, std::erfc(std::max(0.0, z) / std::sqrt(2.0)));
  }
  return r;
}

// --- similarity -----------------------------------------------------------------

double cosine(const Embedding& a, const Embedding& b) {
  if (a.size() != b.size()) throw ShapeError("cosine: lengths differ");
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

namespace {

SimilarityStats summarize(std::string group, const std::vector<double>& v) {
  SimilarityStats s;
  s.group = std::move(group);
  s.histogram.assign(20, 0);
  s.count = static_cast<int>(v.size());
  if (v.empty()) {
    s.omitted = true;
    return s;
  }
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) {
    ss += (x - s.mean) * (x - s.mean);
    const int bin = std::clamp(static_cast<int>((x + 1.0) / 0.1), 0, 19);
    ++s.histogram[static_cast<std::size_t>(bin)];
  }
  s.std = std::sqrt(ss / static_cast<double>(v.size()));
  return s;
}

json stats_json(const SimilarityStats& s) {
  return {{"group", s.group}, {"count", s.count}, {"mean", s.mean}, {"std", s.std},
          {"histogram", s.histogram}, {"omitted", s.omitted}};
}

}  // namespace

json SimilarityReport::to_json() const {
  return {{"cross_class", stats_json(cross_class)},
          {"same_class", stats_json(same_class)},
          {"reconstructed", stats_json(reconstructed)},
          {"warnings", warnings}};
}

SimilarityReport similarity_distributions(const Corpus& originals, std::span<const std::string> reconstructions,
                                          const TaskModel& theta) {
  const auto& ex = originals.labeled;
  if (originals.kind != CorpusKind::task) throw DomainError("similarity needs a labeled corpus");
  if (reconstructions.size() != ex.size()) throw ShapeError("similarity: reconstructions are not paired 1:1");
  std::vector<int> per_class(static_cast<std::size_t>(theta.num_classes()), 0);
  for (const auto& e : ex) ++per_class[static_cast<std::size_t>(e.class_id)];
  if (std::count_if(per_class.begin(), per_class.end(), [](int c) { return c > 0; }) < 2) {
    throw DomainError("similarity needs at least two classes");
  }
  std::vector<Embedding> h;
  for (const auto& e : ex) h.push_back(theta.embed(e.text));
  std::vector<double> cross, same, recon;
  for (std::size_t i = 0; i < ex.size(); ++i) {
    recon.push_back(cosine(h[i], theta.embed(reconstructions[i])));
    for (std::size_t j = i + 1; j < ex.size(); ++j)
      (ex[i].class_id == ex[j].class_id ? same : cross).push_back(cosine(h[i], h[j]));
  }
  SimilarityReport r;
  for (std::size_t k = 0; k < per_class.size(); ++k) {
    if (per_class[k] == 1) {
      r.warnings.push_back("class " + theta.labels().name(static_cast<int>(k)) +
                           " has a single example; no same-class pairs");
    }
  }
  r.cross_class = summarize("cross_class", cross);
  r.same_class = summarize("same_class", same);
  r.reconstructed = summarize("original_vs_reconstructed", recon);
  if (r.same_class.omitted) r.warnings.push_back("same-class group omitted: no class has two examples");
  return r;
}

// --- experiments ----------------------------------------------------------------

std::string_view to_string(Method m) {
  switch (m) {
    case Method::base: return "base";
    case Method::soft: return "soft";
    case Method::hard: return "hard";
  }
  return "base";
}

Method method_from_string(std::string_view s) {
  if (s == "base") return Method::base;
  if (s == "soft") return Method::soft;
  if (s == "hard") return Method::hard;
  throw DomainError("unknown method '" + std::string(s) + "'");
}

void RunResult::finalize() {
  const double n = static_cast<double>(accs.size());
  mean = accs.empty() ? 0.0 : std::accumulate(accs.begin(), accs.end(), 0.0) / n;
  double ss = 0.0;
  for (double a : accs) ss += (a - mean) * (a - mean);
  std = accs.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
}

json RunResult::to_json() const {
  return {{"method", method},
          {"dataset", dataset},
          {"K", k_shot > 0 ? json(k_shot) : json("all")},
          {"seeds", seeds},
          {"accs", accs},
          {"mean", mean},
          {"std", std}};
}

json ExperimentResult::to_json() const {
  json j;
  j["runs"] = json::array();
  for (const auto& r : runs) j["runs"].push_back(r.to_json());
  j["comparisons"] = comparison_table(runs);
  return j;
}

namespace {

bool wants(const ExperimentSpec& s, Method m) { return std::find(s.methods.begin(), s.methods.end(), m) != s.methods.end(); }

Corpus split_for(const ExperimentSpec& spec, const Corpus& pool, std::uint64_t seed) {
  return spec.k_shot > 0 ? sample_few_shot(pool, spec.k_shot, seed) : pool;
}

double train_and_score(TaskModel model, const std::vector<TrainingItem>& items, ClassifierSchedule sched,
                       std::uint64_t seed, const Corpus& test) {
  sched.seed = seed;
  train_classifier(model, items, sched);
  return accuracy(model, test);
}

RefineResult refine_for(const ExperimentSpec& spec, const ExperimentInputs& in, const Corpus& split, std::uint64_t seed) {
  RefineConfig rc = spec.refine;
  rc.cls.seed = seed;
  rc.gen.seed = seed;
  return refine(split, in.theta0, in.phi_star, in.backend, in.tmpl, rc);
}

const DecoderBackend& need_judge(const ExperimentInputs& in) {
  if (!in.judge) throw DependencyError("judge backend");
  return *in.judge;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentSpec& spec, const ExperimentInputs& in,
                                const std::optional<std::filesystem::path>& partial) {
  if (spec.methods.empty()) throw DomainError("experiment lists no methods");
  ExperimentResult out;
  for (Method m : spec.methods) {
    RunResult r;
    r.method = std::string(to_string(m));
    r.dataset = spec.dataset;
    r.k_shot = spec.k_shot;
    out.runs.push_back(std::move(r));
  }
  auto slot = [&](Method m) -> RunResult& {
    return out.runs[static_cast<std::size_t>(std::find(spec.methods.begin(), spec.methods.end(), m) - spec.methods.begin())];
  };
  const bool mixing = wants(spec, Method::soft) || wants(spec, Method::hard);
  if (wants(spec, Method::hard)) need_judge(in);

  for (std::uint64_t seed : spec.seeds) {
    const Corpus split = split_for(spec, in.pool, seed);
    if (wants(spec, Method::base)) {
      ClassifierSchedule sched = spec.classifier;
      sched.epochs += spec.refine.schedule.outer_rounds * spec.refine.schedule.cls_epochs_per_round;
      RunResult& r = slot(Method::base);
      r.accs.push_back(train_and_score(in.theta0, training_items(split), sched, seed, in.test));
      r.seeds.push_back(seed);
    }
    if (mixing) {
      RefineResult rr = refine_for(spec, in, split, seed);
      MixConfig mc = spec.mix;
      mc.seed = seed;
      const MixResult mr = generate_augmented_set(split, rr.theta, rr.phi, in.backend, in.tmpl, mc);
      if (wants(spec, Method::soft)) {
        RunResult& r = slot(Method::soft);
        r.accs.push_back(train_and_score(rr.theta, union_items(split, mr.augmented, LabelMode::soft), spec.classifier,
                                         seed, in.test));
        r.seeds.push_back(seed);
      }
      if (wants(spec, Method::hard)) {
        const RelabelResult hard = relabel_hard(mr.augmented, need_judge(in), spec.judge);
        RunResult& r = slot(Method::hard);
        r.accs.push_back(train_and_score(rr.theta, union_items(split, hard.corpus, LabelMode::hard), spec.classifier,
                                         seed, in.test));
        r.seeds.push_back(seed);
      }
    }
    for (auto& r : out.runs) r.finalize();
    if (partial) write_file_atomic(*partial, out.to_json().dump(2));
  }
  return out;
}

json comparison_table(std::span<const RunResult> runs) {
  json rows = json::array();
  for (std::size_t i = 0; i < runs.size(); ++i) {
    for (std::size_t j = i + 1; j < runs.size(); ++j) {
      json row{{"a", runs[i].method}, {"b", runs[i].method == runs[j].method ? runs[j].method + "'" : runs[j].method},
               {"mean_diff", runs[i].mean - runs[j].mean}};
      if (runs[i].seeds != runs[j].seeds) {
        row["p_value"] = nullptr;
        row["note"] = "seed lists differ";
      } else {
        try {
          const WilcoxonResult w = wilcoxon_signed_rank(runs[i].accs, runs[j].accs);
          row["p_value"] = w.p_value;
          row["exact"] = w.exact;
          row["degenerate"] = w.degenerate;
          row["significant"] = !w.degenerate && w.p_value < 0.05;
        } catch (const DomainError& e) {
          row["p_value"] = nullptr;
          row["note"] = e.what();
        }
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::vector<LambdaRow> run_lambda_grid(const ExperimentSpec& spec, const ExperimentInputs& in,
                                       std::span<const double> grid) {
  const DecoderBackend& judge = need_judge(in);
  std::vector<LambdaRow> rows(grid.size());
  for (std::size_t g = 0; g < grid.size(); ++g) {
    rows[g].lambda = grid[g];
    for (RunResult* r : {&rows[g].soft, &rows[g].hard}) {
      r->dataset = spec.dataset;
      r->k_shot = spec.k_shot;
    }
    rows[g].soft.method = "soft";
    rows[g].hard.method = "hard";
  }
  for (std::uint64_t seed : spec.seeds) {
    const Corpus split = split_for(spec, in.pool, seed);
    const RefineResult rr = refine_for(spec, in, split, seed);
    for (auto& row : rows) {
      MixConfig mc = spec.mix;
      mc.seed = seed;
      mc.fixed_lambda = row.lambda;
      const MixResult mr = generate_augmented_set(split, rr.theta, rr.phi, in.backend, in.tmpl, mc);
      const RelabelResult hard = relabel_hard(mr.augmented, judge, spec.judge);
      row.soft.accs.push_back(train_and_score(rr.theta, union_items(split, mr.augmented, LabelMode::soft),
                                              spec.classifier, seed, in.test));
      row.hard.accs.push_back(train_and_score(rr.theta, union_items(split, hard.corpus, LabelMode::hard),
                                              spec.classifier, seed, in.test));
      row.soft.seeds.push_back(seed);
      row.hard.seeds.push_back(seed);
    }
  }
  for (auto& row : rows) {
    row.soft.finalize();
    row.hard.finalize();
    try {
      row.test = wilcoxon_signed_rank(row.hard.accs, row.soft.accs);
    } catch (const DomainError&) {
      row.test.reset();
    }
  }
  return rows;
}

json lambda_table(std::span<const LambdaRow> rows) {
  json out = json::array();
  for (const auto& r : rows) {
    json row{{"lambda", r.lambda},
             {"soft", r.soft.to_json()},
             {"hard", r.hard.to_json()},
             {"hard_minus_soft", r.hard.mean - r.soft.mean},
             {"hard_better", r.hard.mean > r.soft.mean}};
    row["p_value"] = r.test ? json(r.test->p_value) : json(nullptr);
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace invmix
