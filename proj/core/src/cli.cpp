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
#include "invmix/cli.hpp"

#include "invmix/errors.hpp"
#include "invmix/io.hpp"
#include "invmix/toy.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <map>
#include <iostream>
#include <sstream>

namespace invmix {

using nlohmann::json;
namespace fs = std::filesystem;

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> s{"make-toy", "pretrain", "align", "refine", "mix",
                                          "judge",    "relabel",  "eval",  "report"};
  return s;
}

namespace {

fs::path at(const RunConfig& c, const char* rel) { return c.output_dir / rel; }

fs::path need(const RunConfig& c, const char* rel) {
  fs::path p = at(c, rel);
  if (!fs::exists(p)) throw DependencyError(p.string());
  return p;
}

const fs::path& need_data(const fs::path& p, const char* key) {
  if (p.empty()) throw ConfigError("missing required key '" + std::string(key) + "'");
  if (!fs::exists(p)) throw DependencyError(p.string());
  return p;
}

PromptCatalog catalog(const RunConfig& c) { return c.prompts ? PromptCatalog::load(*c.prompts) : PromptCatalog::defaults(); }

// Timing goes to its own file so the stage report stays byte-stable.
void write_report(const RunConfig& c, const std::string& stage, json j) {
  if (j.contains("wall_seconds")) {
    write_file_atomic(c.reports() / (stage + ".timing.json"), json{{"wall_seconds", j["wall_seconds"]}}.dump(2));
    j.erase("wall_seconds");
  }
  write_file_atomic(c.reports() / (stage + ".json"), j.dump(2));
}

std::unique_ptr<DecoderBackend> make_judge(const RunConfig& c) {
  if (c.judge.kind == JudgeSettings::Kind::remote) return std::make_unique<RemoteBackend>(c.judge.remote);
  std::map<std::string, int> lex;
  if (c.judge.lexicon == "toy") {
    lex = toy::lexicon();
  } else {
    const json j = json::parse(read_file(c.judge.lexicon));
    for (const auto& [word, name] : j.items()) {
      auto k = c.data.labels.find(name.get<std::string>());
      if (!k) throw ConfigError("judge lexicon maps '" + word + "' to unknown label '" + name.get<std::string>() + "'");
      lex.emplace(word, *k);
    }
  }
  return std::make_unique<KeywordJudge>(c.data.labels, std::move(lex), c.judge.tolerance);
}

JudgeOptions judge_options(const RunConfig& c) {
  JudgeOptions o = c.judge.options;
  o.catalog = catalog(c);
  return o;
}

Corpus load_task(const RunConfig& c) { return load_corpus(need_data(c.data.task, "data.task"), CorpusKind::task, c.data.labels); }

// --- stages ------------------------------------------------------------------------

void cmd_make_toy(const RunConfig& c, std::ostream& log) {
  if (c.data.unlabeled.empty() || c.data.test.empty()) {
    throw ConfigError("make-toy needs data.unlabeled, data.task and data.test paths");
  }
  toy::ToyConfig tc;
  tc.seed = c.seed;
  const toy::ToyData d = toy::make(tc);
  save_corpus(c.data.unlabeled, d.unlabeled);
  save_corpus(c.data.task, d.task);
  save_corpus(c.data.test, d.test);
  log << "wrote toy corpora: " << d.unlabeled.size() << " unlabeled, " << d.task.size() << " task, " << d.test.size()
      << " test\n";
}

void cmd_pretrain(const RunConfig& c, std::ostream& log) {
  const Corpus u = load_corpus(need_data(c.data.unlabeled, "data.unlabeled"), CorpusKind::unlabeled);
  std::vector<std::string> texts = u.texts();
  for (const auto& t : load_task(c).texts()) texts.push_back(t);
  if (!c.data.test.empty()) {
    for (const auto& t : load_corpus(need_data(c.data.test, "data.test"), CorpusKind::task, c.data.labels).texts())
      texts.push_back(t);
  }
  const PromptTemplate tmpl = catalog(c).get(PromptCatalog::kInversion);
  texts.push_back(tmpl.prefix());
  texts.push_back(tmpl.suffix());
  texts.push_back(tmpl.closing());
  const Vocabulary vocab = Vocabulary::build(texts);

  const std::vector<std::string> sentences = u.texts();
  TaskModel theta0(c.encoder, vocab, c.data.labels, c.head_hidden);
  theta0.save(at(c, artifacts::kTheta0));
  TinyDecoder dec(c.decoder, vocab);
  const PretrainReport rep = pretrain_decoder(dec, sentences, tmpl, c.pretrain);
  dec.save(at(c, artifacts::kDecoder));
  write_report(c, "pretrain", {{"vocab_size", vocab.size()}, {"sentences", sentences.size()}, {"epoch_loss", rep.epoch_loss}});
  log << "vocabulary " << vocab.size() << " tokens; decoder pretrained for " << rep.epoch_loss.size() << " epochs\n";
}

void cmd_align(const RunConfig& c, std::ostream& log) {
  const TaskModel theta = TaskModel::load(need(c, artifacts::kTheta0));
  const TinyDecoder dec = TinyDecoder::load(need(c, artifacts::kDecoder));
  Corpus u = load_corpus(need_data(c.data.unlabeled, "data.unlabeled"), CorpusKind::unlabeled);
  if (c.data.unlabeled_limit > 0) u = subsample(u, static_cast<std::size_t>(c.data.unlabeled_limit), c.seed);
  const PromptTemplate tmpl = catalog(c).get(PromptCatalog::kInversion);
  try {
    AlignResult r = align_adaptor(u, theta, Adaptor(c.adaptor), dec, tmpl, c.align);
    r.phi.save(at(c, artifacts::kAdaptorAligned), tmpl.name, dec.id());
    r.report.checkpoints = {artifacts::kAdaptorAligned};
    json j = r.report.to_json();
    j["sentences"] = u.size();
    write_report(c, "align", j);
    log << "aligned on " << u.size() << " sentences: gen_loss " << r.report.initial_gen_loss << " -> "
        << r.report.final_gen_loss << "\n";
  } catch (const StageAborted& e) {
    write_report(c, "align", e.report().to_json());
    throw;
  }
}

void cmd_refine(const RunConfig& c, std::ostream& log) {
  TaskModel theta = TaskModel::load(need(c, artifacts::kTheta0));
  Adaptor phi = Adaptor::load(need(c, artifacts::kAdaptorAligned)).adaptor;
  const TinyDecoder dec = TinyDecoder::load(need(c, artifacts::kDecoder));
  const Corpus task = load_task(c);
  const Corpus split = c.data.k_shot > 0 ? sample_few_shot(task, c.data.k_shot, c.seed) : task;
  save_corpus(at(c, artifacts::kSplit), split);
  const PromptTemplate tmpl = catalog(c).get(PromptCatalog::kInversion);
  try {
    RefineResult r = refine(split, std::move(theta), std::move(phi), dec, tmpl, c.refine);
    r.theta.save(at(c, artifacts::kThetaRefined));
    r.phi.save(at(c, artifacts::kAdaptorRefined), tmpl.name, dec.id());
    r.report.checkpoints = {artifacts::kThetaRefined, artifacts::kAdaptorRefined};
    json j = r.report.to_json();
    j["training_accuracy"] = training_accuracy(r.theta, training_items(split));
    j["split_size"] = split.size();
    write_report(c, "refine", j);
    log << "refined on " << split.size() << " examples; training accuracy " << j["training_accuracy"].get<double>()
        << "\n";
  } catch (const StageAborted& e) {
    write_report(c, "refine", e.report().to_json());
    throw;
  }
}

void cmd_mix(const RunConfig& c, std::ostream& log) {
  const TaskModel theta = TaskModel::load(need(c, artifacts::kThetaRefined));
  const Adaptor::Loaded phi = Adaptor::load(need(c, artifacts::kAdaptorRefined));
  const TinyDecoder dec = TinyDecoder::load(need(c, artifacts::kDecoder));
  const Corpus split = load_corpus(need(c, artifacts::kSplit), CorpusKind::task, c.data.labels);
  if (phi.backend_id != dec.id()) log << "warning: adaptor was aligned against '" << phi.backend_id << "'\n";
  const PromptCatalog cat = catalog(c);
  const MixResult r = generate_augmented_set(split, theta, phi.adaptor, dec, cat.get(phi.template_name), c.mix);
  save_corpus(at(c, artifacts::kAugmented), r.augmented);
  for (const auto& w : r.warnings) log << "warning: " << w << "\n";
  write_report(c, "mix", {{"requested", c.mix.num_samples},
                          {"generated", r.augmented.size()},
                          {"skipped", r.skipped},
                          {"warnings", r.warnings},
                          {"alpha", c.mix.alpha},
                          {"lambda", c.mix.fixed_lambda ? json(*c.mix.fixed_lambda) : json(nullptr)},
                          {"pair_policy", to_string(c.mix.pair_policy)},
                          {"decode", to_string(c.mix.decode.mode)},
                          {"seed", c.mix.seed}});
  log << "generated " << r.augmented.size() << " samples (" << r.skipped << " skipped)\n";
  if (!c.feedback_epochs) return;
  std::vector<TextRecord> texts;
  for (const auto& s : r.augmented.synthetic) texts.push_back({s.id, s.text});
  AlignConfig fc = c.refine.gen;
  fc.epochs = *c.feedback_epochs;
  fc.seed = c.seed + 7;
  const PromptTemplate& tmpl = cat.get(phi.template_name);
  try {
    AlignResult f = align_adaptor(Corpus::make_unlabeled(texts), theta, phi.adaptor, dec, tmpl, fc);
    f.phi.save(at(c, artifacts::kAdaptorFeedback), tmpl.name, dec.id());
    f.report.checkpoints = {artifacts::kAdaptorFeedback};
    write_report(c, "feedback", f.report.to_json());
    log << "adaptor re-aligned on " << texts.size() << " synthetic sentences: gen_loss " << f.report.initial_gen_loss
        << " -> " << f.report.final_gen_loss << "\n";
  } catch (const StageAborted& e) {
    write_report(c, "feedback", e.report().to_json());
    throw;
  }
}

void cmd_relabel(const RunConfig& c, std::ostream& log) {
  const Corpus aug = load_corpus(need(c, artifacts::kAugmented), CorpusKind::augmented, c.data.labels);
  const auto judge = make_judge(c);
  const RelabelResult r = relabel_hard(aug, *judge, judge_options(c));
  save_corpus(at(c, artifacts::kAugmentedHard), r.corpus);
  int changed = 0;
  for (const auto& s : r.corpus.synthetic) changed += *s.hard_label != s.soft_label.argmax();
  write_report(c, "relabel", {{"inputs", aug.size()},
                              {"failures", r.failures},
                              {"outputs", r.corpus.size()},
                              {"differs_from_soft_argmax", changed},
                              {"judge", judge->id()}});
  log << "relabelled " << r.corpus.size() << " of " << aug.size() << " samples\n";
}

void cmd_judge(const RunConfig& c, std::ostream& log) {
  Corpus aug = load_corpus(need(c, artifacts::kAugmented), CorpusKind::augmented, c.data.labels);
  const Corpus split = load_corpus(need(c, artifacts::kSplit), CorpusKind::task, c.data.labels);
  aug = subsample(aug, static_cast<std::size_t>(c.judge.sample_size), c.seed);
  const auto judge = make_judge(c);
  const IntrusionRun run = judge_intrusions(aug, split, *judge, judge_options(c));
  const auto rows = intrusion_stats(run.verdicts, run.lambdas, c.judge.buckets);
  write_file_atomic(c.reports() / "verdicts.jsonl", verdicts_to_jsonl(run.verdicts, c.data.labels));
  write_report(c, "intrusion", {{"buckets", report_to_json(rows)},
                                {"judged", run.verdicts.size()},
                                {"skipped", run.skipped},
                                {"judge", judge->id()}});
  log << "judged " << run.verdicts.size() << " samples (" << run.skipped << " skipped)\n";
}

void cmd_eval(const RunConfig& c, std::ostream& log) {
  const TaskModel theta0 = TaskModel::load(need(c, artifacts::kTheta0));
  const Adaptor::Loaded phi = Adaptor::load(need(c, artifacts::kAdaptorAligned));
  const TinyDecoder dec = TinyDecoder::load(need(c, artifacts::kDecoder));
  const Corpus pool = load_task(c);
  const Corpus test = load_corpus(need_data(c.data.test, "data.test"), CorpusKind::task, c.data.labels);
  const PromptCatalog cat = catalog(c);
  const PromptTemplate& tmpl = cat.get(phi.template_name);

  ExperimentSpec spec;
  spec.dataset = c.data.dataset;
  spec.methods = c.eval.methods;
  spec.k_shot = c.data.k_shot;
  spec.seeds = c.eval.seeds;
  spec.classifier = c.classifier;
  spec.refine = c.refine;
  spec.mix = c.mix;
  spec.judge = judge_options(c);
  std::unique_ptr<DecoderBackend> judge;
  const bool needs_judge = std::find(spec.methods.begin(), spec.methods.end(), Method::hard) != spec.methods.end() ||
                           !c.eval.lambda_grid.empty();
  if (needs_judge) judge = make_judge(c);
  const ExperimentInputs in{pool, test, theta0, phi.adaptor, dec, tmpl, judge.get()};

  const fs::path partial = c.reports() / "results.partial.json";
  const ExperimentResult res = run_experiment(spec, in, partial);
  write_report(c, "results", res.to_json());
  fs::remove(partial);
  for (const auto& r : res.runs) log << r.method << ": mean " << r.mean << " std " << r.std << "\n";

  if (!c.eval.lambda_grid.empty()) {
    const auto rows = run_lambda_grid(spec, in, c.eval.lambda_grid);
    write_report(c, "lambda_grid", lambda_table(rows));
    log << "soft-vs-hard grid over " << rows.size() << " ratios written\n";
  }
  if (c.eval.similarity) {
    if (!fs::exists(at(c, artifacts::kThetaRefined)) || !fs::exists(at(c, artifacts::kAdaptorRefined))) {
      log << "similarity skipped: run refine first\n";
      return;
    }
    const TaskModel theta = TaskModel::load(at(c, artifacts::kThetaRefined));
    const Adaptor phi2 = Adaptor::load(at(c, artifacts::kAdaptorRefined)).adaptor;
    DecodeConfig greedy;
    greedy.mode = DecodeConfig::Mode::greedy;
    std::mt19937_64 rng(c.seed);
    std::vector<std::string> recon;
    int exact = 0;
    for (const auto& e : pool.labeled) {
      std::string r;
      try {
        r = invert(theta.embed(e.text), phi2, dec, tmpl, greedy, rng);
      } catch (const GenerationError&) {
      }
      exact += r == e.text;
      recon.push_back(std::move(r));
    }
    json j = similarity_distributions(pool, recon, theta).to_json();
    j["exact_reconstruction_rate"] = pool.empty() ? 0.0 : static_cast<double>(exact) / static_cast<double>(pool.size());
    write_report(c, "similarity", j);
  }
}

// --- report ------------------------------------------------------------------------

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

struct Series {
  std::string name;
  std::vector<double> values;
  std::vector<double> errors;
};

// Grouped (or stacked) bars over [0, 1]; one group per category.
std::string bar_chart(const std::string& title, const std::vector<std::string>& categories,
                      const std::vector<Series>& series, bool stacked) {
  static const char* colors[] = {"#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3"};
  const double W = 640, H = 360, left = 60, right = 140, top = 40, bottom = 50;
  const double pw = W - left - right, ph = H - top - bottom;
  const double group = categories.empty() ? pw : pw / static_cast<double>(categories.size());
  const double bw = stacked ? group * 0.6 : group * 0.8 / static_cast<double>(std::max<std::size_t>(1, series.size()));
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << escape(title) << "</text>\n";
  for (int t = 0; t <= 4; ++t) {
    const double y = top + ph - ph * t / 4.0;
    s << "<line x1=\"" << left << "\" x2=\"" << left + pw << "\" y1=\"" << y << "\" y2=\"" << y
      << "\" stroke=\"#ddd\"/><text x=\"" << left - 8 << "\" y=\"" << y + 4
      << "\" text-anchor=\"end\" font-size=\"11\">" << t * 0.25 << "</text>\n";
  }
  for (std::size_t c = 0; c < categories.size(); ++c) {
    const double gx = left + group * static_cast<double>(c);
    double base = 0.0;
    for (std::size_t k = 0; k < series.size(); ++k) {
      const double v = std::clamp(series[k].values[c], 0.0, 1.0);
      const double x = stacked ? gx + group * 0.2 : gx + group * 0.1 + bw * static_cast<double>(k);
      const double y0 = stacked ? base : 0.0;
      const double y = top + ph - ph * (y0 + v);
      s << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << bw << "\" height=\"" << ph * v << "\" fill=\""
        << colors[k % 5] << "\"/>\n";
      if (!stacked && c < series[k].errors.size()) {
        const double e = series[k].errors[c];
        const double cx = x + bw / 2;
        s << "<line x1=\"" << cx << "\" x2=\"" << cx << "\" y1=\"" << top + ph - ph * std::clamp(v + e, 0.0, 1.0)
          << "\" y2=\"" << top + ph - ph * std::clamp(v - e, 0.0, 1.0) << "\" stroke=\"black\"/>\n";
      }
      if (stacked) base += v;
    }
    s << "<text x=\"" << gx + group / 2 << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\" font-size=\"12\">"
      << escape(categories[c]) << "</text>\n";
  }
  for (std::size_t k = 0; k < series.size(); ++k) {
    const double y = top + 16.0 * static_cast<double>(k);
    s << "<rect x=\"" << W - right + 12 << "\" y=\"" << y << "\" width=\"12\" height=\"12\" fill=\"" << colors[k % 5]
      << "\"/><text x=\"" << W - right + 30 << "\" y=\"" << y + 10 << "\" font-size=\"12\">" << escape(series[k].name)
      << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

void cmd_report(const RunConfig& c, std::ostream& log) {
  const fs::path dir = c.reports();
  int written = 0;
  if (fs::exists(dir / "results.json")) {
    const json j = json::parse(read_file(dir / "results.json"));
    std::string csv = "method,dataset,K,n_seeds,mean,std\n";
    std::vector<std::string> cats;
    Series s{"accuracy", {}, {}};
    for (const auto& r : j.at("runs")) {
      const std::string k = r.at("K").is_string() ? r.at("K").get<std::string>() : std::to_string(r.at("K").get<int>());
      csv += r.at("method").get<std::string>() + "," + r.at("dataset").get<std::string>() + "," + k + "," +
             std::to_string(r.at("accs").size()) + "," + fmt(r.at("mean").get<double>()) + "," +
             fmt(r.at("std").get<double>()) + "\n";
      cats.push_back(r.at("method").get<std::string>());
      s.values.push_back(r.at("mean").get<double>());
      s.errors.push_back(r.at("std").get<double>());
    }
    std::string cmp = "a,b,mean_diff,p_value\n";
    for (const auto& row : j.at("comparisons")) {
      cmp += row.at("a").get<std::string>() + "," + row.at("b").get<std::string>() + "," +
             fmt(row.at("mean_diff").get<double>()) + "," +
             (row.at("p_value").is_null() ? std::string() : fmt(row.at("p_value").get<double>())) + "\n";
    }
    write_file_atomic(dir / "accuracy.csv", csv);
    write_file_atomic(dir / "comparisons.csv", cmp);
    write_file_atomic(dir / "accuracy.svg", bar_chart("Test accuracy (mean +- std over seeds)", cats, {s}, false));
    written += 3;
  }
  if (fs::exists(dir / "intrusion.json")) {
    const json j = json::parse(read_file(dir / "intrusion.json")).at("buckets");
    std::string csv = "bucket,none,inside,outside,total,p_none,p_inside,p_outside\n";
    std::vector<std::string> cats;
    std::vector<Series> series{{"none", {}, {}}, {"inside", {}, {}}, {"outside", {}, {}}};
    for (const auto& [bucket, row] : j.items()) {
      const json& n = row.at("counts");
      const json& p = row.at("proportions");
      csv += bucket + "," + std::to_string(n.at("none").get<int>()) + "," + std::to_string(n.at("inside").get<int>()) +
             "," + std::to_string(n.at("outside").get<int>()) + "," + std::to_string(row.at("total").get<int>()) + "," +
             fmt(p.at("none").get<double>()) + "," + fmt(p.at("inside").get<double>()) + "," +
             fmt(p.at("outside").get<double>()) + "\n";
      cats.push_back(bucket);
      for (auto& s : series) s.values.push_back(p.at(s.name).get<double>());
    }
    write_file_atomic(dir / "intrusion.csv", csv);
    write_file_atomic(dir / "intrusion.svg", bar_chart("Intrusion proportions by mixing ratio", cats, series, true));
    written += 2;
  }
  if (fs::exists(dir / "lambda_grid.json")) {
    const json j = json::parse(read_file(dir / "lambda_grid.json"));
    std::string csv = "lambda,soft_mean,soft_std,hard_mean,hard_std,p_value\n";
    std::vector<std::string> cats;
    std::vector<Series> series{{"soft", {}, {}}, {"hard", {}, {}}};
    for (const auto& row : j) {
      csv += fmt(row.at("lambda").get<double>()) + "," + fmt(row.at("soft").at("mean").get<double>()) + "," +
             fmt(row.at("soft").at("std").get<double>()) + "," + fmt(row.at("hard").at("mean").get<double>()) + "," +
             fmt(row.at("hard").at("std").get<double>()) + "," +
             (row.at("p_value").is_null() ? std::string() : fmt(row.at("p_value").get<double>())) + "\n";
      char buf[16];
      std::snprintf(buf, sizeof buf, "%.1f", row.at("lambda").get<double>());
      cats.push_back(buf);
      for (auto& s : series) {
        s.values.push_back(row.at(s.name).at("mean").get<double>());
        s.errors.push_back(row.at(s.name).at("std").get<double>());
      }
    }
    write_file_atomic(dir / "lambda_grid.csv", csv);
    write_file_atomic(dir / "lambda_grid.svg", bar_chart("Soft versus hard labels at fixed ratio", cats, series, false));
    written += 2;
  }
  if (written == 0) {
    log << "warning: no results found under " << dir.string() << "; nothing to report\n";
  } else {
    log << "wrote " << written << " report files to " << dir.string() << "\n";
  }
}

}  // namespace

void dispatch(const std::string& subcommand, const RunConfig& cfg, std::ostream& log) {
  if (subcommand == "make-toy") return cmd_make_toy(cfg, log);
  if (subcommand == "pretrain") return cmd_pretrain(cfg, log);
  if (subcommand == "align") return cmd_align(cfg, log);
  if (subcommand == "refine") return cmd_refine(cfg, log);
  if (subcommand == "mix") return cmd_mix(cfg, log);
  if (subcommand == "judge") return cmd_judge(cfg, log);
  if (subcommand == "relabel") return cmd_relabel(cfg, log);
  if (subcommand == "eval") return cmd_eval(cfg, log);
  if (subcommand == "report") return cmd_report(cfg, log);
  throw ConfigError("unknown subcommand '" + subcommand + "'");
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Embedding-mixup text augmentation through decoder inversion", "inversedmix"};
  app.require_subcommand(1, 1);
  app.fallthrough();
  std::string config_path;
  std::vector<std::string> sets;
  std::optional<std::string> output_dir;
  std::optional<std::uint64_t> seed;
  std::optional<double> alpha, lambda;
  std::optional<int> num_samples;
  std::optional<std::string> pair_policy, decode;
  app.add_option("--config", config_path, "Path to the JSON run configuration")->required();
  app.add_option("--set", sets, "Override a config key, e.g. --set mix.alpha=0.2");
  app.add_option("--output-dir", output_dir, "Override output_dir");
  app.add_option("--seed", seed, "Override the run seed");
  app.add_option("--alpha", alpha, "Beta concentration for the mixing ratio");
  app.add_option("--lambda", lambda, "Fixed mixing ratio in [0, 1]");
  app.add_option("--num-samples", num_samples, "Number of synthetic samples");
  app.add_option("--pair-policy", pair_policy, "uniform_pairs or cross_class_only");
  app.add_option("--decode", decode, "greedy or sample");
  static const std::map<std::string, std::string> help{
      {"make-toy", "Write the synthetic three-class corpora to the data paths"},
      {"pretrain", "Build the vocabulary, initialise theta and pretrain the local decoder"},
      {"align", "Stage 1: align the adaptor on unlabeled text"},
      {"refine", "Stage 2: alternate classifier and adaptor training on the few-shot split"},
      {"mix", "Stage 3: mix embedding pairs and invert them into synthetic samples"},
      {"judge", "Classify manifold intrusion of synthetic samples"},
      {"relabel", "Replace soft labels with judge-assigned hard labels"},
      {"eval", "Run the multi-seed comparison, lambda grid and similarity analysis"},
      {"report", "Render tables and charts from the stored reports"}};
  for (const auto& name : subcommands()) app.add_subcommand(name, help.at(name));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kExitConfigError;
  }
  const std::string sub = app.get_subcommands().front()->get_name();

  RunConfig cfg;
  try {
    const fs::path path(config_path);
    if (!fs::exists(path)) throw ConfigError("config file not found: " + config_path);
    json j;
    try {
      j = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
      throw ConfigError(config_path + ": " + e.what());
    }
    for (const auto& s : sets) apply_override(j, s);
    if (output_dir) j["output_dir"] = *output_dir;
    if (seed) j["seed"] = *seed;
    if (alpha) apply_override(j, "mix.alpha=" + json(*alpha).dump());
    if (lambda) apply_override(j, "mix.lambda=" + json(*lambda).dump());
    if (num_samples) apply_override(j, "mix.num_samples=" + std::to_string(*num_samples));
    if (pair_policy) apply_override(j, "mix.pair_policy=" + json(*pair_policy).dump());
    if (decode) apply_override(j, "mix.decode=" + json(*decode).dump());
    cfg = config_from_json(j, path.parent_path(), sub != "make-toy");
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const Error& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfigError;
  }

  try {
    dispatch(sub, cfg, err);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const DependencyError& e) {
    err << sub << " failed: " << e.what() << "\n";
    return kExitStageFailure;
  } catch (const std::exception& e) {
    err << sub << " failed: " << e.what() << "\n";
    return kExitStageFailure;
  }
  return kExitOk;
}

}  // namespace invmix
