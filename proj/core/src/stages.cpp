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
#include "invmix/stages.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace invmix {

using nlohmann::json;

std::string_view to_string(StageKind s) { return s == StageKind::align ? "align" : "refine"; }

void RefineSchedule::validate() const {
  if (outer_rounds < 1) throw DomainError("refine: outer_rounds must be >= 1");
  if (cls_epochs_per_round < 0 || gen_epochs_per_round < 0) throw DomainError("refine: epoch counts must be >= 0");
}

json StageReport::to_json() const {
  json phases_j = json::array();
  for (const auto& p : phases) {
    phases_j.push_back({{"phase", p.phase},
                        {"round", p.round},
                        {"theta", {p.theta_before, p.theta_after}},
                        {"phi", {p.phi_before, p.phi_after}},
                        {"psi", {p.psi_before, p.psi_after}}});
  }
  json j{{"stage", to_string(stage)},
         {"gen_loss", gen_loss},
         {"cls_loss", cls_loss},
         {"initial_gen_loss", initial_gen_loss},
         {"final_gen_loss", final_gen_loss},
         {"wall_seconds", wall_seconds},
         {"seed", seed},
         {"phases", phases_j},
         {"checkpoints", checkpoints}};
  if (stage == StageKind::refine) j["drift_gen_loss"] = drift_gen_loss;
  if (!abort_reason.empty()) j["abort_reason"] = abort_reason;
  return j;
}

namespace {

struct Clock {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

struct Sample {
  Embedding h;
  std::string text;
};

std::vector<Sample> embed_all(std::span<const std::string> texts, const TaskModel& theta) {
  std::vector<Sample> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back({theta.embed(t), t});
  return out;
}

double eval_loss(const std::vector<Sample>& data, const Adaptor& phi, const DecoderBackend& backend,
                 const PromptTemplate& tmpl) {
  if (data.empty()) return 0.0;
  double total = 0.0;
  for (const auto& s : data)
    total += gen_loss(build_prompt(tmpl, backend.vocabulary(), phi.adapt(s.h), s.text, backend.max_context()), backend);
  return total / static_cast<double>(data.size());
}

// One epoch of adaptor training on precomputed embeddings; theta stays frozen.
double adaptor_epoch(const std::vector<Sample>& data, Adaptor& phi, Adam& opt, const DecoderBackend& backend,
                     const PromptTemplate& tmpl, int batch_size, std::mt19937_64& rng) {
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t bs = static_cast<std::size_t>(std::max(1, batch_size));
  double total = 0.0;
  for (std::size_t start = 0; start < order.size(); start += bs) {
    const std::size_t end = std::min(order.size(), start + bs);
    opt.zero_grad();
    double batch = 0.0;
    for (std::size_t i = start; i < end; ++i) {
      const Sample& s = data[order[i]];
      ag::Graph g;
      ag::Var soft = phi.adapt(g, g.input(s.h, false), true);
      SoftPrompt prompt = build_prompt(tmpl, backend.vocabulary(), g.value(soft), s.text, backend.max_context());
      ag::Var loss = gen_loss(g, prompt, soft, backend);
      batch += g.scalar(loss);
      g.backward(loss);
    }
    if (!std::isfinite(batch)) return batch;
    opt.step(1.0 / static_cast<double>(end - start));
    total += batch;
  }
  return data.empty() ? 0.0 : total / static_cast<double>(data.size());
}

PhaseRecord begin_phase(std::string name, int round, const TaskModel& theta, const Adaptor& phi,
                        const DecoderBackend& backend) {
  PhaseRecord r;
  r.phase = std::move(name);
  r.round = round;
  r.theta_before = theta.checksum();
  r.phi_before = phi.checksum();
  r.psi_before = backend.parameter_checksum();
  return r;
}

void end_phase(PhaseRecord& r, const TaskModel& theta, const Adaptor& phi, const DecoderBackend& backend) {
  r.theta_after = theta.checksum();
  r.phi_after = phi.checksum();
  r.psi_after = backend.parameter_checksum();
  if (r.psi_after != r.psi_before) throw TrainingError("decoder parameters changed during phase " + r.phase);
  if (r.phase == "cls" && r.phi_after != r.phi_before) throw TrainingError("adaptor changed during phase cls");
  if (r.phase != "cls" && r.theta_after != r.theta_before) throw TrainingError("encoder changed during phase " + r.phase);
}

}  // namespace

double mean_gen_loss(std::span<const std::string> texts, const TaskModel& theta, const Adaptor& phi,
                     const DecoderBackend& backend, const PromptTemplate& tmpl) {
  return eval_loss(embed_all(texts, theta), phi, backend, tmpl);
}

AlignResult align_adaptor(const Corpus& unlabeled, const TaskModel& theta, Adaptor phi, const DecoderBackend& backend,
                          const PromptTemplate& tmpl, const AlignConfig& cfg) {
  if (unlabeled.kind != CorpusKind::unlabeled) throw DomainError("align_adaptor expects an unlabeled corpus");
  Clock clock;
  StageReport rep;
  rep.stage = StageKind::align;
  rep.seed = cfg.seed;

  const std::vector<std::string> texts = unlabeled.texts();
  const std::vector<Sample> data = embed_all(texts, theta);
  PhaseRecord phase = begin_phase("align", 0, theta, phi, backend);
  rep.initial_gen_loss = eval_loss(data, phi, backend, tmpl);

  Adam opt(phi.parameters(), cfg.adam);
  std::mt19937_64 rng(cfg.seed);
  int over = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double loss = adaptor_epoch(data, phi, opt, backend, tmpl, cfg.batch_size, rng);
    rep.gen_loss.push_back(loss);
    std::string why;
    if (!std::isfinite(loss)) {
      why = "non-finite gen_loss at epoch " + std::to_string(epoch);
    } else if (loss > cfg.divergence_factor * rep.initial_gen_loss) {
      if (++over >= cfg.divergence_patience) {
        std::ostringstream msg;
        msg << "gen_loss diverged: " << loss << " > " << cfg.divergence_factor << " x initial "
            << rep.initial_gen_loss << " for " << over << " epochs (lr=" << cfg.adam.lr << ")";
        why = msg.str();
      }
    } else {
      over = 0;
    }
    if (!why.empty()) {
      end_phase(phase, theta, phi, backend);
      rep.phases.push_back(phase);
      rep.abort_reason = why;
      rep.wall_seconds = clock.seconds();
      throw StageAborted("align: " + why, std::move(rep));
    }
  }
  rep.final_gen_loss = cfg.epochs > 0 ? eval_loss(data, phi, backend, tmpl) : rep.initial_gen_loss;
  end_phase(phase, theta, phi, backend);
  rep.phases.push_back(phase);
  rep.wall_seconds = clock.seconds();
  return {std::move(phi), std::move(rep)};
}

RefineResult refine(const Corpus& task, TaskModel theta, Adaptor phi, const DecoderBackend& backend,
                    const PromptTemplate& tmpl, const RefineConfig& cfg) {
  cfg.schedule.validate();
  if (task.kind != CorpusKind::task || task.empty()) throw DomainError("refine expects a non-empty labeled task corpus");
  Clock clock;
  StageReport rep;
  rep.stage = StageKind::refine;
  rep.seed = cfg.cls.seed;

  const std::vector<std::string> texts = task.texts();
  const std::vector<TrainingItem> items = training_items(task);
  rep.initial_gen_loss = mean_gen_loss(texts, theta, phi, backend, tmpl);

  Adam gen_opt(phi.parameters(), cfg.gen.adam);
  std::mt19937_64 gen_rng(cfg.gen.seed);
  auto abort = [&](const std::string& why) {
    rep.abort_reason = why;
    rep.wall_seconds = clock.seconds();
    throw StageAborted("refine: " + why, rep);
  };

  for (int round = 0; round < cfg.schedule.outer_rounds; ++round) {
    PhaseRecord cls = begin_phase("cls", round, theta, phi, backend);
    ClassifierSchedule sched = cfg.cls;
    sched.epochs = cfg.schedule.cls_epochs_per_round;
    sched.seed = cfg.cls.seed + static_cast<std::uint64_t>(round);
    try {
      TrainLog log = train_classifier(theta, items, sched);
      rep.cls_loss.insert(rep.cls_loss.end(), log.epoch_loss.begin(), log.epoch_loss.end());
    } catch (const TrainingError& e) {
      abort("phase cls, round " + std::to_string(round) + ": " + e.what());
    }
    end_phase(cls, theta, phi, backend);
    rep.phases.push_back(cls);

    PhaseRecord gen = begin_phase("gen", round, theta, phi, backend);
    const std::vector<Sample> data = embed_all(texts, theta);
    rep.drift_gen_loss.push_back(eval_loss(data, phi, backend, tmpl));
    for (int e = 0; e < cfg.schedule.gen_epochs_per_round; ++e) {
      const double loss = adaptor_epoch(data, phi, gen_opt, backend, tmpl, cfg.gen.batch_size, gen_rng);
      if (!std::isfinite(loss)) abort("phase gen, round " + std::to_string(round) + ": non-finite gen_loss");
      rep.gen_loss.push_back(loss);
    }
    end_phase(gen, theta, phi, backend);
    rep.phases.push_back(gen);
  }
  rep.final_gen_loss = mean_gen_loss(texts, theta, phi, backend, tmpl);
  rep.wall_seconds = clock.seconds();
  return {std::move(theta), std::move(phi), std::move(rep)};
}

}  // namespace invmix
