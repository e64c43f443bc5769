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
#include "invmix/mixup.hpp"

#include "invmix/errors.hpp"

#include <array>
#include <cmath>
#include <sstream>
#include <thread>

namespace invmix {

double sample_lambda(double alpha, std::mt19937_64& rng) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw DomainError("Beta concentration must be > 0");
  std::gamma_distribution<double> gamma(alpha, 1.0);
  for (;;) {
    const double x = gamma(rng);
    const double y = gamma(rng);
    if (x + y > 0.0) return x / (x + y);
  }
}

MixedEmbedding mix_embeddings(const Embedding& h_i, const Embedding& h_j, double lambda, std::string source_i,
                              std::string source_j) {
  if (h_i.size() != h_j.size()) {
    throw ShapeError("mix_embeddings: lengths " + std::to_string(h_i.size()) + " and " + std::to_string(h_j.size()));
  }
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw DomainError("mixing ratio must lie in [0, 1]");
  return {lambda * h_i + (1.0 - lambda) * h_j, lambda, std::move(source_i), std::move(source_j)};
}

SoftLabel mix_labels(std::span<const double> y_i, std::span<const double> y_j, double lambda) {
  if (y_i.size() != y_j.size()) {
    throw ShapeError("mix_labels: K " + std::to_string(y_i.size()) + " vs " + std::to_string(y_j.size()));
  }
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw DomainError("mixing ratio must lie in [0, 1]");
  std::vector<double> p(y_i.size());
  for (std::size_t k = 0; k < p.size(); ++k) p[k] = lambda * y_i[k] + (1.0 - lambda) * y_j[k];
  return SoftLabel::from(std::move(p));
}

std::string_view to_string(PairPolicy p) {
  return p == PairPolicy::uniform_pairs ? "uniform_pairs" : "cross_class_only";
}

PairPolicy pair_policy_from_string(std::string_view s) {
  if (s == "uniform_pairs") return PairPolicy::uniform_pairs;
  if (s == "cross_class_only") return PairPolicy::cross_class_only;
  throw DomainError("unknown pair policy '" + std::string(s) + "'");
}

void MixConfig::validate() const {
  if (!(alpha > 0.0)) throw DomainError("mix.alpha must be > 0");
  if (fixed_lambda && !(*fixed_lambda >= 0.0 && *fixed_lambda <= 1.0)) throw DomainError("mix.lambda must be in [0, 1]");
  if (num_samples < 0) throw DomainError("mix.num_samples must be >= 0");
  if (retries < 1) throw DomainError("mix.retries must be >= 1");
  if (threads < 1) throw DomainError("mix.threads must be >= 1");
}

namespace {

std::uint64_t sample_seed(std::uint64_t seed, std::size_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

struct Slot {
  std::optional<SyntheticExample> sample;
  std::string warning;
};

}  // namespace

MixResult generate_augmented_set(const Corpus& task, const TaskModel& theta, const Adaptor& phi,
                                 const DecoderBackend& backend, const PromptTemplate& tmpl, const MixConfig& cfg) {
  cfg.validate();
  if (task.kind != CorpusKind::task || !task.label_space) throw DomainError("mixing needs a labeled task corpus");
  const LabelSpace& ls = *task.label_space;
  MixResult result;
  result.augmented = Corpus::make_augmented(ls, {});
  if (cfg.num_samples == 0) return result;
  const auto& ex = task.labeled;
  if (ex.size() < 2) throw InsufficientDataError("task set", static_cast<int>(ex.size()), 2);

  std::vector<Embedding> h;
  h.reserve(ex.size());
  for (const auto& e : ex) h.push_back(theta.embed(e.text));

  std::vector<std::pair<std::size_t, std::size_t>> cross;
  if (cfg.pair_policy == PairPolicy::cross_class_only) {
    for (std::size_t i = 0; i < ex.size(); ++i)
      for (std::size_t j = 0; j < ex.size(); ++j)
        if (ex[i].class_id != ex[j].class_id) cross.emplace_back(i, j);
    if (cross.empty()) throw DomainError("cross_class_only needs at least two classes in the task set");
  }

  const std::size_t n = static_cast<std::size_t>(cfg.num_samples);
  std::vector<Slot> slots(n);
  auto work = [&](std::size_t idx) {
    std::mt19937_64 rng(sample_seed(cfg.seed, idx));
    const double lambda = cfg.fixed_lambda ? *cfg.fixed_lambda : sample_lambda(cfg.alpha, rng);
    std::size_t i = 0, j = 0;
    if (cfg.pair_policy == PairPolicy::cross_class_only) {
      std::tie(i, j) = cross[std::uniform_int_distribution<std::size_t>(0, cross.size() - 1)(rng)];
    } else {
      std::uniform_int_distribution<std::size_t> pick(0, ex.size() - 1);
      i = pick(rng);
      do j = pick(rng); while (j == i);
    }
    MixedEmbedding m = mix_embeddings(h[i], h[j], lambda, ex[i].id, ex[j].id);
    std::string last_error;
    for (int attempt = 0; attempt < cfg.retries; ++attempt) {
      try {
        std::string text = invert(m.h_tilde, phi, backend, tmpl, cfg.decode, rng);
        slots[idx].sample = SyntheticExample{"m" + std::to_string(idx), std::move(text),
                                             mix_labels(ex[i].onehot, ex[j].onehot, lambda), std::nullopt, lambda,
                                             ex[i].id, ex[j].id};
        return;
      } catch (const GenerationError& e) {
        last_error = e.what();
      }
    }
    slots[idx].warning = "sample " + std::to_string(idx) + " (" + ex[i].id + ", " + ex[j].id + ") skipped after " +
                         std::to_string(cfg.retries) + " attempts: " + last_error;
  };

  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(cfg.threads), n);
  if (workers <= 1) {
    for (std::size_t idx = 0; idx < n; ++idx) work(idx);
  } else {
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t idx = w; idx < n; idx += workers) work(idx);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    pool.clear();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  for (auto& s : slots) {
    if (s.sample) {
      result.augmented.synthetic.push_back(std::move(*s.sample));
    } else {
      ++result.skipped;
      result.warnings.push_back(std::move(s.warning));
    }
  }
  if (result.augmented.synthetic.empty()) {
    throw GenerationError("every one of " + std::to_string(n) + " mixed samples failed to generate",
                          result.warnings.empty() ? "" : result.warnings.back());
  }
  return result;
}

std::vector<TrainingItem> union_items(const Corpus& task, const Corpus& augmented, LabelMode mode) {
  std::vector<TrainingItem> items = training_items(task);
  std::vector<TrainingItem> extra = training_items(augmented, mode);
  items.insert(items.end(), std::make_move_iterator(extra.begin()), std::make_move_iterator(extra.end()));
  return items;
}

}  // namespace invmix
