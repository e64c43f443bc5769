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

// Microbenchmarks for the hot paths: autodiff matmul, teacher-forced decoder
// loss with gradients, greedy inversion, mixing and the exact Wilcoxon test.

#include "invmix/adaptor.hpp"
#include "invmix/autograd.hpp"
#include "invmix/eval.hpp"
#include "invmix/mixup.hpp"
#include "invmix/tiny_decoder.hpp"
#include "invmix/toy.hpp"

#include <benchmark/benchmark.h>

#include <random>

namespace invmix {
namespace {

const PromptTemplate& tmpl() {
  static const PromptTemplate t = PromptCatalog::defaults().get(PromptCatalog::kInversion);
  return t;
}

struct Fixture {
  Corpus corpus = toy::make_unlabeled(40, 3);
  Vocabulary vocab;
  TinyDecoder decoder;
  TaskModel theta;
  Adaptor phi{AdaptorConfig{32, 32, 1, 0.02, true, 4}};

  Fixture() {
    std::vector<std::string> texts = corpus.texts();
    texts.push_back(tmpl().prefix());
    texts.push_back(tmpl().suffix());
    texts.push_back(tmpl().closing());
    vocab = Vocabulary::build(texts);
    decoder = TinyDecoder(DecoderConfig{32, 2, 64, 48, 5}, vocab);
    theta = TaskModel(EncoderConfig{32, 1, 64, 24, Pooling::mean, 6}, vocab, toy::labels(), 32);
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<int>(state.range(0));
  const ag::Matrix a = ag::Matrix::Random(n, n), b = ag::Matrix::Random(n, n);
  for (auto _ : state) {
    ag::Graph g;
    const ag::Var x = g.input(a, true);
    g.backward(g.sum(g.matmul(x, g.input(b))));
    benchmark::DoNotOptimize(g.grad(x).data());
  }
}
BENCHMARK(BM_Matmul)->Arg(16)->Arg(64);

void BM_GenLossBackward(benchmark::State& state) {
  const Fixture& f = fixture();
  TaskModel theta = f.theta;
  Adaptor phi = f.phi;
  const std::string text = f.corpus.unlabeled[0].text;
  for (auto _ : state) {
    ag::Graph g;
    g.backward(gen_loss(g, text, theta, false, phi, true, f.decoder, tmpl()));
  }
}
BENCHMARK(BM_GenLossBackward);

void BM_GreedyInvert(benchmark::State& state) {
  const Fixture& f = fixture();
  const Embedding h = f.theta.embed(f.corpus.unlabeled[1].text);
  const DecodeConfig greedy{DecodeConfig::Mode::greedy, 1.0, 1.0, 20};
  std::mt19937_64 rng(1);
  for (auto _ : state) {
    try {
      benchmark::DoNotOptimize(invert(h, f.phi, f.decoder, tmpl(), greedy, rng));
    } catch (const GenerationError&) {
    }
  }
}
BENCHMARK(BM_GreedyInvert);

void BM_MixEmbeddings(benchmark::State& state) {
  const Embedding a = Embedding::Random(768), b = Embedding::Random(768);
  for (auto _ : state) benchmark::DoNotOptimize(mix_embeddings(a, b, 0.3).h_tilde.data());
}
BENCHMARK(BM_MixEmbeddings);

void BM_WilcoxonExact(benchmark::State& state) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> noise(0.1, 1.0);
  std::vector<double> a(12), b(12, 0.0);
  for (auto& x : a) x = noise(rng);
  for (auto _ : state) benchmark::DoNotOptimize(wilcoxon_signed_rank(a, b).p_value);
}
BENCHMARK(BM_WilcoxonExact);

}  // namespace
}  // namespace invmix

BENCHMARK_MAIN();
