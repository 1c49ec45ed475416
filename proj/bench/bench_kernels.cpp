/*
 * Copyright 2026 The PRISM Shape Authors
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


// Batched OpenMP kernels against the serial tape reference they are tested
// against. Thread count is the benchmark argument for the parallel cases.

#include <benchmark/benchmark.h>
#include <omp.h>

#include <vector>

#include "prism/fisher.hpp"
#include "prism/gaussian_field.hpp"
#include "prism/network.hpp"
#include "prism/rng.hpp"

using namespace prism;

namespace {

GaussianFieldParams bench_field() { return init_params(NetArch::field(2, 3, 64, 4, 3e-3), 1); }

std::vector<FieldQuery> bench_queries(int n) {
  Rng rng(2, 0);
  std::vector<FieldQuery> q(static_cast<std::size_t>(n));
  for (auto& x : q) {
    x.p = Vec(2);
    x.p << rng.uniform(-1, 1), rng.uniform(-1, 1);
    x.t = rng.uniform();
  }
  return q;
}

std::vector<ShapeSample> bench_samples(int n) {
  std::vector<ShapeSample> out;
  Rng rng(3, 0);
  for (const auto& q : bench_queries(n)) {
    ShapeSample s;
    s.p = q.p;
    s.t = q.t;
    s.d = Vec(2);
    s.d << rng.normal() * 0.1, rng.normal() * 0.1;
    out.push_back(s);
  }
  return out;
}

void BM_forward_tape(benchmark::State& state) {
  const auto params = bench_field();
  const auto queries = bench_queries(512);
  for (auto _ : state) {
    for (const auto& q : queries) {
      ad::Tape tape;
      std::vector<ad::Var> p{tape.constant(q.p(0)), tape.constant(q.p(1))};
      benchmark::DoNotOptimize(reference::record_field(tape, params, p, tape.constant(q.t)));
    }
  }
  state.SetItemsProcessed(state.iterations() * 512);
}
BENCHMARK(BM_forward_tape)->Unit(benchmark::kMillisecond)->UseRealTime();

void BM_forward_batch(benchmark::State& state) {
  omp_set_num_threads(static_cast<int>(state.range(0)));
  const auto params = bench_field();
  const auto queries = bench_queries(512);
  for (auto _ : state) benchmark::DoNotOptimize(forward_field_batch(params, queries));
  state.SetItemsProcessed(state.iterations() * 512);
}
BENCHMARK(BM_forward_batch)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();

void BM_jet_tape(benchmark::State& state) {
  const auto params = bench_field();
  const auto queries = bench_queries(128);
  for (auto _ : state) {
    for (const auto& q : queries) benchmark::DoNotOptimize(reference::field_jet_tape(params, q.p, q.t));
  }
  state.SetItemsProcessed(state.iterations() * 128);
}
BENCHMARK(BM_jet_tape)->Unit(benchmark::kMillisecond)->UseRealTime();

void BM_jet_batch(benchmark::State& state) {
  omp_set_num_threads(static_cast<int>(state.range(0)));
  const auto params = bench_field();
  const auto queries = bench_queries(128);
  for (auto _ : state) benchmark::DoNotOptimize(field_jet_batch(params, queries));
  state.SetItemsProcessed(state.iterations() * 128);
}
BENCHMARK(BM_jet_batch)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();

void BM_nll_grad_tape(benchmark::State& state) {
  const auto params = bench_field();
  const auto batch = bench_samples(128);
  for (auto _ : state) {
    ad::Tape tape;
    std::vector<ad::Var> w;
    const ad::Var loss = nll_loss(tape, params, batch, &w);
    benchmark::DoNotOptimize(tape.backward(loss));
  }
  state.SetItemsProcessed(state.iterations() * 128);
}
BENCHMARK(BM_nll_grad_tape)->Unit(benchmark::kMillisecond)->UseRealTime();

void BM_nll_grad_batch(benchmark::State& state) {
  omp_set_num_threads(static_cast<int>(state.range(0)));
  const auto params = bench_field();
  const auto batch = bench_samples(128);
  std::vector<const ShapeSample*> ptrs;
  for (const auto& s : batch) ptrs.push_back(&s);
  std::vector<double> grad(params.weights.size());
  for (auto _ : state) benchmark::DoNotOptimize(loss_and_grad(params, ptrs, {0.0, 1.0}, grad));
  state.SetItemsProcessed(state.iterations() * 128);
}
BENCHMARK(BM_nll_grad_batch)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();

FieldJet bench_jet() {
  const auto params = bench_field();
  Vec p(2);
  p << 0.3, -0.4;
  return field_jet(params, p, 0.5);
}

void BM_mc_fisher_serial(benchmark::State& state) {
  const auto jet = bench_jet();
  for (auto _ : state) benchmark::DoNotOptimize(mc_fisher_serial(jet, 1 << 18, 5));
  state.SetItemsProcessed(state.iterations() * (1 << 18));
}
BENCHMARK(BM_mc_fisher_serial)->Unit(benchmark::kMillisecond)->UseRealTime();

void BM_mc_fisher(benchmark::State& state) {
  omp_set_num_threads(static_cast<int>(state.range(0)));
  const auto jet = bench_jet();
  for (auto _ : state) benchmark::DoNotOptimize(mc_fisher(jet, 1 << 18, 5));
  state.SetItemsProcessed(state.iterations() * (1 << 18));
}
BENCHMARK(BM_mc_fisher)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();

}  // namespace

BENCHMARK_MAIN();
