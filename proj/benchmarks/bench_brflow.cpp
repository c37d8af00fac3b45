// Copyright 2026 The brflow Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <benchmark/benchmark.h>

#include <numeric>
#include <random>
#include <vector>

#include "brflow/best_response.hpp"
#include "brflow/flow.hpp"
#include "brflow/game.hpp"
#include "brflow/mdp.hpp"
#include "brflow/measures.hpp"
#include "brflow/objectives.hpp"

namespace brflow {
namespace {

BanditSpec bandit() {
  return BanditSpec{{0.0, 1.0}, {0.5, 0.5}, 0.1, FeatureMap(Activation::kTanh, 1, {1.0, -1.0}), {}, {}};
}

void BM_BestResponseGrid(benchmark::State& state) {
  const Grid g(-10.0, 10.0, static_cast<std::size_t>(state.range(0)));
  auto ref = ReferenceMeasure::gaussian(1.0, g);
  BanditObjective obj(bandit());
  auto nu = gaussian_density(g, 1.0, 0.7);
  for (auto _ : state) benchmark::DoNotOptimize(br_grid(obj, ref, 60.0, nu));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_BestResponseGrid)->RangeMultiplier(4)->Range(256, 16384)->Complexity();

void BM_W1Grid(benchmark::State& state) {
  const Grid g(-10.0, 10.0, static_cast<std::size_t>(state.range(0)));
  auto p = gaussian_density(g, 0.0, 1.0);
  auto q = gaussian_density(g, 0.5, 2.0);
  for (auto _ : state) benchmark::DoNotOptimize(w1_grid(p, q));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_W1Grid)->RangeMultiplier(4)->Range(256, 65536)->Complexity();

void BM_W1Particles(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  auto a = sample_density(gaussian_density(Grid::standard(), 0.0, 1.0), n, 1);
  auto b = sample_density(gaussian_density(Grid::standard(), 1.0, 1.5), n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(w1_particles_1d(a, b));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_W1Particles)->RangeMultiplier(8)->Range(512, 262144)->Complexity(benchmark::oNLogN);

// Cost per Langevin step: 1000 chains of 100 steps each.
void BM_LangevinBandit(benchmark::State& state) {
  auto ref = ReferenceMeasure::gaussian(1.0);
  BanditObjective obj(bandit());
  auto ens = sample_reference(ref, 1000, 3);
  auto lin = obj.linearize(ens);
  LangevinConfig cfg{1e-3, 100, 7, static_cast<std::size_t>(state.range(0))};
  std::vector<std::size_t> all(ens.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  for (auto _ : state) {
    std::vector<double> pos(ens.positions().begin(), ens.positions().end());
    run_langevin_chains(*lin, ref, 60.0, cfg, 0, pos, 1, all);
    benchmark::DoNotOptimize(pos.data());
  }
  state.SetItemsProcessed(state.iterations() * 1000 * 100);
}
BENCHMARK(BM_LangevinBandit)->Arg(1)->Arg(0)->Unit(benchmark::kMillisecond);

void BM_MdpPolicyValue(benchmark::State& state) {
  auto spec = make_random_mdp(static_cast<std::size_t>(state.range(0)), 4, 11);
  auto nu = gaussian_density(Grid::standard(), 0.3, 1.0);
  auto pi = policy_from_params(spec, nu);
  for (auto _ : state) benchmark::DoNotOptimize(policy_value(spec, pi));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_MdpPolicyValue)->RangeMultiplier(4)->Range(4, 1024)->Complexity();

void BM_MdpFlatDerivative(benchmark::State& state) {
  auto spec = make_random_mdp(static_cast<std::size_t>(state.range(0)), 4, 12);
  MdpObjective obj(spec);
  auto nu = gaussian_density(Grid::standard(), 0.3, 1.0);
  for (auto _ : state) {
    auto lin = obj.linearize(nu);
    const double x = 0.4;
    benchmark::DoNotOptimize(lin->delta(std::span<const double>(&x, 1)));
  }
}
BENCHMARK(BM_MdpFlatDerivative)->RangeMultiplier(4)->Range(4, 256);

void BM_SoftValueIteration(benchmark::State& state) {
  auto spec = make_random_mdp(static_cast<std::size_t>(state.range(0)), 4, 13, {.discount = 0.9, .tau = 0.1});
  for (auto _ : state) benchmark::DoNotOptimize(soft_value_iteration(spec, 1e-10));
}
BENCHMARK(BM_SoftValueIteration)->RangeMultiplier(4)->Range(4, 256)->Unit(benchmark::kMillisecond);

void BM_PicardBandit(benchmark::State& state) {
  auto ref = ReferenceMeasure::gaussian(1.0);
  BanditObjective obj(bandit());
  for (auto _ : state) benchmark::DoNotOptimize(picard_fixed_point(obj, ref, 62.0, 1e-12));
}
BENCHMARK(BM_PicardBandit)->Unit(benchmark::kMillisecond);

void BM_CoupledFlowStep(benchmark::State& state) {
  auto game = two_player_bandit({1.0, -1.0, -1.0, 1.0}, {0.5, 0.5}, {0.5, 0.5},
                                FeatureMap(Activation::kTanh, 1, {1.0, -1.0}),
                                FeatureMap(Activation::kTanh, 1, {1.0, -1.0}), 0.1, 0.1);
  GameConfig cfg{120.0, 120.0, 1.0, 1.0, ReferenceMeasure::gaussian(1.0), ReferenceMeasure::gaussian(1.0)};
  auto nu = gaussian_density(Grid::standard(), 1.0, 1.0);
  auto mu = gaussian_density(Grid::standard(), -1.0, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(coupled_flow_grid(*game, cfg, nu, mu, 0.1, 10));
  state.SetItemsProcessed(state.iterations() * 10);
}
BENCHMARK(BM_CoupledFlowStep)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace brflow

BENCHMARK_MAIN();
