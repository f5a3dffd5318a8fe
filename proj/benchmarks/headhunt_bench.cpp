#include <benchmark/benchmark.h>

#include <random>

#include "headhunt/locator.hpp"
#include "headhunt/saliency.hpp"
#include "headhunt/scorer.hpp"
#include "headhunt/synthlab.hpp"

using namespace headhunt;

namespace {

SampleMatrix gaussian(std::uint64_t seed, int rows, int cols, double shift) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> z(shift, 1.0);
  SampleMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = z(gen);
  return m;
}

}  // namespace

// One saliency cell at the recovery scale: 20 + 20 samples, d_h = 32.
static void BM_Lda(benchmark::State& state) {
  const auto n = gaussian(1, 20, static_cast<int>(state.range(0)), 0.0);
  const auto a = gaussian(2, 20, static_cast<int>(state.range(0)), 0.3);
  for (auto _ : state) benchmark::DoNotOptimize(lda_score(n, a));
}
BENCHMARK(BM_Lda)->Arg(32)->Arg(128);

static void BM_SymmetrizedKl(benchmark::State& state) {
  const auto n = gaussian(1, 20, static_cast<int>(state.range(0)), 0.0);
  const auto a = gaussian(2, 20, static_cast<int>(state.range(0)), 0.3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(symmetrized_kl(GaussianClassModel::fit(n), GaussianClassModel::fit(a)));
  }
}
BENCHMARK(BM_SymmetrizedKl)->Arg(32)->Arg(128);

static void BM_Mmd(benchmark::State& state) {
  const auto n = gaussian(1, static_cast<int>(state.range(0)), 32, 0.0);
  const auto a = gaussian(2, static_cast<int>(state.range(0)), 32, 0.3);
  for (auto _ : state) benchmark::DoNotOptimize(mmd2(n, a, {}));
}
BENCHMARK(BM_Mmd)->Arg(20)->Arg(100);

static void BM_Nmi(benchmark::State& state) {
  const auto n = gaussian(1, 20, 32, 0.0);
  const auto a = gaussian(2, 20, 32, 0.3);
  for (auto _ : state) benchmark::DoNotOptimize(nmi_score(n, a, 5).value);
}
BENCHMARK(BM_Nmi);

static void BM_SaliencyTable(benchmark::State& state) {
  auto spec = PlantSpec::recovery_default(3);
  spec.n_layers = 8;  // 128 heads keeps one iteration short
  spec.stable_heads = {1, 20, 40, 77, 100};
  spec.decoy_heads = {2, 21, 41, 78, 101};
  const auto bank = synthesize_calibration_bank(spec);
  for (auto _ : state) benchmark::DoNotOptimize(build_saliency_table(bank, {}, 1, 1));
}
BENCHMARK(BM_SaliencyTable)->Unit(benchmark::kMillisecond);

static void BM_Train(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  LabeledSet s{gaussian(4, n, 160, 0.0), Eigen::VectorXd(n), {}};
  for (int i = 0; i < n; ++i) {
    s.y[i] = i % 2;
    s.x.row(i).array() += 0.2 * s.y[i];
  }
  for (auto _ : state) benchmark::DoNotOptimize(train(s, {}).bias);
}
BENCHMARK(BM_Train)->Arg(200)->Arg(1000)->Unit(benchmark::kMillisecond);

static void BM_Calibrate(benchmark::State& state) {
  std::mt19937_64 gen(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<ValidationVideo> videos;
  for (int v = 0; v < 20; ++v) {
    ValidationVideo vid{"v" + std::to_string(v), std::vector<double>(200), 48, {{48 * 50, 48 * 70}}};
    for (auto& p : vid.p) p = u(gen);
    videos.push_back(std::move(vid));
  }
  const auto grid = LocatorGrid::default_grid();
  for (auto _ : state) {
    benchmark::DoNotOptimize(calibrate(videos, grid, "bench", static_cast<int>(state.range(0))).best_f1);
  }
}
BENCHMARK(BM_Calibrate)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
