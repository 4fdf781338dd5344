// Serial reference vs OpenMP for the data-parallel paths: dense matmul,
// gradient-buffer reduction, the segment x case scan and one training epoch.

#include <benchmark/benchmark.h>

#include <vector>

#include "privlabel/kernels.hpp"
#include "privlabel/labeler.hpp"
#include "privlabel/matchers.hpp"
#include "privlabel/rng.hpp"

using namespace privlabel;

namespace {

std::vector<double> random_buffer(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal(0.0, 1.0);
  return v;
}

kernels::Exec exec_of(const benchmark::State& state) {
  return state.range(1) ? kernels::Exec::kParallel : kernels::Exec::kSerial;
}

void BM_Gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  auto a = random_buffer(n * n, 1), b = random_buffer(n * n, 2);
  std::vector<double> c(n * n);
  const auto e = exec_of(state);
  for (auto _ : state) {
    kernels::gemm(e, {a.data(), n, n}, {b.data(), n, n}, {c.data(), n, n}, false);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Gemm)->ArgsProduct({{64, 128, 256}, {0, 1}})->ArgNames({"n", "omp"});

void BM_SumBuffers(benchmark::State& state) {
  const std::size_t count = 16, len = static_cast<std::size_t>(state.range(0));
  auto buffers = random_buffer(count * len, 3);
  std::vector<double> out(len);
  for (auto _ : state) {
    if (state.range(1)) {
      kernels::omp::sum_buffers(buffers.data(), count, len, out.data());
    } else {
      kernels::serial::sum_buffers(buffers.data(), count, len, out.data());
    }
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_SumBuffers)->ArgsProduct({{1 << 14, 1 << 18}, {0, 1}})->ArgNames({"len", "omp"});

struct ScanSetup {
  CaseCatalog catalog;
  std::vector<Segment> segments;
  std::unique_ptr<CrossEncoderMatcher> matcher;
};

const ScanSetup& scan_setup() {
  static const ScanSetup s = [] {
    ScanSetup out;
    std::vector<Case> cases;
    for (int i = 0; i < 40; ++i) {
      cases.push_back({"c" + std::to_string(i), "case title number " + std::to_string(i),
                       kAllRatings[i % 4], {}});
    }
    out.catalog = CaseCatalog(cases);
    std::string policy;
    for (int i = 0; i < 30; ++i) {
      policy += "We may share information number " + std::to_string(i) + " with partners.\n";
    }
    out.segments = segment_policy(policy);
    TrainConfig cfg;
    cfg.scratch_encoder.d_model = 16;
    cfg.scratch_encoder.ffn = 32;
    cfg.scratch_encoder.layers = 1;
    cfg.scratch_encoder.max_len = 32;
    auto base = load_base_model(cfg, {policy, "case title number"});
    out.matcher = std::make_unique<CrossEncoderMatcher>(base.vocab, base.encoder, 0.5, "bench");
    return out;
  }();
  return s;
}

void BM_ScanPolicy(benchmark::State& state) {
  const auto& s = scan_setup();
  const auto e = state.range(0) ? kernels::Exec::kParallel : kernels::Exec::kSerial;
  for (auto _ : state) {
    auto r = scan_policy(*s.matcher, s.segments, s.catalog, std::nullopt, "bench", e);
    benchmark::DoNotOptimize(r.data());
  }
  state.SetItemsProcessed(state.iterations() *
                          static_cast<std::int64_t>(s.segments.size() * s.catalog.size()));
}
BENCHMARK(BM_ScanPolicy)->Arg(0)->Arg(1)->ArgName("omp")->Unit(benchmark::kMillisecond);

void BM_TrainEpoch(benchmark::State& state) {
  std::vector<TextPair> pairs;
  Rng rng(5);
  for (int i = 0; i < 64; ++i) {
    const int c = static_cast<int>(rng.below(8));
    pairs.push_back({"c" + std::to_string(c), "x" + std::to_string(i),
                     "case about topic " + std::to_string(c),
                     "we handle topic " + std::to_string(i % 2 ? c : (c + 1) % 8) + " data", i % 2});
  }
  TrainConfig cfg;
  cfg.learning_rate = 1e-3;
  cfg.epochs = 1;
  cfg.batch_size = 16;
  cfg.scratch_encoder.d_model = 16;
  cfg.scratch_encoder.ffn = 32;
  cfg.scratch_encoder.layers = 1;
  cfg.scratch_encoder.max_len = 24;
  cfg.parallel = state.range(0) != 0;
  for (auto _ : state) {
    auto tm = train_cross_encoder(pairs, {}, cfg);
    benchmark::DoNotOptimize(tm.history.data());
  }
}
BENCHMARK(BM_TrainEpoch)->Arg(0)->Arg(1)->ArgName("omp")->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
