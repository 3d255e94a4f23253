// Microbenchmarks for the training hot paths. Sizes mirror the default
// 32x32 network so the numbers map directly onto per-epoch cost.
#include <benchmark/benchmark.h>

#include <hbdr/layers.hpp>
#include <hbdr/network.hpp>
#include <hbdr/rbm.hpp>
#include <hbdr/rng.hpp>
#include <hbdr/tensor.hpp>

using namespace hbdr;

namespace {

Tensor<float> noise(std::vector<std::size_t> shape, Rng& rng,
                    float scale = 1.0f) {
  return rand_normal<float>(std::move(shape), 0.0f, scale, rng);
}

}  // namespace

// C1 of the default network: 1 -> 32 maps, 5x5 kernels on 32x32.
static void BM_ConvForwardC1(benchmark::State& state) {
  Rng rng(1);
  ConvLayer<float> c1(32, 1, 5, 5);
  c1.kernels = noise(c1.kernels.shape(), rng, 0.1f);
  Tensor<float> in = noise({1, 32, 32}, rng);
  for (auto _ : state)
    benchmark::DoNotOptimize(conv_forward(in, c1, Activation::sigmoid));
}
BENCHMARK(BM_ConvForwardC1);

// C2: 32 -> 64 maps, 5x5 kernels on 14x14. The dominant layer.
static void BM_ConvForwardC2(benchmark::State& state) {
  Rng rng(1);
  ConvLayer<float> c2(64, 32, 5, 5);
  c2.kernels = noise(c2.kernels.shape(), rng, 0.05f);
  Tensor<float> in = noise({32, 14, 14}, rng);
  for (auto _ : state)
    benchmark::DoNotOptimize(conv_forward(in, c2, Activation::sigmoid));
}
BENCHMARK(BM_ConvForwardC2);

static void BM_ConvBackwardC2(benchmark::State& state) {
  Rng rng(1);
  ConvLayer<float> c2(64, 32, 5, 5);
  c2.kernels = noise(c2.kernels.shape(), rng, 0.05f);
  Tensor<float> in = noise({32, 14, 14}, rng);
  ConvCache<float> cache;
  conv_forward(in, c2, Activation::sigmoid, &cache);
  Tensor<float> g_out = noise({64, 10, 10}, rng);
  for (auto _ : state)
    benchmark::DoNotOptimize(conv_backward(g_out, cache, c2));
}
BENCHMARK(BM_ConvBackwardC2);

static void BM_MaxPool(benchmark::State& state) {
  Rng rng(1);
  MaxPoolLayer pool{2};
  Tensor<float> in = noise({32, 28, 28}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(maxpool_forward(in, pool));
}
BENCHMARK(BM_MaxPool);

// F1 of the default network: 1600 -> 312, the largest weight matrix.
static void BM_FcForwardF1(benchmark::State& state) {
  Rng rng(1);
  FcLayer<float> f1(312, 1600);
  f1.weights = noise(f1.weights.shape(), rng, 0.02f);
  Tensor<float> x = noise({1600}, rng);
  for (auto _ : state)
    benchmark::DoNotOptimize(fc_forward(x, f1, Activation::sigmoid));
}
BENCHMARK(BM_FcForwardF1);

static void BM_FcBackwardF1(benchmark::State& state) {
  Rng rng(1);
  FcLayer<float> f1(312, 1600);
  f1.weights = noise(f1.weights.shape(), rng, 0.02f);
  Tensor<float> x = noise({1600}, rng);
  FcCache<float> cache;
  fc_forward(x, f1, Activation::sigmoid, &cache);
  Tensor<float> g_out = noise({312}, rng);
  for (auto _ : state)
    benchmark::DoNotOptimize(fc_backward(g_out, cache, f1));
}
BENCHMARK(BM_FcBackwardF1);

// Whole-image inference on the default architecture.
static void BM_CnnForward(benchmark::State& state) {
  Rng rng(1);
  Cnn<float> net((CnnArch()));
  init_cnn(net, Variant::cnn_gaussian, rng);
  Tensor<float> img = noise({1, 32, 32}, rng, 0.3f);
  for (auto _ : state)
    benchmark::DoNotOptimize(forward(net, img, Mode::inference));
}
BENCHMARK(BM_CnnForward);

// One CD-1 step on the first DBN layer (1024 visible, 100 hidden) at
// the reference batch size.
static void BM_CdUpdate(benchmark::State& state) {
  Rng rng(1);
  Rng init = rng.substream(stream::kInit);
  RbmParams<float> rbm = init_rbm<float>(1024, 100, init);
  Tensor<float> batch({50, 1024});
  for (std::size_t i = 0; i < batch.size(); ++i)
    batch[i] = rng.bernoulli(0.15) ? 1.0f : 0.0f;
  CdConfig cfg;
  RbmGrads<float> velocity(rbm);
  Rng chain = rng.substream(stream::kGibbs);
  for (auto _ : state) cd_update(batch, rbm, cfg, chain, velocity);
}
BENCHMARK(BM_CdUpdate);

BENCHMARK_MAIN();
