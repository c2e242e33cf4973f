// Microbenchmarks for the hot paths: convolution, full network passes,
// baseline prediction, metrics and scene tiling.
#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "ft/baselines.hpp"
#include "ft/eval.hpp"
#include "ft/patch.hpp"
#include "ft/seunet.hpp"
#include "ft/synth.hpp"
#include "ft/tensor.hpp"

namespace {

ft::Tensor random_tensor(int c, int h, int w, std::uint64_t seed) {
    ft::Tensor t(c, h, w);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist;
    for (double& v : t.data) v = dist(rng);
    return t;
}

void bm_conv3x3_forward(benchmark::State& state) {
    ft::detail::Conv2D conv;
    conv.init(8, 8, 3, false);
    std::mt19937_64 rng(1);
    std::normal_distribution<double> dist(0.0, 0.1);
    for (double& v : conv.w) v = dist(rng);
    const ft::Tensor x = random_tensor(8, 32, 32, 2);
    for (auto _ : state) benchmark::DoNotOptimize(conv.forward(x, false));
    state.SetItemsProcessed(state.iterations() * x.plane() * 8);
}
BENCHMARK(bm_conv3x3_forward);

void bm_conv3x3_backward(benchmark::State& state) {
    ft::detail::Conv2D conv;
    conv.init(8, 8, 3, false);
    std::mt19937_64 rng(1);
    std::normal_distribution<double> dist(0.0, 0.1);
    for (double& v : conv.w) v = dist(rng);
    const ft::Tensor x = random_tensor(8, 32, 32, 2);
    const ft::Tensor dy = random_tensor(8, 32, 32, 3);
    conv.forward(x, true);
    for (auto _ : state) benchmark::DoNotOptimize(conv.backward(dy));
}
BENCHMARK(bm_conv3x3_backward);

ft::SeUNet make_net(int in_channels) {
    ft::ModelConfig mc;
    mc.in_channels = in_channels;
    mc.base_width = 8;
    mc.depth = 3;
    mc.se_reduction = 4;
    mc.seed = 7;
    ft::SeUNet net(mc);
    net.init_parameters(mc.seed);
    return net;
}

void bm_seunet_forward_eval(benchmark::State& state) {
    ft::SeUNet net = make_net(7);
    const ft::Tensor x = random_tensor(7, 32, 32, 4);
    for (auto _ : state) benchmark::DoNotOptimize(net.forward(x, ft::Mode::eval));
}
BENCHMARK(bm_seunet_forward_eval);

void bm_seunet_train_step(benchmark::State& state) {
    ft::SeUNet net = make_net(7);
    net.set_update_running_stats(false);
    const ft::Tensor x = random_tensor(7, 32, 32, 4);
    const ft::Tensor target = random_tensor(1, 32, 32, 5);
    for (auto _ : state) {
        ft::Tensor pred = net.forward(x, ft::Mode::train);
        for (std::size_t i = 0; i < pred.data.size(); ++i)
            pred.data[i] = 2.0 * (pred.data[i] - target.data[i]) / pred.data.size();
        benchmark::DoNotOptimize(net.backward(pred));
    }
}
BENCHMARK(bm_seunet_train_step);

std::vector<ft::FeatureVector> synthetic_features(std::size_t n, std::size_t dims) {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> dist(10.0, 3.0);
    std::vector<ft::FeatureVector> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i].plot_id = "p" + std::to_string(i);
        out[i].features.resize(dims);
        for (double& f : out[i].features) f = dist(rng);
        out[i].label = dist(rng);
    }
    return out;
}

void bm_knn_predict(benchmark::State& state) {
    const auto train = synthetic_features(709, 14);
    const ft::KNNModel model = ft::knn_fit(train, 5);
    const auto queries = synthetic_features(64, 14);
    std::size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(ft::knn_predict(model, queries[i % queries.size()].features));
        ++i;
    }
}
BENCHMARK(bm_knn_predict);

void bm_compute_metrics(benchmark::State& state) {
    std::mt19937_64 rng(13);
    std::normal_distribution<double> dist(15.0, 5.0);
    std::vector<ft::PlotPrediction> records(static_cast<std::size_t>(state.range(0)));
    for (auto& r : records) {
        r.reference_m = dist(rng);
        r.predicted_m = r.reference_m + 0.1 * dist(rng);
    }
    for (auto _ : state) benchmark::DoNotOptimize(ft::compute_metrics(records));
    state.SetItemsProcessed(state.iterations() * records.size());
}
BENCHMARK(bm_compute_metrics)->Arg(1000)->Arg(10000);

const ft::Scene& bench_scene() {
    static const ft::Scene scene = [] {
        ft::SynthConfig sc = ft::SynthConfig::defaults(99);
        sc.width = 256;
        sc.height = 256;
        sc.n_plots = 64;
        return ft::gen_site_pair(sc).first;
    }();
    return scene;
}

void bm_tile_scene(benchmark::State& state) {
    const ft::Scene& scene = bench_scene();
    const ft::SparseLabelRaster labels = ft::dense_labels(scene.truth, scene.mask);
    for (auto _ : state)
        benchmark::DoNotOptimize(ft::tile_scene(scene.stack, labels, scene.mask, 32));
}
BENCHMARK(bm_tile_scene);

void bm_gen_height_field(benchmark::State& state) {
    ft::RasterGrid grid;
    grid.width = 256;
    grid.height = 256;
    ft::SiteParams site;
    site.seed = 5;
    for (auto _ : state) benchmark::DoNotOptimize(ft::gen_height_field(grid, site));
}
BENCHMARK(bm_gen_height_field);

}  // namespace

BENCHMARK_MAIN();
