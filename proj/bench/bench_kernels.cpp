// parallel kernels against their serial references; MEANDIM_THREADS caps the thread count

#include <benchmark/benchmark.h>

#include <vector>

#include "meandim/carpet.hpp"
#include "meandim/fractal.hpp"
#include "meandim/metrics.hpp"
#include "meandim/parallel.hpp"
#include "meandim/subshift.hpp"

using namespace meandim;

namespace {

SubshiftSpec golden_b() {
    SubshiftSpec s = full_shift(Alphabet::paired(3, 2));
    std::vector<std::pair<int, int>> pairs;
    for (int u = 0; u < 3; ++u)
        for (int v = 0; v < 3; ++v) pairs.push_back({u * 2 + 1, v * 2 + 1});
    add_forbidden_pairs(s, 0, pairs);
    return s;
}

GroupWindow box(std::int64_t n) { return GroupWindow::box(n, GroupSpec(1)); }

void BM_enumerate(benchmark::State& st) {
    const auto s = hard_square(2);
    const auto w = GroupWindow::box(st.range(0), GroupSpec(2));
    for (auto _ : st) benchmark::DoNotOptimize(enumerate_patterns(s, w).count);
}

void BM_enumerate_serial(benchmark::State& st) {
    const auto s = hard_square(2);
    const auto w = GroupWindow::box(st.range(0), GroupSpec(2));
    for (auto _ : st) benchmark::DoNotOptimize(reference::enumerate_patterns(s, w).count);
}

void BM_fiber_table(benchmark::State& st) {
    const auto s = golden_b();
    for (auto _ : st) benchmark::DoNotOptimize(fiber_table(s, box(st.range(0))).entries.size());
}

void BM_fiber_table_serial(benchmark::State& st) {
    const auto s = golden_b();
    for (auto _ : st) benchmark::DoNotOptimize(reference::fiber_table(s, box(st.range(0))).entries.size());
}

PointCloud cloud_for(std::int64_t m) {
    const auto spec = make_selfsimilar(hard_square(1), 0.5L);
    const auto net = enumerate_patterns(spec.omega, box(4));
    const std::vector<double> p(4, 0.0);
    return selfsimilar_spanning_cloud(spec, m, net, p);
}

void BM_spanning_cloud(benchmark::State& st) {
    const auto spec = make_selfsimilar(hard_square(1), 0.5L);
    const auto net = enumerate_patterns(spec.omega, box(4));
    const std::vector<double> p(4, 0.0);
    for (auto _ : st) benchmark::DoNotOptimize(selfsimilar_spanning_cloud(spec, st.range(0), net, p).data.data());
}

void BM_spanning_cloud_serial(benchmark::State& st) {
    const auto spec = make_selfsimilar(hard_square(1), 0.5L);
    const auto net = enumerate_patterns(spec.omega, box(4));
    const std::vector<double> p(4, 0.0);
    for (auto _ : st)
        benchmark::DoNotOptimize(reference::selfsimilar_spanning_cloud(spec, st.range(0), net, p).data.data());
}

void BM_separated_set(benchmark::State& st) {
    const auto cloud = cloud_for(st.range(0));
    const DynamicalMetric d(cloud, WeightScheme(1, 0.25L), box(2));
    for (auto _ : st) benchmark::DoNotOptimize(separated_set(cloud.size(), std::cref(d), 0.05).size());
}

void BM_separated_set_serial(benchmark::State& st) {
    const auto cloud = cloud_for(st.range(0));
    const DynamicalMetric d(cloud, WeightScheme(1, 0.25L), box(2));
    for (auto _ : st) benchmark::DoNotOptimize(reference::separated_set(cloud.size(), std::cref(d), 0.05).size());
}

void BM_representatives(benchmark::State& st) {
    const auto spec = make_carpet(3, 2, full_shift(Alphabet::paired(3, 2)));
    const CarpetWindow cw(spec, 1);
    for (auto _ : st) benchmark::DoNotOptimize(carpet_representatives(cw, st.range(0)).x.data());
}

void BM_representatives_serial(benchmark::State& st) {
    const auto spec = make_carpet(3, 2, full_shift(Alphabet::paired(3, 2)));
    const CarpetWindow cw(spec, 1);
    for (auto _ : st) benchmark::DoNotOptimize(reference::carpet_representatives(cw, st.range(0)).x.data());
}

void BM_close_pair(benchmark::State& st) {
    const auto spec = make_carpet(4, 2, cellwise_shift(Alphabet::paired(4, 2), {0, 2, 1}));
    const CarpetWindow cw(spec, 1);
    const auto r = carpet_representatives(cw, st.range(0));
    for (auto _ : st) benchmark::DoNotOptimize(find_close_pair(r, 1, 1).has_value());
}

void BM_close_pair_serial(benchmark::State& st) {
    const auto spec = make_carpet(4, 2, cellwise_shift(Alphabet::paired(4, 2), {0, 2, 1}));
    const CarpetWindow cw(spec, 1);
    const auto r = carpet_representatives(cw, st.range(0));
    for (auto _ : st) benchmark::DoNotOptimize(reference::find_close_pair(r, 1, 1).has_value());
}

void BM_probe(benchmark::State& st) {
    const auto spec = make_carpet(4, 2, cellwise_shift(Alphabet::paired(4, 2), {0, 2, 1}));
    const CarpetWindow cw(spec, 0);
    const CarpetMeasure mu(cw, spec.w());
    for (auto _ : st) benchmark::DoNotOptimize(shannon_mcmillan_probe(mu, 256, st.range(0), 7).q50);
}

void BM_probe_serial(benchmark::State& st) {
    const auto spec = make_carpet(4, 2, cellwise_shift(Alphabet::paired(4, 2), {0, 2, 1}));
    const CarpetWindow cw(spec, 0);
    const CarpetMeasure mu(cw, spec.w());
    for (auto _ : st) benchmark::DoNotOptimize(reference::shannon_mcmillan_probe(mu, 256, st.range(0), 7).q50);
}

}  // namespace

BENCHMARK(BM_enumerate)->Arg(4)->Arg(5);
BENCHMARK(BM_enumerate_serial)->Arg(4)->Arg(5);
BENCHMARK(BM_fiber_table)->Arg(6)->Arg(8);
BENCHMARK(BM_fiber_table_serial)->Arg(6)->Arg(8);
BENCHMARK(BM_spanning_cloud)->Arg(3)->Arg(4);
BENCHMARK(BM_spanning_cloud_serial)->Arg(3)->Arg(4);
BENCHMARK(BM_separated_set)->Arg(2)->Arg(3);
BENCHMARK(BM_separated_set_serial)->Arg(2)->Arg(3);
BENCHMARK(BM_representatives)->Arg(3)->Arg(4);
BENCHMARK(BM_representatives_serial)->Arg(3)->Arg(4);
BENCHMARK(BM_close_pair)->Arg(3)->Arg(4);
BENCHMARK(BM_close_pair_serial)->Arg(3)->Arg(4);
BENCHMARK(BM_probe)->Arg(1000)->Arg(10000);
BENCHMARK(BM_probe_serial)->Arg(1000)->Arg(10000);

int main(int argc, char** argv) {
    apply_thread_limit();
    benchmark::Initialize(&argc, argv);
    if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
    benchmark::RunSpecifiedBenchmarks();
    benchmark::Shutdown();
    return 0;
}
