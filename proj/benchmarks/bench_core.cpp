#include <benchmark/benchmark.h>

#include <bcm/boundary_control.hpp>
#include <bcm/runtime.hpp>
#include <cmath>
#include <numbers>

namespace {

double cos4(double z) {
  if (std::abs(z) >= 1) return 0.0;
  const double c = std::cos(std::numbers::pi * z / 2);
  return c * c * c * c;
}

struct Setup {
  bcm::TimeGrid time;
  bcm::GridPtr grid;
  bcm::RegionPtr omega;
  bcm::MapPtr map;
  bcm::BoundaryData f;

  explicit Setup(double h)
      : time(bcm::TimeGrid::from_cfl(7.2, h, 1, 1.0)),
        grid(std::make_shared<const bcm::SpatialGrid>(bcm::padded_box(1, {{-1, 0}, {0, 0}}, {{2, 0}, {3, 0}}, time, h))),
        omega(std::make_shared<const bcm::Region>(bcm::Region::box(grid, {2, 0}, {3, 0}, bcm::RegionKind::omega))),
        map(make_map()),
        f(bcm::BoundaryData::sample(omega, time, [](double t, bcm::Point x) {
          return bcm::Complex(cos4((t - 0.4) / 0.3) * cos4((x.x - 2.5) / 0.3));
        })) {}

  bcm::MapPtr make_map() const {
    bcm::GaussianBump b{{-0.5, 0}, 0.2, 1.0};
    auto q = std::make_shared<const bcm::Potential>(bcm::Potential::from_bumps(grid, std::span(&b, 1)));
    return std::make_shared<const bcm::SourceToSolutionMap>(q, omega, time);
  }
};

double h_of(const benchmark::State& st) { return 0.08 / static_cast<double>(st.range(0)); }

void BM_ForwardSolve(benchmark::State& st) {
  const Setup s(h_of(st));
  for (auto _ : st) benchmark::DoNotOptimize(s.map->apply(s.f));
  st.counters["nodes"] = static_cast<double>(s.grid->size());
  st.counters["steps"] = s.time.steps();
}
BENCHMARK(BM_ForwardSolve)->Arg(4)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_ApplyK(benchmark::State& st) {
  const Setup s(h_of(st));
  const bcm::ConnectingOperator k(s.map);
  for (auto _ : st) benchmark::DoNotOptimize(k.apply(s.f));
}
BENCHMARK(BM_ApplyK)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_ControlCG(benchmark::State& st) {
  const Setup s(0.02);
  const bcm::ConnectingOperator k(s.map);
  const double alpha = std::pow(10.0, -static_cast<double>(st.range(0)));
  bcm::ControlProblem p{s.f, s.time.step_of(2.0), 1.0, alpha, nullptr};
  int iters = 0;
  for (auto _ : st) {
    const auto sol = bcm::solve_control(k, p);
    iters = sol.iterations;
    benchmark::DoNotOptimize(sol.g_norm);
  }
  st.counters["cg_iterations"] = iters;
}
BENCHMARK(BM_ControlCG)->Arg(3)->Arg(5)->Arg(7)->Unit(benchmark::kMillisecond);

}  // namespace

int main(int argc, char** argv) {
  bcm::tune_allocator();
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
