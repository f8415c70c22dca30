// Serial reference vs OpenMP kernels: batch masking and 3x3 convolution.
// Usage: bench_kernels [repeats]

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <functional>

#include <fmt/format.h>

#include "sapp/augment_policy.hpp"
#include "sapp/kernels/conv.hpp"
#include "sapp/reference/conv.hpp"
#include "sapp/reference/masking.hpp"
#include "sapp/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace sapp;

namespace {

double best_ms(int repeats, const std::function<void()>& fn) {
  double best = 1e300;
  for (int r = 0; r < repeats; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    best = std::min(best, std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  return best;
}

Batch<double> random_batch(std::size_t n, Shape s, SeededRng& rng) {
  Batch<double> b;
  for (std::size_t i = 0; i < n; ++i) {
    Tensor64 x(s);
    for (auto& v : x.data()) v = rng.normal();
    b.push_back(std::move(x));
  }
  return b;
}

void report(const char* name, double ref, double par) {
  fmt::print("{:<28} reference {:9.2f} ms   parallel {:9.2f} ms   speedup {:5.2f}x\n", name, ref, par, ref / par);
}

}  // namespace

int main(int argc, char** argv) {
  const int repeats = argc > 1 ? std::max(1, std::atoi(argv[1])) : 5;
#ifdef _OPENMP
  fmt::print("threads: {}\n", omp_get_max_threads());
#else
  fmt::print("threads: 1 (built without OpenMP)\n");
#endif
  SeededRng rng(7);

  {
    const Shape s{1, 431, 256};
    const auto batch = random_batch(32, s, rng);
    AugmentPolicy policy;
    policy.scheme = Scheme::kMixture;
    policy.layer_set = {0};
    const auto plan = plan_batch(batch.size(), s, policy, 0, rng);
    volatile double sink = 0;
    const double ref = best_ms(repeats, [&] {
      Batch<double> out;
      for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto& a = plan.samples[i];
        out.push_back(reference::mixture_mask(batch[i], batch[*a.partner], a.mask));
      }
      sink = sink + out.back().data()[0];
    });
    const double par = best_ms(repeats, [&] { sink = sink + apply_plan(batch, plan, batch).front().data()[0]; });
    report("MM mask 32x1x431x256", ref, par);
  }

  for (auto [cin, cout, T, F] : {std::tuple<std::size_t, std::size_t, std::size_t, std::size_t>{8, 8, 108, 64},
                                 {32, 32, 27, 16}}) {
    const kernels::ConvGeometry g{cin, cout, 3, 1, 1};
    const auto batch = random_batch(16, Shape{cin, T, F}, rng);
    std::vector<double> w(g.weight_count());
    for (auto& v : w) v = rng.normal();
    volatile double sink = 0;
    const double ref = best_ms(repeats, [&] { sink = sink + reference::conv2d_forward(batch, w, g)[0].data()[0]; });
    const double par = best_ms(repeats, [&] { sink = sink + kernels::conv2d_forward(batch, w, g)[0].data()[0]; });
    report(fmt::format("conv3x3 16x{}x{}x{}->{}", cin, T, F, cout).c_str(), ref, par);
  }
  return 0;
}
