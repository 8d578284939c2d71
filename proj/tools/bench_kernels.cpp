// Wall-clock comparison of the OpenMP kernels against their serial
// reference implementations, plus a bit-identity check on each case.

#include <chrono>
#include <cstdio>
#include <functional>

#include <omp.h>

#include "snn/kernels.hpp"
#include "snn/neuron.hpp"
#include "snn/rng.hpp"

using namespace snn;

namespace {

double time_ms(const std::function<void()>& fn, int reps) {
  fn();  // warm up
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) fn();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void report(const char* name, double serial_ms, double parallel_ms, bool identical) {
  std::printf("%-24s serial %9.3f ms   parallel %9.3f ms   speedup %5.2fx   %s\n", name,
              serial_ms, parallel_ms, serial_ms / parallel_ms,
              identical ? "bit-identical" : "MISMATCH");
}

}  // namespace

int main() {
  std::printf("threads: %d\n", omp_get_max_threads());
  Rng rng(7);

  {
    const Tensor a = seeded_normal(rng, {256, 512}, 0, 1);
    const Tensor b = seeded_normal(rng, {512, 256}, 0, 1);
    Tensor out_p, out_s;
    const double tp = time_ms([&] { out_p = matmul(a, b); }, 10);
    const double ts = time_ms([&] { out_s = serial::matmul(a, b); }, 10);
    report("matmul 256x512x256", ts, tp, out_p == out_s);
  }
  {
    const Tensor a = seeded_normal(rng, {2048, 256}, 0, 1);
    const Tensor w = seeded_normal(rng, {128, 256}, 0, 1);
    Tensor out_p, out_s;
    const double tp = time_ms([&] { out_p = matmul_nt(a, w); }, 10);
    const double ts = time_ms([&] { out_s = serial::matmul_nt(a, w); }, 10);
    report("matmul_nt 2048x256x128", ts, tp, out_p == out_s);
  }
  {
    const Tensor in = seeded_normal(rng, {64, 2, 48, 48}, 0, 1);
    const Tensor w = seeded_normal(rng, {8, 2, 3, 3}, 0, 1);
    const Tensor bias = Tensor({8});
    Tensor out_p, out_s;
    const double tp = time_ms([&] { out_p = conv2d_forward(in, w, bias, 1, 1); }, 5);
    const double ts = time_ms([&] { out_s = serial::conv2d_forward(in, w, bias, 1, 1); }, 5);
    report("conv2d 64x2x48x48", ts, tp, out_p == out_s);
  }
  {
    const Tensor x = seeded_normal(rng, {640, 256}, 0, 1);
    Tensor mp, vp, ms, vs;
    const double tp = time_ms([&] { bn_stats(x, 256, 1, mp, vp); }, 20);
    const double ts = time_ms([&] { serial::bn_stats(x, 256, 1, ms, vs); }, 20);
    report("bn_stats 640x256", ts, tp, mp == ms && vp == vs);
  }
  {
    LifParams p;
    const Tensor u = seeded_normal(rng, {64, 4096}, 0, 1);
    const Tensor x = seeded_normal(rng, {64, 4096}, 0, 1);
    LifStepResult rp, rs;
    const double tp = time_ms([&] { rp = lif_step(u, x, p); }, 20);
    const double ts = time_ms([&] { rs = serial::lif_step(u, x, p); }, 20);
    report("lif_step 64x4096", ts, tp,
           rp.u_pre == rs.u_pre && rp.s == rs.s && rp.u_post == rs.u_post);
  }
  return 0;
}
