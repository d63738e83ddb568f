#include <omp.h>

#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include "icad/kernels.hpp"
#include "icad/net.hpp"
#include "icad/rng.hpp"

using namespace icad;

namespace {

std::vector<float> random_values(size_t n, uint64_t seed) {
  Rng rng(seed);
  std::vector<float> v(n);
  for (auto& x : v) x = float(rng.uniform(-1.0, 1.0));
  return v;
}

double best_seconds(const std::function<void()>& fn, int reps) {
  fn();  // warm up caches and the OpenMP pool
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    auto t0 = std::chrono::steady_clock::now();
    fn();
    auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
  }
  return best;
}

// Runs one kernel both ways, checks the outputs match bit for bit, and prints
// a comparison row.
void report(const std::string& name, double flops, int reps,
            const std::function<void()>& serial_fn, const std::function<void()>& par_fn,
            const float* serial_out, const float* par_out, size_t out_count) {
  double ts = best_seconds(serial_fn, reps);
  double tp = best_seconds(par_fn, reps);
  const bool equal = std::memcmp(serial_out, par_out, out_count * sizeof(float)) == 0;
  std::printf("%-34s %9.3f ms %9.3f ms  x%-5.2f %8.2f GF/s  bitwise %s\n", name.c_str(),
              ts * 1e3, tp * 1e3, ts / tp, flops / tp * 1e-9, equal ? "equal" : "DIFFER");
}

struct ConvCase {
  std::string name;
  int n, cin, h, w, cout, k, dil, stride;
};

void bench_conv(const ConvCase& c, int reps) {
  const int pad = c.dil * (c.k - 1) / 2;
  const int hp = c.h + 2 * pad, wp = c.w + 2 * pad;
  const int ho = (c.h + c.stride - 1) / c.stride, wo = (c.w + c.stride - 1) / c.stride;
  auto xpad = random_values(size_t(c.n) * c.cin * hp * wp, 1);
  auto wgt = random_values(size_t(c.cout) * c.cin * c.k * c.k, 2);
  auto bias = random_values(size_t(c.cout), 3);
  auto gout = random_values(size_t(c.n) * c.cout * ho * wo, 4);

  const size_t out_n = size_t(c.n) * c.cout * ho * wo;
  std::vector<float> out_s(out_n), out_p(out_n);
  const double flops = 2.0 * c.n * c.cout * ho * wo * c.cin * c.k * c.k;

  report(c.name + " fwd", flops, reps,
         [&] {
           kernels::serial::conv2d_forward(xpad.data(), wgt.data(), bias.data(), out_s.data(),
                                           c.n, c.cin, hp, wp, c.cout, c.k, c.dil, c.stride, ho,
                                           wo);
         },
         [&] {
           kernels::par::conv2d_forward(xpad.data(), wgt.data(), bias.data(), out_p.data(), c.n,
                                        c.cin, hp, wp, c.cout, c.k, c.dil, c.stride, ho, wo);
         },
         out_s.data(), out_p.data(), out_n);

  const size_t gx_n = size_t(c.n) * c.cin * hp * wp;
  std::vector<float> gx_s(gx_n), gx_p(gx_n);
  report(c.name + " grad-in", flops, reps,
         [&] {
           kernels::serial::conv2d_grad_input(gout.data(), wgt.data(), gx_s.data(), c.n, c.cin,
                                              hp, wp, c.cout, c.k, c.dil, c.stride, ho, wo);
         },
         [&] {
           kernels::par::conv2d_grad_input(gout.data(), wgt.data(), gx_p.data(), c.n, c.cin, hp,
                                           wp, c.cout, c.k, c.dil, c.stride, ho, wo);
         },
         gx_s.data(), gx_p.data(), gx_n);

  const size_t gw_n = wgt.size();
  std::vector<float> gw_s(gw_n), gw_p(gw_n), gb_s(size_t(c.cout)), gb_p(size_t(c.cout));
  report(c.name + " grad-w", flops, reps,
         [&] {
           kernels::serial::conv2d_grad_params(gout.data(), xpad.data(), gw_s.data(),
                                               gb_s.data(), c.n, c.cin, hp, wp, c.cout, c.k,
                                               c.dil, c.stride, ho, wo);
         },
         [&] {
           kernels::par::conv2d_grad_params(gout.data(), xpad.data(), gw_p.data(), gb_p.data(),
                                            c.n, c.cin, hp, wp, c.cout, c.k, c.dil, c.stride, ho,
                                            wo);
         },
         gw_s.data(), gw_p.data(), gw_n);
}

void bench_elementwise(int reps) {
  const size_t n = 1 << 22;
  auto x = random_values(n, 7);
  std::vector<float> y_s(n), y_p(n);
  report("elu 4M", double(n), reps,
         [&] { kernels::serial::elu_forward(x.data(), y_s.data(), int64_t(n)); },
         [&] { kernels::par::elu_forward(x.data(), y_p.data(), int64_t(n)); }, y_s.data(),
         y_p.data(), n);
}

void bench_resize(int reps) {
  const int planes = 32, in = 64, out = 128;
  auto x = random_values(size_t(planes) * in * in, 9);
  const size_t n = size_t(planes) * out * out;
  std::vector<float> y_s(n), y_p(n);
  report("bilinear 32x64->128", 8.0 * double(n), reps,
         [&] { kernels::serial::bilinear_resize(x.data(), y_s.data(), planes, in, in, out, out); },
         [&] { kernels::par::bilinear_resize(x.data(), y_p.data(), planes, in, in, out, out); },
         y_s.data(), y_p.data(), n);
}

void bench_network(int reps) {
  Rng rng(1);
  auto net = CompletionNet::build(desk_network_spec(), rng, 0.02f);
  auto input = random_values(size_t(128) * 128, 11);
  auto run = [&] {
    Tensor x = Tensor::from_values({1, 1, 128, 128}, std::vector<float>(input));
    Tensor y = net.forward(x);
  };
  double t = best_seconds(run, reps);
  std::printf("%-34s %9.3f ms per 128x128 window\n", "reduced-width net forward", t * 1e3);
}

}  // namespace

int main(int argc, char** argv) {
  int reps = 3;
  if (argc > 1) reps = std::max(1, std::atoi(argv[1]));
  std::printf("OpenMP max threads: %d   (columns: serial, parallel, speedup, parallel rate)\n",
              omp_get_max_threads());

  bench_conv({"conv 3x3 32ch 64px", 1, 32, 64, 64, 32, 3, 1, 1}, reps);
  bench_conv({"conv 3x3 d8 32ch 64px", 1, 32, 64, 64, 32, 3, 8, 1}, reps);
  bench_conv({"conv 5x5 1->8ch 128px", 1, 1, 128, 128, 8, 5, 1, 1}, reps);
  bench_elementwise(reps);
  bench_resize(reps);
  bench_network(reps);
  return 0;
}
