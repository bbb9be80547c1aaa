// Times one NMF update step: serial whole-matrix reference against the blocked
// kernel at several thread counts. Prints CSV to stdout.
//
// usage: bench_kernels [bins frames max_threads reps]

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <omp.h>

#include "auscnmf/nmf.hpp"

using namespace auscnmf;

namespace {

template <typename Fn>
double median_seconds(int reps, Fn&& fn) {
  std::vector<double> t;
  for (int r = 0; r < reps; ++r) {
    const auto start = std::chrono::steady_clock::now();
    fn();
    t.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  }
  std::sort(t.begin(), t.end());
  return t[t.size() / 2];
}

}  // namespace

int main(int argc, char** argv) {
  const Eigen::Index f = argc > 1 ? std::atoi(argv[1]) : 513;
  const Eigen::Index t = argc > 2 ? std::atoi(argv[2]) : 2000;
  const int max_threads = argc > 3 ? std::atoi(argv[3]) : omp_get_max_threads();
  const int reps = argc > 4 ? std::atoi(argv[4]) : 5;
  const Eigen::Index ks = 16, kv = 16;
  if (f < 1 || t < 1 || max_threads < 1 || reps < 1) {
    std::cerr << "usage: bench_kernels [bins frames max_threads reps]\n";
    return 1;
  }

  const Matrix x = random_uniform_matrix(f, t, 1);
  const Matrix y = random_uniform_matrix(f, t, 2);
  NmfModel m;
  m.source_bases = random_uniform_matrix(f, ks, 3);
  m.noise_bases = random_uniform_matrix(f, kv, 4);
  m.source_gains = random_uniform_matrix(ks, t, 5);
  m.noise_gains = random_uniform_matrix(kv, t, 6);
  m.external_gains = random_uniform_matrix(kv, t, 7);

  NmfModel sink;
  const double serial = median_seconds(reps, [&] { sink = reference::update_step(m, x, y); });
  std::cout << "kernel,bins,frames,threads,seconds,speedup_vs_reference,efficiency\n";
  std::cout << "reference," << f << ',' << t << ",1," << serial << ",1,1\n";

  double blocked_one = 0.0;
  for (int p = 1; p <= max_threads; p *= 2) {
    const double s = median_seconds(reps, [&] { sink = update_step(m, x, y, Parallelism{p}); });
    if (p == 1) blocked_one = s;
    std::cout << "blocked," << f << ',' << t << ',' << p << ',' << s << ',' << serial / s << ','
              << blocked_one / s / p << '\n';
  }
  return sink.min_entry() > 0.0 ? 0 : 2;
}
