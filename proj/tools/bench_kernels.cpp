// Benchmark of the OpenMP kernels against their serial reference paths.
// Also asserts the two produce identical results before timing them.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include "bugloc/codeast.hpp"
#include "bugloc/neural.hpp"
#include "bugloc/rng.hpp"
#include "support/generators.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace bugloc;

namespace {

double time_ms(const std::function<void()>& fn, int repeats) {
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < repeats; ++i) fn();
  const auto stop = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(stop - start).count() /
         static_cast<double>(repeats);
}

void report(const char* name, double serial_ms, double parallel_ms) {
  std::printf("%-28s serial %9.2f ms   openmp %9.2f ms   speedup %5.2fx\n", name, serial_ms,
              parallel_ms, serial_ms / parallel_ms);
}

bool bit_equal(const Vector& a, const Vector& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

int main(int argc, char** argv) {
  const bool quick = argc > 1 && std::string(argv[1]) == "--quick";
  const int repeats = quick ? 1 : 3;

#ifdef _OPENMP
  std::printf("openmp threads: %d\n", omp_get_max_threads());
#else
  std::printf("openmp unavailable; parallel paths run serially\n");
#endif

  Rng rng(7);

  // --- candidate scoring ---------------------------------------------------
  {
    const std::size_t candidates = quick ? 200 : 4000;
    neural::TowerConfig report_cfg{neural::report_tower_dims(768), neural::Activation::Relu};
    neural::TowerConfig method_cfg{neural::method_tower_dims(), neural::Activation::Relu};
    const auto net = neural::make_network(report_cfg, method_cfg, 11);

    const Vector report_vec = testsupport::make_random_vector(rng, 768);
    std::vector<Vector> methods(candidates);
    for (auto& m : methods) m = testsupport::make_random_vector(rng, 384);
    std::vector<const Vector*> ptrs;
    for (const auto& m : methods) ptrs.push_back(&m);

    const auto serial = neural::score_batch(net, report_vec, ptrs, ExecMode::Serial);
    const auto parallel = neural::score_batch(net, report_vec, ptrs, ExecMode::Parallel);
    if (!bit_equal(serial, parallel)) {
      std::fprintf(stderr, "score_batch: serial and parallel results differ\n");
      return 1;
    }
    const double s = time_ms([&] { neural::score_batch(net, report_vec, ptrs, ExecMode::Serial); },
                             repeats);
    const double p = time_ms(
        [&] { neural::score_batch(net, report_vec, ptrs, ExecMode::Parallel); }, repeats);
    report("score_batch (768/384)", s, p);
  }

  // --- method embedding, hashed and attention -------------------------------
  {
    const std::size_t method_count = quick ? 50 : 600;
    const std::size_t contexts_per_method = quick ? 40 : 200;
    std::vector<std::vector<codeast::PathContext>> contexts(method_count);
    for (auto& c : contexts) c = testsupport::make_random_contexts(rng, contexts_per_method);

    const auto hashed = codeast::make_hashed_params();
    {
      const auto serial = codeast::embed_methods(hashed, contexts, ExecMode::Serial);
      const auto parallel = codeast::embed_methods(hashed, contexts, ExecMode::Parallel);
      for (std::size_t i = 0; i < serial.size(); ++i)
        if (!bit_equal(serial[i].vec, parallel[i].vec)) {
          std::fprintf(stderr, "embed_methods(hashed): results differ at %zu\n", i);
          return 1;
        }
      const double s =
          time_ms([&] { codeast::embed_methods(hashed, contexts, ExecMode::Serial); }, repeats);
      const double p =
          time_ms([&] { codeast::embed_methods(hashed, contexts, ExecMode::Parallel); }, repeats);
      report("embed_methods (hashed)", s, p);
    }

    std::vector<std::string> tokens, paths;
    for (int i = 0; i < 50; ++i) {
      tokens.push_back("s" + std::to_string(i));
      tokens.push_back("e" + std::to_string(i));
    }
    for (int a = 0; a < 8; ++a)
      for (int b = 0; b < 8; ++b)
        for (int c = 0; c < 8; ++c)
          paths.push_back("K" + std::to_string(a) + "↑K" + std::to_string(b) + "↓K" +
                          std::to_string(c));
    const auto attention = codeast::make_attention_params(tokens, paths, 64, 64, 3);
    {
      const auto serial = codeast::embed_methods(attention, contexts, ExecMode::Serial);
      const auto parallel = codeast::embed_methods(attention, contexts, ExecMode::Parallel);
      for (std::size_t i = 0; i < serial.size(); ++i)
        if (!bit_equal(serial[i].vec, parallel[i].vec)) {
          std::fprintf(stderr, "embed_methods(attention): results differ at %zu\n", i);
          return 1;
        }
      const double s = time_ms(
          [&] { codeast::embed_methods(attention, contexts, ExecMode::Serial); }, repeats);
      const double p = time_ms(
          [&] { codeast::embed_methods(attention, contexts, ExecMode::Parallel); }, repeats);
      report("embed_methods (attention)", s, p);
    }
  }

  std::printf("ok\n");
  return 0;
}
