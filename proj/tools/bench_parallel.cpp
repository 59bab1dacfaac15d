// Times the serial reference runner against the OpenMP trial-parallel runner
// on the same experiment and checks that both produce identical summaries.

#include <chrono>
#include <cstring>
#include <iostream>
#include <thread>

#include "bevfuse/pipeline.hpp"

using namespace bevfuse;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool summaries_equal(const ExperimentResult& a, const ExperimentResult& b) {
  if (a.methods.size() != b.methods.size()) return false;
  for (std::size_t i = 0; i < a.methods.size(); ++i) {
    const RunSummary& sa = a.methods[i].summary;
    const RunSummary& sb = b.methods[i].summary;
    if (std::memcmp(&sa.m_ate, &sb.m_ate, sizeof(MeanStd)) != 0) return false;
    if (std::memcmp(&sa.m_aoe, &sb.m_aoe, sizeof(MeanStd)) != 0) return false;
    if (std::memcmp(&sa.m_ade, &sb.m_ade, sizeof(MeanStd)) != 0) return false;
    if (std::memcmp(&sa.precision, &sb.precision, sizeof(MeanStd)) != 0) return false;
    if (std::memcmp(&sa.recall, &sb.recall, sizeof(MeanStd)) != 0) return false;
  }
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  int trials = 16;
  int objects = 24;
  if (argc > 1) trials = std::atoi(argv[1]);
  if (argc > 2) objects = std::atoi(argv[2]);

  SceneGenSpec gen;
  gen.objects = objects;
  gen.duration_us = 20'000'000;
  Rng rng = Rng::stream(7, 0, 1000);

  ExperimentSpec spec;
  spec.scene = synth_scene(gen, rng);
  spec.methods = {Method::UniKF, Method::NmsStd, Method::DistLate, Method::None};
  spec.trials = trials;
  spec.seed = 7;
  spec.pipeline.sensors = {
      {"s0", {0, 0}, false, 500'000, 0, 0, resolve_noise_preset("noise1")},
      {"s1", {0, 0}, true, 500'000, 0, 0, resolve_noise_preset("noise1")},
  };

  const int cores = static_cast<int>(std::thread::hardware_concurrency());
  std::cout << "trials=" << trials << " objects=" << objects << " cores=" << cores << "\n";

  auto t0 = std::chrono::steady_clock::now();
  const ExperimentResult serial = run_experiment_serial(spec);
  const double serial_s = seconds_since(t0);
  std::cout << "serial:   " << serial_s << " s\n";

  t0 = std::chrono::steady_clock::now();
  const ExperimentResult parallel = run_experiment(spec, cores);
  const double parallel_s = seconds_since(t0);
  std::cout << "parallel: " << parallel_s << " s  (speedup " << serial_s / parallel_s << "x)\n";

  if (!summaries_equal(serial, parallel)) {
    std::cerr << "FAIL: serial and parallel summaries differ\n";
    return 1;
  }
  std::cout << "summaries identical\n";
  return 0;
}
