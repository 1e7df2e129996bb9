#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace nvspin {

struct QuadratureConfig {
  double rel_tol = 1e-6;
  double abs_tol = 1e-18;              // T
  std::size_t max_evaluations = 20'000'000;
  int subdivision_depth = 60;
  std::size_t mc_samples = 1'000'000;
  std::uint64_t mc_seed = 20210205;
  std::size_t time_nodes = 64;         // Gauss-Legendre nodes per echo window
  std::size_t response_nodes = 16;     // nodes per window for unit responses
  unsigned threads = 0;                // 0: hardware concurrency

  void validate() const;
};

struct GaussLegendreRule {
  std::vector<double> nodes;    // on [-1, 1], ascending
  std::vector<double> weights;
};

// n-point Gauss-Legendre rule (Newton iteration on P_n).
const GaussLegendreRule& gauss_legendre(std::size_t n);

}  // namespace nvspin
