// SPDX-License-Identifier: Apache-2.0
// Prints one PASS/FAIL line per acceptance criterion and exits nonzero on any failure.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "altlora/verify.hpp"

namespace {

using altlora::CheckResult;
using Results = std::vector<CheckResult>;

struct Criterion {
  int number;
  const char* title;
  std::vector<const char*> checks;
  double time_limit_seconds;
  // Independent re-assertion against tolerances pinned here.
  std::function<bool(const Results&)> accept;
};

bool within(const CheckResult& r, double tol) { return r.passed && r.max_deviation <= tol; }

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> list = {
      {1, "closed-form scaled gradients", {"lstsq.scaled_grad_a", "lstsq.scaled_grad_b"}, 10.0,
       [](const Results& r) { return r[0].instances == 200 && r[1].instances == 200 && within(r[0], 1e-9) &&
                                  within(r[1], 1e-9); }},
      {2, "momentum alignment optimality", {"lstsq.align_momentum_a", "lstsq.align_momentum_b"}, 10.0,
       [](const Results& r) { return r[0].instances == 200 && r[1].instances == 200 && within(r[0], 1e-9) &&
                                  within(r[1], 1e-9); }},
      {3, "pair-step decomposition",
       {"decomposition.alternating_residual", "decomposition.cross_term", "decomposition.eta_order"}, 10.0,
       [](const Results& r) {
         return r[0].instances == 100 && r[1].instances == 100 && within(r[0], 1e-10) &&
                within(r[1], 1e-10) && within(r[2], 0.01) &&
                r[2].data.value("max_cross_slope_error", 1.0) <= 0.01 &&
                r[2].data.value("max_projector_slope_error", 1.0) <= 0.01;
       }},
      {4, "projector gauge invariance", {"projector.gauge_invariance"}, 5.0,
       [](const Results& r) { return r[0].instances == 200 && r[0].passed && r[0].max_deviation < 1e-9; }},
      {5, "trajectory gauge invariance",
       {"invariance.altlora", "invariance.altlora_momentum", "invariance.lora_adam_negative"}, 60.0,
       [](const Results& r) {
         return r[0].instances == 20 && r[1].instances == 20 && within(r[0], 1e-6) && within(r[1], 1e-6) &&
                r[2].passed && r[2].max_deviation > 1e-3;
       }},
      {6, "LoRA-Pro X independence", {"lorapro.x_independence"}, 5.0,
       [](const Results& r) { return r[0].instances == 50 && within(r[0], 1e-10); }},
      {7, "condition-number robustness", {"bench.condition_number"}, 300.0,
       [](const Results& r) {
         const auto& d = r[0].data;
         const auto sgd = d.at("lora_sgd_steps").get<std::vector<long>>();
         return r[0].passed && d.at("altlora_ratio").get<double>() < 2.0 &&
                d.at("lora_sgd_ratio").get<double>() >= 5.0 && sgd[0] > 0 && sgd[0] < sgd[1] && sgd[1] < sgd[2];
       }},
      {8, "width-stable feature learning", {"bench.width_scaling"}, 180.0,
       [](const Results& r) {
         const double slope = r[0].data.at("altlora_slope").get<double>();
         return r[0].passed && slope >= -0.25 && slope <= 0.25;
       }},
      {9, "optimizer state accounting", {"accounting.state_budget"}, 1.0,
       [](const Results& r) {
         const auto& d = r[0].data;
         return r[0].passed && d.at("full_moment_reference").get<long>() == 33554432 &&
                d.at("altlora_plus_state").get<long>() <= 393216 && d.at("reduction").get<double>() >= 100.0;
       }},
      {10, "finite-difference gradients", {"gradient.finite_difference"}, 30.0,
       [](const Results& r) { return within(r[0], 1e-6); }},
      {11, "A-first stall from B = 0", {"stall.b_zero_a_first"}, 1.0,
       [](const Results& r) { return r[0].passed && r[0].max_deviation == 0.0; }},
      {12, "deterministic run records", {"bench.determinism"}, 30.0,
       [](const Results& r) { return r[0].passed; }},
  };
  return list;
}

}  // namespace

int main() {
  int failures = 0;
  for (const Criterion& c : criteria()) {
    std::vector<CheckResult> results;
    const auto start = std::chrono::steady_clock::now();
    for (const char* name : c.checks) {
      results.push_back(altlora::run_check(name));
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool ok = c.accept(results) && seconds < c.time_limit_seconds;
    failures += ok ? 0 : 1;
    std::printf("%s criterion %d: %s (%.2f s, limit %.0f s)\n", ok ? "PASS" : "FAIL", c.number, c.title, seconds,
                c.time_limit_seconds);
    for (const CheckResult& r : results) {
      std::printf("    %-36s deviation %.3g tolerance %.3g\n", r.name.c_str(), r.max_deviation, r.tolerance);
    }
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria().size()) - failures, criteria().size());
  return failures == 0 ? 0 : 1;
}
