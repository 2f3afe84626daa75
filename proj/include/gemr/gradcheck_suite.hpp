#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "gemr/attention.hpp"

namespace gemr {

inline constexpr double kGradcheckTolerance = 1e-4;
inline constexpr double kGradcheckStep = 1e-3;
inline constexpr double kGradcheckFallbackStep = 1e-4;
/// Trials whose batch-norm inputs have a feature with smaller batch variance
/// are redrawn before any gradient is compared.
inline constexpr double kMinBatchVariance = 0.1;

struct GradcheckWorst {
  double error = 0.0;
  Mechanism mechanism = Mechanism::Average;
  std::string parameter;
  std::size_t trial = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

struct GradcheckReport {
  std::size_t configurations = 0;     // per mechanism
  std::size_t checked = 0;            // scalar entries compared
  std::size_t failures = 0;           // entries at or above the tolerance
  std::size_t kink_crossings = 0;     // excluded: every stencil crossed a ReLU kink
  std::size_t redrawn = 0;            // trials rejected as ill-conditioned
  std::vector<GradcheckWorst> per_mechanism;  // worst case for each mechanism
  GradcheckWorst worst;
  bool passed() const { return worst.error < kGradcheckTolerance; }
};

/// End-to-end check of tape gradients against central differences for every
/// trainable tensor of a double-precision model. Each trial draws a small
/// random architecture and a train-mode batch of four samples with 1 to 6
/// faces; dropout masks are fixed by reseeding before every evaluation. An
/// entry is compared with step 1e-3 and, if that misses the tolerance, again
/// with 1e-4; the smaller error counts. An entry that still misses while its
/// stencil changed some ReLU mask is not differentiable at that scale; it is
/// counted in kink_crossings and left out of the worst case.
GradcheckReport run_gradcheck_suite(std::uint64_t seed, std::size_t trials_per_mechanism);

std::string describe(const GradcheckWorst& worst);

}  // namespace gemr
