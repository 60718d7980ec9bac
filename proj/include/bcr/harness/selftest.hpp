#pragma once

// Built-in numeric checks of the logarithmic intrinsic reward: the worked
// three-action example and the rare-action amplification properties.

#include <cstdint>
#include <string>
#include <vector>

namespace bcr::harness {

struct SelftestCheck {
  std::string name;
  bool pass = false;
  std::string detail;
};

// p = (0.7, 0.2, 0.1): |log p| = (0.357, 1.609, 2.303), -p log p =
// (0.250, 0.322, 0.230), amplification 2.303 / 0.357 in [6.4, 6.5].
std::vector<SelftestCheck> example_checks();

// For `samples` random (p1, eps): |log(eps p1)| / |log p1| equals
// 1 + ln(1/eps) / ln(1/p1) within 1e-9, in both the delta = 0 and the
// delta = 1 (counterfactual likelihood 1) forms; and the entropy ratio
// decreases monotonically as eps runs over 1e-1 ... 1e-6.
std::vector<SelftestCheck> amplification_checks(int samples = 1000, std::uint64_t seed = 7);

std::vector<SelftestCheck> run_selftest();

}  // namespace bcr::harness
