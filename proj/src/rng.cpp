#include "planeval/rng.hpp"

#include <cmath>
#include <numbers>

namespace planeval {

double Rng::next_normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  // Box-Muller on two fresh uniforms; u1 nudged away from 0 for the log.
  double u1 = next_unit();
  double u2 = next_unit();
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  have_spare_ = true;
  return r * std::cos(theta);
}

}  // namespace planeval
