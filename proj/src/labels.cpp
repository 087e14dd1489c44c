#include "tsvmorph/labels.hpp"

#include <cmath>

namespace tsvmorph {

bool is_valid_soft_label(const SoftLabel& s) {
  double sum = 0;
  for (double v : s) {
    if (!(v >= 0.0) || !std::isfinite(v)) return false;
    sum += v;
  }
  return std::abs(sum - 1.0) <= 1e-6;
}

MorphologyLabel argmax(const SoftLabel& s) {
  int best = 0;
  for (int i = 1; i < kNumClasses; ++i)
    if (s[i] > s[best]) best = i;
  return static_cast<MorphologyLabel>(best);
}

}  // namespace tsvmorph
