#pragma once

#include <vector>

#include "dmcc/image.hpp"

namespace dmcc {

// Summary statistics of per-image angular errors (degrees). Quantiles use
// linear interpolation between closest ranks; best25/worst25 average the
// lowest/highest ceil(n/4) values; trimean = (Q1 + 2*median + Q3) / 4.
struct ErrorSummary {
  long n = 0;
  double mean = 0.0;
  double median = 0.0;
  double trimean = 0.0;
  double best25 = 0.0;
  double worst25 = 0.0;
};

ErrorSummary summarize(const std::vector<double>& errors_deg);

// Statistical baselines, all over unmasked pixels of a preprocessed image.
Illuminant baseline_gray_world(const LinearImage& image, const PixelMask& mask);
Illuminant baseline_white_patch(const LinearImage& image, const PixelMask& mask);
Illuminant baseline_shades_of_gray(const LinearImage& image, const PixelMask& mask,
                                   double p = 6.0);

}  // namespace dmcc
