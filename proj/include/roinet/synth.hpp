#ifndef ROINET_SYNTH_HPP
#define ROINET_SYNTH_HPP

#include <array>
#include <cstdint>
#include <vector>

#include "roinet/mask.hpp"
#include "roinet/rng.hpp"
#include "roinet/tensor.hpp"

namespace roinet {

// One labeled scene. image is [3,H,W] in [0,1] (snapped to the 8-bit grid so
// file round trips are exact); mask labels: 0 background, 1 leaf, 2 spot.
// Healthy samples (label 0) carry an all-background mask: a disease-free
// leaf counts as background.
struct Sample {
  Tensor image;
  LabelMask mask;
  int label = 0;
};

struct GenConfig {
  int size = 96;
  std::array<int, 3> class_counts{118, 120, 166};
  // Scene difficulty knobs: clutter scales distractor leaves / blobs /
  // branches, palette_overlap in [0,1] pulls the blotch palette toward the
  // leaf greens (1 = authored confusable palette).
  double clutter = 1.0;
  double palette_overlap = 1.0;
  int spots_min = 2;
  int spots_max = 12;
  double spot_radius_min = 0.035;  // fraction of image size
  double spot_radius_max = 0.085;
  std::uint64_t master_seed = 1009;

  void validate() const;
};

// Splittable per-sample seed: depends only on (master, class, index).
std::uint64_t sample_seed(std::uint64_t master, int cls, int index);

// Renders one scene: value-noise background, branches, disease-colored
// clutter blobs, distractor leaves (all labeled background), and a primary
// leaf that carries 2..12 spots when the class is diseased.
Sample gen_scene(std::uint64_t seed, int cls, const GenConfig& cfg);

// All classes, counts from cfg, ordered class-major then by index.
std::vector<Sample> gen_dataset(const GenConfig& cfg);

// Palettes, exposed for the confusability check and the tests.
std::vector<std::array<double, 3>> leaf_palette();
std::vector<std::array<double, 3>> blotch_palette(double overlap);
std::vector<std::array<double, 3>> alternaria_palette();

}  // namespace roinet

#endif  // ROINET_SYNTH_HPP
