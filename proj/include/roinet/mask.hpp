#ifndef ROINET_MASK_HPP
#define ROINET_MASK_HPP

#include <cstdint>
#include <vector>

#include "roinet/errors.hpp"

namespace roinet {

// H x W grid of small class ids (0 = background, 1 = leaf, 2 = spot for the
// segmentation task; also reused for binary region masks).
struct LabelMask {
  int h = 0, w = 0;
  std::vector<std::uint8_t> v;

  LabelMask() = default;
  LabelMask(int h_, int w_) : h(h_), w(w_), v(static_cast<std::size_t>(h_) * w_, 0) {}

  std::uint8_t& at(int r, int c) { return v[static_cast<std::size_t>(r) * w + c]; }
  std::uint8_t at(int r, int c) const { return v[static_cast<std::size_t>(r) * w + c]; }
  long long numel() const { return static_cast<long long>(h) * w; }

  bool same_shape(const LabelMask& o) const { return h == o.h && w == o.w; }

  void check_labels(int num_classes) const {
    for (auto x : v)
      if (x >= num_classes)
        throw ContractError("mask label " + std::to_string(int(x)) +
                            " out of range [0, " + std::to_string(num_classes) + ")");
  }
};

}  // namespace roinet

#endif  // ROINET_MASK_HPP
