#ifndef ROINET_CHECKPOINT_HPP
#define ROINET_CHECKPOINT_HPP

#include <string>

#include "roinet/network.hpp"

namespace roinet {

// Binary checkpoint: magic "RSC1", format version (u32 LE), length-prefixed
// network spec text, then one entry per parameter (name length u32 + bytes,
// rank u32, extents u32 each, doubles LE row-major). Parameter round trips
// are bit-exact; the spec block alone rebuilds the architecture.
void save_checkpoint(const Network& net, const std::string& path);
Network load_checkpoint(const std::string& path);

}  // namespace roinet

#endif  // ROINET_CHECKPOINT_HPP
