#ifndef ROINET_IMAGEIO_HPP
#define ROINET_IMAGEIO_HPP

#include <string>
#include <vector>

#include "roinet/mask.hpp"
#include "roinet/tensor.hpp"

namespace roinet {

// Binary PPM (P6), 8-bit channels. Image is [3,H,W] in [0,1]; writing
// quantizes to round(v*255). Reading back yields byte/255 values, so images
// already snapped to that grid round-trip exactly.
void write_ppm(const std::string& path, const Tensor& image);
Tensor read_ppm(const std::string& path);

// Binary PGM (P5) carrying label values {0,1,2}. Round trip is bit-exact;
// reading rejects any other value with the offending byte offset.
void write_pgm_mask(const std::string& path, const LabelMask& mask);
LabelMask read_pgm_mask(const std::string& path);

// Grayscale P5 with arbitrary 8-bit payload (inspection renders).
void write_pgm_gray(const std::string& path, int h, int w,
                    const std::vector<unsigned char>& bytes);

// Side-by-side inspection montage: input image, ground truth, prediction.
// Masks are tinted (background dark, leaf green, spot red).
void write_roi_montage(const std::string& path, const Tensor& image,
                       const LabelMask& truth, const LabelMask& pred);

// Dataset directory layout: manifest.txt lines are "<image> <label>" with
// paths relative to the directory; each image's mask sits next to it with
// the .ppm extension swapped for .pgm. write_dataset names samples
// cls<label>_<index>.ppm.
struct Sample;
void write_dataset(const std::string& dir, const std::vector<Sample>& ds);
std::vector<Sample> read_dataset(const std::string& dir);

}  // namespace roinet

#endif  // ROINET_IMAGEIO_HPP
