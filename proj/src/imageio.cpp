#include "roinet/imageio.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "roinet/errors.hpp"
#include "roinet/synth.hpp"

namespace roinet {

namespace {

constexpr int kMaxExtent = 1 << 15;

[[noreturn]] void format_fail(const std::string& path, const std::string& what,
                              long long offset) {
  throw FormatError(path + ": " + what + " at byte " + std::to_string(offset));
}

// Netpbm header token: skips whitespace and '#' comment lines.
int read_token(std::ifstream& in, const std::string& path) {
  int c = in.get();
  while (c != EOF && (std::isspace(c) || c == '#')) {
    if (c == '#')
      while (c != EOF && c != '\n') c = in.get();
    c = in.get();
  }
  if (c == EOF) format_fail(path, "truncated header", in.tellg());
  int value = 0;
  bool any = false;
  while (c != EOF && std::isdigit(c)) {
    value = value * 10 + (c - '0');
    any = true;
    if (value > 0x7fffff) format_fail(path, "header value overflow", in.tellg());
    c = in.get();
  }
  if (!any) format_fail(path, "expected a number", static_cast<long long>(in.tellg()) - 1);
  if (c != EOF) in.unget();
  return value;
}

struct PnmHeader {
  int w = 0, h = 0, maxval = 0;
  long long payload_at = 0;
};

PnmHeader read_header(std::ifstream& in, const std::string& path, char kind) {
  char m0 = 0, m1 = 0;
  in.get(m0);
  in.get(m1);
  if (!in || m0 != 'P' || m1 != kind)
    format_fail(path, std::string("bad magic, expected P") + kind, 0);
  PnmHeader h;
  h.w = read_token(in, path);
  h.h = read_token(in, path);
  h.maxval = read_token(in, path);
  if (h.w <= 0 || h.h <= 0 || h.w > kMaxExtent || h.h > kMaxExtent)
    format_fail(path, "extent out of range", in.tellg());
  if (h.maxval != 255) format_fail(path, "maxval must be 255", in.tellg());
  const int c = in.get();
  if (c == EOF || !std::isspace(c))
    format_fail(path, "expected whitespace before payload", in.tellg());
  h.payload_at = in.tellg();
  return h;
}

void check_extents(int h, int w) {
  if (h <= 0 || w <= 0 || h > kMaxExtent || w > kMaxExtent)
    throw ContractError("image extents " + std::to_string(h) + "x" +
                        std::to_string(w) + " out of range");
}

}  // namespace

void write_ppm(const std::string& path, const Tensor& image) {
  if (image.rank() != 3 || image.dim(0) != 3)
    throw DimensionError("PPM image must be [3,H,W], got " + shape_str(image.shape()));
  const int H = image.dim(1), W = image.dim(2);
  check_extents(H, W);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "P6\n" << W << " " << H << "\n255\n";
  std::vector<unsigned char> row(static_cast<std::size_t>(W) * 3);
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const std::size_t at = static_cast<std::size_t>(y) * W + x;
      for (int c = 0; c < 3; ++c) {
        const double v = image[static_cast<long long>(c * plane + at)];
        if (v < 0.0 || v > 1.0)
          throw ContractError("pixel value " + std::to_string(v) + " outside [0,1]");
        row[static_cast<std::size_t>(x) * 3 + static_cast<std::size_t>(c)] =
            static_cast<unsigned char>(std::lround(v * 255.0));
      }
    }
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw IoError("write failed for " + path);
}

Tensor read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  const PnmHeader h = read_header(in, path, '6');
  Tensor img({3, h.h, h.w});
  const std::size_t plane = static_cast<std::size_t>(h.h) * h.w;
  std::vector<unsigned char> row(static_cast<std::size_t>(h.w) * 3);
  for (int y = 0; y < h.h; ++y) {
    in.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(row.size()));
    if (in.gcount() != static_cast<std::streamsize>(row.size()))
      format_fail(path, "truncated pixel payload",
                  h.payload_at + static_cast<long long>(y) * h.w * 3 + in.gcount());
    for (int x = 0; x < h.w; ++x) {
      const std::size_t at = static_cast<std::size_t>(y) * h.w + x;
      for (int c = 0; c < 3; ++c)
        img[static_cast<long long>(c * plane + at)] =
            row[static_cast<std::size_t>(x) * 3 + static_cast<std::size_t>(c)] / 255.0;
    }
  }
  return img;
}

void write_pgm_mask(const std::string& path, const LabelMask& mask) {
  check_extents(mask.h, mask.w);
  mask.check_labels(3);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "P5\n" << mask.w << " " << mask.h << "\n255\n";
  out.write(reinterpret_cast<const char*>(mask.v.data()),
            static_cast<std::streamsize>(mask.v.size()));
  if (!out) throw IoError("write failed for " + path);
}

LabelMask read_pgm_mask(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  const PnmHeader h = read_header(in, path, '5');
  LabelMask mask(h.h, h.w);
  in.read(reinterpret_cast<char*>(mask.v.data()),
          static_cast<std::streamsize>(mask.v.size()));
  if (in.gcount() != static_cast<std::streamsize>(mask.v.size()))
    format_fail(path, "truncated mask payload", h.payload_at + in.gcount());
  for (std::size_t i = 0; i < mask.v.size(); ++i)
    if (mask.v[i] > 2)
      format_fail(path, "mask value " + std::to_string(int(mask.v[i])) +
                            " outside {0,1,2}",
                  h.payload_at + static_cast<long long>(i));
  return mask;
}

void write_pgm_gray(const std::string& path, int h, int w,
                    const std::vector<unsigned char>& bytes) {
  check_extents(h, w);
  if (bytes.size() != static_cast<std::size_t>(h) * w)
    throw DimensionError("gray payload size does not match extents");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "P5\n" << w << " " << h << "\n255\n";
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path);
}

void write_roi_montage(const std::string& path, const Tensor& image,
                       const LabelMask& truth, const LabelMask& pred) {
  if (image.rank() != 3 || image.dim(0) != 3)
    throw DimensionError("montage image must be [3,H,W]");
  const int H = image.dim(1), W = image.dim(2);
  if (truth.h != H || truth.w != W || pred.h != H || pred.w != W)
    throw DimensionError("montage mask extents disagree with the image");
  const int gap = 2;
  const int MW = 3 * W + 2 * gap;
  Tensor canvas = Tensor::full({3, H, MW}, 1.0);
  const std::size_t cplane = static_cast<std::size_t>(H) * MW;
  const std::size_t iplane = static_cast<std::size_t>(H) * W;
  auto put = [&](int x0, int c, int y, int x, double v) {
    canvas[static_cast<long long>(c * cplane + static_cast<std::size_t>(y) * MW +
                                  x0 + x)] = v;
  };
  // Label tints: background dark gray, leaf green, spot red.
  const double tint[3][3] = {{0.15, 0.15, 0.15}, {0.20, 0.75, 0.25}, {0.85, 0.15, 0.10}};
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const std::size_t at = static_cast<std::size_t>(y) * W + x;
      for (int c = 0; c < 3; ++c) {
        put(0, c, y, x, image[static_cast<long long>(c * iplane + at)]);
        put(W + gap, c, y, x, tint[truth.v[at]][c]);
        put(2 * (W + gap), c, y, x, tint[pred.v[at]][c]);
      }
    }
  // Keep montage pixels on the 8-bit grid like every written image.
  for (long long i = 0; i < canvas.numel(); ++i)
    canvas[i] = std::round(canvas[i] * 255.0) / 255.0;
  write_ppm(path, canvas);
}

void write_dataset(const std::string& dir, const std::vector<Sample>& ds) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());

  std::ofstream manifest(dir + "/manifest.txt", std::ios::trunc);
  if (!manifest) throw IoError("cannot write " + dir + "/manifest.txt");

  std::vector<int> per_class;
  for (const Sample& s : ds) {
    if (static_cast<int>(per_class.size()) <= s.label)
      per_class.resize(static_cast<std::size_t>(s.label) + 1, 0);
    char name[64];
    std::snprintf(name, sizeof name, "cls%d_%03d", s.label,
                  per_class[static_cast<std::size_t>(s.label)]++);
    const std::string stem = name;
    write_ppm(dir + "/" + stem + ".ppm", s.image);
    write_pgm_mask(dir + "/" + stem + ".pgm", s.mask);
    manifest << stem << ".ppm " << s.label << "\n";
  }
  if (!manifest.flush()) throw IoError("short write to " + dir + "/manifest.txt");
}

std::vector<Sample> read_dataset(const std::string& dir) {
  const std::string mpath = dir + "/manifest.txt";
  std::ifstream manifest(mpath);
  if (!manifest) throw IoError("cannot open " + mpath);

  std::vector<Sample> ds;
  std::string line;
  int line_no = 0;
  while (std::getline(manifest, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::size_t sp = line.rfind(' ');
    std::size_t parsed = 0;
    int label = -1;
    if (sp != std::string::npos && sp > 0) {
      try {
        label = std::stoi(line.substr(sp + 1), &parsed);
      } catch (const std::exception&) {
        parsed = 0;
      }
    }
    if (parsed == 0 || parsed != line.size() - sp - 1 || label < 0)
      throw FormatError(mpath + ":" + std::to_string(line_no) +
                        ": expected '<image> <label>'");
    const std::string rel = line.substr(0, sp);
    if (rel.size() < 4 || rel.substr(rel.size() - 4) != ".ppm")
      throw FormatError(mpath + ":" + std::to_string(line_no) +
                        ": image path must end in .ppm");
    Sample s;
    s.image = read_ppm(dir + "/" + rel);
    s.mask = read_pgm_mask(dir + "/" + rel.substr(0, rel.size() - 4) + ".pgm");
    s.label = label;
    if (s.mask.h != s.image.shape()[1] || s.mask.w != s.image.shape()[2])
      throw FormatError(mpath + ":" + std::to_string(line_no) +
                        ": mask extent does not match image");
    ds.push_back(std::move(s));
  }
  if (ds.empty()) throw DataError(mpath + ": empty manifest");
  return ds;
}

}  // namespace roinet
