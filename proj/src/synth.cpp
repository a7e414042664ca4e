#include "roinet/synth.hpp"

#include <algorithm>
#include <cmath>

#include "roinet/errors.hpp"

namespace roinet {

namespace {

using Color = std::array<double, 3>;

Color lerp(const Color& a, const Color& b, double t) {
  return {a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t,
          a[2] + (b[2] - a[2]) * t};
}

const std::vector<Color>& leaf_greens() {
  static const std::vector<Color> p{{0.20, 0.45, 0.13},
                                    {0.26, 0.52, 0.16},
                                    {0.32, 0.57, 0.19},
                                    {0.17, 0.39, 0.11},
                                    {0.38, 0.58, 0.21}};
  return p;
}

// overlap = 0: yellowish, well separated from the leaf greens.
// overlap = 1: olive tones sitting close to them.
const std::vector<Color>& blotch_far() {
  static const std::vector<Color> p{{0.66, 0.60, 0.18},
                                    {0.72, 0.64, 0.22},
                                    {0.60, 0.55, 0.14},
                                    {0.68, 0.58, 0.16},
                                    {0.58, 0.52, 0.12}};
  return p;
}
const std::vector<Color>& blotch_near() {
  static const std::vector<Color> p{{0.33, 0.47, 0.13},
                                    {0.40, 0.52, 0.15},
                                    {0.30, 0.43, 0.11},
                                    {0.44, 0.55, 0.18},
                                    {0.36, 0.50, 0.16}};
  return p;
}

const std::vector<Color>& alternaria_browns() {
  static const std::vector<Color> p{{0.42, 0.25, 0.10},
                                    {0.48, 0.30, 0.13},
                                    {0.36, 0.21, 0.08},
                                    {0.52, 0.33, 0.15},
                                    {0.31, 0.17, 0.07}};
  return p;
}

const std::vector<Color>& ground_tones() {
  static const std::vector<Color> p{{0.47, 0.41, 0.33},
                                    {0.55, 0.50, 0.42},
                                    {0.40, 0.36, 0.30},
                                    {0.62, 0.57, 0.46},
                                    {0.35, 0.32, 0.27}};
  return p;
}

const std::vector<Color>& branch_tones() {
  static const std::vector<Color> p{{0.23, 0.16, 0.09},
                                    {0.29, 0.21, 0.12},
                                    {0.18, 0.12, 0.07}};
  return p;
}

Color pick(const std::vector<Color>& palette, Rng& rng) {
  return palette[static_cast<std::size_t>(
      rng.uniform_int(0, static_cast<int>(palette.size()) - 1))];
}

Color jitter(Color c, Rng& rng, double amt) {
  for (double& v : c) v = std::clamp(v + rng.uniform(-amt, amt), 0.0, 1.0);
  return c;
}

// Bilinearly interpolated random lattice, two octaves.
class ValueNoise {
 public:
  ValueNoise(int size, int cell, Rng& rng) : cell_(cell) {
    n_ = size / cell + 3;
    grid_.resize(static_cast<std::size_t>(n_) * n_);
    for (double& v : grid_) v = rng.uniform();
  }

  double at(double x, double y) const {
    const double gx = x / cell_, gy = y / cell_;
    const int ix = static_cast<int>(gx), iy = static_cast<int>(gy);
    const double fx = gx - ix, fy = gy - iy;
    const double sx = fx * fx * (3 - 2 * fx), sy = fy * fy * (3 - 2 * fy);
    auto g = [&](int i, int j) {
      return grid_[static_cast<std::size_t>(std::min(j, n_ - 1)) * n_ +
                   std::min(i, n_ - 1)];
    };
    const double top = g(ix, iy) + (g(ix + 1, iy) - g(ix, iy)) * sx;
    const double bot = g(ix, iy + 1) + (g(ix + 1, iy + 1) - g(ix, iy + 1)) * sx;
    return top + (bot - top) * sy;
  }

 private:
  int cell_, n_;
  std::vector<double> grid_;
};

struct Canvas {
  int size;
  Tensor img;  // [3,S,S]

  explicit Canvas(int s) : size(s), img({3, s, s}) {}

  void set(int x, int y, const Color& c) {
    const std::size_t plane = static_cast<std::size_t>(size) * size;
    const std::size_t at = static_cast<std::size_t>(y) * size + x;
    img[static_cast<long long>(at)] = c[0];
    img[static_cast<long long>(plane + at)] = c[1];
    img[static_cast<long long>(2 * plane + at)] = c[2];
  }
  Color get(int x, int y) const {
    const std::size_t plane = static_cast<std::size_t>(size) * size;
    const std::size_t at = static_cast<std::size_t>(y) * size + x;
    return {img[static_cast<long long>(at)], img[static_cast<long long>(plane + at)],
            img[static_cast<long long>(2 * plane + at)]};
  }
  void blend(int x, int y, const Color& c, double alpha) {
    set(x, y, lerp(get(x, y), c, std::clamp(alpha, 0.0, 1.0)));
  }
};

// Rotated superellipse |u|^p + |v|^p <= 1 in normalized leaf coordinates.
struct LeafShape {
  double cx, cy, a, b, cr, sr, p;

  // Normalized coordinates of an image point.
  void uv(double x, double y, double& u, double& v) const {
    const double dx = x - cx, dy = y - cy;
    u = (cr * dx + sr * dy) / a;
    v = (-sr * dx + cr * dy) / b;
  }
  double se(double x, double y) const {
    double u, v;
    uv(x, y, u, v);
    return std::pow(std::abs(u), p) + std::pow(std::abs(v), p);
  }
  bool inside(double x, double y) const { return se(x, y) <= 1.0; }
};

struct Spot {
  double x, y, r;
  double w3, p3, w5, p5;  // angular wobble of the boundary radius
  Color color;
  bool dark_rim;

  double radius_at(double ang) const {
    return r * (1.0 + w3 * std::sin(3 * ang + p3) + w5 * std::sin(5 * ang + p5));
  }
  bool contains(double px, double py) const {
    const double dx = px - x, dy = py - y;
    return std::sqrt(dx * dx + dy * dy) < radius_at(std::atan2(dy, dx));
  }
};

Spot make_spot(double x, double y, double r, const Color& c, bool dark_rim, Rng& rng) {
  Spot s;
  s.x = x;
  s.y = y;
  s.r = r;
  s.w3 = rng.uniform(0.08, 0.25);
  s.p3 = rng.uniform(0.0, 6.283185307179586);
  s.w5 = rng.uniform(0.04, 0.14);
  s.p5 = rng.uniform(0.0, 6.283185307179586);
  s.color = c;
  s.dark_rim = dark_rim;
  return s;
}

// Paints leaf body and veins; fills `support` (when non-null) with exact
// membership. Spots are clipped to the body.
void draw_leaf(Canvas& cv, const LeafShape& sh, const Color& green,
               const std::vector<Spot>& spots, const ValueNoise& tex,
               std::vector<uint8_t>* support, std::vector<uint8_t>* spot_support) {
  const int S = cv.size;
  const double reach = std::max(sh.a, sh.b);
  const int x0 = std::max(0, static_cast<int>(sh.cx - reach - 1));
  const int x1 = std::min(S - 1, static_cast<int>(sh.cx + reach + 1));
  const int y0 = std::max(0, static_cast<int>(sh.cy - reach - 1));
  const int y1 = std::min(S - 1, static_cast<int>(sh.cy + reach + 1));
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      if (!sh.inside(x, y)) continue;
      double u, v;
      sh.uv(x, y, u, v);
      // Shading: midrib, parallel lateral veins, lighting gradient, noise.
      double f = 0.90 + 0.18 * (u + 1.0) * 0.5;
      if (std::abs(v) * sh.b < 0.9) f *= 0.80;
      const double lat = std::abs(std::fmod(u * 2.2 + v * 1.4 + 10.0, 0.45) - 0.225);
      if (lat < 0.025) f *= 0.86;
      f *= 0.93 + 0.14 * tex.at(x * 1.7 + 31.0, y * 1.7 + 7.0);
      Color c{std::clamp(green[0] * f, 0.0, 1.0), std::clamp(green[1] * f, 0.0, 1.0),
              std::clamp(green[2] * f, 0.0, 1.0)};
      bool in_spot = false;
      for (const Spot& sp : spots) {
        if (!sp.contains(x, y)) continue;
        in_spot = true;
        const double dx = x - sp.x, dy = y - sp.y;
        const double d = std::sqrt(dx * dx + dy * dy);
        const double rb = sp.radius_at(std::atan2(dy, dx));
        double sf = 0.9 + 0.2 * tex.at(x * 2.3 + 101.0, y * 2.3 + 53.0);
        if (sp.dark_rim && d > 0.68 * rb) sf *= 0.55;
        c = {std::clamp(sp.color[0] * sf, 0.0, 1.0),
             std::clamp(sp.color[1] * sf, 0.0, 1.0),
             std::clamp(sp.color[2] * sf, 0.0, 1.0)};
        break;
      }
      cv.set(x, y, c);
      if (support) (*support)[static_cast<std::size_t>(y) * S + x] = 1;
      if (spot_support && in_spot)
        (*spot_support)[static_cast<std::size_t>(y) * S + x] = 1;
    }
}

void draw_branch(Canvas& cv, double x0, double y0, double x1, double y1,
                 double width, const Color& c, const ValueNoise& tex) {
  const int S = cv.size;
  const double vx = x1 - x0, vy = y1 - y0;
  const double len2 = vx * vx + vy * vy;
  for (int y = 0; y < S; ++y)
    for (int x = 0; x < S; ++x) {
      const double t = len2 > 0 ? std::clamp(((x - x0) * vx + (y - y0) * vy) / len2, 0.0, 1.0) : 0.0;
      const double dx = x - (x0 + t * vx), dy = y - (y0 + t * vy);
      const double d = std::sqrt(dx * dx + dy * dy);
      if (d < width) {
        const double f = 0.85 + 0.3 * tex.at(x * 1.3, y * 1.3);
        cv.blend(x, y, {c[0] * f, c[1] * f, c[2] * f}, 1.0 - d / width * 0.4);
      }
    }
}

void draw_blob(Canvas& cv, double cx, double cy, double rx, double ry, double rot,
               const Color& c, const ValueNoise& tex) {
  const int S = cv.size;
  const double cr = std::cos(rot), sr = std::sin(rot);
  const double reach = std::max(rx, ry);
  const int x0 = std::max(0, static_cast<int>(cx - reach - 1));
  const int x1 = std::min(S - 1, static_cast<int>(cx + reach + 1));
  const int y0 = std::max(0, static_cast<int>(cy - reach - 1));
  const int y1 = std::min(S - 1, static_cast<int>(cy + reach + 1));
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      const double dx = x - cx, dy = y - cy;
      const double u = (cr * dx + sr * dy) / rx, v = (-sr * dx + cr * dy) / ry;
      const double q = u * u + v * v;
      if (q >= 1.0) continue;
      const double f = 0.9 + 0.2 * tex.at(x * 2.0 + 57.0, y * 2.0 + 13.0);
      cv.blend(x, y, {c[0] * f, c[1] * f, c[2] * f}, std::pow(1.0 - q, 0.6));
    }
}

LeafShape random_leaf(Rng& rng, double cx, double cy, double a, double ratio_lo,
                      double ratio_hi) {
  LeafShape sh;
  sh.cx = cx;
  sh.cy = cy;
  sh.a = a;
  sh.b = a * rng.uniform(ratio_lo, ratio_hi);
  const double rot = rng.uniform(0.0, 3.141592653589793);
  sh.cr = std::cos(rot);
  sh.sr = std::sin(rot);
  sh.p = rng.uniform(1.6, 2.6);
  return sh;
}

}  // namespace

std::vector<Color> leaf_palette() { return leaf_greens(); }

std::vector<Color> blotch_palette(double overlap) {
  std::vector<Color> out;
  out.reserve(blotch_far().size());
  for (std::size_t i = 0; i < blotch_far().size(); ++i)
    out.push_back(lerp(blotch_far()[i], blotch_near()[i], overlap));
  return out;
}

std::vector<Color> alternaria_palette() { return alternaria_browns(); }

void GenConfig::validate() const {
  if (size < 32 || size % 16 != 0)
    throw ConfigError("image size must be a multiple of 16 and at least 32");
  for (int c : class_counts)
    if (c <= 0) throw ConfigError("per-class counts must be positive");
  if (clutter < 0.0) throw ConfigError("clutter must be non-negative");
  if (palette_overlap < 0.0 || palette_overlap > 1.0)
    throw ConfigError("palette_overlap must lie in [0,1]");
  if (spots_min < 1 || spots_max < spots_min)
    throw ConfigError("spot count range invalid");
  if (spot_radius_min <= 0.0 || spot_radius_max < spot_radius_min ||
      spot_radius_max >= 0.5)
    throw ConfigError("spot radius range invalid");
}

std::uint64_t sample_seed(std::uint64_t master, int cls, int index) {
  return mix_seed(mix_seed(master, 0xC1A55ull + static_cast<std::uint64_t>(cls)),
                  static_cast<std::uint64_t>(index));
}

Sample gen_scene(std::uint64_t seed, int cls, const GenConfig& cfg) {
  if (cls < 0 || cls > 2)
    throw ContractError("class " + std::to_string(cls) + " outside {0,1,2}");
  cfg.validate();
  const int S = cfg.size;
  Rng rng(seed);
  Canvas cv(S);
  ValueNoise noise(S, std::max(6, S / 8), rng);
  ValueNoise fine(S, std::max(3, S / 24), rng);

  // Ground: two tones mixed by low-frequency noise, roughened by fine noise.
  Color g0 = jitter(pick(ground_tones(), rng), rng, 0.03);
  Color g1 = jitter(pick(ground_tones(), rng), rng, 0.03);
  for (int y = 0; y < S; ++y)
    for (int x = 0; x < S; ++x) {
      Color c = lerp(g0, g1, noise.at(x, y));
      const double f = 0.88 + 0.24 * fine.at(x, y);
      cv.set(x, y, {std::clamp(c[0] * f, 0.0, 1.0), std::clamp(c[1] * f, 0.0, 1.0),
                    std::clamp(c[2] * f, 0.0, 1.0)});
    }

  // Branches crossing the frame.
  const int n_branch = 1 + rng.uniform_int(0, std::max(0, static_cast<int>(cfg.clutter * 2)));
  for (int i = 0; i < n_branch; ++i) {
    const Color bc = jitter(pick(branch_tones(), rng), rng, 0.02);
    draw_branch(cv, rng.uniform(-0.2, 1.2) * S, rng.uniform(-0.2, 1.2) * S,
                rng.uniform(-0.2, 1.2) * S, rng.uniform(-0.2, 1.2) * S,
                rng.uniform(1.2, 2.8), bc, fine);
  }

  // Disease-colored clutter blobs: present in every class so spot-like color
  // off the leaf carries no label signal.
  const int n_blob = static_cast<int>(std::lround(cfg.clutter * rng.uniform(2.0, 5.0)));
  for (int i = 0; i < n_blob; ++i) {
    const bool brown = rng.uniform() < 0.5;
    const Color bc = jitter(brown ? pick(alternaria_browns(), rng)
                                  : pick(blotch_palette(cfg.palette_overlap), rng),
                            rng, 0.03);
    draw_blob(cv, rng.uniform(0.0, 1.0) * S, rng.uniform(0.0, 1.0) * S,
              rng.uniform(0.02, 0.07) * S, rng.uniform(0.02, 0.07) * S,
              rng.uniform(0.0, 3.141592653589793), bc, fine);
  }

  // Distractor leaves: smaller, off to the sides, labeled background. Half
  // of them carry spots of a random disease so that "spots somewhere in the
  // image" is not a class signal.
  const int n_distract = static_cast<int>(std::lround(
      cfg.clutter * rng.uniform(1.0, 3.0)));
  for (int i = 0; i < n_distract; ++i) {
    const double edge = rng.uniform() < 0.5 ? rng.uniform(0.02, 0.25)
                                            : rng.uniform(0.75, 0.98);
    double dx, dy;
    if (rng.uniform() < 0.5) {
      dx = edge * S;
      dy = rng.uniform(0.02, 0.98) * S;
    } else {
      dx = rng.uniform(0.02, 0.98) * S;
      dy = edge * S;
    }
    LeafShape sh = random_leaf(rng, dx, dy, rng.uniform(0.09, 0.16) * S, 0.5, 0.8);
    const Color green = jitter(pick(leaf_greens(), rng), rng, 0.04);
    std::vector<Spot> spots;
    if (rng.uniform() < 0.5) {
      const bool brown = rng.uniform() < 0.5;
      const int n = rng.uniform_int(1, 4);
      for (int k = 0; k < n; ++k) {
        const Color sc = jitter(brown ? pick(alternaria_browns(), rng)
                                      : pick(blotch_palette(cfg.palette_overlap), rng),
                                rng, 0.02);
        spots.push_back(make_spot(sh.cx + rng.uniform(-0.5, 0.5) * sh.a,
                                  sh.cy + rng.uniform(-0.5, 0.5) * sh.b,
                                  rng.uniform(0.02, 0.045) * S, sc, brown, rng));
      }
    }
    draw_leaf(cv, sh, green, spots, fine, nullptr, nullptr);
  }

  // Primary leaf: large, near the center, drawn last so nothing occludes it.
  LeafShape main = random_leaf(
      rng, (0.5 + rng.uniform(-0.08, 0.08)) * S, (0.5 + rng.uniform(-0.08, 0.08)) * S,
      rng.uniform(0.26, 0.36) * S, 0.55, 0.85);
  const Color green = jitter(pick(leaf_greens(), rng), rng, 0.04);

  std::vector<Spot> spots;
  if (cls != 0) {
    const int n = rng.uniform_int(cfg.spots_min, cfg.spots_max);
    for (int k = 0; k < n; ++k) {
      double sx = main.cx, sy = main.cy;
      for (int attempt = 0; attempt < 64; ++attempt) {
        const double tx = main.cx + rng.uniform(-1.0, 1.0) * main.a;
        const double ty = main.cy + rng.uniform(-1.0, 1.0) * main.a;
        if (main.se(tx, ty) <= 0.8) {
          sx = tx;
          sy = ty;
          break;
        }
      }
      const double r = (cfg.spot_radius_min +
                        (cfg.spot_radius_max - cfg.spot_radius_min) *
                            std::pow(rng.uniform(), 1.3)) *
                       S;
      const Color sc = jitter(cls == 1 ? pick(blotch_palette(cfg.palette_overlap), rng)
                                       : pick(alternaria_browns(), rng),
                              rng, 0.02);
      spots.push_back(make_spot(sx, sy, r, sc, cls == 2, rng));
    }
  }

  std::vector<uint8_t> support(static_cast<std::size_t>(S) * S, 0);
  std::vector<uint8_t> spot_support(static_cast<std::size_t>(S) * S, 0);
  draw_leaf(cv, main, green, spots, fine, &support, &spot_support);

  Sample s;
  s.label = cls;
  s.mask = LabelMask(S, S);
  if (cls != 0) {
    // Disease-free leaves count as background, so only diseased samples get
    // leaf/spot labels.
    for (long long i = 0; i < s.mask.numel(); ++i) {
      if (spot_support[static_cast<std::size_t>(i)])
        s.mask.v[static_cast<std::size_t>(i)] = 2;
      else if (support[static_cast<std::size_t>(i)])
        s.mask.v[static_cast<std::size_t>(i)] = 1;
    }
  }

  // Snap to the 8-bit grid the image files use, making disk round trips exact.
  for (long long i = 0; i < cv.img.numel(); ++i)
    cv.img[i] = std::round(std::clamp(cv.img[i], 0.0, 1.0) * 255.0) / 255.0;
  s.image = std::move(cv.img);
  return s;
}

std::vector<Sample> gen_dataset(const GenConfig& cfg) {
  cfg.validate();
  std::vector<Sample> out;
  out.reserve(static_cast<std::size_t>(cfg.class_counts[0]) + cfg.class_counts[1] +
              cfg.class_counts[2]);
  for (int cls = 0; cls < 3; ++cls)
    for (int i = 0; i < cfg.class_counts[static_cast<std::size_t>(cls)]; ++i)
      out.push_back(gen_scene(sample_seed(cfg.master_seed, cls, i), cls, cfg));
  return out;
}

}  // namespace roinet
