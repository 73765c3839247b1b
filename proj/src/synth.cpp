#include "wsi/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "wsi/error.hpp"
#include "wsi/parallel.hpp"
#include "wsi/rng.hpp"

namespace wsi::synth {

namespace {

using Rgb = std::array<double, 3>;

constexpr Rgb kStroma = {232, 170, 205};

// Cheap positional hash for per-pixel texture and noise lookups.
inline std::uint64_t pixel_hash64(std::uint64_t salt, std::uint64_t index) {
  std::uint64_t x = salt ^ (index * 0x9e3779b97f4a7c15ULL);
  x ^= x >> 33;
  x *= 0xff51afd7ed558ccdULL;
  x ^= x >> 33;
  x *= 0xc4ceb9fe1a85ec53ULL;
  x ^= x >> 33;
  return x;
}

inline std::uint32_t pixel_hash(std::uint64_t salt, std::uint64_t index) {
  return static_cast<std::uint32_t>(pixel_hash64(salt, index));
}

constexpr std::size_t kNoiseTableSize = 4096;

// Standard normal draws truncated to |z| <= 2.5.
const std::array<float, kNoiseTableSize>& noise_table() {
  static const std::array<float, kNoiseTableSize> table = [] {
    std::array<float, kNoiseTableSize> t{};
    Rng rng(0x5eed5eedULL);
    for (auto& v : t) {
      double z;
      do z = standard_normal(rng);
      while (std::abs(z) > 2.5);
      v = static_cast<float>(z);
    }
    return t;
  }();
  return table;
}

inline std::uint8_t clamp_u8(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

inline void put(RgbImage& img, int y, int x, const Rgb& c) {
  auto* p = img.px(y, x);
  p[0] = clamp_u8(c[0]);
  p[1] = clamp_u8(c[1]);
  p[2] = clamp_u8(c[2]);
}

// Texture jitter in [-amp, amp], shared across channels plus a smaller per-channel part.
inline Rgb jitter(const Rgb& base, std::uint64_t salt, std::size_t index, double amp) {
  const auto h = pixel_hash(salt, index);
  const double common = ((h & 0xff) / 255.0 * 2.0 - 1.0) * amp;
  Rgb out = base;
  for (int c = 0; c < 3; ++c) {
    const double own = (((h >> (8 + 8 * c)) & 0xff) / 255.0 * 2.0 - 1.0) * amp * 0.4;
    out[c] += common + own;
  }
  return out;
}

struct Ellipse {
  double cy, cx, ry, rx;
};

template <typename Fn>
void for_each_in_ellipse(int height, int width, const Ellipse& e, Fn&& fn) {
  const int y0 = std::max(0, static_cast<int>(std::floor(e.cy - e.ry)));
  const int y1 = std::min(height - 1, static_cast<int>(std::ceil(e.cy + e.ry)));
  for (int y = y0; y <= y1; ++y) {
    const double dy = (y + 0.5 - e.cy) / e.ry;
    const double span = 1.0 - dy * dy;
    if (span < 0) continue;
    const double half = e.rx * std::sqrt(span);
    const int x0 = std::max(0, static_cast<int>(std::ceil(e.cx - half - 0.5)));
    const int x1 = std::min(width - 1, static_cast<int>(std::floor(e.cx + half - 0.5)));
    for (int x = x0; x <= x1; ++x) fn(y, x);
  }
}

struct Canvas {
  RgbImage& raster;
  Mask& roi;
  const Mask& tissue;
  std::uint64_t salt;

  int height() const { return raster.height; }
  int width() const { return raster.width; }

  void paint(int y, int x, const Rgb& c, double amp) {
    if (!tissue.at(y, x)) return;
    put(raster, y, x, jitter(c, salt, std::size_t(y) * raster.width + x, amp));
    roi.at(y, x) = 1;
  }
};

// Random tissue pixel at least `margin` away from the raster border.
bool pick_site(Rng& rng, const Mask& tissue, int margin, int& cy, int& cx) {
  const int h = tissue.height, w = tissue.width;
  if (h <= 2 * margin || w <= 2 * margin) margin = 0;
  for (int attempt = 0; attempt < 2000; ++attempt) {
    const int y = margin + static_cast<int>(uniform_index(rng, std::uint64_t(h - 2 * margin)));
    const int x = margin + static_cast<int>(uniform_index(rng, std::uint64_t(w - 2 * margin)));
    if (tissue.at(y, x)) {
      cy = y;
      cx = x;
      return true;
    }
  }
  return false;
}

int scaled_count(double density, double strength) {
  return std::max(1, static_cast<int>(std::lround(density * strength)));
}

void draw_dense_islands(Canvas& cv, Rng& rng, const TextureRecipe& r, double strength) {
  const Rgb nucleus = {r.base_chroma[0] - 30, r.base_chroma[1] - 22, r.base_chroma[2] - 35};
  const int n = scaled_count(r.blob_density, strength);
  for (int i = 0; i < n; ++i) {
    int cy, cx;
    if (!pick_site(rng, cv.tissue, r.blob_radius_px, cy, cx)) return;
    const double rad = r.blob_radius_px * uniform(rng, 0.6, 1.4);
    const double ecc = uniform(rng, 0.75, 1.3);
    for_each_in_ellipse(cv.height(), cv.width(), {double(cy), double(cx), rad * ecc, rad / ecc}, [&](int y, int x) {
      const bool dark = (pixel_hash(cv.salt ^ 0xabc, std::size_t(y) * cv.width() + x) & 7) == 0;
      cv.paint(y, x, dark ? nucleus : r.base_chroma, 12);
    });
  }
}

void draw_ridges(Canvas& cv, Rng& rng, const TextureRecipe& r, double strength) {
  const int n = scaled_count(r.blob_density, strength);
  for (int i = 0; i < n; ++i) {
    int cy, cx;
    if (!pick_site(rng, cv.tissue, r.blob_radius_px, cy, cx)) return;
    const double rad = r.blob_radius_px * uniform(rng, 0.7, 1.3);
    const double period = uniform(rng, 12, 18);
    const double phi = uniform(rng, 0, std::numbers::pi);
    const double c = std::cos(phi), s = std::sin(phi);
    for_each_in_ellipse(cv.height(), cv.width(), {double(cy), double(cx), rad * 0.8, rad * 1.2}, [&](int y, int x) {
      if (std::sin(2 * std::numbers::pi * (x * c + y * s) / period) > 0.1) cv.paint(y, x, r.base_chroma, 10);
    });
  }
}

void draw_nested_clusters(Canvas& cv, Rng& rng, const TextureRecipe& r, double strength) {
  const Rgb melanin = {r.base_chroma[0] - 45, r.base_chroma[1] - 30, r.base_chroma[2] - 25};
  const int clusters = scaled_count(r.blob_density, strength);
  for (int i = 0; i < clusters; ++i) {
    int cy, cx;
    if (!pick_site(rng, cv.tissue, 4 * r.blob_radius_px, cy, cx)) return;
    const int nests = 8 + static_cast<int>(uniform_index(rng, 7));
    for (int k = 0; k < nests; ++k) {
      const double ang = uniform(rng, 0, 2 * std::numbers::pi);
      const double dist = uniform(rng, 0, 5.0 * r.blob_radius_px);
      const double rad = r.blob_radius_px * uniform(rng, 0.7, 1.3);
      const Ellipse e{cy + dist * std::sin(ang), cx + dist * std::cos(ang), rad, rad * uniform(rng, 0.8, 1.25)};
      for_each_in_ellipse(cv.height(), cv.width(), e, [&](int y, int x) {
        const bool dark = (pixel_hash(cv.salt ^ 0xdef, std::size_t(y) * cv.width() + x) & 15) == 0;
        cv.paint(y, x, dark ? melanin : r.base_chroma, 10);
      });
    }
  }
}

void draw_sparse_background(Canvas& cv, Rng& rng, const TextureRecipe& r, double strength) {
  const int regions = scaled_count(3.0, strength);
  for (int i = 0; i < regions; ++i) {
    int cy, cx;
    if (!pick_site(rng, cv.tissue, 0, cy, cx)) return;
    const double rad = uniform(rng, 100, 170);
    const double dot_area = std::numbers::pi * r.blob_radius_px * r.blob_radius_px;
    const int dots = static_cast<int>(r.blob_density * std::numbers::pi * rad * rad / dot_area);
    for (int k = 0; k < dots; ++k) {
      const double ang = uniform(rng, 0, 2 * std::numbers::pi);
      const double dist = rad * std::sqrt(uniform01(rng));
      const double dr = r.blob_radius_px * uniform(rng, 0.7, 1.3);
      for_each_in_ellipse(cv.height(), cv.width(), {cy + dist * std::sin(ang), cx + dist * std::cos(ang), dr, dr},
                          [&](int y, int x) { cv.paint(y, x, r.base_chroma, 10); });
    }
  }
}

void draw_lesion(Canvas& cv, Rng& rng, const TextureRecipe& r, double strength) {
  switch (r.arrangement) {
    case Arrangement::DenseIslands: draw_dense_islands(cv, rng, r, strength); break;
    case Arrangement::Ridges: draw_ridges(cv, rng, r, strength); break;
    case Arrangement::NestedClusters: draw_nested_clusters(cv, rng, r, strength); break;
    case Arrangement::SparseBackground: draw_sparse_background(cv, rng, r, strength); break;
  }
}

// Histologically similar class used for ambiguous slides.
ClassLabel confuser_of(ClassLabel c) {
  switch (c) {
    case ClassLabel::Basaloid: return ClassLabel::Melanocytic;
    case ClassLabel::Melanocytic: return ClassLabel::Basaloid;
    case ClassLabel::Squamous: return ClassLabel::Other;
    case ClassLabel::Other: return ClassLabel::Squamous;
  }
  return c;
}

constexpr double kNoPathologyRate = 0.25;  // Other slides without any lesion
constexpr double kAmbiguousRate = 0.15;

}  // namespace

std::string_view to_string(ArtifactKind k) {
  switch (k) {
    case ArtifactKind::PenInk: return "pen_ink";
    case ArtifactKind::BlurPatch: return "blur_patch";
    case ArtifactKind::Bubble: return "bubble";
    case ArtifactKind::Blank: return "blank";
  }
  return "?";
}

ArtifactKind parse_artifact(std::string_view s) {
  for (auto k : {ArtifactKind::PenInk, ArtifactKind::BlurPatch, ArtifactKind::Bubble, ArtifactKind::Blank})
    if (to_string(k) == s) return k;
  throw InvalidInput("unknown artifact kind '" + std::string(s) + "'");
}

double LabProfile::determinant() const {
  const auto& m = color_matrix;
  return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) + m[2] * (m[3] * m[7] - m[4] * m[6]);
}

void LabProfile::validate() const {
  if (!(std::abs(determinant()) > 1e-6)) throw InvalidInput("lab profile '" + lab_id + "': singular color matrix");
  if (!(noise_sigma >= 0)) throw InvalidInput("lab profile '" + lab_id + "': negative noise_sigma");
  for (double r : {artifact_rates.pen_ink, artifact_rates.blur_patch, artifact_rates.bubble, artifact_rates.blank})
    if (!(r >= 0 && r <= 1)) throw InvalidInput("lab profile '" + lab_id + "': artifact rate outside [0, 1]");
}

LabProfile identity_profile(std::string lab_id) {
  LabProfile p;
  p.lab_id = std::move(lab_id);
  return p;
}

const std::vector<LabProfile>& preset_labs() {
  static const std::vector<LabProfile> labs = [] {
    const ArtifactRates rates{0.04, 0.04, 0.04, 0.02};
    std::vector<LabProfile> v;
    v.push_back({"reference", {1, 0, 0, 0, 1, 0, 0, 0, 1}, {0, 0, 0}, 3.0, rates});
    v.push_back({"lab_a", {1.10, -0.05, -0.05, -0.10, 1.05, 0.05, 0.00, 0.05, 0.95}, {-6, -4, 0}, 4.0, rates});
    v.push_back({"lab_b", {0.80, 0.15, 0.05, 0.05, 0.85, 0.10, 0.10, 0.05, 0.85}, {8, 6, 4}, 4.0, rates});
    v.push_back({"lab_c", {0.85, 0.10, 0.05, 0.00, 1.05, -0.05, 0.10, -0.10, 1.00}, {-12, -14, -8}, 4.0, rates});
    return v;
  }();
  return labs;
}

const LabProfile& preset_lab(std::string_view lab_id) {
  for (const auto& p : preset_labs())
    if (p.lab_id == lab_id) return p;
  throw InvalidInput("unknown lab preset '" + std::string(lab_id) + "'");
}

const TextureRecipe& recipe_for(ClassLabel cls) {
  static const std::array<TextureRecipe, kNumClasses> recipes = {{
      {ClassLabel::Basaloid, 4.5, 60, {95, 60, 150}, Arrangement::DenseIslands},
      {ClassLabel::Squamous, 3.0, 110, {200, 90, 125}, Arrangement::Ridges},
      {ClassLabel::Melanocytic, 4.0, 12, {135, 85, 60}, Arrangement::NestedClusters},
      {ClassLabel::Other, 0.18, 3, {150, 95, 170}, Arrangement::SparseBackground},
  }};
  return recipes[index_of(cls)];
}

ReferenceRender render_reference(ClassLabel cls, std::uint64_t seed, int height, int width) {
  if (height < 1 || width < 1) throw InvalidInput("render_reference: empty raster size");
  Rng rng(derive_seed(seed, "layout"));
  ReferenceRender out;
  out.background = static_cast<std::uint8_t>(230 + uniform_index(rng, 11));
  out.raster = RgbImage(height, width, out.background);
  out.roi_mask = Mask(height, width);
  out.tissue_region = Mask(height, width);

  // Tissue: a main ellipse plus lobes centered inside it, so the union is connected.
  const double coverage = uniform(rng, 0.2, 0.6);
  const double hy = height / 2.0, hx = width / 2.0;
  const double cy = hy * (1 + uniform(rng, -0.08, 0.08)), cx = hx * (1 + uniform(rng, -0.08, 0.08));
  const double radius = std::sqrt(4 * coverage / (std::numbers::pi * 1.1));
  const double ecc = uniform(rng, 0.85, 1.15);
  std::vector<Ellipse> parts = {{cy, cx, radius * ecc * hy, radius / ecc * hx}};
  const int lobes = 3 + static_cast<int>(uniform_index(rng, 3));
  for (int i = 0; i < lobes; ++i) {
    const double ang = uniform(rng, 0, 2 * std::numbers::pi);
    const double lr = radius * uniform(rng, 0.3, 0.45);
    parts.push_back({cy + 0.7 * parts[0].ry * std::sin(ang), cx + 0.7 * parts[0].rx * std::cos(ang), lr * hy, lr * hx});
  }
  Rgb stroma = kStroma;
  for (auto& c : stroma) c += uniform(rng, -4, 4);
  const std::uint64_t salt = derive_seed(seed, "texture");
  for (const auto& e : parts) {
    for_each_in_ellipse(height, width, e, [&](int y, int x) {
      if (out.tissue_region.at(y, x)) return;
      out.tissue_region.at(y, x) = 1;
      put(out.raster, y, x, jitter(stroma, salt, std::size_t(y) * width + x, 6));
    });
  }

  Canvas cv{out.raster, out.roi_mask, out.tissue_region, salt};
  const double strength = uniform(rng, 0.5, 1.0);
  const bool no_pathology = cls == ClassLabel::Other && uniform01(rng) < kNoPathologyRate;
  const bool ambiguous = uniform01(rng) < kAmbiguousRate;
  // Confuser lesions are drawn at a fraction of the primary strength.
  const double confuser_strength = strength * uniform(rng, 0.25, 0.6);
  if (!no_pathology) draw_lesion(cv, rng, recipe_for(cls), strength);
  if (ambiguous) draw_lesion(cv, rng, recipe_for(confuser_of(cls)), confuser_strength);
  return out;
}

RgbImage apply_profile(const RgbImage& reference, const LabProfile& profile, std::uint64_t seed) {
  RgbImage out(reference.height, reference.width);
  const auto& m = profile.color_matrix;
  const auto& off = profile.color_offset;
  const auto& table = noise_table();
  const double sigma = profile.noise_sigma;
  const std::size_t n = reference.pixels();
  for (std::size_t i = 0; i < n; ++i) {
    const double r = reference.data[3 * i], g = reference.data[3 * i + 1], b = reference.data[3 * i + 2];
    const std::uint64_t h = sigma > 0 ? pixel_hash64(seed, i) : 0;
    for (int c = 0; c < 3; ++c) {
      double v = m[3 * c] * r + m[3 * c + 1] * g + m[3 * c + 2] * b + off[c];
      if (sigma > 0) v += sigma * table[(h >> (12 * c)) & (kNoiseTableSize - 1)];
      out.data[3 * i + c] = clamp_u8(v);
    }
  }
  return out;
}

RgbImage invert_profile(const RgbImage& raster, const LabProfile& profile) {
  const auto& m = profile.color_matrix;
  const double det = profile.determinant();
  if (std::abs(det) <= 1e-6) throw InvalidInput("invert_profile: singular color matrix");
  const std::array<double, 9> inv = {
      (m[4] * m[8] - m[5] * m[7]) / det, (m[2] * m[7] - m[1] * m[8]) / det, (m[1] * m[5] - m[2] * m[4]) / det,
      (m[5] * m[6] - m[3] * m[8]) / det, (m[0] * m[8] - m[2] * m[6]) / det, (m[2] * m[3] - m[0] * m[5]) / det,
      (m[3] * m[7] - m[4] * m[6]) / det, (m[1] * m[6] - m[0] * m[7]) / det, (m[0] * m[4] - m[1] * m[3]) / det};
  RgbImage out(raster.height, raster.width);
  for (std::size_t i = 0; i < raster.pixels(); ++i) {
    const Rgb v = {raster.data[3 * i] - profile.color_offset[0], raster.data[3 * i + 1] - profile.color_offset[1],
                   raster.data[3 * i + 2] - profile.color_offset[2]};
    for (int c = 0; c < 3; ++c)
      out.data[3 * i + c] = clamp_u8(inv[3 * c] * v[0] + inv[3 * c + 1] * v[1] + inv[3 * c + 2] * v[2]);
  }
  return out;
}

ArtifactPlacement artifact_placement(ArtifactKind kind, int height, int width, std::uint64_t seed) {
  Rng rng(derive_seed(seed, to_string(kind)));
  ArtifactPlacement p;
  p.center_row = static_cast<int>(height * uniform(rng, 0.35, 0.65));
  p.center_col = static_cast<int>(width * uniform(rng, 0.35, 0.65));
  p.angle = uniform(rng, 0, std::numbers::pi);
  const int short_side = std::min(height, width);
  switch (kind) {
    case ArtifactKind::PenInk: p.radius = std::max(1, static_cast<int>(short_side * uniform(rng, 0.005, 0.008))); break;
    case ArtifactKind::BlurPatch: p.radius = std::max(2, static_cast<int>(short_side * uniform(rng, 0.09, 0.14))); break;
    case ArtifactKind::Bubble: p.radius = std::max(2, static_cast<int>(short_side * uniform(rng, 0.08, 0.14))); break;
    case ArtifactKind::Blank: p.radius = 0; break;
  }
  return p;
}

RgbImage inject_artifact(const RgbImage& raster, ArtifactKind kind, std::uint64_t seed, std::uint8_t background,
                         Mask* cleared) {
  RgbImage out = raster;
  const int h = raster.height, w = raster.width;
  if (raster.empty()) return out;
  const auto p = artifact_placement(kind, h, w, seed);
  switch (kind) {
    case ArtifactKind::Blank: {
      std::fill(out.data.begin(), out.data.end(), background);
      if (cleared) std::fill(cleared->data.begin(), cleared->data.end(), 1);
      break;
    }
    case ArtifactKind::PenInk: {
      const Rgb ink = (seed & 1) ? Rgb{25, 50, 150} : Rgb{30, 120, 55};
      const double half_len = 0.35 * std::min(h, w);
      const double dy = std::sin(p.angle), dx = std::cos(p.angle);
      const double reach = half_len + p.radius;
      const int y0 = std::max(0, int(p.center_row - reach)), y1 = std::min(h - 1, int(p.center_row + reach));
      const int x0 = std::max(0, int(p.center_col - reach)), x1 = std::min(w - 1, int(p.center_col + reach));
      for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
          const double ry = y - p.center_row, rx = x - p.center_col;
          const double t = std::clamp(ry * dy + rx * dx, -half_len, half_len);
          const double ey = ry - t * dy, ex = rx - t * dx;
          if (ey * ey + ex * ex <= double(p.radius) * p.radius) {
            put(out, y, x, ink);
            if (cleared) cleared->at(y, x) = 1;
          }
        }
      }
      break;
    }
    case ArtifactKind::BlurPatch: {
      const int y0 = std::max(0, p.center_row - p.radius), y1 = std::min(h, p.center_row + p.radius);
      const int x0 = std::max(0, p.center_col - p.radius), x1 = std::min(w, p.center_col + p.radius);
      constexpr int k = 3;
      // Two box-blur passes confined to the patch.
      for (int pass = 0; pass < 2; ++pass) {
        const RgbImage src = out;
        for (int y = y0; y < y1; ++y) {
          for (int x = x0; x < x1; ++x) {
            int sum[3] = {0, 0, 0};
            int cnt = 0;
            for (int yy = std::max(y0, y - k); yy <= std::min(y1 - 1, y + k); ++yy)
              for (int xx = std::max(x0, x - k); xx <= std::min(x1 - 1, x + k); ++xx) {
                const auto* s = src.px(yy, xx);
                sum[0] += s[0];
                sum[1] += s[1];
                sum[2] += s[2];
                ++cnt;
              }
            auto* d = out.px(y, x);
            for (int c = 0; c < 3; ++c) d[c] = static_cast<std::uint8_t>((sum[c] + cnt / 2) / cnt);
          }
        }
      }
      break;
    }
    case ArtifactKind::Bubble: {
      const Ellipse e{double(p.center_row), double(p.center_col), double(p.radius), double(p.radius)};
      for_each_in_ellipse(h, w, e, [&](int y, int x) {
        auto* d = out.px(y, x);
        for (int c = 0; c < 3; ++c) d[c] = clamp_u8(d[c] + (255 - d[c]) * 0.45);
      });
      break;
    }
  }
  return out;
}

RgbImage inject_artifact(const RgbImage& raster, std::string_view kind, std::uint64_t seed, std::uint8_t background) {
  return inject_artifact(raster, parse_artifact(kind), seed, background);
}

SynthSlide generate_slide(ClassLabel cls, const LabProfile& profile, std::uint64_t seed, int height, int width) {
  profile.validate();
  auto ref = render_reference(cls, derive_seed(seed, "reference"), height, width);
  Rng rng(derive_seed(seed, "artifacts"));
  Mask cleared(height, width);
  RgbImage raster = std::move(ref.raster);
  const auto& rates = profile.artifact_rates;
  const std::array<std::pair<ArtifactKind, double>, 4> plan = {{{ArtifactKind::PenInk, rates.pen_ink},
                                                                 {ArtifactKind::BlurPatch, rates.blur_patch},
                                                                 {ArtifactKind::Bubble, rates.bubble},
                                                                 {ArtifactKind::Blank, rates.blank}}};
  bool blank = false;
  for (const auto& [kind, rate] : plan) {
    // Both draws happen unconditionally so one rate never shifts another kind's stream.
    const double u = uniform01(rng);
    const std::uint64_t art_seed = rng();
    if (u < rate) {
      raster = inject_artifact(raster, kind, art_seed, ref.background, &cleared);
      blank = blank || kind == ArtifactKind::Blank;
    }
  }
  SynthSlide s;
  s.background = ref.background;
  s.roi_mask = std::move(ref.roi_mask);
  s.tissue_region = std::move(ref.tissue_region);
  for (std::size_t i = 0; i < s.roi_mask.data.size(); ++i)
    if (cleared.data[i]) s.roi_mask.data[i] = 0;
  if (blank) std::fill(s.tissue_region.data.begin(), s.tissue_region.data.end(), 0);
  s.raster = apply_profile(raster, profile, derive_seed(seed, "noise"));
  s.record.truth = cls;
  s.record.lab_id = profile.lab_id;
  return s;
}

std::uint64_t slide_seed(std::uint64_t corpus_seed, const std::string& slide_id) {
  return derive_seed(corpus_seed, slide_id, "slide");
}

std::filesystem::path mask_path_for(const std::filesystem::path& raster_path) {
  auto p = raster_path;
  p.replace_extension(".mask.pgm");
  return p;
}

DatasetManifest plan_corpus(const CorpusSpec& spec) {
  if (spec.labs.empty()) throw InvalidInput("generate_corpus: at least one lab profile required");
  if (spec.specimens_per_lab < 1) throw InvalidInput("generate_corpus: specimens_per_lab must be >= 1");
  if (spec.slides_min < 1 || spec.slides_max < spec.slides_min)
    throw InvalidInput("generate_corpus: invalid slides-per-specimen range");
  DatasetManifest m;
  for (const auto& lab : spec.labs) {
    lab.validate();
    std::vector<ClassLabel> classes;
    for (int i = 0; i < spec.specimens_per_lab; ++i) classes.push_back(kAllClasses[i % kNumClasses]);
    Rng rng(derive_seed(spec.seed, lab.lab_id, "classes"));
    for (std::size_t i = classes.size(); i > 1; --i) std::swap(classes[i - 1], classes[uniform_index(rng, i)]);
    for (int i = 0; i < spec.specimens_per_lab; ++i) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "-P%04d", i);
      const std::string specimen = lab.lab_id + buf;
      Rng srng(derive_seed(spec.seed, specimen, "slides"));
      const int n_slides = spec.slides_min + static_cast<int>(uniform_index(
                                                  srng, std::uint64_t(spec.slides_max - spec.slides_min + 1)));
      for (int k = 0; k < n_slides; ++k) {
        SlideRecord r;
        r.slide_id = specimen + "-" + std::to_string(k + 1);
        r.specimen_id = specimen;
        r.lab_id = lab.lab_id;
        r.truth = classes[i];
        r.raster_path = "slides/" + r.slide_id + ".ppm";
        m.records.push_back(std::move(r));
      }
    }
  }
  return m;
}

DatasetManifest generate_corpus(const CorpusSpec& spec, const std::filesystem::path& out_dir, int workers) {
  const auto manifest = plan_corpus(spec);
  std::filesystem::create_directories(out_dir / "slides");
  std::map<std::string, const LabProfile*> profiles;
  for (const auto& lab : spec.labs) profiles[lab.lab_id] = &lab;
  parallel_for(manifest.records.size(), workers, [&](std::size_t i) {
    const auto& rec = manifest.records[i];
    const auto slide =
        generate_slide(rec.truth, *profiles.at(rec.lab_id), slide_seed(spec.seed, rec.slide_id), spec.height, spec.width);
    write_ppm(slide.raster, out_dir / rec.raster_path);
    write_pgm(slide.roi_mask, out_dir / mask_path_for(rec.raster_path));
  });
  save_manifest(manifest, out_dir / "manifest.txt");
  return manifest;
}

}  // namespace wsi::synth
