#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "wsi/image.hpp"
#include "wsi/slide_model.hpp"

namespace wsi::synth {

enum class ArtifactKind { PenInk, BlurPatch, Bubble, Blank };

std::string_view to_string(ArtifactKind k);
// Throws InvalidInput for anything but pen_ink, blur_patch, bubble, blank.
ArtifactKind parse_artifact(std::string_view s);

struct ArtifactRates {
  double pen_ink = 0.0;
  double blur_patch = 0.0;
  double bubble = 0.0;
  double blank = 0.0;
};

// A lab's scanner/stain appearance: out = clamp(M * ref + offset + N(0, sigma)).
struct LabProfile {
  std::string lab_id;
  std::array<double, 9> color_matrix = {1, 0, 0, 0, 1, 0, 0, 0, 1};
  std::array<double, 3> color_offset = {0, 0, 0};
  double noise_sigma = 0.0;
  ArtifactRates artifact_rates;

  double determinant() const;
  // Throws InvalidInput when the matrix is singular or a rate is outside [0, 1].
  void validate() const;
};

LabProfile identity_profile(std::string lab_id = "identity");

// Built-in profiles: "reference" plus three shifted labs "lab_a", "lab_b", "lab_c".
const std::vector<LabProfile>& preset_labs();
const LabProfile& preset_lab(std::string_view lab_id);

enum class Arrangement { NestedClusters, Ridges, DenseIslands, SparseBackground };

struct TextureRecipe {
  ClassLabel cls;
  double blob_density;  // blobs per lesion site, or dot coverage for sparse arrangements
  int blob_radius_px;
  std::array<double, 3> base_chroma;
  Arrangement arrangement;
};

const TextureRecipe& recipe_for(ClassLabel cls);

inline constexpr int kDefaultHeight = 1024;
inline constexpr int kDefaultWidth = 1536;
inline constexpr std::uint8_t kNominalBackground = 235;

struct SynthSlide {
  RgbImage raster;
  Mask roi_mask;
  Mask tissue_region;  // generator ground truth for segmentation checks
  SlideRecord record;
  std::uint8_t background = kNominalBackground;
};

// Lab-independent rendering: depends only on (cls, seed, size).
struct ReferenceRender {
  RgbImage raster;
  Mask roi_mask;
  Mask tissue_region;
  std::uint8_t background;
};
ReferenceRender render_reference(ClassLabel cls, std::uint64_t seed, int height = kDefaultHeight,
                                 int width = kDefaultWidth);

// Applies the profile's affine color map and noise. Noise is a truncated Gaussian
// (|z| <= 2.5) drawn from a stream seeded by `seed`.
RgbImage apply_profile(const RgbImage& reference, const LabProfile& profile, std::uint64_t seed);

// Analytic inverse of the profile's affine map (noise not removed), rounded and clamped.
RgbImage invert_profile(const RgbImage& raster, const LabProfile& profile);

struct ArtifactPlacement {
  int center_row = 0;
  int center_col = 0;
  int radius = 0;  // bubble radius, half patch size, or half stroke width
  double angle = 0.0;
};
ArtifactPlacement artifact_placement(ArtifactKind kind, int height, int width, std::uint64_t seed);

// Localized deterministic modification; blank fills the whole raster with `background`.
// `cleared`, when given, receives 1 for pixels whose original content was destroyed.
RgbImage inject_artifact(const RgbImage& raster, ArtifactKind kind, std::uint64_t seed,
                         std::uint8_t background = kNominalBackground, Mask* cleared = nullptr);
RgbImage inject_artifact(const RgbImage& raster, std::string_view kind, std::uint64_t seed,
                         std::uint8_t background = kNominalBackground);

SynthSlide generate_slide(ClassLabel cls, const LabProfile& profile, std::uint64_t seed,
                          int height = kDefaultHeight, int width = kDefaultWidth);

struct CorpusSpec {
  int specimens_per_lab = 8;
  std::vector<LabProfile> labs;
  int slides_min = 1;
  int slides_max = 1;
  std::uint64_t seed = 0;
  int height = kDefaultHeight;
  int width = kDefaultWidth;
};

// Builds the manifest (all slides unassigned). Class labels are balanced per lab by
// dealing a shuffled round-robin sequence. Raster paths are relative:
// slides/<slide_id>.ppm with the ROI mask at slides/<slide_id>.mask.pgm.
DatasetManifest plan_corpus(const CorpusSpec& spec);

// Seed used for one slide of a corpus.
std::uint64_t slide_seed(std::uint64_t corpus_seed, const std::string& slide_id);

// plan_corpus plus rendering every slide into `out_dir`. Writes out_dir/manifest.txt.
DatasetManifest generate_corpus(const CorpusSpec& spec, const std::filesystem::path& out_dir, int workers = 1);

std::filesystem::path mask_path_for(const std::filesystem::path& raster_path);

}  // namespace wsi::synth
