#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace wsi {

enum class ClassLabel : std::uint8_t { Basaloid = 0, Squamous = 1, Melanocytic = 2, Other = 3 };

inline constexpr std::size_t kNumClasses = 4;
inline constexpr std::array<ClassLabel, kNumClasses> kAllClasses = {
    ClassLabel::Basaloid, ClassLabel::Squamous, ClassLabel::Melanocytic, ClassLabel::Other};

std::string_view to_string(ClassLabel c);
std::optional<ClassLabel> parse_class(std::string_view s);
inline std::size_t index_of(ClassLabel c) { return static_cast<std::size_t>(c); }

enum class Split : std::uint8_t { Train, Validation, Test, CalibFinetune, CalibValidation };

std::string_view to_string(Split s);
std::optional<Split> parse_split(std::string_view s);

struct SlideRecord {
  std::string slide_id;
  std::string specimen_id;
  std::string lab_id;
  ClassLabel truth = ClassLabel::Other;
  std::string raster_path;

  bool operator==(const SlideRecord&) const = default;
};

// Records plus their split assignment. A slide absent from `splits` is unassigned.
struct DatasetManifest {
  std::vector<SlideRecord> records;
  std::map<std::string, Split> splits;

  bool operator==(const DatasetManifest&) const = default;

  std::optional<Split> split_of(const std::string& slide_id) const;
  // Records assigned to `split`, optionally restricted to one lab.
  std::vector<SlideRecord> select(Split split, std::optional<std::string> lab = std::nullopt) const;
  std::vector<std::string> lab_ids() const;
};

// Which three split values the three ratios map onto.
enum class SplitScheme { Development, Calibration };

struct SplitRatios {
  double first = 0.7;
  double second = 0.15;
  double third = 0.15;
};

// Specimen-grouped random partition. Specimen ids are sorted, shuffled with a
// seeded Fisher-Yates pass, then cut at floor(cumulative_ratio * n). Only records
// whose lab is in `labs` (all labs when empty) are (re)assigned.
DatasetManifest build_splits(const DatasetManifest& manifest, SplitRatios ratios, std::uint64_t seed,
                             SplitScheme scheme = SplitScheme::Development,
                             const std::vector<std::string>& labs = {});

inline constexpr std::string_view kManifestHeader = "wsi-triage-manifest v1";

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);
DatasetManifest load_manifest(const std::filesystem::path& path);
std::string format_manifest(const DatasetManifest& manifest);
DatasetManifest parse_manifest(std::string_view text, const std::string& source = "<manifest>");

}  // namespace wsi
