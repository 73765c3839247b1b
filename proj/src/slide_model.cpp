#include "wsi/slide_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "wsi/error.hpp"
#include "wsi/rng.hpp"

namespace wsi {

namespace {

constexpr std::array<std::string_view, kNumClasses> kClassNames = {"Basaloid", "Squamous", "Melanocytic",
                                                                   "Other"};
constexpr std::array<std::string_view, 5> kSplitNames = {"Train", "Validation", "Test", "CalibFinetune",
                                                         "CalibValidation"};
constexpr std::string_view kUnassigned = "-";

std::vector<std::string_view> split_fields(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

}  // namespace

std::string_view to_string(ClassLabel c) { return kClassNames[index_of(c)]; }

std::optional<ClassLabel> parse_class(std::string_view s) {
  for (std::size_t i = 0; i < kClassNames.size(); ++i)
    if (kClassNames[i] == s) return static_cast<ClassLabel>(i);
  return std::nullopt;
}

std::string_view to_string(Split s) { return kSplitNames[static_cast<std::size_t>(s)]; }

std::optional<Split> parse_split(std::string_view s) {
  for (std::size_t i = 0; i < kSplitNames.size(); ++i)
    if (kSplitNames[i] == s) return static_cast<Split>(i);
  return std::nullopt;
}

std::optional<Split> DatasetManifest::split_of(const std::string& slide_id) const {
  const auto it = splits.find(slide_id);
  if (it == splits.end()) return std::nullopt;
  return it->second;
}

std::vector<SlideRecord> DatasetManifest::select(Split split, std::optional<std::string> lab) const {
  std::vector<SlideRecord> out;
  for (const auto& r : records) {
    if (lab && r.lab_id != *lab) continue;
    if (split_of(r.slide_id) == split) out.push_back(r);
  }
  return out;
}

std::vector<std::string> DatasetManifest::lab_ids() const {
  std::set<std::string> labs;
  for (const auto& r : records) labs.insert(r.lab_id);
  return {labs.begin(), labs.end()};
}

DatasetManifest build_splits(const DatasetManifest& manifest, SplitRatios ratios, std::uint64_t seed,
                             SplitScheme scheme, const std::vector<std::string>& labs) {
  if (manifest.records.empty()) throw InvalidInput("build_splits: empty manifest");
  const std::array<double, 3> r = {ratios.first, ratios.second, ratios.third};
  for (double v : r)
    if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidInput("build_splits: ratios must be non-negative");
  const double total = r[0] + r[1] + r[2];
  if (std::abs(total - 1.0) > 1e-9) throw InvalidInput("build_splits: ratios must sum to 1");

  const auto in_scope = [&](const SlideRecord& rec) {
    return labs.empty() || std::find(labs.begin(), labs.end(), rec.lab_id) != labs.end();
  };

  std::set<std::string> specimen_set;
  for (const auto& rec : manifest.records)
    if (in_scope(rec)) specimen_set.insert(rec.specimen_id);
  if (specimen_set.empty()) throw InvalidInput("build_splits: no records for the requested labs");

  // Sorted before shuffling so input ordering cannot leak into the assignment.
  std::vector<std::string> specimens(specimen_set.begin(), specimen_set.end());
  Rng rng(seed);
  for (std::size_t i = specimens.size(); i > 1; --i) {
    const auto j = uniform_index(rng, i);
    std::swap(specimens[i - 1], specimens[j]);
  }

  const std::array<Split, 3> targets = scheme == SplitScheme::Development
                                           ? std::array{Split::Train, Split::Validation, Split::Test}
                                           : std::array{Split::CalibFinetune, Split::CalibValidation, Split::Test};
  const auto n = static_cast<double>(specimens.size());
  // The epsilon keeps e.g. 0.7 * 10 from flooring to 6.
  const auto cut1 = static_cast<std::size_t>(std::floor(r[0] * n + 1e-9));
  const auto cut2 = static_cast<std::size_t>(std::floor((r[0] + r[1]) * n + 1e-9));

  std::map<std::string, Split> specimen_split;
  for (std::size_t i = 0; i < specimens.size(); ++i) {
    const Split s = i < cut1 ? targets[0] : (i < std::min(cut2, specimens.size()) ? targets[1] : targets[2]);
    specimen_split[specimens[i]] = s;
  }

  DatasetManifest out = manifest;
  for (const auto& rec : out.records)
    if (in_scope(rec)) out.splits[rec.slide_id] = specimen_split.at(rec.specimen_id);
  return out;
}

std::string format_manifest(const DatasetManifest& manifest) {
  std::ostringstream os;
  os << kManifestHeader << '\n';
  for (const auto& r : manifest.records) {
    const auto split = manifest.split_of(r.slide_id);
    os << r.slide_id << ',' << r.specimen_id << ',' << r.lab_id << ',' << to_string(r.truth) << ','
       << (split ? to_string(*split) : kUnassigned) << ',' << r.raster_path << '\n';
  }
  return os.str();
}

DatasetManifest parse_manifest(std::string_view text, const std::string& source) {
  DatasetManifest m;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool header_seen = false;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!header_seen) {
      if (line != kManifestHeader)
        throw ParseError(source, line_no, "expected header '" + std::string(kManifestHeader) + "'");
      header_seen = true;
      continue;
    }
    if (line.empty()) {
      if (end == text.size()) break;
      continue;
    }
    const auto f = split_fields(line, ',');
    if (f.size() != 6) throw ParseError(source, line_no, "expected 6 comma-separated fields");
    for (std::size_t i = 0; i < 5; ++i)
      if (f[i].empty()) throw ParseError(source, line_no, "empty field");
    SlideRecord r;
    r.slide_id = f[0];
    r.specimen_id = f[1];
    r.lab_id = f[2];
    const auto truth = parse_class(f[3]);
    if (!truth) throw ParseError(source, line_no, "unknown class '" + std::string(f[3]) + "'");
    r.truth = *truth;
    r.raster_path = f[5];
    if (!seen.insert(r.slide_id).second)
      throw ParseError(source, line_no, "duplicate slide_id '" + r.slide_id + "'");
    if (f[4] != kUnassigned) {
      const auto split = parse_split(f[4]);
      if (!split) throw ParseError(source, line_no, "unknown split '" + std::string(f[4]) + "'");
      m.splits[r.slide_id] = *split;
    }
    m.records.push_back(std::move(r));
    if (end == text.size()) break;
  }
  if (!header_seen) throw ParseError(source, 1, "missing header");

  // Specimen invariant: one lab, one truth, one split per specimen.
  std::map<std::string, const SlideRecord*> first;
  for (const auto& r : m.records) {
    auto [it, inserted] = first.emplace(r.specimen_id, &r);
    if (inserted) continue;
    const SlideRecord& o = *it->second;
    if (o.lab_id != r.lab_id || o.truth != r.truth || m.split_of(o.slide_id) != m.split_of(r.slide_id))
      throw ParseError(source, 0, "specimen '" + r.specimen_id + "' has inconsistent lab, truth, or split");
  }
  return m;
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write manifest: " + path.string());
  out << format_manifest(manifest);
  if (!out) throw IoError("failed writing manifest: " + path.string());
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read manifest: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_manifest(ss.str(), path.string());
}

}  // namespace wsi
