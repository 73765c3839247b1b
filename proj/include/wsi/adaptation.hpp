#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>

#include "wsi/tiling.hpp"

namespace wsi {

inline constexpr double kStdFloor = 1e-3;

// Per-channel statistics of tissue pixels in the log-opponent color space
// (per-channel ln((v + 1) / 256), then a fixed orthonormal decorrelating rotation).
struct DomainStats {
  std::array<double, 3> mean{0, 0, 0};
  std::array<double, 3> std{1, 1, 1};
  bool operator==(const DomainStats&) const = default;
};

struct AdapterModel {
  DomainStats source;
  DomainStats target;

  bool is_identity() const { return source == target; }
  bool operator==(const AdapterModel&) const = default;
};

// Streaming tissue-pixel moments; tiles are merged with the pairwise update so a
// slide's contribution can be computed independently and merged in a fixed order.
class DomainAccumulator {
 public:
  void add(const Tile& tile);
  void merge(const DomainAccumulator& other);
  double count() const { return n_; }
  // Throws InvalidInput when no tissue pixel was added.
  DomainStats finish() const;

 private:
  double n_ = 0;
  std::array<double, 3> mean_{0, 0, 0};
  std::array<double, 3> m2_{0, 0, 0};
};

// Mean and population standard deviation over all tissue pixels of the sample.
// Throws InvalidInput on an empty sample or one without tissue pixels.
DomainStats fit_domain(std::span<const Tile> tiles);
inline DomainStats fit_reference(std::span<const Tile> tiles) { return fit_domain(tiles); }
inline DomainStats fit_lab(std::span<const Tile> tiles) { return fit_domain(tiles); }

// Per channel: (x - source.mean) / source.std * target.std + target.mean, then back to RGB.
// The composed map is evaluated per pixel as a product of per-channel power tables.
struct AdaptTables {
  bool identity = true;
  std::array<double, 3> gain{};                      // exp of the composed offset, times 256
  std::array<std::array<double, 256>, 9> power{};    // [out * 3 + in][v] = ((v + 1) / 256)^A[out][in]
  // Exponents too large for the product form; evaluate offset + sum of exponent terms instead.
  bool log_domain = false;
  std::array<double, 3> offset{};
  std::array<std::array<double, 256>, 9> exponent{};  // A[out][in] * log((v + 1) / 256)
};
AdaptTables make_adapt_tables(const AdapterModel& model);
Tile adapt(const Tile& tile, const AdaptTables& tables);
Tile adapt(const Tile& tile, const AdapterModel& model);

// Log-opponent round trip helpers (exposed for tests).
std::array<double, 3> to_log_opponent(const std::uint8_t rgb[3]);
std::array<std::uint8_t, 3> from_log_opponent(const std::array<double, 3>& lab);

void save_adapter(const AdapterModel& model, const std::filesystem::path& path);
AdapterModel load_adapter(const std::filesystem::path& path);
std::string format_adapter(const AdapterModel& model);
AdapterModel parse_adapter(std::string_view text, const std::string& source = "<adapter>");

}  // namespace wsi
