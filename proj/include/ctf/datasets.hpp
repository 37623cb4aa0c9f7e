#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ctf/model.hpp"

namespace ctf {

class IoError : public Error {
 public:
  using Error::Error;
};

struct BuiltinModel {
  std::string name;
  std::string description;
  std::string source;  // model text in the .scm format
  bool renders = false;
};

const std::vector<BuiltinModel>& builtin_models();
/// Throws ModelError for an unknown name.
const BuiltinModel& find_builtin(const std::string& name);
Scm load_builtin(const std::string& name);

/// Label rows, one value per endogenous variable in declaration order.
struct LabelSample {
  std::vector<std::string> variables;
  std::vector<std::vector<int>> rows;
  std::vector<std::uint64_t> seeds;  // per-row stream seed
};

/// Draws exogenous atoms and solves. Row i uses stream derive_seed(seed, i),
/// so any prefix of a larger sample is reproduced exactly.
LabelSample sample_labels(const Scm& scm, std::size_t n, std::uint64_t seed);

// ------------------------------------------------------------- rendering

constexpr int kGridSize = 28;
constexpr int kGlyphScale = 3;
constexpr int kGlyphX = 6;   // left edge at zero offset
constexpr int kGlyphY = 5;   // top edge at zero offset
constexpr int kBarRows = 3;
constexpr int kMaxOffset = 2;

struct Nuisance {
  int x_offset = 0;   // -2..2
  int y_offset = 0;   // -2..2
  int thickness = 1;  // 1 or 2

  friend bool operator==(const Nuisance&, const Nuisance&) = default;
};

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

struct ImageGrid {
  std::array<Rgb, kGridSize * kGridSize> pixels{};
  Rgb& at(int x, int y) { return pixels[y * kGridSize + x]; }
  const Rgb& at(int x, int y) const { return pixels[y * kGridSize + x]; }
  friend bool operator==(const ImageGrid&, const ImageGrid&) = default;
};

struct DigitLabels {
  int digit = 0;  // D
  int color = 0;  // C: 1 red, 0 green
  int bar = 0;    // B
  friend bool operator==(const DigitLabels&, const DigitLabels&) = default;
};

/// Every admissible nuisance setting (5 * 5 * 2).
std::vector<Nuisance> all_nuisances();
Nuisance sample_nuisance(std::uint64_t seed);

ImageGrid render(const DigitLabels& labels, const Nuisance& nuisance);

/// Inverse of render. Throws Error("unlabelable ...") when no glyph template
/// matches exactly.
DigitLabels label(const ImageGrid& image);

std::string to_ppm(const ImageGrid& image);
ImageGrid from_ppm(const std::string& bytes);

/// Manifest-format CSV without images (nuisance and path columns empty).
std::string labels_csv(const std::string& model, const LabelSample& sample);

struct ExportResult {
  std::filesystem::path manifest;
  std::vector<std::filesystem::path> images;
};

/// Writes manifest.csv (and one PPM per row for rendering models) into `dir`.
ExportResult export_dataset(const BuiltinModel& model, const Scm& scm, const LabelSample& sample,
                            const std::filesystem::path& dir);

}  // namespace ctf
