#include "ctf/datasets.hpp"

#include <bitset>
#include <fstream>
#include <set>

#include <json.hpp>

#include "ctf/rng.hpp"

namespace ctf {

LabelSample sample_labels(const Scm& scm, std::size_t n, std::uint64_t seed) {
  if (!scm.acyclic()) throw ModelError("cannot sample a cyclic model");
  LabelSample out;
  out.variables = scm.endogenous_names();
  std::vector<std::vector<double>> cdf;
  for (const auto& u : scm.exogenous()) cdf.push_back(cumulative(u.pmf));
  auto fixed = scm.resolve({});
  std::vector<int> u(scm.num_exogenous());
  std::vector<int> slots(scm.num_endogenous() + scm.num_exogenous());
  out.rows.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t s = derive_seed(seed, i);
    Rng rng(s);
    for (int k = 0; k < scm.num_exogenous(); ++k) {
      u[k] = scm.exogenous()[k].support[rng.categorical(cdf[k])];
    }
    scm.solve_into(u, fixed, slots);
    out.rows.emplace_back(slots.begin(), slots.begin() + scm.num_endogenous());
    out.seeds.push_back(s);
  }
  return out;
}

// ------------------------------------------------------------- rendering

namespace {

constexpr int kGlyphW = 5;
constexpr int kGlyphH = 7;

// 5x7 digits, one string per row, '#' lit.
constexpr const char* kFont[10][kGlyphH] = {
    {".###.", "#...#", "#..##", "#.#.#", "##..#", "#...#", ".###."},
    {"..#..", ".##..", "..#..", "..#..", "..#..", "..#..", ".###."},
    {".###.", "#...#", "....#", "...#.", "..#..", ".#...", "#####"},
    {"#####", "...#.", "..#..", "...#.", "....#", "#...#", ".###."},
    {"...#.", "..##.", ".#.#.", "#..#.", "#####", "...#.", "...#."},
    {"#####", "#....", "####.", "....#", "....#", "#...#", ".###."},
    {"..##.", ".#...", "#....", "####.", "#...#", "#...#", ".###."},
    {"#####", "....#", "...#.", "..#..", ".#...", ".#...", ".#..."},
    {".###.", "#...#", "#...#", ".###.", "#...#", "#...#", ".###."},
    {".###.", "#...#", "#...#", ".####", "....#", "...#.", ".##.."},
};

constexpr Rgb kBlack{0, 0, 0};
constexpr Rgb kRed{255, 0, 0};
constexpr Rgb kGreen{0, 255, 0};
constexpr Rgb kBlue{0, 0, 255};

using Mask = std::bitset<kGridSize * kGridSize>;

Mask glyph_mask(int digit, const Nuisance& nu) {
  Mask m;
  int x0 = kGlyphX + nu.x_offset;
  int y0 = kGlyphY + nu.y_offset;
  int width = kGlyphScale + (nu.thickness == 2 ? 1 : 0);
  for (int r = 0; r < kGlyphH; ++r) {
    for (int c = 0; c < kGlyphW; ++c) {
      if (kFont[digit][r][c] != '#') continue;
      for (int dy = 0; dy < kGlyphScale; ++dy) {
        for (int dx = 0; dx < width; ++dx) {
          int x = x0 + c * kGlyphScale + dx;
          int y = y0 + r * kGlyphScale + dy;
          m.set(y * kGridSize + x);
        }
      }
    }
  }
  return m;
}

struct Template {
  int digit;
  Nuisance nuisance;
  Mask mask;
};

const std::vector<Template>& templates() {
  static const std::vector<Template> all = [] {
    std::vector<Template> t;
    for (int d = 0; d < 10; ++d) {
      for (const auto& nu : all_nuisances()) t.push_back({d, nu, glyph_mask(d, nu)});
    }
    return t;
  }();
  return all;
}

[[noreturn]] void unlabelable(const std::string& why) { throw Error("unlabelable image: " + why); }

}  // namespace

std::vector<Nuisance> all_nuisances() {
  std::vector<Nuisance> out;
  for (int x = -kMaxOffset; x <= kMaxOffset; ++x) {
    for (int y = -kMaxOffset; y <= kMaxOffset; ++y) {
      for (int t = 1; t <= 2; ++t) out.push_back({x, y, t});
    }
  }
  return out;
}

Nuisance sample_nuisance(std::uint64_t seed) {
  Rng rng(seed);
  Nuisance nu;
  nu.x_offset = rng.uniform_int(-kMaxOffset, kMaxOffset);
  nu.y_offset = rng.uniform_int(-kMaxOffset, kMaxOffset);
  nu.thickness = rng.uniform_int(1, 2);
  return nu;
}

ImageGrid render(const DigitLabels& labels, const Nuisance& nu) {
  if (labels.digit < 0 || labels.digit > 9 || (labels.color != 0 && labels.color != 1) ||
      (labels.bar != 0 && labels.bar != 1)) {
    throw Error("labels outside the renderable domain");
  }
  if (std::abs(nu.x_offset) > kMaxOffset || std::abs(nu.y_offset) > kMaxOffset ||
      (nu.thickness != 1 && nu.thickness != 2)) {
    throw Error("nuisance outside the admissible range");
  }
  ImageGrid img;
  if (labels.bar == 1) {
    for (int y = 0; y < kBarRows; ++y) {
      for (int x = 0; x < kGridSize; ++x) img.at(x, y) = kBlue;
    }
  }
  Mask m = glyph_mask(labels.digit, nu);
  Rgb ink = labels.color == 1 ? kRed : kGreen;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m.test(i)) img.pixels[i] = ink;
  }
  return img;
}

DigitLabels label(const ImageGrid& image) {
  DigitLabels out;
  int blue_bar = 0;
  for (int y = 0; y < kBarRows; ++y) {
    for (int x = 0; x < kGridSize; ++x) {
      const Rgb& p = image.at(x, y);
      if (p == kBlue) {
        ++blue_bar;
      } else if (!(p == kBlack)) {
        unlabelable("unexpected pixel in the bar rows");
      }
    }
  }
  if (blue_bar == kBarRows * kGridSize) {
    out.bar = 1;
  } else if (blue_bar != 0) {
    unlabelable("partial bar");
  }
  Mask mask;
  bool red = false, green = false;
  for (int y = kBarRows; y < kGridSize; ++y) {
    for (int x = 0; x < kGridSize; ++x) {
      const Rgb& p = image.at(x, y);
      if (p == kBlack) continue;
      if (p == kRed) {
        red = true;
      } else if (p == kGreen) {
        green = true;
      } else {
        unlabelable("unexpected pixel color");
      }
      mask.set(y * kGridSize + x);
    }
  }
  if (!red && !green) unlabelable("no digit");
  if (red && green) unlabelable("mixed digit colors");
  out.color = red ? 1 : 0;
  std::set<int> digits;
  for (const auto& t : templates()) {
    if (t.mask == mask) digits.insert(t.digit);
  }
  if (digits.empty()) unlabelable("no glyph template matches");
  if (digits.size() > 1) unlabelable("glyph matches several digits");
  out.digit = *digits.begin();
  return out;
}

std::string to_ppm(const ImageGrid& image) {
  std::string out = "P6\n" + std::to_string(kGridSize) + " " + std::to_string(kGridSize) + "\n255\n";
  for (const auto& p : image.pixels) {
    out.push_back(static_cast<char>(p.r));
    out.push_back(static_cast<char>(p.g));
    out.push_back(static_cast<char>(p.b));
  }
  return out;
}

ImageGrid from_ppm(const std::string& bytes) {
  const std::string header = "P6\n28 28\n255\n";
  if (bytes.size() != header.size() + 3 * kGridSize * kGridSize || bytes.compare(0, header.size(), header) != 0) {
    throw Error("not a 28x28 binary PPM");
  }
  ImageGrid img;
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    std::size_t o = header.size() + 3 * i;
    img.pixels[i] = {static_cast<std::uint8_t>(bytes[o]), static_cast<std::uint8_t>(bytes[o + 1]),
                     static_cast<std::uint8_t>(bytes[o + 2])};
  }
  return img;
}

// ---------------------------------------------------------------- export

namespace {

void write_file(const std::filesystem::path& path, const std::string& data) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
  f.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!f) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace

std::string labels_csv(const std::string& model, const LabelSample& sample) {
  std::string csv = "id,model,seed";
  for (const auto& v : sample.variables) csv += "," + v;
  csv += ",x_offset,y_offset,thickness,image_path\n";
  for (std::size_t i = 0; i < sample.rows.size(); ++i) {
    csv += std::to_string(i) + "," + model + "," + std::to_string(sample.seeds[i]);
    for (int v : sample.rows[i]) csv += "," + std::to_string(v);
    csv += ",,,,\n";
  }
  return csv;
}

ExportResult export_dataset(const BuiltinModel& model, const Scm& scm, const LabelSample& sample,
                            const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
  ExportResult result;
  int di = -1, ci = -1, bi = -1;
  if (model.renders) {
    di = scm.require_endo("D");
    ci = scm.require_endo("C");
    bi = scm.require_endo("B");
  }
  std::string csv = "id,model,seed";
  for (const auto& v : sample.variables) csv += "," + v;
  csv += ",x_offset,y_offset,thickness,image_path\n";
  for (std::size_t i = 0; i < sample.rows.size(); ++i) {
    const auto& row = sample.rows[i];
    csv += std::to_string(i) + "," + model.name + "," + std::to_string(sample.seeds[i]);
    for (int v : row) csv += "," + std::to_string(v);
    if (model.renders) {
      Nuisance nu = sample_nuisance(derive_seed(sample.seeds[i], 1));
      char name[32];
      std::snprintf(name, sizeof name, "img_%06zu.ppm", i);
      auto path = dir / name;
      write_file(path, to_ppm(render({row[di], row[ci], row[bi]}, nu)));
      result.images.push_back(path);
      csv += "," + std::to_string(nu.x_offset) + "," + std::to_string(nu.y_offset) + "," +
             std::to_string(nu.thickness) + "," + name;
    } else {
      csv += ",,,,";
    }
    csv += "\n";
  }
  result.manifest = dir / "manifest.csv";
  write_file(result.manifest, csv);
  if (model.renders) {
    nlohmann::json params = {
        {"grid", kGridSize},
        {"glyph", {{"font", "5x7"}, {"scale", kGlyphScale}, {"origin", {kGlyphX, kGlyphY}}}},
        {"bar_rows", kBarRows},
        {"max_offset", kMaxOffset},
        {"thickness", {1, 2}},
        {"colors", {{"C=1", {255, 0, 0}}, {"C=0", {0, 255, 0}}, {"bar", {0, 0, 255}}}},
    };
    write_file(dir / "render_params.json", params.dump(2) + "\n");
  }
  return result;
}

}  // namespace ctf
