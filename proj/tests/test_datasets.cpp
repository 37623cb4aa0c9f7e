#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "ctf/consistency.hpp"
#include "ctf/datasets.hpp"

using namespace ctf;
namespace fs = std::filesystem;

namespace {

std::string ascii(const ImageGrid& img) {
  std::string out;
  for (int y = 0; y < kGridSize; ++y) {
    for (int x = 0; x < kGridSize; ++x) {
      const Rgb& p = img.at(x, y);
      char c = '?';
      if (p == Rgb{0, 0, 0}) c = '.';
      if (p == Rgb{255, 0, 0}) c = 'R';
      if (p == Rgb{0, 255, 0}) c = 'G';
      if (p == Rgb{0, 0, 255}) c = 'B';
      out += c;
    }
    out += '\n';
  }
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("ctf_test_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_SUITE("datasets") {

TEST_CASE("render matches the golden fixture") {
  std::string golden = slurp(fs::path(CTF_FIXTURE_DIR) / "render_d0_c1_b1.txt");
  REQUIRE_FALSE(golden.empty());
  CHECK(ascii(render({0, 1, 1}, {0, 0, 1})) == golden);
}

TEST_CASE("glyph signatures are distinct") {
  std::set<std::string> seen;
  for (int d = 0; d < 10; ++d)
    for (int c = 0; c < 2; ++c)
      for (int b = 0; b < 2; ++b) seen.insert(ascii(render({d, c, b}, {})));
  CHECK(seen.size() == 40);
  CHECK(all_nuisances().size() == 50);
}

TEST_CASE("render and label invert each other exhaustively") {
  int ok = 0;
  for (int d = 0; d < 10; ++d)
    for (int c = 0; c < 2; ++c)
      for (int b = 0; b < 2; ++b)
        for (const auto& nu : all_nuisances()) {
          DigitLabels l{d, c, b};
          if (label(render(l, nu)) == l) ++ok;
        }
  CHECK(ok == 2000);
}

TEST_CASE("unlabelable images") {
  ImageGrid black;
  CHECK_THROWS_WITH_AS(label(black), doctest::Contains("unlabelable"), Error);
  auto img = render({4, 1, 1}, {});
  for (int y = kBarRows; y < kGridSize; ++y)
    for (int x = 0; x < kGridSize; ++x) img.at(x, y) = {};
  CHECK_THROWS_AS(label(img), Error);
  auto odd = render({4, 0, 0}, {});
  odd.at(0, kGridSize - 1) = {1, 2, 3};
  CHECK_THROWS_AS(label(odd), Error);
}

TEST_CASE("ppm round trip") {
  auto img = render({7, 0, 1}, {2, -1, 2});
  auto bytes = to_ppm(img);
  CHECK(bytes.size() == std::string("P6\n28 28\n255\n").size() + 3 * kGridSize * kGridSize);
  CHECK(from_ppm(bytes) == img);
  CHECK_THROWS_AS(from_ppm("P3\n"), Error);
}

TEST_CASE("sampling is deterministic and prefix-stable") {
  auto m = load_builtin("backdoor");
  auto a = sample_labels(m, 300, 5);
  auto b = sample_labels(m, 100, 5);
  CHECK(a.variables == std::vector<std::string>{"D", "C", "B"});
  for (std::size_t i = 0; i < 100; ++i) {
    CHECK(a.rows[i] == b.rows[i]);
    CHECK(a.seeds[i] == b.seeds[i]);
  }
  CHECK(sample_labels(m, 300, 5).rows == a.rows);
  CHECK(sample_labels(m, 300, 6).rows != a.rows);
  CHECK(sample_nuisance(9) == sample_nuisance(9));
}

TEST_CASE("backdoor sample follows the exact distribution") {
  auto m = load_builtin("backdoor");
  auto s = sample_labels(m, 60000, 17);
  std::istringstream in(labels_csv("backdoor", s));
  auto emp = empirical_distribution_csv(in);
  auto obs = observational(m);
  CHECK(tv_distance(emp, obs) < Rational(3, 100));
  // Digit and color are confounded, so C depends on D.
  CHECK(obs.prob(Assignment{{"D", 9}, {"C", 1}}) / obs.prob(Assignment{{"D", 9}}) !=
        obs.prob(Assignment{{"D", 0}, {"C", 1}}) / obs.prob(Assignment{{"D", 0}}));
}

TEST_CASE("export writes a manifest and one image per row") {
  auto dir = scratch("export");
  const auto& bm = find_builtin("backdoor");
  auto scm = load_builtin("backdoor");
  auto s = sample_labels(scm, 25, 8);
  auto r = export_dataset(bm, scm, s, dir);
  CHECK(r.images.size() == 25);
  CHECK(fs::exists(dir / "render_params.json"));
  std::string manifest = slurp(r.manifest);
  CHECK(std::count(manifest.begin(), manifest.end(), '\n') == 26);
  CHECK(manifest.rfind("id,model,seed,D,C,B,x_offset,y_offset,thickness,image_path\n", 0) == 0);
  for (std::size_t i = 0; i < r.images.size(); ++i) {
    auto l = label(from_ppm(slurp(r.images[i])));
    CHECK(l == DigitLabels{s.rows[i][0], s.rows[i][1], s.rows[i][2]});
  }
  auto again = scratch("export2");
  auto r2 = export_dataset(bm, scm, s, again);
  CHECK(slurp(r2.manifest) == manifest);
  for (std::size_t i = 0; i < r.images.size(); ++i) CHECK(slurp(r2.images[i]) == slurp(r.images[i]));
  auto face = scratch("face");
  auto fr = export_dataset(find_builtin("face_mstar"), load_builtin("face_mstar"),
                           sample_labels(load_builtin("face_mstar"), 5, 1), face);
  CHECK(fr.images.empty());
  CHECK(std::distance(fs::directory_iterator(face), fs::directory_iterator{}) == 1);
  fs::remove_all(dir);
  fs::remove_all(again);
  fs::remove_all(face);
}

TEST_CASE("builtin pairs share their observational distribution") {
  auto star = observational(load_builtin("face_mstar"));
  CHECK(observational(load_builtin("face_mprime")) == star);
  CHECK(observational(load_builtin("face_m3")) == star);
  CHECK(observational(load_builtin("face_m1_smile")) == observational(load_builtin("face_m2_smile")));
  CHECK(builtin_models().size() == 8);
  CHECK_THROWS_AS(find_builtin("nope"), ModelError);
}

}  // TEST_SUITE
