#include <doctest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "soilref/synth/synth.hpp"

using namespace soilref;
using namespace soilref::synth;

namespace {

SceneSpec quiet_spec() {
  SceneSpec s;
  s.morph = {{{0, 0.0}, {0, 0.0}, {0, 0.0}}};
  s.component = {{{0, 0, 0}, {0, 0, 0}, {0, 0, 0}}};
  s.vertex_jitter = 0.0;
  s.p_conf = 0.0;
  return s;
}

LabelMap disc_map(int h, int w, double cy, double cx, double r, int cls) {
  LabelMap m(w, h, 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if ((y - cy) * (y - cy) + (x - cx) * (x - cx) <= r * r) m.set(y, x, static_cast<std::uint8_t>(cls));
  return m;
}

int soiled(const LabelMap& m) {
  int n = 0;
  for (auto c : m.data()) n += c != 0;
  return n;
}

int disagreements(const LabelMap& a, const LabelMap& b) {
  int n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) n += a.data()[i] != b.data()[i];
  return n;
}

// Crossing-number point-in-polygon for pixel centres; vertices are (y, x).
bool inside(const std::vector<std::array<double, 2>>& poly, double y, double x) {
  bool in = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const double yi = poly[i][0], xi = poly[i][1], yj = poly[j][0], xj = poly[j][1];
    if ((yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi) in = !in;
  }
  return in;
}

// Independent Monte-Carlo model of the polygon annotation of a single disc
// component: vertex radii from the enclosing-wedge rule, Gaussian vertex
// jitter clamped at two sigma, even-odd fill.
double oracle_disagreement(const LabelMap& truth, int K, double sigma, oracle::TestRng& r) {
  const int h = truth.height(), w = truth.width();
  double cy = 0, cx = 0;
  int area = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (truth.at(y, x) != 0) cy += y, cx += x, ++area;
  cy /= area;
  cx /= area;
  const double two_pi = 2 * std::numbers::pi;
  const double phase = r.real(0.0, two_pi / K);
  // Smallest vertex radius whose chords still enclose every pixel centre
  // (plus half a pixel) of the wedge between two vertices.
  std::vector<double> wedge(K, 0.5);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (truth.at(y, x) == 0) continue;
      const double d = std::hypot(y - cy, x - cx);
      double a = std::atan2(y - cy, x - cx) - phase;
      a = std::fmod(std::fmod(a, two_pi) + two_pi, two_pi);
      const int k = std::min(K - 1, static_cast<int>(a / (two_pi / K)));
      wedge[k] = std::max(wedge[k], (d + 0.5) / std::cos(std::numbers::pi / K));
    }
  }
  std::vector<double> reach(K);
  for (int k = 0; k < K; ++k) reach[k] = std::max(wedge[k], wedge[(k + K - 1) % K]);
  std::normal_distribution<double> n(0.0, sigma);
  std::vector<std::array<double, 2>> poly;
  for (int k = 0; k < K; ++k) {
    const double rr = std::max(0.5, reach[k] + std::clamp(n(r.eng), -2 * sigma, 2 * sigma));
    const double t = phase + k * two_pi / K;
    poly.push_back({cy + rr * std::sin(t), cx + rr * std::cos(t)});
  }
  int diff = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) diff += (inside(poly, y, x) ? 1 : 0) != (truth.at(y, x) != 0 ? 1 : 0);
  return static_cast<double>(diff) / (h * w);
}

double mean_abs_diff(const Scene& s, int cls, int& count) {
  double sum = 0;
  count = 0;
  for (int y = 0; y < s.truth.height(); ++y) {
    for (int x = 0; x < s.truth.width(); ++x) {
      if (s.truth.at(y, x) != cls) continue;
      for (int c = 0; c < 3; ++c) sum += std::abs(s.image.at(y, x, c) - s.background.at(y, x, c));
      ++count;
    }
  }
  return count ? sum / (3.0 * count) : 0.0;
}

}  // namespace

TEST_SUITE("scene") {
  TEST_CASE("zero blobs give an all-clean truth") {
    SceneSpec s;
    s.blob_count = {{{0, 0}, {0, 0}, {0, 0}}};
    const auto scene = gen_scene(s, 3);
    CHECK(soiled(scene.truth) == 0);
    CHECK(scene.image == scene.background);
    scene.image.validate();
  }

  TEST_CASE("same seed gives identical scenes") {
    SceneSpec s;
    const auto a = gen_scene(s, 99), b = gen_scene(s, 99), c = gen_scene(s, 100);
    CHECK(a.image == b.image);
    CHECK(a.truth == b.truth);
    CHECK_FALSE(a.image == c.image);
  }

  TEST_CASE("single opaque disc matches the rasterised disc count") {
    for (double r : {3.0, 5.5, 8.0, 12.25}) {
      for (auto [cy, cx] : {std::pair{32.0, 32.0}, std::pair{31.5, 30.25}, std::pair{2.0, 60.0}}) {
        SceneSpec s;
        s.fixed_blobs = {BlobSpec{3, cy, cx, r}};
        const auto scene = gen_scene(s, 1);
        int opaque = 0;
        for (auto c : scene.truth.data()) opaque += c == 3;
        CHECK(opaque == oracle::disc_pixel_count(cy, cx, r, 64, 64));
        CHECK(soiled(scene.truth) == opaque);
      }
    }
  }

  TEST_CASE("later blobs overwrite earlier ones") {
    SceneSpec s;
    s.fixed_blobs = {BlobSpec{1, 32, 32, 10}, BlobSpec{3, 32, 32, 4}};
    const auto t = gen_scene(s, 1).truth;
    CHECK(t.at(32, 32) == 3);
    CHECK(t.at(32, 39) == 1);
  }

  TEST_CASE("degenerate specs are rejected") {
    SceneSpec s;
    s.radius_min = 0.0;
    CHECK_THROWS_AS(gen_scene(s, 1), std::invalid_argument);
    s = SceneSpec{};
    s.fixed_blobs = {BlobSpec{3, 10, 10, 0.0}};
    CHECK_THROWS_AS(gen_scene(s, 1), std::invalid_argument);
    s = SceneSpec{};
    s.p_conf = 1.5;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    s = SceneSpec{};
    s.polygon_vertices = 2;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    s = SceneSpec{};
    s.height = 30;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  }

  TEST_CASE("opaque soiling changes the image more than transparent soiling") {
    SceneSpec s;
    s.blob_count = {{{1, 2}, {0, 1}, {1, 2}}};
    int scenes = 0;
    for (std::uint64_t seed = 1; scenes < 20 && seed < 200; ++seed) {
      const auto scene = gen_scene(s, seed);
      int n_op = 0, n_tr = 0;
      const double op = mean_abs_diff(scene, 3, n_op);
      const double tr = mean_abs_diff(scene, 1, n_tr);
      if (n_op == 0 || n_tr == 0) continue;
      CHECK(op > tr);
      ++scenes;
    }
    CHECK(scenes == 20);
  }
}

TEST_SUITE("manual") {
  TEST_CASE("noise-free limit covers each blob with its own class") {
    SceneSpec s = quiet_spec();
    s.polygon_vertices = 64;
    const auto truth = disc_map(64, 64, 20.3, 18.7, 9.0, 1);
    auto t2 = truth;
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x)
        if ((y - 45.0) * (y - 45.0) + (x - 44.0) * (x - 44.0) <= 49.0) t2.set(y, x, 3);
    const auto manual = simulate_manual(t2, s, 5);
    int extra = 0;
    for (int y = 0; y < 64; ++y) {
      for (int x = 0; x < 64; ++x) {
        if (t2.at(y, x) != 0) CHECK(manual.at(y, x) == t2.at(y, x));
        else extra += manual.at(y, x) != 0;
      }
    }
    CHECK(extra <= soiled(t2) / 4);
  }

  TEST_CASE("p_conf = 1 relabels a transparent component") {
    SceneSpec s = quiet_spec();
    s.p_conf = 1.0;
    const auto truth = disc_map(64, 64, 30, 30, 8, 1);
    const auto manual = simulate_manual(truth, s, 2);
    int semi = 0;
    for (auto c : manual.data()) {
      CHECK((c == 0 || c == 2));
      semi += c == 2;
    }
    CHECK(semi > 0);
    const auto opaque = simulate_manual(disc_map(64, 64, 30, 30, 8, 3), s, 2);
    for (auto c : opaque.data()) CHECK((c == 0 || c == 3));
  }

  TEST_CASE("disagreement rate matches a Monte-Carlo model") {
    SceneSpec s = quiet_spec();
    s.vertex_jitter = 2.0;
    s.polygon_vertices = 8;
    const auto truth = disc_map(64, 64, 31.3, 32.6, 11.0, 3);
    oracle::TestRng r(77);
    double lib = 0, lib2 = 0, ora = 0, ora2 = 0;
    const int n = 100;
    for (int seed = 0; seed < n; ++seed) {
      const double a = static_cast<double>(disagreements(simulate_manual(truth, s, 1000 + seed), truth)) / (64 * 64);
      const double b = oracle_disagreement(truth, 8, 2.0, r);
      lib += a;
      lib2 += a * a;
      ora += b;
      ora2 += b * b;
    }
    const double m1 = lib / n, m2 = ora / n;
    const double se = std::sqrt((lib2 / n - m1 * m1) / n + (ora2 / n - m2 * m2) / n);
    MESSAGE("library " << m1 << " oracle " << m2 << " se " << se);
    CHECK(std::abs(m1 - m2) < 5 * se + 1e-3);
  }

  TEST_CASE("disagreement is confined to a band around boundaries") {
    SceneSpec s = quiet_spec();
    s.vertex_jitter = 2.0;
    s.polygon_vertices = 7;
    oracle::TestRng r(5);
    for (int trial = 0; trial < 30; ++trial) {
      const double rad = r.real(5, 14);
      const auto truth = disc_map(64, 64, r.real(16, 48), r.real(16, 48), rad, r.integer(1, 3));
      const auto manual = simulate_manual(truth, s, 300 + trial);
      const double sag = rad * (1 / std::cos(std::numbers::pi / 7) - 1) + 1.5;
      const double band = 2 * s.vertex_jitter + sag;
      std::vector<std::pair<int, int>> edge;
      for (int y = 0; y < 64; ++y) {
        for (int x = 0; x < 64; ++x) {
          const bool b = (y > 0 && truth.at(y - 1, x) != truth.at(y, x)) ||
                         (x > 0 && truth.at(y, x - 1) != truth.at(y, x));
          if (b) edge.emplace_back(y, x);
        }
      }
      double worst = 0;
      for (int y = 0; y < 64; ++y) {
        for (int x = 0; x < 64; ++x) {
          if (manual.at(y, x) == truth.at(y, x)) continue;
          double best = 1e9;
          for (auto [ey, ex] : edge) best = std::min(best, std::hypot(y - ey, x - ex));
          worst = std::max(worst, best);
        }
      }
      CHECK(worst <= band);
    }
  }

  TEST_CASE("IGNORE in truth is rejected") {
    CHECK_THROWS_AS(simulate_manual(LabelMap(16, 16, kIgnore), SceneSpec{}, 1), ShapeError);
  }
}

TEST_SUITE("pseudo-labels") {
  TEST_CASE("noise-free limit") {
    SceneSpec s = quiet_spec();
    s.blob_count = {{{1, 2}, {1, 2}, {1, 2}}};
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto truth = gen_scene(s, seed).truth;
      const auto manual = simulate_manual(truth, s, seed);
      const auto pls = simulate_pls(truth, manual, s, seed);
      CHECK(pls[0] == manual);
      for (int q = 1; q <= 6; ++q) CHECK(pls[q] == truth);
      for (auto [q, f] : {std::pair{7, 4}, std::pair{8, 2}}) {
        for (int by = 0; by < 64; by += f) {
          for (int bx = 0; bx < 64; bx += f) {
            bool constant = true;
            for (int y = by; y < by + f; ++y)
              for (int x = bx; x < bx + f; ++x) constant &= truth.at(y, x) == truth.at(by, bx);
            if (!constant) continue;
            for (int y = by; y < by + f; ++y)
              for (int x = bx; x < bx + f; ++x) CHECK(pls[q].at(y, x) == truth.at(y, x));
          }
        }
      }
      CHECK(pls.provenance() == pl_provenance());
    }
  }

  TEST_CASE("drop rate 1 clears the component-noise maps") {
    SceneSpec s;
    s.blob_count = {{{1, 2}, {1, 2}, {1, 2}}};
    for (auto& c : s.component) c.drop_rate = 1.0;
    const auto truth = gen_scene(s, 4).truth;
    REQUIRE(soiled(truth) > 0);
    const auto pls = simulate_pls(truth, simulate_manual(truth, s, 1), s, 9);
    for (int q = 4; q <= 6; ++q) CHECK(soiled(pls[q]) == 0);
  }

  TEST_CASE("dilation by one matches the brute-force dilation") {
    SceneSpec s = quiet_spec();
    s.morph[0] = {1, 0.0};
    s.morph[1] = {2, 0.0};
    for (double rad : {4.0, 7.5, 10.0}) {
      const auto truth = disc_map(64, 64, 30.4, 33.1, rad, 2);
      const auto pls = simulate_pls(truth, truth, s, 1);
      CHECK(soiled(pls[1]) == oracle::dilated_count(truth, 1));
      CHECK(soiled(pls[2]) == oracle::dilated_count(truth, 2));
    }
  }

  TEST_CASE("erosion shrinks, boundary noise only touches edges") {
    const auto truth = disc_map(32, 32, 16, 16, 8, 3);
    const auto eroded = morph(truth, -1);
    CHECK(soiled(eroded) < soiled(truth));
    for (std::size_t i = 0; i < truth.size(); ++i)
      if (eroded.data()[i] != 0) CHECK(truth.data()[i] == eroded.data()[i]);

    CHECK(boundary_noise(truth, 0.0, 1) == truth);
    const auto noisy = boundary_noise(truth, 1.0, 1);
    for (int y = 0; y < 32; ++y) {
      for (int x = 0; x < 32; ++x) {
        bool edge = false;
        for (auto [dy, dx] : {std::pair{-1, 0}, std::pair{1, 0}, std::pair{0, -1}, std::pair{0, 1}}) {
          const int ny = y + dy, nx = x + dx;
          if (ny >= 0 && ny < 32 && nx >= 0 && nx < 32) edge |= truth.at(ny, nx) != truth.at(y, x);
        }
        CHECK((noisy.at(y, x) != truth.at(y, x)) == edge);
      }
    }
  }

  TEST_CASE("resolution loss takes the block mode with low-code ties") {
    const LabelMap m(4, 2, std::vector<std::uint8_t>{0, 1, 1, 1, 1, 0, 2, 3});
    const auto r = resolution_loss(m, 2);
    CHECK(r == LabelMap(4, 2, std::vector<std::uint8_t>{0, 0, 1, 1, 0, 0, 1, 1}));
    CHECK_THROWS_AS(resolution_loss(LabelMap(6, 6, 0), 4), ShapeError);
  }

  TEST_CASE("components are 4-connected and per class") {
    // 1 . 1
    // . 1 2
    const LabelMap m(3, 2, std::vector<std::uint8_t>{1, 0, 1, 0, 1, 2});
    const auto c = soiled_components(m);
    CHECK(c.count() == 4);
    CHECK(c.labels == std::vector<int>{1, 0, 2, 0, 3, 4});
    CHECK(c.cls == std::vector<int>{1, 1, 1, 2});
    CHECK(c.area == std::vector<int>{1, 1, 1, 1});
  }

  TEST_CASE("polygon fill of pixel centres") {
    const std::vector<std::array<double, 2>> square{{0.5, 0.5}, {0.5, 3.5}, {3.5, 3.5}, {3.5, 0.5}};
    const auto px = rasterize_polygon(square, 8, 8);
    CHECK(px.size() == 9);
    for (auto [y, x] : px) {
      CHECK(y >= 1);
      CHECK(y <= 3);
      CHECK(x >= 1);
      CHECK(x <= 3);
    }
    CHECK(rasterize_polygon(square, 2, 2).size() == 1);
  }

  TEST_CASE("every pseudo-label agrees with truth at least as well as all-clean") {
    SceneSpec s;
    std::array<long, 9> agree{};
    long clean_agree = 0, total = 0;
    for (std::uint64_t i = 0; i < 20; ++i) {
      const auto sample = generate_sample(s, i, "s");
      const auto& t = *sample.truth;
      for (std::size_t p = 0; p < t.size(); ++p) {
        clean_agree += t.data()[p] == 0;
        for (int q = 0; q < 9; ++q) agree[q] += sample.pls[q].data()[p] == t.data()[p];
      }
      total += static_cast<long>(t.size());
    }
    for (int q = 0; q < 9; ++q) {
      INFO("pseudo-label " << q + 1 << ": " << agree[q] << " vs all-clean " << clean_agree << " of " << total);
      CHECK(agree[q] >= clean_agree);
    }
  }

  TEST_CASE("samples are deterministic and independent of generation order") {
    SceneSpec s;
    s.seed = 17;
    const auto a = generate_sample(s, 3, "x");
    generate_sample(s, 0, "y");
    const auto b = generate_sample(s, 3, "x");
    CHECK(a.image == b.image);
    CHECK(*a.truth == *b.truth);
    CHECK(a.pls == b.pls);
    CHECK_FALSE(generate_sample(s, 4, "x").image == a.image);
    for (const auto& m : a.pls.maps()) CHECK_FALSE(m.has_ignore());
  }
}
