#include "soilref/synth/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "soilref/core/rng.hpp"

namespace soilref::synth {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

using Rgb = std::array<double, 3>;

// Appearance parameters of the soiling classes.
constexpr Rgb kWaterTint{0.60, 0.78, 0.98};
constexpr Rgb kMudTint{0.58, 0.42, 0.22};
constexpr Rgb kOpaqueFill{0.12, 0.11, 0.10};
constexpr double kTransparentAlpha = 0.45;
constexpr double kSemiAlpha = 0.75;
constexpr int kMildBlur = 1;
constexpr int kHeavyBlur = 3;
constexpr double kColorCast = 0.08;

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

// Muted scene color: a gray level with a small per-channel cast.
Rgb random_color(Rng& rng, double lo, double hi) {
  const double g = rng.uniform(lo, hi);
  Rgb c;
  for (double& v : c) v = clamp01(g + rng.uniform(-kColorCast, kColorCast));
  return c;
}

// Separable box blur with clamp-to-edge borders.
Image box_blur(const Image& img, int radius) {
  const int w = img.width(), h = img.height();
  const double norm = 1.0 / (2 * radius + 1);
  Image tmp(w, h), out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        double s = 0.0;
        for (int d = -radius; d <= radius; ++d) s += img.at(y, std::clamp(x + d, 0, w - 1), c);
        tmp.set(y, x, c, s * norm);
      }
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        double s = 0.0;
        for (int d = -radius; d <= radius; ++d) s += tmp.at(std::clamp(y + d, 0, h - 1), x, c);
        out.set(y, x, c, clamp01(s * norm));
      }
    }
  }
  return out;
}

Image render_background(int w, int h, Rng& rng) {
  Image img(w, h);
  const Rgb c0 = random_color(rng, 0.35, 0.9);
  const Rgb c1 = random_color(rng, 0.35, 0.9);
  const double theta = rng.uniform(0.0, kTwoPi);
  const double ux = std::cos(theta), uy = std::sin(theta);
  const double span = std::abs(ux) * (w - 1) + std::abs(uy) * (h - 1) + 1e-9;
  const double base = std::min(0.0, ux * (w - 1)) + std::min(0.0, uy * (h - 1));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double t = (ux * x + uy * y - base) / span;
      for (int c = 0; c < 3; ++c) img.set(y, x, c, c0[c] * (1.0 - t) + c1[c] * t);
    }
  }
  const int shapes = rng.range(5, 10);
  for (int s = 0; s < shapes; ++s) {
    const bool rect = rng.bernoulli(0.5);
    const Rgb col = random_color(rng, 0.35, 0.95);
    const double alpha = rng.uniform(0.6, 1.0);
    const double cy = rng.uniform(0.0, h), cx = rng.uniform(0.0, w);
    const double ry = rng.uniform(2.0, h / 4.0), rx = rng.uniform(2.0, w / 4.0);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double dy = (y - cy) / ry, dx = (x - cx) / rx;
        const bool inside = rect ? (std::abs(dy) <= 1.0 && std::abs(dx) <= 1.0)
                                 : (dy * dy + dx * dx <= 1.0);
        if (!inside) continue;
        for (int c = 0; c < 3; ++c) {
          img.set(y, x, c, img.at(y, x, c) * (1.0 - alpha) + col[c] * alpha);
        }
      }
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        img.set(y, x, c, clamp01(img.at(y, x, c) + rng.uniform(-0.04, 0.04)));
      }
    }
  }
  return img;
}

void check_prob(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw std::invalid_argument(std::string("scene spec: ") + what + " must lie in [0,1]");
  }
}

constexpr int kDy[4] = {-1, 1, 0, 0};
constexpr int kDx[4] = {0, 0, -1, 1};

}  // namespace

bool BlobSpec::contains(double y, double x) const {
  const double dy = y - cy, dx = x - cx;
  const double d2 = dy * dy + dx * dx;
  if (amp2 == 0.0 && amp3 == 0.0) return d2 <= radius * radius;
  const double t = std::atan2(dy, dx);
  const double r = radius * (1.0 + amp2 * std::cos(2.0 * t + phase2) + amp3 * std::cos(3.0 * t + phase3));
  return d2 <= r * r;
}

void SceneSpec::validate() const {
  if (height < 16 || width < 16 || height % 4 != 0 || width % 4 != 0) {
    throw std::invalid_argument("scene spec: size must be at least 16 and divisible by 4");
  }
  for (const auto& r : blob_count) {
    if (r.min < 0 || r.max < r.min) throw std::invalid_argument("scene spec: bad blob count range");
  }
  if (!(radius_min > 0.0) || radius_max < radius_min) {
    throw std::invalid_argument("scene spec: blob radii must be positive (zero-area blobs)");
  }
  if (!(shape_wobble >= 0.0 && shape_wobble < 0.5)) {
    throw std::invalid_argument("scene spec: shape_wobble must lie in [0, 0.5)");
  }
  for (const auto& b : fixed_blobs) {
    if (!(b.radius > 0.0)) throw std::invalid_argument("scene spec: zero-area fixed blob");
    if (b.cls < 1 || b.cls > 3) throw std::invalid_argument("scene spec: fixed blob class must be 1..3");
  }
  if (polygon_vertices < 3) throw std::invalid_argument("scene spec: polygon needs K >= 3");
  if (!(vertex_jitter >= 0.0)) throw std::invalid_argument("scene spec: negative vertex jitter");
  check_prob(p_conf, "p_conf");
  for (const auto& m : morph) check_prob(m.boundary_noise, "boundary noise");
  for (const auto& c : component) {
    check_prob(c.swap_rate, "swap rate");
    check_prob(c.drop_rate, "drop rate");
    check_prob(c.boundary_noise, "boundary noise");
  }
}

const PseudoLabelStack::Provenance& pl_provenance() {
  static const PseudoLabelStack::Provenance names{
      "manual-polygon",       "family-a/multiscale", "family-a/sliding",
      "family-a/holistic",    "family-b/multiscale", "family-b/sliding",
      "family-b/holistic",    "lowres/quarter",      "lowres/half"};
  return names;
}

Scene gen_scene(const SceneSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  const int w = spec.width, h = spec.height;
  Scene scene;
  scene.background = render_background(w, h, rng);

  if (!spec.fixed_blobs.empty()) {
    scene.blobs = spec.fixed_blobs;
  } else {
    for (int k = 0; k < 3; ++k) {
      const int n = rng.range(spec.blob_count[k].min, spec.blob_count[k].max);
      for (int i = 0; i < n; ++i) {
        BlobSpec b;
        b.cls = k + 1;
        b.cy = rng.uniform(0.0, h);
        b.cx = rng.uniform(0.0, w);
        b.radius = rng.uniform(spec.radius_min, spec.radius_max);
        b.amp2 = rng.uniform(0.0, spec.shape_wobble);
        b.amp3 = rng.uniform(0.0, spec.shape_wobble);
        b.phase2 = rng.uniform(0.0, kTwoPi);
        b.phase3 = rng.uniform(0.0, kTwoPi);
        scene.blobs.push_back(b);
      }
    }
    shuffle(scene.blobs.begin(), scene.blobs.end(), rng);
  }

  scene.truth = LabelMap(w, h, 0);
  for (const auto& b : scene.blobs) {
    const double reach = b.radius * (1.0 + std::abs(b.amp2) + std::abs(b.amp3)) + 1.0;
    const int y0 = std::max(0, static_cast<int>(std::floor(b.cy - reach)));
    const int y1 = std::min(h - 1, static_cast<int>(std::ceil(b.cy + reach)));
    const int x0 = std::max(0, static_cast<int>(std::floor(b.cx - reach)));
    const int x1 = std::min(w - 1, static_cast<int>(std::ceil(b.cx + reach)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        if (b.contains(y, x)) scene.truth.set(y, x, static_cast<std::uint8_t>(b.cls));
      }
    }
  }

  // Per-image tint variation keeps the classes separable only by appearance
  // statistics, not by an exact color.
  auto jitter = [&](Rgb c) {
    for (double& v : c) v = clamp01(v + rng.uniform(-0.05, 0.05));
    return c;
  };
  const Rgb water = jitter(kWaterTint);
  const Rgb mud = jitter(kMudTint);
  const Rgb fill = jitter(kOpaqueFill);
  const Image mild = box_blur(scene.background, kMildBlur);
  const Image heavy = box_blur(scene.background, kHeavyBlur);

  scene.image = scene.background;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int cls = scene.truth.at(y, x);
      const double n = rng.uniform(-0.02, 0.02);
      for (int c = 0; c < 3; ++c) {
        double v = scene.background.at(y, x, c);
        switch (cls) {
          case 1: v = (1.0 - kTransparentAlpha) * mild.at(y, x, c) + kTransparentAlpha * water[c]; break;
          case 2: v = (1.0 - kSemiAlpha) * heavy.at(y, x, c) + kSemiAlpha * mud[c]; break;
          case 3: v = fill[c] + n; break;
          default: break;
        }
        scene.image.set(y, x, c, clamp01(v));
      }
    }
  }
  return scene;
}

Components soiled_components(const LabelMap& map) {
  const int w = map.width(), h = map.height();
  Components comps;
  comps.labels.assign(static_cast<std::size_t>(w) * h, 0);
  std::vector<int> stack;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      const int cls = map.at(y, x);
      if (cls == 0 || cls == kIgnore || comps.labels[i] != 0) continue;
      const int label = comps.count() + 1;
      comps.cls.push_back(cls);
      comps.area.push_back(0);
      comps.labels[i] = label;
      stack.assign(1, static_cast<int>(i));
      while (!stack.empty()) {
        const int p = stack.back();
        stack.pop_back();
        ++comps.area.back();
        const int py = p / w, px = p % w;
        for (int d = 0; d < 4; ++d) {
          const int ny = py + kDy[d], nx = px + kDx[d];
          if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
          const std::size_t j = static_cast<std::size_t>(ny) * w + nx;
          if (comps.labels[j] == 0 && map.at(ny, nx) == cls) {
            comps.labels[j] = label;
            stack.push_back(static_cast<int>(j));
          }
        }
      }
    }
  }
  return comps;
}

std::vector<std::pair<int, int>> rasterize_polygon(const std::vector<std::array<double, 2>>& poly,
                                                   int height, int width) {
  std::vector<std::pair<int, int>> pixels;
  if (poly.size() < 3) return pixels;
  double ymin = poly[0][0], ymax = ymin, xmin = poly[0][1], xmax = xmin;
  for (const auto& v : poly) {
    ymin = std::min(ymin, v[0]);
    ymax = std::max(ymax, v[0]);
    xmin = std::min(xmin, v[1]);
    xmax = std::max(xmax, v[1]);
  }
  const int y0 = std::max(0, static_cast<int>(std::floor(ymin)));
  const int y1 = std::min(height - 1, static_cast<int>(std::ceil(ymax)));
  const int x0 = std::max(0, static_cast<int>(std::floor(xmin)));
  const int x1 = std::min(width - 1, static_cast<int>(std::ceil(xmax)));
  const std::size_t n = poly.size();
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      bool inside = false;
      for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const double yi = poly[i][0], xi = poly[i][1], yj = poly[j][0], xj = poly[j][1];
        if ((yi > y) != (yj > y)) {
          const double xc = xi + (y - yi) * (xj - xi) / (yj - yi);
          if (x < xc) inside = !inside;
        }
      }
      if (inside) pixels.emplace_back(y, x);
    }
  }
  return pixels;
}

LabelMap simulate_manual(const LabelMap& truth, const SceneSpec& spec, std::uint64_t seed) {
  if (truth.has_ignore()) throw ShapeError("simulate_manual: truth contains IGNORE");
  spec.validate();
  Rng rng(seed);
  const int w = truth.width(), h = truth.height();
  const int K = spec.polygon_vertices;
  const Components comps = soiled_components(truth);

  struct Shape {
    int cls;
    int area;
    int order;
    std::vector<std::array<double, 2>> poly;
  };
  std::vector<Shape> shapes;

  std::vector<double> cy(comps.count(), 0.0), cx(comps.count(), 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int l = comps.labels[static_cast<std::size_t>(y) * w + x];
      if (l == 0) continue;
      cy[l - 1] += y;
      cx[l - 1] += x;
    }
  }
  std::vector<std::vector<double>> reach(comps.count(), std::vector<double>(K, 0.5));
  std::vector<double> phase(comps.count());
  for (int c = 0; c < comps.count(); ++c) {
    cy[c] /= comps.area[c];
    cx[c] /= comps.area[c];
    phase[c] = rng.uniform(0.0, kTwoPi / K);
  }
  // Vertex k sits at angle phase + k * 2pi/K. A pixel in the wedge between
  // vertices k and k+1 lies inside the polygon when both vertex radii reach
  // (d + 0.5) / cos(pi/K), so each vertex takes the larger need of its two wedges.
  const double chord = std::cos(std::numbers::pi / K);
  std::vector<std::vector<double>> need(comps.count(), std::vector<double>(K, 0.5));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int l = comps.labels[static_cast<std::size_t>(y) * w + x];
      if (l == 0) continue;
      const int c = l - 1;
      const double dy = y - cy[c], dx = x - cx[c];
      const double d = std::sqrt(dy * dy + dx * dx);
      double a = std::atan2(dy, dx) - phase[c];
      a = std::fmod(std::fmod(a, kTwoPi) + kTwoPi, kTwoPi);
      const int k = std::min(K - 1, static_cast<int>(a / (kTwoPi / K)));
      need[c][k] = std::max(need[c][k], (d + 0.5) / chord);
    }
  }
  for (int c = 0; c < comps.count(); ++c) {
    for (int k = 0; k < K; ++k) reach[c][k] = std::max(need[c][k], need[c][(k + K - 1) % K]);
  }
  const double sigma = spec.vertex_jitter;
  for (int c = 0; c < comps.count(); ++c) {
    Shape s{comps.cls[c], comps.area[c], c, {}};
    for (int k = 0; k < K; ++k) {
      const double jit = sigma > 0.0 ? std::clamp(rng.normal(0.0, sigma), -2.0 * sigma, 2.0 * sigma) : 0.0;
      const double r = std::max(0.5, reach[c][k] + jit);
      const double t = phase[c] + k * kTwoPi / K;
      s.poly.push_back({cy[c] + r * std::sin(t), cx[c] + r * std::cos(t)});
    }
    const double u = rng.uniform();
    if (u < spec.p_conf) {
      if (s.cls == 1) s.cls = 2;
      else if (s.cls == 2) s.cls = 1;
    }
    shapes.push_back(std::move(s));
  }
  // Larger polygons first so small components stay visible on top.
  std::stable_sort(shapes.begin(), shapes.end(),
                   [](const Shape& a, const Shape& b) { return a.area > b.area; });
  LabelMap manual(w, h, 0);
  for (const auto& s : shapes) {
    for (const auto& [y, x] : rasterize_polygon(s.poly, h, w)) {
      manual.set(y, x, static_cast<std::uint8_t>(s.cls));
    }
  }
  return manual;
}

LabelMap morph(const LabelMap& map, int radius) {
  if (radius == 0) return map;
  const int w = map.width(), h = map.height();
  const int r = std::abs(radius);
  LabelMap out = map;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int self = map.at(y, x);
      if (radius > 0 && self != 0) continue;
      if (radius < 0 && self == 0) continue;
      int best = 0;
      bool differs = false;
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          if (dy * dy + dx * dx > r * r) continue;
          const int ny = y + dy, nx = x + dx;
          if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
          const int v = map.at(ny, nx);
          best = std::max(best, v);
          differs = differs || v != self;
        }
      }
      if (radius > 0) out.set(y, x, static_cast<std::uint8_t>(best));
      else if (differs) out.set(y, x, 0);
    }
  }
  return out;
}

LabelMap boundary_noise(const LabelMap& map, double rate, std::uint64_t seed) {
  if (rate <= 0.0) return map;
  Rng rng(seed);
  const int w = map.width(), h = map.height();
  LabelMap out = map;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int self = map.at(y, x);
      int options[4];
      int n = 0;
      for (int d = 0; d < 4; ++d) {
        const int ny = y + kDy[d], nx = x + kDx[d];
        if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
        const int v = map.at(ny, nx);
        if (v != self) options[n++] = v;
      }
      if (n == 0) continue;
      if (rng.uniform() < rate) {
        out.set(y, x, static_cast<std::uint8_t>(options[rng.below(n)]));
      }
    }
  }
  return out;
}

LabelMap component_noise(const LabelMap& map, const ComponentNoise& noise, std::uint64_t seed) {
  Rng rng(seed);
  const Components comps = soiled_components(map);
  std::vector<int> new_cls(comps.count());
  for (int c = 0; c < comps.count(); ++c) {
    const double u_drop = rng.uniform();
    const double u_swap = rng.uniform();
    const double u_dir = rng.uniform();
    int cls = comps.cls[c];
    if (u_drop < noise.drop_rate) {
      cls = 0;
    } else if (u_swap < noise.swap_rate) {
      if (cls == 1 || cls == 3) cls = 2;
      else cls = u_dir < 0.5 ? 1 : 3;
    }
    new_cls[c] = cls;
  }
  const int w = map.width(), h = map.height();
  LabelMap out = map;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int l = comps.labels[static_cast<std::size_t>(y) * w + x];
      if (l != 0) out.set(y, x, static_cast<std::uint8_t>(new_cls[l - 1]));
    }
  }
  return boundary_noise(out, noise.boundary_noise, rng.next_u64());
}

LabelMap resolution_loss(const LabelMap& map, int factor) {
  const int w = map.width(), h = map.height();
  if (factor <= 0 || w % factor != 0 || h % factor != 0) {
    throw ShapeError("resolution_loss: map size must be divisible by the factor");
  }
  LabelMap out(w, h, 0);
  for (int by = 0; by < h; by += factor) {
    for (int bx = 0; bx < w; bx += factor) {
      int counts[kNumClasses] = {0, 0, 0, 0};
      for (int y = by; y < by + factor; ++y)
        for (int x = bx; x < bx + factor; ++x) ++counts[map.at(y, x)];
      const int mode = static_cast<int>(std::max_element(counts, counts + kNumClasses) - counts);
      for (int y = by; y < by + factor; ++y)
        for (int x = bx; x < bx + factor; ++x) out.set(y, x, static_cast<std::uint8_t>(mode));
    }
  }
  return out;
}

PseudoLabelStack simulate_pls(const LabelMap& truth, const LabelMap& manual,
                              const SceneSpec& spec, std::uint64_t seed) {
  if (!truth.same_shape(manual)) throw ShapeError("simulate_pls: truth and manual differ in size");
  if (truth.has_ignore() || manual.has_ignore()) {
    throw ShapeError("simulate_pls: inputs must not contain IGNORE");
  }
  spec.validate();
  PseudoLabelStack::Maps maps;
  maps[0] = manual;
  for (int i = 0; i < 3; ++i) {
    const auto& m = spec.morph[i];
    maps[1 + i] = boundary_noise(morph(truth, m.radius), m.boundary_noise, derive_seed(seed, 1 + i));
  }
  for (int i = 0; i < 3; ++i) {
    maps[4 + i] = component_noise(truth, spec.component[i], derive_seed(seed, 4 + i));
  }
  maps[7] = resolution_loss(truth, 4);
  maps[8] = resolution_loss(truth, 2);
  return PseudoLabelStack(std::move(maps), pl_provenance());
}

Sample generate_sample(const SceneSpec& spec, std::uint64_t index, const std::string& id) {
  const std::uint64_t base = derive_seed(spec.seed, index);
  Scene scene = gen_scene(spec, derive_seed(base, 0));
  LabelMap manual = simulate_manual(scene.truth, spec, derive_seed(base, 1));
  PseudoLabelStack pls = simulate_pls(scene.truth, manual, spec, derive_seed(base, 2));
  Sample s{id, std::move(scene.image), std::move(scene.truth), std::move(pls)};
  s.validate();
  return s;
}

}  // namespace soilref::synth
