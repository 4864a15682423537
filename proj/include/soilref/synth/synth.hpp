#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "soilref/core/types.hpp"

namespace soilref::synth {

/// One soiling blob. Its outline is r(t) = radius * (1 + a2 cos(2t + p2) + a3 cos(3t + p3));
/// zero amplitudes give a disc. Pixel (y, x) is inside when its center lies
/// within the outline.
struct BlobSpec {
  int cls = static_cast<int>(SoilingClass::kOpaque);
  double cy = 0.0;
  double cx = 0.0;
  double radius = 1.0;
  double amp2 = 0.0;
  double amp3 = 0.0;
  double phase2 = 0.0;
  double phase3 = 0.0;

  bool contains(double y, double x) const;
};

/// Morphological / boundary-noise perturbation. radius > 0 dilates soiled
/// regions into clean pixels, radius < 0 erodes them.
struct MorphNoise {
  int radius = 0;
  double boundary_noise = 0.0;
};

/// Per-component perturbation: class swaps to an adjacent severity and
/// dropped (missed) components, plus optional boundary noise.
struct ComponentNoise {
  double swap_rate = 0.0;
  double drop_rate = 0.0;
  double boundary_noise = 0.0;
};

struct CountRange {
  int min = 0;
  int max = 0;
};

struct SceneSpec {
  std::uint64_t seed = 1;
  int height = 64;
  int width = 64;
  /// Blob counts for transparent, semi-transparent and opaque soiling.
  std::array<CountRange, 3> blob_count{{{0, 2}, {0, 2}, {0, 2}}};
  double radius_min = 5.0;
  double radius_max = 14.0;
  double shape_wobble = 0.2;
  /// When non-empty these blobs replace the random ones (drawn in order).
  std::vector<BlobSpec> fixed_blobs;

  int polygon_vertices = 7;
  double vertex_jitter = 2.0;
  double p_conf = 0.35;

  std::array<MorphNoise, 3> morph{{{1, 0.10}, {-1, 0.10}, {0, 0.30}}};
  std::array<ComponentNoise, 3> component{{{0.10, 0.05, 0.05},
                                           {0.20, 0.10, 0.05},
                                           {0.35, 0.20, 0.05}}};

  /// Throws std::invalid_argument on out-of-range parameters.
  void validate() const;
};

struct Scene {
  Image image;
  Image background;  // the same scene without soiling
  LabelMap truth;
  std::vector<BlobSpec> blobs;
};

/// Provenance strings of the nine generated pseudo-labels, in stack order.
const PseudoLabelStack::Provenance& pl_provenance();

/// Textured background plus class-dependent soiling; deterministic in
/// (spec, seed). Later blobs overwrite earlier ones in the truth map.
Scene gen_scene(const SceneSpec& spec, std::uint64_t seed);

/// Coarse polygonal annotation: every soiled connected component becomes a
/// K-vertex polygon with jittered vertices, and transparent/semi-transparent
/// components are confused with probability p_conf.
LabelMap simulate_manual(const LabelMap& truth, const SceneSpec& spec, std::uint64_t seed);

/// The nine-map stack: manual, three morphological variants, three
/// component-noise variants, then 4x and 2x resolution-loss variants.
PseudoLabelStack simulate_pls(const LabelMap& truth, const LabelMap& manual,
                              const SceneSpec& spec, std::uint64_t seed);

/// Full sample with seeds derived from (spec.seed, index).
Sample generate_sample(const SceneSpec& spec, std::uint64_t index, const std::string& id);

// Building blocks, exposed for tests.

/// 4-connected components of equal non-clean class; labels are 1-based in
/// raster order of first pixel, 0 for clean.
struct Components {
  std::vector<int> labels;
  std::vector<int> cls;    // per component (index = label - 1)
  std::vector<int> area;
  int count() const { return static_cast<int>(cls.size()); }
};
Components soiled_components(const LabelMap& map);

LabelMap morph(const LabelMap& map, int radius);
LabelMap boundary_noise(const LabelMap& map, double rate, std::uint64_t seed);
LabelMap component_noise(const LabelMap& map, const ComponentNoise& noise, std::uint64_t seed);
/// Block mode (ties to the lowest code) at `factor`, then nearest upsampling.
LabelMap resolution_loss(const LabelMap& map, int factor);

/// Even-odd fill of pixel centers inside the polygon (vertices as (y, x)).
std::vector<std::pair<int, int>> rasterize_polygon(const std::vector<std::array<double, 2>>& poly,
                                                   int height, int width);

}  // namespace soilref::synth
