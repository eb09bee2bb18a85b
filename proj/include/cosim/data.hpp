#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cosim/image.hpp"
#include "cosim/metric.hpp"
#include "cosim/rng.hpp"
#include "cosim/tensor.hpp"

// Synthetic scene pairs with controlled semantic vs noisy changes, viewpoint
// warps, and loading/splitting of on-disk pair datasets. Semantic edits
// (shapes added, removed, moved) define the ground-truth mask; photometric
// perturbations and viewpoint warps never do.

namespace cosim {

struct ImagePair {
  Tensor t0;  // [3 x H x W], values in [0, 1]
  Tensor t1;
  std::string identifier;
};

// Record of what the generator did to one item.
struct Provenance {
  bool semantic_change = false;
  std::string edit;  // "add", "remove", "move" or empty
  double brightness_delta = 0.0;
  double noise_sigma = 0.0;
  double shadow_opacity = 0.0;
  double rotation_deg = 0.0;
  double zoom = 1.0;
  double translation_x = 0.0;
  double translation_y = 0.0;
};

struct ScenePair {
  ImagePair pair;
  ChangeMask mask;  // 1 = changed, in the (possibly warped) t1 frame
  Provenance provenance;
};

struct SynthConfig {
  int height = 64;
  int width = 64;
  int count = 64;
  int min_objects = 2;
  int max_objects = 5;
  double p_change = 0.5;
  double brightness = 0.1;      // |delta| bound, at most 0.3
  double noise_sigma = 0.02;    // sigma bound, at most 0.05
  double shadow_opacity = 0.3;  // opacity bound, at most 0.5
  double rotation_deg = 0.0;    // |degrees| bound, at most 10
  double zoom_min = 1.0;        // zoom drawn from [zoom_min, zoom_max] within [1, 1.3]
  double zoom_max = 1.0;
  double translation_px = 0.0;  // |pixels| bound per axis, at most 8
  std::uint64_t seed = 0;

  void validate() const {
    COSIM_CHECK_ARG(height % 8 == 0 && width % 8 == 0, "synth config: canvas ", height, "x",
                    width, " must be a multiple of 8");
    COSIM_CHECK_ARG(count > 0, "synth config: count must be positive");
    COSIM_CHECK_ARG(min_objects >= 0 && max_objects >= min_objects,
                    "synth config: bad object count range");
    COSIM_CHECK_ARG(p_change >= 0.0 && p_change <= 1.0, "synth config: p_change must be in [0,1]");
    COSIM_CHECK_ARG(brightness >= 0.0 && brightness <= 0.3,
                    "synth config: brightness bound must be in [0, 0.3]");
    COSIM_CHECK_ARG(noise_sigma >= 0.0 && noise_sigma <= 0.05,
                    "synth config: noise sigma bound must be in [0, 0.05]");
    COSIM_CHECK_ARG(shadow_opacity >= 0.0 && shadow_opacity <= 0.5,
                    "synth config: shadow opacity bound must be in [0, 0.5]");
    COSIM_CHECK_ARG(std::abs(rotation_deg) <= 10.0,
                    "synth config: rotation bound must be within 10 degrees");
    COSIM_CHECK_ARG(zoom_min >= 1.0 && zoom_max >= zoom_min && zoom_max <= 1.3,
                    "synth config: zoom range must sit inside [1, 1.3]");
    COSIM_CHECK_ARG(translation_px >= 0.0 && translation_px <= 8.0,
                    "synth config: translation bound must be in [0, 8] px");
  }
};

struct Dataset {
  std::vector<ScenePair> items;
  std::vector<int> train_indices;
  std::vector<int> test_indices;
};

// ----- scene model ---------------------------------------------------------

namespace scene {

struct Shape {
  enum class Kind { rectangle, circle } kind = Kind::rectangle;
  double cx = 0.0, cy = 0.0;
  double rx = 0.0, ry = 0.0;  // half extents; circles use rx as radius
  std::array<double, 3> color = {0.0, 0.0, 0.0};

  bool covers(int x, int y) const {
    if (kind == Kind::rectangle)
      return std::abs(x - cx) <= rx && std::abs(y - cy) <= ry;
    const double dx = x - cx, dy = y - cy;
    return dx * dx + dy * dy <= rx * rx;
  }
};

struct Scene {
  std::array<double, 3> bg_top = {0.5, 0.5, 0.5};
  std::array<double, 3> bg_bottom = {0.5, 0.5, 0.5};
  std::vector<Shape> shapes;
};

// Hard-edged rasterization, topmost shape wins. No anti-aliasing: two
// renders of scenes that agree at a pixel agree bit-exactly there, which is
// what makes render-difference ground truth exact.
inline Tensor render(const Scene& sc, int h, int w) {
  Tensor img = Tensor::zeros({3, h, w});
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  for (int y = 0; y < h; ++y) {
    const double fy = h > 1 ? static_cast<double>(y) / (h - 1) : 0.0;
    for (int x = 0; x < w; ++x) {
      std::array<double, 3> px;
      for (int c = 0; c < 3; ++c)
        px[static_cast<std::size_t>(c)] =
            sc.bg_top[static_cast<std::size_t>(c)] +
            (sc.bg_bottom[static_cast<std::size_t>(c)] - sc.bg_top[static_cast<std::size_t>(c)]) *
                fy;
      for (const Shape& s : sc.shapes)
        if (s.covers(x, y)) px = s.color;
      const std::size_t j = static_cast<std::size_t>(y) * w + x;
      for (int c = 0; c < 3; ++c) img.data()[static_cast<std::size_t>(c) * hw + j] = px[static_cast<std::size_t>(c)];
    }
  }
  return img;
}

// Visible surface at a pixel: the color of the topmost covering shape, or
// the background. Comparing these tokens instead of rendered floats keeps
// the ground truth exact by construction.
inline const Shape* topmost_shape(const Scene& sc, int x, int y) {
  const Shape* top = nullptr;
  for (const Shape& s : sc.shapes)
    if (s.covers(x, y)) top = &s;
  return top;
}

// Pixels whose visible semantic content differs between the two scenes.
// Assumes both scenes share the same background parameters.
inline ChangeMask semantic_mask(const Scene& a, const Scene& b, int h, int w) {
  ChangeMask mask(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const Shape* ta = topmost_shape(a, x, y);
      const Shape* tb = topmost_shape(b, x, y);
      bool same;
      if (!ta && !tb)
        same = true;  // background in both frames
      else if (!ta || !tb)
        same = false;
      else
        same = ta->color == tb->color;
      mask.at(y, x) = same ? 0 : 1;
    }
  return mask;
}

}  // namespace scene

// ----- viewpoint warp ------------------------------------------------------

namespace detail {

inline double sample_plane_bilinear(const double* plane, int h, int w, double sy, double sx) {
  sy = std::clamp(sy, 0.0, static_cast<double>(h - 1));
  sx = std::clamp(sx, 0.0, static_cast<double>(w - 1));
  int y0 = static_cast<int>(std::floor(sy));
  int x0 = static_cast<int>(std::floor(sx));
  if (y0 >= h - 1) y0 = h - 1;
  if (x0 >= w - 1) x0 = w - 1;
  const int y1 = std::min(y0 + 1, h - 1);
  const int x1 = std::min(x0 + 1, w - 1);
  const double fy = sy - y0, fx = sx - x0;
  const double v00 = plane[static_cast<std::size_t>(y0) * w + x0];
  const double v01 = plane[static_cast<std::size_t>(y0) * w + x1];
  const double v10 = plane[static_cast<std::size_t>(y1) * w + x0];
  const double v11 = plane[static_cast<std::size_t>(y1) * w + x1];
  const double top = v00 + fx * (v01 - v00);
  const double bot = v10 + fx * (v11 - v10);
  return top + fy * (bot - top);
}

}  // namespace detail

// Similarity transform about the image center: the output frame shows the
// input rotated by `rotation_deg`, magnified by `zoom` >= 1, and shifted by
// (dx, dy) pixels. The image is sampled bilinearly, the mask by nearest
// neighbor; samples falling outside the frame take the border value.
inline std::pair<Tensor, ChangeMask> warp_viewpoint(const Tensor& image, const ChangeMask& mask,
                                                    double rotation_deg, double zoom, double dx,
                                                    double dy) {
  COSIM_CHECK_ARG(image.ndim() == 3, "warp_viewpoint: image must be CxHxW");
  COSIM_CHECK_ARG(zoom >= 1.0, "warp_viewpoint: zoom must be >= 1, got ", zoom);
  const int c = image.dim(0), h = image.dim(1), w = image.dim(2);
  COSIM_CHECK_ARG(mask.height == h && mask.width == w,
                  "warp_viewpoint: mask resolution does not match image");

  const double theta = rotation_deg * 3.14159265358979323846 / 180.0;
  const double ct = std::cos(theta), st = std::sin(theta);
  const double cx = (w - 1) / 2.0, cy = (h - 1) / 2.0;

  Tensor out = Tensor::zeros({c, h, w});
  ChangeMask out_mask(h, w);
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      // Inverse map: undo translation, then scale, then rotation.
      const double ux = (x - cx - dx) / zoom;
      const double uy = (y - cy - dy) / zoom;
      const double sx = ct * ux + st * uy + cx;
      const double sy = -st * ux + ct * uy + cy;
      for (int ci = 0; ci < c; ++ci)
        out.data()[static_cast<std::size_t>(ci) * hw + static_cast<std::size_t>(y) * w + x] =
            detail::sample_plane_bilinear(image.data() + static_cast<std::size_t>(ci) * hw, h, w,
                                          sy, sx);
      const int ny = std::clamp(static_cast<int>(std::lround(sy)), 0, h - 1);
      const int nx = std::clamp(static_cast<int>(std::lround(sx)), 0, w - 1);
      out_mask.at(y, x) = mask.at(ny, nx);
    }
  return {out, out_mask};
}

// ----- synthetic generation ------------------------------------------------

namespace detail {

inline scene::Shape random_shape(Rng& rng, int h, int w) {
  scene::Shape s;
  s.kind = rng.uniform() < 0.5 ? scene::Shape::Kind::rectangle : scene::Shape::Kind::circle;
  s.cx = rng.uniform(0.1, 0.9) * (w - 1);
  s.cy = rng.uniform(0.1, 0.9) * (h - 1);
  const double base = std::min(h, w);
  s.rx = std::max(2.0, rng.uniform(0.04, 0.16) * base);
  s.ry = s.kind == scene::Shape::Kind::circle ? s.rx : std::max(2.0, rng.uniform(0.04, 0.16) * base);
  // Shape colors live in the outer bands so they always contrast with the
  // mid-range background gradient.
  for (auto& ch : s.color)
    ch = rng.uniform() < 0.5 ? rng.uniform(0.0, 0.25) : rng.uniform(0.75, 1.0);
  return s;
}

inline void apply_shadow(Tensor& img, Rng& rng, double opacity) {
  // Random triangle darkens everything it covers.
  const int h = img.dim(1), w = img.dim(2);
  double vx[3], vy[3];
  for (int i = 0; i < 3; ++i) {
    vx[i] = rng.uniform(-0.2, 1.2) * (w - 1);
    vy[i] = rng.uniform(-0.2, 1.2) * (h - 1);
  }
  auto edge = [](double ax, double ay, double bx, double by, double px, double py) {
    return (bx - ax) * (py - ay) - (by - ay) * (px - ax);
  };
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  const double scale = 1.0 - opacity;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double e0 = edge(vx[0], vy[0], vx[1], vy[1], x, y);
      const double e1 = edge(vx[1], vy[1], vx[2], vy[2], x, y);
      const double e2 = edge(vx[2], vy[2], vx[0], vy[0], x, y);
      const bool inside = (e0 >= 0 && e1 >= 0 && e2 >= 0) || (e0 <= 0 && e1 <= 0 && e2 <= 0);
      if (!inside) continue;
      const std::size_t j = static_cast<std::size_t>(y) * w + x;
      for (int c = 0; c < 3; ++c) img.data()[static_cast<std::size_t>(c) * hw + j] *= scale;
    }
}

inline void clamp01(Tensor& img) {
  for (auto& v : img.values()) v = std::clamp(v, 0.0, 1.0);
}

}  // namespace detail

inline ScenePair generate_scene_pair(const SynthConfig& cfg, std::uint64_t item_seed,
                                     const std::string& identifier) {
  Rng rng(item_seed);
  const int h = cfg.height, w = cfg.width;

  scene::Scene s0;
  for (auto& ch : s0.bg_top) ch = rng.uniform(0.35, 0.65);
  for (auto& ch : s0.bg_bottom) ch = rng.uniform(0.35, 0.65);
  const int n_obj = rng.uniform_int(cfg.min_objects, cfg.max_objects);
  for (int i = 0; i < n_obj; ++i) s0.shapes.push_back(detail::random_shape(rng, h, w));

  Provenance prov;
  scene::Scene s1 = s0;
  prov.semantic_change = rng.uniform() < cfg.p_change;
  if (prov.semantic_change) {
    int kind = rng.uniform_int(0, 2);
    if (s1.shapes.empty()) kind = 0;
    if (kind == 0) {
      s1.shapes.push_back(detail::random_shape(rng, h, w));
      prov.edit = "add";
    } else if (kind == 1) {
      const int idx = rng.uniform_int(0, static_cast<int>(s1.shapes.size()) - 1);
      s1.shapes.erase(s1.shapes.begin() + idx);
      prov.edit = "remove";
    } else {
      const int idx = rng.uniform_int(0, static_cast<int>(s1.shapes.size()) - 1);
      s1.shapes[static_cast<std::size_t>(idx)].cx += rng.uniform(0.08, 0.2) * w *
                                                     (rng.uniform() < 0.5 ? -1.0 : 1.0);
      s1.shapes[static_cast<std::size_t>(idx)].cy += rng.uniform(0.08, 0.2) * h *
                                                     (rng.uniform() < 0.5 ? -1.0 : 1.0);
      prov.edit = "move";
    }
  }

  Tensor t0 = scene::render(s0, h, w);
  Tensor t1 = scene::render(s1, h, w);
  ChangeMask mask = scene::semantic_mask(s0, s1, h, w);

  const bool warp_active =
      cfg.rotation_deg != 0.0 || cfg.zoom_min > 1.0 || cfg.zoom_max > 1.0 ||
      cfg.translation_px != 0.0;
  if (warp_active) {
    prov.rotation_deg = rng.uniform(-cfg.rotation_deg, cfg.rotation_deg);
    prov.zoom = rng.uniform(cfg.zoom_min, cfg.zoom_max);
    prov.translation_x = rng.uniform(-cfg.translation_px, cfg.translation_px);
    prov.translation_y = rng.uniform(-cfg.translation_px, cfg.translation_px);
    auto warped = warp_viewpoint(t1, mask, prov.rotation_deg, prov.zoom, prov.translation_x,
                                 prov.translation_y);
    t1 = std::move(warped.first);
    mask = std::move(warped.second);
  }

  if (cfg.shadow_opacity > 0.0) {
    prov.shadow_opacity = rng.uniform(0.0, cfg.shadow_opacity);
    detail::apply_shadow(t1, rng, prov.shadow_opacity);
  }
  if (cfg.brightness > 0.0) {
    prov.brightness_delta = rng.uniform(-cfg.brightness, cfg.brightness);
    for (auto& v : t1.values()) v += prov.brightness_delta;
  }
  if (cfg.noise_sigma > 0.0) {
    prov.noise_sigma = rng.uniform(0.0, cfg.noise_sigma);
    for (auto& v : t1.values()) v += prov.noise_sigma * rng.normal();
  }
  detail::clamp01(t1);

  ScenePair item;
  item.pair = ImagePair{t0, t1, identifier};
  item.mask = std::move(mask);
  item.provenance = prov;
  return item;
}

// Deterministic from the master seed; items use independently derived
// per-item seeds, so any subset can be regenerated in any order.
inline Dataset generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  Dataset ds;
  ds.items.reserve(static_cast<std::size_t>(cfg.count));
  for (int i = 0; i < cfg.count; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "pair_%06d", i);
    ds.items.push_back(
        generate_scene_pair(cfg, derive_seed(cfg.seed, static_cast<std::uint64_t>(i)), name));
  }
  ds.train_indices.resize(ds.items.size());
  for (std::size_t i = 0; i < ds.items.size(); ++i) ds.train_indices[i] = static_cast<int>(i);
  return ds;
}

// Seeded shuffle, then split with floor rounding for the training share.
inline Dataset split_dataset(Dataset ds, double train_fraction, std::uint64_t seed) {
  COSIM_CHECK_ARG(train_fraction > 0.0 && train_fraction < 1.0,
                  "split_dataset: train fraction must lie in (0, 1), got ", train_fraction);
  std::vector<int> idx(ds.items.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
  Rng rng(derive_seed(seed, 0x5b117ULL));
  rng.shuffle(idx);
  const auto n_train = static_cast<std::size_t>(
      std::floor(train_fraction * static_cast<double>(idx.size())));
  ds.train_indices.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
  ds.test_indices.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
  return ds;
}

// ----- resizing / preprocessing -------------------------------------------

// Align-corners bilinear resampling; unlike the differentiable upsample op
// this plain helper may also shrink.
inline Tensor resize_bilinear(const Tensor& img, int h_out, int w_out) {
  COSIM_CHECK_ARG(img.ndim() == 3, "resize_bilinear: image must be CxHxW");
  const int c = img.dim(0), h = img.dim(1), w = img.dim(2);
  if (h_out == h && w_out == w) return img.clone_detached();
  Tensor out = Tensor::zeros({c, h_out, w_out});
  const std::size_t hw_in = static_cast<std::size_t>(h) * w;
  const std::size_t hw_out = static_cast<std::size_t>(h_out) * w_out;
  for (int y = 0; y < h_out; ++y) {
    const double sy =
        (h_out == 1 || h == 1) ? 0.0 : static_cast<double>(y) * (h - 1) / (h_out - 1);
    for (int x = 0; x < w_out; ++x) {
      const double sx =
          (w_out == 1 || w == 1) ? 0.0 : static_cast<double>(x) * (w - 1) / (w_out - 1);
      for (int ci = 0; ci < c; ++ci)
        out.data()[static_cast<std::size_t>(ci) * hw_out + static_cast<std::size_t>(y) * w_out +
                   x] =
            detail::sample_plane_bilinear(img.data() + static_cast<std::size_t>(ci) * hw_in, h, w,
                                          sy, sx);
    }
  }
  return out;
}

inline std::pair<ImagePair, ChangeMask> preprocess(const ImagePair& pair, const ChangeMask& mask,
                                                   int h_out, int w_out) {
  COSIM_CHECK_ARG(h_out > 0 && w_out > 0 && h_out % 8 == 0 && w_out % 8 == 0,
                  "preprocess: target ", h_out, "x", w_out, " must be a positive multiple of 8");
  ImagePair out;
  out.identifier = pair.identifier;
  out.t0 = resize_bilinear(pair.t0, h_out, w_out);
  out.t1 = resize_bilinear(pair.t1, h_out, w_out);
  return {out, resize_mask_nearest(mask, h_out, w_out)};
}

// ----- on-disk datasets ----------------------------------------------------

namespace detail {

inline Tensor to_rgb_tensor(const ImageU8& img) {
  Tensor t = image_to_tensor(img);
  if (t.dim(0) == 3) return t;
  // replicate gray to 3 channels
  Tensor rgb = Tensor::zeros({3, t.dim(1), t.dim(2)});
  const std::size_t hw = static_cast<std::size_t>(t.dim(1)) * t.dim(2);
  for (int c = 0; c < 3; ++c)
    std::copy(t.data(), t.data() + hw, rgb.data() + static_cast<std::size_t>(c) * hw);
  return rgb;
}

inline std::optional<std::filesystem::path> find_with_extension(
    const std::filesystem::path& dir, const std::string& stem) {
  for (const char* ext : {".png", ".ppm", ".pgm"}) {
    std::filesystem::path p = dir / (stem + ext);
    if (std::filesystem::exists(p)) return p;
  }
  return std::nullopt;
}

}  // namespace detail

// Masks stored as 8-bit images are binarized at 128: pixel >= 128 marks a
// changed pixel.
inline ChangeMask image_to_mask(const ImageU8& img) {
  ChangeMask mask(img.height, img.width);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      mask.at(y, x) = img.at(y, x, 0) >= 128 ? 1 : 0;
  return mask;
}

inline ImageU8 mask_to_image(const ChangeMask& mask) {
  ImageU8 img;
  img.height = mask.height;
  img.width = mask.width;
  img.channels = 1;
  img.pixels.resize(mask.size());
  for (std::size_t j = 0; j < mask.size(); ++j) img.pixels[j] = mask.values[j] ? 255 : 0;
  return img;
}

// Loads a t0/ + t1/ + mask/ directory layout. Identifiers come from the
// optional manifest file when present, otherwise from the t0 listing; items
// are sorted by identifier either way.
inline Dataset load_dataset(const std::string& root) {
  namespace fs = std::filesystem;
  const fs::path base(root);
  COSIM_CHECK_DATA(fs::exists(base), "load_dataset: directory '", root, "' does not exist");
  const fs::path t0_dir = base / "t0", t1_dir = base / "t1", mask_dir = base / "mask";

  std::vector<std::string> ids;
  const fs::path manifest = base / "manifest.txt";
  if (fs::exists(manifest)) {
    std::ifstream in(manifest);
    std::string line;
    while (std::getline(in, line)) {
      while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
      if (!line.empty()) ids.push_back(line);
    }
  } else if (fs::exists(t0_dir)) {
    for (const auto& entry : fs::directory_iterator(t0_dir)) {
      if (!entry.is_regular_file()) continue;
      const std::string ext = entry.path().extension().string();
      if (ext == ".png" || ext == ".ppm" || ext == ".pgm")
        ids.push_back(entry.path().stem().string());
    }
  }
  std::sort(ids.begin(), ids.end());

  Dataset ds;
  for (const std::string& id : ids) {
    auto p0 = detail::find_with_extension(t0_dir, id);
    auto p1 = detail::find_with_extension(t1_dir, id);
    auto pm = detail::find_with_extension(mask_dir, id);
    COSIM_CHECK_DATA(p0.has_value(), "load_dataset: missing t0 image for '", id, "' (expected ",
                     (t0_dir / (id + ".png")).string(), ")");
    COSIM_CHECK_DATA(p1.has_value(), "load_dataset: missing t1 counterpart for '", id,
                     "' (expected ", (t1_dir / (id + ".png")).string(), ")");
    COSIM_CHECK_DATA(pm.has_value(), "load_dataset: missing mask counterpart for '", id,
                     "' (expected ", (mask_dir / (id + ".png")).string(), ")");
    ScenePair item;
    item.pair.identifier = id;
    item.pair.t0 = detail::to_rgb_tensor(load_image(p0->string()));
    item.pair.t1 = detail::to_rgb_tensor(load_image(p1->string()));
    item.mask = image_to_mask(load_image(pm->string()));
    COSIM_CHECK_DATA(item.pair.t0.shape() == item.pair.t1.shape(),
                     "load_dataset: '", id, "' t0/t1 sizes differ");
    COSIM_CHECK_DATA(item.mask.height == item.pair.t0.dim(1) &&
                         item.mask.width == item.pair.t0.dim(2),
                     "load_dataset: '", id, "' mask size differs from images");
    ds.items.push_back(std::move(item));
  }
  ds.train_indices.resize(ds.items.size());
  for (std::size_t i = 0; i < ds.items.size(); ++i) ds.train_indices[i] = static_cast<int>(i);
  return ds;
}

inline void save_dataset(const std::string& root, const Dataset& ds) {
  namespace fs = std::filesystem;
  const fs::path base(root);
  fs::create_directories(base / "t0");
  fs::create_directories(base / "t1");
  fs::create_directories(base / "mask");
  std::ofstream manifest(base / "manifest.txt");
  COSIM_CHECK_DATA(manifest.good(), "save_dataset: cannot write manifest under '", root, "'");
  for (const ScenePair& item : ds.items) {
    const std::string& id = item.pair.identifier;
    save_image((base / "t0" / (id + ".png")).string(), tensor_to_image(item.pair.t0));
    save_image((base / "t1" / (id + ".png")).string(), tensor_to_image(item.pair.t1));
    save_image((base / "mask" / (id + ".png")).string(), mask_to_image(item.mask));
    manifest << id << "\n";
  }
}

}  // namespace cosim
