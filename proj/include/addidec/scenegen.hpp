#pragma once

#include <zlib.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "addidec/binio.hpp"
#include "addidec/errors.hpp"
#include "addidec/rng.hpp"

namespace addidec {

enum class SupportKind : std::uint8_t {
  ScalarL = 0,
  BlockIndependent = 1,
  BlockDependent = 2,
  Disconnected = 3,
  Cpe = 4,  // decoder-output grids exported in the dataset container
};

inline int dz_of(SupportKind k) {
  switch (k) {
    case SupportKind::ScalarL:
    case SupportKind::Disconnected:
      return 2;
    case SupportKind::BlockIndependent:
    case SupportKind::BlockDependent:
      return 4;
    case SupportKind::Cpe:
      return 0;  // carried by the file, not the kind
  }
  throw PreconditionError("unknown support kind");
}

inline std::string kind_name(SupportKind k) {
  switch (k) {
    case SupportKind::ScalarL: return "scalarl";
    case SupportKind::BlockIndependent: return "block_independent";
    case SupportKind::BlockDependent: return "block_dependent";
    case SupportKind::Disconnected: return "disconnected";
    case SupportKind::Cpe: return "cpe";
  }
  throw PreconditionError("unknown support kind");
}

inline SupportKind kind_from_name(const std::string& s) {
  if (s == "scalarl") return SupportKind::ScalarL;
  if (s == "block_independent") return SupportKind::BlockIndependent;
  if (s == "block_dependent") return SupportKind::BlockDependent;
  if (s == "disconnected") return SupportKind::Disconnected;
  if (s == "cpe") return SupportKind::Cpe;
  throw ConfigError("unknown dataset kind: \"" + s + "\"");
}

struct SupportSpec {
  SupportKind kind = SupportKind::ScalarL;
  double ball_radius = 0.08;
  int channels = 3, height = 32, width = 32;

  int d_z() const { return dz_of(kind); }
  int pixels() const { return channels * height * width; }
  void validate() const {
    if (channels != 3) throw ConfigError("renderer needs 3 channels");
    if (height < 4 || width < 4) throw ConfigError("resolution too small");
    if (!(ball_radius > 0) || !(2 * ball_radius < 1))
      throw ConfigError("ball_radius must satisfy 0 < 2*radius < 1");
  }
};

// ImageNet channel statistics; stored verbatim in dataset metadata
struct NormStats {
  std::array<double, 3> mu{0.485, 0.456, 0.406};
  std::array<double, 3> sigma{0.229, 0.224, 0.225};
};

// ---------------------------------------------------------------- samplers

// ScalarLatents: two y-coordinates with the upper-right quadrant excluded,
// giving the L-shaped support. Columns ordered (z2, z4) = (ball-1 y, ball-2 y).
inline std::vector<double> sample_scalar_latents(std::size_t n, std::uint64_t seed) {
  if (n < 1) throw PreconditionError("sample_scalar_latents: n must be >= 1");
  std::vector<double> out(n * 2);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(mix_seed(seed, i));
    double z2 = rng.uniform();
    double z4 = z2 <= 0.5 ? rng.uniform() : rng.uniform(0.0, 0.5);
    out[2 * i] = z2;
    out[2 * i + 1] = z4;
  }
  return out;
}

// Disconnected support: ball-2 y avoids the central band
inline std::vector<double> sample_disconnected_latents(std::size_t n, std::uint64_t seed) {
  if (n < 1) throw PreconditionError("sample_disconnected_latents: n must be >= 1");
  std::vector<double> out(n * 2);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(mix_seed(seed, i));
    out[2 * i] = rng.uniform();
    bool low = rng.uniform() < 0.5;
    out[2 * i + 1] = low ? rng.uniform(0.0, 0.25) : rng.uniform(0.75, 1.0);
  }
  return out;
}

inline bool balls_clear(const double* z, double radius) {
  double dx = z[0] - z[2], dy = z[1] - z[3];
  return std::sqrt(dx * dx + dy * dy) >= 2 * radius;
}

// Non-termination guard for rejection sampling: aborts when the acceptance
// rate over a window of recent attempts drops below 1%. (With the 2r < 1
// precondition the two-ball acceptance rate stays above ~2.5%, so this is a
// defensive backstop rather than a reachable path.)
struct AcceptanceGuard {
  std::size_t window = 4096;
  std::size_t attempts = 0, accepts = 0;
  void record(bool accepted) {
    ++attempts;
    if (accepted) ++accepts;
    if (attempts >= window) {
      if (accepts * 100 < attempts)
        throw DataError("rejection sampling acceptance rate below 1% — ball_radius too large");
      attempts = 0;
      accepts = 0;
    }
  }
};

// BlockLatents: (x1,y1,x2,y2); rejection keeps ball centers at least a
// diameter apart. Guard: a sliding window of recent attempts aborts generation
// when acceptance drops below 1% (radius too large to ever finish).
inline std::vector<double> sample_block_latents(std::size_t n, bool dependent,
                                                double ball_radius, std::uint64_t seed) {
  if (n < 1) throw PreconditionError("sample_block_latents: n must be >= 1");
  if (!(2 * ball_radius < 1)) throw PreconditionError("2*ball_radius must be < 1");
  std::vector<double> out(n * 4);
  // coordinates are rounded through f32 (the dataset storage type) before the
  // acceptance test, so stored rows satisfy the occlusion predicate exactly
  auto f32r = [](double v) { return static_cast<double>(static_cast<float>(v)); };
  AcceptanceGuard guard;
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(mix_seed(seed, i));
    for (;;) {
      double z[4];
      z[0] = f32r(rng.uniform());
      z[1] = f32r(rng.uniform());
      if (dependent) {
        bool outer = 1.25 * (z[0] * z[0] + z[1] * z[1]) >= 1.0;
        z[2] = f32r(outer ? rng.uniform(0.0, 0.5) : rng.uniform(0.5, 1.0));
        z[3] = f32r(outer ? rng.uniform(0.5, 1.0) : rng.uniform(0.0, 0.5));
      } else {
        z[2] = f32r(rng.uniform());
        z[3] = f32r(rng.uniform());
      }
      bool ok = balls_clear(z, ball_radius);
      guard.record(ok);
      if (ok) {
        std::copy(z, z + 4, &out[4 * i]);
        break;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------- rendering

namespace detail {
// Disk centers are inset by (radius_px + 1) from the frame so anti-aliased
// disks never clip; centroid inversion then round-trips everywhere in [0,1].
struct Frame {
  double r_px, margin;
  int h, w;
  explicit Frame(const SupportSpec& s)
      : r_px(s.ball_radius * std::min(s.height, s.width)),
        margin(s.ball_radius * std::min(s.height, s.width) + 1.0),
        h(s.height),
        w(s.width) {}
  double cx(double x) const { return margin + x * (w - 2 * margin); }
  double cy(double y) const { return margin + y * (h - 2 * margin); }
  double inv_x(double cx_) const { return (cx_ - margin) / (w - 2 * margin); }
  double inv_y(double cy_) const { return (cy_ - margin) / (h - 2 * margin); }
};

inline void ball_centers(const double* z, SupportKind kind, double* b1, double* b2) {
  if (kind == SupportKind::BlockIndependent || kind == SupportKind::BlockDependent) {
    b1[0] = z[0]; b1[1] = z[1];
    b2[0] = z[2]; b2[1] = z[3];
  } else {
    // scalar supports: x fixed, latents are the two y's
    b1[0] = 0.25; b1[1] = z[0];
    b2[0] = 0.75; b2[1] = z[1];
  }
}
}  // namespace detail

// Raw [0,1] image, C*H*W, row 0 at the bottom (origin bottom-left). Ball 1 is
// a pure blue anti-aliased disk (channel 2), ball 2 pure red (channel 0);
// coverage has a one-pixel linear falloff in the disk's signed distance.
inline std::vector<double> render(const double* z, const SupportSpec& spec) {
  spec.validate();
  detail::Frame fr(spec);
  std::vector<double> img(static_cast<std::size_t>(spec.pixels()), 0.0);
  double b1[2], b2[2];
  detail::ball_centers(z, spec.kind, b1, b2);
  const double* centers[2] = {b1, b2};
  const int chans[2] = {2, 0};
  const std::size_t plane = static_cast<std::size_t>(spec.height) * spec.width;
  for (int ball = 0; ball < 2; ++ball) {
    double cx = fr.cx(centers[ball][0]);
    double cy = fr.cy(centers[ball][1]);
    // only touch pixels inside the disk footprint
    int x0 = std::max(0, static_cast<int>(std::floor(cx - fr.r_px - 1)));
    int x1 = std::min(spec.width - 1, static_cast<int>(std::ceil(cx + fr.r_px + 1)));
    int y0 = std::max(0, static_cast<int>(std::floor(cy - fr.r_px - 1)));
    int y1 = std::min(spec.height - 1, static_cast<int>(std::ceil(cy + fr.r_px + 1)));
    double* chan = &img[static_cast<std::size_t>(chans[ball]) * plane];
    for (int iy = y0; iy <= y1; ++iy)
      for (int ix = x0; ix <= x1; ++ix) {
        double dx = ix + 0.5 - cx, dy = iy + 0.5 - cy;
        double dist = std::sqrt(dx * dx + dy * dy);
        double cov = std::clamp(fr.r_px - dist + 0.5, 0.0, 1.0);
        if (cov > 0) chan[static_cast<std::size_t>(iy) * spec.width + ix] = cov;
      }
  }
  return img;
}

inline std::vector<double> render(const std::vector<double>& z, const SupportSpec& spec) {
  return render(z.data(), spec);
}

// --------------------------------------------------------------- membership

inline bool in_support(const double* z, const SupportSpec& spec) {
  auto in01 = [](double v) { return v >= 0.0 && v <= 1.0; };
  switch (spec.kind) {
    case SupportKind::ScalarL:
      return in01(z[0]) && in01(z[1]) && !(z[0] > 0.5 && z[1] > 0.5);
    case SupportKind::Disconnected:
      return in01(z[0]) && in01(z[1]) && !(z[1] > 0.25 && z[1] < 0.75);
    case SupportKind::BlockIndependent:
    case SupportKind::BlockDependent:
      return in01(z[0]) && in01(z[1]) && in01(z[2]) && in01(z[3]) &&
             balls_clear(z, spec.ball_radius);
    case SupportKind::Cpe:
      return true;  // learned-latent grids carry no membership predicate
  }
  throw PreconditionError("unknown support kind");
}

inline bool in_support(const std::vector<double>& z, const SupportSpec& spec) {
  return in_support(z.data(), spec);
}

// Distance from an in-support point to the support boundary (negative when
// outside); used to enforce interior preconditions of Jacobian probes.
inline double support_boundary_distance(const double* z, const SupportSpec& spec) {
  if (!in_support(z, spec)) return -1.0;
  auto edge = [](double v) { return std::min(v, 1.0 - v); };
  switch (spec.kind) {
    case SupportKind::ScalarL: {
      double d = std::min(edge(z[0]), edge(z[1]));
      if (z[0] <= 0.5 && z[1] <= 0.5)
        d = std::min(d, std::hypot(0.5 - z[0], 0.5 - z[1]));
      else if (z[0] > 0.5)
        d = std::min(d, 0.5 - z[1]);
      else
        d = std::min(d, 0.5 - z[0]);
      return d;
    }
    case SupportKind::Disconnected: {
      double d = edge(z[0]);
      if (z[1] <= 0.25)
        d = std::min({d, z[1], 0.25 - z[1]});
      else
        d = std::min({d, z[1] - 0.75, 1.0 - z[1]});
      return d;
    }
    case SupportKind::BlockIndependent:
    case SupportKind::BlockDependent: {
      double d = std::min({edge(z[0]), edge(z[1]), edge(z[2]), edge(z[3])});
      double dx = z[0] - z[2], dy = z[1] - z[3];
      d = std::min(d, std::sqrt(dx * dx + dy * dy) - 2 * spec.ball_radius);
      return d;
    }
    case SupportKind::Cpe:
      return 0.0;
  }
  throw PreconditionError("unknown support kind");
}

// ------------------------------------------------------------ normalization

inline void normalize(std::vector<double>& img, const SupportSpec& spec, const NormStats& ns) {
  const std::size_t plane = static_cast<std::size_t>(spec.height) * spec.width;
  for (int c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < plane; ++i) {
      double& v = img[static_cast<std::size_t>(c) * plane + i];
      v = (v - ns.mu[static_cast<std::size_t>(c)]) / ns.sigma[static_cast<std::size_t>(c)];
    }
}

inline void denormalize(std::vector<double>& img, const SupportSpec& spec, const NormStats& ns) {
  const std::size_t plane = static_cast<std::size_t>(spec.height) * spec.width;
  for (int c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < plane; ++i) {
      double& v = img[static_cast<std::size_t>(c) * plane + i];
      v = v * ns.sigma[static_cast<std::size_t>(c)] + ns.mu[static_cast<std::size_t>(c)];
    }
}

// ------------------------------------------------------------------ dataset

enum class Split : std::uint8_t { train = 0, val = 1, test = 2, unspecified = 3 };

inline std::string split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
    default: return "unspecified";
  }
}

inline Split split_from_name(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  return Split::unspecified;
}

struct Dataset {
  SupportSpec support;
  NormStats norm;
  int d_z = 0;
  std::uint64_t n = 0;
  std::uint64_t seed = 0;
  Split split = Split::unspecified;
  std::vector<float> latents;  // n x d_z, ground-truth scene coordinates
  std::vector<float> images;   // n x C x H x W, normalized pixel space

  const float* latent_row(std::size_t i) const { return &latents[i * static_cast<std::size_t>(d_z)]; }
  const float* image_row(std::size_t i) const {
    return &images[i * static_cast<std::size_t>(support.pixels())];
  }
  std::vector<double> latent_row_f64(std::size_t i) const {
    return std::vector<double>(latent_row(i), latent_row(i) + d_z);
  }
};

inline std::size_t env_threads() {
  if (const char* s = std::getenv("ADDIDEC_THREADS")) {
    long v = std::atol(s);
    if (v >= 1) return static_cast<std::size_t>(v);
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw ? hw : 1;
}

// Sample + render a full split. Rendering is a pure function of (seed, index),
// so rows can be produced by any number of workers with identical results.
inline Dataset make_dataset(const SupportSpec& spec, std::size_t n, std::uint64_t seed,
                            Split split, const NormStats& ns = {}) {
  spec.validate();
  Dataset d;
  d.support = spec;
  d.norm = ns;
  d.d_z = spec.d_z();
  d.n = n;
  d.seed = seed;
  d.split = split;

  std::vector<double> lat;
  switch (spec.kind) {
    case SupportKind::ScalarL:
      lat = sample_scalar_latents(n, seed);
      break;
    case SupportKind::Disconnected:
      lat = sample_disconnected_latents(n, seed);
      break;
    case SupportKind::BlockIndependent:
      lat = sample_block_latents(n, false, spec.ball_radius, seed);
      break;
    case SupportKind::BlockDependent:
      lat = sample_block_latents(n, true, spec.ball_radius, seed);
      break;
    case SupportKind::Cpe:
      throw PreconditionError("cpe is an export tag, not a sampleable support");
  }
  d.latents.resize(lat.size());
  for (std::size_t i = 0; i < lat.size(); ++i) d.latents[i] = static_cast<float>(lat[i]);

  const std::size_t px = static_cast<std::size_t>(spec.pixels());
  d.images.resize(n * px);
  auto render_range = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      std::vector<double> img = render(&lat[i * static_cast<std::size_t>(d.d_z)], spec);
      normalize(img, spec, ns);
      float* out = &d.images[i * px];
      for (std::size_t k = 0; k < px; ++k) out[k] = static_cast<float>(img[k]);
    }
  };
  std::size_t workers = std::min(env_threads(), n ? n : std::size_t{1});
  if (workers <= 1) {
    render_range(0, n);
  } else {
    std::vector<std::thread> pool;
    std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      std::size_t lo = w * chunk, hi = std::min(n, lo + chunk);
      if (lo < hi) pool.emplace_back(render_range, lo, hi);
    }
    for (auto& t : pool) t.join();
  }
  return d;
}

// ----------------------------------------------------------------- file IO
//
// ADEC container, little-endian: magic "ADEC", version u32=1, n u64, d_z u32,
// C u32, H u32, W u32, seed u64, kind u8, ball_radius f64, mu f64x3,
// sigma f64x3, latents f32 row-major, images f32, CRC32 of the payload
// (latent + image bytes). A companion <stem>.meta.json mirrors the header.

inline std::string meta_path_for(const std::string& path) {
  std::filesystem::path p(path);
  p.replace_extension(".meta.json");
  return p.string();
}

inline void write_dataset(const Dataset& d, const std::string& path) {
  BinWriter w(path);
  w.bytes("ADEC", 4);
  w.u32(1);
  w.u64(d.n);
  w.u32(static_cast<std::uint32_t>(d.d_z));
  w.u32(static_cast<std::uint32_t>(d.support.channels));
  w.u32(static_cast<std::uint32_t>(d.support.height));
  w.u32(static_cast<std::uint32_t>(d.support.width));
  w.u64(d.seed);
  w.u8(static_cast<std::uint8_t>(d.support.kind));
  w.f64(d.support.ball_radius);
  for (double m : d.norm.mu) w.f64(m);
  for (double s : d.norm.sigma) w.f64(s);
  Crc32 crc;
  w.f32v(d.latents, &crc);
  w.f32v(d.images, &crc);
  w.u32(crc.value());
  w.close();

  nlohmann::json meta{
      {"magic", "ADEC"},
      {"version", 1},
      {"n", d.n},
      {"d_z", d.d_z},
      {"channels", d.support.channels},
      {"height", d.support.height},
      {"width", d.support.width},
      {"seed", d.seed},
      {"kind", kind_name(d.support.kind)},
      {"ball_radius", d.support.ball_radius},
      {"mu", d.norm.mu},
      {"sigma", d.norm.sigma},
      {"split", split_name(d.split)},
      {"crc32", crc.value()},
  };
  std::ofstream mf(meta_path_for(path));
  mf << meta.dump(2) << "\n";
}

inline Dataset read_dataset(const std::string& path) {
  BinReader r(path);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, "ADEC", 4) != 0)
    throw FormatError("bad magic in " + path);
  std::uint32_t version = r.u32();
  if (version != 1)
    throw FormatError("unsupported dataset version " + std::to_string(version) + " in " + path);
  Dataset d;
  d.n = r.u64();
  d.d_z = static_cast<int>(r.u32());
  d.support.channels = static_cast<int>(r.u32());
  d.support.height = static_cast<int>(r.u32());
  d.support.width = static_cast<int>(r.u32());
  d.seed = r.u64();
  std::uint8_t kind = r.u8();
  if (kind > 4) throw FormatError("unknown support kind tag in " + path);
  d.support.kind = static_cast<SupportKind>(kind);
  d.support.ball_radius = r.f64();
  for (double& m : d.norm.mu) m = r.f64();
  for (double& s : d.norm.sigma) s = r.f64();
  Crc32 crc;
  r.f32v(d.latents, d.n * static_cast<std::size_t>(d.d_z), &crc);
  r.f32v(d.images, d.n * static_cast<std::size_t>(d.support.pixels()), &crc);
  std::uint32_t stored = r.u32();
  if (stored != crc.value()) throw ChecksumError("payload checksum mismatch in " + path);

  std::ifstream mf(meta_path_for(path));
  if (mf) {
    nlohmann::json meta = nlohmann::json::parse(mf, nullptr, false);
    if (!meta.is_discarded() && meta.contains("split") && meta["split"].is_string())
      d.split = split_from_name(meta["split"].get<std::string>());
  }
  return d;
}

// -------------------------------------------------------------- image files

// raw [0,1] C*H*W (bottom-up rows) -> interleaved 8-bit rows, top-down
inline std::vector<unsigned char> to_rgb8(const std::vector<double>& img, int h, int w) {
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  std::vector<unsigned char> out(plane * 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      std::size_t src = static_cast<std::size_t>(h - 1 - y) * w + x;
      for (int c = 0; c < 3; ++c) {
        double v = std::clamp(img[static_cast<std::size_t>(c) * plane + src], 0.0, 1.0);
        out[(static_cast<std::size_t>(y) * w + x) * 3 + c] =
            static_cast<unsigned char>(std::lround(v * 255.0));
      }
    }
  return out;
}

inline void write_ppm(const std::vector<double>& img, int h, int w, const std::string& path) {
  std::vector<unsigned char> rgb = to_rgb8(img, h, w);
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw DataError("cannot open for writing: " + path);
  std::fprintf(f, "P6\n%d %d\n255\n", w, h);
  std::fwrite(rgb.data(), 1, rgb.size(), f);
  std::fclose(f);
}

namespace detail {
inline void png_chunk(std::FILE* f, const char type[4], const unsigned char* data, std::size_t n) {
  auto be32 = [&](std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    std::fwrite(b, 1, 4, f);
  };
  be32(static_cast<std::uint32_t>(n));
  std::fwrite(type, 1, 4, f);
  if (n) std::fwrite(data, 1, n, f);
  uLong crc = ::crc32(0L, nullptr, 0);
  crc = ::crc32(crc, reinterpret_cast<const Bytef*>(type), 4);
  if (n) crc = ::crc32(crc, data, static_cast<uInt>(n));
  be32(static_cast<std::uint32_t>(crc));
}
}  // namespace detail

inline void write_png(const std::vector<double>& img, int h, int w, const std::string& path) {
  std::vector<unsigned char> rgb = to_rgb8(img, h, w);
  // filter byte 0 in front of every scanline
  std::vector<unsigned char> raw(static_cast<std::size_t>(h) * (1 + static_cast<std::size_t>(w) * 3));
  for (int y = 0; y < h; ++y) {
    unsigned char* row = &raw[static_cast<std::size_t>(y) * (1 + static_cast<std::size_t>(w) * 3)];
    row[0] = 0;
    std::memcpy(row + 1, &rgb[static_cast<std::size_t>(y) * w * 3], static_cast<std::size_t>(w) * 3);
  }
  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::vector<unsigned char> z(bound);
  if (compress2(z.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 9) != Z_OK)
    throw DataError("png deflate failed");
  z.resize(bound);

  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw DataError("cannot open for writing: " + path);
  static const unsigned char sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  std::fwrite(sig, 1, 8, f);
  unsigned char ihdr[13];
  auto put32 = [&](int off, std::uint32_t v) {
    ihdr[off] = static_cast<unsigned char>(v >> 24);
    ihdr[off + 1] = static_cast<unsigned char>(v >> 16);
    ihdr[off + 2] = static_cast<unsigned char>(v >> 8);
    ihdr[off + 3] = static_cast<unsigned char>(v);
  };
  put32(0, static_cast<std::uint32_t>(w));
  put32(4, static_cast<std::uint32_t>(h));
  ihdr[8] = 8;   // bit depth
  ihdr[9] = 2;   // truecolor
  ihdr[10] = ihdr[11] = ihdr[12] = 0;
  detail::png_chunk(f, "IHDR", ihdr, 13);
  detail::png_chunk(f, "IDAT", z.data(), z.size());
  detail::png_chunk(f, "IEND", nullptr, 0);
  std::fclose(f);
}

}  // namespace addidec
