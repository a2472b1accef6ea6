#pragma once

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "addidec/errors.hpp"
#include "addidec/finite_diff.hpp"
#include "addidec/models.hpp"
#include "addidec/partition.hpp"
#include "addidec/scenegen.hpp"

namespace addidec {

// ------------------------------------------------------- support projection

struct SupportSample {
  std::vector<double> points;  // m x d_z, typically encoder outputs
  std::size_t m = 0;
  int d_z = 0;
  Partition partition;
};

// encoder responses over a whole dataset
inline SupportSample encode_support_sample(const Model& model, const Dataset& ds) {
  const std::size_t dx = model.cfg.d_x();
  const std::size_t n = static_cast<std::size_t>(ds.n);
  SupportSample s;
  s.m = n;
  s.d_z = model.cfg.d_z;
  s.partition = model.cfg.partition;
  s.points.resize(n * static_cast<std::size_t>(s.d_z));
  const std::size_t slab = 512;
  for (std::size_t lo = 0; lo < n; lo += slab) {
    const std::size_t rows = std::min(slab, n - lo);
    std::vector<double> x(rows * dx);
    for (std::size_t r = 0; r < rows; ++r) {
      const float* src = ds.image_row(lo + r);
      for (std::size_t k = 0; k < dx; ++k) x[r * dx + k] = src[k];
    }
    std::vector<double> z = encode(model, x, rows);
    std::copy(z.begin(), z.end(),
              s.points.begin() + static_cast<std::ptrdiff_t>(lo * static_cast<std::size_t>(s.d_z)));
  }
  return s;
}

struct BlockProjection {
  std::vector<int> coords;     // latent indices of the block
  std::vector<double> lo, hi;  // per block coordinate
  std::vector<double> cloud;   // m x |B| retained block samples
  std::size_t m = 0;
};

inline BlockProjection project_support(const SupportSample& s, std::size_t block_index) {
  if (s.m < 1) throw PreconditionError("projection needs at least one sample");
  if (block_index >= s.partition.blocks.size())
    throw PreconditionError("block index outside the partition");
  const auto& blk = s.partition.blocks[block_index];
  BlockProjection out;
  out.coords = blk;
  out.m = s.m;
  out.lo.assign(blk.size(), std::numeric_limits<double>::infinity());
  out.hi.assign(blk.size(), -std::numeric_limits<double>::infinity());
  out.cloud.resize(s.m * blk.size());
  for (std::size_t i = 0; i < s.m; ++i)
    for (std::size_t j = 0; j < blk.size(); ++j) {
      const double v = s.points[i * static_cast<std::size_t>(s.d_z) +
                                static_cast<std::size_t>(blk[j])];
      out.cloud[i * blk.size() + j] = v;
      out.lo[j] = std::min(out.lo[j], v);
      out.hi[j] = std::max(out.hi[j], v);
    }
  return out;
}

// ------------------------------------------------------------------ CPE grid

struct CPEGrid {
  std::vector<double> points;           // g x d_z, last coordinate fastest
  std::vector<std::uint8_t> extension;  // 1 = outside the sampled support
  std::size_t g = 0;
  int d_z = 0;
  std::size_t res = 0;  // points per axis
  double nn_threshold = 0.0;
  std::vector<std::vector<double>> axes;  // per coordinate
};

// Equally spaced product grid over the per-block bounding boxes. Membership is
// finite-sample: a grid point is in-support when some cloud point lies within
// twice the cloud's (lower) median nearest-neighbour spacing.
inline CPEGrid cpe_grid(const SupportSample& s, std::size_t res) {
  if (res < 2) throw PreconditionError("grid resolution must be >= 2 per axis");
  if (s.m < 2) throw PreconditionError("grid flagging needs at least two samples");
  const std::size_t d = static_cast<std::size_t>(s.d_z);

  CPEGrid grid;
  grid.d_z = s.d_z;
  grid.res = res;
  grid.axes.resize(d);
  for (std::size_t b = 0; b < s.partition.blocks.size(); ++b) {
    BlockProjection proj = project_support(s, b);
    for (std::size_t j = 0; j < proj.coords.size(); ++j) {
      auto& axis = grid.axes[static_cast<std::size_t>(proj.coords[j])];
      axis.resize(res);
      for (std::size_t k = 0; k < res; ++k)
        axis[k] = proj.lo[j] + (proj.hi[j] - proj.lo[j]) * static_cast<double>(k) /
                                   static_cast<double>(res - 1);
      axis[res - 1] = proj.hi[j];  // lo + (hi-lo) can round past hi
    }
  }

  grid.g = 1;
  for (std::size_t c = 0; c < d; ++c) grid.g *= res;
  grid.points.resize(grid.g * d);
  for (std::size_t i = 0; i < grid.g; ++i) {
    std::size_t rest = i;
    for (std::size_t c = d; c-- > 0;) {
      grid.points[i * d + c] = grid.axes[c][rest % res];
      rest /= res;
    }
  }

  // 2x median nearest-neighbour spacing of the cloud
  auto dist2 = [&](const double* a, const double* b) {
    double acc = 0;
    for (std::size_t c = 0; c < d; ++c) {
      const double dv = a[c] - b[c];
      acc += dv * dv;
    }
    return acc;
  };
  std::vector<double> nn(s.m, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < s.m; ++i)
    for (std::size_t j = i + 1; j < s.m; ++j) {
      const double d2 = dist2(&s.points[i * d], &s.points[j * d]);
      nn[i] = std::min(nn[i], d2);
      nn[j] = std::min(nn[j], d2);
    }
  std::sort(nn.begin(), nn.end());
  grid.nn_threshold = 2.0 * std::sqrt(nn[(s.m - 1) / 2]);

  grid.extension.resize(grid.g);
  const double thr2 = grid.nn_threshold * grid.nn_threshold;
  for (std::size_t i = 0; i < grid.g; ++i) {
    bool close = false;
    for (std::size_t j = 0; j < s.m && !close; ++j)
      close = dist2(&grid.points[i * d], &s.points[j * d]) <= thr2;
    grid.extension[i] = close ? 0 : 1;
  }
  return grid;
}

// -------------------------------------------------------- centroid inversion

// Intensity-weighted per-channel centroids mapped back through the frame;
// the scalar supports report the two y-coordinates, block supports all four.
inline std::vector<double> centroid_invert(const std::vector<double>& img_raw,
                                           const SupportSpec& spec) {
  spec.validate();
  if (img_raw.size() != static_cast<std::size_t>(spec.pixels()))
    throw PreconditionError("centroid_invert: image size mismatch");
  if (spec.kind == SupportKind::Cpe)
    throw PreconditionError("cpe grids carry no single ground-truth convention");
  detail::Frame fr(spec);
  const std::size_t plane = static_cast<std::size_t>(spec.height) * spec.width;
  const int chans[2] = {2, 0};  // ball 1 blue, ball 2 red
  double cx[2], cy[2];
  for (int ball = 0; ball < 2; ++ball) {
    const double* chan = &img_raw[static_cast<std::size_t>(chans[ball]) * plane];
    double mass = 0, sx = 0, sy = 0;
    for (int iy = 0; iy < spec.height; ++iy)
      for (int ix = 0; ix < spec.width; ++ix) {
        const double v = std::max(chan[static_cast<std::size_t>(iy) * spec.width + ix], 0.0);
        mass += v;
        sx += v * (ix + 0.5);
        sy += v * (iy + 0.5);
      }
    if (mass <= 0)
      throw InversionError("ball " + std::to_string(ball + 1) + " channel has no mass");
    cx[ball] = fr.inv_x(sx / mass);
    cy[ball] = fr.inv_y(sy / mass);
  }
  if (spec.kind == SupportKind::BlockIndependent || spec.kind == SupportKind::BlockDependent)
    return {cx[0], cy[0], cx[1], cy[1]};
  return {cy[0], cy[1]};
}

// ------------------------------------------------------------- extrapolation

struct ExtrapolationResult {
  std::vector<double> recon_norm;  // g x d_x decoder outputs, normalized space
  std::vector<double> gt_latents;  // g x d_gt centroid estimates, NaN when not computable
  std::vector<std::uint8_t> gt_ok;
  std::size_t rows = 0, cols = 0;  // panel tiling
  std::vector<double> panel;       // raw [0,1] C x (rows*H) x (cols*W), bottom-up rows
  int panel_h = 0, panel_w = 0;
};

// Decode every grid point and tile the denormalized images into one panel;
// extension cells get a one-pixel red frame. The first half of the latent
// axes indexes panel rows (larger values up), the second half columns.
inline ExtrapolationResult extrapolate(const Model& model, const CPEGrid& grid,
                                       const SupportSpec& support, const NormStats& ns) {
  if (grid.d_z != model.cfg.d_z)
    throw PreconditionError("grid dimensionality does not match the model");
  if (static_cast<std::size_t>(support.pixels()) != model.cfg.d_x())
    throw PreconditionError("support resolution does not match the model");
  const std::size_t d = static_cast<std::size_t>(grid.d_z);
  const std::size_t dx = model.cfg.d_x();
  const int H = support.height, W = support.width;

  ExtrapolationResult er;
  er.recon_norm = decode(model, grid.points, grid.g);

  const std::size_t row_axes = (d + 1) / 2;
  er.rows = 1;
  er.cols = 1;
  for (std::size_t c = 0; c < d; ++c) (c < row_axes ? er.rows : er.cols) *= grid.res;
  er.panel_h = static_cast<int>(er.rows) * H;
  er.panel_w = static_cast<int>(er.cols) * W;
  const std::size_t pplane = static_cast<std::size_t>(er.panel_h) * er.panel_w;
  er.panel.assign(pplane * 3, 0.0);

  const std::size_t d_gt = d;  // renderer latents match the grid space
  er.gt_latents.assign(grid.g * d_gt, std::numeric_limits<double>::quiet_NaN());
  er.gt_ok.assign(grid.g, 0);

  const std::size_t plane = static_cast<std::size_t>(H) * W;
  for (std::size_t i = 0; i < grid.g; ++i) {
    std::vector<double> img(er.recon_norm.begin() + static_cast<std::ptrdiff_t>(i * dx),
                            er.recon_norm.begin() + static_cast<std::ptrdiff_t>((i + 1) * dx));
    denormalize(img, support, ns);
    try {
      std::vector<double> gt = centroid_invert(img, support);
      std::copy(gt.begin(), gt.end(),
                er.gt_latents.begin() + static_cast<std::ptrdiff_t>(i * d_gt));
      er.gt_ok[i] = 1;
    } catch (const InversionError&) {
    }

    const std::size_t row = i / er.cols, col = i % er.cols;
    const int x0 = static_cast<int>(col) * W;
    // bottom-up rows: larger leading latents land higher in the image
    const int y0 = static_cast<int>(row) * H;
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
          er.panel[static_cast<std::size_t>(c) * pplane +
                   static_cast<std::size_t>(y0 + y) * er.panel_w + (x0 + x)] =
              std::clamp(img[static_cast<std::size_t>(c) * plane +
                             static_cast<std::size_t>(y) * W + x],
                         0.0, 1.0);
    if (grid.extension[i]) {
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
          if (y != 0 && y != H - 1 && x != 0 && x != W - 1) continue;
          const std::size_t at = static_cast<std::size_t>(y0 + y) * er.panel_w + (x0 + x);
          er.panel[at] = 1.0;               // red frame marks extrapolated cells
          er.panel[pplane + at] = 0.0;
          er.panel[2 * pplane + at] = 0.0;
        }
    }
  }
  return er;
}

// CPE grid + its reconstructions in the dataset container, kind tag "cpe"
inline Dataset cpe_to_dataset(const CPEGrid& grid, const ExtrapolationResult& er,
                              const SupportSpec& support, const NormStats& ns,
                              std::uint64_t seed) {
  Dataset d;
  d.support = support;
  d.support.kind = SupportKind::Cpe;
  d.norm = ns;
  d.d_z = grid.d_z;
  d.n = grid.g;
  d.seed = seed;
  d.split = Split::unspecified;
  d.latents.resize(grid.points.size());
  for (std::size_t i = 0; i < grid.points.size(); ++i)
    d.latents[i] = static_cast<float>(grid.points[i]);
  d.images.resize(er.recon_norm.size());
  for (std::size_t i = 0; i < er.recon_norm.size(); ++i)
    d.images[i] = static_cast<float>(er.recon_norm[i]);
  return d;
}

// ---------------------------------------------------------- latent traversal

enum class TraversalProtocol { ball1_x = 0, ball2_x = 1, ball1_y = 2, ball2_y = 3 };

inline std::string traversal_name(TraversalProtocol p) {
  switch (p) {
    case TraversalProtocol::ball1_x: return "ball1_x";
    case TraversalProtocol::ball2_x: return "ball2_x";
    case TraversalProtocol::ball1_y: return "ball1_y";
    case TraversalProtocol::ball2_y: return "ball2_y";
  }
  throw PreconditionError("unknown traversal protocol");
}

inline int traversal_coord(TraversalProtocol p) {
  switch (p) {
    case TraversalProtocol::ball1_x: return 0;
    case TraversalProtocol::ball2_x: return 2;
    case TraversalProtocol::ball1_y: return 1;
    case TraversalProtocol::ball2_y: return 3;
  }
  throw PreconditionError("unknown traversal protocol");
}

// fixed complements; the off-axis separation of 0.5 keeps the balls clear
inline std::vector<double> traversal_base(TraversalProtocol p) {
  switch (p) {
    case TraversalProtocol::ball1_x: return {0.0, 0.25, 0.50, 0.75};
    case TraversalProtocol::ball2_x: return {0.50, 0.25, 0.0, 0.75};
    case TraversalProtocol::ball1_y: return {0.25, 0.0, 0.75, 0.50};
    case TraversalProtocol::ball2_y: return {0.25, 0.50, 0.75, 0.0};
  }
  throw PreconditionError("unknown traversal protocol");
}

struct TraversalRow {
  std::vector<double> z;      // ground truth, d_z = 4
  std::vector<double> z_hat;  // encoder response
};

struct TraversalTable {
  TraversalProtocol protocol{};
  int varying = 0;
  std::vector<TraversalRow> rows;

  std::string to_csv() const {
    auto num = [](double v) { return nlohmann::json(v).dump(); };
    std::string out = "protocol,point,z1,z2,z3,z4,zhat1,zhat2,zhat3,zhat4\n";
    for (std::size_t k = 0; k < rows.size(); ++k) {
      out += traversal_name(protocol) + "," + std::to_string(k);
      for (double v : rows[k].z) out += "," + num(v);
      for (double v : rows[k].z_hat) out += "," + num(v);
      out += "\n";
    }
    return out;
  }
};

// ten equally spaced points along one coordinate, complements pinned
inline TraversalTable latent_traversal(const Model& model, const SupportSpec& support,
                                       TraversalProtocol protocol) {
  if (support.kind != SupportKind::BlockIndependent &&
      support.kind != SupportKind::BlockDependent)
    throw PreconditionError("latent traversals are defined on the block supports");
  if (static_cast<std::size_t>(support.pixels()) != model.cfg.d_x())
    throw PreconditionError("support resolution does not match the model");
  if (model.cfg.d_z != 4) throw PreconditionError("traversal needs d_z = 4");

  TraversalTable table;
  table.protocol = protocol;
  table.varying = traversal_coord(protocol);
  const std::size_t steps = 10;
  const std::size_t dx = model.cfg.d_x();
  const NormStats ns;

  std::vector<double> images(steps * dx);
  for (std::size_t k = 0; k < steps; ++k) {
    std::vector<double> z = traversal_base(protocol);
    z[static_cast<std::size_t>(table.varying)] =
        static_cast<double>(k) / static_cast<double>(steps - 1);
    if (!balls_clear(z.data(), support.ball_radius))
      throw PreconditionError("traversal point occludes; ball_radius too large for the protocol");
    std::vector<double> img = render(z, support);
    normalize(img, support, ns);
    std::copy(img.begin(), img.end(), images.begin() + static_cast<std::ptrdiff_t>(k * dx));
    table.rows.push_back(TraversalRow{std::move(z), {}});
  }
  std::vector<double> z_hat = encode(model, images, steps);
  for (std::size_t k = 0; k < steps; ++k)
    table.rows[k].z_hat.assign(z_hat.begin() + static_cast<std::ptrdiff_t>(k * 4),
                               z_hat.begin() + static_cast<std::ptrdiff_t>((k + 1) * 4));
  return table;
}

// ------------------------------------------------------- object renderings

struct ObjectRenderings {
  std::vector<std::vector<double>> block_norm;  // per block, n x d_x normalized
  std::vector<std::vector<double>> block_raw;   // denormalized separately
  std::vector<double> full_norm;                // blockwise sum, n x d_x
};

inline ObjectRenderings object_renderings(const Model& model, const std::vector<double>& z,
                                          std::size_t n, const SupportSpec& support,
                                          const NormStats& ns) {
  ObjectRenderings out;
  out.block_norm = decode_blocks(model, z, n);  // capability-checked there
  out.full_norm = out.block_norm[0];
  for (std::size_t b = 1; b < out.block_norm.size(); ++b)
    for (std::size_t i = 0; i < out.full_norm.size(); ++i)
      out.full_norm[i] += out.block_norm[b][i];
  const std::size_t dx = model.cfg.d_x();
  for (const auto& blk : out.block_norm) {
    std::vector<double> raw = blk;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> img(raw.begin() + static_cast<std::ptrdiff_t>(i * dx),
                              raw.begin() + static_cast<std::ptrdiff_t>((i + 1) * dx));
      denormalize(img, support, ns);
      std::copy(img.begin(), img.end(), raw.begin() + static_cast<std::ptrdiff_t>(i * dx));
    }
    out.block_raw.push_back(std::move(raw));
  }
  return out;
}

// ------------------------------------------- local disentanglement structure

struct JacobianReport {
  bool is_block_permutation = false;
  std::vector<int> assignment;   // ground-truth block -> learned block
  std::vector<int> permutation;  // coordinate-level map (empty if none found)
  std::vector<double> jacobian;  // d_gt x d_learned, row-major
  double max_col_norm = 0.0;
};

// FD Jacobian of v = centroid_invert(decode(.)) at the encoding of render(z);
// reports whether some block assignment makes every off-block column segment
// small relative to the largest column norm.
inline JacobianReport jacobian_block_structure(const VecFn& encode_norm_image,
                                               const VecFn& decode_raw,
                                               const SupportSpec& support, const Partition& p,
                                               const std::vector<double>& z, double h = 1e-3,
                                               double tol = 0.1) {
  const double bd = support_boundary_distance(z.data(), support);
  if (bd < h)
    throw PreconditionError("probe is closer than the step h to the support boundary");

  std::vector<double> img = render(z, support);
  const NormStats ns;
  normalize(img, support, ns);
  std::vector<double> z0 = encode_norm_image(img);

  VecFn v = [&](const std::vector<double>& u) { return centroid_invert(decode_raw(u), support); };
  std::size_t d_gt = 0;
  std::vector<double> J = finite_diff_jacobian(v, z0, h, &d_gt);
  const std::size_t dl = z0.size();

  JacobianReport rep;
  rep.jacobian = J;
  std::vector<double> col_norm(dl, 0.0);
  for (std::size_t j = 0; j < dl; ++j) {
    double acc = 0;
    for (std::size_t i = 0; i < d_gt; ++i) acc += J[i * dl + j] * J[i * dl + j];
    col_norm[j] = std::sqrt(acc);
    rep.max_col_norm = std::max(rep.max_col_norm, col_norm[j]);
  }

  for (const auto& assign : enumerate_block_assignments(p)) {
    bool ok = true;
    for (std::size_t b = 0; b < p.blocks.size() && ok; ++b) {
      for (int j : p.blocks[static_cast<std::size_t>(assign[b])]) {
        double off = 0;
        for (std::size_t i = 0; i < d_gt; ++i) {
          const bool inside = std::find(p.blocks[b].begin(), p.blocks[b].end(),
                                        static_cast<int>(i)) != p.blocks[b].end();
          if (!inside) off += J[i * dl + static_cast<std::size_t>(j)] *
                              J[i * dl + static_cast<std::size_t>(j)];
        }
        if (std::sqrt(off) > tol * rep.max_col_norm) {
          ok = false;
          break;
        }
      }
    }
    if (ok) {
      rep.is_block_permutation = true;
      rep.assignment = assign;
      rep.permutation.assign(static_cast<std::size_t>(p.d_z), -1);
      for (std::size_t b = 0; b < p.blocks.size(); ++b) {
        const auto& src = p.blocks[b];
        const auto& dst = p.blocks[static_cast<std::size_t>(assign[b])];
        for (std::size_t k = 0; k < src.size(); ++k)
          rep.permutation[static_cast<std::size_t>(src[k])] = dst[k];
      }
      break;
    }
  }
  return rep;
}

// adapters binding a trained model into the callable interface (the model
// must outlive the returned closures)
inline VecFn model_encode_fn(const Model& model) {
  return [&model](const std::vector<double>& img) { return encode(model, img, 1); };
}

inline VecFn model_decode_raw_fn(const Model& model, const SupportSpec& support,
                                 const NormStats& ns) {
  return [&model, support, ns](const std::vector<double>& zz) {
    std::vector<double> out = decode(model, zz, 1);
    denormalize(out, support, ns);
    return out;
  };
}

}  // namespace addidec
