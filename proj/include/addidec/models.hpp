#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <map>
#include <string>
#include <vector>

#include "addidec/adam.hpp"
#include "addidec/binio.hpp"
#include "addidec/errors.hpp"
#include "addidec/partition.hpp"
#include "addidec/rng.hpp"
#include "addidec/tensor.hpp"

namespace addidec {

enum class DecoderKind { Additive, NonAdditive };

inline std::string decoder_name(DecoderKind k) {
  return k == DecoderKind::Additive ? "additive" : "nonadditive";
}

struct ModelConfig {
  int d_z = 2;
  Partition partition;
  std::array<int, 3> image_shape{3, 32, 32};  // C,H,W
  std::size_t hidden_width = 256;
  std::size_t hidden_depth = 3;
  DecoderKind decoder_kind = DecoderKind::Additive;
  double leaky_slope_internal = 0.1;
  double leaky_slope_output = 0.01;  // reserved for a deconvolution tail; the
                                     // dense mirror ends in a plain linear layer

  std::size_t d_x() const {
    return static_cast<std::size_t>(image_shape[0]) * image_shape[1] * image_shape[2];
  }
  void validate() const {
    if (d_z <= 0) throw ConfigError("d_z must be positive");
    if (partition.d_z != d_z) throw ConfigError("partition does not cover d_z");
    partition.validate();
    for (int v : image_shape)
      if (v <= 0) throw ConfigError("image dimensions must be positive");
    if (hidden_width == 0 || hidden_depth == 0)
      throw ConfigError("hidden width/depth must be positive");
  }
};

// dense stack: (Linear -> affine -> LeakyReLU) x depth -> Linear
struct Mlp {
  std::vector<ad::Tensor> W, b, g, beta;
  ad::Tensor Wout, bout;
  std::size_t in_dim = 0, width = 0, depth = 0, out_dim = 0;
};

namespace detail {
inline ad::Tensor glorot(const std::string& name, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  ad::Tensor t = ad::Tensor::zeros(name, {fan_in, fan_out});
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& v : t.data) v = rng.uniform(-a, a);
  return t;
}
}  // namespace detail

inline Mlp build_mlp(const std::string& prefix, std::size_t in_dim, std::size_t width,
                     std::size_t depth, std::size_t out_dim, Rng& rng) {
  Mlp m;
  m.in_dim = in_dim;
  m.width = width;
  m.depth = depth;
  m.out_dim = out_dim;
  std::size_t d = in_dim;
  for (std::size_t l = 0; l < depth; ++l) {
    std::string base = prefix + "." + std::to_string(l);
    m.W.push_back(detail::glorot(base + ".W", d, width, rng));
    m.b.push_back(ad::Tensor::zeros(base + ".b", {width}));
    ad::Tensor gg = ad::Tensor::zeros(base + ".g", {width});
    for (auto& v : gg.data) v = 1.0;
    m.g.push_back(std::move(gg));
    m.beta.push_back(ad::Tensor::zeros(base + ".beta", {width}));
    d = width;
  }
  m.Wout = detail::glorot(prefix + ".out.W", d, out_dim, rng);
  m.bout = ad::Tensor::zeros(prefix + ".out.b", {out_dim});
  return m;
}

inline void mlp_params(Mlp& m, std::vector<ad::Tensor*>& out) {
  for (std::size_t l = 0; l < m.depth; ++l) {
    out.push_back(&m.W[l]);
    out.push_back(&m.b[l]);
    out.push_back(&m.g[l]);
    out.push_back(&m.beta[l]);
  }
  out.push_back(&m.Wout);
  out.push_back(&m.bout);
}

inline ad::VarId mlp_tape(ad::Tape& t, Mlp& m, ad::VarId x, double slope) {
  ad::VarId h = x;
  for (std::size_t l = 0; l < m.depth; ++l) {
    h = ad::matmul(t, h, t.leaf(m.W[l]));
    h = ad::add_bias(t, h, t.leaf(m.b[l]));
    h = ad::col_scale(t, h, t.leaf(m.g[l]));
    h = ad::add_bias(t, h, t.leaf(m.beta[l]));
    h = ad::leaky_relu(t, h, slope);
  }
  h = ad::matmul(t, h, t.leaf(m.Wout));
  h = ad::add_bias(t, h, t.leaf(m.bout));
  return h;
}

// ------------------------------------------------------------ eval forward
//
// Inference processes fixed 64-row zero-padded chunks. GEMM row results are
// position-independent at a fixed batch shape, so a sample's encoding/decoding
// is bit-identical no matter what else shares the batch.
inline constexpr std::size_t kEvalChunk = 64;

namespace detail {
inline ad::CMap tmap(const ad::Tensor& t) {
  return ad::CMap(t.data.data(), static_cast<Eigen::Index>(t.shape[0]),
                  static_cast<Eigen::Index>(t.shape.size() == 2 ? t.shape[1] : 1));
}

inline void mlp_eval_chunk(const Mlp& m, ad::EMat& H, double slope) {
  for (std::size_t l = 0; l < m.depth; ++l) {
    ad::EMat next = H * tmap(m.W[l]);
    Eigen::Map<const Eigen::RowVectorXd> bv(m.b[l].data.data(), static_cast<Eigen::Index>(m.width));
    Eigen::Map<const Eigen::RowVectorXd> gv(m.g[l].data.data(), static_cast<Eigen::Index>(m.width));
    Eigen::Map<const Eigen::RowVectorXd> ev(m.beta[l].data.data(), static_cast<Eigen::Index>(m.width));
    next.rowwise() += bv;
    next.array().rowwise() *= gv.array();
    next.rowwise() += ev;
    H = next.array().max(next.array() * slope);  // leaky relu for slope < 1
  }
  ad::EMat out = H * tmap(m.Wout);
  Eigen::Map<const Eigen::RowVectorXd> bo(m.bout.data.data(), static_cast<Eigen::Index>(m.out_dim));
  out.rowwise() += bo;
  H = std::move(out);
}

// run `stack` chunk-wise over an m x in matrix
inline std::vector<double> run_chunked(const Mlp& m, const double* in, std::size_t rows,
                                       double slope) {
  std::vector<double> out(rows * m.out_dim);
  for (std::size_t lo = 0; lo < rows; lo += kEvalChunk) {
    const std::size_t take = std::min(kEvalChunk, rows - lo);
    ad::EMat X = ad::EMat::Zero(kEvalChunk, static_cast<Eigen::Index>(m.in_dim));
    for (std::size_t r = 0; r < take; ++r)
      std::memcpy(X.row(static_cast<Eigen::Index>(r)).data(), in + (lo + r) * m.in_dim,
                  m.in_dim * sizeof(double));
    mlp_eval_chunk(m, X, slope);
    for (std::size_t r = 0; r < take; ++r)
      std::memcpy(out.data() + (lo + r) * m.out_dim, X.row(static_cast<Eigen::Index>(r)).data(),
                  m.out_dim * sizeof(double));
  }
  return out;
}
}  // namespace detail

struct Model {
  ModelConfig cfg;
  Mlp encoder;
  std::vector<Mlp> decoder_blocks;  // one per block, or a single monolith
  std::size_t decoder_width = 0;

  std::vector<ad::Tensor*> params() {
    std::vector<ad::Tensor*> out;
    mlp_params(encoder, out);
    for (auto& d : decoder_blocks) mlp_params(d, out);
    return out;
  }
  std::size_t param_count() const {
    std::size_t n = 0;
    auto count = [&n](const Mlp& m) {
      for (const auto& t : m.W) n += t.numel();
      for (const auto& t : m.b) n += t.numel();
      for (const auto& t : m.g) n += t.numel();
      for (const auto& t : m.beta) n += t.numel();
      n += m.Wout.numel() + m.bout.numel();
    };
    count(encoder);
    for (const auto& d : decoder_blocks) count(d);
    return n;
  }
  std::size_t decoder_param_count() const {
    std::size_t enc = 0;
    for (const auto& t : encoder.W) enc += t.numel();
    for (const auto& t : encoder.b) enc += t.numel();
    for (const auto& t : encoder.g) enc += t.numel();
    for (const auto& t : encoder.beta) enc += t.numel();
    enc += encoder.Wout.numel() + encoder.bout.numel();
    return param_count() - enc;
  }
};

inline std::size_t dense_stack_param_count(std::size_t in, std::size_t w, std::size_t depth,
                                           std::size_t out) {
  std::size_t n = in * w + w + 2 * w;                 // first dense + affine
  n += (depth - 1) * (w * w + w + 2 * w);             // remaining hidden layers
  n += w * out + out;                                 // output layer
  return n;
}

// width of the monolithic decoder matching the additive decoder's parameter
// count as closely as the integer grid allows (required within 10%)
inline std::size_t derive_nonadditive_width(const ModelConfig& cfg) {
  std::size_t target = 0;
  for (const auto& blk : cfg.partition.blocks)
    target += dense_stack_param_count(blk.size(), cfg.hidden_width, cfg.hidden_depth, cfg.d_x());
  std::size_t best_w = 1;
  std::size_t best_diff = static_cast<std::size_t>(-1);
  for (std::size_t w = 1; w <= 8 * cfg.hidden_width + 64; ++w) {
    std::size_t c = dense_stack_param_count(static_cast<std::size_t>(cfg.d_z), w,
                                            cfg.hidden_depth, cfg.d_x());
    std::size_t diff = c > target ? c - target : target - c;
    if (diff < best_diff) {
      best_diff = diff;
      best_w = w;
    }
  }
  if (best_diff * 10 > target)
    throw ConfigError("cannot match non-additive decoder parameters within 10%");
  return best_w;
}

inline Model build_model(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Model m;
  m.cfg = cfg;
  Rng rng(mix_seed(seed, 0xADD1DECull));
  m.encoder = build_mlp("enc", cfg.d_x(), cfg.hidden_width, cfg.hidden_depth,
                        static_cast<std::size_t>(cfg.d_z), rng);
  if (cfg.decoder_kind == DecoderKind::Additive) {
    m.decoder_width = cfg.hidden_width;
    for (std::size_t bidx = 0; bidx < cfg.partition.blocks.size(); ++bidx)
      m.decoder_blocks.push_back(build_mlp("dec" + std::to_string(bidx),
                                           cfg.partition.blocks[bidx].size(), cfg.hidden_width,
                                           cfg.hidden_depth, cfg.d_x(), rng));
  } else {
    m.decoder_width = derive_nonadditive_width(cfg);
    m.decoder_blocks.push_back(build_mlp("dec0", static_cast<std::size_t>(cfg.d_z),
                                         m.decoder_width, cfg.hidden_depth, cfg.d_x(), rng));
  }
  return m;
}

// ------------------------------------------------------- tape-level forward

inline ad::VarId encode_tape(ad::Tape& t, Model& m, ad::VarId x) {
  return mlp_tape(t, m.encoder, x, m.cfg.leaky_slope_internal);
}

inline ad::VarId decode_tape(ad::Tape& t, Model& m, ad::VarId z) {
  if (m.cfg.decoder_kind == DecoderKind::NonAdditive)
    return mlp_tape(t, m.decoder_blocks[0], z, m.cfg.leaky_slope_internal);
  ad::VarId out = 0;
  for (std::size_t bidx = 0; bidx < m.decoder_blocks.size(); ++bidx) {
    const auto& blk = m.cfg.partition.blocks[bidx];
    std::size_t lo = static_cast<std::size_t>(blk.front());
    std::size_t hi = static_cast<std::size_t>(blk.back()) + 1;
    ad::VarId zb = ad::slice(t, z, lo, hi);
    ad::VarId yb = mlp_tape(t, m.decoder_blocks[bidx], zb, m.cfg.leaky_slope_internal);
    out = bidx == 0 ? yb : ad::add(t, out, yb);
  }
  return out;
}

// --------------------------------------------------------- eval-path API

inline std::vector<double> encode(const Model& m, const std::vector<double>& images, std::size_t n) {
  if (images.size() != n * m.cfg.d_x())
    throw PreconditionError("encode: image buffer size does not match n x d_x");
  return detail::run_chunked(m.encoder, images.data(), n, m.cfg.leaky_slope_internal);
}

// per-block decoder outputs, normalized space (additive only)
inline std::vector<std::vector<double>> decode_blocks(const Model& m,
                                                      const std::vector<double>& latents,
                                                      std::size_t n) {
  if (m.cfg.decoder_kind != DecoderKind::Additive)
    throw CapabilityError("per-block renderings need an additive decoder");
  if (latents.size() != n * static_cast<std::size_t>(m.cfg.d_z))
    throw PreconditionError("decode_blocks: latent buffer size does not match n x d_z");
  std::vector<std::vector<double>> out;
  const std::size_t dz = static_cast<std::size_t>(m.cfg.d_z);
  for (std::size_t bidx = 0; bidx < m.decoder_blocks.size(); ++bidx) {
    const auto& blk = m.cfg.partition.blocks[bidx];
    std::vector<double> zb(n * blk.size());
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < blk.size(); ++j)
        zb[i * blk.size() + j] = latents[i * dz + static_cast<std::size_t>(blk[j])];
    out.push_back(detail::run_chunked(m.decoder_blocks[bidx], zb.data(), n,
                                      m.cfg.leaky_slope_internal));
  }
  return out;
}

inline std::vector<double> decode(const Model& m, const std::vector<double>& latents, std::size_t n) {
  if (m.cfg.decoder_kind == DecoderKind::NonAdditive) {
    if (latents.size() != n * static_cast<std::size_t>(m.cfg.d_z))
      throw PreconditionError("decode: latent buffer size does not match n x d_z");
    return detail::run_chunked(m.decoder_blocks[0], latents.data(), n,
                               m.cfg.leaky_slope_internal);
  }
  auto blocks = decode_blocks(m, latents, n);
  std::vector<double> out = std::move(blocks[0]);
  for (std::size_t bidx = 1; bidx < blocks.size(); ++bidx)
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += blocks[bidx][i];
  return out;
}

// ---------------------------------------------------------------- ADCK IO
//
// Checkpoint container: magic "ADCK", version u32=1, count u64, then per
// parameter: name_len u32, name bytes, ndim u32, dims u64 each, f64 payload;
// CRC32 of the table closes the file.

inline void save_checkpoint(Model& m, const std::string& path) {
  auto params = m.params();
  BinWriter w(path);
  w.bytes("ADCK", 4);
  w.u32(1);
  w.u64(params.size());
  Crc32 crc;
  for (const auto* p : params) {
    w.u32(static_cast<std::uint32_t>(p->name.size()), &crc);
    w.bytes(p->name.data(), p->name.size(), &crc);
    w.u32(static_cast<std::uint32_t>(p->shape.size()), &crc);
    for (std::size_t d : p->shape) w.u64(d, &crc);
    w.f64v(p->data, &crc);
  }
  w.u32(crc.value());
  w.close();
}

inline void load_checkpoint(Model& m, const std::string& path) {
  BinReader r(path);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, "ADCK", 4) != 0) throw FormatError("bad magic in " + path);
  std::uint32_t version = r.u32();
  if (version != 1)
    throw FormatError("unsupported checkpoint version " + std::to_string(version) + " in " + path);
  std::uint64_t count = r.u64();
  Crc32 crc;
  std::map<std::string, std::pair<std::vector<std::size_t>, std::vector<double>>> table;
  for (std::uint64_t i = 0; i < count; ++i) {
    std::uint32_t len = r.u32(&crc);
    if (len > 4096) throw FormatError("implausible parameter name length in " + path);
    std::string name(len, '\0');
    r.bytes(name.data(), len, &crc);
    std::uint32_t ndim = r.u32(&crc);
    if (ndim > 8) throw FormatError("implausible parameter rank in " + path);
    std::vector<std::size_t> shape(ndim);
    std::size_t numel = 1;
    for (auto& d : shape) {
      d = r.u64(&crc);
      numel *= d;
    }
    std::vector<double> data;
    r.f64v(data, numel, &crc);
    table[name] = {std::move(shape), std::move(data)};
  }
  std::uint32_t stored = r.u32();
  if (stored != crc.value()) throw ChecksumError("parameter table checksum mismatch in " + path);

  auto params = m.params();
  if (params.size() != table.size())
    throw FormatError("checkpoint holds " + std::to_string(table.size()) + " parameters, model has " +
                      std::to_string(params.size()));
  for (auto* p : params) {
    auto it = table.find(p->name);
    if (it == table.end()) throw FormatError("checkpoint missing parameter \"" + p->name + "\"");
    if (it->second.first != p->shape)
      throw FormatError("shape mismatch for parameter \"" + p->name + "\"");
    p->data = it->second.second;
  }
}

}  // namespace addidec
