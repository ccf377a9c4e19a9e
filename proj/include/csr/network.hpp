#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "csr/degrade.hpp"
#include "csr/image.hpp"
#include "csr/tensor.hpp"

#include "json.hpp"

namespace csr {

/// Architecture hyperparameters. Defaults are desk-scale; `proj_dim` is the
/// projected feature size fed to the contrastive losses.
struct NetConfig {
  int channels = 16;
  int num_blocks = 3;
  int proj_dim = 32;
  int scale = 2;
  double leaky_slope = 0.2;

  void validate() const {
    if (channels < 4) throw ValueError("NetConfig: channels must be >= 4");
    if (num_blocks < 1) throw ValueError("NetConfig: num_blocks must be >= 1");
    if (proj_dim < 8) throw ValueError("NetConfig: proj_dim must be >= 8");
    if (scale != 2 && scale != 3 && scale != 4)
      throw ValueError("NetConfig: scale must be one of {2,3,4}");
    if (leaky_slope < 0.0 || leaky_slope >= 1.0)
      throw ValueError("NetConfig: leaky_slope must be in [0,1)");
  }

  nlohmann::json to_json() const {
    return {{"channels", channels},
            {"num_blocks", num_blocks},
            {"proj_dim", proj_dim},
            {"scale", scale},
            {"leaky_slope", leaky_slope}};
  }
  static NetConfig from_json(const nlohmann::json& j) {
    NetConfig c;
    c.channels = j.value("channels", 16);
    c.num_blocks = j.value("num_blocks", 3);
    c.proj_dim = j.value("proj_dim", 32);
    c.scale = j.value("scale", 2);
    c.leaky_slope = j.value("leaky_slope", 0.2);
    c.validate();
    return c;
  }
};

enum class FeatureOrigin { hr_cde, lr_cde, hr_feat, sr_feat, free };

/// M unit-norm rows of projected features plus the spatial grid they were
/// flattened from (M = grid_h * grid_w).
template <typename T>
struct FeatureSet {
  Tensor<T> vectors;  // [M, S]
  FeatureOrigin origin = FeatureOrigin::free;
  int grid_h = 0;
  int grid_w = 0;

  std::int64_t m() const { return vectors.dim(0); }
  std::int64_t s() const { return vectors.dim(1); }
};

template <typename T>
struct Conv {
  Tensor<T> w;  // [O, C, k, k]
  Tensor<T> b;  // [O]
};

template <typename T>
struct ResBlock {
  Conv<T> c1, c2;
};

/// Stride-1 feature extractor: head conv (3 -> C) followed by residual
/// blocks (conv-LeakyReLU-conv plus skip); spatial size preserved.
template <typename T>
struct Encoder {
  Conv<T> head;
  std::vector<ResBlock<T>> blocks;
};

template <typename T>
struct ProjectionHead {
  Tensor<T> w1, b1;  // [C, C], [C]
  Tensor<T> w2, b2;  // [C, S], [S]
};

/// Feature-map to image decoder. Runs its residual blocks at 1/scale
/// resolution: space-to-depth fold, fuse conv, blocks, channel expansion,
/// pixel_shuffle back up, output conv to RGB.
template <typename T>
struct Decoder {
  Conv<T> fuse;    // [C, C*s^2, 3, 3]
  std::vector<ResBlock<T>> blocks;
  Conv<T> expand;  // [C*s^2, C, 3, 3]
  Conv<T> out;     // [3, C, 3, 3]
};

template <typename T>
struct Model {
  NetConfig cfg;
  Encoder<T> enc_l, enc_h;  // twin decoupling encoders (separate weights)
  ProjectionHead<T> proj_l, proj_h;
  Decoder<T> dec_ref;
  Encoder<T> feat_enc;  // one weight set, applied to both HR and SR images
  ProjectionHead<T> proj_f;
  Decoder<T> dec_rec;

  /// Stable-ordered (name, tensor) view of every parameter.
  std::vector<std::pair<std::string, Tensor<T>>> named_params();
  std::vector<Tensor<T>> params();
  std::int64_t param_count();
  void set_requires_grad(bool v);
  void zero_grad();
};

// ---------------------------------------------------------------------------
// Construction / initialization
// ---------------------------------------------------------------------------

namespace netinit {

// Kaiming fan-in normal for LeakyReLU: std = sqrt(2 / (1 + slope^2)) / sqrt(fan_in).
template <typename T>
Tensor<T> conv_weight(int out_c, int in_c, int k, double slope, Rng& rng) {
  const double fan_in = static_cast<double>(in_c) * k * k;
  const double stddev = std::sqrt(2.0 / (1.0 + slope * slope)) / std::sqrt(fan_in);
  Tensor<T> w = Tensor<T>::zeros({out_c, in_c, k, k});
  for (auto& v : w.data()) v = static_cast<T>(rng.next_normal() * stddev);
  return w;
}

template <typename T>
Tensor<T> linear_weight(int in_f, int out_f, double slope, Rng& rng) {
  const double stddev = std::sqrt(2.0 / (1.0 + slope * slope)) / std::sqrt(in_f);
  Tensor<T> w = Tensor<T>::zeros({in_f, out_f});
  for (auto& v : w.data()) v = static_cast<T>(rng.next_normal() * stddev);
  return w;
}

template <typename T>
Conv<T> conv(int out_c, int in_c, int k, double slope, Rng& rng) {
  return {conv_weight<T>(out_c, in_c, k, slope, rng), Tensor<T>::zeros({out_c})};
}

}  // namespace netinit

template <typename T>
Encoder<T> make_encoder(const NetConfig& cfg, Rng& rng) {
  Encoder<T> e;
  e.head = netinit::conv<T>(cfg.channels, 3, 3, cfg.leaky_slope, rng);
  for (int i = 0; i < cfg.num_blocks; ++i)
    e.blocks.push_back({netinit::conv<T>(cfg.channels, cfg.channels, 3, cfg.leaky_slope, rng),
                        netinit::conv<T>(cfg.channels, cfg.channels, 3, cfg.leaky_slope, rng)});
  return e;
}

template <typename T>
ProjectionHead<T> make_projection_head(const NetConfig& cfg, Rng& rng) {
  ProjectionHead<T> p;
  p.w1 = netinit::linear_weight<T>(cfg.channels, cfg.channels, cfg.leaky_slope, rng);
  p.b1 = Tensor<T>::zeros({cfg.channels});
  p.w2 = netinit::linear_weight<T>(cfg.channels, cfg.proj_dim, cfg.leaky_slope, rng);
  p.b2 = Tensor<T>::zeros({cfg.proj_dim});
  return p;
}

template <typename T>
Decoder<T> make_decoder(const NetConfig& cfg, Rng& rng) {
  const int folded = cfg.channels * cfg.scale * cfg.scale;
  Decoder<T> d;
  d.fuse = netinit::conv<T>(cfg.channels, folded, 3, cfg.leaky_slope, rng);
  for (int i = 0; i < cfg.num_blocks; ++i)
    d.blocks.push_back({netinit::conv<T>(cfg.channels, cfg.channels, 3, cfg.leaky_slope, rng),
                        netinit::conv<T>(cfg.channels, cfg.channels, 3, cfg.leaky_slope, rng)});
  d.expand = netinit::conv<T>(folded, cfg.channels, 3, cfg.leaky_slope, rng);
  d.out = netinit::conv<T>(3, cfg.channels, 3, cfg.leaky_slope, rng);
  return d;
}

template <typename T>
Model<T> make_model(const NetConfig& cfg, Rng& rng) {
  cfg.validate();
  Model<T> m;
  m.cfg = cfg;
  m.enc_l = make_encoder<T>(cfg, rng);
  m.enc_h = make_encoder<T>(cfg, rng);
  m.proj_l = make_projection_head<T>(cfg, rng);
  m.proj_h = make_projection_head<T>(cfg, rng);
  m.dec_ref = make_decoder<T>(cfg, rng);
  m.feat_enc = make_encoder<T>(cfg, rng);
  m.proj_f = make_projection_head<T>(cfg, rng);
  m.dec_rec = make_decoder<T>(cfg, rng);
  return m;
}

// ---------------------------------------------------------------------------
// Parameter registry
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
void collect(std::vector<std::pair<std::string, Tensor<T>>>& out, const std::string& prefix,
             Conv<T>& c) {
  out.emplace_back(prefix + ".w", c.w);
  out.emplace_back(prefix + ".b", c.b);
}

template <typename T>
void collect(std::vector<std::pair<std::string, Tensor<T>>>& out, const std::string& prefix,
             Encoder<T>& e) {
  collect(out, prefix + ".head", e.head);
  for (std::size_t i = 0; i < e.blocks.size(); ++i) {
    collect(out, prefix + ".b" + std::to_string(i) + ".c1", e.blocks[i].c1);
    collect(out, prefix + ".b" + std::to_string(i) + ".c2", e.blocks[i].c2);
  }
}

template <typename T>
void collect(std::vector<std::pair<std::string, Tensor<T>>>& out, const std::string& prefix,
             ProjectionHead<T>& p) {
  out.emplace_back(prefix + ".w1", p.w1);
  out.emplace_back(prefix + ".b1", p.b1);
  out.emplace_back(prefix + ".w2", p.w2);
  out.emplace_back(prefix + ".b2", p.b2);
}

template <typename T>
void collect(std::vector<std::pair<std::string, Tensor<T>>>& out, const std::string& prefix,
             Decoder<T>& d) {
  collect(out, prefix + ".fuse", d.fuse);
  for (std::size_t i = 0; i < d.blocks.size(); ++i) {
    collect(out, prefix + ".b" + std::to_string(i) + ".c1", d.blocks[i].c1);
    collect(out, prefix + ".b" + std::to_string(i) + ".c2", d.blocks[i].c2);
  }
  collect(out, prefix + ".expand", d.expand);
  collect(out, prefix + ".out", d.out);
}

}  // namespace detail

template <typename T>
std::vector<std::pair<std::string, Tensor<T>>> Model<T>::named_params() {
  std::vector<std::pair<std::string, Tensor<T>>> out;
  detail::collect(out, "enc_l", enc_l);
  detail::collect(out, "enc_h", enc_h);
  detail::collect(out, "proj_l", proj_l);
  detail::collect(out, "proj_h", proj_h);
  detail::collect(out, "dec_ref", dec_ref);
  detail::collect(out, "feat", feat_enc);
  detail::collect(out, "proj_f", proj_f);
  detail::collect(out, "dec_rec", dec_rec);
  return out;
}

template <typename T>
std::vector<Tensor<T>> Model<T>::params() {
  std::vector<Tensor<T>> out;
  for (auto& [name, t] : named_params()) out.push_back(t);
  return out;
}

template <typename T>
std::int64_t Model<T>::param_count() {
  std::int64_t n = 0;
  for (auto& [name, t] : named_params()) n += t.numel();
  return n;
}

template <typename T>
void Model<T>::set_requires_grad(bool v) {
  for (auto& [name, t] : named_params()) t.set_requires_grad(v);
}

template <typename T>
void Model<T>::zero_grad() {
  for (auto& [name, t] : named_params()) t.zero_grad();
}

// ---------------------------------------------------------------------------
// Forward passes
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> res_block_forward(const ResBlock<T>& b, const Tensor<T>& x, double slope) {
  Tensor<T> h = conv2d(x, b.c1.w, b.c1.b, 1);
  h = leaky_relu(h, slope);
  h = conv2d(h, b.c2.w, b.c2.b, 1);
  return add(x, h);
}

/// Image tensor [1,3,H,W] -> feature map [1,C,H,W], spatial size preserved.
template <typename T>
Tensor<T> encode(const Encoder<T>& e, const Tensor<T>& img, double slope) {
  Tensor<T> h = leaky_relu(conv2d(img, e.head.w, e.head.b, 1), slope);
  for (const auto& b : e.blocks) h = res_block_forward(b, h, slope);
  return h;
}

/// Twin encoding of the upsampled-LR and HR images; both inputs must share
/// spatial size and the outputs do too.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> encode_cde(const Model<T>& m, const Tensor<T>& u_l,
                                           const Tensor<T>& i_h) {
  if (u_l.shape() != i_h.shape())
    throw ShapeError("encode_cde: spatial mismatch, axes 2,3 of " + shape_str(u_l.shape()) +
                     " vs " + shape_str(i_h.shape()));
  return {encode(m.enc_l, u_l, m.cfg.leaky_slope), encode(m.enc_h, i_h, m.cfg.leaky_slope)};
}

/// Flattens a [1,C,h,w] map to M = h*w rows, applies the two-layer MLP, and
/// l2-normalizes each row.
template <typename T>
FeatureSet<T> project(const Tensor<T>& fmap, const ProjectionHead<T>& head,
                      FeatureOrigin origin, double slope, double epsilon = 1e-8) {
  if (fmap.rank() != 4 || fmap.dim(0) != 1)
    throw ShapeError("project: expected [1,C,h,w] map, got " + shape_str(fmap.shape()));
  const std::int64_t c = fmap.dim(1), h = fmap.dim(2), w = fmap.dim(3);
  Tensor<T> rows = transpose2d(reshape(fmap, {c, h * w}));  // [M, C]
  Tensor<T> z = add_bias_rows(matmul(rows, head.w1), head.b1);
  z = leaky_relu(z, slope);
  z = add_bias_rows(matmul(z, head.w2), head.b2);
  FeatureSet<T> fs;
  fs.vectors = l2_normalize_rows(z, epsilon);
  fs.origin = origin;
  fs.grid_h = static_cast<int>(h);
  fs.grid_w = static_cast<int>(w);
  return fs;
}

/// Decoder core shared by refine/reconstruct; in [1,C,H,W] -> image [1,3,H,W]
/// with the residual blocks running at H/scale x W/scale.
template <typename T>
Tensor<T> decode(const Decoder<T>& d, const Tensor<T>& fmap, int scale, double slope) {
  Tensor<T> h = pixel_unshuffle(fmap, scale);
  h = leaky_relu(conv2d(h, d.fuse.w, d.fuse.b, 1), slope);
  for (const auto& b : d.blocks) h = res_block_forward(b, h, slope);
  h = conv2d(h, d.expand.w, d.expand.b, 1);
  h = pixel_shuffle(h, scale);
  return conv2d(h, d.out.w, d.out.b, 1);
}

/// D_ref: resolution-invariant feature map -> SR image (not clipped; clipping
/// happens at save time only).
template <typename T>
Tensor<T> refine(const Model<T>& m, const Tensor<T>& fmap_l) {
  return decode(m.dec_ref, fmap_l, m.cfg.scale, m.cfg.leaky_slope);
}

/// E_f: image -> feature map. One weight set serves both the HR and SR calls.
template <typename T>
Tensor<T> feat(const Model<T>& m, const Tensor<T>& img) {
  return encode(m.feat_enc, img, m.cfg.leaky_slope);
}

/// D_rec: E_f feature map -> reconstructed image.
template <typename T>
Tensor<T> reconstruct(const Model<T>& m, const Tensor<T>& fmap) {
  return decode(m.dec_rec, fmap, m.cfg.scale, m.cfg.leaky_slope);
}

// ---------------------------------------------------------------------------
// Image <-> tensor bridging and inference
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> image_to_tensor(const ImageRgb& img) {
  Tensor<T> t = Tensor<T>::zeros({1, 3, img.height, img.width});
  for (std::size_t i = 0; i < img.data.size(); ++i) t[static_cast<std::int64_t>(i)] = static_cast<T>(img.data[i]);
  return t;
}

template <typename T>
ImageRgb tensor_to_image(const Tensor<T>& t) {
  if (t.rank() != 4 || t.dim(0) != 1 || t.dim(1) != 3)
    throw ShapeError("tensor_to_image: expected [1,3,H,W], got " + shape_str(t.shape()));
  ImageRgb img(static_cast<int>(t.dim(2)), static_cast<int>(t.dim(3)));
  for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = static_cast<double>(t[static_cast<std::int64_t>(i)]);
  return img;
}

/// Inference path: bicubic-upsample the LR input, encode with enc_l, decode
/// with dec_ref. Touches no training-only submodule (enc_h, heads, feat_enc,
/// dec_rec). Output is at scale x the LR size and is not clipped.
template <typename T>
Tensor<T> forward_infer(const Model<T>& m, const ImageRgb& lr) {
  const ImageRgb up = bicubic_resize(lr, m.cfg.scale, ResizeDir::up);
  Tensor<T> u_l = image_to_tensor<T>(up);
  Tensor<T> fmap = encode(m.enc_l, u_l, m.cfg.leaky_slope);
  return refine(m, fmap);
}

// ---------------------------------------------------------------------------
// Checkpoint I/O
// ---------------------------------------------------------------------------
//
// Binary layout (little-endian):
//   8 bytes   magic "CSRCKPT1"
//   u32       version (1)
//   u32       flags (bit 0: optimizer state present)
//   u64       header JSON length, then that many bytes of JSON:
//               {"schema_version":1, "net":{...}, "step":n,
//                "rng_state":["0x..","0x..","0x..","0x.."], "seed":"0x.."}
//   u32       parameter count; per parameter:
//               u16 name length, name bytes,
//               u8 dtype (0 = f32, 1 = f64), u8 rank, i64 dims[rank],
//               raw values
//   if flags&1: u64 adam step, then per parameter in the same order:
//               raw m values, raw v values (same dtype/shape as the parameter)

struct CheckpointMeta {
  long step = 0;
  std::uint64_t seed = 0;
  std::array<std::uint64_t, 4> rng_state = {0, 0, 0, 0};
  bool has_optimizer = false;
  long adam_step = 0;
};

namespace detail {

inline void write_raw(std::ofstream& out, const void* p, std::size_t n) {
  out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

inline void read_raw(std::ifstream& in, void* p, std::size_t n, const std::string& path) {
  in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (!in) throw IoError("checkpoint truncated: " + path);
}

template <typename U>
void write_pod(std::ofstream& out, U v) {
  write_raw(out, &v, sizeof(U));
}

template <typename U>
U read_pod(std::ifstream& in, const std::string& path) {
  U v;
  read_raw(in, &v, sizeof(U), path);
  return v;
}

inline std::string hex_u64(std::uint64_t v) {
  std::ostringstream os;
  os << "0x" << std::hex << v;
  return os.str();
}

inline std::uint64_t parse_u64(const std::string& s) {
  return std::stoull(s, nullptr, 0);
}

}  // namespace detail

template <typename T>
constexpr std::uint8_t dtype_code() {
  return sizeof(T) == 4 ? 0 : 1;
}

template <typename T>
void save_checkpoint(const std::string& path, Model<T>& model, const CheckpointMeta& meta,
                     const std::vector<std::vector<T>>* adam_m = nullptr,
                     const std::vector<std::vector<T>>* adam_v = nullptr) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path);
  out.write("CSRCKPT1", 8);
  detail::write_pod<std::uint32_t>(out, 1);
  const bool with_optimizer = adam_m != nullptr && adam_v != nullptr;
  detail::write_pod<std::uint32_t>(out, with_optimizer ? 1u : 0u);

  nlohmann::json header;
  header["schema_version"] = 1;
  header["net"] = model.cfg.to_json();
  header["step"] = meta.step;
  header["seed"] = detail::hex_u64(meta.seed);
  header["rng_state"] = {detail::hex_u64(meta.rng_state[0]), detail::hex_u64(meta.rng_state[1]),
                         detail::hex_u64(meta.rng_state[2]), detail::hex_u64(meta.rng_state[3])};
  const std::string hs = header.dump();
  detail::write_pod<std::uint64_t>(out, hs.size());
  out.write(hs.data(), static_cast<std::streamsize>(hs.size()));

  auto named = model.named_params();
  detail::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(named.size()));
  for (auto& [name, t] : named) {
    detail::write_pod<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::write_pod<std::uint8_t>(out, dtype_code<T>());
    detail::write_pod<std::uint8_t>(out, static_cast<std::uint8_t>(t.rank()));
    for (int d = 0; d < t.rank(); ++d) detail::write_pod<std::int64_t>(out, t.dim(d));
    detail::write_raw(out, t.data().data(), t.data().size() * sizeof(T));
  }
  if (with_optimizer) {
    detail::write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(meta.adam_step));
    for (std::size_t i = 0; i < named.size(); ++i) {
      detail::write_raw(out, (*adam_m)[i].data(), (*adam_m)[i].size() * sizeof(T));
      detail::write_raw(out, (*adam_v)[i].data(), (*adam_v)[i].size() * sizeof(T));
    }
  }
  if (!out) throw IoError("write failed for checkpoint " + path);
}

template <typename T>
Model<T> load_checkpoint(const std::string& path, CheckpointMeta& meta,
                         std::vector<std::vector<T>>* adam_m = nullptr,
                         std::vector<std::vector<T>>* adam_v = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path);
  char magic[8];
  detail::read_raw(in, magic, 8, path);
  if (std::memcmp(magic, "CSRCKPT1", 8) != 0)
    throw IoError("not a checkpoint file (bad magic): " + path);
  const auto version = detail::read_pod<std::uint32_t>(in, path);
  if (version != 1) throw IoError("unsupported checkpoint version " + std::to_string(version));
  const auto flags = detail::read_pod<std::uint32_t>(in, path);
  const auto hlen = detail::read_pod<std::uint64_t>(in, path);
  std::string hs(hlen, '\0');
  detail::read_raw(in, hs.data(), hlen, path);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(hs);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("corrupt checkpoint header in " + path + ": " + e.what());
  }
  const NetConfig cfg = NetConfig::from_json(header.at("net"));
  meta.step = header.value("step", 0L);
  meta.seed = detail::parse_u64(header.value("seed", std::string("0")));
  if (header.contains("rng_state"))
    for (int i = 0; i < 4; ++i)
      meta.rng_state[static_cast<std::size_t>(i)] =
          detail::parse_u64(header["rng_state"][static_cast<std::size_t>(i)].get<std::string>());
  meta.has_optimizer = (flags & 1u) != 0;

  Rng init_rng(0);
  Model<T> model = make_model<T>(cfg, init_rng);
  auto named = model.named_params();
  const auto count = detail::read_pod<std::uint32_t>(in, path);
  if (count != named.size())
    throw IoError("checkpoint parameter count " + std::to_string(count) + " != expected " +
                  std::to_string(named.size()));
  for (auto& [name, t] : named) {
    const auto nlen = detail::read_pod<std::uint16_t>(in, path);
    std::string fname(nlen, '\0');
    detail::read_raw(in, fname.data(), nlen, path);
    if (fname != name)
      throw IoError("checkpoint parameter order mismatch: got " + fname + ", expected " + name);
    const auto dtype = detail::read_pod<std::uint8_t>(in, path);
    if (dtype != dtype_code<T>())
      throw IoError("checkpoint dtype mismatch for " + name);
    const auto rank = detail::read_pod<std::uint8_t>(in, path);
    Shape shape(rank);
    for (int d = 0; d < rank; ++d) shape[static_cast<std::size_t>(d)] = detail::read_pod<std::int64_t>(in, path);
    if (shape != t.shape())
      throw IoError("checkpoint shape mismatch for " + name + ": " + shape_str(shape) +
                    " vs " + shape_str(t.shape()));
    detail::read_raw(in, t.data().data(), t.data().size() * sizeof(T), path);
  }
  if (meta.has_optimizer && adam_m && adam_v) {
    meta.adam_step = static_cast<long>(detail::read_pod<std::uint64_t>(in, path));
    adam_m->resize(named.size());
    adam_v->resize(named.size());
    for (std::size_t i = 0; i < named.size(); ++i) {
      (*adam_m)[i].resize(named[i].second.data().size());
      (*adam_v)[i].resize(named[i].second.data().size());
      detail::read_raw(in, (*adam_m)[i].data(), (*adam_m)[i].size() * sizeof(T), path);
      detail::read_raw(in, (*adam_v)[i].data(), (*adam_v)[i].size() * sizeof(T), path);
    }
  }
  return model;
}

}  // namespace csr
