// SPDX-License-Identifier: Apache-2.0

#include "segsort/io.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <string_view>

namespace segsort::io {

namespace {

constexpr std::string_view kEmbMagic = "SGEM";
constexpr std::string_view kMapMagic = "SGLB";
constexpr std::string_view kStoreMagic = "SGPS";
constexpr std::string_view kCheckpointMagic = "SGCK";
constexpr std::uint16_t kUnlabeled = 65535;

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void magic(std::string_view m) { out_.write(m.data(), static_cast<std::streamsize>(m.size())); }
  void u16(std::uint16_t v) { bytes(v, 2); }
  void u32(std::uint32_t v) { bytes(v, 4); }
  void f32(double v) { u32(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }
  void finish() {
    if (!out_) throw FormatError("write failed");
  }

 private:
  void bytes(std::uint64_t v, int n) {
    std::array<char, 8> buf{};
    for (int i = 0; i < n; ++i) buf[static_cast<std::size_t>(i)] = static_cast<char>((v >> (8 * i)) & 0xFF);
    out_.write(buf.data(), n);
  }
  std::ostream& out_;
};

class Reader {
 public:
  Reader(std::istream& in, std::string_view what) : in_(in), what_(what) {}

  void magic(std::string_view m) {
    std::array<char, 4> buf{};
    raw(buf.data(), 4);
    if (std::string_view(buf.data(), 4) != m) fail("bad magic");
  }
  std::uint16_t u16() { return static_cast<std::uint16_t>(bytes(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(bytes(4)); }
  double f32() { return static_cast<double>(std::bit_cast<float>(u32())); }
  // Fails before allocating when the header promises more payload than the
  // stream holds. Overflowing products count as too large.
  void require(std::initializer_list<std::uint64_t> factors) {
    std::uint64_t need = 1;
    for (auto f : factors) {
      if (f != 0 && need > std::numeric_limits<std::uint64_t>::max() / f) fail("truncated");
      need *= f;
    }
    const auto here = in_.tellg();
    if (here < 0) return;
    in_.seekg(0, std::ios::end);
    const auto end = in_.tellg();
    in_.seekg(here);
    if (end >= here && static_cast<std::uint64_t>(end - here) < need) fail("truncated");
  }
  void expect_end() {
    if (in_.peek() != std::char_traits<char>::eof()) fail("trailing bytes after payload");
  }
  [[noreturn]] void fail(const std::string& why) const {
    throw FormatError(std::string(what_) + ": " + why);
  }

 private:
  void raw(char* dst, std::streamsize n) {
    in_.read(dst, n);
    if (in_.gcount() != n) fail("truncated");
  }
  std::uint64_t bytes(int n) {
    std::array<unsigned char, 8> buf{};
    raw(reinterpret_cast<char*>(buf.data()), n);
    std::uint64_t v = 0;
    for (int i = n - 1; i >= 0; --i) v = (v << 8) | buf[static_cast<std::size_t>(i)];
    return v;
  }
  std::istream& in_;
  std::string_view what_;
};

std::uint16_t checked_u16(std::size_t v, const char* what) {
  if (v > 65535) throw FormatError(std::string(what) + " does not fit in 16 bits");
  return static_cast<std::uint16_t>(v);
}

std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v > 0xFFFFFFFFull) throw FormatError(std::string(what) + " does not fit in 32 bits");
  return static_cast<std::uint32_t>(v);
}

template <typename Fn>
auto with_input(const std::filesystem::path& path, Fn fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return fn(in);
}

template <typename Fn>
void with_output(const std::filesystem::path& path, Fn fn) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot create " + path.string());
  fn(out);
  out.flush();
  if (!out) throw FormatError("write failed for " + path.string());
}

}  // namespace

void write_emb(std::ostream& out, const FeatureGrid& grid, bool raw) {
  Writer w(out);
  w.magic(kEmbMagic);
  w.u16(static_cast<std::uint16_t>(kFormatVersion | (raw ? kRawPayloadFlag : 0)));
  w.u32(checked_u32(grid.height, "height"));
  w.u32(checked_u32(grid.width, "width"));
  w.u16(checked_u16(grid.dim, "dim"));
  for (double v : grid.values) w.f32(v);
  w.finish();
}

void write_emb(std::ostream& out, const EmbeddingMap& map) {
  FeatureGrid grid(map.height(), map.width(), map.dim());
  grid.values = map.data();
  write_emb(out, grid, false);
}

EmbFile read_emb(std::istream& in) {
  Reader r(in, "embedding file");
  r.magic(kEmbMagic);
  const std::uint16_t version = r.u16();
  if ((version & 0xFF) != kFormatVersion || (version & ~(0xFF | kRawPayloadFlag)) != 0) {
    r.fail("unsupported version " + std::to_string(version));
  }
  EmbFile file;
  file.raw = (version & kRawPayloadFlag) != 0;
  const std::size_t h = r.u32();
  const std::size_t w = r.u32();
  const std::size_t d = r.u16();
  if (h == 0 || w == 0 || d == 0) r.fail("empty shape");
  r.require({h, w, d, 4});
  file.grid = FeatureGrid(h, w, d);
  for (double& v : file.grid.values) v = r.f32();
  r.expect_end();
  if (!file.raw) {
    for (std::size_t i = 0; i < file.grid.pixels(); ++i) {
      auto px = file.grid.pixel(i);
      const double n = norm(px);
      if (!(n >= kZeroNormThreshold)) r.fail("zero vector in unit payload");
      if (std::abs(n - 1.0) > 1e-4) {
        for (double& v : px) v /= n;
        ++file.renormalized;
      }
    }
  }
  return file;
}

void write_map(std::ostream& out, const MapFile& map) {
  if (map.values.size() != map.height * map.width) throw FormatError("map payload size mismatch");
  Writer w(out);
  w.magic(kMapMagic);
  w.u16(kFormatVersion);
  w.u32(checked_u32(map.height, "height"));
  w.u32(checked_u32(map.width, "width"));
  for (auto v : map.values) w.u16(v);
  w.finish();
}

MapFile read_map(std::istream& in) {
  Reader r(in, "map file");
  r.magic(kMapMagic);
  if (r.u16() != kFormatVersion) r.fail("unsupported version");
  MapFile map;
  map.height = r.u32();
  map.width = r.u32();
  if (map.height == 0 || map.width == 0) r.fail("empty shape");
  r.require({map.height, map.width, 2});
  map.values.resize(map.height * map.width);
  for (auto& v : map.values) v = r.u16();
  r.expect_end();
  return map;
}

MapFile to_map_file(const LabelMap& labels) {
  return {labels.height, labels.width, labels.labels};
}

MapFile to_map_file(const Segmentation& seg) {
  if (seg.num_segments() > 65535) throw FormatError("too many segments for a map file");
  MapFile map{seg.height(), seg.width(), {}};
  map.values.assign(seg.labels().begin(), seg.labels().end());
  return map;
}

LabelMap to_label_map(const MapFile& map) { return LabelMap(map.height, map.width, map.values); }

Segmentation to_segmentation(const MapFile& map) {
  std::vector<std::uint32_t> ids(map.values.begin(), map.values.end());
  for (auto id : ids) {
    if (id == kUnlabeled) throw FormatError("segmentation map contains the ignore id");
  }
  return Segmentation::compact(map.height, map.width, ids);
}

void write_store(std::ostream& out, const PrototypeStore& store) {
  Writer w(out);
  w.magic(kStoreMagic);
  w.u16(kFormatVersion);
  w.u32(checked_u32(store.size(), "prototype count"));
  w.u16(checked_u16(store.dim(), "dim"));
  for (const auto& p : store.prototypes()) {
    for (double v : p.vector) w.f32(v);
    w.u32(p.image_id);
    w.u32(p.segment_id);
    w.u16(p.label ? *p.label : kUnlabeled);
    w.u32(p.pixel_count);
  }
  w.finish();
}

PrototypeStore read_store(std::istream& in) {
  Reader r(in, "prototype store");
  r.magic(kStoreMagic);
  if (r.u16() != kFormatVersion) r.fail("unsupported version");
  const std::size_t count = r.u32();
  const std::size_t dim = r.u16();
  if (count > 0 && dim < 2) r.fail("dim must be >= 2");
  r.require({count, 4 * dim + 14});
  std::vector<Prototype> protos(count);
  for (auto& p : protos) {
    p.vector.resize(dim);
    for (double& v : p.vector) v = r.f32();
    p.image_id = r.u32();
    p.segment_id = r.u32();
    const std::uint16_t label = r.u16();
    if (label != kUnlabeled) p.label = label;
    p.pixel_count = r.u32();
  }
  r.expect_end();
  try {
    return PrototypeStore(std::move(protos));
  } catch (const Error& e) {
    r.fail(e.what());
  }
}

void write_checkpoint(std::ostream& out, const ToyEmbedder& model) {
  Writer w(out);
  w.magic(kCheckpointMagic);
  w.u16(kFormatVersion);
  w.u16(checked_u16(model.input_dim(), "input_dim"));
  w.u16(checked_u16(model.hidden_units(), "hidden_units"));
  w.u16(checked_u16(model.embed_dim(), "embed_dim"));
  w.u32(checked_u32(model.parameters().size(), "parameter count"));
  for (double v : model.parameters()) w.f32(v);
  w.finish();
}

ToyEmbedder read_checkpoint(std::istream& in) {
  Reader r(in, "checkpoint");
  r.magic(kCheckpointMagic);
  if (r.u16() != kFormatVersion) r.fail("unsupported version");
  const std::size_t input_dim = r.u16();
  const std::size_t hidden = r.u16();
  const std::size_t embed_dim = r.u16();
  const std::size_t count = r.u32();
  if (input_dim < 1 || embed_dim < 2 ||
      count != ToyEmbedder::parameter_count(input_dim, embed_dim, hidden)) {
    r.fail("inconsistent dimensions");
  }
  r.require({count, 4});
  std::vector<double> params(count);
  for (double& v : params) v = r.f32();
  r.expect_end();
  return ToyEmbedder(input_dim, embed_dim, hidden, std::move(params));
}

void save_emb(const std::filesystem::path& path, const FeatureGrid& grid, bool raw) {
  with_output(path, [&](std::ostream& out) { write_emb(out, grid, raw); });
}
EmbFile load_emb(const std::filesystem::path& path) {
  return with_input(path, [](std::istream& in) { return read_emb(in); });
}
void save_map(const std::filesystem::path& path, const MapFile& map) {
  with_output(path, [&](std::ostream& out) { write_map(out, map); });
}
MapFile load_map(const std::filesystem::path& path) {
  return with_input(path, [](std::istream& in) { return read_map(in); });
}
void save_store(const std::filesystem::path& path, const PrototypeStore& store) {
  with_output(path, [&](std::ostream& out) { write_store(out, store); });
}
PrototypeStore load_store(const std::filesystem::path& path) {
  return with_input(path, [](std::istream& in) { return read_store(in); });
}
void save_checkpoint(const std::filesystem::path& path, const ToyEmbedder& model) {
  with_output(path, [&](std::ostream& out) { write_checkpoint(out, model); });
}
ToyEmbedder load_checkpoint(const std::filesystem::path& path) {
  return with_input(path, [](std::istream& in) { return read_checkpoint(in); });
}

}  // namespace segsort::io
