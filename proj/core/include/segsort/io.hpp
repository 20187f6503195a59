// SPDX-License-Identifier: Apache-2.0
//
// Fixed-layout little-endian file formats.
//
//   Embedding file ("SGEM"):
//     magic[4] | version u16 | height u32 | width u32 | dim u16 |
//     payload: H*W*dim f32, row-major, pixel-major
//     The low byte of `version` is the format revision (1); bit 8 (0x0100)
//     marks a raw, non-normalized feature payload.
//
//   Map file ("SGLB"):
//     magic[4] | version u16 | height u32 | width u32 | payload: H*W u16
//     65535 is the ignore / unassigned id.
//
//   Prototype store ("SGPS"):
//     magic[4] | version u16 | count u32 | dim u16 |
//     count x { vector dim*f32 | image_id u32 | segment_id u32 |
//               label u16 (65535 = unlabeled) | pixel_count u32 }
//
//   Embedder checkpoint ("SGCK"):
//     magic[4] | version u16 | input_dim u16 | hidden u16 | embed_dim u16 |
//     param_count u32 | params param_count*f32

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <ostream>

#include "segsort/embedder.hpp"
#include "segsort/retrieval.hpp"
#include "segsort/types.hpp"

namespace segsort::io {

inline constexpr std::uint16_t kFormatVersion = 1;
inline constexpr std::uint16_t kRawPayloadFlag = 0x0100;

struct EmbFile {
  FeatureGrid grid;
  bool raw = false;
  /// Unit payloads whose norm was off by more than 1e-4 and got re-normalized.
  std::size_t renormalized = 0;
};

void write_emb(std::ostream& out, const FeatureGrid& grid, bool raw);
void write_emb(std::ostream& out, const EmbeddingMap& map);
EmbFile read_emb(std::istream& in);

struct MapFile {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint16_t> values;
};

void write_map(std::ostream& out, const MapFile& map);
MapFile read_map(std::istream& in);

MapFile to_map_file(const LabelMap& labels);
MapFile to_map_file(const Segmentation& seg);
LabelMap to_label_map(const MapFile& map);
/// Compacts ids; throws FormatError if any pixel carries 65535.
Segmentation to_segmentation(const MapFile& map);

void write_store(std::ostream& out, const PrototypeStore& store);
PrototypeStore read_store(std::istream& in);

void write_checkpoint(std::ostream& out, const ToyEmbedder& model);
ToyEmbedder read_checkpoint(std::istream& in);

// Path helpers; throw FormatError when the file cannot be opened.
void save_emb(const std::filesystem::path& path, const FeatureGrid& grid, bool raw);
EmbFile load_emb(const std::filesystem::path& path);
void save_map(const std::filesystem::path& path, const MapFile& map);
MapFile load_map(const std::filesystem::path& path);
void save_store(const std::filesystem::path& path, const PrototypeStore& store);
PrototypeStore load_store(const std::filesystem::path& path);
void save_checkpoint(const std::filesystem::path& path, const ToyEmbedder& model);
ToyEmbedder load_checkpoint(const std::filesystem::path& path);

}  // namespace segsort::io
