#pragma once

#include "modgraph/network.hpp"

#include <cstdint>
#include <filesystem>
#include <string>

namespace modgraph {

// Layered-network archive (".mg"):
//
//   bytes 0..7   "MODGRAPH"
//   bytes 8..11  format version, uint32 little-endian (= 1)
//   bytes 12..15 header length H, uint32 little-endian
//   next H bytes UTF-8 JSON {"layer_dims": [...], "has_biases": bool}
//   then every weight matrix, row-major float32 little-endian,
//   then (if has_biases) every bias vector, float32 little-endian.
//
// Values are stored as float32. Saving rounds to nearest, so the round-trip
// is exact for networks whose parameters are float-representable (see
// round_to_float); everything produced by this toolkit is.

inline constexpr char kArchiveMagic[8] = {'M', 'O', 'D', 'G',
                                          'R', 'A', 'P', 'H'};
inline constexpr std::uint32_t kArchiveVersion = 1;

LayeredNetwork load_archive(const std::filesystem::path& path);
void save_archive(const LayeredNetwork& net, const std::filesystem::path& path);

/// In-memory variants used by the file functions.
LayeredNetwork decode_archive(const std::string& bytes);
std::string encode_archive(const LayeredNetwork& net);

/// Reads an IDX3 image file and IDX1 label file (optionally gzip-compressed).
/// Pixels are divided by 255 and each image is flattened row-major.
Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path,
                 int num_classes = 10);

/// iid Uniform[0,1] pixels with iid uniform labels; pure in its arguments.
Dataset make_random_dataset(int num_examples, int input_dim, int num_classes,
                            std::uint64_t seed);

}  // namespace modgraph
