#include "modgraph/netio.hpp"

#include "modgraph/errors.hpp"

#include <json.hpp>
#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

namespace modgraph {

namespace {

using json = nlohmann::json;

void put_u32_le(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32_le(std::string& out, double v) {
  put_u32_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  std::size_t offset() const { return pos_; }

  const char* take(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(std::string("truncated archive while reading ") + what,
                        pos_);
    }
    const char* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }

  std::uint32_t u32_le(const char* what) {
    const auto* p = reinterpret_cast<const unsigned char*>(take(4, what));
    return std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) |
           (std::uint32_t{p[2]} << 16) | (std::uint32_t{p[3]} << 24);
  }

  double f32_le(const char* what) { return std::bit_cast<float>(u32_le(what)); }

  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("read failed for " + path.string());
  return buf.str();
}

// zlib's gzread passes uncompressed files through unchanged.
std::string read_maybe_gzipped(const std::filesystem::path& path) {
  gzFile f = gzopen(path.string().c_str(), "rb");
  if (f == nullptr) throw IoError("cannot open " + path.string());
  std::string out;
  char chunk[1 << 16];
  int n = 0;
  while ((n = gzread(f, chunk, sizeof chunk)) > 0) out.append(chunk, n);
  const bool failed = n < 0;
  gzclose(f);
  if (failed) throw IoError("decompression failed for " + path.string());
  return out;
}

std::uint32_t be32(const std::string& bytes, std::size_t offset) {
  if (bytes.size() < offset + 4) {
    throw FormatError("truncated IDX header", bytes.size());
  }
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + offset);
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) |
         (std::uint32_t{p[2]} << 8) | std::uint32_t{p[3]};
}

}  // namespace

std::string encode_archive(const LayeredNetwork& net) {
  net.validate();
  const json header = {{"layer_dims", net.layer_dims},
                       {"has_biases", net.has_biases()}};
  const std::string header_text = header.dump();

  std::string out(kArchiveMagic, sizeof kArchiveMagic);
  put_u32_le(out, kArchiveVersion);
  put_u32_le(out, static_cast<std::uint32_t>(header_text.size()));
  out += header_text;
  for (const auto& w : net.weights) {
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) put_f32_le(out, w(i, j));
    }
  }
  for (const auto& b : net.biases) {
    for (Eigen::Index i = 0; i < b.size(); ++i) put_f32_le(out, b(i));
  }
  return out;
}

LayeredNetwork decode_archive(const std::string& bytes) {
  Reader in(bytes);
  const char* magic = in.take(sizeof kArchiveMagic, "magic");
  if (std::memcmp(magic, kArchiveMagic, sizeof kArchiveMagic) != 0) {
    throw FormatError("bad magic, not a MODGRAPH archive", 0);
  }
  const std::size_t version_at = in.offset();
  const std::uint32_t version = in.u32_le("version");
  if (version != kArchiveVersion) {
    throw FormatError("unsupported archive version " + std::to_string(version),
                      version_at);
  }
  const std::uint32_t header_len = in.u32_le("header length");
  const std::size_t header_at = in.offset();
  const char* header_ptr = in.take(header_len, "header");

  LayeredNetwork net;
  bool has_biases = false;
  try {
    const json header = json::parse(header_ptr, header_ptr + header_len);
    net.layer_dims = header.at("layer_dims").get<std::vector<int>>();
    has_biases = header.at("has_biases").get<bool>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed JSON header: ") + e.what(),
                      header_at);
  }
  if (net.layer_dims.size() < 2) {
    throw ValidationError("archive declares fewer than two layers");
  }
  for (std::size_t l = 0; l < net.layer_dims.size(); ++l) {
    if (net.layer_dims[l] <= 0) {
      throw ValidationError("archive layer " + std::to_string(l) +
                            " has non-positive width");
    }
  }

  const int layers = static_cast<int>(net.layer_dims.size()) - 1;
  for (int l = 0; l < layers; ++l) {
    const std::size_t count =
        std::size_t(net.layer_dims[l]) * std::size_t(net.layer_dims[l + 1]);
    if ((bytes.size() - in.offset()) / 4 < count) {
      throw FormatError("weight layer " + std::to_string(l) +
                            " runs past the end of the archive",
                        in.offset());
    }
    Eigen::MatrixXd w(net.layer_dims[l], net.layer_dims[l + 1]);
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = in.f32_le("weights");
    }
    net.weights.push_back(std::move(w));
  }
  if (has_biases) {
    for (int l = 0; l < layers; ++l) {
      Eigen::VectorXd b(net.layer_dims[l + 1]);
      for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = in.f32_le("biases");
      net.biases.push_back(std::move(b));
    }
  }
  if (!in.at_end()) {
    throw FormatError("trailing bytes after the last tensor", in.offset());
  }
  net.validate();
  return net;
}

LayeredNetwork load_archive(const std::filesystem::path& path) {
  return decode_archive(read_file(path));
}

void save_archive(const LayeredNetwork& net, const std::filesystem::path& path) {
  const std::string bytes = encode_archive(net);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.close();
  if (!out) throw IoError("write failed for " + path.string());
}

Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path, int num_classes) {
  const std::string images = read_maybe_gzipped(images_path);
  const std::string labels = read_maybe_gzipped(labels_path);

  if (be32(images, 0) != 0x00000803) {
    throw FormatError(images_path.string() + ": wrong IDX3 magic", 0);
  }
  if (be32(labels, 0) != 0x00000801) {
    throw FormatError(labels_path.string() + ": wrong IDX1 magic", 0);
  }
  const std::uint32_t n_images = be32(images, 4);
  const std::uint32_t rows = be32(images, 8);
  const std::uint32_t cols = be32(images, 12);
  const std::uint32_t n_labels = be32(labels, 4);
  if (n_images != n_labels) {
    throw ValidationError("IDX count mismatch: " + std::to_string(n_images) +
                          " images vs " + std::to_string(n_labels) + " labels");
  }
  const std::size_t dim = std::size_t{rows} * cols;
  if (images.size() < 16 + dim * n_images) {
    throw FormatError(images_path.string() + ": truncated pixel data",
                      images.size());
  }
  if (labels.size() < 8 + std::size_t{n_labels}) {
    throw FormatError(labels_path.string() + ": truncated label data",
                      labels.size());
  }

  Dataset data;
  data.num_classes = num_classes;
  data.images.resize(n_images, static_cast<Eigen::Index>(dim));
  const auto* px = reinterpret_cast<const unsigned char*>(images.data() + 16);
  for (std::size_t i = 0; i < std::size_t{n_images}; ++i) {
    for (std::size_t j = 0; j < dim; ++j) {
      data.images(i, j) = static_cast<float>(px[i * dim + j]) / 255.0f;
    }
  }
  const auto* lb = reinterpret_cast<const unsigned char*>(labels.data() + 8);
  data.labels.assign(lb, lb + n_labels);
  data.validate();
  return data;
}

Dataset make_random_dataset(int num_examples, int input_dim, int num_classes,
                            std::uint64_t seed) {
  if (num_examples <= 0 || input_dim <= 0 || num_classes <= 0) {
    throw ContractViolation("random dataset sizes must be positive");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> pixel(0.0f, 1.0f);
  std::uniform_int_distribution<int> label(0, num_classes - 1);
  Dataset data;
  data.num_classes = num_classes;
  data.images.resize(num_examples, input_dim);
  data.labels.resize(num_examples);
  for (int i = 0; i < num_examples; ++i) {
    for (int j = 0; j < input_dim; ++j) data.images(i, j) = pixel(rng);
    data.labels[i] = label(rng);
  }
  return data;
}

}  // namespace modgraph
