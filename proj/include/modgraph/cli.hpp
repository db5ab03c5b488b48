#pragma once

#include "modgraph/network.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

namespace modgraph::cli {

/// Resolves a dataset name.
///   "random"         -> make_random_dataset(examples, 784, 10, seed)
///   "<name>"         -> <data_dir>/<name>/train-{images-idx3,labels-idx1}-ubyte[.gz]
///   "<name>-test"    -> the same directory, t10k-* files
/// `examples` > 0 truncates file-backed datasets to their first rows.
/// Throws IoError when the files cannot be found.
Dataset resolve_dataset(const std::string& name, const std::filesystem::path& data_dir,
                        int examples, std::uint64_t seed);

/// Runs the command line. Returns the process exit status.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace modgraph::cli
