#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace bpl {

// On-disk container used by checkpoints and saved basis sets: a JSON header
// followed by named little-endian f64 blocks. Round-trips are bit-exact.
//
//   "BPLC" | container version u32 | header length u64 | header JSON (UTF-8)
//   block count u64
//   per block: name length u64 | name | value count u64 | values f64le...
struct BlockFile {
  nlohmann::json header;
  std::vector<std::pair<std::string, std::vector<double>>> blocks;

  const std::vector<double>& block(const std::string& name) const;
  bool has_block(const std::string& name) const;
};

void write_block_file(const std::filesystem::path& path, const BlockFile& file);
BlockFile read_block_file(const std::filesystem::path& path);

}  // namespace bpl
