#include "bpl/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "bpl/binary_io.hpp"
#include "bpl/errors.hpp"

namespace bpl {

namespace {
constexpr char kMagic[4] = {'B', 'P', 'L', 'C'};
constexpr std::uint32_t kContainerVersion = 1;
}  // namespace

const std::vector<double>& BlockFile::block(const std::string& name) const {
  for (const auto& [block_name, values] : blocks) {
    if (block_name == name) return values;
  }
  throw DataError("block file: missing block '" + name + "'");
}

bool BlockFile::has_block(const std::string& name) const {
  for (const auto& [block_name, values] : blocks) {
    if (block_name == name) return true;
  }
  return false;
}

void write_block_file(const std::filesystem::path& path, const BlockFile& file) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("block file: cannot open " + path.string() + " for writing");

  const std::string header = file.header.dump();
  out.write(kMagic, 4);
  write_u32le(out, kContainerVersion);
  write_u64le(out, header.size());
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  write_u64le(out, file.blocks.size());
  for (const auto& [name, values] : file.blocks) {
    write_u64le(out, name.size());
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u64le(out, values.size());
    for (const double v : values) write_f64le(out, v);
  }
  if (!out) throw DataError("block file: write failed for " + path.string());
}

BlockFile read_block_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("block file: cannot open " + path.string());

  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw DataError("block file: " + path.string() + ": bad magic");
  }
  const std::uint32_t version = read_u32le(in, path.string());
  if (version != kContainerVersion) {
    throw DataError("block file: " + path.string() + ": unsupported container version " +
                    std::to_string(version));
  }

  BlockFile file;
  const std::uint64_t header_len = read_u64le(in, path.string());
  std::string header(header_len, '\0');
  if (!in.read(header.data(), static_cast<std::streamsize>(header_len))) {
    throw DataError("block file: " + path.string() + ": truncated header");
  }
  try {
    file.header = nlohmann::json::parse(header);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError("block file: " + path.string() + ": bad header JSON: " + e.what());
  }

  const std::uint64_t count = read_u64le(in, path.string());
  file.blocks.reserve(count);
  for (std::uint64_t b = 0; b < count; ++b) {
    const std::uint64_t name_len = read_u64le(in, path.string());
    std::string name(name_len, '\0');
    if (!in.read(name.data(), static_cast<std::streamsize>(name_len))) {
      throw DataError("block file: " + path.string() + ": truncated block name");
    }
    const std::uint64_t value_count = read_u64le(in, path.string());
    std::vector<double> values(value_count);
    for (std::uint64_t i = 0; i < value_count; ++i) {
      values[i] = read_f64le(in, path.string());
    }
    file.blocks.emplace_back(std::move(name), std::move(values));
  }
  return file;
}

}  // namespace bpl
