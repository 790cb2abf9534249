#include "mionset/common.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace mionset {

namespace fs = std::filesystem;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error(strfmt("cannot open %s for reading", path.string().c_str()));
  }
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) {
    throw std::runtime_error(strfmt("read error on %s", path.string().c_str()));
  }
  return bytes;
}

void write_file_atomic(const fs::path& path, const std::string& bytes) {
  fs::path dir = path.parent_path();
  if (!dir.empty()) {
    fs::create_directories(dir);
  }
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw std::runtime_error(strfmt("cannot open %s for writing", tmp.string().c_str()));
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      throw std::runtime_error(strfmt("write error on %s", tmp.string().c_str()));
    }
  }
  fs::rename(tmp, path);
}

static_assert(std::endian::native == std::endian::little,
              "f32 payloads are little-endian; big-endian hosts are not supported");

std::vector<float> read_f32_file(const fs::path& path) {
  std::string bytes = read_file(path);
  if (bytes.size() % sizeof(float) != 0) {
    throw std::runtime_error(
        strfmt("%s: payload size %zu is not a multiple of 4", path.string().c_str(), bytes.size()));
  }
  std::vector<float> values(bytes.size() / sizeof(float));
  std::memcpy(values.data(), bytes.data(), bytes.size());
  return values;
}

void write_f32_file(const fs::path& path, const std::vector<float>& values) {
  std::string bytes(values.size() * sizeof(float), '\0');
  std::memcpy(bytes.data(), values.data(), bytes.size());
  write_file_atomic(path, bytes);
}

}  // namespace mionset
