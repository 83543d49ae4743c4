#include "trinoloc/binary_io.hpp"

#include <fstream>

namespace trinoloc {

std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError(IoErrorKind::not_found, "cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  if (in.bad())
    throw IoError(IoErrorKind::truncated, "read failed for " + path.string());
  return bytes;
}

void write_file_bytes(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw IoError(IoErrorKind::write_failed, "cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out)
    throw IoError(IoErrorKind::write_failed, "write failed for " + path.string());
}

}  // namespace trinoloc
