#include "ensdiv/report.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ensdiv/error.hpp"

namespace ensdiv {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

const char* artifact_version() { return "0.1.0"; }

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  os << content;
  if (!os) throw IoError("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path);
  std::ostringstream buffer;
  buffer << is.rdbuf();
  return buffer.str();
}

void write_table(const std::string& path, const Table& table, const Sidecar& sidecar) {
  std::ostringstream os;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    if (c) os << ",";
    os << table.header[c];
  }
  os << "\n";
  for (const auto& row : table.rows) {
    if (row.size() != table.header.size())
      throw ConfigError("write_table: row width does not match header: " + path);
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) os << ",";
      os << row[c];
    }
    os << "\n";
  }
  write_text_file(path, os.str());

  std::ostringstream meta;
  meta << "{\n"
       << "  \"artifact_version\": \"" << artifact_version() << "\",\n"
       << "  \"config_hash\": \"" << sidecar.config_hash << "\",\n"
       << "  \"seed\": " << sidecar.seed << ",\n"
       << "  \"command\": \"" << sidecar.command << "\"\n"
       << "}\n";
  write_text_file(path + ".meta.json", meta.str());
}

void ensure_directory(const std::string& path) {
  std::error_code ec;
  std::filesystem::create_directories(path, ec);
  if (ec) throw IoError("cannot create directory: " + path + " (" + ec.message() + ")");
}

}  // namespace ensdiv
