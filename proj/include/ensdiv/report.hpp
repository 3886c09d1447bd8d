#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ensdiv {

/// One CSV report: header row plus string cells. Numeric cells should be
/// formatted with format_double so reruns are byte-identical.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// Provenance written next to every table as <path>.meta.json.
struct Sidecar {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string command;
};

std::string format_double(double v);

std::uint64_t fnv1a64(const std::string& text);
std::string hex64(std::uint64_t v);

const char* artifact_version();

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

void write_table(const std::string& path, const Table& table, const Sidecar& sidecar);

void ensure_directory(const std::string& path);

}  // namespace ensdiv
