#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

// CSV and file plumbing. Doubles are printed with std::to_chars (shortest
// round-trip form, "." decimal separator); files are written to a temp name
// and renamed into place so readers never see a partial artifact.

namespace ipsim {

inline std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline uint64_t fnv1a64(std::string_view bytes) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return std::string(buf);
}

/// Test hook: when set, called between writing the temp file and renaming it.
inline std::function<void()>& atomic_write_fault_hook() {
  static std::function<void()> hook;
  return hook;
}

/// Write-all-then-rename. On any failure the destination is untouched and
/// the temp file is removed.
inline void atomic_write_file(const std::filesystem::path& path, std::string_view content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  try {
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
      out.write(content.data(), static_cast<std::streamsize>(content.size()));
      if (!out) throw std::runtime_error("short write to " + tmp.string());
    }
    if (atomic_write_fault_hook()) atomic_write_fault_hook()();
    fs::rename(tmp, path);
  } catch (...) {
    std::error_code ec;
    fs::remove(tmp, ec);
    throw;
  }
}

class CsvBuilder {
 public:
  explicit CsvBuilder(std::vector<std::string> header) {
    for (size_t i = 0; i < header.size(); ++i) {
      if (i) text_ += ',';
      text_ += header[i];
    }
    text_ += '\n';
  }

  void comment(const std::string& line) {
    text_.insert(0, "# " + line + "\n");
  }

  CsvBuilder& cell(std::string_view v) {
    if (!row_started_)
      row_started_ = true;
    else
      text_ += ',';
    text_ += v;
    return *this;
  }

  CsvBuilder& cell(double v) { return cell(format_double(v)); }
  CsvBuilder& cell(int v) { return cell(std::to_string(v)); }
  CsvBuilder& cell(long long v) { return cell(std::to_string(v)); }
  CsvBuilder& cell(uint64_t v) { return cell(std::to_string(v)); }

  void end_row() {
    text_ += '\n';
    row_started_ = false;
  }

  const std::string& text() const { return text_; }

 private:
  std::string text_;
  bool row_started_ = false;
};

}  // namespace ipsim
