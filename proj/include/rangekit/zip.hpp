#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace rangekit {

class ArchiveError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline const std::array<std::uint32_t, 256>& crc32_table() {
  static const std::array<std::uint32_t, 256> table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int k = 0; k < 8; ++k)
        c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  return table;
}

inline std::uint32_t crc32(const std::string& data) {
  const auto& table = crc32_table();
  std::uint32_t c = 0xffffffffu;
  for (unsigned char byte : data) c = table[(c ^ byte) & 0xffu] ^ (c >> 8);
  return c ^ 0xffffffffu;
}

inline void put16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

inline void put32(std::string& out, std::uint32_t v) {
  put16(out, static_cast<std::uint16_t>(v & 0xffff));
  put16(out, static_cast<std::uint16_t>(v >> 16));
}

inline std::uint16_t get16(const std::string& s, std::size_t at) {
  return static_cast<std::uint16_t>(static_cast<unsigned char>(s.at(at)) |
                                    (static_cast<unsigned char>(s.at(at + 1)) << 8));
}

inline std::uint32_t get32(const std::string& s, std::size_t at) {
  return static_cast<std::uint32_t>(get16(s, at)) |
         (static_cast<std::uint32_t>(get16(s, at + 2)) << 16);
}

}  // namespace detail

// Archive member list in insertion order. Only stored (uncompressed)
// entries are produced and understood; member timestamps are pinned so the
// same content always yields the same bytes.
using ArchiveEntries = std::vector<std::pair<std::string, std::string>>;

inline std::string build_zip(const ArchiveEntries& entries) {
  constexpr std::uint16_t kDosTime = 0;
  constexpr std::uint16_t kDosDate = 0x21;  // 1980-01-01
  std::string out;
  std::string central;
  for (const auto& [name, data] : entries) {
    const std::uint32_t crc = detail::crc32(data);
    const std::uint32_t offset = static_cast<std::uint32_t>(out.size());
    const auto size = static_cast<std::uint32_t>(data.size());

    detail::put32(out, 0x04034b50u);  // local file header
    detail::put16(out, 20);           // version needed
    detail::put16(out, 0);            // flags
    detail::put16(out, 0);            // method: stored
    detail::put16(out, kDosTime);
    detail::put16(out, kDosDate);
    detail::put32(out, crc);
    detail::put32(out, size);
    detail::put32(out, size);
    detail::put16(out, static_cast<std::uint16_t>(name.size()));
    detail::put16(out, 0);  // extra length
    out += name;
    out += data;

    detail::put32(central, 0x02014b50u);  // central directory header
    detail::put16(central, 20);           // version made by
    detail::put16(central, 20);           // version needed
    detail::put16(central, 0);
    detail::put16(central, 0);
    detail::put16(central, kDosTime);
    detail::put16(central, kDosDate);
    detail::put32(central, crc);
    detail::put32(central, size);
    detail::put32(central, size);
    detail::put16(central, static_cast<std::uint16_t>(name.size()));
    detail::put16(central, 0);  // extra
    detail::put16(central, 0);  // comment
    detail::put16(central, 0);  // disk number
    detail::put16(central, 0);  // internal attrs
    detail::put32(central, 0);  // external attrs
    detail::put32(central, offset);
    central += name;
  }
  const std::uint32_t central_offset = static_cast<std::uint32_t>(out.size());
  out += central;
  detail::put32(out, 0x06054b50u);  // end of central directory
  detail::put16(out, 0);
  detail::put16(out, 0);
  detail::put16(out, static_cast<std::uint16_t>(entries.size()));
  detail::put16(out, static_cast<std::uint16_t>(entries.size()));
  detail::put32(out, static_cast<std::uint32_t>(central.size()));
  detail::put32(out, central_offset);
  detail::put16(out, 0);  // comment length
  return out;
}

inline ArchiveEntries parse_zip(const std::string& bytes) {
  if (bytes.size() < 22) throw ArchiveError("archive too short");
  // Locate the end-of-central-directory record (no comment is ever written,
  // but tolerate one when reading).
  std::size_t eocd = std::string::npos;
  const std::size_t scan_from = bytes.size() >= 22 + 65535 ? bytes.size() - 22 - 65535 : 0;
  for (std::size_t i = bytes.size() - 22 + 1; i-- > scan_from;) {
    if (detail::get32(bytes, i) == 0x06054b50u) {
      eocd = i;
      break;
    }
  }
  if (eocd == std::string::npos)
    throw ArchiveError("end of central directory record not found");
  const std::uint16_t count = detail::get16(bytes, eocd + 10);
  std::size_t at = detail::get32(bytes, eocd + 16);

  ArchiveEntries entries;
  for (std::uint16_t i = 0; i < count; ++i) {
    if (at + 46 > bytes.size() || detail::get32(bytes, at) != 0x02014b50u)
      throw ArchiveError("corrupt central directory");
    const std::uint16_t method = detail::get16(bytes, at + 10);
    const std::uint32_t crc = detail::get32(bytes, at + 16);
    const std::uint32_t size = detail::get32(bytes, at + 20);
    const std::uint16_t name_len = detail::get16(bytes, at + 28);
    const std::uint16_t extra_len = detail::get16(bytes, at + 30);
    const std::uint16_t comment_len = detail::get16(bytes, at + 32);
    const std::uint32_t local_offset = detail::get32(bytes, at + 42);
    const std::string name = bytes.substr(at + 46, name_len);
    if (method != 0)
      throw ArchiveError("unsupported compression method for member " + name);

    if (local_offset + 30 > bytes.size() ||
        detail::get32(bytes, local_offset) != 0x04034b50u)
      throw ArchiveError("corrupt local header for member " + name);
    const std::uint16_t local_name_len = detail::get16(bytes, local_offset + 26);
    const std::uint16_t local_extra_len = detail::get16(bytes, local_offset + 28);
    const std::size_t data_at = local_offset + 30 + local_name_len + local_extra_len;
    if (data_at + size > bytes.size())
      throw ArchiveError("truncated data for member " + name);
    std::string data = bytes.substr(data_at, size);
    if (detail::crc32(data) != crc)
      throw ArchiveError("CRC mismatch for member " + name);
    entries.emplace_back(name, std::move(data));
    at += 46 + name_len + extra_len + comment_len;
  }
  return entries;
}

inline void write_zip_file(const std::filesystem::path& path,
                           const ArchiveEntries& entries) {
  const std::string bytes = build_zip(entries);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ArchiveError("cannot write archive: " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ArchiveError("short write on archive: " + path.string());
}

inline ArchiveEntries read_zip_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArchiveError("cannot open archive: " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  return parse_zip(bytes);
}

}  // namespace rangekit
