#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lhids {

// Binary artifact container shared by every persisted model type:
//
//   "LHID" | u16 version | u16 kind | section* | u32 kEndTag
//   section = u32 tag | u64 byte length | payload
//
// All integers and floats are little-endian.
enum class ArtifactKind : std::uint16_t {
  kModel = 1,
  kQuantizedModel = 2,
  kForest = 3,
  kThreshold = 4,
  kVocab = 5,  // text format, see Vocabulary::serialize
};

std::string_view artifact_kind_name(ArtifactKind kind);

inline constexpr std::uint16_t kContainerVersion = 1;

constexpr std::uint32_t section_tag(const char (&s)[5]) {
  return static_cast<std::uint32_t>(static_cast<unsigned char>(s[0])) |
         static_cast<std::uint32_t>(static_cast<unsigned char>(s[1])) << 8 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(s[2])) << 16 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(s[3])) << 24;
}

inline constexpr std::uint32_t kEndTag = section_tag("END.");

class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void i8(std::int8_t v) { u8(static_cast<std::uint8_t>(v)); }
  void u16(std::uint16_t v) { put_le(v, 2); }
  void u32(std::uint32_t v) { put_le(v, 4); }
  void u64(std::uint64_t v) { put_le(v, 8); }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f32(float v);
  void f64(double v);
  void bytes(std::string_view b) { buf_.append(b); }

  const std::string& data() const { return buf_; }
  std::string take() { return std::move(buf_); }

 private:
  void put_le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  std::string buf_;
};

// Bounds-checked reader; any overrun raises CorruptArtifact.
class ByteReader {
 public:
  explicit ByteReader(std::string_view data) : data_(data) {}

  std::uint8_t u8();
  std::int8_t i8() { return static_cast<std::int8_t>(u8()); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(get_le(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get_le(4)); }
  std::uint64_t u64() { return get_le(8); }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  float f32();
  double f64();
  std::string_view bytes(std::size_t n);

  std::size_t remaining() const { return data_.size() - pos_; }
  bool done() const { return pos_ == data_.size(); }
  // Raises CorruptArtifact unless the whole input was consumed.
  void expect_done(std::string_view what) const;

 private:
  std::uint64_t get_le(int n);
  std::string_view data_;
  std::size_t pos_ = 0;
};

struct Section {
  std::uint32_t tag = 0;
  std::string payload;
};

std::string encode_container(ArtifactKind kind, const std::vector<Section>& sections);
// Validates magic, version and kind; returns the sections in file order.
std::vector<Section> decode_container(std::string_view bytes, ArtifactKind expected);

const Section* find_section(const std::vector<Section>& sections, std::uint32_t tag);
const Section& require_section(const std::vector<Section>& sections, std::uint32_t tag,
                               std::string_view what);

std::string read_binary_file(const std::filesystem::path& path);
void write_binary_file(const std::filesystem::path& path, std::string_view bytes);

// FNV-1a over the bytes; used to fingerprint artifacts in reports.
std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);

}  // namespace lhids
