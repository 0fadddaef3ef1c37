#include "lhids/artifact.hpp"

#include <bit>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "lhids/errors.hpp"

namespace lhids {

std::string_view artifact_kind_name(ArtifactKind kind) {
  switch (kind) {
    case ArtifactKind::kModel: return "model";
    case ArtifactKind::kQuantizedModel: return "quantized_model";
    case ArtifactKind::kForest: return "forest";
    case ArtifactKind::kThreshold: return "threshold";
    case ArtifactKind::kVocab: return "vocab";
  }
  return "unknown";
}

void ByteWriter::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
void ByteWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

std::uint8_t ByteReader::u8() {
  if (pos_ >= data_.size()) fail(ErrorCode::kCorruptArtifact, "unexpected end of data");
  return static_cast<std::uint8_t>(data_[pos_++]);
}

std::uint64_t ByteReader::get_le(int n) {
  if (remaining() < static_cast<std::size_t>(n)) {
    fail(ErrorCode::kCorruptArtifact, "unexpected end of data");
  }
  std::uint64_t v = 0;
  for (int i = 0; i < n; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
  }
  pos_ += static_cast<std::size_t>(n);
  return v;
}

float ByteReader::f32() { return std::bit_cast<float>(u32()); }
double ByteReader::f64() { return std::bit_cast<double>(u64()); }

std::string_view ByteReader::bytes(std::size_t n) {
  if (remaining() < n) fail(ErrorCode::kCorruptArtifact, "unexpected end of data");
  auto out = data_.substr(pos_, n);
  pos_ += n;
  return out;
}

void ByteReader::expect_done(std::string_view what) const {
  if (!done()) fail(ErrorCode::kCorruptArtifact, std::string(what) + ": trailing bytes");
}

std::string encode_container(ArtifactKind kind, const std::vector<Section>& sections) {
  ByteWriter w;
  w.bytes("LHID");
  w.u16(kContainerVersion);
  w.u16(static_cast<std::uint16_t>(kind));
  for (const auto& s : sections) {
    w.u32(s.tag);
    w.u64(s.payload.size());
    w.bytes(s.payload);
  }
  w.u32(kEndTag);
  return w.take();
}

std::vector<Section> decode_container(std::string_view bytes, ArtifactKind expected) {
  if (bytes.rfind("magic = lhids-vocab", 0) == 0) {
    fail(ErrorCode::kWrongKind, "found a vocabulary, expected " +
                                    std::string(artifact_kind_name(expected)));
  }
  if (bytes.size() < 8 || bytes.substr(0, 4) != "LHID") {
    fail(ErrorCode::kCorruptArtifact, "missing artifact magic");
  }
  ByteReader r(bytes.substr(4));
  const std::uint16_t version = r.u16();
  const auto kind = static_cast<ArtifactKind>(r.u16());
  if (version != kContainerVersion) {
    fail(ErrorCode::kVersionMismatch, "container version " + std::to_string(version) +
                                          ", this build reads " + std::to_string(kContainerVersion));
  }
  if (kind != expected) {
    fail(ErrorCode::kWrongKind, "found " + std::string(artifact_kind_name(kind)) + ", expected " +
                                    std::string(artifact_kind_name(expected)));
  }
  std::vector<Section> sections;
  while (true) {
    const std::uint32_t tag = r.u32();
    if (tag == kEndTag) break;
    const std::uint64_t len = r.u64();
    if (len > r.remaining()) fail(ErrorCode::kCorruptArtifact, "section overruns file");
    sections.push_back({tag, std::string(r.bytes(static_cast<std::size_t>(len)))});
  }
  r.expect_done("container");
  return sections;
}

const Section* find_section(const std::vector<Section>& sections, std::uint32_t tag) {
  for (const auto& s : sections) {
    if (s.tag == tag) return &s;
  }
  return nullptr;
}

const Section& require_section(const std::vector<Section>& sections, std::uint32_t tag,
                               std::string_view what) {
  const Section* s = find_section(sections, tag);
  if (!s) fail(ErrorCode::kCorruptArtifact, "missing " + std::string(what) + " section");
  return *s;
}

std::string read_binary_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_binary_file(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIoError, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::kIoError, "short write to " + path.string());
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace lhids
