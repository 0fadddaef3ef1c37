#include "lhids/model_io.hpp"

#include <array>

#include "lhids/artifact.hpp"
#include "lhids/errors.hpp"

namespace lhids {
namespace {

constexpr std::uint32_t kHyperTag = section_tag("HYPR");
constexpr std::uint32_t kFloatTag = section_tag("TF32");
constexpr std::uint32_t kQuantTag = section_tag("TQ8.");
constexpr std::uint32_t kSvddTag = section_tag("SVDD");

// Shapes shared by the float and quantized containers.
struct Layout {
  ModelHyper hyper;
  std::vector<std::array<std::uint32_t, 4>> convs;  // C_out, C_in, K, P
  std::uint32_t final_pool = 1;
  std::uint32_t dense_rows = 0;
};

std::uint32_t u32_of(std::size_t v) {
  if (v > UINT32_MAX) fail(ErrorCode::kShapeMismatch, "dimension exceeds 32 bits");
  return static_cast<std::uint32_t>(v);
}

std::string encode_layout(const Layout& l) {
  ByteWriter w;
  w.u32(u32_of(l.hyper.vocab_size));
  w.u32(u32_of(l.hyper.input_length));
  w.u32(u32_of(l.hyper.embed_dim));
  w.u32(u32_of(l.hyper.feature_dim));
  w.u32(u32_of(l.convs.size()));
  w.u32(l.final_pool);
  for (const auto& c : l.convs) {
    for (auto v : c) w.u32(v);
  }
  return w.take();
}

Layout decode_layout(std::string_view payload) {
  ByteReader r(payload);
  Layout l;
  l.hyper.vocab_size = r.u32();
  l.hyper.input_length = r.u32();
  l.hyper.embed_dim = r.u32();
  l.hyper.feature_dim = r.u32();
  const std::uint32_t n = r.u32();
  l.final_pool = r.u32();
  if (n > r.remaining() / 16) fail(ErrorCode::kCorruptArtifact, "layer table overruns section");
  std::uint32_t in_ch = static_cast<std::uint32_t>(l.hyper.embed_dim);
  for (std::uint32_t i = 0; i < n; ++i) {
    std::array<std::uint32_t, 4> c{r.u32(), r.u32(), r.u32(), r.u32()};
    l.convs.push_back(c);
    in_ch = c[0];
  }
  r.expect_done("HYPR");
  l.dense_rows = in_ch;
  return l;
}

Layout layout_of(const ExtractorModel& m) {
  Layout l{m.hyper, {}, u32_of(m.final_pool), u32_of(m.dense.rows)};
  for (const auto& c : m.conv_layers) {
    l.convs.push_back({u32_of(c.kernels.out_channels), u32_of(c.kernels.in_channels),
                       u32_of(c.kernels.width), u32_of(c.pool)});
  }
  return l;
}

Layout layout_of(const QuantizedModel& q) {
  Layout l{q.hyper, {}, u32_of(q.final_pool), u32_of(q.dense_rows)};
  for (const auto& c : q.conv_layers) {
    l.convs.push_back(
        {u32_of(c.out_channels), u32_of(c.in_channels), u32_of(c.width), u32_of(c.pool)});
  }
  return l;
}

// Empty float model with the layout's shapes; throws on an inconsistent layout.
ExtractorModel shell_of(const Layout& l) {
  ExtractorModel m;
  m.hyper = l.hyper;
  m.embedding = Matrix(l.hyper.vocab_size + 1, l.hyper.embed_dim);
  for (const auto& c : l.convs) m.conv_layers.push_back({Kernel(c[0], c[1], c[2]), c[3]});
  m.final_pool = l.final_pool;
  m.dense = Matrix(l.dense_rows, l.hyper.feature_dim);
  try {
    validate_model(m);
  } catch (const Error& e) {
    fail(ErrorCode::kCorruptArtifact, std::string("inconsistent layer table: ") + e.what());
  }
  return m;
}

std::string encode_svdd(const SvddState& s) {
  ByteWriter w;
  w.u32(u32_of(s.center.size()));
  for (double v : s.center) w.f64(v);
  w.f64(s.radius);
  w.f64(s.weight_decay);
  return w.take();
}

SvddState decode_svdd(std::string_view payload) {
  ByteReader r(payload);
  SvddState s;
  const std::uint32_t d = r.u32();
  if (d > r.remaining() / 8) fail(ErrorCode::kCorruptArtifact, "SVDD center overruns section");
  s.center.resize(d);
  for (auto& v : s.center) v = r.f64();
  s.radius = r.f64();
  s.weight_decay = r.f64();
  r.expect_done("SVDD");
  return s;
}

std::vector<Section> base_sections(const Layout& l, std::uint32_t tag, std::string payload,
                                   const std::optional<SvddState>& svdd) {
  std::vector<Section> sections{{kHyperTag, encode_layout(l)}, {tag, std::move(payload)}};
  if (svdd) sections.push_back({kSvddTag, encode_svdd(*svdd)});
  return sections;
}

std::optional<SvddState> optional_svdd(const std::vector<Section>& sections) {
  if (const Section* s = find_section(sections, kSvddTag)) return decode_svdd(s->payload);
  return std::nullopt;
}

void encode_qtensor(ByteWriter& w, const QuantizedTensor& t) {
  w.f32(static_cast<float>(t.params.scale));
  w.i8(static_cast<std::int8_t>(t.params.zero_point));
  w.bytes(std::string_view(reinterpret_cast<const char*>(t.values.data()), t.values.size()));
}

QuantizedTensor decode_qtensor(ByteReader& r, std::size_t count) {
  QuantizedTensor t;
  t.params.scale = static_cast<double>(r.f32());
  t.params.zero_point = r.i8();
  if (!(t.params.scale > 0.0)) fail(ErrorCode::kCorruptArtifact, "non-positive tensor scale");
  const auto bytes = r.bytes(count);
  t.values.assign(reinterpret_cast<const std::int8_t*>(bytes.data()),
                  reinterpret_cast<const std::int8_t*>(bytes.data()) + count);
  return t;
}

}  // namespace

std::string encode_model(const ExtractorModel& model, const std::optional<SvddState>& svdd) {
  validate_model(model);
  ByteWriter w;
  for (auto t : model.parameters()) {
    for (double v : t) w.f32(static_cast<float>(v));
  }
  return encode_container(ArtifactKind::kModel,
                          base_sections(layout_of(model), kFloatTag, w.take(), svdd));
}

StoredModel decode_model(std::string_view bytes) {
  const auto sections = decode_container(bytes, ArtifactKind::kModel);
  StoredModel out;
  out.model = shell_of(decode_layout(require_section(sections, kHyperTag, "HYPR").payload));
  ByteReader r(require_section(sections, kFloatTag, "TF32").payload);
  if (r.remaining() != 4 * out.model.parameter_count()) {
    fail(ErrorCode::kCorruptArtifact, "TF32 size does not match the layer table");
  }
  for (auto t : out.model.parameters()) {
    for (double& v : t) v = static_cast<double>(r.f32());
  }
  out.svdd = optional_svdd(sections);
  return out;
}

void save_model(const std::filesystem::path& path, const ExtractorModel& model,
                const std::optional<SvddState>& svdd) {
  write_binary_file(path, encode_model(model, svdd));
}

StoredModel load_model(const std::filesystem::path& path) {
  return decode_model(read_binary_file(path));
}

std::string encode_quantized_model(const QuantizedModel& model,
                                   const std::optional<SvddState>& svdd) {
  ByteWriter w;
  encode_qtensor(w, model.embedding);
  for (const auto& c : model.conv_layers) encode_qtensor(w, c.kernels);
  encode_qtensor(w, model.dense);
  return encode_container(ArtifactKind::kQuantizedModel,
                          base_sections(layout_of(model), kQuantTag, w.take(), svdd));
}

StoredQuantizedModel decode_quantized_model(std::string_view bytes) {
  const auto sections = decode_container(bytes, ArtifactKind::kQuantizedModel);
  const Layout layout = decode_layout(require_section(sections, kHyperTag, "HYPR").payload);
  const ExtractorModel shell = shell_of(layout);
  ByteReader r(require_section(sections, kQuantTag, "TQ8.").payload);

  StoredQuantizedModel out;
  QuantizedModel& q = out.model;
  q.hyper = layout.hyper;
  q.embedding = decode_qtensor(r, shell.embedding.data.size());
  for (const auto& c : shell.conv_layers) {
    q.conv_layers.push_back({c.kernels.out_channels, c.kernels.in_channels, c.kernels.width,
                             c.pool, decode_qtensor(r, c.kernels.data.size())});
  }
  q.final_pool = shell.final_pool;
  q.dense_rows = shell.dense.rows;
  q.dense = decode_qtensor(r, shell.dense.data.size());
  r.expect_done("TQ8.");
  out.svdd = optional_svdd(sections);
  return out;
}

void save_quantized_model(const std::filesystem::path& path, const QuantizedModel& model,
                          const std::optional<SvddState>& svdd) {
  write_binary_file(path, encode_quantized_model(model, svdd));
}

StoredQuantizedModel load_quantized_model(const std::filesystem::path& path) {
  return decode_quantized_model(read_binary_file(path));
}

ExtractorModel round_to_stored_precision(ExtractorModel model) {
  for (auto t : model.parameters()) {
    for (double& v : t) v = static_cast<double>(static_cast<float>(v));
  }
  return model;
}

}  // namespace lhids
