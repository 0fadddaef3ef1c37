#include <gtest/gtest.h>

#include <fstream>

#include "lhids/artifact.hpp"
#include "lhids/model_io.hpp"
#include "test_util.hpp"

namespace lhids {
namespace {

ExtractorModel small_model(std::uint64_t seed) {
  ArchitectureConfig a;
  a.vocab_size = 7;
  a.input_length = 12;
  a.embed_dim = 5;
  a.channels = {6, 4};
  a.pools = {2, 3};
  a.feature_dim = 4;
  return init_extractor(a, seed);
}

TEST(ModelIo, RoundTripIsStoredPrecision) {
  auto m = small_model(1);
  SvddState st{{0.1, -0.2, 0.3, 0.4}, 1.5, 1e-6};
  const auto bytes = encode_model(m, st);
  auto back = decode_model(bytes);
  EXPECT_EQ(back.model, round_to_stored_precision(m));
  ASSERT_TRUE(back.svdd.has_value());
  EXPECT_EQ(*back.svdd, st);
  EXPECT_EQ(encode_model(back.model, back.svdd), bytes);
}

TEST(ModelIo, OptionalSvddSection) {
  auto back = decode_model(encode_model(small_model(2), std::nullopt));
  EXPECT_FALSE(back.svdd.has_value());
}

TEST(ModelIo, FileRoundTrip) {
  auto dir = scratch_dir("model_io");
  auto m = round_to_stored_precision(small_model(3));
  save_model(dir / "m.bin", m);
  EXPECT_EQ(load_model(dir / "m.bin").model, m);
  auto q = quantize_model(m);
  save_quantized_model(dir / "q.bin", q, SvddState{{1, 2, 3, 4}, 0, 0});
  auto qb = load_quantized_model(dir / "q.bin");
  EXPECT_EQ(qb.model, q);
  EXPECT_EQ(qb.svdd->center, (FeatureVector{1, 2, 3, 4}));
}

TEST(ModelIo, QuantizedFileIsSmaller) {
  auto m = small_model(4);
  EXPECT_LT(encode_quantized_model(quantize_model(m), std::nullopt).size(),
            encode_model(m, std::nullopt).size());
}

TEST(ModelIo, TruncatedIsCorrupt) {
  const auto bytes = encode_model(small_model(5), std::nullopt);
  for (std::size_t cut : {std::size_t{0}, std::size_t{3}, std::size_t{9}, bytes.size() / 2,
                          bytes.size() - 1}) {
    EXPECT_LHIDS_ERROR(decode_model(bytes.substr(0, cut)), ErrorCode::kCorruptArtifact);
  }
}

TEST(ModelIo, WrongKindAndVersion) {
  auto m = small_model(6);
  EXPECT_LHIDS_ERROR(decode_quantized_model(encode_model(m, std::nullopt)), ErrorCode::kWrongKind);
  EXPECT_LHIDS_ERROR(decode_model(encode_quantized_model(quantize_model(m), std::nullopt)),
                     ErrorCode::kWrongKind);
  auto bytes = encode_model(m, std::nullopt);
  bytes[4] = 9;  // version field follows the magic
  EXPECT_LHIDS_ERROR(decode_model(bytes), ErrorCode::kVersionMismatch);
  EXPECT_LHIDS_ERROR(decode_model("magic = lhids-vocab\n"), ErrorCode::kWrongKind);
  EXPECT_LHIDS_ERROR(decode_model("garbage!"), ErrorCode::kCorruptArtifact);
}

TEST(ModelIo, MissingFileIsIoError) {
  EXPECT_LHIDS_ERROR(load_model(scratch_dir("model_io_missing") / "none.bin"), ErrorCode::kIoError);
}

TEST(Artifact, Fnv1aKnownValues) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(hex64(0xabcULL), "0000000000000abc");
}

}  // namespace
}  // namespace lhids
