#include <gtest/gtest.h>

#include "fsd/codec.hpp"
#include "fsd/errors.hpp"
#include "fsd/specdec.hpp"

namespace fsd {
namespace {

Message round_trip(const Message& m) { return decode_frame(encode_frame(m)); }

TEST(Codec, HelloRoundTrip) {
  Hello h;
  h.vocab = 16;
  h.num_exits = 4;
  h.gamma = 4;
  h.mode = Mode::sd;
  h.total_tokens = 200;
  h.prompt = {3, 1, 4};
  EXPECT_EQ(std::get<Hello>(round_trip(h)), h);
}

TEST(Codec, HelloLayout) {
  Hello h;
  h.vocab = 0x01020304;
  h.num_exits = 2;
  h.gamma = 3;
  h.mode = Mode::fsd;
  h.total_tokens = 5;
  h.prompt = {7};
  const std::vector<std::uint8_t> expect{0, 0, 0, 23, 1,  0, 1, 1, 2, 3, 4, 0, 2, 0, 3,
                                         2, 0, 0, 0,  5, 0, 0, 0, 1, 0, 0, 0, 7};
  EXPECT_EQ(encode_frame(h), expect);
}

TEST(Codec, CompactDraftRoundTrip) {
  SyntheticParams p;
  p.seed = 42;
  p.num_exits = 1;
  DraftBatch b = draft(SyntheticDraft(p), TokenSeq{3, 1, 4}, 4, SamplingMode::greedy, 0);
  b.round_id = 9;
  b.mode = PayloadMode::compact;
  const DraftBatch got = std::get<DraftBatch>(round_trip(b));
  EXPECT_EQ(got, wire_canonical(b));
  EXPECT_TRUE(got.dists.empty());
  EXPECT_EQ(got.tokens, b.tokens);
  EXPECT_EQ(encode_frame(got), encode_frame(b));
}

TEST(Codec, FullDraftInfersVocab) {
  SyntheticParams p;
  p.seed = 1;
  p.vocab = 33;
  DraftBatch b = draft(SyntheticDraft(p), TokenSeq{0}, 3, SamplingMode::sampled, 2);
  b.round_id = 1;
  b.mode = PayloadMode::full;
  const DraftBatch got = std::get<DraftBatch>(round_trip(b));
  ASSERT_EQ(got.dists.size(), 3U);
  EXPECT_EQ(got.dists[0].size(), 33U);
  EXPECT_EQ(got, wire_canonical(b));
  EXPECT_EQ(std::get<DraftBatch>(round_trip(got)), got);
}

TEST(Codec, ArRequestIsEmptyDraft) {
  DraftBatch b;
  b.round_id = 1;
  b.prefix_len = 3;
  for (PayloadMode m : {PayloadMode::compact, PayloadMode::full}) {
    b.mode = m;
    const DraftBatch got = std::get<DraftBatch>(round_trip(b));
    EXPECT_EQ(got.gamma(), 0U);
    EXPECT_EQ(got.prefix_len, 3U);
  }
}

TEST(Codec, ExitOutputRoundTripAndType) {
  ExitOutput e{3, 2, 1, {5, 6}, 0.25F, false};
  EXPECT_EQ(type_of(e), MsgType::exit_output);
  EXPECT_EQ(std::get<ExitOutput>(round_trip(e)), e);
  e.isfinal = true;
  EXPECT_EQ(type_of(e), MsgType::final_output);
  EXPECT_EQ(std::get<ExitOutput>(round_trip(e)), e);
}

TEST(Codec, EndAndErrorRoundTrip) {
  EXPECT_EQ(std::get<End>(round_trip(End{12})), End{12});
  const Error err{4, "round mismatch \xc3\xa9"};
  EXPECT_EQ(std::get<Error>(round_trip(err)), err);
}

TEST(Codec, RejectsTruncatedAndUnknown) {
  const std::vector<std::uint8_t> frame = encode_frame(ExitOutput{1, 1, 0, {2}, 0.5F, false});
  for (std::size_t cut = 0; cut < frame.size(); ++cut) {
    EXPECT_THROW(decode_frame(std::span(frame).first(cut)), DecodeError) << cut;
  }
  std::vector<std::uint8_t> bad = frame;
  bad[4] = 9;
  EXPECT_THROW(decode_frame(bad), DecodeError);
  bad = frame;
  bad.push_back(0);
  EXPECT_THROW(decode_frame(bad), DecodeError);
}

TEST(Codec, RejectsFlagTypeMismatch) {
  std::vector<std::uint8_t> frame = encode_frame(ExitOutput{1, 1, 0, {2}, 0.5F, false});
  frame[4] = static_cast<std::uint8_t>(MsgType::final_output);
  EXPECT_THROW(decode_frame(frame), DecodeError);
}

TEST(Codec, RejectsInvalidFullPayload) {
  DraftBatch b;
  b.round_id = 1;
  b.prefix_len = 1;
  b.mode = PayloadMode::full;
  b.tokens = {0};
  b.dists = {ProbVector::uniform(4)};
  b.chosen_probs = {0.25};
  std::vector<std::uint8_t> frame = encode_frame(b);
  frame.back() ^= 0x40;  // corrupt the last probability
  EXPECT_THROW(decode_frame(frame), DecodeError);

  b.dists = {ProbVector::uniform(1025)};
  EXPECT_THROW(encode_frame(b), DomainError);
}

TEST(Codec, DecodeHeader) {
  const std::vector<std::uint8_t> frame = encode_frame(End{1});
  const FrameHeader h = decode_header(frame);
  EXPECT_EQ(h.length, 4U);
  EXPECT_EQ(h.type, MsgType::end);
  EXPECT_THROW(decode_header(std::span(frame).first(4)), DecodeError);
}

}  // namespace
}  // namespace fsd
