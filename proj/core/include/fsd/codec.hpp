#pragma once

// Length-prefixed binary frames. All integers are big-endian, reals are
// IEEE-754 binary32.
//
//   frame         length u32 | type u8 | payload[length]
//   HELLO         version u16, vocab u32, L u16, gamma u16,
//                 mode u8, n u32, prompt_len u32, prompt[prompt_len] u32
//   DRAFT_SUBMIT  round u32, prefix_len u32, gamma u16, payload_mode u8,
//                 tokens[gamma] u32, then compact: gamma f32 chosen-token
//                 probabilities, full: gamma*V f32 (V inferred from length)
//   EXIT_OUTPUT / FINAL_OUTPUT
//                 round u32, exit u16, delta u16, tokens[delta+1] u32,
//                 score f32, isfinal u8
//   END           round u32
//   ERROR         round u32, reason (UTF-8, rest of payload)
//
// A DRAFT_SUBMIT with gamma = 0 asks the server for plain autoregressive
// generation of the session's n tokens.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "fsd/types.hpp"

namespace fsd {

inline constexpr std::uint16_t kProtocolVersion = 1;
inline constexpr std::size_t kFrameHeaderSize = 5;
inline constexpr std::size_t kMaxFullModeVocab = 1024;

enum class MsgType : std::uint8_t {
  hello = 1,
  draft_submit = 2,
  exit_output = 3,
  final_output = 4,
  end = 5,
  error = 6,
};

struct Hello {
  std::uint16_t version = kProtocolVersion;
  std::uint32_t vocab = 0;
  std::uint16_t num_exits = 1;
  std::uint16_t gamma = 0;
  Mode mode = Mode::fsd;
  std::uint32_t total_tokens = 0;
  TokenSeq prompt;

  friend bool operator==(const Hello&, const Hello&) = default;
};

struct End {
  std::uint32_t round_id = 0;
  friend bool operator==(const End&, const End&) = default;
};

struct Error {
  std::uint32_t round_id = 0;
  std::string reason;
  friend bool operator==(const Error&, const Error&) = default;
};

using Message = std::variant<Hello, DraftBatch, ExitOutput, End, Error>;

MsgType type_of(const Message& m);

std::vector<std::uint8_t> encode_payload(const Message& m);
std::vector<std::uint8_t> encode_frame(const Message& m);

struct FrameHeader {
  std::uint32_t length = 0;
  MsgType type = MsgType::hello;
};

/// Throws DecodeError on fewer than 5 bytes or an unknown type.
FrameHeader decode_header(std::span<const std::uint8_t> bytes);
/// Throws DecodeError when the payload does not match the type's layout.
Message decode_payload(MsgType type, std::span<const std::uint8_t> payload);
/// Decodes exactly one frame; `bytes` must be exactly header + payload.
Message decode_frame(std::span<const std::uint8_t> bytes);

/// Probabilities as they survive a binary32 round trip.
DraftBatch wire_canonical(DraftBatch batch);

}  // namespace fsd
