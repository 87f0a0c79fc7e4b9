#include "fsd/codec.hpp"

#include <bit>
#include <string>

#include "fsd/errors.hpp"

namespace fsd {

namespace {

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) {
    out_.push_back(static_cast<std::uint8_t>(v >> 8));
    out_.push_back(static_cast<std::uint8_t>(v));
  }
  void u32(std::uint32_t v) {
    for (int shift = 24; shift >= 0; shift -= 8) out_.push_back(static_cast<std::uint8_t>(v >> shift));
  }
  void f32(double v) { u32(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }
  void bytes(std::string_view s) { out_.insert(out_.end(), s.begin(), s.end()); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint8_t u8() {
    need(1);
    return in_[pos_++];
  }
  std::uint16_t u16() {
    need(2);
    auto v = static_cast<std::uint16_t>((in_[pos_] << 8) | in_[pos_ + 1]);
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | in_[pos_ + static_cast<std::size_t>(i)];
    pos_ += 4;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string rest() {
    std::string s(in_.begin() + static_cast<std::ptrdiff_t>(pos_), in_.end());
    pos_ = in_.size();
    return s;
  }
  std::size_t remaining() const { return in_.size() - pos_; }
  void expect_end(const char* what) const {
    if (remaining() != 0) throw DecodeError(std::string(what) + ": trailing bytes in payload");
  }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw DecodeError("truncated payload");
  }
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

void encode(Writer& w, const Hello& h) {
  w.u16(h.version);
  w.u32(h.vocab);
  w.u16(h.num_exits);
  w.u16(h.gamma);
  w.u8(static_cast<std::uint8_t>(h.mode));
  w.u32(h.total_tokens);
  w.u32(static_cast<std::uint32_t>(h.prompt.size()));
  for (TokenId t : h.prompt) w.u32(t);
}

void encode(Writer& w, const DraftBatch& b) {
  if (b.gamma() > 0xFFFF) throw DomainError("gamma does not fit the wire format");
  w.u32(b.round_id);
  w.u32(b.prefix_len);
  w.u16(static_cast<std::uint16_t>(b.gamma()));
  w.u8(static_cast<std::uint8_t>(b.mode));
  for (TokenId t : b.tokens) w.u32(t);
  if (b.mode == PayloadMode::compact) {
    if (b.chosen_probs.size() != b.gamma()) throw DomainError("compact batch needs gamma probabilities");
    for (double p : b.chosen_probs) w.f32(p);
  } else {
    if (b.dists.size() != b.gamma()) throw DomainError("full batch needs gamma distributions");
    for (const ProbVector& d : b.dists) {
      if (d.size() > kMaxFullModeVocab) throw DomainError("full payload limited to vocab <= 1024");
      if (d.size() != b.dists.front().size()) throw DomainError("distribution sizes differ");
      for (double p : d.values()) w.f32(p);
    }
  }
}

void encode(Writer& w, const ExitOutput& e) {
  if (e.tokens.size() != static_cast<std::size_t>(e.accepted) + 1) {
    throw DomainError("exit output must carry delta + 1 tokens");
  }
  w.u32(e.round_id);
  w.u16(e.exit_index);
  w.u16(e.accepted);
  for (TokenId t : e.tokens) w.u32(t);
  w.f32(e.score);
  w.u8(e.isfinal ? 1 : 0);
}

void encode(Writer& w, const End& e) { w.u32(e.round_id); }

void encode(Writer& w, const Error& e) {
  w.u32(e.round_id);
  w.bytes(e.reason);
}

Hello decode_hello(Reader& r) {
  Hello h;
  h.version = r.u16();
  h.vocab = r.u32();
  h.num_exits = r.u16();
  h.gamma = r.u16();
  const std::uint8_t mode = r.u8();
  if (mode > 2) throw DecodeError("HELLO: unknown mode");
  h.mode = static_cast<Mode>(mode);
  h.total_tokens = r.u32();
  const std::uint32_t n = r.u32();
  if (r.remaining() != static_cast<std::size_t>(n) * 4) throw DecodeError("HELLO: prompt length mismatch");
  h.prompt.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) h.prompt.push_back(r.u32());
  return h;
}

DraftBatch decode_draft(Reader& r) {
  DraftBatch b;
  b.round_id = r.u32();
  b.prefix_len = r.u32();
  const std::uint16_t gamma = r.u16();
  const std::uint8_t mode = r.u8();
  if (mode > 1) throw DecodeError("DRAFT_SUBMIT: unknown payload mode");
  b.mode = static_cast<PayloadMode>(mode);
  b.tokens.reserve(gamma);
  for (std::uint16_t i = 0; i < gamma; ++i) b.tokens.push_back(r.u32());
  if (b.mode == PayloadMode::compact) {
    if (r.remaining() != static_cast<std::size_t>(gamma) * 4) {
      throw DecodeError("DRAFT_SUBMIT: compact payload length mismatch");
    }
    for (std::uint16_t i = 0; i < gamma; ++i) b.chosen_probs.push_back(r.f32());
    return b;
  }
  if (gamma == 0) {
    r.expect_end("DRAFT_SUBMIT");
    return b;
  }
  const std::size_t per_token = static_cast<std::size_t>(gamma) * 4;
  if (r.remaining() % per_token != 0) throw DecodeError("DRAFT_SUBMIT: full payload length mismatch");
  const std::size_t vocab = r.remaining() / per_token;
  if (vocab < 2 || vocab > kMaxFullModeVocab) throw DecodeError("DRAFT_SUBMIT: bad vocabulary size");
  for (std::uint16_t k = 0; k < gamma; ++k) {
    std::vector<double> probs(vocab);
    for (double& p : probs) p = r.f32();
    try {
      b.dists.push_back(ProbVector::from_wire(std::move(probs)));
    } catch (const DomainError&) {
      throw DecodeError("DRAFT_SUBMIT: invalid distribution");
    }
    const TokenId t = b.tokens[k];
    if (t >= vocab) throw DecodeError("DRAFT_SUBMIT: token outside vocabulary");
    b.chosen_probs.push_back(b.dists.back()[t]);
  }
  return b;
}

ExitOutput decode_exit(Reader& r, bool expect_final) {
  ExitOutput e;
  e.round_id = r.u32();
  e.exit_index = r.u16();
  e.accepted = r.u16();
  const std::size_t n = static_cast<std::size_t>(e.accepted) + 1;
  if (r.remaining() != n * 4 + 5) throw DecodeError("EXIT_OUTPUT: token count mismatch");
  e.tokens.reserve(n);
  for (std::size_t i = 0; i < n; ++i) e.tokens.push_back(r.u32());
  e.score = r.f32();
  const std::uint8_t flag = r.u8();
  if (flag > 1) throw DecodeError("EXIT_OUTPUT: bad isfinal flag");
  e.isfinal = flag == 1;
  if (e.isfinal != expect_final) throw DecodeError("isfinal flag disagrees with message type");
  return e;
}

}  // namespace

MsgType type_of(const Message& m) {
  struct {
    MsgType operator()(const Hello&) const { return MsgType::hello; }
    MsgType operator()(const DraftBatch&) const { return MsgType::draft_submit; }
    MsgType operator()(const ExitOutput& e) const {
      return e.isfinal ? MsgType::final_output : MsgType::exit_output;
    }
    MsgType operator()(const End&) const { return MsgType::end; }
    MsgType operator()(const Error&) const { return MsgType::error; }
  } visitor;
  return std::visit(visitor, m);
}

std::vector<std::uint8_t> encode_payload(const Message& m) {
  Writer w;
  std::visit([&w](const auto& msg) { encode(w, msg); }, m);
  return w.take();
}

std::vector<std::uint8_t> encode_frame(const Message& m) {
  const std::vector<std::uint8_t> payload = encode_payload(m);
  Writer w;
  w.u32(static_cast<std::uint32_t>(payload.size()));
  w.u8(static_cast<std::uint8_t>(type_of(m)));
  std::vector<std::uint8_t> out = w.take();
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

FrameHeader decode_header(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kFrameHeaderSize) throw DecodeError("truncated frame header");
  Reader r(bytes.first(kFrameHeaderSize));
  FrameHeader h;
  h.length = r.u32();
  const std::uint8_t type = r.u8();
  if (type < 1 || type > 6) throw DecodeError("unknown message type " + std::to_string(type));
  h.type = static_cast<MsgType>(type);
  return h;
}

Message decode_payload(MsgType type, std::span<const std::uint8_t> payload) {
  Reader r(payload);
  switch (type) {
    case MsgType::hello:
      return decode_hello(r);
    case MsgType::draft_submit:
      return decode_draft(r);
    case MsgType::exit_output:
      return decode_exit(r, false);
    case MsgType::final_output:
      return decode_exit(r, true);
    case MsgType::end: {
      End e{r.u32()};
      r.expect_end("END");
      return e;
    }
    case MsgType::error: {
      Error e;
      e.round_id = r.u32();
      e.reason = r.rest();
      return e;
    }
  }
  throw DecodeError("unknown message type");
}

Message decode_frame(std::span<const std::uint8_t> bytes) {
  const FrameHeader h = decode_header(bytes);
  const std::size_t available = bytes.size() - kFrameHeaderSize;
  if (h.length > available) throw DecodeError("frame declares more bytes than available");
  if (h.length < available) throw DecodeError("frame length mismatch: trailing bytes");
  return decode_payload(h.type, bytes.subspan(kFrameHeaderSize));
}

DraftBatch wire_canonical(DraftBatch batch) {
  auto f32 = [](double v) { return static_cast<double>(static_cast<float>(v)); };
  if (batch.mode == PayloadMode::compact) {
    for (double& p : batch.chosen_probs) p = f32(p);
    batch.dists.clear();
    return batch;
  }
  batch.chosen_probs.clear();
  for (std::size_t k = 0; k < batch.dists.size(); ++k) {
    std::vector<double> v(batch.dists[k].values().begin(), batch.dists[k].values().end());
    for (double& p : v) p = f32(p);
    batch.dists[k] = ProbVector::from_wire(std::move(v));
    batch.chosen_probs.push_back(batch.dists[k][batch.tokens[k]]);
  }
  return batch;
}

}  // namespace fsd
