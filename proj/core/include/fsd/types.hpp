#pragma once

// Vocabulary shared by every module: token sequences, prefix keys,
// distributions and the draft/verify/exit payloads that cross the wire.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "fsd/prf.hpp"

namespace fsd {

using TokenId = std::uint32_t;
using TokenSeq = std::vector<TokenId>;

/// Throws DomainError if any id is >= vocab.
void validate_tokens(std::span<const TokenId> tokens, std::size_t vocab);

/// Order-sensitive digest of a token prefix. Synthetic models are pure
/// functions of (seed, PrefixKey), and extending costs O(1).
class PrefixKey {
 public:
  constexpr PrefixKey() = default;

  static PrefixKey of(std::span<const TokenId> tokens) {
    PrefixKey k;
    for (TokenId t : tokens) k = k.extend(t);
    return k;
  }

  [[nodiscard]] constexpr PrefixKey extend(TokenId t) const {
    return PrefixKey(prf::mix64(value_ ^ static_cast<std::uint64_t>(t)));
  }

  [[nodiscard]] PrefixKey extend(std::span<const TokenId> tokens) const {
    PrefixKey k = *this;
    for (TokenId t : tokens) k = k.extend(t);
    return k;
  }

  constexpr std::uint64_t value() const { return value_; }
  friend constexpr bool operator==(PrefixKey, PrefixKey) = default;

 private:
  constexpr explicit PrefixKey(std::uint64_t v) : value_(v) {}
  std::uint64_t value_ = prf::kPrefixKeyInit;
};

/// Probability distribution over a finite vocabulary.
class ProbVector {
 public:
  static constexpr double kSumTolerance = 1e-9;
  /// Decoded binary32 payloads only sum to 1 up to rounding.
  static constexpr double kWireSumTolerance = 1e-6;

  ProbVector() = default;
  /// Takes ownership of an already normalized vector; throws DomainError
  /// on negative entries or a sum outside 1 +/- 1e-9.
  explicit ProbVector(std::vector<double> probs);

  /// Normalizes non-negative weights. Throws DomainError if all are zero.
  static ProbVector normalized(std::vector<double> weights);
  /// Weight exp(log_weight) on `peak`, weight 1 on every other id.
  static ProbVector peaked(std::size_t vocab, TokenId peak, double log_weight);
  static ProbVector uniform(std::size_t vocab);
  /// Values as decoded from the wire, kept bit-exact; sum within 1e-6.
  static ProbVector from_wire(std::vector<double> probs);

  std::size_t size() const { return probs_.size(); }
  bool empty() const { return probs_.empty(); }
  double operator[](std::size_t i) const { return probs_[i]; }
  std::span<const double> values() const { return probs_; }

  /// Lowest id among the maxima.
  TokenId argmax() const;
  double max() const;

  /// Inverse-CDF draw for u in [0, 1); never returns a zero-mass id.
  TokenId sample(double u) const;

  friend bool operator==(const ProbVector&, const ProbVector&) = default;

 private:
  std::vector<double> probs_;
};

enum class PayloadMode : std::uint8_t { compact = 0, full = 1 };
enum class SamplingMode { greedy, sampled };
enum class VerifyMode { greedy, stochastic };
enum class QueueStrategy { priority, fifo, random };
enum class Mode : std::uint8_t { ar = 0, sd = 1, fsd = 2 };

std::string_view to_string(QueueStrategy s);
std::string_view to_string(VerifyMode m);
std::string_view to_string(Mode m);
QueueStrategy parse_queue_strategy(std::string_view s);
VerifyMode parse_verify_mode(std::string_view s);
Mode parse_mode(std::string_view s);

/// gamma drafted tokens plus their probability payload. `chosen_probs` is
/// always filled; `dists` only when the drafter recorded full distributions
/// (always locally, only in full mode after a wire round trip).
struct DraftBatch {
  std::uint32_t round_id = 0;
  std::uint32_t prefix_len = 0;
  PayloadMode mode = PayloadMode::compact;
  TokenSeq tokens;
  std::vector<double> chosen_probs;
  std::vector<ProbVector> dists;

  std::size_t gamma() const { return tokens.size(); }
  bool has_full_dists() const { return !tokens.empty() && dists.size() == tokens.size(); }
  friend bool operator==(const DraftBatch&, const DraftBatch&) = default;
};

/// Outcome of verifying one batch against one exit. `output` holds the
/// accepted draft prefix followed by one corrected or bonus token.
struct VerifyResult {
  int exit_index = 0;
  std::size_t accepted = 0;
  TokenSeq output;
  std::vector<double> per_token_probs;
  double confidence = 0.0;
};

/// One exit's verified tokens as streamed to the client.
struct ExitOutput {
  std::uint32_t round_id = 0;
  std::uint16_t exit_index = 0;
  std::uint16_t accepted = 0;
  TokenSeq tokens;
  float score = 0.0F;
  bool isfinal = false;

  friend bool operator==(const ExitOutput&, const ExitOutput&) = default;
};

}  // namespace fsd
