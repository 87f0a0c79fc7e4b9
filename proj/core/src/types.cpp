#include "fsd/types.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <string>

#include "fsd/errors.hpp"
#include "fsd/format.hpp"

namespace fsd {

void validate_tokens(std::span<const TokenId> tokens, std::size_t vocab) {
  for (TokenId t : tokens) {
    if (t >= vocab) {
      throw DomainError("token id " + std::to_string(t) + " outside vocabulary of " +
                        std::to_string(vocab));
    }
  }
}

ProbVector::ProbVector(std::vector<double> probs) : probs_(std::move(probs)) {
  double sum = 0.0;
  for (double p : probs_) {
    if (!(p >= 0.0)) throw DomainError("probability must be non-negative");
    sum += p;
  }
  if (std::abs(sum - 1.0) > kSumTolerance) {
    throw DomainError("probabilities sum to " + format_real(sum) + ", expected 1");
  }
}

ProbVector ProbVector::normalized(std::vector<double> weights) {
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw DomainError("weights must be non-negative");
    sum += w;
  }
  if (!(sum > 0.0)) throw DomainError("cannot normalize an all-zero weight vector");
  ProbVector out;
  out.probs_ = std::move(weights);
  for (double& w : out.probs_) w /= sum;
  return out;
}

ProbVector ProbVector::peaked(std::size_t vocab, TokenId peak, double log_weight) {
  if (peak >= vocab) throw DomainError("peak token outside vocabulary");
  const double w = std::exp(log_weight);
  const double total = w + static_cast<double>(vocab - 1);
  ProbVector out;
  out.probs_.assign(vocab, 1.0 / total);
  out.probs_[peak] = w / total;
  return out;
}

ProbVector ProbVector::from_wire(std::vector<double> probs) {
  double sum = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0)) throw DomainError("probability must be non-negative");
    sum += p;
  }
  if (std::abs(sum - 1.0) > kWireSumTolerance) {
    throw DomainError("wire probabilities sum to " + format_real(sum));
  }
  ProbVector out;
  out.probs_ = std::move(probs);
  return out;
}

ProbVector ProbVector::uniform(std::size_t vocab) {
  if (vocab == 0) throw DomainError("empty vocabulary");
  ProbVector out;
  out.probs_.assign(vocab, 1.0 / static_cast<double>(vocab));
  return out;
}

TokenId ProbVector::argmax() const {
  if (probs_.empty()) throw DomainError("argmax of empty distribution");
  return static_cast<TokenId>(std::max_element(probs_.begin(), probs_.end()) - probs_.begin());
}

double ProbVector::max() const {
  if (probs_.empty()) throw DomainError("max of empty distribution");
  return *std::max_element(probs_.begin(), probs_.end());
}

TokenId ProbVector::sample(double u) const {
  if (probs_.empty()) throw DomainError("sample from empty distribution");
  double total = std::accumulate(probs_.begin(), probs_.end(), 0.0);
  double target = u * total;
  double cum = 0.0;
  std::size_t last_nonzero = 0;
  for (std::size_t i = 0; i < probs_.size(); ++i) {
    if (probs_[i] <= 0.0) continue;
    cum += probs_[i];
    last_nonzero = i;
    if (target < cum) return static_cast<TokenId>(i);
  }
  return static_cast<TokenId>(last_nonzero);
}

std::string_view to_string(QueueStrategy s) {
  switch (s) {
    case QueueStrategy::priority: return "priority";
    case QueueStrategy::fifo: return "fifo";
    case QueueStrategy::random: return "random";
  }
  return "?";
}

std::string_view to_string(VerifyMode m) {
  return m == VerifyMode::greedy ? "greedy" : "stochastic";
}

std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::ar: return "ar";
    case Mode::sd: return "sd";
    case Mode::fsd: return "fsd";
  }
  return "?";
}

QueueStrategy parse_queue_strategy(std::string_view s) {
  if (s == "priority") return QueueStrategy::priority;
  if (s == "fifo") return QueueStrategy::fifo;
  if (s == "random") return QueueStrategy::random;
  throw DomainError("unknown queue strategy '" + std::string(s) + "'");
}

VerifyMode parse_verify_mode(std::string_view s) {
  if (s == "greedy") return VerifyMode::greedy;
  if (s == "stochastic") return VerifyMode::stochastic;
  throw DomainError("unknown verification mode '" + std::string(s) + "'");
}

Mode parse_mode(std::string_view s) {
  if (s == "ar") return Mode::ar;
  if (s == "sd") return Mode::sd;
  if (s == "fsd") return Mode::fsd;
  throw DomainError("unknown mode '" + std::string(s) + "'");
}

namespace {

std::string join(const std::vector<std::string>& parts) {
  std::string out;
  for (const auto& p : parts) {
    if (!out.empty()) out += "; ";
    out += p;
  }
  return out;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : std::runtime_error("invalid config: " + join(problems)), problems_(std::move(problems)) {}

std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, end);
  if (s.find_first_of(".e") == std::string::npos) s += ".0";
  return s;
}

}  // namespace fsd
