#pragma once

// Blocking TCP transport for the wire protocol, one session per connection.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fsd/client.hpp"
#include "fsd/codec.hpp"
#include "fsd/server.hpp"
#include "fsd/toy_models.hpp"

namespace fsd {

class TcpStream {
 public:
  TcpStream() = default;
  explicit TcpStream(int fd) : fd_(fd) {}
  ~TcpStream();
  TcpStream(TcpStream&& other) noexcept;
  TcpStream& operator=(TcpStream&& other) noexcept;
  TcpStream(const TcpStream&) = delete;
  TcpStream& operator=(const TcpStream&) = delete;

  static TcpStream connect(const std::string& host, std::uint16_t port);

  void write_all(std::span<const std::uint8_t> bytes);
  /// False on EOF before the first byte; throws on EOF mid-buffer.
  bool read_exact(std::span<std::uint8_t> out);
  void shutdown();
  bool valid() const { return fd_ >= 0; }

 private:
  int fd_ = -1;
};

class TcpListener {
 public:
  /// Port 0 binds an ephemeral port.
  static TcpListener bind(const std::string& host, std::uint16_t port);
  TcpListener() = default;
  ~TcpListener();
  TcpListener(TcpListener&& other) noexcept;
  TcpListener& operator=(TcpListener&& other) noexcept;

  std::uint16_t port() const { return port_; }
  TcpStream accept();

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

void send_message(TcpStream& stream, const Message& m);
/// nullopt on a clean close between frames.
std::optional<Message> receive_message(TcpStream& stream);

struct ServeOptions {
  SyntheticParams model;
  QueueStrategy server_queue = QueueStrategy::priority;
  /// Sleep so exit i is queued (i/L) * Tq after a batch arrives.
  double emulated_verify_ms = 0.0;
};

struct ServeReport {
  Mode mode = Mode::fsd;
  std::vector<ServerRoundStats> rounds;
  std::size_t discarded = 0;
  std::size_t exits_sent = 0;
};

/// Runs one session to END. Protocol errors are reported to the peer with
/// an ERROR frame and rethrown.
ServeReport serve_session(TcpStream stream, const ServeOptions& options);

struct SessionSpec {
  Mode mode = Mode::fsd;
  std::uint16_t num_exits = 1;
  TokenSeq prompt;
  /// Sleep per drafted token, fresh or pre-draft.
  double emulated_draft_ms = 0.0;
};

struct ClientRunResult {
  TokenSeq output;
  ClientStats stats;
  std::vector<RoundRecord> rounds;
  double wall_ms = 0.0;
};

/// Edge loop over a connected stream. Throws SessionError (with the
/// committed output) on transport failure.
ClientRunResult client_generate(const ClientConfig& config, const DraftModel& model,
                                TcpStream& session, const SessionSpec& spec);

}  // namespace fsd
