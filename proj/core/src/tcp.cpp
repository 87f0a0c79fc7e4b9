#include "fsd/tcp.hpp"

#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <condition_variable>
#include <cstring>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "fsd/errors.hpp"

namespace fsd {

namespace {

constexpr std::uint32_t kMaxFrameLength = 64U << 20;

std::runtime_error sys_error(const std::string& what) {
  return std::runtime_error(what + ": " + std::strerror(errno));
}

void set_nodelay(int fd) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

void sleep_ms(double ms) {
  if (ms > 0) std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(ms));
}

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

}  // namespace

// --- TcpStream ---------------------------------------------------------------

TcpStream::~TcpStream() {
  if (fd_ >= 0) ::close(fd_);
}

TcpStream::TcpStream(TcpStream&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }

TcpStream& TcpStream::operator=(TcpStream&& other) noexcept {
  if (this != &other) {
    if (fd_ >= 0) ::close(fd_);
    fd_ = other.fd_;
    other.fd_ = -1;
  }
  return *this;
}

TcpStream TcpStream::connect(const std::string& host, std::uint16_t port) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string service = std::to_string(port);
  if (int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &res); rc != 0) {
    throw std::runtime_error("resolve " + host + ": " + ::gai_strerror(rc));
  }
  int fd = -1;
  for (addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) throw sys_error("connect " + host + ":" + service);
  set_nodelay(fd);
  return TcpStream(fd);
}

void TcpStream::write_all(std::span<const std::uint8_t> bytes) {
  std::size_t off = 0;
  while (off < bytes.size()) {
    const ssize_t n = ::send(fd_, bytes.data() + off, bytes.size() - off, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw sys_error("send");
    }
    off += static_cast<std::size_t>(n);
  }
}

bool TcpStream::read_exact(std::span<std::uint8_t> out) {
  std::size_t off = 0;
  while (off < out.size()) {
    const ssize_t n = ::recv(fd_, out.data() + off, out.size() - off, 0);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw sys_error("recv");
    }
    if (n == 0) {
      if (off == 0) return false;
      throw DecodeError("connection closed mid-frame");
    }
    off += static_cast<std::size_t>(n);
  }
  return true;
}

void TcpStream::shutdown() {
  if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

// --- TcpListener -------------------------------------------------------------

TcpListener TcpListener::bind(const std::string& host, std::uint16_t port) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = AI_PASSIVE;
  addrinfo* res = nullptr;
  const std::string service = std::to_string(port);
  if (int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &res); rc != 0) {
    throw std::runtime_error("resolve " + host + ": " + ::gai_strerror(rc));
  }
  const int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  if (fd < 0) {
    ::freeaddrinfo(res);
    throw sys_error("socket");
  }
  int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  if (::bind(fd, res->ai_addr, res->ai_addrlen) != 0 || ::listen(fd, 16) != 0) {
    ::freeaddrinfo(res);
    ::close(fd);
    throw sys_error("bind " + host + ":" + service);
  }
  ::freeaddrinfo(res);

  sockaddr_in addr{};
  socklen_t len = sizeof addr;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  TcpListener l;
  l.fd_ = fd;
  l.port_ = ntohs(addr.sin_port);
  return l;
}

TcpListener::~TcpListener() {
  if (fd_ >= 0) ::close(fd_);
}

TcpListener::TcpListener(TcpListener&& other) noexcept : fd_(other.fd_), port_(other.port_) {
  other.fd_ = -1;
}

TcpListener& TcpListener::operator=(TcpListener&& other) noexcept {
  if (this != &other) {
    if (fd_ >= 0) ::close(fd_);
    fd_ = other.fd_;
    port_ = other.port_;
    other.fd_ = -1;
  }
  return *this;
}

TcpStream TcpListener::accept() {
  for (;;) {
    const int fd = ::accept(fd_, nullptr, nullptr);
    if (fd >= 0) {
      set_nodelay(fd);
      return TcpStream(fd);
    }
    if (errno != EINTR) throw sys_error("accept");
  }
}

// --- framing -----------------------------------------------------------------

void send_message(TcpStream& stream, const Message& m) { stream.write_all(encode_frame(m)); }

std::optional<Message> receive_message(TcpStream& stream) {
  std::uint8_t header[kFrameHeaderSize];
  if (!stream.read_exact(header)) return std::nullopt;
  const FrameHeader h = decode_header(header);
  if (h.length > kMaxFrameLength) throw DecodeError("frame too large");
  std::vector<std::uint8_t> payload(h.length);
  if (h.length > 0 && !stream.read_exact(payload)) throw DecodeError("connection closed mid-frame");
  return decode_payload(h.type, payload);
}

// --- server session ----------------------------------------------------------

namespace {

class StreamSink final : public MessageSink {
 public:
  explicit StreamSink(TcpStream& stream) : stream_(stream) {}
  void send(const Message& m) override {
    std::lock_guard lock(mu_);
    send_message(stream_, m);
  }

 private:
  TcpStream& stream_;
  std::mutex mu_;
};

}  // namespace

ServeReport serve_session(TcpStream stream, const ServeOptions& options) {
  options.model.validate();
  SyntheticTarget target(options.model);
  ServerCore core(target, options.model.seed);
  StreamSink sink(stream);
  std::uint32_t round = 0;

  auto fail = [&](const std::exception& e) {
    try {
      sink.send(Error{round, e.what()});
    } catch (...) {
    }
  };

  try {
    std::optional<Message> first = receive_message(stream);
    if (!first) throw ProtocolError("connection closed before HELLO");
    const Hello* hello = std::get_if<Hello>(&*first);
    if (hello == nullptr) throw ProtocolError("expected HELLO");
    core.open(*hello);
  } catch (const ProtocolError& e) {
    fail(e);
    throw;
  }

  StreamingServer server(core, options.server_queue, sink, options.emulated_verify_ms);
  std::exception_ptr sender_error;
  std::thread sender([&] {
    try {
      server.sender_drain();
    } catch (...) {
      sender_error = std::current_exception();
    }
  });
  auto stop_sender = [&] {
    server.close();
    if (sender.joinable()) sender.join();
  };

  try {
    for (;;) {
      std::optional<Message> msg = receive_message(stream);
      if (!msg) break;
      if (std::holds_alternative<End>(*msg)) break;
      const DraftBatch* batch = std::get_if<DraftBatch>(&*msg);
      if (batch == nullptr) throw ProtocolError("unexpected message during session");
      round = batch->round_id;
      server.listener_handle(*batch);
    }
    stop_sender();
    sink.send(End{core.last_round()});
  } catch (const ProtocolError& e) {
    stop_sender();
    fail(e);
    throw;
  } catch (...) {
    stop_sender();
    throw;
  }
  if (sender_error) std::rethrow_exception(sender_error);

  ServeReport report;
  report.mode = core.session().mode;
  report.rounds = core.round_stats();
  report.discarded = server.discarded();
  report.exits_sent = server.exits_sent();
  return report;
}

// --- client session ----------------------------------------------------------

namespace {

Hello make_hello(const ClientConfig& config, const DraftModel& model, const SessionSpec& spec) {
  Hello h;
  h.vocab = static_cast<std::uint32_t>(model.vocab_size());
  h.num_exits = spec.num_exits;
  h.gamma = static_cast<std::uint16_t>(spec.mode == Mode::ar ? 0 : config.gamma);
  h.mode = spec.mode;
  h.total_tokens = static_cast<std::uint32_t>(config.total_tokens);
  h.prompt = spec.prompt;
  return h;
}

// Reads until END or EOF after the client has said END.
void drain_until_end(TcpStream& stream) {
  while (std::optional<Message> m = receive_message(stream)) {
    if (std::holds_alternative<End>(*m)) return;
  }
}

ClientRunResult client_generate_ar(const ClientConfig& config, const DraftModel& model,
                                   TcpStream& stream, const SessionSpec& spec) {
  const auto start = std::chrono::steady_clock::now();
  try {
    send_message(stream, make_hello(config, model, spec));
    DraftBatch request;
    request.round_id = 1;
    request.prefix_len = static_cast<std::uint32_t>(spec.prompt.size());
    send_message(stream, request);
    for (;;) {
      std::optional<Message> m = receive_message(stream);
      if (!m) throw SessionError("server closed the connection", {});
      if (const Error* err = std::get_if<Error>(&*m)) throw ProtocolError("server error: " + err->reason);
      const ExitOutput* out = std::get_if<ExitOutput>(&*m);
      if (out == nullptr || !out->isfinal) continue;
      if (out->tokens.size() != config.total_tokens) throw ProtocolError("AR output has the wrong length");
      validate_tokens(out->tokens, model.vocab_size());
      ClientRunResult result;
      result.output = out->tokens;
      result.stats.rounds = 1;
      result.stats.tokens_emitted = out->tokens.size();
      result.rounds.push_back(RoundRecord{1, out->tokens.size() - 1, false, 0, 0});
      send_message(stream, End{1});
      drain_until_end(stream);
      result.wall_ms = elapsed_ms(start);
      return result;
    }
  } catch (const SessionError&) {
    throw;
  } catch (const ProtocolError&) {
    throw;
  } catch (const std::exception& e) {
    throw SessionError(e.what(), {});
  }
}

}  // namespace

ClientRunResult client_generate(const ClientConfig& config, const DraftModel& model,
                                TcpStream& stream, const SessionSpec& spec) {
  if (spec.mode == Mode::ar) return client_generate_ar(config, model, stream, spec);

  ClientConfig cc = config;
  cc.predraft = spec.mode == Mode::fsd;
  ClientCore core(cc, model, spec.prompt);
  const double draft_ms = spec.emulated_draft_ms * cc.gamma;
  const auto start = std::chrono::steady_clock::now();

  std::mutex mu;
  std::condition_variable cv;
  std::size_t finals_pending = 0;
  bool receiver_stopped = false;
  std::exception_ptr receiver_error;
  std::string server_error;

  auto notify = [&](auto&& update) {
    {
      std::lock_guard lock(mu);
      update();
    }
    cv.notify_all();
  };

  std::thread receiver([&] {
    try {
      while (std::optional<Message> m = receive_message(stream)) {
        if (std::holds_alternative<End>(*m)) break;
        if (const Error* err = std::get_if<Error>(&*m)) {
          notify([&] { server_error = err->reason; });
          break;
        }
        const ExitOutput* e = std::get_if<ExitOutput>(&*m);
        if (e == nullptr) throw ProtocolError("unexpected message from server");
        if (core.ingest(*e) == IngestResult::final) notify([&] { ++finals_pending; });
      }
    } catch (...) {
      notify([&] { receiver_error = std::current_exception(); });
    }
    notify([&] { receiver_stopped = true; });
  });

  std::vector<std::thread> workers;
  const int pool = cc.predraft ? cc.worker_threads : 0;
  for (int w = 0; w < pool; ++w) {
    workers.emplace_back([&] {
      while (std::optional<ExitOutput> popped = core.queue().wait_pop()) {
        std::optional<PreDraftJob> job = core.prepare_job(*popped);
        if (!job) continue;
        sleep_ms(draft_ms);
        core.complete_job(*job, core.run_job(*job));
      }
    });
  }

  auto shutdown_threads = [&](bool abort) {
    core.queue().close();
    for (std::thread& t : workers) t.join();
    if (abort) stream.shutdown();
    receiver.join();
  };

  try {
    send_message(stream, make_hello(cc, model, spec));
    DraftBatch batch = core.begin();
    sleep_ms(draft_ms);
    send_message(stream, batch);
    for (;;) {
      {
        std::unique_lock lock(mu);
        cv.wait(lock, [&] { return finals_pending > 0 || receiver_stopped; });
        if (finals_pending == 0) {
          if (!server_error.empty()) throw ProtocolError("server error: " + server_error);
          if (receiver_error) std::rethrow_exception(receiver_error);
          throw SessionError("server closed the connection", core.output());
        }
        --finals_pending;
      }
      std::optional<ExitOutput> final = core.take_final();
      if (!final) throw ProtocolError("final output slot empty");
      ClientCore::RoundEnd end = core.finish_round(*final);
      if (end.done) break;
      if (!end.hit) sleep_ms(draft_ms);
      send_message(stream, *end.next);
    }
    send_message(stream, End{core.current_round()});
  } catch (const SessionError&) {
    shutdown_threads(true);
    throw;
  } catch (const ProtocolError&) {
    shutdown_threads(true);
    throw;
  } catch (const std::exception& e) {
    shutdown_threads(true);
    throw SessionError(e.what(), core.output());
  }
  shutdown_threads(false);

  ClientRunResult result;
  result.output = core.output();
  result.stats = core.stats();
  result.rounds = core.rounds();
  result.wall_ms = elapsed_ms(start);
  return result;
}

}  // namespace fsd
