#include "fsd/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <exception>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "fsd/errors.hpp"
#include "fsd/format.hpp"
#include "fsd/tcp.hpp"

namespace fsd {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) return out;
    start = pos + 1;
  }
}

template <typename T>
bool parse_int(std::string_view s, T& out) {
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  std::size_t used = 0;
  try {
    out = std::stod(s, &used);
  } catch (const std::exception&) {
    return false;
  }
  return used == s.size() && std::isfinite(out);
}

bool parse_bool(const std::string& s, bool& out) {
  if (s == "true" || s == "1" || s == "yes") {
    out = true;
    return true;
  }
  if (s == "false" || s == "0" || s == "no") {
    out = false;
    return true;
  }
  return false;
}

bool parse_seeds(const std::string& s, std::vector<std::uint64_t>& out) {
  out.clear();
  if (const std::size_t dots = s.find(".."); dots != std::string::npos) {
    std::uint64_t lo = 0;
    std::uint64_t hi = 0;
    if (!parse_int(trim(s.substr(0, dots)), lo) || !parse_int(trim(s.substr(dots + 2)), hi) || lo > hi ||
        hi - lo >= 1'000'000) {
      return false;
    }
    for (std::uint64_t v = lo; v <= hi; ++v) out.push_back(v);
    return true;
  }
  for (const std::string& part : split(s, ',')) {
    std::uint64_t v = 0;
    if (!parse_int(part, v)) return false;
    out.push_back(v);
  }
  return !out.empty();
}

bool parse_tokens(const std::string& s, TokenSeq& out) {
  out.clear();
  for (const std::string& part : split(s, ',')) {
    TokenId v = 0;
    if (!parse_int(part, v)) return false;
    out.push_back(v);
  }
  return !out.empty();
}

bool parse_reals(const std::string& s, std::vector<double>& out) {
  out.clear();
  if (trim(s).empty()) return true;
  for (const std::string& part : split(s, ',')) {
    double v = 0;
    if (!parse_double(part, v)) return false;
    out.push_back(v);
  }
  return true;
}

template <typename F>
bool parse_enum(const std::string& s, F parse) {
  try {
    parse(s);
    return true;
  } catch (const DomainError&) {
    return false;
  }
}

}  // namespace

// --- config ------------------------------------------------------------------

ExperimentConfig ExperimentConfig::parse(std::string_view text) {
  ExperimentConfig c;
  std::vector<std::string> problems;
  std::set<std::string> seen;
  bool beta_given = false;
  bool payload_given = false;

  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    if (const std::size_t hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    const std::string line = trim(raw);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      problems.push_back("line " + std::to_string(lineno) + ": expected key = value");
      continue;
    }
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (!seen.insert(key).second) {
      problems.push_back(key + ": given more than once");
      continue;
    }
    auto bad = [&] { problems.push_back(key + ": invalid value '" + value + "'"); };

    if (key == "mode") {
      if (parse_enum(value, parse_mode)) c.mode = parse_mode(value); else bad();
    } else if (key == "transport") {
      if (value == "sim") c.transport = Transport::sim;
      else if (value == "tcp") c.transport = Transport::tcp;
      else bad();
    } else if (key == "host") {
      if (value.empty()) bad(); else c.host = value;
    } else if (key == "port") {
      if (!parse_int(value, c.port)) bad();
    } else if (key == "seeds" || key == "seed") {
      if (!parse_seeds(value, c.seeds)) bad();
    } else if (key == "vocab") {
      if (!parse_int(value, c.model.vocab)) bad();
    } else if (key == "exits") {
      if (!parse_int(value, c.model.num_exits)) bad();
    } else if (key == "alpha") {
      if (!parse_double(value, c.model.alpha)) bad();
    } else if (key == "beta") {
      if (parse_reals(value, c.model.beta)) beta_given = true; else bad();
    } else if (key == "sharpness") {
      if (!parse_double(value, c.model.sharpness)) bad();
    } else if (key == "gamma") {
      if (!parse_int(value, c.client.gamma)) bad();
    } else if (key == "n") {
      if (!parse_int(value, c.client.total_tokens)) bad();
    } else if (key == "threads") {
      if (!parse_int(value, c.client.worker_threads)) bad();
    } else if (key == "client_queue") {
      if (parse_enum(value, parse_queue_strategy)) c.client.queue = parse_queue_strategy(value); else bad();
    } else if (key == "server_queue") {
      if (parse_enum(value, parse_queue_strategy)) c.server_queue = parse_queue_strategy(value); else bad();
    } else if (key == "verify") {
      if (parse_enum(value, parse_verify_mode)) c.client.verify = parse_verify_mode(value); else bad();
    } else if (key == "payload") {
      payload_given = true;
      if (value == "compact") c.client.payload = PayloadMode::compact;
      else if (value == "full") c.client.payload = PayloadMode::full;
      else bad();
    } else if (key == "t_c") {
      if (!parse_double(value, c.latency.t_c)) bad();
    } else if (key == "t_p") {
      if (!parse_double(value, c.latency.t_p)) bad();
    } else if (key == "t_q") {
      if (!parse_double(value, c.latency.t_q)) bad();
    } else if (key == "t_r") {
      if (!parse_double(value, c.latency.t_r)) bad();
    } else if (key == "prompt") {
      if (!parse_tokens(value, c.prompt)) bad();
    } else if (key == "force_miss_period") {
      if (!parse_int(value, c.force_miss_period)) bad();
    } else if (key == "emulate_latency") {
      if (!parse_bool(value, c.emulate_latency)) bad();
    } else {
      problems.push_back(key + ": unknown key");
    }
  }

  if (!beta_given) c.model.beta = default_beta(std::max(c.model.num_exits, 1));
  if (!payload_given && c.client.verify == VerifyMode::stochastic) c.client.payload = PayloadMode::full;
  c.latency_given = seen.contains("t_c") && seen.contains("t_p") && seen.contains("t_q");
  if (c.transport == Transport::sim) {
    for (const char* k : {"t_c", "t_p", "t_q"}) {
      if (!seen.contains(k)) problems.push_back(std::string(k) + ": required for sim transport");
    }
  }
  if (c.transport == Transport::tcp && c.emulate_latency && !c.latency_given) {
    problems.push_back("emulate_latency: needs t_c, t_p and t_q");
  }

  if (problems.empty()) {
    try {
      c.validate();
    } catch (const ConfigError& e) {
      problems.insert(problems.end(), e.problems().begin(), e.problems().end());
    }
  }
  if (!problems.empty()) throw ConfigError(std::move(problems));
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"config: cannot open " + path});
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void ExperimentConfig::validate() const {
  std::vector<std::string> problems;
  auto check = [&](const char* field, auto&& fn) {
    try {
      fn();
    } catch (const DomainError& e) {
      problems.push_back(std::string(field) + ": " + e.what());
    }
  };
  check("model", [&] { model.validate(); });
  check("client", [&] { client.validate(); });
  if (transport == Transport::sim && !latency_given) {
    problems.emplace_back("t_c/t_p/t_q: required for sim transport");
  }
  if (!(latency.t_c >= 0 && latency.t_p >= 0 && latency.t_q >= 0 && latency.t_r >= 0)) {
    problems.emplace_back("latency: values must be non-negative");
  }
  if (transport == Transport::tcp && host.empty()) problems.emplace_back("host: required for tcp");
  if (server_queue == QueueStrategy::random) problems.emplace_back("server_queue: priority or fifo");
  if (seeds.empty()) problems.emplace_back("seeds: at least one seed");
  if (prompt.empty()) problems.emplace_back("prompt: must be non-empty");
  for (TokenId t : prompt) {
    if (t >= model.vocab) {
      problems.emplace_back("prompt: token " + std::to_string(t) + " outside vocabulary");
      break;
    }
  }
  if (force_miss_period < 0) problems.emplace_back("force_miss_period: must be >= 0");
  if (client.total_tokens > 0x10000) problems.emplace_back("n: at most 65536");
  if (client.payload == PayloadMode::full && model.vocab > kMaxFullModeVocab) {
    problems.emplace_back("payload: full mode needs vocab <= 1024");
  }
  if (!problems.empty()) throw ConfigError(std::move(problems));
}

ExperimentConfig ExperimentConfig::for_run(Mode m, std::uint64_t seed) const {
  ExperimentConfig c = *this;
  c.mode = m;
  c.model.seed = seed;
  c.client.seed = seed;
  c.seeds = {seed};
  return c;
}

Scenario ExperimentConfig::scenario() const {
  Scenario s;
  s.mode = mode;
  s.model = model;
  s.client = client;
  s.server_queue = server_queue;
  s.latency = latency;
  s.prompt = prompt;
  s.force_miss_period = force_miss_period;
  return s;
}

// --- runs --------------------------------------------------------------------

namespace {

RunRecord run_tcp(const ExperimentConfig& cfg) {
  SyntheticDraft draft_model(cfg.model);
  SessionSpec spec;
  spec.mode = cfg.mode;
  spec.num_exits = static_cast<std::uint16_t>(cfg.model.num_exits);
  spec.prompt = cfg.prompt;
  if (cfg.emulate_latency) spec.emulated_draft_ms = cfg.latency.t_p;

  ClientRunResult client;
  std::vector<ServerRoundStats> server_rounds;

  if (cfg.port == 0) {
    TcpListener listener = TcpListener::bind("127.0.0.1", 0);
    ServeOptions opts;
    opts.model = cfg.model;
    opts.server_queue = cfg.server_queue;
    if (cfg.emulate_latency) opts.emulated_verify_ms = cfg.latency.t_q;
    ServeReport report;
    std::exception_ptr server_error;
    std::thread server([&] {
      try {
        report = serve_session(listener.accept(), opts);
      } catch (...) {
        server_error = std::current_exception();
      }
    });
    try {
      TcpStream stream = TcpStream::connect("127.0.0.1", listener.port());
      client = client_generate(cfg.client, draft_model, stream, spec);
    } catch (...) {
      server.join();
      throw;
    }
    server.join();
    if (server_error) std::rethrow_exception(server_error);
    server_rounds = std::move(report.rounds);
  } else {
    TcpStream stream = TcpStream::connect(cfg.host, cfg.port);
    client = client_generate(cfg.client, draft_model, stream, spec);
  }

  RunRecord r;
  r.mode = cfg.mode;
  r.output = std::move(client.output);
  r.rounds = std::move(client.rounds);
  r.wall_ms = client.wall_ms;
  r.metrics = merge_metrics(client.stats, r.rounds, server_rounds);
  return r;
}

}  // namespace

RunRecord run_single(const ExperimentConfig& config, std::uint64_t seed) {
  const ExperimentConfig cfg = config.for_run(config.mode, seed);
  cfg.validate();
  RunRecord r;
  if (cfg.transport == Transport::sim) {
    SimResult sim = sim_run(cfg.scenario());
    r.mode = cfg.mode;
    r.output = std::move(sim.output);
    r.metrics = sim.metrics;
    r.rounds = std::move(sim.rounds);
    r.wall_ms = sim.wall_ms;
    r.trace = std::move(sim.trace);
  } else {
    r = run_tcp(cfg);
  }
  r.seed = seed;
  return r;
}

std::vector<RunRecord> run_experiment(const ExperimentConfig& config) {
  std::vector<std::uint64_t> seeds = config.seeds;
  std::sort(seeds.begin(), seeds.end());
  std::vector<RunRecord> out;
  out.reserve(seeds.size());
  for (std::uint64_t s : seeds) out.push_back(run_single(config, s));
  return out;
}

// --- CSV ---------------------------------------------------------------------

std::string summary_csv_header() {
  return "mode,n,gamma,threads,client_q,server_q,seed,tau,miss_rate,avg_ee,wall_ms";
}

std::string summary_csv_row(const ExperimentConfig& config, const RunRecord& record) {
  const MetricsSummary s = metrics_finalize(record.metrics);
  std::string row;
  row += to_string(record.mode);
  row += ',' + std::to_string(config.client.total_tokens);
  row += ',' + std::to_string(config.client.gamma);
  row += ',' + std::to_string(config.client.worker_threads);
  row += ',';
  row += to_string(config.client.queue);
  row += ',';
  row += to_string(config.server_queue);
  row += ',' + std::to_string(record.seed);
  row += ',' + format_real(s.tau);
  row += ',' + format_real(s.miss_rate);
  row += ',' + format_real(s.avg_ee);
  row += ',' + format_real(record.wall_ms);
  return row;
}

std::string summary_csv(const ExperimentConfig& config, const std::vector<RunRecord>& records) {
  std::string out = summary_csv_header() + '\n';
  for (const RunRecord& r : records) out += summary_csv_row(config, r) + '\n';
  return out;
}

std::string per_round_csv(const std::vector<RunRecord>& records) {
  std::string out = "seed,round,delta,tau_inst,hit,earliest_exit,draft_calls\n";
  for (const RunRecord& rec : records) {
    for (const RoundRecord& r : rec.rounds) {
      out += std::to_string(rec.seed) + ',' + std::to_string(r.round) + ',' + std::to_string(r.delta) +
             ',' + std::to_string(r.tau_inst()) + ',' + (r.hit ? "1" : "0") + ',' +
             std::to_string(r.earliest_exit) + ',' + std::to_string(r.draft_calls) + '\n';
    }
  }
  return out;
}

std::string trace_text(const RunRecord& record) {
  std::string out = "time_ms,actor,event,round,detail\n";
  for (const std::string& line : record.trace) out += line + '\n';
  return out;
}

// --- compare -----------------------------------------------------------------

double CompareReport::mean_speedup_ar_sd() const {
  if (rows.empty()) return std::nan("");
  double sum = 0;
  for (const CompareRow& r : rows) sum += r.speedup_ar_sd();
  return sum / static_cast<double>(rows.size());
}

double CompareReport::mean_speedup_sd_fsd() const {
  if (rows.empty()) return std::nan("");
  double sum = 0;
  for (const CompareRow& r : rows) sum += r.speedup_sd_fsd();
  return sum / static_cast<double>(rows.size());
}

CompareReport compare_modes(const ExperimentConfig& config) {
  std::vector<std::uint64_t> seeds = config.seeds;
  std::sort(seeds.begin(), seeds.end());
  CompareReport report;
  for (std::uint64_t seed : seeds) {
    ExperimentConfig cfg = config;
    cfg.mode = Mode::ar;
    const RunRecord ar = run_single(cfg, seed);
    cfg.mode = Mode::sd;
    const RunRecord sd = run_single(cfg, seed);
    cfg.mode = Mode::fsd;
    const RunRecord fsd = run_single(cfg, seed);

    const std::size_t n = config.client.total_tokens;
    auto head_equal = [n](const TokenSeq& a, const TokenSeq& b) {
      return a.size() >= n && b.size() >= n && std::equal(a.begin(), a.begin() + n, b.begin());
    };
    CompareRow row;
    row.seed = seed;
    row.tokens_match = head_equal(ar.output, sd.output) && sd.output == fsd.output;
    if (config.client.verify == VerifyMode::greedy && !row.tokens_match) {
      throw ExactnessError("seed " + std::to_string(seed) + ": AR, SD and FSD token streams differ");
    }
    row.ar_ms = ar.wall_ms;
    row.sd_ms = sd.wall_ms;
    row.fsd_ms = fsd.wall_ms;
    const MetricsSummary s_sd = metrics_finalize(sd.metrics);
    const MetricsSummary s_fsd = metrics_finalize(fsd.metrics);
    row.tau_sd = s_sd.tau;
    row.tau_fsd = s_fsd.tau;
    row.miss_rate = s_fsd.miss_rate;

    LatencyParams p;
    p.t_p = config.latency.t_p;
    p.t_q = config.latency.t_q;
    p.t_c = config.latency.t_c;
    p.t_r = config.latency.t_r;
    p.gamma = config.client.gamma;
    p.n = n;
    row.predicted_ar_ms = latency_ar(p);
    p.tau = s_sd.tau;
    row.predicted_sd_ms = latency_sd(p);
    p.tau = s_fsd.tau;
    p.miss_rate = s_fsd.miss_rate;
    row.predicted_fsd_ms = latency_fsd(p);
    report.rows.push_back(row);
  }
  return report;
}

std::string compare_csv(const CompareReport& report) {
  std::string out =
      "seed,ar_ms,sd_ms,fsd_ms,tau_sd,tau_fsd,miss_rate,speedup_ar_sd,speedup_sd_fsd,"
      "predicted_ar_ms,predicted_sd_ms,predicted_fsd_ms,predicted_speedup_ar_sd,"
      "predicted_speedup_sd_fsd,tokens_match\n";
  for (const CompareRow& r : report.rows) {
    out += std::to_string(r.seed);
    for (double v : {r.ar_ms, r.sd_ms, r.fsd_ms, r.tau_sd, r.tau_fsd, r.miss_rate, r.speedup_ar_sd(),
                     r.speedup_sd_fsd(), r.predicted_ar_ms, r.predicted_sd_ms, r.predicted_fsd_ms,
                     r.predicted_ar_sd(), r.predicted_sd_fsd()}) {
      out += ',' + format_real(v);
    }
    out += r.tokens_match ? ",1\n" : ",0\n";
  }
  out += "# mean_speedup_ar_sd=" + format_real(report.mean_speedup_ar_sd()) +
         " mean_speedup_sd_fsd=" + format_real(report.mean_speedup_sd_fsd()) + '\n';
  return out;
}

}  // namespace fsd
