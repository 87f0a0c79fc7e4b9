#include "fsd/adapter.hpp"

#include <istream>
#include <nlohmann/json.hpp>
#include <ostream>
#include <string>

#include "fsd/errors.hpp"
#include "fsd/specdec.hpp"

namespace fsd {

namespace {

using nlohmann::json;

TokenSeq token_list(const json& req, const char* field) {
  if (!req.contains(field) || !req[field].is_array()) {
    throw DomainError(std::string("'") + field + "' must be an array of token ids");
  }
  TokenSeq out;
  for (const json& v : req[field]) {
    if (!v.is_number_unsigned()) throw DomainError(std::string("'") + field + "' holds a non-token value");
    out.push_back(v.get<TokenId>());
  }
  return out;
}

int int_field(const json& req, const char* field) {
  if (!req.contains(field) || !req[field].is_number_integer()) {
    throw DomainError(std::string("'") + field + "' must be an integer");
  }
  return req[field].get<int>();
}

json handle_draft(const SyntheticParams& params, const json& req) {
  const TokenSeq prefix = token_list(req, "prefix");
  const int gamma = int_field(req, "gamma");
  if (gamma < 0 || gamma > 0xFFFF) throw DomainError("gamma out of range");
  if (prefix.empty()) throw DomainError("prefix must be non-empty");
  SyntheticDraft model(params);
  const DraftBatch batch = draft(model, prefix, gamma, SamplingMode::greedy, params.seed);
  return json{{"tokens", batch.tokens}, {"top_prob", batch.chosen_probs}};
}

json handle_verify(const SyntheticParams& params, const json& req) {
  const TokenSeq prefix = token_list(req, "prefix");
  const TokenSeq drafted = token_list(req, "draft");
  const int exit = int_field(req, "exit");
  if (prefix.empty()) throw DomainError("prefix must be non-empty");
  if (exit < 1 || exit > params.num_exits) throw DomainError("exit out of range");
  validate_tokens(prefix, params.vocab);
  validate_tokens(drafted, params.vocab);

  DraftBatch batch;
  batch.prefix_len = static_cast<std::uint32_t>(prefix.size());
  batch.tokens = drafted;
  const DistFn dist = [&params, exit](PrefixKey k) { return target_distribution(params, k, exit); };
  const VerifyResult r = verify_greedy(dist, PrefixKey::of(prefix), batch);
  return json{{"accepted", r.accepted}, {"next", r.output.back()}, {"confidence", r.confidence}};
}

}  // namespace

std::string handle_adapter_line(const SyntheticParams& params, std::string_view line) {
  json response;
  try {
    const json req = json::parse(line);
    if (!req.is_object() || !req.contains("op") || !req["op"].is_string()) {
      throw DomainError("request needs a string 'op'");
    }
    const std::string op = req["op"].get<std::string>();
    if (op == "draft") {
      response = handle_draft(params, req);
    } else if (op == "verify") {
      response = handle_verify(params, req);
    } else {
      throw DomainError("unknown op '" + op + "'");
    }
  } catch (const json::exception& e) {
    response = json{{"error", std::string("bad json: ") + e.what()}};
  } catch (const std::exception& e) {
    response = json{{"error", e.what()}};
  }
  return response.dump();
}

void run_model_adapter(const SyntheticParams& params, std::istream& in, std::ostream& out) {
  params.validate();
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out << handle_adapter_line(params, line) << '\n' << std::flush;
  }
}

}  // namespace fsd
