#pragma once

// Newline-delimited JSON front end for the synthetic models, for callers
// that want to drive them out of process.
//
//   {"op":"draft","prefix":[..],"gamma":k}
//       -> {"tokens":[..],"top_prob":[..]}
//   {"op":"verify","prefix":[..],"draft":[..],"exit":i}
//       -> {"accepted":d,"next":id,"confidence":f}
//
// Bad requests get {"error":"..."} and the stream continues.

#include <iosfwd>
#include <string>
#include <string_view>

#include "fsd/toy_models.hpp"

namespace fsd {

std::string handle_adapter_line(const SyntheticParams& params, std::string_view line);
/// One response line per request line, in order, until EOF.
void run_model_adapter(const SyntheticParams& params, std::istream& in, std::ostream& out);

}  // namespace fsd
