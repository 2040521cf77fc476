#pragma once

#include <iosfwd>
#include <string>

#include "docrex/tape.hpp"

namespace docrex::diffmath {

inline constexpr int kCheckpointVersion = 1;

// One file: a single-line JSON header naming every tensor and its shape plus
// free-form metadata, a newline, then the raw little-endian f64 payloads in
// header order.
struct Checkpoint {
  ParameterStore params;
  std::string metadata_json = "{}";  // must be a JSON object
};

void write_checkpoint(std::ostream& out, const ParameterStore& params, const std::string& metadata_json);
Checkpoint read_checkpoint(std::istream& in);

void save_checkpoint(const std::string& path, const ParameterStore& params, const std::string& metadata_json);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace docrex::diffmath
