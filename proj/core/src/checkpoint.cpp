#include "docrex/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "docrex/errors.hpp"

namespace docrex::diffmath {
namespace {

constexpr const char* kFormatTag = "docrex-checkpoint";

std::uint64_t to_little(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xffu) << (8 * (7 - i));
    return r;
  }
  return v;
}

}  // namespace

void write_checkpoint(std::ostream& out, const ParameterStore& params, const std::string& metadata_json) {
  nlohmann::json header;
  header["format"] = kFormatTag;
  header["version"] = kCheckpointVersion;
  nlohmann::json tensors = nlohmann::json::array();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Parameter& p = params.at(i);
    tensors.push_back({{"name", p.name}, {"shape", p.value.shape()}});
  }
  header["tensors"] = std::move(tensors);
  nlohmann::json meta = nlohmann::json::parse(metadata_json.empty() ? "{}" : metadata_json);
  if (!meta.is_object()) throw IoError("checkpoint metadata must be a JSON object");
  header["metadata"] = std::move(meta);
  out << header.dump() << '\n';
  for (std::size_t i = 0; i < params.size(); ++i) {
    for (double v : params.at(i).value.values()) {
      const std::uint64_t bits = to_little(std::bit_cast<std::uint64_t>(v));
      out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
    }
  }
  if (!out) throw IoError("failed writing checkpoint payload");
}

Checkpoint read_checkpoint(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw IoError("checkpoint: missing header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("checkpoint: malformed header: ") + e.what());
  }
  if (header.value("format", "") != kFormatTag) throw IoError("checkpoint: not a docrex checkpoint");
  if (header.value("version", -1) != kCheckpointVersion) {
    throw IoError("checkpoint: unsupported version " + header.value("version", nlohmann::json()).dump());
  }
  Checkpoint ck;
  for (const auto& t : header.at("tensors")) {
    Shape shape = t.at("shape").get<Shape>();
    std::vector<double> values(shape_size(shape));
    for (double& v : values) {
      std::uint64_t bits = 0;
      in.read(reinterpret_cast<char*>(&bits), sizeof bits);
      if (!in) throw IoError("checkpoint: truncated payload for " + t.at("name").get<std::string>());
      v = std::bit_cast<double>(to_little(bits));
    }
    ck.params.add(t.at("name").get<std::string>(), Tensor(std::move(shape), std::move(values)));
  }
  ck.metadata_json = header.at("metadata").dump();
  return ck;
}

void save_checkpoint(const std::string& path, const ParameterStore& params, const std::string& metadata_json) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  write_checkpoint(out, params, metadata_json);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path);
  return read_checkpoint(in);
}

}  // namespace docrex::diffmath
