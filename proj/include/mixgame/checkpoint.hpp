#ifndef MIXGAME_CHECKPOINT_HPP
#define MIXGAME_CHECKPOINT_HPP

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "mixgame/tensor.hpp"

namespace mixgame {

static_assert(std::endian::native == std::endian::little,
              "checkpoint blobs are little-endian");

struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Single-file checkpoint: magic, manifest length, JSON manifest mapping each
// tensor name to {shape, dtype, offset}, then a raw little-endian f64 blob.
inline void save_checkpoint(const std::string& path,
                            const std::vector<std::pair<std::string, Tensor>>& tensors) {
  nlohmann::ordered_json manifest;
  std::vector<double> blob;
  for (const auto& [name, t] : tensors) {
    manifest[name] = {{"shape", t.shape},
                      {"dtype", "f64"},
                      {"offset", blob.size() * sizeof(double)}};
    blob.insert(blob.end(), t.data.begin(), t.data.end());
  }
  const std::string m = manifest.dump();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open for writing: " + path);
  const char magic[8] = {'M', 'I', 'X', 'C', 'K', 'P', 'T', '1'};
  out.write(magic, 8);
  const std::uint64_t mlen = m.size();
  out.write(reinterpret_cast<const char*>(&mlen), 8);
  out.write(m.data(), static_cast<std::streamsize>(m.size()));
  out.write(reinterpret_cast<const char*>(blob.data()),
            static_cast<std::streamsize>(blob.size() * sizeof(double)));
  if (!out) throw CheckpointError("write failed: " + path);
}

inline std::map<std::string, Tensor> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, "MIXCKPT1", 8) != 0)
    throw CheckpointError("bad checkpoint magic: " + path);
  std::uint64_t mlen = 0;
  in.read(reinterpret_cast<char*>(&mlen), 8);
  std::string m(mlen, '\0');
  in.read(m.data(), static_cast<std::streamsize>(mlen));
  if (!in) throw CheckpointError("truncated manifest: " + path);
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(m);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("manifest parse error: ") + e.what());
  }
  std::vector<char> blob(std::istreambuf_iterator<char>(in), {});

  std::map<std::string, Tensor> out;
  for (const auto& [name, entry] : manifest.items()) {
    if (entry.at("dtype") != "f64") throw CheckpointError("unsupported dtype: " + name);
    const std::vector<int> shape = entry.at("shape").get<std::vector<int>>();
    const std::uint64_t offset = entry.at("offset").get<std::uint64_t>();
    Tensor t = Tensor::zeros(shape);
    const std::uint64_t bytes = t.data.size() * sizeof(double);
    if (offset + bytes > blob.size())
      throw CheckpointError("blob out of range for tensor: " + name);
    std::memcpy(t.data.data(), blob.data() + offset, bytes);
    out.emplace(name, std::move(t));
  }
  return out;
}

}  // namespace mixgame

#endif  // MIXGAME_CHECKPOINT_HPP
