#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "keyhead/errors.hpp"
#include "keyhead/tensor.hpp"

namespace keyhead {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

template <class Real>
struct DtypeTag;
template <>
struct DtypeTag<float> {
  static constexpr const char* name = "f32";
};
template <>
struct DtypeTag<double> {
  static constexpr const char* name = "f64";
};

// File layout: u64 little-endian header length, then a JSON object
// mapping tensor name -> {shape, dtype, offset}, then the raw value
// bytes. Offsets are relative to the start of the data section.
template <class Real>
void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, Tensor<Real>>>& tensors) {
  nlohmann::ordered_json header = nlohmann::ordered_json::object();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : tensors) {
    header[name] = {{"shape", t.shape()}, {"dtype", DtypeTag<Real>::name}, {"offset", offset}};
    offset += t.numel() * sizeof(Real);
  }
  std::string header_bytes = header.dump();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ContractError("save_checkpoint: cannot open " + path);
  std::uint64_t len = header_bytes.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(header_bytes.data(), static_cast<std::streamsize>(header_bytes.size()));
  for (const auto& [name, t] : tensors) {
    out.write(reinterpret_cast<const char*>(t.data().data()),
              static_cast<std::streamsize>(t.numel() * sizeof(Real)));
  }
  if (!out) throw ContractError("save_checkpoint: write failed for " + path);
}

template <class Real>
std::map<std::string, Tensor<Real>> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("load_checkpoint: cannot open " + path);
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in) throw ParseError("load_checkpoint: truncated header length in " + path);
  std::string header_bytes(len, '\0');
  in.read(header_bytes.data(), static_cast<std::streamsize>(len));
  if (!in) throw ParseError("load_checkpoint: truncated header in " + path);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_bytes);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("load_checkpoint: bad header JSON in " + path + ": " + e.what());
  }
  std::vector<char> blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  std::map<std::string, Tensor<Real>> result;
  for (auto it = header.begin(); it != header.end(); ++it) {
    const auto& meta = it.value();
    std::string dtype = meta.at("dtype").get<std::string>();
    if (dtype != DtypeTag<Real>::name) {
      throw ContractError("load_checkpoint: tensor '" + it.key() + "' has dtype " + dtype +
                          ", expected " + DtypeTag<Real>::name);
    }
    std::vector<int> shape = meta.at("shape").get<std::vector<int>>();
    Tensor<Real> t(shape);
    std::uint64_t offset = meta.at("offset").get<std::uint64_t>();
    std::uint64_t bytes = t.numel() * sizeof(Real);
    if (offset + bytes > blob.size()) {
      throw ParseError("load_checkpoint: tensor '" + it.key() + "' extends past end of " + path);
    }
    std::memcpy(t.data().data(), blob.data() + offset, bytes);
    result.emplace(it.key(), std::move(t));
  }
  return result;
}

}  // namespace keyhead
