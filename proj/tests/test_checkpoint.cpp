#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <random>

#include "keyhead/checkpoint.hpp"

using namespace keyhead;

namespace {

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("checkpoint round trip is bit exact") {
  std::mt19937_64 rng(5);
  std::vector<std::pair<std::string, Tensor<float>>> tensors;
  tensors.emplace_back("embed", Tensor<float>::randn({7, 3}, rng, 2.5f));
  tensors.emplace_back("bias", Tensor<float>::from_data({4}, {-0.0f, 1e-38f, 3.25f, -7e8f}));
  tensors.emplace_back("scalar", Tensor<float>::scalar(0.1f));

  const std::string path = "ckpt_test_f32.bin";
  save_checkpoint(path, tensors);
  auto loaded = load_checkpoint<float>(path);
  REQUIRE(loaded.size() == tensors.size());
  for (const auto& [name, t] : tensors) {
    REQUIRE(loaded.count(name) == 1);
    const auto& l = loaded.at(name);
    CHECK(l.shape() == t.shape());
    CHECK(std::memcmp(l.data().data(), t.data().data(), t.numel() * sizeof(float)) == 0);
  }

  // Saving what was loaded reproduces the file byte for byte.
  std::vector<std::pair<std::string, Tensor<float>>> reordered(loaded.begin(), loaded.end());
  std::sort(reordered.begin(), reordered.end(), [&](const auto& a, const auto& b) {
    for (const auto& [name, t] : tensors) {
      if (name == a.first) return true;
      if (name == b.first) return false;
    }
    return false;
  });
  const std::string path2 = "ckpt_test_f32_copy.bin";
  save_checkpoint(path2, reordered);
  CHECK(read_bytes(path) == read_bytes(path2));
  std::remove(path.c_str());
  std::remove(path2.c_str());
}

TEST_CASE("checkpoint dtype mismatch is rejected") {
  std::vector<std::pair<std::string, Tensor<double>>> tensors;
  tensors.emplace_back("w", Tensor<double>::from_data({2}, {1.0, 2.0}));
  const std::string path = "ckpt_test_f64.bin";
  save_checkpoint(path, tensors);
  CHECK_THROWS_AS(load_checkpoint<float>(path), ContractError);
  auto ok = load_checkpoint<double>(path);
  CHECK(ok.at("w").at(1) == 2.0);
  std::remove(path.c_str());
}

TEST_CASE("checkpoint load errors on missing or truncated files") {
  CHECK_THROWS_AS(load_checkpoint<float>("does_not_exist.bin"), ParseError);
  const std::string path = "ckpt_truncated.bin";
  {
    std::ofstream out(path, std::ios::binary);
    out.write("\x04\x00", 2);
  }
  CHECK_THROWS_AS(load_checkpoint<float>(path), ParseError);
  std::remove(path.c_str());
}
