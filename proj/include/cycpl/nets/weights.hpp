#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "cycpl/autodiff/tensor.hpp"
#include "cycpl/rng.hpp"

namespace cycpl::nets {

struct NdArray {
  ad::Shape shape;
  std::vector<float> data;

  bool operator==(const NdArray&) const = default;
};

/// Named tensors, iterated (and serialized) in name order.
using WeightMap = std::map<std::string, NdArray>;

template <typename T>
using ParamMap = std::map<std::string, ad::Tensor<T>>;

// CPWT layout: "CPWT0001", then per record
//   u16 name length, UTF-8 name, u32 ndim, u32 dims[ndim], f32 LE payload.
std::vector<unsigned char> encode_weights(const WeightMap& weights);
WeightMap decode_weights(std::span<const unsigned char> bytes);
void save_weights(const WeightMap& weights, const std::filesystem::path& path);
WeightMap load_weights(const std::filesystem::path& path);

/// Bitwise equality of names, shapes and payloads.
bool bit_equal(const WeightMap& a, const WeightMap& b);

template <typename T>
ParamMap<T> to_params(const WeightMap& weights, bool trainable);

template <typename T>
WeightMap from_params(const ParamMap<T>& params);

/// Zero-mean normal with variance 2 / fan_in.
NdArray he_normal(ad::Shape shape, std::size_t fan_in, Rng& rng);

}  // namespace cycpl::nets
