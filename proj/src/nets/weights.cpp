#include "cycpl/nets/weights.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include "cycpl/error.hpp"

namespace cycpl::nets {

namespace {

constexpr char kMagic[8] = {'C', 'P', 'W', 'T', '0', '0', '0', '1'};

void put_le(std::vector<unsigned char>& out, std::uint32_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const unsigned char> b) : b_(b) {}
  bool done() const { return pos_ == b_.size(); }
  std::uint32_t le(int bytes) {
    need(static_cast<std::size_t>(bytes));
    std::uint32_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint32_t>(b_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(bytes);
    return v;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
    pos_ += n;
    return s;
  }

 private:
  void need(std::size_t n) const {
    if (b_.size() - pos_ < n) fail(ErrorCode::TruncatedFile, "CPWT record is truncated");
  }
  std::span<const unsigned char> b_;
  std::size_t pos_ = 8;
};

}  // namespace

std::vector<unsigned char> encode_weights(const WeightMap& weights) {
  std::vector<unsigned char> out(std::begin(kMagic), std::end(kMagic));
  for (const auto& [name, arr] : weights) {
    if (name.size() > 0xffff) fail(ErrorCode::InvalidAttribute, "tensor name too long");
    if (ad::numel(arr.shape) != arr.data.size())
      fail(ErrorCode::ShapeMismatch, "tensor '" + name + "' shape/payload mismatch");
    put_le(out, static_cast<std::uint32_t>(name.size()), 2);
    out.insert(out.end(), name.begin(), name.end());
    put_le(out, static_cast<std::uint32_t>(arr.shape.size()), 4);
    for (std::size_t d : arr.shape) put_le(out, static_cast<std::uint32_t>(d), 4);
    for (float f : arr.data) put_le(out, std::bit_cast<std::uint32_t>(f), 4);
  }
  return out;
}

WeightMap decode_weights(std::span<const unsigned char> bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 8) != 0)
    fail(ErrorCode::BadMagic, "missing CPWT0001 header");
  Reader r(bytes);
  WeightMap out;
  while (!r.done()) {
    const std::size_t len = r.le(2);
    std::string name = r.str(len);
    const std::size_t ndim = r.le(4);
    NdArray arr;
    for (std::size_t i = 0; i < ndim; ++i) arr.shape.push_back(r.le(4));
    arr.data.resize(ad::numel(arr.shape));
    for (auto& f : arr.data) f = std::bit_cast<float>(r.le(4));
    if (out.contains(name)) fail(ErrorCode::DuplicateName, "tensor '" + name + "' appears twice");
    out.emplace(std::move(name), std::move(arr));
  }
  return out;
}

void save_weights(const WeightMap& weights, const std::filesystem::path& path) {
  const auto bytes = encode_weights(weights);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::Io, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::Io, "short write to " + path.string());
}

WeightMap load_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  try {
    return decode_weights(bytes);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

bool bit_equal(const WeightMap& a, const WeightMap& b) {
  if (a.size() != b.size()) return false;
  for (auto ia = a.begin(), ib = b.begin(); ia != a.end(); ++ia, ++ib) {
    if (ia->first != ib->first || ia->second.shape != ib->second.shape ||
        ia->second.data.size() != ib->second.data.size())
      return false;
    if (std::memcmp(ia->second.data.data(), ib->second.data.data(),
                    ia->second.data.size() * sizeof(float)) != 0)
      return false;
  }
  return true;
}

template <typename T>
ParamMap<T> to_params(const WeightMap& weights, bool trainable) {
  ParamMap<T> out;
  for (const auto& [name, arr] : weights) {
    std::vector<T> v(arr.data.begin(), arr.data.end());
    out.emplace(name, trainable ? ad::Tensor<T>::parameter(arr.shape, std::move(v))
                                : ad::Tensor<T>::constant(arr.shape, std::move(v)));
  }
  return out;
}

template <typename T>
WeightMap from_params(const ParamMap<T>& params) {
  WeightMap out;
  for (const auto& [name, t] : params) {
    NdArray arr;
    arr.shape = t.shape();
    arr.data.reserve(t.numel());
    for (T v : t.values()) arr.data.push_back(static_cast<float>(v));
    out.emplace(name, std::move(arr));
  }
  return out;
}

NdArray he_normal(ad::Shape shape, std::size_t fan_in, Rng& rng) {
  NdArray arr;
  arr.data.resize(ad::numel(shape));
  arr.shape = std::move(shape);
  const double sd = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (auto& v : arr.data) v = static_cast<float>(rng.normal() * sd);
  return arr;
}

template ParamMap<float> to_params(const WeightMap&, bool);
template ParamMap<double> to_params(const WeightMap&, bool);
template WeightMap from_params(const ParamMap<float>&);
template WeightMap from_params(const ParamMap<double>&);

}  // namespace cycpl::nets
