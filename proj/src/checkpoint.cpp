#include "madnet/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string_view>

#include "madnet/error.hpp"

namespace madnet {

namespace {

constexpr std::string_view kMagic{"MADNN1\0", 7};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f32(std::vector<std::uint8_t>& out, double v) {
  put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::size_t position() const { return pos_; }
  void skip(std::size_t n) {
    need(n);
    pos_ += n;
  }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw DataError("checkpoint truncated at byte " + std::to_string(pos_));
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<std::uint8_t> encode_checkpoint(const NetworkSpec& spec, const NetworkState& state) {
  validate(spec);
  const NetworkState expected = zero_state(spec);
  if (state.layers.size() != expected.layers.size()) throw ShapeError("state does not match spec");
  std::vector<std::uint8_t> out(kMagic.begin(), kMagic.end());
  put_u32(out, static_cast<std::uint32_t>(spec.layers.size()));
  for (const LayerSpec& l : spec.layers) {
    put_u32(out, static_cast<std::uint32_t>(l.kind));
    put_u32(out, static_cast<std::uint32_t>(l.outputs));
    put_u32(out, static_cast<std::uint32_t>(l.side));
    put_u32(out, static_cast<std::uint32_t>(l.filterSize));
    put_u32(out, static_cast<std::uint32_t>(l.stride));
    put_u32(out, static_cast<std::uint32_t>(std::lround(l.dropProbability * 1e6)));
    put_u32(out, static_cast<std::uint32_t>(l.maxoutPieces));
    put_u32(out, l.centerInput ? 1u : 0u);
  }
  for (std::size_t i = 0; i < state.layers.size(); ++i) {
    require_shape(state.layers[i].weights, expected.layers[i].weights.shape(), "checkpoint weights");
    require_shape(state.layers[i].bias, expected.layers[i].bias.shape(), "checkpoint bias");
    for (double v : state.layers[i].weights.data()) put_f32(out, v);
    for (double v : state.layers[i].bias.data()) put_f32(out, v);
  }
  put_u64(out, fnv1a64(out));
  return out;
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kMagic.size() + 8 ||
      std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0) {
    throw DataError("not a checkpoint: bad magic");
  }
  const std::size_t body = bytes.size() - 8;
  std::uint64_t stored = 0;
  for (int i = 0; i < 8; ++i) stored |= static_cast<std::uint64_t>(bytes[body + i]) << (8 * i);
  if (stored != fnv1a64(bytes.first(body))) throw DataError("checkpoint checksum mismatch");

  Reader r(bytes.first(body));
  r.skip(kMagic.size());
  const std::uint32_t count = r.u32();
  if (count == 0 || count > 4096) throw DataError("checkpoint layer count out of range");
  Checkpoint cp;
  for (std::uint32_t i = 0; i < count; ++i) {
    LayerSpec l;
    const std::uint32_t kind = r.u32();
    if (kind > static_cast<std::uint32_t>(LayerKind::softmax)) throw DataError("checkpoint has unknown layer kind");
    l.kind = static_cast<LayerKind>(kind);
    l.outputs = static_cast<int>(r.u32());
    l.side = static_cast<int>(r.u32());
    l.filterSize = static_cast<int>(r.u32());
    l.stride = static_cast<int>(r.u32());
    l.dropProbability = static_cast<double>(r.u32()) / 1e6;
    l.maxoutPieces = static_cast<int>(r.u32());
    const std::uint32_t flags = r.u32();
    if (flags > 1) throw DataError("checkpoint layer " + std::to_string(i) + ": unknown flags");
    l.centerInput = flags == 1;
    cp.spec.layers.push_back(l);
  }
  try {
    cp.state = zero_state(cp.spec);
  } catch (const Error& e) {
    throw DataError(std::string("checkpoint spec invalid: ") + e.what());
  }
  for (auto& layer : cp.state.layers) {
    for (double& v : layer.weights.data()) v = r.f32();
    for (double& v : layer.bias.data()) v = r.f32();
  }
  if (r.position() != body) throw DataError("checkpoint has trailing bytes before checksum");
  if (!cp.state.all_finite()) throw DataError("checkpoint contains non-finite parameters");
  return cp;
}

void save_checkpoint(const std::filesystem::path& path, const NetworkSpec& spec, const NetworkState& state) {
  const std::vector<std::uint8_t> bytes = encode_checkpoint(spec, state);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

NetworkState round_to_checkpoint_precision(const NetworkState& state) {
  NetworkState out = state;
  for (auto& layer : out.layers) {
    for (double& v : layer.weights.data()) v = static_cast<float>(v);
    for (double& v : layer.bias.data()) v = static_cast<float>(v);
  }
  return out;
}

}  // namespace madnet
