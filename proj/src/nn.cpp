#include "vaerl/nn.hpp"

#include <zlib.h>

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <nlohmann/json.hpp>

#include "vaerl/io.hpp"

namespace vaerl::nn {

namespace {

constexpr std::array<char, 8> kMagic = {'V', 'A', 'E', 'R', 'L', 'N', 'N', '\0'};

static_assert(std::numeric_limits<float>::is_iec559, "checkpoint format requires IEEE-754 floats");

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 0; s < 32; s += 8) out.push_back(static_cast<std::uint8_t>((v >> s) & 0xff));
}

void put_f32(std::vector<std::uint8_t>& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  void need(std::size_t n, const char* what) const {
    if (pos_ + n > bytes_.size())
      throw CorruptCheckpoint(std::string("checkpoint truncated while reading ") + what);
  }
  std::uint16_t u16(const char* what) {
    need(2, what);
    std::uint16_t v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32("parameters")); }
  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    need(n, what);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t position() const { return pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, bytes.data(), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}

}  // namespace

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::relu:
      return "relu";
    case Activation::tanh:
      return "tanh";
    case Activation::sigmoid:
      return "sigmoid";
    case Activation::identity:
      return "identity";
  }
  return "identity";
}

Activation activation_from_string(std::string_view name) {
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  if (name == "sigmoid") return Activation::sigmoid;
  if (name == "identity") return Activation::identity;
  throw InvalidArgument("unknown activation '" + std::string(name) + "'");
}

std::vector<std::uint8_t> save_checkpoint(const DenseNet& net) {
  nlohmann::json header;
  header["input_dim"] = net.input_dim();
  header["output_dim"] = net.output_dim();
  auto& layers = header["layers"] = nlohmann::json::array();
  for (const auto& l : net.layers())
    layers.push_back({{"in", l.in_dim()}, {"out", l.out_dim()}, {"activation", std::string(to_string(l.activation))}});
  const std::string text = header.dump();

  std::vector<std::uint8_t> out(kMagic.begin(), kMagic.end());
  put_u16(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  for (const auto& l : net.layers()) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) put_f32(out, l.weight(r, c));
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) put_f32(out, l.bias(r));
  }
  put_u32(out, crc32_of(out));
  return out;
}

DenseNet load_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kMagic.size() + 2 + 4 + 4) throw CorruptCheckpoint("checkpoint truncated: too short");
  if (!std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) throw CorruptCheckpoint("bad checkpoint magic");

  Reader rd(bytes);
  rd.take(kMagic.size(), "magic");
  const std::uint16_t version = rd.u16("version");
  if (version != kCheckpointVersion)
    throw VersionMismatch("checkpoint version " + std::to_string(version) + " unsupported (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  const std::uint32_t header_len = rd.u32("header length");
  auto header_bytes = rd.take(header_len, "header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_bytes.begin(), header_bytes.end());
  } catch (const nlohmann::json::exception& e) {
    throw CorruptCheckpoint(std::string("checkpoint header is not valid JSON: ") + e.what());
  }

  std::vector<Layer<float>> layers;
  try {
    for (const auto& lj : header.at("layers")) {
      const int in = lj.at("in").get<int>();
      const int out = lj.at("out").get<int>();
      if (in <= 0 || out <= 0) throw CorruptCheckpoint("checkpoint header has non-positive layer width");
      Layer<float> l;
      l.weight.resize(out, in);
      l.bias.resize(out);
      l.activation = activation_from_string(lj.at("activation").get<std::string>());
      layers.push_back(std::move(l));
    }
  } catch (const nlohmann::json::exception& e) {
    throw CorruptCheckpoint(std::string("checkpoint header malformed: ") + e.what());
  }

  for (auto& l : layers) {
    rd.need(static_cast<std::size_t>(l.weight.size() + l.bias.size()) * 4 + 4, "parameters");
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = rd.f32();
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias(r) = rd.f32();
  }
  const std::size_t payload_end = rd.position();
  const std::uint32_t stored = rd.u32("checksum");
  if (rd.position() != bytes.size()) throw CorruptCheckpoint("trailing bytes after checkpoint checksum");
  if (stored != crc32_of(bytes.first(payload_end))) throw CorruptCheckpoint("checkpoint checksum mismatch");

  try {
    return DenseNet(std::move(layers));
  } catch (const DimensionError& e) {
    throw CorruptCheckpoint(std::string("checkpoint architecture invalid: ") + e.what());
  }
}

void save_checkpoint_file(const DenseNet& net, const std::string& path) {
  const auto bytes = save_checkpoint(net);
  io::write_file_atomic(path, std::string(bytes.begin(), bytes.end()));
}

DenseNet load_checkpoint_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifact("cannot open checkpoint '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return load_checkpoint(bytes);
}

std::uint32_t parameter_checksum(const DenseNet& net) {
  // The checkpoint ends with the CRC of everything before it. Hashing the
  // whole buffer including that trailer would give the same residue for every net.
  const auto bytes = save_checkpoint(net);
  return crc32_of(std::span<const std::uint8_t>(bytes).first(bytes.size() - 4));
}

}  // namespace vaerl::nn
