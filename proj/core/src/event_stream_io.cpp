#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "ammlab/errors.hpp"
#include "ammlab/market.hpp"

namespace ammlab {
namespace {

constexpr std::array<char, 8> kMagic{'A', 'M', 'M', 'E', 'V', 'S', '\0', '\0'};
constexpr std::uint32_t kVersion = 1;

// Anything above this is treated as a corrupt length field.
constexpr std::uint64_t kMaxLength = std::uint64_t{1} << 40;

template <typename UInt>
void put_le(std::ostream& out, UInt v) {
  std::array<char, sizeof(UInt)> buf{};
  for (std::size_t i = 0; i < sizeof(UInt); ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(buf.data(), buf.size());
}

template <typename UInt>
UInt get_le(std::istream& in) {
  std::array<unsigned char, sizeof(UInt)> buf{};
  in.read(reinterpret_cast<char*>(buf.data()), buf.size());
  if (!in) throw ContractError("event stream file is truncated");
  UInt v = 0;
  for (std::size_t i = 0; i < sizeof(UInt); ++i) v |= static_cast<UInt>(buf[i]) << (8 * i);
  return v;
}

std::uint64_t get_length(std::istream& in) {
  const auto v = get_le<std::uint64_t>(in);
  if (v > kMaxLength) throw ContractError("event stream file has an implausible length field");
  return v;
}

void put_bytes(std::ostream& out, const std::vector<std::uint8_t>& v) {
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size()));
}

std::vector<std::uint8_t> get_bytes(std::istream& in, std::size_t n) {
  std::vector<std::uint8_t> v(n);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n));
  if (!in) throw ContractError("event stream file is truncated");
  return v;
}

}  // namespace

void write_event_stream(std::ostream& out, const EventStream& stream) {
  out.write(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(out, kVersion);
  put_le<std::uint64_t>(out, stream.params_hash);
  put_le<std::uint64_t>(out, stream.master_seed);
  put_le<std::uint64_t>(out, stream.n_pools);
  put_le<std::uint64_t>(out, stream.paths.size());
  for (const auto& path : stream.paths) {
    put_le<std::uint64_t>(out, path.size());
    put_bytes(out, path.types);
    put_bytes(out, path.x_to_y);
    put_le<std::uint64_t>(out, path.normals.size());
    for (double z : path.normals) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(z));
  }
  if (!out) throw ContractError("failed writing event stream");
}

EventStream read_event_stream(std::istream& in) {
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw ContractError("not an event stream file (bad magic)");
  const auto version = get_le<std::uint32_t>(in);
  if (version != kVersion) throw ContractError("unsupported event stream version " + std::to_string(version));

  EventStream stream;
  stream.params_hash = get_le<std::uint64_t>(in);
  stream.master_seed = get_le<std::uint64_t>(in);
  stream.n_pools = get_length(in);
  const auto paths = get_length(in);
  stream.paths.resize(paths);
  for (auto& path : stream.paths) {
    const auto n_events = get_length(in);
    path.types = get_bytes(in, n_events);
    path.x_to_y = get_bytes(in, n_events);
    const auto n_normals = get_length(in);
    path.normals.resize(n_normals);
    for (auto& z : path.normals) z = std::bit_cast<double>(get_le<std::uint64_t>(in));

    std::size_t expected = 0;
    for (auto t : path.types) {
      if (t > stream.n_pools) throw ContractError("event stream has an event type beyond n_pools");
      expected += t == 0 ? stream.n_pools : 1;
    }
    if (expected != n_normals) throw ContractError("event stream normal count does not match its event types");
  }
  return stream;
}

void save_event_stream(const std::string& path, const EventStream& stream) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ContractError("cannot open " + path + " for writing");
  write_event_stream(out, stream);
}

EventStream load_event_stream(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ContractError("cannot open " + path);
  return read_event_stream(in);
}

}  // namespace ammlab
