#include "sept/nn/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace sept::nn {

namespace {

constexpr char kMagic[8] = {'S', 'E', 'P', 'T', 'P', 'R', 'M', '1'};

void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) throw std::runtime_error("checkpoint: truncated stream");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

void put_string(std::ostream& os, const std::string& s) {
  put_u64(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& is) {
  const auto n = get_u64(is);
  if (n > (1u << 20)) throw std::runtime_error("checkpoint: implausible string length");
  std::string s(n, '\0');
  if (!is.read(s.data(), static_cast<std::streamsize>(n))) throw std::runtime_error("checkpoint: truncated stream");
  return s;
}

template <typename T>
void put_scalar(std::ostream& os, T v) {
  using Bits = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  Bits bits;
  std::memcpy(&bits, &v, sizeof(T));
  unsigned char b[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <typename T>
T get_scalar(std::istream& is) {
  using Bits = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  unsigned char b[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(b), sizeof(T))) throw std::runtime_error("checkpoint: truncated stream");
  Bits bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) bits |= static_cast<Bits>(b[i]) << (8 * i);
  T v;
  std::memcpy(&v, &bits, sizeof(T));
  return v;
}

}  // namespace

template <typename T>
void write_parameters(std::ostream& os, const ParameterSet<T>& params, const std::string& fingerprint) {
  os.write(kMagic, 8);
  const std::uint32_t width = sizeof(T);
  for (int i = 0; i < 4; ++i) os.put(static_cast<char>(width >> (8 * i)));
  put_string(os, fingerprint);
  put_u64(os, params.size());
  for (const auto& t : params.tensors) {
    put_string(os, t.name);
    put_u64(os, static_cast<std::uint64_t>(t.value.rows()));
    put_u64(os, static_cast<std::uint64_t>(t.value.cols()));
    for (Eigen::Index k = 0; k < t.value.size(); ++k) put_scalar<T>(os, t.value.data()[k]);
  }
  if (!os) throw std::runtime_error("checkpoint: write failed");
}

template <typename T>
ParameterSet<T> read_parameters(std::istream& is, const std::string& expected_fingerprint) {
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) throw std::runtime_error("checkpoint: bad magic");
  unsigned char wb[4];
  if (!is.read(reinterpret_cast<char*>(wb), 4)) throw std::runtime_error("checkpoint: truncated stream");
  const std::uint32_t width = wb[0] | (wb[1] << 8) | (wb[2] << 16) | (static_cast<std::uint32_t>(wb[3]) << 24);
  if (width != sizeof(T)) throw std::runtime_error("checkpoint: scalar width mismatch");
  const std::string fp = get_string(is);
  if (!expected_fingerprint.empty() && fp != expected_fingerprint)
    throw std::runtime_error("checkpoint: network fingerprint mismatch (" + fp + ")");
  const auto count = get_u64(is);
  ParameterSet<T> ps;
  for (std::uint64_t i = 0; i < count; ++i) {
    Tensor<T> t;
    t.name = get_string(is);
    const auto rows = get_u64(is);
    const auto cols = get_u64(is);
    if (rows * cols > (1ull << 32)) throw std::runtime_error("checkpoint: implausible tensor size");
    t.value.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index k = 0; k < t.value.size(); ++k) t.value.data()[k] = get_scalar<T>(is);
    ps.tensors.push_back(std::move(t));
  }
  return ps;
}

template <typename T>
void save_parameters(const std::filesystem::path& path, const ParameterSet<T>& params, const std::string& fingerprint) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("checkpoint: cannot open " + path.string());
  write_parameters(os, params, fingerprint);
}

template <typename T>
ParameterSet<T> load_parameters(const std::filesystem::path& path, const std::string& expected_fingerprint) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open " + path.string());
  return read_parameters<T>(is, expected_fingerprint);
}

template void write_parameters<float>(std::ostream&, const ParameterSet<float>&, const std::string&);
template void write_parameters<double>(std::ostream&, const ParameterSet<double>&, const std::string&);
template ParameterSet<float> read_parameters<float>(std::istream&, const std::string&);
template ParameterSet<double> read_parameters<double>(std::istream&, const std::string&);
template void save_parameters<float>(const std::filesystem::path&, const ParameterSet<float>&, const std::string&);
template void save_parameters<double>(const std::filesystem::path&, const ParameterSet<double>&, const std::string&);
template ParameterSet<float> load_parameters<float>(const std::filesystem::path&, const std::string&);
template ParameterSet<double> load_parameters<double>(const std::filesystem::path&, const std::string&);

}  // namespace sept::nn
