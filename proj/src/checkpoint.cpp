#include "roinet/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace roinet {

namespace {

constexpr char kMagic[4] = {'R', 'S', 'C', '1'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ofstream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_f64(std::ofstream& out, double v) {
  std::uint64_t u;
  std::memcpy(&u, &v, 8);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t get_u32(std::ifstream& in, const std::string& path) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (in.gcount() != 4) throw FormatError(path + ": truncated checkpoint");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

double get_f64(std::ifstream& in, const std::string& path) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (in.gcount() != 8) throw FormatError(path + ": truncated checkpoint");
  std::uint64_t u = 0;
  for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  double v;
  std::memcpy(&v, &u, 8);
  return v;
}

}  // namespace

void save_checkpoint(const Network& net, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(kMagic, 4);
  put_u32(out, kVersion);
  const std::string spec = spec_to_text(net.spec());
  put_u32(out, static_cast<std::uint32_t>(spec.size()));
  out.write(spec.data(), static_cast<std::streamsize>(spec.size()));
  put_u32(out, static_cast<std::uint32_t>(net.params().size()));
  for (const ParamEntry& p : net.params()) {
    put_u32(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    put_u32(out, static_cast<std::uint32_t>(p.tensor.rank()));
    for (int d = 0; d < p.tensor.rank(); ++d)
      put_u32(out, static_cast<std::uint32_t>(p.tensor.dim(d)));
    for (long long i = 0; i < p.tensor.numel(); ++i) put_f64(out, p.tensor[i]);
  }
  if (!out) throw IoError("write failed for " + path);
}

Network load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0)
    throw FormatError(path + ": bad checkpoint magic");
  const std::uint32_t version = get_u32(in, path);
  if (version != kVersion)
    throw FormatError(path + ": unsupported checkpoint version " +
                      std::to_string(version));
  const std::uint32_t spec_len = get_u32(in, path);
  std::string spec_text(spec_len, '\0');
  in.read(spec_text.data(), spec_len);
  if (in.gcount() != static_cast<std::streamsize>(spec_len))
    throw FormatError(path + ": truncated spec block");
  NetworkSpec spec = spec_from_text(spec_text);

  const std::uint32_t n_params = get_u32(in, path);
  std::vector<ParamEntry> params;
  params.reserve(n_params);
  for (std::uint32_t i = 0; i < n_params; ++i) {
    const std::uint32_t name_len = get_u32(in, path);
    if (name_len > 4096) throw FormatError(path + ": parameter name too long");
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (in.gcount() != static_cast<std::streamsize>(name_len))
      throw FormatError(path + ": truncated parameter name");
    const std::uint32_t rank = get_u32(in, path);
    if (rank > 8) throw FormatError(path + ": parameter rank out of range");
    Shape shape(rank);
    long long numel = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      const std::uint32_t e = get_u32(in, path);
      if (e == 0 || e > (1u << 24)) throw FormatError(path + ": extent out of range");
      shape[d] = static_cast<int>(e);
      numel *= e;
    }
    Tensor t(shape);
    for (long long k = 0; k < numel; ++k) t[k] = get_f64(in, path);
    params.push_back({std::move(name), std::move(t)});
  }
  try {
    return Network(std::move(spec), std::move(params));
  } catch (const Error& e) {
    // Spec/parameter disagreement is a malformed file, whatever the
    // construction path throws.
    throw FormatError(path + ": " + e.what());
  }
}

}  // namespace roinet
