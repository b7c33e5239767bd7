#include "wips/paths_io.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "wips/error.hpp"

namespace wips {

namespace {

constexpr char kMagic[8] = {'W', 'I', 'P', 'S', 'P', 'A', 'T', 'H'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
void put_array(std::ostream& out, const std::vector<T>& v) {
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(T)));
}

template <class T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  require(static_cast<bool>(in), Error::Code::kIo, "truncated path file");
  return v;
}

template <class T>
void get_array(std::istream& in, std::vector<T>& v, std::size_t count) {
  v.resize(count);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(count * sizeof(T)));
  require(static_cast<bool>(in), Error::Code::kIo, "truncated path file");
}

}  // namespace

void write_paths(std::ostream& out, const PathEnsemble& paths) {
  out.write(kMagic, sizeof kMagic);
  put(out, kVersion);
  put(out, static_cast<std::uint32_t>((paths.has_z() ? 1u : 0u) | (paths.has_x() ? 2u : 0u)));
  put(out, static_cast<std::uint64_t>(paths.n));
  put(out, static_cast<std::uint64_t>(paths.grid.steps));
  put(out, static_cast<std::uint64_t>(paths.dim));
  put(out, paths.grid.horizon);
  std::vector<std::int32_t> types(paths.types.begin(), paths.types.end());
  put_array(out, types);
  if (paths.has_z()) put_array(out, paths.z);
  if (paths.has_x()) put_array(out, paths.x);
  put_array(out, paths.dw);
  require(static_cast<bool>(out), Error::Code::kIo, "failed writing path file");
}

PathEnsemble read_paths(std::istream& in) {
  char magic[8];
  in.read(magic, sizeof magic);
  require(in && std::memcmp(magic, kMagic, sizeof kMagic) == 0, Error::Code::kIo, "not a path file");
  require(get<std::uint32_t>(in) == kVersion, Error::Code::kIo, "unsupported path file version");
  const auto flags = get<std::uint32_t>(in);
  PathEnsemble p;
  p.n = static_cast<std::size_t>(get<std::uint64_t>(in));
  p.grid.steps = static_cast<int>(get<std::uint64_t>(in));
  p.dim = static_cast<int>(get<std::uint64_t>(in));
  p.grid.horizon = get<double>(in);
  require(p.grid.steps >= 1 && p.dim >= 1 && p.grid.horizon > 0.0, Error::Code::kIo, "corrupt path header");
  std::vector<std::int32_t> types;
  get_array(in, types, p.n);
  p.types.assign(types.begin(), types.end());
  if (flags & 1u) get_array(in, p.z, p.n * p.path_stride());
  if (flags & 2u) get_array(in, p.x, p.n * p.path_stride());
  get_array(in, p.dw, p.n * p.noise_stride());
  return p;
}

void save_paths(const std::string& path, const PathEnsemble& paths) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), Error::Code::kIo, "cannot open " + path);
  write_paths(out, paths);
}

PathEnsemble load_paths(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), Error::Code::kIo, "cannot open " + path);
  return read_paths(in);
}

}  // namespace wips
