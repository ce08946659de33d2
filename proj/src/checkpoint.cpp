#include "cotpot/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace cotpot::model {

namespace {

constexpr char kMagic[8] = {'C', 'O', 'T', 'P', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, const std::string& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw CheckpointError(path + ": truncated checkpoint");
  return v;
}

}  // namespace

void save_checkpoint(const Parameters& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot open " + path + " for writing");
  out.write(kMagic, sizeof(kMagic));
  write_pod(out, kVersion);
  const ModelConfig& c = params.config;
  write_pod(out, static_cast<std::int32_t>(c.vocab_size));
  write_pod(out, static_cast<std::int32_t>(c.d_model));
  write_pod(out, static_cast<std::int32_t>(c.n_layers));
  write_pod(out, static_cast<std::int32_t>(c.n_heads));
  write_pod(out, static_cast<std::int32_t>(c.d_ff));
  write_pod(out, static_cast<std::int32_t>(c.max_seq_len));
  write_pod(out, c.dropout_rate);
  write_pod(out, static_cast<std::uint64_t>(c.init_seed));
  params.visit([&](const std::string&, const Tensor& t) {
    write_pod(out, static_cast<std::int32_t>(t.rows));
    write_pod(out, static_cast<std::int32_t>(t.cols));
    out.write(reinterpret_cast<const char*>(t.data()),
              static_cast<std::streamsize>(t.size() * sizeof(double)));
  });
  if (!out) throw CheckpointError("write failed for " + path);
}

Parameters load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointError(path + ": not a cotpot checkpoint");
  }
  auto version = read_pod<std::uint32_t>(in, path);
  if (version != kVersion) {
    throw CheckpointError(path + ": unsupported checkpoint version " +
                          std::to_string(version));
  }
  ModelConfig c;
  c.vocab_size = read_pod<std::int32_t>(in, path);
  c.d_model = read_pod<std::int32_t>(in, path);
  c.n_layers = read_pod<std::int32_t>(in, path);
  c.n_heads = read_pod<std::int32_t>(in, path);
  c.d_ff = read_pod<std::int32_t>(in, path);
  c.max_seq_len = read_pod<std::int32_t>(in, path);
  c.dropout_rate = read_pod<double>(in, path);
  c.init_seed = read_pod<std::uint64_t>(in, path);
  c.validate();

  Parameters params = init_params(c);  // allocates the right shapes
  params.visit([&](const std::string& name, Tensor& t) {
    auto rows = read_pod<std::int32_t>(in, path);
    auto cols = read_pod<std::int32_t>(in, path);
    if (rows != t.rows || cols != t.cols) {
      throw CheckpointError(path + ": shape mismatch for " + name);
    }
    in.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!in) throw CheckpointError(path + ": truncated checkpoint");
  });
  char extra;
  if (in.read(&extra, 1)) {
    throw CheckpointError(path + ": trailing bytes after tensors");
  }
  return params;
}

}  // namespace cotpot::model
