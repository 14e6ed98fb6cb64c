#include "fedprint/params.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <string>

#include "fedprint/errors.hpp"
#include "fedprint/rng.hpp"

namespace fedprint {

namespace {

constexpr char kMagic[] = "FPRINT1\n";

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

void write_doubles(std::ofstream& out, const double* values, std::size_t count) {
  out.write(reinterpret_cast<const char*>(values),
            static_cast<std::streamsize>(count * sizeof(double)));
}

void read_doubles(std::ifstream& in, double* values, std::size_t count,
                  const std::filesystem::path& path) {
  in.read(reinterpret_cast<char*>(values),
          static_cast<std::streamsize>(count * sizeof(double)));
  if (!in) throw io_error("truncated checkpoint: " + path.string());
}

std::size_t read_count(std::ifstream& in, const std::filesystem::path& path) {
  std::size_t v = 0;
  if (!(in >> v)) throw io_error("bad checkpoint header: " + path.string());
  return v;
}

}  // namespace

std::vector<std::size_t> ParamSet::layer_dims() const {
  std::vector<std::size_t> dims;
  if (layers.empty()) return dims;
  dims.reserve(layers.size() + 1);
  dims.push_back(layers.front().weight.cols);
  for (const auto& layer : layers) dims.push_back(layer.weight.rows);
  return dims;
}

bool ParamSet::same_dims(const ParamSet& other) const {
  return layer_dims() == other.layer_dims();
}

bool ParamSet::finite() const {
  for (const auto& layer : layers) {
    if (!all_finite(layer.weight)) return false;
    for (double b : layer.bias) {
      if (!std::isfinite(b)) return false;
    }
  }
  return true;
}

ParamSet init_params(const std::vector<std::size_t>& layer_dims, std::uint64_t seed) {
  if (layer_dims.size() < 2) {
    throw config_error("init_params: need at least input and output dims");
  }
  for (std::size_t d : layer_dims) {
    if (d < 1) throw config_error("init_params: all layer dims must be >= 1");
  }

  Rng rng(seed);
  ParamSet params;
  params.layers.resize(layer_dims.size() - 1);
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    const std::size_t fan_in = layer_dims[l];
    const std::size_t fan_out = layer_dims[l + 1];
    const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
    LayerParams& layer = params.layers[l];
    layer.weight = Matrix(fan_out, fan_in);
    for (double& w : layer.weight.data) w = rng.uniform(-bound, bound);
    layer.bias.assign(fan_out, 0.0);
  }
  return params;
}

void save_checkpoint(const ParamSet& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot open checkpoint for writing: " + path.string());
  out << kMagic;
  out << params.layers.size() << '\n';
  for (const auto& layer : params.layers) {
    out << layer.weight.rows << ' ' << layer.weight.cols << '\n';
    write_doubles(out, layer.weight.data.data(), layer.weight.data.size());
    write_doubles(out, layer.bias.data(), layer.bias.size());
  }
  if (!out) throw io_error("failed writing checkpoint: " + path.string());
}

ParamSet load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open checkpoint: " + path.string());

  char magic[sizeof(kMagic) - 1];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(magic)) != 0) {
    throw io_error("not a checkpoint file: " + path.string());
  }

  const std::size_t num_layers = read_count(in, path);
  ParamSet params;
  params.layers.resize(num_layers);
  for (auto& layer : params.layers) {
    const std::size_t rows = read_count(in, path);
    const std::size_t cols = read_count(in, path);
    if (rows == 0 || cols == 0) throw io_error("bad layer shape: " + path.string());
    in.get();  // the '\n' after the shape line
    layer.weight = Matrix(rows, cols);
    read_doubles(in, layer.weight.data.data(), layer.weight.data.size(), path);
    layer.bias.resize(rows);
    read_doubles(in, layer.bias.data(), layer.bias.size(), path);
  }
  return params;
}

}  // namespace fedprint
