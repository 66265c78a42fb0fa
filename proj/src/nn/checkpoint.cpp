#include "a3ps/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "a3ps/errors.hpp"

namespace a3ps::nn {

namespace {

constexpr char kMagic[4] = {'N', 'N', 'C', 'K'};

template <typename T>
void put(std::string& out, T v) {
  static_assert(std::is_integral_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double d) { put(out, std::bit_cast<std::uint64_t>(d)); }

class Reader {
 public:
  explicit Reader(std::string_view b) : bytes_(b) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    return static_cast<T>(v);
  }
  double get_f64() { return std::bit_cast<double>(get<std::uint64_t>()); }
  std::string_view take(std::size_t n) {
    need(n);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw ParseError("checkpoint truncated at byte " + std::to_string(pos_), 1);
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_checkpoint(const std::vector<NamedTensor>& tensors) {
  std::string out(kMagic, 4);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, tensors.size());
  for (const NamedTensor& nt : tensors) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(nt.name.size()));
    out += nt.name;
    put<std::uint32_t>(out, static_cast<std::uint32_t>(nt.tensor.rank()));
    for (std::size_t d : nt.tensor.shape()) put<std::uint64_t>(out, d);
    for (double v : nt.tensor.values()) put_f64(out, v);
  }
  return out;
}

std::vector<NamedTensor> decode_checkpoint(std::string_view bytes) {
  Reader r(bytes);
  if (r.take(4) != std::string_view(kMagic, 4)) throw ParseError("not a checkpoint (bad magic)", 1);
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) throw ParseError("unsupported checkpoint version " + std::to_string(version), 1);
  const auto count = r.get<std::uint64_t>();
  std::vector<NamedTensor> out;
  for (std::uint64_t i = 0; i < count; ++i) {
    NamedTensor nt;
    nt.name = std::string(r.take(r.get<std::uint32_t>()));
    const auto rank = r.get<std::uint32_t>();
    if (rank == 0 || rank > 8) throw ParseError("tensor '" + nt.name + "' has invalid rank", 1);
    std::vector<std::size_t> shape(rank);
    std::size_t n = 1;
    for (auto& d : shape) {
      d = static_cast<std::size_t>(r.get<std::uint64_t>());
      if (d == 0 || d > (std::size_t{1} << 32)) throw ParseError("tensor '" + nt.name + "' has invalid shape", 1);
      n *= d;
    }
    std::vector<double> values(n);
    for (double& v : values) v = r.get_f64();
    nt.tensor = Tensor(std::move(shape), std::move(values));
    if (!nt.tensor.all_finite()) throw NumericError("checkpoint tensor '" + nt.name + "' holds non-finite values");
    out.push_back(std::move(nt));
  }
  if (!r.done()) throw ParseError("trailing bytes after checkpoint payload", 1);
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw FileError("cannot write " + path.string());
  const std::string bytes = encode_checkpoint(tensors);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw FileError("write failed for " + path.string());
}

std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FileError("cannot read " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return decode_checkpoint(ss.str());
}

std::vector<NamedTensor> snapshot(std::span<Parameter* const> params) {
  std::vector<NamedTensor> out;
  out.reserve(params.size());
  for (const Parameter* p : params) out.push_back({p->name, p->value});
  return out;
}

void restore(std::span<Parameter* const> params, const std::vector<NamedTensor>& tensors) {
  std::unordered_map<std::string, const Tensor*> by_name;
  for (const NamedTensor& nt : tensors) by_name[nt.name] = &nt.tensor;
  for (Parameter* p : params) {
    auto it = by_name.find(p->name);
    if (it == by_name.end()) throw ContractError("checkpoint lacks parameter '" + p->name + "'");
    if (it->second->shape() != p->value.shape()) {
      throw ShapeError("parameter '" + p->name + "' is " + p->value.shape_string() + " but checkpoint holds " +
                       it->second->shape_string());
    }
    p->value = *it->second;
    p->zero_grad();
  }
}

void save_parameters(const std::filesystem::path& path, std::span<Parameter* const> params) {
  save_checkpoint(path, snapshot(params));
}

void load_parameters(const std::filesystem::path& path, std::span<Parameter* const> params) {
  restore(params, load_checkpoint(path));
}

std::uint64_t parameter_checksum(std::span<Parameter* const> params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](const void* data, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const Parameter* p : params) {
    feed(p->name.data(), p->name.size());
    for (std::size_t d : p->value.shape()) feed(&d, sizeof d);
    feed(p->value.data(), p->value.size() * sizeof(double));
  }
  return h;
}

}  // namespace a3ps::nn
