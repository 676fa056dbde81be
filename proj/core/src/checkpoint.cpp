#include "stic/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace stic {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint codec assumes a little-endian host");

void put_u32(std::vector<std::uint8_t>& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(std::uint8_t(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(std::uint8_t(v >> (8 * i)));
}

void put_string(std::vector<std::uint8_t>& buf, const std::string& s) {
  put_u32(buf, static_cast<std::uint32_t>(s.size()));
  buf.insert(buf.end(), s.begin(), s.end());
}

class Reader {
 public:
  Reader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}

  std::size_t remaining() const { return size_ - pos_; }

  std::uint32_t u32() {
    need(4, "u32");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(data_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }

  std::uint64_t u64() {
    need(8, "u64");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(data_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }

  std::string string() {
    std::uint32_t len = u32();
    need(len, "string payload");
    std::string s(reinterpret_cast<const char*>(data_ + pos_), len);
    pos_ += len;
    return s;
  }

  std::vector<double> doubles(std::size_t count) {
    need(count * 8, "tensor payload");
    std::vector<double> v(count);
    std::memcpy(v.data(), data_ + pos_, count * 8);
    pos_ += count * 8;
    return v;
  }

 private:
  void need(std::size_t n, const char* what) const {
    if (remaining() < n) {
      throw std::runtime_error(std::string("checkpoint: truncated while reading ") + what);
    }
  }

  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

constexpr std::uint32_t kSupportedVersion = 1;
constexpr char kMagic[4] = {'S', 'T', 'I', 'C'};

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::vector<std::uint8_t> body;  // everything after the magic, CRC domain
  put_u32(body, ckpt.version);
  put_u32(body, ckpt.tau);
  put_u64(body, ckpt.seed);
  put_string(body, ckpt.arch);
  for (const NamedParam& p : ckpt.tensors) {
    put_string(body, p.name);
    const Shape& shape = p.tensor.shape();
    put_u32(body, static_cast<std::uint32_t>(shape.size()));
    for (int d : shape) put_u64(body, static_cast<std::uint64_t>(d));
    auto values = p.tensor.data();
    std::size_t at = body.size();
    body.resize(at + values.size() * 8);
    std::memcpy(body.data() + at, values.data(), values.size() * 8);
  }
  std::uint32_t crc =
      static_cast<std::uint32_t>(crc32(0L, body.data(), static_cast<uInt>(body.size())));
  put_u32(body, crc);

  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("checkpoint: cannot write " + path);
  os.write(kMagic, 4);
  os.write(reinterpret_cast<const char*>(body.data()), static_cast<std::streamsize>(body.size()));
  if (!os) throw std::runtime_error("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)),
                                  std::istreambuf_iterator<char>());
  if (bytes.size() < 4 + 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw std::runtime_error("checkpoint: bad magic in " + path);
  }
  const std::uint8_t* body = bytes.data() + 4;
  std::size_t body_size = bytes.size() - 4;

  std::uint32_t stored_crc = 0;
  for (int i = 0; i < 4; ++i) {
    stored_crc |= std::uint32_t(body[body_size - 4 + i]) << (8 * i);
  }
  std::uint32_t actual_crc =
      static_cast<std::uint32_t>(crc32(0L, body, static_cast<uInt>(body_size - 4)));
  if (stored_crc != actual_crc) {
    throw std::runtime_error("checkpoint: CRC mismatch in " + path);
  }

  Reader reader(body, body_size - 4);
  Checkpoint ckpt;
  ckpt.version = reader.u32();
  if (ckpt.version != kSupportedVersion) {
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(ckpt.version) +
                             " in " + path);
  }
  ckpt.tau = reader.u32();
  ckpt.seed = reader.u64();
  ckpt.arch = reader.string();
  while (reader.remaining() > 0) {
    NamedParam p;
    p.name = reader.string();
    std::uint32_t rank = reader.u32();
    Shape shape;
    std::int64_t numel = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      std::uint64_t dim = reader.u64();
      shape.push_back(static_cast<int>(dim));
      numel *= static_cast<std::int64_t>(dim);
    }
    p.tensor = Tensor::from(shape, reader.doubles(static_cast<std::size_t>(numel)));
    ckpt.tensors.push_back(std::move(p));
  }
  return ckpt;
}

Checkpoint checkpoint_of(const ClassifierModel& model, std::uint32_t tau, std::uint64_t seed) {
  Checkpoint ckpt;
  ckpt.tau = tau;
  ckpt.seed = seed;
  ckpt.arch = model.spec().describe();
  for (const NamedParam& p : model.parameters()) {
    ckpt.tensors.push_back({p.name, p.tensor.detach()});
  }
  return ckpt;
}

ClassifierModel model_from_checkpoint(const Checkpoint& ckpt) {
  ModelSpec spec = ModelSpec::parse(ckpt.arch);
  Rng rng(0);  // layout only; every value is overwritten below
  ClassifierModel model(spec, rng);
  auto& params = model.parameters();
  if (params.size() != ckpt.tensors.size()) {
    throw std::runtime_error("checkpoint: expected " + std::to_string(params.size()) +
                             " tensors for '" + ckpt.arch + "', found " +
                             std::to_string(ckpt.tensors.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const NamedParam& stored = ckpt.tensors[i];
    if (stored.name != params[i].name) {
      throw std::runtime_error("checkpoint: tensor " + std::to_string(i) + " named '" +
                               stored.name + "', architecture expects '" + params[i].name + "'");
    }
    if (stored.tensor.shape() != params[i].tensor.shape()) {
      throw std::runtime_error("checkpoint: tensor '" + stored.name + "' has shape " +
                               shape_str(stored.tensor.shape()) + ", architecture expects " +
                               shape_str(params[i].tensor.shape()));
    }
    auto dst = params[i].tensor.mutable_data();
    auto src = stored.tensor.data();
    std::copy(src.begin(), src.end(), dst.begin());
  }
  return model;
}

}  // namespace stic
