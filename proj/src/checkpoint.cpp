#include "tbpr/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "tbpr/error.hpp"
#include "tbpr/io.hpp"

namespace tbpr {

namespace {

constexpr char kMagic[4] = {'T', 'B', 'P', 'R'};
constexpr std::size_t kHeaderSize = 4 + 1 + 1 + 5 * 8;

class Writer {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }

  void u64(std::uint64_t v) {
    for (int b = 0; b < 8; ++b) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
  }

  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

  void array(const std::vector<double>& v) {
    for (double x : v) f64(x);
  }

  // Stored matrix is rows x cols; written as its transpose.
  void transposed(const Matrix& m) {
    for (std::size_t c = 0; c < m.cols; ++c)
      for (std::size_t r = 0; r < m.rows; ++r) f64(m.at(r, c));
  }

  void plain(const Matrix& m) { array(m.data); }

  std::vector<std::uint8_t> finish() {
    u64(fnv1a64(bytes_.data(), bytes_.size()));
    return std::move(bytes_);
  }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  Reader(const std::vector<std::uint8_t>& bytes, std::size_t end)
      : bytes_(bytes), end_(end) {}

  std::uint8_t u8() { return bytes_[pos_++]; }

  std::uint64_t u64() {
    std::uint64_t v = 0;
    for (int b = 0; b < 8; ++b)
      v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * b);
    return v;
  }

  double f64() { return std::bit_cast<double>(u64()); }

  std::vector<double> array(std::size_t n) {
    std::vector<double> v(n);
    for (auto& x : v) x = f64();
    return v;
  }

  Matrix transposed(std::size_t rows, std::size_t cols) {
    Matrix m(rows, cols);
    for (std::size_t c = 0; c < cols; ++c)
      for (std::size_t r = 0; r < rows; ++r) m.at(r, c) = f64();
    return m;
  }

  Matrix plain(std::size_t rows, std::size_t cols) {
    Matrix m(rows, cols);
    m.data = array(rows * cols);
    return m;
  }

  std::size_t pos() const { return pos_; }
  std::size_t end() const { return end_; }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

// Number of f64 values following the header for a given kind and shape.
std::uint64_t payload_values(ModelKind kind, std::uint64_t m, std::uint64_t n,
                             std::uint64_t f, std::uint64_t k, std::uint64_t d) {
  std::uint64_t total = 0;
  if (kind == ModelKind::kPop) return n;
  total += n + f * m + f * n;
  if (kind == ModelKind::kDiff) total += k * m;
  if (uses_text(kind)) total += k * d + d;
  if (kind == ModelKind::kShared) total += m + m * d;
  return total;
}

}  // namespace

std::uint64_t fnv1a64(const std::uint8_t* data, std::size_t size) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t k = 0; k < size; ++k) {
    h ^= data[k];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<std::uint8_t> encode_checkpoint(const Params& p) {
  Writer w;
  for (char c : kMagic) w.u8(static_cast<std::uint8_t>(c));
  w.u8(kCheckpointVersion);
  w.u8(static_cast<std::uint8_t>(p.kind));
  w.u64(p.user_count);
  w.u64(p.item_count);
  w.u64(p.dims.factors);
  w.u64(p.dims.text_factors);
  w.u64(p.dims.feature_dim);
  if (p.kind == ModelKind::kPop) {
    w.array(p.popularity);
    return w.finish();
  }
  w.array(p.item_bias);
  w.transposed(p.user_latent);
  w.transposed(p.item_latent);
  if (p.kind == ModelKind::kDiff) w.transposed(p.user_text);
  if (uses_text(p.kind)) {
    w.plain(p.kernel);
    w.array(p.text_bias);
  }
  if (p.kind == ModelKind::kShared) {
    w.array(p.prior_count);
    w.plain(p.user_prior);
  }
  return w.finish();
}

Params decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kHeaderSize + 8) {
    throw TruncatedError("checkpoint truncated: " + std::to_string(bytes.size()) +
                         " bytes is shorter than the header");
  }
  if (std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw CheckpointError("not a model checkpoint (bad magic)");
  }
  if (bytes[4] != kCheckpointVersion) {
    throw VersionError("checkpoint format version " + std::to_string(bytes[4]) +
                       ", this build reads version " +
                       std::to_string(kCheckpointVersion));
  }
  if (bytes[5] > static_cast<std::uint8_t>(ModelKind::kShared)) {
    throw CheckpointError("unknown model kind byte " + std::to_string(bytes[5]));
  }

  Reader r(bytes, bytes.size() - 8);
  for (std::size_t k = 0; k < 6; ++k) r.u8();
  Params p;
  p.kind = static_cast<ModelKind>(bytes[5]);
  const std::uint64_t m = r.u64();
  const std::uint64_t n = r.u64();
  const std::uint64_t f = r.u64();
  const std::uint64_t k = r.u64();
  const std::uint64_t d = r.u64();
  constexpr std::uint64_t kSane = std::uint64_t{1} << 40;
  if (m > kSane || n > kSane || f > kSane || k > kSane || d > kSane) {
    throw CheckpointError("checkpoint dimensions are implausible");
  }
  const std::uint64_t expected =
      kHeaderSize + 8 * payload_values(p.kind, m, n, f, k, d) + 8;
  if (bytes.size() < expected) {
    throw TruncatedError("checkpoint truncated: expected " +
                         std::to_string(expected) + " bytes, found " +
                         std::to_string(bytes.size()));
  }
  if (bytes.size() > expected) {
    throw CheckpointError("checkpoint has " +
                          std::to_string(bytes.size() - expected) +
                          " unexpected trailing bytes");
  }
  std::uint64_t stored = 0;
  for (int b = 0; b < 8; ++b)
    stored |= static_cast<std::uint64_t>(bytes[bytes.size() - 8 + b]) << (8 * b);
  if (stored != fnv1a64(bytes.data(), bytes.size() - 8)) {
    throw ChecksumError("checkpoint checksum mismatch");
  }

  p.user_count = m;
  p.item_count = n;
  p.dims = Dims{f, k, d};
  if (p.kind == ModelKind::kPop) {
    p.popularity = r.array(n);
    return p;
  }
  p.item_bias = r.array(n);
  p.user_latent = r.transposed(m, f);
  p.item_latent = r.transposed(n, f);
  if (p.kind == ModelKind::kDiff) p.user_text = r.transposed(m, k);
  if (uses_text(p.kind)) {
    p.kernel = r.plain(k, d);
    p.text_bias = r.array(d);
  }
  if (p.kind == ModelKind::kShared) {
    p.prior_count = r.array(m);
    p.user_prior = r.plain(m, d);
  }
  return p;
}

void save_model(const Params& p, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(p);
  write_file_atomic(path, std::string(bytes.begin(), bytes.end()));
}

Params load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace tbpr
