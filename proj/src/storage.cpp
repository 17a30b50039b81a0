// Copyright 2026 The projann Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "projann/storage.hpp"

#include <fcntl.h>
#include <unistd.h>
#include <zlib.h>

#include <bit>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

namespace projann {

static_assert(std::endian::native == std::endian::little,
              "on-disk formats are little-endian; big-endian hosts need byte swaps");

namespace fs = std::filesystem;

namespace {

constexpr char kIndexMagic[4] = {'L', 'V', 'E', 'C'};
constexpr char kProjMagic[4] = {'L', 'V', 'P', 'J'};
constexpr size_t kIndexHeaderBytes = 48;
constexpr size_t kSectionEntryBytes = 24;
constexpr uint32_t kFlagOrthonormal = 1u;
constexpr uint32_t kFlagShared = 2u;

std::string quoted(const fs::path& p) { return "'" + p.string() + "'"; }

std::vector<uint8_t> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + quoted(path) + " for reading");
  in.seekg(0, std::ios::end);
  const std::streamoff len = in.tellg();
  if (len < 0) throw IoError("cannot size " + quoted(path));
  in.seekg(0);
  std::vector<uint8_t> bytes(static_cast<size_t>(len));
  if (len > 0 && !in.read(reinterpret_cast<char*>(bytes.data()), len)) {
    throw IoError("short read on " + quoted(path));
  }
  return bytes;
}

void write_file(const fs::path& path, const std::vector<uint8_t>& bytes) {
  const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  if (fd < 0) {
    throw IoError("cannot open " + quoted(path) + " for writing: " +
                  std::strerror(errno));
  }
  size_t done = 0;
  while (done < bytes.size()) {
    const ssize_t w = ::write(fd, bytes.data() + done, bytes.size() - done);
    if (w < 0) {
      if (errno == EINTR) continue;
      const int err = errno;
      ::close(fd);
      throw IoError("write failed on " + quoted(path) + ": " + std::strerror(err));
    }
    done += static_cast<size_t>(w);
  }
  if (::fsync(fd) != 0) {
    const int err = errno;
    ::close(fd);
    throw IoError("fsync failed on " + quoted(path) + ": " + std::strerror(err));
  }
  if (::close(fd) != 0) throw IoError("close failed on " + quoted(path));
}

class Writer {
 public:
  template <class T>
  void put(T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    const auto* p = reinterpret_cast<const uint8_t*>(&v);
    buf_.insert(buf_.end(), p, p + sizeof(T));
  }
  void raw(const void* data, size_t n) {
    const auto* p = static_cast<const uint8_t*>(data);
    buf_.insert(buf_.end(), p, p + n);
  }
  template <class T>
  void array(const T* data, size_t count) { raw(data, count * sizeof(T)); }

  size_t size() const { return buf_.size(); }
  std::vector<uint8_t>& bytes() { return buf_; }
  void patch_u64(size_t at, uint64_t v) { std::memcpy(buf_.data() + at, &v, 8); }

  void append_crc() {
    put<uint32_t>(static_cast<uint32_t>(
        ::crc32(0L, buf_.data(), static_cast<uInt>(buf_.size()))));
  }

 private:
  std::vector<uint8_t> buf_;
};

// Bounded cursor over a byte range; every read checks the remaining length.
class Reader {
 public:
  Reader(const uint8_t* data, size_t size, std::string what)
      : data_(data), size_(size), what_(std::move(what)) {}

  void need(size_t n) const {
    if (n > size_ - pos_) {
      throw FormatError(FormatErrc::truncated,
                        what_ + ": needs " + std::to_string(n) + " more bytes at offset " +
                            std::to_string(pos_) + ", only " +
                            std::to_string(size_ - pos_) + " left");
    }
  }
  template <class T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, data_ + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  // count * sizeof(T) checked against the remaining bytes before allocating
  template <class T>
  std::vector<T> array(uint64_t count) {
    if (count > (size_ - pos_) / sizeof(T)) need(SIZE_MAX);
    std::vector<T> out(static_cast<size_t>(count));
    if (count) std::memcpy(out.data(), data_ + pos_, count * sizeof(T));
    pos_ += static_cast<size_t>(count) * sizeof(T);
    return out;
  }
  size_t pos() const { return pos_; }
  size_t remaining() const { return size_ - pos_; }

 private:
  const uint8_t* data_;
  size_t size_;
  size_t pos_ = 0;
  std::string what_;
};

template <class Scalar, class M>
M read_vecs(const fs::path& path, const char* kind) {
  const auto bytes = read_file(path);
  const std::string what = std::string(kind) + " " + quoted(path);
  if (bytes.empty()) return M(0, 0);
  Reader r(bytes.data(), bytes.size(), what);
  const auto dim = r.get<int32_t>();
  if (dim <= 0) {
    throw FormatError(FormatErrc::zero_dimension,
                      what + ": record dimension " + std::to_string(dim));
  }
  const size_t record = 4 + 4 * static_cast<size_t>(dim);
  if (bytes.size() % record != 0) {
    throw FormatError(FormatErrc::truncated,
                      what + ": length " + std::to_string(bytes.size()) +
                          " is not a multiple of record size " + std::to_string(record));
  }
  const size_t count = bytes.size() / record;
  M m(static_cast<Eigen::Index>(count), dim);
  for (size_t i = 0; i < count; ++i) {
    int32_t d = dim;
    std::memcpy(&d, bytes.data() + i * record, 4);
    if (d != dim) {
      throw FormatError(FormatErrc::inconsistent_dimension,
                        what + ": record " + std::to_string(i) + " has dimension " +
                            std::to_string(d) + ", expected " + std::to_string(dim));
    }
    std::memcpy(m.data() + i * static_cast<size_t>(dim), bytes.data() + i * record + 4,
                4 * static_cast<size_t>(dim));
  }
  return m;
}

template <class M>
void write_vecs(const M& m, const fs::path& path) {
  Writer w;
  const auto dim = static_cast<int32_t>(m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    w.put<int32_t>(dim);
    w.array(m.data() + i * m.cols(), static_cast<size_t>(m.cols()));
  }
  write_file(path, w.bytes());
}

void check_magic_version(Reader& r, const char (&magic)[4], const std::string& what) {
  char got[4];
  r.need(4);
  for (char& c : got) c = static_cast<char>(r.get<uint8_t>());
  if (std::memcmp(got, magic, 4) != 0) {
    throw FormatError(FormatErrc::bad_magic, what + ": bad magic");
  }
  const auto version = r.get<uint32_t>();
  if (version != kFormatVersion) {
    throw FormatError(FormatErrc::version_mismatch,
                      what + ": file version " + std::to_string(version) +
                          ", reader supports version " + std::to_string(kFormatVersion));
  }
}

void check_crc(const std::vector<uint8_t>& bytes, const std::string& what) {
  if (bytes.size() < 4) throw FormatError(FormatErrc::truncated, what + ": no checksum");
  const size_t body = bytes.size() - 4;
  uint32_t stored;
  std::memcpy(&stored, bytes.data() + body, 4);
  const auto actual =
      static_cast<uint32_t>(::crc32(0L, bytes.data(), static_cast<uInt>(body)));
  if (stored != actual) {
    throw FormatError(FormatErrc::checksum_mismatch, what + ": checksum mismatch");
  }
}

void put_spec(Writer& w, const StoreSpec& s) {
  w.put<uint8_t>(static_cast<uint8_t>(s.kind));
  w.put<uint8_t>(static_cast<uint8_t>(s.b1));
  w.put<uint8_t>(static_cast<uint8_t>(s.b2));
}

StoreSpec get_spec(Reader& r, const std::string& what) {
  StoreSpec s;
  const auto kind = r.get<uint8_t>();
  s.b1 = r.get<uint8_t>();
  s.b2 = r.get<uint8_t>();
  if (kind > static_cast<uint8_t>(StoreSpec::Kind::lvq)) {
    throw FormatError(FormatErrc::corrupt, what + ": unknown store kind");
  }
  s.kind = static_cast<StoreSpec::Kind>(kind);
  if (s.kind == StoreSpec::Kind::lvq) {
    if ((s.b1 != 4 && s.b1 != 8) || (s.b2 != 0 && s.b2 != 8)) {
      throw FormatError(FormatErrc::corrupt, what + ": unsupported LVQ bit widths");
    }
  } else {
    s.b1 = s.b2 = 0;
  }
  return s;
}

void put_matrix(Writer& w, const Mat& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) w.put<double>(m(i, j));
}

Mat get_matrix(Reader& r, uint64_t rows, uint64_t cols) {
  if (cols != 0 && rows > r.remaining() / 8 / cols) r.need(SIZE_MAX);
  const auto flat = r.array<double>(rows * cols);
  Mat m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (uint64_t i = 0; i < rows; ++i)
    for (uint64_t j = 0; j < cols; ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = flat[i * cols + j];
  return m;
}

void put_store(Writer& w, const VectorStore& s) {
  put_spec(w, s.spec());
  w.put<uint8_t>(0);
  w.put<uint32_t>(0);
  w.put<uint64_t>(s.size());
  w.put<uint64_t>(s.dim());
  if (!s.is_lvq()) {
    w.array(s.floats().data(), s.size() * s.dim());
    return;
  }
  const LvqParts& p = s.lvq();
  w.array(p.codec.mean.data(), p.codec.mean.size());
  w.array(p.lo.data(), p.lo.size());
  w.array(p.delta.data(), p.delta.size());
  w.array(p.codes1.data(), p.codes1.size());
  w.array(p.codes2.data(), p.codes2.size());
}

VectorStore get_store(Reader& r, const StoreSpec& expected, uint64_t n, uint64_t dim,
                      const std::string& what) {
  const StoreSpec spec = get_spec(r, what);
  r.get<uint8_t>();
  r.get<uint32_t>();
  const auto count = r.get<uint64_t>();
  const auto d = r.get<uint64_t>();
  if (!(spec == expected) || count != n || d != dim) {
    throw FormatError(FormatErrc::corrupt, what + ": store does not match header");
  }
  if (dim != 0 && n > r.remaining() / dim) r.need(SIZE_MAX);
  if (spec.kind != StoreSpec::Kind::lvq) {
    const auto flat = r.array<float>(n * dim);
    FloatMatrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
    if (!flat.empty()) std::memcpy(m.data(), flat.data(), flat.size() * 4);
    return VectorStore::from_floats(std::move(m), spec);
  }
  LvqParts p;
  p.codec.dim = dim;
  p.codec.b1 = spec.b1;
  p.codec.b2 = spec.b2;
  p.codec.mean = r.array<float>(dim);
  p.lo = r.array<float>(n);
  p.delta = r.array<float>(n);
  p.codes1 = r.array<uint8_t>(n * p.codec.code1_bytes());
  p.codes2 = r.array<uint8_t>(n * p.codec.code2_bytes());
  return VectorStore::from_lvq(std::move(p));
}

struct Section {
  char tag[4];
  uint64_t offset;
  uint64_t length;
};

}  // namespace

FloatMatrix read_fvecs(const fs::path& path) {
  return read_vecs<float, FloatMatrix>(path, "fvecs");
}

IntMatrix read_ivecs(const fs::path& path) {
  return read_vecs<int32_t, IntMatrix>(path, "ivecs");
}

void write_fvecs(const FloatMatrix& m, const fs::path& path) { write_vecs(m, path); }
void write_ivecs(const IntMatrix& m, const fs::path& path) { write_vecs(m, path); }

void write_ground_truth(const GroundTruth& gt, const fs::path& path) {
  gt.validate();
  IntMatrix m(static_cast<Eigen::Index>(gt.ids.size()),
              static_cast<Eigen::Index>(gt.depth()));
  for (size_t i = 0; i < gt.ids.size(); ++i)
    for (size_t j = 0; j < gt.depth(); ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          static_cast<int32_t>(gt.ids[i][j]);
  write_ivecs(m, path);
}

GroundTruth read_ground_truth(const fs::path& path, Metric metric) {
  const IntMatrix m = read_ivecs(path);
  GroundTruth gt;
  gt.metric = metric;
  gt.ids.resize(static_cast<size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (m(i, j) < 0) {
        throw FormatError(FormatErrc::corrupt, "ground truth " + quoted(path) +
                                                   ": negative id");
      }
      gt.ids[static_cast<size_t>(i)].push_back(static_cast<uint32_t>(m(i, j)));
    }
  }
  return gt;
}

void save_projection(const ProjectionPair& p, const fs::path& path) {
  p.validate();
  Writer w;
  w.raw(kProjMagic, 4);
  w.put<uint32_t>(kFormatVersion);
  w.put<uint64_t>(static_cast<uint64_t>(p.source_dim()));
  w.put<uint64_t>(static_cast<uint64_t>(p.d()));
  w.put<uint32_t>((p.orthonormal ? kFlagOrthonormal : 0u) |
                  (p.shared() ? kFlagShared : 0u));
  w.put<uint32_t>(0);
  put_matrix(w, p.a);
  if (!p.shared()) put_matrix(w, p.b);
  w.append_crc();
  write_file(path, w.bytes());
}

ProjectionPair load_projection(const fs::path& path) {
  const auto bytes = read_file(path);
  const std::string what = "projection " + quoted(path);
  Reader r(bytes.data(), bytes.size(), what);
  check_magic_version(r, kProjMagic, what);
  check_crc(bytes, what);
  Reader body(bytes.data() + r.pos(), bytes.size() - 4 - r.pos(), what);
  const auto D = body.get<uint64_t>();
  const auto d = body.get<uint64_t>();
  const auto flags = body.get<uint32_t>();
  body.get<uint32_t>();
  ProjectionPair p;
  p.orthonormal = (flags & kFlagOrthonormal) != 0;
  p.a = get_matrix(body, d, D);
  p.b = (flags & kFlagShared) ? p.a : get_matrix(body, d, D);
  if (body.remaining() != 0) {
    throw FormatError(FormatErrc::corrupt, what + ": trailing bytes");
  }
  try {
    p.validate();
  } catch (const ValidationError& e) {
    throw FormatError(FormatErrc::corrupt, what + ": " + e.what());
  }
  return p;
}

void save_index(const TwoPhaseIndex& index, const fs::path& path) {
  const ProjectionPair& p = index.projection();
  const GraphIndex& g = index.graph();
  constexpr uint32_t kSections = 4;
  Writer w;
  w.raw(kIndexMagic, 4);
  w.put<uint32_t>(kFormatVersion);
  w.put<uint64_t>(static_cast<uint64_t>(p.source_dim()));
  w.put<uint64_t>(static_cast<uint64_t>(p.d()));
  w.put<uint64_t>(index.size());
  w.put<uint8_t>(static_cast<uint8_t>(index.metric()));
  put_spec(w, index.primary().spec());
  put_spec(w, index.secondary().spec());
  w.put<uint8_t>(0);
  w.put<uint32_t>(p.orthonormal ? kFlagOrthonormal : 0u);
  w.put<uint32_t>(kSections);

  const size_t table = w.size();
  const char* tags[kSections] = {"PROJ", "PRIM", "SECO", "GRPH"};
  for (const char* tag : tags) {
    w.raw(tag, 4);
    w.put<uint32_t>(0);
    w.put<uint64_t>(0);
    w.put<uint64_t>(0);
  }
  auto section = [&](uint32_t k, auto&& body) {
    const size_t start = w.size();
    body();
    w.patch_u64(table + k * kSectionEntryBytes + 8, start);
    w.patch_u64(table + k * kSectionEntryBytes + 16, w.size() - start);
  };
  section(0, [&] {
    put_matrix(w, p.a);
    put_matrix(w, p.b);
  });
  section(1, [&] { put_store(w, index.primary()); });
  section(2, [&] { put_store(w, index.secondary()); });
  section(3, [&] {
    w.put<uint32_t>(g.entry());
    w.put<uint32_t>(g.max_degree());
    w.put<uint64_t>(g.size());
    for (const auto& list : g.adjacency()) {
      w.put<uint32_t>(static_cast<uint32_t>(list.size()));
      w.array(list.data(), list.size());
    }
  });
  w.append_crc();
  write_file(path, w.bytes());
}

TwoPhaseIndex load_index(const fs::path& path) {
  const auto bytes = read_file(path);
  const std::string what = "index " + quoted(path);
  Reader r(bytes.data(), bytes.size(), what);
  check_magic_version(r, kIndexMagic, what);
  if (bytes.size() < kIndexHeaderBytes + 4) {
    throw FormatError(FormatErrc::truncated, what + ": shorter than the header");
  }
  check_crc(bytes, what);
  const size_t payload = bytes.size() - 4;
  Reader hdr(bytes.data(), payload, what);
  hdr.need(kIndexHeaderBytes);
  hdr.get<uint64_t>();  // magic + version, checked above
  const auto D = hdr.get<uint64_t>();
  const auto d = hdr.get<uint64_t>();
  const auto n = hdr.get<uint64_t>();
  const auto metric_byte = hdr.get<uint8_t>();
  const StoreSpec primary = get_spec(hdr, what);
  const StoreSpec secondary = get_spec(hdr, what);
  hdr.get<uint8_t>();
  const auto flags = hdr.get<uint32_t>();
  const auto count = hdr.get<uint32_t>();
  if (metric_byte > static_cast<uint8_t>(Metric::euclidean)) {
    throw FormatError(FormatErrc::corrupt, what + ": unknown metric");
  }
  if (n > UINT32_MAX) throw FormatError(FormatErrc::corrupt, what + ": n too large");
  const auto metric = static_cast<Metric>(metric_byte);

  std::vector<Section> sections;
  if (count > hdr.remaining() / kSectionEntryBytes) hdr.need(SIZE_MAX);
  for (uint32_t k = 0; k < count; ++k) {
    Section s;
    for (char& c : s.tag) c = static_cast<char>(hdr.get<uint8_t>());
    hdr.get<uint32_t>();
    s.offset = hdr.get<uint64_t>();
    s.length = hdr.get<uint64_t>();
    if (s.offset > payload || s.length > payload - s.offset) {
      throw FormatError(FormatErrc::truncated, what + ": section outside file");
    }
    sections.push_back(s);
  }
  auto open = [&](const char* tag) {
    for (const Section& s : sections) {
      if (std::memcmp(s.tag, tag, 4) == 0) {
        return Reader(bytes.data() + s.offset, static_cast<size_t>(s.length),
                      what + " section " + tag);
      }
    }
    throw FormatError(FormatErrc::corrupt, what + ": missing section " + tag);
  };
  auto done = [&](const Reader& sec, const char* tag) {
    if (sec.remaining() != 0) {
      throw FormatError(FormatErrc::corrupt,
                        what + ": trailing bytes in section " + tag);
    }
  };

  Reader proj = open("PROJ");
  ProjectionPair p;
  p.orthonormal = (flags & kFlagOrthonormal) != 0;
  p.a = get_matrix(proj, d, D);
  p.b = get_matrix(proj, d, D);
  done(proj, "PROJ");

  Reader prim = open("PRIM");
  VectorStore pstore = get_store(prim, primary, n, d, what);
  done(prim, "PRIM");
  Reader seco = open("SECO");
  VectorStore sstore = get_store(seco, secondary, n, D, what);
  done(seco, "SECO");

  Reader gr = open("GRPH");
  const auto entry = gr.get<uint32_t>();
  const auto max_degree = gr.get<uint32_t>();
  const auto nodes = gr.get<uint64_t>();
  if (nodes != n) throw FormatError(FormatErrc::corrupt, what + ": graph size mismatch");
  std::vector<std::vector<uint32_t>> adjacency(static_cast<size_t>(n));
  for (auto& list : adjacency) {
    const auto deg = gr.get<uint32_t>();
    list = gr.array<uint32_t>(deg);
  }
  done(gr, "GRPH");

  try {
    GraphIndex graph(std::move(adjacency), entry, max_degree);
    graph.validate();
    return TwoPhaseIndex(std::move(p), std::move(pstore), std::move(sstore),
                         std::move(graph), metric);
  } catch (const ValidationError& e) {
    throw FormatError(FormatErrc::corrupt, what + ": " + e.what());
  }
}

}  // namespace projann
