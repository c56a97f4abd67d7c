// Copyright 2026  sasv-backend authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "sasv/model.hpp"

namespace sasv {

namespace {

constexpr char kMagic[8] = {'S', 'A', 'S', 'V', 'B', 'K', 'N', 'D'};

class LeWriter {
 public:
  void u32(std::uint32_t x) { put(x, 4); }
  void u64(std::uint64_t x) { put(x, 8); }
  void f64(double x) { put(std::bit_cast<std::uint64_t>(x), 8); }
  void bytes(const char* p, std::size_t n) { buf_.insert(buf_.end(), p, p + n); }
  const std::vector<char>& buffer() const { return buf_; }

 private:
  void put(std::uint64_t x, int n) {
    for (int i = 0; i < n; ++i) {
      buf_.push_back(static_cast<char>((x >> (8 * i)) & 0xff));
    }
  }
  std::vector<char> buf_;
};

class LeReader {
 public:
  explicit LeReader(std::vector<char> data) : data_(std::move(data)) {}

  bool at_end() const { return pos_ == data_.size(); }
  std::size_t remaining() const { return data_.size() - pos_; }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  double f64() { return std::bit_cast<double>(get(8)); }
  std::string bytes(std::size_t n) {
    need(n);
    std::string out(data_.data() + pos_, n);
    pos_ += n;
    return out;
  }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) {
      throw CheckpointError("checkpoint: unexpected end of file");
    }
  }
  std::uint64_t get(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t x = 0;
    for (int i = 0; i < n; ++i) {
      x |= static_cast<std::uint64_t>(
               static_cast<unsigned char>(data_[pos_ + i]))
           << (8 * i);
    }
    pos_ += static_cast<std::size_t>(n);
    return x;
  }

  std::vector<char> data_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const BackendParams& params,
                     const std::filesystem::path& path) {
  params.check_shapes();
  LeWriter w;
  w.bytes(kMagic, sizeof(kMagic));
  w.u32(kCheckpointVersion);
  w.u64(static_cast<std::uint64_t>(params.dims.asv));
  w.u64(static_cast<std::uint64_t>(params.dims.cm));
  w.u64(static_cast<std::uint64_t>(params.dims.hidden));
  params.for_each([&w](std::string_view name, const Matrix& m) {
    w.u32(static_cast<std::uint32_t>(name.size()));
    w.bytes(name.data(), name.size());
    w.u64(static_cast<std::uint64_t>(m.rows()));
    w.u64(static_cast<std::uint64_t>(m.cols()));
    for (Index i = 0; i < m.size(); ++i) w.f64(m.data()[i]);
  });

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  const auto& buf = w.buffer();
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

BackendParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::vector<char> data((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
  LeReader r(std::move(data));

  if (r.bytes(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic))) {
    throw CheckpointError(path.string() + ": not a back-end checkpoint");
  }
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw CheckpointError(path.string() + ": unsupported format version " +
                          std::to_string(version));
  }
  ModelDims dims;
  dims.asv = static_cast<Index>(r.u64());
  dims.cm = static_cast<Index>(r.u64());
  dims.hidden = static_cast<Index>(r.u64());
  constexpr Index kMaxDim = Index{1} << 16;
  for (Index d : {dims.asv, dims.cm, dims.hidden}) {
    if (d <= 0 || d > kMaxDim) {
      throw CheckpointError(path.string() + ": implausible dimension " +
                            std::to_string(d));
    }
  }

  std::map<std::string, Matrix> tensors;
  while (!r.at_end()) {
    const std::uint32_t len = r.u32();
    std::string name = r.bytes(len);
    const auto rows = static_cast<Index>(r.u64());
    const auto cols = static_cast<Index>(r.u64());
    if (rows < 0 || cols < 0 ||
        (cols != 0 && static_cast<std::size_t>(rows) >
                          r.remaining() / 8 / static_cast<std::size_t>(cols))) {
      throw CheckpointError(path.string() + ": tensor " + name +
                            " is truncated");
    }
    Matrix m(rows, cols);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = r.f64();
    if (!tensors.emplace(name, std::move(m)).second) {
      throw CheckpointError(path.string() + ": duplicate tensor " + name);
    }
  }

  BackendParams params = BackendParams::zeros(dims);
  params.for_each([&](std::string_view name, Matrix& m) {
    auto it = tensors.find(std::string(name));
    if (it == tensors.end()) {
      throw CheckpointError(path.string() + ": missing tensor " +
                            std::string(name));
    }
    m = std::move(it->second);
    tensors.erase(it);
  });
  if (!tensors.empty()) {
    throw CheckpointError(path.string() + ": unknown tensor " +
                          tensors.begin()->first);
  }
  try {
    params.check_shapes();
  } catch (const ShapeError& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
  return params;
}

}  // namespace sasv
