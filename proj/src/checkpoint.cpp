// Copyright 2026 The Bundlerec Authors.
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

#include "bundlerec/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace bundlerec {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'B', 'R', 'C', 'K', 'P', 'T', '\0', '\0'};

template <typename T>
void put_raw(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T raw() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string_view take(std::size_t n) {
    need(n);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw Error("truncated checkpoint");
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void Checkpoint::put(const std::string& name, const nn::Matrix& value) {
  arrays_[name] = value;
}

const nn::Matrix& Checkpoint::get(const std::string& name) const {
  auto it = arrays_.find(name);
  if (it == arrays_.end()) throw Error("checkpoint has no array " + name);
  return it->second;
}

bool Checkpoint::has(const std::string& name) const {
  return arrays_.count(name) > 0;
}

void Checkpoint::put_params(const nn::ParamRefs& params,
                            const std::string& prefix) {
  for (const auto* p : params) put(prefix + p->name, p->value);
}

void Checkpoint::get_params(const nn::ParamRefs& params,
                            const std::string& prefix) const {
  for (auto* p : params) {
    const auto& v = get(prefix + p->name);
    if (v.rows() != p->value.rows() || v.cols() != p->value.cols()) {
      throw ShapeError("checkpoint array " + prefix + p->name +
                       " has shape " + std::to_string(v.rows()) + "x" +
                       std::to_string(v.cols()) + ", expected " +
                       std::to_string(p->value.rows()) + "x" +
                       std::to_string(p->value.cols()));
    }
    p->value = v;
    p->zero_grad();
  }
}

std::string Checkpoint::serialize() const {
  std::string out(kMagic, sizeof(kMagic));
  put_raw<std::uint32_t>(out, kVersion);
  const std::string text = manifest.dump();
  put_raw<std::uint64_t>(out, text.size());
  out += text;
  put_raw<std::uint64_t>(out, arrays_.size());
  for (const auto& [name, m] : arrays_) {
    put_raw<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put_raw<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
    put_raw<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
    out.append(reinterpret_cast<const char*>(m.data()),
               static_cast<std::size_t>(m.size()) * sizeof(double));
  }
  return out;
}

Checkpoint Checkpoint::deserialize(std::string_view bytes) {
  Reader r(bytes);
  if (r.take(sizeof(kMagic)) != std::string_view(kMagic, sizeof(kMagic))) {
    throw Error("not a checkpoint file (bad magic)");
  }
  const auto version = r.raw<std::uint32_t>();
  if (version != kVersion) {
    throw Error("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ck;
  const auto mlen = r.raw<std::uint64_t>();
  ck.manifest = nlohmann::json::parse(r.take(mlen));
  const auto count = r.raw<std::uint64_t>();
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto nlen = r.raw<std::uint32_t>();
    std::string name(r.take(nlen));
    const auto rows = r.raw<std::uint64_t>();
    const auto cols = r.raw<std::uint64_t>();
    nn::Matrix m(static_cast<Eigen::Index>(rows),
                 static_cast<Eigen::Index>(cols));
    auto data = r.take(rows * cols * sizeof(double));
    std::memcpy(m.data(), data.data(), data.size());
    ck.arrays_.emplace(std::move(name), std::move(m));
  }
  if (!r.done()) throw Error("trailing bytes after checkpoint");
  return ck;
}

void Checkpoint::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  const std::string bytes = serialize();
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize(ss.str());
}

std::uint64_t Checkpoint::hash() const { return fnv1a(serialize()); }

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

}  // namespace bundlerec
