#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mogb/types.hpp"

namespace mogb {

static_assert(std::endian::native == std::endian::little, "GBEM I/O assumes a little-endian host");

/// Malformed GBEM/TSV input. `offset` is the byte (GBEM) or line (TSV) where parsing stopped.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " at offset " + std::to_string(offset)), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

// GBEM layout (little-endian):
//   "GBEM" | u32 version=1 | u32 N | u32 D_in | u8 stage | u32 K | N x ([i32 label][D_in x f32])
inline constexpr std::array<char, 4> kGbemMagic{'G', 'B', 'E', 'M'};
inline constexpr std::uint32_t kGbemVersion = 1;
inline constexpr std::size_t kGbemHeaderSize = 4 + 4 + 4 + 4 + 1 + 4;

namespace detail {

template <class T>
void put(std::vector<char>& out, T v) {
  const auto* p = reinterpret_cast<const char*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

class ByteReader {
 public:
  explicit ByteReader(const std::vector<char>& buf) : buf_(buf) {}

  template <class T>
  T get(const char* what) {
    if (pos_ + sizeof(T) > buf_.size()) throw FormatError(std::string("truncated ") + what, pos_);
    T v;
    std::memcpy(&v, buf_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return buf_.size() - pos_; }

 private:
  const std::vector<char>& buf_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::vector<char> encode_gbem(const Dataset& ds) {
  std::vector<char> out;
  out.reserve(kGbemHeaderSize + ds.size() * (4 + 4 * ds.dim));
  out.insert(out.end(), kGbemMagic.begin(), kGbemMagic.end());
  detail::put<std::uint32_t>(out, kGbemVersion);
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(ds.size()));
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(ds.dim));
  detail::put<std::uint8_t>(out, static_cast<std::uint8_t>(ds.stage));
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(ds.num_known));
  for (const auto& s : ds.samples) {
    detail::put<std::int32_t>(out, s.label);
    for (Eigen::Index j = 0; j < s.features.size(); ++j)
      detail::put<float>(out, static_cast<float>(s.features[j]));
  }
  return out;
}

inline Dataset decode_gbem(const std::vector<char>& buf) {
  detail::ByteReader in(buf);
  if (buf.size() < 4 || std::memcmp(buf.data(), kGbemMagic.data(), 4) != 0)
    throw FormatError("bad magic", 0);
  in.get<std::uint32_t>("magic");
  const std::size_t version_at = in.pos();
  const auto version = in.get<std::uint32_t>("header");
  if (version != kGbemVersion)
    throw FormatError("unsupported version " + std::to_string(version), version_at);
  const auto n = in.get<std::uint32_t>("header");
  const auto dim = in.get<std::uint32_t>("header");
  const std::size_t stage_at = in.pos();
  const auto stage = in.get<std::uint8_t>("header");
  if (stage > 1) throw FormatError("bad stage byte " + std::to_string(stage), stage_at);
  const auto k = in.get<std::uint32_t>("header");
  if (dim == 0) throw FormatError("zero dimension", kGbemHeaderSize - 9);

  Dataset ds;
  ds.dim = dim;
  ds.num_known = static_cast<int>(k);
  ds.stage = static_cast<Stage>(stage);
  const std::size_t record = 4 + 4 * static_cast<std::size_t>(dim);
  if (in.remaining() < static_cast<std::size_t>(n) * record)
    throw FormatError("truncated payload: expected " + std::to_string(n * record) +
                          " bytes, found " + std::to_string(in.remaining()),
                      in.pos() + (in.remaining() / record) * record);
  ds.samples.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::size_t label_at = in.pos();
    LabeledVector s;
    s.label = in.get<std::int32_t>("record");
    s.features.resize(dim);
    for (std::uint32_t j = 0; j < dim; ++j) s.features[j] = in.get<float>("record");
    if (s.label < 1 || s.label > ds.unknown_label())
      throw FormatError("label " + std::to_string(s.label) + " outside 1.." +
                            std::to_string(ds.unknown_label()),
                        label_at);
    if (!s.features.allFinite()) throw FormatError("non-finite feature", label_at + 4);
    ds.samples.push_back(std::move(s));
  }
  if (in.remaining() != 0) throw FormatError("trailing bytes after payload", in.pos());
  return ds;
}

inline void save_embeddings(const Dataset& ds, const std::string& path) {
  const auto bytes = encode_gbem(ds);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("write failed: " + path);
}

inline Dataset load_embeddings(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::vector<char> buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_gbem(buf);
}

// TSV fixtures: header "label\tv1\t...\tvD", then one row per sample. K is taken as
// the largest label present unless given.
inline void save_tsv(const Dataset& ds, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << "label";
  for (std::size_t j = 0; j < ds.dim; ++j) f << "\tv" << (j + 1);
  f << '\n';
  f.precision(9);
  for (const auto& s : ds.samples) {
    f << s.label;
    for (Eigen::Index j = 0; j < s.features.size(); ++j) f << '\t' << s.features[j];
    f << '\n';
  }
}

inline Dataset load_tsv(const std::string& path, std::optional<int> num_known = std::nullopt) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(f, line) || line.rfind("label", 0) != 0) throw FormatError("missing TSV header", 1);
  std::size_t dim = 0;
  for (char c : line) dim += (c == '\t');
  if (dim == 0) throw FormatError("TSV header has no feature columns", 1);

  Dataset ds;
  ds.dim = dim;
  int max_label = 0;
  std::size_t line_no = 1;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    LabeledVector s;
    s.features.resize(static_cast<Eigen::Index>(dim));
    if (!(row >> s.label)) throw FormatError("bad label", line_no);
    for (std::size_t j = 0; j < dim; ++j)
      if (!(row >> s.features[static_cast<Eigen::Index>(j)]))
        throw FormatError("expected " + std::to_string(dim) + " features", line_no);
    if (s.label < 1) throw FormatError("label must be >= 1", line_no);
    max_label = std::max(max_label, s.label);
    ds.samples.push_back(std::move(s));
  }
  ds.num_known = num_known.value_or(max_label);
  ds.validate();
  return ds;
}

/// Dispatches on extension: ".tsv" is text, anything else GBEM.
inline Dataset load_dataset(const std::string& path) {
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".tsv") return load_tsv(path);
  return load_embeddings(path);
}

inline void save_dataset(const Dataset& ds, const std::string& path) {
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".tsv") return save_tsv(ds, path);
  save_embeddings(ds, path);
}

inline nlohmann::json to_json(const Vector& v) {
  return nlohmann::json(std::vector<double>(v.data(), v.data() + v.size()));
}

inline Vector vector_from_json(const nlohmann::json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

inline void write_json(const nlohmann::json& j, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << j.dump(2) << '\n';
}

inline nlohmann::json read_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  return nlohmann::json::parse(f);
}

}  // namespace mogb
