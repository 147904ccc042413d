#include "gcr/feature_store.hpp"

#include "gcr/config.hpp"
#include "gcr/error.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

namespace gcr {

namespace fs = std::filesystem;

std::string_view to_string(Split split) {
  return split == Split::kQuery ? "query" : "gallery";
}

std::string_view to_string(GraphVariant v) {
  switch (v) {
    case GraphVariant::kNonSym:
      return "nonsym";
    case GraphVariant::kSym:
      return "sym";
    case GraphVariant::kLocal:
      return "local";
  }
  return "?";
}

std::optional<GraphVariant> parse_graph_variant(std::string_view s) {
  if (s == "nonsym") return GraphVariant::kNonSym;
  if (s == "sym") return GraphVariant::kSym;
  if (s == "local") return GraphVariant::kLocal;
  return std::nullopt;
}

void GcrConfig::validate() const {
  auto fail = [](const std::string& msg) {
    throw Error(ErrorCode::kInvalidArgument, msg);
  };
  if (k_global < 1) fail("k_g must be >= 1, got " + std::to_string(k_global));
  if (k_cross < 1) fail("k_c must be >= 1, got " + std::to_string(k_cross));
  if (!(gamma > 0.0) || !std::isfinite(gamma))
    fail("gamma must be a positive finite number");
  if (!(alpha >= 0.0 && alpha <= 1.0)) fail("alpha must lie in [0, 1]");
  if (iterations < 1)
    fail("iterations must be >= 1, got " + std::to_string(iterations));
}

FeatureSet::FeatureSet(Matrix data, std::vector<RowMeta> meta)
    : data_(std::move(data)), meta_(std::move(meta)) {
  if (data_.rows() < 1 || data_.cols() < 1) {
    throw Error(ErrorCode::kDimensionMismatch,
                "feature matrix must have n >= 1 and d >= 1");
  }
  if (static_cast<Eigen::Index>(meta_.size()) != data_.rows()) {
    throw Error(ErrorCode::kRowCountMismatch,
                "metadata has " + std::to_string(meta_.size()) +
                    " rows but feature matrix has " +
                    std::to_string(data_.rows()));
  }
  for (Eigen::Index i = 0; i < data_.rows(); ++i) {
    if (!data_.row(i).allFinite()) {
      throw Error(ErrorCode::kNonFinite,
                  "non-finite value in feature row " + std::to_string(i));
    }
    const RowMeta& m = meta_[static_cast<std::size_t>(i)];
    if (m.camera_id < 0 || m.tracklet_id < 0) {
      throw Error(ErrorCode::kMalformedMeta,
                  "negative camera_id or tracklet_id in row " +
                      std::to_string(i));
    }
  }
}

FeatureSet FeatureSet::with_data(Matrix data) const {
  return FeatureSet(std::move(data), meta_);
}

namespace {

constexpr std::size_t kHeaderBytes = 4 + 2 + 4 + 4;

template <typename T>
void put_le(std::string& out, T value) {
  using U = std::make_unsigned_t<T>;
  auto u = static_cast<U>(value);
  for (std::size_t b = 0; b < sizeof(T); ++b) {
    out.push_back(static_cast<char>(u & 0xFFu));
    u = static_cast<U>(u >> 8);
  }
}

template <typename T>
T get_le(const unsigned char* p) {
  std::make_unsigned_t<T> u = 0;
  for (std::size_t b = sizeof(T); b-- > 0;) {
    u = static_cast<decltype(u)>((u << 8) | p[b]);
  }
  return static_cast<T>(u);
}

std::string read_all(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error(ErrorCode::kIo, "read failed: " + path.string());
  return std::move(ss).str();
}

void write_all(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot open for writing: " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + path.string());
}

template <typename Int>
Int parse_int(std::string_view field, std::size_t line_no, const fs::path& path) {
  Int value{};
  const auto* first = field.data();
  const auto* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || field.empty()) {
    throw Error(ErrorCode::kMalformedMeta,
                path.string() + ":" + std::to_string(line_no) +
                    ": bad integer field '" + std::string(field) + "'");
  }
  return value;
}

}  // namespace

Matrix read_feature_matrix(const fs::path& path) {
  const std::string bytes = read_all(path);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < kHeaderBytes) {
    throw Error(ErrorCode::kMalformedHeader, path.string() + ": truncated header");
  }
  if (bytes.compare(0, 4, kFeatureMagic, 4) != 0) {
    throw Error(ErrorCode::kMalformedHeader, path.string() + ": bad magic");
  }
  const auto version = get_le<std::uint16_t>(p + 4);
  if (version != kFeatureFormatVersion) {
    throw Error(ErrorCode::kMalformedHeader,
                path.string() + ": unsupported format version " +
                    std::to_string(version));
  }
  const auto n = get_le<std::uint32_t>(p + 6);
  const auto d = get_le<std::uint32_t>(p + 10);
  if (n == 0 || d == 0) {
    throw Error(ErrorCode::kMalformedHeader,
                path.string() + ": header declares an empty matrix");
  }
  const std::uint64_t expected = std::uint64_t{n} * d * sizeof(float);
  const std::uint64_t payload = bytes.size() - kHeaderBytes;
  if (payload != expected) {
    throw Error(ErrorCode::kDimensionMismatch,
                path.string() + ": header declares " + std::to_string(n) + "x" +
                    std::to_string(d) + " (" + std::to_string(expected) +
                    " payload bytes) but file has " + std::to_string(payload));
  }

  Matrix data(n, d);
  const unsigned char* q = p + kHeaderBytes;
  for (std::uint32_t i = 0; i < n; ++i) {
    for (std::uint32_t j = 0; j < d; ++j, q += 4) {
      const float f = std::bit_cast<float>(get_le<std::uint32_t>(q));
      if (!std::isfinite(f)) {
        throw Error(ErrorCode::kNonFinite, path.string() +
                                              ": non-finite value in row " +
                                              std::to_string(i));
      }
      data(i, j) = f;
    }
  }
  return data;
}

void write_feature_matrix(const Matrix& data, const fs::path& path) {
  std::string bytes;
  bytes.reserve(kHeaderBytes + static_cast<std::size_t>(data.size()) * 4);
  bytes.append(kFeatureMagic, 4);
  put_le<std::uint16_t>(bytes, kFeatureFormatVersion);
  put_le<std::uint32_t>(bytes, static_cast<std::uint32_t>(data.rows()));
  put_le<std::uint32_t>(bytes, static_cast<std::uint32_t>(data.cols()));
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    for (Eigen::Index j = 0; j < data.cols(); ++j) {
      put_le<std::uint32_t>(bytes, std::bit_cast<std::uint32_t>(
                                       static_cast<float>(data(i, j))));
    }
  }
  write_all(path, bytes);
}

std::vector<RowMeta> read_meta_csv(const fs::path& path) {
  const std::string text = read_all(path);
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) {
    throw Error(ErrorCode::kMalformedMeta, path.string() + ": empty metadata file");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "index,person_id,camera_id,tracklet_id,split") {
    throw Error(ErrorCode::kMalformedMeta,
                path.string() + ": unexpected header '" + line + "'");
  }

  std::vector<RowMeta> meta;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    std::array<std::string_view, 5> fields;
    std::size_t count = 0;
    std::string_view rest(line);
    while (true) {
      const auto comma = rest.find(',');
      if (count == fields.size()) {
        count = fields.size() + 1;
        break;
      }
      fields[count++] = rest.substr(0, comma);
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (count != fields.size()) {
      throw Error(ErrorCode::kMalformedMeta,
                  path.string() + ":" + std::to_string(line_no) +
                      ": expected 5 comma-separated fields");
    }

    const auto index = parse_int<std::uint64_t>(fields[0], line_no, path);
    if (index != meta.size()) {
      throw Error(ErrorCode::kMalformedMeta,
                  path.string() + ":" + std::to_string(line_no) +
                      ": index " + std::to_string(index) + " out of order");
    }
    RowMeta m;
    m.person_id = parse_int<std::int64_t>(fields[1], line_no, path);
    m.camera_id = parse_int<std::int64_t>(fields[2], line_no, path);
    m.tracklet_id = parse_int<std::int64_t>(fields[3], line_no, path);
    if (fields[4] == "query") {
      m.split = Split::kQuery;
    } else if (fields[4] == "gallery") {
      m.split = Split::kGallery;
    } else {
      throw Error(ErrorCode::kMalformedMeta,
                  path.string() + ":" + std::to_string(line_no) +
                      ": split must be query or gallery");
    }
    meta.push_back(m);
  }
  return meta;
}

void write_meta_csv(const std::vector<RowMeta>& meta, const fs::path& path) {
  std::string out = "index,person_id,camera_id,tracklet_id,split\n";
  for (std::size_t i = 0; i < meta.size(); ++i) {
    const RowMeta& m = meta[i];
    out += std::to_string(i);
    out += ',';
    out += std::to_string(m.person_id);
    out += ',';
    out += std::to_string(m.camera_id);
    out += ',';
    out += std::to_string(m.tracklet_id);
    out += ',';
    out += to_string(m.split);
    out += '\n';
  }
  write_all(path, out);
}

FeatureSet load_features(const fs::path& path, const fs::path& meta_path) {
  Matrix data = read_feature_matrix(path);
  std::vector<RowMeta> meta = read_meta_csv(meta_path);
  return FeatureSet(std::move(data), std::move(meta));
}

void save_features(const FeatureSet& fs, const fs::path& path,
                   const fs::path& meta_path) {
  write_feature_matrix(fs.data(), path);
  write_meta_csv(fs.meta(), meta_path);
}

void l2_normalize_rows(Matrix& data) {
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    const double norm = data.row(i).norm();
    if (norm == 0.0) {
      throw Error(ErrorCode::kZeroRow,
                  "cannot normalize zero row " + std::to_string(i));
    }
    data.row(i) /= norm;
  }
}

FeatureSet l2_normalize(const FeatureSet& fs) {
  Matrix data = fs.data();
  l2_normalize_rows(data);
  return fs.with_data(std::move(data));
}

}  // namespace gcr
