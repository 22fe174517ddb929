#include "eigengame/data_source.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace eigengame {

namespace {

void require_finite(const MatrixXd& m) {
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j)
      if (!std::isfinite(m(i, j)))
        throw Error(ErrorCode::data, "non-finite entry at row " + std::to_string(i + 1) +
                                         ", column " + std::to_string(j + 1));
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

bool parse_double(std::string_view field, double& out) {
  if (field.empty()) return false;
  if (field.front() == '+') field.remove_prefix(1);
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, out);
  return ec == std::errc() && ptr == end;
}

void put_u32(std::ostream& os, std::uint32_t v) {
  std::array<char, 4> b{};
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
  os.write(b.data(), 4);
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

constexpr std::array<char, 4> kMagic{'E', 'G', 'D', 'T'};

}  // namespace

DataSource::DataSource(MatrixXd data, Index batch_size, std::uint64_t rng_seed, bool centered,
                       SamplingMode mode)
    : batch_size_(batch_size), seed_(rng_seed), centered_(centered), mode_(mode) {
  if (data.rows() == 0 || data.cols() == 0)
    throw Error(ErrorCode::empty_dataset, "dataset has no rows or no columns");
  if (batch_size < 1) throw Error(ErrorCode::invalid_argument, "batch_size must be >= 1");
  require_finite(data);
  if (centered) data.rowwise() -= data.colwise().mean();
  data_ = std::make_shared<const MatrixXd>(std::move(data));
}

BatchStream DataSource::stream(std::uint64_t worker_id) const {
  return BatchStream(data_, batch_size_, derive_seed(seed_, worker_id), mode_);
}

DataSource DataSource::with_batch_size(Index batch_size) const {
  if (batch_size < 1) throw Error(ErrorCode::invalid_argument, "batch_size must be >= 1");
  DataSource out = *this;
  out.batch_size_ = batch_size;
  return out;
}

BatchStream::BatchStream(std::shared_ptr<const MatrixXd> data, Index batch_size,
                         std::uint64_t seed, SamplingMode mode)
    : data_(std::move(data)), batch_size_(batch_size), mode_(mode), rng_(seed) {}

std::vector<Index> BatchStream::next_indices() {
  const Index n = data_->rows();
  std::vector<Index> idx;
  if (mode_ == SamplingMode::with_replacement) {
    std::uniform_int_distribution<Index> pick(0, n - 1);
    idx.resize(static_cast<std::size_t>(batch_size_));
    for (auto& i : idx) i = pick(rng_);
    return idx;
  }
  const Index take = std::min(batch_size_, n - cursor_);
  idx.resize(static_cast<std::size_t>(take));
  for (Index j = 0; j < take; ++j) idx[static_cast<std::size_t>(j)] = cursor_ + j;
  cursor_ = (cursor_ + take) % n;
  return idx;
}

MatrixXd BatchStream::next() {
  const auto idx = next_indices();
  MatrixXd batch(static_cast<Index>(idx.size()), data_->cols());
  for (std::size_t r = 0; r < idx.size(); ++r) batch.row(static_cast<Index>(r)) = data_->row(idx[r]);
  return batch;
}

DatasetFormat format_from_path(const std::string& path) {
  auto ends_with = [&](const char* ext) {
    const std::size_t n = std::strlen(ext);
    return path.size() >= n && path.compare(path.size() - n, n, ext) == 0;
  };
  return (ends_with(".csv") || ends_with(".txt")) ? DatasetFormat::csv : DatasetFormat::binary;
}

MatrixXd read_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path);
  std::vector<double> values;
  Index cols = -1;
  Index rows = 0;
  std::string line;
  std::size_t line_no = 0;
  bool first_content = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    std::vector<double> row(fields.size());
    bool numeric = true;
    std::size_t bad = 0;
    for (std::size_t c = 0; c < fields.size(); ++c) {
      if (!parse_double(fields[c], row[c])) {
        numeric = false;
        bad = c + 1;
        break;
      }
    }
    if (first_content) {
      first_content = false;
      if (!numeric) {
        cols = static_cast<Index>(fields.size());
        continue;
      }
    }
    if (!numeric) throw ParseError("malformed number in " + path, line_no, bad);
    if (cols < 0) cols = static_cast<Index>(row.size());
    if (static_cast<Index>(row.size()) != cols)
      throw ParseError("expected " + std::to_string(cols) + " fields, found " +
                           std::to_string(row.size()),
                       line_no, row.size());
    for (std::size_t c = 0; c < row.size(); ++c)
      if (!std::isfinite(row[c]))
        throw Error(ErrorCode::data, "non-finite entry in " + path + " at row " +
                                         std::to_string(line_no) + ", column " +
                                         std::to_string(c + 1));
    values.insert(values.end(), row.begin(), row.end());
    ++rows;
  }
  if (rows == 0) throw Error(ErrorCode::empty_dataset, path + " contains no samples");
  MatrixXd m(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) m(r, c) = values[static_cast<std::size_t>(r * cols + c)];
  return m;
}

void write_matrix_csv(const std::string& path, const MatrixXd& m) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path);
  out.precision(17);
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) {
      if (c) out << ',';
      out << m(r, c);
    }
    out << '\n';
  }
}

MatrixXd read_matrix_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path);
  std::array<unsigned char, 12> header{};
  in.read(reinterpret_cast<char*>(header.data()), header.size());
  if (in.gcount() != static_cast<std::streamsize>(header.size()))
    throw ParseError("truncated header in " + path, 0, 0);
  if (std::memcmp(header.data(), kMagic.data(), kMagic.size()) != 0)
    throw ParseError("bad magic in " + path, 0, 0);
  const std::uint32_t rows = get_u32(header.data() + 4);
  const std::uint32_t cols = get_u32(header.data() + 8);
  if (rows == 0 || cols == 0) throw Error(ErrorCode::empty_dataset, path + " declares an empty matrix");
  MatrixXd m(rows, cols);
  std::array<unsigned char, 8> buf{};
  for (std::uint32_t r = 0; r < rows; ++r) {
    for (std::uint32_t c = 0; c < cols; ++c) {
      in.read(reinterpret_cast<char*>(buf.data()), 8);
      if (in.gcount() != 8) throw ParseError("truncated payload in " + path, r + 1, c + 1);
      std::uint64_t bits = 0;
      for (int b = 7; b >= 0; --b) bits = (bits << 8) | buf[static_cast<std::size_t>(b)];
      const double x = std::bit_cast<double>(bits);
      if (!std::isfinite(x))
        throw Error(ErrorCode::data, "non-finite entry in " + path + " at row " +
                                         std::to_string(r + 1) + ", column " + std::to_string(c + 1));
      m(r, c) = x;
    }
  }
  return m;
}

void write_matrix_binary(const std::string& path, const MatrixXd& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path);
  out.write(kMagic.data(), kMagic.size());
  put_u32(out, static_cast<std::uint32_t>(m.rows()));
  put_u32(out, static_cast<std::uint32_t>(m.cols()));
  std::array<char, 8> buf{};
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) {
      std::uint64_t bits = std::bit_cast<std::uint64_t>(m(r, c));
      for (int b = 0; b < 8; ++b) buf[static_cast<std::size_t>(b)] = static_cast<char>((bits >> (8 * b)) & 0xffu);
      out.write(buf.data(), 8);
    }
  }
  if (!out) throw Error(ErrorCode::io, "write failed for " + path);
}

MatrixXd read_matrix(const std::string& path, DatasetFormat format) {
  return format == DatasetFormat::csv ? read_matrix_csv(path) : read_matrix_binary(path);
}

DataSource load_dataset(const std::string& path, DatasetFormat format, const LoadOptions& options) {
  return DataSource(read_matrix(path, format), options.batch_size, options.rng_seed,
                    options.centered, options.mode);
}

}  // namespace eigengame
