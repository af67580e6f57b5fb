#include "privet/data.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

#include "privet/error.hpp"
#include "privet/rng.hpp"

namespace privet {

namespace {

constexpr char kMagic[16] = {'P', 'R', 'I', 'V', 'E', 'T', 'M', '1', 0, 0, 0, 0, 0, 0, 0, 0};

std::size_t words_for(std::size_t cols) { return (cols + kWordBits - 1) / kWordBits; }

void check_shape(std::size_t rows, std::size_t cols) {
  if (rows == 0 || cols == 0) throw ValidationError("matrix must have at least one row and column");
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

bool parse_double(std::string_view tok, double& out) {
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  const char* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, out);
  return ec == std::errc() && ptr == end;
}

template <typename T>
void put_le(std::ostream& os, T v) {
  unsigned char buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T get_le(const unsigned char* p) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(p[i]) << (8 * i);
  return v;
}

DataMatrix load_csv(const std::filesystem::path& path, ValueKind kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();

  std::vector<double> vals;
  std::size_t cols = 0, rows = 0, line_no = 0;
  std::size_t pos = 0;
  bool first = true;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string::npos) nl = text.size();
    std::string_view line = trim(std::string_view(text).substr(pos, nl - pos));
    pos = nl + 1;
    ++line_no;
    if (line.empty()) continue;

    std::size_t count = 0, start = 0;
    bool header = false;
    for (;;) {
      const std::size_t comma = line.find(',', start);
      const std::string_view tok = trim(line.substr(start, comma == std::string_view::npos
                                                              ? std::string_view::npos
                                                              : comma - start));
      double v;
      if (!parse_double(tok, v)) {
        if (first && count == 0) {
          header = true;
          break;
        }
        throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                              ": non-numeric value '" + std::string(tok) + "'");
      }
      if (!std::isfinite(v))
        throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": non-finite value");
      vals.push_back(v);
      ++count;
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (header) {
      // count columns from the header so that the data rows are checked against it
      cols = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
      first = false;
      continue;
    }
    if (cols == 0) cols = count;
    if (count != cols)
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": ragged row (" +
                            std::to_string(count) + " values, expected " + std::to_string(cols) + ")");
    ++rows;
    first = false;
  }
  if (rows == 0) throw ValidationError(path.string() + ": no data rows");

  const bool all_bits =
      std::all_of(vals.begin(), vals.end(), [](double v) { return v == 0.0 || v == 1.0; });
  if (kind == ValueKind::binary && !all_bits)
    throw ValidationError(path.string() + ": values outside {0,1} for binary matrix");
  if (kind == ValueKind::binary || (kind == ValueKind::auto_detect && all_bits)) {
    DataMatrix m = DataMatrix::zeros_binary(rows, cols);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j)
        if (vals[i * cols + j] != 0.0) m.set_bit(i, j, true);
    return m;
  }
  RowMatrixXd dense = Eigen::Map<const RowMatrixXd>(vals.data(), static_cast<Eigen::Index>(rows),
                                                    static_cast<Eigen::Index>(cols));
  return DataMatrix::from_dense(std::move(dense));
}

void save_csv(const DataMatrix& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  std::string line;
  char buf[32];
  for (std::size_t i = 0; i < m.rows(); ++i) {
    line.clear();
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (j) line.push_back(',');
      if (m.is_binary()) {
        line.push_back(m.bit(i, j) ? '1' : '0');
      } else {
        auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), m.values()(i, j));
        line.append(buf, ptr);
      }
    }
    line.push_back('\n');
    out.write(line.data(), static_cast<std::streamsize>(line.size()));
  }
  if (!out) throw IoError("write failed: " + path.string());
}

DataMatrix load_dense_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  unsigned char head[40];
  if (!in.read(reinterpret_cast<char*>(head), sizeof(head)))
    throw ValidationError(path.string() + ": truncated header");
  if (std::memcmp(head, kMagic, sizeof(kMagic)) != 0)
    throw ValidationError(path.string() + ": bad magic");
  const auto code = get_le<std::uint32_t>(head + 16);
  const auto rows = get_le<std::uint64_t>(head + 24);
  const auto cols = get_le<std::uint64_t>(head + 32);
  check_shape(rows, cols);

  if (code == static_cast<std::uint32_t>(DType::binary)) {
    DataMatrix m = DataMatrix::zeros_binary(rows, cols);
    const std::size_t w = m.words_per_row();
    std::vector<unsigned char> buf(w * 8);
    const std::size_t tail = cols % kWordBits;
    const std::uint64_t pad_mask = tail ? ~((std::uint64_t{1} << tail) - 1) : 0;
    for (std::size_t i = 0; i < rows; ++i) {
      if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size())))
        throw ValidationError(path.string() + ": truncated payload");
      auto row = m.packed_row(i);
      for (std::size_t k = 0; k < w; ++k) row[k] = get_le<std::uint64_t>(buf.data() + 8 * k);
      if (row[w - 1] & pad_mask) throw ValidationError(path.string() + ": nonzero padding bits");
    }
    return m;
  }
  if (code == static_cast<std::uint32_t>(DType::float64)) {
    RowMatrixXd v(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    std::vector<unsigned char> buf(cols * 8);
    for (std::size_t i = 0; i < rows; ++i) {
      if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size())))
        throw ValidationError(path.string() + ": truncated payload");
      for (std::size_t j = 0; j < cols; ++j)
        v(i, j) = std::bit_cast<double>(get_le<std::uint64_t>(buf.data() + 8 * j));
    }
    return DataMatrix::from_dense(std::move(v));
  }
  throw ValidationError(path.string() + ": unknown dtype code " + std::to_string(code));
}

void save_dense_binary(const DataMatrix& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(kMagic, sizeof(kMagic));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.dtype()));
  put_le<std::uint32_t>(out, 0);
  put_le<std::uint64_t>(out, m.rows());
  put_le<std::uint64_t>(out, m.cols());
  if (m.is_binary()) {
    for (std::uint64_t w : m.packed()) put_le<std::uint64_t>(out, w);
  } else {
    for (std::size_t i = 0; i < m.rows(); ++i)
      for (std::size_t j = 0; j < m.cols(); ++j)
        put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(m.values()(i, j)));
  }
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace

DataMatrix DataMatrix::zeros_binary(std::size_t rows, std::size_t cols) {
  check_shape(rows, cols);
  DataMatrix m;
  m.rows_ = rows;
  m.cols_ = cols;
  m.dtype_ = DType::binary;
  m.words_ = words_for(cols);
  m.bits_.assign(rows * m.words_, 0);
  return m;
}

DataMatrix DataMatrix::from_bits(std::size_t rows, std::size_t cols,
                                 std::span<const std::uint8_t> bits) {
  if (bits.size() != rows * cols) throw ValidationError("bit vector size does not match shape");
  DataMatrix m = zeros_binary(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) {
      const std::uint8_t b = bits[i * cols + j];
      if (b > 1) throw ValidationError("binary value outside {0,1}");
      if (b) m.set_bit(i, j, true);
    }
  return m;
}

DataMatrix DataMatrix::from_dense(RowMatrixXd values) {
  check_shape(static_cast<std::size_t>(values.rows()), static_cast<std::size_t>(values.cols()));
  if (!values.allFinite()) throw ValidationError("float matrix contains NaN or Inf");
  DataMatrix m;
  m.rows_ = static_cast<std::size_t>(values.rows());
  m.cols_ = static_cast<std::size_t>(values.cols());
  m.dtype_ = DType::float64;
  m.values_ = std::move(values);
  return m;
}

DataMatrix DataMatrix::select_rows(std::span<const std::size_t> rows) const {
  if (rows.empty()) throw ValidationError("row selection is empty");
  for (std::size_t r : rows)
    if (r >= rows_) throw ValidationError("row index out of range");
  if (is_binary()) {
    DataMatrix m = zeros_binary(rows.size(), cols_);
    for (std::size_t i = 0; i < rows.size(); ++i)
      std::copy_n(bits_.begin() + static_cast<std::ptrdiff_t>(rows[i] * words_), words_,
                  m.bits_.begin() + static_cast<std::ptrdiff_t>(i * words_));
    return m;
  }
  RowMatrixXd v(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols_));
  for (std::size_t i = 0; i < rows.size(); ++i) v.row(i) = values_.row(rows[i]);
  DataMatrix m;
  m.rows_ = rows.size();
  m.cols_ = cols_;
  m.dtype_ = DType::float64;
  m.values_ = std::move(v);
  return m;
}

DataMatrix DataMatrix::head(std::size_t n) const {
  std::vector<std::size_t> idx(std::min(n, rows_));
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return select_rows(idx);
}

DataMatrix DataMatrix::stack(const DataMatrix& top, const DataMatrix& bottom) {
  if (top.dtype_ != bottom.dtype_ || top.cols_ != bottom.cols_)
    throw ValidationError("cannot stack matrices of different dtype or width");
  DataMatrix m;
  m.rows_ = top.rows_ + bottom.rows_;
  m.cols_ = top.cols_;
  m.dtype_ = top.dtype_;
  m.words_ = top.words_;
  if (top.is_binary()) {
    m.bits_ = top.bits_;
    m.bits_.insert(m.bits_.end(), bottom.bits_.begin(), bottom.bits_.end());
  } else {
    m.values_.resize(static_cast<Eigen::Index>(m.rows_), static_cast<Eigen::Index>(m.cols_));
    m.values_ << top.values_, bottom.values_;
  }
  return m;
}

bool operator==(const DataMatrix& a, const DataMatrix& b) {
  if (a.rows_ != b.rows_ || a.cols_ != b.cols_ || a.dtype_ != b.dtype_) return false;
  if (a.is_binary()) return a.bits_ == b.bits_;
  return a.values_ == b.values_;
}

FileFormat format_from_extension(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? FileFormat::csv : FileFormat::dense_binary;
}

DataMatrix load_matrix(const std::filesystem::path& path, FileFormat format, ValueKind kind) {
  if (!std::filesystem::exists(path)) throw IoError("no such file: " + path.string());
  if (format == FileFormat::csv) return load_csv(path, kind);
  DataMatrix m = load_dense_binary(path);
  if (kind == ValueKind::binary && !m.is_binary())
    throw ValidationError(path.string() + ": expected a binary matrix");
  if (kind == ValueKind::float64 && m.is_binary())
    throw ValidationError(path.string() + ": expected a float matrix");
  return m;
}

void save_matrix(const DataMatrix& matrix, const std::filesystem::path& path, FileFormat format) {
  if (format == FileFormat::csv)
    save_csv(matrix, path);
  else
    save_dense_binary(matrix, path);
}

Split split(const DataMatrix& matrix, const SplitSpec& spec) {
  if (spec.n_train == 0 || spec.n_test == 0 || spec.n_synth == 0)
    throw ValidationError("split sizes must all be at least 1");
  if (spec.n_train + spec.n_test + spec.n_synth > matrix.rows())
    throw ValidationError("split sizes exceed row count");
  std::vector<std::size_t> idx(matrix.rows());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Xoshiro256 rng(spec.seed);
  shuffle(idx, rng);

  Split out;
  auto take = [&](std::size_t from, std::size_t n) {
    return std::vector<std::size_t>(idx.begin() + static_cast<std::ptrdiff_t>(from),
                                    idx.begin() + static_cast<std::ptrdiff_t>(from + n));
  };
  out.train_rows = take(0, spec.n_train);
  out.test_rows = take(spec.n_train, spec.n_test);
  out.synth_rows = take(spec.n_train + spec.n_test, spec.n_synth);
  out.train = matrix.select_rows(out.train_rows);
  out.test = matrix.select_rows(out.test_rows);
  out.synth = matrix.select_rows(out.synth_rows);
  return out;
}

}  // namespace privet
