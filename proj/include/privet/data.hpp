#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace privet {

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMatrixXd = RowMatrix<double>;

enum class DType : std::uint32_t { binary = 0, float64 = 1 };

enum class FileFormat { csv, dense_binary };

// How CSV values are interpreted. auto_detect picks binary when every value
// is 0 or 1.
enum class ValueKind { auto_detect, binary, float64 };

inline constexpr std::size_t kWordBits = 64;

// Dense sample-by-feature matrix. Binary rows are packed LSB-first into
// 64-bit words; padding bits past n_cols are always zero.
class DataMatrix {
 public:
  DataMatrix() = default;

  static DataMatrix zeros_binary(std::size_t rows, std::size_t cols);
  static DataMatrix from_bits(std::size_t rows, std::size_t cols,
                              std::span<const std::uint8_t> bits);
  static DataMatrix from_dense(RowMatrixXd values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  DType dtype() const { return dtype_; }
  bool is_binary() const { return dtype_ == DType::binary; }
  std::size_t words_per_row() const { return words_; }

  bool bit(std::size_t i, std::size_t j) const {
    return (bits_[i * words_ + j / kWordBits] >> (j % kWordBits)) & 1U;
  }
  void set_bit(std::size_t i, std::size_t j, bool v) {
    std::uint64_t& w = bits_[i * words_ + j / kWordBits];
    const std::uint64_t mask = std::uint64_t{1} << (j % kWordBits);
    w = v ? (w | mask) : (w & ~mask);
  }
  std::span<const std::uint64_t> packed_row(std::size_t i) const {
    return {bits_.data() + i * words_, words_};
  }
  std::span<std::uint64_t> packed_row(std::size_t i) {
    return {bits_.data() + i * words_, words_};
  }
  const std::vector<std::uint64_t>& packed() const { return bits_; }

  const RowMatrixXd& values() const { return values_; }

  // Value as double for either dtype.
  double at(std::size_t i, std::size_t j) const {
    return is_binary() ? (bit(i, j) ? 1.0 : 0.0) : values_(i, j);
  }

  DataMatrix select_rows(std::span<const std::size_t> rows) const;
  DataMatrix head(std::size_t n) const;

  // Vertical concatenation; dtypes and widths must match.
  static DataMatrix stack(const DataMatrix& top, const DataMatrix& bottom);

  friend bool operator==(const DataMatrix& a, const DataMatrix& b);

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  DType dtype_ = DType::binary;
  std::size_t words_ = 0;
  std::vector<std::uint64_t> bits_;
  RowMatrixXd values_;
};

DataMatrix load_matrix(const std::filesystem::path& path, FileFormat format,
                       ValueKind kind = ValueKind::auto_detect);
void save_matrix(const DataMatrix& matrix, const std::filesystem::path& path, FileFormat format);

// Guess the format from the extension: ".csv" is CSV, anything else dense-binary.
FileFormat format_from_extension(const std::filesystem::path& path);

struct SplitSpec {
  std::uint64_t seed = 0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  std::size_t n_synth = 0;
};

struct Split {
  DataMatrix train, test, synth;
  std::vector<std::size_t> train_rows, test_rows, synth_rows;
};

// Shuffles row indices with the seeded generator and takes consecutive
// blocks for train, test and synth.
Split split(const DataMatrix& matrix, const SplitSpec& spec);

}  // namespace privet
