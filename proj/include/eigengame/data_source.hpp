#pragma once

#include "eigengame/common.hpp"

#include <memory>
#include <random>
#include <string>
#include <vector>

namespace eigengame {

enum class SamplingMode {
  /// i.i.d. rows drawn with replacement for every minibatch.
  with_replacement,
  /// Sequential epochs over the rows; the last batch of an epoch may be short.
  full_pass,
};

class BatchStream;

/// Immutable n x d sample matrix plus the minibatch policy used to stream it.
/// Copies share the underlying matrix.
class DataSource {
 public:
  DataSource(MatrixXd data, Index batch_size, std::uint64_t rng_seed, bool centered = false,
             SamplingMode mode = SamplingMode::with_replacement);

  Index rows() const { return data_->rows(); }
  Index cols() const { return data_->cols(); }
  Index batch_size() const { return batch_size_; }
  std::uint64_t rng_seed() const { return seed_; }
  bool centered() const { return centered_; }
  SamplingMode mode() const { return mode_; }

  const MatrixXd& data() const { return *data_; }
  std::shared_ptr<const MatrixXd> shared_data() const { return data_; }

  /// Independent cursor for one consumer. Streams for distinct worker ids are
  /// decorrelated; equal (seed, batch_size, worker) give equal sequences.
  BatchStream stream(std::uint64_t worker_id = 0) const;

  /// Same rows and seed with a different minibatch size; shares the matrix.
  DataSource with_batch_size(Index batch_size) const;

 private:
  std::shared_ptr<const MatrixXd> data_;
  Index batch_size_ = 1;
  std::uint64_t seed_ = 0;
  bool centered_ = false;
  SamplingMode mode_ = SamplingMode::with_replacement;
};

class BatchStream {
 public:
  std::vector<Index> next_indices();
  MatrixXd next();

 private:
  friend class DataSource;
  BatchStream(std::shared_ptr<const MatrixXd> data, Index batch_size, std::uint64_t seed,
              SamplingMode mode);

  std::shared_ptr<const MatrixXd> data_;
  Index batch_size_;
  SamplingMode mode_;
  std::mt19937_64 rng_;
  Index cursor_ = 0;
};

enum class DatasetFormat { csv, binary };

struct LoadOptions {
  Index batch_size = 1;
  std::uint64_t rng_seed = 0;
  bool centered = false;
  SamplingMode mode = SamplingMode::with_replacement;
};

/// Picks the format from the extension: ".csv"/".txt" are CSV, anything else
/// is the binary matrix format.
DatasetFormat format_from_path(const std::string& path);

/// CSV: comma separated, one sample per row, optional header row (detected
/// when the first row is not numeric).
MatrixXd read_matrix_csv(const std::string& path);
void write_matrix_csv(const std::string& path, const MatrixXd& m);

/// Binary: "EGDT", u32 rows, u32 cols, rows*cols f64, all little-endian,
/// row-major.
MatrixXd read_matrix_binary(const std::string& path);
void write_matrix_binary(const std::string& path, const MatrixXd& m);

MatrixXd read_matrix(const std::string& path, DatasetFormat format);

DataSource load_dataset(const std::string& path, DatasetFormat format,
                        const LoadOptions& options = {});

}  // namespace eigengame
