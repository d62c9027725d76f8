// Copyright 2026 The cvi Authors
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

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace cvi {

/// Rows of a libsvm file as read, labels untouched.
struct LibsvmTable {
  Eigen::MatrixXd X;
  Eigen::VectorXd labels;
};

LibsvmTable parse_libsvm(std::istream& in, const std::string& source = "<stream>", int min_features = 0);
LibsvmTable read_libsvm_table(const std::string& path, int min_features = 0);
void write_libsvm(std::ostream& out, const Eigen::MatrixXd& X, const Eigen::VectorXd& labels);

struct Dataset {
  Eigen::MatrixXd X;
  /// In {0, 1}.
  Eigen::VectorXd y;
  std::vector<int> train;
  std::vector<int> test;
  bool standardized = false;

  int rows() const { return static_cast<int>(X.rows()); }
  int features() const { return static_cast<int>(X.cols()); }
  Eigen::MatrixXd train_X() const;
  Eigen::VectorXd train_y() const;
  Eigen::MatrixXd test_X() const;
  Eigen::VectorXd test_y() const;
  void validate() const;
};

/// All rows are training rows.
Dataset read_libsvm(const std::string& path, int min_features = 0);

/// Size of the held-out part: a fraction in [0, 1) or a row count.
struct TestSplit {
  double value = 0.0;
  bool is_count = false;

  static TestSplit parse(const std::string& text);
  int count(int rows) const;
};

/// Shuffles the rows with the data-shuffle stream of `seed` and holds out the
/// first `split.count(rows)` of them.
void split_dataset(Dataset& data, const TestSplit& split, std::uint64_t seed);

/// Z-scores every column with training-row statistics. Constant columns are
/// centered only.
void standardize(Dataset& data);

/// `path` is either one file (split by `split`) or "train,test".
Dataset load_dataset(const std::string& path, const TestSplit& split, bool standardize_features,
                     std::uint64_t seed);

}  // namespace cvi
