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

#include "cvi/harness/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>

#include "cvi/errors.hpp"
#include "cvi/models.hpp"
#include "cvi/random.hpp"

namespace cvi {

namespace {

[[noreturn]] void fail(const std::string& source, int line, const std::string& what) {
  throw DataError(source + ":" + std::to_string(line) + ": " + what);
}

double to_double(const std::string& tok, const std::string& source, int line) {
  double v = 0.0;
  const char* b = tok.data();
  const char* e = b + tok.size();
  if (!tok.empty() && *b == '+') ++b;
  auto [p, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || p != e || !std::isfinite(v)) fail(source, line, "bad number '" + tok + "'");
  return v;
}

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& X, const std::vector<int>& idx) {
  Eigen::MatrixXd out(static_cast<int>(idx.size()), X.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<int>(i)) = X.row(idx[i]);
  return out;
}

Eigen::VectorXd take(const Eigen::VectorXd& y, const std::vector<int>& idx) {
  Eigen::VectorXd out(static_cast<int>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out[static_cast<int>(i)] = y[idx[i]];
  return out;
}

Dataset from_table(const LibsvmTable& t) {
  Dataset d;
  d.X = t.X;
  d.y.resize(t.labels.size());
  for (int i = 0; i < t.labels.size(); ++i) d.y[i] = normalize_label(t.labels[i]);
  d.train.resize(d.rows());
  std::iota(d.train.begin(), d.train.end(), 0);
  return d;
}

}  // namespace

LibsvmTable parse_libsvm(std::istream& in, const std::string& source, int min_features) {
  std::vector<std::vector<std::pair<int, double>>> rows;
  std::vector<double> labels;
  int width = min_features;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::string tok;
    if (!(ls >> tok)) continue;
    labels.push_back(to_double(tok, source, lineno));
    std::vector<std::pair<int, double>> entries;
    std::map<int, bool> seen;
    while (ls >> tok) {
      const auto colon = tok.find(':');
      if (colon == std::string::npos || colon == 0) fail(source, lineno, "expected idx:val, got '" + tok + "'");
      int idx = 0;
      const std::string is = tok.substr(0, colon);
      auto [p, ec] = std::from_chars(is.data(), is.data() + is.size(), idx);
      if (ec != std::errc() || p != is.data() + is.size()) fail(source, lineno, "bad index '" + is + "'");
      if (idx < 1) fail(source, lineno, "indices are 1-based; got " + std::to_string(idx));
      if (!seen.emplace(idx, true).second) fail(source, lineno, "duplicate index " + std::to_string(idx));
      entries.emplace_back(idx - 1, to_double(tok.substr(colon + 1), source, lineno));
      width = std::max(width, idx);
    }
    rows.push_back(std::move(entries));
  }
  LibsvmTable t;
  t.X = Eigen::MatrixXd::Zero(static_cast<int>(rows.size()), width);
  t.labels = Eigen::Map<Eigen::VectorXd>(labels.data(), static_cast<int>(labels.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (auto [c, v] : rows[r]) t.X(static_cast<int>(r), c) = v;
  }
  return t;
}

LibsvmTable read_libsvm_table(const std::string& path, int min_features) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open data file '" + path + "'");
  return parse_libsvm(in, path, min_features);
}

void write_libsvm(std::ostream& out, const Eigen::MatrixXd& X, const Eigen::VectorXd& labels) {
  if (X.rows() != labels.size()) throw ShapeError("write_libsvm: row/label count mismatch");
  std::ostringstream os;
  os << std::setprecision(17);
  for (int r = 0; r < X.rows(); ++r) {
    os << labels[r];
    for (int c = 0; c < X.cols(); ++c) {
      if (X(r, c) != 0.0) os << ' ' << c + 1 << ':' << X(r, c);
    }
    os << '\n';
  }
  out << os.str();
}

Eigen::MatrixXd Dataset::train_X() const { return take_rows(X, train); }
Eigen::VectorXd Dataset::train_y() const { return take(y, train); }
Eigen::MatrixXd Dataset::test_X() const { return take_rows(X, test); }
Eigen::VectorXd Dataset::test_y() const { return take(y, test); }

void Dataset::validate() const {
  if (y.size() != X.rows()) throw DataError("dataset: label count does not match rows");
  std::vector<int> all(train);
  all.insert(all.end(), test.begin(), test.end());
  std::sort(all.begin(), all.end());
  if (static_cast<int>(all.size()) != rows()) throw DataError("dataset: split does not cover the rows");
  for (int i = 0; i < rows(); ++i) {
    if (all[i] != i) throw DataError("dataset: split indices overlap or are out of range");
  }
  for (int i = 0; i < y.size(); ++i) {
    if (y[i] != 0.0 && y[i] != 1.0) throw DataError("dataset: labels must be 0/1");
  }
}

Dataset read_libsvm(const std::string& path, int min_features) {
  return from_table(read_libsvm_table(path, min_features));
}

TestSplit TestSplit::parse(const std::string& text) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || p != text.data() + text.size() || !(v >= 0.0)) {
    throw ConfigError("test_split: expected a fraction or a row count, got '" + text + "'");
  }
  TestSplit s;
  s.value = v;
  s.is_count = v >= 1.0;
  if (s.is_count && v != std::floor(v)) throw ConfigError("test_split: count must be an integer");
  return s;
}

int TestSplit::count(int rows) const {
  const int n = is_count ? static_cast<int>(value) : static_cast<int>(std::lround(value * rows));
  if (n >= rows && rows > 0) {
    throw ConfigError("test_split holds out " + std::to_string(n) + " of " + std::to_string(rows) + " rows");
  }
  return n;
}

void split_dataset(Dataset& data, const TestSplit& split, std::uint64_t seed) {
  const int n = data.rows();
  const int n_test = split.count(n);
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng = Rng::derive(seed, Stream::kDataShuffle);
  // Fisher-Yates with our own uniform draws; std::shuffle is not portable.
  for (int i = n - 1; i > 0; --i) {
    const int j = std::min(i, static_cast<int>(rng.uniform() * (i + 1)));
    std::swap(perm[i], perm[j]);
  }
  data.test.assign(perm.begin(), perm.begin() + n_test);
  data.train.assign(perm.begin() + n_test, perm.end());
  std::sort(data.test.begin(), data.test.end());
  std::sort(data.train.begin(), data.train.end());
}

void standardize(Dataset& data) {
  if (data.train.empty()) throw DataError("standardize: no training rows");
  const Eigen::MatrixXd T = data.train_X();
  const Eigen::RowVectorXd mean = T.colwise().mean();
  const Eigen::RowVectorXd sd = ((T.rowwise() - mean).colwise().squaredNorm() / T.rows()).cwiseSqrt();
  data.X.rowwise() -= mean;
  for (int c = 0; c < data.features(); ++c) {
    if (sd[c] > 0.0) data.X.col(c) /= sd[c];
  }
  data.standardized = true;
}

Dataset load_dataset(const std::string& path, const TestSplit& split, bool standardize_features,
                     std::uint64_t seed) {
  Dataset d;
  if (const auto comma = path.find(','); comma != std::string::npos) {
    const std::string train_path = path.substr(0, comma), test_path = path.substr(comma + 1);
    LibsvmTable tr = read_libsvm_table(train_path);
    LibsvmTable te = read_libsvm_table(test_path, static_cast<int>(tr.X.cols()));
    if (te.X.cols() > tr.X.cols()) tr.X.conservativeResizeLike(Eigen::MatrixXd::Zero(tr.X.rows(), te.X.cols()));
    LibsvmTable all;
    all.X.resize(tr.X.rows() + te.X.rows(), tr.X.cols());
    all.X << tr.X, te.X;
    all.labels.resize(tr.labels.size() + te.labels.size());
    all.labels << tr.labels, te.labels;
    d = from_table(all);
    d.train.resize(tr.X.rows());
    std::iota(d.train.begin(), d.train.end(), 0);
    d.test.resize(te.X.rows());
    std::iota(d.test.begin(), d.test.end(), static_cast<int>(tr.X.rows()));
  } else {
    d = read_libsvm(path);
    split_dataset(d, split, seed);
  }
  if (standardize_features) standardize(d);
  d.validate();
  return d;
}

}  // namespace cvi
