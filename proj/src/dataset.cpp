#include "projbnn/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>

#include "projbnn/rng.hpp"

namespace projbnn {

void Dataset::validate() const {
  require(x.rows() > 0, "dataset is empty");
  require(x.rows() == y.rows(), "dataset has ", x.rows(), " x rows but ", y.rows(), " y rows");
  require(x.cols() > 0 && y.cols() > 0, "dataset needs at least one input and one output column");
  require(x.allFinite() && y.allFinite(), "dataset contains non-finite values");
}

Dataset Dataset::take(const std::vector<int>& rows) const {
  Dataset out;
  out.x.resize(static_cast<Index>(rows.size()), x.cols());
  out.y.resize(static_cast<Index>(rows.size()), y.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    require(rows[i] >= 0 && rows[i] < x.rows(), "row index ", rows[i], " out of range [0, ", x.rows(), ")");
    out.x.row(static_cast<Index>(i)) = x.row(rows[i]);
    out.y.row(static_cast<Index>(i)) = y.row(rows[i]);
  }
  return out;
}

namespace {

void column_stats(const MatrixXd& m, const char* what, VectorXd& mean, VectorXd& std_dev) {
  const double n = static_cast<double>(m.rows());
  mean = m.colwise().mean();
  std_dev.resize(m.cols());
  for (Index c = 0; c < m.cols(); ++c) {
    std_dev[c] = std::sqrt((m.col(c).array() - mean[c]).square().sum() / n);
    require(std_dev[c] > 1e-12, "column ", what, "_", c, " is (near-)constant, cannot normalize");
  }
}

}  // namespace

NormStats compute_norm_stats(const Dataset& d) {
  d.validate();
  NormStats s;
  column_stats(d.x, "x", s.x_mean, s.x_std);
  column_stats(d.y, "y", s.y_mean, s.y_std);
  return s;
}

Dataset apply_norm(const Dataset& d, const NormStats& s) {
  d.validate();
  require(s.x_mean.size() == d.x.cols() && s.y_mean.size() == d.y.cols(),
          "normalization stats do not match dataset dimensions");
  Dataset out = d;
  out.x = (d.x.rowwise() - s.x_mean.transpose()).array().rowwise() / s.x_std.transpose().array();
  out.y = (d.y.rowwise() - s.y_mean.transpose()).array().rowwise() / s.y_std.transpose().array();
  return out;
}

Normalized normalize(const Dataset& d) {
  const NormStats s = compute_norm_stats(d);
  return Normalized{apply_norm(d, s), s};
}

std::string to_string(SplitKind k) {
  switch (k) {
    case SplitKind::random: return "random";
    case SplitKind::extrapolation: return "extrapolation";
    case SplitKind::interpolation: return "interpolation";
  }
  throw std::invalid_argument("unknown split kind");
}

SplitKind split_kind_from_string(const std::string& s) {
  if (s == "random") return SplitKind::random;
  if (s == "extrapolation") return SplitKind::extrapolation;
  if (s == "interpolation") return SplitKind::interpolation;
  throw std::invalid_argument(cat("unknown split kind '", s, "'"));
}

namespace {

// Row indices ordered by ascending input norm; ties keep row order.
std::vector<int> norm_order(const Dataset& d) {
  std::vector<int> order(static_cast<std::size_t>(d.n()));
  std::iota(order.begin(), order.end(), 0);
  const Eigen::VectorXd norms = d.x.rowwise().norm();
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return norms[a] < norms[b]; });
  return order;
}

}  // namespace

Splits split(const Dataset& d, const SplitSpec& spec) {
  d.validate();
  require(d.n() >= 20, "split needs at least 20 rows, got ", d.n());
  require(spec.train_frac > 0.0 && spec.valid_frac > 0.0 && spec.train_frac + spec.valid_frac < 1.0, "invalid split fractions train=", spec.train_frac, " valid=", spec.valid_frac);
  const auto n = static_cast<std::size_t>(d.n());
  Rng rng = substream(spec.seed, "split");

  std::vector<int> train, valid, test;
  if (spec.kind == SplitKind::random) {
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);

    const auto n_train = static_cast<std::size_t>(std::floor(spec.train_frac * static_cast<double>(n)));
    const auto n_valid = static_cast<std::size_t>(std::floor(spec.valid_frac * static_cast<double>(n)));
    train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    valid.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                 order.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid));
    test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid), order.end());
  } else {
    // 5% smallest plus 5% largest input-norm rows are the extremes.
    const std::size_t n_ext = (n + 19) / 20;
    const std::vector<int> order = norm_order(d);
    std::vector<int> extreme(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_ext));
    extreme.insert(extreme.end(), order.end() - static_cast<std::ptrdiff_t>(n_ext), order.end());
    std::vector<int> central(order.begin() + static_cast<std::ptrdiff_t>(n_ext),
                             order.end() - static_cast<std::ptrdiff_t>(n_ext));
    rng.shuffle(central);

    // test matches the extremes in size either way; valid matches the random
    // path; train absorbs the rest
    const auto n_valid = static_cast<std::size_t>(std::floor(spec.valid_frac * static_cast<double>(n)));
    if (spec.kind == SplitKind::extrapolation) {
      require(central.size() > n_valid, "extrapolation split has no central rows left for train");
      test = extreme;
      valid.assign(central.begin(), central.begin() + static_cast<std::ptrdiff_t>(n_valid));
      train.assign(central.begin() + static_cast<std::ptrdiff_t>(n_valid), central.end());
    } else {
      const std::size_t n_test = 2 * n_ext;
      require(central.size() >= n_test + n_valid, "interpolation split needs more central rows (", central.size(), ") than test+valid (", n_test + n_valid, ")");
      test.assign(central.begin(), central.begin() + static_cast<std::ptrdiff_t>(n_test));
      valid.assign(central.begin() + static_cast<std::ptrdiff_t>(n_test),
                   central.begin() + static_cast<std::ptrdiff_t>(n_test + n_valid));
      train.assign(central.begin() + static_cast<std::ptrdiff_t>(n_test + n_valid), central.end());
      train.insert(train.end(), extreme.begin(), extreme.end());
    }
  }
  require(!train.empty() && !valid.empty() && !test.empty(), "split produced an empty part (", train.size(), "/", valid.size(), "/", test.size(), ")");
  return Splits{d.take(train), d.take(valid), d.take(test)};
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      cells.push_back(line.substr(start));
      break;
    }
    cells.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return cells;
}

double parse_cell(const std::string& cell, std::size_t row, std::size_t col) {
  double v = 0.0;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  const auto res = std::from_chars(begin, end, v);
  if (res.ec != std::errc{} || res.ptr != end)
    throw std::invalid_argument(cat("csv: cell '", cell, "' at row ", row, ", column ", col, " is not a number"));
  return v;
}

}  // namespace

Dataset load_csv(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "csv: cannot open '", path, "'");
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), "csv: '", path, "' is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  const auto header = split_line(line);
  Index dx = 0, dy = 0;
  for (const auto& name : header) {
    const bool is_x = name == cat("x_", dx) && dy == 0;
    const bool is_y = name == cat("y_", dy);
    if (is_x)
      ++dx;
    else if (is_y)
      ++dy;
    else
      throw std::invalid_argument(cat("csv: unexpected header column '", name, "' in '", path, "'"));
  }
  require(dx > 0 && dy > 0, "csv: header of '", path, "' needs x_* and y_* columns");

  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_line(line);
    if (cells.size() != header.size())
      throw std::invalid_argument(
          cat("csv: row ", line_no, " of '", path, "' has ", cells.size(), " cells, expected ", header.size()));
    std::vector<double> row;
    row.reserve(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) row.push_back(parse_cell(cells[c], line_no, c));
    rows.push_back(std::move(row));
  }
  require(!rows.empty(), "csv: '", path, "' has no data rows");

  Dataset d;
  d.x.resize(static_cast<Index>(rows.size()), dx);
  d.y.resize(static_cast<Index>(rows.size()), dy);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (Index c = 0; c < dx; ++c) d.x(static_cast<Index>(r), c) = rows[r][static_cast<std::size_t>(c)];
    for (Index c = 0; c < dy; ++c) d.y(static_cast<Index>(r), c) = rows[r][static_cast<std::size_t>(dx + c)];
  }
  d.validate();
  return d;
}

void save_csv(const Dataset& d, const std::string& path) {
  d.validate();
  std::ofstream out(path);
  require(out.good(), "csv: cannot write '", path, "'");
  for (Index c = 0; c < d.x_dim(); ++c) out << (c ? "," : "") << "x_" << c;
  for (Index c = 0; c < d.y_dim(); ++c) out << ",y_" << c;
  out << "\n";
  for (Index r = 0; r < d.n(); ++r) {
    for (Index c = 0; c < d.x_dim(); ++c) out << (c ? "," : "") << format_double(d.x(r, c));
    for (Index c = 0; c < d.y_dim(); ++c) out << "," << format_double(d.y(r, c));
    out << "\n";
  }
  require(out.good(), "csv: write to '", path, "' failed");
}

}  // namespace projbnn
