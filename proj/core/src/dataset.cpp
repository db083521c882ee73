#include "dssfn/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "dssfn/rng.hpp"

namespace dssfn {
namespace {

[[noreturn]] void fail_at(const std::string& path, int line, const std::string& msg) {
  std::ostringstream os;
  os << path << ":" << line << ": " << msg;
  throw std::runtime_error(os.str());
}

bool parse_double(const std::string& field, double& out) {
  const char* begin = field.data();
  const char* end = begin + field.size();
  while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
  while (end > begin && (end[-1] == ' ' || end[-1] == '\t')) --end;
  if (begin == end) return false;
  const auto res = std::from_chars(begin, end, out);
  return res.ec == std::errc() && res.ptr == end;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  fields.push_back(cur);
  return fields;
}

}  // namespace

Dataset make_dataset(Matrix features, std::vector<int> labels, int class_count,
                     std::string name) {
  if (features.empty()) {
    throw std::invalid_argument("make_dataset: empty feature matrix");
  }
  if (static_cast<int>(labels.size()) != features.cols()) {
    std::ostringstream os;
    os << "make_dataset: " << labels.size() << " labels for " << features.cols()
       << " samples";
    throw std::invalid_argument(os.str());
  }
  if (class_count < 1) {
    throw std::invalid_argument("make_dataset: class count must be positive");
  }
  features.check_finite("make_dataset features");
  Dataset d;
  d.targets = Matrix(class_count, features.cols());
  for (int j = 0; j < features.cols(); ++j) {
    const int label = labels[j];
    if (label < 0 || label >= class_count) {
      std::ostringstream os;
      os << "make_dataset: label " << label << " of sample " << j
         << " outside [0, " << class_count << ")";
      throw std::invalid_argument(os.str());
    }
    d.targets(label, j) = 1.0;
  }
  d.features = std::move(features);
  d.labels = std::move(labels);
  d.class_count = class_count;
  d.name = std::move(name);
  return d;
}

Dataset load_csv(const std::string& path, int class_count,
                 const CsvOptions& opts) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("load_csv: cannot open " + path);
  }
  std::vector<std::vector<double>> feature_rows;
  std::vector<int> labels;
  int field_count = -1;
  std::string line;
  int line_no = 0;
  bool first_content_line = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.size() >= 3 && line[0] == '\xEF' &&
        line[1] == '\xBB' && line[2] == '\xBF') {
      line.erase(0, 3);
    }
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto fields = split_csv_line(line);
    if (first_content_line) {
      bool treat_as_header = opts.has_header == 1;
      if (opts.has_header < 0) {
        for (const auto& f : fields) {
          double ignored;
          if (!parse_double(f, ignored)) {
            treat_as_header = true;
            break;
          }
        }
      }
      first_content_line = false;
      if (treat_as_header) continue;
    }
    if (field_count < 0) {
      field_count = static_cast<int>(fields.size());
      if (field_count < 2) {
        fail_at(path, line_no, "need at least one feature and a label field");
      }
    } else if (static_cast<int>(fields.size()) != field_count) {
      std::ostringstream os;
      os << "row has " << fields.size() << " fields, expected " << field_count;
      fail_at(path, line_no, os.str());
    }
    int label_idx = opts.label_column;
    if (label_idx < 0) label_idx += field_count;
    if (label_idx < 0 || label_idx >= field_count) {
      std::ostringstream os;
      os << "label column " << opts.label_column << " out of range for "
         << field_count << " fields";
      fail_at(path, line_no, os.str());
    }
    std::vector<double> row;
    row.reserve(field_count - 1);
    int label = -1;
    for (int i = 0; i < field_count; ++i) {
      double value;
      if (!parse_double(fields[i], value)) {
        std::ostringstream os;
        os << "field " << i + 1 << " is not a number: \"" << fields[i] << "\"";
        fail_at(path, line_no, os.str());
      }
      if (i == label_idx) {
        const double rounded = std::nearbyint(value);
        if (std::abs(value - rounded) > 1e-9 || rounded < 0) {
          std::ostringstream os;
          os << "label must be a non-negative integer, got " << fields[i];
          fail_at(path, line_no, os.str());
        }
        label = static_cast<int>(rounded);
      } else {
        if (!std::isfinite(value)) {
          std::ostringstream os;
          os << "non-finite feature in field " << i + 1;
          fail_at(path, line_no, os.str());
        }
        row.push_back(value);
      }
    }
    feature_rows.push_back(std::move(row));
    labels.push_back(label);
  }
  if (feature_rows.empty()) {
    throw std::runtime_error("load_csv: " + path + " holds no data rows");
  }
  const int j_count = static_cast<int>(feature_rows.size());
  const int p = static_cast<int>(feature_rows.front().size());
  int q = class_count;
  if (q == 0) {
    q = 1 + *std::max_element(labels.begin(), labels.end());
  } else {
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] >= q) {
        std::ostringstream os;
        os << "load_csv: " << path << " label " << labels[i]
           << " outside [0, " << q << ")";
        throw std::runtime_error(os.str());
      }
    }
  }
  Matrix features(p, j_count);
  for (int j = 0; j < j_count; ++j) {
    for (int i = 0; i < p; ++i) features(i, j) = feature_rows[j][i];
  }
  std::string name = path;
  const auto slash = name.find_last_of('/');
  if (slash != std::string::npos) name.erase(0, slash + 1);
  return make_dataset(std::move(features), std::move(labels), q, std::move(name));
}

void save_csv(const Dataset& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("save_csv: cannot open " + path);
  }
  char buf[40];
  for (int j = 0; j < d.sample_count(); ++j) {
    for (int i = 0; i < d.feature_dim(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", d.features(i, j));
      out << buf << ',';
    }
    out << d.labels[j] << '\n';
  }
  if (!out.good()) {
    throw std::runtime_error("save_csv: write failed for " + path);
  }
}

DataPartition partition_uniform(const Dataset& d, int node_count,
                                std::uint64_t shuffle_seed, bool shuffle) {
  const int j_count = d.sample_count();
  if (node_count < 1) {
    throw std::invalid_argument("partition_uniform: node count must be positive");
  }
  if (node_count > j_count) {
    std::ostringstream os;
    os << "partition_uniform: " << node_count << " nodes exceed " << j_count
       << " samples";
    throw std::invalid_argument(os.str());
  }
  std::vector<int> perm(j_count);
  std::iota(perm.begin(), perm.end(), 0);
  if (shuffle) {
    SeededRng rng(shuffle_seed);
    for (int i = j_count - 1; i > 0; --i) {
      const int k = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(i) + 1));
      std::swap(perm[i], perm[k]);
    }
  }
  const int base = j_count / node_count;
  const int extra = j_count % node_count;
  DataPartition part;
  part.shards.reserve(node_count);
  part.origin.reserve(node_count);
  int offset = 0;
  for (int m = 0; m < node_count; ++m) {
    const int size = base + (m < extra ? 1 : 0);
    Matrix features(d.feature_dim(), size);
    std::vector<int> labels(size);
    std::vector<int> origin(size);
    for (int j = 0; j < size; ++j) {
      const int src = perm[offset + j];
      origin[j] = src;
      labels[j] = d.labels[src];
      for (int i = 0; i < d.feature_dim(); ++i) {
        features(i, j) = d.features(i, src);
      }
    }
    std::ostringstream shard_name;
    shard_name << d.name << "/shard" << m;
    part.shards.push_back(make_dataset(std::move(features), std::move(labels),
                                       d.class_count, shard_name.str()));
    part.origin.push_back(std::move(origin));
    offset += size;
  }
  return part;
}

FeatureScaling fit_scaling(const Dataset& train) {
  const int p = train.feature_dim();
  FeatureScaling s;
  s.lo.assign(p, 0.0);
  s.hi.assign(p, 0.0);
  for (int i = 0; i < p; ++i) {
    double lo = train.features(i, 0);
    double hi = lo;
    for (int j = 1; j < train.sample_count(); ++j) {
      lo = std::min(lo, train.features(i, j));
      hi = std::max(hi, train.features(i, j));
    }
    s.lo[i] = lo;
    s.hi[i] = hi;
  }
  return s;
}

Matrix apply_scaling(const FeatureScaling& s, const Matrix& features) {
  if (features.rows() != static_cast<int>(s.lo.size())) {
    std::ostringstream os;
    os << "apply_scaling: " << features.rows() << " features vs scaling for "
       << s.lo.size();
    throw std::invalid_argument(os.str());
  }
  Matrix out(features.rows(), features.cols());
  for (int i = 0; i < features.rows(); ++i) {
    const double span = s.hi[i] - s.lo[i];
    for (int j = 0; j < features.cols(); ++j) {
      out(i, j) = span == 0.0
                      ? 0.0
                      : -1.0 + 2.0 * (features(i, j) - s.lo[i]) / span;
    }
  }
  return out;
}

Dataset apply_scaling(const FeatureScaling& s, Dataset d) {
  d.features = apply_scaling(s, d.features);
  return d;
}

std::tuple<Dataset, Dataset, FeatureScaling> normalize_fit_apply(
    const Dataset& train, const Dataset& test) {
  if (train.feature_dim() != test.feature_dim()) {
    std::ostringstream os;
    os << "normalize_fit_apply: feature dims differ, " << train.feature_dim()
       << " vs " << test.feature_dim();
    throw std::invalid_argument(os.str());
  }
  const FeatureScaling s = fit_scaling(train);
  return {apply_scaling(s, train), apply_scaling(s, test), s};
}

Dataset make_synthetic(std::uint64_t seed, int feature_dim, int class_count,
                       int sample_count, double spread) {
  if (feature_dim < 1 || class_count < 1 || sample_count < 1) {
    throw std::invalid_argument("make_synthetic: dimensions must be positive");
  }
  if (!(spread >= 0.0) || !std::isfinite(spread)) {
    throw std::invalid_argument("make_synthetic: spread must be finite and >= 0");
  }
  SeededRng rng(seed);
  Matrix anchors(feature_dim, class_count);
  for (int c = 0; c < class_count; ++c) {
    for (int i = 0; i < feature_dim; ++i) anchors(i, c) = rng.next_symmetric();
  }
  Matrix features(feature_dim, sample_count);
  std::vector<int> labels(sample_count);
  for (int j = 0; j < sample_count; ++j) {
    const int c = j % class_count;
    labels[j] = c;
    for (int i = 0; i < feature_dim; ++i) {
      features(i, j) = anchors(i, c) + spread * rng.next_symmetric();
    }
  }
  std::ostringstream name;
  name << "synthetic-p" << feature_dim << "q" << class_count << "j"
       << sample_count;
  return make_dataset(std::move(features), std::move(labels), class_count,
                      name.str());
}

}  // namespace dssfn
