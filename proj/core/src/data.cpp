#include "feddist/data.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "feddist/rng.hpp"

namespace feddist {

namespace {

constexpr double kBlobCenterScale = 2.0;

std::vector<std::vector<double>> blob_centers(std::size_t classes,
                                              std::size_t dim,
                                              std::uint64_t seed) {
  std::vector<std::vector<double>> centers;
  centers.reserve(classes);
  Rng rng(derive_seed(seed, {0xb10b}));
  for (std::size_t k = 0; k < classes; ++k) {
    std::vector<double> c(dim, 0.0);
    if (k < dim) {
      c[k] = kBlobCenterScale;
    } else {
      // past the axis directions, fall back to seeded random unit directions
      double sq = 0.0;
      for (double& x : c) {
        x = rng.normal();
        sq += x * x;
      }
      const double nrm = std::sqrt(std::max(sq, 1e-300));
      for (double& x : c) x *= kBlobCenterScale / nrm;
    }
    centers.push_back(std::move(c));
  }
  return centers;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

ParseError::ParseError(std::size_t line, const std::string& what)
    : std::runtime_error("line " + std::to_string(line) + ": " + what),
      line(line) {}

void Dataset::check() const {
  if (size() < 1) throw std::invalid_argument("dataset: empty");
  if (classes < 2) throw std::invalid_argument("dataset: classes >= 2");
  if (labels.size() != features.size()) {
    throw std::invalid_argument("dataset: labels/features size mismatch");
  }
  for (const auto& row : features) {
    if (row.size() != dim) throw std::invalid_argument("dataset: ragged features");
    for (double v : row) {
      if (!std::isfinite(v)) throw std::invalid_argument("dataset: non-finite feature");
    }
  }
  for (int label : labels) {
    if (label != kUnlabeled &&
        (label < 0 || static_cast<std::size_t>(label) >= classes)) {
      throw std::invalid_argument("dataset: label out of range");
    }
  }
}

void SplitPlan::check() const {
  if (clients < 1) throw PlanInfeasibleError("split plan: clients >= 1");
  const double fracs[] = {private_frac, public_frac, validation_frac, test_frac};
  double sum = 0.0;
  for (double f : fracs) {
    if (f < 0.0) throw PlanInfeasibleError("split plan: negative fraction");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw PlanInfeasibleError("split plan: fractions must sum to 1");
  }
}

Dataset make_blobs(std::size_t classes, std::size_t dim, std::size_t per_class,
                   double spread, std::uint64_t seed) {
  if (classes < 2) throw std::invalid_argument("make_blobs: classes >= 2");
  if (dim < 2) throw std::invalid_argument("make_blobs: dim >= 2");
  if (per_class < 1) throw std::invalid_argument("make_blobs: per_class >= 1");

  const auto centers = blob_centers(classes, dim, seed);
  Dataset ds;
  ds.dim = dim;
  ds.classes = classes;
  ds.features.reserve(classes * per_class);
  ds.labels.reserve(classes * per_class);
  Rng rng(derive_seed(seed, {0x5a3e}));
  for (std::size_t k = 0; k < classes; ++k) {
    for (std::size_t s = 0; s < per_class; ++s) {
      std::vector<double> x(dim);
      for (std::size_t j = 0; j < dim; ++j) {
        x[j] = centers[k][j] + spread * rng.normal();
      }
      ds.features.push_back(std::move(x));
      ds.labels.push_back(static_cast<int>(k));
    }
  }
  return ds;
}

SplitResult split(const Dataset& ds, const SplitPlan& plan) {
  plan.check();
  ds.check();
  const std::size_t m = ds.size();

  const auto count_for = [&](double frac) {
    return static_cast<std::size_t>(std::llround(frac * static_cast<double>(m)));
  };
  const std::size_t n_public = count_for(plan.public_frac);
  const std::size_t n_val = count_for(plan.validation_frac);
  const std::size_t n_test = count_for(plan.test_frac);
  if (n_public + n_val + n_test > m) {
    throw PlanInfeasibleError("split plan: fractions exceed dataset");
  }
  const std::size_t n_private = m - n_public - n_val - n_test;
  if (n_private < plan.clients) {
    throw PlanInfeasibleError("split plan: fewer private samples than clients");
  }

  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(plan.seed, {0x5b11}));
  rng.shuffle(order);

  const auto take = [&](std::size_t& cursor, std::size_t count, bool keep_labels) {
    Dataset part;
    part.dim = ds.dim;
    part.classes = ds.classes;
    part.features.reserve(count);
    part.labels.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
      const std::size_t idx = order[cursor++];
      part.features.push_back(ds.features[idx]);
      part.labels.push_back(keep_labels ? ds.labels[idx] : kUnlabeled);
    }
    return part;
  };

  SplitResult result;
  std::size_t cursor = 0;
  const std::size_t base = n_private / plan.clients;
  const std::size_t rem = n_private % plan.clients;
  for (std::size_t i = 0; i < plan.clients; ++i) {
    const std::size_t count = base + (i < rem ? 1 : 0);
    if (count == 0) throw PlanInfeasibleError("split plan: client with 0 samples");
    result.privates.push_back(take(cursor, count, true));
  }
  {
    const std::size_t start = cursor;
    result.public_unlabeled = take(cursor, n_public, false);
    result.public_labels.reserve(n_public);
    for (std::size_t k = 0; k < n_public; ++k) {
      result.public_labels.push_back(ds.labels[order[start + k]]);
    }
  }
  result.validation = take(cursor, n_val, true);
  result.test = take(cursor, n_test, true);
  return result;
}

Dataset read_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(0, "cannot open " + path);
  std::string line;
  std::size_t lineno = 0;

  if (!std::getline(in, line)) throw ParseError(1, "missing header");
  ++lineno;
  std::istringstream header(line);
  std::size_t m = 0, d = 0, c = 0;
  if (!(header >> m >> d >> c)) throw ParseError(1, "header must be 'M d c'");
  std::string extra;
  if (header >> extra) throw ParseError(1, "trailing tokens in header");
  if (m < 1 || d < 1 || c < 2) throw ParseError(1, "invalid header dimensions");

  Dataset ds;
  ds.dim = d;
  ds.classes = c;
  ds.features.reserve(m);
  ds.labels.reserve(m);
  for (std::size_t row = 0; row < m; ++row) {
    if (!std::getline(in, line)) {
      throw ParseError(lineno + 1, "unexpected end of file");
    }
    ++lineno;
    std::istringstream ls(line);
    std::vector<double> x(d);
    for (std::size_t j = 0; j < d; ++j) {
      if (!(ls >> x[j])) throw ParseError(lineno, "expected feature value");
      if (!std::isfinite(x[j])) throw ParseError(lineno, "non-finite feature");
    }
    std::string label_tok;
    if (!(ls >> label_tok)) throw ParseError(lineno, "missing label");
    if (ls >> extra) throw ParseError(lineno, "trailing tokens");
    int label = kUnlabeled;
    if (label_tok != "?") {
      const auto [ptr, ec] = std::from_chars(
          label_tok.data(), label_tok.data() + label_tok.size(), label);
      if (ec != std::errc() || ptr != label_tok.data() + label_tok.size()) {
        throw ParseError(lineno, "bad label '" + label_tok + "'");
      }
      if (label < 0 || static_cast<std::size_t>(label) >= c) {
        throw ParseError(lineno, "label out of range");
      }
    }
    ds.features.push_back(std::move(x));
    ds.labels.push_back(label);
  }
  return ds;
}

void write_dataset(const Dataset& ds, const std::string& path) {
  ds.check();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << ds.size() << ' ' << ds.dim << ' ' << ds.classes << '\n';
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t j = 0; j < ds.dim; ++j) {
      out << format_double(ds.features[i][j]) << ' ';
    }
    if (ds.labels[i] == kUnlabeled) {
      out << "?\n";
    } else {
      out << ds.labels[i] << '\n';
    }
  }
}

}  // namespace feddist
