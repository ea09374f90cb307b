// SPDX-License-Identifier: Apache-2.0
#include "lm/training/logreg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lm/core/error.hpp"
#include "lm/core/random.hpp"
#include "lm/model/model.hpp"
#include "lm/training/metrics.hpp"

namespace lm::training {

using model::sigmoid;

namespace {

// log(1 + e^z) without overflow.
double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> r(n);
  std::iota(r.begin(), r.end(), 0);
  return r;
}

void check_matrix(const Matrix& X, const std::vector<int>& y) {
  if (X.size() != y.size()) throw Error(ErrorCode::degenerate_data, "X and y differ in length");
  if (X.size() < 2) throw Error(ErrorCode::degenerate_data, "training needs at least 2 rows");
  const std::size_t d = X.front().size();
  for (const auto& row : X)
    if (row.size() != d) throw Error(ErrorCode::degenerate_data, "ragged feature matrix");
  bool zero = false, one = false;
  for (int v : y) {
    if (v != 0 && v != 1) throw Error(ErrorCode::degenerate_data, "labels must be 0 or 1");
    (v ? one : zero) = true;
  }
  if (!zero || !one) throw Error(ErrorCode::degenerate_data, "training labels contain a single class");
}

}  // namespace

void Hyperparameters::validate() const {
  if (!(learning_rate > 0) || !std::isfinite(learning_rate)) throw Error(ErrorCode::config, "learning_rate must be > 0");
  if (epochs < 1) throw Error(ErrorCode::config, "epochs must be positive");
  if (!(l2 >= 0) || !std::isfinite(l2)) throw Error(ErrorCode::config, "l2 must be >= 0");
  if (batch_size < 1) throw Error(ErrorCode::config, "batch_size must be positive");
}

double LinearModel::raw(const std::vector<double>& x) const {
  double z = intercept;
  for (std::size_t j = 0; j < coefficients.size(); ++j) z += coefficients[j] * x[j];
  return z;
}

std::vector<double> LinearModel::raw(const Matrix& X) const {
  std::vector<double> out;
  out.reserve(X.size());
  for (const auto& row : X) out.push_back(raw(row));
  return out;
}

double logistic_loss(const LinearModel& m, const Matrix& X, const std::vector<int>& y, double l2,
                     const std::vector<std::size_t>& rows) {
  const auto& idx = rows.empty() ? all_rows(X.size()) : rows;
  double sum = 0;
  for (std::size_t i : idx) {
    const double z = m.raw(X[i]);
    sum += softplus(z) - y[i] * z;
  }
  double norm = 0;
  for (double w : m.coefficients) norm += w * w;
  return sum / static_cast<double>(idx.size()) + 0.5 * l2 * norm;
}

Gradient logistic_gradient(const LinearModel& m, const Matrix& X, const std::vector<int>& y, double l2,
                           const std::vector<std::size_t>& rows) {
  const auto& idx = rows.empty() ? all_rows(X.size()) : rows;
  Gradient g{std::vector<double>(m.coefficients.size(), 0.0), 0.0};
  for (std::size_t i : idx) {
    const double r = sigmoid(m.raw(X[i])) - y[i];
    for (std::size_t j = 0; j < g.w.size(); ++j) g.w[j] += r * X[i][j];
    g.b += r;
  }
  const double inv = 1.0 / static_cast<double>(idx.size());
  for (std::size_t j = 0; j < g.w.size(); ++j) g.w[j] = g.w[j] * inv + l2 * m.coefficients[j];
  g.b *= inv;
  return g;
}

LinearModel train_logreg(const Matrix& X, const std::vector<int>& y, const Hyperparameters& hp,
                         const std::function<void(int, double)>& on_epoch) {
  hp.validate();
  check_matrix(X, y);
  LinearModel m{0.0, std::vector<double>(X.front().size(), 0.0)};
  Rng rng(hp.seed);
  auto order = all_rows(X.size());
  const auto batch = static_cast<std::size_t>(hp.batch_size);
  std::vector<std::size_t> rows;
  for (int epoch = 0; epoch < hp.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      rows.assign(order.begin() + static_cast<long>(start),
                  order.begin() + static_cast<long>(std::min(order.size(), start + batch)));
      const auto g = logistic_gradient(m, X, y, hp.l2, rows);
      for (std::size_t j = 0; j < g.w.size(); ++j) m.coefficients[j] -= hp.learning_rate * g.w[j];
      m.intercept -= hp.learning_rate * g.b;
    }
    if (on_epoch) on_epoch(epoch, logistic_loss(m, X, y, hp.l2));
  }
  return m;
}

PlattFit fit_platt(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw Error(ErrorCode::calibration, "scores and labels differ in length");
  double pos = 0, neg = 0;
  for (int v : labels) (v == 1 ? pos : neg) += 1;
  if (pos == 0 || neg == 0) throw Error(ErrorCode::calibration, "calibration needs both classes");
  const double t_pos = (pos + 1) / (pos + 2), t_neg = 1 / (neg + 2);

  auto loss = [&](double a, double b) {
    double sum = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      const double z = a * scores[i] + b;
      sum += softplus(z) - (labels[i] == 1 ? t_pos : t_neg) * z;
    }
    return sum;
  };

  PlattFit fit{1.0, 0.0, 0};
  double current = loss(fit.a, fit.b);
  for (fit.iterations = 1; fit.iterations <= 100; ++fit.iterations) {
    double ga = 0, gb = 0, haa = 1e-12, hab = 0, hbb = 1e-12;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      const double s = scores[i];
      const double p = sigmoid(fit.a * s + fit.b);
      const double r = p - (labels[i] == 1 ? t_pos : t_neg);
      const double w = p * (1 - p);
      ga += r * s;
      gb += r;
      haa += w * s * s;
      hab += w * s;
      hbb += w;
    }
    const double det = haa * hbb - hab * hab;
    double da = -(hbb * ga - hab * gb) / det;
    double db = -(haa * gb - hab * ga) / det;
    if (!std::isfinite(da) || !std::isfinite(db)) {
      da = -ga;
      db = -gb;
    }
    // Halve the step until the loss does not increase.
    double step = 1.0, next = loss(fit.a + da, fit.b + db);
    while (next > current && step > 1e-10) {
      step /= 2;
      next = loss(fit.a + step * da, fit.b + step * db);
    }
    fit.a += step * da;
    fit.b += step * db;
    current = next;
    if (std::abs(step * da) < 1e-8 && std::abs(step * db) < 1e-8) break;
  }
  fit.iterations = std::min(fit.iterations, 100);
  return fit;
}

std::vector<FeatureImportance> permutation_importance(const LinearModel& m, const Matrix& X, const std::vector<int>& y,
                                                      std::uint64_t seed, int repeats,
                                                      const std::vector<std::string>& names, const Metric& metric) {
  if (repeats < 1) throw Error(ErrorCode::config, "repeats must be positive");
  const Metric score = metric ? metric : Metric(auc);
  const double baseline = score(m.raw(X), y);
  const std::size_t d = X.empty() ? 0 : X.front().size();
  std::vector<FeatureImportance> out;
  Matrix work = X;
  for (std::size_t j = 0; j < d; ++j) {
    std::vector<double> column(X.size());
    for (std::size_t i = 0; i < X.size(); ++i) column[i] = X[i][j];
    double total = 0;
    for (int r = 0; r < repeats; ++r) {
      Rng rng(seed ^ (0x9e3779b97f4a7c15ULL * (j * 1000 + static_cast<std::size_t>(r) + 1)));
      auto shuffled = column;
      rng.shuffle(shuffled);
      for (std::size_t i = 0; i < X.size(); ++i) work[i][j] = shuffled[i];
      total += score(m.raw(work), y);
    }
    for (std::size_t i = 0; i < X.size(); ++i) work[i][j] = column[i];
    out.push_back({j, j < names.size() ? names[j] : std::to_string(j), baseline - total / repeats});
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const FeatureImportance& a, const FeatureImportance& b) { return a.importance > b.importance; });
  return out;
}

void to_json(Json& j, const Hyperparameters& hp) {
  j = Json{{"learning_rate", hp.learning_rate},
           {"epochs", hp.epochs},
           {"l2", hp.l2},
           {"batch_size", hp.batch_size},
           {"seed", hp.seed}};
}

void from_json(const Json& j, Hyperparameters& hp) {
  Hyperparameters d;
  hp.learning_rate = j.value("learning_rate", d.learning_rate);
  hp.epochs = j.value("epochs", d.epochs);
  hp.l2 = j.value("l2", d.l2);
  hp.batch_size = j.value("batch_size", d.batch_size);
  hp.seed = j.value("seed", d.seed);
}

void to_json(Json& j, const FeatureImportance& f) {
  j = Json{{"index", f.index}, {"name", f.name}, {"importance", f.importance}};
}

}  // namespace lm::training
