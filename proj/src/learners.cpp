#include "modcausal/learners.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace modcausal {

namespace {

void check_finite(const Matrix& x, const char* what) {
  if (!x.allFinite()) throw std::invalid_argument(std::string(what) + " contains non-finite values");
}

}  // namespace

void column_standardization(const Matrix& x, const Vector& w, Vector& mean, Vector& scale) {
  const Eigen::Index p = x.cols();
  mean.resize(p);
  scale.resize(p);
  const bool weighted = w.size() > 0;
  const double wsum = weighted ? w.sum() : static_cast<double>(x.rows());
  for (Eigen::Index j = 0; j < p; ++j) {
    const auto col = x.col(j);
    const double m = weighted ? col.dot(w) / wsum : col.mean();
    const double var = weighted ? (col.array() - m).square().matrix().dot(w) / wsum
                                : (col.array() - m).square().mean();
    mean[j] = m;
    const double sd = std::sqrt(std::max(var, 0.0));
    scale[j] = sd > 1e-12 * std::max(1.0, std::abs(m)) ? sd : 1.0;
  }
}

// ---------------------------------------------------------------------------------------

void Regressor::fit(const Matrix& features, const Vector& targets, const Vector& weights) {
  if (features.rows() == 0) throw std::invalid_argument(name() + ": empty training set");
  if (features.rows() != targets.size()) throw std::invalid_argument(name() + ": features/targets size mismatch");
  if (weights.size() != 0 && weights.size() != targets.size())
    throw std::invalid_argument(name() + ": weights size mismatch");
  check_finite(features, "features");
  check_finite(targets, "targets");
  if (weights.size()) {
    check_finite(weights, "weights");
    if ((weights.array() < 0.0).any() || weights.sum() <= 0.0)
      throw std::invalid_argument(name() + ": weights must be non-negative with positive sum");
  }
  do_fit(features, targets, weights);
  n_features_ = features.cols();
  fitted_ = true;
}

Vector Regressor::predict(const Matrix& features) const {
  if (!fitted_) throw NotFitted();
  if (features.cols() != n_features_) throw std::invalid_argument(name() + ": feature count mismatch");
  return do_predict(features);
}

// ---------------------------------------------------------------------------------------
// Ridge

void RidgeRegressor::do_fit(const Matrix& x, const Vector& y, const Vector& w) {
  if (params_.l2 < 0.0) throw std::invalid_argument("ridge: l2 must be non-negative");
  const Eigen::Index n = x.rows(), p = x.cols();
  Vector mean, scale;
  column_standardization(x, w, mean, scale);
  if (!params_.standardize) scale.setOnes();
  const bool weighted = w.size() > 0;
  const double y_mean = weighted ? y.dot(w) / w.sum() : y.mean();

  Matrix z = (x.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
  Vector yc = y.array() - y_mean;
  if (weighted) {
    const Vector sw = w.cwiseSqrt();
    z = sw.asDiagonal() * z;
    yc = sw.asDiagonal() * yc;
  }
  Vector beta;
  if (p == 0) {
    beta = Vector();
  } else if (params_.l2 > 0.0) {
    Matrix a = z.transpose() * z;
    a.diagonal().array() += params_.l2;
    beta = a.ldlt().solve(z.transpose() * yc);
  } else {
    beta = z.completeOrthogonalDecomposition().solve(yc);
  }
  (void)n;
  coef_ = beta.array() / scale.array();
  intercept_ = y_mean - mean.dot(coef_);
}

Vector RidgeRegressor::do_predict(const Matrix& x) const {
  return (x * coef_).array() + intercept_;
}

// ---------------------------------------------------------------------------------------
// Constant

void ConstantRegressor::do_fit(const Matrix&, const Vector& y, const Vector& w) {
  value_ = w.size() ? y.dot(w) / w.sum() : y.mean();
}

Vector ConstantRegressor::do_predict(const Matrix& x) const { return Vector::Constant(x.rows(), value_); }

// ---------------------------------------------------------------------------------------
// Gradient-boosted trees

GbtRegressor::GbtRegressor(GbtParams p) : params_(p) {
  if (p.trees < 1) throw std::invalid_argument("gbt: trees must be >= 1");
  if (p.depth < 1) throw std::invalid_argument("gbt: depth must be >= 1");
  if (p.learning_rate < 0.0) throw std::invalid_argument("gbt: learning_rate must be >= 0");
  if (p.min_leaf < 1) throw std::invalid_argument("gbt: min_leaf must be >= 1");
  if (!(p.subsample > 0.0 && p.subsample <= 1.0)) throw std::invalid_argument("gbt: subsample in (0, 1]");
}

namespace {

struct SplitStats {
  double sum = 0.0;
  double weight = 0.0;
  int count = 0;
};

struct BestSplit {
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
};

double tree_predict(const GbtRegressor::Tree& tree, const Matrix& x, Eigen::Index row) {
  int k = 0;
  while (tree[k].feature >= 0) k = x(row, tree[k].feature) <= tree[k].threshold ? tree[k].left : tree[k].right;
  return tree[k].value;
}

}  // namespace

void GbtRegressor::do_fit(const Matrix& x, const Vector& y, const Vector& w_in) {
  const Eigen::Index n = x.rows();
  const int p = static_cast<int>(x.cols());
  const Vector w = w_in.size() ? w_in : Vector::Ones(n);
  base_ = y.dot(w) / w.sum();
  trees_.clear();

  // Presorted row order per feature; ties keep row order.
  std::vector<std::vector<int>> order(p);
  for (int f = 0; f < p; ++f) {
    auto& o = order[f];
    o.resize(n);
    std::iota(o.begin(), o.end(), 0);
    std::stable_sort(o.begin(), o.end(), [&](int a, int b) { return x(a, f) < x(b, f); });
  }

  Vector pred = Vector::Constant(n, base_);
  Vector resid(n);
  std::vector<int> node_of(n);
  std::mt19937_64 rng(params_.seed);
  std::vector<int> rows(n);
  std::iota(rows.begin(), rows.end(), 0);

  for (int t = 0; t < params_.trees; ++t) {
    resid = y - pred;
    std::fill(node_of.begin(), node_of.end(), 0);
    if (params_.subsample < 1.0) {
      std::shuffle(rows.begin(), rows.end(), rng);
      const auto keep = std::max<Eigen::Index>(1, static_cast<Eigen::Index>(params_.subsample * n));
      for (Eigen::Index i = keep; i < n; ++i) node_of[rows[i]] = -1;
    }

    Tree tree;
    tree.push_back(Node{});
    std::vector<int> frontier = {0};
    // node index -> slot in frontier arrays for this level
    for (int level = 0; level < params_.depth && !frontier.empty(); ++level) {
      const int m = static_cast<int>(frontier.size());
      std::vector<int> slot(tree.size(), -1);
      for (int s = 0; s < m; ++s) slot[frontier[s]] = s;

      std::vector<SplitStats> total(m);
      for (Eigen::Index i = 0; i < n; ++i) {
        const int nd = node_of[i];
        if (nd < 0 || slot[nd] < 0) continue;
        auto& st = total[slot[nd]];
        st.sum += w[i] * resid[i];
        st.weight += w[i];
        ++st.count;
      }
      std::vector<BestSplit> best(m);
      std::vector<SplitStats> left(m);
      std::vector<double> last_x(m);
      std::vector<char> seen(m);
      for (int f = 0; f < p; ++f) {
        std::fill(left.begin(), left.end(), SplitStats{});
        std::fill(seen.begin(), seen.end(), 0);
        for (int i : order[f]) {
          const int nd = node_of[i];
          if (nd < 0) continue;
          const int s = slot[nd];
          if (s < 0) continue;
          const double xv = x(i, f);
          auto& l = left[s];
          if (seen[s] && xv > last_x[s] && l.count >= params_.min_leaf &&
              total[s].count - l.count >= params_.min_leaf) {
            const double rw = total[s].weight - l.weight;
            if (l.weight > 0.0 && rw > 0.0) {
              const double rs = total[s].sum - l.sum;
              const double gain =
                  l.sum * l.sum / l.weight + rs * rs / rw - total[s].sum * total[s].sum / total[s].weight;
              if (gain > best[s].gain + 1e-12 * std::abs(best[s].gain) && gain > 1e-15) {
                best[s] = {gain, f, 0.5 * (last_x[s] + xv)};
                if (!(best[s].threshold < xv)) best[s].threshold = last_x[s];
              }
            }
          }
          l.sum += w[i] * resid[i];
          l.weight += w[i];
          ++l.count;
          last_x[s] = xv;
          seen[s] = 1;
        }
      }

      std::vector<int> next;
      for (int s = 0; s < m; ++s) {
        const int nd = frontier[s];
        if (best[s].feature < 0) continue;
        const int l = static_cast<int>(tree.size());
        tree.push_back(Node{});
        tree.push_back(Node{});
        tree[nd].feature = best[s].feature;
        tree[nd].threshold = best[s].threshold;
        tree[nd].left = l;
        tree[nd].right = l + 1;
        next.push_back(l);
        next.push_back(l + 1);
      }
      for (Eigen::Index i = 0; i < n; ++i) {
        const int nd = node_of[i];
        if (nd < 0 || tree[nd].feature < 0) continue;
        node_of[i] = x(i, tree[nd].feature) <= tree[nd].threshold ? tree[nd].left : tree[nd].right;
      }
      frontier = std::move(next);
    }

    // Leaf values: weighted mean residual of the rows that reached the leaf.
    std::vector<double> sum(tree.size(), 0.0), weight(tree.size(), 0.0);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (node_of[i] < 0) continue;
      sum[node_of[i]] += w[i] * resid[i];
      weight[node_of[i]] += w[i];
    }
    for (std::size_t k = 0; k < tree.size(); ++k)
      if (tree[k].feature < 0)
        tree[k].value = weight[k] > 0.0 ? params_.learning_rate * sum[k] / weight[k] : 0.0;

    for (Eigen::Index i = 0; i < n; ++i) pred[i] += tree_predict(tree, x, i);
    trees_.push_back(std::move(tree));
  }
}

Vector GbtRegressor::do_predict(const Matrix& x) const {
  Vector out = Vector::Constant(x.rows(), base_);
  for (const auto& tree : trees_)
    for (Eigen::Index i = 0; i < x.rows(); ++i) out[i] += tree_predict(tree, x, i);
  return out;
}

// ---------------------------------------------------------------------------------------

std::string_view to_string(LearnerKind k) {
  switch (k) {
    case LearnerKind::Linear: return "linear";
    case LearnerKind::Gbt: return "gbt";
    case LearnerKind::Constant: return "constant";
  }
  return "?";
}

LearnerKind parse_learner_kind(std::string_view s) {
  if (s == "linear" || s == "ridge") return LearnerKind::Linear;
  if (s == "gbt" || s == "xgb" || s == "trees") return LearnerKind::Gbt;
  if (s == "constant") return LearnerKind::Constant;
  throw std::invalid_argument("unknown learner '" + std::string(s) + "'");
}

std::unique_ptr<Regressor> make_regressor(const LearnerSpec& spec, std::uint64_t seed) {
  switch (spec.kind) {
    case LearnerKind::Linear: return std::make_unique<RidgeRegressor>(spec.ridge);
    case LearnerKind::Gbt: {
      auto p = spec.gbt;
      p.seed = seed;
      return std::make_unique<GbtRegressor>(p);
    }
    case LearnerKind::Constant: return std::make_unique<ConstantRegressor>();
  }
  throw std::invalid_argument("unknown learner kind");
}

std::unique_ptr<RidgeRegressor> fit_ridge(const Matrix& features, const Vector& targets, double l2) {
  auto r = std::make_unique<RidgeRegressor>(RidgeParams{l2, true});
  r->fit(features, targets);
  return r;
}

std::unique_ptr<GbtRegressor> fit_gbt(const Matrix& features, const Vector& targets, int trees, int depth,
                                      double learning_rate, std::uint64_t seed) {
  GbtParams p;
  p.trees = trees;
  p.depth = depth;
  p.learning_rate = learning_rate;
  p.seed = seed;
  auto g = std::make_unique<GbtRegressor>(p);
  g->fit(features, targets);
  return g;
}

// ---------------------------------------------------------------------------------------
// Logistic

void ProbClassifier::fit(const Matrix& features, const Vector& labels) {
  if (features.rows() == 0) throw std::invalid_argument(name() + ": empty training set");
  if (features.rows() != labels.size()) throw std::invalid_argument(name() + ": features/labels size mismatch");
  check_finite(features, "features");
  for (Eigen::Index i = 0; i < labels.size(); ++i)
    if (labels[i] != 0.0 && labels[i] != 1.0) throw std::invalid_argument(name() + ": labels must be 0 or 1");
  do_fit(features, labels);
  n_features_ = features.cols();
  fitted_ = true;
}

Vector ProbClassifier::predict_proba(const Matrix& features) const {
  if (!fitted_) throw NotFitted();
  if (features.cols() != n_features_) throw std::invalid_argument(name() + ": feature count mismatch");
  return do_predict_proba(features);
}

namespace {

/// log(1 + exp(eta)) without overflow.
double softplus(double eta) { return eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta)); }

double sigmoid(double eta) {
  if (eta >= 0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

Vector linear_predictor(const Matrix& z, const Vector& theta) {
  return (z * theta.tail(theta.size() - 1)).array() + theta[0];
}

}  // namespace

double LogisticObjective::value(const Vector& theta) const {
  const Vector eta = linear_predictor(z, theta);
  double v = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) v += softplus(eta[i]) - y[i] * eta[i];
  return v + l2 * theta.tail(theta.size() - 1).squaredNorm();
}

Vector LogisticObjective::gradient(const Vector& theta) const {
  const Vector eta = linear_predictor(z, theta);
  Vector r(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) r[i] = sigmoid(eta[i]) - y[i];
  Vector g(theta.size());
  g[0] = r.sum();
  g.tail(theta.size() - 1) = z.transpose() * r + 2.0 * l2 * theta.tail(theta.size() - 1);
  return g;
}

Matrix LogisticObjective::hessian(const Vector& theta) const {
  const Eigen::Index p = theta.size();
  const Vector eta = linear_predictor(z, theta);
  Vector s(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const double pr = sigmoid(eta[i]);
    s[i] = pr * (1.0 - pr);
  }
  Matrix h(p, p);
  const Matrix sz = s.asDiagonal() * z;
  h(0, 0) = s.sum();
  h.block(0, 1, 1, p - 1) = sz.colwise().sum();
  h.block(1, 0, p - 1, 1) = h.block(0, 1, 1, p - 1).transpose();
  h.block(1, 1, p - 1, p - 1) = z.transpose() * sz;
  h.block(1, 1, p - 1, p - 1).diagonal().array() += 2.0 * l2;
  return h;
}

void LogisticClassifier::do_fit(const Matrix& x, const Vector& y) {
  const double pos = y.sum();
  if (pos == 0.0 || pos == static_cast<double>(y.size()))
    throw std::invalid_argument("logistic: labels contain a single class");
  if (params_.l2 < 0.0 || params_.max_iter < 1 || params_.tol <= 0.0)
    throw std::invalid_argument("logistic: invalid parameters");
  column_standardization(x, Vector(), mean_, scale_);
  const Matrix z = (x.rowwise() - mean_.transpose()).array().rowwise() / scale_.transpose().array();
  const LogisticObjective obj{z, y, params_.l2};

  const Eigen::Index p = x.cols() + 1;
  if (warm_start_ && warm_start_->size() == p) {
    theta_ = *warm_start_;
  } else {
    theta_ = Vector::Zero(p);
    theta_[0] = std::log(pos / (static_cast<double>(y.size()) - pos));
  }
  converged_ = false;
  iterations_ = 0;
  // The loss is a sum over rows, so the tolerance applies to the per-row gradient.
  const double tol = params_.tol * std::max(1.0, static_cast<double>(y.size()));
  double f = obj.value(theta_);
  Vector g = obj.gradient(theta_);
  grad_norm_ = g.norm();
  while (iterations_ < params_.max_iter) {
    if (grad_norm_ < tol) {
      converged_ = true;
      break;
    }
    Matrix h = obj.hessian(theta_);
    Eigen::LDLT<Matrix> ldlt(h);
    Vector step = ldlt.solve(-g);
    if (ldlt.info() != Eigen::Success || !step.allFinite() || step.dot(g) >= 0.0) {
      h.diagonal().array() += 1e-8 * (1.0 + h.diagonal().cwiseAbs().maxCoeff());
      step = h.ldlt().solve(-g);
      if (!step.allFinite() || step.dot(g) >= 0.0) step = -g;
    }
    double t = 1.0;
    Vector cand = theta_ + step;
    double fc = obj.value(cand);
    while (!(fc <= f + 1e-4 * t * g.dot(step)) && t > 1e-12) {
      t *= 0.5;
      cand = theta_ + t * step;
      fc = obj.value(cand);
    }
    ++iterations_;
    if (!(fc < f)) {
      // No representable decrease left; at the optimum the Newton decrement is at rounding level.
      converged_ = -g.dot(step) <= 1e-10 * (1.0 + std::abs(f));
      break;
    }
    theta_ = cand;
    f = fc;
    g = obj.gradient(theta_);
    grad_norm_ = g.norm();
  }
  if (grad_norm_ < tol) converged_ = true;
}

Vector LogisticClassifier::do_predict_proba(const Matrix& x) const {
  const Matrix z = (x.rowwise() - mean_.transpose()).array().rowwise() / scale_.transpose().array();
  const Vector eta = linear_predictor(z, theta_);
  static constexpr double eps = 1e-12;
  return eta.unaryExpr([](double e) { return std::clamp(sigmoid(e), eps, 1.0 - eps); });
}

Vector LogisticClassifier::raw_coefficients() const {
  Vector out(theta_.size());
  const Vector beta = theta_.tail(theta_.size() - 1).array() / scale_.array();
  out[0] = theta_[0] - mean_.dot(beta);
  out.tail(beta.size()) = beta;
  return out;
}

std::unique_ptr<LogisticClassifier> fit_logistic(const Matrix& features, const Vector& labels, double l2,
                                                 int max_iter, double tol) {
  auto c = std::make_unique<LogisticClassifier>(LogisticParams{l2, max_iter, tol});
  c->fit(features, labels);
  return c;
}

}  // namespace modcausal
