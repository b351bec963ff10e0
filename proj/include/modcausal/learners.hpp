#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace modcausal {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct NotFitted : std::logic_error {
  NotFitted() : std::logic_error("learner used before fit") {}
};

/// Weighted least-squares style regressor. An empty weight vector means unit weights.
class Regressor {
 public:
  virtual ~Regressor() = default;

  void fit(const Matrix& features, const Vector& targets, const Vector& weights = Vector());
  Vector predict(const Matrix& features) const;
  bool fitted() const { return fitted_; }
  virtual std::string name() const = 0;

 protected:
  virtual void do_fit(const Matrix& features, const Vector& targets, const Vector& weights) = 0;
  virtual Vector do_predict(const Matrix& features) const = 0;

 private:
  bool fitted_ = false;
  Eigen::Index n_features_ = 0;
};

struct RidgeParams {
  double l2 = 1e-3;
  bool standardize = true;
};

/// Minimizes sum_i w_i (y_i - a - x_i'b)^2 + l2 |b|^2 with the penalty applied to the
/// coefficients of standardized features. Intercept is unpenalized.
class RidgeRegressor final : public Regressor {
 public:
  explicit RidgeRegressor(RidgeParams p = {}) : params_(p) {}
  std::string name() const override { return "linear"; }

  double intercept() const { return intercept_; }
  /// Coefficients on the original feature scale.
  const Vector& coefficients() const { return coef_; }

 protected:
  void do_fit(const Matrix& x, const Vector& y, const Vector& w) override;
  Vector do_predict(const Matrix& x) const override;

 private:
  RidgeParams params_;
  double intercept_ = 0.0;
  Vector coef_;
};

struct GbtParams {
  int trees = 200;
  int depth = 3;
  double learning_rate = 0.1;
  int min_leaf = 5;
  double subsample = 1.0;
  std::uint64_t seed = 0;
};

/// Stagewise squared-error boosting of depth-limited regression trees with exact greedy
/// splits on presorted features.
class GbtRegressor final : public Regressor {
 public:
  explicit GbtRegressor(GbtParams p = {});
  std::string name() const override { return "gbt"; }

  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
  };
  using Tree = std::vector<Node>;

  const std::vector<Tree>& trees() const { return trees_; }
  double base_score() const { return base_; }

 protected:
  void do_fit(const Matrix& x, const Vector& y, const Vector& w) override;
  Vector do_predict(const Matrix& x) const override;

 private:
  GbtParams params_;
  double base_ = 0.0;
  std::vector<Tree> trees_;
};

/// Predicts the weighted training mean. Used as a deliberately misspecified nuisance model.
class ConstantRegressor final : public Regressor {
 public:
  std::string name() const override { return "constant"; }
  double value() const { return value_; }

 protected:
  void do_fit(const Matrix& x, const Vector& y, const Vector& w) override;
  Vector do_predict(const Matrix& x) const override;

 private:
  double value_ = 0.0;
};

enum class LearnerKind { Linear, Gbt, Constant };

std::string_view to_string(LearnerKind k);
LearnerKind parse_learner_kind(std::string_view s);

struct LearnerSpec {
  LearnerKind kind = LearnerKind::Gbt;
  RidgeParams ridge;
  GbtParams gbt;

  static LearnerSpec linear(double l2 = 1e-3) { return {LearnerKind::Linear, {l2, true}, {}}; }
  static LearnerSpec gbt_default() { return {LearnerKind::Gbt, {}, {}}; }
  static LearnerSpec constant() { return {LearnerKind::Constant, {}, {}}; }
};

std::unique_ptr<Regressor> make_regressor(const LearnerSpec& spec, std::uint64_t seed);

std::unique_ptr<RidgeRegressor> fit_ridge(const Matrix& features, const Vector& targets, double l2);
std::unique_ptr<GbtRegressor> fit_gbt(const Matrix& features, const Vector& targets, int trees, int depth,
                                      double learning_rate, std::uint64_t seed);

// ---------------------------------------------------------------------------------------

class ProbClassifier {
 public:
  virtual ~ProbClassifier() = default;
  void fit(const Matrix& features, const Vector& labels);
  Vector predict_proba(const Matrix& features) const;
  bool fitted() const { return fitted_; }
  virtual std::string name() const = 0;

 protected:
  virtual void do_fit(const Matrix& features, const Vector& labels) = 0;
  virtual Vector do_predict_proba(const Matrix& features) const = 0;

 private:
  bool fitted_ = false;
  Eigen::Index n_features_ = 0;
};

struct LogisticParams {
  double l2 = 1e-3;
  int max_iter = 500;
  double tol = 1e-8;
};

/// Penalized negative log-likelihood in standardized coordinates:
///   sum_i [log(1 + exp(eta_i)) - y_i eta_i] + l2 |beta|^2,  eta = b0 + z'beta.
/// theta = (b0, beta). Exposed for gradient checks.
struct LogisticObjective {
  const Matrix& z;  // standardized features
  const Vector& y;
  double l2;

  double value(const Vector& theta) const;
  Vector gradient(const Vector& theta) const;
  Matrix hessian(const Vector& theta) const;
};

/// Damped Newton solver. Stops when the gradient norm divided by the row count drops below
/// tol, when no further decrease is possible, or after max_iter.
class LogisticClassifier final : public ProbClassifier {
 public:
  explicit LogisticClassifier(LogisticParams p = {}) : params_(p) {}
  std::string name() const override { return "logistic"; }

  /// Initial theta in standardized coordinates for the next fit.
  void set_warm_start(Vector theta) { warm_start_ = std::move(theta); }

  bool converged() const { return converged_; }
  int iterations() const { return iterations_; }
  double gradient_norm() const { return grad_norm_; }
  /// (intercept, coefficients) on the standardized scale.
  const Vector& theta() const { return theta_; }
  /// Coefficients on the original feature scale, intercept first.
  Vector raw_coefficients() const;

 protected:
  void do_fit(const Matrix& x, const Vector& y) override;
  Vector do_predict_proba(const Matrix& x) const override;

 private:
  LogisticParams params_;
  std::optional<Vector> warm_start_;
  Vector mean_, scale_, theta_;
  bool converged_ = false;
  int iterations_ = 0;
  double grad_norm_ = 0.0;
};

class ConstantClassifier final : public ProbClassifier {
 public:
  explicit ConstantClassifier(double p) : p_(p) {}
  std::string name() const override { return "constant"; }

 protected:
  void do_fit(const Matrix&, const Vector&) override {}
  Vector do_predict_proba(const Matrix& x) const override { return Vector::Constant(x.rows(), p_); }

 private:
  double p_;
};

std::unique_ptr<LogisticClassifier> fit_logistic(const Matrix& features, const Vector& labels, double l2,
                                                 int max_iter, double tol);

/// Column means and (population) standard deviations; zero deviations are replaced by 1.
void column_standardization(const Matrix& x, const Vector& w, Vector& mean, Vector& scale);

}  // namespace modcausal
