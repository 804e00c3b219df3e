#include <algorithm>
#include <cmath>
#include <limits>

#include "cmr/classifiers.hpp"
#include "cmr/error.hpp"

namespace cmr {

double sigmoid_kernel(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double gamma, double coef0) {
  return std::tanh(gamma * a.dot(b) + coef0);
}

namespace {

constexpr double kTau = 1e-12;
constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, double gamma, double coef0) {
  Eigen::MatrixXd K = gamma * (A * B.transpose());
  K.array() += coef0;
  return K.array().tanh();
}

}  // namespace

// Decomposition in the scaled form: 0 <= a_i <= 1 with sum a_i = nu*l/2 within
// each class, minimizing a'Qa/2 with Q_ij = y_i y_j K_ij. Pairs are always
// taken from one class so both equalities stay satisfied.
BinarySvm train_binary_nusvm(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double nu, double gamma,
                             double coef0, double eps) {
  const int l = static_cast<int>(X.rows());
  if (y.size() != l) throw DataError("SVM labels do not match rows");
  int n_pos = 0;
  for (int i = 0; i < l; ++i) {
    if (y[i] != 1.0 && y[i] != -1.0) throw DataError("SVM labels must be -1 or +1");
    n_pos += y[i] > 0;
  }
  const int n_neg = l - n_pos;
  if (!(nu > 0.0 && nu <= 1.0)) throw UsageError("nu must lie in (0, 1]");
  const double nu_max = 2.0 * std::min(n_pos, n_neg) / l;
  if (nu > nu_max) {
    throw DataError("nu = " + std::to_string(nu) + " is infeasible for class sizes " + std::to_string(n_pos) + "/" +
                    std::to_string(n_neg) + " (maximum " + std::to_string(nu_max) + ")");
  }

  const Eigen::MatrixXd K = kernel_matrix(X, X, gamma, coef0);
  if (!K.allFinite()) throw DataError("kernel matrix contains non-finite values");
  Eigen::MatrixXd Q = K;
  for (int i = 0; i < l; ++i)
    for (int j = 0; j < l; ++j) Q(i, j) *= y[i] * y[j];
  const Eigen::VectorXd QD = Q.diagonal();

  Eigen::VectorXd a(l);
  double sum_pos = nu * l / 2, sum_neg = nu * l / 2;
  for (int i = 0; i < l; ++i) {
    double& budget = y[i] > 0 ? sum_pos : sum_neg;
    a[i] = std::min(1.0, budget);
    budget -= a[i];
  }
  Eigen::VectorXd G = Q * a;

  auto at_upper = [&](int i) { return a[i] >= 1.0; };
  auto at_lower = [&](int i) { return a[i] <= 0.0; };

  BinarySvm m;
  const long max_iter = std::max<long>(10000000L, 100L * l);
  long iter = 0;
  for (; iter < max_iter; ++iter) {
    // Working-set selection with second-order information.
    double gmaxp = -kInf, gmaxp2 = -kInf, gmaxn = -kInf, gmaxn2 = -kInf;
    int ip = -1, in = -1;
    for (int t = 0; t < l; ++t) {
      if (y[t] > 0) {
        if (!at_upper(t) && -G[t] >= gmaxp) gmaxp = -G[t], ip = t;
      } else {
        if (!at_lower(t) && G[t] >= gmaxn) gmaxn = G[t], in = t;
      }
    }
    int jbest = -1;
    double obj_min = kInf;
    for (int j = 0; j < l; ++j) {
      if (y[j] > 0) {
        if (at_lower(j)) continue;
        gmaxp2 = std::max(gmaxp2, G[j]);
        const double diff = gmaxp + G[j];
        if (ip >= 0 && diff > 0) {
          double quad = QD[ip] + QD[j] - 2.0 * Q(ip, j);
          if (quad <= 0) quad = kTau;
          const double obj = -diff * diff / quad;
          if (obj <= obj_min) obj_min = obj, jbest = j;
        }
      } else {
        if (at_upper(j)) continue;
        gmaxn2 = std::max(gmaxn2, -G[j]);
        const double diff = gmaxn - G[j];
        if (in >= 0 && diff > 0) {
          double quad = QD[in] + QD[j] - 2.0 * Q(in, j);
          if (quad <= 0) quad = kTau;
          const double obj = -diff * diff / quad;
          if (obj <= obj_min) obj_min = obj, jbest = j;
        }
      }
    }
    m.kkt_gap = std::max(gmaxp + gmaxp2, gmaxn + gmaxn2);
    if (m.kkt_gap < eps || jbest < 0) {
      m.converged = true;
      break;
    }
    const int i = y[jbest] > 0 ? ip : in, j = jbest;

    const double old_i = a[i], old_j = a[j];
    double quad = QD[i] + QD[j] - 2.0 * Q(i, j);
    if (quad <= 0) quad = kTau;
    const double delta = (G[i] - G[j]) / quad;
    const double sum = a[i] + a[j];
    a[i] -= delta;
    a[j] += delta;
    if (sum > 1.0) {
      if (a[i] > 1.0) a[i] = 1.0, a[j] = sum - 1.0;
    } else {
      if (a[j] < 0.0) a[j] = 0.0, a[i] = sum;
    }
    if (sum > 1.0) {
      if (a[j] > 1.0) a[j] = 1.0, a[i] = sum - 1.0;
    } else {
      if (a[i] < 0.0) a[i] = 0.0, a[j] = sum;
    }
    const double di = a[i] - old_i, dj = a[j] - old_j;
    G += di * Q.col(i) + dj * Q.col(j);
  }
  m.iterations = static_cast<int>(iter);

  // Offsets from free variables, or the midpoint of the feasible interval.
  double r_cls[2];
  for (int c = 0; c < 2; ++c) {
    const double sign = c == 0 ? 1.0 : -1.0;
    double ub = kInf, lb = -kInf, sum_free = 0.0;
    int n_free = 0;
    for (int t = 0; t < l; ++t) {
      if (y[t] != sign) continue;
      if (at_upper(t)) {
        lb = std::max(lb, G[t]);
      } else if (at_lower(t)) {
        ub = std::min(ub, G[t]);
      } else {
        ++n_free;
        sum_free += G[t];
      }
    }
    r_cls[c] = n_free > 0 ? sum_free / n_free : (ub + lb) / 2;
  }
  double r = (r_cls[0] + r_cls[1]) / 2;
  const double rho = (r_cls[0] - r_cls[1]) / 2;
  // An indefinite kernel can leave r <= 0; the decision sign is then taken
  // unscaled rather than flipped.
  if (!(r > 1e-12)) r = 1.0;

  m.alpha = a / static_cast<double>(l);
  std::vector<int> sv;
  for (int t = 0; t < l; ++t)
    if (a[t] > 0.0) sv.push_back(t);
  m.support.resize(static_cast<Eigen::Index>(sv.size()), X.cols());
  m.coef.resize(static_cast<Eigen::Index>(sv.size()));
  for (std::size_t k = 0; k < sv.size(); ++k) {
    m.support.row(static_cast<Eigen::Index>(k)) = X.row(sv[k]);
    m.coef[static_cast<Eigen::Index>(k)] = y[sv[k]] * a[sv[k]] / r;
  }
  m.rho = rho / r;
  return m;
}

Eigen::VectorXd decision_values(const BinarySvm& m, const Eigen::MatrixXd& X, double gamma, double coef0) {
  if (m.support.rows() == 0) return Eigen::VectorXd::Constant(X.rows(), -m.rho);
  if (X.cols() != m.support.cols()) throw DataError("SVM expects " + std::to_string(m.support.cols()) + " features");
  return (kernel_matrix(X, m.support, gamma, coef0) * m.coef).array() - m.rho;
}

double platt_probability(double f, double a, double b) {
  const double z = f * a + b;
  return z >= 0 ? std::exp(-z) / (1.0 + std::exp(-z)) : 1.0 / (1.0 + std::exp(z));
}

std::pair<double, double> platt_fit(const Eigen::VectorXd& f, const Eigen::VectorXd& y) {
  const Eigen::Index l = f.size();
  double prior1 = 0, prior0 = 0;
  for (Eigen::Index i = 0; i < l; ++i) (y[i] > 0 ? prior1 : prior0) += 1;
  const int max_iter = 100;
  const double min_step = 1e-10, sigma = 1e-12, eps = 1e-5;
  const double hi = (prior1 + 1.0) / (prior1 + 2.0), lo = 1.0 / (prior0 + 2.0);
  Eigen::VectorXd t(l);
  for (Eigen::Index i = 0; i < l; ++i) t[i] = y[i] > 0 ? hi : lo;

  auto objective = [&](double A, double B) {
    double v = 0.0;
    for (Eigen::Index i = 0; i < l; ++i) {
      const double z = f[i] * A + B;
      v += z >= 0 ? t[i] * z + std::log1p(std::exp(-z)) : (t[i] - 1.0) * z + std::log1p(std::exp(z));
    }
    return v;
  };

  double A = 0.0, B = std::log((prior0 + 1.0) / (prior1 + 1.0));
  double fval = objective(A, B);
  for (int iter = 0; iter < max_iter; ++iter) {
    double h11 = sigma, h22 = sigma, h21 = 0, g1 = 0, g2 = 0;
    for (Eigen::Index i = 0; i < l; ++i) {
      const double z = f[i] * A + B;
      double p, q;
      if (z >= 0) {
        p = std::exp(-z) / (1.0 + std::exp(-z));
        q = 1.0 / (1.0 + std::exp(-z));
      } else {
        p = 1.0 / (1.0 + std::exp(z));
        q = std::exp(z) / (1.0 + std::exp(z));
      }
      const double d2 = p * q;
      h11 += f[i] * f[i] * d2;
      h22 += d2;
      h21 += f[i] * d2;
      const double d1 = t[i] - p;
      g1 += f[i] * d1;
      g2 += d1;
    }
    if (std::abs(g1) < eps && std::abs(g2) < eps) break;
    const double det = h11 * h22 - h21 * h21;
    const double dA = -(h22 * g1 - h21 * g2) / det, dB = -(-h21 * g1 + h11 * g2) / det;
    const double gd = g1 * dA + g2 * dB;
    double step = 1.0;
    while (step >= min_step) {
      const double nA = A + step * dA, nB = B + step * dB, nf = objective(nA, nB);
      if (nf < fval + 1e-4 * step * gd) {
        A = nA, B = nB, fval = nf;
        break;
      }
      step /= 2.0;
    }
    if (step < min_step) break;
  }
  return {A, B};
}

NuSvmClassifier train_nusvm(const Eigen::MatrixXd& X, const std::vector<int>& labels, int n_classes,
                            const SvmParams& params) {
  check_class_labels(labels, n_classes, X.rows());
  if (!X.allFinite()) throw DataError("SVM input contains non-finite values");
  NuSvmClassifier m;
  m.nu = params.nu;
  m.gamma = params.gamma > 0.0 ? params.gamma : 1.0 / static_cast<double>(X.cols());
  m.coef0 = params.coef0;
  for (int k = 0; k < n_classes; ++k) {
    Eigen::VectorXd y(X.rows());
    for (Eigen::Index i = 0; i < y.size(); ++i) y[i] = labels[static_cast<std::size_t>(i)] == k ? 1.0 : -1.0;
    BinarySvm bin = train_binary_nusvm(X, y, params.nu, m.gamma, m.coef0, params.eps);
    const auto [a, b] = platt_fit(decision_values(bin, X, m.gamma, m.coef0), y);
    bin.platt_a = a;
    bin.platt_b = b;
    m.machines.push_back(std::move(bin));
  }
  return m;
}

Eigen::MatrixXd predict_proba(const NuSvmClassifier& m, const Eigen::MatrixXd& X) {
  const auto K = static_cast<Eigen::Index>(m.machines.size());
  Eigen::MatrixXd P(X.rows(), K);
  for (Eigen::Index k = 0; k < K; ++k) {
    const auto& bin = m.machines[static_cast<std::size_t>(k)];
    const Eigen::VectorXd f = decision_values(bin, X, m.gamma, m.coef0);
    for (Eigen::Index i = 0; i < X.rows(); ++i) P(i, k) = platt_probability(f[i], bin.platt_a, bin.platt_b);
  }
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const double s = P.row(i).sum();
    if (s > 0.0 && std::isfinite(s)) {
      P.row(i) /= s;
    } else {
      P.row(i).setConstant(1.0 / static_cast<double>(K));
    }
  }
  return P;
}

}  // namespace cmr
