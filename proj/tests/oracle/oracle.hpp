#pragma once

// Independent reference implementations for tests. Plain loops only; Eigen
// types are used as containers, never for decompositions.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Gaussian elimination with partial pivoting; solves A x = b.
inline VectorXd gauss_solve(MatrixXd a, VectorXd b) {
  const Index n = a.rows();
  for (Index c = 0; c < n; ++c) {
    Index p = c;
    for (Index r = c + 1; r < n; ++r)
      if (std::abs(a(r, c)) > std::abs(a(p, c))) p = r;
    if (a(p, c) == 0.0) throw std::runtime_error("singular system");
    if (p != c) {
      for (Index k = 0; k < n; ++k) std::swap(a(c, k), a(p, k));
      std::swap(b(c), b(p));
    }
    for (Index r = c + 1; r < n; ++r) {
      const double f = a(r, c) / a(c, c);
      for (Index k = c; k < n; ++k) a(r, k) -= f * a(c, k);
      b(r) -= f * b(c);
    }
  }
  VectorXd x(n);
  for (Index r = n - 1; r >= 0; --r) {
    double s = b(r);
    for (Index k = r + 1; k < n; ++k) s -= a(r, k) * x(k);
    x(r) = s / a(r, r);
  }
  return x;
}

inline MatrixXd gauss_inverse(const MatrixXd& a) {
  const Index n = a.rows();
  MatrixXd inv(n, n);
  for (Index j = 0; j < n; ++j) {
    VectorXd e = VectorXd::Zero(n);
    e(j) = 1.0;
    inv.col(j) = gauss_solve(a, e);
  }
  return inv;
}

inline MatrixXd gram(const MatrixXd& x) {
  MatrixXd g(x.cols(), x.cols());
  for (Index i = 0; i < x.cols(); ++i)
    for (Index j = 0; j < x.cols(); ++j) {
      double s = 0.0;
      for (Index t = 0; t < x.rows(); ++t) s += x(t, i) * x(t, j);
      g(i, j) = s;
    }
  return g;
}

inline VectorXd xty(const MatrixXd& x, const VectorXd& y) {
  VectorXd v(x.cols());
  for (Index i = 0; i < x.cols(); ++i) {
    double s = 0.0;
    for (Index t = 0; t < x.rows(); ++t) s += x(t, i) * y(t);
    v(i) = s;
  }
  return v;
}

/// OLS through the normal equations.
inline VectorXd normal_equations(const MatrixXd& x, const VectorXd& y) {
  return gauss_solve(gram(x), xty(x, y));
}

/// HC1 sandwich standard errors.
inline VectorXd hc1_se(const MatrixXd& x, const VectorXd& y) {
  const Index n = x.rows(), k = x.cols();
  const VectorXd b = normal_equations(x, y);
  const MatrixXd bread = gauss_inverse(gram(x));
  MatrixXd meat = MatrixXd::Zero(k, k);
  for (Index t = 0; t < n; ++t) {
    double e = y(t);
    for (Index j = 0; j < k; ++j) e -= x(t, j) * b(j);
    for (Index i = 0; i < k; ++i)
      for (Index j = 0; j < k; ++j) meat(i, j) += e * e * x(t, i) * x(t, j);
  }
  VectorXd se(k);
  for (Index i = 0; i < k; ++i) {
    double v = 0.0;
    for (Index a = 0; a < k; ++a)
      for (Index c = 0; c < k; ++c) v += bread(i, a) * meat(a, c) * bread(c, i);
    se(i) = std::sqrt(v * double(n) / double(n - k));
  }
  return se;
}

struct Svd {
  MatrixXd u;  ///< m x n
  VectorXd s;  ///< n, descending
  MatrixXd v;  ///< n x n
};

/// One-sided Jacobi SVD (Hestenes) of an m x n matrix with m >= n.
inline Svd jacobi_svd(const MatrixXd& a) {
  const Index m = a.rows(), n = a.cols();
  if (m < n) throw std::invalid_argument("jacobi_svd needs rows >= cols");
  MatrixXd w = a;
  MatrixXd v = MatrixXd::Identity(n, n);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (Index p = 0; p < n - 1; ++p) {
      for (Index q = p + 1; q < n; ++q) {
        double alpha = 0.0, beta = 0.0, gamma = 0.0;
        for (Index i = 0; i < m; ++i) {
          alpha += w(i, p) * w(i, p);
          beta += w(i, q) * w(i, q);
          gamma += w(i, p) * w(i, q);
        }
        if (gamma == 0.0) continue;
        off = std::max(off, std::abs(gamma) / std::sqrt(alpha * beta));
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (Index i = 0; i < m; ++i) {
          const double wp = w(i, p), wq = w(i, q);
          w(i, p) = c * wp - s * wq;
          w(i, q) = s * wp + c * wq;
        }
        for (Index i = 0; i < n; ++i) {
          const double vp = v(i, p), vq = v(i, q);
          v(i, p) = c * vp - s * vq;
          v(i, q) = s * vp + c * vq;
        }
      }
    }
    if (off < 1e-15) break;
  }
  VectorXd s(n);
  for (Index j = 0; j < n; ++j) s(j) = w.col(j).norm();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index(0));
  std::sort(order.begin(), order.end(), [&](Index x, Index y) { return s(x) > s(y); });
  Svd out{MatrixXd(m, n), VectorXd(n), MatrixXd(n, n)};
  for (Index k = 0; k < n; ++k) {
    const Index j = order[std::size_t(k)];
    out.s(k) = s(j);
    out.v.col(k) = v.col(j);
    out.u.col(k) = s(j) > 0 ? VectorXd(w.col(j) / s(j)) : VectorXd::Zero(m);
  }
  return out;
}

/// Best rank-r approximation via the Jacobi SVD (handles m < n by transposing).
inline MatrixXd truncated_reconstruction(const MatrixXd& a, int r) {
  if (a.rows() < a.cols()) return truncated_reconstruction(a.transpose(), r).transpose();
  const Svd d = jacobi_svd(a);
  MatrixXd out = MatrixXd::Zero(a.rows(), a.cols());
  for (int k = 0; k < r; ++k) out += d.s(k) * d.u.col(k) * d.v.col(k).transpose();
  return out;
}

inline double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / double(v.size());
}

inline double sample_var(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / double(v.size() - 1);
}

}  // namespace oracle
