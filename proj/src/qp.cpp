// Copyright 2026 The WMPC Lab Authors
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

#include "wmpc/qp.hpp"

#include <limits>

namespace wmpc::qp
{
namespace
{
struct Givens
{
  double c{1.0};
  double s{0.0};
  double r{0.0};
};

Givens make_givens(double a, double b)
{
  const double r = std::sqrt(a * a + b * b);
  if (r == 0.0) {
    return {1.0, 0.0, 0.0};
  }
  return {a / r, b / r, r};
}

// Applies [c s; -s c] to columns (j, j+1) from the right.
void rotate_columns(Mat & M, int j, double c, double s)
{
  double * a = M.col(j).data();
  double * b = M.col(j + 1).data();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    const double ai = a[i];
    a[i] = c * ai + s * b[i];
    b[i] = c * b[i] - s * ai;
  }
}

}  // namespace

Mat inverse_cholesky_factor(const Mat & hessian)
{
  const Eigen::Index n = hessian.rows();
  const double scale = std::max(1.0, hessian.diagonal().cwiseAbs().maxCoeff());
  for (double jitter : {0.0, 1e-12, 1e-10, 1e-8}) {
    Eigen::LLT<Mat> llt(hessian + (jitter * scale) * Mat::Identity(n, n));
    if (llt.info() == Eigen::Success) {
      // Column j of L^{-1} only involves the trailing block of L.
      const Mat & L = llt.matrixLLT();
      Mat J = Mat::Zero(n, n);
      Vec col(n);
      for (Eigen::Index j = 0; j < n; ++j) {
        const Eigen::Index len = n - j;
        col.head(len).setZero();
        col[0] = 1.0;
        L.bottomRightCorner(len, len).triangularView<Eigen::Lower>().solveInPlace(col.head(len));
        J.row(j).tail(len) = col.head(len).transpose();
      }
      return J;
    }
  }
  throw RuntimeFailure("QP Hessian is not positive definite");
}

void DualActiveSetSolver::add_constraint(int q, Vec & d)
{
  const int n = static_cast<int>(J_.rows());
  // Rotate d[q+1..n-1] into d[q], carrying the columns of J along.
  for (int j = n - 1; j > q; --j) {
    const Givens g = make_givens(d[j - 1], d[j]);
    if (g.s == 0.0) {
      continue;
    }
    d[j - 1] = g.r;
    d[j] = 0.0;
    rotate_columns(J_, j - 1, g.c, g.s);
  }
  R_.col(q).head(q + 1) = d.head(q + 1);
}

void DualActiveSetSolver::drop_constraint(int k, int & q)
{
  for (int col = k; col < q - 1; ++col) {
    R_.col(col).head(q) = R_.col(col + 1).head(q);
  }
  R_.col(q - 1).setZero();
  // Restore upper-triangular form of the Hessenberg remainder.
  for (int j = k; j < q - 1; ++j) {
    const Givens g = make_givens(R_(j, j), R_(j + 1, j));
    if (g.s == 0.0) {
      continue;
    }
    for (int col = j; col < q - 1; ++col) {
      const double a = R_(j, col);
      const double b = R_(j + 1, col);
      R_(j, col) = g.c * a + g.s * b;
      R_(j + 1, col) = -g.s * a + g.c * b;
    }
    rotate_columns(J_, j, g.c, g.s);
  }
  --q;
}

QpResult DualActiveSetSolver::solve(const Mat & inv_factor, const Vec & g, const Mat & A, const Vec & c)
{
  const Eigen::Index n = g.size();
  const double inf = std::numeric_limits<double>::infinity();
  return solve(inv_factor, g, A, c, Vec::Constant(n, -inf), Vec::Constant(n, inf));
}

QpResult DualActiveSetSolver::solve(
  const Mat & inv_factor, const Vec & g, const Mat & A, const Vec & c, const Vec & lower,
  const Vec & upper, const std::vector<int> & first)
{
  const int n = static_cast<int>(g.size());
  const int m = static_cast<int>(A.rows());
  const int total = m + 2 * n;
  if (A.cols() != n || c.size() != m || lower.size() != n || upper.size() != n) {
    throw ValidationError("QP dimensions are inconsistent");
  }
  J_ = inv_factor;
  R_.setZero(n, n);

  QpResult res;
  res.x = -(J_ * (J_.transpose() * g));
  res.multipliers = Vec::Zero(total);

  std::vector<int> active;  // constraint index per active column
  Vec u(n + 1);             // multipliers of active constraints
  std::vector<char> is_active(static_cast<std::size_t>(total), 0);
  int q = 0;

  Vec row_norm(m);
  for (int i = 0; i < m; ++i) {
    row_norm[i] = 1.0 + A.row(i).norm();
  }

  Vec d(n);
  Vec z(n);
  Vec r(n);
  Vec np(n);
  Vec s(m);
  const double inf = std::numeric_limits<double>::infinity();

  auto slack_of = [&](int i) -> double {
    if (i < m) {
      return A.row(i).dot(res.x) + c[i];
    }
    const int var = (i - m) / 2;
    return ((i - m) % 2 == 0) ? res.x[var] - lower[var] : upper[var] - res.x[var];
  };
  auto normal_of = [&](int i, Vec & out) {
    if (i < m) {
      out = A.row(i).transpose();
      return;
    }
    out.setZero();
    const int var = (i - m) / 2;
    out[var] = ((i - m) % 2 == 0) ? 1.0 : -1.0;
  };

  std::size_t next_first = 0;
  int iter = 0;
  while (true) {
    // Step 1: pick the next constraint to activate.
    int p = -1;
    while (next_first < first.size() && p < 0) {
      const int cand = first[next_first++];
      if (!is_active[static_cast<std::size_t>(cand)] && slack_of(cand) < -tol_) {
        p = cand;
      }
    }
    if (p < 0) {
      double worst = 0.0;
      if (m > 0) {
        s.noalias() = A * res.x;
        s += c;
        for (int i = 0; i < m; ++i) {
          if (is_active[static_cast<std::size_t>(i)]) {
            continue;
          }
          const double scaled = s[i] / row_norm[i];
          if (scaled < -tol_ && scaled < worst) {
            worst = scaled;
            p = i;
          }
        }
      }
      for (int var = 0; var < n; ++var) {
        const double lo = (res.x[var] - lower[var]) / 2.0;
        const double hi = (upper[var] - res.x[var]) / 2.0;
        const int il = m + 2 * var;
        if (lo < -tol_ && lo < worst && !is_active[static_cast<std::size_t>(il)]) {
          worst = lo;
          p = il;
        }
        if (hi < -tol_ && hi < worst && !is_active[static_cast<std::size_t>(il + 1)]) {
          worst = hi;
          p = il + 1;
        }
      }
    }
    if (p < 0) {
      res.feasible = true;
      break;
    }
    normal_of(p, np);
    double u_plus = 0.0;

    // Step 2: move towards satisfying constraint p, dropping blockers.
    while (true) {
      if (++iter > max_iterations_) {
        res.feasible = false;
        res.iterations = iter;
        return res;
      }
      if (p < m) {
        d.noalias() = J_.transpose() * np;
      } else {
        d = J_.row((p - m) / 2).transpose() * np[(p - m) / 2];
      }
      z.noalias() = J_.rightCols(n - q) * d.tail(n - q);
      if (q > 0) {
        r.head(q) = R_.topLeftCorner(q, q).triangularView<Eigen::Upper>().solve(d.head(q));
      }

      // Partial (dual) step length.
      double t1 = inf;
      int blocking = -1;
      for (int k = 0; k < q; ++k) {
        if (r[k] > 1e-14) {
          const double ratio = u[k] / r[k];
          if (ratio < t1) {
            t1 = ratio;
            blocking = k;
          }
        }
      }
      // Full (primal) step length.
      const double zn = z.dot(np);
      const double slack = slack_of(p);
      const double t2 = (std::abs(zn) <= 1e-14 * np.squaredNorm()) ? inf : -slack / zn;
      const double t = std::min(t1, t2);

      if (t == inf) {
        res.feasible = false;
        res.iterations = iter;
        return res;
      }
      if (t2 == inf) {
        for (int k = 0; k < q; ++k) {
          u[k] -= t * r[k];
        }
        u_plus += t;
        is_active[static_cast<std::size_t>(active[static_cast<std::size_t>(blocking)])] = 0;
        active.erase(active.begin() + blocking);
        for (int k = blocking; k < q - 1; ++k) {
          u[k] = u[k + 1];
        }
        drop_constraint(blocking, q);
        continue;
      }

      res.x += t * z;
      for (int k = 0; k < q; ++k) {
        u[k] -= t * r[k];
      }
      u_plus += t;

      if (t == t2) {
        // Full step: constraint p joins the active set.
        if (p < m) {
          d.noalias() = J_.transpose() * np;
        } else {
          d = J_.row((p - m) / 2).transpose() * np[(p - m) / 2];
        }
        add_constraint(q, d);
        active.push_back(p);
        is_active[static_cast<std::size_t>(p)] = 1;
        u[q] = u_plus;
        ++q;
        break;
      }
      is_active[static_cast<std::size_t>(active[static_cast<std::size_t>(blocking)])] = 0;
      active.erase(active.begin() + blocking);
      for (int k = blocking; k < q - 1; ++k) {
        u[k] = u[k + 1];
      }
      drop_constraint(blocking, q);
    }
  }

  res.iterations = iter;
  res.active = active;
  for (int k = 0; k < q; ++k) {
    res.multipliers[active[static_cast<std::size_t>(k)]] = u[k];
  }
  return res;
}

}  // namespace wmpc::qp
