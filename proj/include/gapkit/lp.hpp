#ifndef GAPKIT_LP_HPP
#define GAPKIT_LP_HPP

#include "gapkit/core.hpp"

#include <vector>

namespace gapkit::lp {

enum class Status { optimal, infeasible, unbounded, iteration_limit };

struct Result {
  Status status = Status::iteration_limit;
  double objective = 0.0;
  Vector x;
};

/// Small dense linear program
///
///     minimize c^T x   subject to   A x <= b,
///
/// where the first `free_count` variables are free and the rest are
/// nonnegative.  Solved by a two-phase tableau simplex with Bland's rule, which
/// cannot cycle; the problem sizes here are a few dozen rows, so the dense
/// tableau is the simplest exact method.
inline Result minimize(const Vector& c, const Matrix& A, const Vector& b, Eigen::Index free_count,
                       int max_pivots = 20000) {
  const Eigen::Index rows = A.rows();
  const Eigen::Index vars = A.cols();
  if (c.size() != vars || b.size() != rows || free_count < 0 || free_count > vars) {
    throw InputError("lp::minimize: inconsistent problem dimensions");
  }
  constexpr double eps = 1e-11;

  // Column layout: [x+ (vars)] [x- (free_count)] [slack (rows)] [artificial (rows)] | rhs
  const Eigen::Index n_struct = vars + free_count;
  const Eigen::Index n_cols = n_struct + 2 * rows;
  Matrix T = Matrix::Zero(rows + 1, n_cols + 1);
  std::vector<Eigen::Index> basis(static_cast<std::size_t>(rows));

  for (Eigen::Index i = 0; i < rows; ++i) {
    const double sign = b[i] < 0.0 ? -1.0 : 1.0;
    for (Eigen::Index j = 0; j < vars; ++j) T(i, j) = sign * A(i, j);
    for (Eigen::Index j = 0; j < free_count; ++j) T(i, vars + j) = -sign * A(i, j);
    T(i, n_struct + i) = sign;
    T(i, n_struct + rows + i) = 1.0;
    T(i, n_cols) = sign * b[i];
    basis[static_cast<std::size_t>(i)] = n_struct + rows + i;
  }

  auto pivot = [&](Eigen::Index r, Eigen::Index col) {
    T.row(r) /= T(r, col);
    for (Eigen::Index i = 0; i <= rows; ++i) {
      if (i != r && T(i, col) != 0.0) T.row(i) -= T(i, col) * T.row(r);
    }
    basis[static_cast<std::size_t>(r)] = col;
  };

  // Runs simplex iterations on the objective row `rows`, considering entering
  // columns < col_limit.  Objective row holds reduced costs; minimize.
  int pivots = 0;
  auto run = [&](Eigen::Index col_limit) -> Status {
    while (true) {
      Eigen::Index enter = -1;
      for (Eigen::Index j = 0; j < col_limit; ++j) {
        if (T(rows, j) < -eps) {
          enter = j;
          break;
        }
      }
      if (enter < 0) return Status::optimal;
      Eigen::Index leave = -1;
      double best = 0.0;
      for (Eigen::Index i = 0; i < rows; ++i) {
        if (T(i, enter) > eps) {
          const double ratio = T(i, n_cols) / T(i, enter);
          if (leave < 0 || ratio < best - eps ||
              (ratio <= best + eps && basis[static_cast<std::size_t>(i)] <
                                          basis[static_cast<std::size_t>(leave)])) {
            leave = i;
            best = ratio;
          }
        }
      }
      if (leave < 0) return Status::unbounded;
      pivot(leave, enter);
      if (++pivots > max_pivots) return Status::iteration_limit;
    }
  };

  // Phase 1: minimize the sum of artificials.
  for (Eigen::Index i = 0; i < rows; ++i) T.row(rows) -= T.row(i);
  for (Eigen::Index i = 0; i < rows; ++i) T(rows, n_struct + rows + i) = 0.0;
  Result result;
  Status s = run(n_struct + rows);
  if (s == Status::iteration_limit) {
    result.status = s;
    return result;
  }
  if (-T(rows, n_cols) > 1e-9 * (1.0 + b.cwiseAbs().maxCoeff())) {
    result.status = Status::infeasible;
    return result;
  }
  // Drive remaining artificials out of the basis where possible.
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (basis[static_cast<std::size_t>(i)] >= n_struct + rows) {
      for (Eigen::Index j = 0; j < n_struct + rows; ++j) {
        if (std::abs(T(i, j)) > eps) {
          pivot(i, j);
          break;
        }
      }
    }
  }

  // Phase 2 objective in terms of nonbasic columns.
  T.row(rows).setZero();
  for (Eigen::Index j = 0; j < vars; ++j) T(rows, j) = c[j];
  for (Eigen::Index j = 0; j < free_count; ++j) T(rows, vars + j) = -c[j];
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Eigen::Index bj = basis[static_cast<std::size_t>(i)];
    if (bj < n_cols && T(rows, bj) != 0.0) T.row(rows) -= T(rows, bj) * T.row(i);
  }
  s = run(n_struct + rows);
  result.status = s;
  if (s != Status::optimal) return result;

  Vector xs = Vector::Zero(n_cols);
  for (Eigen::Index i = 0; i < rows; ++i) xs[basis[static_cast<std::size_t>(i)]] = T(i, n_cols);
  result.x = xs.head(vars);
  for (Eigen::Index j = 0; j < free_count; ++j) result.x[j] -= xs[vars + j];
  result.objective = c.dot(result.x);
  return result;
}

}  // namespace gapkit::lp

#endif  // GAPKIT_LP_HPP
