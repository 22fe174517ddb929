#pragma once

#include "eigengame/common.hpp"

#include <memory>

namespace eigengame {

/// The symmetric operator M = X^T X seen by the game, held either as M itself
/// or as the sample matrix X (products then go through X, never forming M).
template <typename Scalar = double>
class GramOperator {
 public:
  static GramOperator from_matrix(Matrix<Scalar> m) {
    if (m.rows() == 0 || m.rows() != m.cols())
      throw Error(ErrorCode::invalid_dimension, "GramOperator: M must be square and non-empty");
    GramOperator op;
    op.d_ = m.rows();
    const bool diagonal = (m - Matrix<Scalar>(m.diagonal().asDiagonal())).cwiseAbs().maxCoeff() == Scalar(0);
    const Scalar tr = m.trace();
    op.scale_ = tr > Scalar(0) ? tr : m.norm();
    if (diagonal)
      op.diag_ = m.diagonal();
    else
      op.m_ = std::make_shared<const Matrix<Scalar>>(std::move(m));
    return op;
  }

  static GramOperator from_data(std::shared_ptr<const Matrix<Scalar>> x) {
    if (!x || x->rows() == 0 || x->cols() == 0)
      throw Error(ErrorCode::empty_dataset, "GramOperator: empty sample matrix");
    GramOperator op;
    op.d_ = x->cols();
    op.scale_ = x->squaredNorm();
    op.x_ = std::move(x);
    return op;
  }

  static GramOperator from_data(Matrix<Scalar> x) {
    return from_data(std::make_shared<const Matrix<Scalar>>(std::move(x)));
  }

  Index dim() const { return d_; }
  bool holds_data() const { return static_cast<bool>(x_); }

  /// M V.
  template <typename Derived>
  Matrix<Scalar> apply(const Eigen::MatrixBase<Derived>& v) const {
    check_rows(v.rows());
    if (x_) return x_->transpose() * (*x_ * v);
    if (m_) return *m_ * v;
    return diag_.asDiagonal() * v;
  }

  /// V^T M V, i.e. the matrix of <X v_a, X v_b>.
  template <typename Derived>
  Matrix<Scalar> gram(const Eigen::MatrixBase<Derived>& v) const {
    check_rows(v.rows());
    if (x_) {
      const Matrix<Scalar> xv = *x_ * v;
      return xv.transpose() * xv;
    }
    const Matrix<Scalar> mv = apply(v);
    return v.transpose() * mv;
  }

  /// ||X||_F^2 for the data form, trace(M) for the matrix form (the same
  /// number when M = X^T X). Used to scale the parent-denominator guard.
  Scalar frobenius_sq() const { return scale_; }

  Scalar denominator_guard() const { return Scalar(1e-12) * scale_; }

  Matrix<Scalar> dense() const {
    if (x_) return x_->transpose() * *x_;
    if (m_) return *m_;
    return diag_.asDiagonal();
  }

 private:
  GramOperator() = default;

  void check_rows(Index rows) const {
    if (rows != d_)
      throw Error(ErrorCode::invalid_dimension, "GramOperator: expected " + std::to_string(d_) +
                                                    " rows, got " + std::to_string(rows));
  }

  Index d_ = 0;
  Scalar scale_ = 0;
  std::shared_ptr<const Matrix<Scalar>> x_;
  std::shared_ptr<const Matrix<Scalar>> m_;
  Vector<Scalar> diag_;
};

}  // namespace eigengame
