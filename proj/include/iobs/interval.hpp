#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>

#include "iobs/errors.hpp"

namespace iobs {

// Elementwise lower/upper bound pair for a real vector.
template <typename Scalar>
class IntervalVector {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  IntervalVector() = default;

  template <typename DerivedL, typename DerivedU>
  IntervalVector(const Eigen::MatrixBase<DerivedL>& lower,
                 const Eigen::MatrixBase<DerivedU>& upper)
      : lower_(lower), upper_(upper) {
    if (lower_.size() != upper_.size())
      throw invalid_input("interval bounds differ in dimension");
    for (Eigen::Index i = 0; i < lower_.size(); ++i) {
      if (!std::isfinite(lower_(i)) || !std::isfinite(upper_(i)))
        throw invalid_input("interval bound not finite");
      if (lower_(i) > upper_(i)) {
        // Tolerate solver round-off up to 1e-12 by clamping to the midpoint.
        if (lower_(i) - upper_(i) > Scalar(1e-12))
          throw invalid_input("interval lower exceeds upper at index " +
                              std::to_string(i));
        Scalar mid = (lower_(i) + upper_(i)) / Scalar(2);
        lower_(i) = mid;
        upper_(i) = mid;
      }
    }
  }

  static IntervalVector degenerate(const Vector& point) {
    return IntervalVector(point, point);
  }

  const Vector& lower() const { return lower_; }
  const Vector& upper() const { return upper_; }
  Eigen::Index size() const { return lower_.size(); }

  Vector midpoint() const { return (lower_ + upper_) / Scalar(2); }

  bool contains(const Vector& x, Scalar tol = Scalar(0)) const {
    if (x.size() != lower_.size()) return false;
    return ((x.array() >= lower_.array() - tol) &&
            (x.array() <= upper_.array() + tol)).all();
  }

  bool contained_in(const IntervalVector& other, Scalar tol = Scalar(0)) const {
    if (other.size() != size()) return false;
    return ((lower_.array() >= other.lower_.array() - tol) &&
            (upper_.array() <= other.upper_.array() + tol)).all();
  }

  // Concatenation [this; tail].
  IntervalVector concatenated(const IntervalVector& tail) const {
    Vector lo(size() + tail.size()), hi(size() + tail.size());
    lo << lower_, tail.lower_;
    hi << upper_, tail.upper_;
    return IntervalVector(lo, hi);
  }

  IntervalVector segment(Eigen::Index start, Eigen::Index n) const {
    return IntervalVector(lower_.segment(start, n), upper_.segment(start, n));
  }

 private:
  Vector lower_, upper_;
};

using IntervalVectorXd = IntervalVector<double>;

// Sign decomposition of a matrix: pos = max{0,X}, neg = pos - X, abs = pos + neg.
template <typename Scalar>
struct MatrixSplit {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  Matrix pos, neg, abs;
};

using MatrixSplitXd = MatrixSplit<double>;

// max{0,.} taken entrywise by comparison so reconstruction is bit-exact.
template <typename Derived>
MatrixSplit<typename Derived::Scalar> split_matrix(
    const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  MatrixSplit<Scalar> out;
  out.pos = x.derived().eval();
  out.neg.setZero(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j)
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      Scalar v = out.pos(i, j);
      if (!std::isfinite(v)) throw invalid_input("split_matrix: non-finite entry");
      if (v < Scalar(0)) {
        out.pos(i, j) = Scalar(0);
        out.neg(i, j) = -v;
      }
    }
  out.abs = out.pos + out.neg;
  return out;
}

// [X+ lo - X- hi, X+ hi - X- lo]; contains X*x for every x in the box.
template <typename Scalar>
IntervalVector<Scalar> propagate_affine(const MatrixSplit<Scalar>& split,
                                        const IntervalVector<Scalar>& box) {
  if (split.pos.cols() != box.size())
    throw invalid_input("propagate_affine: dimension mismatch");
  return IntervalVector<Scalar>(
      split.pos * box.lower() - split.neg * box.upper(),
      split.pos * box.upper() - split.neg * box.lower());
}

template <typename Derived, typename Scalar>
IntervalVector<Scalar> propagate_affine(const Eigen::MatrixBase<Derived>& x,
                                        const IntervalVector<Scalar>& box) {
  return propagate_affine(split_matrix(x), box);
}

template <typename Scalar>
IntervalVector<Scalar> operator+(const IntervalVector<Scalar>& a,
                                 const IntervalVector<Scalar>& b) {
  if (a.size() != b.size())
    throw invalid_input("interval sum: dimension mismatch");
  return IntervalVector<Scalar>(a.lower() + b.lower(), a.upper() + b.upper());
}

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> width(const IntervalVector<Scalar>& box) {
  return box.upper() - box.lower();
}

}  // namespace iobs
