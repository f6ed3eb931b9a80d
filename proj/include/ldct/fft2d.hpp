#pragma once

#include <Eigen/Core>
#include <unsupported/Eigen/FFT>

#include <complex>

namespace ldct {

using ArrayXXd = Eigen::ArrayXXd;
using ArrayXXcd = Eigen::ArrayXX<std::complex<double>>;

/// 2-D FFT helpers built on Eigen's 1-D FFT: transform columns, then rows.
/// Plans are cached inside the Fft2D object, so reuse one instance when
/// transforming many same-sized arrays.
class Fft2D {
public:
  ArrayXXcd forward(const ArrayXXd& in) {
    ArrayXXcd tmp(in.rows(), in.cols());
    Eigen::VectorXcd col(in.rows());
    for (Eigen::Index j = 0; j < in.cols(); ++j) {
      Eigen::VectorXd v = in.col(j).matrix();
      fft_.fwd(col, v);
      tmp.col(j) = col.array();
    }
    return transform_rows(tmp, /*inverse=*/false);
  }

  ArrayXXcd forward(const ArrayXXcd& in) {
    ArrayXXcd tmp(in.rows(), in.cols());
    Eigen::VectorXcd col(in.rows());
    for (Eigen::Index j = 0; j < in.cols(); ++j) {
      Eigen::VectorXcd v = in.col(j).matrix();
      fft_.fwd(col, v);
      tmp.col(j) = col.array();
    }
    return transform_rows(tmp, /*inverse=*/false);
  }

  ArrayXXcd inverse(const ArrayXXcd& in) {
    ArrayXXcd tmp(in.rows(), in.cols());
    Eigen::VectorXcd col(in.rows());
    for (Eigen::Index j = 0; j < in.cols(); ++j) {
      Eigen::VectorXcd v = in.col(j).matrix();
      fft_.inv(col, v);
      tmp.col(j) = col.array();
    }
    return transform_rows(tmp, /*inverse=*/true);
  }

  /// Inverse FFT of a Hermitian-symmetric spectrum; imaginary residue is
  /// FFT roundoff and gets dropped.
  ArrayXXd inverse_real(const ArrayXXcd& in) { return inverse(in).real(); }

private:
  ArrayXXcd transform_rows(const ArrayXXcd& in, bool inverse) {
    ArrayXXcd out(in.rows(), in.cols());
    Eigen::VectorXcd buf(in.cols());
    Eigen::VectorXcd res(in.cols());
    for (Eigen::Index i = 0; i < in.rows(); ++i) {
      buf = in.row(i).matrix().transpose();
      if (inverse)
        fft_.inv(res, buf);
      else
        fft_.fwd(res, buf);
      out.row(i) = res.array().transpose();
    }
    return out;
  }

  Eigen::FFT<double> fft_;
};

}  // namespace ldct
