#pragma once

#include <Eigen/Dense>

#include <array>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace finola {

using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

template <class Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <class Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Error taxonomy shared by the whole library. The category drives the CLI
/// exit code; the leaf classes carry the contract names used in the docs.
enum class ErrorKind {
  Usage,
  Data,
  Numerical,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

struct SingularError : Error {
  explicit SingularError(const std::string& what) : Error(ErrorKind::Numerical, what) {}
};
struct DefectiveError : Error {
  explicit DefectiveError(const std::string& what) : Error(ErrorKind::Numerical, what) {}
};
struct NoConvergenceError : Error {
  explicit NoConvergenceError(const std::string& what) : Error(ErrorKind::Numerical, what) {}
};
struct DegenerateDenominatorError : Error {
  explicit DegenerateDenominatorError(const std::string& what) : Error(ErrorKind::Numerical, what) {}
};
struct ZeroBetaError : Error {
  explicit ZeroBetaError(const std::string& what) : Error(ErrorKind::Numerical, what) {}
};
struct ShapeMismatchError : Error {
  explicit ShapeMismatchError(const std::string& what) : Error(ErrorKind::Data, what) {}
};
struct PositionOutOfRangeError : Error {
  explicit PositionOutOfRangeError(const std::string& what) : Error(ErrorKind::Data, what) {}
};
struct EmptyMaskError : Error {
  explicit EmptyMaskError(const std::string& what) : Error(ErrorKind::Data, what) {}
};
struct GraphNotEvaluatedError : Error {
  explicit GraphNotEvaluatedError(const std::string& what) : Error(ErrorKind::Data, what) {}
};
struct MalformedHeaderError : Error {
  explicit MalformedHeaderError(const std::string& what) : Error(ErrorKind::Data, what) {}
};
struct TruncatedPayloadError : Error {
  explicit TruncatedPayloadError(const std::string& what) : Error(ErrorKind::Data, what) {}
};
struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

struct GridPos {
  int x = 0;
  int y = 0;
};

/// A W×H grid of C-channel feature vectors. Storage is channel-minor
/// row-major: column j of `data` is the channel vector of cell
/// (x, y) = (j % W, j / W), and columns are laid out contiguously.
template <class Scalar>
struct FeatureMapT {
  int width = 0;
  int height = 0;
  int channels = 0;
  Matrix<Scalar> data;  // channels × (width·height)

  FeatureMapT() = default;
  FeatureMapT(int w, int h, int c)
      : width(w), height(h), channels(c), data(Matrix<Scalar>::Zero(c, static_cast<Eigen::Index>(w) * h)) {}

  int cells() const { return width * height; }
  int index(int x, int y) const { return y * width + x; }
  auto at(int x, int y) { return data.col(index(x, y)); }
  auto at(int x, int y) const { return data.col(index(x, y)); }
  bool contains(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }
};

using FeatureMap = FeatureMapT<double>;
using ComplexFeatureMap = FeatureMapT<std::complex<double>>;

template <class Scalar>
constexpr Scalar default_epsilon() {
  if constexpr (sizeof(Scalar) <= 4)
    return Scalar(1e-6);
  else
    return Scalar(1e-12);
}

/// The four direction matrices of the first-order norm+linear recursion:
/// A steps right, B steps down, A_minus left, B_minus up. `epsilon` is
/// added to the channel standard deviation before dividing.
template <class Scalar>
struct FinolaParamsT {
  Matrix<Scalar> A, B, A_minus, B_minus;
  Scalar epsilon = default_epsilon<Scalar>();

  int channels() const { return static_cast<int>(A.rows()); }
};

using FinolaParams = FinolaParamsT<double>;

/// Per-position statistics over the C channels of one cell.
template <class Scalar>
struct NormContextT {
  Scalar mean = 0;
  Scalar std = 0;
};

using NormContext = NormContextT<double>;

/// M initial-condition vectors with their grid placements.
template <class Scalar>
struct LatentSetT {
  std::vector<Vector<Scalar>> vectors;
  std::vector<GridPos> positions;

  int paths() const { return static_cast<int>(vectors.size()); }
};

using LatentSet = LatentSetT<double>;

inline GridPos default_origin(int width, int height) { return {width / 2, height / 2}; }

/// Quadrant-center placements used when scattering M=4 initial conditions.
inline std::array<GridPos, 4> quadrant_centers(int width, int height) {
  return {GridPos{width / 4, height / 4}, GridPos{3 * width / 4, height / 4},
          GridPos{width / 4, 3 * height / 4}, GridPos{3 * width / 4, 3 * height / 4}};
}

}  // namespace finola
