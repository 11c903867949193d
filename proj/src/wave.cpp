#include "finola/wave.hpp"

#include <cmath>
#include <complex>
#include <string>

namespace finola {

using Complex = std::complex<double>;

WaveBasis build_wave_basis(const FinolaParams& p) {
  WaveBasis basis;
  basis.Q = p.A * invert(p.B);
  basis.eig = eig_real_nonsymmetric(basis.Q);
  basis.V_inv = complex_invert(basis.eig.vectors);
  const ComplexMatrix a = p.A.cast<Complex>();
  const ComplexMatrix b = p.B.cast<Complex>();
  basis.H_A = basis.V_inv * a;
  basis.H_B = basis.V_inv * b;
  basis.H_A_minus = basis.V_inv * p.A_minus.cast<Complex>();
  basis.H_B_minus = basis.V_inv * p.B_minus.cast<Complex>();
  return basis;
}

ComplexFeatureMap project_map(const FeatureMap& z, const WaveBasis& basis) {
  if (z.channels != basis.channels())
    throw ShapeMismatchError("project_map: map has " + std::to_string(z.channels) +
                             " channels, basis " + std::to_string(basis.channels()));
  ComplexFeatureMap zeta(z.width, z.height, z.channels);
  zeta.data = basis.V_inv * z.data.cast<Complex>();
  return zeta;
}

FeatureMap unproject_map(const ComplexFeatureMap& zeta, const WaveBasis& basis) {
  if (zeta.channels != basis.channels())
    throw ShapeMismatchError("unproject_map: map has " + std::to_string(zeta.channels) +
                             " channels, basis " + std::to_string(basis.channels()));
  FeatureMap z(zeta.width, zeta.height, zeta.channels);
  z.data = (basis.eig.vectors * zeta.data).real();
  return z;
}

ComplexVector transformed_normalize(const ComplexVector& psi, const WaveBasis& basis,
                                    double epsilon) {
  const int c = basis.channels();
  if (psi.size() != c)
    throw ShapeMismatchError("transformed_normalize: vector of " + std::to_string(psi.size()) +
                             " vs basis of " + std::to_string(c));
  const ComplexVector u = basis.eig.vectors * psi;
  const Complex total = u.sum();
  // Plain transpose, not conjugate: uᵀ(CI−J)u = C·Σuₖ² − (Σuₖ)².
  const Complex sum_sq = (u.array() * u.array()).sum();
  const Complex form = double(c) * sum_sq - total * total;
  if (std::abs(form) <= epsilon * epsilon)
    throw DegenerateDenominatorError("transformed_normalize: quadratic form " +
                                     std::to_string(std::abs(form)) +
                                     " vanished (constant source vector)");
  const Complex denom = std::sqrt(form) + double(c) * epsilon;
  return (double(c) * u.array() - total).matrix() / denom;
}

namespace {

const ComplexMatrix& transformed_direction(const WaveBasis& basis, StepDir dir) {
  switch (dir) {
    case StepDir::right: return basis.H_A;
    case StepDir::left: return basis.H_A_minus;
    case StepDir::down: return basis.H_B;
    default: return basis.H_B_minus;
  }
}

ComplexVector projected_step(const ComplexVector& psi, StepDir dir, const WaveBasis& basis,
                             double epsilon) {
  return psi + transformed_direction(basis, dir) * transformed_normalize(psi, basis, epsilon);
}

void fill_row_projected(ComplexFeatureMap& map, int y, int x0, const WaveBasis& basis,
                        double epsilon) {
  for (int x = x0; x + 1 < map.width; ++x)
    map.at(x + 1, y) = projected_step(map.at(x, y), StepDir::right, basis, epsilon);
  for (int x = x0; x >= 1; --x)
    map.at(x - 1, y) = projected_step(map.at(x, y), StepDir::left, basis, epsilon);
}

void fill_column_projected(ComplexFeatureMap& map, int x, int y0, const WaveBasis& basis,
                           double epsilon) {
  for (int y = y0; y + 1 < map.height; ++y)
    map.at(x, y + 1) = projected_step(map.at(x, y), StepDir::down, basis, epsilon);
  for (int y = y0; y >= 1; --y)
    map.at(x, y - 1) = projected_step(map.at(x, y), StepDir::up, basis, epsilon);
}

ComplexFeatureMap propagate_projected_single(const RealVector& q, GridPos pos,
                                             const WaveBasis& basis, double epsilon, int width,
                                             int height, Ordering ordering) {
  detail::check_position<double>(pos, width, height);
  if (ordering == Ordering::averaged) {
    ComplexFeatureMap h =
        propagate_projected_single(q, pos, basis, epsilon, width, height, Ordering::h_first);
    const ComplexFeatureMap v =
        propagate_projected_single(q, pos, basis, epsilon, width, height, Ordering::v_first);
    h.data = 0.5 * (h.data + v.data);
    return h;
  }
  ComplexFeatureMap map(width, height, basis.channels());
  map.at(pos.x, pos.y) = basis.V_inv * q.cast<Complex>();
  if (ordering == Ordering::h_first) {
    fill_row_projected(map, pos.y, pos.x, basis, epsilon);
    for (int x = 0; x < width; ++x) fill_column_projected(map, x, pos.y, basis, epsilon);
  } else {
    fill_column_projected(map, pos.x, pos.y, basis, epsilon);
    for (int y = 0; y < height; ++y) fill_row_projected(map, y, pos.x, basis, epsilon);
  }
  return map;
}

}  // namespace

ComplexFeatureMap propagate_projected(const RealVector& q, GridPos pos, const WaveBasis& basis,
                                      const FinolaParams& p, int width, int height,
                                      Ordering ordering) {
  if (q.size() != basis.channels())
    throw ShapeMismatchError("propagate_projected: latent of " + std::to_string(q.size()) +
                             " vs basis of " + std::to_string(basis.channels()));
  return propagate_projected_single(q, pos, basis, p.epsilon, width, height, ordering);
}

std::vector<std::uint8_t> exact_step_cells(int width, int height, GridPos origin,
                                           Ordering ordering) {
  std::vector<std::uint8_t> mask(static_cast<size_t>(width) * height, 0);
  if (ordering == Ordering::h_first) {
    // Along the seed row, Δx is a right generation step and Δy the first
    // downward column step; both exist only below the last row.
    if (origin.y + 1 < height)
      for (int x = origin.x; x + 1 < width; ++x)
        mask[static_cast<size_t>(origin.y) * width + x] = 1;
  } else if (ordering == Ordering::v_first) {
    if (origin.x + 1 < width)
      for (int y = origin.y; y + 1 < height; ++y)
        mask[static_cast<size_t>(y) * width + origin.x] = 1;
  }
  return mask;
}

WaveResidualReport wave_residual(const ComplexFeatureMap& zeta, const ComplexVector& lambda,
                                 const std::vector<std::uint8_t>& exact_mask) {
  if (lambda.size() != zeta.channels)
    throw ShapeMismatchError("wave_residual: " + std::to_string(lambda.size()) +
                             " speeds vs map of " + std::to_string(zeta.channels) + " channels");
  if (!exact_mask.empty() && exact_mask.size() != static_cast<size_t>(zeta.cells()))
    throw ShapeMismatchError("wave_residual: mask size " + std::to_string(exact_mask.size()) +
                             " vs " + std::to_string(zeta.cells()) + " cells");
  WaveResidualReport report;
  double sum_exact = 0.0;
  double sum_all = 0.0;
  for (int y = 0; y + 1 < zeta.height; ++y) {
    for (int x = 0; x + 1 < zeta.width; ++x) {
      const bool exact =
          !exact_mask.empty() && exact_mask[static_cast<size_t>(y) * zeta.width + x] != 0;
      for (int k = 0; k < zeta.channels; ++k) {
        const Complex dx = zeta.at(x + 1, y)[k] - zeta.at(x, y)[k];
        const Complex dy = zeta.at(x, y + 1)[k] - zeta.at(x, y)[k];
        const double r = std::abs(dx - lambda[k] * dy);
        report.max_all = std::max(report.max_all, r);
        sum_all += r;
        ++report.count_all;
        if (exact) {
          report.max_exact = std::max(report.max_exact, r);
          sum_exact += r;
          ++report.count_exact;
        }
      }
    }
  }
  if (report.count_all > 0) report.mean_all = sum_all / double(report.count_all);
  if (report.count_exact > 0) report.mean_exact = sum_exact / double(report.count_exact);
  return report;
}

FinolaParams materialize_constrained(const ConstrainedParams& c) {
  const int n = static_cast<int>(c.P.rows());
  if (c.P.rows() != c.P.cols()) throw ShapeMismatchError("materialize_constrained: P not square");
  FinolaParams p;
  switch (c.mode) {
    case SpeedMode::real_speed: {
      if (c.alpha.size() != n || c.beta.size() != n)
        throw ShapeMismatchError("materialize_constrained: alpha/beta length mismatch");
      for (int k = 0; k < n; ++k)
        if (c.beta[k] == 0.0)
          throw ZeroBetaError("materialize_constrained: beta[" + std::to_string(k) + "] is zero");
      p.A = c.P * c.alpha.asDiagonal();
      p.B = c.P * c.beta.asDiagonal();
      break;
    }
    case SpeedMode::all_one:
      p.A = c.P;
      p.B = c.P;
      break;
    case SpeedMode::complex_free:
      throw ConfigError(
          "materialize_constrained: complex_free imposes no factorization; supply direction "
          "matrices directly");
  }
  // The factored modes define only the forward matrices; reverse directions
  // mirror them so all four share the constrained speeds.
  p.A_minus = p.A;
  p.B_minus = p.B;
  return p;
}

}  // namespace finola
