#pragma once

#include "finola/core.hpp"
#include "finola/linalg.hpp"
#include "finola/types.hpp"

#include <cstdint>
#include <vector>

namespace finola {

/// Diagonalization of Q = AB⁻¹ together with the change-of-basis matrices the
/// transformed recursion needs. eig.values are the per-channel latent speeds
/// λₖ; H_A = V⁻¹A, H_B = V⁻¹B, and the _minus variants cover the left/up
/// direction matrices.
struct WaveBasis {
  RealMatrix Q;
  EigenDecomposition eig;
  ComplexMatrix V_inv;
  ComplexMatrix H_A, H_B, H_A_minus, H_B_minus;

  int channels() const { return static_cast<int>(Q.rows()); }
};

enum class SpeedMode { complex_free, real_speed, all_one };

/// Factored parameterizations that constrain the latent speeds: real_speed
/// builds A = P·diag(α), B = P·diag(β) so λₖ = αₖ/βₖ is real; all_one shares
/// P across every direction so all speeds are exactly 1.
struct ConstrainedParams {
  RealMatrix P;
  RealVector alpha;
  RealVector beta;
  SpeedMode mode = SpeedMode::real_speed;
};

struct WaveResidualReport {
  double max_exact = 0.0;
  double mean_exact = 0.0;
  long count_exact = 0;
  double max_all = 0.0;
  double mean_all = 0.0;
  long count_all = 0;
};

WaveBasis build_wave_basis(const FinolaParams& p);

/// Per-position change of basis ζ(x,y) = V⁻¹ z(x,y).
ComplexFeatureMap project_map(const FeatureMap& z, const WaveBasis& basis);

/// Inverse of project_map; the imaginary residue (roundoff only for maps that
/// came from real data) is dropped.
FeatureMap unproject_map(const ComplexFeatureMap& zeta, const WaveBasis& basis);

/// ζ-space counterpart of channel normalization:
/// (CI − J)Vψ / (√(ψᵀVᵀ(CI−J)Vψ) + C·ε) with J the all-ones matrix and the
/// quadratic form taken with plain transpose. For ψ = V⁻¹φ with real φ this
/// equals normalize_channels(φ), which is what the recursion consumes.
/// Throws DegenerateDenominatorError when |form| ≤ ε² (constant φ).
ComplexVector transformed_normalize(const ComplexVector& psi, const WaveBasis& basis,
                                    double epsilon = 0.0);

/// Runs the whole recursion in ζ-space: ψ ← ψ + H_dir · transformed_normalize(ψ).
/// Equals project_map(propagate(q at pos, ...)) elementwise.
ComplexFeatureMap propagate_projected(const RealVector& q, GridPos pos, const WaveBasis& basis,
                                      const FinolaParams& p, int width, int height,
                                      Ordering ordering = Ordering::averaged);

/// Marks the cells of a single-ordering map where Δx and Δy are both
/// generation steps, so Δxζ = ΛΔyζ holds to roundoff.
std::vector<std::uint8_t> exact_step_cells(int width, int height, GridPos origin,
                                           Ordering ordering);

/// Max/mean of |Δxζₖ − λₖΔyζₖ| over (a) the flagged exact cells and (b) every
/// cell where both forward differences exist.
WaveResidualReport wave_residual(const ComplexFeatureMap& zeta, const ComplexVector& lambda,
                                 const std::vector<std::uint8_t>& exact_mask);

FinolaParams materialize_constrained(const ConstrainedParams& c);

}  // namespace finola
