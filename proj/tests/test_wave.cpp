#include "finola/wave.hpp"

#include <doctest.h>

#include <cmath>
#include <complex>

#include "support.hpp"

using namespace finola;
using namespace finola::testing;

TEST_CASE("identical direction matrices give unit latent speeds") {
  auto rng = make_rng(61);
  FinolaParams p = random_params(rng, 6);
  p.B = p.A;
  const WaveBasis basis = build_wave_basis(p);
  for (int k = 0; k < 6; ++k)
    CHECK(std::abs(basis.eig.values[k] - std::complex<double>(1.0, 0.0)) < 1e-10);
}

TEST_CASE("diagonal direction matrices give the speed ratios directly") {
  FinolaParams p;
  p.A = RealMatrix::Zero(2, 2);
  p.B = RealMatrix::Zero(2, 2);
  p.A(0, 0) = 6.0;
  p.A(1, 1) = 2.0;
  p.B(0, 0) = 2.0;
  p.B(1, 1) = 1.0;
  p.A_minus = p.A;
  p.B_minus = p.B;
  p.epsilon = 1e-6;
  const WaveBasis basis = build_wave_basis(p);
  CHECK(basis.eig.values[0].real() == doctest::Approx(3.0));
  CHECK(basis.eig.values[1].real() == doctest::Approx(2.0));
  CHECK((basis.Q * p.B - p.A).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("horizontal steps relate to vertical steps through Q") {
  auto rng = make_rng(62);
  const FinolaParams p = random_params(rng, 8);
  const WaveBasis basis = build_wave_basis(p);
  const GridPos pos{0, 3};
  const LatentSet q = single_latent(rng, 8, pos);
  const FeatureMap z = propagate<double>(q, p, 10, 8, Ordering::h_first);

  double worst = 0.0;
  const auto mask = exact_step_cells(10, 8, pos, Ordering::h_first);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x + 1 < 10; ++x) {
      if (y + 1 >= 8 || !mask[static_cast<size_t>(z.index(x, y))]) continue;
      const RealVector dx = z.at(x + 1, y) - z.at(x, y);
      const RealVector dy = z.at(x, y + 1) - z.at(x, y);
      worst = std::max(worst, (dx - basis.Q * dy).cwiseAbs().maxCoeff());
    }
  }
  CHECK(worst < 1e-8);
}

TEST_CASE("projection round trips through its inverse") {
  auto rng = make_rng(63);
  const FinolaParams p = random_params(rng, 8);
  const WaveBasis basis = build_wave_basis(p);
  const LatentSet q = single_latent(rng, 8, {4, 4});
  const FeatureMap z = propagate<double>(q, p, 9, 9, Ordering::averaged);
  const FeatureMap back = unproject_map(project_map(z, basis), basis);
  CHECK((back.data - z.data).cwiseAbs().maxCoeff() / z.data.cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("conjugate eigenvalue pairs carry conjugate latent channels") {
  auto rng = make_rng(64);
  const FinolaParams p = random_params(rng, 8);
  const WaveBasis basis = build_wave_basis(p);
  const LatentSet q = single_latent(rng, 8, {2, 2});
  const FeatureMap z = propagate<double>(q, p, 6, 6, Ordering::h_first);
  const ComplexFeatureMap zeta = project_map(z, basis);

  const double scale = zeta.data.cwiseAbs().maxCoeff();
  for (int k = 0; k < 8; ++k) {
    if (std::abs(basis.eig.values[k].imag()) < 1e-10) continue;
    int partner = -1;
    for (int j = 0; j < 8; ++j)
      if (j != k && std::abs(basis.eig.values[j] - std::conj(basis.eig.values[k])) < 1e-8)
        partner = j;
    REQUIRE(partner >= 0);
    const double gap =
        (zeta.data.row(partner) - zeta.data.row(k).conjugate()).cwiseAbs().maxCoeff();
    CHECK(gap / scale < 1e-8);
  }
}

TEST_CASE("transformed normalization reduces to channel normalization") {
  auto rng = make_rng(65);
  const FinolaParams p = random_params(rng, 8);
  const WaveBasis basis = build_wave_basis(p);

  for (int trial = 0; trial < 5; ++trial) {
    const RealVector phi = random_vector(rng, 8, 2.0);
    const ComplexVector psi = complex_matvec(basis.V_inv, phi.cast<std::complex<double>>());
    const ComplexVector lhs = transformed_normalize(psi, basis, p.epsilon);
    const RealVector rhs = normalize_channels<double>(phi, p.epsilon);
    CHECK((lhs - rhs.cast<std::complex<double>>()).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("the quadratic form scales like C times the centered spread") {
  auto rng = make_rng(66);
  const int c = 8;
  const FinolaParams p = random_params(rng, c);
  const WaveBasis basis = build_wave_basis(p);
  const RealVector phi = random_vector(rng, c, 2.0);
  const ComplexVector psi = complex_matvec(basis.V_inv, phi.cast<std::complex<double>>());

  // With eps = 0 the output of the surrogate equals sqrt(C) times the
  // unit-norm centered direction of phi.
  const ComplexVector n = transformed_normalize(psi, basis, 0.0);
  const RealVector centered = (phi.array() - phi.mean()).matrix();
  const RealVector unit = centered / centered.norm();
  CHECK((n / std::sqrt(double(c)) - unit.cast<std::complex<double>>()).cwiseAbs().maxCoeff() <
        1e-9);
}

TEST_CASE("transformed normalization rejects constant inputs") {
  auto rng = make_rng(67);
  const FinolaParams p = random_params(rng, 4);
  const WaveBasis basis = build_wave_basis(p);
  const RealVector flat = RealVector::Constant(4, 2.5);
  const ComplexVector psi = complex_matvec(basis.V_inv, flat.cast<std::complex<double>>());
  CHECK_THROWS_AS(transformed_normalize(psi, basis, 1e-6), DegenerateDenominatorError);
}

TEST_CASE("the projected recursion tracks the direct one") {
  auto rng = make_rng(68);
  for (int trial = 0; trial < 3; ++trial) {
    const FinolaParams p = random_params(rng, 8);
    const WaveBasis basis = build_wave_basis(p);
    const GridPos pos = default_origin(9, 9);
    const RealVector q = random_vector(rng, 8);
    LatentSet set;
    set.vectors.push_back(q);
    set.positions.push_back(pos);

    for (Ordering ord : {Ordering::h_first, Ordering::v_first, Ordering::averaged}) {
      const FeatureMap direct = propagate<double>(set, p, 9, 9, ord);
      const ComplexFeatureMap projected = propagate_projected(q, pos, basis, p, 9, 9, ord);
      const ComplexFeatureMap reference = project_map(direct, basis);
      const double rel = (projected.data - reference.data).cwiseAbs().maxCoeff() /
                         reference.data.cwiseAbs().maxCoeff();
      CHECK(rel < 1e-6);
    }
  }
}

TEST_CASE("exact-cell flags match the row-first generation pattern") {
  const auto mask = exact_step_cells(6, 5, {2, 1}, Ordering::h_first);
  REQUIRE(mask.size() == 30);
  auto at = [&](int x, int y) { return mask[static_cast<size_t>(y * 6 + x)] != 0; };
  CHECK(at(2, 1));
  CHECK(at(4, 1));
  CHECK_FALSE(at(1, 1));   // left of the seed: the x+1 neighbour is a left-step source
  CHECK_FALSE(at(5, 1));   // no x+1 neighbour
  CHECK_FALSE(at(3, 0));   // above the seed row: vertical neighbour is an up step
  CHECK_FALSE(at(3, 4));   // no y+1 neighbour
  CHECK_FALSE(at(3, 2));   // off the seed row entirely
  int flagged = 0;
  for (auto b : mask) flagged += b ? 1 : 0;
  CHECK(flagged == 3);  // x in {2,3,4} on the seed row
}

TEST_CASE("residuals vanish on exact cells and are reported everywhere") {
  auto rng = make_rng(69);
  const FinolaParams p = random_params(rng, 8);
  const WaveBasis basis = build_wave_basis(p);
  const GridPos pos{1, 2};
  const LatentSet q = single_latent(rng, 8, pos);
  const FeatureMap z = propagate<double>(q, p, 8, 7, Ordering::h_first);
  const ComplexFeatureMap zeta = project_map(z, basis);
  const auto mask = exact_step_cells(8, 7, pos, Ordering::h_first);

  const WaveResidualReport report = wave_residual(zeta, basis.eig.values, mask);
  CHECK(report.count_exact > 0);
  CHECK(report.count_all == 7 * 6 * 8);
  CHECK(report.count_all > report.count_exact);
  CHECK(report.max_exact < 1e-8);
  CHECK(report.mean_exact <= report.max_exact);
  CHECK(report.max_all >= report.max_exact);
  CHECK(report.mean_all <= report.max_all);
}

TEST_CASE("shared-speed parameterizations are recovered from the spectrum") {
  auto rng = make_rng(70);
  ConstrainedParams c;
  c.P = random_matrix(rng, 6, 6) + 2.0 * RealMatrix::Identity(6, 6);
  c.alpha = random_vector(rng, 6, 1.0);
  c.beta = RealVector::Constant(6, 1.0) + 0.5 * random_vector(rng, 6, 1.0);
  c.mode = SpeedMode::real_speed;

  const FinolaParams p = materialize_constrained(c);
  CHECK((p.A - p.A_minus).norm() == 0.0);
  const WaveBasis basis = build_wave_basis(p);

  std::vector<double> expected;
  for (int k = 0; k < 6; ++k) expected.push_back(c.alpha[k] / c.beta[k]);
  // Spectra come back ordered by modulus, largest first.
  std::sort(expected.begin(), expected.end(),
            [](double a, double b) { return std::abs(a) != std::abs(b) ? std::abs(a) > std::abs(b) : a > b; });
  for (int k = 0; k < 6; ++k) {
    CHECK(std::abs(basis.eig.values[k].imag()) < 1e-8);
    CHECK(basis.eig.values[k].real() == doctest::Approx(expected[static_cast<size_t>(k)]).epsilon(1e-8));
  }
}

TEST_CASE("the shared-matrix mode pins every speed to one") {
  auto rng = make_rng(71);
  ConstrainedParams c;
  c.P = random_matrix(rng, 8, 8);
  c.mode = SpeedMode::all_one;
  const FinolaParams p = materialize_constrained(c);
  CHECK((p.A - p.B).norm() == 0.0);
  const WaveBasis basis = build_wave_basis(p);
  for (int k = 0; k < 8; ++k)
    CHECK(std::abs(basis.eig.values[k] - std::complex<double>(1.0, 0.0)) < 1e-10);
}

TEST_CASE("invalid constrained parameterizations are rejected") {
  auto rng = make_rng(72);
  ConstrainedParams c;
  c.P = random_matrix(rng, 4, 4);
  c.alpha = random_vector(rng, 4);
  c.beta = random_vector(rng, 4);
  c.beta[2] = 0.0;
  c.mode = SpeedMode::real_speed;
  CHECK_THROWS_AS(materialize_constrained(c), ZeroBetaError);

  c.beta[2] = 1.0;
  c.mode = SpeedMode::complex_free;
  CHECK_THROWS_AS(materialize_constrained(c), ConfigError);
}
