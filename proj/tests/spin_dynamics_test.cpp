// Copyright 2026 The qpemag Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "qpemag/rng.hpp"
#include "qpemag/spin_dynamics.hpp"
#include "qpemag/validation.hpp"

namespace qpemag {
namespace {

constexpr double kPi = std::numbers::pi;
const Complex I(0.0, 1.0);

void expect_matrix_near(const DensityMatrix &a, const Matrix2c &b, double tol) {
    for (int r = 0; r < 2; ++r) {
        for (int c = 0; c < 2; ++c) {
            EXPECT_NEAR(std::abs(a(r, c) - b(r, c)), 0.0, tol) << "element (" << r << "," << c << ")";
        }
    }
}

Matrix2c rho0_matrix() {
    Matrix2c m;
    m << 0.5, 0.5 * I, -0.5 * I, 0.5;
    return m;
}

TEST(DecayTime, InfiniteHasZeroRate) {
    EXPECT_EQ(DecayTime::infinite().rate(), 0.0);
    EXPECT_EQ(DecayTime::infinite().survival(1e300), 1.0);
    EXPECT_TRUE(DecayTime::seconds(INFINITY).is_infinite());
    EXPECT_THROW(DecayTime::seconds(0.0), std::invalid_argument);
    EXPECT_THROW(DecayTime::seconds(-1.0), std::invalid_argument);
    EXPECT_DOUBLE_EQ(DecayTime::seconds(2.0).survival(2.0), std::exp(-1.0));
}

TEST(InitialSuperposition, MatchesPureEquatorialState) {
    const auto rho = initial_superposition();
    expect_matrix_near(rho, rho0_matrix(), 0.0);
    EXPECT_NEAR(std::abs(rho.trace() - 1.0), 0.0, 1e-15);
    Eigen::SelfAdjointEigenSolver<Matrix2c> eig(rho.matrix());
    EXPECT_NEAR(eig.eigenvalues()(0), 0.0, 1e-15);
    EXPECT_NEAR(eig.eigenvalues()(1), 1.0, 1e-15);
}

TEST(Pi2Pulse, XPulseOnGroundGivesRho0) {
    expect_matrix_near(apply_pi2_pulse(DensityMatrix::ground(), 0.0), rho0_matrix(), 1e-15);
}

TEST(Pi2Pulse, TwoXPulsesMakeAPiPulse) {
    const auto rho = apply_pi2_pulse(apply_pi2_pulse(DensityMatrix::ground(), 0.0), 0.0);
    EXPECT_NEAR(rho.population(1), 1.0, 1e-15);
    EXPECT_NEAR(rho.population(0), 0.0, 1e-15);
}

TEST(Pi2Pulse, ReadoutAxisPiReturnsRho0ToGround) {
    const auto rho = apply_pi2_pulse(initial_superposition(), kPi);
    EXPECT_NEAR(rho.population(0), 1.0, 1e-15);
}

TEST(Pi2Pulse, PreservesDensityMatrixInvariants) {
    RandomStream rng(11, 0);
    for (int i = 0; i < 50; ++i) {
        // Random mixed state from a random Bloch vector inside the ball.
        const double r = rng.next_uniform();
        const double th = std::acos(2.0 * rng.next_uniform() - 1.0), ph = kTwoPi * rng.next_uniform();
        const double x = r * std::sin(th) * std::cos(ph), y = r * std::sin(th) * std::sin(ph), z = r * std::cos(th);
        Matrix2c m;
        m << 0.5 * (1 + z), 0.5 * Complex(x, -y), 0.5 * Complex(x, y), 0.5 * (1 - z);
        const auto out = apply_pi2_pulse(DensityMatrix(m), kTwoPi * rng.next_uniform());
        const auto d = out.defects();
        EXPECT_LE(d.hermiticity, 1e-12);
        EXPECT_LE(d.trace, 1e-12);
        EXPECT_GE(d.min_eigenvalue, -1e-12);
    }
}

TEST(EvolveAnalytic, ZeroTimeIsRho0) {
    SpinEnvironment env{1.0, 0.7, DecayTime::seconds(3.0), DecayTime::seconds(2.0)};
    expect_matrix_near(evolve_analytic(env, 0.0), rho0_matrix(), 0.0);
}

TEST(EvolveAnalytic, HalfTurnOfPhase) {
    SpinEnvironment env;
    env.gyromagnetic_ratio = 1.0;
    env.field = kPi / 2.0;  // 2 lambda B t = pi at t = 1
    const auto rho = evolve_analytic(env, 1.0);
    Matrix2c expected;
    expected << 0.5, -0.5 * I, 0.5 * I, 0.5;
    expect_matrix_near(rho, expected, 1e-15);
}

TEST(EvolveAnalytic, OffDiagonalDecaysWithT2) {
    SpinEnvironment env{0.8, 1.3, DecayTime::seconds(5.0), DecayTime::seconds(2.0)};
    for (double t : {0.1, 1.0, 2.0, 7.5}) {
        const auto rho = evolve_analytic(env, t);
        EXPECT_NEAR(std::abs(rho(0, 1)), 0.5 * std::exp(-t / 2.0), 1e-15);
        EXPECT_NEAR(rho.population(1), 0.5 * std::exp(-t / 5.0), 1e-15);
    }
}

TEST(EvolveAnalytic, NegativeTimeThrows) {
    EXPECT_THROW(evolve_analytic(SpinEnvironment{}, -1e-9), std::invalid_argument);
}

TEST(IntegrateMaster, ZeroDurationReturnsInput) {
    SpinEnvironment env{1.0, 0.3, DecayTime::seconds(5.0), DecayTime::seconds(2.0)};
    expect_matrix_near(integrate_master(initial_superposition(), env, 0.0, 0.1), rho0_matrix(), 0.0);
}

TEST(IntegrateMaster, FreeStateIsStationaryAtZeroField) {
    const auto rho = integrate_master(initial_superposition(), SpinEnvironment{}, 3.0, 0.01);
    expect_matrix_near(rho, rho0_matrix(), 1e-15);
}

TEST(IntegrateMaster, RejectsBadSteps) {
    SpinEnvironment env;
    EXPECT_THROW(integrate_master(initial_superposition(), env, 1.0, 0.0), std::invalid_argument);
    EXPECT_THROW(integrate_master(initial_superposition(), env, 1.0, -0.1), std::invalid_argument);
    EXPECT_THROW(integrate_master(initial_superposition(), env, 1.0, 2.0), std::invalid_argument);
    EXPECT_THROW(integrate_master(initial_superposition(), env, -1.0, 0.1), std::invalid_argument);
}

TEST(IntegrateMaster, ReferencePointMatchesAnalytic) {
    SpinEnvironment env{1.0, 0.3, DecayTime::seconds(5.0), DecayTime::seconds(2.0)};
    const auto numeric = integrate_master(initial_superposition(), env, 1.0, 1e-4);
    EXPECT_LT(max_elementwise_error(numeric, evolve_analytic(env, 1.0)), 1e-8);
}

TEST(IntegrateMaster, RandomPointsMatchAnalytic) {
    const auto r = validate_dynamics_oracle(2, 100);
    EXPECT_TRUE(r.passed) << "max error " << r.measured;
}

TEST(IntegrateMaster, FourthOrderConvergence) {
    const auto r = validate_dt_halving(3, 20);
    EXPECT_TRUE(r.passed) << "worst halving ratio " << r.measured;
}

TEST(IntegrateMaster, PreservesTraceAndPositivity) {
    for (const auto &p : random_dynamics_points(5, 20)) {
        const auto rho = integrate_master(initial_superposition(), p.env, 10.0 * p.t, 1e-2 * p.t);
        const auto d = rho.defects();
        EXPECT_LT(d.trace, 1e-10);
        EXPECT_LT(d.hermiticity, 1e-10);
        EXPECT_GE(d.min_eigenvalue, -1e-10);
    }
}

TEST(ClickProbability, ReferenceValues) {
    SpinEnvironment env;
    EXPECT_DOUBLE_EQ(click_probability(env, 1.0), 1.0);
    env.field = kPi / 4.0;  // 2 lambda B t = pi/2 at t = 1
    EXPECT_NEAR(click_probability(env, 1.0), 0.5, 1e-15);
    SpinEnvironment dephased{1.0, 0.0, DecayTime::infinite(), DecayTime::seconds(2.5)};
    EXPECT_NEAR(click_probability(dephased, 2.5), 0.68393972058572117, 1e-15);
}

TEST(ClickProbability, AgreesWithPulsePipeline) {
    for (const auto &p : random_dynamics_points(6, 200)) {
        const double direct = click_probability(p.env, p.t);
        EXPECT_GE(direct, 0.0);
        EXPECT_LE(direct, 1.0);
        EXPECT_NEAR(click_probability_pipeline(p.env, p.t), direct, 1e-12);
    }
}

TEST(ClickProbability, ControlPhaseShiftsTheFringe) {
    SpinEnvironment env{1.0, 0.4, DecayTime::infinite(), DecayTime::seconds(3.0)};
    const double t = 1.7, phi = env.precession_rate() * t;
    for (double ctrl : {0.3, 1.9, 4.4}) {
        const double expected = 0.5 * (1.0 + std::exp(-t / 3.0) * std::cos(phi - ctrl));
        EXPECT_NEAR(click_probability_pipeline(env, t, ctrl), expected, 1e-12);
    }
}

}  // namespace
}  // namespace qpemag
