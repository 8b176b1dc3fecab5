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

#pragma once

// Two-level probe spin under Ramsey interferometry.
//
// Basis: index 0 is |0>, index 1 is |1>. sigma_z = |0><0| - |1><1| and
// sigma_- = |0><1|. hbar = 1. Pulses are instantaneous.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <Eigen/Dense>

namespace qpemag {

using Complex = std::complex<double>;
using Matrix2c = Eigen::Matrix2cd;

/// A decay or dephasing time that may be infinite. Infinite times contribute a
/// rate of exactly zero, so the ideal limit never touches exp(-t/inf).
class DecayTime {
  public:
    static DecayTime infinite() {
        return DecayTime();
    }
    static DecayTime seconds(double t) {
        if (!(t > 0.0)) {
            throw std::invalid_argument("decay time must be positive");
        }
        if (std::isinf(t)) {
            return infinite();
        }
        return DecayTime(t);
    }

    bool is_infinite() const {
        return rate_ == 0.0;
    }
    double value() const {
        return is_infinite() ? std::numeric_limits<double>::infinity() : 1.0 / rate_;
    }
    /// 1/T, zero for an infinite time.
    double rate() const {
        return rate_;
    }
    /// exp(-t/T), exactly 1 for an infinite time.
    double survival(double t) const {
        return is_infinite() ? 1.0 : std::exp(-t * rate_);
    }

  private:
    DecayTime() = default;
    explicit DecayTime(double t) : rate_(1.0 / t) {
    }
    double rate_ = 0.0;
};

struct SpinEnvironment {
    double gyromagnetic_ratio = 1.0;  // rad s^-1 T^-1
    double field = 0.0;               // B_z, tesla
    DecayTime t1 = DecayTime::infinite();
    DecayTime t2 = DecayTime::infinite();

    /// Precession angular frequency 2 lambda_g B_z.
    double precession_rate() const {
        return 2.0 * gyromagnetic_ratio * field;
    }
};

/// 2x2 density matrix of the probe spin.
class DensityMatrix {
  public:
    DensityMatrix() : m_(Matrix2c::Zero()) {
        m_(0, 0) = 1.0;
    }
    explicit DensityMatrix(const Matrix2c &m) : m_(m) {
    }

    static DensityMatrix ground() {
        return DensityMatrix();
    }

    const Matrix2c &matrix() const {
        return m_;
    }
    Complex operator()(int r, int c) const {
        return m_(r, c);
    }
    Complex trace() const {
        return m_.trace();
    }
    double population(int level) const {
        return m_(level, level).real();
    }

    /// Largest violation of the Hermitian / unit-trace / PSD conditions.
    struct Defects {
        double hermiticity;
        double trace;
        double min_eigenvalue;
    };
    Defects defects() const {
        Defects d;
        d.hermiticity = std::max({std::abs(m_(1, 0) - std::conj(m_(0, 1))), std::abs(m_(0, 0).imag()),
                                  std::abs(m_(1, 1).imag())});
        d.trace = std::abs(m_.trace() - Complex(1.0, 0.0));
        Matrix2c herm = 0.5 * (m_ + m_.adjoint());
        Eigen::SelfAdjointEigenSolver<Matrix2c> solver(herm, Eigen::EigenvaluesOnly);
        d.min_eigenvalue = solver.eigenvalues().minCoeff();
        return d;
    }
    bool is_valid(double tol = 1e-12) const {
        auto d = defects();
        return d.hermiticity <= tol && d.trace <= tol && d.min_eigenvalue >= -tol;
    }

  private:
    Matrix2c m_;
};

/// rho0 = (|0><0| + i|0><1| - i|1><0| + |1><1|) / 2.
inline DensityMatrix initial_superposition() {
    Matrix2c m;
    m << Complex(0.5, 0.0), Complex(0.0, 0.5), Complex(0.0, -0.5), Complex(0.5, 0.0);
    return DensityMatrix(m);
}

/// Unitary of a pi/2 rotation about the equatorial axis (cos a, sin a, 0).
inline Matrix2c pi2_rotation(double axis_angle) {
    const double s = 1.0 / std::numbers::sqrt2;
    const Complex minus_i(0.0, -1.0);
    Matrix2c u;
    u << Complex(s, 0.0), s * minus_i * std::polar(1.0, -axis_angle), s * minus_i * std::polar(1.0, axis_angle),
        Complex(s, 0.0);
    return u;
}

/// Applies an instantaneous pi/2 pulse about the equatorial axis at
/// `axis_angle` from X. The readout pulse that maps rho0 back onto |0> sits at
/// axis_angle = pi; a passive control phase Phi is the readout axis pi + Phi.
inline DensityMatrix apply_pi2_pulse(const DensityMatrix &rho, double axis_angle) {
    Matrix2c u = pi2_rotation(axis_angle);
    return DensityMatrix(u * rho.matrix() * u.adjoint());
}

/// Closed-form free evolution of rho0 under precession, T1 decay and T2
/// dephasing. Valid only for the initial state rho0.
inline DensityMatrix evolve_analytic(const SpinEnvironment &env, double t) {
    if (!(t >= 0.0)) {
        throw std::invalid_argument("evolve_analytic: t must be non-negative");
    }
    const double excited = 0.5 * env.t1.survival(t);
    // Lambda = 2i lambda_g B_z - 1/T2
    const Complex lambda(-env.t2.rate(), env.precession_rate());
    Matrix2c m;
    m(0, 0) = 1.0 - excited;
    m(1, 1) = excited;
    m(0, 1) = Complex(0.0, 0.5) * std::exp(std::conj(lambda) * t);
    m(1, 0) = Complex(0.0, -0.5) * std::exp(lambda * t);
    return DensityMatrix(m);
}

namespace detail {

// L(A, B) = A B A^dag - {A^dag A, B} / 2
inline Matrix2c lindblad_dissipator(const Matrix2c &a, const Matrix2c &rho) {
    Matrix2c ada = a.adjoint() * a;
    return a * rho * a.adjoint() - 0.5 * (ada * rho + rho * ada);
}

inline Matrix2c master_rhs(const SpinEnvironment &env, const Matrix2c &rho) {
    Matrix2c sz = Matrix2c::Zero();
    sz(0, 0) = 1.0;
    sz(1, 1) = -1.0;
    Matrix2c sm = Matrix2c::Zero();
    sm(0, 1) = 1.0;
    const Matrix2c h = env.gyromagnetic_ratio * env.field * sz;
    const double dephasing = 0.5 * env.t2.rate() - 0.25 * env.t1.rate();
    Matrix2c out = Complex(0.0, -1.0) * (h * rho - rho * h);
    if (env.t1.rate() != 0.0) {
        out += env.t1.rate() * lindblad_dissipator(sm, rho);
    }
    if (dephasing != 0.0) {
        out += dephasing * lindblad_dissipator(sz, rho);
    }
    return out;
}

}  // namespace detail

/// Integrates the Lindblad master equation from `rho` for duration `t` with
/// classical RK4. The step count is ceil(t/dt); steps are uniform of size
/// t/steps <= dt. t = 0 returns rho unchanged.
inline DensityMatrix integrate_master(const DensityMatrix &rho, const SpinEnvironment &env, double t, double dt) {
    if (!(t >= 0.0)) {
        throw std::invalid_argument("integrate_master: t must be non-negative");
    }
    if (t == 0.0) {
        if (!(dt > 0.0)) {
            throw std::invalid_argument("integrate_master: dt must be positive");
        }
        return rho;
    }
    if (!(dt > 0.0) || dt > t) {
        throw std::invalid_argument("integrate_master: need 0 < dt <= t");
    }
    const auto steps = static_cast<long long>(std::ceil(t / dt - 1e-9));
    const double h = t / static_cast<double>(steps);
    Matrix2c y = rho.matrix();
    for (long long n = 0; n < steps; ++n) {
        Matrix2c k1 = detail::master_rhs(env, y);
        Matrix2c k2 = detail::master_rhs(env, y + 0.5 * h * k1);
        Matrix2c k3 = detail::master_rhs(env, y + 0.5 * h * k2);
        Matrix2c k4 = detail::master_rhs(env, y + h * k3);
        y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return DensityMatrix(y);
}

/// P(+1 | B_z) = [1 + exp(-t/T2) cos(2 lambda_g B_z t)] / 2.
inline double click_probability(const SpinEnvironment &env, double t) {
    if (!(t >= 0.0)) {
        throw std::invalid_argument("click_probability: t must be non-negative");
    }
    return 0.5 * (1.0 + env.t2.survival(t) * std::cos(env.precession_rate() * t));
}

/// The same probability obtained by running the Ramsey sequence on the density
/// matrix: evolve rho0 (T1 ignored), apply the readout pulse with control phase
/// `control_phase`, and read the |0> population.
inline double click_probability_pipeline(const SpinEnvironment &env, double t, double control_phase = 0.0) {
    SpinEnvironment no_decay = env;
    no_decay.t1 = DecayTime::infinite();
    DensityMatrix rho = evolve_analytic(no_decay, t);
    rho = apply_pi2_pulse(rho, std::numbers::pi + control_phase);
    return rho.population(0);
}

}  // namespace qpemag
