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

// Oracle-equivalence and invariant suites. Each suite is deterministic in its
// seed and reports the worst deviation it saw against a fixed tolerance.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "qpemag/control_policies.hpp"
#include "qpemag/fourier_posterior.hpp"
#include "qpemag/grid_oracle.hpp"
#include "qpemag/rng.hpp"
#include "qpemag/spin_dynamics.hpp"

namespace qpemag {

struct ValidationResult {
    std::string name;
    double measured = 0.0;
    double tolerance = 0.0;
    bool passed = false;
    std::string detail;
};

/// Worst-case tracker for the posterior invariants: normalization, conjugate
/// symmetry, coefficient bound and density positivity on a 4096-point grid.
/// Not thread-safe; use with a single worker.
class PosteriorInvariantChecker {
  public:
    static constexpr double kCoefficientTolerance = 1e-12;
    static constexpr double kDensityTolerance = 1e-9;

    explicit PosteriorInvariantChecker(std::size_t points = 4096) : sampler_(points) {
    }

    void operator()(std::uint64_t, const FourierPosterior &post) {
        check(post);
    }

    void check(const FourierPosterior &post) {
        ++updates_;
        norm_error_ = std::max(norm_error_, std::abs(post.coefficient(0) - Complex(kFlatDensity, 0.0)));
        const auto lat = post.lattice();
        const auto s = static_cast<std::int64_t>(post.spacing());
        double peak_sq = 0.0;
        for (const Complex &b : lat) {
            peak_sq = std::max(peak_sq, std::norm(b));
        }
        bound_excess_ = std::max(bound_excess_, std::sqrt(peak_sq) - kFlatDensity);
        // Spot-check the mirrored half through the public accessor.
        const auto h = static_cast<std::int64_t>(lat.size()) - 1;
        for (std::int64_t n : {std::int64_t{1}, h / 2, h}) {
            if (n > 0) {
                symmetry_error_ =
                    std::max(symmetry_error_, std::abs(post.coefficient(-n * s) - std::conj(post.coefficient(n * s))));
            }
        }
        const auto density = sampler_(post);
        min_density_ = std::min(min_density_, *std::min_element(density.begin(), density.end()));
    }

    std::uint64_t updates() const {
        return updates_;
    }
    double norm_error() const {
        return norm_error_;
    }
    double symmetry_error() const {
        return symmetry_error_;
    }
    double bound_excess() const {
        return bound_excess_;
    }
    double min_density() const {
        return min_density_;
    }
    bool ok() const {
        return norm_error_ <= kCoefficientTolerance && symmetry_error_ <= kCoefficientTolerance &&
               bound_excess_ <= kCoefficientTolerance && min_density_ >= -kDensityTolerance;
    }
    std::string summary() const {
        char buf[256];
        std::snprintf(buf, sizeof buf,
                      "%llu updates; |b0 - 1/2pi| <= %.3e, symmetry <= %.3e, max|b_j| - 1/2pi = %.3e, "
                      "min density = %.3e",
                      static_cast<unsigned long long>(updates_), norm_error_, symmetry_error_, bound_excess_,
                      min_density_);
        return buf;
    }

  private:
    oracle::DensitySampler sampler_;
    std::uint64_t updates_ = 0;
    double norm_error_ = 0.0;
    double symmetry_error_ = 0.0;
    double bound_excess_ = -std::numeric_limits<double>::infinity();
    double min_density_ = std::numeric_limits<double>::infinity();
};

namespace detail {

inline Contrast random_contrast(RandomStream &rng) {
    const double a = rng.next_uniform(), b = rng.next_uniform();
    return {std::max(a, b), std::min(a, b)};
}

inline ClickRecord random_click(RandomStream &rng, unsigned max_exponent) {
    ClickRecord c;
    c.outcome = rng.next_uniform() < 0.5 ? +1 : -1;
    c.exponent = static_cast<unsigned>(rng.next_below(max_exponent + 1));
    c.control_phase = kTwoPi * rng.next_uniform();
    c.visibility = rng.next_uniform();
    c.contrast = random_contrast(rng);
    return c;
}

}  // namespace detail

/// Fourier update against the pointwise grid posterior over random click
/// sequences with k <= 5. Measures max |delta b_{-1}|, |delta b_0|.
inline ValidationResult validate_posterior_oracle(std::uint64_t seed = 1, unsigned sequences = 200,
                                                  PosteriorInvariantChecker *invariants = nullptr) {
    ValidationResult r{"posterior: Fourier vs 4096-point grid", 0.0, 1e-9, false, {}};
    RandomStream rng(seed, 0x5EC0'0001);
    std::uint64_t clicks = 0;
    for (unsigned s = 0; s < sequences; ++s) {
        FourierPosterior post = FourierPosterior::flat();
        oracle::GridPosterior grid;
        const auto length = 1 + rng.next_below(12);
        for (std::uint64_t i = 0; i < length; ++i) {
            const ClickRecord click = detail::random_click(rng, 5);
            post.update(click);
            grid.update(click);
            ++clicks;
            if (invariants) {
                invariants->check(post);
            }
            for (std::int64_t j : {-1, 0}) {
                r.measured = std::max(r.measured, std::abs(post.coefficient(j) - grid.coefficient(j)));
            }
        }
    }
    r.passed = r.measured <= r.tolerance;
    r.detail = std::to_string(sequences) + " sequences, " + std::to_string(clicks) + " clicks";
    return r;
}

struct DynamicsPoint {
    SpinEnvironment env;
    double t;
};

/// Random environments with T2 <= 2 T1, t within a few T2 and up to ~6 turns of
/// precession.
inline std::vector<DynamicsPoint> random_dynamics_points(std::uint64_t seed, unsigned count) {
    RandomStream rng(seed, 0x5EC0'0002);
    std::vector<DynamicsPoint> pts;
    for (unsigned i = 0; i < count; ++i) {
        DynamicsPoint p;
        p.t = 0.1 + 2.0 * rng.next_uniform();
        p.env.gyromagnetic_ratio = 0.5 + rng.next_uniform();
        p.env.field = (rng.next_uniform() - 0.5) * 20.0 / p.t / p.env.gyromagnetic_ratio;
        const double t2 = p.t * (0.3 + 3.0 * rng.next_uniform());
        p.env.t2 = DecayTime::seconds(t2);
        const double u = rng.next_uniform();
        p.env.t1 = u < 0.2 ? DecayTime::infinite() : DecayTime::seconds(0.5 * t2 * (1.0 + 9.0 * rng.next_uniform()));
        pts.push_back(p);
    }
    return pts;
}

inline double max_elementwise_error(const DensityMatrix &a, const DensityMatrix &b) {
    return (a.matrix() - b.matrix()).cwiseAbs().maxCoeff();
}

/// Closed-form evolution against RK4 on the master equation with
/// dt = 1e-4 min(t, T2).
inline ValidationResult validate_dynamics_oracle(std::uint64_t seed = 2, unsigned points = 100) {
    ValidationResult r{"dynamics: analytic vs RK4", 0.0, 1e-8, false, {}};
    for (const auto &p : random_dynamics_points(seed, points)) {
        const double dt = 1e-4 * std::min(p.t, p.env.t2.value());
        const auto numeric = integrate_master(initial_superposition(), p.env, p.t, dt);
        r.measured = std::max(r.measured, max_elementwise_error(numeric, evolve_analytic(p.env, p.t)));
    }
    r.passed = r.measured < r.tolerance;
    r.detail = std::to_string(points) + " random points";
    return r;
}

/// Error reduction from halving a coarse step, min over random points.
inline ValidationResult validate_dt_halving(std::uint64_t seed = 3, unsigned points = 20) {
    ValidationResult r{"dynamics: RK4 dt-halving ratio", std::numeric_limits<double>::infinity(), 8.0, false, {}};
    for (const auto &p : random_dynamics_points(seed, points)) {
        const auto exact = evolve_analytic(p.env, p.t);
        const double omega = std::abs(p.env.precession_rate()) + p.env.t2.rate() + p.env.t1.rate();
        const double dt = std::min(p.t / 8.0, 0.25 / omega);
        const double coarse = max_elementwise_error(integrate_master(initial_superposition(), p.env, p.t, dt), exact);
        const double fine =
            max_elementwise_error(integrate_master(initial_superposition(), p.env, p.t, 0.5 * dt), exact);
        r.measured = std::min(r.measured, coarse / fine);
    }
    r.passed = r.measured >= r.tolerance;
    r.detail = std::to_string(points) + " random points, coarse h*omega = 0.25";
    return r;
}

/// Random posterior built from up to 12 random clicks with k <= 5.
inline FourierPosterior random_posterior(RandomStream &rng) {
    FourierPosterior post = FourierPosterior::flat();
    const auto length = rng.next_below(13);
    for (std::uint64_t i = 0; i < length; ++i) {
        post.update(detail::random_click(rng, 5));
    }
    return post;
}

/// The adaptive rule's phase against a 720-point scan of the sharpness
/// functional. Measures the worst shortfall (grid max - selected).
inline ValidationResult validate_adaptive_phase(std::uint64_t seed = 4, unsigned posteriors = 100) {
    ValidationResult r{"adaptive phase vs 720-point grid argmax", -std::numeric_limits<double>::infinity(), 1e-9,
                       false, {}};
    RandomStream rng(seed, 0x5EC0'0003);
    for (unsigned i = 0; i < posteriors; ++i) {
        const FourierPosterior post = random_posterior(rng);
        const auto k = static_cast<unsigned>(rng.next_below(6));
        const double v = rng.next_uniform();
        const Contrast contrast = detail::random_contrast(rng);
        const double chosen = adaptive_control_phase(post, k, v, contrast);
        const double achieved = sharpness_functional(post, k, chosen, v, contrast);
        double best = -1.0;
        for (int n = 0; n < 720; ++n) {
            best = std::max(best, sharpness_functional(post, k, kTwoPi * n / 720.0, v, contrast));
        }
        r.measured = std::max(r.measured, best - achieved);
    }
    r.passed = r.measured <= r.tolerance;
    r.detail = std::to_string(posteriors) + " random posteriors";
    return r;
}

inline std::vector<ValidationResult> run_validation_suites() {
    return {validate_posterior_oracle(), validate_dynamics_oracle(), validate_dt_halving(),
            validate_adaptive_phase()};
}

}  // namespace qpemag
