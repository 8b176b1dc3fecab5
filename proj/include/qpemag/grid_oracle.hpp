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

// Brute-force reference implementations that work on point samples of the
// posterior density instead of its Fourier coefficients. They exist to check
// the Fourier path and share no arithmetic with it. Requires FFTW3.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <fftw3.h>

#include "qpemag/fourier_posterior.hpp"

namespace qpemag::oracle {

namespace detail {

struct FftwFree {
    void operator()(void *p) const {
        fftw_free(p);
    }
};

inline std::mutex &planner_mutex() {
    static std::mutex m;
    return m;
}

/// Real-to-half-complex forward transform of fixed size. Plans are created
/// under a global lock (FFTW's planner is not reentrant); execution is not.
class RealForwardFft {
  public:
    explicit RealForwardFft(std::size_t n)
        : n_(n),
          in_(static_cast<double *>(fftw_malloc(sizeof(double) * n))),
          out_(static_cast<fftw_complex *>(fftw_malloc(sizeof(fftw_complex) * (n / 2 + 1)))) {
        std::lock_guard lock(planner_mutex());
        plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in_.get(), out_.get(), FFTW_ESTIMATE);
    }
    ~RealForwardFft() {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(plan_);
    }
    RealForwardFft(const RealForwardFft &) = delete;
    RealForwardFft &operator=(const RealForwardFft &) = delete;

    /// Returns sum_n x_n e^{-2 pi i j n / N} for j = 0..N/2.
    std::vector<Complex> operator()(std::span<const double> x) {
        std::copy(x.begin(), x.end(), in_.get());
        fftw_execute(plan_);
        std::vector<Complex> out(n_ / 2 + 1);
        for (std::size_t j = 0; j < out.size(); ++j) {
            out[j] = Complex(out_.get()[j][0], out_.get()[j][1]);
        }
        return out;
    }

  private:
    std::size_t n_;
    std::unique_ptr<double, FftwFree> in_;
    std::unique_ptr<fftw_complex, FftwFree> out_;
    fftw_plan plan_;
};

/// Half-complex-to-real inverse transform: x_n = sum_j c_j e^{2 pi i j n / N}
/// for a Hermitian spectrum given by c_0..c_{N/2}.
class RealInverseFft {
  public:
    explicit RealInverseFft(std::size_t n)
        : n_(n),
          in_(static_cast<fftw_complex *>(fftw_malloc(sizeof(fftw_complex) * (n / 2 + 1)))),
          out_(static_cast<double *>(fftw_malloc(sizeof(double) * n))) {
        std::lock_guard lock(planner_mutex());
        plan_ = fftw_plan_dft_c2r_1d(static_cast<int>(n), in_.get(), out_.get(), FFTW_ESTIMATE);
    }
    ~RealInverseFft() {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(plan_);
    }
    RealInverseFft(const RealInverseFft &) = delete;
    RealInverseFft &operator=(const RealInverseFft &) = delete;

    std::span<const double> operator()(std::span<const Complex> half_spectrum) {
        for (std::size_t j = 0; j <= n_ / 2; ++j) {
            in_.get()[j][0] = half_spectrum[j].real();
            in_.get()[j][1] = half_spectrum[j].imag();
        }
        fftw_execute(plan_);
        return {out_.get(), n_};
    }

  private:
    std::size_t n_;
    std::unique_ptr<fftw_complex, FftwFree> in_;
    std::unique_ptr<double, FftwFree> out_;
    fftw_plan plan_;
};

}  // namespace detail

/// Posterior density sampled at phi_n = 2 pi n / N.
class GridPosterior {
  public:
    static constexpr std::size_t kDefaultSize = 4096;

    explicit GridPosterior(std::size_t size = kDefaultSize) : density_(size, kFlatDensity) {
        if (size < 4) {
            throw std::invalid_argument("grid posterior needs at least 4 points");
        }
    }

    std::size_t size() const {
        return density_.size();
    }
    std::span<const double> density() const {
        return density_;
    }
    /// Largest harmonic the density can contain: the sum of 2^k over
    /// informative clicks.
    std::uint64_t max_harmonic() const {
        return max_harmonic_;
    }
    double phi(std::size_t n) const {
        return kTwoPi * static_cast<double>(n) / static_cast<double>(density_.size());
    }

    /// Pointwise Bayes: multiply by the click likelihood, renormalize with the
    /// (periodic) trapezoid rule.
    void update(const ClickRecord &click) {
        click.validate();
        const bool informative = click.contrast.visibility() * click.visibility != 0.0;
        const std::uint64_t harmonic = max_harmonic_ + (informative ? (std::uint64_t{1} << click.exponent) : 0);
        if (density_.size() < 4 * harmonic) {
            throw std::invalid_argument("grid of " + std::to_string(density_.size()) +
                                        " points would alias harmonic " + std::to_string(harmonic));
        }
        max_harmonic_ = harmonic;
        double integral = 0.0;
        for (std::size_t n = 0; n < density_.size(); ++n) {
            density_[n] *= click.likelihood(phi(n));
            integral += density_[n];
        }
        integral *= kTwoPi / static_cast<double>(density_.size());
        if (!(integral > 0.0)) {
            throw std::runtime_error("grid posterior lost all mass");
        }
        for (double &p : density_) {
            p /= integral;
        }
    }

    /// b_j = (1/N) sum_n P(phi_n) e^{-i j phi_n}, exact while there is no aliasing.
    Complex coefficient(std::int64_t j) const {
        Complex sum{};
        const double n_points = static_cast<double>(density_.size());
        for (std::size_t n = 0; n < density_.size(); ++n) {
            const double angle = -kTwoPi * std::fmod(static_cast<double>(j) * static_cast<double>(n), n_points) / n_points;
            sum += density_[n] * std::polar(1.0, angle);
        }
        return sum / n_points;
    }

    /// b_j for j = 0..N/2 by FFT.
    std::vector<Complex> spectrum() const {
        detail::RealForwardFft fft(density_.size());
        auto out = fft(density_);
        for (auto &c : out) {
            c /= static_cast<double>(density_.size());
        }
        return out;
    }

  private:
    std::vector<double> density_;
    std::uint64_t max_harmonic_ = 0;
};

inline GridPosterior grid_oracle_update(GridPosterior grid, const ClickRecord &click) {
    grid.update(click);
    return grid;
}

/// The one-step sharpness functional by direct quadrature on the grid:
/// (1/2pi) sum_u | integral e^{i g phi} P(u | phi, Phi) P(phi) dphi |.
inline double quadrature_sharpness(const GridPosterior &grid, unsigned exponent, double control_phase,
                                   double visibility, Contrast contrast, std::int64_t harmonic = 1) {
    double total = 0.0;
    const double weight = kTwoPi / static_cast<double>(grid.size());
    for (int u : {+1, -1}) {
        ClickRecord click{u, exponent, control_phase, visibility, contrast};
        Complex moment{};
        for (std::size_t n = 0; n < grid.size(); ++n) {
            const double phi = grid.phi(n);
            moment += std::polar(grid.density()[n] * click.likelihood(phi), static_cast<double>(harmonic) * phi);
        }
        total += std::abs(moment * weight);
    }
    return total / kTwoPi;
}

/// Samples a Fourier posterior's density at `points` equispaced angles. Folding
/// the coefficients modulo the grid size makes the result exact at the sample
/// points whatever the posterior's bandwidth.
class DensitySampler {
  public:
    explicit DensitySampler(std::size_t points = 4096)
        : points_(points), inverse_(points), full_(points), folded_(points / 2 + 1) {
        if (points % 2 != 0) {
            throw std::invalid_argument("density sampler needs an even point count");
        }
    }

    std::span<const double> operator()(const FourierPosterior &post) {
        std::fill(full_.begin(), full_.end(), Complex{});
        const auto lat = post.lattice();
        const auto s = static_cast<std::uint64_t>(post.spacing());
        const auto n_points = static_cast<std::uint64_t>(points_);
        full_[0] += lat[0];
        const std::uint64_t stride = s % n_points;
        std::uint64_t r = 0;
        for (std::size_t n = 1; n < lat.size(); ++n) {
            r += stride;
            if (r >= n_points) {
                r -= n_points;
            }
            full_[r] += lat[n];
            full_[r == 0 ? 0 : n_points - r] += std::conj(lat[n]);
        }
        // The folded spectrum is Hermitian because the posterior is real.
        for (std::size_t j = 0; j <= points_ / 2; ++j) {
            folded_[j] = full_[j];
        }
        return inverse_(folded_);
    }

  private:
    std::size_t points_;
    detail::RealInverseFft inverse_;
    std::vector<Complex> full_;
    std::vector<Complex> folded_;
};

}  // namespace qpemag::oracle
