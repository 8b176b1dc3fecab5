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

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qpemag/errors.hpp"

namespace qpemag {

using Complex = std::complex<double>;

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr double kFlatDensity = 1.0 / kTwoPi;

/// Maps an angle onto [0, 2pi).
inline double wrap_phase(double phi) {
    double r = std::fmod(phi, kTwoPi);
    if (r < 0.0) {
        r += kTwoPi;
    }
    if (r >= kTwoPi) {
        r = 0.0;
    }
    return r;
}

/// Single-shot readout contrast: P(+1) ranges over [low, high] as the fringe
/// sweeps. `high` is f_a, `low` is f_i; high - low is the detection visibility.
struct Contrast {
    double high = 1.0;
    double low = 0.0;

    static Contrast ideal() {
        return {1.0, 0.0};
    }
    /// Symmetric contrast with high + low = 1 and high - low = f_d.
    static Contrast from_visibility(double f_d) {
        return {0.5 * (1.0 + f_d), 0.5 * (1.0 - f_d)};
    }

    double sum() const {
        return high + low;
    }
    double visibility() const {
        return high - low;
    }
    void validate() const {
        if (!(low >= 0.0 && low <= high && high <= 1.0)) {
            throw std::invalid_argument("contrast must satisfy 0 <= f_i <= f_a <= 1 (got f_a=" +
                                        std::to_string(high) + ", f_i=" + std::to_string(low) + ")");
        }
    }
    bool operator==(const Contrast &) const = default;
};

/// One single-shot Ramsey outcome together with the settings it was taken at.
struct ClickRecord {
    int outcome = +1;            // +1 or -1
    unsigned exponent = 0;       // k; the accruing time is 2^k tau
    double control_phase = 0.0;  // Phi
    double visibility = 1.0;     // V(tau_k) in [0, 1]
    Contrast contrast = Contrast::ideal();

    void validate() const {
        if (outcome != 1 && outcome != -1) {
            throw std::invalid_argument("click outcome must be +1 or -1");
        }
        if (exponent > 62) {
            throw std::invalid_argument("click exponent too large");
        }
        if (!(visibility >= 0.0 && visibility <= 1.0)) {
            throw std::invalid_argument("click visibility must lie in [0, 1]");
        }
        contrast.validate();
    }
    /// Likelihood as used by the update: (f_a+f_i)/2 + u (f_a-f_i)/2 V cos(2^k phi - Phi).
    double likelihood(double phi) const {
        return 0.5 * contrast.sum() +
               0.5 * outcome * contrast.visibility() * visibility * std::cos(std::ldexp(phi, exponent) - control_phase);
    }
};

namespace detail {

// Error-free transformations for double-double arithmetic. Each value is the
// unevaluated sum hi + lo with |lo| <= ulp(hi) / 2.

inline void two_sum(double a, double b, double &s, double &e) {
    s = a + b;
    const double bb = s - a;
    e = (a - (s - bb)) + (b - bb);
}

/// a * b = p + e exactly.
inline void two_prod(double a, double b, double &p, double &e) {
    p = a * b;
#ifdef __FMA__
    e = std::fma(a, b, -p);
#else
    constexpr double split = 134217729.0;  // 2^27 + 1
    const double ta = split * a, tb = split * b;
    const double ah = ta - (ta - a), al = a - ah;
    const double bh = tb - (tb - b), bl = b - bh;
    e = ((ah * bh - p) + ah * bl + al * bh) + al * bl;
#endif
}

/// A double factor with its Dekker split precomputed, for repeated products.
struct DdFactor {
    double c;
    double ch;
    double cl;

    explicit DdFactor(double value) : c(value) {
        constexpr double split = 134217729.0;
        const double t = split * value;
        ch = t - (t - value);
        cl = value - ch;
    }

    /// (h, e) += c * (xh + xl), with the rounding error of the sum kept in e.
    void madd(double xh, double xl, double &h, double &e) const {
        const double p = c * xh;
#ifdef __FMA__
        const double pe = std::fma(c, xh, -p);
#else
        constexpr double split = 134217729.0;
        const double t = split * xh;
        const double xhh = t - (t - xh), xhl = xh - xhh;
        const double pe = ((ch * xhh - p) + ch * xhl + cl * xhh) + cl * xhl;
#endif
        const double s = h + p;
        const double bb = s - h;
        e += ((h - (s - bb)) + (p - bb)) + pe + c * xl;
        h = s;
    }
};

/// (xh + xl) + (yh + yl), left unnormalized.
inline void dd_add(double xh, double xl, double yh, double yl, double &h, double &l) {
    two_sum(xh, yh, h, l);
    l += xl + yl;
}

/// (xh + xl) * (yh + yl), renormalized.
inline void dd_mul(double xh, double xl, double yh, double yl, double &h, double &l) {
    double p, pe;
    two_prod(xh, yh, p, pe);
    pe += xh * yl + xl * yh;
    h = p + pe;
    l = pe - (h - p);
}

inline constexpr double kTwoPiLow = 2.4492935982947064e-16;
inline constexpr double kFlatDensityLow = -9.839338337591243e-18;

}  // namespace detail

/// Posterior density over the system phase, P(phi) = sum_j b_j e^{i j phi},
/// stored on the lattice j in spacing * {-H, ..., H}. Only j >= 0 is kept;
/// b_{-j} = conj(b_j) because P is real.
///
/// Coefficients are held in double-double precision. Pointwise Bayes updates
/// amplify rounding noise in the low-density tails by the likelihood ratio of
/// every surprising click; the extra word keeps the density non-negative over
/// long click records. Accessors return the leading word.
///
/// `spacing` is the gcd of 2^k over every click applied so far (0 before the
/// first informative click, meaning only b_0 is present).
class FourierPosterior {
  public:
    static FourierPosterior flat() {
        return FourierPosterior();
    }

    std::uint64_t spacing() const {
        return spacing_;
    }
    /// H: the lattice half-width; the largest nonzero-capable index is spacing * H.
    std::int64_t half_width() const {
        return half_;
    }
    std::int64_t max_index() const {
        return static_cast<std::int64_t>(spacing_) * half_;
    }
    std::uint64_t clicks_applied() const {
        return clicks_;
    }
    /// Element n holds b_{spacing * n}, n = 0..H.
    std::span<const Complex> lattice() const {
        return {hi_.data(), static_cast<std::size_t>(half_ + 1)};
    }
    /// Low words matching lattice().
    std::span<const Complex> lattice_low() const {
        return {lo_.data(), static_cast<std::size_t>(half_ + 1)};
    }

    /// b_j, or zero when j is off the lattice or outside the stored range.
    Complex coefficient(std::int64_t j) const {
        if (j == 0) {
            return hi_[0];
        }
        if (spacing_ == 0) {
            return {};
        }
        const auto s = static_cast<std::int64_t>(spacing_);
        if (j % s != 0) {
            return {};
        }
        const std::int64_t n = j / s;
        if (n > half_ || n < -half_) {
            return {};
        }
        return n > 0 ? hi_[static_cast<std::size_t>(n)] : std::conj(hi_[static_cast<std::size_t>(-n)]);
    }

    /// Bayes update by one click, in place.
    ///
    /// b~_j = (f_a+f_i) b_j + (u/2)(f_a-f_i) V (b_{j-2^k} e^{-i Phi} + b_{j+2^k} e^{i Phi}),
    /// then every coefficient is divided by 2 pi b~_0 of the updated set.
    void update(const ClickRecord &click) {
        click.validate();
        const double alpha = click.contrast.sum();
        const double beta = 0.5 * click.outcome * click.contrast.visibility() * click.visibility;
        ++clicks_;
        if (beta == 0.0) {
            // Zero-information click: the likelihood is flat and normalization
            // undoes the rescale.
            return;
        }
        const std::uint64_t step = std::uint64_t{1} << click.exponent;
        const std::uint64_t refined = std::gcd(spacing_, step);
        if (refined != spacing_) {
            refine(refined);
        }
        const auto d = static_cast<std::size_t>(step / spacing_);
        const auto old_half = static_cast<std::size_t>(half_);
        const std::size_t new_half = old_half + d;

        // Zero padding past the old top index lets the main loop read b_{n+d}
        // and b_n without bounds checks. Indices n < d read the lower
        // neighbour b_{n-d} as conj(b_{d-n}).
        for (auto *v : {&hi_, &lo_}) {
            v->resize(old_half + 1);
            v->resize(new_half + d + 1, Complex{});
        }
        scratch_hi_.resize(new_half + 1);
        scratch_lo_.resize(new_half + 1);

        // With L = a + 2 beta cos(2^k phi - Phi), the shift terms pair up:
        // Re b~ = a Re b + beta cos(Phi) (Re b_lo + Re b_up) + beta sin(Phi) (Im b_lo - Im b_up),
        // Im b~ = a Im b + beta cos(Phi) (Im b_lo + Im b_up) + beta sin(Phi) (Re b_up - Re b_lo),
        // where b_lo = b_{j-2^k} and b_up = b_{j+2^k}.
        const detail::DdFactor fa(alpha), fc(beta * std::cos(click.control_phase)),
            fs(beta * std::sin(click.control_phase));

        const auto *sh = reinterpret_cast<const double *>(hi_.data());
        const auto *sl = reinterpret_cast<const double *>(lo_.data());
        auto *oh = reinterpret_cast<double *>(scratch_hi_.data());
        auto *ol = reinterpret_cast<double *>(scratch_lo_.data());
        auto kernel = [&](std::size_t n, const double *lh, const double *ll) {
            const std::size_t self = 2 * n, up = 2 * (n + d);
            double sr, sre, di, die, si, sie, dr, dre;
            detail::dd_add(lh[0], ll[0], sh[up], sl[up], sr, sre);
            detail::dd_add(lh[1], ll[1], -sh[up + 1], -sl[up + 1], di, die);
            detail::dd_add(lh[1], ll[1], sh[up + 1], sl[up + 1], si, sie);
            detail::dd_add(sh[up], sl[up], -lh[0], -ll[0], dr, dre);
            double h = 0.0, e = 0.0;
            fa.madd(sh[self], sl[self], h, e);
            fc.madd(sr, sre, h, e);
            fs.madd(di, die, h, e);
            oh[self] = h + e;
            ol[self] = e - (oh[self] - h);
            h = 0.0;
            e = 0.0;
            fa.madd(sh[self + 1], sl[self + 1], h, e);
            fc.madd(si, sie, h, e);
            fs.madd(dr, dre, h, e);
            oh[self + 1] = h + e;
            ol[self + 1] = e - (oh[self + 1] - h);
        };
        const std::size_t prefix = std::min(d, new_half + 1);
        for (std::size_t n = 0; n < prefix; ++n) {
            const double lh[2] = {hi_[d - n].real(), -hi_[d - n].imag()};
            const double ll[2] = {lo_[d - n].real(), -lo_[d - n].imag()};
            kernel(n, lh, ll);
        }
        for (std::size_t n = prefix; n <= new_half; ++n) {
            kernel(n, sh + 2 * (n - d), sl + 2 * (n - d));
        }
        const double norm = oh[0], norm_low = ol[0];
        if (!(norm > 0.0) || !std::isfinite(norm)) {
            throw ConsistencyError("bayes update produced a non-positive normalization");
        }
        // inv = 1 / (2 pi norm) to double-double precision.
        double dh, dl;
        detail::dd_mul(kTwoPi, detail::kTwoPiLow, norm, norm_low, dh, dl);
        const double q = 1.0 / dh;
        double p, pe;
        detail::two_prod(q, dh, p, pe);
        const double r = ((1.0 - p) - pe) - q * dl;
        const double inv_h = q + q * r;
        const double inv_l = q * r - (inv_h - q);
        for (std::size_t n = 2; n < 2 * (new_half + 1); ++n) {
            detail::dd_mul(oh[n], ol[n], inv_h, inv_l, oh[n], ol[n]);
        }
        scratch_hi_[0] = Complex(kFlatDensity, 0.0);
        scratch_lo_[0] = Complex(detail::kFlatDensityLow, 0.0);
        half_ = static_cast<std::int64_t>(new_half);
        hi_.swap(scratch_hi_);
        lo_.swap(scratch_lo_);
    }

  private:
    FourierPosterior() : hi_{Complex(kFlatDensity, 0.0)}, lo_{Complex(detail::kFlatDensityLow, 0.0)} {
    }

    void refine(std::uint64_t refined) {
        if (spacing_ == 0 || half_ == 0) {
            spacing_ = refined;
            return;
        }
        const auto ratio = static_cast<std::size_t>(spacing_ / refined);
        const auto old_half = static_cast<std::size_t>(half_);
        const std::size_t new_half = old_half * ratio;
        for (auto [v, tmp] : {std::pair{&hi_, &scratch_hi_}, std::pair{&lo_, &scratch_lo_}}) {
            tmp->assign(new_half + 1, Complex{});
            for (std::size_t n = 0; n <= old_half; ++n) {
                (*tmp)[n * ratio] = (*v)[n];
            }
            v->swap(*tmp);
        }
        half_ = static_cast<std::int64_t>(new_half);
        spacing_ = refined;
    }

    std::uint64_t spacing_ = 0;
    std::int64_t half_ = 0;
    std::uint64_t clicks_ = 0;
    std::vector<Complex> hi_;
    std::vector<Complex> lo_;
    std::vector<Complex> scratch_hi_;
    std::vector<Complex> scratch_lo_;
};

inline FourierPosterior flat_prior() {
    return FourierPosterior::flat();
}

inline FourierPosterior bayes_update(FourierPosterior post, const ClickRecord &click) {
    post.update(click);
    return post;
}

/// arg(b_{-1}) in [0, 2pi). Throws NoInformationError when b_{-1} == 0.
inline double phase_estimate(const FourierPosterior &post) {
    const Complex b = post.coefficient(-1);
    if (b == Complex{}) {
        throw NoInformationError("posterior has no first-harmonic component; the phase estimate is undefined");
    }
    return wrap_phase(std::arg(b));
}

/// |2 pi b_{-1}|, the modulus of the posterior mean of e^{i phi}.
inline double posterior_sharpness(const FourierPosterior &post) {
    return std::abs(kTwoPi * post.coefficient(-1));
}

/// P(phi), summed over both halves of the spectrum. Throws ConsistencyError
/// if the sum has an imaginary part above 1e-8.
inline double eval_density(const FourierPosterior &post, double phi) {
    const auto lat = post.lattice();
    const double s = static_cast<double>(post.spacing());
    Complex sum = lat[0];
    for (std::size_t n = 1; n < lat.size(); ++n) {
        const Complex e = std::polar(1.0, s * static_cast<double>(n) * phi);
        sum += lat[n] * e + std::conj(lat[n]) * std::conj(e);
    }
    if (std::abs(sum.imag()) > 1e-8) {
        throw ConsistencyError("posterior density has an imaginary part of " + std::to_string(sum.imag()));
    }
    return sum.real();
}

}  // namespace qpemag
