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
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qpemag/fourier_posterior.hpp"

namespace qpemag {

// ---------------------------------------------------------------------------
// Adaptive feedback
// ---------------------------------------------------------------------------

/// The three coefficients the one-step-ahead sharpness depends on, already
/// weighted by the contrast: for outcome u the updated moment is
/// a + (u/2)(b e^{-i Phi} + c e^{i Phi}).
struct FeedbackCoefficients {
    Complex a;
    Complex b;
    Complex c;
    std::int64_t harmonic = 1;

    bool degenerate() const {
        return b == Complex{} && c == Complex{};
    }
    /// Sum over u = +-1 of |a + (u/2)(b e^{-i Phi} + c e^{i Phi})|, halved.
    double functional(double phi_ctrl) const {
        const Complex z = std::polar(1.0, phi_ctrl);
        const Complex w = 0.5 * (b * std::conj(z) + c * z);
        return 0.5 * (std::abs(a + w) + std::abs(a - w));
    }
};

inline FeedbackCoefficients feedback_coefficients(const FourierPosterior &post, unsigned exponent, double visibility,
                                                  Contrast contrast, std::int64_t harmonic) {
    const auto step = static_cast<std::int64_t>(std::uint64_t{1} << exponent);
    const double beta = contrast.visibility() * visibility;
    return {contrast.sum() * post.coefficient(-harmonic), beta * post.coefficient(-harmonic - step),
            beta * post.coefficient(-harmonic + step), harmonic};
}

/// Expected sharpness after one more click at (k, Phi), unnormalized:
/// (1/2pi) sum_u | integral e^{i phi} P(u | phi, Phi) P(phi) dphi |.
inline double sharpness_functional(const FourierPosterior &post, unsigned exponent, double phi_ctrl, double visibility,
                                   Contrast contrast) {
    return feedback_coefficients(post, exponent, visibility, contrast, 1).functional(phi_ctrl);
}

/// The harmonic whose sharpness the adaptive rule targets: the first harmonic
/// when it can be influenced by the next click, otherwise the lowest harmonic
/// present on the lattice after that click.
inline std::int64_t feedback_harmonic(const FourierPosterior &post, unsigned exponent, double visibility,
                                      Contrast contrast) {
    if (!feedback_coefficients(post, exponent, visibility, contrast, 1).degenerate()) {
        return 1;
    }
    const std::uint64_t refined = std::gcd(post.spacing(), std::uint64_t{1} << exponent);
    return static_cast<std::int64_t>(refined);
}

/// Stationary points of the sharpness functional: Phi_0 and Phi_+-, each
/// paired with its +pi partner (the square root fixes Phi only modulo pi).
///
/// The closed forms are written for |a + b e^{-i Phi} + c e^{i Phi}| + |a - ...|,
/// so they take the half-weighted b/2 and c/2 of the update's shift terms.
inline std::vector<double> feedback_candidates(const FeedbackCoefficients &f) {
    const Complex a = f.a, b = 0.5 * f.b, c = 0.5 * f.c;
    const Complex c1 = (std::conj(a) * c) * (std::conj(a) * c) - (a * std::conj(b)) * (a * std::conj(b)) +
                       4.0 * (std::norm(b) - std::norm(c)) * std::conj(b) * c;
    const Complex c2(0.0, -2.0 * (a * a * std::conj(b) * std::conj(c)).imag());
    std::vector<double> out;
    auto push = [&](double phi) {
        if (std::isfinite(phi)) {
            out.push_back(wrap_phase(phi));
            out.push_back(wrap_phase(phi + std::numbers::pi));
        }
    };
    push(std::arg(b * std::conj(a) - std::conj(c) * a));
    if (c1 != Complex{}) {
        const Complex root = std::sqrt(c2 * c2 + std::norm(c1));
        push(std::arg(std::sqrt((c2 + root) / c1)));
        push(std::arg(std::sqrt((c2 - root) / c1)));
    }
    return out;
}

/// One-step-ahead optimal control phase for a click at exponent k.
///
/// Evaluates the sharpness functional at every closed-form candidate and
/// returns the best. Returns 0 when the functional does not depend on Phi.
inline double adaptive_control_phase(const FourierPosterior &post, unsigned exponent, double visibility,
                                     Contrast contrast) {
    const std::int64_t g = feedback_harmonic(post, exponent, visibility, contrast);
    const FeedbackCoefficients f = feedback_coefficients(post, exponent, visibility, contrast, g);
    if (f.degenerate()) {
        return 0.0;
    }
    double best_phi = 0.0;
    double best = -1.0;
    for (double phi : feedback_candidates(f)) {
        const double m = f.functional(phi);
        if (m > best) {
            best = m;
            best_phi = phi;
        }
    }
    return best_phi;
}

// ---------------------------------------------------------------------------
// Nonadaptive increments
// ---------------------------------------------------------------------------

/// Phi_m = Phi_{m-1} + pi/2 modulo 2pi. Inputs on the quarter-turn lattice
/// stay on it exactly, so four applications return the start bit-for-bit.
inline double nonadaptive_control_phase(double prev_phase) {
    constexpr double quarter = 0.5 * std::numbers::pi;
    const double q = prev_phase / quarter;
    const double nearest = std::round(q);
    if (std::abs(q - nearest) < 1e-12) {
        const auto turns = static_cast<long long>(nearest) + 1;
        return static_cast<double>(((turns % 4) + 4) % 4) * quarter;
    }
    return wrap_phase(prev_phase + quarter);
}

/// Control phase of the m-th click (m counted from 0) of a nonadaptive run.
inline double nonadaptive_phase_at(double initial_phase, std::uint64_t click_index) {
    return wrap_phase(initial_phase + static_cast<double>(click_index % 4) * (0.5 * std::numbers::pi));
}

// ---------------------------------------------------------------------------
// Schedules and resource accounting
// ---------------------------------------------------------------------------

/// M(K, k) = M_K + F (K - k).
inline std::uint64_t detections_at_level(unsigned K, unsigned k, std::uint64_t M_K, std::uint64_t F) {
    if (k > K) {
        throw std::invalid_argument("detections_at_level: k = " + std::to_string(k) + " exceeds K = " +
                                    std::to_string(K));
    }
    if (M_K < 1) {
        throw std::invalid_argument("detections_at_level: M_K must be positive");
    }
    return M_K + F * (K - k);
}

enum class Scheme { adaptive, nonadaptive };

inline const char *to_string(Scheme s) {
    return s == Scheme::adaptive ? "adaptive" : "nonadaptive";
}

struct Stage {
    unsigned exponent;
    std::uint64_t clicks;
    bool operator==(const Stage &) const = default;
};

class ControlSchedule {
  public:
    /// (K, M), (K-1, M), ..., (0, M).
    static ControlSchedule adaptive(unsigned K, std::uint64_t M) {
        if (M < 1) {
            throw std::invalid_argument("adaptive schedule needs M >= 1");
        }
        ControlSchedule s(Scheme::adaptive, K);
        s.clicks_per_level_ = M;
        for (unsigned k = K + 1; k-- > 0;) {
            s.stages_.push_back({k, M});
        }
        return s;
    }

    /// Clicks at level k follow M_K + F (K - k). `order` lists each of 0..K
    /// exactly once; empty means descending.
    static ControlSchedule nonadaptive(unsigned K, std::uint64_t M_K, std::uint64_t F,
                                       const std::vector<unsigned> &order = {}) {
        ControlSchedule s(Scheme::nonadaptive, K);
        s.top_clicks_ = M_K;
        s.increment_ = F;
        std::vector<unsigned> ks = order;
        if (ks.empty()) {
            for (unsigned k = K + 1; k-- > 0;) {
                ks.push_back(k);
            }
        } else {
            std::vector<unsigned> sorted = ks;
            std::sort(sorted.begin(), sorted.end());
            for (unsigned k = 0; k <= K; ++k) {
                if (sorted.size() != K + 1 || sorted[k] != k) {
                    throw std::invalid_argument("stage order must list each exponent 0..K exactly once");
                }
            }
        }
        for (unsigned k : ks) {
            s.stages_.push_back({k, detections_at_level(K, k, M_K, F)});
        }
        return s;
    }

    Scheme scheme() const {
        return scheme_;
    }
    unsigned max_exponent() const {
        return K_;
    }
    const std::vector<Stage> &stages() const {
        return stages_;
    }
    std::uint64_t total_clicks() const {
        std::uint64_t n = 0;
        for (const auto &st : stages_) {
            n += st.clicks;
        }
        return n;
    }
    /// M for adaptive schedules, M_K for nonadaptive ones.
    std::uint64_t clicks_per_level() const {
        return scheme_ == Scheme::adaptive ? clicks_per_level_ : top_clicks_;
    }
    std::uint64_t increment() const {
        return increment_;
    }

  private:
    ControlSchedule(Scheme scheme, unsigned K) : scheme_(scheme), K_(K) {
        if (K > 62) {
            throw std::invalid_argument("schedule exponent K too large");
        }
    }

    Scheme scheme_;
    unsigned K_;
    std::uint64_t clicks_per_level_ = 0;
    std::uint64_t top_clicks_ = 0;
    std::uint64_t increment_ = 0;
    std::vector<Stage> stages_;
};

/// Total interaction time in units of tau: sum over stages of clicks * 2^k.
inline std::uint64_t resource_time(const ControlSchedule &schedule) {
    std::uint64_t total = 0;
    for (const auto &st : schedule.stages()) {
        total += st.clicks << st.exponent;
    }
    return total;
}

/// M (2^{K+1} - 1).
inline std::uint64_t adaptive_resource_time(unsigned K, std::uint64_t M) {
    return M * ((std::uint64_t{2} << K) - 1);
}

/// M_K (2^{K+1} - 1) + F (2^{K+1} - 2 - K).
inline std::uint64_t nonadaptive_resource_time(unsigned K, std::uint64_t M_K, std::uint64_t F) {
    return M_K * ((std::uint64_t{2} << K) - 1) + F * ((std::uint64_t{2} << K) - 2 - K);
}

// ---------------------------------------------------------------------------
// Fisher information
// ---------------------------------------------------------------------------

/// Per-click Fisher information about phi at exponent k with dephasing
/// tau/T2: 4^k sin^2(x) / (exp(2^{k+1} tau/T2) - cos^2(x)), x = 2^k phi - Phi.
/// tau/T2 = 0 resolves the removable singularity to 4^k.
inline double fisher_information(double phi, double phi_ctrl, unsigned exponent, double tau_over_T2) {
    if (!(tau_over_T2 >= 0.0)) {
        throw std::invalid_argument("fisher_information: tau/T2 must be non-negative");
    }
    const double scale = std::ldexp(1.0, 2 * static_cast<int>(exponent));
    if (tau_over_T2 == 0.0) {
        return scale;
    }
    const double x = std::ldexp(phi, static_cast<int>(exponent)) - phi_ctrl;
    const double s = std::sin(x);
    // exp(y) - cos^2 = expm1(y) + sin^2 avoids cancellation for small y.
    const double denom = std::expm1(std::ldexp(tau_over_T2, static_cast<int>(exponent) + 1)) + s * s;
    return scale * s * s / denom;
}

}  // namespace qpemag
