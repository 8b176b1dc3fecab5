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
#include <atomic>
#include <cmath>
#include <complex>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "qpemag/control_policies.hpp"
#include "qpemag/fourier_posterior.hpp"
#include "qpemag/rng.hpp"

namespace qpemag {

/// Exponents above this need EngineOptions::high_memory; the posterior of a
/// K = 20, M = 6 trial alone holds ~25M coefficients.
inline constexpr unsigned kDefaultMaxExponent = 14;
inline constexpr unsigned kHighMemoryMaxExponent = 20;

struct TrialConfig {
    Scheme scheme = Scheme::adaptive;
    unsigned K = 8;
    std::uint64_t M = 6;    // adaptive: clicks per level
    std::uint64_t M_K = 6;  // nonadaptive: clicks at k = K
    std::uint64_t F = 2;    // nonadaptive: extra clicks per level below K
    /// T~_2 = T2 / tau; infinity is the dephasing-free case.
    double T2_over_tau = std::numeric_limits<double>::infinity();
    Contrast contrast = Contrast::ideal();
    std::uint64_t S = 1000;
    std::uint64_t master_seed = 0;
    /// Nonadaptive only: explicit stage order. Empty means K, K-1, ..., 0.
    std::vector<unsigned> stage_order;
    double initial_phase = 0.0;

    void validate() const {
        contrast.validate();
        if (!(T2_over_tau > 0.0)) {
            throw std::invalid_argument("T2/tau must be positive");
        }
        if (S < 1) {
            throw std::invalid_argument("trial count S must be at least 1");
        }
        if (K > kHighMemoryMaxExponent) {
            throw std::invalid_argument("K = " + std::to_string(K) + " exceeds the supported maximum of " +
                                        std::to_string(kHighMemoryMaxExponent));
        }
        if (!std::isfinite(initial_phase)) {
            throw std::invalid_argument("initial phase must be finite");
        }
        if (scheme == Scheme::adaptive) {
            if (M < 1) {
                throw std::invalid_argument("adaptive scheme needs M >= 1");
            }
            if (!stage_order.empty()) {
                throw std::invalid_argument("the adaptive scheme always runs k = K down to 0");
            }
        } else if (M_K < 1) {
            throw std::invalid_argument("nonadaptive scheme needs M_K >= 1");
        }
        (void)schedule();
    }

    ControlSchedule schedule() const {
        return scheme == Scheme::adaptive ? ControlSchedule::adaptive(K, M)
                                          : ControlSchedule::nonadaptive(K, M_K, F, stage_order);
    }

    double tau_over_T2() const {
        return 1.0 / T2_over_tau;
    }
    /// Fringe visibility V(tau_k) = exp(-2^k tau/T2).
    double visibility(unsigned k) const {
        return std::exp(-std::ldexp(tau_over_T2(), static_cast<int>(k)));
    }

    bool operator==(const TrialConfig &) const = default;
};

struct TrialResult {
    double phi_true = 0.0;
    double phi_hat = 0.0;
    double sharpness = 0.0;
    std::uint64_t clicks = 0;
    std::uint64_t resource_time = 0;
    /// False when the final posterior had b_{-1} = 0; phi_hat is then 0.
    bool valid_estimate = true;
};

struct AggregateResult {
    double V_H = 0.0;
    double V_H_err = 0.0;
    std::uint64_t resource_time = 0;
    double product = 0.0;  // V_H * T~
    double stderr_V_H = 0.0;
    double stderr_V_H_err = 0.0;
    double mean_sharpness = 0.0;
    std::uint64_t trials = 0;
    std::uint64_t invalid_trials = 0;
};

// ---------------------------------------------------------------------------
// Single clicks and trials
// ---------------------------------------------------------------------------

/// Probability of a +1 click: (f_a+f_i)/2 + (f_a-f_i)/2 V cos(2^k phi - Phi).
inline double plus_click_probability(double phi_true, unsigned k, double phi_ctrl, double visibility,
                                     Contrast contrast) {
    return 0.5 * contrast.sum() +
           0.5 * contrast.visibility() * visibility * std::cos(std::ldexp(phi_true, static_cast<int>(k)) - phi_ctrl);
}

/// Draws one click outcome; consumes exactly one uniform from `stream`.
inline int sample_click(RandomStream &stream, double phi_true, unsigned k, double phi_ctrl, double visibility,
                        Contrast contrast) {
    const double p = plus_click_probability(phi_true, k, phi_ctrl, visibility, contrast);
    if (!(p >= -1e-12 && p <= 1.0 + 1e-12)) {
        throw ConsistencyError("click probability " + std::to_string(p) + " outside [0, 1]");
    }
    return stream.next_uniform() < p ? +1 : -1;
}

struct NoObserver {
    void operator()(std::uint64_t, const FourierPosterior &) const {
    }
};

/// Runs one trial. The trial's stream is (master_seed, trial_index); the true
/// phase is its first draw, followed by one draw per click in protocol order.
/// `observer(trial_index, posterior)` sees the posterior after every update.
template <typename Observer = NoObserver>
TrialResult run_trial(const TrialConfig &config, std::uint64_t trial_index, Observer &&observer = {}) {
    RandomStream stream(config.master_seed, trial_index);
    const ControlSchedule schedule = config.schedule();
    TrialResult result;
    result.phi_true = kTwoPi * stream.next_uniform();

    FourierPosterior post = FourierPosterior::flat();
    std::uint64_t m = 0;
    double phi_ctrl = config.initial_phase;
    for (const Stage &stage : schedule.stages()) {
        const double v = config.visibility(stage.exponent);
        for (std::uint64_t i = 0; i < stage.clicks; ++i, ++m) {
            if (config.scheme == Scheme::adaptive) {
                if (m > 0) {
                    phi_ctrl = adaptive_control_phase(post, stage.exponent, v, config.contrast);
                }
            } else {
                phi_ctrl = nonadaptive_phase_at(config.initial_phase, m);
            }
            const int u = sample_click(stream, result.phi_true, stage.exponent, phi_ctrl, v, config.contrast);
            post.update(ClickRecord{u, stage.exponent, phi_ctrl, v, config.contrast});
            observer(trial_index, static_cast<const FourierPosterior &>(post));
        }
    }
    result.clicks = m;
    result.resource_time = resource_time(schedule);
    result.sharpness = posterior_sharpness(post);
    if (post.coefficient(-1) == Complex{}) {
        result.valid_estimate = false;
        result.phi_hat = 0.0;
        result.sharpness = 0.0;
    } else {
        result.phi_hat = phase_estimate(post);
    }
    return result;
}

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

namespace detail {

inline double holevo_from_mean(double mean_modulus) {
    if (!(mean_modulus > 0.0)) {
        return std::numeric_limits<double>::infinity();
    }
    return 1.0 / (mean_modulus * mean_modulus) - 1.0;
}

inline Complex error_phasor(const TrialResult &r) {
    return r.valid_estimate ? std::polar(1.0, r.phi_hat - r.phi_true) : Complex{};
}

inline double sample_stddev(const std::vector<double> &xs) {
    if (xs.size() < 2) {
        return 0.0;
    }
    double mean = 0.0;
    for (double x : xs) {
        mean += x;
    }
    mean /= static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) {
        ss += (x - mean) * (x - mean);
    }
    return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

}  // namespace detail

inline constexpr std::uint64_t kBootstrapStream = 0xB0075747'00000000ull;
inline constexpr unsigned kBootstrapResamples = 200;

/// Holevo variance of an ensemble: V_H = (mean |2 pi b_{-1}|)^{-2} - 1 from
/// the posteriors, and V_H_err = |mean e^{i(phi_hat - phi)}|^{-2} - 1 from the
/// actual errors. Standard errors come from a fixed-seed bootstrap over trials.
inline AggregateResult holevo_variance(const std::vector<TrialResult> &results, std::uint64_t bootstrap_seed = 0,
                                       unsigned resamples = kBootstrapResamples) {
    if (results.empty()) {
        throw std::invalid_argument("holevo_variance: no trial results");
    }
    const auto n = static_cast<double>(results.size());
    AggregateResult agg;
    agg.trials = results.size();
    double sharp = 0.0;
    Complex phasor{};
    for (const auto &r : results) {
        sharp += r.sharpness;
        phasor += detail::error_phasor(r);
        if (!r.valid_estimate) {
            ++agg.invalid_trials;
        }
    }
    agg.mean_sharpness = sharp / n;
    agg.V_H = detail::holevo_from_mean(agg.mean_sharpness);
    agg.V_H_err = detail::holevo_from_mean(std::abs(phasor / n));
    agg.resource_time = results.front().resource_time;
    agg.product = agg.V_H * static_cast<double>(agg.resource_time);

    if (results.size() > 1 && resamples > 1) {
        RandomStream stream(bootstrap_seed, kBootstrapStream);
        std::vector<double> vh, vh_err;
        vh.reserve(resamples);
        vh_err.reserve(resamples);
        for (unsigned b = 0; b < resamples; ++b) {
            double s = 0.0;
            Complex p{};
            for (std::size_t i = 0; i < results.size(); ++i) {
                const auto &r = results[stream.next_below(results.size())];
                s += r.sharpness;
                p += detail::error_phasor(r);
            }
            vh.push_back(detail::holevo_from_mean(s / n));
            vh_err.push_back(detail::holevo_from_mean(std::abs(p / n)));
        }
        agg.stderr_V_H = detail::sample_stddev(vh);
        agg.stderr_V_H_err = detail::sample_stddev(vh_err);
    }
    return agg;
}

// ---------------------------------------------------------------------------
// Ensembles and sweeps
// ---------------------------------------------------------------------------

struct EngineOptions {
    unsigned workers = 1;
    /// Allows K up to kHighMemoryMaxExponent.
    bool high_memory = false;
    unsigned bootstrap_resamples = kBootstrapResamples;
};

inline void check_config_limits(const TrialConfig &config, const EngineOptions &options) {
    config.validate();
    if (!options.high_memory && config.K > kDefaultMaxExponent) {
        throw std::invalid_argument("K = " + std::to_string(config.K) + " exceeds the default cap of " +
                                    std::to_string(kDefaultMaxExponent) + "; enable high-memory mode");
    }
}

/// Runs config.S trials and returns them in trial-index order. Output is the
/// same for every worker count.
template <typename Observer = NoObserver>
std::vector<TrialResult> run_trials(const TrialConfig &config, const EngineOptions &options = {},
                                    Observer &&observer = {}) {
    check_config_limits(config, options);
    std::vector<TrialResult> results(config.S);
    unsigned workers = std::max(1u, options.workers);
    if (options.high_memory && config.K > kDefaultMaxExponent) {
        workers = std::min(workers, 2u);
    }
    workers = static_cast<unsigned>(std::min<std::uint64_t>(workers, config.S));
    if (workers == 1) {
        for (std::uint64_t i = 0; i < config.S; ++i) {
            results[i] = run_trial(config, i, observer);
        }
        return results;
    }
    std::atomic<std::uint64_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (;;) {
                    const std::uint64_t i = next.fetch_add(1);
                    if (i >= config.S) {
                        return;
                    }
                    try {
                        results[i] = run_trial(config, i, observer);
                    } catch (...) {
                        std::lock_guard lock(failure_mutex);
                        if (!failure) {
                            failure = std::current_exception();
                        }
                        next.store(config.S);
                        return;
                    }
                }
            });
        }
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
    return results;
}

template <typename Observer = NoObserver>
AggregateResult run_ensemble(const TrialConfig &config, const EngineOptions &options = {}, Observer &&observer = {}) {
    return holevo_variance(run_trials(config, options, observer), config.master_seed, options.bootstrap_resamples);
}

/// Sweep axes. An empty axis keeps the base configuration's value.
struct SweepAxes {
    std::vector<unsigned> K;
    std::vector<double> f_d;
    std::vector<std::pair<std::uint64_t, std::uint64_t>> M_K_F;
    std::vector<double> f_a;

    bool empty() const {
        return K.empty() && f_d.empty() && M_K_F.empty() && f_a.empty();
    }
    std::size_t cells() const {
        auto n = [](std::size_t s) { return std::max<std::size_t>(s, 1); };
        return n(K.size()) * n(f_d.size()) * n(M_K_F.size()) * n(f_a.size());
    }
    bool operator==(const SweepAxes &) const = default;
};

struct SweepRow {
    TrialConfig config;
    std::optional<AggregateResult> result;
    std::string error;
};

/// Cell configurations in sweep order: (M_K, F) outermost, then the contrast
/// axis (f_d or f_a), then K innermost.
inline std::vector<TrialConfig> sweep_cells(const TrialConfig &base, const SweepAxes &axes) {
    if (!axes.f_d.empty() && !axes.f_a.empty()) {
        throw std::invalid_argument("sweep axes f_d and f_a are mutually exclusive");
    }
    std::vector<std::optional<std::pair<std::uint64_t, std::uint64_t>>> mkf{std::nullopt};
    if (!axes.M_K_F.empty()) {
        mkf.assign(axes.M_K_F.begin(), axes.M_K_F.end());
    }
    std::vector<std::optional<Contrast>> contrasts{std::nullopt};
    if (!axes.f_d.empty()) {
        contrasts.clear();
        for (double f : axes.f_d) {
            contrasts.push_back(Contrast::from_visibility(f));
        }
    } else if (!axes.f_a.empty()) {
        contrasts.clear();
        for (double f : axes.f_a) {
            contrasts.push_back(Contrast{f, base.contrast.low});
        }
    }
    std::vector<std::optional<unsigned>> ks{std::nullopt};
    if (!axes.K.empty()) {
        ks.assign(axes.K.begin(), axes.K.end());
    }
    std::vector<TrialConfig> cells;
    for (const auto &p : mkf) {
        for (const auto &c : contrasts) {
            for (const auto &k : ks) {
                TrialConfig cell = base;
                if (p) {
                    cell.M_K = p->first;
                    cell.F = p->second;
                }
                if (c) {
                    cell.contrast = *c;
                }
                if (k) {
                    cell.K = *k;
                }
                cells.push_back(cell);
            }
        }
    }
    return cells;
}

/// One ensemble per cell. Cell failures are recorded in the row and the sweep
/// carries on.
template <typename Observer = NoObserver>
std::vector<SweepRow> sweep(const TrialConfig &base, const SweepAxes &axes, const EngineOptions &options = {},
                            Observer &&observer = {}) {
    std::vector<SweepRow> rows;
    for (const auto &cell : sweep_cells(base, axes)) {
        SweepRow row{cell, std::nullopt, {}};
        try {
            row.result = run_ensemble(cell, options, observer);
        } catch (const std::exception &e) {
            row.error = e.what();
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Field conversion and scaling
// ---------------------------------------------------------------------------

/// B_z = phi / (2 lambda_g tau). Phases in [0, 2pi) cover the unambiguous
/// window [0, pi / (lambda_g tau)).
inline double field_from_phase(double phi_hat, double tau, double gyromagnetic_ratio) {
    if (!(tau > 0.0)) {
        throw std::invalid_argument("field_from_phase: tau must be positive");
    }
    if (gyromagnetic_ratio == 0.0 || !std::isfinite(gyromagnetic_ratio)) {
        throw std::invalid_argument("field_from_phase: gyromagnetic ratio must be finite and nonzero");
    }
    return phi_hat / (2.0 * gyromagnetic_ratio * tau);
}

struct ScalingFit {
    double slope = 0.0;
    double intercept = 0.0;
    std::size_t points = 0;
};

/// Least-squares line through (log T~, log(V_H T~)). Rows with non-finite or
/// non-positive V_H are skipped.
inline ScalingFit scaling_fit(const std::vector<std::pair<double, double>> &time_and_variance) {
    std::vector<std::pair<double, double>> pts;
    for (auto [t, vh] : time_and_variance) {
        if (std::isfinite(vh) && vh > 0.0 && t > 0.0) {
            pts.emplace_back(std::log(t), std::log(vh * t));
        }
    }
    if (pts.size() < 3) {
        throw std::invalid_argument("scaling_fit needs at least 3 rows with finite V_H");
    }
    double mx = 0.0, my = 0.0;
    for (auto [x, y] : pts) {
        mx += x;
        my += y;
    }
    mx /= static_cast<double>(pts.size());
    my /= static_cast<double>(pts.size());
    double sxx = 0.0, sxy = 0.0;
    for (auto [x, y] : pts) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if (sxx == 0.0) {
        throw std::invalid_argument("scaling_fit needs at least two distinct resource times");
    }
    ScalingFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    fit.points = pts.size();
    return fit;
}

inline ScalingFit scaling_fit(const std::vector<AggregateResult> &rows) {
    std::vector<std::pair<double, double>> pts;
    for (const auto &r : rows) {
        pts.emplace_back(static_cast<double>(r.resource_time), r.V_H);
    }
    return scaling_fit(pts);
}

/// Fit over the coherent regime only: rows with T~ < T~_2.
inline ScalingFit scaling_fit(const std::vector<AggregateResult> &rows, double T2_over_tau) {
    std::vector<AggregateResult> kept;
    for (const auto &r : rows) {
        if (static_cast<double>(r.resource_time) < T2_over_tau) {
            kept.push_back(r);
        }
    }
    return scaling_fit(kept);
}

}  // namespace qpemag
