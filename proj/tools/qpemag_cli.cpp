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

// qpemag: run, sweep, validate and figure-data front end.
//
// Exit codes: 0 success, 1 configuration or usage error, 2 runtime error,
// 3 validation failure.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "qpemag.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitValidation = 3;

struct CommonOptions {
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> workers;
    std::optional<std::uint64_t> samples;
    bool full_scale = false;
};

void add_common(CLI::App *cmd, CommonOptions &o) {
    cmd->add_option("--out", o.out, "CSV output path (default: stdout); the manifest goes to <out>.manifest.json");
    cmd->add_option("--seed", o.seed, "master seed, overrides the config");
    cmd->add_option("--workers", o.workers, "worker threads (default: $QPEMAG_WORKERS or 1)")->check(CLI::PositiveNumber);
    cmd->add_flag("--full-scale", o.full_scale, "lift the K <= 14 and S <= 10000 caps");
}

unsigned resolve_workers(const CommonOptions &o) {
    if (o.workers) {
        return *o.workers;
    }
    if (const char *env = std::getenv("QPEMAG_WORKERS")) {
        try {
            const long n = std::stol(env);
            if (n >= 1) {
                return static_cast<unsigned>(n);
            }
        } catch (const std::exception &) {
        }
        throw qpemag::ConfigError("QPEMAG_WORKERS", std::string("must be a positive integer (got '") + env + "')");
    }
    return 1;
}

void apply_overrides(qpemag::RunConfig &rc, const CommonOptions &o) {
    if (o.seed) {
        rc.base.master_seed = *o.seed;
    }
    if (o.samples) {
        if (*o.samples < 1) {
            throw qpemag::ConfigError("--samples", "must be at least 1");
        }
        rc.base.S = *o.samples;
    }
    if (!o.full_scale) {
        if (rc.base.S > qpemag::kDefaultMaxTrials) {
            throw qpemag::ConfigError("S", "S = " + std::to_string(rc.base.S) + " exceeds the default cap of " +
                                               std::to_string(qpemag::kDefaultMaxTrials) + "; pass --full-scale");
        }
        for (const auto &cell : rc.cells()) {
            if (cell.K > qpemag::kDefaultMaxExponent) {
                throw qpemag::ConfigError("K", "K = " + std::to_string(cell.K) + " exceeds the default cap of " +
                                                   std::to_string(qpemag::kDefaultMaxExponent) +
                                                   "; pass --full-scale");
            }
        }
    }
}

int execute(const qpemag::RunConfig &rc, const CommonOptions &o) {
    qpemag::EngineOptions engine;
    engine.workers = resolve_workers(o);
    engine.high_memory = o.full_scale;

    const auto start = std::chrono::steady_clock::now();
    const auto cells = rc.cells();
    std::vector<qpemag::SweepRow> rows;
    bool failed = false;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        qpemag::SweepRow row{cells[i], std::nullopt, {}};
        try {
            row.result = qpemag::run_ensemble(cells[i], engine);
        } catch (const std::exception &e) {
            row.error = e.what();
            failed = true;
        }
        std::cerr << "[" << i + 1 << "/" << cells.size() << "] " << qpemag::csv_row(row)
                  << (row.error.empty() ? "" : "  error: " + row.error) << '\n';
        rows.push_back(std::move(row));
    }
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;

    qpemag::RunManifest manifest;
    manifest.config = rc;
    manifest.seed = rc.base.master_seed;
    manifest.duration_seconds = elapsed.count();
    manifest.rows = rows.size();
    if (o.out.empty()) {
        qpemag::emit_csv(rows, std::cout);
        std::cerr << manifest.to_json().dump(2) << '\n';
    } else {
        qpemag::emit_csv(rows, o.out);
        qpemag::write_manifest(manifest, qpemag::manifest_path(o.out));
    }
    return failed ? kExitRuntime : kExitOk;
}

int run_validate() {
    bool ok = true;
    for (const auto &r : qpemag::run_validation_suites()) {
        std::printf("%-4s %-42s measured %.3e  tolerance %.1e  (%s)\n", r.passed ? "ok" : "FAIL", r.name.c_str(),
                    r.measured, r.tolerance, r.detail.c_str());
        ok = ok && r.passed;
    }
    return ok ? kExitOk : kExitValidation;
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"Bayesian multi-pass phase estimation for single-spin magnetometry"};
    app.require_subcommand(1);
    app.set_version_flag("--version", qpemag::kToolVersion);

    CommonOptions run_opts, sweep_opts, fig_opts;
    std::string run_path, sweep_path, figure;

    auto *run = app.add_subcommand("run", "run one ensemble from a JSON config");
    run->add_option("config", run_path, "config file")->required();
    add_common(run, run_opts);

    auto *sweep = app.add_subcommand("sweep", "run every cell of a JSON config's sweep axes");
    sweep->add_option("config", sweep_path, "config file")->required();
    add_common(sweep, sweep_opts);

    app.add_subcommand("validate", "run the oracle-equivalence suites");

    auto *fig = app.add_subcommand("figure-data", "emit a preset sweep for fig2, fig3 or fig4");
    fig->add_option("name", figure, "fig2 | fig3 | fig4")->required()->check(CLI::IsMember({"fig2", "fig3", "fig4"}));
    fig->add_option("--samples", fig_opts.samples, "trials per cell, overrides the preset S");
    add_common(fig, fig_opts);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (app.got_subcommand("validate")) {
            return run_validate();
        }
        qpemag::RunConfig rc;
        const CommonOptions *opts = nullptr;
        if (app.got_subcommand("run")) {
            rc = qpemag::load_config(run_path);
            if (rc.is_sweep()) {
                throw qpemag::ConfigError("", "config has sweep axes; use the sweep subcommand");
            }
            opts = &run_opts;
        } else if (app.got_subcommand("sweep")) {
            rc = qpemag::load_config(sweep_path);
            opts = &sweep_opts;
        } else {
            rc = qpemag::figure_preset(figure, fig_opts.full_scale);
            opts = &fig_opts;
        }
        apply_overrides(rc, *opts);
        return execute(rc, *opts);
    } catch (const qpemag::ConfigError &e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
}
