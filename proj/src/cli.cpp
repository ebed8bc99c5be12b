#include "qarch/cli.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "qarch/csv.hpp"
#include "qarch/data.hpp"
#include "qarch/estimate.hpp"
#include "qarch/moments.hpp"
#include "qarch/parallel.hpp"
#include "qarch/simulate.hpp"
#include "qarch/spectral.hpp"

namespace qarch::cli {

namespace {

namespace fs = std::filesystem;

struct Provenance {
    std::string command;
    std::vector<std::pair<std::string, std::string>> config;
    std::uint64_t seed = 0;

    void stamp(CsvWriter& out) const {
        out.comment("artifact: qarch " + std::string(kVersion));
        out.comment("command: " + command);
        for (const auto& [k, v] : config) out.comment(k + "=" + v);
        out.comment("seed: " + std::to_string(seed));
    }
};

struct OutputTracker {
    std::vector<std::string> written;
    std::vector<std::string> failed;

    template <typename Fn>
    void emit(const std::string& path, Fn&& writer) {
        try {
            writer();
            written.push_back(path);
        } catch (const std::exception& e) {
            failed.push_back(path + " (" + e.what() + ")");
        }
    }

    int finish() const {
        for (const auto& p : written) std::cout << "wrote " << p << "\n";
        if (!failed.empty()) {
            std::cerr << "missing artifacts:\n";
            for (const auto& p : failed) std::cerr << "  " << p << "\n";
            return 1;
        }
        return 0;
    }
};

std::string join_args(int argc, const char* const* argv) {
    std::ostringstream os;
    for (int i = 0; i < argc; ++i) {
        if (i) os << ' ';
        os << argv[i];
    }
    return os.str();
}

FeedbackKernel kernel_from_options(const std::string& kernel_file, const std::string& family,
                                   int q, double s2, double g, double alpha, double q0,
                                   double lev_a, double lev_b, double lev_c, double lev_d) {
    if (!kernel_file.empty()) return load_kernel(kernel_file);
    Eigen::VectorXd k;
    if (family == "figarch") {
        FeedbackKernel kern = build_figarch_diag(g, alpha, q0, q, s2);
        k = kern.diagonal();
    } else if (family == "profile") {
        k = profile_implied_diagonal({s2, alpha, g, q0}, q);
    } else if (family == "arch1") {
        k = Eigen::VectorXd::Zero(q);
        k[0] = g;
    } else {
        throw std::runtime_error("unknown kernel family: " + family +
                                 " (use figarch, profile, arch1 or --kernel FILE)");
    }
    Eigen::VectorXd L = Eigen::VectorXd::Zero(q);
    if (lev_a != 0.0 || lev_c != 0.0)
        for (int t = 1; t <= q; ++t)
            L[t - 1] = -(lev_a * std::exp(-t / lev_b) + lev_c * std::exp(-t / lev_d));
    return build_arch(k, s2, L);
}

void write_path_csv(const std::string& path, const PathBundle& bundle, const Provenance& prov) {
    CsvWriter out(path);
    prov.stamp(out);
    const bool rs = !bundle.rs_vol.empty();
    out.row(rs ? std::vector<std::string>{"t", "r", "sigma2", "xi", "rs_vol"}
               : std::vector<std::string>{"t", "r", "sigma2", "xi"});
    for (std::size_t t = 0; t < bundle.returns.size(); ++t) {
        std::vector<std::string> cells{std::to_string(t), format_g17(bundle.returns[t]),
                                       format_g17(bundle.sigma2[t]),
                                       format_g17(bundle.residuals[t])};
        if (rs) cells.push_back(format_g17(bundle.rs_vol[t]));
        out.row(cells);
    }
}

// panel loading: each manifest line is a path; headers decide the format
// (date,open,high,low,close -> OHLC; t,r,sigma2,... -> simulated path)
struct LoadedPanel {
    std::vector<std::vector<double>> returns;
    std::vector<std::vector<double>> vol2;
    std::vector<std::string> names;
};

LoadedPanel load_panel(const std::string& manifest, bool remove_market) {
    std::ifstream in(manifest);
    if (!in) throw std::runtime_error("cannot open manifest: " + manifest);
    std::vector<std::string> paths;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        paths.push_back(line);
    }
    if (paths.empty()) throw std::runtime_error("manifest lists no series: " + manifest);
    const fs::path base = fs::path(manifest).parent_path();
    std::vector<OhlcSeries> ohlc;
    LoadedPanel panel;
    for (const auto& p : paths) {
        const fs::path full = fs::path(p).is_absolute() ? fs::path(p) : base / p;
        const auto rows = read_csv(full.string());
        if (rows.empty()) throw std::runtime_error("empty series file: " + full.string());
        if (!rows[0].empty() && rows[0][0] == "date") {
            ohlc.push_back(load_ohlc_csv(full.string()));
        } else if (!rows[0].empty() && rows[0][0] == "t") {
            // simulated path: columns t, r, sigma2, ...
            std::vector<double> r, v;
            for (std::size_t i = 1; i < rows.size(); ++i) {
                r.push_back(parse_double(rows[i].at(1), full.string()));
                v.push_back(parse_double(rows[i].at(2), full.string()));
            }
            standardize_series(r, &v);
            panel.returns.push_back(std::move(r));
            panel.vol2.push_back(std::move(v));
            panel.names.push_back(full.string());
        } else {
            throw std::runtime_error("unrecognized series header in " + full.string());
        }
    }
    if (!ohlc.empty()) {
        Panel built = build_panel(ohlc, remove_market);
        for (std::size_t i = 0; i < built.returns.size(); ++i) {
            panel.returns.push_back(built.returns[i]);
            panel.vol2.push_back(built.vol2[i]);
            panel.names.push_back(built.names[i]);
        }
        for (const auto& d : built.dropped) std::cerr << "dropped series: " << d << "\n";
    }
    return panel;
}

int cmd_simulate(const std::string& outdir, const Provenance& prov, const SimConfig& cfg,
                 int intraday_bins) {
    OutputTracker tracker;
    fs::create_directories(outdir);
    const PathBundle bundle =
        intraday_bins > 0 ? simulate_intraday_rs(cfg, intraday_bins) : simulate_qarch(cfg);
    tracker.emit(outdir + "/path.csv",
                 [&] { write_path_csv(outdir + "/path.csv", bundle, prov); });
    if (bundle.clamped > 0)
        std::cerr << "note: " << bundle.clamped << " negative sigma^2 values clamped\n";
    return tracker.finish();
}

int cmd_calibrate(const std::string& outdir, const Provenance& prov, const LoadedPanel& panel,
                  int q_diag, int q_off, double nu, int n_samplings, SplitMode mode,
                  std::uint64_t seed, bool fitted_inputs) {
    OutputTracker tracker;
    fs::create_directories(outdir);
    const int max_lag = 2 * q_diag;
    std::vector<CorrelationSet> sets, sets_trunc;
    for (std::size_t i = 0; i < panel.returns.size(); ++i) {
        std::span<const double> v(panel.vol2[i]);
        sets.push_back(compute_correlations(panel.returns[i],
                                            std::optional<std::span<const double>>(v), max_lag,
                                            std::min(q_off, max_lag)));
        const auto rt = truncate_returns(panel.returns[i]);
        sets_trunc.push_back(compute_correlations(
            rt, std::optional<std::span<const double>>(v), std::max(2 * q_off, 16), q_off, 0));
    }
    const CorrelationSet pooled = pool_correlations(sets);
    const CorrelationSet pooled_trunc = pool_correlations(sets_trunc);

    tracker.emit(outdir + "/correlations.csv", [&] {
        CsvWriter out(outdir + "/correlations.csv");
        prov.stamp(out);
        out.row({"tau", "c1", "c2", "c2_tilde", "ca", "ca_tilde", "lev", "lev_tilde", "lev_a",
                 "n_obs"});
        for (int lag = -max_lag; lag <= max_lag; ++lag)
            out.numeric_row(std::to_string(lag),
                            {pooled.at(pooled.c1, lag), pooled.at(pooled.c2, lag),
                             pooled.at(pooled.c2_tilde, lag), pooled.at(pooled.ca, lag),
                             pooled.at(pooled.ca_tilde, lag), pooled.at(pooled.lev, lag),
                             pooled.at(pooled.lev_tilde, lag), pooled.at(pooled.lev_a, lag),
                             pooled.at(pooled.n_obs, lag)});
    });
    tracker.emit(outdir + "/d_matrix.csv", [&] {
        CsvWriter out(outdir + "/d_matrix.csv");
        prov.stamp(out);
        for (int a = 0; a <= pooled_trunc.d_max; ++a) {
            std::vector<double> row(pooled_trunc.d_max + 1);
            for (int b = 0; b <= pooled_trunc.d_max; ++b) row[b] = pooled_trunc.d(a, b);
            out.numeric_row(std::to_string(a), row);
        }
    });

    const GmmDiagonal diag = gmm_diagonal(pooled, q_diag, fitted_inputs);
    if (diag.trace_exceeds_one)
        std::cerr << "warning: GMM diagonal trace >= 1 (nonstationary solution)\n";
    tracker.emit(outdir + "/s2_profile.csv", [&] {
        CsvWriter out(outdir + "/s2_profile.csv");
        prov.stamp(out);
        ProfileFit fit = fit_s2_profile(diag.k);
        out.comment("fit: s_inf2=" + format_g17(fit.profile.s_inf2) +
                    " alpha=" + format_g17(fit.profile.alpha) + " g=" + format_g17(fit.profile.g) +
                    " q0=" + format_g17(fit.profile.q0));
        out.row({"q", "s2_q", "fit"});
        double acc = 0.0;
        for (int t = 1; t <= q_diag; ++t) {
            acc += diag.k[t - 1];
            out.numeric_row(std::to_string(t), {1.0 - acc, fit.profile(t)});
        }
    });

    const Eigen::VectorXd kq = diag.k.head(q_off);
    const Eigen::VectorXd Lq = diag.L.head(q_off);
    Eigen::MatrixXd gmmK = gmm_offdiagonal(pooled_trunc, q_off, kq, Lq);
    FeedbackKernel base = build_arch(kq, std::max(diag.s2, 0.0), Lq);

    tracker.emit(outdir + "/kernel_gmm.csv", [&] {
        Eigen::MatrixXd K = base.K + gmmK;
        save_kernel(make_kernel(q_off, base.s2, base.L, K), outdir + "/kernel_gmm.csv");
    });

    EstimationResult ml;
    bool have_ml = true;
    try {
        OffDiagDesign design = unconstrained_offdiag_design(q_off);
        MlPanel mlp = build_ml_panel(panel.returns, base, design, nu);
        ml = one_step_ml(mlp, Eigen::VectorXd::Zero(design.n_params()));
    } catch (const std::exception& e) {
        // Appendix-D failure mode: report and continue with the GMM kernel
        std::cerr << "one-step ML unavailable: " << e.what() << "\n";
        have_ml = false;
    }
    if (have_ml) {
        tracker.emit(outdir + "/kernel_ml.csv",
                     [&] { save_kernel(ml.kernel, outdir + "/kernel_ml.csv"); });
        tracker.emit(outdir + "/kernel_heatmap.csv", [&] {
            CsvWriter out(outdir + "/kernel_heatmap.csv");
            prov.stamp(out);
            for (int a = 0; a < q_off; ++a) {
                std::vector<double> row(q_off);
                for (int b = 0; b < q_off; ++b) row[b] = ml.kernel.K(a, b);
                out.numeric_row(std::to_string(a + 1), row);
            }
        });
    }

    tracker.emit(outdir + "/family_kernels.csv", [&] {
        CsvWriter out(outdir + "/family_kernels.csv");
        prov.stamp(out);
        out.row({"family", "index", "value"});
        const std::vector<std::pair<Family, std::string>> fams = {
            {Family::TwoScale, "g2"},
            {Family::BorlandBouchaud, "G"},
            {Family::Zumbach, "gZ"},
            {Family::LongTrend, "gLT"}};
        for (const auto& [fam, label] : fams) {
            EstimationResult r = restricted_ml(panel.returns, base, fam, {}, nu);
            for (Eigen::Index i = 0; i < r.params.size(); ++i)
                out.row({label, std::to_string(i + 1), format_g17(r.params[i])});
        }
    });

    tracker.emit(outdir + "/likelihoods.csv", [&] {
        CsvWriter out(outdir + "/likelihoods.csv");
        prov.stamp(out);
        std::vector<HarnessEstimator> ests = {
            {EstimatorKind::GmmOffdiag, Family::Arch, {}, "GMM"},
            {EstimatorKind::DiagonalOnly, Family::Arch, {}, "ARCH"},
            {EstimatorKind::MlFromZero, Family::Arch, {}, "ARCH+ML"}};
        HarnessConfig hc;
        hc.mode = mode;
        hc.n_samplings = n_samplings;
        hc.seed = seed;
        hc.nu = nu;
        hc.q_off = q_off;
        HarnessResult hr = is_oos_harness(panel.returns, panel.vol2, base, ests, hc);
        out.row({"estimator", "M", "IS", "IS_disp", "OOS", "OOS_disp", "bias_M_2n", "AIC"});
        for (const auto& row : hr.rows)
            out.row({row.label, std::to_string(row.n_params), format_g17(row.is_mean),
                     format_g17(row.is_dispersion), format_g17(row.oos_mean),
                     format_g17(row.oos_dispersion), format_g17(row.bias_m_over_2n),
                     format_g17(row.aic)});
    });
    return tracker.finish();
}

int cmd_analyze(const std::string& outdir, const Provenance& prov,
                const std::optional<FeedbackKernel>& kernel,
                const std::optional<LoadedPanel>& panel, double nu_for_xi4, long frontier_q) {
    OutputTracker tracker;
    fs::create_directories(outdir);
    const ResidualSpec residual =
        nu_for_xi4 > 4.0 ? ResidualSpec::student(nu_for_xi4) : ResidualSpec::gaussian();

    if (kernel) {
        tracker.emit(outdir + "/stability.txt", [&] {
            std::ofstream out(outdir + "/stability.txt");
            MomentReport second = second_moment(*kernel, residual);
            PositivityReport pos = positivity_check(*kernel);
            out << "trace_K=" << format_g17(kernel->trace()) << "\n";
            out << "stable2=" << (second.stable2 ? 1 : 0) << "\n";
            out << "sigma2_mean=" << format_g17(second.sigma2_mean) << "\n";
            out << "positivity_definite=" << (pos.definite ? 1 : 0) << "\n";
            out << "positivity_min_eigenvalue=" << format_g17(pos.min_eigenvalue) << "\n";
            out << "positivity_margin=" << format_g17(pos.margin) << "\n";
            if (kernel->is_diagonal(1e-14)) {
                MomentReport fourth = fourth_moment_diag(kernel->diagonal(), residual);
                out << "stable4=" << (fourth.stable4 ? 1 : 0) << "\n";
                out << "sigma4_over_sigma2sq=" << format_g17(fourth.sigma4_mean) << "\n";
                out << "kurtosis=" << format_g17(fourth.kurtosis) << "\n";
            } else if (kernel->L.isZero(0.0)) {
                MomentReport fourth = fourth_moment_general(*kernel, residual);
                out << "stable4=" << (fourth.stable4 ? 1 : 0) << "\n";
                out << "sigma4_mean=" << format_g17(fourth.sigma4_mean) << "\n";
                out << "kurtosis=" << format_g17(fourth.kurtosis) << "\n";
            }
            if (!out) throw std::runtime_error("write failed");
        });
        tracker.emit(outdir + "/spectrum.csv", [&] {
            CsvWriter out(outdir + "/spectrum.csv");
            prov.stamp(out);
            SpectrumReport spec = eigendecompose(*kernel);
            out.comment("neutral_count=" + std::to_string(spec.neutral_count));
            out.row({"n", "lambda", "lambda_arch_reference"});
            for (int i = 0; i < kernel->q; ++i)
                out.numeric_row(std::to_string(i + 1),
                                {spec.eigenvalues[i], spec.arch_reference[i]});
        });
        tracker.emit(outdir + "/eigenvectors.csv", [&] {
            CsvWriter out(outdir + "/eigenvectors.csv");
            prov.stamp(out);
            SpectrumReport spec = eigendecompose(*kernel);
            for (int i = 0; i < kernel->q; ++i) {
                std::vector<double> row(kernel->q);
                for (int j = 0; j < kernel->q; ++j) row[j] = spec.eigenvectors(i, j);
                out.numeric_row(std::to_string(i + 1), row);
            }
        });
    }

    tracker.emit(outdir + "/frontier.csv", [&] {
        CsvWriter out(outdir + "/frontier.csv");
        prov.stamp(out);
        std::vector<double> alphas;
        for (double a = 1.0; a <= 3.0 + 1e-9; a += 0.05) alphas.push_back(a);
        std::vector<long> qs = {1, 32, 256, frontier_q};
        auto points = frontier_scan(alphas, qs, residual);
        out.row({"alpha", "q", "g_c", "g_4"});
        for (const auto& p : points)
            out.row({format_g17(p.alpha), std::to_string(p.q), format_g17(p.g_c),
                     format_g17(p.g_4)});
    });

    if (panel) {
        tracker.emit(outdir + "/tri_delta.csv", [&] {
            CsvWriter out(outdir + "/tri_delta.csv");
            prov.stamp(out);
            const int max_lag = 100;
            std::vector<CorrelationSet> sets;
            for (std::size_t i = 0; i < panel->returns.size(); ++i) {
                std::span<const double> v(panel->vol2[i]);
                sets.push_back(compute_correlations(
                    panel->returns[i], std::optional<std::span<const double>>(v), max_lag, 0));
            }
            CorrelationSet pooled = pool_correlations(sets);
            TRIReport tri = tri_delta(pooled);
            if (kernel)
                tri.leverage_part =
                    leverage_tri_contribution(kernel->L, pooled, std::min(max_lag - kernel->q, 50));
            out.row({"tau", "delta", "se", "leverage_part"});
            for (int t = 0; t <= max_lag; ++t)
                out.numeric_row(std::to_string(t),
                                {tri.delta[t], tri.se[t],
                                 t < tri.leverage_part.size() ? tri.leverage_part[t] : 0.0});
        });
        tracker.emit(outdir + "/aftershock.csv", [&] {
            CsvWriter out(outdir + "/aftershock.csv");
            prov.stamp(out);
            // needs one long series: concatenation is not meaningful here,
            // so use the longest
            std::size_t best = 0;
            for (std::size_t i = 0; i < panel->returns.size(); ++i)
                if (panel->returns[i].size() > panel->returns[best].size()) best = i;
            PathBundle bundle;
            bundle.returns = panel->returns[best];
            bundle.sigma2 = panel->vol2[best];
            out.row({"threshold", "theta", "n_events"});
            for (double thr : {3.0, 4.0, 5.0}) {
                try {
                    AftershockReport rep = aftershock_profile(bundle, thr);
                    out.row({format_g17(thr), format_g17(rep.theta),
                             std::to_string(rep.n_events)});
                } catch (const std::exception&) {
                    out.row({format_g17(thr), "nan", "0"});
                }
            }
        });
    }
    return tracker.finish();
}

int cmd_splits(const std::string& outdir, const Provenance& prov, int n_series, long T,
               SplitMode mode, int n_samplings, std::uint64_t seed) {
    OutputTracker tracker;
    fs::create_directories(outdir);
    tracker.emit(outdir + "/splits.csv", [&] {
        CsvWriter out(outdir + "/splits.csv");
        prov.stamp(out);
        auto splits = make_splits(n_series, T, mode, n_samplings, seed);
        if (mode == SplitMode::RandomHalves) {
            out.row({"sampling", "side", "series"});
            for (std::size_t s = 0; s < splits.size(); ++s) {
                for (int i : splits[s].is_series)
                    out.row({std::to_string(s), "IS", std::to_string(i)});
                for (int i : splits[s].oos_series)
                    out.row({std::to_string(s), "OOS", std::to_string(i)});
            }
        } else {
            out.row({"sampling", "is_begin", "is_end"});
            for (std::size_t s = 0; s < splits.size(); ++s)
                out.row({std::to_string(s), std::to_string(splits[s].is_begin),
                         std::to_string(splits[s].is_end)});
        }
    });
    return tracker.finish();
}

}  // namespace

int run(int argc, const char* const* argv) {
    CLI::App app{"QARCH volatility-feedback toolkit"};
    app.set_config("--config", "", "flat key=value config file with [command] sections");
    app.require_subcommand(1);

    std::string outdir = "qarch_out";
    app.add_option("--out", outdir, "output directory")->envname("QARCH_OUTDIR");
    int threads = 0;
    app.add_option("--threads", threads, "worker thread cap (0: hardware)");

    // shared kernel options
    std::string kernel_file, family = "figarch";
    int q = 20;
    double s2 = 0.21, g = 0.081, alpha = 1.11, q0 = 53.0;
    double lev_a = 0.0, lev_b = 327.0, lev_c = 0.0, lev_d = 17.0;
    auto add_kernel_opts = [&](CLI::App* cmd) {
        cmd->add_option("--kernel", kernel_file, "kernel file (module-kernel format)");
        cmd->add_option("--family", family, "figarch | profile | arch1");
        cmd->add_option("--q", q, "kernel horizon");
        cmd->add_option("--s2", s2, "baseline s^2 (profile: s_inf^2)");
        cmd->add_option("--g", g, "feedback amplitude");
        cmd->add_option("--alpha", alpha, "power-law exponent");
        cmd->add_option("--q0", q0, "exponential cutoff (<= 0: none)");
        cmd->add_option("--lev-a", lev_a, "leverage slow amplitude");
        cmd->add_option("--lev-b", lev_b, "leverage slow scale");
        cmd->add_option("--lev-c", lev_c, "leverage fast amplitude");
        cmd->add_option("--lev-d", lev_d, "leverage fast scale");
    };

    // simulate
    auto* sim = app.add_subcommand("simulate", "simulate a QARCH path");
    add_kernel_opts(sim);
    long T = 100000;
    long burn = -1;
    std::uint64_t seed = 1;
    std::string residual = "gaussian";
    double nu = 6.4;
    int bins = 0;
    double omega_var = 0.0, omega_decay = 10.0;
    std::string neg_policy = "clamp";
    sim->add_option("--T", T, "path length in days");
    sim->add_option("--burn-in", burn, "warm-up days (-1: max(10q, 1000))");
    sim->add_option("--seed", seed, "RNG seed");
    sim->add_option("--residual", residual, "gaussian | student");
    sim->add_option("--nu", nu, "Student degrees of freedom");
    sim->add_option("--bins", bins, "intraday bins for the RS surrogate (0: off)");
    sim->add_option("--omega-var", omega_var, "stochastic baseline variance");
    sim->add_option("--omega-decay", omega_decay, "stochastic baseline decay (days)");
    sim->add_option("--negative-sigma2", neg_policy, "clamp | reject");

    // calibrate
    auto* cal = app.add_subcommand("calibrate", "calibrate kernels from a panel manifest");
    std::string manifest;
    int q_diag = 100, q_off = 20, n_samp = 150;
    std::string split_mode = "random-halves";
    bool fitted_inputs = false;
    bool keep_market = false;
    cal->add_option("--manifest", manifest, "panel manifest (one series path per line)")
        ->required();
    cal->add_option("--q-diag", q_diag, "diagonal horizon");
    cal->add_option("--q-off", q_off, "off-diagonal horizon");
    cal->add_option("--nu", nu, "Student degrees of freedom for the likelihood");
    cal->add_option("--samplings", n_samp, "IS/OOS samplings");
    cal->add_option("--split", split_mode, "random-halves | block-dates");
    cal->add_option("--seed", seed, "split seed");
    cal->add_flag("--fitted-inputs", fitted_inputs, "solve the diagonal GMM on fitted shapes");
    cal->add_flag("--keep-market", keep_market, "skip market-volatility removal");

    // analyze
    auto* ana = app.add_subcommand("analyze", "stability, spectrum, frontier, TRI, aftershocks");
    add_kernel_opts(ana);
    std::string ana_manifest;
    long frontier_q = kInfiniteHorizon;
    bool no_kernel = false;
    ana->add_option("--manifest", ana_manifest, "optional panel manifest for TRI/aftershocks");
    ana->add_option("--nu", nu, "residual dof for xi4 (<= 4: Gaussian)");
    ana->add_option("--frontier-q", frontier_q, "largest horizon in the frontier scan");
    ana->add_flag("--no-kernel", no_kernel, "skip kernel-specific outputs");

    // splits
    auto* spl = app.add_subcommand("splits", "emit a deterministic split plan");
    int spl_n = 4;
    long spl_T = 1000;
    spl->add_option("--n-series", spl_n, "panel size");
    spl->add_option("--T", spl_T, "panel length in days");
    spl->add_option("--samplings", n_samp, "number of samplings");
    spl->add_option("--split", split_mode, "random-halves | block-dates");
    spl->add_option("--seed", seed, "seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    if (threads > 0) set_worker_count(threads);

    Provenance prov;
    prov.command = join_args(argc, argv);
    prov.seed = seed;
    auto cfg = [&](const std::string& k, const std::string& v) { prov.config.emplace_back(k, v); };

    try {
        if (sim->parsed()) {
            SimConfig conf;
            conf.kernel = kernel_from_options(kernel_file, family, q, s2, g, alpha, q0, lev_a,
                                              lev_b, lev_c, lev_d);
            conf.residual =
                residual == "student" ? ResidualKind::Student : ResidualKind::Gaussian;
            conf.nu = nu;
            conf.T = T;
            conf.burn_in = burn;
            conf.seed = seed;
            if (omega_var > 0.0) conf.omega = OmegaSpec{omega_var, omega_decay};
            conf.policy = neg_policy == "reject" ? NegativeSigma2Policy::RejectAndError
                                                 : NegativeSigma2Policy::ClampToFloor;
            cfg("family", family);
            cfg("q", std::to_string(conf.kernel.q));
            cfg("T", std::to_string(T));
            cfg("residual", residual);
            cfg("nu", format_g17(nu));
            cfg("bins", std::to_string(bins));
            return cmd_simulate(outdir, prov, conf, bins);
        }
        if (cal->parsed()) {
            LoadedPanel panel = load_panel(manifest, !keep_market);
            cfg("manifest", manifest);
            cfg("q_diag", std::to_string(q_diag));
            cfg("q_off", std::to_string(q_off));
            cfg("nu", format_g17(nu));
            cfg("samplings", std::to_string(n_samp));
            cfg("split", split_mode);
            const SplitMode mode =
                split_mode == "block-dates" ? SplitMode::BlockDates : SplitMode::RandomHalves;
            return cmd_calibrate(outdir, prov, panel, q_diag, q_off, nu, n_samp, mode, seed,
                                 fitted_inputs);
        }
        if (ana->parsed()) {
            std::optional<FeedbackKernel> kern;
            if (!no_kernel)
                kern = kernel_from_options(kernel_file, family, q, s2, g, alpha, q0, lev_a, lev_b,
                                           lev_c, lev_d);
            std::optional<LoadedPanel> panel;
            if (!ana_manifest.empty()) panel = load_panel(ana_manifest, true);
            cfg("frontier_q", std::to_string(frontier_q));
            cfg("nu", format_g17(nu));
            return cmd_analyze(outdir, prov, kern, panel, nu, frontier_q);
        }
        if (spl->parsed()) {
            cfg("n_series", std::to_string(spl_n));
            cfg("T", std::to_string(spl_T));
            cfg("split", split_mode);
            const SplitMode mode =
                split_mode == "block-dates" ? SplitMode::BlockDates : SplitMode::RandomHalves;
            return cmd_splits(outdir, prov, spl_n, spl_T, mode, n_samp, seed);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace qarch::cli
