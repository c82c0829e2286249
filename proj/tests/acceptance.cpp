// Acceptance harness: runs every registered release criterion end to end and
// prints one [PASS]/[FAIL] line per criterion.  The exit code is the number
// of failed criteria, so the suite integrates directly with ctest.
//
// Criterion 5 checks a conjectured monotonicity of the crossing-frequency
// curve E(W_n).  The model provably violates it (the curve decreases), so
// that line is expected to stay red; the harness reports the measured
// violation rather than weakening the check.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "thermeq/boltzmann.hpp"
#include "thermeq/collision_chain.hpp"
#include "thermeq/crossing.hpp"
#include "thermeq/dephasing.hpp"
#include "thermeq/gas_params.hpp"
#include "thermeq/ou.hpp"
#include "thermeq/rng.hpp"
#include "thermeq/runner.hpp"
#include "thermeq/stats.hpp"
#include "thermeq/time_process.hpp"

using namespace thermeq;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* pattern, ...) {
    char buf[512];
    va_list args;
    va_start(args, pattern);
    std::vsnprintf(buf, sizeof(buf), pattern, args);
    va_end(args);
    return buf;
}

// Reference gas: c = 1/2, sigma0^2 = 4, sigma_x^2 = 1, lambda = 2.
const GasParams kGasA = GasParams::create(3.0, 1.0, 4.0, 1.0, 2.0);

// --- 1. Monte Carlo variance matches the closed-form relaxation law -------
Outcome criterion1() {
    const std::vector<double> times = {0.25, 1.0, 4.0};
    std::vector<stats::MomentAccumulator> acc(times.size());
    const std::size_t trials = 100000;
    for (std::size_t i = 0; i < trials; ++i) {
        rng::Stream s(101, i);
        const auto tr = timeproc::simulate(kGasA, 4.0, s);
        for (std::size_t j = 0; j < times.size(); ++j) acc[j].add(tr.value_at(times[j]));
    }
    bool pass = true;
    double worst = 0.0;
    for (std::size_t j = 0; j < times.size(); ++j) {
        const double target = time_variance(times[j], kGasA);
        const double z = std::abs(acc[j].variance() - target) / acc[j].variance_se();
        worst = std::max(worst, z);
        if (!(z < 4.0)) pass = false;
    }
    return {pass, fmt("variance at t={0.25,1,4}, n=%zu, worst |z|=%.2f (gate 4)", trials, worst)};
}

// --- 2. Deep-time velocity law is the equilibrium Gaussian ----------------
Outcome criterion2() {
    const double t = 20.0 / kGasA.relaxation_rate();  // lambda*t*(1-c^2) = 20
    const std::size_t n = 10000;
    std::vector<double> sample(n);
    for (std::size_t i = 0; i < n; ++i) {
        rng::Stream s(102, i);
        sample[i] = timeproc::simulate(kGasA, t, s).value_at(t);
    }
    std::sort(sample.begin(), sample.end());
    const double eq = kGasA.equilibrium_variance();
    const double d =
        stats::ks_statistic(sample, [&](double v) { return stats::normal_cdf(v, eq); });
    const double p = stats::ks_p_value(d, n);
    return {p > 0.01, fmt("KS vs equilibrium at t=%.3f: D=%.4f, p=%.3f (gate p>0.01)", t, d, p)};
}

// --- 3. Kinetic-equation solver reproduces the exact density --------------
Outcome criterion3() {
    const GasParams& p = kGasA;
    const double v_max = 10.0 * std::sqrt(std::max(p.sigma0_sq, p.equilibrium_variance()));
    const boltzmann::SolverOptions opts;

    // Equilibrium is a fixed point of the collision operator on this grid.
    const auto eq_grid =
        boltzmann::DensityGrid::gaussian(v_max, 2048, p.equilibrium_variance());
    const double eq_residual = boltzmann::stationarity_residual(eq_grid, p, opts);
    bool pass = eq_residual < 1e-6 * p.lambda;

    auto grid = boltzmann::DensityGrid::gaussian(v_max, 2048, p.sigma0_sq);
    double t_prev = 0.0, max_drift = 0.0, clipped = 0.0, worst_l1 = 0.0;
    for (double t : {0.5, 1.0, 2.0}) {
        boltzmann::EvolveReport report;
        grid = boltzmann::evolve_density(grid, p, t - t_prev, 0.05, opts, &report);
        max_drift = std::max(max_drift, report.max_step_mass_drift);
        clipped += report.clipped_mass;
        const timeproc::MixtureDensity mix(t, p, 1e-12);
        double l1 = 0.0;
        for (std::size_t i = 0; i < grid.size(); ++i)
            l1 += std::abs(grid.values()[i] - mix.pdf(grid.point(i)));
        l1 *= grid.spacing();
        worst_l1 = std::max(worst_l1, l1);
        if (!(l1 < 1e-3)) pass = false;
        t_prev = t;
    }
    if (!(max_drift < 1e-8) || !(clipped < 1e-6)) pass = false;
    return {pass, fmt("worst L1=%.2e (gate 1e-3), eq residual=%.2e (gate %.0e), "
                      "drift=%.1e, clipped=%.1e",
                      worst_l1, eq_residual, 1e-6 * p.lambda, max_drift, clipped)};
}

// --- 4. Renormalized chain converges to its diffusion limit ---------------
Outcome criterion4() {
    const auto r = ou::RenormalizedParams::create(0.5, 1.0, 1.0);
    const std::vector<double> lambdas = {10.0, 100.0, 1000.0, 10000.0};
    const std::size_t trials = 1000;
    std::vector<ou::ExceedancePoint> pts;
    std::uint64_t offset = 0;
    for (double ln : lambdas) {
        const auto exp =
            ou::run_coupled_experiment(r, ln, {1.0}, trials, 0.1, 104, offset, 0);
        pts.push_back(exp.exceedance.front());
        offset += trials;
    }
    bool decreasing = true;
    for (std::size_t i = 1; i < pts.size(); ++i)
        if (!(pts[i].exceedance < pts[i - 1].exceedance)) decreasing = false;
    const bool separated = pts.front().ci_lo > pts.back().ci_hi;
    std::string seq;
    for (const auto& pt : pts) seq += fmt("%.3f ", pt.exceedance);
    return {decreasing && separated,
            fmt("P(|V-Y|>0.1) over lambda_n=10..1e4: %s(strictly decreasing=%s, "
                "first/last CIs disjoint=%s)",
                seq.c_str(), decreasing ? "yes" : "no", separated ? "yes" : "no")};
}

// --- 5. Crossing-frequency curve: conjectured monotone increase -----------
Outcome criterion5() {
    const auto curve = crossing::frequency_curve(kGasA, 200, 10000, 105, 0);
    const bool no_resolved_decrease = curve.violation_score <= 0.0;

    const auto eq = GasParams::create(1.0, 1.0, 1.0, 1.0, 1.0);
    const auto start = crossing::frequency_curve(eq, 2, 10000, 1055, 0);
    const double z1 = std::abs(start.mean[0] - 0.5) / start.se[0];
    const bool start_ok = z1 < 4.0;

    return {no_resolved_decrease && start_ok,
            fmt("E(W_n) never decreases beyond the z=%.2f band: %s "
                "(violation score %.4f; curve is provably decreasing, kept red); "
                "E(W_1)=1/2 at equal scales: |z|=%.2f (gate 4)",
                curve.band_z, no_resolved_decrease ? "yes" : "no",
                curve.violation_score, z1)};
}

// --- 6. Recurrence: many sign-region returns within 1e4 collisions --------
Outcome criterion6() {
    const auto p = GasParams::create(3.0, 1.0, 1.0, 1.0, 2.0);
    const auto pts = crossing::recurrence_evidence(p, {10000}, 10, 1000, 106, 0);
    const double frac = pts.front().fraction;
    return {frac > 0.99,
            fmt("fraction with >=10 crossings by n=1e4: %.4f (gate 0.99)", frac)};
}

// --- 7. First-crossing times: Wald identity and the kinetic lower bound ---
Outcome criterion7() {
    struct Set {
        const char* name;
        GasParams p;
    };
    const std::vector<Set> sets = {
        {"A", kGasA},
        {"B", GasParams::create(1.0, 1.0, 1.0, 1.0, 1.0)},
        {"C", GasParams::create(13.0 / 7.0, 1.0, 2.0, 1.0, 1.0)},
        {"D", GasParams::create(9.0, 1.0, 4.0, 1.0, 2.0)},
        {"E", GasParams::create(3.0, 1.0, 9.0, 1.0, 4.0)},
    };
    bool pass = true;
    std::string detail;
    for (std::size_t i = 0; i < sets.size(); ++i) {
        const auto [records, summary] =
            crossing::hitting_experiment(sets[i].p, 10000, 100000, 107 + i, 0);
        const double bound = crossing::tau1_lower_bound(sets[i].p);
        const bool wald_ok = summary.wald_ratio > 0.98 && summary.wald_ratio < 1.02;
        const bool bound_ok = summary.mean_tau1 > bound;
        if (!wald_ok || !bound_ok) pass = false;
        detail += fmt("%s: wald=%.4f tau=%.2f>bound %.2f%s ", sets[i].name,
                      summary.wald_ratio, summary.mean_tau1, bound,
                      (wald_ok && bound_ok) ? "" : " <-FAIL");
    }
    return {pass, "per set (wald gate [0.98,1.02]): " + detail};
}

// --- 8. Kinetic-energy relaxation rate and finite-ensemble fluctuations ---
Outcome criterion8() {
    // Rate fit on a strongly heated start (75x the bath temperature): the
    // residual then dominates the ensemble noise across the whole window,
    // which keeps the log-residual fit well conditioned at M = 1e4.
    const auto hot = GasParams::create(3.0, 1.0, 100.0, 1.0, 2.0);
    const auto trace = dephasing::kinetic_energy_trace(hot, 10000, 2.1, 0.02, 108, 0);
    const double fitted = dephasing::equilibration_rate(trace, 2.0);
    const double analytic = hot.relaxation_rate();
    const bool rate_ok = std::abs(fitted / analytic - 1.0) <= 0.05;

    const auto big = dephasing::kinetic_energy_trace(kGasA, 10000, 4.0, 0.02, 108, 500000);
    const auto tiny = dephasing::kinetic_energy_trace(kGasA, 2, 4.0, 0.02, 108, 1000000);
    const double f_big = dephasing::tail_fluctuation(big, 2.0);
    const double f_tiny = dephasing::tail_fluctuation(tiny, 2.0);
    const bool fluct_ok = f_tiny >= 10.0 * f_big;
    return {rate_ok && fluct_ok,
            fmt("fitted rate %.4f vs %.4f (gate 5%%); tail fluctuation M=2/M=1e4 = %.1fx "
                "(gate 10x)",
                fitted, analytic, f_tiny / f_big)};
}

// --- 9. Dephasing envelope of the randomly detuned oscillator -------------
Outcome criterion9() {
    const double horizon = 2.0, dt = 1.0 / 256.0;
    const std::size_t traces = 4000;
    const std::vector<double> checks = {1.0, 1.5, 2.0};
    std::vector<stats::MomentAccumulator> acc(checks.size());
    for (std::size_t i = 0; i < traces; ++i) {
        rng::Stream s(109, i);
        const auto tr = dephasing::kubo_trace(0.0, 1.0, horizon, dt, s);
        for (std::size_t j = 0; j < checks.size(); ++j) {
            const auto k = static_cast<std::size_t>(std::llround(checks[j] / dt));
            acc[j].add(std::cos(tr.phase[k]));
        }
    }
    bool pass = true;
    double worst = 0.0;
    for (std::size_t j = 0; j < checks.size(); ++j) {
        const double expected = std::exp(-std::pow(checks[j], 3) / 6.0);
        const double z = std::abs(acc[j].mean() - expected) / acc[j].mean_se();
        worst = std::max(worst, z);
        if (!(z < 3.0)) pass = false;
    }

    rng::Stream s(1090, 0);
    const auto pure = dephasing::kubo_trace(2.0, 0.0, 4.0, 1.0 / 512.0, s);
    double sin_err = 0.0;
    for (std::size_t k = 0; k < pure.times.size(); ++k)
        sin_err = std::max(sin_err, std::abs(pure.signal[k] - std::sin(2.0 * pure.times[k])));
    if (!(sin_err < 1e-9)) pass = false;
    return {pass, fmt("envelope exp(-t^3/6), M=%zu: worst |z|=%.2f (gate 3); "
                      "noiseless sinusoid max err=%.1e (gate 1e-9)",
                      traces, worst, sin_err)};
}

// --- 10. Outputs are byte-identical for any worker count ------------------
Outcome criterion10() {
    const auto read_all = [](const fs::path& dir) {
        std::vector<std::pair<std::string, std::string>> files;
        for (const auto& entry : fs::directory_iterator(dir)) {
            if (entry.path().extension() != ".csv") continue;
            std::ifstream in(entry.path(), std::ios::binary);
            std::ostringstream ss;
            ss << in.rdbuf();
            files.emplace_back(entry.path().filename().string(), ss.str());
        }
        std::sort(files.begin(), files.end());
        return files;
    };
    const std::vector<std::string> configs = {
        R"({"experiment": "crossings", "seed": 11,
            "gas": {"m_p": 3.0, "m_q": 1.0, "sigma0_sq": 4.0, "sigmax_sq": 1.0, "lambda": 2.0},
            "crossings": {"n_max": 50, "trials": 2000, "times": [0.5, 2.0],
                          "recurrence": {"checkpoints": [100, 1000], "k_crossings": 2,
                                         "trials": 1000}}})",
        R"({"experiment": "dephasing", "seed": 12,
            "gas": {"m_p": 3.0, "m_q": 1.0, "sigma0_sq": 4.0, "sigmax_sq": 1.0, "lambda": 2.0},
            "dephasing": {"ensemble": 500, "horizon": 2.0, "dt_sample": 0.1}})",
    };
    bool pass = true;
    std::size_t compared = 0;
    for (std::size_t i = 0; i < configs.size(); ++i) {
        auto parsed = runner::parse_config(configs[i]);
        if (!parsed.ok()) return {false, "internal: registered config failed to parse"};
        const fs::path d1 = fs::temp_directory_path() / fmt("thermeq_accept_%zu_w1", i);
        const fs::path d4 = fs::temp_directory_path() / fmt("thermeq_accept_%zu_w4", i);
        fs::remove_all(d1);
        fs::remove_all(d4);
        parsed.config->workers = 1;
        runner::run(*parsed.config, d1.string());
        parsed.config->workers = 4;
        runner::run(*parsed.config, d4.string());
        const auto a = read_all(d1), b = read_all(d4);
        if (a.size() != b.size() || a.empty()) pass = false;
        for (std::size_t k = 0; k < std::min(a.size(), b.size()); ++k, ++compared)
            if (a[k] != b[k]) pass = false;
    }
    return {pass, fmt("%zu CSV files compared across 1 vs 4 workers: %s", compared,
                      pass ? "byte-identical" : "MISMATCH")};
}

}  // namespace

int main() {
    struct Row {
        int id;
        const char* label;
        std::function<Outcome()> fn;
    };
    const std::vector<Row> rows = {
        {1, "ensemble variance follows the relaxation law", criterion1},
        {2, "deep-time law is the equilibrium Gaussian", criterion2},
        {3, "kinetic solver matches the exact density", criterion3},
        {4, "renormalized chain converges to the diffusion limit", criterion4},
        {5, "crossing-frequency curve never decreases", criterion5},
        {6, "sign-region returns recur many times", criterion6},
        {7, "first-crossing times obey Wald and the kinetic bound", criterion7},
        {8, "energy relaxation rate and ensemble-size fluctuations", criterion8},
        {9, "oscillator dephasing envelope", criterion9},
        {10, "outputs independent of worker count", criterion10},
    };
    int failures = 0;
    for (const auto& row : rows) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = row.fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("[%s] criterion %2d: %s (%.1fs) — %s\n", o.pass ? "PASS" : "FAIL", row.id,
                    row.label, secs, o.detail.c_str());
        std::fflush(stdout);
        if (!o.pass) ++failures;
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(rows.size()) - failures,
                rows.size());
    return failures;
}
