#pragma once

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "thermeq/boltzmann.hpp"
#include "thermeq/collision_chain.hpp"
#include "thermeq/crossing.hpp"
#include "thermeq/csv.hpp"
#include "thermeq/dephasing.hpp"
#include "thermeq/gas_params.hpp"
#include "thermeq/ou.hpp"
#include "thermeq/time_process.hpp"

// Config-driven experiment runner: strict JSON configs in, deterministic CSVs
// plus a manifest out.  Given the same config and seed, output bytes are
// identical for any worker count.
namespace thermeq::runner {

inline constexpr const char* kToolName = "thermeq";
inline constexpr const char* kToolVersion = "0.1.0";

struct ChainSpec {
    std::uint64_t collisions = 0;
    std::uint64_t trajectories = 0;
    bool record_impulses = false;
};

struct TimeSpec {
    double horizon = 0.0;
    std::uint64_t trajectories = 0;
    std::optional<double> density_time;   // also dump the exact mixture density
    std::uint64_t density_points = 512;
    double density_tail_tol = 1e-10;
};

struct BoltzmannSpec {
    std::uint64_t grid_points = 2048;
    double v_max_sigmas = 10.0;  // half-width in equilibrium standard deviations
    double dt = 0.0;
    std::vector<double> times;  // snapshot times, strictly increasing, > 0
};

struct OuConvergeSpec {
    double alpha = 0.5;
    double sigma_x0 = 1.0;
    double sigma0_sq = 0.0;
    double epsilon = 0.1;
    std::vector<double> lambda_n;  // strictly increasing collision rates
    std::vector<double> t_eval;
    std::uint64_t trials = 0;
    bool write_errors = true;  // per-trial error rows can get large
};

struct RecurrenceSpec {
    std::vector<std::uint64_t> checkpoints;
    std::uint32_t k_crossings = 1;
    std::uint64_t trials = 0;
};

struct CrossingsSpec {
    std::uint64_t n_max = 0;
    std::uint64_t trials = 0;
    std::vector<double> times;  // optional Poisson-clock evaluation times
    std::optional<RecurrenceSpec> recurrence;
};

struct HittingSpec {
    std::uint64_t cap = 0;
    std::uint64_t trials = 0;
};

struct TemperatureSpec {
    std::vector<double> ratios;
    crossing::LambdaMode mode = crossing::LambdaMode::kFixed;
    std::uint64_t cap = 0;
    std::uint64_t trials = 0;
};

struct DephasingSpec {
    std::uint64_t ensemble = 0;
    double horizon = 0.0;
    double dt_sample = 0.0;
    double fit_t_max = 0.0;   // 0 -> horizon / 2
    double tail_from = 0.0;   // 0 -> horizon / 2
};

struct KuboSpec {
    double omega0 = 0.0;
    double sigma_w = 0.0;
    double horizon = 0.0;
    double dt = 0.0;
    std::uint64_t traces = 0;
};

using ExperimentSpec = std::variant<ChainSpec, TimeSpec, BoltzmannSpec, OuConvergeSpec,
                                    CrossingsSpec, HittingSpec, TemperatureSpec, DephasingSpec,
                                    KuboSpec>;

struct RunConfig {
    std::string experiment;
    std::uint64_t seed = 0;
    unsigned workers = 0;  // 0 -> hardware concurrency
    std::optional<std::string> output_dir;
    std::optional<GasParams> gas;
    ExperimentSpec spec;
    nlohmann::json echo;  // normalized copy of the input config
};

struct ParseOutcome {
    std::optional<RunConfig> config;
    std::vector<std::string> errors;
    bool ok() const { return errors.empty() && config.has_value(); }
};

namespace detail {

using nlohmann::json;

// Typed, strict reader for one JSON object: unknown keys are errors.
class ObjectReader {
public:
    ObjectReader(const json& obj, std::string prefix, std::vector<std::string>& errors)
        : obj_(obj), prefix_(std::move(prefix)), errors_(errors) {}

    bool has(const std::string& name) {
        return obj_.contains(name);
    }

    template <class Check>
    std::optional<double> number(const std::string& name, bool required, Check check,
                                 const char* expectation) {
        mark(name);
        if (!obj_.contains(name)) {
            if (required) fail(name, "required field missing");
            return std::nullopt;
        }
        const auto& v = obj_.at(name);
        if (!v.is_number()) {
            fail(name, "expected a number");
            return std::nullopt;
        }
        const double x = v.get<double>();
        if (!check(x)) {
            fail(name, expectation);
            return std::nullopt;
        }
        return x;
    }

    std::optional<std::uint64_t> uinteger(const std::string& name, bool required,
                                          std::uint64_t min_value) {
        mark(name);
        if (!obj_.contains(name)) {
            if (required) fail(name, "required field missing");
            return std::nullopt;
        }
        const auto& v = obj_.at(name);
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
            fail(name, "expected a nonnegative integer");
            return std::nullopt;
        }
        const std::uint64_t x = v.get<std::uint64_t>();
        if (x < min_value) {
            fail(name, "value below minimum " + std::to_string(min_value));
            return std::nullopt;
        }
        return x;
    }

    std::optional<bool> boolean(const std::string& name) {
        mark(name);
        if (!obj_.contains(name)) return std::nullopt;
        const auto& v = obj_.at(name);
        if (!v.is_boolean()) {
            fail(name, "expected a boolean");
            return std::nullopt;
        }
        return v.get<bool>();
    }

    std::optional<std::string> text(const std::string& name, bool required) {
        mark(name);
        if (!obj_.contains(name)) {
            if (required) fail(name, "required field missing");
            return std::nullopt;
        }
        const auto& v = obj_.at(name);
        if (!v.is_string()) {
            fail(name, "expected a string");
            return std::nullopt;
        }
        return v.get<std::string>();
    }

    std::optional<std::vector<double>> number_array(const std::string& name, bool required) {
        mark(name);
        if (!obj_.contains(name)) {
            if (required) fail(name, "required field missing");
            return std::nullopt;
        }
        const auto& v = obj_.at(name);
        if (!v.is_array() || v.empty()) {
            fail(name, "expected a non-empty array of numbers");
            return std::nullopt;
        }
        std::vector<double> out;
        for (const auto& e : v) {
            if (!e.is_number()) {
                fail(name, "expected a non-empty array of numbers");
                return std::nullopt;
            }
            out.push_back(e.get<double>());
        }
        return out;
    }

    std::optional<std::vector<std::uint64_t>> uinteger_array(const std::string& name,
                                                             bool required) {
        mark(name);
        if (!obj_.contains(name)) {
            if (required) fail(name, "required field missing");
            return std::nullopt;
        }
        const auto& v = obj_.at(name);
        if (!v.is_array() || v.empty()) {
            fail(name, "expected a non-empty array of nonnegative integers");
            return std::nullopt;
        }
        std::vector<std::uint64_t> out;
        for (const auto& e : v) {
            if (!e.is_number_unsigned() &&
                !(e.is_number_integer() && e.get<std::int64_t>() >= 0)) {
                fail(name, "expected a non-empty array of nonnegative integers");
                return std::nullopt;
            }
            out.push_back(e.get<std::uint64_t>());
        }
        return out;
    }

    const json* object(const std::string& name, bool required) {
        mark(name);
        if (!obj_.contains(name)) {
            if (required) fail(name, "required field missing");
            return nullptr;
        }
        const auto& v = obj_.at(name);
        if (!v.is_object()) {
            fail(name, "expected an object");
            return nullptr;
        }
        return &v;
    }

    void fail(const std::string& name, const std::string& what) {
        errors_.push_back(path(name) + ": " + what);
    }

    // Unknown keys are rejected so typos cannot silently change an experiment.
    void finish() {
        for (auto it = obj_.begin(); it != obj_.end(); ++it)
            if (!seen_.count(it.key())) errors_.push_back(path(it.key()) + ": unknown field");
    }

    std::string path(const std::string& name) const {
        return prefix_.empty() ? name : prefix_ + "." + name;
    }

private:
    void mark(const std::string& name) { seen_.insert(name); }
    const json& obj_;
    std::string prefix_;
    std::vector<std::string>& errors_;
    std::set<std::string> seen_;
};

inline bool positive(double x) { return x > 0.0; }
inline bool nonnegative(double x) { return x >= 0.0; }

inline bool strictly_increasing_positive(const std::vector<double>& xs) {
    for (std::size_t i = 0; i < xs.size(); ++i)
        if (!(xs[i] > 0.0) || (i > 0 && !(xs[i] > xs[i - 1]))) return false;
    return true;
}

// Duplicate keys are legal JSON but almost always a config mistake; the SAX
// pre-scan rejects them before normal parsing collapses the duplicates.
inline void scan_duplicate_keys(const std::string& text, std::vector<std::string>& errors) {
    std::vector<std::set<std::string>> stack;
    json::parser_callback_t cb = [&](int, json::parse_event_t event, json& val) {
        if (event == json::parse_event_t::object_start) {
            stack.emplace_back();
        } else if (event == json::parse_event_t::object_end) {
            stack.pop_back();
        } else if (event == json::parse_event_t::key) {
            const auto key = val.get<std::string>();
            if (!stack.back().insert(key).second)
                errors.push_back("duplicate key: \"" + key + "\"");
        }
        return true;
    };
    const auto discarded = json::parse(text, cb, false);
    (void)discarded;
}

inline std::optional<GasParams> read_gas(const json& gas, std::vector<std::string>& errors) {
    ObjectReader r(gas, "gas", errors);
    auto m_p = r.number("m_p", true, positive, "must be positive");
    auto m_q = r.number("m_q", true, positive, "must be positive");
    auto s0 = r.number("sigma0_sq", true, positive, "must be positive");
    auto sx = r.number("sigmax_sq", true, positive, "must be positive");
    auto lambda = r.number("lambda", true, positive, "must be positive");
    r.finish();
    if (!(m_p && m_q && s0 && sx && lambda)) return std::nullopt;
    if (!(*m_p >= *m_q)) {
        errors.push_back("gas.m_p: must satisfy m_p >= m_q > 0");
        return std::nullopt;
    }
    return GasParams::create(*m_p, *m_q, *s0, *sx, *lambda);
}

}  // namespace detail

inline const char* config_schema_text() {
    return R"(thermeq config (strict JSON; unknown or duplicate keys are rejected)

Top level:
  experiment   string, one of: chain | time | boltzmann | ou-converge |
               crossings | hitting | temperature | dephasing | kubo
  seed         nonnegative integer, optional (default 0)
  workers      nonnegative integer, optional (default 0 = all hardware threads;
               outputs are byte-identical for every worker count)
  output_dir   string, optional (else --output-dir, else $THERMEQ_OUTPUT_DIR, else '.')
  gas          object, required by every experiment except ou-converge and kubo:
                 m_p >= m_q > 0, sigma0_sq > 0, sigmax_sq > 0, lambda > 0
  <experiment> object named after the experiment, fields below.

chain:        collisions >= 1, trajectories >= 1, record_impulses? (bool)
              -> chain.csv (trajectory_id, n, velocity), n = 0 holds V_0
time:         horizon > 0, trajectories >= 1, density_time? (in [0, horizon]),
              density_points? (>= 8, default 512), density_tail_tol? (default 1e-10)
              -> time.csv (trajectory_id, jump_index, jump_time, velocity)
                 [jump_index 0 row carries V_0 at time 0]
              -> density.csv (v, density) when density_time is given
boltzmann:    grid_points? (>= 8, default 2048), v_max_sigmas? (> 0, default 10),
              dt > 0 with dt * lambda <= 0.1, times (strictly increasing, > 0)
              -> boltzmann.csv (t, v, f) snapshots
              -> boltzmann_summary.csv (t, l1_vs_mixture, residual, mass, variance)
ou-converge:  alpha in (0,1), sigma_x0 >= 0, sigma0_sq >= 0, epsilon > 0,
              lambda_n (strictly increasing, > 0), t_eval (strictly increasing, > 0),
              trials >= 1, write_errors? (bool, default true)
              -> ou_exceedance.csv (lambda_n, t, exceedance, ci_lo, ci_hi)
              -> ou_errors.csv (lambda_n, t, trial, abs_error) unless disabled
crossings:    n_max >= 2, trials >= 2, times? (strictly increasing, > 0),
              recurrence? { checkpoints (strictly increasing, >= 1),
                            k_crossings >= 1, trials >= 1 }
              -> crossing_curve.csv (n, mean_w, se_w, diff_mean, diff_se)
              -> crossing_summary.csv (trials, band_z, violation_score)
              -> time_crossings.csv (t, mean_w, se_w, zero_fraction, contributing)
              -> recurrence.csv (checkpoint, fraction, ci_lo, ci_hi)
hitting:      cap >= 1, trials >= 2
              -> hitting.csv (trial, n1, tau1, censored)
              -> hitting_summary.csv (trials, cap, censored_fraction, mean_n1, se_n1,
                 mean_tau1, se_tau1, median_n1, median_tau1, wald_ratio, lower_bound)
temperature:  ratios (> 0), lambda_mode ("fixed" | "kinetic"), cap >= 1, trials >= 2
              -> temperature.csv (ratio, lambda, bound, mean_tau1, ci_lo, ci_hi,
                 censored_fraction)
dephasing:    ensemble >= 2, horizon > 0, 0 < dt_sample <= horizon,
              fit_t_max? (0 < x <= horizon, default horizon/2),
              tail_from? (0 <= x < horizon, default horizon/2)
              -> dephasing.csv (t, mean_ke, se_ke)
              -> dephasing_summary.csv (ensemble, equilibrium_ke, fitted_rate,
                 analytic_rate, tail_fluctuation)
kubo:         omega0, sigma_w >= 0, horizon > 0, 0 < dt <= horizon, traces >= 1
              -> kubo.csv (trace_id, t, phase, signal)

Every run writes manifest.json: tool version, RNG construction id, the
normalized config, effective seed, wall time, and an FNV-1a 64 checksum per
output file.
)";
}

// Parse and validate a config document; collects as many field-level errors
// as possible instead of stopping at the first.
inline ParseOutcome parse_config(const std::string& text) {
    using nlohmann::json;
    ParseOutcome out;
    json root;
    try {
        root = json::parse(text);
    } catch (const json::exception& e) {
        out.errors.push_back(std::string("invalid JSON: ") + e.what());
        return out;
    }
    if (!root.is_object()) {
        out.errors.push_back("config root must be a JSON object");
        return out;
    }
    detail::scan_duplicate_keys(text, out.errors);
    if (!out.errors.empty()) return out;

    RunConfig cfg;
    detail::ObjectReader top(root, "", out.errors);
    auto experiment = top.text("experiment", true);
    auto seed = top.uinteger("seed", false, 0);
    auto workers = top.uinteger("workers", false, 0);
    auto output_dir = top.text("output_dir", false);
    if (!experiment) {
        top.finish();
        return out;
    }
    cfg.experiment = *experiment;
    cfg.seed = seed.value_or(0);
    cfg.workers = static_cast<unsigned>(workers.value_or(0));
    if (output_dir) cfg.output_dir = *output_dir;

    const std::set<std::string> kGasFree = {"ou-converge", "kubo"};
    const std::set<std::string> kKnown = {"chain",    "time",        "boltzmann",
                                          "ou-converge", "crossings", "hitting",
                                          "temperature", "dephasing", "kubo"};
    if (!kKnown.count(cfg.experiment)) {
        out.errors.push_back("experiment: unknown experiment \"" + cfg.experiment + "\"");
        return out;
    }
    if (!kGasFree.count(cfg.experiment)) {
        const nlohmann::json* gas_obj = top.object("gas", true);
        if (gas_obj) cfg.gas = detail::read_gas(*gas_obj, out.errors);
    }

    const nlohmann::json* block = top.object(cfg.experiment, true);
    top.finish();
    if (!block) return out;

    using detail::ObjectReader;
    using detail::positive;
    auto& errors = out.errors;

    if (cfg.experiment == "chain") {
        ObjectReader r(*block, "chain", errors);
        ChainSpec s;
        auto collisions = r.uinteger("collisions", true, 1);
        auto traj = r.uinteger("trajectories", true, 1);
        auto rec = r.boolean("record_impulses");
        r.finish();
        if (collisions) s.collisions = *collisions;
        if (traj) s.trajectories = *traj;
        s.record_impulses = rec.value_or(false);
        cfg.spec = s;
    } else if (cfg.experiment == "time") {
        ObjectReader r(*block, "time", errors);
        TimeSpec s;
        auto horizon = r.number("horizon", true, positive, "must be positive");
        auto traj = r.uinteger("trajectories", true, 1);
        auto dt = r.number("density_time", false, detail::nonnegative, "must be >= 0");
        auto dp = r.uinteger("density_points", false, 8);
        auto tol = r.number(
            "density_tail_tol", false, [](double x) { return x > 0.0 && x < 1.0; },
            "must be in (0,1)");
        r.finish();
        if (horizon) s.horizon = *horizon;
        if (traj) s.trajectories = *traj;
        if (dt) {
            if (horizon && *dt > *horizon)
                r.fail("density_time", "must not exceed horizon");
            else
                s.density_time = *dt;
        }
        if (dp) s.density_points = *dp;
        if (tol) s.density_tail_tol = *tol;
        cfg.spec = s;
    } else if (cfg.experiment == "boltzmann") {
        ObjectReader r(*block, "boltzmann", errors);
        BoltzmannSpec s;
        auto gp = r.uinteger("grid_points", false, 8);
        auto vm = r.number("v_max_sigmas", false, positive, "must be positive");
        auto dt = r.number("dt", true, positive, "must be positive");
        auto times = r.number_array("times", true);
        r.finish();
        if (gp) s.grid_points = *gp;
        if (vm) s.v_max_sigmas = *vm;
        if (dt) {
            s.dt = *dt;
            if (cfg.gas && s.dt * cfg.gas->lambda > 0.1 * (1.0 + 1e-12))
                r.fail("dt", "dt * lambda exceeds the stability bound 0.1");
        }
        if (times) {
            if (!detail::strictly_increasing_positive(*times))
                r.fail("times", "must be strictly increasing and positive");
            else
                s.times = *times;
        }
        cfg.spec = s;
    } else if (cfg.experiment == "ou-converge") {
        ObjectReader r(*block, "ou-converge", errors);
        OuConvergeSpec s;
        auto alpha = r.number(
            "alpha", true, [](double x) { return x > 0.0 && x < 1.0; }, "must be in (0,1)");
        auto sx0 = r.number("sigma_x0", true, detail::nonnegative, "must be >= 0");
        auto s0 = r.number("sigma0_sq", true, detail::nonnegative, "must be >= 0");
        auto eps = r.number("epsilon", true, positive, "must be positive");
        auto ln = r.number_array("lambda_n", true);
        auto te = r.number_array("t_eval", true);
        auto trials = r.uinteger("trials", true, 1);
        auto we = r.boolean("write_errors");
        r.finish();
        if (alpha) s.alpha = *alpha;
        if (sx0) s.sigma_x0 = *sx0;
        if (s0) s.sigma0_sq = *s0;
        if (eps) s.epsilon = *eps;
        if (ln) {
            if (!detail::strictly_increasing_positive(*ln))
                r.fail("lambda_n", "must be strictly increasing and positive");
            else
                s.lambda_n = *ln;
        }
        if (te) {
            if (!detail::strictly_increasing_positive(*te))
                r.fail("t_eval", "must be strictly increasing and positive");
            else
                s.t_eval = *te;
        }
        if (trials) s.trials = *trials;
        s.write_errors = we.value_or(true);
        cfg.spec = s;
    } else if (cfg.experiment == "crossings") {
        ObjectReader r(*block, "crossings", errors);
        CrossingsSpec s;
        auto n_max = r.uinteger("n_max", true, 2);
        auto trials = r.uinteger("trials", true, 2);
        auto times = r.number_array("times", false);
        const nlohmann::json* rec = r.object("recurrence", false);
        r.finish();
        if (n_max) s.n_max = *n_max;
        if (trials) s.trials = *trials;
        if (times) {
            if (!detail::strictly_increasing_positive(*times))
                r.fail("times", "must be strictly increasing and positive");
            else
                s.times = *times;
        }
        if (rec) {
            ObjectReader rr(*rec, "crossings.recurrence", errors);
            RecurrenceSpec rs;
            auto cps = rr.uinteger_array("checkpoints", true);
            auto k = rr.uinteger("k_crossings", true, 1);
            auto rtrials = rr.uinteger("trials", true, 1);
            rr.finish();
            bool ok = true;
            if (cps) {
                for (std::size_t i = 0; i < cps->size(); ++i)
                    if ((*cps)[i] == 0 || (i > 0 && (*cps)[i] <= (*cps)[i - 1])) ok = false;
                if (!ok)
                    rr.fail("checkpoints", "must be strictly increasing and >= 1");
                else
                    rs.checkpoints = *cps;
            }
            if (k) rs.k_crossings = static_cast<std::uint32_t>(*k);
            if (rtrials) rs.trials = *rtrials;
            s.recurrence = rs;
        }
        cfg.spec = s;
    } else if (cfg.experiment == "hitting") {
        ObjectReader r(*block, "hitting", errors);
        HittingSpec s;
        auto cap = r.uinteger("cap", true, 1);
        auto trials = r.uinteger("trials", true, 2);
        r.finish();
        if (cap) s.cap = *cap;
        if (trials) s.trials = *trials;
        cfg.spec = s;
    } else if (cfg.experiment == "temperature") {
        ObjectReader r(*block, "temperature", errors);
        TemperatureSpec s;
        auto ratios = r.number_array("ratios", true);
        auto mode = r.text("lambda_mode", true);
        auto cap = r.uinteger("cap", true, 1);
        auto trials = r.uinteger("trials", true, 2);
        r.finish();
        if (ratios) {
            bool ok = true;
            for (double x : *ratios)
                if (!(x > 0.0)) ok = false;
            if (!ok)
                r.fail("ratios", "must all be positive");
            else
                s.ratios = *ratios;
        }
        if (mode) {
            if (*mode == "fixed")
                s.mode = crossing::LambdaMode::kFixed;
            else if (*mode == "kinetic")
                s.mode = crossing::LambdaMode::kKinetic;
            else
                r.fail("lambda_mode", "must be \"fixed\" or \"kinetic\"");
        }
        if (cap) s.cap = *cap;
        if (trials) s.trials = *trials;
        cfg.spec = s;
    } else if (cfg.experiment == "dephasing") {
        ObjectReader r(*block, "dephasing", errors);
        DephasingSpec s;
        auto ensemble = r.uinteger("ensemble", true, 2);
        auto horizon = r.number("horizon", true, positive, "must be positive");
        auto dts = r.number("dt_sample", true, positive, "must be positive");
        auto fit = r.number("fit_t_max", false, positive, "must be positive");
        auto tail = r.number("tail_from", false, detail::nonnegative, "must be >= 0");
        r.finish();
        if (ensemble) s.ensemble = *ensemble;
        if (horizon) s.horizon = *horizon;
        if (dts) {
            if (horizon && *dts > *horizon)
                r.fail("dt_sample", "must not exceed horizon");
            else
                s.dt_sample = *dts;
        }
        s.fit_t_max = fit.value_or(horizon ? *horizon / 2.0 : 0.0);
        s.tail_from = tail.value_or(horizon ? *horizon / 2.0 : 0.0);
        if (horizon && fit && *fit > *horizon) r.fail("fit_t_max", "must not exceed horizon");
        if (horizon && tail && *tail >= *horizon) r.fail("tail_from", "must be below horizon");
        cfg.spec = s;
    } else if (cfg.experiment == "kubo") {
        ObjectReader r(*block, "kubo", errors);
        KuboSpec s;
        auto omega0 = r.number("omega0", true, [](double) { return true; }, "");
        auto sw = r.number("sigma_w", true, detail::nonnegative, "must be >= 0");
        auto horizon = r.number("horizon", true, positive, "must be positive");
        auto dt = r.number("dt", true, positive, "must be positive");
        auto traces = r.uinteger("traces", true, 1);
        r.finish();
        if (omega0) s.omega0 = *omega0;
        if (sw) s.sigma_w = *sw;
        if (horizon) s.horizon = *horizon;
        if (dt) {
            if (horizon && *dt > *horizon)
                r.fail("dt", "must not exceed horizon");
            else
                s.dt = *dt;
        }
        if (traces) s.traces = *traces;
        cfg.spec = s;
    }

    if (!out.errors.empty()) return out;
    cfg.echo = root;
    out.config = std::move(cfg);
    return out;
}

struct OutputRecord {
    std::string file;
    std::uint64_t bytes = 0;
    std::string fnv1a64;
};

struct RunResult {
    std::filesystem::path output_dir;
    std::vector<OutputRecord> outputs;
    std::filesystem::path manifest_path;
};

namespace detail {

inline std::string fnv1a64_hex(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot reopen output for checksum: " + path.string());
    std::uint64_t h = 14695981039346656037ull;
    char buf[65536];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        const std::streamsize got = in.gcount();
        for (std::streamsize i = 0; i < got; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ull;
        }
        if (got < static_cast<std::streamsize>(sizeof(buf))) break;
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

// Writes one CSV and records its checksum; collects the path for cleanup on
// failure.
class OutputSet {
public:
    OutputSet(std::filesystem::path dir) : dir_(std::move(dir)) {}

    csv::Writer open(const std::string& name, const std::vector<std::string>& header) {
        const auto path = dir_ / name;
        written_.push_back(path);
        return csv::Writer(path.string(), header);
    }

    void seal(const std::string& name, std::vector<OutputRecord>& out) {
        const auto path = dir_ / name;
        OutputRecord rec;
        rec.file = name;
        rec.bytes = std::filesystem::file_size(path);
        rec.fnv1a64 = fnv1a64_hex(path);
        out.push_back(rec);
    }

    void discard_all() {
        std::error_code ec;
        for (const auto& p : written_) std::filesystem::remove(p, ec);
    }

private:
    std::filesystem::path dir_;
    std::vector<std::filesystem::path> written_;
};

}  // namespace detail

// Executes a validated config.  Throws std::runtime_error on any failure after
// removing partial outputs; on success the directory holds the CSVs plus
// manifest.json.
inline RunResult run(const RunConfig& cfg, const std::optional<std::string>& cli_output_dir = {},
                     const std::optional<std::uint64_t>& cli_seed = {}) {
    namespace fs = std::filesystem;
    const auto t_start = std::chrono::steady_clock::now();
    const std::uint64_t seed = cli_seed.value_or(cfg.seed);

    fs::path dir;
    if (cli_output_dir)
        dir = *cli_output_dir;
    else if (cfg.output_dir)
        dir = *cfg.output_dir;
    else if (const char* env = std::getenv("THERMEQ_OUTPUT_DIR"); env && *env)
        dir = env;
    else
        dir = ".";
    fs::create_directories(dir);

    RunResult result;
    result.output_dir = dir;
    detail::OutputSet outputs(dir);

    try {
        if (const auto* s = std::get_if<ChainSpec>(&cfg.spec)) {
            const GasParams& p = *cfg.gas;
            std::vector<chain::Trajectory> trajs(s->trajectories);
            parallel::parallel_for(s->trajectories, cfg.workers, [&](std::size_t i) {
                rng::Stream stream(seed, i);
                trajs[i] = chain::simulate_chain(p, s->collisions, stream, s->record_impulses);
            });
            auto w = outputs.open("chain.csv", {"trajectory_id", "n", "velocity"});
            for (std::size_t i = 0; i < trajs.size(); ++i) {
                w.row({i, std::uint64_t{0}, trajs[i].v0});
                for (std::size_t n = 0; n < trajs[i].velocities.size(); ++n)
                    w.row({i, n + 1, trajs[i].velocities[n]});
            }
            w.close();
            outputs.seal("chain.csv", result.outputs);
        } else if (const auto* s = std::get_if<TimeSpec>(&cfg.spec)) {
            const GasParams& p = *cfg.gas;
            std::vector<timeproc::Trajectory> trajs(s->trajectories);
            parallel::parallel_for(s->trajectories, cfg.workers, [&](std::size_t i) {
                rng::Stream stream(seed, i);
                trajs[i] = timeproc::simulate(p, s->horizon, stream);
            });
            auto w = outputs.open("time.csv",
                                  {"trajectory_id", "jump_index", "jump_time", "velocity"});
            for (std::size_t i = 0; i < trajs.size(); ++i) {
                w.row({i, std::uint64_t{0}, 0.0, trajs[i].v0});
                for (std::size_t k = 0; k < trajs[i].jump_times.size(); ++k)
                    w.row({i, k + 1, trajs[i].jump_times[k], trajs[i].velocities[k]});
            }
            w.close();
            outputs.seal("time.csv", result.outputs);
            if (s->density_time) {
                const timeproc::MixtureDensity mix(*s->density_time, p, s->density_tail_tol);
                const double sd = std::sqrt(
                    std::max(time_variance(*s->density_time, p), p.equilibrium_variance()));
                const boltzmann::DensityGrid grid(10.0 * sd,
                                                  std::vector<double>(s->density_points, 0.0));
                auto dw = outputs.open("density.csv", {"v", "density"});
                for (std::size_t i = 0; i < s->density_points; ++i)
                    dw.row({grid.point(i), mix.pdf(grid.point(i))});
                dw.close();
                outputs.seal("density.csv", result.outputs);
            }
        } else if (const auto* s = std::get_if<BoltzmannSpec>(&cfg.spec)) {
            const GasParams& p = *cfg.gas;
            const double v_max = s->v_max_sigmas * std::sqrt(std::max(
                                     p.sigma0_sq, p.equilibrium_variance()));
            boltzmann::DensityGrid grid =
                boltzmann::DensityGrid::gaussian(v_max, s->grid_points, p.sigma0_sq);
            auto w = outputs.open("boltzmann.csv", {"t", "v", "f"});
            auto sw = outputs.open("boltzmann_summary.csv",
                                   {"t", "l1_vs_mixture", "residual", "mass", "variance"});
            double t_prev = 0.0;
            boltzmann::SolverOptions opts;
            for (double t : s->times) {
                boltzmann::EvolveReport report;
                grid = boltzmann::evolve_density(grid, p, t - t_prev, s->dt, opts, &report);
                const timeproc::MixtureDensity mix(t, p, 1e-12);
                double l1 = 0.0;
                for (std::size_t i = 0; i < grid.size(); ++i) {
                    const double v = grid.point(i);
                    l1 += std::abs(grid.values()[i] - mix.pdf(v));
                    w.row({t, v, grid.values()[i]});
                }
                l1 *= grid.spacing();
                sw.row({t, l1, boltzmann::stationarity_residual(grid, p, opts), grid.mass(),
                        grid.variance()});
                t_prev = t;
            }
            w.close();
            sw.close();
            outputs.seal("boltzmann.csv", result.outputs);
            outputs.seal("boltzmann_summary.csv", result.outputs);
        } else if (const auto* s = std::get_if<OuConvergeSpec>(&cfg.spec)) {
            const auto r = ou::RenormalizedParams::create(s->alpha, s->sigma_x0, s->sigma0_sq);
            auto ew = outputs.open("ou_exceedance.csv",
                                   {"lambda_n", "t", "exceedance", "ci_lo", "ci_hi"});
            std::optional<csv::Writer> errw;
            if (s->write_errors)
                errw.emplace(outputs.open("ou_errors.csv", {"lambda_n", "t", "trial", "abs_error"}));
            std::uint64_t offset = 0;
            for (double lambda_n : s->lambda_n) {
                const auto exp = ou::run_coupled_experiment(r, lambda_n, s->t_eval, s->trials,
                                                            s->epsilon, seed, offset, cfg.workers);
                for (const auto& pt : exp.exceedance)
                    ew.row({lambda_n, pt.t, pt.exceedance, pt.ci_lo, pt.ci_hi});
                if (errw)
                    for (std::size_t trial = 0; trial < exp.abs_errors.size(); ++trial)
                        for (std::size_t k = 0; k < s->t_eval.size(); ++k)
                            errw->row({lambda_n, s->t_eval[k], trial, exp.abs_errors[trial][k]});
                offset += s->trials;
            }
            ew.close();
            outputs.seal("ou_exceedance.csv", result.outputs);
            if (errw) {
                errw->close();
                outputs.seal("ou_errors.csv", result.outputs);
            }
        } else if (const auto* s = std::get_if<CrossingsSpec>(&cfg.spec)) {
            const GasParams& p = *cfg.gas;
            const auto curve =
                crossing::frequency_curve(p, s->n_max, s->trials, seed, cfg.workers);
            auto w = outputs.open("crossing_curve.csv",
                                  {"n", "mean_w", "se_w", "diff_mean", "diff_se"});
            for (std::size_t i = 0; i < curve.mean.size(); ++i) {
                if (i + 1 < curve.mean.size())
                    w.row({i + 1, curve.mean[i], curve.se[i], curve.diff_mean[i],
                           curve.diff_se[i]});
                else
                    w.row({i + 1, curve.mean[i], curve.se[i], "", ""});
            }
            w.close();
            outputs.seal("crossing_curve.csv", result.outputs);
            auto sw = outputs.open("crossing_summary.csv",
                                   {"trials", "band_z", "violation_score"});
            sw.row({curve.trials, curve.band_z, curve.violation_score});
            sw.close();
            outputs.seal("crossing_summary.csv", result.outputs);
            if (!s->times.empty()) {
                const auto pts = crossing::time_frequency(p, s->times, s->trials, seed,
                                                          cfg.workers, s->trials);
                auto tw = outputs.open(
                    "time_crossings.csv",
                    {"t", "mean_w", "se_w", "zero_fraction", "contributing"});
                for (const auto& pt : pts)
                    tw.row({pt.t, pt.mean_w, pt.se_w, pt.zero_fraction, pt.contributing});
                tw.close();
                outputs.seal("time_crossings.csv", result.outputs);
            }
            if (s->recurrence) {
                const auto& rs = *s->recurrence;
                const auto pts = crossing::recurrence_evidence(
                    p, rs.checkpoints, rs.k_crossings, rs.trials, seed, cfg.workers,
                    2 * s->trials);
                auto rw = outputs.open("recurrence.csv",
                                       {"checkpoint", "fraction", "ci_lo", "ci_hi"});
                for (const auto& pt : pts)
                    rw.row({pt.checkpoint, pt.fraction, pt.ci_lo, pt.ci_hi});
                rw.close();
                outputs.seal("recurrence.csv", result.outputs);
            }
        } else if (const auto* s = std::get_if<HittingSpec>(&cfg.spec)) {
            const GasParams& p = *cfg.gas;
            const auto [records, summary] =
                crossing::hitting_experiment(p, s->cap, s->trials, seed, cfg.workers);
            auto w = outputs.open("hitting.csv", {"trial", "n1", "tau1", "censored"});
            for (std::size_t i = 0; i < records.size(); ++i)
                w.row({i, records[i].n1, records[i].tau1,
                       static_cast<std::uint64_t>(records[i].censored ? 1 : 0)});
            w.close();
            outputs.seal("hitting.csv", result.outputs);
            auto sw = outputs.open(
                "hitting_summary.csv",
                {"trials", "cap", "censored_fraction", "mean_n1", "se_n1", "mean_tau1",
                 "se_tau1", "median_n1", "median_tau1", "wald_ratio", "lower_bound"});
            sw.row({summary.trials, summary.cap, summary.censored_fraction, summary.mean_n1,
                    summary.se_n1, summary.mean_tau1, summary.se_tau1,
                    summary.n1_quantiles.q50, summary.tau1_quantiles.q50, summary.wald_ratio,
                    crossing::tau1_lower_bound(p)});
            sw.close();
            outputs.seal("hitting_summary.csv", result.outputs);
        } else if (const auto* s = std::get_if<TemperatureSpec>(&cfg.spec)) {
            const GasParams& p = *cfg.gas;
            const auto rows = crossing::temperature_scan(p, s->ratios, s->mode, s->cap,
                                                         s->trials, seed, cfg.workers);
            auto w = outputs.open("temperature.csv",
                                  {"ratio", "lambda", "bound", "mean_tau1", "ci_lo", "ci_hi",
                                   "censored_fraction"});
            for (const auto& row : rows)
                w.row({row.ratio, row.lambda, row.bound, row.mean_tau1, row.ci_lo, row.ci_hi,
                       row.censored_fraction});
            w.close();
            outputs.seal("temperature.csv", result.outputs);
        } else if (const auto* s = std::get_if<DephasingSpec>(&cfg.spec)) {
            const GasParams& p = *cfg.gas;
            const auto summary = dephasing::kinetic_energy_trace(
                p, s->ensemble, s->horizon, s->dt_sample, seed, cfg.workers);
            auto w = outputs.open("dephasing.csv", {"t", "mean_ke", "se_ke"});
            for (std::size_t k = 0; k < summary.times.size(); ++k)
                w.row({summary.times[k], summary.mean_ke[k], summary.se_ke[k]});
            w.close();
            outputs.seal("dephasing.csv", result.outputs);
            double fitted = std::numeric_limits<double>::quiet_NaN();
            try {
                fitted = dephasing::equilibration_rate(summary, s->fit_t_max);
            } catch (const std::exception&) {
                // ensemble too small or horizon too short for a usable fit
            }
            double tail = std::numeric_limits<double>::quiet_NaN();
            try {
                tail = dephasing::tail_fluctuation(summary, s->tail_from);
            } catch (const std::exception&) {
            }
            auto sw = outputs.open("dephasing_summary.csv",
                                   {"ensemble", "equilibrium_ke", "fitted_rate",
                                    "analytic_rate", "tail_fluctuation"});
            sw.row({summary.ensemble_size, summary.equilibrium_ke, fitted,
                    p.relaxation_rate(), tail});
            sw.close();
            outputs.seal("dephasing_summary.csv", result.outputs);
        } else if (const auto* s = std::get_if<KuboSpec>(&cfg.spec)) {
            auto w = outputs.open("kubo.csv", {"trace_id", "t", "phase", "signal"});
            for (std::uint64_t trace = 0; trace < s->traces; ++trace) {
                rng::Stream stream(seed, trace);
                const auto tr =
                    dephasing::kubo_trace(s->omega0, s->sigma_w, s->horizon, s->dt, stream);
                for (std::size_t k = 0; k < tr.times.size(); ++k)
                    w.row({trace, tr.times[k], tr.phase[k], tr.signal[k]});
            }
            w.close();
            outputs.seal("kubo.csv", result.outputs);
        } else {
            throw std::logic_error("run: unhandled experiment spec");
        }
    } catch (...) {
        outputs.discard_all();
        throw;
    }

    const auto t_end = std::chrono::steady_clock::now();
    nlohmann::json manifest;
    manifest["schema_version"] = 1;
    manifest["tool"] = {{"name", kToolName}, {"version", kToolVersion}};
    manifest["rng"] = rng::kConstructionId;
    manifest["experiment"] = cfg.experiment;
    manifest["seed"] = seed;
    manifest["workers_requested"] = cfg.workers;
    manifest["config"] = cfg.echo;
    manifest["duration_seconds"] =
        std::chrono::duration<double>(t_end - t_start).count();
    nlohmann::json outs = nlohmann::json::array();
    for (const auto& rec : result.outputs)
        outs.push_back({{"file", rec.file}, {"bytes", rec.bytes}, {"fnv1a64", rec.fnv1a64}});
    manifest["outputs"] = outs;
    result.manifest_path = result.output_dir / "manifest.json";
    {
        std::ofstream mf(result.manifest_path);
        if (!mf) throw std::runtime_error("cannot write manifest.json");
        mf << manifest.dump(2) << '\n';
    }
    return result;
}

}  // namespace thermeq::runner
