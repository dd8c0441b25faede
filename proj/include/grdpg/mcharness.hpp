#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>
#include <json.hpp>

#include "alignment.hpp"
#include "matrixkit.hpp"
#include "netmodel.hpp"
#include "packing.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "spectral.hpp"

namespace grdpg {

using json = nlohmann::json;

// value(n) = coef * n^exponent
struct ScheduleSpec {
    std::string label;
    double coef = 1.0;
    double exponent = 0.0;
    double at(double n) const { return coef * std::pow(n, exponent); }
    bool operator==(const ScheduleSpec&) const = default;
};

enum class ExperimentRegime { fixed_kappa, fixed_rho };

struct ExperimentConfig {
    std::string name = "custom";
    std::vector<Index> n_grid;
    int p = 2;
    int q = 1;
    ExperimentRegime regime = ExperimentRegime::fixed_kappa;
    double kappa = 6.0;                 // fixed_kappa
    double rho = 0.9;                   // fixed_rho
    std::vector<ScheduleSpec> schedule;  // rho specs or kappa specs
    int trials = 40;
    std::uint64_t seed = 20240531;
    DiagonalMode diagonal_mode = DiagonalMode::hollow;

    Signature signature() const { return {p, q}; }
    double rho_at(std::size_t s, double n) const { return regime == ExperimentRegime::fixed_kappa ? schedule[s].at(n) : rho; }
    double kappa_at(std::size_t s, double n) const {
        return regime == ExperimentRegime::fixed_rho ? schedule[s].at(n) : kappa;
    }
};

inline void validate(const ExperimentConfig& c) {
    validate(c.signature());
    require(c.signature() == Signature{2, 1}, "experiment: the simulation model has signature (2,1)");
    require(!c.n_grid.empty(), "experiment: n_grid is empty");
    for (std::size_t i = 0; i < c.n_grid.size(); ++i) {
        require(c.n_grid[i] >= 16, "experiment: grid sizes must be at least 16");
        if (i) require(c.n_grid[i] > c.n_grid[i - 1], "experiment: n_grid must be strictly increasing");
    }
    require(c.trials >= 1, "experiment: trials must be at least 1");
    require(!c.schedule.empty(), "experiment: schedule is empty");
    for (std::size_t s = 0; s < c.schedule.size(); ++s)
        for (Index n : c.n_grid) {
            const double r = c.rho_at(s, static_cast<double>(n)), k = c.kappa_at(s, static_cast<double>(n));
            require(r > 0.0 && r <= 1.0, "experiment: setting '" + c.schedule[s].label + "' gives rho = " +
                                             format_real(r) + " outside (0,1] at n = " + std::to_string(n));
            require(k >= 1.0, "experiment: setting '" + c.schedule[s].label + "' gives kappa = " + format_real(k) +
                                  " below 1 at n = " + std::to_string(n));
        }
}

// ---- presets ----

inline constexpr double paper_anchor_n = 9000.0;
inline constexpr double desk_anchor_n = 1000.0;

inline std::vector<Index> full_scale_grid() {
    std::vector<Index> g;
    for (Index n = 9000; n <= 20000; n += 1000) g.push_back(n);
    return g;
}

inline std::vector<Index> desk_grid() { return {1000, 1500, 2000, 3000, 4000}; }

inline ExperimentConfig preset_table1() {
    ExperimentConfig c;
    c.name = "table1";
    c.n_grid = full_scale_grid();
    c.regime = ExperimentRegime::fixed_kappa;
    c.kappa = 6.0;
    c.schedule = {{"rho=0.2", 0.2, 0.0},           {"rho=20n^(-1/2)", 20.0, -1.0 / 2},
                  {"rho=90n^(-2/3)", 90.0, -2.0 / 3}, {"rho=190n^(-3/4)", 190.0, -3.0 / 4},
                  {"rho=300n^(-4/5)", 300.0, -4.0 / 5}, {"rho=400n^(-5/6)", 400.0, -5.0 / 6},
                  {"rho=1800n^(-1)", 1800.0, -1.0}};
    c.trials = 240;
    return c;
}

inline ExperimentConfig preset_table2() {
    ExperimentConfig c;
    c.name = "table2";
    c.n_grid = full_scale_grid();
    c.regime = ExperimentRegime::fixed_rho;
    c.rho = 0.9;
    c.schedule = {{"kappa=2.414n^(1/10)", 1207.0 / 500, 1.0 / 10}, {"kappa=0.971n^(1/5)", 971.0 / 1000, 1.0 / 5},
                  {"kappa=0.391n^(3/10)", 391.0 / 1000, 3.0 / 10}, {"kappa=0.157n^(2/5)", 157.0 / 1000, 2.0 / 5},
                  {"kappa=0.063n^(1/2)", 63.0 / 1000, 1.0 / 2},    {"kappa=0.025n^(3/5)", 1.0 / 40, 3.0 / 5},
                  {"kappa=0.01n^(7/10)", 1.0 / 100, 7.0 / 10},     {"kappa=0.004n^(4/5)", 1.0 / 250, 4.0 / 5}};
    c.trials = 200;
    return c;
}

// Desk scale: smaller grid and M = 40; each schedule keeps its value at the anchor,
// moved from n = 9000 to n = 1000.
inline ExperimentConfig desk_scale(ExperimentConfig c) {
    const double ratio = paper_anchor_n / desk_anchor_n;
    for (auto& s : c.schedule) s.coef *= std::pow(ratio, s.exponent);
    c.n_grid = desk_grid();
    c.trials = 40;
    c.name += "-desk";
    return c;
}

inline ExperimentConfig preset(const std::string& name, bool full_scale) {
    ExperimentConfig c;
    if (name == "table1") c = preset_table1();
    else if (name == "table2") c = preset_table2();
    else throw ValidationError("unknown preset '" + name + "' (expected table1 or table2)");
    return full_scale ? c : desk_scale(c);
}

// ---- config JSON ----

inline json to_json(const ExperimentConfig& c) {
    json j;
    j["name"] = c.name;
    j["n_grid"] = c.n_grid;
    j["p"] = c.p;
    j["q"] = c.q;
    j["trials"] = c.trials;
    j["seed"] = c.seed;
    j["diagonal_mode"] = to_string(c.diagonal_mode);
    json specs = json::array();
    for (const auto& s : c.schedule) specs.push_back({{"label", s.label}, {"coef", s.coef}, {"exponent", s.exponent}});
    if (c.regime == ExperimentRegime::fixed_kappa) {
        j["regime"] = "fixed_kappa";
        j["kappa"] = c.kappa;
        j["rho_specs"] = specs;
    } else {
        j["regime"] = "fixed_rho";
        j["rho"] = c.rho;
        j["kappa_specs"] = specs;
    }
    return j;
}

inline ExperimentConfig config_from_json(const json& j) {
    try {
        ExperimentConfig c;
        c.name = j.value("name", std::string("custom"));
        c.n_grid = j.at("n_grid").get<std::vector<Index>>();
        c.p = j.value("p", 2);
        c.q = j.value("q", 1);
        c.trials = j.value("trials", 40);
        c.seed = j.value("seed", c.seed);
        c.diagonal_mode = parse_diagonal_mode(j.value("diagonal_mode", std::string("hollow")));
        const std::string regime = j.at("regime").get<std::string>();
        const char* key = nullptr;
        if (regime == "fixed_kappa") {
            c.regime = ExperimentRegime::fixed_kappa;
            c.kappa = j.at("kappa").get<double>();
            key = "rho_specs";
        } else if (regime == "fixed_rho") {
            c.regime = ExperimentRegime::fixed_rho;
            c.rho = j.at("rho").get<double>();
            key = "kappa_specs";
        } else {
            throw ValidationError("config: regime must be fixed_kappa or fixed_rho");
        }
        for (const auto& s : j.at(key))
            c.schedule.push_back({s.at("label").get<std::string>(), s.at("coef").get<double>(), s.value("exponent", 0.0)});
        validate(c);
        return c;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("config: ") + e.what());
    }
}

// FNV-1a over the canonical (sorted-key) JSON text.
inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline std::string config_hash(const json& j) { return hex64(fnv1a(j.dump())); }
inline std::string config_hash(const ExperimentConfig& c) { return config_hash(to_json(c)); }

// ---- model and trials ----

struct ExperimentModel {
    ProbabilityMatrix p;
    SpectralPair truth;  // eigenpairs of P itself: (U0, rho * Lambda0)
};

// U0 from the growing-regime frame with zeta = 1/sqrt(640 d); Lambda0 = (n/3, n/(3 kappa), n/(3 kappa)).
// Bypasses the packing parameter checks: the simulation runs at kappa = 6 < 3d.
inline ExperimentModel build_experiment_model(Index n, double rho, double kappa, int d = 3, int p = 2, int q = 1) {
    require(d == p + q && d == 3 && p == 2, "experiment model: only signature (2,1) is defined");
    require(rho > 0.0 && rho <= 1.0, "experiment model: rho must lie in (0,1]");
    require(kappa >= 1.0, "experiment model: kappa must be at least 1");
    const double nn = static_cast<double>(n);
    const double lambda1 = nn / 3.0;
    const BaseFrameGrowing bf = build_base_frame_growing_raw(n, d, kappa, lambda1, default_zeta(d));
    Vector mags(d);
    mags << lambda1, lambda1 / kappa, lambda1 / kappa;
    ExperimentModel m;
    m.truth = {bf.frame, rho * mags, Signature{p, q}};
    m.p = probability_matrix(SpectralPair{bf.frame, mags, Signature{p, q}}, rho);
    return m;
}

struct TrialRecord {
    Index n = 0;
    double rho = 0.0;
    double kappa = 0.0;
    int trial_index = 0;
    double latent_error = 0.0;    // l1
    double subspace_error = 0.0;  // l2
    bool failed = false;
    std::string failure;
};

struct TrialErrors {
    double latent = 0.0;
    double subspace = 0.0;
};

inline TrialErrors embedding_errors(const Embedding& e, const SpectralPair& truth) {
    const Signature& sig = truth.signature;
    const DenseMatrix xhat = e.pair.latent(), x = truth.latent();
    TrialErrors t;
    t.latent = tti_distance(xhat, x, sig);
    t.subspace = tti_distance(e.pair.frame, truth.frame, sig);
    return t;
}

inline TrialRecord run_trial(const ProbabilityMatrix& p0, const SpectralPair& truth, std::uint64_t seed,
                             int trial_index = 0, DiagonalMode mode = DiagonalMode::hollow) {
    require(p0.n() == truth.n(), "run_trial: model and truth sizes differ");
    TrialRecord r;
    r.n = p0.n();
    r.rho = p0.sparsity;
    r.trial_index = trial_index;
    const AdjacencyMatrix a = sample_adjacency(p0, seed, mode, static_cast<std::uint64_t>(trial_index));
    LanczosOptions opt;
    opt.seed = mix64(seed ^ (0x4c616e637a6f73ull + static_cast<std::uint64_t>(trial_index)));
    try {
        const Embedding e = adjacency_spectral_embedding(a, truth.signature, opt);
        const TrialErrors t = embedding_errors(e, truth);
        r.latent_error = t.latent;
        r.subspace_error = t.subspace;
    } catch (const ComputeError& ex) {
        throw ComputeError("trial " + std::to_string(trial_index) + " (n = " + std::to_string(r.n) +
                           ", seed = " + std::to_string(seed) + "): " + ex.what());
    }
    return r;
}

// The noiseless check: P itself in place of a sampled adjacency matrix.
inline TrialErrors noiseless_errors(const ProbabilityMatrix& p0, const SpectralPair& truth) {
    return embedding_errors(adjacency_spectral_embedding(p0, truth.signature), truth);
}

struct ResultRow {
    std::string setting;
    Index n = 0;
    double rho = 0.0;
    double kappa = 0.0;
    double mean_latent = 0.0;
    double mean_subspace = 0.0;
    double stderr_latent = 0.0;
    double stderr_subspace = 0.0;
    int trials = 0;
    int failures = 0;
    bool operator==(const ResultRow&) const = default;
};

struct ExperimentResult {
    ExperimentConfig config;
    std::vector<ResultRow> rows;
    std::vector<std::pair<std::string, TrialRecord>> records;  // setting label, record
};

inline std::uint64_t cell_seed(std::uint64_t seed, std::size_t setting, Index n) {
    return mix64(seed ^ mix64(0x5365747469ull + (static_cast<std::uint64_t>(setting) << 32) + static_cast<std::uint64_t>(n)));
}

namespace detail {

inline std::pair<double, double> mean_stderr(const std::vector<double>& v) {
    if (v.empty()) return {std::nan(""), std::nan("")};
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    if (v.size() < 2) return {mean, 0.0};
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()))};
}

}  // namespace detail

// Rows ordered by (n, setting); trials run in parallel, each writing its own slot.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, unsigned threads = 1) {
    validate(cfg);
    ExperimentResult out;
    out.config = cfg;
    for (Index n : cfg.n_grid) {
        for (std::size_t s = 0; s < cfg.schedule.size(); ++s) {
            const double nn = static_cast<double>(n);
            const double rho = cfg.rho_at(s, nn), kappa = cfg.kappa_at(s, nn);
            const ExperimentModel model = build_experiment_model(n, rho, kappa, cfg.p + cfg.q, cfg.p, cfg.q);
            const std::uint64_t seed = cell_seed(cfg.seed, s, n);
            std::vector<TrialRecord> recs(cfg.trials);
            parallel_for(recs.size(), threads, [&](std::size_t t) {
                try {
                    recs[t] = run_trial(model.p, model.truth, seed, static_cast<int>(t), cfg.diagonal_mode);
                } catch (const std::exception& e) {
                    recs[t].n = n;
                    recs[t].trial_index = static_cast<int>(t);
                    recs[t].failed = true;
                    recs[t].failure = e.what();
                }
                recs[t].rho = rho;
                recs[t].kappa = kappa;
            });
            std::vector<double> l1, l2;
            int failures = 0;
            for (const auto& r : recs) {
                out.records.emplace_back(cfg.schedule[s].label, r);
                if (r.failed) {
                    ++failures;
                    continue;
                }
                l1.push_back(r.latent_error);
                l2.push_back(r.subspace_error);
            }
            ResultRow row;
            row.setting = cfg.schedule[s].label;
            row.n = n;
            row.rho = rho;
            row.kappa = kappa;
            std::tie(row.mean_latent, row.stderr_latent) = detail::mean_stderr(l1);
            std::tie(row.mean_subspace, row.stderr_subspace) = detail::mean_stderr(l2);
            row.trials = static_cast<int>(l1.size());
            row.failures = failures;
            out.rows.push_back(row);
        }
    }
    return out;
}

// ---- regression ----

struct RateRegression {
    double slope = 0.0;
    double ci_halfwidth_95 = 0.0;
    double intercept = 0.0;
    int n_points = 0;
};

inline RateRegression loglog_slope(const std::vector<double>& ns, const std::vector<double>& errors) {
    require(ns.size() == errors.size(), "loglog_slope: length mismatch");
    require(ns.size() >= 3, "loglog_slope: need at least 3 points");
    const std::size_t k = ns.size();
    std::vector<double> x(k), y(k);
    for (std::size_t i = 0; i < k; ++i) {
        require(ns[i] > 0.0 && std::isfinite(ns[i]), "loglog_slope: sizes must be positive");
        require(errors[i] > 0.0 && std::isfinite(errors[i]),
                "loglog_slope: error value " + format_real(errors[i]) + " at point " + std::to_string(i) +
                    " is not positive");
        x[i] = std::log(ns[i]);
        y[i] = std::log(errors[i]);
    }
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(k);
    my /= static_cast<double>(k);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    require(sxx > 0.0, "loglog_slope: all sizes are equal");
    RateRegression r;
    r.slope = sxy / sxx;
    r.intercept = my - r.slope * mx;
    r.n_points = static_cast<int>(k);
    double rss = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        const double e = y[i] - r.intercept - r.slope * x[i];
        rss += e * e;
    }
    const double dof = static_cast<double>(k - 2);
    const double se = std::sqrt(rss / dof / sxx);
    const boost::math::students_t dist(dof);
    r.ci_halfwidth_95 = boost::math::quantile(dist, 0.975) * se;
    return r;
}

enum class ErrorKind { latent, subspace };

// Lower-bound rate: latent sqrt(kappa (l* ^ log n) / n), subspace that divided by sqrt(l*),
// with l* = rho n / (3 kappa).
inline double theoretical_bound(double n, double rho, double kappa, ErrorKind kind) {
    const double lstar = rho * n / (3.0 * kappa);
    const double core = kappa * std::min(lstar, std::log(n)) / n;
    return kind == ErrorKind::latent ? std::sqrt(core) : std::sqrt(core / lstar);
}

inline std::vector<RateRegression> theoretical_lower_slope(const ExperimentConfig& cfg, ErrorKind kind) {
    std::vector<RateRegression> out;
    for (std::size_t s = 0; s < cfg.schedule.size(); ++s) {
        std::vector<double> ns, bs;
        for (Index n : cfg.n_grid) {
            const double nn = static_cast<double>(n);
            ns.push_back(nn);
            bs.push_back(theoretical_bound(nn, cfg.rho_at(s, nn), cfg.kappa_at(s, nn), kind));
        }
        out.push_back(loglog_slope(ns, bs));
    }
    return out;
}

struct SettingRates {
    std::string setting;
    RateRegression latent;
    RateRegression subspace;
};

// Groups rows by setting (first-appearance order) and regresses each error against n.
inline std::vector<SettingRates> fit_rates(const std::vector<ResultRow>& rows) {
    std::vector<std::string> order;
    std::map<std::string, std::vector<const ResultRow*>> groups;
    for (const auto& r : rows) {
        if (!groups.count(r.setting)) order.push_back(r.setting);
        groups[r.setting].push_back(&r);
    }
    std::vector<SettingRates> out;
    for (const auto& name : order) {
        std::vector<double> ns, l1, l2;
        for (const ResultRow* r : groups[name]) {
            ns.push_back(static_cast<double>(r->n));
            l1.push_back(r->mean_latent);
            l2.push_back(r->mean_subspace);
        }
        out.push_back({name, loglog_slope(ns, l1), loglog_slope(ns, l2)});
    }
    return out;
}

// ---- result files ----

inline const std::vector<std::string>& result_columns() {
    static const std::vector<std::string> cols = {"setting",       "n",           "rho",
                                                  "kappa",         "mean_latent", "mean_subspace",
                                                  "stderr_latent", "stderr_subspace", "trials",
                                                  "failures"};
    return cols;
}

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

// Header lines starting with '#' carry provenance (config hash, config JSON).
inline void write_results_csv(std::ostream& os, const std::vector<ResultRow>& rows,
                              const std::vector<std::string>& comments = {}) {
    for (const auto& c : comments) os << "# " << c << '\n';
    const auto& cols = result_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
    os << '\n';
    for (const auto& r : rows) {
        os << csv_field(r.setting) << ',' << r.n << ',' << format_real(r.rho) << ',' << format_real(r.kappa) << ','
           << format_real(r.mean_latent) << ',' << format_real(r.mean_subspace) << ',' << format_real(r.stderr_latent)
           << ',' << format_real(r.stderr_subspace) << ',' << r.trials << ',' << r.failures << '\n';
    }
}

struct ParsedResults {
    std::vector<ResultRow> rows;
    std::vector<std::string> comments;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line, std::size_t lineno) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (quoted) throw ValidationError("results CSV line " + std::to_string(lineno) + ": unterminated quote");
    out.push_back(cur);
    return out;
}

inline double parse_double_field(const std::string& s, std::size_t lineno, const std::string& col) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        if (s == "nan" || s == "-nan") return std::nan("");
        throw ValidationError("results CSV line " + std::to_string(lineno) + ": column '" + col +
                              "' is not a number: '" + s + "'");
    }
}

inline long long parse_int_field(const std::string& s, std::size_t lineno, const std::string& col) {
    try {
        std::size_t used = 0;
        const long long v = std::stoll(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ValidationError("results CSV line " + std::to_string(lineno) + ": column '" + col +
                              "' is not an integer: '" + s + "'");
    }
}

}  // namespace detail

inline ParsedResults read_results_csv(std::istream& is) {
    ParsedResults out;
    std::string line;
    std::size_t lineno = 0;
    bool header = false;
    const auto& cols = result_columns();
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            out.comments.push_back(line.size() > 2 && line[1] == ' ' ? line.substr(2) : line.substr(1));
            continue;
        }
        const auto f = detail::split_csv_line(line, lineno);
        if (!header) {
            if (f != cols)
                throw ValidationError("results CSV line " + std::to_string(lineno) + ": unexpected header");
            header = true;
            continue;
        }
        if (f.size() != cols.size())
            throw ValidationError("results CSV line " + std::to_string(lineno) + ": expected " +
                                  std::to_string(cols.size()) + " fields, found " + std::to_string(f.size()));
        ResultRow r;
        r.setting = f[0];
        r.n = detail::parse_int_field(f[1], lineno, cols[1]);
        r.rho = detail::parse_double_field(f[2], lineno, cols[2]);
        r.kappa = detail::parse_double_field(f[3], lineno, cols[3]);
        r.mean_latent = detail::parse_double_field(f[4], lineno, cols[4]);
        r.mean_subspace = detail::parse_double_field(f[5], lineno, cols[5]);
        r.stderr_latent = detail::parse_double_field(f[6], lineno, cols[6]);
        r.stderr_subspace = detail::parse_double_field(f[7], lineno, cols[7]);
        r.trials = static_cast<int>(detail::parse_int_field(f[8], lineno, cols[8]));
        r.failures = static_cast<int>(detail::parse_int_field(f[9], lineno, cols[9]));
        if (r.n <= 0) throw ValidationError("results CSV line " + std::to_string(lineno) + ": n must be positive");
        out.rows.push_back(std::move(r));
    }
    if (!header) throw ValidationError("results CSV: missing header line");
    return out;
}

inline json to_json(const ResultRow& r) {
    return {{"setting", r.setting},
            {"n", r.n},
            {"rho", r.rho},
            {"kappa", r.kappa},
            {"mean_latent", r.mean_latent},
            {"mean_subspace", r.mean_subspace},
            {"stderr_latent", r.stderr_latent},
            {"stderr_subspace", r.stderr_subspace},
            {"trials", r.trials},
            {"failures", r.failures}};
}

inline ResultRow result_row_from_json(const json& j) {
    ResultRow r;
    r.setting = j.at("setting").get<std::string>();
    r.n = j.at("n").get<Index>();
    r.rho = j.at("rho").get<double>();
    r.kappa = j.at("kappa").get<double>();
    r.mean_latent = j.at("mean_latent").get<double>();
    r.mean_subspace = j.at("mean_subspace").get<double>();
    r.stderr_latent = j.at("stderr_latent").get<double>();
    r.stderr_subspace = j.at("stderr_subspace").get<double>();
    r.trials = j.at("trials").get<int>();
    r.failures = j.at("failures").get<int>();
    return r;
}

inline json results_json(const std::vector<ResultRow>& rows, const std::string& hash = "") {
    json arr = json::array();
    for (const auto& r : rows) arr.push_back(to_json(r));
    json j{{"rows", arr}};
    if (!hash.empty()) j["config_hash"] = hash;
    return j;
}

inline json to_json(const RateRegression& r) {
    return {{"slope", r.slope}, {"ci_halfwidth_95", r.ci_halfwidth_95}, {"intercept", r.intercept}, {"n_points", r.n_points}};
}

inline json trial_json(const std::string& setting, const TrialRecord& r) {
    json j{{"setting", setting},          {"n", r.n},
           {"rho", r.rho},                {"kappa", r.kappa},
           {"trial_index", r.trial_index}, {"latent_error", r.latent_error},
           {"subspace_error", r.subspace_error}, {"failed", r.failed}};
    if (r.failed) j["failure"] = r.failure;
    return j;
}

// JSON text with doubles at 17 significant digits.
inline std::string dump_json(const json& j, int indent = 2) {
    // nlohmann prints the shortest round-trip representation, which is lossless.
    return j.dump(indent);
}

inline void emit_results(const std::vector<ResultRow>& rows, const std::string& format, const std::string& path,
                         const std::vector<std::string>& comments = {}, const std::string& hash = "") {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ComputeError("cannot open '" + path + "' for writing");
    if (format == "csv") write_results_csv(os, rows, comments);
    else if (format == "json") os << dump_json(results_json(rows, hash)) << '\n';
    else throw ValidationError("unknown output format '" + format + "'");
    if (!os) throw ComputeError("write to '" + path + "' failed");
}

}  // namespace grdpg
