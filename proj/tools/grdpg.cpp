#include <CLI11.hpp>
#include <grdpg/grdpg.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

using namespace grdpg;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t default_seed = 20240531;

struct Globals {
    std::uint64_t seed = default_seed;
    bool seed_given = false;  // flag or GRDPG_SEED; overrides seeds stored in config files
    unsigned threads = 1;
    std::string format;  // empty: each command picks its natural format
    int verbosity = 0;
    std::string format_or(const char* fallback) const { return format.empty() ? fallback : format; }
};

Globals g;

void log(int level, const std::string& msg) {
    if (g.verbosity >= level) std::cerr << msg << '\n';
}

// Printed on stderr so stdout stays machine readable.
void repro_line(const std::string& hash) {
    std::cerr << "# grdpg " << version << " seed=" << g.seed << " config_hash=" << hash << '\n';
}

json stamp(json j, const std::string& hash) {
    j["version"] = version;
    j["seed"] = g.seed;
    j["config_hash"] = hash;
    return j;
}

void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ComputeError("cannot open '" + path + "' for writing");
    os << text;
    if (!os) throw ComputeError("write to '" + path + "' failed");
}

void emit_json(const std::string& path, const json& j) { write_text(path, dump_json(j) + "\n"); }

// Matrix files: CSV carries the hash as a comment line; GMX1 has no room for it.
void save_stamped(const std::string& path, const DenseMatrix& m, const std::string& hash) {
    if (is_binary_path(path)) {
        save_matrix(path, m);
        return;
    }
    std::ostringstream os;
    os << "# config_hash=" << hash << '\n';
    write_csv(os, m);
    write_text(path, os.str());
}

json matrix_json(const DenseMatrix& m) {
    json rows = json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        json r = json::array();
        for (Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
        rows.push_back(r);
    }
    return rows;
}

json load_json_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ValidationError("cannot open '" + path + "'");
    try {
        return json::parse(is);
    } catch (const json::exception& e) {
        throw ValidationError("'" + path + "': " + e.what());
    }
}

// ---- hadamard ----

struct HadamardArgs {
    int k = 1;
    std::string out;
};

void run_hadamard(const HadamardArgs& a) {
    const json inv{{"command", "hadamard"}, {"k", a.k}};
    const std::string hash = config_hash(inv);
    repro_line(hash);
    const DenseMatrix h = hadamard(a.k);
    if (g.format_or("csv") == "json") {
        emit_json(a.out, stamp({{"k", a.k}, {"matrix", matrix_json(h)}}, hash));
    } else if (a.out.empty() || a.out == "-") {
        write_csv(std::cout, h);
    } else {
        save_stamped(a.out, h, hash);
    }
}

// ---- sample ----

struct SampleArgs {
    std::string model = "experiment";  // experiment | prob | latent | cube | intervals
    std::string prob_path, latent_path;
    Index n = 1000;
    int p = 2, q = 1, d = 3;
    double rho = 0.2, kappa = 6.0;
    std::string diagonal = "hollow";
    std::uint64_t trial = 0;
    std::string out, edges, prob_out;
};

void run_sample(const SampleArgs& a) {
    json inv{{"command", "sample"}, {"model", a.model}, {"diagonal", a.diagonal}, {"trial", a.trial}, {"seed", g.seed}};
    ProbabilityMatrix p;
    if (a.model == "experiment") {
        inv.update({{"n", a.n}, {"rho", a.rho}, {"kappa", a.kappa}});
        p = build_experiment_model(a.n, a.rho, a.kappa).p;
    } else if (a.model == "prob") {
        require(!a.prob_path.empty(), "sample: --model prob needs --prob");
        inv["prob"] = a.prob_path;
        p = make_probability_matrix(load_matrix(a.prob_path));
    } else if (a.model == "latent") {
        require(!a.latent_path.empty(), "sample: --model latent needs --latent");
        inv.update({{"latent", a.latent_path}, {"p", a.p}, {"q", a.q}});
        const DenseMatrix x = load_matrix(a.latent_path);
        require(x.cols() == a.p + a.q, "sample: latent matrix has " + std::to_string(x.cols()) + " columns, expected p + q");
        p = make_probability_matrix(x * signature_matrix(a.p, a.q) * x.transpose(), a.rho);
        inv["rho"] = a.rho;
    } else if (a.model == "cube") {
        inv.update({{"n", a.n}, {"d", a.d}, {"rho", a.rho}});
        const DenseMatrix x = sample_latent_uniform_cube(a.n, a.d, g.seed);
        // cube rows have squared norm up to d; scale so inner products stay in [0, 1]
        p = make_probability_matrix(x * x.transpose() / static_cast<double>(a.d), a.rho);
    } else if (a.model == "intervals") {
        inv.update({{"n", a.n}, {"p", a.p}, {"q", a.q}, {"rho", a.rho}});
        const DenseMatrix x = sample_latent_grdpg_intervals(a.n, a.p, a.q, g.seed);
        p = make_probability_matrix(x * signature_matrix(a.p, a.q) * x.transpose(), a.rho);
    } else {
        throw ValidationError("sample: unknown model '" + a.model + "'");
    }
    const std::string hash = config_hash(inv);
    repro_line(hash);
    const AdjacencyMatrix adj = sample_adjacency(p, g.seed, parse_diagonal_mode(a.diagonal), a.trial);
    if (!a.out.empty()) save_stamped(a.out, adj.to_dense(), hash);
    if (!a.prob_out.empty()) save_stamped(a.prob_out, p.entries, hash);
    if (!a.edges.empty()) {
        std::ostringstream os;
        adj.write_edges(os);
        write_text(a.edges, os.str());
    }
    const double n = static_cast<double>(p.n());
    std::cout << dump_json(stamp({{"n", p.n()},
                                  {"stored_entries", adj.nnz()},
                                  {"mean_degree", static_cast<double>(adj.nnz()) / n},
                                  {"diagonal_mode", a.diagonal}},
                                 hash))
              << '\n';
}

// ---- embed ----

struct EmbedArgs {
    std::string adj;
    int p = 2, q = 1;
    std::string diagonal = "hollow";
    std::string out_frame, out_values, out_latent, out;
};

void run_embed(const EmbedArgs& a) {
    require(!a.adj.empty(), "embed: --adj is required");
    const json inv{{"command", "embed"}, {"adj", a.adj}, {"p", a.p}, {"q", a.q}, {"seed", g.seed}};
    const std::string hash = config_hash(inv);
    repro_line(hash);
    const AdjacencyMatrix adj = adjacency_from_dense(load_matrix(a.adj), parse_diagonal_mode(a.diagonal));
    LanczosOptions lo;
    lo.seed = g.seed;
    const Embedding e = adjacency_spectral_embedding(adj, {a.p, a.q}, lo);
    if (!a.out_frame.empty()) save_stamped(a.out_frame, e.pair.frame, hash);
    if (!a.out_values.empty()) save_stamped(a.out_values, e.signed_values, hash);
    if (!a.out_latent.empty()) save_stamped(a.out_latent, latent_estimate(e), hash);
    json vals = json::array();
    for (Index i = 0; i < e.signed_values.size(); ++i) vals.push_back(e.signed_values(i));
    emit_json(a.out, stamp({{"n", adj.n},
                            {"p", a.p},
                            {"q", a.q},
                            {"eigenvalues", vals},
                            {"tie_at_p_cutoff", e.tie_at_p_cutoff},
                            {"tie_at_q_cutoff", e.tie_at_q_cutoff},
                            {"matvecs", e.matvecs}},
                           hash));
}

// ---- align ----

struct AlignArgs {
    std::string xhat, x, out;
    int p = 2, q = 1;
    bool exact = false;
};

void run_align(const AlignArgs& a) {
    require(!a.xhat.empty() && !a.x.empty(), "align: --xhat and --x are required");
    const json inv{{"command", "align"}, {"xhat", a.xhat}, {"x", a.x}, {"p", a.p}, {"q", a.q}, {"exact", a.exact}};
    const std::string hash = config_hash(inv);
    repro_line(hash);
    const DenseMatrix xh = load_matrix(a.xhat), x = load_matrix(a.x);
    const Signature sig{a.p, a.q};
    const BlockRotation w = block_procrustes(xh, x, sig);
    const DenseMatrix aligned = apply_rotation(xh, w);
    json j{{"w_p", matrix_json(w.w_p)},
           {"w_q", matrix_json(w.w_q)},
           {"rank_deficient", w.rank_deficient},
           {"frobenius_residual", frobenius_norm(aligned - x)},
           {"tti_residual", two_to_infinity_norm(aligned - x)}};
    if (a.exact) {
        const CertifiedMinimum m = tti_exact_minimum(xh, x, sig);
        j["exact_tti"] = {{"lower", m.lower}, {"upper", m.upper}, {"evaluations", m.evaluations},
                          {"w_p", matrix_json(m.rotation.w_p)}, {"w_q", matrix_json(m.rotation.w_q)}};
    }
    emit_json(a.out, stamp(j, hash));
}

// ---- pack ----

struct PackArgs {
    std::string config;
    std::optional<std::string> regime;
    std::optional<Index> n;
    std::optional<int> p, q;
    std::optional<double> kappa, lambda1, c0, zeta;
    std::size_t pairs = 200;
    std::size_t all_pairs_limit = 64;
    std::string diagonal = "hollow";
    std::string out, members_dir;
};

PackingParams pack_params(const PackArgs& a) {
    json j = a.config.empty() ? json::object() : load_json_file(a.config);
    PackingParams pp;
    try {
        pp.regime = parse_regime(a.regime.value_or(j.value("regime", std::string("constant"))));
        pp.n = a.n.value_or(j.value("n", Index{1024}));
        pp.p = a.p.value_or(j.value("p", 2));
        pp.q = a.q.value_or(j.value("q", 1));
        pp.kappa = a.kappa.value_or(j.value("kappa", 9.0));
        pp.c0 = a.c0.value_or(j.value("c0", 0.02));
        pp.zeta = a.zeta.value_or(j.value("zeta", 0.0));
        const double def_l1 = pp.kappa * std::floor(static_cast<double>(pp.n) / (3.0 * pp.kappa));
        pp.lambda1 = a.lambda1.value_or(j.value("lambda1", def_l1));
    } catch (const json::exception& e) {
        throw ValidationError(std::string("pack config: ") + e.what());
    }
    validate(pp);
    return pp;
}

json params_json(const PackingParams& pp) {
    return {{"regime", to_string(pp.regime)}, {"n", pp.n},         {"p", pp.p},   {"q", pp.q},
            {"kappa", pp.kappa},              {"lambda1", pp.lambda1}, {"c0", pp.c0}, {"zeta", pp.zeta_value()}};
}

json notes_json(const PackingFamily& fam) {
    json notes = json::array();
    for (const auto& nt : fam.notes) notes.push_back({{"name", nt.name}, {"held", nt.held}, {"detail", nt.detail}});
    return notes;
}

void run_pack_build(const PackArgs& a) {
    const PackingParams pp = pack_params(a);
    const json inv{{"command", "pack build"}, {"params", params_json(pp)}};
    const std::string hash = config_hash(inv);
    repro_line(hash);
    const PackingFamily fam = build_packing(pp);
    json j{{"params", params_json(pp)}, {"members", fam.size()}, {"notes", notes_json(fam)}};
    if (pp.regime == Regime::constant_kappa)
        j.update({{"k0", fam.k0}, {"m", fam.m}, {"r", fam.r}});
    else
        j.update({{"k0", fam.k0}, {"M_d", fam.M_d}, {"beta", fam.beta}, {"eta", fam.eta}});
    if (!a.members_dir.empty()) {
        fs::create_directories(a.members_dir);
        save_matrix((fs::path(a.members_dir) / "base.gmx").string(), fam.base.frame);
        for (std::size_t k = 0; k < fam.size(); ++k) {
            char name[32];
            std::snprintf(name, sizeof name, "member_%05zu.gmx", k + 1);
            save_matrix((fs::path(a.members_dir) / name).string(), fam.members[k]);
        }
        j["members_dir"] = a.members_dir;
    }
    emit_json(a.out, stamp(j, hash));
}

json check_json(const CheckResult& c) {
    return {{"name", c.name},   {"pass", c.pass},   {"status", c.status}, {"witness", c.witness},
            {"value", c.value}, {"bound", c.bound}, {"margin", c.margin}, {"note", c.note}};
}

int run_pack_verify(const PackArgs& a) {
    const PackingParams pp = pack_params(a);
    VerifyOptions vo;
    vo.pair_samples = a.pairs;
    vo.all_pairs_limit = a.all_pairs_limit;
    vo.seed = g.seed;
    vo.threads = g.threads;
    vo.diagonal_mode = parse_diagonal_mode(a.diagonal);
    const json inv{{"command", "pack verify"}, {"params", params_json(pp)}, {"pairs", a.pairs},
                   {"all_pairs_limit", a.all_pairs_limit}, {"diagonal", a.diagonal}, {"seed", g.seed}};
    const std::string hash = config_hash(inv);
    repro_line(hash);
    const auto t0 = std::chrono::steady_clock::now();
    const PackingFamily fam = build_packing(pp);
    const CertificationReport rep = verify_family(fam, vo);
    log(1, "verified " + std::to_string(rep.members) + " members in " +
               std::to_string(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()) + " s");
    json checks = json::array();
    for (const auto& c : rep.checks) checks.push_back(check_json(c));
    emit_json(a.out, stamp({{"pass", rep.pass()},
                            {"regime", rep.regime},
                            {"params", params_json(pp)},
                            {"members", rep.members},
                            {"pairs_checked", rep.pairs_checked},
                            {"pairs_sampled", rep.pairs_sampled},
                            {"checks", checks},
                            {"notes", notes_json(fam)}},
                           hash));
    for (const auto& c : rep.checks)
        if (!c.pass) log(0, "check " + c.name + " failed at " + c.witness);
    return rep.pass() ? 0 : 1;
}

// ---- experiment ----

struct ExperimentArgs {
    std::string preset, config, out, trials_out;
    bool full_scale = false;
    std::optional<int> trials;
    std::vector<Index> n_grid;
    std::vector<std::string> settings;  // keep only these labels
};

ExperimentConfig experiment_config(const ExperimentArgs& a) {
    require(a.preset.empty() != a.config.empty(), "experiment run: give exactly one of --preset or --config");
    ExperimentConfig c = a.preset.empty() ? config_from_json(load_json_file(a.config)) : preset(a.preset, a.full_scale);
    if (g.seed_given) c.seed = g.seed;
    if (a.trials) c.trials = *a.trials;
    if (!a.n_grid.empty()) c.n_grid = a.n_grid;
    if (!a.settings.empty()) {
        std::vector<ScheduleSpec> kept;
        for (const auto& s : c.schedule)
            if (std::find(a.settings.begin(), a.settings.end(), s.label) != a.settings.end()) kept.push_back(s);
        require(kept.size() == a.settings.size(), "experiment run: --setting names a label not in the schedule");
        c.schedule = kept;
    }
    validate(c);
    return c;
}

std::string output_format(const std::string& path) {
    if (has_suffix(path, ".json")) return "json";
    if (has_suffix(path, ".csv")) return "csv";
    return g.format_or("csv");
}

void run_experiment_cmd(const ExperimentArgs& a) {
    const ExperimentConfig c = experiment_config(a);
    g.seed = c.seed;
    const json cj = to_json(c);
    const std::string hash = config_hash(cj);
    repro_line(hash);
    log(1, "running " + c.name + ": " + std::to_string(c.schedule.size()) + " settings x " +
               std::to_string(c.n_grid.size()) + " sizes x " + std::to_string(c.trials) + " trials");
    const ExperimentResult res = run_experiment(c, g.threads);
    const std::string fmt = output_format(a.out);
    if (a.out.empty() || a.out == "-") {
        if (fmt == "csv")
            write_results_csv(std::cout, res.rows, {"config_hash=" + hash, "config: " + cj.dump()});
        else
            std::cout << dump_json(stamp(results_json(res.rows, hash), hash)) << '\n';
    } else if (fmt == "csv") {
        emit_results(res.rows, "csv", a.out, {"config_hash=" + hash, "config: " + cj.dump()}, hash);
    } else {
        json j = stamp(results_json(res.rows, hash), hash);
        j["config"] = cj;
        emit_json(a.out, j);
    }
    if (!a.trials_out.empty()) {
        json recs = json::array();
        for (const auto& [label, r] : res.records) recs.push_back(trial_json(label, r));
        emit_json(a.trials_out, stamp({{"trials", recs}}, hash));
    }
    int failures = 0;
    for (const auto& r : res.rows) failures += r.failures;
    if (failures) log(0, std::to_string(failures) + " trial(s) failed; see the failures column");
}

struct RatesArgs {
    std::string in, out;
};

void run_rates(const RatesArgs& a) {
    require(!a.in.empty(), "experiment rates: --in is required");
    std::ifstream is(a.in);
    if (!is) throw ValidationError("cannot open '" + a.in + "'");
    const ParsedResults parsed = read_results_csv(is);
    std::string hash = "unknown";
    std::optional<ExperimentConfig> cfg;
    for (const auto& c : parsed.comments) {
        if (c.rfind("config_hash=", 0) == 0) hash = c.substr(12);
        if (c.rfind("config: ", 0) == 0) {
            try {
                cfg = config_from_json(json::parse(c.substr(8)));
            } catch (const json::exception& e) {
                throw ValidationError(std::string("embedded config: ") + e.what());
            }
        }
    }
    repro_line(hash);
    const auto rates = fit_rates(parsed.rows);
    std::vector<RateRegression> tl, ts;
    if (cfg) {
        tl = theoretical_lower_slope(*cfg, ErrorKind::latent);
        ts = theoretical_lower_slope(*cfg, ErrorKind::subspace);
    }
    json arr = json::array();
    for (const auto& r : rates) {
        json e{{"setting", r.setting}, {"latent", to_json(r.latent)}, {"subspace", to_json(r.subspace)}};
        if (cfg)
            for (std::size_t s = 0; s < cfg->schedule.size(); ++s)
                if (cfg->schedule[s].label == r.setting) {
                    e["theoretical_latent_slope"] = tl[s].slope;
                    e["theoretical_subspace_slope"] = ts[s].slope;
                }
        arr.push_back(e);
    }
    json j{{"source", a.in}, {"rates", arr}};
    j = stamp(j, hash);
    if (cfg) j["seed"] = cfg->seed;
    emit_json(a.out, j);
}

// ---- counterexample ----

struct CounterArgs {
    int resolution = 1000;
    double box = 7.0;
    std::string out, out_dir = ".";
    std::vector<std::string> pairs = {"XY", "XZ", "YZ"};
};

Mat2 triple_member(const CounterexampleTriple& t, char c) {
    switch (c) {
        case 'X': return t.x;
        case 'Y': return t.y;
        case 'Z': return t.z;
    }
    throw ValidationError(std::string("counterexample: unknown matrix '") + c + "'");
}

json argmin_json(const PseudoDistance& f) {
    return {{"alpha1", f.argmin.alpha1}, {"alpha2", f.argmin.alpha2}, {"gamma", to_string(f.argmin.gamma)},
            {"grid_value", f.grid_value}};
}

void run_counterexample(const CounterArgs& a) {
    const json inv{{"command", "counterexample run"}, {"resolution", a.resolution}, {"box", a.box}};
    const std::string hash = config_hash(inv);
    repro_line(hash);
    const CounterexampleTriple t = counterexample_triple();
    const PseudoDistance xy = f_pseudo_distance(t.x, t.y, a.resolution, a.box, g.threads);
    const PseudoDistance xz = f_pseudo_distance(t.x, t.z, a.resolution, a.box, g.threads);
    const PseudoDistance yz = f_pseudo_distance(t.y, t.z, a.resolution, a.box, g.threads);
    emit_json(a.out, stamp({{"fXY", xy.value},
                            {"fXZ", xz.value},
                            {"fYZ", yz.value},
                            {"triangle_violated", xy.value + xz.value < yz.value},
                            {"argmins", {{"XY", argmin_json(xy)}, {"XZ", argmin_json(xz)}, {"YZ", argmin_json(yz)}}},
                            {"resolution", a.resolution},
                            {"box", a.box}},
                           hash));
}

void run_contour(const CounterArgs& a) {
    const json inv{{"command", "counterexample contour"}, {"resolution", a.resolution}, {"box", a.box}, {"pairs", a.pairs}};
    const std::string hash = config_hash(inv);
    repro_line(hash);
    const CounterexampleTriple t = counterexample_triple();
    fs::create_directories(a.out_dir);
    for (const auto& pr : a.pairs) {
        require(pr.size() == 2, "counterexample contour: pair '" + pr + "' must be two of X, Y, Z");
        const Mat2 x = triple_member(t, pr[0]), y = triple_member(t, pr[1]);
        for (Gamma gm : {Gamma::identity, Gamma::ipq}) {
            const fs::path path = fs::path(a.out_dir) / ("contour_" + pr + "_" + to_string(gm) + ".csv");
            std::ofstream os(path, std::ios::binary);
            if (!os) throw ComputeError("cannot open '" + path.string() + "' for writing");
            os << "# config_hash=" << hash << '\n';
            contour_grid(os, x, y, gm, a.box, a.resolution);
            if (!os) throw ComputeError("write to '" + path.string() + "' failed");
            log(1, "wrote " + path.string());
        }
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"GRDPG simulation, embedding, alignment and packing-set certification"};
    app.set_version_flag("--version", version);
    app.require_subcommand(1);
    app.fallthrough();

    std::optional<std::uint64_t> seed_flag;
    app.add_option("--seed", seed_flag, "random seed (falls back to GRDPG_SEED, then a fixed constant)");
    app.add_option("--threads", g.threads, "worker threads, 0 = all cores")->capture_default_str();
    app.add_option("--format", g.format, "csv | json (default: csv for matrices and results, json for reports)")
        ->check(CLI::IsMember({"csv", "json"}));
    app.add_flag("-v,--verbose", g.verbosity, "more progress output on stderr");

    HadamardArgs ha;
    auto* had = app.add_subcommand("hadamard", "Sylvester Hadamard matrix of order 2^k");
    had->add_option("--k", ha.k, "exponent")->required();
    had->add_option("--out", ha.out, "output file (stdout if absent)");

    SampleArgs sa;
    auto* smp = app.add_subcommand("sample", "sample a symmetric Bernoulli adjacency matrix");
    smp->add_option("--model", sa.model, "experiment | prob | latent | cube | intervals")->capture_default_str();
    smp->add_option("--prob", sa.prob_path, "probability matrix file (model prob)");
    smp->add_option("--latent", sa.latent_path, "latent position file (model latent)");
    smp->add_option("--n", sa.n)->capture_default_str();
    smp->add_option("--p", sa.p)->capture_default_str();
    smp->add_option("--q", sa.q)->capture_default_str();
    smp->add_option("--d", sa.d, "dimension for the cube sampler")->capture_default_str();
    smp->add_option("--rho", sa.rho, "sparsity factor")->capture_default_str();
    smp->add_option("--kappa", sa.kappa)->capture_default_str();
    smp->add_option("--diagonal", sa.diagonal, "hollow | bernoulli")->capture_default_str();
    smp->add_option("--trial", sa.trial, "Philox stream index")->capture_default_str();
    smp->add_option("--out", sa.out, "adjacency matrix file (.csv or .gmx)");
    smp->add_option("--edges", sa.edges, "edge list file, i,j per line");
    smp->add_option("--prob-out", sa.prob_out, "write the probability matrix");

    EmbedArgs ea;
    auto* emb = app.add_subcommand("embed", "adjacency spectral embedding");
    emb->add_option("--adj", ea.adj, "adjacency matrix file")->required();
    emb->add_option("--p", ea.p)->capture_default_str();
    emb->add_option("--q", ea.q)->capture_default_str();
    emb->add_option("--diagonal", ea.diagonal)->capture_default_str();
    emb->add_option("--out-frame", ea.out_frame, "U-hat");
    emb->add_option("--out-values", ea.out_values, "signed eigenvalues");
    emb->add_option("--out-latent", ea.out_latent, "U-hat |Lambda-hat|^(1/2)");
    emb->add_option("--out", ea.out, "summary JSON (stdout if absent)");

    AlignArgs aa;
    auto* aln = app.add_subcommand("align", "block Procrustes alignment and residuals");
    aln->add_option("--xhat", aa.xhat)->required();
    aln->add_option("--x", aa.x)->required();
    aln->add_option("--p", aa.p)->capture_default_str();
    aln->add_option("--q", aa.q)->capture_default_str();
    aln->add_flag("--exact", aa.exact, "also bracket the exact 2,inf minimum (p <= 2, q <= 1)");
    aln->add_option("--out", aa.out);

    PackArgs pa;
    auto* pack = app.add_subcommand("pack", "packing-set construction and certification");
    pack->require_subcommand(1);
    auto pack_options = [&pa](CLI::App* sc) {
        sc->add_option("--config", pa.config, "JSON with regime, n, p, q, kappa, lambda1, c0, zeta");
        sc->add_option("--regime", pa.regime, "constant | growing");
        sc->add_option("--n", pa.n);
        sc->add_option("--p", pa.p);
        sc->add_option("--q", pa.q);
        sc->add_option("--kappa", pa.kappa);
        sc->add_option("--lambda1", pa.lambda1, "default kappa * floor(n / (3 kappa))");
        sc->add_option("--c0", pa.c0);
        sc->add_option("--zeta", pa.zeta, "growing regime; default 1/sqrt(640 d)");
        sc->add_option("--out", pa.out, "report JSON (stdout if absent)");
    };
    auto* pbuild = pack->add_subcommand("build", "construct the family and summarize it");
    pack_options(pbuild);
    pbuild->add_option("--members-dir", pa.members_dir, "write base and member frames as GMX1 files");
    auto* pverify = pack->add_subcommand("verify", "construct and certify the family");
    pack_options(pverify);
    pverify->add_option("--pairs", pa.pairs, "sampled pairs for the separation check")->capture_default_str();
    pverify->add_option("--all-pairs-limit", pa.all_pairs_limit, "check every pair at or below this family size")
        ->capture_default_str();
    pverify->add_option("--diagonal", pa.diagonal)->capture_default_str();

    ExperimentArgs xa;
    RatesArgs ra;
    auto* exp = app.add_subcommand("experiment", "Monte Carlo rate experiments");
    exp->require_subcommand(1);
    auto* xrun = exp->add_subcommand("run", "run an experiment grid");
    xrun->add_option("--preset", xa.preset, "table1 | table2");
    xrun->add_flag("--full-scale", xa.full_scale, "full n grid and trial counts instead of desk scale");
    xrun->add_option("--config", xa.config, "experiment config JSON");
    xrun->add_option("--trials", xa.trials, "override trial count");
    xrun->add_option("--n-grid", xa.n_grid, "override grid, comma separated")->delimiter(',');
    xrun->add_option("--setting", xa.settings, "keep only these schedule labels")->delimiter(';');
    xrun->add_option("--out", xa.out, "results file (.csv or .json; stdout if absent)");
    xrun->add_option("--trials-out", xa.trials_out, "per-trial records JSON");
    auto* xrates = exp->add_subcommand("rates", "log-log slopes from a results CSV");
    xrates->add_option("--in", ra.in)->required();
    xrates->add_option("--out", ra.out, "rates JSON (stdout if absent)");

    CounterArgs ca;
    auto* ce = app.add_subcommand("counterexample", "pseudo-distance triangle counterexample");
    ce->require_subcommand(1);
    auto* crun = ce->add_subcommand("run", "compute f(X,Y), f(X,Z), f(Y,Z)");
    crun->add_option("--resolution", ca.resolution, "grid points per axis")->capture_default_str();
    crun->add_option("--box", ca.box, "half-width of the search box")->capture_default_str();
    crun->add_option("--out", ca.out, "JSON (stdout if absent)");
    auto* ccon = ce->add_subcommand("contour", "write g over the grid for each pair and Gamma");
    ccon->add_option("--resolution", ca.resolution)->capture_default_str();
    ccon->add_option("--box", ca.box)->capture_default_str();
    ccon->add_option("--out-dir", ca.out_dir)->capture_default_str();
    ccon->add_option("--pairs", ca.pairs, "subset of XY,XZ,YZ")->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return 1;
    }

    if (seed_flag) {
        g.seed = *seed_flag;
        g.seed_given = true;
    } else if (const char* env = std::getenv("GRDPG_SEED"); env && *env) {
        char* end = nullptr;
        g.seed = std::strtoull(env, &end, 10);
        if (*end != '\0') {
            std::cerr << "error: GRDPG_SEED must be an unsigned integer\n";
            return 1;
        }
        g.seed_given = true;
    }
    g.threads = resolve_threads(g.threads);

    try {
        if (had->parsed()) run_hadamard(ha);
        else if (smp->parsed()) run_sample(sa);
        else if (emb->parsed()) run_embed(ea);
        else if (aln->parsed()) run_align(aa);
        else if (pbuild->parsed()) run_pack_build(pa);
        else if (pverify->parsed()) return run_pack_verify(pa);
        else if (xrun->parsed()) run_experiment_cmd(xa);
        else if (xrates->parsed()) run_rates(ra);
        else if (crun->parsed()) run_counterexample(ca);
        else if (ccon->parsed()) run_contour(ca);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
