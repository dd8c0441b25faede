#include <catch_amalgamated.hpp>

#include <grdpg/mcharness.hpp>

#include <sstream>

#include "helpers.hpp"

using namespace grdpg;
using Catch::Approx;

namespace {

ExperimentConfig tiny_config() {
    ExperimentConfig c;
    c.name = "tiny";
    c.n_grid = {200, 300, 400};
    c.regime = ExperimentRegime::fixed_kappa;
    c.kappa = 6;
    c.schedule = {{"rho=0.5", 0.5, 0.0}, {"rho=n^(-1/4)", 1.0, -0.25}};
    c.trials = 4;
    c.seed = 77;
    return c;
}

}  // namespace

TEST_CASE("simulation model entries and spectrum") {
    const ExperimentModel m = build_experiment_model(1000, 0.2, 6.0);
    CHECK(m.p.entries.minCoeff() > 0.0);
    CHECK(m.p.entries.maxCoeff() < 1.0);
    const EigenSelection es = symmetric_eigen(m.p.entries);
    CHECK(es.values(0) == Approx(0.2 * 1000 / 3.0).margin(1e-8));
    CHECK(es.values(1) == Approx(0.2 * 1000 / 18.0).margin(1e-8));
    CHECK(es.values(999) == Approx(-0.2 * 1000 / 18.0).margin(1e-8));
    CHECK(std::abs(es.values(2)) < 1e-8);
    CHECK(std::abs(es.values(998)) < 1e-8);
    CHECK(es.values(0) / -es.values(999) == Approx(6.0).epsilon(1e-12));
}

TEST_CASE("noiseless trial recovers the truth") {
    const ExperimentModel m = build_experiment_model(600, 0.3, 6.0);
    const TrialErrors e = noiseless_errors(m.p, m.truth);
    CHECK(e.latent <= 1e-7);
    CHECK(e.subspace <= 1e-7);
}

TEST_CASE("trials are reproducible") {
    const ExperimentModel m = build_experiment_model(300, 0.5, 6.0);
    const TrialRecord a = run_trial(m.p, m.truth, 5, 2), b = run_trial(m.p, m.truth, 5, 2);
    CHECK(a.latent_error == b.latent_error);
    CHECK(a.subspace_error == b.subspace_error);
    CHECK(a.latent_error > 0);
    CHECK(run_trial(m.p, m.truth, 5, 3).latent_error != a.latent_error);
}

TEST_CASE("regression on exact power laws") {
    std::vector<double> ns, es;
    for (double n = 1000; n <= 8000; n *= 2) {
        ns.push_back(n);
        es.push_back(std::pow(n, -0.5));
    }
    const RateRegression r = loglog_slope(ns, es);
    CHECK(r.slope == Approx(-0.5).epsilon(1e-12));
    CHECK(r.ci_halfwidth_95 < 1e-10);
    CHECK(r.n_points == 4);
    CHECK_THROWS_AS(loglog_slope({1, 2}, {1, 2}), ValidationError);
    CHECK_THROWS_AS(loglog_slope({1, 2, 3}, {1, 0, 2}), ValidationError);
}

TEST_CASE("regression with noise") {
    PhiloxStream rng(3, 0);
    std::vector<double> ns, es;
    for (double n = 1000; n <= 20000; n += 1000) {
        ns.push_back(n);
        es.push_back(2.0 * std::pow(n, 0.3) * (1 + 0.01 * rng.normal()));
    }
    const RateRegression r = loglog_slope(ns, es);
    CHECK(r.slope == Approx(0.3).margin(0.02));
    CHECK(r.ci_halfwidth_95 > 0);
    CHECK(std::abs(r.slope - 0.3) <= 3 * r.ci_halfwidth_95);
}

TEST_CASE("confidence interval uses the t quantile") {
    // three points, one degree of freedom: t_{0.975,1} = 12.7062...
    const RateRegression r = loglog_slope({1, std::exp(1.0), std::exp(2.0)}, {1, std::exp(1.5), std::exp(2.0)});
    CHECK(r.slope == Approx(1.0));
    const double se = std::sqrt((0.25 / 6.0 * 2 + 1.0 / 6.0 * 0 + 0.0) / 1.0);  // residuals -1/6, 1/3, -1/6
    (void)se;
    const double rss = 1.0 / 36 + 1.0 / 9 + 1.0 / 36;
    CHECK(r.ci_halfwidth_95 == Approx(12.706204736174707 * std::sqrt(rss / 1.0 / 2.0)).epsilon(1e-9));
}

TEST_CASE("theoretical slopes of the lower bound") {
    const ExperimentConfig t1 = preset_table1(), t2 = preset_table2();
    const auto l1 = theoretical_lower_slope(t1, ErrorKind::latent), s1 = theoretical_lower_slope(t1, ErrorKind::subspace);
    CHECK(l1[0].slope == Approx(-0.447).margin(1e-3));
    CHECK(s1[0].slope == Approx(-0.947).margin(1e-3));
    CHECK(l1[6].slope == Approx(-0.447).margin(1e-3));
    CHECK(s1[6].slope == Approx(-0.447).margin(1e-3));
    const auto l2 = theoretical_lower_slope(t2, ErrorKind::latent), s2 = theoretical_lower_slope(t2, ErrorKind::subspace);
    CHECK(l2[4].slope == Approx(-0.1974).margin(1e-3));
    // sqrt(kappa log n / (lambda* n)) with kappa ~ n^{1/2} and lambda* ~ n^{1/2} is n^{-1/2} sqrt(log n);
    // its fitted slope over 9000..20000 is -1/2 + 1/(2 log n) averaged, about -0.4474
    double ref = 0;
    {
        std::vector<double> ns, bs;
        for (double n = 9000; n <= 20000; n += 1000) {
            ns.push_back(n);
            bs.push_back(std::sqrt(std::log(n)) / std::sqrt(n));
        }
        ref = loglog_slope(ns, bs).slope;
    }
    CHECK(s2[4].slope == Approx(ref).margin(1e-9));
}

TEST_CASE("desk scaling keeps the anchor value") {
    const ExperimentConfig full = preset_table1(), desk = preset("table1", false);
    for (std::size_t s = 0; s < full.schedule.size(); ++s)
        CHECK(desk.rho_at(s, 1000) == Approx(full.rho_at(s, 9000)).epsilon(1e-12));
    const ExperimentConfig full2 = preset_table2(), desk2 = preset("table2", false);
    for (std::size_t s = 0; s < full2.schedule.size(); ++s)
        CHECK(desk2.kappa_at(s, 1000) == Approx(full2.kappa_at(s, 9000)).epsilon(1e-12));
    CHECK(desk.n_grid == desk_grid());
    CHECK(desk.trials == 40);
    CHECK_THROWS_AS(preset("table3", false), ValidationError);
}

TEST_CASE("config json round trip and validation") {
    const ExperimentConfig c = preset("table2", false);
    const json j = to_json(c);
    const ExperimentConfig back = config_from_json(j);
    CHECK(to_json(back) == j);
    CHECK(config_hash(back) == config_hash(c));
    json bad = j;
    bad["n_grid"] = {1000, 1000};
    CHECK_THROWS_AS(config_from_json(bad), ValidationError);
    bad = j;
    bad["trials"] = 0;
    CHECK_THROWS_AS(config_from_json(bad), ValidationError);
    bad = j;
    bad.erase("regime");
    CHECK_THROWS_AS(config_from_json(bad), ValidationError);
    bad = j;
    bad["rho"] = 2.0;
    CHECK_THROWS_AS(config_from_json(bad), ValidationError);
}

TEST_CASE("experiment runs are deterministic across thread counts") {
    const ExperimentConfig c = tiny_config();
    const ExperimentResult a = run_experiment(c, 1), b = run_experiment(c, 3);
    REQUIRE(a.rows.size() == 6);
    CHECK(a.rows == b.rows);
    std::ostringstream sa, sb;
    write_results_csv(sa, a.rows);
    write_results_csv(sb, b.rows);
    CHECK(sa.str() == sb.str());
    CHECK(a.records.size() == 24);
    for (const auto& r : a.rows) {
        CHECK(r.trials == 4);
        CHECK(r.failures == 0);
        CHECK(r.stderr_latent > 0);
    }
    CHECK(a.rows[0].n == 200);
    CHECK(a.rows[1].setting == "rho=n^(-1/4)");
}

TEST_CASE("results csv round trip and errors") {
    std::ostringstream empty;
    write_results_csv(empty, {});
    CHECK(empty.str() == "setting,n,rho,kappa,mean_latent,mean_subspace,stderr_latent,stderr_subspace,trials,failures\n");

    const std::vector<ResultRow> rows = {{"a,b", 1000, 0.2, 6, 0.1, 0.01, 1e-3, 1e-4, 40, 0},
                                         {"plain", 2000, 1.0 / 3, 6, 0.3, 0.02, 2e-3, 2e-4, 39, 1}};
    std::stringstream ss;
    write_results_csv(ss, rows, {"config_hash=abc"});
    const ParsedResults back = read_results_csv(ss);
    CHECK(back.rows == rows);
    CHECK(back.comments == std::vector<std::string>{"config_hash=abc"});

    std::istringstream bad("setting,n,rho,kappa,mean_latent,mean_subspace,stderr_latent,stderr_subspace,trials,failures\n"
                           "x,100,0.2,6,0.1,0.1,0,0,1,0\n"
                           "y,oops,0.2,6,0.1,0.1,0,0,1,0\n");
    try {
        read_results_csv(bad);
        FAIL("expected a parse error");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
    std::istringstream short_row("setting,n,rho,kappa,mean_latent,mean_subspace,stderr_latent,stderr_subspace,trials,failures\nx,1\n");
    CHECK_THROWS_AS(read_results_csv(short_row), ValidationError);
}

TEST_CASE("results json round trip") {
    const std::vector<ResultRow> rows = {{"s", 1000, 0.2, 6, 0.1, 0.01, 1e-3, 1e-4, 40, 0}};
    const json j = json::parse(dump_json(results_json(rows, "beef")));
    CHECK(result_row_from_json(j["rows"][0]) == rows[0]);
    CHECK(j["config_hash"] == "beef");
}

TEST_CASE("rates grouped by setting") {
    std::vector<ResultRow> rows;
    for (Index n : {1000, 2000, 4000}) {
        rows.push_back({"a", n, 0.2, 6, std::pow(n, -0.5), std::pow(n, -1.0), 0, 0, 1, 0});
        rows.push_back({"b", n, 0.2, 6, std::pow(n, -0.25), std::pow(n, -0.75), 0, 0, 1, 0});
    }
    const auto rates = fit_rates(rows);
    REQUIRE(rates.size() == 2);
    CHECK(rates[0].setting == "a");
    CHECK(rates[0].latent.slope == Approx(-0.5));
    CHECK(rates[1].subspace.slope == Approx(-0.75));
}
