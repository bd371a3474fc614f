#include <doctest.h>

#include <filesystem>

#include "ardchoice/ard.hpp"
#include "ardchoice/errors.hpp"
#include "ardchoice/serialize.hpp"
#include "support/fixtures.hpp"

using namespace ardchoice;

TEST_CASE("catalog JSON round-trips") {
    const auto data = fixtures::toy_dataset();
    const auto cfg = parse_space_config_json(R"({
      "alternatives": [
        {"name": "a", "intercept": true, "attributes": ["tt", "co"],
         "transforms": ["identity", "log"], "interactions": ["seg"],
         "segments": [{"attribute": "tt", "k": 2, "seed": 1}]},
        {"name": "b"},
        {"name": "c", "attributes": ["co"], "noise_pad_to": 3}
      ]})");
    const auto cat = build_catalog(data, cfg);
    const auto j = catalog_to_json(cat);
    const auto cat2 = catalog_from_json(j);
    CHECK(catalog_to_json(cat2).dump() == j.dump());
    CHECK(catalog_hash(cat) == catalog_hash(cat2));

    // tensors materialized from the round-tripped catalog agree exactly
    const auto t1 = materialize(data, cat, Standardize::scale);
    const auto t2 = materialize(data, cat2, Standardize::scale);
    for (int i = 0; i < cat.n_alts(); ++i) CHECK(t1.values[i] == t2.values[i]);
}

TEST_CASE("tensor CSV round-trips exactly") {
    const auto data = fixtures::toy_dataset();
    const auto cfg = parse_space_config_json(R"({
      "alternatives": [
        {"name": "a", "intercept": true, "attributes": ["tt"], "interactions": ["seg"],
         "segments": [{"attribute": "tt", "k": 2, "seed": 1}]},
        {"name": "b", "attributes": ["co"]}, {"name": "c"}
      ]})");
    const auto cat = build_catalog(data, cfg);
    const auto t = materialize(data, cat, Standardize::scale);
    fixtures::TempFile f("", ".csv");
    write_tensor_csv(t, cat, f.path());
    const auto t2 = read_tensor_csv(f.path(), cat);
    CHECK(t2.n_obs == t.n_obs);
    CHECK(t2.choice == t.choice);
    CHECK(t2.availability == t.availability);
    for (int i = 0; i < cat.n_alts(); ++i) CHECK(t2.values[i] == t.values[i]);
}

TEST_CASE("checkpoint state JSON round-trips including the random stream") {
    const auto data = fixtures::toy_dataset();
    const auto cfg = parse_space_config_json(R"({
      "alternatives": [
        {"name": "a", "intercept": true, "attributes": ["tt", "co"]},
        {"name": "b", "attributes": ["tt"]}, {"name": "c"}
      ]})");
    const auto cat = build_catalog(data, cfg);
    const auto t = materialize(data, cat, Standardize::scale);

    TrainingConfig tc;
    tc.batch_size = 3;
    tc.max_iter = 50;
    tc.convergence_tol = 0.0;
    tc.seed = 11;
    auto fit = fit_ard(t, cat, tc);

    const auto j = state_to_json(fit.state, cat, fit.lambda, "cfg", fit.converged);
    auto restored = state_from_json(j, cat);
    CHECK(restored.t == fit.state.t);
    for (int i = 0; i < cat.n_alts(); ++i) {
        CHECK(restored.mu[i] == fit.state.mu[i]);
        CHECK(restored.c[i] == fit.state.c[i]);
        CHECK(restored.acc_mu[i] == fit.state.acc_mu[i]);
    }

    // resuming from the restored state continues the stream exactly:
    // 50 + 50 resumed iterations equal a single 100-iteration run
    TrainingConfig tc2 = tc;
    tc2.max_iter = 50;
    auto scratch_reference = fit_ard(t, cat, [&] {
        TrainingConfig c = tc;
        c.max_iter = 100;
        return c;
    }());
    auto resumed = fit_ard_continue(std::move(restored), t, cat, tc2);
    CHECK(resumed.state.t == 100);
    for (int i = 0; i < cat.n_alts(); ++i) {
        CHECK(resumed.state.mu[i] == scratch_reference.state.mu[i]);
        CHECK(resumed.state.c[i] == scratch_reference.state.c[i]);
    }
}

TEST_CASE("coefficients JSON round-trips through group/k addressing") {
    const auto data = fixtures::toy_dataset();
    const auto cfg = parse_space_config_json(R"({
      "alternatives": [
        {"name": "a", "intercept": true, "attributes": ["tt"], "interactions": ["seg"]},
        {"name": "b", "attributes": ["co"]}, {"name": "c"}
      ]})");
    const auto cat = build_catalog(data, cfg);
    const auto t = materialize(data, cat, Standardize::scale);
    MnlCoefficients beta = MnlCoefficients::zeros(t);
    beta.beta[0][0] = 1.5;
    beta.beta[0][2] = -0.25;
    beta.beta[1][0] = 0.75;
    const auto j = coefficients_to_json(beta, cat, Standardize::scale);
    const auto beta2 = coefficients_from_json(j, cat);
    for (int i = 0; i < cat.n_alts(); ++i) CHECK(beta2.beta[i] == beta.beta[i]);
}

TEST_CASE("lambda CSV round-trips labels with commas") {
    Selection sel;
    sel.ranked.resize(2);
    SelectedGroup g;
    g.label = "seg(tt,4)";
    g.lambda = 0.25;
    g.rank = 1;
    g.selected = true;
    sel.ranked[0].push_back(g);
    g.label = "plain";
    g.lambda = 0.0;
    g.rank = 1;
    g.selected = false;
    sel.ranked[1].push_back(g);

    fixtures::TempFile f("", ".csv");
    write_lambda_csv(sel, {"train", "car"}, f.path());
    std::vector<std::string> alts;
    const auto rows = read_lambda_csv(f.path(), &alts);
    CHECK(alts == std::vector<std::string>{"train", "car"});
    CHECK(rows[0][0].label == "seg(tt,4)");
    CHECK(rows[0][0].lambda == 0.25);
    CHECK(rows[0][0].selected);
    CHECK_FALSE(rows[1][0].selected);

    fixtures::TempFile bad("not,a,lambda\n1,2,3\n", ".csv");
    CHECK_THROWS_AS(read_lambda_csv(bad.path(), nullptr), data_error);
}
