#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "gradpred/pipeline.hpp"
#include "gradpred/synthgen.hpp"
#include "test_support.hpp"

using namespace gradpred;
using testing_support::model_fixture;
using testing_support::zero_row;

namespace {

// Hand-typed closed forms of the published scoring formulas.
double p1(double male, double arts, double eng, double nocr, double cr, double dist) {
    const double z = -0.8304 - 0.2643 * male - 1.0129 * arts - 0.3026 * eng - 2.788 * nocr + 0.0101 * cr + 0.1925 * dist;
    return std::exp(z) / (1 + std::exp(z));
}
double p2(double male, double arts, double nocr, double cr) {
    const double z = -3.297 - 0.3869 * male - 1.0453 * arts - 2.0927 * nocr + 0.0188 * cr;
    return std::exp(z) / (1 + std::exp(z));
}
double t3(double male, double arts, double cr, double dist) {
    return 6.6596 + 0.3095 * male + 0.3532 * arts - 0.0132 * cr + 0.3408 * dist;
}

FeatureRow row_with(std::initializer_list<std::pair<Column, double>> values) {
    FeatureRow r = zero_row("x");
    for (auto [c, v] : values) r.set(c, v);
    return r;
}

ModelArtifact custom_logistic(double constant, double cr_coef) {
    ModelArtifact a;
    a.model_id = "custom";
    a.family = glm::Family::logistic;
    a.coefficients = {{"constant", constant}, {"sum_of_cr", cr_coef}};
    a.observation_date = Date(2013, 8, 1);
    a.created_at = "2013-08-01T00:00:00Z";
    return a;
}

}  // namespace

class Fixtures : public ::testing::Test {
protected:
    ModelArtifact pm1 = load_artifact(model_fixture("pm1.json"));
    ModelArtifact pm2 = load_artifact(model_fixture("pm2.json"));
    ModelArtifact pm3 = load_artifact(model_fixture("pm3.json"));
};

TEST_F(Fixtures, ShippedFilesEqualReferenceModels) {
    EXPECT_EQ(pm1, reference_artifact("PM1"));
    EXPECT_EQ(pm2, reference_artifact("PM2"));
    EXPECT_EQ(pm3, reference_artifact("PM3"));
    const std::vector<double> expected{-0.8304, -0.2643, -1.0129, -0.3026, -2.7880, 0.0101, 0.1925};
    ASSERT_EQ(pm1.coefficients.size(), expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_EQ(pm1.coefficients[i].second, expected[i]);
    EXPECT_EQ(pm2.dropped_terms, (std::vector<std::string>{"field_engineering", "distance_to_validity_end"}));
    EXPECT_EQ(pm3.dropped_terms, (std::vector<std::string>{"field_engineering", "no_credits_in_18m"}));
}

TEST_F(Fixtures, ScoreZeroCovariates) {
    EXPECT_NEAR(linear_predictor(pm1, zero_row()), -0.8304, 1e-15);
    EXPECT_NEAR(score(pm1, zero_row()), p1(0, 0, 0, 0, 0, 0), 1e-12);
    EXPECT_NEAR(score(pm1, zero_row()), 0.3036, 5e-5);
    EXPECT_NEAR(score(pm3, zero_row()), 6.6596, 1e-12);
}

TEST_F(Fixtures, ScoreWorkedExamples) {
    auto r = row_with({{Column::gender_male, 1}, {Column::field_engineering, 1}, {Column::sum_of_cr, 180},
                       {Column::distance_to_validity_end, 3.0}});
    EXPECT_NEAR(linear_predictor(pm1, r), 0.9982, 1e-12);
    EXPECT_NEAR(score(pm1, r), p1(1, 0, 1, 0, 180, 3.0), 1e-12);
    EXPECT_NEAR(score(pm1, r), 0.7307, 5e-5);

    auto r2 = row_with({{Column::sum_of_cr, 100}});
    EXPECT_NEAR(linear_predictor(pm2, r2), -1.417, 1e-12);
    EXPECT_NEAR(score(pm2, r2), p2(0, 0, 0, 100), 1e-12);
    EXPECT_NEAR(score(pm2, r2), 0.1951, 5e-5);
}

TEST_F(Fixtures, MatchesClosedFormsOnRandomRows) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> cr(0, 350), dist(0, 7);
    for (int i = 0; i < 500; ++i) {
        const double male = rng() % 2, arts = rng() % 2, eng = arts ? 0 : rng() % 2, nocr = rng() % 2;
        const double c = cr(rng), d = dist(rng);
        auto r = row_with({{Column::gender_male, male}, {Column::field_arts_and_design, arts},
                           {Column::field_engineering, eng}, {Column::no_credits_in_18m, nocr},
                           {Column::sum_of_cr, c}, {Column::distance_to_validity_end, d}});
        EXPECT_NEAR(score(pm1, r), p1(male, arts, eng, nocr, c, d), 1e-12);
        EXPECT_NEAR(score(pm2, r), p2(male, arts, nocr, c), 1e-12);
        EXPECT_NEAR(score(pm3, r), t3(male, arts, c, d), 1e-12);
    }
}

TEST_F(Fixtures, Pm3MarginalEffectOfCredits) {
    auto a = row_with({{Column::sum_of_cr, 50}, {Column::distance_to_validity_end, 2}});
    auto b = a;
    b.set(Column::sum_of_cr, 150);
    EXPECT_NEAR(score(pm3, b) - score(pm3, a), -1.32, 1e-12);
    EXPECT_NEAR(score(pm3, b) - score(pm3, a), -1.3, 0.05);
}

TEST_F(Fixtures, LogisticScoreMonotoneBySign) {
    for (const auto* art : {&pm1, &pm2}) {
        for (const auto& [term, beta] : art->coefficients) {
            if (term == "constant") continue;
            auto col = *parse_covariate(term);
            auto lo = zero_row(), hi = zero_row();
            lo.set(col, 0.5);
            hi.set(col, 1.5);
            if (beta > 0) EXPECT_GT(score(*art, hi), score(*art, lo)) << term;
            else EXPECT_LT(score(*art, hi), score(*art, lo)) << term;
        }
    }
    double prev = 0.0;
    for (double c = 0; c <= 400; c += 10) {
        const double p = score(pm1, row_with({{Column::sum_of_cr, c}}));
        EXPECT_GT(p, prev);
        prev = p;
    }
}

TEST_F(Fixtures, ScoreIsStableForExtremePredictors) {
    EXPECT_EQ(score(custom_logistic(0, 1), row_with({{Column::sum_of_cr, 700}})), 1.0);
    const double tiny = score(custom_logistic(0, 1), row_with({{Column::sum_of_cr, -700}}));
    EXPECT_GT(tiny, 0.0);
    EXPECT_NEAR(std::log(tiny), -700, 1e-9);
}

TEST_F(Fixtures, MissingCovariateIsAnError) {
    auto r = zero_row();
    r.set(Column::sum_of_cr, std::nullopt);
    EXPECT_THROW(score(pm1, r), DataError);
    r = zero_row();
    r.set(Column::field_engineering, std::nullopt);
    EXPECT_NO_THROW(score(pm2, r));  // dropped term is not consulted
}

TEST_F(Fixtures, TwoStageBranches) {
    auto high = row_with({{Column::sum_of_cr, 292.0}});  // z = 2.1926 -> p ~ 0.9
    auto o = predict_two_stage(pm2, pm3, high, 0.5);
    EXPECT_NEAR(o.p_graduate_4y, 0.9, 0.001);
    EXPECT_EQ(o.category, Category::numeric);
    ASSERT_TRUE(o.time_to_degree);
    EXPECT_EQ(*o.time_to_degree, score(pm3, high));

    auto low = row_with({{Column::sum_of_cr, 58.0}});  // p ~ 0.1
    o = predict_two_stage(pm2, pm3, low, 0.5);
    EXPECT_NEAR(o.p_graduate_4y, 0.1, 0.001);
    EXPECT_EQ(o.category, Category::four_years_or_more);
    EXPECT_FALSE(o.time_to_degree);

    const double p = score(pm2, low);
    EXPECT_EQ(predict_two_stage(pm2, pm3, low, p).category, Category::numeric);
    EXPECT_EQ(predict_two_stage(pm2, pm3, low, std::nextafter(p, 1.0)).category, Category::four_years_or_more);

    o = predict_two_stage(pm2, pm3, low, 0.5, &pm1);
    ASSERT_TRUE(o.p_graduate);
    EXPECT_EQ(*o.p_graduate, score(pm1, low));
    EXPECT_THROW(predict_two_stage(pm3, pm3, low), DataError);
}

TEST_F(Fixtures, TwoStageExtremeThresholds) {
    std::mt19937_64 rng(2);
    for (int i = 0; i < 200; ++i) {
        auto r = row_with({{Column::sum_of_cr, static_cast<double>(rng() % 400)},
                           {Column::no_credits_in_18m, static_cast<double>(rng() % 2)}});
        auto a = predict_two_stage(pm2, pm3, r, 0.0);
        EXPECT_EQ(a.category, Category::numeric);
        EXPECT_TRUE(a.time_to_degree);
        auto b = predict_two_stage(pm2, pm3, r, 1.0 + 1e-9);
        EXPECT_EQ(b.category, Category::four_years_or_more);
        EXPECT_FALSE(b.time_to_degree);
        EXPECT_GE(a.p_graduate_4y, 0.0);
        EXPECT_LE(a.p_graduate_4y, 1.0);
    }
}

TEST(ExpectedGraduates, LinearityOfExpectation) {
    auto a = custom_logistic(0.0, 1.0);
    FeatureTable t;
    t.manifest = all_columns();
    t.rows = {row_with({{Column::sum_of_cr, std::log(0.3 / 0.7)}}), row_with({{Column::sum_of_cr, std::log(0.7 / 0.3)}})};
    auto m = expected_graduates(a, t, GroupKey::field);
    ASSERT_EQ(m.size(), 1u);
    EXPECT_NEAR(m.at("business"), 1.0, 1e-12);
}

TEST(ExpectedGraduates, EmptyAndLinearRejected) {
    FeatureTable t;
    EXPECT_TRUE(expected_graduates(custom_logistic(0, 1), t, GroupKey::all).empty());
    EXPECT_THROW(expected_graduates(reference_artifact("PM3"), t, GroupKey::all), DataError);
}

TEST(ExpectedGraduates, GroupsSumToTotal) {
    synth::GenConfig cfg;
    cfg.n_students = 3000;
    auto reg = synth::generate_population(cfg, 99);
    AuditLog log;
    auto t = extract_features(reg, cfg.observation_date, std::nullopt, testing_support::approve_all(log));
    auto pm1 = reference_artifact("PM1");
    const double total = expected_graduates(pm1, t, GroupKey::all).at("all");
    for (auto key : {GroupKey::field, GroupKey::gender}) {
        double sum = 0.0;
        auto m = expected_graduates(pm1, t, key);
        EXPECT_GE(m.size(), 2u);
        for (const auto& [g, v] : m) sum += v;
        EXPECT_NEAR(sum, total, 1e-9);
    }
}

// ---- persistence ----

TEST(Artifact, SaveLoadRoundTripIsExact) {
    auto dir = testing_support::scratch_dir("artifact");
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-5, 5);
    for (int i = 0; i < 50; ++i) {
        ModelArtifact a = reference_artifact(i % 2 ? "PM1" : "PM3");
        for (auto& [name, value] : a.coefficients) value = u(rng) * std::pow(10.0, static_cast<int>(rng() % 9) - 4);
        a.r_squared = u(rng) / 10 + 0.5;
        const auto path = (dir / "a.json").string();
        save_artifact(a, path);
        auto b = load_artifact(path);
        EXPECT_EQ(a, b);
        auto row = zero_row();
        row.set(Column::sum_of_cr, 123.5);
        row.set(Column::distance_to_validity_end, 2.25);
        EXPECT_EQ(score(a, row), score(b, row));  // bit-identical
    }
}

TEST(Artifact, LoadErrors) {
    auto dir = testing_support::scratch_dir("artifact_err");
    auto j = artifact_to_json(reference_artifact("PM2"));
    auto write = [&](const nlohmann::ordered_json& doc) {
        testing_support::write_file(dir / "x.json", doc.dump());
        return (dir / "x.json").string();
    };
    auto bad = j;
    bad["coefficients"]["age"] = 0.1;
    try {
        load_artifact(write(bad));
        FAIL();
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("'age'"), std::string::npos) << e.what();
    }
    bad = j;
    bad["schema_version"] = 2;
    EXPECT_THROW(load_artifact(write(bad)), DataError);
    bad = j;
    bad.erase("coefficients");
    EXPECT_THROW(load_artifact(write(bad)), DataError);
    bad = j;
    bad["family"] = "linear";
    EXPECT_THROW(load_artifact(write(bad)), DataError);  // PM2 must be logistic
    testing_support::write_file(dir / "y.json", "{not json");
    EXPECT_THROW(load_artifact((dir / "y.json").string()), DataError);
}

// ---- training ----

namespace {

FeatureTable labelled_table(std::size_t n, std::uint64_t seed) {
    synth::GenConfig cfg;
    cfg.n_students = n;
    auto reg = synth::generate_population(cfg, seed);
    AuditLog log;
    return extract_features(reg, cfg.observation_date, cfg.observation_date.add_years(8),
                            testing_support::approve_all(log));
}

}  // namespace

TEST(Train, Pm2MissingLabelIsPreconditionError) {
    auto t = labelled_table(500, 1);
    t.manifest.erase(std::find(t.manifest.begin(), t.manifest.end(), Column::graduates_in_4y));
    for (auto& r : t.rows) r.set(Column::graduates_in_4y, std::nullopt);
    EXPECT_THROW(train_model("PM2", t), DataError);
    EXPECT_THROW(train_model("PM3", t), DataError);
}

TEST(Train, Pm3UsesOnlyFourYearGraduates) {
    auto t = labelled_table(4000, 2);
    std::size_t grads = 0;
    for (const auto& r : t.rows) grads += *r.get(Column::graduates_in_4y) == 1.0;
    auto a = train_model("pm3", t);
    EXPECT_EQ(a.model_id, "PM3");
    EXPECT_EQ(a.family, glm::Family::linear);
    EXPECT_EQ(a.n, grads);
    EXPECT_LT(a.n, t.rows.size());
    EXPECT_EQ(a.r_squared_kind, glm::RSquaredKind::coefficient_of_determination);
}

TEST(Train, ArtifactMetadata) {
    auto t = labelled_table(4000, 3);
    auto outcome = train("PM2", t);
    const auto& a = outcome.artifact;
    EXPECT_EQ(a.coefficients.front().first, "constant");
    EXPECT_EQ(a.coefficients.size() + a.dropped_terms.size(), 7u);
    EXPECT_EQ(a.observation_date, t.observation_date);
    EXPECT_EQ(a.created_at, "2013-08-01T00:00:00Z");
    EXPECT_EQ(a.n, t.rows.size());
    EXPECT_EQ(a.r_squared_kind, glm::RSquaredKind::mcfadden_pseudo);
    EXPECT_GT(a.r_squared, 0.0);
    EXPECT_LT(a.r_squared, 1.0);
    for (std::size_t j = 1; j < outcome.fit.p_values.size(); ++j) EXPECT_LT(outcome.fit.p_values[j], 0.05);
}

TEST(Train, Pm1WarnsOnShortHorizon) {
    auto t = labelled_table(3000, 4);
    EXPECT_TRUE(train("PM1", t).warnings.empty());
    t.label_horizon = t.observation_date.add_years(5);
    auto w = train("PM1", t).warnings;
    ASSERT_EQ(w.size(), 1u);
    EXPECT_NE(w[0].find("8 years"), std::string::npos);
}

TEST(Train, ConstantCovariateDroppedNotFatal) {
    auto t = labelled_table(3000, 5);
    for (auto& r : t.rows) r.set(Column::field_arts_and_design, 0.0);
    auto outcome = train("PM2", t);
    EXPECT_EQ(outcome.artifact.dropped_terms.front(), "field_arts_and_design");
    EXPECT_FALSE(outcome.artifact.coefficient("field_arts_and_design"));
}

TEST(Train, UnknownModelAndMissingCovariate) {
    auto t = labelled_table(500, 6);
    EXPECT_THROW(train_model("PM4", t), DataError);
    t.rows[3].set(Column::sum_of_cr, std::nullopt);
    EXPECT_THROW(train_model("PM2", t), DataError);
}
