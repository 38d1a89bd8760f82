#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "ventgate/features.hpp"
#include "ventgate/rng.hpp"
#include "ventgate/util.hpp"

using namespace ventgate;
using namespace vgtest;

namespace {

ImputationStats flat_stats(double mean) {
    ImputationStats st;
    st.mean.assign(kDynamicCount, mean);
    st.fitted = true;
    return st;
}

std::vector<double> hours(int n, double start = 0.0) {
    std::vector<double> g(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) g[static_cast<size_t>(i)] = start + i;
    return g;
}

}  // namespace

TEST_CASE("hourly median binning") {
    ObservationSeries s;
    s.variable_id = 0;
    s.samples = {{4.1, 10.0}, {4.9, 20.0}};
    auto grid = hours(6);
    auto binned = bin_hourly(s, grid);
    REQUIRE(binned.size() == 6);
    CHECK(binned[4] == 15.0);  // even count: midpoint of the two middle values
    CHECK_FALSE(binned[3].has_value());
    CHECK_FALSE(binned[5].has_value());

    s.samples = {{4.1, 1.0}, {4.2, 9.0}, {4.8, 5.0}};
    binned = bin_hourly(s, grid);
    CHECK(binned[4] == 5.0);

    SUBCASE("bin is half-open on the right") {
        s.samples = {{5.0, 7.0}};
        binned = bin_hourly(s, grid);
        CHECK_FALSE(binned[4].has_value());
        CHECK(binned[5] == 7.0);
    }
    SUBCASE("samples outside the grid are ignored") {
        s.samples = {{-2.0, 1.0}, {100.0, 2.0}};
        binned = bin_hourly(s, grid);
        for (const auto& b : binned) CHECK_FALSE(b.has_value());
    }
}

TEST_CASE("median binning agrees with a sort-based oracle on random data") {
    Rng rng(7);
    for (int iter = 0; iter < 200; ++iter) {
        const int n_bins = (int)rng.uniform_int(1, 12);
        auto grid = hours(n_bins, rng.uniform(0.0, 5.0));
        ObservationSeries s;
        s.variable_id = 0;
        double t = grid[0] - 1.0;
        std::vector<std::vector<double>> expect(static_cast<size_t>(n_bins));
        while (true) {
            t += rng.uniform(0.05, 1.5);
            if (t >= grid.back() + 1.0) break;
            const double v = rng.uniform(-10.0, 10.0);
            s.samples.push_back({t, v});
            const double off = t - grid[0];
            if (off >= 0.0 && off < n_bins) expect[static_cast<size_t>(off)].push_back(v);
        }
        auto binned = bin_hourly(s, grid);
        for (int k = 0; k < n_bins; ++k) {
            if (expect[static_cast<size_t>(k)].empty()) {
                CHECK_FALSE(binned[static_cast<size_t>(k)].has_value());
            } else {
                REQUIRE(binned[static_cast<size_t>(k)].has_value());
                CHECK(*binned[static_cast<size_t>(k)] ==
                      doctest::Approx(sort_median(expect[static_cast<size_t>(k)])).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("forward fill carries values for at most 24 hours") {
    std::vector<std::optional<double>> binned(30);
    binned[4] = 10.0;
    auto filled = forward_fill(binned);

    CHECK(filled.value[10] == 10.0);
    CHECK(filled.tslm[10] == 6.0);
    CHECK(filled.value[28] == 10.0);  // age 24: still carried
    CHECK(filled.tslm[28] == 24.0);
    CHECK_FALSE(filled.value[29].has_value());  // age 25: dropped
    CHECK(filled.tslm[29] == 25.0);

    SUBCASE("most recent observation wins") {
        binned[6] = 20.0;
        filled = forward_fill(binned);
        CHECK(filled.value[7] == 20.0);
        CHECK(filled.tslm[7] == 1.0);
    }
    SUBCASE("staleness before any observation counts from the grid start") {
        std::vector<std::optional<double>> late(3);
        late[2] = 7.0;
        filled = forward_fill(late);
        CHECK_FALSE(filled.value[0].has_value());
        CHECK_FALSE(filled.value[1].has_value());
        CHECK(filled.tslm[0] == 0.0);
        CHECK(filled.tslm[1] == 1.0);
        CHECK(filled.value[2] == 7.0);
        CHECK(filled.tslm[2] == 0.0);
    }
    SUBCASE("invalid cutoff is rejected") {
        CHECK_THROWS_AS(forward_fill(binned, 0.0), std::invalid_argument);
    }
}

TEST_CASE("mean imputation fills what carry-forward left absent") {
    auto stats = flat_stats(7.5);
    std::vector<std::optional<double>> v = {std::nullopt, 3.0, std::nullopt};
    impute_mean(v, stats, 0);
    CHECK(*v[0] == 7.5);
    CHECK(*v[1] == 3.0);
    CHECK(*v[2] == 7.5);

    std::vector<std::optional<double>> none(5);
    impute_mean(none, stats, 9);
    for (const auto& c : none) CHECK(*c == 7.5);
}

TEST_CASE("baseline and trend derivation") {
    std::vector<std::optional<double>> obs(10);
    obs[5] = 10.0;
    obs[8] = 20.0;
    std::vector<double> final_values(10, 99.0);
    auto d = derive_features(obs, final_values);

    CHECK(d.baseline[9] == 15.0);  // mean of both observations in the window
    CHECK(d.trend[8] == 10.0);
    CHECK(d.trend[9] == 10.0);   // persists until a newer observation
    CHECK(d.trend[5] == 0.0);    // first observation has no predecessor
    CHECK(d.baseline[3] == 99.0);  // nothing observed yet: falls back to the current value

    SUBCASE("single observation") {
        std::vector<std::optional<double>> one(6);
        one[2] = 42.0;
        std::vector<double> fv(6, 42.0);
        auto ds = derive_features(one, fv);
        CHECK(ds.trend[5] == 0.0);
        CHECK(ds.baseline[3] == 42.0);
        CHECK(ds.baseline[2] == 42.0);  // window excludes the current bin, falls back
    }
    SUBCASE("window is bounded at 72 hours") {
        std::vector<std::optional<double>> far(80);
        far[0] = 100.0;
        far[75] = 10.0;
        std::vector<double> fv(80, 0.0);
        auto ds = derive_features(far, fv);
        CHECK(ds.baseline[72] == doctest::Approx(100.0));  // bin 0 still inside [0, 72)
        CHECK(ds.baseline[73] == 0.0);                     // aged out: falls back to current
        CHECK(ds.baseline[76] == doctest::Approx(10.0));   // only bin 75 left in the window
    }
}

TEST_CASE("feature schema arithmetic") {
    CHECK(kStaticCount == 92);
    CHECK(kFeatureCount == 292);
    CHECK(feature_column_names().size() == kFeatureCount);
    CHECK(file_column_names().size() == 1 + kFeatureCount + kDynamicCount);
    CHECK(file_column_names()[0] == "timestamp");
}

TEST_CASE("assembled matrix covers the grid with schema-ordered columns") {
    auto e = basic_encounter("enc1", 0.0, 40.0);
    add_series(e, kVarHeartRate, {{0.5, 95.0}});
    add_series(e, kVarRespRate, {{0.5, 22.0}});
    add_series(e, kVarMap, {{0.5, 65.0}});
    add_series(e, kVarFio2, {{0.5, 0.3}});
    add_series(e, kVarPao2, {{0.5, 90.0}});
    e.medication_events = {{2, 4.0}};
    e.comorbidities[5] = 1;
    e.vent.peep_times = {30.0};
    e.vent.fio2_times = {30.0};

    const auto t0 = derive_t0(e.vent);
    REQUIRE(t0.has_value());
    auto fm = assemble(e, t0, flat_stats(7.5));

    const auto grid = prediction_timestamps(e, t0);
    REQUIRE(fm.rows() == grid.size());
    CHECK(fm.timestamps == grid);  // rows 4..29

    // row at t=4 (index 0)
    CHECK(fm.at(0, 0) == 60.0f);      // age
    CHECK(fm.at(0, 6 + 5) == 1.0f);   // comorbidity flag 5
    CHECK(fm.at(0, 68 + 2) == 1.0f);  // medication category 2 active

    // criterion block at columns 80..91
    const float expect_crit[kCriterionCount] = {0, 1, 1, 0, 1, 0, 1, 0, 0, 0, 0, 0};
    for (int i = 0; i < kCriterionCount; ++i) CHECK(fm.at(0, 80 + i) == expect_crit[i]);

    // dynamic block: heart rate carried from hour 0
    CHECK(fm.at(0, 92 + kVarHeartRate) == 95.0f);
    CHECK(fm.mask[0 * kFeatureCount + 92 + kVarHeartRate] ==
          (uint8_t)CellProvenance::FILLED);
    // a variable never observed is imputed to the training mean
    CHECK(fm.at(0, 92 + 20) == 7.5f);
    CHECK(fm.mask[0 * kFeatureCount + 92 + 20] == (uint8_t)CellProvenance::IMPUTED);
    // staleness feature and per-variable recency agree
    CHECK(fm.at(0, 242 + kVarHeartRate) == 4.0f);
    CHECK(fm.tslm[0 * kDynamicCount + kVarHeartRate] == 4.0f);
    // baseline from the lone observation, zero trend
    CHECK(fm.at(0, 142 + kVarHeartRate) == 95.0f);
    CHECK(fm.at(0, 192 + kVarHeartRate) == 0.0f);

    // medication window closes after 24 h: t=27 has age 23, t=28 has age 24
    const size_t r27 = 23, r28 = 24;
    REQUIRE(fm.timestamps[r27] == 27.0);
    CHECK(fm.at(r27, 68 + 2) == 1.0f);
    CHECK(fm.at(r28, 68 + 2) == 0.0f);

    // labels: onset at 30 puts rows with t in [6, 29] inside the look-ahead
    CHECK(fm.labels[0] == 0);  // t=4
    CHECK(fm.labels[1] == 0);  // t=5
    CHECK(fm.labels[2] == 1);  // t=6
    CHECK(fm.labels[fm.rows() - 1] == 1);

    SUBCASE("heart-rate staleness past 24 h falls back to imputation") {
        const size_t r24 = 20;  // t=24, age 24: last hour still carried
        REQUIRE(fm.timestamps[r24] == 24.0);
        CHECK(fm.at(r24, 92 + kVarHeartRate) == 95.0f);
        CHECK(fm.mask[r24 * kFeatureCount + 92 + kVarHeartRate] ==
              (uint8_t)CellProvenance::FILLED);
        REQUIRE(fm.timestamps[r28] == 28.0);  // age 28: carried value expired
        CHECK(fm.at(r28, 92 + kVarHeartRate) == 7.5f);
        CHECK(fm.mask[r28 * kFeatureCount + 92 + kVarHeartRate] ==
              (uint8_t)CellProvenance::IMPUTED);
        CHECK(fm.tslm[r28 * kDynamicCount + kVarHeartRate] == 28.0f);
    }
}

TEST_CASE("later observations never alter earlier rows") {
    Rng rng(11);
    for (int iter = 0; iter < 20; ++iter) {
        auto e = basic_encounter("enc1", 0.0, 20.0);
        add_series(e, kVarHeartRate, {{0.5, 80.0}, {3.2, 85.0}});
        add_series(e, kVarLactate, {{1.0, 1.5}});
        auto fm = assemble(e, std::nullopt, flat_stats(5.0));

        auto later = e;
        const double extra_t = 9.0 + rng.uniform(0.01, 8.0);  // strictly after row 8's bin
        later.observations[0].samples.push_back({extra_t, rng.uniform(40.0, 140.0)});
        auto fm2 = assemble(later, std::nullopt, flat_stats(5.0));

        REQUIRE(fm.rows() == fm2.rows());
        // rows whose bin closes before the appended sample are untouched
        for (size_t row = 0; row < fm.rows(); ++row) {
            if (fm.timestamps[row] + 1.0 <= extra_t) {
                for (int c = 0; c < kFeatureCount; ++c)
                    CHECK(fm.at(row, c) == fm2.at(row, c));
            }
        }
    }
}

TEST_CASE("training standardization is affine with a variance floor") {
    auto e1 = basic_encounter("a", 0.0, 10.0);
    add_series(e1, kVarHeartRate, {{0.5, 60.0}, {4.5, 70.0}});
    auto e2 = basic_encounter("b", 0.0, 10.0);
    add_series(e2, kVarHeartRate, {{0.5, 100.0}});

    auto stats = flat_stats(0.0);
    auto m1 = assemble(e1, std::nullopt, stats);
    auto m2 = assemble(e2, std::nullopt, stats);

    auto scaler = fit_standardizer({&m1, &m2});
    REQUIRE(scaler.fitted);
    REQUIRE(scaler.mean.size() == kFeatureCount);

    // constant columns get a unit std so standardization maps them to zero
    const int age_col = 0;
    CHECK(scaler.std[age_col] == 1.0);

    auto m1s = m1, m2s = m2;
    standardize(m1s, scaler);
    standardize(m2s, scaler);
    CHECK(m1s.at(0, age_col) == 0.0f);

    // a varying column is mean-centered across the train rows
    const int hr_col = 92 + kVarHeartRate;
    double total = 0.0;
    size_t n = 0;
    for (auto* m : {&m1s, &m2s})
        for (size_t r = 0; r < m->rows(); ++r) {
            total += m->at(r, hr_col);
            ++n;
        }
    CHECK(std::fabs(total / double(n)) < 1e-5);
}

TEST_CASE("severity rows follow the oxygenation state of each grid hour") {
    auto e = basic_encounter("enc1", 0.0, 12.0);
    add_series(e, kVarFio2, {{0.5, 0.5}});
    add_series(e, kVarPao2, {{0.5, 120.0}});  // PF=240: moderate
    add_series(e, kVarSpo2, {{0.5, 60.0}});   // SF=120: severe, but PF has precedence
    e.vent.peep_times = {9.0};
    e.vent.fio2_times = {9.0};
    const auto t0 = derive_t0(e.vent);

    auto pts = severity_points_rows(e, t0);
    const auto grid = prediction_timestamps(e, t0);
    REQUIRE(pts.size() == grid.size());  // rows 4..8
    // onset at 9 is within 24 h of every row and the ratio stays moderate: rule max is 3
    for (auto p : pts) CHECK(p == 3);

    SUBCASE("onset beyond 24 hours dominates") {
        auto far = basic_encounter("enc2", 0.0, 80.0);
        add_series(far, kVarSpo2, {{0.5, 98.0}});
        far.vent.peep_times = {40.0};
        far.vent.fio2_times = {40.0};
        auto t0f = derive_t0(far.vent);
        auto rows = severity_points_rows(far, t0f);
        const auto g = prediction_timestamps(far, t0f);
        REQUIRE(rows.size() == g.size());
        // t=4..15: onset more than 24 h out -> 5; t=16..39: within -> 3
        for (size_t i = 0; i < g.size(); ++i) {
            const int expect = g[i] + 24.0 < 40.0 ? 5 : 3;
            CHECK(rows[i] == expect);
        }
    }
}

TEST_CASE("feature matrix file round-trips byte-identically") {
    auto e = basic_encounter("enc1", 0.0, 12.0);
    add_series(e, kVarHeartRate, {{0.5, 80.0}, {5.5, 90.0}});
    auto fm = assemble(e, std::nullopt, flat_stats(1.0));
    fm.labels[2] = 1;

    const auto bytes = feature_matrix_to_bytes(fm);
    auto back = feature_matrix_from_bytes(bytes, "enc1");
    CHECK(feature_matrix_to_bytes(back) == bytes);
    CHECK(back.rows() == fm.rows());
    CHECK(back.labels[2] == 1);
    CHECK(back.timestamps == fm.timestamps);

    TempDir dir("fmx");
    save_feature_matrix(dir.str() + "/m.fmx", fm);
    auto loaded = load_feature_matrix(dir.str() + "/m.fmx", "enc1");
    CHECK(feature_matrix_to_bytes(loaded) == bytes);

    SUBCASE("bad magic") {
        auto bad = bytes;
        bad[0] = 'Z';
        CHECK_THROWS_WITH_AS(feature_matrix_from_bytes(bad, "x"), doctest::Contains("BAD_MAGIC"),
                             std::runtime_error);
    }
    SUBCASE("wrong column count") {
        auto bad = bytes;
        bad[8] = 0x10;  // low byte of the column-count field
        CHECK_THROWS_WITH_AS(feature_matrix_from_bytes(bad, "x"),
                             doctest::Contains("SCHEMA_MISMATCH"), std::runtime_error);
    }
    SUBCASE("truncated payload") {
        auto bad = bytes.substr(0, bytes.size() / 2);
        CHECK_THROWS_WITH_AS(feature_matrix_from_bytes(bad, "x"), doctest::Contains("TRUNCATED"),
                             std::runtime_error);
    }
    SUBCASE("trailing garbage") {
        auto bad = bytes + "xx";
        CHECK_THROWS_AS(feature_matrix_from_bytes(bad, "x"), std::runtime_error);
    }
}
