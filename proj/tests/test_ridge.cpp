#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "tactile/dataset.hpp"
#include "tactile/ridge.hpp"

using namespace tactile;

namespace {

std::vector<RidgeSample> synthetic(std::size_t n, std::uint64_t seed) {
    // Exact linear features so the model is recoverable to rounding error.
    Rng rng(seed);
    std::vector<RidgeSample> rows;
    for (std::size_t i = 0; i < n; ++i) {
        RidgeSample s;
        for (auto& f : s.features) f = rng.uniform(-1, 1);
        s.label = {2 * s.features[0] + 1, -s.features[1], 0.5 * s.features[2] + s.features[4], 3 * s.features[3] - 2};
        rows.push_back(s);
    }
    return rows;
}

}  // namespace

TEST(TrainRidge, RecoversLinearMap) {
    const auto rows = synthetic(100, 1);
    const RidgeModel m = train_ridge(rows, 0.0);
    EXPECT_NEAR(m.weight(0, 0), 2.0, 1e-9);
    EXPECT_NEAR(m.bias[0], 1.0, 1e-9);
    EXPECT_NEAR(m.weight(1, 1), -1.0, 1e-9);
    EXPECT_NEAR(m.weight(2, 4), 1.0, 1e-9);
    EXPECT_NEAR(m.bias[3], -2.0, 1e-9);
    EXPECT_NEAR(m.weight(3, 5), 0.0, 1e-9);
}

TEST(TrainRidge, TooFewSamples) {
    const auto rows = synthetic(2, 2);
    try {
        train_ridge(rows, 0.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::degenerate_design);
    }
}

TEST(TrainRidge, SingularCovariance) {
    auto rows = synthetic(50, 3);
    for (auto& r : rows) r.features[5] = r.features[4];  // duplicate column
    EXPECT_THROW(train_ridge(rows, 0.0), Error);
    EXPECT_NO_THROW(train_ridge(rows, 1e-3));
}

TEST(TrainRidge, LargeLambdaShrinksToMean) {
    const auto rows = synthetic(60, 4);
    const RidgeModel m = train_ridge(rows, 1e12);
    double mean_fx = 0.0;
    for (const auto& r : rows) mean_fx += r.label.fx;
    mean_fx /= rows.size();
    for (double w : m.weights) EXPECT_NEAR(w, 0.0, 1e-8);
    EXPECT_NEAR(m.bias[0], mean_fx, 1e-6);
    const FeatureVector any{0.3, -0.2, 0.9, 0.1, 0.5, -0.7};
    EXPECT_NEAR(predict_ridge(m, any).wrench.fx, mean_fx, 1e-6);
}

TEST(TrainRidge, Deterministic) {
    const auto rows = synthetic(80, 5);
    EXPECT_EQ(train_ridge(rows, 1e-6), train_ridge(rows, 1e-6));
}

TEST(PredictRidge, BiasOnly) {
    RidgeModel m;
    m.bias = {1, 0, 0, 0};
    const FeatureVector f{5, 5, 5, 5, 5, 5};
    const ForceEstimate e = predict_ridge(m, f, 0.75);
    EXPECT_EQ(e.wrench.fx, 1.0);
    EXPECT_EQ(e.total, 1.0);
    EXPECT_EQ(e.quality, 0.75);
}

TEST(PredictRidge, ShapeMismatch) {
    const RidgeModel m;
    const std::vector<double> five(5, 0.0);
    try {
        predict_ridge(m, five);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::shape_mismatch);
    }
}

TEST(RidgePersistence, JsonRoundTrip) {
    const RidgeModel m = train_ridge(synthetic(40, 6), 1e-3);
    EXPECT_EQ(ridge_from_json(to_json(m)), m);
    const auto path = std::filesystem::temp_directory_path() / "tactile_ridge.json";
    save_ridge(path, m);
    EXPECT_EQ(load_ridge(path), m);
    std::filesystem::remove(path);
}

TEST(RidgePersistence, RejectsWrongShape) {
    nlohmann::json j = to_json(RidgeModel{});
    j["bias"] = std::vector<double>{1, 2};
    EXPECT_THROW(ridge_from_json(j), Error);
}

TEST(DatasetCsv, RoundTrip) {
    const auto rows = synthetic(10, 7);
    std::stringstream ss;
    write_dataset_csv(ss, rows);
    const auto back = read_dataset_csv(ss);
    ASSERT_EQ(back.size(), rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        EXPECT_EQ(back[i].features, rows[i].features);
        EXPECT_EQ(back[i].label, rows[i].label);
    }
}

TEST(DatasetCsv, RejectsBadHeader) {
    std::stringstream ss("a,b,c\n1,2,3\n");
    EXPECT_THROW(read_dataset_csv(ss), Error);
}

TEST(FitGains, RecoversGelGains) {
    const GelConfig gel;
    Rng rng(9);
    const auto rows = make_dataset(gel, TrackConfig{}, calibration_for(gel), 60, rng);
    const GainFit g = fit_gains(rows, lever_ratio(gel));
    EXPECT_NEAR(g.k_s, gel.k_s, 0.02 * gel.k_s);
    EXPECT_NEAR(g.k_n, gel.k_n, 0.03 * gel.k_n);
    EXPECT_NEAR(g.k_t, gel.k_t, 0.05 * gel.k_t);
}

TEST(TrainRidge, SyntheticGelHeldOut) {
    const GelConfig gel;
    Rng rng(10);
    const auto train = make_dataset(gel, TrackConfig{}, calibration_for(gel), 150, rng);
    const auto test = make_dataset(gel, TrackConfig{}, calibration_for(gel), 50, rng);
    const RidgeModel m = train_ridge(train, 1e-6);
    for (const auto& s : test) {
        const ForceEstimate e = predict_ridge(m, s.features);
        EXPECT_NEAR(e.wrench.fx, s.label.fx, 0.05 * std::abs(s.label.fx));
        EXPECT_NEAR(e.wrench.fn, s.label.fn, 0.05 * s.label.fn);
    }
}
