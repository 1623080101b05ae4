#pragma once

// Learned force estimator: ridge regression from pooled flow features to the
// four wrench components, with CSV datasets and JSON model persistence.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "tactile/error.hpp"
#include "tactile/forceest.hpp"
#include "tactile/wrench.hpp"

namespace tactile {

inline constexpr std::size_t kOutputCount = 4;

struct RidgeSample {
    FeatureVector features{};
    Wrench label;
};

struct RidgeModel {
    /// Row-major, kOutputCount rows by kFeatureCount columns; rows are fx, fy, fn, tau.
    std::array<double, kOutputCount * kFeatureCount> weights{};
    std::array<double, kOutputCount> bias{};
    double lambda = 0.0;
    std::vector<std::string> feature_names{kFeatureNames.begin(), kFeatureNames.end()};

    double weight(std::size_t out, std::size_t feat) const { return weights[out * kFeatureCount + feat]; }

    friend bool operator==(const RidgeModel&, const RidgeModel&) = default;
};

namespace detail {

inline std::array<double, kOutputCount> as_array(const Wrench& w) { return {w.fx, w.fy, w.fn, w.tau}; }

}  // namespace detail

/// Closed-form ridge regression with an unpenalized intercept: features and
/// labels are centered, W = (Xc'Xc + lambda I)^-1 Xc'Yc, bias = mean(Y) - W mean(X).
inline RidgeModel train_ridge(std::span<const RidgeSample> dataset, double lambda) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw Error(Errc::invalid_config, "lambda must be finite and >= 0");
    const auto n = static_cast<Eigen::Index>(dataset.size());
    constexpr auto F = static_cast<Eigen::Index>(kFeatureCount);
    constexpr auto O = static_cast<Eigen::Index>(kOutputCount);
    if (n < F + 1)
        throw Error(Errc::degenerate_design, std::to_string(n) + " samples, need at least " + std::to_string(F + 1));

    Eigen::MatrixXd X(n, F), Y(n, O);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& s = dataset[static_cast<std::size_t>(i)];
        const auto y = detail::as_array(s.label);
        for (Eigen::Index j = 0; j < F; ++j) {
            if (!std::isfinite(s.features[static_cast<std::size_t>(j)]))
                throw Error(Errc::invalid_config, "non-finite feature in training row " + std::to_string(i));
            X(i, j) = s.features[static_cast<std::size_t>(j)];
        }
        for (Eigen::Index j = 0; j < O; ++j) Y(i, j) = y[static_cast<std::size_t>(j)];
    }
    const Eigen::RowVectorXd x_mean = X.colwise().mean();
    const Eigen::RowVectorXd y_mean = Y.colwise().mean();
    X.rowwise() -= x_mean;
    Y.rowwise() -= y_mean;

    Eigen::MatrixXd A = X.transpose() * X;
    if (lambda == 0.0) {
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(A, Eigen::EigenvaluesOnly);
        const double hi = eig.eigenvalues().maxCoeff();
        const double lo = eig.eigenvalues().minCoeff();
        if (!(hi > 0.0) || lo <= 1e-12 * hi)
            throw Error(Errc::degenerate_design, "feature covariance is singular and lambda is 0");
    }
    A.diagonal().array() += lambda;
    const Eigen::MatrixXd W = A.ldlt().solve(X.transpose() * Y);  // F x O
    const Eigen::RowVectorXd b = y_mean - x_mean * W;

    RidgeModel m;
    m.lambda = lambda;
    for (Eigen::Index o = 0; o < O; ++o) {
        m.bias[static_cast<std::size_t>(o)] = b(o);
        for (Eigen::Index j = 0; j < F; ++j) m.weights[static_cast<std::size_t>(o * F + j)] = W(j, o);
    }
    return m;
}

/// quality is carried through from the flow that produced the features.
inline ForceEstimate predict_ridge(const RidgeModel& model, std::span<const double> features, double quality = 1.0) {
    if (features.size() != kFeatureCount)
        throw Error(Errc::shape_mismatch, "expected " + std::to_string(kFeatureCount) + " features, got " +
                                              std::to_string(features.size()));
    std::array<double, kOutputCount> y = model.bias;
    for (std::size_t o = 0; o < kOutputCount; ++o)
        for (std::size_t j = 0; j < kFeatureCount; ++j) y[o] += model.weight(o, j) * features[j];
    ForceEstimate e;
    e.wrench = {y[0], y[1], y[2], y[3]};
    e.total = total_force(e.wrench);
    e.quality = quality;
    return e;
}

// ---------------------------------------------------------------------------
// Persistence

inline nlohmann::json to_json(const RidgeModel& m) {
    return {{"weights", m.weights}, {"bias", m.bias}, {"lambda", m.lambda}, {"feature_names", m.feature_names}};
}

inline RidgeModel ridge_from_json(const nlohmann::json& j) {
    RidgeModel m;
    try {
        const auto w = j.at("weights").get<std::vector<double>>();
        const auto b = j.at("bias").get<std::vector<double>>();
        if (w.size() != m.weights.size() || b.size() != m.bias.size())
            throw Error(Errc::shape_mismatch, "model weights must be 4x6 and bias of length 4");
        std::copy(w.begin(), w.end(), m.weights.begin());
        std::copy(b.begin(), b.end(), m.bias.begin());
        m.lambda = j.at("lambda").get<double>();
        m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::parse_error, std::string("ridge model: ") + e.what());
    }
    return m;
}

inline void save_ridge(const std::filesystem::path& path, const RidgeModel& m) {
    std::ofstream f(path);
    if (!f) throw Error(Errc::io_error, "cannot open " + path.string());
    f << to_json(m).dump(2) << '\n';
}

inline RidgeModel load_ridge(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw Error(Errc::io_error, "cannot open " + path.string());
    try {
        return ridge_from_json(nlohmann::json::parse(f));
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(Errc::parse_error, e.what());
    }
}

inline constexpr std::string_view kDatasetHeader =
    "mean_dx,mean_dy,mean_radial,mean_tangential,mean_magnitude,std_magnitude,fx,fy,fn,tau";

inline void write_dataset_csv(std::ostream& os, std::span<const RidgeSample> rows) {
    os << kDatasetHeader << '\n';
    os.precision(17);
    for (const auto& r : rows) {
        for (double v : r.features) os << v << ',';
        os << r.label.fx << ',' << r.label.fy << ',' << r.label.fn << ',' << r.label.tau << '\n';
    }
}

inline std::vector<RidgeSample> read_dataset_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw Error(Errc::parse_error, "dataset CSV is empty (header row required)");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kDatasetHeader) throw Error(Errc::parse_error, "unexpected dataset header: " + line);
    std::vector<RidgeSample> rows;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        std::array<double, kFeatureCount + kOutputCount> v{};
        std::stringstream ss(line);
        std::string cell;
        std::size_t k = 0;
        while (std::getline(ss, cell, ',')) {
            if (k >= v.size()) throw Error(Errc::parse_error, "too many columns on line " + std::to_string(lineno));
            try {
                v[k++] = std::stod(cell);
            } catch (const std::exception&) {
                throw Error(Errc::parse_error, "bad number '" + cell + "' on line " + std::to_string(lineno));
            }
        }
        if (k != v.size()) throw Error(Errc::parse_error, "expected 10 columns on line " + std::to_string(lineno));
        RidgeSample s;
        std::copy_n(v.begin(), kFeatureCount, s.features.begin());
        s.label = {v[6], v[7], v[8], v[9]};
        rows.push_back(s);
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Gain calibration

struct GainFit {
    double k_s = 0.0;
    double k_n = 0.0;
    double k_t = 0.0;
};

/// Fits the linear gel gains through the origin from a labeled dataset.
/// lever_ratio is mean(|r_i|^2) / R^2 of the marker grid that produced the
/// features, which links the radial and tangential features to k_n and k_t.
inline GainFit fit_gains(std::span<const RidgeSample> dataset, double lever_ratio) {
    double ss = 0.0, sf = 0.0, ns = 0.0, nf = 0.0, ts = 0.0, tf = 0.0;
    for (const auto& s : dataset) {
        ss += s.features[0] * s.label.fx + s.features[1] * s.label.fy;
        sf += s.label.fx * s.label.fx + s.label.fy * s.label.fy;
        ns += s.features[2] * s.label.fn;
        nf += s.label.fn * s.label.fn;
        ts += s.features[3] * s.label.tau;
        tf += s.label.tau * s.label.tau;
    }
    if (!(sf > 0.0 && nf > 0.0 && tf > 0.0) || !(lever_ratio > 0.0))
        throw Error(Errc::degenerate_design, "dataset does not excite every wrench axis");
    return {ss / sf, ns / nf / lever_ratio, ts / tf / lever_ratio};
}

/// mean(|r_i|^2) / R^2 for the rest grid of a gel configuration.
inline double lever_ratio(const GelConfig& gel) {
    const GelState s = make_gel(gel);
    const Vec2 c = s.centroid();
    double sum = 0.0;
    for (const auto& p : s.rest_positions) sum += norm2(p - c);
    const double r = s.radius_norm();
    return sum / static_cast<double>(s.rest_positions.size()) / (r * r);
}

}  // namespace tactile
