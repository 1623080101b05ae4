#pragma once

// Synthetic labeled data: random wrenches pushed through the full
// render -> track -> pool path.

#include <cmath>
#include <vector>

#include "tactile/flowtrack.hpp"
#include "tactile/forceest.hpp"
#include "tactile/gelsim.hpp"
#include "tactile/ridge.hpp"
#include "tactile/rng.hpp"

namespace tactile {

/// Magnitude ranges for random wrenches. Signs of fx, fy and tau are drawn
/// independently; fn is always a press. Lower bounds keep every component
/// away from zero so that relative errors stay meaningful.
struct WrenchBounds {
    double shear_lo = 0.75, shear_hi = 2.0;  // N
    double normal_lo = 1.5, normal_hi = 4.0; // N
    double torque_lo = 40.0, torque_hi = 60.0;  // N mm
};

inline Wrench draw_wrench(Rng& rng, const WrenchBounds& b = {}) {
    auto signed_mag = [&](double lo, double hi) { return (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(lo, hi); };
    Wrench w;
    w.fx = signed_mag(b.shear_lo, b.shear_hi);
    w.fy = signed_mag(b.shear_lo, b.shear_hi);
    w.fn = rng.uniform(b.normal_lo, b.normal_hi);
    w.tau = signed_mag(b.torque_lo, b.torque_hi);
    return w;
}

/// Tracks the reference frame of a gel against itself under one wrench.
struct Observer {
    GelConfig gel;
    TrackConfig track;
    GelState state;
    MarkerSet markers;
    Pyramid reference;

    Observer(const GelConfig& g, const TrackConfig& t) : gel(g), track(t), state(make_gel(g)) {
        validate(t);
        const GelImage ref = render(make_gel(g));
        markers = detect_markers(ref, g.marker_count());
        reference = build_pyramid(ref, t.pyramid_levels);
    }

    FlowField observe(const Wrench& w) {
        state = apply_wrench(std::move(state), w);
        return lk_flow(reference, build_pyramid(render(state), track.pyramid_levels), markers.centroids, track);
    }
};

inline std::vector<RidgeSample> make_dataset(const GelConfig& gel, const TrackConfig& track, const Calibration& cal,
                                             std::size_t count, Rng& rng, const WrenchBounds& bounds = {}) {
    Observer obs(gel, track);
    std::vector<RidgeSample> rows;
    rows.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const Wrench w = draw_wrench(rng, bounds);
        rows.push_back({pool_features(obs.observe(w), cal), w});
    }
    return rows;
}

}  // namespace tactile
