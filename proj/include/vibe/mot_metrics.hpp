#pragma once

#include <string>
#include <vector>

#include "vibe/common.hpp"
#include "vibe/tracker.hpp"

namespace vibe::motmetrics {

struct EmptyTruth : Error {
    using Error::Error;
};

struct IdReport {
    int nt = 0;  // number of computed trajectories
    double idf1 = 0.0, idp = 0.0, idr = 0.0;
    long idtp = 0, idfp = 0, idfn = 0;
};

// Identity-aware tracking metrics: a global one-to-one truth<->computed
// matching maximizing per-frame overlap (positions within match_radius at the
// same frame), solved with the Hungarian assignment.
IdReport id_metrics(const std::vector<tracker::TrackedTrajectory>& truth,
                    const std::vector<tracker::TrackedTrajectory>& computed,
                    double match_radius, double frame_rate = 15.0);

std::string format_report(const IdReport& r);

}  // namespace vibe::motmetrics
