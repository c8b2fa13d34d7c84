#include "vibe/mot_metrics.hpp"

#include <cmath>
#include <cstdio>

namespace vibe::motmetrics {

namespace {

// Trajectory resampled onto integer frames.
struct FrameTrack {
    int first = 0;
    std::vector<Vec2> pos;
    long frames() const { return static_cast<long>(pos.size()); }
};

FrameTrack to_frames(const tracker::TrackedTrajectory& t, double frame_rate) {
    FrameTrack f;
    f.first = static_cast<int>(std::lround(t.start_time() * frame_rate));
    f.pos.reserve(t.samples.size());
    for (const auto& s : t.samples) f.pos.push_back(s.pos);
    return f;
}

long overlap_frames(const FrameTrack& a, const FrameTrack& b, double radius) {
    const int lo = std::max(a.first, b.first);
    const int hi = std::min(a.first + static_cast<int>(a.pos.size()),
                            b.first + static_cast<int>(b.pos.size()));
    long count = 0;
    for (int f = lo; f < hi; ++f) {
        if (distance(a.pos[f - a.first], b.pos[f - b.first]) <= radius) ++count;
    }
    return count;
}

}  // namespace

IdReport id_metrics(const std::vector<tracker::TrackedTrajectory>& truth,
                    const std::vector<tracker::TrackedTrajectory>& computed,
                    double match_radius, double frame_rate) {
    if (truth.empty()) throw EmptyTruth("ground-truth trajectory set is empty");

    std::vector<FrameTrack> gt, hy;
    gt.reserve(truth.size());
    hy.reserve(computed.size());
    for (const auto& t : truth) gt.push_back(to_frames(t, frame_rate));
    for (const auto& t : computed) hy.push_back(to_frames(t, frame_rate));

    long total_truth = 0, total_comp = 0;
    for (const auto& t : gt) total_truth += t.frames();
    for (const auto& t : hy) total_comp += t.frames();

    IdReport rep;
    rep.nt = static_cast<int>(computed.size());

    long idtp = 0;
    if (!hy.empty()) {
        // Max-overlap one-to-one matching as a min-cost assignment; padding
        // to square with zero-overlap dummies leaves extras unmatched.
        const std::size_t n = std::max(gt.size(), hy.size());
        std::vector<std::vector<double>> cost(n, std::vector<double>(n, 0.0));
        for (std::size_t i = 0; i < gt.size(); ++i)
            for (std::size_t j = 0; j < hy.size(); ++j)
                cost[i][j] = -static_cast<double>(overlap_frames(gt[i], hy[j], match_radius));
        for (const auto& [i, j] : tracker::hungarian(cost)) {
            if (i < static_cast<int>(gt.size()) && j < static_cast<int>(hy.size()))
                idtp += -static_cast<long>(cost[i][j]);
        }
    }

    rep.idtp = idtp;
    rep.idfp = total_comp - idtp;
    rep.idfn = total_truth - idtp;
    const double f1_den = static_cast<double>(2 * idtp + rep.idfp + rep.idfn);
    rep.idf1 = f1_den > 0 ? 2.0 * idtp / f1_den : 0.0;
    rep.idp = (idtp + rep.idfp) > 0 ? static_cast<double>(idtp) / (idtp + rep.idfp) : 0.0;
    rep.idr = (idtp + rep.idfn) > 0 ? static_cast<double>(idtp) / (idtp + rep.idfn) : 0.0;
    return rep;
}

std::string format_report(const IdReport& r) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "NT   %d\nIDF1 %.1f%%\nIDP  %.1f%%\nIDR  %.1f%%\n", r.nt,
                  100.0 * r.idf1, 100.0 * r.idp, 100.0 * r.idr);
    return buf;
}

}  // namespace vibe::motmetrics
