#include "vibe/scene.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace vibe::sim {

void SceneLayout::bounds(Vec2& lo, Vec2& hi, double margin) const {
    lo = {1e30, 1e30};
    hi = {-1e30, -1e30};
    auto take = [&](const Vec2& p) {
        lo.x = std::min(lo.x, p.x);
        lo.y = std::min(lo.y, p.y);
        hi.x = std::max(hi.x, p.x);
        hi.y = std::max(hi.y, p.y);
    };
    for (const auto& e : elements)
        for (const auto& p : e.points) take(p);
    for (const auto& e : exits) take(e.point);
    for (const auto& e : entries) take(e.point);
    if (lo.x > hi.x) {
        lo = {-1, -1};
        hi = {1, 1};
    }
    lo -= {margin, margin};
    hi += {margin, margin};
}

bool point_in_polygon(const Vec2& p, const std::vector<Vec2>& poly) {
    bool inside = false;
    const std::size_t n = poly.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        if ((poly[i].y > p.y) != (poly[j].y > p.y)) {
            const double x = poly[j].x +
                             (p.y - poly[j].y) / (poly[i].y - poly[j].y) * (poly[i].x - poly[j].x);
            if (p.x < x) inside = !inside;
        }
    }
    return inside;
}

SceneLayout load_scene(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open scene file: " + path);
    SceneLayout scene;
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::istringstream ss(line);
        std::string tag;
        if (!(ss >> tag)) continue;
        if (tag.back() == ':') tag.pop_back();
        if (tag == "exit") {
            Exit e;
            if (!(ss >> e.id >> e.point.x >> e.point.y >> e.heading))
                throw Error("malformed exit line: " + line);
            scene.exits.push_back(e);
        } else if (tag == "entry") {
            Entry e;
            if (!(ss >> e.id >> e.point.x >> e.point.y))
                throw Error("malformed entry line: " + line);
            scene.entries.push_back(e);
        } else {
            SceneElement el;
            if (tag == "wall") el.tag = ElementTag::wall;
            else if (tag == "road_edge") el.tag = ElementTag::road_edge;
            else if (tag == "zebra") el.tag = ElementTag::zebra;
            else if (tag == "pavement") el.tag = ElementTag::pavement;
            else throw Error("unknown scene tag: " + tag);
            double x, y;
            while (ss >> x >> y) el.points.push_back({x, y});
            if (el.points.size() < 2) throw Error("scene element needs >= 2 points: " + line);
            scene.elements.push_back(std::move(el));
        }
    }
    return scene;
}

void save_scene(const SceneLayout& scene, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write scene file: " + path);
    char buf[64];
    for (const auto& e : scene.elements) {
        out << to_string(e.tag) << ":";
        for (const auto& p : e.points) {
            std::snprintf(buf, sizeof(buf), " %.9g %.9g", p.x, p.y);
            out << buf;
        }
        out << "\n";
    }
    for (const auto& e : scene.exits) {
        std::snprintf(buf, sizeof(buf), "exit: %d %.9g %.9g %.9g\n", e.id, e.point.x, e.point.y,
                      e.heading);
        out << buf;
    }
    for (const auto& e : scene.entries) {
        std::snprintf(buf, sizeof(buf), "entry: %d %.9g %.9g\n", e.id, e.point.x, e.point.y);
        out << buf;
    }
}

}  // namespace vibe::sim
