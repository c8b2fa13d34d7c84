#pragma once

#include <string>
#include <vector>

#include "vibe/common.hpp"

namespace vibe::sim {

enum class ElementTag { wall, road_edge, zebra, pavement };

inline const char* to_string(ElementTag t) {
    switch (t) {
        case ElementTag::wall: return "wall";
        case ElementTag::road_edge: return "road_edge";
        case ElementTag::zebra: return "zebra";
        case ElementTag::pavement: return "pavement";
    }
    return "wall";
}

// Tagged polyline (wall, road_edge) or closed polygon (zebra, pavement).
struct SceneElement {
    ElementTag tag = ElementTag::wall;
    std::vector<Vec2> points;
    bool closed() const { return tag == ElementTag::zebra || tag == ElementTag::pavement; }
};

struct Exit {
    int id = 0;
    Vec2 point;
    double heading = 0.0;
};

struct Entry {
    int id = 0;
    Vec2 point;
};

struct SceneLayout {
    std::vector<SceneElement> elements;
    std::vector<Exit> exits;
    std::vector<Entry> entries;

    // Axis-aligned bounds over all element points (with margin).
    void bounds(Vec2& lo, Vec2& hi, double margin = 2.0) const;
};

SceneLayout load_scene(const std::string& path);
void save_scene(const SceneLayout& scene, const std::string& path);

bool point_in_polygon(const Vec2& p, const std::vector<Vec2>& poly);

}  // namespace vibe::sim
