#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "cbr/fdtd/materials.hpp"

namespace cbr::fdtd {

// Cross-section through the resonator axis. Lengths in nm. The membrane sits
// on oxide on gold; trench k spans [r + k p, r + k p + t] radially.
struct CbrGeometry {
    double period_nm = 380.0;
    double trench_nm = 100.0;
    double radius_nm = 333.0;
    double membrane_nm = 148.0;
    double oxide_nm = 200.0;
    double gold_nm = 100.0;
    double n_membrane = 3.3;
    double n_oxide = 1.64;
    DrudeMetal gold = gold_drude();
    int n_rings = 6;
    double etch_depth_nm = 0.0;
    bool double_sided_trench = false;
    // emitter height above the oxide; kept when the membrane is etched
    double emitter_height_nm = 74.0;

    void validate() const;
    double outer_radius_nm() const { return radius_nm + n_rings * period_nm; }
};

// r - delta, d - delta, t + delta (t + 2 delta with double_sided_trench).
// The outer wall of every trench stays in place.
CbrGeometry build_geometry(const CbrGeometry& base, double delta_nm);

nlohmann::json to_json(const CbrGeometry& g);
CbrGeometry geometry_from_json(const nlohmann::json& j);

struct Rect {
    double x0, x1, y0, y1;  // nm
};

struct Block {
    Rect rect;
    double eps = 1.0;    // eps_inf for the metal
    bool metal = false;  // Drude pole of the scene metal
};

// Non-overlapping blocks over a background. x is the distance from the axis
// (blocks are given on both sides so the scene is mirror symmetric); y = 0 is
// the bottom of the domain.
struct Scene {
    enum class Kind { cbr, planar, homogeneous };
    Kind kind = Kind::cbr;
    double background_eps = 1.0;
    std::vector<Block> blocks;
    DrudeMetal metal;
    bool has_metal = false;
    double max_index = 1.0;
    double x_extent_nm = 0.0;  // physical half width before the PML
    double y_extent_nm = 0.0;  // physical height before the top PML
    double membrane_bottom_nm = 0.0;
    double membrane_top_nm = 0.0;
    double emitter_y_nm = 0.0;

    double eps_at(double x, double y) const;  // point sample
};

struct SceneLayout {
    double margin_nm = 500.0;    // past the outermost ring
    double air_nm = 700.0;       // above the membrane top
};

Scene make_scene(const CbrGeometry& g, Scene::Kind kind, const SceneLayout& layout = {});
// Unbounded membrane material of the same extent, for the bulk reference.
Scene make_bulk_scene(double n, double half_width_nm, double height_nm, double emitter_y_nm);

std::string to_string(Scene::Kind k);

}  // namespace cbr::fdtd
