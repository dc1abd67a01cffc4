#include "cbr/fdtd/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "cbr/errors.hpp"

namespace cbr::fdtd {

void CbrGeometry::validate() const {
    for (double v : {period_nm, trench_nm, radius_nm, membrane_nm, oxide_nm, gold_nm, n_membrane, n_oxide})
        if (!(v > 0.0) || !std::isfinite(v)) throw DomainError("geometry lengths and indices must be positive");
    if (n_rings < 0) throw DomainError("ring count must be non-negative");
    if (!(trench_nm < period_nm)) throw DomainError("trench must be narrower than the period");
    if (!(etch_depth_nm >= 0.0)) throw DomainError("etch depth must be non-negative");
    if (!(emitter_height_nm > 0.0 && emitter_height_nm < membrane_nm))
        throw DomainError("emitter must sit inside the membrane",
                          "height " + std::to_string(emitter_height_nm) + " nm, membrane " +
                              std::to_string(membrane_nm) + " nm");
}

CbrGeometry build_geometry(const CbrGeometry& base, double delta) {
    base.validate();
    if (!(delta >= 0.0) || !std::isfinite(delta)) throw DomainError("etch depth must be non-negative");
    const double widen = base.double_sided_trench ? 2.0 * delta : delta;
    const double limit = std::min({base.radius_nm, base.membrane_nm - base.emitter_height_nm,
                                   base.period_nm - base.trench_nm - (widen - delta)});
    if (!(delta < limit) && delta > 0.0)
        throw DomainError("etch depth exceeds the geometry", "delta " + std::to_string(delta) + " nm, limit " +
                                                                 std::to_string(limit) + " nm");
    if (base.trench_nm + widen >= base.period_nm) throw DomainError("trench would swallow the ring");
    CbrGeometry g = base;
    g.radius_nm -= delta;
    g.membrane_nm -= delta;
    g.trench_nm += widen;
    g.etch_depth_nm += delta;
    g.validate();
    return g;
}

nlohmann::json to_json(const CbrGeometry& g) {
    return {{"period_nm", g.period_nm},
            {"trench_nm", g.trench_nm},
            {"radius_nm", g.radius_nm},
            {"membrane_nm", g.membrane_nm},
            {"oxide_nm", g.oxide_nm},
            {"gold_nm", g.gold_nm},
            {"n_membrane", g.n_membrane},
            {"n_oxide", g.n_oxide},
            {"gold", to_json(g.gold)},
            {"n_rings", g.n_rings},
            {"etch_depth_nm", g.etch_depth_nm},
            {"double_sided_trench", g.double_sided_trench},
            {"emitter_height_nm", g.emitter_height_nm}};
}

CbrGeometry geometry_from_json(const nlohmann::json& j) {
    CbrGeometry g;
    auto get = [&](const char* k, auto& v) {
        if (j.contains(k)) v = j.at(k).get<std::decay_t<decltype(v)>>();
    };
    try {
        get("period_nm", g.period_nm);
        get("trench_nm", g.trench_nm);
        get("radius_nm", g.radius_nm);
        get("membrane_nm", g.membrane_nm);
        get("oxide_nm", g.oxide_nm);
        get("gold_nm", g.gold_nm);
        get("n_membrane", g.n_membrane);
        get("n_oxide", g.n_oxide);
        get("n_rings", g.n_rings);
        get("etch_depth_nm", g.etch_depth_nm);
        get("double_sided_trench", g.double_sided_trench);
        get("emitter_height_nm", g.emitter_height_nm);
        if (j.contains("gold")) g.gold = drude_from_json(j.at("gold"));
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("bad geometry field: ") + e.what());
    }
    g.validate();
    return g;
}

std::string to_string(Scene::Kind k) {
    switch (k) {
        case Scene::Kind::cbr: return "cbr";
        case Scene::Kind::planar: return "planar";
        case Scene::Kind::homogeneous: return "homogeneous";
    }
    return "cbr";
}

double Scene::eps_at(double x, double y) const {
    for (const auto& b : blocks)
        if (x >= b.rect.x0 && x < b.rect.x1 && y >= b.rect.y0 && y < b.rect.y1) return b.eps;
    return background_eps;
}

Scene make_scene(const CbrGeometry& g, Scene::Kind kind, const SceneLayout& layout) {
    g.validate();
    Scene s;
    s.kind = kind;
    // the domain size follows the unetched outer radius so every etch step
    // shares one grid
    const double outer = g.radius_nm + g.etch_depth_nm + g.n_rings * g.period_nm;
    s.x_extent_nm = outer + layout.margin_nm;
    const double big = 1e7;
    const double y_gold = g.gold_nm;
    const double y_ox = y_gold + g.oxide_nm;
    s.membrane_bottom_nm = y_ox;
    s.membrane_top_nm = y_ox + g.membrane_nm;
    s.emitter_y_nm = y_ox + g.emitter_height_nm;
    // height follows the unetched membrane as well
    s.y_extent_nm = y_ox + g.membrane_nm + g.etch_depth_nm + layout.air_nm;
    s.max_index = std::max(g.n_membrane, g.n_oxide);
    const double em = g.n_membrane * g.n_membrane;

    if (kind == Scene::Kind::homogeneous) {
        s.background_eps = em;
        s.max_index = g.n_membrane;
        return s;
    }
    s.metal = g.gold;
    s.has_metal = true;
    s.blocks.push_back({{-big, big, -big, y_gold}, g.gold.eps_inf, true});
    s.blocks.push_back({{-big, big, y_gold, y_ox}, g.n_oxide * g.n_oxide, false});
    const double top = s.membrane_top_nm;
    if (kind == Scene::Kind::planar) {
        s.blocks.push_back({{-big, big, y_ox, top}, em, false});
        return s;
    }
    // disc, rings, then the unpatterned membrane outside
    const double r = g.radius_nm, p = g.period_nm, t = g.trench_nm;
    std::vector<std::pair<double, double>> solid;
    double start = 0.0;
    for (int k = 0; k < g.n_rings; ++k) {
        solid.emplace_back(start, r + k * p);
        start = r + k * p + t;
    }
    solid.emplace_back(start, big);
    for (const auto& [a, b] : solid) {
        s.blocks.push_back({{a, b, y_ox, top}, em, false});
        s.blocks.push_back({{-b, -a, y_ox, top}, em, false});
    }
    return s;
}

Scene make_bulk_scene(double n, double half_width_nm, double height_nm, double emitter_y_nm) {
    Scene s;
    s.kind = Scene::Kind::homogeneous;
    s.background_eps = n * n;
    s.max_index = n;
    s.x_extent_nm = half_width_nm;
    s.y_extent_nm = height_nm;
    s.emitter_y_nm = emitter_y_nm;
    s.membrane_bottom_nm = 0.0;
    s.membrane_top_nm = height_nm;
    return s;
}

}  // namespace cbr::fdtd
