#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "coefficients.hpp"
#include "core.hpp"

namespace bfront {

/** @brief Branch width as a function of the axial coordinate s. */
struct WidthProfile {
    enum class Kind { constant, asymptotic, table };

    Kind kind = Kind::constant;
    double w0 = 1.0;     // constant width, or the s -> -inf limit of the asymptotic form
    double w_inf = 1.0;  // s -> +inf limit of the asymptotic form
    double ell = 1.0;
    std::vector<std::pair<double, double>> table;  // (s, w), s increasing

    static WidthProfile constant(double w) { WidthProfile p; p.w0 = p.w_inf = w; return p; }
    static WidthProfile asymptotic(double w0, double w_inf, double ell) {
        WidthProfile p;
        p.kind = Kind::asymptotic;
        p.w0 = w0;
        p.w_inf = w_inf;
        p.ell = ell;
        return p;
    }
    static WidthProfile tabulated(std::vector<std::pair<double, double>> t) {
        WidthProfile p;
        p.kind = Kind::table;
        p.table = std::move(t);
        return p;
    }

    double operator()(double s) const {
        switch (kind) {
            case Kind::constant: return w0;
            case Kind::asymptotic: return w_inf + (w0 - w_inf) * (1.0 - std::tanh(s / ell)) / 2.0;
            case Kind::table: {
                if (s <= table.front().first) return table.front().second;
                if (s >= table.back().first) return table.back().second;
                auto it = std::upper_bound(table.begin(), table.end(), s,
                                           [](double v, const auto& e) { return v < e.first; });
                const auto& b = *it;
                const auto& a = *(it - 1);
                return a.second + (b.second - a.second) * (s - a.first) / (b.first - a.first);
            }
        }
        return w0;
    }

    double derivative(double s) const {
        switch (kind) {
            case Kind::constant: return 0.0;
            case Kind::asymptotic: {
                const double t = std::tanh(s / ell);
                return -(w0 - w_inf) * (1.0 - t * t) / (2.0 * ell);
            }
            case Kind::table: {
                const double d = 1e-6;
                return ((*this)(s + d) - (*this)(s - d)) / (2 * d);
            }
        }
        return 0.0;
    }

    double min_width() const {
        switch (kind) {
            case Kind::constant: return w0;
            case Kind::asymptotic: return std::min(w0, w_inf);
            case Kind::table: {
                double m = std::numeric_limits<double>::infinity();
                for (const auto& e : table) m = std::min(m, e.second);
                return m;
            }
        }
        return w0;
    }

    double max_width() const {
        switch (kind) {
            case Kind::constant: return w0;
            case Kind::asymptotic: return std::max(w0, w_inf);
            case Kind::table: {
                double m = 0.0;
                for (const auto& e : table) m = std::max(m, e.second);
                return m;
            }
        }
        return w0;
    }

    void validate() const {
        if (kind == Kind::table) {
            if (table.empty()) throw SpecError("width table is empty");
            for (std::size_t k = 1; k < table.size(); ++k)
                if (!(table[k].first > table[k - 1].first)) throw SpecError("width table abscissae must increase");
        }
        if (kind == Kind::asymptotic && !(ell > 0.0)) throw SpecError("asymptotic width scale must be positive");
        if (!(min_width() > 0.0)) throw SpecError("branch width must be positive");
    }

    std::string to_string() const {
        using detail::format_double;
        switch (kind) {
            case Kind::constant: return "const(" + format_double(w0) + ")";
            case Kind::asymptotic:
                return "asymptotic(" + format_double(w0) + ", " + format_double(w_inf) + ", " + format_double(ell) + ")";
            case Kind::table: {
                std::string s = "table(";
                for (std::size_t k = 0; k < table.size(); ++k) {
                    if (k) s += ", ";
                    s += format_double(table[k].first) + ":" + format_double(table[k].second);
                }
                return s + ")";
            }
        }
        return {};
    }

    static WidthProfile parse(std::string_view text) {
        text = detail::trim(text);
        const auto open = text.find('(');
        if (open == std::string_view::npos) return constant(detail::parse_double(text));
        if (text.back() != ')') throw ArgumentError("width profile missing ')'");
        const auto name = detail::trim(text.substr(0, open));
        const auto args = detail::split(text.substr(open + 1, text.size() - open - 2), ',');
        if (name == "const") {
            if (args.size() != 1) throw ArgumentError("const() takes one width");
            return constant(detail::parse_double(args[0]));
        }
        if (name == "asymptotic") {
            if (args.size() != 3) throw ArgumentError("asymptotic() takes (w0, w_inf, ell)");
            return asymptotic(detail::parse_double(args[0]), detail::parse_double(args[1]),
                              detail::parse_double(args[2]));
        }
        if (name == "table") {
            std::vector<std::pair<double, double>> t;
            for (auto a : args) {
                const auto colon = a.find(':');
                if (colon == std::string_view::npos) throw ArgumentError("table entries are s:w");
                t.emplace_back(detail::parse_double(a.substr(0, colon)), detail::parse_double(a.substr(colon + 1)));
            }
            return tabulated(std::move(t));
        }
        throw ArgumentError("width profile kind '" + std::string(name) + "' not in {const, asymptotic, table}");
    }
};

/** @brief One branch {x : s = (x - shift).e > 0, |tau| < width(s)/2, s < length}. */
struct BranchSpec {
    double angle_deg = 0.0;
    Vec2 shift{};
    WidthProfile width = WidthProfile::constant(1.0);
    double length = 10.0;

    Vec2 direction() const { return unit_from_degrees(angle_deg); }
    double axial(Vec2 x) const { return dot(x - shift, direction()); }
    double transverse(Vec2 x) const { return dot(x - shift, perp(direction())); }
    bool contains(Vec2 x) const {
        const double s = axial(x);
        return s > 0.0 && s < length && std::abs(transverse(x)) < width(s) / 2.0;
    }
};

struct DomainSpec {
    double junction_radius = 1.0;
    std::vector<BranchSpec> branches;
    std::vector<Vec2> polygon;  // empty selects the convex hull of the branch mouths

    std::size_t size() const { return branches.size(); }
};

/** @brief A branch extended to s < 0 for the auxiliary weight construction. */
struct ExtendedChannelSpec {
    BranchSpec base;
    WidthProfile extension;  // used for s < 0

    static ExtendedChannelSpec natural(const BranchSpec& b) {
        ExtendedChannelSpec ch{b, b.width};
        if (b.width.kind == WidthProfile::Kind::table)
            ch.extension = WidthProfile::constant(b.width(b.width.table.front().first));
        return ch;
    }

    double width(double s) const { return s < 0.0 ? extension(s) : base.width(s); }
    double width_derivative(double s) const { return s < 0.0 ? extension.derivative(s) : base.width.derivative(s); }

    void validate() const {
        base.width.validate();
        extension.validate();
        if (std::abs(extension(0.0) - base.width(0.0)) > 1e-12)
            throw SpecError("extended channel width is discontinuous at s = 0");
    }
};

struct BranchCoord {
    int branch = -1;
    double s = 0.0;
    double tau = 0.0;
};

namespace detail {

inline std::vector<Vec2> convex_hull(std::vector<Vec2> pts) {
    std::sort(pts.begin(), pts.end(), [](Vec2 a, Vec2 b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    if (pts.size() < 3) return pts;
    std::vector<Vec2> hull(2 * pts.size());
    std::size_t k = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        while (k >= 2 && cross(hull[k - 1] - hull[k - 2], pts[i] - hull[k - 2]) <= 0) --k;
        hull[k++] = pts[i];
    }
    for (std::size_t i = pts.size() - 1, t = k + 1; i > 0; --i) {
        while (k >= t && cross(hull[k - 1] - hull[k - 2], pts[i - 1] - hull[k - 2]) <= 0) --k;
        hull[k++] = pts[i - 1];
    }
    hull.resize(k - 1);
    return hull;
}

inline bool point_in_polygon(const std::vector<Vec2>& poly, Vec2 p) {
    bool inside = false;
    for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
        const Vec2 a = poly[i], b = poly[j];
        if ((a.y > p.y) != (b.y > p.y)) {
            const double xc = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if (p.x < xc) inside = !inside;
        }
    }
    return inside;
}

}  // namespace detail

// Mouth corners sit on the circle of radius L, so the default polygon lies in the closed disc.
inline std::vector<Vec2> junction_polygon(const DomainSpec& spec) {
    if (!spec.polygon.empty()) return spec.polygon;
    const double L = spec.junction_radius;
    std::vector<Vec2> corners;
    for (std::size_t i = 0; i < spec.branches.size(); ++i) {
        const auto& b = spec.branches[i];
        const Vec2 e = b.direction(), n = perp(e);
        double sm = L;
        for (int it = 0; it < 50; ++it) {
            const double hw = b.width(std::max(sm, 0.0)) / 2.0;
            if (hw >= L) throw SpecError("branch " + std::to_string(i + 1) +
                                         " is wider than the junction disc; supply a junction polygon");
            sm = std::sqrt(L * L - hw * hw) - dot(b.shift, e);
        }
        sm = std::max(sm, 0.0);
        const double hw = b.width(sm) / 2.0;
        corners.push_back(b.shift + sm * e + hw * n);
        corners.push_back(b.shift + sm * e - hw * n);
    }
    return detail::convex_hull(corners);
}

inline std::optional<BranchCoord> branch_coordinates(const DomainSpec& spec, Vec2 x) {
    std::optional<BranchCoord> found;
    for (std::size_t i = 0; i < spec.branches.size(); ++i) {
        const auto& b = spec.branches[i];
        if (!b.contains(x)) continue;
        if (found) return std::nullopt;
        found = BranchCoord{static_cast<int>(i), b.axial(x), b.transverse(x)};
    }
    return found;
}

inline bool in_domain(const DomainSpec& spec, const std::vector<Vec2>& poly, Vec2 x) {
    if (detail::point_in_polygon(poly, x)) return true;
    for (const auto& b : spec.branches)
        if (b.contains(x)) return true;
    return false;
}

inline bool in_domain(const DomainSpec& spec, Vec2 x) { return in_domain(spec, junction_polygon(spec), x); }

// Position on the skeleton star: branch points map to (branch, distance from centre along the axis),
// junction points keep their own spoke of length |x|.
struct SkeletonPos {
    int branch = -1;
    double t = 0.0;
    Vec2 x{};
};

inline SkeletonPos skeleton_position(const DomainSpec& spec, Vec2 x) {
    if (auto bc = branch_coordinates(spec, x))
        return {bc->branch, bc->s + norm(spec.branches[bc->branch].shift), x};
    return {-1, norm(x), x};
}

inline double skeleton_distance(const SkeletonPos& a, const SkeletonPos& b) {
    if (a.branch >= 0 && a.branch == b.branch) return std::abs(a.t - b.t);
    if (a.branch < 0 && b.branch < 0) return norm(a.x - b.x);
    return a.t + b.t;
}

inline double skeleton_distance(const DomainSpec& spec, Vec2 a, Vec2 b) {
    const auto poly = junction_polygon(spec);
    if (!in_domain(spec, poly, a) || !in_domain(spec, poly, b))
        throw ArgumentError("skeleton distance requires interior points");
    return skeleton_distance(skeleton_position(spec, a), skeleton_position(spec, b));
}

inline void validate_spec(const DomainSpec& spec) {
    if (!(spec.junction_radius > 0.0)) throw SpecError("junction radius must be positive");
    if (spec.branches.size() < 2) throw SpecError("a branched domain needs at least two branches");
    const double L = spec.junction_radius;
    for (std::size_t i = 0; i < spec.branches.size(); ++i) {
        const auto& b = spec.branches[i];
        b.width.validate();
        if (!(b.length > L)) throw SpecError("branch " + std::to_string(i + 1) + " length must exceed the junction radius");
    }
    for (const auto& v : spec.polygon)
        if (norm(v) > L * (1.0 + 1e-12)) throw SpecError("junction polygon leaves the disc of radius L");
    // Sampled disjointness outside the junction disc.
    for (std::size_t i = 0; i < spec.branches.size(); ++i) {
        const auto& b = spec.branches[i];
        const Vec2 e = b.direction(), n = perp(e);
        const double step = b.width.min_width() / 8.0;
        for (double s = step; s < b.length; s += step) {
            const double hw = b.width(s) / 2.0;
            for (int k = -4; k <= 4; ++k) {
                const Vec2 x = b.shift + s * e + (0.999 * hw * k / 4.0) * n;
                if (norm(x) < L) continue;
                for (std::size_t j = 0; j < spec.branches.size(); ++j)
                    if (j != i && spec.branches[j].contains(x))
                        throw SpecError("branches " + std::to_string(i + 1) + " and " + std::to_string(j + 1) +
                                        " overlap outside the junction disc");
            }
        }
    }
}

/** @brief Uniform Cartesian grid restricted to the domain by a cell mask. */
struct MaskedGrid {
    enum Dir { E = 0, W = 1, N = 2, S = 3 };

    double h = 0.0;
    Vec2 origin{};  // lower-left corner of cell (0,0)
    int nx = 0;
    int ny = 0;
    std::vector<std::uint8_t> mask;        // nx * ny, row-major (row = j)
    std::vector<int> cell_of;              // grid index -> interior index or -1
    std::vector<int> grid_index;           // interior index -> grid index
    std::vector<std::array<int, 4>> nbr;   // interior neighbour across E, W, N, S faces, -1 if closed
    std::vector<int> tag;                  // -1 junction, otherwise branch index
    std::vector<double> s;                 // axial coordinate in the tagged branch (NaN in the junction)
    std::vector<double> tau;               // transverse coordinate in the tagged branch
    double junction_radius = 0.0;

    std::size_t size() const { return grid_index.size(); }
    Vec2 center_ij(int i, int j) const { return {origin.x + (i + 0.5) * h, origin.y + (j + 0.5) * h}; }
    Vec2 center(std::size_t k) const {
        const int g = grid_index[k];
        return center_ij(g % nx, g / nx);
    }
    bool interior(int i, int j) const { return i >= 0 && j >= 0 && i < nx && j < ny && mask[j * nx + i]; }
    // Face between cells (i-1, j) and (i, j).
    bool face_open_x(int i, int j) const { return interior(i - 1, j) && interior(i, j); }
    // Face between cells (i, j-1) and (i, j).
    bool face_open_y(int i, int j) const { return interior(i, j - 1) && interior(i, j); }

    void rebuild_neighbours() {
        cell_of.assign(static_cast<std::size_t>(nx) * ny, -1);
        grid_index.clear();
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i)
                if (mask[j * nx + i]) {
                    cell_of[j * nx + i] = static_cast<int>(grid_index.size());
                    grid_index.push_back(j * nx + i);
                }
        nbr.assign(grid_index.size(), {-1, -1, -1, -1});
        for (std::size_t k = 0; k < grid_index.size(); ++k) {
            const int i = grid_index[k] % nx, j = grid_index[k] / nx;
            if (interior(i + 1, j)) nbr[k][E] = cell_of[j * nx + i + 1];
            if (interior(i - 1, j)) nbr[k][W] = cell_of[j * nx + i - 1];
            if (interior(i, j + 1)) nbr[k][N] = cell_of[(j + 1) * nx + i];
            if (interior(i, j - 1)) nbr[k][S] = cell_of[(j - 1) * nx + i];
        }
    }

    // Labels of the connected components over open faces, restricted to cells where keep(k) is true.
    template <class Keep>
    std::vector<int> components(Keep keep, int& count) const {
        std::vector<int> comp(size(), -1);
        count = 0;
        std::deque<int> queue;
        for (std::size_t k0 = 0; k0 < size(); ++k0) {
            if (comp[k0] >= 0 || !keep(k0)) continue;
            comp[k0] = count;
            queue.push_back(static_cast<int>(k0));
            while (!queue.empty()) {
                const int k = queue.front();
                queue.pop_front();
                for (int d = 0; d < 4; ++d) {
                    const int m = nbr[k][d];
                    if (m >= 0 && comp[m] < 0 && keep(m)) {
                        comp[m] = count;
                        queue.push_back(m);
                    }
                }
            }
            ++count;
        }
        return comp;
    }
};

inline MaskedGrid build_domain(const DomainSpec& spec, double h) {
    validate_spec(spec);
    double wmin = std::numeric_limits<double>::infinity();
    for (const auto& b : spec.branches) wmin = std::min(wmin, b.width.min_width());
    if (!(h > 0.0)) throw ArgumentError("grid spacing must be positive");
    if (h > wmin / 6.0 * (1.0 + 1e-12)) throw ArgumentError("grid spacing exceeds (min branch width)/6");

    const auto poly = junction_polygon(spec);
    const double L = spec.junction_radius;
    double xmin = -L, xmax = L, ymin = -L, ymax = L;
    auto extend = [&](Vec2 p) {
        xmin = std::min(xmin, p.x);
        xmax = std::max(xmax, p.x);
        ymin = std::min(ymin, p.y);
        ymax = std::max(ymax, p.y);
    };
    for (const auto& v : poly) extend(v);
    for (const auto& b : spec.branches) {
        const Vec2 e = b.direction(), n = perp(e);
        const double hw = b.width.max_width() / 2.0;
        for (double s : {0.0, b.length})
            for (double t : {-hw, hw}) extend(b.shift + s * e + t * n);
    }
    MaskedGrid g;
    g.h = h;
    g.junction_radius = L;
    const long i0 = static_cast<long>(std::floor(xmin / h)) - 1, i1 = static_cast<long>(std::ceil(xmax / h)) + 1;
    const long j0 = static_cast<long>(std::floor(ymin / h)) - 1, j1 = static_cast<long>(std::ceil(ymax / h)) + 1;
    g.origin = {i0 * h, j0 * h};
    g.nx = static_cast<int>(i1 - i0);
    g.ny = static_cast<int>(j1 - j0);
    g.mask.assign(static_cast<std::size_t>(g.nx) * g.ny, 0);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            g.mask[j * g.nx + i] = in_domain(spec, poly, g.center_ij(i, j)) ? 1 : 0;
    g.rebuild_neighbours();

    const std::size_t n = g.size();
    g.tag.assign(n, -1);
    g.s.assign(n, std::numeric_limits<double>::quiet_NaN());
    g.tau.assign(n, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t k = 0; k < n; ++k) {
        const Vec2 x = g.center(k);
        if (norm(x) < L) continue;
        int owner = -1;
        for (std::size_t b = 0; b < spec.branches.size(); ++b) {
            if (!spec.branches[b].contains(x)) continue;
            if (owner >= 0)
                throw SpecError("branches " + std::to_string(owner + 1) + " and " + std::to_string(b + 1) +
                                " overlap outside the junction disc");
            owner = static_cast<int>(b);
        }
        if (owner < 0) continue;
        g.tag[k] = owner;
        g.s[k] = spec.branches[owner].axial(x);
        g.tau[k] = spec.branches[owner].transverse(x);
    }

    int count = 0;
    const auto comp = g.components([](std::size_t) { return true; }, count);
    if (count != 1) {
        std::vector<std::size_t> size_of(count, 0);
        for (int c : comp) ++size_of[c];
        const int main = static_cast<int>(std::max_element(size_of.begin(), size_of.end()) - size_of.begin());
        for (std::size_t k = 0; k < n; ++k)
            if (comp[k] != main)
                throw GeometryError(g.tag[k] >= 0 ? "branch " + std::to_string(g.tag[k] + 1) +
                                                        " is disconnected from the junction"
                                                  : "junction region is disconnected");
    }
    for (std::size_t b = 0; b < spec.branches.size(); ++b) {
        int cb = 0;
        g.components([&](std::size_t k) { return g.tag[k] == static_cast<int>(b); }, cb);
        if (cb != 1) throw GeometryError("branch " + std::to_string(b + 1) + " is not a single connected piece");
    }
    return g;
}

// Portable grid file: plain-text header, then row-major 0/1 rows from the bottom row up.
inline void write_grid_header(std::ostream& out, const MaskedGrid& g) {
    out << "# bfront grid\n";
    out << "nx " << g.nx << "\nny " << g.ny << "\nh " << detail::format_double(g.h) << "\norigin "
        << detail::format_double(g.origin.x) << ' ' << detail::format_double(g.origin.y) << "\nmask\n";
    for (int j = 0; j < g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i) out << (g.mask[j * g.nx + i] ? '1' : '0');
        out << '\n';
    }
}

inline void export_grid(const MaskedGrid& g, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    write_grid_header(out, g);
    if (!out) throw IoError("write failed for " + path);
}

inline MaskedGrid read_grid_header(std::istream& in, const std::string& path) {
    MaskedGrid g;
    std::string line, key;
    auto next = [&]() {
        do {
            if (!std::getline(in, line)) throw IoError(path + ": truncated grid file");
        } while (line.empty() || line[0] == '#');
    };
    auto expect = [&](const char* k) {
        next();
        std::istringstream ls(line);
        ls >> key;
        if (key != k) throw IoError(path + ": expected '" + std::string(k) + "'");
        std::string rest;
        std::getline(ls, rest);
        return std::string(detail::trim(rest));
    };
    g.nx = std::stoi(expect("nx"));
    g.ny = std::stoi(expect("ny"));
    g.h = detail::parse_double(expect("h"));
    {
        const auto o = expect("origin");
        const auto sp = o.find(' ');
        g.origin = {detail::parse_double(o.substr(0, sp)), detail::parse_double(o.substr(sp + 1))};
    }
    expect("mask");
    g.mask.assign(static_cast<std::size_t>(g.nx) * g.ny, 0);
    for (int j = 0; j < g.ny; ++j) {
        next();
        if (static_cast<int>(line.size()) < g.nx) throw IoError(path + ": short mask row");
        for (int i = 0; i < g.nx; ++i) g.mask[j * g.nx + i] = line[i] == '1';
    }
    g.rebuild_neighbours();
    return g;
}

inline MaskedGrid import_grid(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    return read_grid_header(in, path);
}

}  // namespace bfront
