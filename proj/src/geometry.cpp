#include "rstrace/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "rstrace/errors.hpp"

namespace rstrace {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kInf = std::numeric_limits<double>::infinity();

double cross(const Point& a, const Point& b) { return a.x() * b.y() - a.y() * b.x(); }

std::vector<double> parse_numbers(const std::string& s, char sep) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) {
        if (item.empty()) continue;
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size() && item.find_first_not_of(" \t", used) != std::string::npos)
                throw GeometryError("trailing characters in number '" + item + "'");
        } catch (const std::logic_error&) {
            throw GeometryError("bad number '" + item + "' in domain spec");
        }
    }
    return out;
}

} // namespace

Domain Domain::disk(double radius, const Point& center) {
    if (!(radius > 0.0) || !std::isfinite(radius)) throw GeometryError("disk radius must be positive");
    Domain d;
    d.kind_ = DomainKind::Disk;
    d.radius_ = radius;
    d.center_ = center;
    return d;
}

Domain Domain::rectangle(double a, double b) {
    if (!(a > 0.0 && b > 0.0)) throw GeometryError("rectangle sides must be positive");
    Domain d = polygon({Point(0, 0), Point(a, 0), Point(a, b), Point(0, b)});
    d.kind_ = DomainKind::Rectangle;
    return d;
}

Domain Domain::polygon(std::vector<Point> v) {
    const std::size_t n = v.size();
    if (n < 3) throw GeometryError("polygon needs at least three vertices");
    if (polygon_area(v) <= 0.0) throw GeometryError("polygon must be counter-clockwise with positive area");
    double turning = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const Point e0 = v[(i + 1) % n] - v[i];
        const Point e1 = v[(i + 2) % n] - v[(i + 1) % n];
        if (e0.norm() == 0.0) throw GeometryError("polygon has repeated vertices");
        if (cross(e0, e1) <= 0.0) throw GeometryError("polygon must be strictly convex");
        turning += std::atan2(cross(e0, e1), e0.dot(e1));
    }
    if (std::abs(turning - 2.0 * kPi) > 1e-9) throw GeometryError("polygon is not simple");
    Domain d;
    d.kind_ = DomainKind::Polygon;
    d.vertices_ = std::move(v);
    for (std::size_t i = 0; i < n; ++i) {
        const Point e = d.vertices_[(i + 1) % n] - d.vertices_[i];
        const Point nrm = Point(e.y(), -e.x()) / e.norm();
        d.normals_.push_back(nrm);
        d.offsets_.push_back(nrm.dot(d.vertices_[i]));
    }
    return d;
}

Domain Domain::half_space() {
    Domain d;
    d.kind_ = DomainKind::HalfSpace;
    return d;
}

Domain Domain::plane() { return Domain(); }

Domain Domain::parse(const std::string& text) {
    std::string s;
    for (char c : text)
        if (!std::isspace(static_cast<unsigned char>(c))) s += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    const auto colon = s.find(':');
    const std::string kind = s.substr(0, colon);
    const std::string args = colon == std::string::npos ? "" : s.substr(colon + 1);
    if (kind == "disk") {
        const auto a = parse_numbers(args, ',');
        if (a.size() == 1) return disk(a[0]);
        if (a.size() == 3) return disk(a[0], Point(a[1], a[2]));
        throw GeometryError("disk expects R or R,cx,cy");
    }
    if (kind == "rectangle") {
        const auto a = parse_numbers(args, ',');
        if (a.size() != 2) throw GeometryError("rectangle expects a,b");
        return rectangle(a[0], a[1]);
    }
    if (kind == "polygon") {
        std::vector<Point> v;
        std::stringstream ss(args);
        std::string pair;
        while (std::getline(ss, pair, ';')) {
            if (pair.empty()) continue;
            const auto xy = parse_numbers(pair, ',');
            if (xy.size() != 2) throw GeometryError("polygon vertex must be x,y");
            v.emplace_back(xy[0], xy[1]);
        }
        return polygon(std::move(v));
    }
    if (kind == "halfspace" && args.empty()) return half_space();
    if (kind == "plane" && args.empty()) return plane();
    throw GeometryError("unknown domain spec '" + text + "'");
}

std::string Domain::spec() const {
    std::ostringstream os;
    os.precision(17);
    switch (kind_) {
    case DomainKind::Disk:
        os << "disk:" << radius_;
        if (center_ != Point::Zero()) os << ',' << center_.x() << ',' << center_.y();
        break;
    case DomainKind::Rectangle: os << "rectangle:" << vertices_[2].x() << ',' << vertices_[2].y(); break;
    case DomainKind::Polygon:
        os << "polygon:";
        for (std::size_t i = 0; i < vertices_.size(); ++i) os << (i ? ";" : "") << vertices_[i].x() << ',' << vertices_[i].y();
        break;
    case DomainKind::HalfSpace: os << "halfspace"; break;
    case DomainKind::Plane: os << "plane"; break;
    }
    return os.str();
}

void Domain::require_bounded(const char* what) const {
    if (!bounded()) throw GeometryError(std::string(what) + " is undefined for an unbounded domain");
}

double Domain::area() const {
    require_bounded("area");
    if (kind_ == DomainKind::Disk) return kPi * radius_ * radius_;
    return polygon_area(vertices_);
}

double Domain::perimeter() const {
    require_bounded("perimeter");
    if (kind_ == DomainKind::Disk) return 2.0 * kPi * radius_;
    return polygon_perimeter(vertices_);
}

std::optional<C11Characteristics> Domain::c11() const {
    if (kind_ == DomainKind::Disk) return C11Characteristics{radius_, 1.0 / radius_};
    return std::nullopt;
}

double Domain::inradius() const {
    switch (kind_) {
    case DomainKind::Disk: return radius_;
    case DomainKind::Rectangle: return 0.5 * std::min(vertices_[2].x(), vertices_[2].y());
    case DomainKind::Polygon: {
        // Chebyshev centre: the optimum of max r s.t. n_i.x + r <= o_i sits where three constraints are active.
        const std::size_t n = normals_.size();
        double best = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j)
                for (std::size_t k = j + 1; k < n; ++k) {
                    Eigen::Matrix3d m;
                    Eigen::Vector3d rhs;
                    for (int row = 0; const std::size_t e : {i, j, k}) {
                        m.row(row) << normals_[e].x(), normals_[e].y(), 1.0;
                        rhs(row++) = offsets_[e];
                    }
                    const auto lu = m.fullPivLu();
                    if (!lu.isInvertible()) continue;
                    const Eigen::Vector3d z = lu.solve(rhs);
                    if (z(2) <= best) continue;
                    bool feasible = true;
                    for (std::size_t e = 0; e < n && feasible; ++e)
                        feasible = normals_[e].dot(z.head<2>()) + z(2) <= offsets_[e] + 1e-12 * (1.0 + std::abs(offsets_[e]));
                    if (feasible) best = z(2);
                }
        return best;
    }
    default: return kInf;
    }
}

bool Domain::contains(const Point& x) const {
    switch (kind_) {
    case DomainKind::Disk: return (x - center_).squaredNorm() < radius_ * radius_;
    case DomainKind::HalfSpace: return x.x() > 0.0;
    case DomainKind::Plane: return true;
    default:
        for (std::size_t i = 0; i < normals_.size(); ++i)
            if (normals_[i].dot(x) >= offsets_[i]) return false;
        return true;
    }
}

double Domain::distance_to_complement(const Point& x) const {
    switch (kind_) {
    case DomainKind::Disk: return std::max(0.0, radius_ - (x - center_).norm());
    case DomainKind::HalfSpace: return std::max(0.0, x.x());
    case DomainKind::Plane: return kInf;
    default: {
        double d = kInf;
        for (std::size_t i = 0; i < normals_.size(); ++i) d = std::min(d, offsets_[i] - normals_[i].dot(x));
        return std::max(0.0, d);
    }
    }
}

double Domain::ray_exit(const Point& x, const Point& e) const {
    switch (kind_) {
    case DomainKind::Disk: {
        const Point y = x - center_;
        const double b = y.dot(e);
        const double c = radius_ * radius_ - y.squaredNorm();
        const double disc = std::sqrt(std::max(0.0, b * b + c));
        // Pick the algebraically stable root of s^2 + 2bs - c = 0.
        return b > 0.0 ? c / (b + disc) : disc - b;
    }
    case DomainKind::HalfSpace: return e.x() < 0.0 ? x.x() / -e.x() : kInf;
    case DomainKind::Plane: return kInf;
    default: {
        double s = kInf;
        for (std::size_t i = 0; i < normals_.size(); ++i) {
            const double ne = normals_[i].dot(e);
            if (ne > 0.0) s = std::min(s, (offsets_[i] - normals_[i].dot(x)) / ne);
        }
        return std::max(0.0, s);
    }
    }
}

std::vector<double> Domain::angular_breakpoints(const Point& x) const {
    std::vector<double> out;
    switch (kind_) {
    case DomainKind::Disk: {
        const Point y = x - center_;
        if (y.norm() > 0.0) {
            const double phi = std::atan2(y.y(), y.x());
            out = {phi - 0.5 * kPi, phi, phi + 0.5 * kPi};
        }
        break;
    }
    case DomainKind::HalfSpace: out = {0.5 * kPi, kPi, 1.5 * kPi}; break;
    case DomainKind::Plane: break;
    default:
        for (const auto& v : vertices_) out.push_back(std::atan2(v.y() - x.y(), v.x() - x.x()));
        break;
    }
    return out;
}

std::pair<Point, Point> Domain::bounding_box() const {
    require_bounded("bounding box");
    if (kind_ == DomainKind::Disk) return {center_ - Point::Constant(radius_), center_ + Point::Constant(radius_)};
    Point lo = vertices_[0], hi = vertices_[0];
    for (const auto& v : vertices_) {
        lo = lo.cwiseMin(v);
        hi = hi.cwiseMax(v);
    }
    return {lo, hi};
}

double Domain::max_distance_from(const Point& c) const {
    require_bounded("farthest point");
    if (kind_ == DomainKind::Disk) return (c - center_).norm() + radius_;
    double d = 0.0;
    for (const auto& v : vertices_) d = std::max(d, (v - c).norm());
    return d;
}

double Domain::inner_area(double q) const {
    require_bounded("inner area");
    if (q < 0.0) throw GeometryError("depth must be nonnegative");
    switch (kind_) {
    case DomainKind::Disk: return q >= radius_ ? 0.0 : kPi * (radius_ - q) * (radius_ - q);
    case DomainKind::Rectangle: {
        const double a = vertices_[2].x() - 2.0 * q, b = vertices_[2].y() - 2.0 * q;
        return (a > 0.0 && b > 0.0) ? a * b : 0.0;
    }
    default: return polygon_area(inner_parallel_polygon(vertices_, q));
    }
}

double Domain::inner_perimeter(double q) const {
    require_bounded("inner perimeter");
    if (q < 0.0) throw GeometryError("depth must be nonnegative");
    switch (kind_) {
    case DomainKind::Disk: return q >= radius_ ? 0.0 : 2.0 * kPi * (radius_ - q);
    case DomainKind::Rectangle: {
        const double a = vertices_[2].x() - 2.0 * q, b = vertices_[2].y() - 2.0 * q;
        return (a > 0.0 && b > 0.0) ? 2.0 * (a + b) : 0.0;
    }
    default: return polygon_perimeter(inner_parallel_polygon(vertices_, q));
    }
}

double distance_to_complement(const Domain& d, const Point& x) { return d.distance_to_complement(x); }

InnerDomain::InnerDomain(Domain parent, double q) : parent_(std::move(parent)), q_(q) {
    if (!(q >= 0.0)) throw GeometryError("inner depth must be nonnegative");
}

bool InnerDomain::contains(const Point& x) const { return parent_.distance_to_complement(x) > q_; }

double inner_boundary_measure(const Domain& d, double q) {
    const auto c = d.c11();
    if (!c) throw GeometryError("inner boundary measure needs a domain with C^{1,1} characteristics");
    if (!(q >= 0.0 && q < d.inradius())) throw GeometryError("depth must lie in [0, inradius)");
    const double full = d.perimeter();
    const double inner = d.inner_perimeter(q);
    const double r0 = c->r0;
    const double lower = (r0 - q) / r0 * full, upper = r0 / (r0 - q) * full;
    if (inner < lower * (1.0 - 1e-12) || inner > upper * (1.0 + 1e-12))
        throw GeometryError("inner boundary measure outside the interior-ball sandwich");
    return inner;
}

std::vector<Point> inner_parallel_polygon(const std::vector<Point>& v, double q) {
    const std::size_t n = v.size();
    std::vector<Point> poly = v;
    for (std::size_t i = 0; i < n && poly.size() >= 3; ++i) {
        const Point e = v[(i + 1) % n] - v[i];
        const Point nrm = Point(e.y(), -e.x()) / e.norm();
        const double c = nrm.dot(v[i]) - q;
        std::vector<Point> out;
        for (std::size_t j = 0; j < poly.size(); ++j) {
            const Point& a = poly[j];
            const Point& b = poly[(j + 1) % poly.size()];
            const double fa = c - nrm.dot(a), fb = c - nrm.dot(b);
            if (fa >= 0.0) out.push_back(a);
            if ((fa >= 0.0) != (fb >= 0.0)) out.push_back(a + (b - a) * (fa / (fa - fb)));
        }
        poly = std::move(out);
    }
    if (poly.size() < 3 || polygon_area(poly) <= 1e-12 * polygon_area(v)) return {};
    return poly;
}

double polygon_area(const std::vector<Point>& v) {
    if (v.size() < 3) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) s += cross(v[i], v[(i + 1) % v.size()]);
    return 0.5 * s;
}

double polygon_perimeter(const std::vector<Point>& v) {
    if (v.size() < 2) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) s += (v[(i + 1) % v.size()] - v[i]).norm();
    return s;
}

double boundary_layer_functional(const Domain& d, const std::function<double(double)>& f, double eta,
                                 const std::vector<double>& breakpoints, const QuadOptions& opt) {
    if (!d.bounded()) throw GeometryError("boundary-layer functional needs a bounded domain");
    if (!(eta > 0.0)) throw ValidationError("eta must be positive");
    const double umax = d.inradius() / eta;
    // Coarea over distance shells: the level set {delta = q} is dD_q.
    auto g = [&](double u) { return f(u) * d.inner_perimeter(eta * u); };
    std::vector<double> cuts{0.0};
    for (double b : breakpoints)
        if (b > 0.0 && b < umax) cuts.push_back(b);
    for (double u = 1.0; u < umax; u *= 2.0) cuts.push_back(u);
    cuts.push_back(umax);
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) total += integrate(g, cuts[i], cuts[i + 1], opt).value;
    return total;
}

} // namespace rstrace
