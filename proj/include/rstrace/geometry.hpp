#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "rstrace/quadrature.hpp"

namespace rstrace {

using Point = Eigen::Vector2d;

enum class DomainKind { Disk, Rectangle, Polygon, HalfSpace, Plane };

/// Interior/exterior ball radius r0 and the Lipschitz constant of the normal.
struct C11Characteristics {
    double r0;
    double lambda0;
};

/// Planar open set. Rectangles sit with a corner at the origin, the half-space
/// is {x1 > 0}; polygons must be convex and counter-clockwise.
class Domain {
public:
    static Domain disk(double radius, const Point& center = Point::Zero());
    static Domain rectangle(double a, double b);
    static Domain polygon(std::vector<Point> vertices);
    static Domain half_space();
    static Domain plane();

    /// "disk:R", "disk:R,cx,cy", "rectangle:a,b", "polygon:x,y;x,y;...", "halfspace", "plane".
    static Domain parse(const std::string& spec);
    std::string spec() const;

    DomainKind kind() const { return kind_; }
    bool bounded() const { return kind_ != DomainKind::HalfSpace && kind_ != DomainKind::Plane; }
    double area() const;
    double perimeter() const;
    std::optional<C11Characteristics> c11() const;
    double inradius() const;

    bool contains(const Point& x) const;
    double distance_to_complement(const Point& x) const;
    /// Distance along the unit direction `e` to the first point of D^c.
    double ray_exit(const Point& x, const Point& e) const;
    /// Angles where the ray-exit distance from x loses smoothness.
    std::vector<double> angular_breakpoints(const Point& x) const;

    std::pair<Point, Point> bounding_box() const;
    double max_distance_from(const Point& c) const;

    double radius() const { return radius_; }
    const Point& center() const { return center_; }
    const std::vector<Point>& vertices() const { return vertices_; }

    /// |D_q| and |dD_q| for the inner domain at depth q.
    double inner_area(double q) const;
    double inner_perimeter(double q) const;

private:
    Domain() = default;
    void require_bounded(const char* what) const;

    DomainKind kind_ = DomainKind::Plane;
    double radius_ = 0.0;
    Point center_ = Point::Zero();
    std::vector<Point> vertices_;
    std::vector<Point> normals_;  // outward unit normals, edge i from vertex i to i+1
    std::vector<double> offsets_; // n_i . x <= offsets_i inside
};

double distance_to_complement(const Domain& d, const Point& x);

/// D_q = {x in D : delta_D(x) > q}.
class InnerDomain {
public:
    InnerDomain(Domain parent, double q);
    bool contains(const Point& x) const;
    double area() const { return parent_.inner_area(q_); }
    double boundary_measure() const { return parent_.inner_perimeter(q_); }
    const Domain& parent() const { return parent_; }
    double depth() const { return q_; }

private:
    Domain parent_;
    double q_;
};

/// |dD_q| for domains with C^{1,1} characteristics.
double inner_boundary_measure(const Domain& d, double q);

/// Clip a convex polygon to the inner parallel set at depth q (may be empty).
std::vector<Point> inner_parallel_polygon(const std::vector<Point>& ccw, double q);
double polygon_area(const std::vector<Point>& v);
double polygon_perimeter(const std::vector<Point>& v);

/// (1/eta) int_D f(delta_D(x)/eta) dx, organised in distance shells.
double boundary_layer_functional(const Domain& d, const std::function<double(double)>& f, double eta,
                                 const std::vector<double>& breakpoints = {}, const QuadOptions& opt = {1e-10, 1e-10, 4000});

} // namespace rstrace
