#pragma once

// Closed-form metrics used by the scenario catalog and the tests.

#include "stableflow/geometry/metric.hpp"

namespace stableflow::models {

// Euclidean metric; `periods` turns it into a flat torus.
ChartMetric flat(int dim, std::vector<double> periods = {});

// dr^2 + r^2 dtheta^2, r > 0.
ChartMetric polar_plane();

// dr^2 + sin^2 r dtheta^2 (colatitude chart of the unit sphere), 0 < r < pi.
ChartMetric sphere_colatitude();

// dr^2 + cos^2 r dtheta^2, |r| < pi/2; the equator is r = 0.
ChartMetric sphere_equator();

// dr^2 + cosh^2 r dtheta^2; the waist r = 0 is a closed geodesic of length 2 pi.
ChartMetric hyperbolic_cylinder();

// cosh^2 y1 cosh^2 y2 dx^2 + dy1^2 + dy2^2 with x 2pi-periodic.
ChartMetric hyperbolic_3d_waist();

// dr^2 + sin^2 r (dtheta^2 + sin^2 theta dphi^2): unit round 3-sphere.
ChartMetric round_s3();

// Euclidean 3-space in coordinates rotating with speed a along x:
// dx^2 + (dy1 - a y2 dx)^2 + (dy2 + a y1 dx)^2. Flat, but the x-axis has
// normal holonomy of angle 2 pi a over one period.
ChartMetric twisted_flat(double a);

}  // namespace stableflow::models
