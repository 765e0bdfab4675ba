#pragma once

// Built-in coefficient families. Singular ones are clamped at half a cell
// width so that every midpoint sample is finite.

#include "slkato/mesh.hpp"

namespace slkato {

namespace detail {
inline double frac(double x) { return x - std::floor(x); }
inline double clamped_distance(double x, double x0, double h) { return std::max(std::abs(x - x0), 0.5 * h); }
}  // namespace detail

inline std::vector<std::string> family_names() {
  return {"laplace", "constant", "complex_p", "complex_constant", "mixed_sign", "sawtooth", "spike", "complex_robin"};
}

/// `center` places the singularity of the spike family.
inline CoefficientFunctions named_family(const std::string& name, double center = 0.0) {
  using detail::clamped_distance;
  using detail::frac;
  CoefficientFunctions f;
  f.name = name;
  if (name == "laplace") return f;
  if (name == "constant") {
    f.q = constant_fn(1.0);
    f.r = constant_fn(0.5);
    f.s = constant_fn(0.25);
    return f;
  }
  if (name == "complex_p") {
    f.p = constant_fn(cplx(1.0, 0.5));
    return f;
  }
  if (name == "complex_constant") {
    f.p = constant_fn(cplx(1.0, 0.5));
    f.q = constant_fn(cplx(2.0, -1.0));
    f.r = constant_fn(cplx(0.5, 0.5));
    f.s = constant_fn(cplx(-0.3, 0.2));
    return f;
  }
  if (name == "mixed_sign") {
    f.p = [](double x, double) { return cplx(1.5 + 0.5 * std::cos(3 * x), 0.25 * std::sin(2 * x)); };
    f.q = [](double x, double) { return cplx(3.0 * std::cos(2 * pi * x), 0.0); };
    f.r = [](double x, double) { return cplx(std::sin(3 * x), 0.0); };
    f.s = [](double x, double) { return cplx(-std::cos(2 * x), 0.0); };
    return f;
  }
  if (name == "sawtooth") {
    f.p = [](double x, double) { return cplx(1.0 + 0.5 * frac(x), 0.2); };
    f.q = [](double x, double) { return cplx(2.0 * (frac(2 * x) - 0.5), 0.5 * frac(x)); };
    f.r = [](double x, double) { return cplx(frac(3 * x) - 0.5, 0.3); };
    f.s = [](double x, double) { return cplx(0.4 * frac(x + 0.5), -0.2 * frac(2 * x)); };
    return f;
  }
  if (name == "spike") {
    // q ~ |x - c|^{-1/2} is L^1, r, s ~ |x - c|^{-1/4} are L^2.
    f.q = [center](double x, double h) { return cplx(std::pow(clamped_distance(x, center, h), -0.5)); };
    f.r = [center](double x, double h) { return cplx(0.5 * std::pow(clamped_distance(x, center, h), -0.25)); };
    f.s = [center](double x, double h) { return cplx(0.0, 0.5 * std::pow(clamped_distance(x, center, h), -0.25)); };
    return f;
  }
  if (name == "complex_robin") {
    // p == 1 with complex lower-order terms; meant for complex Robin data.
    f.q = [](double x, double) { return cplx(1.0 + x, -0.5); };
    f.r = [](double x, double) { return cplx(0.5 * std::sin(2 * pi * x), 0.25); };
    f.s = [](double x, double) { return cplx(0.3, -0.4 * x); };
    return f;
  }
  throw ConfigError("unknown coefficient family '" + name + "'");
}

}  // namespace slkato
