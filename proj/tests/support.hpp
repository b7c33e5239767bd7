#pragma once

#include <string>
#include <vector>

#include "wips/config.hpp"

namespace wips::test {

inline ScenarioConfig scenario(const std::string& drift, std::vector<double> params, std::size_t n, double p,
                               int steps = 50, double horizon = 1.0) {
  ScenarioConfig c;
  c.name = "unit";
  c.n = n;
  c.drift = {{{drift, std::move(params)}}};
  c.diffusion = {{{"identity_diffusion", {}}}};
  c.initial = {InitialLawSpec{}};
  c.p0 = {{p}};
  c.steps = steps;
  c.horizon = horizon;
  return c;
}

inline Model model(const std::string& drift, std::vector<double> params, std::size_t n, double p, int steps = 50,
                   double horizon = 1.0) {
  return build_model(scenario(drift, std::move(params), n, p, steps, horizon));
}

}  // namespace wips::test
