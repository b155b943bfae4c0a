#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

namespace selfsim::cli {

struct Check {
  std::string name;
  double value = 0;
  std::string bound;
  bool pass = false;
};

// Band checks of a blow-up run read from its report JSON.
inline std::vector<Check> flagship_checks(const nlohmann::json& rep) {
  auto num = [&](const char* k) {
    return rep.contains(k) && rep[k].is_number() ? rep[k].get<double>() : std::nan("");
  };
  std::vector<Check> out;
  const double dec = num("lambda_decades");
  out.push_back({"lambda_decades", dec, ">= 3", dec >= 3});
  const double corr = num("lambda2_correlation");
  out.push_back({"lambda2_correlation", corr, ">= 0.999", corr >= 0.999});
  const double band = num("b_band");
  out.push_back({"b_band_final_decade", band, "<= 0.1", band <= 0.1});
  const double ratio = num("sigma_exponent_ratio");
  out.push_back({"sigma_exponent_ratio", ratio, "in [0.7, 1.3]", ratio >= 0.7 && ratio <= 1.3});
  const double eps = num("eps_ceiling");
  out.push_back({"eps_over_profile", eps, "<= 0.3", eps <= 0.3});
  double flat = std::nan("");
  bool enough = false;
  if (rep.contains("concentration")) {
    const auto& c = rep["concentration"];
    if (c.contains("flatness") && c["flatness"].is_number()) flat = c["flatness"].get<double>();
    enough = c.value("sufficient", false);
  }
  out.push_back({"concentration_flatness", flat, "<= 1.5 over one decade", enough && flat <= 1.5});
  return out;
}

}  // namespace selfsim::cli
