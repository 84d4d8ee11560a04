#pragma once

#include <optional>
#include <string>

namespace cmpmu {

enum class Link { Log, Identity };

// Declarative model description resolved against a Dataset: response counts,
// mean-model terms, optional dispersion-model terms (constant nu when
// absent), optional exposure column (log link only), optional fixed nu.
struct ModelSpec {
  std::string response;
  std::string mean_terms;  // formula string; "" = intercept only
  Link link = Link::Log;
  std::optional<std::string> dispersion_terms;
  std::optional<std::string> offset;
  std::optional<double> fixed_nu;
};

}  // namespace cmpmu
