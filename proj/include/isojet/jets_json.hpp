#pragma once

#include "json.hpp"

#include "isojet/jets.hpp"

namespace isojet {

/// {dim_in, degree, value_dim, coeffs: [[alpha...], [v...]], ...} in graded-lex order.
nlohmann::json to_json(const Jet& jet);
/// Accepts dense or sparse coefficient lists; absent entries are zero.
Jet jet_from_json(const nlohmann::json& j);

nlohmann::json to_json(const JetMap& map);
JetMap jet_map_from_json(const nlohmann::json& j);

}  // namespace isojet
