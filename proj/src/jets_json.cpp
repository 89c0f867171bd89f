#include "isojet/jets_json.hpp"

#include "isojet/error.hpp"

namespace isojet {

nlohmann::json to_json(const Jet& jet) {
    nlohmann::json coeffs = nlohmann::json::array();
    const JetLayout& lay = jet.layout();
    for (std::size_t r = 0; r < lay.size(); ++r) {
        nlohmann::json values = nlohmann::json::array();
        for (int k = 0; k < jet.value_dim(); ++k) values.push_back(jet.coeff(r, k));
        coeffs.push_back(nlohmann::json::array({lay.index(r).exponents(), std::move(values)}));
    }
    return {{"dim_in", jet.dim_in()}, {"degree", jet.degree()}, {"value_dim", jet.value_dim()}, {"coeffs", std::move(coeffs)}};
}

Jet jet_from_json(const nlohmann::json& j) {
    try {
        Jet jet(j.at("dim_in").get<int>(), j.at("degree").get<int>(), j.at("value_dim").get<int>());
        for (const auto& entry : j.at("coeffs")) {
            if (!entry.is_array() || entry.size() != 2) throw ParseError("jet coefficient entry must be [alpha, values]");
            const MultiIndex alpha(entry[0].get<std::vector<int>>());
            const auto values = entry[1].get<std::vector<double>>();
            if (static_cast<int>(values.size()) != jet.value_dim()) throw ParseError("jet coefficient has wrong value dimension");
            if (alpha.order() > jet.degree()) throw ParseError("jet coefficient order exceeds degree");
            for (int k = 0; k < jet.value_dim(); ++k) jet.set(alpha, k, values[static_cast<std::size_t>(k)]);
        }
        return jet;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed jet JSON: ") + e.what());
    } catch (const DimensionError& e) {
        throw ParseError(std::string("malformed jet JSON: ") + e.what());
    }
}

nlohmann::json to_json(const JetMap& map) {
    nlohmann::json comps = nlohmann::json::array();
    for (const Jet& c : map.components()) comps.push_back(to_json(c));
    return {{"components", std::move(comps)}};
}

JetMap jet_map_from_json(const nlohmann::json& j) {
    std::vector<Jet> comps;
    try {
        for (const auto& c : j.at("components")) comps.push_back(jet_from_json(c));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed jet map JSON: ") + e.what());
    }
    return JetMap(std::move(comps));
}

}  // namespace isojet
