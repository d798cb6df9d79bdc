#include "htcp/family.hpp"

#include <set>

namespace htcp {

namespace {

using nlohmann::json;

void expect_keys(const json& j, std::set<std::string> allowed, const char* what) {
    if (!j.is_object()) throw GridError(std::string(what) + ": expected a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key()))
            throw GridError(std::string(what) + ": unknown key \"" + it.key() + "\"");
}

double number_field(const json& j, const char* key, const char* what) {
    if (!j.contains(key))
        throw GridError(std::string(what) + ": missing key \"" + key + "\"");
    const json& v = j.at(key);
    if (!v.is_number())
        throw GridError(std::string(what) + ": key \"" + std::string(key) + "\" must be a number");
    return v.get<double>();
}

} // namespace

Family Family::from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("kind") || !j.at("kind").is_string())
        throw GridError("family: expected an object with a string \"kind\"");
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "exponential") {
        expect_keys(j, {"kind", "rate"}, "family exponential");
        return exponential(number_field(j, "rate", "family exponential"));
    }
    if (kind == "pareto_lomax") {
        expect_keys(j, {"kind", "alpha", "scale"}, "family pareto_lomax");
        return pareto_lomax(number_field(j, "alpha", "family pareto_lomax"),
                            number_field(j, "scale", "family pareto_lomax"));
    }
    if (kind == "weibull") {
        expect_keys(j, {"kind", "shape", "scale"}, "family weibull");
        return weibull(number_field(j, "shape", "family weibull"),
                       number_field(j, "scale", "family weibull"));
    }
    if (kind == "lognormal") {
        expect_keys(j, {"kind", "location", "scale"}, "family lognormal");
        return lognormal(number_field(j, "location", "family lognormal"),
                         number_field(j, "scale", "family lognormal"));
    }
    if (kind == "counterexample_g") {
        expect_keys(j, {"kind"}, "family counterexample_g");
        return counterexample_g();
    }
    if (kind == "mixture") {
        expect_keys(j, {"kind", "components"}, "family mixture");
        if (!j.contains("components") || !j.at("components").is_array())
            throw GridError("family mixture: \"components\" must be an array");
        std::vector<std::pair<double, Family>> comps;
        for (const auto& c : j.at("components")) {
            expect_keys(c, {"weight", "family"}, "mixture component");
            if (!c.contains("family"))
                throw GridError("mixture component: missing key \"family\"");
            comps.emplace_back(number_field(c, "weight", "mixture component"),
                               from_json(c.at("family")));
        }
        return mixture(std::move(comps));
    }
    throw GridError("family: unknown kind \"" + kind + "\"");
}

nlohmann::json Family::to_json() const {
    json j;
    switch (kind_) {
    case FamilyKind::exponential:
        j = {{"kind", "exponential"}, {"rate", p1_}};
        break;
    case FamilyKind::pareto_lomax:
        j = {{"kind", "pareto_lomax"}, {"alpha", p1_}, {"scale", p2_}};
        break;
    case FamilyKind::weibull:
        j = {{"kind", "weibull"}, {"shape", p1_}, {"scale", p2_}};
        break;
    case FamilyKind::lognormal:
        j = {{"kind", "lognormal"}, {"location", p1_}, {"scale", p2_}};
        break;
    case FamilyKind::counterexample_g:
        j = {{"kind", "counterexample_g"}};
        break;
    case FamilyKind::mixture: {
        json arr = json::array();
        for (const auto& [w, f] : components_)
            arr.push_back({{"weight", w}, {"family", f.to_json()}});
        j = {{"kind", "mixture"}, {"components", arr}};
        break;
    }
    }
    return j;
}

} // namespace htcp
