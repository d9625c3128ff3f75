#ifndef GEOMFILTER_REPORT_HPP
#define GEOMFILTER_REPORT_HPP

#include <json.hpp>

#include <string>

namespace geomfilter {

/// Outcome of a numerical check. Serialises to
/// {check, residual_max, tolerance, pass, samples}.
struct Report {
    std::string check;
    double residual_max = 0.0;
    double tolerance = 0.0;
    bool pass = false;
    int samples = 0;
    nlohmann::json details;  // optional per-check extras

    nlohmann::json to_json() const {
        nlohmann::json j{{"check", check},
                         {"residual_max", residual_max},
                         {"tolerance", tolerance},
                         {"pass", pass},
                         {"samples", samples}};
        if (!details.is_null()) j["details"] = details;
        return j;
    }
};

}  // namespace geomfilter

#endif  // GEOMFILTER_REPORT_HPP
