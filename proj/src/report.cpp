#include "fbmch/csv.hpp"
#include "fbmch/verify.hpp"

#include "json.hpp"

#include <cmath>
#include <ostream>
#include <sstream>

namespace fbmch {

bool ScanReport::pass() const {
    for (const auto& c : checks) {
        if (c.asserted && !c.pass) return false;
    }
    return true;
}

void ScanReport::add_check(std::string check_name, bool ok, std::string detail, bool asserted) {
    checks.push_back({std::move(check_name), ok, asserted, std::move(detail)});
}

void ScanReport::fit_slope() {
    fit = loglog_fit(abscissae, values);
    fitted = true;
}

void ScanReport::write_csv(std::ostream& os) const {
    os << abscissa_name << ",value,stderr\n";
    for (std::size_t i = 0; i < abscissae.size(); ++i) {
        const double se = i < std_errors.size() ? std_errors[i] : 0.0;
        os << fmt17(abscissae[i]) << ',' << fmt17(values[i]) << ',' << fmt17(se) << '\n';
    }
}

namespace {

nlohmann::json number(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace

void ScanReport::write_summary(std::ostream& os) const {
    nlohmann::ordered_json j;
    j["name"] = name;
    j["pass"] = pass();
    j["samples"] = samples;
    if (fitted) {
        j["slope"] = number(fit.slope);
        j["slope_half_width"] = number(fit.half_width);
        j["intercept"] = number(fit.intercept);
    } else {
        j["slope"] = nullptr;
    }
    j["band"] = {number(band_lo), number(band_hi)};
    j["reference_exponent"] = number(reference_exponent);
    j["reference_tag"] = reference_tag;
    nlohmann::ordered_json cs = nlohmann::ordered_json::array();
    for (const auto& c : checks) {
        cs.push_back({{"name", c.name}, {"pass", c.pass}, {"asserted", c.asserted}, {"detail", c.detail}});
    }
    j["checks"] = cs;
    nlohmann::ordered_json ms = nlohmann::ordered_json::object();
    for (const auto& [k, v] : metrics) ms[k] = number(v);
    j["metrics"] = ms;
    os << j.dump(2) << '\n';
}

std::string ScanReport::one_line() const {
    std::ostringstream os;
    os << (pass() ? "PASS " : "FAIL ") << name;
    if (fitted) os << " slope=" << fit.slope << " +/- " << fit.half_width;
    if (std::isfinite(band_lo)) os << " band=[" << band_lo << ", " << band_hi << "]";
    for (const auto& c : checks) {
        if (!c.pass) os << (c.asserted ? " [failed: " : " [report-only mismatch: ") << c.name << "]";
    }
    return os.str();
}

}  // namespace fbmch
