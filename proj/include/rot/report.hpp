#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "rot/rate_harness.hpp"

namespace rot::report {

inline const char* to_string(Sidedness s) { return s == Sidedness::two_sided ? "two-sided" : "at-least"; }

inline nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

inline nlohmann::json to_json(const RateFit& f) {
    return {{"quantity", f.quantity},
            {"slope", finite_or_null(f.slope)},
            {"intercept", finite_or_null(f.intercept)},
            {"r_squared", finite_or_null(f.r_squared)},
            {"expected_slope", f.expected_slope},
            {"tolerance", f.tolerance},
            {"sidedness", to_string(f.sidedness)},
            {"degenerate", f.degenerate},
            {"pass", f.pass},
            {"note", f.note},
            {"epsilons", f.epsilons},
            {"values", f.values}};
}

inline nlohmann::json to_json(const ConvexityReport& r) {
    std::vector<nlohmann::json> vals;
    for (double v : r.values) vals.push_back(finite_or_null(v));
    return {{"quantity", "strong_convexity"},
            {"minimum", finite_or_null(r.minimum)},
            {"threshold", r.threshold},
            {"worst_epsilon", r.worst_epsilon},
            {"worst_point", r.worst_point},
            {"epsilons", r.epsilons},
            {"values", vals},
            {"pass", r.pass}};
}

inline nlohmann::json to_json(const SandwichReport& r) {
    std::vector<nlohmann::json> inner, outer;
    for (double v : r.min_inner) inner.push_back(finite_or_null(v));
    for (double v : r.max_outer) outer.push_back(finite_or_null(v));
    return {{"quantity", "ratio_sandwich"},
            {"epsilon0_proxy", r.epsilon0_proxy},
            {"spread", finite_or_null(r.spread)},
            {"limit", r.limit},
            {"epsilons", r.epsilons},
            {"min_inner_ratio", inner},
            {"max_outer_ratio", outer},
            {"pass", r.pass}};
}

namespace detail {

inline std::string num(double v, int digits = 4) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

inline std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace detail

/// Self-contained log-log plot: data points, fitted line, dashed expected-slope line through the data centroid.
inline std::string svg_loglog(const RateFit& fit, const std::string& title) {
    constexpr double W = 640, H = 440, L = 80, R = 24, T = 48, B = 56;
    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
      << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << detail::escape(title)
      << "</text>\n";

    std::vector<double> lx, ly;
    for (std::size_t k = 0; k < fit.epsilons.size(); ++k) {
        if (!(fit.epsilons[k] > 0.0) || !(fit.values[k] > 0.0)) continue;
        lx.push_back(std::log10(fit.epsilons[k]));
        ly.push_back(std::log10(fit.values[k]));
    }
    if (lx.empty()) {
        s << "<text x=\"" << W / 2 << "\" y=\"" << H / 2 << "\" text-anchor=\"middle\">no positive data"
          << (fit.note.empty() ? "" : ": " + detail::escape(fit.note)) << "</text>\n</svg>\n";
        return s.str();
    }
    double x0 = std::floor(*std::min_element(lx.begin(), lx.end()));
    double x1 = std::ceil(*std::max_element(lx.begin(), lx.end()));
    double y0 = std::floor(*std::min_element(ly.begin(), ly.end()));
    double y1 = std::ceil(*std::max_element(ly.begin(), ly.end()));
    if (x1 <= x0) x1 = x0 + 1;
    if (y1 <= y0) y1 = y0 + 1;
    const auto px = [&](double v) { return L + (v - x0) / (x1 - x0) * (W - L - R); };
    const auto py = [&](double v) { return H - B - (v - y0) / (y1 - y0) * (H - T - B); };

    s << "<defs><clipPath id=\"plot\"><rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R
      << "\" height=\"" << H - T - B << "\"/></clipPath></defs>\n";
    s << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B
      << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (double v = x0; v <= x1 + 1e-9; v += 1.0)
        s << "<line x1=\"" << px(v) << "\" y1=\"" << T << "\" x2=\"" << px(v) << "\" y2=\"" << H - B
          << "\" stroke=\"#ddd\"/>\n<text x=\"" << px(v) << "\" y=\"" << H - B + 18
          << "\" text-anchor=\"middle\">1e" << static_cast<int>(v) << "</text>\n";
    for (double v = y0; v <= y1 + 1e-9; v += 1.0)
        s << "<line x1=\"" << L << "\" y1=\"" << py(v) << "\" x2=\"" << W - R << "\" y2=\"" << py(v)
          << "\" stroke=\"#ddd\"/>\n<text x=\"" << L - 8 << "\" y=\"" << py(v) + 4
          << "\" text-anchor=\"end\">1e" << static_cast<int>(v) << "</text>\n";
    s << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 14 << "\" text-anchor=\"middle\">epsilon</text>\n"
      << "<text x=\"18\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
      << (T + H - B) / 2 << ")\">" << detail::escape(fit.quantity) << "</text>\n";

    s << "<g clip-path=\"url(#plot)\">\n";
    if (!fit.degenerate) {
        const auto line = [&](double slope, double icpt10, const char* style) {
            s << "<line x1=\"" << px(x0) << "\" y1=\"" << py(icpt10 + slope * x0) << "\" x2=\"" << px(x1)
              << "\" y2=\"" << py(icpt10 + slope * x1) << "\" " << style << "/>\n";
        };
        line(fit.slope, fit.intercept / std::log(10.0), "stroke=\"#1f77b4\" stroke-width=\"2\"");
        double mx = 0.0, my = 0.0;
        for (std::size_t k = 0; k < lx.size(); ++k) {
            mx += lx[k];
            my += ly[k];
        }
        mx /= static_cast<double>(lx.size());
        my /= static_cast<double>(ly.size());
        line(fit.expected_slope, my - fit.expected_slope * mx, "stroke=\"#d62728\" stroke-dasharray=\"6 4\"");
    }
    for (std::size_t k = 0; k < lx.size(); ++k)
        s << "<circle cx=\"" << px(lx[k]) << "\" cy=\"" << py(ly[k]) << "\" r=\"4\" fill=\"black\"/>\n";
    s << "</g>\n";

    std::string caption;
    if (fit.degenerate) {
        caption = fit.note;
    } else {
        caption = "fitted slope " + detail::num(fit.slope) + " vs expected " + detail::num(fit.expected_slope) +
                  (fit.sidedness == Sidedness::two_sided ? " \xC2\xB1 " : " - ") + detail::num(fit.tolerance);
    }
    caption += fit.pass ? "  [pass]" : "  [FAIL]";
    s << "<text x=\"" << L + 10 << "\" y=\"" << T + 18 << "\">" << detail::escape(caption) << "</text>\n"
      << "<line x1=\"" << W - R - 170 << "\" y1=\"" << T + 16 << "\" x2=\"" << W - R - 140 << "\" y2=\"" << T + 16
      << "\" stroke=\"#1f77b4\" stroke-width=\"2\"/><text x=\"" << W - R - 134 << "\" y=\"" << T + 20
      << "\">least-squares fit</text>\n"
      << "<line x1=\"" << W - R - 170 << "\" y1=\"" << T + 34 << "\" x2=\"" << W - R - 140 << "\" y2=\"" << T + 34
      << "\" stroke=\"#d62728\" stroke-dasharray=\"6 4\"/><text x=\"" << W - R - 134 << "\" y=\"" << T + 38
      << "\">expected slope</text>\n</svg>\n";
    return s.str();
}

}  // namespace rot::report
