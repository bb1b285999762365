#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "tablab/harness.hpp"

// ASR and CDA vs poisoning rate, one line pair per (trigger kind, size,
// position) configuration, epsilon on a log-ish linear axis.

namespace tablab::harness {

namespace {

const char* kPalette[] = {"#4878cf", "#d65f5f", "#6acc65", "#b47cc7", "#c4ad66", "#77bedb"};

struct Series {
    std::vector<std::pair<double, double>> asr;  // (epsilon, value)
    std::vector<std::pair<double, double>> cda;
};

}  // namespace

void emit_plots(const SweepResult& res, const std::string& path) {
    std::map<std::string, Series> series;
    double eps_lo = 1e300, eps_hi = -1e300;
    for (std::size_t c = 0; c < res.cell_configs.size(); ++c) {
        if (!res.cell_errors[c].empty()) continue;
        const auto& cfg = res.cell_configs[c];
        const std::string key = std::string(attack::to_string(cfg.trigger.kind)) + " k=" +
                                std::to_string(cfg.trigger.size) + " pos=" +
                                std::to_string(cfg.trigger.rank_offset);
        const double eps = cfg.poison.epsilon;
        series[key].asr.emplace_back(eps, res.cell_results[c].mean.asr);
        series[key].cda.emplace_back(eps, res.cell_results[c].mean.cda);
        eps_lo = std::min(eps_lo, eps);
        eps_hi = std::max(eps_hi, eps);
    }
    if (series.empty() || eps_hi <= eps_lo) {
        eps_lo = 0.0;
        eps_hi = 1.0;
    }

    const double w = 720.0, h = 440.0, ml = 60.0, mr = 20.0, mt = 30.0, mb = 50.0;
    const double pw = w - ml - mr, ph = h - mt - mb;
    auto xpos = [&](double eps) { return ml + pw * (eps - eps_lo) / (eps_hi - eps_lo); };
    auto ypos = [&](double rate) { return mt + ph * (1.0 - rate); };

    std::ofstream out(path);
    if (!out) throw StageError("cannot write plot: " + path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
        << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    for (double y = 0.0; y <= 1.0001; y += 0.25) {
        out << "<line x1=\"" << ml << "\" y1=\"" << ypos(y) << "\" x2=\"" << w - mr << "\" y2=\""
            << ypos(y) << "\" stroke=\"#dddddd\"/>\n";
        out << "<text x=\"8\" y=\"" << ypos(y) + 4 << "\" font-size=\"11\">" << y << "</text>\n";
    }
    out << "<text x=\"" << ml << "\" y=\"" << h - 12
        << "\" font-size=\"12\">poisoning rate (" << eps_lo << " .. " << eps_hi << ")</text>\n";

    std::size_t color = 0;
    double legend_y = mt + 12;
    for (auto& [key, s] : series) {
        std::sort(s.asr.begin(), s.asr.end());
        std::sort(s.cda.begin(), s.cda.end());
        const char* col = kPalette[color++ % 6];
        auto polyline = [&](const std::vector<std::pair<double, double>>& pts, bool dashed) {
            out << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"2\"";
            if (dashed) out << " stroke-dasharray=\"6,4\"";
            out << " points=\"";
            for (const auto& [eps, v] : pts) out << xpos(eps) << ',' << ypos(v) << ' ';
            out << "\"/>\n";
            for (const auto& [eps, v] : pts)
                out << "<circle cx=\"" << xpos(eps) << "\" cy=\"" << ypos(v)
                    << "\" r=\"2.5\" fill=\"" << col << "\"/>\n";
        };
        polyline(s.asr, false);  // solid: ASR
        polyline(s.cda, true);   // dashed: CDA
        out << "<text x=\"" << w - 280 << "\" y=\"" << legend_y << "\" font-size=\"11\" fill=\""
            << col << "\">" << key << " (solid ASR, dashed CDA)</text>\n";
        legend_y += 14;
    }
    out << "</svg>\n";
}

}  // namespace tablab::harness
