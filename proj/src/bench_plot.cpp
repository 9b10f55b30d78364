#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "flowpath/bench.hpp"
#include "flowpath/svg.hpp"

namespace flowpath::bench {

namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kPalette = {"#4472c4", "#ed7d31", "#70ad47", "#c00000",
                                           "#7030a0", "#00b0f0", "#997300", "#444444"};

std::string sanitize(const std::string& s) {
    std::string out;
    for (char c : s) out += (std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
    return out;
}

std::vector<std::pair<double, double>> read_points_csv(const fs::path& path) {
    std::vector<std::pair<double, double>> pts;
    std::ifstream in(path);
    if (!in) return pts;
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        const auto comma = line.find(',');
        if (comma == std::string::npos) continue;
        try {
            pts.emplace_back(std::stod(line.substr(0, comma)), std::stod(line.substr(comma + 1)));
        } catch (...) {
        }
    }
    return pts;
}

struct Frame {
    double x0, y0, x1, y1;          // canvas box
    double dx0, dx1, dy0, dy1;      // data ranges
    bool log_y = false;

    double px(double x) const { return x0 + (x - dx0) / (dx1 - dx0) * (x1 - x0); }
    double py(double y) const {
        const double v = log_y ? std::log10(y) : y;
        const double lo = log_y ? std::log10(dy0) : dy0;
        const double hi = log_y ? std::log10(dy1) : dy1;
        return y1 - (v - lo) / (hi - lo) * (y1 - y0);
    }
};

void draw_axes(SvgCanvas& svg, const Frame& f, const std::string& xlabel,
               const std::string& ylabel, const std::string& title) {
    svg.line(f.x0, f.y1, f.x1, f.y1, "#222222");
    svg.line(f.x0, f.y0, f.x0, f.y1, "#222222");
    svg.text(0.5 * (f.x0 + f.x1), f.y1 + 35.0, xlabel, 13.0, "middle");
    svg.text(f.x0 - 45.0, 0.5 * (f.y0 + f.y1), ylabel, 13.0, "middle");
    svg.text(0.5 * (f.x0 + f.x1), f.y0 - 12.0, title, 15.0, "middle");
}

std::string short_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

}  // namespace

std::vector<std::string> emit_plots(RunManifest& manifest, const std::string& out_dir) {
    std::vector<std::string> files;
    fs::create_directories(out_dir);

    // Targets with any presence in the manifest, in name order.
    std::map<std::string, bool> target_names;
    for (const auto& c : manifest.cells) target_names[c.target] = true;
    for (const auto& [name, entry] : manifest.points) target_names[name] = true;

    for (const auto& [tname, unused] : target_names) {
        // ---- scatter overlay ----
        {
            SvgCanvas svg(640, 520);
            Frame f{70, 50, 600, 470, 0, 1, 0, 1, false};

            std::vector<std::pair<std::string, std::vector<std::pair<double, double>>>> layers;
            auto pit = manifest.points.find(tname);
            if (pit != manifest.points.end()) {
                const fs::path base(manifest.output_dir);
                auto exact = read_points_csv(base / pit->second.first);
                if (!exact.empty()) layers.emplace_back("exact", std::move(exact));
                for (const auto& [sid, rel] : pit->second.second) {
                    auto pts = read_points_csv(base / rel);
                    if (pts.empty())
                        manifest.warnings.push_back("scatter: missing points for " + tname + "/" +
                                                    sid);
                    else
                        layers.emplace_back(sid, std::move(pts));
                }
            } else {
                manifest.warnings.push_back("scatter: no point files recorded for " + tname);
            }

            double lo_x = -1, hi_x = 1, lo_y = -1, hi_y = 1;
            bool first = true;
            for (const auto& [id, pts] : layers)
                for (const auto& [x, y] : pts) {
                    if (first) {
                        lo_x = hi_x = x;
                        lo_y = hi_y = y;
                        first = false;
                    }
                    lo_x = std::min(lo_x, x);
                    hi_x = std::max(hi_x, x);
                    lo_y = std::min(lo_y, y);
                    hi_y = std::max(hi_y, y);
                }
            const double pad_x = 0.05 * (hi_x - lo_x) + 1e-9;
            const double pad_y = 0.05 * (hi_y - lo_y) + 1e-9;
            f.dx0 = lo_x - pad_x;
            f.dx1 = hi_x + pad_x;
            f.dy0 = lo_y - pad_y;
            f.dy1 = hi_y + pad_y;

            draw_axes(svg, f, "x1", "x2", tname + ": endpoints vs exact sample");
            std::size_t color = 0;
            double legend_y = f.y0 + 8.0;
            for (const auto& [id, pts] : layers) {
                const bool is_exact = id == "exact";
                const std::string col = is_exact ? "#bbbbbb" : kPalette[color++ % kPalette.size()];
                for (const auto& [x, y] : pts)
                    svg.circle(f.px(x), f.py(y), is_exact ? 1.6 : 1.3, col, is_exact ? 0.55 : 0.6);
                svg.circle(f.x1 - 120.0, legend_y - 4.0, 4.0, col);
                svg.text(f.x1 - 110.0, legend_y, id, 12.0);
                legend_y += 16.0;
            }

            const std::string file =
                (fs::path(out_dir) / (sanitize(tname) + "__scatter.svg")).string();
            std::ofstream(file, std::ios::binary) << svg.str();
            files.push_back(file);
        }

        // ---- metric vs NFE ----
        {
            SvgCanvas svg(640, 520);
            Frame f{70, 50, 600, 470, 0, 1, 0, 1, false};

            // sampler -> N -> (nfe, mean sliced_w2 over seeds)
            std::map<std::string, std::map<int, std::pair<long long, std::pair<double, int>>>> agg;
            for (const auto& c : manifest.cells) {
                if (c.target != tname || c.status != "ok" || std::isnan(c.sliced_w2)) continue;
                auto& slot = agg[c.sampler][c.steps];
                slot.first = c.nfe;
                slot.second.first += c.sliced_w2;
                slot.second.second += 1;
            }
            if (agg.empty())
                manifest.warnings.push_back("metric chart: no completed cells for " + tname);

            double lo_x = 1e300, hi_x = -1e300, lo_y = 1e300, hi_y = -1e300;
            bool positive = true;
            for (const auto& [sid, byN] : agg)
                for (const auto& [n, slot] : byN) {
                    const double mean = slot.second.first / slot.second.second;
                    lo_x = std::min(lo_x, double(slot.first));
                    hi_x = std::max(hi_x, double(slot.first));
                    lo_y = std::min(lo_y, mean);
                    hi_y = std::max(hi_y, mean);
                    if (!(mean > 0.0)) positive = false;
                }
            if (agg.empty()) {
                lo_x = 0;
                hi_x = 1;
                lo_y = 0;
                hi_y = 1;
            }
            f.log_y = positive && hi_y > lo_y && lo_y > 0.0;
            if (hi_x <= lo_x) hi_x = lo_x + 1;
            if (hi_y <= lo_y) hi_y = lo_y + (f.log_y ? lo_y : 1.0);
            f.dx0 = lo_x - 0.05 * (hi_x - lo_x);
            f.dx1 = hi_x + 0.05 * (hi_x - lo_x);
            f.dy0 = f.log_y ? lo_y / 1.3 : lo_y - 0.05 * (hi_y - lo_y + 1e-12);
            f.dy1 = f.log_y ? hi_y * 1.3 : hi_y + 0.05 * (hi_y - lo_y + 1e-12);

            draw_axes(svg, f, "NFE", f.log_y ? "sliced W2 (log)" : "sliced W2",
                      tname + ": sliced W2 vs NFE");

            // x ticks at observed nfe values, y ticks at 4 positions
            std::map<long long, bool> nfes;
            for (const auto& [sid, byN] : agg)
                for (const auto& [n, slot] : byN) nfes[slot.first] = true;
            for (const auto& [nfe, u] : nfes) {
                svg.line(f.px(double(nfe)), f.y1, f.px(double(nfe)), f.y1 + 5.0, "#222222");
                svg.text(f.px(double(nfe)), f.y1 + 18.0, std::to_string(nfe), 11.0, "middle");
            }
            for (int k = 0; k <= 4; ++k) {
                const double yv = f.log_y
                                      ? std::pow(10.0, std::log10(f.dy0) +
                                                           k * (std::log10(f.dy1) -
                                                                std::log10(f.dy0)) / 4.0)
                                      : f.dy0 + k * (f.dy1 - f.dy0) / 4.0;
                svg.line(f.x0 - 5.0, f.py(yv), f.x0, f.py(yv), "#222222");
                svg.text(f.x0 - 8.0, f.py(yv) + 4.0, short_num(yv), 11.0, "end");
            }

            std::size_t color = 0;
            double legend_y = f.y0 + 8.0;
            for (const auto& [sid, byN] : agg) {
                const std::string col = kPalette[color++ % kPalette.size()];
                std::vector<std::pair<double, double>> line;
                for (const auto& [n, slot] : byN)
                    line.emplace_back(f.px(double(slot.first)),
                                      f.py(slot.second.first / slot.second.second));
                svg.polyline(line, col, 2.0);
                for (const auto& [x, y] : line) svg.circle(x, y, 3.0, col);
                svg.line(f.x1 - 130.0, legend_y - 4.0, f.x1 - 112.0, legend_y - 4.0, col, 2.5);
                svg.text(f.x1 - 106.0, legend_y, sid, 12.0);
                legend_y += 16.0;
            }

            const std::string file =
                (fs::path(out_dir) / (sanitize(tname) + "__metric.svg")).string();
            std::ofstream(file, std::ios::binary) << svg.str();
            files.push_back(file);
        }
    }
    return files;
}

}  // namespace flowpath::bench
