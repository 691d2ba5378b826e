#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "flowdet/bench.hpp"
#include "flowdet/errors.hpp"

namespace flowdet::bench {

namespace {

std::string num(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, 2);
    return std::string(buf, res.ptr);
}

const char* kPalette[8] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                           "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

struct Series {
    std::string name;
    std::vector<std::pair<double, double>> points;  // (x, ber), ber possibly 0
};

}  // namespace

void emit_plot(const std::string& csv_path, SweepAxis axis, const std::string& out_path) {
    CsvContent content = read_csv(csv_path);
    if (content.records.empty()) throw ConfigError("emit_plot: no data rows in " + csv_path);

    std::vector<Series> series;
    std::map<std::string, std::size_t> index;
    double floor_value = 1.0;
    for (const auto& r : content.records) {
        double x = axis == SweepAxis::kSnr ? r.snr_db : r.alpha;
        auto [it, inserted] = index.emplace(r.detector, series.size());
        if (inserted) series.push_back({r.detector, {}});
        series[it->second].points.emplace_back(x, r.ber);
        double fl = 1.0 / (static_cast<double>(r.frames) * 2.0 * static_cast<double>(r.n_tx));
        floor_value = std::min(floor_value, fl);
    }
    for (auto& s : series)
        std::sort(s.points.begin(), s.points.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });

    double xmin = 1e300, xmax = -1e300, ymin = 1.0;
    bool has_zero = false;
    for (const auto& s : series)
        for (const auto& [x, y] : s.points) {
            xmin = std::min(xmin, x);
            xmax = std::max(xmax, x);
            if (y > 0.0)
                ymin = std::min(ymin, y);
            else
                has_zero = true;
        }
    if (xmax == xmin) {
        xmin -= 0.5;
        xmax += 0.5;
    }
    ymin = std::min(ymin, has_zero ? floor_value : ymin);
    int decade_lo = static_cast<int>(std::floor(std::log10(std::max(ymin, 1e-12))));
    int decade_hi = 0;  // BER axis tops out at 1

    const double width = 720, height = 540;
    const double ml = 80, mr = 24, mt = 48, mb = 64;
    const double pw = width - ml - mr, ph = height - mt - mb;
    auto xpix = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * pw; };
    auto ypix = [&](double ber) {
        double ly = std::log10(std::max(ber, floor_value));
        double span = static_cast<double>(decade_hi - decade_lo);
        return mt + (static_cast<double>(decade_hi) - ly) / span * ph;
    };

    std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open plot output: " + out_path, 0);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\""
        << num(height) << "\" viewBox=\"0 0 " << num(width) << " " << num(height) << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    const auto& first = content.records.front();
    std::string title = first.family + " noise, " + std::to_string(first.n_tx) + "x" +
                        std::to_string(first.n_rx) + ", " + std::to_string(first.frames) +
                        " frames/point";
    if (axis == SweepAxis::kSnr)
        title += ", alpha=" + num(first.alpha);
    else
        title += ", snr=" + num(first.snr_db) + " dB";
    out << "<text x=\"" << num(width / 2) << "\" y=\"24\" text-anchor=\"middle\" "
        << "font-family=\"sans-serif\" font-size=\"15\">" << title << "</text>\n";

    // axes
    out << "<rect x=\"" << num(ml) << "\" y=\"" << num(mt) << "\" width=\"" << num(pw)
        << "\" height=\"" << num(ph) << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int d = decade_hi; d >= decade_lo; --d) {
        double y = ypix(std::pow(10.0, d));
        out << "<line x1=\"" << num(ml) << "\" y1=\"" << num(y) << "\" x2=\"" << num(ml + pw)
            << "\" y2=\"" << num(y) << "\" stroke=\"#dddddd\"/>\n";
        out << "<text x=\"" << num(ml - 8) << "\" y=\"" << num(y + 4)
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\">1e" << d
            << "</text>\n";
    }
    std::vector<double> xticks;
    for (const auto& [x, y] : series[0].points) xticks.push_back(x);
    for (double x : xticks) {
        out << "<text x=\"" << num(xpix(x)) << "\" y=\"" << num(mt + ph + 20)
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << num(x)
            << "</text>\n";
    }
    out << "<text x=\"" << num(ml + pw / 2) << "\" y=\"" << num(height - 16)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">"
        << (axis == SweepAxis::kSnr ? "SNR (dB)" : "alpha") << "</text>\n";
    out << "<text x=\"20\" y=\"" << num(mt + ph / 2)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
        << "transform=\"rotate(-90 20 " << num(mt + ph / 2) << ")\">BER</text>\n";

    // series
    for (std::size_t si = 0; si < series.size(); ++si) {
        const char* color = kPalette[si % 8];
        const auto& s = series[si];
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (const auto& [x, y] : s.points) out << num(xpix(x)) << "," << num(ypix(y)) << " ";
        out << "\"/>\n";
        for (const auto& [x, y] : s.points) {
            if (y > 0.0) {
                out << "<circle cx=\"" << num(xpix(x)) << "\" cy=\"" << num(ypix(y))
                    << "\" r=\"3\" fill=\"" << color << "\"/>\n";
            } else {
                // zero BER drawn at the resolution floor, annotated
                out << "<rect x=\"" << num(xpix(x) - 3) << "\" y=\"" << num(ypix(floor_value) - 3)
                    << "\" width=\"6\" height=\"6\" fill=\"none\" stroke=\"" << color << "\"/>\n";
                out << "<text x=\"" << num(xpix(x) + 5) << "\" y=\"" << num(ypix(floor_value) - 5)
                    << "\" font-family=\"sans-serif\" font-size=\"9\" fill=\"" << color
                    << "\">&lt;floor</text>\n";
            }
        }
        double ly = mt + 16 + 16 * static_cast<double>(si);
        out << "<line x1=\"" << num(ml + pw - 150) << "\" y1=\"" << num(ly - 4) << "\" x2=\""
            << num(ml + pw - 126) << "\" y2=\"" << num(ly - 4) << "\" stroke=\"" << color
            << "\" stroke-width=\"1.5\"/>\n";
        out << "<text x=\"" << num(ml + pw - 120) << "\" y=\"" << num(ly)
            << "\" font-family=\"sans-serif\" font-size=\"12\">" << s.name << "</text>\n";
    }
    out << "</svg>\n";
}

}  // namespace flowdet::bench
