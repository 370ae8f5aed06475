#include "leosim/charts.hpp"

#include "leosim/csv.hpp"
#include "leosim/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>

namespace leosim {

namespace fs = std::filesystem;

namespace {

constexpr double kWidth = 800.0;
constexpr double kHeight = 480.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 70.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 50.0;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string px(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '<':
            out += "&lt;";
            break;
        case '>':
            out += "&gt;";
            break;
        case '&':
            out += "&amp;";
            break;
        case '"':
            out += "&quot;";
            break;
        default:
            out += c;
        }
    }
    return out;
}

class Svg {
public:
    Svg(double w, double h) : w_(w), h_(h) {}

    void raw(const std::string& s) { body_ += s + '\n'; }
    void line(double x1, double y1, double x2, double y2, const std::string& stroke, double width = 1.0,
              const std::string& extra = "") {
        raw("<line x1=\"" + px(x1) + "\" y1=\"" + px(y1) + "\" x2=\"" + px(x2) + "\" y2=\"" + px(y2) +
            "\" stroke=\"" + stroke + "\" stroke-width=\"" + px(width) + "\"" + extra + "/>");
    }
    void circle(double x, double y, double r, const std::string& fill) {
        raw("<circle cx=\"" + px(x) + "\" cy=\"" + px(y) + "\" r=\"" + px(r) + "\" fill=\"" + fill + "\"/>");
    }
    void rect(double x, double y, double w, double h, const std::string& fill, const std::string& stroke = "none") {
        raw("<rect x=\"" + px(x) + "\" y=\"" + px(y) + "\" width=\"" + px(w) + "\" height=\"" + px(h) +
            "\" fill=\"" + fill + "\" stroke=\"" + stroke + "\"/>");
    }
    void text(double x, double y, const std::string& s, const std::string& anchor = "start", double size = 12,
              const std::string& extra = "") {
        raw("<text x=\"" + px(x) + "\" y=\"" + px(y) + "\" font-size=\"" + num(size) + "\" text-anchor=\"" + anchor +
            "\"" + extra + ">" + escape(s) + "</text>");
    }
    void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& stroke, double width = 1.5) {
        std::string p;
        for (const auto& [x, y] : pts) {
            p += px(x) + "," + px(y) + " ";
        }
        raw("<polyline fill=\"none\" stroke=\"" + stroke + "\" stroke-width=\"" + px(width) + "\" points=\"" + p +
            "\"/>");
    }

    std::string str() const {
        return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(w_) + "\" height=\"" + num(h_) +
               "\" viewBox=\"0 0 " + num(w_) + " " + num(h_) + "\" font-family=\"sans-serif\">\n<rect width=\"100%\" "
               "height=\"100%\" fill=\"white\"/>\n" +
               body_ + "</svg>\n";
    }

    void save(const fs::path& path) const {
        std::ofstream out(path, std::ios::binary);
        out << str();
        if (!out) {
            throw std::runtime_error("cannot write " + path.string());
        }
    }

private:
    double w_;
    double h_;
    std::string body_;
};

struct Range {
    double lo = 0.0;
    double hi = 1.0;

    void cover(double v) {
        if (!std::isfinite(v)) {
            return;
        }
        if (empty_) {
            lo = hi = v;
            empty_ = false;
        } else {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    void finish() {
        if (empty_) {
            lo = 0.0;
            hi = 1.0;
        } else if (hi - lo <= 0.0) {
            const double pad = lo == 0.0 ? 1.0 : std::abs(lo) * 0.1;
            lo -= pad;
            hi += pad;
        }
    }

private:
    bool empty_ = true;
};

// Plot frame mapping data coordinates into the drawing area.
struct Frame {
    Range x;
    Range y;

    double sx(double v) const { return kLeft + (v - x.lo) / (x.hi - x.lo) * (kWidth - kLeft - kRight); }
    double sy(double v) const { return kHeight - kBottom - (v - y.lo) / (y.hi - y.lo) * (kHeight - kTop - kBottom); }
};

void draw_axes(Svg& svg, const Frame& f, const std::string& title, const std::string& xlabel,
               const std::string& ylabel) {
    svg.text(kWidth / 2, 24, title, "middle", 16);
    svg.line(kLeft, kHeight - kBottom, kWidth - kRight, kHeight - kBottom, "black");
    svg.line(kLeft, kTop, kLeft, kHeight - kBottom, "black");
    for (int i = 0; i <= 5; ++i) {
        const double xv = f.x.lo + (f.x.hi - f.x.lo) * i / 5.0;
        const double yv = f.y.lo + (f.y.hi - f.y.lo) * i / 5.0;
        svg.line(f.sx(xv), kHeight - kBottom, f.sx(xv), kHeight - kBottom + 5, "black");
        svg.text(f.sx(xv), kHeight - kBottom + 18, num(xv), "middle", 10);
        svg.line(kLeft - 5, f.sy(yv), kLeft, f.sy(yv), "black");
        svg.text(kLeft - 8, f.sy(yv) + 4, num(yv), "end", 10);
    }
    svg.text(kWidth / 2, kHeight - 10, xlabel, "middle", 12);
    svg.text(16, kHeight / 2, ylabel, "middle", 12,
             " transform=\"rotate(-90 16 " + px(kHeight / 2) + ")\"");
}

void no_data(Svg& svg, const std::string& what) {
    svg.text(kWidth / 2, kHeight / 2, "no data: " + what, "middle", 16, " class=\"empty\"");
}

struct Series {
    std::string name;
    std::vector<std::pair<double, double>> points;
    bool scatter = false;
};

void plot_series(Svg& svg, const std::string& title, const std::string& xlabel, const std::string& ylabel,
                 const std::vector<Series>& series, const std::string& empty_note) {
    Frame f;
    std::size_t total = 0;
    for (const Series& s : series) {
        for (const auto& [x, y] : s.points) {
            f.x.cover(x);
            f.y.cover(y);
        }
        total += s.points.size();
    }
    f.x.finish();
    f.y.finish();
    draw_axes(svg, f, title, xlabel, ylabel);
    if (total == 0) {
        no_data(svg, empty_note);
        return;
    }
    for (std::size_t i = 0; i < series.size(); ++i) {
        const std::string color = kPalette[i % std::size(kPalette)];
        const Series& s = series[i];
        if (s.scatter) {
            for (const auto& [x, y] : s.points) {
                svg.circle(f.sx(x), f.sy(y), 2.0, color);
            }
        } else {
            std::vector<std::pair<double, double>> pts;
            for (const auto& [x, y] : s.points) {
                if (std::isfinite(y)) {
                    pts.push_back({f.sx(x), f.sy(y)});
                }
            }
            svg.polyline(pts, color);
        }
        svg.rect(kWidth - kRight - 150, kTop + 4 + 16.0 * static_cast<double>(i), 10, 10, color);
        svg.text(kWidth - kRight - 135, kTop + 13 + 16.0 * static_cast<double>(i), s.name, "start", 11);
    }
}

double quantile(const std::vector<double>& sorted, double q) {
    if (sorted.size() == 1) {
        return sorted.front();
    }
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto i = static_cast<std::size_t>(std::floor(pos));
    const double frac = pos - static_cast<double>(i);
    if (i + 1 >= sorted.size()) {
        return sorted.back();
    }
    return sorted[i] + frac * (sorted[i + 1] - sorted[i]);
}

void plot_boxes(Svg& svg, const std::string& title, const std::vector<std::pair<std::string, BoxStats>>& boxes) {
    Frame f;
    f.x.cover(0.0);
    f.x.cover(static_cast<double>(boxes.size()));
    bool any = false;
    for (const auto& [name, b] : boxes) {
        if (b.count > 0) {
            f.y.cover(b.min);
            f.y.cover(b.max);
            any = true;
        }
    }
    f.x.finish();
    f.y.finish();
    svg.text(kWidth / 2, 24, title, "middle", 16);
    svg.line(kLeft, kHeight - kBottom, kWidth - kRight, kHeight - kBottom, "black");
    svg.line(kLeft, kTop, kLeft, kHeight - kBottom, "black");
    for (int i = 0; i <= 5; ++i) {
        const double yv = f.y.lo + (f.y.hi - f.y.lo) * i / 5.0;
        svg.line(kLeft - 5, f.sy(yv), kLeft, f.sy(yv), "black");
        svg.text(kLeft - 8, f.sy(yv) + 4, num(yv), "end", 10);
    }
    svg.text(16, kHeight / 2, "E2E latency [s]", "middle", 12, " transform=\"rotate(-90 16 " + px(kHeight / 2) + ")\"");
    if (!any) {
        no_data(svg, "no delivered packets");
    }
    for (std::size_t i = 0; i < boxes.size(); ++i) {
        const auto& [name, b] = boxes[i];
        const double cx = f.sx(static_cast<double>(i) + 0.5);
        const double half = std::min(40.0, (f.sx(1.0) - f.sx(0.0)) * 0.3);
        svg.text(cx, kHeight - kBottom + 18, name, "middle", 10);
        if (b.count == 0) {
            continue;
        }
        const std::string color = kPalette[i % std::size(kPalette)];
        svg.line(cx, f.sy(b.min), cx, f.sy(b.q1), "black");
        svg.line(cx, f.sy(b.q3), cx, f.sy(b.max), "black");
        svg.line(cx - half / 2, f.sy(b.min), cx + half / 2, f.sy(b.min), "black");
        svg.line(cx - half / 2, f.sy(b.max), cx + half / 2, f.sy(b.max), "black");
        svg.rect(cx - half, f.sy(b.q3), 2 * half, std::max(0.5, f.sy(b.q1) - f.sy(b.q3)), color, "black");
        svg.line(cx - half, f.sy(b.median), cx + half, f.sy(b.median), "black", 2.0);
        svg.circle(cx, f.sy(b.mean), 3.0, "white");
        svg.text(cx, kTop + 12, "n=" + std::to_string(b.count), "middle", 10);
    }
}

// Time bins over [0, t_max]; mean of delivered E2E latency by creation time.
std::vector<std::pair<double, double>> binned_latency(const std::vector<std::pair<double, double>>& samples,
                                                      double bin_s, double t_max) {
    const std::size_t n = static_cast<std::size_t>(std::floor(t_max / bin_s)) + 1;
    std::vector<double> sum(n, 0.0);
    std::vector<std::size_t> cnt(n, 0);
    for (const auto& [t, v] : samples) {
        const auto b = std::min(n - 1, static_cast<std::size_t>(std::max(0.0, std::floor(t / bin_s))));
        sum[b] += v;
        ++cnt[b];
    }
    std::vector<std::pair<double, double>> out;
    for (std::size_t b = 0; b < n; ++b) {
        out.push_back({(static_cast<double>(b) + 0.5) * bin_s,
                       cnt[b] ? sum[b] / static_cast<double>(cnt[b]) : std::numeric_limits<double>::quiet_NaN()});
    }
    return out;
}

double auto_bin(double t_max) {
    if (!(t_max > 0.0)) {
        return 1.0;
    }
    return t_max / 48.0;
}

struct MapNode {
    std::string kind;
    std::string name;
    double lat = 0.0;
    double lon = 0.0;
};

std::vector<MapNode> read_nodes(const fs::path& path) {
    const CsvTable t = read_csv(path);
    const std::size_t ck = t.column("kind");
    const std::size_t cn = t.column("name");
    const std::size_t cla = t.column("lat_deg");
    const std::size_t clo = t.column("lon_deg");
    std::vector<MapNode> nodes;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        nodes.push_back({t.rows[r][ck], t.rows[r][cn], t.number(r, cla), t.number(r, clo)});
    }
    return nodes;
}

double map_x(double lon) { return kLeft + (lon + 180.0) / 360.0 * (kWidth - kLeft - kRight); }
double map_y(double lat) { return kTop + (90.0 - lat) / 180.0 * (kHeight - kTop - kBottom); }

void draw_map_frame(Svg& svg, const std::string& title) {
    svg.text(kWidth / 2, 24, title, "middle", 16);
    svg.rect(map_x(-180), map_y(90), map_x(180) - map_x(-180), map_y(-90) - map_y(90), "#eef4fb", "#888");
    for (int lon = -180; lon <= 180; lon += 60) {
        svg.line(map_x(lon), map_y(90), map_x(lon), map_y(-90), "#ccd", 0.5);
        svg.text(map_x(lon), map_y(-90) + 14, std::to_string(lon), "middle", 9);
    }
    for (int lat = -90; lat <= 90; lat += 30) {
        svg.line(map_x(-180), map_y(lat), map_x(180), map_y(lat), "#ccd", 0.5);
        svg.text(map_x(-180) - 4, map_y(lat) + 3, std::to_string(lat), "end", 9);
    }
}

// Equirectangular segment; links crossing the antimeridian are not drawn.
bool map_segment(const MapNode& a, const MapNode& b, double& x1, double& y1, double& x2, double& y2) {
    if (std::abs(a.lon - b.lon) > 180.0) {
        return false;
    }
    x1 = map_x(a.lon);
    y1 = map_y(a.lat);
    x2 = map_x(b.lon);
    y2 = map_y(b.lat);
    return true;
}

void draw_nodes(Svg& svg, const std::vector<MapNode>& nodes) {
    for (const MapNode& n : nodes) {
        if (n.kind == "satellite") {
            svg.circle(map_x(n.lon), map_y(n.lat), 2.0, "#333");
        }
    }
    for (const MapNode& n : nodes) {
        if (n.kind == "gateway") {
            svg.rect(map_x(n.lon) - 4, map_y(n.lat) - 4, 8, 8, "#d62728", "black");
            svg.text(map_x(n.lon) + 6, map_y(n.lat) - 6, n.name, "start", 9);
        }
    }
}

void chart_map(const fs::path& run, const fs::path& out) {
    const std::vector<MapNode> nodes = read_nodes(run / "nodes.csv");
    const CsvTable edges = read_csv(run / "edges.csv");
    Svg svg(kWidth, kHeight);
    draw_map_frame(svg, "Constellation at t = 0");
    const std::size_t ce = edges.column("epoch");
    const std::size_t ca = edges.column("node_a");
    const std::size_t cb = edges.column("node_b");
    const std::size_t ck = edges.column("kind");
    const std::string first_epoch = edges.rows.empty() ? "" : edges.rows.front()[ce];
    for (std::size_t r = 0; r < edges.rows.size() && edges.rows[r][ce] == first_epoch; ++r) {
        const auto a = static_cast<std::size_t>(edges.integer(r, ca));
        const auto b = static_cast<std::size_t>(edges.integer(r, cb));
        if (a >= nodes.size() || b >= nodes.size()) {
            throw LoadError("edges.csv references an unknown node");
        }
        double x1, y1, x2, y2;
        if (map_segment(nodes[a], nodes[b], x1, y1, x2, y2)) {
            const std::string& kind = edges.rows[r][ck];
            const std::string color = kind == "gsl" ? "#d62728" : kind == "isl_intra" ? "#1f77b4" : "#2ca02c";
            svg.line(x1, y1, x2, y2, color, 0.8, kind == "gsl" ? " stroke-dasharray=\"3,2\"" : "");
        }
    }
    draw_nodes(svg, nodes);
    if (nodes.empty()) {
        no_data(svg, "no nodes");
    }
    svg.save(out);
}

void chart_congestion(const fs::path& run, const fs::path& out) {
    const std::vector<MapNode> nodes = read_nodes(run / "nodes.csv");
    const CsvTable usage = read_csv(run / "link_usage.csv");
    const std::size_t ca = usage.column("node_a");
    const std::size_t cb = usage.column("node_b");
    const std::size_t cp = usage.column("packets");
    long long total = 0;
    long long peak = 0;
    for (std::size_t r = 0; r < usage.rows.size(); ++r) {
        total += usage.integer(r, cp);
        peak = std::max(peak, usage.integer(r, cp));
    }
    Svg svg(kWidth, kHeight);
    draw_map_frame(svg, "Link usage (packets carried per link)");
    svg.raw("<metadata>total_link_packets=" + std::to_string(total) + "</metadata>");
    // Least used first so hot links are drawn on top.
    for (std::size_t i = usage.rows.size(); i-- > 0;) {
        const auto a = static_cast<std::size_t>(usage.integer(i, ca));
        const auto b = static_cast<std::size_t>(usage.integer(i, cb));
        if (a >= nodes.size() || b >= nodes.size()) {
            throw LoadError("link_usage.csv references an unknown node");
        }
        const double frac = peak > 0 ? static_cast<double>(usage.integer(i, cp)) / static_cast<double>(peak) : 0.0;
        const int red = static_cast<int>(std::lround(255 * frac));
        char color[16];
        std::snprintf(color, sizeof color, "#%02x%02x%02x", red, 60, 255 - red);
        double x1, y1, x2, y2;
        if (map_segment(nodes[a], nodes[b], x1, y1, x2, y2)) {
            svg.line(x1, y1, x2, y2, color, 0.5 + 3.5 * frac);
        }
    }
    draw_nodes(svg, nodes);
    svg.text(kLeft, kHeight - 10, "total packet-hops " + std::to_string(total) + ", busiest link " +
                                      std::to_string(peak), "start", 11);
    if (usage.rows.empty()) {
        no_data(svg, "no link carried traffic");
    }
    svg.save(out);
}

void chart_rewards(const fs::path& run, const fs::path& out) {
    const CsvTable t = read_csv(run / "rewards.csv");
    Series s{"reward (window mean)", {}, true};
    const std::size_t ct = t.column("sim_time");
    const std::size_t cr = t.column("reward");
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        s.points.push_back({t.number(r, ct), t.number(r, cr)});
    }
    Svg svg(kWidth, kHeight);
    plot_series(svg, "Reward over time", "simulation time [s]", "reward", {s}, "no rewards recorded");
    svg.save(out);
}

struct LatencySamples {
    std::vector<std::pair<double, double>> by_creation; // (created_s, e2e_s) for delivered packets
    double t_max = 0.0;
};

LatencySamples read_latency(const fs::path& packets) {
    LatencySamples out;
    for_each_packet(packets, [&](const PacketRow& p) {
        out.t_max = std::max(out.t_max, p.created_s);
        if (p.delivered()) {
            out.by_creation.push_back({p.created_s, p.e2e_s()});
        }
    });
    return out;
}

void chart_latency_time(const LatencySamples& lat, const fs::path& out) {
    Series s{"mean E2E latency", binned_latency(lat.by_creation, auto_bin(lat.t_max), lat.t_max), false};
    if (lat.by_creation.empty()) {
        s.points.clear();
    }
    Svg svg(kWidth, kHeight);
    plot_series(svg, "E2E latency over time", "creation time [s]", "mean E2E latency [s]", {s},
                "no delivered packets");
    svg.save(out);
}

void chart_latency_epsilon(const LatencySamples& lat, const fs::path& run, const fs::path& out) {
    Series s{"mean E2E latency [s]", binned_latency(lat.by_creation, auto_bin(lat.t_max), lat.t_max), false};
    if (lat.by_creation.empty()) {
        s.points.clear();
    }
    Svg svg(kWidth, kHeight);
    plot_series(svg, "E2E latency and exploration rate over time", "simulation time [s]", "mean E2E latency [s]", {s},
                "no delivered packets");
    // Epsilon on a fixed [0, 1] right-hand axis.
    if (fs::exists(run / "epsilon.csv")) {
        const CsvTable t = read_csv(run / "epsilon.csv");
        const std::size_t ct = t.column("sim_time");
        const std::size_t ce = t.column("epsilon");
        Frame f;
        f.x.cover(0.0);
        f.x.cover(lat.t_max);
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            f.x.cover(t.number(r, ct));
        }
        f.x.finish();
        f.y.lo = 0.0;
        f.y.hi = 1.0;
        std::vector<std::pair<double, double>> pts;
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            pts.push_back({f.sx(t.number(r, ct)), f.sy(t.number(r, ce))});
        }
        svg.polyline(pts, "#ff7f0e");
        svg.line(kWidth - kRight, kTop, kWidth - kRight, kHeight - kBottom, "#ff7f0e");
        for (int i = 0; i <= 5; ++i) {
            svg.text(kWidth - kRight + 6, f.sy(i / 5.0) + 4, num(i / 5.0), "start", 10);
        }
        svg.text(kWidth - 14, kHeight / 2, "epsilon", "middle", 12,
                 " transform=\"rotate(90 " + px(kWidth - 14) + " " + px(kHeight / 2) + ")\"");
    } else {
        svg.text(kWidth - kRight, kTop + 40, "epsilon: not applicable (non-learning policy)", "end", 11);
    }
    svg.save(out);
}

void chart_latency_box(const LatencySamples& lat, const fs::path& out, const std::string& label) {
    std::vector<double> v;
    v.reserve(lat.by_creation.size());
    for (const auto& [t, e2e] : lat.by_creation) {
        v.push_back(e2e);
    }
    Svg svg(kWidth, kHeight);
    plot_boxes(svg, "E2E latency distribution", {{label, box_stats(std::move(v))}});
    svg.save(out);
}

std::string run_label(const fs::path& run) {
    const fs::path manifest = run / "manifest.json";
    if (fs::exists(manifest)) {
        try {
            const auto j = nlohmann::json::parse(read_text_file(manifest));
            return j.at("config").at("routing").at("policy").get<std::string>() + "/" +
                   j.at("config").at("routing").at("scheme").get<std::string>();
        } catch (const std::exception&) {
        }
    }
    return run.filename().string();
}

} // namespace

void for_each_packet(const fs::path& path, const std::function<void(const PacketRow&)>& fn) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw LoadError("cannot read " + path.string());
    }
    std::string line;
    bool header = false;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') {
            continue;
        }
        if (!header) {
            if (line != "packet_id,src,dst,created_at,delivered_at,hops,queue_s,tx_s,prop_s,status") {
                throw LoadError(path.string() + ": unexpected header");
            }
            header = true;
            continue;
        }
        const auto f = split(line, ',');
        if (f.size() != 10) {
            throw LoadError(path.string() + ":" + std::to_string(lineno) + ": expected 10 fields");
        }
        auto d = [&](std::size_t i) {
            const std::string s(f[i]);
            char* end = nullptr;
            const double v = std::strtod(s.c_str(), &end);
            if (s.empty() || *end != '\0') {
                throw LoadError(path.string() + ":" + std::to_string(lineno) + ": bad number '" + s + "'");
            }
            return v;
        };
        PacketRow p;
        p.id = static_cast<long long>(d(0));
        p.src = static_cast<int>(d(1));
        p.dst = static_cast<int>(d(2));
        p.created_s = d(3);
        p.delivered_s = f[4].empty() ? -1.0 : d(4);
        p.hops = static_cast<int>(d(5));
        p.queue_s = d(6);
        p.tx_s = d(7);
        p.prop_s = d(8);
        p.status = std::string(f[9]);
        fn(p);
    }
    if (!header) {
        throw LoadError(path.string() + ": missing header");
    }
}

BoxStats box_stats(std::vector<double> values) {
    BoxStats b;
    b.count = values.size();
    if (values.empty()) {
        return b;
    }
    std::sort(values.begin(), values.end());
    b.min = values.front();
    b.max = values.back();
    b.q1 = quantile(values, 0.25);
    b.median = quantile(values, 0.5);
    b.q3 = quantile(values, 0.75);
    double sum = 0.0;
    for (double v : values) {
        sum += v;
    }
    b.mean = sum / static_cast<double>(values.size());
    return b;
}

ChartReport render_charts(const fs::path& run_dir, const fs::path& out_dir, const std::string& label) {
    fs::create_directories(out_dir);
    ChartReport report;
    // Reasons are stored relative to the run directory so that artifacts do
    // not depend on where the run was written.
    const std::string prefix = run_dir.string() + "/";
    auto relative_reason = [&](std::string reason) {
        for (auto at = reason.find(prefix); at != std::string::npos; at = reason.find(prefix)) {
            reason.erase(at, prefix.size());
        }
        return reason;
    };
    auto attempt = [&](const std::string& name, const std::function<void(const fs::path&)>& draw) {
        try {
            draw(out_dir / (name + ".svg"));
            report.written.push_back(name + ".svg");
        } catch (const std::exception& e) {
            report.failures[name] = relative_reason(e.what());
        }
    };
    attempt("map", [&](const fs::path& p) { chart_map(run_dir, p); });
    attempt("congestion", [&](const fs::path& p) { chart_congestion(run_dir, p); });
    attempt("rewards", [&](const fs::path& p) { chart_rewards(run_dir, p); });

    std::optional<LatencySamples> lat;
    std::string lat_error;
    try {
        lat = read_latency(run_dir / "packets.csv");
    } catch (const std::exception& e) {
        lat_error = relative_reason(e.what());
    }
    auto with_latency = [&](const std::string& name, const std::function<void(const fs::path&)>& draw) {
        if (!lat) {
            report.failures[name] = lat_error;
            return;
        }
        attempt(name, draw);
    };
    with_latency("latency_epsilon", [&](const fs::path& p) { chart_latency_epsilon(*lat, run_dir, p); });
    with_latency("latency_time", [&](const fs::path& p) { chart_latency_time(*lat, p); });
    with_latency("latency_box", [&](const fs::path& p) { chart_latency_box(*lat, p, label.empty() ? run_label(run_dir) : label); });
    return report;
}

std::vector<CompareBin> compare_runs(const std::vector<fs::path>& runs, const fs::path& out_dir, double bin_s) {
    if (runs.size() < 2) {
        throw ConfigError("runs", "compare needs at least two run directories");
    }
    if (!(bin_s > 0.0)) {
        throw ConfigError("bin_s", "must be > 0");
    }
    std::vector<nlohmann::json> prints;
    for (const fs::path& r : runs) {
        try {
            prints.push_back(nlohmann::json::parse(read_text_file(r / "manifest.json")).at("fingerprint"));
        } catch (const std::exception& e) {
            throw ConfigError("runs", r.string() + ": no readable manifest fingerprint (" + e.what() + ")");
        }
    }
    for (std::size_t i = 1; i < runs.size(); ++i) {
        const nlohmann::json diff = nlohmann::json::diff(prints[0], prints[i]);
        if (!diff.empty()) {
            std::string fields;
            for (const auto& d : diff) {
                fields += (fields.empty() ? "" : ", ") + d.at("path").get<std::string>();
            }
            throw ConfigError("runs", "incompatible scenarios " + runs[0].string() + " and " + runs[i].string() +
                                          " differ in: " + fields);
        }
    }
    const double duration = prints[0].at("duration_s").get<double>();
    const std::size_t nbins = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(duration / bin_s)));

    std::vector<CompareBin> bins(nbins);
    for (std::size_t b = 0; b < nbins; ++b) {
        bins[b].start_s = static_cast<double>(b) * bin_s;
        bins[b].mean_e2e_s.assign(runs.size(), 0.0);
        bins[b].count.assign(runs.size(), 0);
    }
    std::vector<std::pair<std::string, BoxStats>> boxes;
    for (std::size_t r = 0; r < runs.size(); ++r) {
        std::vector<double> all;
        for_each_packet(runs[r] / "packets.csv", [&](const PacketRow& p) {
            if (!p.delivered()) {
                return;
            }
            const auto b = std::min(nbins - 1, static_cast<std::size_t>(std::floor(p.created_s / bin_s)));
            bins[b].mean_e2e_s[r] += p.e2e_s();
            ++bins[b].count[r];
            all.push_back(p.e2e_s());
        });
        boxes.push_back({std::to_string(r) + ":" + run_label(runs[r]), box_stats(std::move(all))});
    }
    for (CompareBin& b : bins) {
        for (std::size_t r = 0; r < runs.size(); ++r) {
            b.mean_e2e_s[r] = b.count[r] ? b.mean_e2e_s[r] / static_cast<double>(b.count[r])
                                         : std::numeric_limits<double>::quiet_NaN();
        }
    }

    fs::create_directories(out_dir);
    std::ostringstream csv;
    csv << "bin_start_s,run_index,run,count,mean_e2e_s\n";
    for (const CompareBin& b : bins) {
        for (std::size_t r = 0; r < runs.size(); ++r) {
            csv << format_double(b.start_s) << ',' << r << ',' << runs[r].string() << ',' << b.count[r] << ','
                << (b.count[r] ? format_double(b.mean_e2e_s[r]) : "") << '\n';
        }
    }
    std::ofstream(out_dir / "compare.csv", std::ios::binary) << csv.str();

    std::vector<Series> series;
    for (std::size_t r = 0; r < runs.size(); ++r) {
        Series s{boxes[r].first, {}, false};
        for (const CompareBin& b : bins) {
            if (b.count[r]) {
                s.points.push_back({b.start_s + bin_s / 2, b.mean_e2e_s[r]});
            }
        }
        series.push_back(std::move(s));
    }
    Svg overlay(kWidth, kHeight);
    plot_series(overlay, "Mean E2E latency over time", "creation time [s]", "mean E2E latency [s]", series,
                "no delivered packets");
    overlay.save(out_dir / "compare_latency.svg");
    Svg box(kWidth, kHeight);
    plot_boxes(box, "E2E latency by run", boxes);
    box.save(out_dir / "compare_box.svg");
    return bins;
}

} // namespace leosim
