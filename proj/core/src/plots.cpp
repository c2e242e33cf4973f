#include "ft/plots.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <unordered_set>

#include "ft/error.hpp"

namespace ft {

namespace {

constexpr const char* kHeader = "plot_id,x,y,radius_m,height_m,volume_m3ha";

double parse_number(const std::string& field, const std::string& what, std::size_t line_no) {
    double value = 0.0;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last)
        throw DataError("plots CSV line " + std::to_string(line_no) + ": non-numeric " + what + " '" +
                        field + "'");
    return value;
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

bool is_canonical_radius(double r) {
    return r == 5.64 || r == 9.0 || r == 12.62;
}

} // namespace

PlotTable load_plots(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open plots CSV: " + path.string());

    std::string line;
    if (!std::getline(in, line)) throw DataError("empty plots CSV: " + path.string());
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kHeader)
        throw DataError("plots CSV header must be '" + std::string(kHeader) + "', got '" + line + "'");

    PlotTable plots;
    std::unordered_set<std::string> seen_ids;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_fields(line);
        if (fields.size() != 6)
            throw DataError("plots CSV line " + std::to_string(line_no) + ": expected 6 fields, got " +
                            std::to_string(fields.size()));
        PlotRecord rec;
        rec.plot_id = fields[0];
        if (rec.plot_id.empty())
            throw DataError("plots CSV line " + std::to_string(line_no) + ": empty plot_id");
        if (!seen_ids.insert(rec.plot_id).second)
            throw DataError("plots CSV: duplicate plot_id '" + rec.plot_id + "'");
        rec.x = parse_number(fields[1], "x", line_no);
        rec.y = parse_number(fields[2], "y", line_no);
        rec.radius_m = parse_number(fields[3], "radius_m", line_no);
        if (!(rec.radius_m > 0.0))
            throw DataError("plots CSV line " + std::to_string(line_no) + ": radius must be positive");
        if (!is_canonical_radius(rec.radius_m))
            std::cerr << "warning: plot '" << rec.plot_id << "' has non-standard radius " << rec.radius_m
                      << " m\n";
        rec.height_m = parse_number(fields[4], "height_m", line_no);
        if (rec.height_m < 0.0)
            throw DataError("plots CSV line " + std::to_string(line_no) + ": height must be >= 0");
        if (!fields[5].empty()) rec.volume_m3ha = parse_number(fields[5], "volume_m3ha", line_no);
        plots.push_back(std::move(rec));
    }
    return plots;
}

void save_plots(const PlotTable& plots, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open for writing: " + path.string());
    out << kHeader << '\n';
    for (const auto& p : plots) {
        out << p.plot_id << ',' << format_double(p.x) << ',' << format_double(p.y) << ','
            << format_double(p.radius_m) << ',' << format_double(p.height_m) << ',';
        if (p.volume_m3ha) out << format_double(*p.volume_m3ha);
        out << '\n';
    }
    if (!out) throw DataError("write failed: " + path.string());
}

SparseLabelRaster rasterize_plots(const PlotTable& plots, const RasterGrid& grid) {
    grid.validate();
    SparseLabelRaster out;
    out.grid = grid;
    out.grid.bands = 1;
    out.values.assign(grid.pixel_count(), std::numeric_limits<float>::quiet_NaN());
    out.valid.assign(grid.pixel_count(), 0);

    std::vector<std::string> owner(grid.pixel_count());
    for (const auto& p : plots) {
        const auto px = grid.world_to_pixel(p.x, p.y);
        if (!px)
            throw DataError("plot '" + p.plot_id + "' lies outside the grid extent");
        const std::size_t idx = static_cast<std::size_t>(px->row) * grid.width + px->col;
        if (out.valid[idx])
            throw DataError("plots '" + owner[idx] + "' and '" + p.plot_id +
                            "' map to the same pixel (ambiguous label)");
        out.values[idx] = static_cast<float>(p.height_m);
        out.valid[idx] = 1;
        owner[idx] = p.plot_id;
    }
    return out;
}

SortAttribute choose_split_attribute(const PlotTable& plots) {
    const bool all_volume =
        !plots.empty() && std::all_of(plots.begin(), plots.end(),
                                      [](const PlotRecord& p) { return p.volume_m3ha.has_value(); });
    return all_volume ? SortAttribute::volume : SortAttribute::height;
}

PlotSplit split_plots_by_attribute(const PlotTable& plots, SortAttribute attribute) {
    if (plots.empty()) throw DataError("split_plots_by_attribute: empty plot table");
    std::vector<std::size_t> order(plots.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    auto key = [&](std::size_t i) -> double {
        if (attribute == SortAttribute::volume) {
            if (!plots[i].volume_m3ha)
                throw DataError("split_plots_by_attribute: plot '" + plots[i].plot_id +
                                "' has no volume attribute");
            return *plots[i].volume_m3ha;
        }
        return plots[i].height_m;
    };
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double ka = key(a), kb = key(b);
        if (ka != kb) return ka < kb;
        return plots[a].plot_id < plots[b].plot_id;
    });

    PlotSplit split;
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
        if (rank % 3 == 0)
            split.test.push_back(plots[order[rank]]);
        else
            split.train.push_back(plots[order[rank]]);
    }
    return split;
}

} // namespace ft
