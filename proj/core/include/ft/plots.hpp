#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ft/grid.hpp"
#include "ft/raster.hpp"

namespace ft {

// Plot CSV format (UTF-8, header row required):
//   plot_id,x,y,radius_m,height_m,volume_m3ha
// volume_m3ha may be empty. x/y are the plot center in grid coordinates.

/// One circular field plot. The canonical radii are 5.64, 9.0 and 12.62 m but
/// any positive radius is tolerated on load (with a warning).
struct PlotRecord {
    std::string plot_id;
    double x = 0.0;
    double y = 0.0;
    double radius_m = 9.0;
    double height_m = 0.0;                  // reference height y_i
    std::optional<double> volume_m3ha;      // split-sorting attribute, optional
};

using PlotTable = std::vector<PlotRecord>;

PlotTable load_plots(const std::filesystem::path& path);
void save_plots(const PlotTable& plots, const std::filesystem::path& path);

/// Burns each plot into the pixel containing its center: that pixel becomes
/// valid with value = plot height, all others stay invalid. Two plots in one
/// pixel are an ambiguous label and an error, as is a center outside the grid.
SparseLabelRaster rasterize_plots(const PlotTable& plots, const RasterGrid& grid);

enum class SortAttribute { height, volume };

/// volume when every record carries one, else height.
SortAttribute choose_split_attribute(const PlotTable& plots);

struct PlotSplit {
    PlotTable train;
    PlotTable test;
};

/// Sorts ascending by the attribute (ties by plot_id) and sends every third
/// plot, starting from the first sorted element, to the test set. 1064 plots
/// split 355 test / 709 train.
PlotSplit split_plots_by_attribute(const PlotTable& plots, SortAttribute attribute);

} // namespace ft
