#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "ft/error.hpp"
#include "ft/plots.hpp"
#include "test_util.hpp"

using namespace ft;

namespace {

PlotRecord plot(std::string id, double x, double y, double h,
                std::optional<double> vol = std::nullopt) {
    PlotRecord p;
    p.plot_id = std::move(id);
    p.x = x;
    p.y = y;
    p.height_m = h;
    p.volume_m3ha = vol;
    return p;
}

PlotTable numbered(int n) {
    PlotTable t;
    for (int i = 0; i < n; ++i) {
        char id[16];
        std::snprintf(id, sizeof id, "p%05d", i + 1);
        t.push_back(plot(id, 5.0 + 10.0 * i, 5.0, 10.0 + 0.01 * i));
    }
    return t;
}

} // namespace

TEST_SUITE("plots") {

TEST_CASE("csv round-trip, optional volume included") {
    ft_test::TempDir tmp("plots_rt");
    PlotTable t;
    t.push_back(plot("a1", 15.0, 25.0, 12.34));
    t.push_back(plot("a2", 35.0, 45.0, 7.5, 180.25));
    t[0].radius_m = 5.64;
    t[1].radius_m = 12.62;
    save_plots(t, tmp / "plots.csv");
    const PlotTable r = load_plots(tmp / "plots.csv");
    REQUIRE(r.size() == 2);
    CHECK(r[0].plot_id == "a1");
    CHECK(r[0].x == 15.0);
    CHECK(r[0].y == 25.0);
    CHECK(r[0].radius_m == 5.64);
    CHECK(r[0].height_m == 12.34);
    CHECK(!r[0].volume_m3ha.has_value());
    CHECK(r[1].volume_m3ha == 180.25);
}

TEST_CASE("loading a missing or headerless file fails") {
    ft_test::TempDir tmp("plots_err");
    CHECK_THROWS_AS(load_plots(tmp / "none.csv"), DataError);
    std::ofstream raw(tmp.path() / "bad.csv");
    raw << "1,2,3\n";
    raw.close();
    CHECK_THROWS_AS(load_plots(tmp / "bad.csv"), DataError);
}

TEST_CASE("rasterize burns center pixels and rejects collisions") {
    RasterGrid grid{4, 4, 1, 10.0, 0.0, 40.0};
    PlotTable t;
    t.push_back(plot("a", 15.0, 35.0, 11.0));  // pixel (0,1)
    t.push_back(plot("b", 35.0, 5.0, 22.0));   // pixel (3,3)
    const SparseLabelRaster l = rasterize_plots(t, grid);
    CHECK(l.valid_count() == 2);
    CHECK(l.valid_at(0, 1));
    CHECK(l.value_at(0, 1) == 11.0f);
    CHECK(l.valid_at(3, 3));
    CHECK(l.value_at(3, 3) == 22.0f);

    t.push_back(plot("c", 16.0, 34.0, 9.0));  // same pixel as "a"
    CHECK_THROWS_AS(rasterize_plots(t, grid), DataError);

    PlotTable outside;
    outside.push_back(plot("d", -5.0, 5.0, 9.0));
    CHECK_THROWS_AS(rasterize_plots(outside, grid), DataError);
}

TEST_CASE("split attribute: volume only when every plot has one") {
    PlotTable t;
    t.push_back(plot("a", 0, 0, 10.0, 100.0));
    t.push_back(plot("b", 0, 0, 11.0, 120.0));
    CHECK(choose_split_attribute(t) == SortAttribute::volume);
    t.push_back(plot("c", 0, 0, 12.0));
    CHECK(choose_split_attribute(t) == SortAttribute::height);
}

TEST_CASE("systematic split: every third sorted plot goes to test") {
    // Six plots with heights out of order; sorted order is f,e,d,c,b,a.
    PlotTable t;
    t.push_back(plot("a", 0, 0, 16.0));
    t.push_back(plot("b", 0, 0, 15.0));
    t.push_back(plot("c", 0, 0, 14.0));
    t.push_back(plot("d", 0, 0, 13.0));
    t.push_back(plot("e", 0, 0, 12.0));
    t.push_back(plot("f", 0, 0, 11.0));
    const PlotSplit s = split_plots_by_attribute(t, SortAttribute::height);
    REQUIRE(s.test.size() == 2);
    REQUIRE(s.train.size() == 4);
    CHECK(s.test[0].plot_id == "f");  // rank 0
    CHECK(s.test[1].plot_id == "c");  // rank 3
    std::set<std::string> train_ids;
    for (const auto& p : s.train) train_ids.insert(p.plot_id);
    CHECK(train_ids == std::set<std::string>{"a", "b", "d", "e"});
}

TEST_CASE("split ties break by plot_id") {
    PlotTable t;
    t.push_back(plot("z", 0, 0, 10.0));
    t.push_back(plot("a", 0, 0, 10.0));
    t.push_back(plot("m", 0, 0, 10.0));
    const PlotSplit s = split_plots_by_attribute(t, SortAttribute::height);
    REQUIRE(s.test.size() == 1);
    CHECK(s.test[0].plot_id == "a");  // first in (height, id) order
}

TEST_CASE("1064 plots split 355 test / 709 train") {
    const PlotTable t = numbered(1064);
    const PlotSplit s = split_plots_by_attribute(t, SortAttribute::height);
    CHECK(s.test.size() == 355);
    CHECK(s.train.size() == 709);
}

TEST_CASE("split by volume uses the volume ordering") {
    PlotTable t;
    t.push_back(plot("a", 0, 0, 10.0, 300.0));
    t.push_back(plot("b", 0, 0, 20.0, 200.0));
    t.push_back(plot("c", 0, 0, 30.0, 100.0));
    const PlotSplit s = split_plots_by_attribute(t, SortAttribute::volume);
    REQUIRE(s.test.size() == 1);
    CHECK(s.test[0].plot_id == "c");  // smallest volume, despite largest height

    t[0].volume_m3ha.reset();
    CHECK_THROWS_AS(split_plots_by_attribute(t, SortAttribute::volume), DataError);
}

} // TEST_SUITE
