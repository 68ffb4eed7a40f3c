#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <random>

#include "agaze/features.hpp"
#include "agaze/image_io.hpp"
#include "test_util.hpp"

using namespace agaze;

namespace {

constexpr double kPi = 3.14159265358979323846;

ScalarMap analytic_field(int w, int h, int dx) {
    ScalarMap m(w, h, ScalarMap::Kind::Normalized);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double u = x - dx;
            m.at(x, y) = 0.5 + 0.25 * std::sin(2.0 * kPi * u / 7.0) * std::cos(2.0 * kPi * y / 9.0) +
                         0.15 * std::sin(2.0 * kPi * (u + y) / 11.0);
        }
    return m;
}

ImageRgb8 gradient_image(int w, int h) {
    ImageRgb8 img(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            auto* p = img.px(x, y);
            p[0] = static_cast<std::uint8_t>(255 * x / std::max(1, w - 1));
            p[1] = static_cast<std::uint8_t>(255 * y / std::max(1, h - 1));
            p[2] = static_cast<std::uint8_t>((x * 7 + y * 13) % 256);
        }
    return img;
}

double mean_of(const ScalarMap& m) { return m.sum() / static_cast<double>(m.size()); }

}  // namespace

TEST_CASE("bilinear resize basics") {
    std::mt19937_64 rng(5);
    const auto src = testutil::random_map(9, 7, rng);
    SECTION("identity size returns the input values") {
        const auto out = resize_bilinear(src, 9, 7);
        CHECK(out.values == src.values);
    }
    SECTION("constant input stays constant at any size") {
        ScalarMap c(6, 4, ScalarMap::Kind::Normalized);
        std::fill(c.values.begin(), c.values.end(), 0.37);
        for (auto [w, h] : {std::pair{12, 8}, {3, 2}, {17, 5}}) {
            const auto out = resize_bilinear(c, w, h);
            for (double v : out.values) REQUIRE(v == Catch::Approx(0.37).margin(1e-12));
        }
    }
    SECTION("interpolation never leaves the source range") {
        const auto out = resize_bilinear(src, 23, 17);
        for (double v : out.values) {
            REQUIRE(v >= src.min_value() - 1e-12);
            REQUIRE(v <= src.max_value() + 1e-12);
        }
    }
    SECTION("bad target size throws") {
        CHECK_THROWS_AS(resize_bilinear(src, 0, 5), ArgumentError);
    }
}

TEST_CASE("working size caps the long side") {
    int w = 0, h = 0;
    working_size(320, 240, w, h);
    CHECK(w == 320);
    CHECK(h == 240);
    working_size(100, 50, w, h);
    CHECK(w == 100);
    CHECK(h == 50);
    working_size(640, 480, w, h);
    CHECK(w == 320);
    CHECK(h == 240);
    working_size(480, 640, w, h);
    CHECK(w == 240);
    CHECK(h == 320);
    working_size(1000, 10, w, h);
    CHECK(w == 320);
    CHECK(h == 3);
}

TEST_CASE("pyramid halves per level and stops before vanishing") {
    std::mt19937_64 rng(11);
    const auto base = testutil::random_map(40, 30, rng);
    const auto levels = gaussian_pyramid(base, 3);
    REQUIRE(levels.size() == 3);
    CHECK(levels[0].width == 40);
    CHECK(levels[0].values == base.values);  // level 0 is the input itself
    CHECK(levels[1].width == 20);
    CHECK(levels[1].height == 15);
    CHECK(levels[2].width == 10);
    CHECK(levels[2].height == 8);

    const auto tiny = gaussian_pyramid(testutil::random_map(4, 4, rng), 5);
    REQUIRE(tiny.size() == 3);  // 4x4 -> 2x2 -> 1x1, then stop
    CHECK(tiny[2].width == 1);
    CHECK_THROWS_AS(gaussian_pyramid(base, 0), ArgumentError);
}

TEST_CASE("gabor kernels have the quadrature structure") {
    for (double theta : {0.0, 45.0, 90.0, 135.0}) {
        const auto g = make_gabor(theta);
        CHECK(g.radius == 6);
        const int n = 2 * g.radius + 1;
        CHECK(std::abs(std::accumulate(g.even.begin(), g.even.end(), 0.0)) < 1e-12);
        CHECK(std::abs(std::accumulate(g.odd.begin(), g.odd.end(), 0.0)) < 1e-12);
        // odd part flips sign through the origin
        for (int y = -g.radius; y <= g.radius; ++y)
            for (int x = -g.radius; x <= g.radius; ++x) {
                const std::size_t i = static_cast<std::size_t>(y + g.radius) * n + (x + g.radius);
                const std::size_t j = static_cast<std::size_t>(-y + g.radius) * n + (-x + g.radius);
                REQUIRE(g.odd[i] == Catch::Approx(-g.odd[j]).margin(1e-15));
                REQUIRE(g.even[i] == Catch::Approx(g.even[j]).margin(1e-15));
            }
    }
}

TEST_CASE("a row-wise grating excites the matching orientation band") {
    ScalarMap grating(40, 40, ScalarMap::Kind::Normalized);
    for (int y = 0; y < 40; ++y)
        for (int x = 0; x < 40; ++x)
            grating.at(x, y) = 0.5 + 0.4 * std::sin(2.0 * kPi * y / 5.0);

    std::array<double, 4> mean_energy{};
    const std::array<double, 4> thetas = {0.0, 45.0, 90.0, 135.0};
    for (int k = 0; k < 4; ++k)
        mean_energy[k] = mean_of(orientation_energy(grating, make_gabor(thetas[k])));

    CHECK(mean_energy[2] > 2.0 * mean_energy[0]);
    CHECK(mean_energy[2] > 2.0 * mean_energy[1]);
    CHECK(mean_energy[2] > 2.0 * mean_energy[3]);
}

TEST_CASE("a flat field has no orientation energy") {
    ScalarMap flat(24, 24, ScalarMap::Kind::Normalized);
    std::fill(flat.values.begin(), flat.values.end(), 0.6);
    for (double theta : {0.0, 45.0, 90.0, 135.0}) {
        const auto e = orientation_energy(flat, make_gabor(theta));
        CHECK(e.max_value() < 1e-20);
    }
}

TEST_CASE("orientation energy shifts with the stimulus") {
    const int w = 64, h = 48, shift = 3;
    const auto a = analytic_field(w, h, 0);
    const auto b = analytic_field(w, h, shift);
    const auto gabor = make_gabor(45.0);
    const auto ea = orientation_energy(a, gabor);
    const auto eb = orientation_energy(b, gabor);
    const double scale = ea.max_value();
    REQUIRE(scale > 0.0);
    const int margin = 16;
    for (int y = margin; y < h - margin; ++y)
        for (int x = margin; x < w - margin - shift; ++x)
            REQUIRE(std::abs(eb.at(x + shift, y) - ea.at(x, y)) < 1e-3 * scale);
}

TEST_CASE("center-surround contrast") {
    SECTION("vanishes on a constant field away from the borders") {
        // the mass-preserving smoother reshapes constants near borders; one
        // surround-kernel radius in, both blurs reproduce the constant exactly
        ScalarMap c(80, 60, ScalarMap::Kind::Normalized);
        std::fill(c.values.begin(), c.values.end(), 0.8);
        const auto out = center_surround(c, 1.0, 3.0);
        // two surround radii in: every contributing source has full support
        const int m = 2 * 12;  // 2 * ceil(4 * surround sigma)
        double interior_max = 0.0;
        for (int y = m; y < 60 - m; ++y)
            for (int x = m; x < 80 - m; ++x)
                interior_max = std::max(interior_max, out.at(x, y));
        CHECK(interior_max < 1e-9);
    }
    SECTION("lights up around an isolated spot") {
        ScalarMap m(41, 41, ScalarMap::Kind::Normalized);
        m.at(20, 20) = 1.0;
        const auto out = center_surround(m, 2.0, 8.0);
        CHECK(out.argmax() == static_cast<std::size_t>(20) * 41 + 20);
        CHECK(out.max_value() > 0.0);
    }
    SECTION("surround must be wider than center") {
        ScalarMap m(8, 8, ScalarMap::Kind::Normalized);
        CHECK_THROWS_AS(center_surround(m, 4.0, 4.0), ArgumentError);
    }
}

TEST_CASE("row band profile integrates to one") {
    for (int h : {5, 17, 64}) {
        const auto p = vertical_gaussian_band(h, h / 3.0, 2.5);
        CHECK(std::accumulate(p.begin(), p.end(), 0.0) == Catch::Approx(1.0).margin(1e-12));
    }
    CHECK_THROWS_AS(vertical_gaussian_band(10, 2.0, 0.0), ArgumentError);
}

TEST_CASE("horizon band locks onto the strongest horizontal edge") {
    const int w = 30, h = 40, split = 25;
    ScalarMap two_tone(w, h, ScalarMap::Kind::Normalized);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) two_tone.at(x, y) = y < split ? 0.2 : 0.8;
    const auto band = horizon_channel(two_tone);
    CHECK_FALSE(band.degenerate);
    CHECK(static_cast<int>(band.argmax() / w) == split);
    // every column carries the same profile
    for (int y = 0; y < h; ++y) REQUIRE(band.at(0, y) == band.at(w - 1, y));
}

TEST_CASE("horizon on a flat image falls back to the middle row") {
    ScalarMap flat(16, 21, ScalarMap::Kind::Normalized);
    std::fill(flat.values.begin(), flat.values.end(), 0.5);
    const auto band = horizon_channel(flat);
    CHECK(band.degenerate);
    CHECK(static_cast<int>(band.argmax() / 16) == 10);
}

TEST_CASE("center prior peaks at the image center with 4-fold symmetry") {
    const int w = 21, h = 17;
    const auto m = center_prior_channel(w, h);
    CHECK(m.at(10, 8) == 1.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            REQUIRE(m.at(x, y) == Catch::Approx(m.at(w - 1 - x, y)).margin(1e-14));
            REQUIRE(m.at(x, y) == Catch::Approx(m.at(x, h - 1 - y)).margin(1e-14));
        }
    const double sigma = std::min(w, h) / 4.0;
    const double corner = std::exp(-(10.0 * 10.0 + 8.0 * 8.0) / (2.0 * sigma * sigma));
    CHECK(m.at(0, 0) == Catch::Approx(corner).margin(1e-14));
}

TEST_CASE("depth splits into complementary near and far channels") {
    SECTION("constant depth splits its mass between the two channels") {
        ScalarMap d(40, 30, ScalarMap::Kind::Normalized);
        std::fill(d.values.begin(), d.values.end(), 0.3);
        const auto [near_map, far_map] = depth_channels(d);
        const double n = static_cast<double>(d.size());
        CHECK(near_map.sum() == Catch::Approx(0.7 * n).margin(1e-6));
        CHECK(far_map.sum() == Catch::Approx(0.3 * n).margin(1e-6));
        // away from the borders the smoothed constant keeps its value
        CHECK(near_map.at(20, 15) == Catch::Approx(0.7).margin(1e-9));
        CHECK(far_map.at(20, 15) == Catch::Approx(0.3).margin(1e-9));
    }
    SECTION("two planes put their peaks on opposite sides") {
        ScalarMap d(40, 20, ScalarMap::Kind::Normalized);
        for (int y = 0; y < 20; ++y)
            for (int x = 0; x < 40; ++x) d.at(x, y) = x < 20 ? 0.1 : 0.9;
        const auto [near_map, far_map] = depth_channels(d);
        CHECK(static_cast<int>(near_map.argmax() % 40) < 20);
        CHECK(static_cast<int>(far_map.argmax() % 40) >= 20);
    }
    SECTION("values outside [0,1] are rejected") {
        ScalarMap d(4, 4, ScalarMap::Kind::Normalized);
        d.values[5] = 1.2;
        CHECK_THROWS_AS(depth_channels(d), ArgumentError);
    }
}

TEST_CASE("default channel manifest composition") {
    const auto m = default_manifest();
    CHECK(m.channels.size() == 23);  // 12 orientation + 9 contrast + 2 scale-free
    ManifestOptions with_depth;
    with_depth.depth = true;
    CHECK(default_manifest(with_depth).channels.size() == 25);

    int n_free = 0;
    for (const auto& c : m.channels)
        if (c.scale == 0) ++n_free;
    CHECK(n_free == 2);
}

TEST_CASE("scale selection filters tagged channels and keeps free ones") {
    ChannelManifest m;
    for (int s = 1; s <= 3; ++s)
        for (int k = 0; k < 4; ++k)
            m.channels.push_back({"band" + std::to_string(s) + "_" + std::to_string(k), s});
    for (int k = 0; k < 4; ++k) m.channels.push_back({"free" + std::to_string(k), 0});
    REQUIRE(m.channels.size() == 16);

    const auto kept = m.filtered(ScaleSelection{{3}});
    CHECK(kept.channels.size() == 8);
    for (const auto& c : kept.channels) CHECK((c.scale == 0 || c.scale == 3));

    CHECK(m.filtered(ScaleSelection::all()).channels.size() == 16);
    CHECK(m.filtered(ScaleSelection{{2, 3}}).channels.size() == 12);
}

TEST_CASE("group scale policies") {
    CHECK(ScaleSelection::for_group(AgeGroup::Children).scales == std::vector<int>{3});
    CHECK(ScaleSelection::for_group(AgeGroup::Adults).scales == std::vector<int>{1, 2, 3});
    CHECK(ScaleSelection::for_group(AgeGroup::Elderly).scales == std::vector<int>{2, 3});
}

TEST_CASE("manifest hash tracks content and survives JSON round-trips") {
    const auto a = default_manifest();
    const auto b = default_manifest();
    CHECK(a.hash() == b.hash());

    auto renamed = a;
    renamed.channels[0].name = "ori_sX";
    CHECK(renamed.hash() != a.hash());

    auto retagged = a;
    retagged.channels[0].scale = 2;
    CHECK(retagged.hash() != a.hash());

    const auto round = manifest_from_json(manifest_to_json(a));
    CHECK(round.channels == a.channels);
    CHECK(round.hash() == a.hash());
}

TEST_CASE("feature assembly produces normalized planes deterministically") {
    const auto img = gradient_image(60, 44);
    const auto manifest = default_manifest();
    const auto t1 = assemble_features(img, nullptr, manifest);
    REQUIRE(t1.n_channels() == 23);
    CHECK(t1.width == 60);
    CHECK(t1.height == 44);
    CHECK(t1.values.size() == 23 * t1.plane_size());

    for (std::size_t c = 0; c < t1.n_channels(); ++c) {
        const auto plane = t1.channel_map(c);
        if (!plane.degenerate) REQUIRE(plane.max_value() == Catch::Approx(1.0).margin(1e-12));
        REQUIRE(plane.min_value() >= 0.0);
    }

    const auto t2 = assemble_features(img, nullptr, manifest);
    CHECK(t1.values == t2.values);
    CHECK(t1.channel_names == t2.channel_names);
}

TEST_CASE("gray input leaves the color-opponent channels empty") {
    ImageRgb8 img(40, 30);
    for (int y = 0; y < 30; ++y)
        for (int x = 0; x < 40; ++x) {
            auto* p = img.px(x, y);
            p[0] = p[1] = p[2] = static_cast<std::uint8_t>((x * 5 + y * 3) % 240);
        }
    const auto t = assemble_features(img, nullptr, default_manifest());
    for (const char* name : {"rg_s1", "rg_s2", "by_s1", "by_s3"}) {
        const auto c = t.channel_index(name);
        REQUIRE(c.has_value());
        CHECK(t.channel_degenerate[*c] == 1);
        const auto plane = t.channel_map(*c);
        CHECK(plane.max_value() == 0.0);
    }
}

TEST_CASE("scale selection shrinks the assembled tensor") {
    const auto img = gradient_image(32, 24);
    FeatureOptions opt;
    opt.selection = ScaleSelection::for_group(AgeGroup::Children);
    const auto t = assemble_features(img, nullptr, default_manifest(), opt);
    CHECK(t.n_channels() == 9);  // 4 orientation + 3 contrast at scale 3, plus 2 free
    for (const auto& name : t.channel_names) CHECK(name.find("_s1") == std::string::npos);
}

TEST_CASE("tensor subset preserves planes and rejects unknown names") {
    const auto img = gradient_image(28, 20);
    const auto t = assemble_features(img, nullptr, default_manifest());
    const auto sub = t.subset({"horizon", "center_prior"});
    REQUIRE(sub.channel_names == std::vector<std::string>{"horizon", "center_prior"});
    const auto c_full = t.channel_index("horizon");
    REQUIRE(c_full.has_value());
    for (std::size_t i = 0; i < sub.plane_size(); ++i)
        REQUIRE(sub.plane(0)[i] == t.plane(*c_full)[i]);
    CHECK_THROWS_AS(t.subset({"no_such_channel"}), ArgumentError);
}

TEST_CASE("depth channels require depth data") {
    const auto img = gradient_image(16, 12);
    ManifestOptions mo;
    mo.depth = true;
    CHECK_THROWS_AS(assemble_features(img, nullptr, default_manifest(mo)), ArgumentError);

    ScalarMap depth(16, 12, ScalarMap::Kind::Normalized);
    for (int x = 0; x < 16; ++x)
        for (int y = 0; y < 12; ++y) depth.at(x, y) = x / 15.0;
    const auto t = assemble_features(img, &depth, default_manifest(mo));
    REQUIRE(t.channel_index("depth_near").has_value());
    REQUIRE(t.channel_index("depth_far").has_value());
    const auto near_plane = t.channel_map(*t.channel_index("depth_near"));
    CHECK(static_cast<int>(near_plane.argmax() % 16) < 8);
}

TEST_CASE("unknown channels resolve against the external directory") {
    const auto img = gradient_image(24, 18);
    ChannelManifest m = default_manifest();
    m.channels.push_back({"custom_cue", 0});

    SECTION("without a directory the channel is an error") {
        CHECK_THROWS_AS(assemble_features(img, nullptr, m), ArgumentError);
    }
    SECTION("with a directory the png is loaded and normalized") {
        testutil::TempDir tmp;
        ScalarMap cue(24, 18, ScalarMap::Kind::Counts);
        cue.at(20, 4) = 0.5;
        cue.at(3, 15) = 0.25;
        write_map_png(tmp / "stim.custom_cue.png", cue);

        FeatureOptions opt;
        opt.external_dir = tmp.str();
        opt.image_id = "stim";
        const auto t = assemble_features(img, nullptr, m, opt);
        const auto c = t.channel_index("custom_cue");
        REQUIRE(c.has_value());
        const auto plane = t.channel_map(*c);
        CHECK(plane.argmax() == static_cast<std::size_t>(4) * 24 + 20);
        CHECK(plane.max_value() == Catch::Approx(1.0).margin(1e-12));
        CHECK(plane.at(3, 15) == Catch::Approx(0.5).margin(1e-3));
    }
    SECTION("external channels need an image id") {
        FeatureOptions opt;
        opt.external_dir = "/nonexistent";
        CHECK_THROWS_AS(assemble_features(img, nullptr, m, opt), ArgumentError);
    }
}
