#include <doctest.h>

#include <cmath>
#include <fstream>
#include <vector>

#include "mipose/common.hpp"
#include "mipose/geometry.hpp"
#include "mipose/io/image.hpp"
#include "mipose/io/runconfig.hpp"
#include "mipose/io/svg_plot.hpp"
#include "test_util.hpp"

using namespace mipose;

TEST_CASE("png round-trips grayscale and rgb") {
    miptest::TempDir tmp("png");
    Rng rng(5);

    ImageU8 gray(13, 9, 1);
    for (auto& v : gray.data) v = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
    write_png(tmp.file("g.png"), gray);
    ImageU8 g2 = read_png(tmp.file("g.png"));
    CHECK(g2.height == 13);
    CHECK(g2.width == 9);
    CHECK(g2.channels == 1);
    CHECK(g2.data == gray.data);

    ImageU8 rgb(7, 11, 3);
    for (auto& v : rgb.data) v = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
    write_png(tmp.file("c.png"), rgb);
    ImageU8 c2 = read_png(tmp.file("c.png"));
    CHECK(c2.channels == 3);
    CHECK(c2.data == rgb.data);

    CHECK_THROWS_AS(read_png(tmp.file("missing.png")), std::runtime_error);
}

TEST_CASE("pgm round-trips") {
    miptest::TempDir tmp("pgm");
    Rng rng(6);
    std::vector<std::uint8_t> gray(16 * 10);
    for (auto& v : gray) v = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
    write_pgm(tmp.file("h.pgm"), 16, 10, gray);
    ImageU8 back = read_pgm(tmp.file("h.pgm"));
    CHECK(back.width == 16);
    CHECK(back.height == 10);
    CHECK(back.data == gray);
}

TEST_CASE("base64 encodes the rfc vectors and round-trips") {
    auto enc = [](const std::string& s) {
        return base64_encode(std::vector<std::uint8_t>(s.begin(), s.end()));
    };
    CHECK(enc("") == "");
    CHECK(enc("f") == "Zg==");
    CHECK(enc("fo") == "Zm8=");
    CHECK(enc("foo") == "Zm9v");
    CHECK(enc("foobar") == "Zm9vYmFy");

    Rng rng(9);
    for (int len : {1, 2, 3, 100, 257}) {
        std::vector<std::uint8_t> bytes(static_cast<std::size_t>(len));
        for (auto& b : bytes) b = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
        CHECK(base64_decode(base64_encode(bytes)) == bytes);
    }
    CHECK_THROWS_AS(base64_decode("a"), std::invalid_argument);
    CHECK_THROWS_AS(base64_decode("ab!="), std::invalid_argument);
}

TEST_CASE("bilinear sampling interpolates pixel centers") {
    ImageU8 img(2, 2, 1);
    img.at(0, 0, 0) = 0;
    img.at(0, 1, 0) = 100;
    img.at(1, 0, 0) = 200;
    img.at(1, 1, 0) = 100;
    // Pixel centers are at (x+0.5, y+0.5).
    CHECK(bilinear_sample(img, 0.5, 0.5, 0) == doctest::Approx(0.0));
    CHECK(bilinear_sample(img, 1.5, 0.5, 0) == doctest::Approx(100.0));
    CHECK(bilinear_sample(img, 1.0, 0.5, 0) == doctest::Approx(50.0));
    CHECK(bilinear_sample(img, 1.0, 1.0, 0) == doctest::Approx(100.0));
    // Clamp-to-edge beyond the border.
    CHECK(bilinear_sample(img, -5.0, 0.5, 0) == doctest::Approx(0.0));
    CHECK(bilinear_sample(img, 5.0, 1.5, 0) == doctest::Approx(100.0));
}

TEST_CASE("render_crop reproduces an axis-aligned unit-scale window") {
    ImageU8 img(8, 8, 1);
    Rng rng(11);
    for (auto& v : img.data) v = static_cast<std::uint8_t>(rng.uniform_int(0, 255));

    // A 4x4 target over the box (2,2,4,4) with no margin has scale 1: output
    // pixel centers land exactly on input pixel centers.
    CropTransform t = make_crop_transform(BoundingBox{2, 2, 4, 4}, 4, 4, 0.0);
    std::vector<float> out = render_crop(img, t);
    REQUIRE(out.size() == 4 * 4 * 3);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) {
            const float expect = static_cast<float>(img.at(y + 2, x + 2, 0)) / 255.0f;
            for (int c = 0; c < 3; ++c)
                CHECK(out[(static_cast<std::size_t>(y) * 4 + x) * 3 + c] ==
                      doctest::Approx(expect).epsilon(1e-6));
        }
}

TEST_CASE("runconfig parses flat json and rejects nesting") {
    miptest::TempDir tmp("rc");
    {
        std::ofstream out(tmp.file("cfg.json"));
        out << R"({"train.epochs": 12, "train.lr": 0.5, "data.name": "x", "data.inline": true})";
    }
    RunConfig rc = RunConfig::from_file(tmp.file("cfg.json"));
    CHECK(rc.get_int("train.epochs", 0) == 12);
    CHECK(rc.get_double("train.lr", 0.0) == doctest::Approx(0.5));
    CHECK(rc.get_string("data.name", "") == "x");
    CHECK(rc.get_bool("data.inline", false));
    CHECK(rc.get_int("absent", 77) == 77);
    CHECK_FALSE(rc.has("absent"));
    CHECK_THROWS_AS(rc.get_int("data.name", 0), std::runtime_error);

    {
        std::ofstream out(tmp.file("nested.json"));
        out << R"({"train": {"epochs": 12}})";
    }
    CHECK_THROWS_AS(RunConfig::from_file(tmp.file("nested.json")), std::runtime_error);
}

TEST_CASE("runconfig enforces known keys and writes sorted output") {
    RunConfig rc;
    rc.set("b.two", 2);
    rc.set("a.one", 1);
    CHECK_NOTHROW(rc.ensure_known({"a.one", "b.two"}));
    CHECK_THROWS_AS(rc.ensure_known({"a.one"}), std::runtime_error);

    miptest::TempDir tmp("rc_out");
    rc.write(tmp.file("out.json"));
    const std::string text = miptest::slurp(tmp.file("out.json"));
    CHECK(text.find("a.one") < text.find("b.two"));

    RunConfig back = RunConfig::from_file(tmp.file("out.json"));
    CHECK(back.get_int("a.one", 0) == 1);
    CHECK(back.get_int("b.two", 0) == 2);
}

TEST_CASE("svg charts emit well-formed markup") {
    miptest::TempDir tmp("svg");
    PlotSeries s1{"train", {0, 1, 2}, {1.0, 0.5, 0.25}};
    PlotSeries s2{"val", {0, 1, 2}, {1.2, 0.7, 0.4}};
    write_line_chart(tmp.file("loss.svg"), "loss <curves>", "epoch", "loss", {s1, s2});
    const std::string svg = miptest::slurp(tmp.file("loss.svg"));
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.find("</svg>") != std::string::npos);
    CHECK(svg.find("train") != std::string::npos);
    CHECK(svg.find("&lt;curves&gt;") != std::string::npos);  // escaped title

    write_bar_chart(tmp.file("ap.svg"), "ap", "AP", {{"a", 0.5}, {"b", 0.75}});
    const std::string bars = miptest::slurp(tmp.file("ap.svg"));
    CHECK(bars.find("<svg") != std::string::npos);
    CHECK(bars.find("0.75") != std::string::npos);
}
