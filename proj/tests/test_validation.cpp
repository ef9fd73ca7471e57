#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "aodret/rng.hpp"
#include "aodret/validation.hpp"

#include <cmath>

using namespace aodret;

TEST_CASE("aggregate block means and the clear-fraction rule") {
    // Factor 1 is the identity.
    Field f = Field::full(2, 2, 0.5);
    Field id = aggregate(f, 1);
    CHECK(id.at(0, 0) == 0.5);
    CHECK(id.at(1, 1) == 0.5);

    // Uniform footprint keeps its value.
    Field f4 = Field::full(4, 4, 0.5);
    Field c4 = aggregate(f4, 4);
    REQUIRE(c4.rows == 1);
    CHECK(c4.at(0, 0) == doctest::Approx(0.5));

    // Half the footprint at 0.2, half at 0.6: mean 0.4.
    Field mixed = Field::full(4, 4, 0.2);
    for (int r = 0; r < 4; ++r)
        for (int c = 2; c < 4; ++c) mixed.at(r, c) = 0.6;
    CHECK(aggregate(mixed, 4).at(0, 0) == doctest::Approx(0.4));

    // 15/16 cloudy leaves exactly 1/16 clear, not more: missing.
    Field cloudy = Field::full(4, 4, 0.3);
    for (int i = 1; i < 16; ++i) cloudy.valid[i] = 0;
    Field agg = aggregate(cloudy, 4);
    CHECK_FALSE(agg.is_valid(0, 0));

    // Two clear cells out of 16 exceed the threshold: valid.
    cloudy.valid[1] = 1;
    CHECK(aggregate(cloudy, 4).is_valid(0, 0));

    CHECK_THROWS_AS(aggregate(f4, 3), std::invalid_argument);
    CHECK_THROWS_AS(aggregate(f4, 0), std::invalid_argument);

    // Full-block dimensions: factor 4 takes 32x128 to 8x32.
    Field block = Field::full(32, 128, 1.0);
    Field coarse = aggregate(block, 4);
    CHECK(coarse.rows == 8);
    CHECK(coarse.cols == 32);
}

TEST_CASE("compare fields") {
    Field a = Field::full(2, 3, 0.0);
    Field b = Field::full(2, 3, 0.0);
    Rng rng(1);
    for (int i = 0; i < 6; ++i) a.values[i] = rng.uniform(0.0, 1.0);

    // Identical nonconstant fields: RMS 0, correlation 1.
    b.values = a.values;
    ComparisonReport same = compare_fields(a, b);
    CHECK(same.rms == 0.0);
    REQUIRE(same.correlation.has_value());
    CHECK(*same.correlation == doctest::Approx(1.0));
    CHECK(same.paired == 6);

    // Constant offset: RMS is the offset, correlation still 1.
    for (int i = 0; i < 6; ++i) b.values[i] = a.values[i] + 0.1;
    ComparisonReport off = compare_fields(a, b);
    CHECK(off.rms == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(*off.correlation == doctest::Approx(1.0).epsilon(1e-12));

    // Missing cells are excluded and counted per side; symmetry of RMS.
    b.valid[2] = 0;
    a.valid[4] = 0;
    ComparisonReport part = compare_fields(a, b);
    CHECK(part.paired == 4);
    CHECK(part.missing_b == 1);
    CHECK(part.missing_a == 1);
    ComparisonReport sym = compare_fields(b, a);
    CHECK(sym.rms == part.rms);
    CHECK(sym.missing_a == part.missing_b);

    // Naive recomputation on random fields.
    Field x = Field::full(3, 3, 0.0), y = Field::full(3, 3, 0.0);
    for (int i = 0; i < 9; ++i) {
        x.values[i] = rng.uniform(0.0, 2.0);
        y.values[i] = rng.uniform(0.0, 2.0);
    }
    ComparisonReport rep = compare_fields(x, y);
    double sq = 0.0;
    for (int i = 0; i < 9; ++i)
        sq += (x.values[i] - y.values[i]) * (x.values[i] - y.values[i]);
    CHECK(rep.rms == doctest::Approx(std::sqrt(sq / 9)).epsilon(1e-12));

    // No co-valid pixels is an error.
    Field empty_a = Field::full(1, 1, 0.0);
    Field empty_b = Field::full(1, 1, 0.0);
    empty_a.valid[0] = 0;
    CHECK_THROWS_AS(compare_fields(empty_a, empty_b), std::invalid_argument);
    Field wrong = Field::full(2, 2, 0.0);
    CHECK_THROWS_AS(compare_fields(a, wrong), std::invalid_argument);
}

TEST_CASE("angstrom power law conversion") {
    CHECK(angstrom_convert(0.5, 440, 550, 0.0) == 0.5);
    CHECK(angstrom_convert(0.5, 550, 550, 1.3) == 0.5);
    CHECK(angstrom_convert(0.5, 440, 550, 1.2) ==
          doctest::Approx(0.3825409999160148).epsilon(1e-12));

    // Round trip recovers the input.
    const double once = angstrom_convert(0.7, 440, 550, 1.1);
    CHECK(angstrom_convert(once, 550, 440, 1.1) ==
          doctest::Approx(0.7).epsilon(1e-12));

    CHECK_THROWS_AS(angstrom_convert(0.5, 0.0, 550, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(angstrom_convert(0.5, 440, -5, 1.0), std::invalid_argument);
}

TEST_CASE("iso8601 parse and format") {
    const std::int64_t t = parse_iso8601_utc("2012-04-17T03:02:00Z");
    CHECK(format_iso8601_utc(t) == "2012-04-17T03:02:00Z");
    CHECK(parse_iso8601_utc("1970-01-01T00:00:00Z") == 0);
    CHECK(parse_iso8601_utc("1970-01-02T00:00:00Z") == 86400);
    CHECK_THROWS(parse_iso8601_utc("2012-04-17 03:02:00"));
    CHECK_THROWS(parse_iso8601_utc("2012-13-25T03:02:00Z"));
}

TEST_CASE("overpass matching") {
    auto rec = [](const char* ts, double aod) {
        GroundRecord r;
        r.timestamp = parse_iso8601_utc(ts);
        r.wavelength_nm = 550.0;
        r.aod = aod;
        r.angstrom_exponent = 1.0;
        return r;
    };
    const std::int64_t overpass = parse_iso8601_utc("2012-06-08T03:00:00Z");

    // One record exactly at overpass.
    std::vector<GroundRecord> single{rec("2012-06-08T03:00:00Z", 0.42)};
    OverpassMatch m1 = match_overpass(single, overpass, 3600);
    CHECK(m1.matched);
    CHECK(m1.mean_aod == doctest::Approx(0.42));
    CHECK(m1.record_count == 1);

    // Records at +/- 20 minutes average.
    std::vector<GroundRecord> pair{rec("2012-06-08T02:40:00Z", 0.4),
                                   rec("2012-06-08T03:20:00Z", 0.6)};
    OverpassMatch m2 = match_overpass(pair, overpass, 3600);
    CHECK(m2.matched);
    CHECK(m2.mean_aod == doctest::Approx(0.5));

    // Nearest record three hours away: absent with the gap reported.
    std::vector<GroundRecord> far{rec("2012-06-08T00:00:00Z", 0.55)};
    OverpassMatch m3 = match_overpass(far, overpass, 3600);
    CHECK_FALSE(m3.matched);
    CHECK(m3.gap_seconds == 10800);

    // Conversion applies per record: 440 nm record with exponent 1.2.
    GroundRecord blue;
    blue.timestamp = overpass;
    blue.wavelength_nm = 440.0;
    blue.aod = 0.5;
    blue.angstrom_exponent = 1.2;
    OverpassMatch m4 = match_overpass({blue}, overpass, 3600);
    CHECK(m4.mean_aod == doctest::Approx(0.3825409999160148).epsilon(1e-12));
}

TEST_CASE("ground record parsing is strict with line numbers") {
    const std::string good =
        "timestamp wavelength_nm aod angstrom_exponent\n"
        "2012-06-08T02:40:00Z 440 0.41 1.21\n"
        "2012-06-08T03:20:00Z 550 0.38 1.18\n";
    auto records = parse_ground_records(good);
    REQUIRE(records.size() == 2);
    CHECK(records[0].wavelength_nm == 440.0);
    CHECK(records[1].aod == 0.38);

    auto fails_with = [](const std::string& text, const char* needle) {
        try {
            parse_ground_records(text);
            return false;
        } catch (const std::exception& e) {
            return std::string(e.what()).find(needle) != std::string::npos;
        }
    };
    CHECK(fails_with("bad header\nx", "header"));
    CHECK(fails_with(
        "timestamp wavelength_nm aod angstrom_exponent\n2012-06-08T02:40:00Z 440\n",
        "line 2"));
    CHECK(fails_with("timestamp wavelength_nm aod angstrom_exponent\n"
                     "2012-06-08T02:40:00Z 440 0.41 1.21\n"
                     "2012-06-08T02:41:00Z -440 0.41 1.21\n",
                     "line 3"));

    // Sorting is stable by timestamp.
    std::vector<GroundRecord> unsorted = records;
    std::swap(unsorted[0], unsorted[1]);
    sort_records(unsorted);
    CHECK(unsorted[0].timestamp < unsorted[1].timestamp);
}

TEST_CASE("georegistration pixel lookup") {
    Georegistration g;
    g.lat0 = 36.2;
    g.dlat_drow = -0.04; // south as rows increase
    g.dlat_dcol = 0.0;
    g.lon0 = -97.6;
    g.dlon_drow = 0.0;
    g.dlon_dcol = 0.05;

    auto [r, c] = locate_pixel(g, 32, 128, 36.2 - 0.04 * 10, -97.6 + 0.05 * 99);
    CHECK(r == 10);
    CHECK(c == 99);

    // Nearest-center rounding.
    auto [r2, c2] = locate_pixel(g, 32, 128, 36.2 - 0.04 * 10.4, -97.6 + 0.05 * 98.6);
    CHECK(r2 == 10);
    CHECK(c2 == 99);

    CHECK_THROWS_AS(locate_pixel(g, 32, 128, 44.0, -97.6), std::invalid_argument);
    Georegistration singular;
    CHECK_THROWS_AS(locate_pixel(singular, 32, 128, 36.2, -97.6),
                    std::invalid_argument);
}
