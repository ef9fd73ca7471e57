#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace aodret {

// Rectangular scalar field with per-cell validity (missing = not valid).
struct Field {
    int rows = 0;
    int cols = 0;
    std::vector<double> values;        // rows*cols, row-major; NaN when invalid
    std::vector<std::uint8_t> valid;   // rows*cols

    double& at(int r, int c) { return values[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return values[static_cast<std::size_t>(r) * cols + c]; }
    bool is_valid(int r, int c) const {
        return valid[static_cast<std::size_t>(r) * cols + c] != 0;
    }

    static Field full(int rows, int cols, double value = 0.0);
};

// Block-mean aggregation by an integer factor (4 takes 4.4 km to 17.6 km):
// each coarse cell is the mean of its valid fine cells, and is missing unless
// the valid fraction strictly exceeds min_clear_fraction.
Field aggregate(const Field& fine, int factor, double min_clear_fraction = 1.0 / 16.0);

struct ComparisonReport {
    int paired = 0;
    int missing_a = 0; // valid in b only
    int missing_b = 0; // valid in a only
    double rms = 0.0;
    std::optional<double> correlation; // absent when either side is constant
};

ComparisonReport compare_fields(const Field& a, const Field& b);

// Angstrom power law: tau(to) = tau(from) * (to/from)^(-exponent).
double angstrom_convert(double aod, double from_nm, double to_nm, double exponent);

struct GroundRecord {
    std::int64_t timestamp = 0; // UTC seconds
    double wavelength_nm = 0.0;
    double aod = 0.0;
    double angstrom_exponent = 0.0;
};

struct OverpassMatch {
    bool matched = false;
    double mean_aod = 0.0;      // mean of wavelength-converted in-window AODs
    int record_count = 0;
    std::int64_t gap_seconds = 0; // distance to the nearest record when unmatched
};

// Averages the records within +/- window_seconds/2 of the overpass, each
// converted to target_nm with its own Angstrom exponent. Records must be
// time-sorted (see sort_records).
OverpassMatch match_overpass(const std::vector<GroundRecord>& records,
                             std::int64_t overpass_time, std::int64_t window_seconds,
                             double target_nm = 550.0);

void sort_records(std::vector<GroundRecord>& records);

// Strict parser for the delimited station file (header line naming the
// columns, ISO-8601 UTC timestamps); errors carry the offending line number.
std::vector<GroundRecord> parse_ground_records(const std::string& text);
std::vector<GroundRecord> read_ground_records(const std::string& path);

// ISO-8601 UTC ("2012-04-17T03:02:00Z") to UNIX seconds and back.
std::int64_t parse_iso8601_utc(const std::string& s);
std::string format_iso8601_utc(std::int64_t t);

// Affine registration of grid indices to geographic coordinates:
//   lat = lat0 + dlat_drow * row + dlat_dcol * col   (and same for lon).
struct Georegistration {
    double lat0 = 0.0, dlat_drow = 0.0, dlat_dcol = 0.0;
    double lon0 = 0.0, dlon_drow = 0.0, dlon_dcol = 0.0;
};

// Nearest pixel (row, col) whose center maps to the given location; throws
// std::invalid_argument when the affine map is singular or the location falls
// outside the grid.
std::pair<int, int> locate_pixel(const Georegistration& georef, int rows, int cols,
                                 double lat, double lon);

} // namespace aodret
