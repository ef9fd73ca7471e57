#include "aodret/validation.hpp"

#include "aodret/textio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace aodret {

Field Field::full(int rows, int cols, double value) {
    Field f;
    f.rows = rows;
    f.cols = cols;
    f.values.assign(static_cast<std::size_t>(rows) * cols, value);
    f.valid.assign(static_cast<std::size_t>(rows) * cols, 1);
    return f;
}

Field aggregate(const Field& fine, int factor, double min_clear_fraction) {
    if (factor < 1) throw std::invalid_argument("aggregate: factor must be >= 1");
    if (fine.rows % factor != 0 || fine.cols % factor != 0)
        throw std::invalid_argument("aggregate: factor does not divide field dimensions");

    Field coarse;
    coarse.rows = fine.rows / factor;
    coarse.cols = fine.cols / factor;
    coarse.values.assign(static_cast<std::size_t>(coarse.rows) * coarse.cols,
                         std::numeric_limits<double>::quiet_NaN());
    coarse.valid.assign(coarse.values.size(), 0);

    for (int R = 0; R < coarse.rows; ++R)
        for (int C = 0; C < coarse.cols; ++C) {
            double sum = 0.0;
            int n = 0;
            for (int r = R * factor; r < (R + 1) * factor; ++r)
                for (int c = C * factor; c < (C + 1) * factor; ++c)
                    if (fine.is_valid(r, c)) {
                        sum += fine.at(r, c);
                        ++n;
                    }
            const double fraction =
                static_cast<double>(n) / (static_cast<double>(factor) * factor);
            // Valid only when the clear area strictly exceeds the threshold.
            if (fraction > min_clear_fraction && n > 0) {
                coarse.at(R, C) = sum / n;
                coarse.valid[static_cast<std::size_t>(R) * coarse.cols + C] = 1;
            }
        }
    return coarse;
}

ComparisonReport compare_fields(const Field& a, const Field& b) {
    if (a.rows != b.rows || a.cols != b.cols)
        throw std::invalid_argument("compare_fields: dimension mismatch");

    ComparisonReport rep;
    double sq = 0.0;
    std::vector<double> xs, ys;
    for (int i = 0; i < a.rows * a.cols; ++i) {
        const bool va = a.valid[i] != 0;
        const bool vb = b.valid[i] != 0;
        if (va && vb) {
            ++rep.paired;
            const double d = a.values[i] - b.values[i];
            sq += d * d;
            xs.push_back(a.values[i]);
            ys.push_back(b.values[i]);
        } else if (va) {
            ++rep.missing_b;
        } else if (vb) {
            ++rep.missing_a;
        }
    }
    if (rep.paired == 0)
        throw std::invalid_argument("compare_fields: no co-valid pixels");
    rep.rms = std::sqrt(sq / rep.paired);

    double mx = 0.0, my = 0.0;
    for (int i = 0; i < rep.paired; ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= rep.paired;
    my /= rep.paired;
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (int i = 0; i < rep.paired; ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        syy += (ys[i] - my) * (ys[i] - my);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    if (sxx > 0.0 && syy > 0.0)
        rep.correlation = sxy / std::sqrt(sxx * syy);
    return rep;
}

double angstrom_convert(double aod, double from_nm, double to_nm, double exponent) {
    if (!(from_nm > 0.0) || !(to_nm > 0.0))
        throw std::invalid_argument("angstrom_convert: wavelengths must be positive");
    return aod * std::pow(to_nm / from_nm, -exponent);
}

void sort_records(std::vector<GroundRecord>& records) {
    std::stable_sort(records.begin(), records.end(),
                     [](const GroundRecord& a, const GroundRecord& b) {
                         return a.timestamp < b.timestamp;
                     });
}

OverpassMatch match_overpass(const std::vector<GroundRecord>& records,
                             std::int64_t overpass_time, std::int64_t window_seconds,
                             double target_nm) {
    OverpassMatch match;
    const std::int64_t half = window_seconds / 2;
    std::int64_t best_gap = std::numeric_limits<std::int64_t>::max();
    double sum = 0.0;
    for (const auto& rec : records) {
        const std::int64_t gap = std::llabs(rec.timestamp - overpass_time);
        best_gap = std::min(best_gap, gap);
        if (gap <= half) {
            sum += angstrom_convert(rec.aod, rec.wavelength_nm, target_nm,
                                    rec.angstrom_exponent);
            ++match.record_count;
        }
    }
    if (match.record_count > 0) {
        match.matched = true;
        match.mean_aod = sum / match.record_count;
    } else {
        match.gap_seconds =
            records.empty() ? std::numeric_limits<std::int64_t>::max() : best_gap;
    }
    return match;
}

namespace {

bool days_from_civil(int y, int m, int d, std::int64_t& days) {
    if (m < 1 || m > 12 || d < 1 || d > 31) return false;
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2u) / 5u + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    days = era * 146097 + static_cast<std::int64_t>(doe) - 719468;
    return true;
}

} // namespace

std::int64_t parse_iso8601_utc(const std::string& s) {
    int y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0;
    char z = 0;
    if (std::sscanf(s.c_str(), "%d-%d-%dT%d:%d:%d%c", &y, &mo, &d, &h, &mi, &sec,
                    &z) != 7 ||
        z != 'Z')
        throw std::runtime_error("bad ISO-8601 UTC timestamp: '" + s + "'");
    std::int64_t days = 0;
    if (!days_from_civil(y, mo, d, days) || h < 0 || h > 23 || mi < 0 || mi > 59 ||
        sec < 0 || sec > 60)
        throw std::runtime_error("out-of-range ISO-8601 timestamp: '" + s + "'");
    return days * 86400 + h * 3600LL + mi * 60LL + sec;
}

std::string format_iso8601_utc(std::int64_t t) {
    std::int64_t days = t / 86400;
    std::int64_t rem = t % 86400;
    if (rem < 0) {
        rem += 86400;
        --days;
    }
    // Inverse of days_from_civil.
    days += 719468;
    const std::int64_t era = (days >= 0 ? days : days - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(days - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp + (mp < 10 ? 3 : -9);
    y += m <= 2;

    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04lld-%02u-%02uT%02lld:%02lld:%02lldZ",
                  static_cast<long long>(y), m, d,
                  static_cast<long long>(rem / 3600),
                  static_cast<long long>((rem % 3600) / 60),
                  static_cast<long long>(rem % 60));
    return buf;
}

std::vector<GroundRecord> parse_ground_records(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    auto fail = [&](const std::string& why) -> std::runtime_error {
        return std::runtime_error("ground records line " + std::to_string(line_no) +
                                  ": " + why);
    };

    if (!std::getline(in, line)) throw std::runtime_error("ground records: empty input");
    ++line_no;
    {
        std::istringstream hs(line);
        std::string a, b, c, d, extra;
        hs >> a >> b >> c >> d;
        if (a != "timestamp" || b != "wavelength_nm" || c != "aod" ||
            d != "angstrom_exponent" || (hs >> extra))
            throw fail("header must be 'timestamp wavelength_nm aod angstrom_exponent'");
    }

    std::vector<GroundRecord> records;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string ts, wl, aod, ae, extra;
        if (!(ls >> ts >> wl >> aod >> ae)) throw fail("expected 4 columns");
        if (ls >> extra) throw fail("trailing data '" + extra + "'");
        GroundRecord rec;
        try {
            rec.timestamp = parse_iso8601_utc(ts);
            rec.wavelength_nm = parse_double(wl);
            rec.aod = parse_double(aod);
            rec.angstrom_exponent = parse_double(ae);
        } catch (const std::exception& e) {
            throw fail(e.what());
        }
        if (!(rec.wavelength_nm > 0.0)) throw fail("wavelength must be positive");
        if (!(rec.aod >= 0.0)) throw fail("aod must be nonnegative");
        records.push_back(rec);
    }
    return records;
}

std::vector<GroundRecord> read_ground_records(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_ground_records(ss.str());
}

std::pair<int, int> locate_pixel(const Georegistration& g, int rows, int cols,
                                 double lat, double lon) {
    const double det = g.dlat_drow * g.dlon_dcol - g.dlat_dcol * g.dlon_drow;
    if (std::abs(det) < 1e-300)
        throw std::invalid_argument("locate_pixel: singular georegistration");
    const double dlat = lat - g.lat0;
    const double dlon = lon - g.lon0;
    const double row = (dlat * g.dlon_dcol - g.dlat_dcol * dlon) / det;
    const double col = (g.dlat_drow * dlon - dlat * g.dlon_drow) / det;
    const int r = static_cast<int>(std::lround(row));
    const int c = static_cast<int>(std::lround(col));
    if (r < 0 || r >= rows || c < 0 || c >= cols)
        throw std::invalid_argument("locate_pixel: location outside the block");
    return {r, c};
}

} // namespace aodret
