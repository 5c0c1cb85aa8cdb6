#include "steerid/trip.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "steerid/errors.hpp"

namespace steerid {

namespace {

constexpr const char* kTripHeader = "timestamp_ms,steering_deg,speed_mps,gps_valid";

std::string rstrip(std::string s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == '\n' || s.back() == ' ')) s.pop_back();
    return s;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            cells.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    cells.push_back(cur);
    return cells;
}

double parse_channel(const std::string& cell, const std::filesystem::path& path, std::size_t line_no,
                     const char* what) {
    double value = 0.0;
    const char* begin = cell.data();
    const char* end = begin + cell.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end)
        throw format_error(path.string() + ":" + std::to_string(line_no) + ": unparseable " + what +
                           " '" + cell + "'");
    return value;
}

double parse_double(const std::string& cell, const std::filesystem::path& path, std::size_t line_no,
                    const char* what) {
    const double value = parse_channel(cell, path, line_no, what);
    if (!std::isfinite(value))
        throw format_error(path.string() + ":" + std::to_string(line_no) + ": non-finite " + what);
    return value;
}

std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

}  // namespace

std::vector<RawSample> parse_trip_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open trip file " + path.string());

    std::string line;
    if (!std::getline(in, line)) throw format_error(path.string() + ": missing header row");
    if (rstrip(line) != kTripHeader)
        throw format_error(path.string() + ": bad header, expected '" + kTripHeader + "'");

    std::vector<RawSample> samples;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        line = rstrip(line);
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != 4)
            throw format_error(path.string() + ":" + std::to_string(line_no) +
                               ": expected 4 cells, got " + std::to_string(cells.size()));
        RawSample s;
        s.timestamp_ms = parse_double(cells[0], path, line_no, "timestamp");
        // non-finite channel values (NaN sentinels from flaky queries) count
        // as missing and get removed by clean_samples
        if (!cells[1].empty()) {
            const double v = parse_channel(cells[1], path, line_no, "steering");
            if (std::isfinite(v)) s.steering = v;
        }
        if (!cells[2].empty()) {
            const double v = parse_channel(cells[2], path, line_no, "speed");
            if (std::isfinite(v)) s.velocity = v;
        }
        if (cells[3].empty() || cells[3] == "0") {
            s.gps_valid = false;
        } else if (cells[3] == "1") {
            s.gps_valid = true;
        } else {
            throw format_error(path.string() + ":" + std::to_string(line_no) +
                               ": gps_valid must be 0 or 1, got '" + cells[3] + "'");
        }
        samples.push_back(std::move(s));
    }
    return samples;
}

void write_samples_csv(const std::filesystem::path& path, const std::vector<RawSample>& samples) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write trip file " + path.string());
    out << kTripHeader << "\n";
    for (const auto& s : samples) {
        out << format_double(s.timestamp_ms) << ',';
        if (s.steering) out << format_double(*s.steering);
        out << ',';
        if (s.velocity) out << format_double(*s.velocity);
        out << ',' << (s.gps_valid ? '1' : '0') << "\n";
    }
    if (!out) throw io_error("write failed for " + path.string());
}

void write_trip_csv(const std::filesystem::path& path, const UniformTrip& trip) {
    std::vector<RawSample> rows(trip.length());
    const double step = 1000.0 / trip.rate_hz;
    for (std::size_t i = 0; i < trip.length(); ++i) {
        rows[i].timestamp_ms = step * static_cast<double>(i);
        rows[i].steering = trip.steering[i];
        rows[i].velocity = trip.velocity[i];
        rows[i].gps_valid = true;
    }
    write_samples_csv(path, rows);
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open manifest " + path.string());
    std::string line;
    if (!std::getline(in, line) || rstrip(line) != "driver_id,trip_file")
        throw format_error(path.string() + ": manifest header must be 'driver_id,trip_file'");
    std::vector<ManifestEntry> entries;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        line = rstrip(line);
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != 2 || cells[0].empty() || cells[1].empty())
            throw format_error(path.string() + ":" + std::to_string(line_no) + ": bad manifest row");
        entries.push_back({cells[0], cells[1]});
    }
    return entries;
}

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write manifest " + path.string());
    out << "driver_id,trip_file\n";
    for (const auto& e : entries) out << e.driver_id << ',' << e.trip_file << "\n";
    if (!out) throw io_error("write failed for " + path.string());
}

std::vector<RawSample> clean_samples(const std::vector<RawSample>& raw) {
    std::vector<RawSample> kept;
    kept.reserve(raw.size());
    for (const auto& s : raw) {
        if (!s.steering || !s.velocity || !s.gps_valid) continue;
        if (!kept.empty() && s.timestamp_ms <= kept.back().timestamp_ms) continue;
        kept.push_back(s);
    }
    return kept;
}

std::vector<std::vector<RawSample>> split_on_gaps(const std::vector<RawSample>& clean,
                                                  double max_gap_ms) {
    std::vector<std::vector<RawSample>> chunks;
    std::vector<RawSample> cur;
    for (const auto& s : clean) {
        if (!cur.empty() && s.timestamp_ms - cur.back().timestamp_ms > max_gap_ms) {
            chunks.push_back(std::move(cur));
            cur.clear();
        }
        cur.push_back(s);
    }
    if (!cur.empty()) chunks.push_back(std::move(cur));
    return chunks;
}

namespace {

// Quadratic Lagrange through nodes (i0, i0+1, i0+2), evaluated at t. The
// basis form reproduces node values bit-exactly: at t == x_j the foreign
// factors are exactly zero and the own factor is a ratio of identical
// products.
double lagrange3(const std::vector<RawSample>& s, std::size_t i0, double t, bool steering) {
    const double x0 = s[i0].timestamp_ms, x1 = s[i0 + 1].timestamp_ms, x2 = s[i0 + 2].timestamp_ms;
    const double y0 = steering ? *s[i0].steering : *s[i0].velocity;
    const double y1 = steering ? *s[i0 + 1].steering : *s[i0 + 1].velocity;
    const double y2 = steering ? *s[i0 + 2].steering : *s[i0 + 2].velocity;
    const double l0 = ((t - x1) * (t - x2)) / ((x0 - x1) * (x0 - x2));
    const double l1 = ((t - x0) * (t - x2)) / ((x1 - x0) * (x1 - x2));
    const double l2 = ((t - x0) * (t - x1)) / ((x2 - x0) * (x2 - x1));
    return y0 * l0 + y1 * l1 + y2 * l2;
}

}  // namespace

UniformTrip resample_uniform(const std::vector<RawSample>& clean, double rate_hz) {
    if (clean.size() < 3)
        throw data_error("resample needs at least 3 samples, got " + std::to_string(clean.size()));
    for (std::size_t i = 0; i + 1 < clean.size(); ++i)
        if (!(clean[i].timestamp_ms < clean[i + 1].timestamp_ms))
            throw data_error("resample requires strictly increasing timestamps");

    const double step = 1000.0 / rate_hz;
    const double t0 = clean.front().timestamp_ms;
    const double t_last = clean.back().timestamp_ms;
    const auto n_grid = static_cast<std::size_t>(std::floor((t_last - t0) / step + 1e-9)) + 1;

    UniformTrip trip;
    trip.rate_hz = rate_hz;
    trip.steering.resize(n_grid);
    trip.velocity.resize(n_grid);

    const std::size_t m = clean.size();
    std::size_t interval = 0;  // current [interval, interval+1] bracketing the grid point
    for (std::size_t j = 0; j < n_grid; ++j) {
        const double t = t0 + step * static_cast<double>(j);
        while (interval + 2 < m && clean[interval + 1].timestamp_ms < t) ++interval;
        // triple centered on the interval's left node; end intervals fall
        // back to the nearest interior triple
        const std::size_t center = std::clamp<std::size_t>(interval, 1, m - 2);
        trip.steering[j] = lagrange3(clean, center - 1, t, true);
        trip.velocity[j] = lagrange3(clean, center - 1, t, false);
    }
    return trip;
}

std::optional<UniformTrip> enforce_min_length(UniformTrip trip) {
    if (trip.length() < kMinTripSamples) return std::nullopt;
    return trip;
}

std::vector<UniformTrip> ingest_fleet(const std::filesystem::path& manifest_path, IngestStats* stats) {
    const auto entries = read_manifest(manifest_path);
    const auto base = manifest_path.parent_path();

    IngestStats local;
    local.files = entries.size();
    std::vector<UniformTrip> trips;
    for (const auto& entry : entries) {
        const auto path = base / entry.trip_file;
        const auto raw = parse_trip_csv(path);
        const auto clean = clean_samples(raw);
        const auto chunks = split_on_gaps(clean);
        std::size_t chunk_idx = 0;
        for (const auto& chunk : chunks) {
            ++local.chunks;
            ++chunk_idx;
            if (chunk.size() < 3) {
                ++local.dismissed;
                continue;
            }
            auto trip = resample_uniform(chunk);
            trip.driver_id = entry.driver_id;
            trip.trip_id = path.stem().string();
            if (chunks.size() > 1) trip.trip_id += "#" + std::to_string(chunk_idx);
            if (auto kept = enforce_min_length(std::move(trip))) {
                trips.push_back(std::move(*kept));
                ++local.kept;
            } else {
                ++local.dismissed;
            }
        }
    }
    if (stats) *stats = local;
    return trips;
}

}  // namespace steerid
