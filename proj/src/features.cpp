#include "steerid/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <cstdint>
#include <fstream>

#include "steerid/dft.hpp"
#include "steerid/errors.hpp"
#include "steerid/trip.hpp"

namespace steerid {

std::size_t SegmentPool::class_index(const std::string& driver) const {
    const auto it = std::find(classes.begin(), classes.end(), driver);
    if (it == classes.end()) throw config_error("unknown driver class '" + driver + "'");
    return static_cast<std::size_t>(it - classes.begin());
}

std::map<std::string, DriverStream> concat_streams(const std::vector<UniformTrip>& trips) {
    std::map<std::string, DriverStream> streams;
    for (const auto& trip : trips) {
        auto& stream = streams[trip.driver_id];
        stream.driver_id = trip.driver_id;
        stream.steering.insert(stream.steering.end(), trip.steering.begin(), trip.steering.end());
        stream.velocity.insert(stream.velocity.end(), trip.velocity.begin(), trip.velocity.end());
    }
    return streams;
}

std::vector<RawSegment> cut_stream(const DriverStream& stream, std::size_t begin, std::size_t end,
                                   std::size_t seg_samples) {
    std::vector<RawSegment> segments;
    for (std::size_t s = begin; s + seg_samples <= end; s += seg_samples) {
        RawSegment seg;
        seg.driver_id = stream.driver_id;
        seg.start_sample = s;
        seg.steering.assign(stream.steering.begin() + s, stream.steering.begin() + s + seg_samples);
        seg.velocity.assign(stream.velocity.begin() + s, stream.velocity.begin() + s + seg_samples);
        segments.push_back(std::move(seg));
    }
    return segments;
}

std::map<std::string, std::vector<RawSegment>> build_segments(const std::vector<UniformTrip>& trips,
                                                              double segment_s,
                                                              std::size_t n_segments) {
    const auto streams = concat_streams(trips);
    const auto seg_samples = static_cast<std::size_t>(std::llround(segment_s * 10.0));

    std::map<std::string, std::vector<RawSegment>> result;
    for (const auto& [driver, stream] : streams) {
        auto segments = cut_stream(stream, 0, stream.steering.size(), seg_samples);
        if (segments.size() < n_segments)
            throw data_error("driver '" + driver + "' has " + std::to_string(segments.size()) +
                             " segments, needs " + std::to_string(n_segments));
        segments.resize(n_segments);
        result[driver] = std::move(segments);
    }
    return result;
}

WindowFeature log_fft_window(std::span<const double> window, std::span<const double> velocity,
                             const DftPlan& plan) {
    const std::size_t w = window.size();
    if (w < 4) throw data_error("window too short for spectral features");
    if (plan.size() != w || velocity.size() != w)
        throw config_error("window/velocity/plan length mismatch");

    WindowFeature feat;
    feat.lft.resize(w);
    plan.magnitude(window, feat.lft);
    for (double& v : feat.lft) v = std::log2(v + 1.0);

    double mean = 0.0;
    for (double v : velocity) mean += v;
    feat.mean_velocity = mean / static_cast<double>(w);
    return feat;
}

SegmentMatrix build_segment_matrix(const RawSegment& segment, std::size_t window_samples,
                                   const DftPlan& plan) {
    const std::size_t w = window_samples;
    const std::size_t total = segment.steering.size();
    const std::size_t full_windows = total / w;
    if (full_windows < kVoteEvery)
        throw data_error("segment of " + std::to_string(total) + " samples holds only " +
                         std::to_string(full_windows) + " windows of " + std::to_string(w));

    const std::size_t f = (full_windows / kVoteEvery) * kVoteEvery;

    SegmentMatrix sm;
    sm.driver_id = segment.driver_id;
    sm.window_len = w;
    sm.features = Matrix(f, w + 1);
    for (std::size_t i = 0; i < f; ++i) {
        const std::size_t off = i * w;
        const auto feat = log_fft_window(std::span(segment.steering).subspan(off, w),
                                         std::span(segment.velocity).subspan(off, w), plan);
        double* row = sm.features[i];
        std::copy(feat.lft.begin(), feat.lft.end(), row);
        row[w] = feat.mean_velocity;
    }
    return sm;
}

Batch assemble_batch(const SegmentPool& pool, Rng& rng, std::size_t batch_size) {
    if (pool.classes.empty()) throw config_error("empty segment pool");
    for (std::size_t c = 0; c < pool.n_classes(); ++c)
        if (pool.per_class[c].empty())
            throw config_error("class '" + pool.classes[c] + "' has no segments");

    const auto& first = pool.per_class.front().front();
    for (const auto& cls : pool.per_class)
        for (const auto& seg : cls)
            if (seg.n_windows() != first.n_windows() || seg.dim() != first.dim())
                throw config_error("segment shape mismatch in pool");

    Batch batch;
    batch.segments.reserve(batch_size);
    batch.labels.reserve(batch_size);
    for (std::size_t i = 0; i < batch_size; ++i) {
        const auto cls = static_cast<std::size_t>(rng.below(pool.n_classes()));
        const auto idx = static_cast<std::size_t>(rng.below(pool.per_class[cls].size()));
        batch.segments.push_back(&pool.per_class[cls][idx]);
        batch.labels.push_back(cls);
    }
    return batch;
}

namespace {
constexpr std::uint32_t kCacheMagic = 0x46444953;  // "SIDF"
constexpr std::uint32_t kCacheVersion = 1;

template <typename T>
void put(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename T>
T get(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!in) throw format_error("truncated feature cache");
    return v;
}
}  // namespace

void write_feature_cache(const std::filesystem::path& path, const std::vector<SegmentMatrix>& segments) {
    if (segments.empty()) throw config_error("nothing to cache");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write feature cache " + path.string());

    const auto f = static_cast<std::uint32_t>(segments.front().n_windows());
    const auto w = static_cast<std::uint32_t>(segments.front().window_len);
    put(out, kCacheMagic);
    put(out, kCacheVersion);
    put(out, f);
    put(out, w);
    put(out, static_cast<std::uint32_t>(segments.size()));

    for (const auto& seg : segments) {
        if (seg.n_windows() != f || seg.window_len != w)
            throw config_error("feature cache requires uniform segment shapes");
        put(out, static_cast<std::uint32_t>(seg.driver_id.size()));
        out.write(seg.driver_id.data(), static_cast<std::streamsize>(seg.driver_id.size()));
        for (double v : seg.features.data) put(out, static_cast<float>(v));
    }
    if (!out) throw io_error("write failed for " + path.string());
}

std::vector<SegmentMatrix> read_feature_cache(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open feature cache " + path.string());
    if (get<std::uint32_t>(in) != kCacheMagic) throw format_error("not a feature cache: " + path.string());
    if (get<std::uint32_t>(in) != kCacheVersion)
        throw format_error("unsupported feature cache version in " + path.string());
    const auto f = get<std::uint32_t>(in);
    const auto w = get<std::uint32_t>(in);
    const auto count = get<std::uint32_t>(in);

    std::vector<SegmentMatrix> segments(count);
    for (auto& seg : segments) {
        const auto id_len = get<std::uint32_t>(in);
        seg.driver_id.resize(id_len);
        in.read(seg.driver_id.data(), id_len);
        if (!in) throw format_error("truncated feature cache");
        seg.window_len = w;
        seg.features = Matrix(f, w + 1);
        for (double& v : seg.features.data) v = static_cast<double>(get<float>(in));
    }
    return segments;
}

}  // namespace steerid
