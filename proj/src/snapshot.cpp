#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <zlib.h>

#include "mti/database.hpp"
#include "mti/error.hpp"

// Snapshot layout (all integers little-endian):
//   magic[8] "MTISNAP\0" | u32 version | u64 body_size | body | u32 crc32(body)

namespace mti {

namespace {

constexpr char kMagic[8] = {'M', 'T', 'I', 'S', 'N', 'A', 'P', '\0'};

class Writer {
public:
    void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void str(const std::string& s) {
        u64(s.size());
        buf_.append(s);
    }
    void bytes(const std::vector<std::uint8_t>& b) {
        u64(b.size());
        buf_.append(reinterpret_cast<const char*>(b.data()), b.size());
    }
    void reals(const std::vector<double>& v) {
        u64(v.size());
        for (double d : v) f64(d);
    }
    const std::string& data() const { return buf_; }

private:
    std::string buf_;
};

class Reader {
public:
    explicit Reader(std::string_view data) : data_(data) {}

    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(data_[pos_++]);
    }
    std::uint32_t u32() {
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(u8()) << (8 * i);
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string str() {
        const auto n = count(1);
        std::string s(data_.substr(pos_, n));
        pos_ += n;
        return s;
    }
    std::vector<std::uint8_t> bytes() {
        const auto n = count(1);
        std::vector<std::uint8_t> b(n);
        std::memcpy(b.data(), data_.data() + pos_, n);
        pos_ += n;
        return b;
    }
    std::vector<double> reals() {
        const auto n = count(8);
        std::vector<double> v(n);
        for (auto& d : v) d = f64();
        return v;
    }
    bool done() const { return pos_ == data_.size(); }

private:
    std::size_t count(std::size_t elem_size) {
        const auto n = u64();
        if (n > (data_.size() - pos_) / elem_size) throw SnapshotError("snapshot truncated");
        return static_cast<std::size_t>(n);
    }
    void need(std::size_t n) {
        if (data_.size() - pos_ < n) throw SnapshotError("snapshot truncated");
    }

    std::string_view data_;
    std::size_t pos_ = 0;
};

std::uint32_t checksum(std::string_view body) {
    return static_cast<std::uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size())));
}

} // namespace

struct SnapshotCodec {
    static std::string encode(const TrafficDatabase& db) {
        Writer w;
        const auto& n = db.norm_;
        w.u64(n.l_pay);
        w.u64(n.l_len);
        w.u64(n.l_time);
        w.u64(n.w_seg);
        w.u8(db.options_.stats_exclude_self ? 1 : 0);

        w.u64(db.entries_.size());
        for (const auto& e : db.entries_) {
            w.str(e.flow_id);
            w.str(e.class_label);
            w.str(e.proto_fine);
            std::uint8_t bits = 0;
            for (View v : kAllViews)
                if (e.views.has(v)) bits |= static_cast<std::uint8_t>(1u << index_of(v));
            w.u8(bits);
            w.bytes(e.views.payload_vec);
            w.reals(e.views.len_time_vec);
            w.reals(e.views.iat_time_vec);
            w.reals(e.views.len_freq_vec);
            w.reals(e.views.iat_freq_vec);
        }

        w.u64(db.stats_.size());
        for (const auto& [key, s] : db.stats_) {
            w.str(key.class_label);
            w.u8(static_cast<std::uint8_t>(key.level));
            w.str(key.protocol);
            w.u8(static_cast<std::uint8_t>(key.view));
            w.f64(s.mean_dist);
            w.f64(s.std_dist);
            w.u64(s.sample_count);
        }
        return w.data();
    }

    static TrafficDatabase decode(std::string_view body) {
        Reader r(body);
        TrafficDatabase db;
        db.norm_.l_pay = r.u64();
        db.norm_.l_len = r.u64();
        db.norm_.l_time = r.u64();
        db.norm_.w_seg = r.u64();
        try {
            db.norm_.validate();
        } catch (const ValidationError& e) {
            throw SnapshotError(std::string("snapshot has invalid norm config: ") + e.what());
        }
        db.options_.stats_exclude_self = r.u8() != 0;

        const auto n_entries = r.u64();
        for (std::uint64_t i = 0; i < n_entries; ++i) {
            DbEntry e;
            e.flow_id = r.str();
            e.class_label = r.str();
            e.proto_fine = r.str();
            e.proto_coarse = coarse_protocol(e.proto_fine);
            const auto bits = r.u8();
            for (View v : kAllViews) e.views.present[index_of(v)] = (bits >> index_of(v)) & 1u;
            e.views.payload_vec = r.bytes();
            e.views.len_time_vec = r.reals();
            e.views.iat_time_vec = r.reals();
            e.views.len_freq_vec = r.reals();
            e.views.iat_freq_vec = r.reals();
            const auto& n = db.norm_;
            if (e.views.payload_vec.size() != n.l_pay || e.views.len_time_vec.size() != n.l_len ||
                e.views.iat_time_vec.size() != n.l_time || e.views.len_freq_vec.size() != n.k_f() ||
                e.views.iat_freq_vec.size() != n.k_f())
                throw SnapshotError("snapshot entry '" + e.flow_id + "' has vectors inconsistent with its norm config");
            db.entries_.push_back(std::move(e));
        }

        const auto n_stats = r.u64();
        for (std::uint64_t i = 0; i < n_stats; ++i) {
            StatsKey key;
            key.class_label = r.str();
            const auto level = r.u8();
            key.protocol = r.str();
            const auto view = r.u8();
            if (level > 1 || view > 2) throw SnapshotError("snapshot stats key out of range");
            key.level = static_cast<ProtocolLevel>(level);
            key.view = static_cast<View>(view);
            ClassProtocolStats s;
            s.mean_dist = r.f64();
            s.std_dist = r.f64();
            s.sample_count = r.u64();
            db.stats_.emplace(std::move(key), s);
        }
        if (!r.done()) throw SnapshotError("snapshot has trailing bytes");
        if (db.entries_.empty()) throw SnapshotError("snapshot holds no entries");
        try {
            db.index();
        } catch (const ValidationError& e) {
            throw SnapshotError(e.what());
        }
        return db;
    }
};

void save_snapshot(const TrafficDatabase& db, const std::filesystem::path& path) {
    const std::string body = SnapshotCodec::encode(db);
    Writer header;
    header.u32(kSnapshotVersion);
    header.u64(body.size());
    Writer trailer;
    trailer.u32(checksum(body));

    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ValidationError("cannot write snapshot: " + tmp.string());
        out.write(kMagic, sizeof kMagic);
        out << header.data() << body << trailer.data();
        out.flush();
        if (!out) throw ValidationError("failed writing snapshot: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

TrafficDatabase load_snapshot(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SnapshotError("cannot open snapshot: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    const std::string data = buf.str();

    if (data.size() < sizeof kMagic || std::memcmp(data.data(), kMagic, sizeof kMagic) != 0)
        throw SnapshotError("not a snapshot file (bad magic): " + path.string());
    Reader r(std::string_view(data).substr(sizeof kMagic));
    const auto version = r.u32();
    if (version != kSnapshotVersion)
        throw SnapshotError("unsupported snapshot format version " + std::to_string(version) + " (expected " +
                            std::to_string(kSnapshotVersion) + ")");
    const auto body_size = r.u64();
    const std::size_t body_off = sizeof kMagic + 12;
    if (data.size() < body_off || body_size > data.size() - body_off || data.size() - body_off - body_size < 4)
        throw SnapshotError("snapshot truncated");
    if (data.size() - body_off - body_size != 4) throw SnapshotError("snapshot has trailing bytes");
    const std::string_view body = std::string_view(data).substr(body_off, body_size);
    Reader tail(std::string_view(data).substr(body_off + body_size));
    if (tail.u32() != checksum(body)) throw SnapshotError("snapshot checksum mismatch");
    return SnapshotCodec::decode(body);
}

} // namespace mti
