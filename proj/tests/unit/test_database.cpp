#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "mti/database.hpp"
#include "mti/error.hpp"
#include "oracles.hpp"

using namespace mti;

namespace {

FlowRecord flow(std::string id, std::string label, std::string proto, std::vector<std::uint8_t> payload,
                std::vector<std::int64_t> lens = {100, 200}, std::vector<double> iats = {0.1}) {
    FlowRecord f;
    f.flow_id = std::move(id);
    f.label = std::move(label);
    f.proto_fine = std::move(proto);
    f.payload = std::move(payload);
    f.pkt_lengths = std::move(lens);
    f.iat_seconds = std::move(iats);
    return f;
}

NormConfig small_norm() {
    NormConfig c;
    c.l_pay = 4;
    c.l_len = 8;
    c.l_time = 8;
    c.w_seg = 4;
    return c;
}

std::filesystem::path temp(const char* name) { return std::filesystem::temp_directory_path() / name; }

} // namespace

TEST_SUITE("traffic_db") {

TEST_CASE("stats of a hand-computed payload group") {
    // Payload vectors (L_pay = 4): A=0000, B=1100, C=1111. Hamming fractions:
    // d(A,B)=0.5, d(A,C)=1, d(B,C)=0.5. With self-pairs, 9 ordered pairs, sum = 4.
    const NormConfig cfg = small_norm();
    const auto db = build_database({flow("a", "x", "TCP", {0, 0, 0, 0}), flow("b", "x", "TCP", {1, 1, 0, 0}),
                                    flow("c", "x", "TCP", {1, 1, 1, 1})},
                                   cfg);
    const auto* s = db.find_stats({"x", ProtocolLevel::fine, "TCP", View::payload});
    REQUIRE(s);
    CHECK(s->sample_count == 3);
    CHECK(s->mean_dist == doctest::Approx(4.0 / 9.0));
    // Squares: 3 zeros, four 0.25s, two 1s -> E[d^2] = 3/9; var = 3/9 - 16/81 = 11/81.
    CHECK(s->std_dist == doctest::Approx(std::sqrt(11.0) / 9.0));

    const auto db2 = build_database({flow("a", "x", "TCP", {0, 0, 0, 0}), flow("b", "x", "TCP", {1, 1, 0, 0}),
                                     flow("c", "x", "TCP", {1, 1, 1, 1})},
                                    cfg, {true});
    const auto* s2 = db2.find_stats({"x", ProtocolLevel::fine, "TCP", View::payload});
    CHECK(s2->mean_dist == doctest::Approx(4.0 / 6.0));
    // Off-diagonal: four 0.5s, two 1s. E[d^2] = 3/6; var = 1/2 - 4/9 = 1/18.
    CHECK(s2->std_dist == doctest::Approx(std::sqrt(1.0 / 18.0)));
}

TEST_CASE("singleton group has zero mean and std") {
    const auto db = build_database({flow("a", "x", "TCP|HTTP", {1, 2})}, small_norm());
    for (View v : kAllViews) {
        const auto* s = db.find_stats({"x", ProtocolLevel::fine, "TCP|HTTP", v});
        REQUIRE(s);
        CHECK(s->mean_dist == 0.0);
        CHECK(s->std_dist == 0.0);
    }
    CHECK(degenerate_groups(db).size() == 6);
}

TEST_CASE("compute_stats matches the ordered-pair oracle") {
    std::mt19937_64 rng(3);
    const NormConfig cfg;
    for (std::size_t n : {1u, 2u, 5u, 17u, 60u}) {
        auto flows = oracle::random_flows(rng, n, 1, 40, 0.0);
        std::vector<NormalizedViews> views;
        for (const auto& f : flows) views.push_back(normalize_flow(f, cfg));
        std::vector<const NormalizedViews*> ptrs;
        for (const auto& v : views) ptrs.push_back(&v);
        for (View v : kAllViews)
            for (bool excl : {false, true}) {
                if (excl && n == 1) continue;
                const auto got = compute_stats(ptrs, v, excl);
                const auto want = oracle::brute_stats(views, v, excl);
                CHECK(std::abs(got.mean - want.mean) <= 1e-9);
                CHECK(std::abs(got.std - want.std) <= 1e-9);
            }
    }
    CHECK_THROWS_AS(compute_stats({}, View::payload), ValidationError);
}

TEST_CASE("stats exist at fine and coarse level, keyed apart") {
    const auto db = build_database({flow("a", "x", "TCP", {1}), flow("b", "x", "TCP|HTTP", {2}),
                                    flow("c", "y", "UDP|DNS", {3}, {10}, {})},
                                   small_norm());
    CHECK(db.find_stats({"x", ProtocolLevel::fine, "TCP", View::payload})->sample_count == 1);
    CHECK(db.find_stats({"x", ProtocolLevel::coarse, "TCP", View::payload})->sample_count == 2);
    CHECK(db.find_stats({"y", ProtocolLevel::fine, "UDP|DNS", View::length}));
    // Single packet: no inter-arrival view, so no time group.
    CHECK_FALSE(db.find_stats({"y", ProtocolLevel::fine, "UDP|DNS", View::time}));
    CHECK(db.label_set() == std::set<std::string>{"x", "y"});
}

TEST_CASE("candidate set prefers fine, falls back to coarse, never crosses coarse") {
    const auto db = build_database({flow("a", "x", "TCP|HTTP", {1}), flow("b", "y", "TCP|TLS1.2", {2}),
                                    flow("c", "y", "UDP|DNS", {3}), flow("d", "x", "TCP", {}, {5, 6}, {0.2})},
                                   small_norm());
    auto fine = candidate_set(db, "TCP|HTTP", View::payload);
    CHECK(fine.level == ProtocolLevel::fine);
    REQUIRE(fine.entries.size() == 1);
    CHECK(fine.entries[0]->flow_id == "a");

    auto fallback = candidate_set(db, "TCP|SSH", View::payload);
    CHECK(fallback.level == ProtocolLevel::coarse);
    CHECK(fallback.protocol == "TCP");
    CHECK(fallback.entries.size() == 2);  // "d" has no payload

    // Fine "TCP" matches "d" only for views it carries.
    CHECK(candidate_set(db, "TCP", View::length).level == ProtocolLevel::fine);
    CHECK(candidate_set(db, "TCP", View::payload).level == ProtocolLevel::coarse);

    auto none = candidate_set(db, "ICMP", View::length);
    CHECK(none.entries.empty());
}

TEST_CASE("build rejects unlabeled flows and empty input") {
    FlowRecord f = flow("a", "x", "TCP", {1});
    f.label.reset();
    CHECK_THROWS_AS(build_database({f}, small_norm()), ValidationError);
    CHECK_THROWS_AS(build_database({}, small_norm()), ValidationError);
}

TEST_CASE("extend equals a rebuild over the union") {
    std::mt19937_64 rng(12);
    auto flows = oracle::random_flows(rng, 60, 4);
    const std::vector<FlowRecord> first(flows.begin(), flows.begin() + 40), second(flows.begin() + 40, flows.end());
    const NormConfig cfg;
    const auto extended = extend_database(build_database(first, cfg), second);
    const auto rebuilt = build_database(flows, cfg);
    CHECK(extended == rebuilt);
    // Re-adding an existing id is rejected.
    CHECK_THROWS_AS(extend_database(rebuilt, {flows[0]}), ValidationError);
}

TEST_CASE("snapshot round-trips byte-exactly") {
    std::mt19937_64 rng(4);
    const auto db = build_database(oracle::random_flows(rng, 50, 3), NormConfig{}, {true});
    const auto path = temp("mti_db_roundtrip.snap");
    save_snapshot(db, path);
    const auto back = load_snapshot(path);
    CHECK(back == db);
    CHECK(back.options().stats_exclude_self);
    for (const auto& [key, s] : db.stats()) CHECK(back.find_stats(key)->std_dist == s.std_dist);
    std::filesystem::remove(path);
}

TEST_CASE("snapshot corruption is detected") {
    std::mt19937_64 rng(4);
    const auto db = build_database(oracle::random_flows(rng, 10, 2), NormConfig{});
    const auto path = temp("mti_db_corrupt.snap");
    save_snapshot(db, path);
    std::string bytes;
    {
        std::ifstream in(path, std::ios::binary);
        bytes.assign(std::istreambuf_iterator<char>(in), {});
    }
    auto write = [&](const std::string& b) {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out << b;
    };

    std::string flipped = bytes;
    flipped[bytes.size() / 2] ^= 0x5a;
    write(flipped);
    CHECK_THROWS_AS(load_snapshot(path), SnapshotError);

    write(bytes.substr(0, bytes.size() - 7));
    CHECK_THROWS_AS(load_snapshot(path), SnapshotError);

    std::string magic = bytes;
    magic[0] = 'X';
    write(magic);
    CHECK_THROWS_AS(load_snapshot(path), SnapshotError);

    std::string version = bytes;
    version[8] = 9;
    write(version);
    try {
        load_snapshot(path);
        FAIL("expected a version error");
    } catch (const SnapshotError& e) {
        CHECK(std::string(e.what()).find("version") != std::string::npos);
    }
    std::filesystem::remove(path);
    CHECK_THROWS_AS(load_snapshot(path), ValidationError);
}

}
