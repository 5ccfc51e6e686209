#include <doctest.h>

#include <random>

#include "mti/error.hpp"
#include "mti/eval.hpp"
#include "oracles.hpp"

using namespace mti;

namespace {

std::vector<Prediction> rows(std::initializer_list<std::pair<const char*, std::vector<const char*>>> spec) {
    std::vector<Prediction> out;
    for (const auto& [truth, preds] : spec)
        for (const char* p : preds) out.push_back({truth, p});
    return out;
}

FlowRecord labeled(std::string id, std::string label, std::string proto) {
    FlowRecord f;
    f.flow_id = std::move(id);
    f.label = std::move(label);
    f.proto_fine = std::move(proto);
    f.payload = {1};
    f.pkt_lengths = {1};
    return f;
}

} // namespace

TEST_SUITE("eval_harness") {

TEST_CASE("perfect predictions score 1") {
    const auto r = evaluate_known(rows({{"a", {"a", "a"}}, {"b", {"b"}}}), {"a", "b"});
    CHECK(r.macro_f1 == 1.0);
    CHECK(r.macro_pre == 1.0);
    CHECK(r.macro_rcl == 1.0);
}

TEST_CASE("all one class over two balanced classes gives macro F1 of one third") {
    std::vector<Prediction> p;
    for (int i = 0; i < 10; ++i) p.push_back({"a", "a"});
    for (int i = 0; i < 10; ++i) p.push_back({"b", "a"});
    const auto r = evaluate_known(p, {"a", "b"});
    CHECK(r.per_class.at("a").f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(r.per_class.at("b").f1 == 0.0);
    CHECK(r.macro_f1 == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(r.macro_pre == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(r.macro_rcl == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("open-set fixture matches hand computation") {
    // 20 samples: 3 known classes plus novel.
    const auto p = rows({{"A", {"A", "A", "A", "B", "novel"}},
                         {"B", {"B", "B", "B", "B", "A"}},
                         {"C", {"C", "C", "novel", "novel"}},
                         {"novel", {"novel", "novel", "novel", "novel", "C", "A"}}});
    REQUIRE(p.size() == 20);
    const auto r = evaluate_openset(p, {"A", "B", "C"});
    const double eps = 1e-12;
    CHECK(std::abs(r.per_class.at("A").f1 - 0.6) < eps);
    CHECK(std::abs(r.per_class.at("B").f1 - 0.8) < eps);
    CHECK(std::abs(r.per_class.at("C").pre - 2.0 / 3.0) < eps);
    CHECK(std::abs(r.per_class.at("C").f1 - 4.0 / 7.0) < eps);
    CHECK(std::abs(r.pre_k - 31.0 / 45.0) < eps);
    CHECK(std::abs(r.rcl_k - 19.0 / 30.0) < eps);
    CHECK(std::abs(r.macro_f1 - 23.0 / 35.0) < eps);
    CHECK(std::abs(r.pre_n - 4.0 / 7.0) < eps);
    CHECK(std::abs(r.rcl_n - 2.0 / 3.0) < eps);
    CHECK(std::abs(r.aks - 9.0 / 14.0) < eps);
    CHECK(std::abs(r.aus - 2.0 / 3.0) < eps);
    CHECK(std::abs(r.na - 55.0 / 84.0) < eps);
    // Confusion rows sum to supports.
    for (std::size_t i = 0; i < r.labels.size(); ++i) {
        std::size_t s = 0;
        for (auto c : r.confusion[i]) s += c;
        if (r.per_class.contains(r.labels[i])) CHECK(s == r.per_class.at(r.labels[i]).support);
    }
}

TEST_CASE("all novel predictions with half known truth") {
    const auto r = evaluate_openset(rows({{"a", {"novel", "novel"}}, {"novel", {"novel", "novel"}}}), {"a"});
    CHECK(r.aks == 0.0);
    CHECK(r.aus == 1.0);
    CHECK(r.na == 0.5);
}

TEST_CASE("metrics agree with the brute-force oracle on random fixtures") {
    std::mt19937_64 rng(31);
    const std::vector<std::string> labels{"a", "b", "c", "d"};
    for (int t = 0; t < 200; ++t) {
        const bool openset = t % 2 == 1;
        std::vector<std::string> truth_space = labels, pred_space = labels;
        pred_space.push_back("novel");
        if (openset) truth_space.push_back("novel");
        std::vector<Prediction> p;
        const std::size_t n = 2 + rng() % 60;
        for (std::size_t i = 0; i < n; ++i)
            p.push_back({truth_space[rng() % truth_space.size()], pred_space[rng() % pred_space.size()]});
        if (openset) {
            p.push_back({"a", "a"});
            p.push_back({"novel", "b"});
        }
        const auto got = openset ? evaluate_openset(p, labels) : evaluate_known(p, labels);
        const auto want = oracle::brute_metrics(p, labels, openset);
        CHECK(std::abs(got.macro_pre - want.macro_pre) <= 1e-12);
        CHECK(std::abs(got.macro_rcl - want.macro_rcl) <= 1e-12);
        CHECK(std::abs(got.macro_f1 - want.macro_f1) <= 1e-12);
        for (const auto& [c, m] : got.per_class) {
            if (c == "novel") continue;
            CHECK(std::abs(m.f1 - want.f1.at(c)) <= 1e-12);
        }
        if (openset) {
            CHECK(std::abs(got.pre_k - want.pre_k) <= 1e-12);
            CHECK(std::abs(got.rcl_k - want.rcl_k) <= 1e-12);
            CHECK(std::abs(got.pre_n - want.pre_n) <= 1e-12);
            CHECK(std::abs(got.rcl_n - want.rcl_n) <= 1e-12);
            CHECK(std::abs(got.na - want.na) <= 1e-12);
        }
    }
}

TEST_CASE("failures scored as wrong land in the error column") {
    const auto r = evaluate_known({{"a", "a"}, {"a", ""}, {"b", "b"}}, {"a", "b"});
    CHECK(r.labels.back() == "<error>");
    CHECK(r.per_class.at("a").rcl == 0.5);
    CHECK(r.per_class.at("a").pre == 1.0);
}

TEST_CASE("invalid inputs") {
    CHECK_THROWS_AS(evaluate_known({}, {"a"}), ValidationError);
    CHECK_THROWS_AS(evaluate_known({{"a", "zzz"}}, {"a"}), ValidationError);
    CHECK_THROWS_AS(evaluate_known({{"novel", "a"}}, {"a"}), ValidationError);
    CHECK_THROWS_AS(evaluate_openset({{"a", "a"}}, {"a"}), ValidationError);
    CHECK_THROWS_AS(evaluate_openset({{"novel", "a"}}, {"a"}), ValidationError);
}

TEST_CASE("mean report is the arithmetic mean") {
    std::mt19937_64 rng(4);
    std::vector<MetricsReport> reports;
    for (int s = 0; s < 5; ++s) {
        std::vector<Prediction> p;
        for (int i = 0; i < 30; ++i) {
            const char* t = rng() % 2 ? "a" : "b";
            p.push_back({t, rng() % 3 ? t : "novel"});
        }
        p.push_back({"novel", rng() % 2 ? "novel" : "a"});
        reports.push_back(evaluate_openset(p, {"a", "b"}));
    }
    const auto m = mean_report(reports);
    double f1 = 0, na = 0, rn = 0;
    for (const auto& r : reports) f1 += r.macro_f1, na += r.na, rn += r.rcl_n;
    CHECK(std::abs(m.macro_f1 - f1 / 5) <= 1e-12);
    CHECK(std::abs(m.na - na / 5) <= 1e-12);
    CHECK(std::abs(m.rcl_n - rn / 5) <= 1e-12);
}

TEST_CASE("stratified split arithmetic") {
    std::vector<FlowRecord> ten;
    for (int i = 0; i < 10; ++i) ten.push_back(labeled("f" + std::to_string(i), "a", "TCP"));
    const auto s = stratified_split(ten, {}, 11);
    CHECK(s.db_part.size() == 8);
    CHECK(s.test_part.size() == 2);

    std::vector<FlowRecord> grid;
    for (const char* c : {"a", "b"})
        for (const char* p : {"TCP|HTTP", "UDP|DNS"})
            for (int i = 0; i < 5; ++i)
                grid.push_back(labeled(std::string(c) + p + std::to_string(i), c, p));
    const auto g = stratified_split(grid, {}, 3);
    std::map<std::pair<std::string, std::string>, int> db_counts, test_counts;
    for (const auto& f : g.db_part) ++db_counts[{*f.label, f.proto_coarse()}];
    for (const auto& f : g.test_part) ++test_counts[{*f.label, f.proto_coarse()}];
    CHECK(db_counts.size() == 4);
    for (const auto& [k, n] : db_counts) CHECK(n == 4);
    for (const auto& [k, n] : test_counts) CHECK(n == 1);
}

TEST_CASE("split is deterministic, disjoint and exhaustive") {
    const auto data = generate_synthetic_openset({3, 0, 30, 4.0, 2, 0.0});
    const auto a = stratified_split(data.flows, {}, 7);
    const auto b = stratified_split(data.flows, {}, 7);
    const auto c = stratified_split(data.flows, {}, 8);
    CHECK(a.db_part == b.db_part);
    CHECK(a.test_part == b.test_part);
    CHECK(a.db_part != c.db_part);
    std::set<std::string> ids;
    for (const auto* part : {&a.db_part, &a.test_part})
        for (const auto& f : *part) CHECK(ids.insert(f.flow_id).second);
    CHECK(ids.size() == data.flows.size());
}

TEST_CASE("singleton groups go to the database side with a warning") {
    const auto s = stratified_split({labeled("x", "a", "TCP"), labeled("y", "b", "TCP"), labeled("z", "b", "TCP")},
                                    {}, 1);
    CHECK(s.warnings.size() == 1);
    CHECK(std::any_of(s.db_part.begin(), s.db_part.end(), [](const auto& f) { return f.flow_id == "x"; }));
}

TEST_CASE("synthetic generator is deterministic and labels novel classes") {
    const SyntheticSpec spec{3, 2, 20, 4.0, 9, 0.1};
    const auto a = generate_synthetic_openset(spec);
    const auto b = generate_synthetic_openset(spec);
    CHECK(a.flows == b.flows);
    CHECK(a.flows.size() == 100);
    CHECK(a.known_labels.size() == 3);
    CHECK(a.novel_labels.size() == 2);
    for (const auto& f : a.flows) CHECK_NOTHROW(validate(f));
    std::size_t no_payload = 0;
    for (const auto& f : a.flows) no_payload += f.payload.empty();
    CHECK(no_payload > 0);
    CHECK(parse_synthetic_spec("synthetic:known=3,novel=2,flows=20,sep=4,seed=9,missing=0.1").flows_per_class == 20);
    CHECK_THROWS_AS(parse_synthetic_spec("synthetic:bogus=1"), ValidationError);
}

TEST_CASE("larger separation spreads classes apart relative to their spread") {
    auto ratio = [](double sep) {
        const auto d = generate_synthetic_openset({3, 0, 30, sep, 5, 0.0});
        const NormConfig cfg;
        std::vector<NormalizedViews> v;
        for (const auto& f : d.flows) v.push_back(normalize_flow(f, cfg));
        double intra = 0, inter = 0;
        std::size_t ni = 0, ne = 0;
        for (std::size_t i = 0; i < v.size(); ++i)
            for (std::size_t j = i + 1; j < v.size(); ++j) {
                const double x = oracle::dist(v[i], v[j], View::length);
                if (d.flows[i].label == d.flows[j].label) intra += x, ++ni;
                else inter += x, ++ne;
            }
        return (inter / static_cast<double>(ne)) / (intra / static_cast<double>(ni));
    };
    CHECK(ratio(0.5) < ratio(4.0));
}

}
