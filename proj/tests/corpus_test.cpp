#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "rangeforge/corpus.hpp"
#include "rangeforge/error.hpp"
#include "rangeforge/rng.hpp"

#include "test_util.hpp"

using namespace rangeforge;
using namespace rangeforge::corpus;

namespace {

CorpusManifest parse_text(const std::string& text) {
    std::istringstream in(text);
    return parse_manifest(in, "inline");
}

std::map<std::pair<Label, std::string>, int> stratum_counts(
    const std::vector<SampleRecord>& samples) {
    std::map<std::pair<Label, std::string>, int> counts;
    for (const auto& s : samples) ++counts[{s.label, s.filetype}];
    return counts;
}

}  // namespace

TEST_CASE("manifest: header-only csv parses to zero records") {
    auto m = parse_text("sample_id,filetype,label,zero_day,size_bytes,content_digest\n");
    CHECK(m.records.empty());
}

TEST_CASE("manifest: csv round-trips field by field") {
    CorpusManifest m;
    m.records = {
        {"s01", "executable", Label::Benign, false, 1234, "aa11"},
        {"s02", "document", Label::Benign, false, 99, "bb22"},
        {"s03", "script", Label::Malicious, false, 777, "cc33"},
        {"s04", "archive", Label::Malicious, true, 4096, "dd44"},
    };
    auto parsed = parse_text(manifest_to_csv(m));
    REQUIRE(parsed.records.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
        CAPTURE(i);
        CHECK(parsed.records[i].sample_id == m.records[i].sample_id);
        CHECK(parsed.records[i].filetype == m.records[i].filetype);
        CHECK(parsed.records[i].label == m.records[i].label);
        CHECK(parsed.records[i].zero_day == m.records[i].zero_day);
        CHECK(parsed.records[i].size_bytes == m.records[i].size_bytes);
        CHECK(parsed.records[i].content_digest == m.records[i].content_digest);
    }
}

TEST_CASE("manifest: duplicate sample_id is rejected by name") {
    const std::string text =
        "sample_id,filetype,label,zero_day,size_bytes,content_digest\n"
        "dup01,executable,benign,false,10,aa\n"
        "dup01,document,malicious,false,20,bb\n";
    CHECK_THROWS_WITH_AS(parse_text(text), doctest::Contains("dup01"), ValidationError);
}

TEST_CASE("manifest: parse errors carry the line number") {
    const std::string text =
        "sample_id,filetype,label,zero_day,size_bytes,content_digest\n"
        "ok01,executable,benign,false,10,aa\n"
        "bad01,executable,wat,false,10,bb\n";
    try {
        parse_text(text);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line == 3);
    }
}

TEST_CASE("manifest: jsonl rows parse too") {
    const std::string text =
        R"({"sample_id":"j1","filetype":"iso","label":"malicious","zero_day":false,"size_bytes":5,"content_digest":"ee"})"
        "\n";
    auto m = parse_text(text);
    REQUIRE(m.records.size() == 1);
    CHECK(m.records[0].filetype == "iso");
    CHECK(m.records[0].label == Label::Malicious);
}

TEST_CASE("measure_distribution: counts by hand over four records") {
    CorpusManifest m;
    m.records = {
        {"a", "executable", Label::Benign, false, 1, "d1"},
        {"b", "executable", Label::Benign, false, 1, "d2"},
        {"c", "executable", Label::Benign, false, 1, "d3"},
        {"d", "document", Label::Benign, false, 1, "d4"},
    };
    auto dist = measure_distribution(m, LabelFilter::Benign);
    CHECK(dist.weights.at("executable") == doctest::Approx(0.75));
    CHECK(dist.weights.at("document") == doctest::Approx(0.25));
}

TEST_CASE("measure_distribution: singleton and empty filter") {
    CorpusManifest m;
    m.records = {{"a", "script", Label::Benign, false, 1, "d1"}};
    auto dist = measure_distribution(m, LabelFilter::Benign);
    CHECK(dist.weights.at("script") == doctest::Approx(1.0));
    CHECK_THROWS_AS(measure_distribution(m, LabelFilter::Malicious), ValidationError);
}

TEST_CASE("stratified_sample: toy quotas verified by exhaustive tally") {
    auto manifest = testutil::toy_manifest(10);  // 10 per (label, executable/document)
    TypeDistribution target;
    target.weights = {{"executable", 0.6}, {"document", 0.4}};
    auto set = stratified_sample(manifest, 20, 0.5, target, 7);

    REQUIRE(set.samples.size() == 20);
    auto counts = stratum_counts(set.samples);
    CHECK(counts[{Label::Benign, "executable"}] == 6);
    CHECK(counts[{Label::Benign, "document"}] == 4);
    CHECK(counts[{Label::Malicious, "executable"}] == 6);
    CHECK(counts[{Label::Malicious, "document"}] == 4);
}

TEST_CASE("stratified_sample: n_total zero gives an empty set") {
    auto manifest = testutil::toy_manifest(3);
    auto set = stratified_sample(manifest, 0, 0.5, std::nullopt, 1);
    CHECK(set.samples.empty());
}

TEST_CASE("stratified_sample: insufficient stratum error names label, type, counts") {
    auto manifest = testutil::toy_manifest(2);
    TypeDistribution target;
    target.weights = {{"executable", 1.0}};
    try {
        stratified_sample(manifest, 10, 0.5, target, 1);
        FAIL("expected insufficient stratum");
    } catch (const ValidationError& e) {
        const std::string what = e.what();
        CHECK(what.find("executable") != std::string::npos);
        CHECK(what.find("need 5") != std::string::npos);
        CHECK(what.find("have 2") != std::string::npos);
    }
}

TEST_CASE("stratified_sample: deterministic and permutation-insensitive") {
    auto manifest = testutil::toy_manifest(25, {"executable", "document", "script"});
    auto a = stratified_sample(manifest, 30, 0.5, std::nullopt, 99);
    auto b = stratified_sample(manifest, 30, 0.5, std::nullopt, 99);
    REQUIRE(a.samples.size() == b.samples.size());
    for (std::size_t i = 0; i < a.samples.size(); ++i) {
        CHECK(a.samples[i].sample_id == b.samples[i].sample_id);
    }

    // shuffled manifest rows select the same multiset of ids
    auto shuffled = manifest;
    Rng rng(5);
    rng.shuffle(shuffled.records);
    auto c = stratified_sample(shuffled, 30, 0.5, std::nullopt, 99);
    auto ids = [](const SampleSet& s) {
        std::multiset<std::string> out;
        for (const auto& r : s.samples) out.insert(r.sample_id);
        return out;
    };
    CHECK(ids(a) == ids(c));
}

TEST_CASE("stratified_sample: largest-remainder keeps every stratum within one") {
    Rng rng(31337);
    for (int round = 0; round < 25; ++round) {
        const int per = 30 + static_cast<int>(rng.below(20));
        auto manifest =
            testutil::toy_manifest(per, {"executable", "document", "script", "iso"});
        const auto n = static_cast<std::size_t>(20 + rng.below(60));
        const double fraction = 0.3 + rng.uniform01() * 0.4;
        auto set = stratified_sample(manifest, n, fraction, std::nullopt, rng.next_u64());
        REQUIRE(set.samples.size() == n);

        const auto benign_n = static_cast<std::int64_t>(
            std::llround(fraction * static_cast<double>(n)));
        CHECK(static_cast<std::int64_t>(set.count_label(Label::Benign)) == benign_n);

        // measured default target is uniform across the four types here
        auto counts = stratum_counts(set.samples);
        for (const auto& [key, got] : counts) {
            const double share = (key.first == Label::Benign
                                      ? static_cast<double>(benign_n)
                                      : static_cast<double>(n) - benign_n) /
                                 4.0;
            CHECK(std::abs(got - share) <= 1.0 + 1e-9);
        }
    }
}

TEST_CASE("inject_zero_days: empty list returns a byte-identical set") {
    auto manifest = testutil::toy_manifest(10);
    auto set = stratified_sample(manifest, 12, 0.5, std::nullopt, 3);
    auto out = inject_zero_days(set, {});
    CHECK(to_jsonl(out) == to_jsonl(set));
}

TEST_CASE("inject_zero_days: one zero-day replaces one matching-type malicious sample") {
    CorpusManifest manifest;
    manifest.records = {
        {"b1", "executable", Label::Benign, false, 1, "x1"},
        {"b2", "executable", Label::Benign, false, 1, "x2"},
        {"m1", "executable", Label::Malicious, false, 1, "x3"},
        {"m2", "executable", Label::Malicious, false, 1, "x4"},
    };
    auto set = stratified_sample(manifest, 4, 0.5, std::nullopt, 11);
    auto zds = testutil::toy_zero_days(1);
    auto out = inject_zero_days(set, zds);

    REQUIRE(out.samples.size() == 4);
    // set-difference oracle: exactly one original malicious id vanished,
    // replaced by the zero-day
    std::set<std::string> before;
    std::set<std::string> after;
    for (const auto& s : set.samples) before.insert(s.sample_id);
    for (const auto& s : out.samples) after.insert(s.sample_id);
    std::vector<std::string> removed;
    std::set_difference(before.begin(), before.end(), after.begin(), after.end(),
                        std::back_inserter(removed));
    REQUIRE(removed.size() == 1);
    CHECK(removed[0].front() == 'm');
    CHECK(after.count("z0000") == 1);
    CHECK(out.count_label(Label::Malicious) == set.count_label(Label::Malicious));
}

TEST_CASE("inject_zero_days: id collisions and label violations are rejected") {
    auto manifest = testutil::toy_manifest(5);
    auto set = stratified_sample(manifest, 8, 0.5, std::nullopt, 2);

    auto colliding = testutil::toy_zero_days(1);
    colliding[0].sample_id = set.samples[0].sample_id;
    CHECK_THROWS_AS(inject_zero_days(set, colliding), ValidationError);

    auto benign = testutil::toy_zero_days(1);
    benign[0].zero_day = false;
    CHECK_THROWS_AS(inject_zero_days(set, benign), ValidationError);
}

TEST_CASE("inject_zero_days: preserves totals and label split across random cases") {
    Rng rng(777);
    for (int round = 0; round < 20; ++round) {
        auto manifest = testutil::toy_manifest(30, {"executable", "document", "script"});
        const auto n = static_cast<std::size_t>(20 + rng.below(40));
        auto set = stratified_sample(manifest, n, 0.5, std::nullopt, rng.next_u64());
        const auto malicious_before = set.count_label(Label::Malicious);
        const auto zd_count = 1 + rng.below(std::min<std::uint64_t>(5, malicious_before));

        auto zds = testutil::toy_zero_days(static_cast<int>(zd_count),
                                           round % 2 == 0 ? "executable" : "iso");
        auto out = inject_zero_days(set, zds);
        CHECK(out.samples.size() == n);
        CHECK(out.count_label(Label::Malicious) == malicious_before);
        const auto zd_actual = std::count_if(out.samples.begin(), out.samples.end(),
                                             [](const SampleRecord& s) { return s.zero_day; });
        CHECK(static_cast<std::uint64_t>(zd_actual) == zd_count);
    }
}

TEST_CASE("sample set jsonl round-trip") {
    auto manifest = testutil::toy_manifest(6);
    auto set = stratified_sample(manifest, 10, 0.5, std::nullopt, 21);
    const std::string text = to_jsonl(set);
    std::istringstream in(text);
    auto back = sample_set_from_jsonl(in, "inline");
    CHECK(back.seed == set.seed);
    CHECK(back.benign_fraction == doctest::Approx(set.benign_fraction));
    REQUIRE(back.samples.size() == set.samples.size());
    CHECK(to_jsonl(back) == text);
}

TEST_CASE("synthesize: deterministic, labeled, and stratum-rich") {
    SyntheticSpec spec;
    spec.records = 2000;
    spec.benign_fraction = 0.5;
    spec.zero_days = 50;
    spec.seed = 9;
    auto a = synthesize(spec);
    auto b = synthesize(spec);
    CHECK(manifest_to_csv(a.manifest) == manifest_to_csv(b.manifest));
    CHECK(a.manifest.records.size() == 2000);
    CHECK(a.zero_days.size() == 50);
    for (const auto& zd : a.zero_days) {
        CHECK(zd.zero_day);
        CHECK(zd.label == Label::Malicious);
    }
    const auto benign = std::count_if(a.manifest.records.begin(), a.manifest.records.end(),
                                      [](const SampleRecord& r) {
                                          return r.label == Label::Benign;
                                      });
    CHECK(benign == 1000);
}
