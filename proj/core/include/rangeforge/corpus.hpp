#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rangeforge::corpus {

enum class Label : std::uint8_t { Benign, Malicious };
enum class LabelFilter : std::uint8_t { Benign, Malicious, All };

std::string_view to_string(Label label);
Label label_from_string(std::string_view text);

/// Default filetype taxonomy: eight named types plus "other". The manifest
/// schema treats filetype as an open tag, so rows may carry anything; this
/// list is what the synthetic generator and the shipped configs use.
const std::vector<std::string>& default_filetypes();

struct SampleRecord {
    std::string sample_id;
    std::string filetype;
    Label label = Label::Benign;
    bool zero_day = false;
    std::int64_t size_bytes = 0;
    std::string content_digest;

    bool operator==(const SampleRecord&) const = default;
};

/// Per-filetype fractions summing to 1 (within 1e-9).
struct TypeDistribution {
    std::map<std::string, double> weights;

    void validate() const;
};

struct CorpusManifest {
    std::vector<SampleRecord> records;
};

/// An ordered evaluation set. The ordering is a pure function of
/// (manifest, parameters, seed); serialization is JSON-lines with a header
/// object carrying the seed and parameters.
struct SampleSet {
    std::vector<SampleRecord> samples;
    std::uint64_t seed = 0;
    std::size_t n_total = 0;
    double benign_fraction = 0.0;
    std::optional<TypeDistribution> target;  // empty: measured per label

    std::size_t count_label(Label label) const;
};

/// Reads CSV (header row required) or JSON-lines, chosen by content sniffing.
/// Columns: sample_id, filetype, label, zero_day, size_bytes, content_digest.
CorpusManifest load_manifest(const std::string& path);
CorpusManifest parse_manifest(std::istream& in, const std::string& source_name);

std::string manifest_to_csv(const CorpusManifest& manifest);

TypeDistribution measure_distribution(const CorpusManifest& manifest, LabelFilter filter);

/// Stratified selection: benign count = round(n_total * benign_fraction);
/// within each label, per-type counts follow the target with largest-remainder
/// rounding (lexicographic type tag tie-break). Selection within a stratum is
/// uniform under the seed and keys on sample_id, not row position. When no
/// target is supplied each label follows its own measured distribution.
SampleSet stratified_sample(const CorpusManifest& manifest, std::size_t n_total,
                            double benign_fraction,
                            const std::optional<TypeDistribution>& target,
                            std::uint64_t seed);

/// Replaces an equal count of uniformly chosen non-zero-day malicious samples
/// of matching filetype (falling back to any malicious stratum when a type is
/// exhausted), so n_total and the label split are preserved exactly.
/// Deterministic under set.seed.
SampleSet inject_zero_days(const SampleSet& set, const std::vector<SampleRecord>& zero_days);

std::string to_jsonl(const SampleSet& set);
SampleSet sample_set_from_jsonl(std::istream& in, const std::string& source_name);
SampleSet load_sample_set(const std::string& path);

/// Deterministic synthetic corpus for desk-scale runs: a labeled manifest plus
/// a disjoint zero-day pool whose filetypes follow the malicious mix.
struct SyntheticSpec {
    std::size_t records = 0;
    double benign_fraction = 0.5;
    std::optional<TypeDistribution> type_weights;  // empty: built-in mix
    std::size_t zero_days = 0;
    std::uint64_t seed = 0;
};

struct SyntheticCorpus {
    CorpusManifest manifest;
    std::vector<SampleRecord> zero_days;
};

SyntheticCorpus synthesize(const SyntheticSpec& spec);

}  // namespace rangeforge::corpus
