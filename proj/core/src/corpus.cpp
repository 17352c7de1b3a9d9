#include "rangeforge/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "rangeforge/error.hpp"
#include "rangeforge/rng.hpp"

namespace rangeforge::corpus {

using nlohmann::json;

std::string_view to_string(Label label) {
    return label == Label::Benign ? "benign" : "malicious";
}

Label label_from_string(std::string_view text) {
    if (text == "benign") return Label::Benign;
    if (text == "malicious") return Label::Malicious;
    throw ValidationError("unknown label: " + std::string(text));
}

const std::vector<std::string>& default_filetypes() {
    static const std::vector<std::string> kTypes = {
        "archive", "document", "executable", "image", "installer",
        "iso",     "java",     "script",     "other"};
    return kTypes;
}

void TypeDistribution::validate() const {
    double sum = 0.0;
    for (const auto& [type, w] : weights) {
        if (w < 0.0 || w > 1.0) {
            throw ValidationError("type weight out of [0,1] for '" + type + "'");
        }
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        throw ValidationError("type weights sum to " + std::to_string(sum) +
                              ", expected 1 within 1e-9");
    }
}

std::size_t SampleSet::count_label(Label label) const {
    return static_cast<std::size_t>(std::count_if(
        samples.begin(), samples.end(),
        [label](const SampleRecord& r) { return r.label == label; }));
}

namespace {

constexpr std::string_view kCsvHeader =
    "sample_id,filetype,label,zero_day,size_bytes,content_digest";

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

bool parse_bool(std::string_view text, const std::string& source, std::size_t line) {
    if (text == "true" || text == "1") return true;
    if (text == "false" || text == "0") return false;
    throw ParseError(source, line, "expected boolean, got '" + std::string(text) + "'");
}

SampleRecord record_from_json(const json& row, const std::string& source, std::size_t line) {
    SampleRecord rec;
    try {
        rec.sample_id = row.at("sample_id").get<std::string>();
        rec.filetype = row.at("filetype").get<std::string>();
        rec.label = label_from_string(row.at("label").get<std::string>());
        rec.zero_day = row.at("zero_day").get<bool>();
        rec.size_bytes = row.at("size_bytes").get<std::int64_t>();
        rec.content_digest = row.at("content_digest").get<std::string>();
    } catch (const json::exception& e) {
        throw ParseError(source, line, e.what());
    }
    return rec;
}

json record_to_json(const SampleRecord& r) {
    return json{{"sample_id", r.sample_id},
                {"filetype", r.filetype},
                {"label", std::string(to_string(r.label))},
                {"zero_day", r.zero_day},
                {"size_bytes", r.size_bytes},
                {"content_digest", r.content_digest}};
}

void check_record(const SampleRecord& rec, const std::string& source, std::size_t line) {
    if (rec.sample_id.empty()) throw ParseError(source, line, "empty sample_id");
    if (rec.filetype.empty()) throw ParseError(source, line, "empty filetype");
    if (rec.size_bytes < 0) throw ParseError(source, line, "negative size_bytes");
    if (rec.zero_day && rec.label != Label::Malicious) {
        throw ParseError(source, line,
                         "zero_day sample '" + rec.sample_id + "' must be labeled malicious");
    }
}

void check_unique_ids(const CorpusManifest& manifest, const std::string& source) {
    std::unordered_set<std::string_view> seen;
    seen.reserve(manifest.records.size());
    for (const auto& rec : manifest.records) {
        if (!seen.insert(rec.sample_id).second) {
            throw ValidationError(source + ": duplicate sample_id '" + rec.sample_id + "'");
        }
    }
}

}  // namespace

CorpusManifest parse_manifest(std::istream& in, const std::string& source_name) {
    CorpusManifest manifest;
    std::string line;
    std::size_t line_no = 0;
    bool csv = false;
    bool saw_header = false;

    while (std::getline(in, line)) {
        ++line_no;
        // strip trailing CR for CRLF inputs
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;

        if (line_no == 1 || (!saw_header && manifest.records.empty())) {
            if (line.front() == '{') {
                csv = false;
            } else if (line == kCsvHeader) {
                csv = true;
                saw_header = true;
                continue;
            } else if (line.front() != '{') {
                throw ParseError(source_name, line_no,
                                 "expected JSON-lines rows or CSV header '" +
                                     std::string(kCsvHeader) + "'");
            }
        }

        SampleRecord rec;
        if (csv) {
            auto fields = split_csv_line(line);
            if (fields.size() != 6) {
                throw ParseError(source_name, line_no,
                                 "expected 6 columns, got " + std::to_string(fields.size()));
            }
            rec.sample_id = fields[0];
            rec.filetype = fields[1];
            try {
                rec.label = label_from_string(fields[2]);
            } catch (const ValidationError& e) {
                throw ParseError(source_name, line_no, e.what());
            }
            rec.zero_day = parse_bool(fields[3], source_name, line_no);
            try {
                rec.size_bytes = std::stoll(fields[4]);
            } catch (const std::exception&) {
                throw ParseError(source_name, line_no, "bad size_bytes '" + fields[4] + "'");
            }
            rec.content_digest = fields[5];
        } else {
            json row = json::parse(line, nullptr, false);
            if (row.is_discarded()) throw ParseError(source_name, line_no, "invalid JSON");
            rec = record_from_json(row, source_name, line_no);
        }
        check_record(rec, source_name, line_no);
        manifest.records.push_back(std::move(rec));
    }

    check_unique_ids(manifest, source_name);
    return manifest;
}

CorpusManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open manifest: " + path);
    return parse_manifest(in, path);
}

std::string manifest_to_csv(const CorpusManifest& manifest) {
    std::string out(kCsvHeader);
    out.push_back('\n');
    for (const auto& r : manifest.records) {
        out += r.sample_id;
        out += ',';
        out += r.filetype;
        out += ',';
        out += to_string(r.label);
        out += ',';
        out += r.zero_day ? "true" : "false";
        out += ',';
        out += std::to_string(r.size_bytes);
        out += ',';
        out += r.content_digest;
        out += '\n';
    }
    return out;
}

TypeDistribution measure_distribution(const CorpusManifest& manifest, LabelFilter filter) {
    std::map<std::string, std::size_t> counts;
    std::size_t total = 0;
    for (const auto& rec : manifest.records) {
        const bool match = filter == LabelFilter::All ||
                           (filter == LabelFilter::Benign && rec.label == Label::Benign) ||
                           (filter == LabelFilter::Malicious && rec.label == Label::Malicious);
        if (!match) continue;
        ++counts[rec.filetype];
        ++total;
    }
    if (total == 0) throw ValidationError("measure_distribution: no records match the filter");

    TypeDistribution dist;
    for (const auto& [type, n] : counts) {
        dist.weights[type] = static_cast<double>(n) / static_cast<double>(total);
    }
    return dist;
}

namespace {

/// Largest-remainder apportionment of n across the given weights.
/// Ties broken by larger weight, then lexicographic type tag.
std::map<std::string, std::size_t> apportion(const std::map<std::string, double>& weights,
                                             std::size_t n) {
    std::map<std::string, std::size_t> out;
    std::vector<std::pair<std::string, double>> rema;
    std::size_t assigned = 0;
    for (const auto& [type, w] : weights) {
        const double share = w * static_cast<double>(n);
        const auto base = static_cast<std::size_t>(std::floor(share));
        out[type] = base;
        assigned += base;
        rema.emplace_back(type, share - std::floor(share));
    }
    std::sort(rema.begin(), rema.end(), [&](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    for (std::size_t i = 0; assigned < n && i < rema.size(); ++i, ++assigned) {
        ++out[rema[i].first];
    }
    if (assigned != n) {
        throw ValidationError("apportion: weights do not cover the requested count");
    }
    return out;
}

TypeDistribution measured_for_label(const CorpusManifest& manifest, Label label) {
    return measure_distribution(manifest, label == Label::Benign ? LabelFilter::Benign
                                                                 : LabelFilter::Malicious);
}

}  // namespace

SampleSet stratified_sample(const CorpusManifest& manifest, std::size_t n_total,
                            double benign_fraction,
                            const std::optional<TypeDistribution>& target,
                            std::uint64_t seed) {
    if (benign_fraction < 0.0 || benign_fraction > 1.0) {
        throw ValidationError("benign_fraction must be in [0,1]");
    }
    if (target) target->validate();

    SampleSet set;
    set.seed = seed;
    set.n_total = n_total;
    set.benign_fraction = benign_fraction;
    set.target = target;
    if (n_total == 0) return set;

    const auto benign_n = static_cast<std::size_t>(
        std::llround(benign_fraction * static_cast<double>(n_total)));
    const std::size_t malicious_n = n_total - benign_n;

    // Strata keyed (label, type); members sorted by id so selection is
    // insensitive to manifest row order.
    std::map<std::pair<Label, std::string>, std::vector<const SampleRecord*>> strata;
    for (const auto& rec : manifest.records) {
        strata[{rec.label, rec.filetype}].push_back(&rec);
    }
    for (auto& [key, members] : strata) {
        std::sort(members.begin(), members.end(),
                  [](const SampleRecord* a, const SampleRecord* b) {
                      return a->sample_id < b->sample_id;
                  });
    }

    const Rng root = Rng(seed).substream("stratified_sample");
    for (const auto& [label, label_n] :
         {std::pair{Label::Benign, benign_n}, std::pair{Label::Malicious, malicious_n}}) {
        if (label_n == 0) continue;
        const TypeDistribution dist = target ? *target : measured_for_label(manifest, label);
        const auto quotas = apportion(dist.weights, label_n);
        for (const auto& [type, quota] : quotas) {
            if (quota == 0) continue;
            auto it = strata.find({label, type});
            const std::size_t available = it == strata.end() ? 0 : it->second.size();
            if (available < quota) {
                throw ValidationError(
                    "insufficient stratum (" + std::string(to_string(label)) + ", " + type +
                    "): need " + std::to_string(quota) + ", have " + std::to_string(available));
            }
            Rng stream = root.substream(std::string(to_string(label)) + "/" + type);
            for (std::size_t i : stream.sample_indices(available, quota)) {
                set.samples.push_back(*it->second[i]);
            }
        }
    }

    // Mix labels and types; still a pure function of (manifest, params, seed).
    Rng mix = root.substream("mix");
    mix.shuffle(set.samples);
    return set;
}

SampleSet inject_zero_days(const SampleSet& set, const std::vector<SampleRecord>& zero_days) {
    if (zero_days.empty()) return set;

    std::unordered_set<std::string_view> set_ids;
    set_ids.reserve(set.samples.size());
    for (const auto& s : set.samples) set_ids.insert(s.sample_id);

    std::unordered_set<std::string_view> injected_ids;
    for (const auto& zd : zero_days) {
        if (!zd.zero_day || zd.label != Label::Malicious) {
            throw ValidationError("zero-day injection: '" + zd.sample_id +
                                  "' must have zero_day=true and label=malicious");
        }
        if (set_ids.count(zd.sample_id) != 0 || !injected_ids.insert(zd.sample_id).second) {
            throw ValidationError("zero-day injection: id collision on '" + zd.sample_id + "'");
        }
    }

    // Replacement candidates: positions of non-zero-day malicious samples,
    // grouped by filetype and ordered by id for permutation insensitivity.
    std::map<std::string, std::vector<std::size_t>> by_type;
    for (std::size_t i = 0; i < set.samples.size(); ++i) {
        const auto& s = set.samples[i];
        if (s.label == Label::Malicious && !s.zero_day) by_type[s.filetype].push_back(i);
    }
    for (auto& [type, positions] : by_type) {
        std::sort(positions.begin(), positions.end(), [&](std::size_t a, std::size_t b) {
            return set.samples[a].sample_id < set.samples[b].sample_id;
        });
    }

    std::size_t candidates = 0;
    for (const auto& [type, v] : by_type) candidates += v.size();
    if (candidates < zero_days.size()) {
        throw ValidationError("zero-day injection: " + std::to_string(zero_days.size()) +
                              " zero-days but only " + std::to_string(candidates) +
                              " replaceable malicious samples");
    }

    const Rng root = Rng(set.seed).substream("inject_zero_days");
    std::vector<bool> taken(set.samples.size(), false);

    // Zero-days grouped by type; matching-type replacement first.
    std::map<std::string, std::vector<const SampleRecord*>> zd_by_type;
    for (const auto& zd : zero_days) zd_by_type[zd.filetype].push_back(&zd);

    SampleSet out = set;
    std::vector<const SampleRecord*> fallback;
    for (const auto& [type, zds] : zd_by_type) {
        auto it = by_type.find(type);
        std::vector<std::size_t>* pool = it == by_type.end() ? nullptr : &it->second;
        std::size_t usable = pool ? pool->size() : 0;
        const std::size_t take = std::min(usable, zds.size());
        if (take > 0) {
            Rng stream = root.substream("type/" + type);
            const auto picks = stream.sample_indices(usable, take);
            for (std::size_t k = 0; k < take; ++k) {
                const std::size_t pos = (*pool)[picks[k]];
                taken[pos] = true;
                out.samples[pos] = *zds[k];
            }
        }
        for (std::size_t k = take; k < zds.size(); ++k) fallback.push_back(zds[k]);
    }

    if (!fallback.empty()) {
        std::vector<std::size_t> remaining;
        for (const auto& [type, positions] : by_type) {
            for (std::size_t pos : positions) {
                if (!taken[pos]) remaining.push_back(pos);
            }
        }
        std::sort(remaining.begin(), remaining.end(), [&](std::size_t a, std::size_t b) {
            return set.samples[a].sample_id < set.samples[b].sample_id;
        });
        Rng stream = root.substream("fallback");
        const auto picks = stream.sample_indices(remaining.size(), fallback.size());
        for (std::size_t k = 0; k < fallback.size(); ++k) {
            out.samples[remaining[picks[k]]] = *fallback[k];
        }
    }
    return out;
}

std::string to_jsonl(const SampleSet& set) {
    json header{{"kind", "rangeforge.sample_set/1"},
                {"seed", set.seed},
                {"n_total", set.n_total},
                {"benign_fraction", set.benign_fraction}};
    if (set.target) {
        header["target"] = set.target->weights;
    } else {
        header["target"] = "measured";
    }

    std::string out = header.dump();
    out.push_back('\n');
    for (const auto& s : set.samples) {
        out += record_to_json(s).dump();
        out.push_back('\n');
    }
    return out;
}

SampleSet sample_set_from_jsonl(std::istream& in, const std::string& source_name) {
    SampleSet set;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        json row = json::parse(line, nullptr, false);
        if (row.is_discarded()) throw ParseError(source_name, line_no, "invalid JSON");
        if (line_no == 1) {
            if (row.value("kind", "") != "rangeforge.sample_set/1") {
                throw ParseError(source_name, 1, "missing sample-set header object");
            }
            set.seed = row.at("seed").get<std::uint64_t>();
            set.n_total = row.at("n_total").get<std::size_t>();
            set.benign_fraction = row.at("benign_fraction").get<double>();
            if (row.at("target").is_object()) {
                TypeDistribution dist;
                for (auto& [k, v] : row.at("target").items()) dist.weights[k] = v.get<double>();
                set.target = std::move(dist);
            }
            continue;
        }
        SampleRecord rec = record_from_json(row, source_name, line_no);
        check_record(rec, source_name, line_no);
        set.samples.push_back(std::move(rec));
    }
    if (line_no == 0) throw ParseError(source_name, 1, "empty sample-set file");
    return set;
}

SampleSet load_sample_set(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open sample set: " + path);
    return sample_set_from_jsonl(in, path);
}

namespace {

TypeDistribution builtin_mix() {
    // Roughly an office-plus-internet file mix. Purely illustrative; real
    // distributions are a config input.
    TypeDistribution dist;
    dist.weights = {{"executable", 0.30}, {"document", 0.22}, {"script", 0.13},
                    {"archive", 0.10},    {"image", 0.08},    {"java", 0.06},
                    {"installer", 0.05},  {"iso", 0.02},      {"other", 0.04}};
    return dist;
}

std::string synth_digest(std::string_view id, std::uint64_t seed) {
    std::uint64_t h = fnv1a64(id, seed ^ 0x5bd1e995u);
    const std::uint64_t a = splitmix64(h);
    const std::uint64_t b = splitmix64(h);
    char buf[33];
    std::snprintf(buf, sizeof(buf), "%016llx%016llx", static_cast<unsigned long long>(a),
                  static_cast<unsigned long long>(b));
    return buf;
}

std::vector<std::string> types_for(const TypeDistribution& dist, std::size_t n, Rng stream) {
    const auto quotas = apportion(dist.weights, n);
    std::vector<std::string> types;
    types.reserve(n);
    for (const auto& [type, q] : quotas) {
        for (std::size_t i = 0; i < q; ++i) types.push_back(type);
    }
    stream.shuffle(types);
    return types;
}

}  // namespace

SyntheticCorpus synthesize(const SyntheticSpec& spec) {
    const TypeDistribution dist = spec.type_weights ? *spec.type_weights : builtin_mix();
    dist.validate();

    SyntheticCorpus out;
    const Rng root = Rng(spec.seed).substream("synthesize");

    const auto benign_n = static_cast<std::size_t>(
        std::llround(spec.benign_fraction * static_cast<double>(spec.records)));
    const std::size_t malicious_n = spec.records - benign_n;

    const auto benign_types = types_for(dist, benign_n, root.substream("types/benign"));
    const auto mal_types = types_for(dist, malicious_n, root.substream("types/malicious"));

    Rng sizes = root.substream("sizes");
    out.manifest.records.reserve(spec.records);
    char id[32];
    for (std::size_t i = 0; i < benign_n; ++i) {
        std::snprintf(id, sizeof(id), "b%07zu", i);
        out.manifest.records.push_back(SampleRecord{
            id, benign_types[i], Label::Benign, false,
            sizes.uniform_int(1024, 64 << 20), synth_digest(id, spec.seed)});
    }
    for (std::size_t i = 0; i < malicious_n; ++i) {
        std::snprintf(id, sizeof(id), "m%07zu", i);
        out.manifest.records.push_back(SampleRecord{
            id, mal_types[i], Label::Malicious, false,
            sizes.uniform_int(1024, 64 << 20), synth_digest(id, spec.seed)});
    }

    const auto zd_types = types_for(dist, spec.zero_days, root.substream("types/zero_day"));
    out.zero_days.reserve(spec.zero_days);
    for (std::size_t i = 0; i < spec.zero_days; ++i) {
        std::snprintf(id, sizeof(id), "z%07zu", i);
        out.zero_days.push_back(SampleRecord{
            id, zd_types[i], Label::Malicious, true,
            sizes.uniform_int(1024, 64 << 20), synth_digest(id, spec.seed)});
    }
    return out;
}

}  // namespace rangeforge::corpus
