#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "rangeforge/digest.hpp"
#include "rangeforge/time.hpp"

namespace rangeforge::journal {

/// Control-plane events (phase markers, qa, audits) carry this node token.
inline constexpr std::string_view kBossNode = "boss";

struct PhasePayload {
    std::string phase;   // run | deploy | qa_pre | main | qa_post | teardown
    std::string action;  // start | end
    SimTime duration = -1;  // planned duration on start events of timed phases
};

struct AdmitPayload {
    std::string phase;  // qa | main
    std::string trial;
    std::string sample;
    int attempt = 1;
};

struct TransitionPayload {
    std::string phase;
    std::string trial;
    std::string sample;
    int attempt = 1;
    std::string from;
    std::string to;
};

struct DeterminationPayload {
    std::string phase;
    std::string trial;
    std::string sample;
    int attempt = 1;
    std::string stage;   // static | dynamic
    SimTime t_det = 0;   // ms since presentation
    std::int64_t cpu_ms = 0;
    std::int64_t peak_mem_mb = 0;
    std::string action;  // blocked | warned | quarantined | flagged
};

struct CrashPayload {
    std::string phase;
    std::string trial;
    std::string sample;
    int attempt = 1;
    std::string state;  // state the trial crashed in
};

struct EgressBlockedPayload {
    std::string phase;
    std::string trial;
    std::string sample;
    int attempt = 1;
};

struct QaPayload {
    std::string report;  // compact JSON text of the QaReport
};

struct AuditPayload {
    std::string check;
    std::string detail;  // compact JSON text
};

using Payload = std::variant<PhasePayload, AdmitPayload, TransitionPayload,
                             DeterminationPayload, CrashPayload, EgressBlockedPayload,
                             QaPayload, AuditPayload>;

std::string_view kind_of(const Payload& payload);

struct JournalEvent {
    std::uint64_t seq = 0;
    SimTime sim_time = 0;
    std::string node;
    Payload payload;
};

std::string to_json_line(const JournalEvent& event);
JournalEvent event_from_json_line(std::string_view line, const std::string& source_name,
                                  std::size_t line_no);

struct Header {
    std::string format;
    std::string digest_algo = "sha256";
    std::string engine_version;
    std::uint64_t seed = 0;
    std::string config_digest;
    std::map<std::string, std::string> inputs;  // input name -> digest
};

struct Trailer {
    std::string digest;  // digest of header line + all event lines
    std::uint64_t events = 0;
    std::map<std::string, std::int64_t> summary;
};

/// Append-only run journal. Events append with contiguous seq and
/// nondecreasing sim_time; the trailer digest covers the header line and
/// every event line, so any byte-level tamper is detectable.
class RunJournal {
public:
    RunJournal();
    explicit RunJournal(Header header);

    void append(JournalEvent event);
    void close(std::map<std::string, std::int64_t> summary);
    bool closed() const { return trailer_.has_value(); }

    std::uint64_t next_seq() const { return events_.size() + 1; }

    const Header& header() const { return header_; }
    const std::vector<JournalEvent>& events() const { return events_; }
    const Trailer& trailer() const;
    const std::string& digest() const;

    std::string to_jsonl() const;
    void write_file(const std::string& path) const;

    /// Rebuilds a closed journal from parts (skew correction produces these).
    /// Recomputes the digest; enforces nondecreasing sim_time but not seq
    /// contiguity, since a skew-injected measurement artifact interleaves
    /// per-node sequences.
    static RunJournal from_parts(Header header, std::vector<JournalEvent> events,
                                 std::map<std::string, std::int64_t> summary);

    /// Parses and verifies; throws on digest mismatch.
    static RunJournal from_jsonl(std::istream& in, const std::string& source_name);
    static RunJournal load_file(const std::string& path);

private:
    Header header_;
    std::vector<JournalEvent> events_;
    std::optional<Trailer> trailer_;
    Sha256 running_;
    SimTime last_time_ = 0;
};

std::string header_to_json_line(const Header& header);
std::string trailer_to_json_line(const Trailer& trailer);

/// Final state reconstructed from a closed journal.
struct ReplayState {
    SimTime final_sim_time = 0;
    std::uint64_t events = 0;
    std::map<std::string, std::string> completion;  // sample -> done | incomplete (main phase)
    std::map<std::string, int> attempts;            // sample -> attempts used (main phase)
    std::int64_t done = 0;
    std::int64_t incomplete = 0;
    std::int64_t determinations = 0;
    bool version_mismatch = false;
};

/// Digest is verified at load; replay additionally checks the engine version
/// and folds the event stream back into the final completion state.
ReplayState replay(const RunJournal& journal);

}  // namespace rangeforge::journal
