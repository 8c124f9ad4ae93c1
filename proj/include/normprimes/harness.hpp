#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "normprimes/lattice.hpp"

namespace normprimes {

inline constexpr std::string_view kVersion = "normprimes 0.1.0";

enum class ExperimentKind {
  single_prime_deciles,
  pairs_by_cone,
  compare_fields_single,
  compare_fields_pairs,
  zeta_eval,
  invariants_table,
  residue_check,
};

std::string_view to_string(ExperimentKind kind) noexcept;
ExperimentKind parse_kind(std::string_view text);

// Flat key = value experiment description. Every field except `workers`
// enters the content hash.
struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::single_prime_deciles;
  std::optional<std::string> form;
  std::vector<std::int64_t> d;
  std::optional<std::uint64_t> n_param;
  std::optional<std::uint64_t> m_bound;
  std::optional<std::string> preset;
  std::optional<double> cap;
  std::optional<int> k_windows;
  std::optional<double> cone_lo;
  std::optional<double> cone_hi;
  std::optional<int> k_max;
  std::optional<PairBoundMode> pq_bound_mode;
  unsigned workers = 1;

  /// Parses the flat text format; '#' starts a comment. Throws ConfigError.
  static ExperimentConfig parse(std::string_view text);
  static ExperimentConfig load(const std::filesystem::path& path);

  /// Checks every parameter the kind uses, and rejects parameters it does
  /// not use. Throws ConfigError.
  void validate() const;

  /// Hashed fields in canonical text form, sorted by key.
  std::map<std::string, std::string> canonical_fields() const;
  std::string canonical_text() const;
  /// SHA-256 of canonical_text(), lowercase hex.
  std::string hash() const;
};

/// M for a preset: paper-cubic-pos N^3/(1+D), paper-cubic-neg
/// N^3 - N^3/(8D), paper-quartic N^4/(1+D), paper-power N^n, where D is
/// |an| of the form (integer division).
std::uint64_t preset_bound(std::string_view preset, const NormForm& f, std::uint64_t N);

/// Parses "<int>", "<int>^<int>" or digit groups separated by '_'.
std::uint64_t parse_bound(std::string_view text);

struct ExperimentReport {
  std::string kind;
  std::string config_hash;
  std::string version{kVersion};
  std::map<std::string, std::string> config;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::pair<std::string, std::string>> summary;
  std::vector<std::string> warnings;
  std::string status = "running";
  double wall_time_s = 0.0;

  void add_summary(std::string key, std::string value);
  std::optional<std::string> find_summary(std::string_view key) const;
  double summary_number(std::string_view key) const;

  std::string table_csv() const;
  /// key,value lines: provenance, metrics, flags and warnings.
  std::string summary_csv() const;
  /// JSON mirror; the wall time is included only when asked for.
  std::string to_json(bool with_wall_time) const;

  /// Writes <kind>.csv and <kind>.summary.csv, plus <kind>.json when
  /// `json` is set. Returns the paths written.
  std::vector<std::filesystem::path> write(const std::filesystem::path& dir, bool json) const;
};

/// 12 significant digits.
std::string format_real(double v);

struct RunOptions {
  unsigned workers = 1;
  std::optional<std::filesystem::path> checkpoint;
  std::chrono::milliseconds checkpoint_interval{10'000};
  /// Stops with Interrupted after this many newly completed shards, after
  /// writing the checkpoint.
  std::optional<std::size_t> stop_after_shards;
  std::function<void(const ProgressEvent&)> on_progress;
};

/// Runs the experiment, filling `report` as results arrive so a failed run
/// leaves a partial report behind. Throws CheckpointMismatch when the
/// checkpoint belongs to a different configuration.
void run_experiment_into(const ExperimentConfig& config, const RunOptions& opts, ExperimentReport& report);

ExperimentReport run_experiment(const ExperimentConfig& config, const RunOptions& opts = {});

/// run_experiment with checkpointing at `checkpoint_path`; resumes from it
/// when it exists.
ExperimentReport resume_or_start(const ExperimentConfig& config, const std::filesystem::path& checkpoint_path,
                                 RunOptions opts = {});

// Published reference counts for the two-field pairs comparison, keyed by
// the discriminant label used in the published tables.
struct PublishedPairCounts {
  std::int64_t label;
  std::uint64_t p_single;  // primes below 25,000,000 in the first cone
  std::uint64_t p_pairs;   // pairs below 1,000
};
std::optional<PublishedPairCounts> published_pair_counts(std::int64_t label);

/// Published (prime count) x (regulator) products for real fields at
/// 1000^2, keyed by discriminant label.
std::optional<double> published_count_times_regulator(std::int64_t label);

/// Published error (stdev/mean of q_k) of the nested-cone pairs tables for
/// the given d and bound, when the pair appears there.
std::optional<double> published_pair_error(std::int64_t d, std::uint64_t M);

/// Discriminant of Q(sqrt d): d when d = 1 mod 4, else 4d.
std::int64_t field_discriminant(std::int64_t d);

}  // namespace normprimes
