#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tailtta/engine.hpp"
#include "tailtta/harness.hpp"

namespace tailtta {

inline constexpr int kFormatVersion = 1;

struct StreamMetadata {
    std::size_t dim = 0;
    std::size_t num_classes = 0;
    int n_views = 1;
    std::vector<std::string> class_names;
};

struct LoadedStream {
    StreamMetadata meta;
    std::vector<StreamRecord> records;
    std::vector<std::string> warnings;
};

/// Line-delimited JSON: a header object then one record per line. Values are
/// stored as 32-bit floats. Views off unit norm by more than 1e-4 are
/// normalized with a warning.
LoadedStream load_stream(const std::filesystem::path& path);
LoadedStream parse_stream(std::istream& in, const std::string& source);
void write_stream(std::ostream& out, const StreamMetadata& meta, const std::vector<StreamRecord>& records);
void write_stream(const std::filesystem::path& path, const StreamMetadata& meta,
                  const std::vector<StreamRecord>& records);

struct LoadedPrototypes {
    PrototypeMatrix protos;
    std::vector<std::string> warnings;
};

LoadedPrototypes load_prototypes(const std::filesystem::path& path);
LoadedPrototypes parse_prototypes(std::istream& in, const std::string& source);
void write_prototypes(std::ostream& out, const PrototypeMatrix& protos);
void write_prototypes(const std::filesystem::path& path, const PrototypeMatrix& protos);

using ConfigOverride = std::pair<std::string, std::string>;

/// Sets one key from its textual value. Throws UnknownKey or RangeViolation
/// (or ParseError for malformed values), naming the key.
void set_param(HyperParams& hp, std::string_view key, std::string_view value);

/// Ordered (key, value) pairs covering every knob; values round-trip exactly.
std::vector<ConfigOverride> config_echo(const HyperParams& hp);

/// `key = value` lines with `#` comments. Later lines win.
HyperParams parse_config(std::string_view text, const std::string& source, HyperParams base = {});

/// defaults <- file <- overrides, then validate().
HyperParams load_config(const std::optional<std::filesystem::path>& path, const std::vector<ConfigOverride>& overrides,
                        HyperParams base = {});

/// Documented default config, one commented key per line.
std::string default_config_text();

/// Parses "key=value".
ConfigOverride parse_override(std::string_view text);

struct InputDigests {
    std::string stream_sha256;
    std::string prototypes_sha256;
    std::string config_sha256;   // empty when no config file was given
};

struct ReportOptions {
    bool per_sample = false;
    bool trace_loss = false;
};

void write_session_report(std::ostream& out, const HyperParams& hp, const InputDigests& inputs,
                          const SessionReport& report, const ReportOptions& options);

void write_ablation_report(std::ostream& out, const AblationReport& report, const HyperParams& base, int n_seeds);

/// Human-readable capacity / dead-class table from a session report file.
std::string render_cache_table(std::istream& report, const std::string& source);

}  // namespace tailtta
