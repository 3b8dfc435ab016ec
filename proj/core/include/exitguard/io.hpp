#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "exitguard/calib.hpp"
#include "exitguard/model.hpp"
#include "exitguard/types.hpp"

namespace exitguard {

/// Logits outside +-1e6 are rejected when reading or writing logits files.
inline constexpr double kLogitMagnitudeCap = 1e6;
inline constexpr int kLogitsFormatVersion = 1;
inline constexpr int kScheduleFormatVersion = 1;
inline constexpr int kModelFormatVersion = 1;

/// 17 significant digits, locale independent; parses back bit-exactly.
std::string format_double(double v);
/// Shortest representation that parses back bit-exactly.
std::string format_shortest(double v);
/// Strict full-string parse. Throws ParseError.
double parse_double(std::string_view s);

/// Writes `content` to a temporary sibling and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);

// Logits file: one JSON header line
//   {"format":"exitguard-logits","version":1,"exits":K,"classes":C}
// followed by one JSON object per record
//   {"id":"s000001","label":2,"logits":[[...C values...], ...K rows...]}
void write_logits(std::ostream& out, const std::vector<ExitRecord>& records);
std::vector<ExitRecord> read_logits(std::istream& in);
void write_logits(const std::vector<ExitRecord>& records, const std::filesystem::path& path);
std::vector<ExitRecord> read_logits(const std::filesystem::path& path);

// Threshold schedule: versioned "key value" text, NeverExit written as "never".
std::string schedule_to_text(const ThresholdSchedule& schedule);
ThresholdSchedule schedule_from_text(std::string_view text);

// Model checkpoint: versioned header with shapes, then one parameter per line.
std::string model_to_text(const MultiExitMlp& model);
MultiExitMlp model_from_text(std::string_view text);

// Feature samples as CSV: id,label,x0,...,x{d-1}.
std::string samples_to_csv(const std::vector<Sample>& samples);
std::vector<Sample> samples_from_csv(std::string_view text);

}  // namespace exitguard
