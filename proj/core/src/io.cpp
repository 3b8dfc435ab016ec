#include "exitguard/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <system_error>

#include "json.hpp"

#include "exitguard/error.hpp"

namespace exitguard {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

std::string format_shortest(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view s) {
  double v = 0.0;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  if (!s.empty() && *begin == '+') ++begin;
  const auto res = std::from_chars(begin, end, v);
  if (res.ec != std::errc() || res.ptr != end || s.empty()) {
    throw ParseError("not a number: '" + std::string(s) + "'");
  }
  return v;
}

void write_file_atomic(const fs::path& path, std::string_view content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// Logits file

namespace {

void check_logit_range(double z, const std::string& where) {
  if (!std::isfinite(z) || std::abs(z) > kLogitMagnitudeCap) {
    throw RangeError(where + ": logit " + format_shortest(z) + " outside +-1e6");
  }
}

std::size_t json_index(const json& j, const char* key, std::size_t line) {
  if (!j.contains(key) || !j[key].is_number_unsigned()) {
    throw ParseError("line " + std::to_string(line) + ": field '" + key +
                     "' missing or not a non-negative integer");
  }
  return j[key].get<std::size_t>();
}

}  // namespace

void write_logits(std::ostream& out, const std::vector<ExitRecord>& records) {
  validate_batch(records);
  const std::size_t k = records.empty() ? 0 : records.front().exits();
  const std::size_t c = records.empty() ? 0 : records.front().classes();
  out << R"({"format":"exitguard-logits","version":)" << kLogitsFormatVersion
      << R"(,"exits":)" << k << R"(,"classes":)" << c << "}\n";
  for (const auto& r : records) {
    out << R"({"id":)" << json(r.id).dump() << R"(,"label":)" << r.label << R"(,"logits":[)";
    for (std::size_t j = 0; j < k; ++j) {
      out << (j ? ",[" : "[");
      const auto row = r.logits.row(j);
      for (std::size_t i = 0; i < c; ++i) {
        check_logit_range(row[i], "record '" + r.id + "'");
        if (i) out << ',';
        out << format_double(row[i]);
      }
      out << ']';
    }
    out << "]}\n";
  }
}

std::vector<ExitRecord> read_logits(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::size_t k = 0, c = 0;
  bool have_header = false;
  std::vector<ExitRecord> records;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError("line " + std::to_string(line_no) + ": malformed record (" + e.what() + ")");
    }
    if (!j.is_object()) throw ParseError("line " + std::to_string(line_no) + ": not an object");
    if (!have_header) {
      if (j.value("format", "") != "exitguard-logits") {
        throw ParseError("line " + std::to_string(line_no) + ": missing logits file header");
      }
      if (json_index(j, "version", line_no) != kLogitsFormatVersion) {
        throw FormatError("unsupported logits format version");
      }
      k = json_index(j, "exits", line_no);
      c = json_index(j, "classes", line_no);
      have_header = true;
      continue;
    }
    ExitRecord r;
    if (!j.contains("id") || !j["id"].is_string()) {
      throw ParseError("line " + std::to_string(line_no) + ": field 'id' missing or not a string");
    }
    r.id = j["id"].get<std::string>();
    r.label = json_index(j, "label", line_no);
    if (!j.contains("logits") || !j["logits"].is_array()) {
      throw ParseError("line " + std::to_string(line_no) + ": field 'logits' missing");
    }
    const auto& rows = j["logits"];
    if (rows.size() != k) {
      throw FormatError("line " + std::to_string(line_no) + ": " + std::to_string(rows.size()) +
                        " exits, header says " + std::to_string(k));
    }
    std::vector<double> data;
    data.reserve(k * c);
    for (const auto& row : rows) {
      if (!row.is_array() || row.size() != c) {
        throw FormatError("line " + std::to_string(line_no) + ": logit row length differs from " +
                          std::to_string(c) + " classes");
      }
      for (const auto& v : row) {
        if (!v.is_number()) {
          throw ParseError("line " + std::to_string(line_no) + ": non-numeric logit");
        }
        const double z = v.get<double>();
        check_logit_range(z, "line " + std::to_string(line_no));
        data.push_back(z);
      }
    }
    r.logits = LogitMatrix(k, c, std::move(data));
    if (r.label >= c) {
      throw FormatError("line " + std::to_string(line_no) + ": label out of range");
    }
    records.push_back(std::move(r));
  }
  if (!have_header) throw ParseError("logits file has no header line");
  return records;
}

void write_logits(const std::vector<ExitRecord>& records, const fs::path& path) {
  std::ostringstream out;
  write_logits(out, records);
  write_file_atomic(path, out.str());
}

std::vector<ExitRecord> read_logits(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return read_logits(in);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  } catch (const RangeError& e) {
    throw RangeError(path.string() + ": " + e.what());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Key/value text documents

namespace {

struct KeyValueLine {
  std::size_t line_no = 0;
  std::vector<std::string> tokens;
};

std::vector<KeyValueLine> tokenize(std::string_view text) {
  std::vector<KeyValueLine> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    KeyValueLine kv{line_no, {}};
    for (std::string tok; ls >> tok;) kv.tokens.push_back(tok);
    if (!kv.tokens.empty()) out.push_back(std::move(kv));
  }
  return out;
}

const KeyValueLine& expect(const std::vector<KeyValueLine>& lines, std::size_t& pos,
                           std::string_view key, std::size_t min_tokens = 2) {
  if (pos >= lines.size()) throw ParseError("unexpected end of document, expected '" +
                                            std::string(key) + "'");
  const auto& kv = lines[pos++];
  if (kv.tokens[0] != key || kv.tokens.size() < min_tokens) {
    throw ParseError("line " + std::to_string(kv.line_no) + ": expected '" + std::string(key) + "'");
  }
  return kv;
}

std::size_t parse_count(const std::string& s, std::size_t line_no) {
  std::size_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ParseError("line " + std::to_string(line_no) + ": not a count: '" + s + "'");
  }
  return v;
}

void expect_header(const std::vector<KeyValueLine>& lines, std::size_t& pos,
                   std::string_view format, int version) {
  const auto& f = expect(lines, pos, "format");
  if (f.tokens[1] != format) throw ParseError("not a " + std::string(format) + " document");
  const auto& v = expect(lines, pos, "version");
  if (parse_count(v.tokens[1], v.line_no) != static_cast<std::size_t>(version)) {
    throw FormatError("unsupported " + std::string(format) + " version " + v.tokens[1]);
  }
}

}  // namespace

std::string schedule_to_text(const ThresholdSchedule& s) {
  std::ostringstream out;
  out << "format exitguard-schedule\n";
  out << "version " << kScheduleFormatVersion << '\n';
  out << "method " << to_string(s.method) << '\n';
  out << "budget " << to_string(s.budget) << '\n';
  out << "delta " << (s.delta ? format_double(*s.delta) : "none") << '\n';
  out << "value " << (s.heuristic_value ? format_double(*s.heuristic_value) : "none") << '\n';
  out << "exits " << s.exits() << '\n';
  for (std::size_t j = 0; j < s.thresholds.size(); ++j) {
    const auto& t = s.thresholds[j];
    out << "threshold " << (j + 1) << ' ' << (t.is_never() ? "never" : format_double(t.value()))
        << ' ' << (j < s.cal_sizes.size() ? s.cal_sizes[j] : 0) << '\n';
  }
  return out.str();
}

ThresholdSchedule schedule_from_text(std::string_view text) {
  const auto lines = tokenize(text);
  std::size_t pos = 0;
  expect_header(lines, pos, "exitguard-schedule", kScheduleFormatVersion);
  ThresholdSchedule s;
  try {
    s.method = parse_gate_method(expect(lines, pos, "method").tokens[1]);
    s.budget = parse_risk_budget(expect(lines, pos, "budget").tokens[1]);
  } catch (const ConfigError& e) {
    throw ParseError(std::string("schedule: ") + e.what());
  }
  const auto& d = expect(lines, pos, "delta");
  if (d.tokens[1] != "none") s.delta = parse_double(d.tokens[1]);
  const auto& v = expect(lines, pos, "value");
  if (v.tokens[1] != "none") s.heuristic_value = parse_double(v.tokens[1]);
  const auto& e = expect(lines, pos, "exits");
  const std::size_t exits = parse_count(e.tokens[1], e.line_no);
  if (exits < 2) throw FormatError("schedule needs at least two exits");
  for (std::size_t j = 0; j + 1 < exits; ++j) {
    const auto& t = expect(lines, pos, "threshold", 4);
    if (parse_count(t.tokens[1], t.line_no) != j + 1) {
      throw FormatError("line " + std::to_string(t.line_no) + ": thresholds out of order");
    }
    s.thresholds.push_back(t.tokens[2] == "never" ? Threshold::never()
                                                  : Threshold::at(parse_double(t.tokens[2])));
    s.cal_sizes.push_back(parse_count(t.tokens[3], t.line_no));
  }
  if (pos != lines.size()) {
    throw FormatError("line " + std::to_string(lines[pos].line_no) + ": trailing content");
  }
  if (s.delta && !(*s.delta > 0.0 && *s.delta <= 1.0)) {
    throw FormatError("schedule delta outside (0, 1]");
  }
  return s;
}

std::string model_to_text(const MultiExitMlp& model) {
  std::ostringstream out;
  out << "format exitguard-model\n";
  out << "version " << kModelFormatVersion << '\n';
  out << "activation " << to_string(model.activation()) << '\n';
  out << "input_dim " << model.input_dim() << '\n';
  out << "classes " << model.classes() << '\n';
  out << "widths";
  for (auto w : model.shape().widths) out << ' ' << w;
  out << '\n';
  out << "parameters " << model.parameter_count() << '\n';
  for (double p : model.parameters()) out << format_double(p) << '\n';
  return out.str();
}

MultiExitMlp model_from_text(std::string_view text) {
  const auto lines = tokenize(text);
  std::size_t pos = 0;
  expect_header(lines, pos, "exitguard-model", kModelFormatVersion);
  Activation act;
  try {
    act = parse_activation(expect(lines, pos, "activation").tokens[1]);
  } catch (const ConfigError& e) {
    throw ParseError(std::string("model: ") + e.what());
  }
  MlpShape shape;
  const auto& in = expect(lines, pos, "input_dim");
  shape.input_dim = parse_count(in.tokens[1], in.line_no);
  const auto& cl = expect(lines, pos, "classes");
  shape.classes = parse_count(cl.tokens[1], cl.line_no);
  const auto& w = expect(lines, pos, "widths");
  for (std::size_t i = 1; i < w.tokens.size(); ++i) {
    shape.widths.push_back(parse_count(w.tokens[i], w.line_no));
  }
  const auto& pc = expect(lines, pos, "parameters");
  const std::size_t count = parse_count(pc.tokens[1], pc.line_no);
  MultiExitMlp model;
  try {
    model = MultiExitMlp(shape, act);
  } catch (const ConfigError& e) {
    throw FormatError(std::string("model shape: ") + e.what());
  }
  if (count != model.parameter_count()) {
    throw FormatError("parameter count " + std::to_string(count) + " does not match shape (" +
                      std::to_string(model.parameter_count()) + ")");
  }
  if (lines.size() - pos != count) throw FormatError("parameter list length mismatch");
  auto params = model.parameters();
  for (std::size_t i = 0; i < count; ++i) {
    const auto& kv = lines[pos + i];
    if (kv.tokens.size() != 1) {
      throw ParseError("line " + std::to_string(kv.line_no) + ": expected one value");
    }
    params[i] = parse_double(kv.tokens[0]);
  }
  return model;
}

std::string samples_to_csv(const std::vector<Sample>& samples) {
  std::ostringstream out;
  const std::size_t d = samples.empty() ? 0 : samples.front().features.size();
  out << "id,label";
  for (std::size_t i = 0; i < d; ++i) out << ",x" << i;
  out << '\n';
  for (const auto& s : samples) {
    if (s.features.size() != d) throw InvalidInput("samples differ in feature dimension");
    if (s.id.find_first_of(",\n\r") != std::string::npos) {
      throw InvalidInput("sample id '" + s.id + "' contains a CSV delimiter");
    }
    out << s.id << ',' << s.label;
    for (double v : s.features) out << ',' << format_double(v);
    out << '\n';
  }
  return out.str();
}

std::vector<Sample> samples_from_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line)) throw ParseError("samples file is empty");
  auto split = [](const std::string& l) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(l);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!l.empty() && l.back() == ',') cells.emplace_back();
    return cells;
  };
  const auto header = split(line);
  if (header.size() < 3 || header[0] != "id" || header[1] != "label") {
    throw ParseError("line 1: expected header id,label,x0,...");
  }
  const std::size_t d = header.size() - 2;
  std::vector<Sample> samples;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != d + 2) {
      throw ParseError("line " + std::to_string(line_no) + ": expected " +
                       std::to_string(d + 2) + " columns");
    }
    Sample s;
    s.id = cells[0];
    s.label = parse_count(cells[1], line_no);
    s.features.reserve(d);
    for (std::size_t i = 0; i < d; ++i) {
      try {
        s.features.push_back(parse_double(cells[i + 2]));
      } catch (const ParseError& e) {
        throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
      }
    }
    samples.push_back(std::move(s));
  }
  return samples;
}

}  // namespace exitguard
