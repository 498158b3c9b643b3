#include "fscp/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

namespace fscp::ingest {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

const char* kind_name(FieldKind k) {
  switch (k) {
    case FieldKind::numeric: return "numeric";
    case FieldKind::categorical: return "categorical";
    case FieldKind::frequency: return "frequency";
    case FieldKind::severity: return "severity";
    case FieldKind::total_amount: return "total_amount";
    case FieldKind::ignore: return "ignore";
  }
  return "numeric";
}

FieldKind parse_kind(const std::string& s, std::size_t line) {
  static const std::map<std::string, FieldKind> kinds = {
      {"numeric", FieldKind::numeric},       {"categorical", FieldKind::categorical},
      {"frequency", FieldKind::frequency},   {"severity", FieldKind::severity},
      {"total_amount", FieldKind::total_amount}, {"ignore", FieldKind::ignore}};
  auto it = kinds.find(s);
  if (it == kinds.end()) {
    throw Error("schema line " + std::to_string(line) + ": unknown column kind '" + s + "'");
  }
  return it->second;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "no" || v == "0") return false;
  throw Error("schema key '" + key + "': expected true or false, got '" + v + "'");
}

char parse_char(const std::string& key, const std::string& v) {
  if (v == "tab" || v == "\\t") return '\t';
  if (v.size() != 1) throw Error("schema key '" + key + "': expected a single character");
  return v[0];
}

bool parse_double(std::string_view text, char decimal, double& out) {
  std::string s = trim(text);
  if (decimal != '.') std::replace(s.begin(), s.end(), decimal, '.');
  if (!s.empty() && s.front() == '+') s.erase(s.begin());
  if (s.empty()) return false;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && std::isfinite(out);
}

// Splits text into CSV records, allowing quoted fields to span lines.
struct RawRecord {
  std::string text;
  std::size_t line;
};

std::vector<RawRecord> read_records(const std::string& text) {
  std::vector<RawRecord> out;
  std::string current;
  bool in_quotes = false;
  std::size_t line = 1;
  std::size_t start_line = 1;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '"') in_quotes = !in_quotes;
    if (c == '\n') {
      if (in_quotes) {
        current.push_back(c);
      } else {
        if (!current.empty() && current.back() == '\r') current.pop_back();
        out.push_back({std::move(current), start_line});
        current.clear();
        start_line = line + 1;
      }
      ++line;
      continue;
    }
    current.push_back(c);
  }
  if (!current.empty()) {
    if (current.back() == '\r') current.pop_back();
    out.push_back({std::move(current), start_line});
  }
  return out;
}

std::string quote_if_needed(const std::string& s, char delimiter) {
  const bool needs = s.find_first_of(std::string{delimiter, '"', '\n', '\r'}) != std::string::npos ||
                     (!s.empty() && (s.front() == ' ' || s.back() == ' '));
  if (!needs) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

ParseError::ParseError(std::size_t line, const std::string& column, const std::string& what)
    : Error("line " + std::to_string(line) + (column.empty() ? "" : ", column '" + column + "'") +
            ": " + what),
      line_(line),
      column_(column) {}

void SchemaConfig::validate() const {
  std::set<std::string> names;
  std::size_t n_freq = 0;
  std::size_t n_target = 0;
  for (const auto& f : fields) {
    if (f.name.empty()) throw Error("schema: empty column name");
    if (!names.insert(f.name).second) throw Error("schema: duplicate column '" + f.name + "'");
    if (f.kind == FieldKind::frequency) ++n_freq;
    if (f.kind == FieldKind::severity || f.kind == FieldKind::total_amount) ++n_target;
    if (!f.levels.empty() && f.kind != FieldKind::categorical) {
      throw Error("schema: levels declared for non-categorical column '" + f.name + "'");
    }
  }
  if (n_freq != 1) throw Error("schema: exactly one frequency column is required");
  if (n_target != 1) {
    throw Error("schema: exactly one severity or total_amount column is required");
  }
  if (decimal == delimiter) throw Error("schema: decimal separator equals delimiter");
  if (decimal != '.' && decimal != ',') throw Error("schema: decimal must be '.' or ','");
}

const FieldSpec& SchemaConfig::frequency_field() const {
  for (const auto& f : fields) {
    if (f.kind == FieldKind::frequency) return f;
  }
  throw Error("schema: no frequency column");
}

const FieldSpec& SchemaConfig::target_field() const {
  for (const auto& f : fields) {
    if (f.kind == FieldKind::severity || f.kind == FieldKind::total_amount) return f;
  }
  throw Error("schema: no severity or total_amount column");
}

std::vector<FieldSpec> SchemaConfig::predictor_fields() const {
  std::vector<FieldSpec> out;
  for (const auto& f : fields) {
    if (f.kind == FieldKind::numeric || f.kind == FieldKind::categorical) out.push_back(f);
  }
  return out;
}

SchemaConfig parse_schema(const std::string& text) {
  SchemaConfig schema;
  schema.missing_tokens = {""};
  bool missing_set = false;
  std::map<std::string, std::vector<std::string>> declared_levels;
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error("schema line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (key.rfind("column ", 0) == 0) {
      schema.fields.push_back({trim(key.substr(7)), parse_kind(value, line_no), {}});
    } else if (key.rfind("levels ", 0) == 0) {
      declared_levels[trim(key.substr(7))] = split_list(value);
    } else if (key == "delimiter") {
      schema.delimiter = parse_char(key, value);
    } else if (key == "header") {
      schema.header = parse_bool(key, value);
    } else if (key == "decimal") {
      schema.decimal = parse_char(key, value);
    } else if (key == "strict") {
      schema.strict = parse_bool(key, value);
    } else if (key == "missing") {
      for (auto& tok : split_list(value)) schema.missing_tokens.push_back(tok);
      missing_set = true;
    } else {
      throw Error("schema line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
  }
  if (!missing_set) schema.missing_tokens.push_back("NA");
  for (auto& [name, levels] : declared_levels) {
    auto it = std::find_if(schema.fields.begin(), schema.fields.end(),
                           [&](const FieldSpec& f) { return f.name == name; });
    if (it == schema.fields.end()) throw Error("schema: levels for unknown column '" + name + "'");
    it->levels = levels;
  }
  schema.validate();
  return schema;
}

SchemaConfig load_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open schema file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_schema(ss.str());
}

std::string format_schema(const SchemaConfig& schema) {
  std::ostringstream out;
  out << "delimiter = " << (schema.delimiter == '\t' ? std::string("tab") : std::string(1, schema.delimiter))
      << "\n";
  out << "header = " << (schema.header ? "true" : "false") << "\n";
  out << "decimal = " << schema.decimal << "\n";
  out << "strict = " << (schema.strict ? "true" : "false") << "\n";
  std::string missing;
  for (const auto& t : schema.missing_tokens) {
    if (t.empty()) continue;
    missing += (missing.empty() ? "" : ", ") + t;
  }
  if (!missing.empty()) out << "missing = " << missing << "\n";
  for (const auto& f : schema.fields) out << "column " << f.name << " = " << kind_name(f.kind) << "\n";
  for (const auto& f : schema.fields) {
    if (f.levels.empty()) continue;
    out << "levels " << f.name << " = ";
    for (std::size_t i = 0; i < f.levels.size(); ++i) out << (i ? ", " : "") << f.levels[i];
    out << "\n";
  }
  return out.str();
}

SchemaConfig schema_for(const ClaimsDataset& dataset, const std::string& frequency_name,
                        const std::string& severity_name) {
  SchemaConfig schema;
  for (const auto& c : dataset.columns()) {
    schema.fields.push_back({c.name,
                             c.kind == ColumnKind::categorical ? FieldKind::categorical
                                                               : FieldKind::numeric,
                             c.levels});
  }
  schema.fields.push_back({frequency_name, FieldKind::frequency, {}});
  schema.fields.push_back({severity_name, FieldKind::severity, {}});
  schema.validate();
  return schema;
}

std::vector<std::string> split_record(const std::string& line, char delimiter) {
  std::vector<std::string> out;
  std::string field;
  bool in_quotes = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      in_quotes = true;
    } else if (c == delimiter) {
      out.push_back(std::move(field));
      field.clear();
    } else {
      field.push_back(c);
    }
  }
  out.push_back(std::move(field));
  return out;
}

std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw Error("number formatting failed");
  return std::string(buf, ptr);
}

LoadResult parse_csv(const std::string& text, const SchemaConfig& schema) {
  schema.validate();
  auto records = read_records(text);
  // Drop trailing blank records.
  while (!records.empty() && trim(records.back().text).empty()) records.pop_back();

  // position[k] = file column holding schema field k
  std::vector<std::size_t> position(schema.fields.size());
  std::size_t n_file_cols = schema.fields.size();
  std::size_t first_data = 0;
  if (schema.header) {
    if (records.empty()) throw Error("CSV has no header line");
    auto header = split_record(records[0].text, schema.delimiter);
    for (auto& h : header) h = trim(h);
    n_file_cols = header.size();
    for (const auto& h : header) {
      const bool known = std::any_of(schema.fields.begin(), schema.fields.end(),
                                     [&](const FieldSpec& f) { return f.name == h; });
      if (!known) throw ParseError(records[0].line, h, "unexpected column not in schema");
    }
    for (std::size_t k = 0; k < schema.fields.size(); ++k) {
      auto it = std::find(header.begin(), header.end(), schema.fields[k].name);
      if (it == header.end()) {
        throw Error("missing required column '" + schema.fields[k].name + "'");
      }
      position[k] = static_cast<std::size_t>(it - header.begin());
    }
    first_data = 1;
  } else {
    for (std::size_t k = 0; k < position.size(); ++k) position[k] = k;
  }

  std::vector<ColumnSpec> columns;
  std::vector<std::size_t> predictor_field;  // schema index per dataset column
  std::vector<std::unordered_map<std::string, std::size_t>> level_index;
  std::size_t freq_field = 0;
  std::size_t target_field = 0;
  for (std::size_t k = 0; k < schema.fields.size(); ++k) {
    const auto& f = schema.fields[k];
    if (f.kind == FieldKind::numeric || f.kind == FieldKind::categorical) {
      ColumnSpec c{f.name, f.kind == FieldKind::categorical ? ColumnKind::categorical
                                                            : ColumnKind::numeric,
                   f.levels};
      std::unordered_map<std::string, std::size_t> index;
      for (std::size_t l = 0; l < f.levels.size(); ++l) index.emplace(f.levels[l], l);
      columns.push_back(std::move(c));
      level_index.push_back(std::move(index));
      predictor_field.push_back(k);
    } else if (f.kind == FieldKind::frequency) {
      freq_field = k;
    } else if (f.kind == FieldKind::severity || f.kind == FieldKind::total_amount) {
      target_field = k;
    }
  }
  const bool from_total = schema.fields[target_field].kind == FieldKind::total_amount;
  auto is_missing = [&](const std::string& cell) {
    const std::string t = trim(cell);
    return std::find(schema.missing_tokens.begin(), schema.missing_tokens.end(), t) !=
           schema.missing_tokens.end();
  };

  LoadResult result;
  std::vector<ClaimRecord> rows;
  for (std::size_t r = first_data; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (trim(rec.text).empty()) continue;
    auto cells = split_record(rec.text, schema.delimiter);
    if (cells.size() != n_file_cols) {
      throw ParseError(rec.line, "", "expected " + std::to_string(n_file_cols) + " fields, found " +
                                         std::to_string(cells.size()));
    }
    auto cell = [&](std::size_t k) -> const std::string& { return cells[position[k]]; };
    auto number = [&](std::size_t k) {
      const auto& name = schema.fields[k].name;
      if (is_missing(cell(k))) throw ParseError(rec.line, name, "missing value");
      double v = 0.0;
      if (!parse_double(cell(k), schema.decimal, v)) {
        throw ParseError(rec.line, name, "cannot parse '" + cell(k) + "' as a number");
      }
      return v;
    };

    ClaimRecord row;
    row.predictors.resize(columns.size());
    for (std::size_t c = 0; c < columns.size(); ++c) {
      const std::size_t k = predictor_field[c];
      if (columns[c].kind == ColumnKind::numeric) {
        row.predictors[c] = number(k);
      } else {
        if (is_missing(cell(k))) throw ParseError(rec.line, columns[c].name, "missing value");
        const std::string& label = cell(k);
        auto [it, inserted] = level_index[c].emplace(label, columns[c].levels.size());
        if (inserted) columns[c].levels.push_back(label);
        row.predictors[c] = static_cast<double>(it->second);
      }
    }

    const double freq = number(freq_field);
    const double target = number(target_field);
    std::string violation;
    if (freq < 0.0) {
      violation = "negative frequency";
    } else if (freq != std::floor(freq) || freq > 4294967295.0) {
      violation = "frequency is not a nonnegative integer";
    } else if (target < 0.0) {
      violation = from_total ? "negative total amount" : "negative severity";
    } else if (freq == 0.0 && target > 0.0) {
      violation = from_total ? "frequency is 0 but total amount is positive"
                             : "frequency is 0 but severity is positive";
    }
    if (!violation.empty()) {
      if (schema.strict) throw ParseError(rec.line, "", violation);
      result.rejected.push_back({rec.line, violation});
      continue;
    }
    row.frequency = static_cast<std::uint32_t>(freq);
    row.severity = row.frequency == 0 ? 0.0 : (from_total ? target / freq : target);
    rows.push_back(std::move(row));
  }
  result.dataset = ClaimsDataset(std::move(columns), std::move(rows));
  return result;
}

LoadResult load_csv(const std::filesystem::path& path, const SchemaConfig& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open CSV file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str(), schema);
}

std::string format_csv(const ClaimsDataset& dataset, const SchemaConfig& schema) {
  schema.validate();
  const char delim = schema.delimiter;
  auto num = [&](double v) {
    std::string s = format_number(v);
    if (schema.decimal != '.') std::replace(s.begin(), s.end(), '.', schema.decimal);
    return quote_if_needed(s, delim);
  };

  // Dataset column for each predictor field.
  std::vector<std::ptrdiff_t> source(schema.fields.size(), -1);
  for (std::size_t k = 0; k < schema.fields.size(); ++k) {
    const auto& f = schema.fields[k];
    if (f.kind != FieldKind::numeric && f.kind != FieldKind::categorical) continue;
    const auto& cols = dataset.columns();
    auto it = std::find_if(cols.begin(), cols.end(),
                           [&](const ColumnSpec& c) { return c.name == f.name; });
    if (it == cols.end()) throw Error("dataset has no column '" + f.name + "' required by schema");
    const bool cat = it->kind == ColumnKind::categorical;
    if (cat != (f.kind == FieldKind::categorical)) {
      throw Error("column '" + f.name + "' kind differs between dataset and schema");
    }
    source[k] = it - cols.begin();
  }

  std::ostringstream out;
  if (schema.header) {
    for (std::size_t k = 0; k < schema.fields.size(); ++k) {
      out << (k ? std::string(1, delim) : "") << quote_if_needed(schema.fields[k].name, delim);
    }
    out << "\n";
  }
  for (const auto& row : dataset.rows()) {
    for (std::size_t k = 0; k < schema.fields.size(); ++k) {
      if (k) out << delim;
      const auto& f = schema.fields[k];
      switch (f.kind) {
        case FieldKind::numeric:
          out << num(row.predictors[static_cast<std::size_t>(source[k])]);
          break;
        case FieldKind::categorical: {
          const auto c = static_cast<std::size_t>(source[k]);
          const auto level = static_cast<std::size_t>(row.predictors[c]);
          out << quote_if_needed(dataset.columns()[c].levels[level], delim);
          break;
        }
        case FieldKind::frequency:
          out << row.frequency;
          break;
        case FieldKind::severity:
          out << num(row.severity);
          break;
        case FieldKind::total_amount:
          out << num(row.severity * static_cast<double>(row.frequency));
          break;
        case FieldKind::ignore:
          break;
      }
    }
    out << "\n";
  }
  return out.str();
}

void write_csv(const ClaimsDataset& dataset, const std::filesystem::path& path,
               const SchemaConfig& schema) {
  const std::string text = format_csv(dataset, schema);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw Error("write to " + path.string() + " failed");
}

Encoding Encoding::fit(const ClaimsDataset& dataset, std::span<const std::size_t> fit_rows) {
  if (fit_rows.empty()) throw Error("encoding needs at least one fit row");
  Encoding enc;
  const auto& cols = dataset.columns();
  for (std::size_t c = 0; c < cols.size(); ++c) {
    Block b{cols[c].name, cols[c].kind, {}, {}};
    if (cols[c].kind == ColumnKind::numeric) {
      enc.names_.push_back(cols[c].name);
    } else {
      std::vector<bool> seen(cols[c].levels.size(), false);
      for (std::size_t i : fit_rows) {
        seen[static_cast<std::size_t>(dataset.row(i).predictors[c])] = true;
      }
      bool have_baseline = false;
      for (std::size_t l = 0; l < seen.size(); ++l) {
        if (!seen[l]) continue;
        if (!have_baseline) {
          b.baseline = cols[c].levels[l];
          have_baseline = true;
        } else {
          b.levels.push_back(cols[c].levels[l]);
          enc.names_.push_back(cols[c].name + "=" + cols[c].levels[l]);
        }
      }
    }
    enc.blocks_.push_back(std::move(b));
  }
  return enc;
}

models::FeatureMatrix Encoding::transform(const ClaimsDataset& dataset,
                                          std::span<const std::size_t> rows) const {
  const auto& cols = dataset.columns();
  // For each block: dataset column, and per dataset level the indicator slot.
  struct Plan {
    std::size_t column;
    std::size_t offset;
    std::vector<std::ptrdiff_t> slot;
  };
  std::vector<Plan> plans;
  std::size_t offset = 0;
  for (const auto& b : blocks_) {
    auto it = std::find_if(cols.begin(), cols.end(),
                           [&](const ColumnSpec& c) { return c.name == b.column; });
    if (it == cols.end() || it->kind != b.kind) {
      throw Error("dataset column '" + b.column + "' missing or of a different kind");
    }
    Plan plan{static_cast<std::size_t>(it - cols.begin()), offset, {}};
    if (b.kind == ColumnKind::numeric) {
      offset += 1;
    } else {
      for (const auto& label : it->levels) {
        auto pos = std::find(b.levels.begin(), b.levels.end(), label);
        plan.slot.push_back(pos == b.levels.end() ? -1 : pos - b.levels.begin());
      }
      offset += b.levels.size();
    }
    plans.push_back(std::move(plan));
  }

  std::vector<double> data(rows.size() * width(), 0.0);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& x = dataset.row(rows[r]).predictors;
    double* out = data.data() + r * width();
    for (std::size_t k = 0; k < plans.size(); ++k) {
      const auto& p = plans[k];
      if (blocks_[k].kind == ColumnKind::numeric) {
        out[p.offset] = x[p.column];
      } else {
        const auto s = p.slot[static_cast<std::size_t>(x[p.column])];
        if (s >= 0) out[p.offset + static_cast<std::size_t>(s)] = 1.0;
      }
    }
  }
  return models::FeatureMatrix(rows.size(), width(), std::move(data), names_);
}

models::FeatureMatrix Encoding::transform(const ClaimsDataset& dataset) const {
  std::vector<std::size_t> all(dataset.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return transform(dataset, all);
}

std::vector<double> Encoding::transform_row(const ClaimsDataset& dataset, std::size_t row) const {
  const std::size_t idx[1] = {row};
  const auto m = transform(dataset, idx);
  return std::vector<double>(m.row(0).begin(), m.row(0).end());
}

}  // namespace fscp::ingest
