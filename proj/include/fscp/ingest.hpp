#pragma once

// CSV ingestion driven by a schema file, and one-hot encoding of predictor
// columns into model-ready feature matrices.

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "fscp/core.hpp"
#include "fscp/models/feature_matrix.hpp"

namespace fscp::ingest {

enum class FieldKind { numeric, categorical, frequency, severity, total_amount, ignore };

struct FieldSpec {
  std::string name;
  FieldKind kind = FieldKind::numeric;
  // Optional declared level dictionary for categorical fields; labels not
  // declared here are appended in order of first appearance.
  std::vector<std::string> levels;
};

/// Column inventory plus file options.
///
/// Exactly one frequency column and exactly one of {severity, total_amount}
/// must be present. With total_amount, severity is derived as
/// total / frequency when frequency > 0 and 0 otherwise.
struct SchemaConfig {
  std::vector<FieldSpec> fields;
  char delimiter = ',';
  bool header = true;
  char decimal = '.';
  std::vector<std::string> missing_tokens = {"", "NA"};
  // Strict mode throws on invalid rows; otherwise they are skipped and
  // reported in LoadResult::rejected.
  bool strict = true;

  void validate() const;
  const FieldSpec& frequency_field() const;
  const FieldSpec& target_field() const;  // severity or total_amount
  std::vector<FieldSpec> predictor_fields() const;
};

/// Parse the key-value schema format:
///
///   # comment
///   delimiter = ,
///   header = true
///   decimal = .
///   missing = NA
///   strict = true
///   column Ageph = numeric
///   column Sex = categorical
///   column NClaims = frequency
///   column Amount = total_amount
///   levels Sex = male, female
///
/// Column order in the file is the CSV column order.
SchemaConfig parse_schema(const std::string& text);
SchemaConfig load_schema(const std::filesystem::path& path);
std::string format_schema(const SchemaConfig& schema);

/// Schema whose predictors, frequency and severity columns match `dataset`.
SchemaConfig schema_for(const ClaimsDataset& dataset, const std::string& frequency_name = "D",
                        const std::string& severity_name = "Y");

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& column, const std::string& what);
  std::size_t line() const { return line_; }
  const std::string& column() const { return column_; }

 private:
  std::size_t line_;
  std::string column_;
};

struct RejectedRow {
  std::size_t line;  // 1-based line number in the file
  std::string reason;
};

struct LoadResult {
  ClaimsDataset dataset;
  std::vector<RejectedRow> rejected;
};

LoadResult load_csv(const std::filesystem::path& path, const SchemaConfig& schema);
LoadResult parse_csv(const std::string& text, const SchemaConfig& schema);

/// RFC 4180 output with shortest round-trip number formatting. Predictor
/// columns are matched to schema fields by name; ignored fields are written
/// empty; total_amount is written as severity * frequency.
void write_csv(const ClaimsDataset& dataset, const std::filesystem::path& path,
               const SchemaConfig& schema);
std::string format_csv(const ClaimsDataset& dataset, const SchemaConfig& schema);

/// Split one CSV record into fields, honouring double-quote escaping.
std::vector<std::string> split_record(const std::string& line, char delimiter);

/// Shortest decimal representation that parses back to the same double.
std::string format_number(double v);

/// Frozen one-hot encoding.
///
/// Numeric columns pass through. A categorical column contributes one
/// indicator per level seen in the fit rows except the first such level
/// (drop-first), so a binary column becomes a single indicator. Levels that
/// were not seen when fitting encode as all zeros.
class Encoding {
 public:
  struct Block {
    std::string column;
    ColumnKind kind = ColumnKind::numeric;
    std::string baseline;             // categorical: dropped level
    std::vector<std::string> levels;  // categorical: one indicator each
  };

  static Encoding fit(const ClaimsDataset& dataset, std::span<const std::size_t> fit_rows);

  std::size_t width() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  const std::vector<Block>& blocks() const { return blocks_; }

  /// Encode rows of any dataset with the same column names and kinds; its
  /// level dictionaries may differ, levels are matched by label.
  models::FeatureMatrix transform(const ClaimsDataset& dataset,
                                  std::span<const std::size_t> rows) const;
  models::FeatureMatrix transform(const ClaimsDataset& dataset) const;
  std::vector<double> transform_row(const ClaimsDataset& dataset, std::size_t row) const;

 private:
  std::vector<Block> blocks_;
  std::vector<std::string> names_;
};

}  // namespace fscp::ingest
